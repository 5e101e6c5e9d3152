import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmnet import codes
from mmnet.errors import BudgetExhausted, ShapeMismatch


def brute_error(code, flip=0.1):
    # pure-python enumeration for the 2-node BSC fixture (source 1, destination 2)
    n, M = code.n, code.message_sizes[0]
    table = code.decoders[(1, 2)]
    err = 0.0
    for w in range(M):
        x = [int(code.encoders[(1, k)].reshape(M, -1)[w, 0]) for k in range(1, n + 1)]
        for y in itertools.product(range(2), repeat=n):
            pr = math.prod(1 - flip if a == b else flip for a, b in zip(x, y))
            if int(table[(0,) + y]) != w:
                err += pr / M
    return err


@pytest.mark.parametrize("rate,n", [(0.5, 2), (0.5, 4), (0.75, 4), (0.34, 6)])
def test_exact_error_matches_enumeration(fixtures, rate, n):
    bsc = fixtures["bsc"]
    for seed in range(3):
        code = codes.generate_random_code(bsc, rate, n, seed)
        assert codes.exact_error_probability(bsc, code) == pytest.approx(brute_error(code), abs=1e-12)


def test_fast_and_general_paths_agree(fixtures):
    # the table decoder depends only on destination outputs, so both paths apply
    line = fixtures["line"]
    code = codes.generate_random_code(line, 0.5, 2, 4, decoder="table")
    fast = codes.exact_error_probability(line, code)
    p = codes.induced_distribution(line, code)
    correct = 0.0
    arr = p.values
    wi, hi = p.names.index("W1"), p.names.index("Wh1_3")
    for w in range(code.message_sizes[0]):
        sl = [slice(None)] * arr.ndim
        sl[wi], sl[hi] = w, w
        correct += arr[tuple(sl)].sum()
    assert fast == pytest.approx(1 - correct, abs=1e-12)


def test_ml_beats_random_table(fixtures):
    bsc = fixtures["bsc"]
    for seed in range(5):
        ml = codes.generate_random_code(bsc, 0.5, 4, seed)
        tb = codes.generate_random_code(bsc, 0.5, 4, seed, decoder="table")
        assert codes.exact_error_probability(bsc, ml) <= codes.exact_error_probability(bsc, tb) + 1e-12


def test_message_size_and_rng():
    assert codes.message_size(0.25, 12) == 8
    assert codes.message_size(0.75, 4) == 8
    assert codes.message_size(0.0, 5) == 1
    a = codes.make_rng(3, "channel", 2, 5).random(4)
    b = codes.make_rng(3, "channel", 2, 5).random(4)
    c = codes.make_rng(3, "channel", 2, 6).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_repetition_code_exact(fixtures):
    bec = fixtures["bec"]
    code = codes.repetition_code(bec, bits=3, reps=4)
    # any fully erased bit sends the decoder to message 1, which is right only when w = 1
    expected = (1 - (15 / 16) ** 3) * 7 / 8
    assert codes.exact_error_probability(bec, code) == pytest.approx(expected, abs=1e-12)
    est = codes.monte_carlo_error(bec, code, 20_000, seed=1)
    assert abs(est.point - expected) <= est.half_width


def test_monte_carlo_is_seeded(fixtures):
    bsc = fixtures["bsc"]
    code = codes.generate_random_code(bsc, 0.5, 4, 0)
    a = codes.monte_carlo_error(bsc, code, 5000, seed=7)
    b = codes.monte_carlo_error(bsc, code, 5000, seed=7)
    assert a == b
    exact = codes.exact_error_probability(bsc, code)
    assert abs(a.point - exact) <= 2 * a.half_width + 1e-3


def test_budget_enforced(fixtures):
    line = fixtures["line"]
    code = codes.generate_random_code(line, 0.5, 3, 0, decoder="table")
    with pytest.raises(BudgetExhausted):
        codes.induced_distribution(line, code, budget_cells=100)
    with pytest.raises(BudgetExhausted):
        codes.exact_error_probability(line, code, budget_cells=4)


def test_induced_law_is_memoryless(fixtures):
    for name in ("bsc", "line", "line_feedback"):
        spec = fixtures[name]
        code = codes.generate_random_code(spec, 0.5, 2, 1, feedback=True)
        p = codes.induced_distribution(spec, code)
        assert codes.memoryless_residual(spec, p, 2) <= 1e-12


def test_code_json_roundtrip(fixtures):
    code = codes.generate_random_code(fixtures["line"], 0.5, 2, 3, feedback=True)
    back = codes.code_from_json(codes.code_to_json(code))
    assert back.n == code.n and back.message_sizes == code.message_sizes
    for key, t in code.encoders.items():
        assert np.array_equal(back.encoders[key], t)
    for key, t in code.decoders.items():
        assert np.array_equal(back.decoders[key], t)


def test_bad_table_rejected(fixtures):
    bsc = fixtures["bsc"]
    code = codes.generate_random_code(bsc, 0.5, 2, 0)
    code.encoders[(1, 1)] = np.zeros((3,), dtype=int)
    with pytest.raises(ShapeMismatch):
        code.validate(bsc)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([0.25, 0.5, 0.75, 1.0]), st.integers(1, 6), st.integers(0, 50))
def test_counting_bound_is_a_lower_bound(rate, n, seed):
    from mmnet import io

    bec = io.load_fixture("bec")
    code = codes.generate_random_code(bec, rate, n, seed)
    lb = codes.counting_bound(bec, code.message_sizes, n)
    assert codes.exact_error_probability(bec, code) >= lb - 1e-12


def test_phase_csv_deterministic(fixtures):
    bec = fixtures["bec"]
    a = codes.phase_transition_experiment(bec, [0.25], [4], [0, 1], timing=False)
    b = codes.phase_transition_experiment(bec, [0.25], [4], [0, 1], timing=False)
    assert codes.cells_to_csv(a) == codes.cells_to_csv(b)
    assert codes.cells_to_csv(a).splitlines()[0] == ",".join(codes.CSV_COLUMNS)
