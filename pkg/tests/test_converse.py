import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmnet import codes, converse, suites
from mmnet.errors import (
    AlphabetMismatch,
    AlphaOne,
    InvalidDestination,
    InvalidLambda,
    InvalidProbability,
    LambdaOutOfRange,
    NonUniformMarginal,
)
from mmnet.network import Cut
from mmnet.prob import make_joint


def test_prop2_equality_case():
    p = make_joint([("U", 2), ("V", 2)], np.eye(2) / 2)
    q = make_joint([("V", 2)], [0.5, 0.5])
    r = converse.prop2_bound(p, q, 2.0, ["U"])
    assert r.alpha == 0.0
    assert r.lhs == pytest.approx(1.0, abs=1e-12) and r.rhs == pytest.approx(1.0, abs=1e-12)


def test_prop2_errors():
    q = make_joint([("V", 2)], [0.5, 0.5])
    with pytest.raises(InvalidLambda):
        converse.prop2_bound(make_joint([("U", 2), ("V", 2)], np.eye(2) / 2), q, 1.0, ["U"])
    with pytest.raises(NonUniformMarginal):
        converse.prop2_bound(make_joint([("U", 2), ("V", 2)], [[0.7, 0], [0, 0.3]]), q, 2.0, ["U"])
    with pytest.raises(AlphaOne):
        converse.prop2_bound(make_joint([("U", 2), ("V", 2)], [[0, 0.5], [0.5, 0]]), q, 2.0, ["U"])
    with pytest.raises(AlphabetMismatch):
        converse.prop2_bound(make_joint([("U", 2), ("V", 3)], np.full((2, 3), 1 / 6)),
                             make_joint([("V", 3)], np.full(3, 1 / 3)), 2.0, ["U"])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(1.01, 8.0), st.integers(1, 6))
def test_fano_rhs_decreases_in_alpha(alpha, lam, bits):
    a = converse.fano_renyi_rhs(bits, alpha, lam)
    b = converse.fano_renyi_rhs(bits, min(alpha + 0.005, 0.999), lam)
    assert b <= a + 1e-12
    assert converse.fano_renyi_rhs(bits, 1.0, lam) == -math.inf


def test_prop3_range_and_independent_case():
    rng = np.random.default_rng(0)
    v = np.einsum("z,zx,zy->xyz", rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3), 2), rng.dirichlet(np.ones(2), 2))
    p = make_joint([("X", 3), ("Y", 2), ("Z", 2)], v)
    r = converse.prop3_gap(p, 1.1, ["X"], ["Y"], ["Z"])
    assert r.d_lambda == pytest.approx(0.0, abs=1e-12) and r.d_one == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(LambdaOutOfRange):
        converse.prop3_gap(p, 1.3, ["X"], ["Y"], ["Z"])
    with pytest.raises(LambdaOutOfRange):
        converse.prop3_gap(p, 1.0, ["X"], ["Y"], ["Z"])


def test_lambda_schedule_gate():
    assert converse.lambda_schedule(16) == 1.25
    assert converse.lambda_schedule(4) == 1.5
    assert not converse.lambda_in_window(15) and converse.lambda_in_window(16)


def test_tilted_sequence_order_one_matches_induced(fixtures):
    spec = fixtures["line"]
    code = codes.generate_random_code(spec, 0.5, 2, 0)
    p = codes.induced_distribution(spec, code, include_estimates=False)
    cut = Cut([1])
    ts = converse.build_tilted_sequence(p, cut, 1.0, 2, spec=spec)
    ind = converse.induced_letter_joints(p, cut, 2, ts.x_nodes)
    for j, a in zip(ts.joints, ind):
        assert np.abs(j.values.reshape(a.shape) - a).sum() <= 1e-12
    assert ts.log_normalizers[-1] == pytest.approx(0.0, abs=1e-12)


def test_tilted_sequence_bookkeeping(fixtures):
    spec = fixtures["erasure_relay"]
    code = codes.generate_random_code(spec, 0.5, 2, 1)
    p = codes.induced_distribution(spec, code, include_estimates=False)
    ts = converse.build_tilted_sequence(p, Cut([1, 2]), 2.0, 2, spec=spec)
    assert len(ts.joints) == 2
    for j in ts.joints:
        assert j.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert ts.route_delta <= 1e-9 and ts.substitution_delta <= 1e-12
    # per-letter divergences sum to the aggregate chain entry
    assert ts.per_letter_sum == pytest.approx(sum(ts.per_letter), abs=1e-12)


@pytest.mark.parametrize("name", ["bsc", "erasure_relay", "line_feedback"])
def test_lemma1_and_certificates_hold(fixtures, name):
    lem, cert = suites.lemma1_and_certificates(fixtures[name], n_values=(1, 2), lams=(1.0, 1.1, 2.0),
                                               seeds=range(2))
    assert lem.count > 0 and cert.count > 0
    assert lem.failures == 0, lem.details
    assert cert.failures == 0, cert.details


def test_certificate_contents(fixtures):
    spec = fixtures["bsc"]
    code = codes.generate_random_code(spec, 0.5, 2, 0)
    c = converse.single_letter_certificate(spec, code, Cut([1]), 2, 2.0)
    assert c.holds
    assert list(c.chain) == [converse.CHAIN[0][0]] + [step[2] for step in converse.CHAIN]
    assert c.rate_bound <= c.lhs + 1e-9
    assert c.tilt_identity <= 1e-9
    assert c.jensen_mean <= c.aggregate + 1e-9
    js = c.to_json()
    assert js["cut_bitmask"] == 1 and js["holds"]


def test_certificate_errors(fixtures):
    spec = fixtures["bsc"]
    code = codes.generate_random_code(spec, 0.5, 2, 0)
    with pytest.raises(LambdaOutOfRange):
        converse.single_letter_certificate(spec, code, Cut([1]), 2, 1.0)
    with pytest.raises(InvalidDestination):
        converse.single_letter_certificate(spec, code, Cut([1]), 1, 2.0)
    with pytest.raises(InvalidProbability):
        converse.single_letter_certificate(spec, code, Cut([1]), 2, 2.0, eps_bar=0.0)
