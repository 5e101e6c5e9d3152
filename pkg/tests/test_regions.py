import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmnet import network as nw
from mmnet import regions
from mmnet.errors import InvalidRates, NotProductForm
from mmnet.network import Cut


def hb(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def z_capacity(p):
    # Z channel: input 1 flips to 0 with probability p
    return math.log2(1 + (1 - p) * p ** (p / (1 - p)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.5))
def test_bsc_capacity_closed_form(eps):
    C, p = regions.dmc_capacity([[1 - eps, eps], [eps, 1 - eps]])
    assert C == pytest.approx(1 - hb(eps), abs=1e-8)
    assert np.allclose(p.values, 0.5, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0))
def test_bec_capacity_closed_form(e):
    C, _ = regions.dmc_capacity([[1 - e, 0, e], [0, 1 - e, e]])
    assert C == pytest.approx(1 - e, abs=1e-8)


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.8])
def test_z_channel_capacity(p):
    C, _ = regions.dmc_capacity([[1, 0], [p, 1 - p]])
    assert C == pytest.approx(z_capacity(p), abs=1e-8)


def test_line_rprime_and_all_input_maxima(fixtures):
    line = fixtures["line"]
    caps = regions.link_capacities(line.links)
    C = 1 - hb(0.1)
    bounds = {b.cut.bitmask: b.value for b in regions.rprime_bounds(caps, line)}
    assert bounds[1] == pytest.approx(C, abs=1e-9)      # {1}: link 1->2
    assert bounds[3] == pytest.approx(C, abs=1e-9)      # {1,2}: link 2->3
    assert bounds[2] == pytest.approx(C, abs=1e-9)      # {2}: link 2->3
    for mask in (1, 3):
        b = regions.max_cut_value(line, Cut.from_bitmask(mask, 3))
        assert b.value == pytest.approx(C, abs=1e-4)
        assert b.oracle_value <= b.value + regions.ORACLE_TOL


def test_membership_verdicts(fixtures):
    line = fixtures["line"]
    assert regions.membership_report(line, [0.52, 0, 0], "R_out").verdict == "member"
    assert regions.membership_report(line, [0.54, 0, 0], "R_out").verdict == "non-member"
    assert regions.membership_report(line, [0.52, 0, 0], "R_prime").verdict == "member"
    assert regions.membership_report(line, [0.54, 0, 0], "R_prime").verdict == "non-member"
    rep = regions.membership_report(line, [0.54, 0, 0], "R_prime")
    # only cuts that leave destination 3 outside
    assert [r.cut.bitmask for r in rep.records] == [0, 1, 2, 3]


def test_membership_input_errors(fixtures):
    line = fixtures["line"]
    with pytest.raises(InvalidRates):
        regions.membership_report(line, [0.1, 0.1, 0], "R_out")
    with pytest.raises(InvalidRates):
        regions.membership_report(line, [0.1, 0], "R_out")
    with pytest.raises(NotProductForm):
        regions.membership_report(fixtures["erasure_relay"], [0.1, 0, 0], "R_prime")
    correlated = np.zeros((2, 2, 1))
    correlated[0, 0, 0] = correlated[1, 1, 0] = 0.5
    from mmnet.prob import make_joint

    p = make_joint(line.x_axes, correlated)
    with pytest.raises(NotProductForm):
        regions.membership_report(line, [0.1, 0, 0], "R_in", p=p)


def test_inner_bound_equals_outer_on_erasure_fixture(fixtures):
    er = fixtures["erasure_relay"]
    p = nw.uniform_product_input(er)
    rin = regions.membership_report(er, [0.3, 0, 0], "R_in", p=p)
    star = regions.membership_report(er, [0.3, 0, 0], "R_out*", p=p)
    for a, b in zip(rin.records, star.records):
        assert a.bound == pytest.approx(b.bound, abs=1e-3)
    assert all(r.penalty == pytest.approx(0.0, abs=1e-12) for r in rin.records)


def test_cut_value_matches_generic_mi(fixtures):
    rng = np.random.default_rng(5)
    line = fixtures["line"]
    for mask in range(1, 7):
        cut = Cut.from_bitmask(mask, 3)
        flat = rng.dirichlet(np.ones(line.n_inputs))
        p = regions._as_input_pmf(line, flat)
        assert regions.cut_value_fast(line, cut, flat) == pytest.approx(regions.cut_value(line, cut, p), abs=1e-12)
