import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import rel_entr
from scipy.stats import entropy as scipy_entropy

from mmnet import prob
from mmnet.errors import (
    AxisOverlap,
    InvalidLambda,
    NegativeMass,
    NotNormalized,
    ShapeMismatch,
    ZeroMassConditioning,
)
from mmnet.prob import make_joint

from conftest import pmfs


def renyi_oracle(p, q, lam):
    # direct sum in plain floats
    if lam == 1.0:
        return sum(a * math.log2(a / b) for a, b in zip(p, q) if a > 0)
    s = sum(a ** lam * b ** (1 - lam) for a, b in zip(p, q) if a > 0)
    return math.log2(s) / (lam - 1)


def test_joint_validation():
    with pytest.raises(NotNormalized):
        make_joint([("A", 2)], [0.5, 0.6])
    with pytest.raises(NegativeMass):
        make_joint([("A", 2)], [1.5, -0.5])
    with pytest.raises(ShapeMismatch):
        make_joint([("A", 2)], [0.2, 0.3, 0.5])
    p = make_joint([("B", 2), ("A", 3)], np.arange(6) / 15)
    # axes are stored in sorted name order
    assert p.names == ("A", "B")
    assert np.allclose(p.values, (np.arange(6) / 15).reshape(2, 3).T)


def test_independent_rejects_shared_axes():
    a = make_joint([("A", 2)], [0.5, 0.5])
    with pytest.raises(AxisOverlap):
        prob.independent(a, a)


@settings(max_examples=100, deadline=None)
@given(pmfs(6), pmfs(6, zeros=False))
def test_entropy_and_kl_match_scipy(p, q):
    P = make_joint([("X", 6)], p)
    Q = make_joint([("X", 6)], q)
    assert prob.entropy(P) == pytest.approx(scipy_entropy(p, base=2), abs=1e-12)
    assert prob.relative_entropy(P, Q) == pytest.approx(rel_entr(p, q).sum() / math.log(2), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(pmfs(5), pmfs(5, zeros=False), st.sampled_from([1.0, 1.1, 2.0, 4.0, 9.5]))
def test_renyi_matches_direct_sum(p, q, lam):
    got = prob.renyi_divergence(make_joint([("X", 5)], p), make_joint([("X", 5)], q), lam)
    assert got == pytest.approx(renyi_oracle(p, q, lam), abs=1e-10)


def test_renyi_infinite_off_support_and_order_check():
    p = make_joint([("X", 2)], [0.5, 0.5])
    q = make_joint([("X", 2)], [1.0, 0.0])
    assert prob.renyi_divergence(p, q, 2.0) == math.inf
    with pytest.raises(InvalidLambda):
        prob.renyi_divergence(p, p, 0.5)


def test_renyi_bernoulli_frozen():
    # D_2(Ber(.5)||Ber(.1)) = log2(.25/.1 + .25/.9)
    p = make_joint([("X", 2)], [0.5, 0.5])
    q = make_joint([("X", 2)], [0.1, 0.9])
    assert prob.renyi_divergence(p, q, 2.0) == pytest.approx(math.log2(0.25 / 0.1 + 0.25 / 0.9), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(pmfs(12))
def test_mutual_information_identities(v):
    p = make_joint([("A", 3), ("B", 4)], v.reshape(3, 4))
    mi = prob.mutual_information(p, ["A"], ["B"])
    h = prob.entropy
    assert mi == pytest.approx(h(p, ["A"]) + h(p, ["B"]) - h(p), abs=1e-10)
    assert mi >= -1e-12
    indep = prob.product_marginals(p, [["A"], ["B"]])
    assert mi == pytest.approx(prob.relative_entropy(p, indep), abs=1e-10)


def test_condition_flags_zero_mass():
    p = make_joint([("A", 2), ("B", 2)], [[0.5, 0.5], [0.0, 0.0]])
    k = prob.condition(p, ["A"])
    assert k.undefined.any()
    with pytest.raises(ZeroMassConditioning):
        prob.condition(p, ["A"], on_zero="raise")
    filled = k.fill_undefined("uniform")
    assert np.allclose(filled.matrix(), [[0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(k.fill_undefined("first").matrix()[1], [1.0, 0.0])


def test_markov_residual():
    rng = np.random.default_rng(3)
    r = rng.dirichlet(np.ones(6)).reshape(2, 3)
    k = rng.dirichlet(np.ones(2), size=3)
    p = make_joint([("X", 2), ("Y", 3), ("Z", 2)], r[:, :, None] * k[None])
    assert prob.markov_residual(p, ["X"], ["Y"], ["Z"]) < 1e-15
    q = make_joint([("X", 2), ("Y", 1), ("Z", 2)], [[[0.5], [0.0]], [[0.0], [0.5]]])
    assert prob.markov_residual(q.marginal(["X", "Y", "Z"]), ["X"], ["Y"], ["Z"]) == pytest.approx(0.25)
