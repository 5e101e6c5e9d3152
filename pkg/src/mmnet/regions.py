"""Cut enumeration, cut-value maximization and rate-region membership.

The cut value ``I(X_T; Y_{T^c} | X_{T^c})`` is concave in the joint input law.
Its gradient with respect to ``p(x_T, x_{T^c})`` is the divergence between
the row ``q(.|x)`` and the current output law given ``x_{T^c}``, and the largest
gradient entry bounds the maximum from above; ascent stops once that duality
gap is small.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AxisMismatch,
    BudgetExhausted,
    InvalidCut,
    InvalidRates,
    MmnetError,
    NotProductForm,
)
from .network import (
    Cut,
    LinkChannelTable,
    NetworkSpec,
    is_product_form,
    marginal_channel,
    product_input,
    region_cuts,
    x_name,
)
from .prob import (
    CondKernel,
    JointPmf,
    compose,
    conditional_mutual_information,
    make_joint,
)

LN2 = np.log(2.0)
TINY = 1e-300

OPT_TOL = 1e-4          # verdict tolerance for optimized regions (bits)
EXACT_TOL = 1e-9        # verdict tolerance for regions evaluated in closed form
ORACLE_TOL = 1e-3       # allowed excess of the grid oracle over the ascent value
N_RESTARTS = 16
GRID_RESOLUTION = 32
GRID_MAX_POINTS = 60_000

ALL_INPUTS = "all-inputs"
PRODUCT_INPUTS = "product-inputs"


class OracleDisagreement(MmnetError, RuntimeError):
    """The grid oracle found a clearly better input than the optimizer."""


# --------------------------------------------------------------------------
# cut tensors


@dataclass(frozen=True)
class _CutArrays:
    """Marginal channel as ``W[a, c, y]`` with ``a`` over ``X_T`` and ``c`` over ``X_{T^c}``."""

    W: np.ndarray
    logW: np.ndarray
    t_nodes: tuple
    tc_nodes: tuple
    perm: tuple           # node-order axes -> (T nodes, T^c nodes)
    in_sizes: tuple

    def to_ac(self, p_flat: np.ndarray) -> np.ndarray:
        """Flat node-order input law(s) ``(..., |X_I|)`` -> ``(..., a, c)``."""
        lead = p_flat.shape[:-1]
        arr = p_flat.reshape(lead + self.in_sizes)
        k = len(lead)
        arr = np.transpose(arr, tuple(range(k)) + tuple(k + i for i in self.perm))
        return arr.reshape(lead + self.W.shape[:2])

    def from_ac(self, P: np.ndarray) -> np.ndarray:
        lead = P.shape[:-2]
        k = len(lead)
        sizes = tuple(self.in_sizes[i] for i in self.perm)
        arr = P.reshape(lead + sizes)
        inv = np.argsort(self.perm)
        arr = np.transpose(arr, tuple(range(k)) + tuple(k + int(i) for i in inv))
        return arr.reshape(lead + (-1,))


def _cut_arrays(spec: NetworkSpec, cut: Cut) -> _CutArrays:
    tc = cut.complement(spec.node_count)
    if any(not 1 <= i <= spec.node_count for i in cut.T):
        raise InvalidCut(f"cut {cut} has nodes outside 1..{spec.node_count}")
    if not tc:
        raise InvalidCut("cut covers every node; no outputs remain")
    t = cut.members()
    N = spec.node_count
    drop = tuple(N + i - 1 for i in t)
    rows = spec.channel.sum(axis=drop) if drop else np.asarray(spec.channel)
    perm = tuple(i - 1 for i in t) + tuple(j - 1 for j in tc)
    rows = np.transpose(rows, perm + tuple(range(N, rows.ndim)))
    a = int(np.prod([spec.input_sizes[i - 1] for i in t], dtype=np.int64))
    c = int(np.prod([spec.input_sizes[j - 1] for j in tc], dtype=np.int64))
    W = np.ascontiguousarray(rows.reshape(a, c, -1))
    with np.errstate(divide="ignore"):
        logW = np.where(W > 0, np.log(np.maximum(W, TINY)), 0.0)
    return _CutArrays(W, logW, t, tc, perm, spec.input_sizes)


def _objective(P: np.ndarray, ca: _CutArrays):
    """Value and gradient (bits) of the cut objective for laws ``P[..., a, c]``."""
    W = ca.W
    S = P.sum(axis=-2)                                   # (..., c)
    M = np.einsum("...ac,acy->...cy", P, W)
    fallback = W.mean(axis=0)                            # output law under uniform x_T
    Sx = S[..., None]
    m = np.where(Sx > 0, M / np.where(Sx > 0, Sx, 1.0), fallback)
    logm = np.log(np.maximum(m, TINY))
    # g[a, c] = sum_y W log(W / m)
    g = (np.einsum("acy,acy->ac", W, ca.logW)[(None,) * (P.ndim - 2)]
         - np.einsum("acy,...cy->...ac", W, logm)) / LN2
    value = np.sum(P * g, axis=(-2, -1))
    return value, g


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - np.argmax(cond[..., ::-1], axis=-1) - 1
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


# --------------------------------------------------------------------------
# single cut


@dataclass
class CutBound:
    cut: Cut
    value: float
    argmax_input: JointPmf | None
    mode: str
    penalty: float = 0.0
    upper: float = float("nan")
    exhausted: bool = False
    oracle_value: float | None = None
    oracle_resolution: int | None = None


def _input_names(spec: NetworkSpec) -> list[str]:
    return [x_name(i) for i in spec.nodes]


def _flat_input(spec: NetworkSpec, p: JointPmf) -> np.ndarray:
    names = _input_names(spec)
    if sorted(p.names) != sorted(names):
        raise AxisMismatch(f"input law must be over {names}, got {list(p.names)}")
    from . import _named

    return _named.transpose_to(p.values, p.names, names).reshape(-1)


def _as_input_pmf(spec: NetworkSpec, flat: np.ndarray) -> JointPmf:
    flat = np.maximum(np.asarray(flat, dtype=float), 0.0)
    flat = flat / flat.sum()
    return make_joint(spec.x_axes, flat.reshape(spec.input_sizes))


def enumerate_cuts(spec: NetworkSpec) -> list[Cut]:
    """Cuts whose complement contains a destination, ordered by bitmask."""
    return region_cuts(spec)


def cut_value(spec: NetworkSpec, cut: Cut, p: JointPmf) -> float:
    """``I(X_T; Y_{T^c} | X_{T^c})`` under ``p`` composed with the marginal channel."""
    names = _input_names(spec)
    if sorted(p.names) != sorted(names):
        raise AxisMismatch(f"input law must be over {names}, got {list(p.names)}")
    kern = marginal_channel(spec, cut)
    joint = compose(p, kern)
    t = [x_name(i) for i in cut.members()]
    tc = cut.complement(spec.node_count)
    return conditional_mutual_information(joint, t, kern.to_names, [x_name(j) for j in tc])


def cut_value_fast(spec: NetworkSpec, cut: Cut, p: JointPmf | np.ndarray) -> float:
    """Same quantity as :func:`cut_value` through the matrix form used by the optimizers."""
    ca = _cut_arrays(spec, cut)
    flat = _flat_input(spec, p) if isinstance(p, JointPmf) else np.asarray(p, dtype=float)
    v, _ = _objective(ca.to_ac(flat), ca)
    return float(v)


def _grid_points(d: int, m: int) -> np.ndarray:
    """All compositions of ``m`` into ``d`` nonnegative parts, divided by ``m``."""
    if d == 1:
        return np.ones((1, 1))
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + [left])
            return
        for v in range(left + 1):
            rec(prefix + [v], left - v, slots - 1)

    rec([], m, d)
    return np.array(out, dtype=float) / m


def grid_resolution(d: int, requested: int | None = None) -> int:
    """Finest resolution ``<= requested`` whose simplex grid has at most ``GRID_MAX_POINTS`` points."""
    m = GRID_RESOLUTION if requested is None else int(requested)
    while m > 1 and comb(m + d - 1, d - 1) > GRID_MAX_POINTS:
        m -= 1
    return max(m, 1)


def grid_oracle(spec: NetworkSpec, cut: Cut, resolution: int | None = None,
                product: bool = False) -> tuple[float, np.ndarray, int]:
    """Best cut value over a regular simplex grid; returns ``(value, flat input, resolution)``.

    With ``product=True`` the grid runs over each node's simplex and the joint
    is the product law.
    """
    ca = _cut_arrays(spec, cut)
    if not product:
        d = spec.n_inputs
        m = grid_resolution(d, resolution)
        pts = _grid_points(d, m)
        flats = pts
    else:
        sizes = spec.input_sizes
        free = [s for s in sizes if s > 1]
        total_cap = GRID_MAX_POINTS
        m = GRID_RESOLUTION if resolution is None else int(resolution)
        while m > 1 and np.prod([comb(m + s - 1, s - 1) for s in free]) > total_cap:
            m -= 1
        grids = [_grid_points(s, m) if s > 1 else np.ones((1, 1)) for s in sizes]
        idx = np.indices([g.shape[0] for g in grids]).reshape(len(grids), -1).T
        flats = np.empty((idx.shape[0], spec.n_inputs))
        for r, combo in enumerate(idx):
            v = np.ones(1)
            for g, k in zip(grids, combo):
                v = np.multiply.outer(v, g[k]).reshape(-1)
            flats[r] = v
    best_v, best_x = -np.inf, None
    for start in range(0, flats.shape[0], 4096):
        chunk = flats[start:start + 4096]
        vals, _ = _objective(ca.to_ac(chunk), ca)
        k = int(np.argmax(vals))
        if vals[k] > best_v + 1e-12:
            best_v, best_x = float(vals[k]), chunk[k].copy()
    return best_v, best_x, m


def _pick(values: np.ndarray, points: np.ndarray, tie: float = 1e-9) -> int:
    """Index of the lexicographically smallest point among those within ``tie`` of the best."""
    best = np.max(values)
    cands = [i for i in range(len(values)) if values[i] >= best - tie]
    return min(cands, key=lambda i: tuple(np.round(points[i], 12)))


def _start_points(d: int, seed_key: Sequence[int], n: int) -> np.ndarray:
    rng = np.random.default_rng(list(seed_key))
    pts = [np.full(d, 1.0 / d)]
    pts += list(rng.dirichlet(np.ones(d), size=n - 1))
    return np.array(pts)


def _ascend_joint(ca: _CutArrays, starts: np.ndarray, max_iter: int, tol: float):
    """Batched projected-gradient ascent with Armijo backtracking; one row per restart."""
    R = starts.shape[0]
    X = starts.copy()
    step = np.ones(R)
    active = np.ones(R, dtype=bool)
    val, g = _objective(ca.to_ac(X), ca)
    gflat = ca.from_ac(g)
    it = 0
    while it < max_iter:
        active &= (gflat.max(axis=1) - val) > tol
        if not active.any():
            break
        it += 1
        idx = np.nonzero(active)[0]
        Xa, ga, va = X[idx], gflat[idx].copy(), val[idx].copy()
        s = step[idx].copy()
        accepted = np.zeros(len(idx), dtype=bool)
        for _ in range(60):
            rows = np.nonzero(~accepted & (s >= 1e-14))[0]
            if rows.size == 0:
                break
            cand = _project_simplex(Xa[rows] + s[rows, None] * ga[rows])
            cv, cg = _objective(ca.to_ac(cand), ca)
            ok = (cv >= va[rows] + 1e-4 * np.sum(ga[rows] * (cand - Xa[rows]), axis=1) - 1e-15) \
                & (np.abs(cand - Xa[rows]).max(axis=1) > 0)
            good = rows[ok]
            s[rows[~ok]] *= 0.5
            if good.size == 0:
                continue
            X[idx[good]] = cand[ok]
            val[idx[good]] = cv[ok]
            gflat[idx[good]] = ca.from_ac(cg[ok])
            accepted[good] = True
        step[idx] = np.where(accepted, np.minimum(s * 2.0, 1e6), s)
        active[idx[~accepted]] = False
        active[idx[val[idx] - va <= 1e-14]] = False
    exhausted = it >= max_iter and bool((active & ((gflat.max(axis=1) - val) > tol)).any())
    return X, val, gflat.max(axis=1), exhausted


def max_cut_value(spec: NetworkSpec, cut: Cut, mode: str = ALL_INPUTS, budget: int | None = None,
                  oracle: bool = True, oracle_resolution: int | None = None,
                  restarts: int = N_RESTARTS, tol: float = 1e-9) -> CutBound:
    """Maximize the cut value over all input laws or over product laws.

    ``budget`` caps the number of ascent iterations per restart. When it runs
    out the best value so far is returned with ``exhausted=True``. In
    all-inputs mode a grid oracle is evaluated and :class:`OracleDisagreement`
    is raised if it beats the ascent by more than ``ORACLE_TOL``.
    """
    if mode not in (ALL_INPUTS, PRODUCT_INPUTS):
        raise ValueError(f"unknown mode {mode!r}")
    if not cut.T:
        return CutBound(cut, 0.0, _as_input_pmf(spec, np.full(spec.n_inputs, 1.0 / spec.n_inputs)),
                        mode, upper=0.0)
    ca = _cut_arrays(spec, cut)
    max_iter = 5000 if budget is None else int(budget)
    key = (cut.bitmask, 0 if mode == ALL_INPUTS else 1)
    if mode == ALL_INPUTS:
        starts = _start_points(spec.n_inputs, key, restarts)
        X, vals, uppers, exhausted = _ascend_joint(ca, starts, max_iter, tol)
        k = _pick(vals, X)
        best, x_best, upper = float(vals[k]), X[k], float(np.min(uppers))
    else:
        X, vals, exhausted = _ascend_product(spec, ca, key, restarts, max_iter)
        k = _pick(vals, X)
        best, x_best, upper = float(vals[k]), X[k], float("nan")
    bound = CutBound(cut, best, _as_input_pmf(spec, x_best), mode, upper=upper, exhausted=exhausted)
    if oracle and mode == ALL_INPUTS:
        ov, _, res = grid_oracle(spec, cut, oracle_resolution)
        bound.oracle_value, bound.oracle_resolution = ov, res
        if ov > best + ORACLE_TOL:
            raise OracleDisagreement(
                f"grid oracle {ov:.9f} exceeds ascent value {best:.9f} on cut {cut}")
    return bound


# --------------------------------------------------------------------------
# product laws


def _product_flat(parts: list[np.ndarray]) -> np.ndarray:
    """Row-wise outer product of per-node laws ``(R, s_i)`` -> ``(R, prod s_i)``."""
    out = parts[0]
    for p in parts[1:]:
        out = (out[:, :, None] * p[:, None, :]).reshape(out.shape[0], -1)
    return out


def _block_grad(gflat: np.ndarray, parts: list[np.ndarray], i: int, sizes) -> np.ndarray:
    R = gflat.shape[0]
    G = gflat.reshape((R,) + tuple(sizes))
    for j in reversed(range(len(sizes))):
        if j == i:
            continue
        shape = [R] + [1] * len(sizes)
        shape[j + 1] = sizes[j]
        G = (G * parts[j].reshape(shape)).sum(axis=j + 1, keepdims=True)
    return G.reshape(R, -1)


def _ascend_product(spec: NetworkSpec, ca: _CutArrays, key, restarts: int, max_iter: int):
    sizes = spec.input_sizes
    rng = np.random.default_rng(list(key))
    parts = []
    for s in sizes:
        rows = [np.full(s, 1.0 / s)] + list(rng.dirichlet(np.ones(s), size=restarts - 1))
        parts.append(np.array(rows))
    def fun(flat):
        v, g = _objective(ca.to_ac(flat), ca)
        return v, ca.from_ac(g)

    return _product_coordinate_ascent(fun, parts, sizes, max_iter)


def _product_coordinate_ascent(fun, parts, sizes, max_iter, tol=1e-12):
    """Block-coordinate projected-gradient ascent over per-node simplices (batched over restarts).

    ``fun(flat)`` returns ``(values, joint gradient)`` for rows of joint laws.
    """
    R = parts[0].shape[0]
    steps = [np.ones(R) for _ in sizes]
    flat = _product_flat(parts)
    val, g = fun(flat)
    it = 0
    exhausted = False
    while True:
        it += 1
        if it > max_iter:
            exhausted = True
            break
        before = val.copy()
        for i, s in enumerate(sizes):
            if s == 1:
                continue
            Gi = _block_grad(g, parts, i, sizes)
            cur = parts[i]
            st = steps[i]
            done = np.zeros(R, dtype=bool)
            for _ in range(40):
                todo = ~done
                if not todo.any():
                    break
                cand = _project_simplex(cur + st[:, None] * Gi)
                trial = list(parts)
                trial[i] = np.where(todo[:, None], cand, cur)
                tv, tg = fun(_product_flat(trial))
                ok = todo & (tv >= val + 1e-4 * np.sum(Gi * (cand - cur), axis=1) - 1e-15) \
                    & (np.abs(cand - cur).max(axis=1) > 0)
                if ok.any():
                    parts[i] = np.where(ok[:, None], cand, parts[i])
                    val = np.where(ok, tv, val)
                    g = np.where(ok[:, None], tg, g)
                    cur = parts[i]
                done |= ok
                st = np.where(done, st, st * 0.5)
                done |= st < 1e-14
            steps[i] = np.minimum(np.where(st < 1e-14, 1.0, st * 2.0), 1e6)
        if np.all(val - before <= tol):
            break
    return _product_flat(parts), val, exhausted


# --------------------------------------------------------------------------
# link capacities


def dmc_capacity(link, tol: float = 1e-9, max_iter: int = 1_000_000) -> tuple[float, JointPmf]:
    """Capacity (bits) of a single channel by alternating maximization.

    Iterates until the gap between the mutual information and the
    ``max_x D(q(.|x) || p q)`` upper bound is at most ``tol``.
    """
    if isinstance(link, CondKernel):
        Wm = link.fill_undefined().matrix()
        axes = link.from_axes
    else:
        Wm = np.asarray(link, dtype=float)
        if Wm.ndim != 2:
            raise ValueError("channel matrix must be 2-D")
        axes = (("X", Wm.shape[0]),)
    nx = Wm.shape[0]
    p = np.full(nx, 1.0 / nx)
    with np.errstate(divide="ignore"):
        logW = np.where(Wm > 0, np.log(np.maximum(Wm, TINY)), 0.0)
    lower = 0.0
    for _ in range(max_iter):
        m = p @ Wm
        logm = np.log(np.maximum(m, TINY))
        D = np.sum(Wm * (logW - logm[None, :]), axis=1)   # nats
        lower = float(p @ D)
        upper = float(D.max())
        if (upper - lower) / LN2 <= tol:
            break
        p = p * np.exp(D - D.max())
        p /= p.sum()
    C = max(lower / LN2, 0.0)
    pmf = make_joint(axes, p.reshape(tuple(a[1] if isinstance(a, tuple) else a.size for a in axes)))
    return C, pmf


@dataclass
class LinkCapacities:
    capacities: dict            # (i, j) -> bits
    inputs: dict                # (i, j) -> optimal input vector


def link_capacities(links: LinkChannelTable) -> LinkCapacities:
    caps, inputs = {}, {}
    for (i, j), mat in links.links.items():
        C, p = dmc_capacity(mat)
        caps[(i, j)] = C
        inputs[(i, j)] = np.asarray(p.values).reshape(-1)
    return LinkCapacities(caps, inputs)


def rprime_bounds(links: LinkCapacities, spec: NetworkSpec, cuts: Sequence[Cut] | None = None) -> list[CutBound]:
    """Per-cut sum of the capacities of links crossing from ``T`` to ``T^c``."""
    if cuts is None:
        cuts = enumerate_cuts(spec)
    table = spec.links
    if table is None:
        raise NotProductForm("network was not built from independent links")
    per_node = []
    for i in spec.nodes:
        v = np.ones(1)
        for j in table.out_components(i):
            comp = links.inputs.get((i, j), np.ones(1))
            v = np.multiply.outer(v, comp).reshape(-1)
        per_node.append(v)
    argmax = product_input(spec, per_node)
    out = []
    for cut in cuts:
        tc = cut.complement(spec.node_count)
        val = sum(links.capacities.get((i, j), 0.0) for i in cut.members() for j in tc)
        out.append(CutBound(cut, float(val), argmax, PRODUCT_INPUTS, upper=float(val)))
    return out


# --------------------------------------------------------------------------
# inner-bound penalty


def penalty(spec: NetworkSpec, cut: Cut, p: JointPmf) -> float:
    """``H(Y_T | X_I, Y_{T^c})`` under ``p`` composed with the channel (bits)."""
    if not cut.T:
        return 0.0
    flat = _flat_input(spec, p)
    full = spec.channel_matrix()
    tc_mat = _cut_arrays(spec, cut)
    # H(Y_I | X_I) - H(Y_{T^c} | X_I)
    h_full = _row_entropy(full)
    W = tc_mat.W  # (a, c, y)
    h_tc = _row_entropy(W.reshape(-1, W.shape[-1]))
    h_tc = tc_mat.from_ac(h_tc.reshape(W.shape[:2])[None])[0]
    return max(float(flat @ (h_full - h_tc)), 0.0)


def _row_entropy(M: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(M > 0, -M * np.log2(np.where(M > 0, M, 1.0)), 0.0)
    return t.sum(axis=1)


# --------------------------------------------------------------------------
# membership


REGIONS = ("R_out", "R_out*", "R_in", "R_prime", "R_cutset")


@dataclass
class CutRecord:
    cut: Cut
    rate_sum: float
    bound: float
    slack: float
    verdict: str
    argmax_input: np.ndarray | None = None
    penalty: float = 0.0

    def to_json(self) -> dict:
        return {
            "cut_bitmask": self.cut.bitmask,
            "bound_bits": self.bound,
            "slack_bits": self.slack,
            "argmax_input": None if self.argmax_input is None else [float(v) for v in self.argmax_input],
            "verdict": self.verdict,
            "penalty_bits": self.penalty,
            "rate_sum_bits": self.rate_sum,
        }


@dataclass
class MembershipReport:
    region: str
    rates: tuple
    verdict: str
    tolerance: float
    records: list = field(default_factory=list)
    common_input: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "region": self.region,
            "rates": [float(r) for r in self.rates],
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "cuts": [r.to_json() for r in self.records],
            "common_input": None if self.common_input is None else [float(v) for v in self.common_input],
        }


def validate_rates(spec: NetworkSpec, rates: Sequence[float]) -> tuple[float, ...]:
    rates = tuple(float(r) for r in rates)
    if len(rates) != spec.node_count:
        raise InvalidRates(f"expected {spec.node_count} rates, got {len(rates)}")
    for i, r in zip(spec.nodes, rates):
        if not np.isfinite(r) or r < 0:
            raise InvalidRates(f"rate of node {i} must be a finite nonnegative number, got {r}")
        if i not in spec.sources and r != 0:
            raise InvalidRates(f"node {i} is not a source but has rate {r}")
    return rates


def _verdict(slack: float, tol: float) -> str:
    if slack > tol:
        return "member"
    if slack < -tol:
        return "non-member"
    return "boundary"


def _combine(verdicts: Iterable[str]) -> str:
    vs = list(verdicts)
    if "non-member" in vs:
        return "non-member"
    if all(v == "member" for v in vs):
        return "member"
    return "boundary"


def _rate_sum(rates, cut: Cut) -> float:
    return float(sum(rates[i - 1] for i in cut.members()))


def membership_report(spec: NetworkSpec, rates: Sequence[float], region: str = "R_out",
                      budget: int | None = None, p: JointPmf | None = None,
                      tolerance: float | None = None, oracle: bool = True,
                      capacities: LinkCapacities | None = None) -> MembershipReport:
    """Decide whether ``rates`` lie in ``region`` and report per-cut slacks.

    Regions: ``R_out`` (per-cut maxima over all inputs), ``R_out*`` (one common
    product input), ``R_in`` (the supplied product input ``p`` with the
    output-entropy penalty), ``R_prime`` (sums of crossing link capacities) and
    ``R_cutset`` (the supplied input ``p``, any joint law). A cut whose rate
    sum is zero is a member unless its bound is negative.
    """
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}; choose from {REGIONS}")
    rates = validate_rates(spec, rates)
    cuts = enumerate_cuts(spec)
    if region in ("R_out", "R_out*"):
        tol = OPT_TOL if tolerance is None else tolerance
    else:
        tol = EXACT_TOL if tolerance is None else tolerance
    rep = MembershipReport(region, rates, "member", tol)

    if region == "R_out":
        for cut in cuts:
            rs = _rate_sum(rates, cut)
            b = max_cut_value(spec, cut, ALL_INPUTS, budget=budget, oracle=oracle)
            slack = b.value - rs
            v = "member" if rs == 0 else _verdict(slack, tol)
            rep.records.append(CutRecord(cut, rs, b.value, slack, v, _flat_input(spec, b.argmax_input)))
        rep.verdict = _combine(r.verdict for r in rep.records)
        return rep

    if region == "R_out*":
        return _rout_star(spec, rates, cuts, rep, p, budget, oracle)

    if region == "R_prime":
        caps = capacities if capacities is not None else link_capacities(spec.links) if spec.links else None
        if caps is None:
            raise NotProductForm("R_prime needs a network built from independent links")
        for b in rprime_bounds(caps, spec, cuts):
            rs = _rate_sum(rates, b.cut)
            slack = b.value - rs
            v = "member" if rs == 0 else _verdict(slack, tol)
            rep.records.append(CutRecord(b.cut, rs, b.value, slack, v, _flat_input(spec, b.argmax_input)))
        rep.verdict = _combine(r.verdict for r in rep.records)
        return rep

    if p is None:
        raise ValueError(f"{region} needs an input law p")
    flat = _flat_input(spec, p)
    if region == "R_in" and not is_product_form(p, [[x_name(i)] for i in spec.nodes]):
        raise NotProductForm("R_in needs a product input law")
    for cut in cuts:
        rs = _rate_sum(rates, cut)
        val = cut_value_fast(spec, cut, flat) if cut.T else 0.0
        pen = penalty(spec, cut, p) if region == "R_in" else 0.0
        bound = val - pen
        slack = bound - rs
        if rs == 0:
            v = "member" if bound >= -tol else "non-member"
        else:
            v = _verdict(slack, tol)
        rep.records.append(CutRecord(cut, rs, bound, slack, v, flat, pen))
    rep.verdict = _combine(r.verdict for r in rep.records)
    return rep


def _rout_star(spec, rates, cuts, rep, p, budget, oracle) -> MembershipReport:
    tol = rep.tolerance
    active = [c for c in cuts if _rate_sum(rates, c) > 0]
    arrays = {c: _cut_arrays(spec, c) for c in cuts if c.T}
    seeds = []
    if p is not None:
        flat = _flat_input(spec, p)
        if not is_product_form(p, [[x_name(i)] for i in spec.nodes]):
            raise NotProductForm("seed input for R_out* must be a product law")
        seeds.append(_marginals_of(spec, flat))
    best_flat, best_min = _maxmin_product(spec, rates, active, arrays, seeds, budget)
    non_member = False
    for cut in cuts:
        rs = _rate_sum(rates, cut)
        val = float(_objective(arrays[cut].to_ac(best_flat), arrays[cut])[0]) if cut.T else 0.0
        slack = val - rs
        v = "member" if rs == 0 else _verdict(slack, tol)
        if rs > 0 and v != "member":
            top = max_cut_value(spec, cut, ALL_INPUTS, budget=budget, oracle=oracle)
            if top.value < rs - tol:
                v = "non-member"
                non_member = True
            elif v == "non-member":
                v = "boundary"
        rep.records.append(CutRecord(cut, rs, val, slack, v, best_flat))
    rep.common_input = best_flat
    if non_member:
        rep.verdict = "non-member"
    elif not active or best_min > tol:
        rep.verdict = "member"
    else:
        rep.verdict = "boundary"
    return rep


def _marginals_of(spec: NetworkSpec, flat: np.ndarray) -> list[np.ndarray]:
    arr = flat.reshape(spec.input_sizes)
    N = spec.node_count
    return [arr.sum(axis=tuple(j for j in range(N) if j != i)) for i in range(N)]


def _maxmin_product(spec, rates, active, arrays, seeds, budget):
    """Maximize ``min_T (I_T(p) - sum_T R)`` over product input laws."""
    from scipy.optimize import minimize

    sizes = spec.input_sizes
    offsets = np.cumsum((0,) + sizes)
    total = int(offsets[-1])
    uniform = [np.full(s, 1.0 / s) for s in sizes]
    if not active:
        flat = _product_flat([u[None] for u in uniform])[0]
        return flat, float("inf")
    rng = np.random.default_rng([len(active), 7])
    starts = list(seeds) + [uniform]
    starts += [[rng.dirichlet(np.ones(s)) for s in sizes] for _ in range(6)]
    rsum = {c: _rate_sum(rates, c) for c in active}

    def split(z):
        return [np.clip(z[offsets[i]:offsets[i + 1]], 0.0, None) for i in range(len(sizes))]

    def cut_terms(parts):
        flat = _product_flat([q[None] for q in parts])
        vals, grads = [], []
        for c in active:
            v, g = _objective(arrays[c].to_ac(flat), arrays[c])
            vals.append(float(v[0]) - rsum[c])
            gflat = arrays[c].from_ac(g)
            grads.append(np.concatenate([_block_grad(gflat, [q[None] for q in parts], i, sizes)[0]
                                         for i in range(len(sizes))]))
        return np.array(vals), np.array(grads)

    def min_slack(parts):
        return float(np.min(cut_terms(parts)[0]))

    best_parts, best = None, -np.inf
    for st in starts:
        z0 = np.concatenate(list(st) + [[min_slack(st)]])
        cons = [{"type": "ineq",
                 "fun": lambda z: cut_terms(split(z[:-1]))[0] - z[-1],
                 "jac": lambda z: np.hstack([cut_terms(split(z[:-1]))[1],
                                             -np.ones((len(active), 1))])}]
        for i in range(len(sizes)):
            row = np.zeros(total + 1)
            row[offsets[i]:offsets[i + 1]] = 1.0
            cons.append({"type": "eq", "fun": lambda z, r=row: r @ z - 1.0, "jac": lambda z, r=row: r})
        bounds = [(0.0, 1.0)] * total + [(None, None)]
        res = minimize(lambda z: -z[-1], z0, jac=lambda z: np.r_[np.zeros(total), -1.0],
                       constraints=cons, bounds=bounds, method="SLSQP",
                       options={"maxiter": 200 if budget is None else int(budget), "ftol": 1e-12})
        cand = [q / q.sum() if q.sum() > 0 else np.full(len(q), 1.0 / len(q)) for q in split(res.x[:-1])]
        for parts in (cand, list(st)):
            v = min_slack(parts)
            if v > best:
                best, best_parts = v, parts
    return _product_flat([q[None] for q in best_parts])[0], best
