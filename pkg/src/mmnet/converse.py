"""Converse machinery: error lower bounds, tilted per-letter laws, simulating laws, certificates.

Names follow the induced-law convention of :mod:`mmnet.codes`. Single-letter
laws use the network names ``X{i}`` and ``Y{j}``. Logs are base 2 except
inside the log-domain accumulators, which are natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _named
from .codes import (
    DEFAULT_BUDGET,
    Code,
    exact_error_probability,
    induced_distribution,
    w_name,
    wh_name,
    xk_name,
    yk_name,
)
from .errors import (
    AlphabetMismatch,
    AlphaOne,
    BudgetExhausted,
    InvalidCut,
    InvalidDestination,
    InvalidLambda,
    InvalidProbability,
    LambdaOutOfRange,
    NonMemorylessInput,
    NonUniformMarginal,
)
from .network import Cut, NetworkSpec, marginal_channel_matrix, x_name, y_name
from .prob import (
    LN2,
    JointPmf,
    _kl_terms,
    _renyi_from_weights,
    conditional_mutual_information,
    make_joint,
    markov_residual,
)

CHECK_TOL = 1e-9
NULL_MASS = 1e-12
MEMORYLESS_TOL = 1e-9
PROP3_MAX_LAMBDA = 1.25


# --------------------------------------------------------------------------
# named-array helpers


def _marg(na, keep):
    arr, names = na
    keep = list(keep)
    return _named.sum_to(arr, names, keep), tuple(keep)


def _cond(na, target, given, fill="uniform"):
    """``p(target | given)`` as a named array over ``given + target``; null rows filled."""
    target, given = list(target), list(given)
    joint, names = _marg(na, given + target)
    nt = len(target)
    if nt == 0:
        return np.ones_like(joint), names
    den = joint.sum(axis=tuple(range(len(given), len(given) + nt)), keepdims=True) if nt else np.ones_like(joint)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = joint / den
    null = np.broadcast_to(den <= 0, joint.shape)
    if np.any(null):
        size = int(np.prod(joint.shape[len(given):], dtype=np.int64))
        if fill == "uniform":
            filler = np.full(joint.shape, 1.0 / size)
        else:
            filler = np.zeros(joint.shape)
            filler[(Ellipsis,) + (0,) * nt] = 1.0
        rows = np.where(null, filler, rows)
    return rows, names


def _mul(*nas, out=None):
    return _named.product(list(nas), out)


def _divergence(p_na, q_na, lam):
    """``D_lam`` in bits between two named arrays over the same axes (``p`` is the weight)."""
    p, names = p_na
    q = _named.transpose_to(q_na[0], q_na[1], names)
    p, q = p.reshape(-1), q.reshape(-1)
    if lam == 1.0:
        return _kl_terms(p, p, q)
    return _renyi_from_weights(p, p, q, lam)


# --------------------------------------------------------------------------
# error lower bound and Rényi-to-KL gap


@dataclass(frozen=True)
class Prop2Result:
    lhs: float
    rhs: float
    alpha: float
    holds: bool


def fano_renyi_rhs(log_w: float, alpha: float, lam: float) -> float:
    """``log|W| + lam/(lam-1) log(1 - alpha)`` in bits (``-inf`` at ``alpha = 1``)."""
    if alpha >= 1.0:
        return -math.inf
    return log_w + lam / (lam - 1.0) * math.log2(1.0 - alpha)


def prop2_bound(p_uv: JointPmf, q_v: JointPmf, lam: float, u_axes) -> Prop2Result:
    """Error lower bound for guessing a uniform ``U`` by ``V``.

    ``U`` is the flattened tuple of ``u_axes`` and ``V`` the flattened tuple
    of the remaining axes of ``p_uv`` (both in sorted name order). ``q_v`` is
    any law over the ``V`` axes.
    """
    if not np.isfinite(lam) or lam <= 1.0:
        raise InvalidLambda(f"order must exceed 1, got {lam}")
    u_axes = sorted(u_axes)
    v_axes = [a for a in p_uv.names if a not in u_axes]
    if sorted(q_v.names) != sorted(v_axes):
        raise AlphabetMismatch(f"q_V axes {q_v.names} do not match V axes {v_axes}")
    flat = _named.flatten_axes(p_uv.values, p_uv.names, [u_axes, v_axes])
    if flat.shape[0] != flat.shape[1]:
        raise AlphabetMismatch(f"|U| = {flat.shape[0]} differs from |V| = {flat.shape[1]}")
    pu = flat.sum(axis=1)
    if np.max(np.abs(pu - 1.0 / pu.size)) > 1e-9:
        raise NonUniformMarginal("p_U is not uniform")
    alpha = float(max(0.0, 1.0 - np.trace(flat)))
    if alpha >= 1.0 - 1e-15:
        raise AlphaOne("Pr{U != V} = 1; the bound is vacuous")
    qv = _named.flatten_axes(q_v.values, q_v.names, [v_axes])
    ref = pu[:, None] * qv[None, :]
    lhs = _divergence((flat, ("u", "v")), (ref, ("u", "v")), lam)
    rhs = fano_renyi_rhs(math.log2(pu.size), alpha, lam)
    return Prop2Result(lhs, rhs, alpha, lhs >= rhs - CHECK_TOL)


@dataclass(frozen=True)
class Prop3Result:
    d_lambda: float
    d_one: float
    bound: float
    holds: bool


def prop3_remainder(lam: float, x_size: int, y_size: int) -> float:
    return 8.0 * (lam - 1.0) * float(x_size * y_size) ** 5


def prop3_gap(p_xyz: JointPmf, lam: float, x_axes, y_axes, z_axes=()) -> Prop3Result:
    """Compare the conditional Rényi divergence from conditional independence with the CMI."""
    if not (1.0 < lam <= PROP3_MAX_LAMBDA):
        raise LambdaOutOfRange(f"order must lie in (1, 5/4], got {lam}")
    x_axes, y_axes, z_axes = list(x_axes), list(y_axes), list(z_axes)
    na = (p_xyz.marginal(x_axes + y_axes + z_axes).values, p_xyz.marginal(x_axes + y_axes + z_axes).names)
    joint = _marg(na, z_axes + x_axes + y_axes)
    ref = _mul(_marg(na, z_axes), _cond(na, x_axes, z_axes), _cond(na, y_axes, z_axes),
               out=z_axes + x_axes + y_axes)
    d_lam = _divergence(joint, ref, lam)
    d_one = conditional_mutual_information(p_xyz, x_axes, y_axes, z_axes)
    xs = int(np.prod([p_xyz.size_of(a) for a in x_axes], dtype=np.int64))
    ys = int(np.prod([p_xyz.size_of(a) for a in y_axes], dtype=np.int64))
    bound = d_one + prop3_remainder(lam, xs, ys)
    return Prop3Result(d_lam, d_one, bound, d_lam <= bound + CHECK_TOL)


def lambda_schedule(n: int) -> float:
    """``1 + n^{-1/2}``; see :func:`lambda_in_window` for the range where the KL gap bound applies."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return 1.0 + 1.0 / math.sqrt(n)


def lambda_in_window(n: int) -> bool:
    """True when ``lambda_schedule(n) <= 5/4``, i.e. ``n >= 16``."""
    return n >= 16


# --------------------------------------------------------------------------
# tilted per-letter laws


@dataclass
class TiltedSequence:
    """Per-time tilted joints ``s_k`` over ``(X_I, Y_Tc)`` and their input laws.

    ``log_normalizers[k]`` is the natural log of the total weight after ``k``
    letters (index 0 is the empty product). ``substitution_delta`` is the
    largest change in any tilted joint when null-history input kernels are
    filled with a point mass instead of the uniform law.
    """

    lam: float
    cut: Cut
    n: int
    joints: list
    inputs: list
    conditionals: list          # s_k(y_Tc | x_Tc) as (|X_Tc|, |Y_Tc|) arrays
    log_normalizers: list
    per_letter: list
    aggregate: JointPmf
    aggregate_divergence: float
    channel: np.ndarray
    null_histories: int
    substitution_delta: float
    route_delta: float
    ratio_delta: float
    x_nodes: tuple
    y_nodes: tuple

    @property
    def per_letter_sum(self) -> float:
        return float(sum(self.per_letter))

    def to_json(self) -> dict:
        def law(p):
            return {"axes": [[a.name, a.size] for a in p.axes], "values": p.values.reshape(-1).tolist()}
        return {
            "lambda": self.lam,
            "cut_bitmask": self.cut.bitmask,
            "n": self.n,
            "joints": [law(p) for p in self.joints],
            "inputs": [law(p) for p in self.inputs],
            "log2_normalizers": [v / LN2 for v in self.log_normalizers],
            "per_letter_bits": list(self.per_letter),
            "aggregate": law(self.aggregate),
            "aggregate_divergence_bits": self.aggregate_divergence,
            "null_histories": self.null_histories,
            "substitution_delta": self.substitution_delta,
        }


def _parse_nodes(names):
    xs, ys = set(), set()
    for a in names:
        if a[0] in "XY" and "." in a:
            node = int(a[1:].split(".")[0])
            (xs if a[0] == "X" else ys).add(node)
    return sorted(xs), sorted(ys)


class _Layout:
    """Flat per-letter indexing of ``X_I`` and ``Y_Tc`` and the map ``x -> x_Tc``."""

    def __init__(self, x_nodes, x_sizes, tc_nodes, y_sizes):
        self.x_nodes, self.x_sizes = list(x_nodes), list(x_sizes)
        self.tc = list(tc_nodes)
        self.y_sizes = list(y_sizes)
        self.A = int(np.prod(self.x_sizes, dtype=np.int64))
        self.B = int(np.prod(self.y_sizes, dtype=np.int64))
        digits = np.unravel_index(np.arange(self.A), self.x_sizes)
        tc_pos = [self.x_nodes.index(i) for i in self.tc]
        tc_sizes = [self.x_sizes[p] for p in tc_pos]
        self.A_tc = int(np.prod(tc_sizes, dtype=np.int64))
        self.tc_sizes = tc_sizes
        self.xtc = (np.ravel_multi_index([digits[p] for p in tc_pos], tc_sizes)
                    if tc_pos else np.zeros(self.A, dtype=np.int64))

    def tc_conditional(self, joint_xy: np.ndarray) -> np.ndarray:
        """``s(y | x_Tc)`` from a joint over ``(x, y)``; null rows uniform."""
        jtc = np.zeros((self.A_tc, self.B))
        np.add.at(jtc, self.xtc, joint_xy)
        tot = jtc.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(tot > 0, jtc / np.where(tot > 0, tot, 1.0), 1.0 / self.B)
        return out


def _time_groups(n, x_nodes, y_nodes):
    groups = []
    for k in range(1, n + 1):
        groups.append([xk_name(i, k) for i in x_nodes])
        groups.append([yk_name(j, k) for j in y_nodes])
    return groups


def _history_kernels(P: np.ndarray, n: int, A: int, fill: str):
    """``c_k(x | h_{k-1})`` as ``(H_{k-1}, A)`` arrays, with the null-row count."""
    kernels, nulls = [], 0
    for k in range(n):
        axes = tuple(range(2 * k + 1, 2 * n))
        Pk = (P.sum(axis=axes) if axes else P).reshape(-1, A)
        Ph = Pk.sum(axis=1, keepdims=True)
        null = (Ph <= 0)[:, 0]
        nulls += int(null.sum())
        with np.errstate(invalid="ignore", divide="ignore"):
            c = Pk / np.where(Ph > 0, Ph, 1.0)
        if fill == "uniform":
            c[null] = 1.0 / A
        else:
            c[null] = 0.0
            c[null, 0] = 1.0
        kernels.append(c)
    return kernels, nulls


def _tilt_log(kernels, q, lam, lay: _Layout, s_conds=None):
    """Log-domain recursion for the tilted input laws.

    With ``s_conds`` given, the per-time ``s(y|x_Tc)`` are taken from it;
    otherwise each is derived from the tilted joint of the same time.
    """
    A, B = lay.A, lay.B
    logF = np.zeros(1)
    logq = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), -np.inf)
    inputs, conds, lognorm = [], [], [0.0]
    for k, c in enumerate(kernels):
        top = logF.max()
        w = np.exp(logF - top)
        px = (w @ c) / w.sum()
        inputs.append(px)
        S = s_conds[k] if s_conds is not None else lay.tc_conditional(px[:, None] * q)
        conds.append(S)
        Sx = S[lay.xtc]
        with np.errstate(divide="ignore"):
            logc = np.log(c)
            logS = np.log(Sx)
        step = lam * logq - (lam - 1.0) * np.where(Sx > 0, logS, 0.0)
        bad = (Sx <= 0) & (q > 0) & (px[:, None] > 0)
        if np.any(bad):
            raise NonMemorylessInput("tilted output law vanishes where the channel has mass")
        new = logF[:, None, None] + logc[:, :, None] + step[None, :, :]
        live = np.isfinite(logF)[:, None, None] & (c > 0)[:, :, None] & (q > 0)[None, :, :]
        logF = np.where(live, new, -np.inf).reshape(-1)
        lognorm.append(float(logsumexp(logF)) if np.any(np.isfinite(logF)) else -np.inf)
    return inputs, conds, lognorm


def _tilt_direct(kernels, q, lam, lay: _Layout):
    """Linear-domain evaluation of the tilted input laws straight from their definition."""
    A, B = lay.A, lay.B
    F = np.ones(1)
    inputs, conds = [], []
    for c in kernels:
        px = (F @ c) / F.sum()
        inputs.append(px)
        S = lay.tc_conditional(px[:, None] * q)
        conds.append(S)
        Sx = S[lay.xtc]
        w = F[:, None, None] * c[:, :, None] * (q ** lam)[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            F = np.where(w > 0, w / Sx[None, :, :] ** (lam - 1.0), 0.0).reshape(-1)
    return inputs, conds


def _letter_divergence(px, q, S, lam, lay: _Layout) -> float:
    """``D_lam(q || s(y|x_Tc) | px)`` in bits."""
    w = px[:, None] * q
    den = S[lay.xtc]
    if lam == 1.0:
        return _kl_terms(w.reshape(-1), np.broadcast_to(q, w.shape).reshape(-1), den.reshape(-1))
    return _renyi_from_weights(w.reshape(-1), np.broadcast_to(q, w.shape).reshape(-1), den.reshape(-1), lam)


def _extract_channel(P, n, lay: _Layout):
    """Pooled per-letter ``q(y|x)`` from an induced law; unused inputs get uniform rows."""
    pooled = np.zeros((lay.A, lay.B))
    for k in range(n):
        keep = (2 * k, 2 * k + 1)
        axes = tuple(a for a in range(2 * n) if a not in keep)
        pooled += P.sum(axis=axes) if axes else P
    tot = pooled.sum(axis=1, keepdims=True)
    return np.where(tot > 0, pooled / np.where(tot > 0, tot, 1.0), 1.0 / lay.B)


def _memoryless_check(P, q, n, lay: _Layout) -> float:
    worst = 0.0
    for k in range(n):
        axes = tuple(range(2 * k + 2, 2 * n))
        Pk = (P.sum(axis=axes) if axes else P).reshape(-1, lay.A, lay.B)
        Px = Pk.sum(axis=2, keepdims=True)
        worst = max(worst, float(np.max(np.abs(Pk - Px * q[None]))))
    return worst


def build_tilted_sequence(induced: JointPmf, cut: Cut, lam: float, n: int,
                          channel: np.ndarray | None = None, spec: NetworkSpec | None = None,
                          s_conditionals=None, budget_cells: int = DEFAULT_BUDGET) -> TiltedSequence:
    """Tilted per-letter joints of an induced law over ``(X_I^n, Y_Tc^n)``.

    Extra axes of ``induced`` are summed out. The channel ``q(y_Tc | x_I)``
    comes from ``channel``, else from ``spec``, else is read off ``induced``.
    ``s_conditionals`` replaces the per-time output kernels in the
    recursion (used to feed in the conditionals of a simulating law).
    """
    if not np.isfinite(lam) or lam < 1.0:
        raise InvalidLambda(f"order must be a finite number >= 1, got {lam}")
    x_nodes, _ = _parse_nodes(induced.names)
    if spec is not None:
        x_nodes = list(spec.nodes)
    N = max(x_nodes)
    tc = list(cut.complement(N))
    keep = [a for g in _time_groups(n, x_nodes, tc) for a in g]
    missing = [a for a in keep if a not in induced.names]
    if missing:
        raise InvalidCut(f"induced law lacks axes {missing[:4]}")
    sub = induced.marginal(keep)
    lay = _Layout(x_nodes, [sub.size_of(xk_name(i, 1)) for i in x_nodes], tc,
                  [sub.size_of(yk_name(j, 1)) for j in tc])
    if (lay.A * lay.B) ** n > budget_cells:
        raise BudgetExhausted(f"tilt over {(lay.A * lay.B) ** n} history cells > budget {budget_cells}")
    P = _named.flatten_axes(sub.values, sub.names, _time_groups(n, x_nodes, tc))
    if channel is None and spec is not None:
        channel = marginal_channel_matrix(spec, cut)
    q = _extract_channel(P, n, lay) if channel is None else np.asarray(channel, dtype=float)
    if q.shape != (lay.A, lay.B):
        raise AlphabetMismatch(f"channel shape {q.shape} != ({lay.A}, {lay.B})")
    resid = _memoryless_check(P, q, n, lay)
    if resid > MEMORYLESS_TOL:
        raise NonMemorylessInput(f"per-slot factorization residual {resid:.3g} > {MEMORYLESS_TOL}")

    kernels, nulls = _history_kernels(P, n, lay.A, "uniform")
    inputs, conds, lognorm = _tilt_log(kernels, q, lam, lay, s_conditionals)
    alt_inputs, _, _ = _tilt_log(_history_kernels(P, n, lay.A, "first")[0], q, lam, lay, s_conditionals)
    d_inputs, _ = _tilt_direct(kernels, q, lam, lay)
    subst = max(float(np.max(np.abs((a - b)[:, None] * q))) for a, b in zip(inputs, alt_inputs))
    route = max(float(np.max(np.abs((a - b)[:, None] * q))) for a, b in zip(inputs, d_inputs))
    ratio = 0.0
    per_letter = []
    for k in range(n):
        Sx = conds[k][lay.xtc]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(q > 0, q ** lam / np.where(Sx > 0, Sx, 1.0) ** (lam - 1.0), 0.0)
        mass = float(np.sum(inputs[k][:, None] * terms))
        step = lognorm[k + 1] - lognorm[k]
        ratio = max(ratio, abs(math.exp(step) - mass) / max(mass, 1e-300))
        per_letter.append(_letter_divergence(inputs[k], q, conds[k], lam, lay))

    x_axes = [(x_name(i), s) for i, s in zip(x_nodes, lay.x_sizes)]
    y_axes = [(y_name(j), s) for j, s in zip(tc, lay.y_sizes)]
    shape = lay.x_sizes + lay.y_sizes
    joints = [make_joint(x_axes + y_axes, (px[:, None] * q).reshape(shape)) for px in inputs]
    input_laws = [make_joint(x_axes, px.reshape(lay.x_sizes)) for px in inputs]
    agg_xy = sum(px[:, None] * q for px in inputs) / n
    aggregate = make_joint(x_axes + y_axes, agg_xy.reshape(shape))
    agg_div = _letter_divergence(agg_xy.sum(axis=1), q, lay.tc_conditional(agg_xy), lam, lay)
    return TiltedSequence(lam, cut, n, joints, input_laws, conds, lognorm, per_letter, aggregate,
                          agg_div, q, nulls, subst, route, ratio, tuple(x_nodes), tuple(tc))


def induced_letter_joints(induced: JointPmf, cut: Cut, n: int, x_nodes) -> list[np.ndarray]:
    """Per-time ``p(x_I,k, y_Tc,k)`` as flat ``(|X_I|, |Y_Tc|)`` arrays."""
    tc = list(cut.complement(max(x_nodes)))
    out = []
    for k in range(1, n + 1):
        xs = [xk_name(i, k) for i in x_nodes]
        ys = [yk_name(j, k) for j in tc]
        m = induced.marginal(xs + ys)
        out.append(_named.flatten_axes(m.values, m.names, [xs, ys]))
    return out


# --------------------------------------------------------------------------
# simulating law


@dataclass
class SimulatingLaw:
    law: JointPmf
    tilted: TiltedSequence
    null_cells: int


def _names(spec: NetworkSpec, code: Code, cut: Cut):
    N, n = spec.node_count, code.n
    T, tc = list(cut.members()), list(cut.complement(N))
    src, dst = sorted(spec.sources), sorted(spec.destinations)
    est_cross = [wh_name(i, j) for i in src for j in dst if i in T and j in tc]
    est_other = [wh_name(i, j) for i in src for j in dst if not (i in T and j in tc)]
    return {
        "T": T, "Tc": tc,
        "WI": [w_name(i) for i in spec.nodes],
        "WT": [w_name(i) for i in T],
        "WTc": [w_name(i) for i in tc],
        "XT": [xk_name(i, k) for k in range(1, n + 1) for i in T],
        "YT": [yk_name(i, k) for k in range(1, n + 1) for i in T],
        "XTc": [xk_name(i, k) for k in range(1, n + 1) for i in tc],
        "YTc": [yk_name(i, k) for k in range(1, n + 1) for i in tc],
        "XI": [xk_name(i, k) for k in range(1, n + 1) for i in spec.nodes],
        "est_cross": est_cross,
        "est_other": est_other,
    }


def _xtc(tc, k):
    return [xk_name(i, k) for i in tc]


def _ytc(tc, k):
    return [yk_name(i, k) for i in tc]


def _past(tc, k, nodes=None):
    """``X^{k-1}`` over ``nodes`` (default ``tc``) and ``Y_Tc^{k-1}`` names."""
    nodes = tc if nodes is None else nodes
    return ([xk_name(i, l) for l in range(1, k) for i in nodes]
            + [yk_name(i, l) for l in range(1, k) for i in tc])


def _s_kernel_named(ts: TiltedSequence, spec: NetworkSpec, k: int):
    """``s_k(y_Tc | x_Tc)`` reshaped to time-``k`` axis names."""
    tc = list(ts.y_nodes)
    shape = [spec.input_sizes[i - 1] for i in tc] + [spec.output_sizes[i - 1] for i in tc]
    return ts.conditionals[k - 1].reshape(shape), tuple(_xtc(tc, k) + _ytc(tc, k))


def build_simulating_distribution(spec: NetworkSpec, code: Code, cut: Cut, lam: float,
                                  p: JointPmf | None = None, tilted: TiltedSequence | None = None,
                                  budget_cells: int = DEFAULT_BUDGET) -> SimulatingLaw:
    """Simulating law ``s`` neglecting ``cut``, over the same axes as the induced law.

    ``s = p(X_T^n, Y_T^n, estimates outside T x Tc) * r(W_I, X_Tc^n, Y_Tc^n)
    * p(estimates in T x Tc | W_Tc, Y_Tc^n)`` where ``r`` drives ``X_Tc`` by
    the code's input kernels and ``Y_Tc`` by the tilted output kernels.
    Kernels at null conditioning cells are uniform.
    """
    if p is None:
        p = induced_distribution(spec, code, budget_cells=budget_cells)
    N, n = spec.node_count, code.n
    nm = _names(spec, code, cut)
    tc = nm["Tc"]
    if tilted is None:
        tilted = build_tilted_sequence(p, cut, lam, n, spec=spec, budget_cells=budget_cells)
    na = (p.values, p.names)
    factors = [_marg(na, nm["WI"])]
    nulls = 0
    for k in range(1, n + 1):
        given = nm["WTc"] + _past(tc, k)
        ck = _cond(na, _xtc(tc, k), given)
        nulls += int(np.sum(_marg(na, given)[0] <= 0))
        factors.append(ck)
        factors.append(_s_kernel_named(tilted, spec, k))
    r = _mul(*factors, out=nm["WI"] + nm["XTc"] + nm["YTc"])
    parts = [r]
    other = nm["XT"] + nm["YT"] + nm["est_other"]
    if other:
        parts.append(_marg(na, other))
    if nm["est_cross"]:
        parts.append(_cond(na, nm["est_cross"], nm["WTc"] + nm["YTc"]))
    out = list(p.names)
    arr, names = _mul(*parts, out=out)
    law = make_joint([(a, p.size_of(a)) for a in names], arr)
    return SimulatingLaw(law, tilted, nulls)


# --------------------------------------------------------------------------
# simulating-law properties


@dataclass
class Lemma1Report:
    deviations: dict
    alternatives: dict
    letter_match: float | None
    passed: bool

    def to_json(self) -> dict:
        return {"deviations": self.deviations, "alternatives": self.alternatives,
                "letter_match": self.letter_match, "passed": self.passed}


def _masked_gap(a_na, b_na, mask_na, names):
    a = _named.broadcast_to_names(a_na[0], a_na[1], names)
    b = _named.broadcast_to_names(b_na[0], b_na[1], names)
    m = _named.broadcast_to_names(mask_na[0], mask_na[1], names)
    diff = np.abs(a - b) * np.broadcast_to(m, np.broadcast_shapes(a.shape, b.shape, m.shape))
    return float(diff.max()) if diff.size else 0.0


def verify_lemma1(p: JointPmf, s: JointPmf, cut: Cut, lam: float, spec: NetworkSpec, code: Code,
                  tilted: TiltedSequence | None = None) -> Lemma1Report:
    """Audit the five simulating-law properties; conditionals compared on non-null cells."""
    n = code.n
    nm = _names(spec, code, cut)
    tc = nm["Tc"]
    if tilted is None:
        tilted = build_tilted_sequence(p, cut, lam, n, spec=spec)
    pa, sa = (p.values, p.names), (s.values, s.names)
    dev, alt = {}, {}
    dev["i"] = float(np.abs(_marg(pa, nm["WI"])[0] - _marg(sa, nm["WI"])[0]).sum())

    if nm["est_cross"]:
        g = nm["WTc"] + nm["YTc"]
        full = g + nm["est_cross"]
        pc, sc = _cond(pa, nm["est_cross"], g), _cond(sa, nm["est_cross"], g)
        pm = _marg(pa, g)
        sm = _marg(sa, g)
        dev["ii"] = _masked_gap(pc, sc, ((pm[0] > NULL_MASS).astype(float), pm[1]), full)
        alt["ii"] = _masked_gap(pc, sc, ((sm[0] > NULL_MASS).astype(float), sm[1]), full)
    else:
        dev["ii"] = alt["ii"] = 0.0

    iii, iv, v, v_alt = 0.0, 0.0, 0.0, 0.0
    for k in range(1, n + 1):
        hist = nm["WI"] + _past(tc, k)
        if _xtc(tc, k) and _ytc(tc, k):
            iii = max(iii, markov_residual(s, hist, _xtc(tc, k), _ytc(tc, k)))
            sk = _cond(sa, _ytc(tc, k), _xtc(tc, k))
            sx = _marg(sa, _xtc(tc, k))
            iv = max(iv, _masked_gap(sk, _s_kernel_named(tilted, spec, k),
                                     ((sx[0] > NULL_MASS).astype(float), sx[1]), _xtc(tc, k) + _ytc(tc, k)))
        if _xtc(tc, k):
            gp = nm["WI"] + _past(tc, k, spec.nodes)
            gs = nm["WTc"] + _past(tc, k)
            pc = _cond(pa, _xtc(tc, k), gp)
            sc = _cond(sa, _xtc(tc, k), gs)
            pm = _marg(pa, gp)
            v = max(v, _masked_gap(pc, sc, ((pm[0] > NULL_MASS).astype(float), pm[1]), gp + _xtc(tc, k)))
            pc2 = _cond(pa, _xtc(tc, k), gs)
            sm = _marg(sa, gs)
            v_alt = max(v_alt, _masked_gap(pc2, sc, ((sm[0] > NULL_MASS).astype(float), sm[1]),
                                           gs + _xtc(tc, k)))
    dev["iii"], dev["iv"], dev["v"] = iii, iv, v
    alt["v"] = v_alt

    letter = None
    if lam == 1.0:
        ind = induced_letter_joints(p, cut, n, tilted.x_nodes)
        letter = max(float(np.abs(j.values.reshape(a.shape) - a).sum())
                     for j, a in zip(tilted.joints, ind))
    passed = all(x <= CHECK_TOL for x in dev.values()) and (letter is None or letter <= 1e-12)
    return Lemma1Report(dev, alt, letter, passed)


# --------------------------------------------------------------------------
# certificate


CHAIN = [
    ("rate_bound", "le", "fano_eps_bar"),
    ("fano_eps_bar", "le", "fano_alpha"),
    ("fano_alpha", "le", "lhs"),
    ("lhs", "le", "dpi_messages"),
    ("dpi_messages", "eq", "dpi_kernel"),
    ("dpi_kernel", "le", "dpi_outputs"),
    ("dpi_outputs", "eq", "dpi_markov"),
    ("dpi_markov", "le", "dpi_inputs"),
    ("dpi_inputs", "eq", "channel_form"),
    ("channel_form", "eq", "likelihood_form"),
    ("likelihood_form", "eq", "log_normalizer"),
    ("log_normalizer", "eq", "per_letter_sum"),
    ("per_letter_sum", "le", "n_aggregate"),
]


@dataclass
class Certificate:
    cut: Cut
    d: int
    lam: float
    n: int
    eps_bar: float
    alpha: float
    rate_bound: float
    lhs: float
    chain: dict
    slacks: dict
    tilt_identity: float
    jensen_mean: float
    aggregate: float
    holds: bool
    lemma1: Lemma1Report | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "cut_bitmask": self.cut.bitmask,
            "d": self.d,
            "lambda": self.lam,
            "n": self.n,
            "eps_bar": self.eps_bar,
            "alpha": self.alpha,
            "rate_bound_bits": self.rate_bound,
            "lhs_bits": self.lhs,
            "chain": [{"name": k, "bits": v} for k, v in self.chain.items()],
            "slacks": [{"step": k, "slack": v} for k, v in self.slacks.items()],
            "tilt_identity_l1": self.tilt_identity,
            "jensen": {"per_letter_mean": self.jensen_mean, "aggregate": self.aggregate},
            "holds": self.holds,
        }


def _slack(a: float, b: float, rel: str) -> float:
    if rel == "le":
        if a == b:
            return 0.0
        return b - a
    if math.isinf(a) and math.isinf(b) and a == b:
        return 0.0
    return -abs(a - b)


def single_letter_certificate(spec: NetworkSpec, code: Code, cut: Cut, d: int, lam: float,
                              eps_bar: float | None = None,
                              budget_cells: int = DEFAULT_BUDGET) -> Certificate:
    """Evaluate every step from the error lower bound to the single-letter upper bound."""
    if not np.isfinite(lam) or lam <= 1.0:
        raise LambdaOutOfRange(f"certificates need an order above 1, got {lam}")
    N, n = spec.node_count, code.n
    tc = list(cut.complement(N))
    if d not in tc or d not in spec.destinations:
        raise InvalidDestination(f"node {d} must be a destination outside the cut")
    p = induced_distribution(spec, code, budget_cells=budget_cells)
    err = exact_error_probability(spec, code, budget_cells=budget_cells)
    if eps_bar is None:
        eps_bar = err
    if not (0.0 <= eps_bar <= 1.0) or eps_bar < err - 1e-12:
        raise InvalidProbability(f"eps_bar = {eps_bar} must lie in [error = {err}, 1]")
    ts = build_tilted_sequence(p, cut, lam, n, spec=spec, budget_cells=budget_cells)
    sim = build_simulating_distribution(spec, code, cut, lam, p=p, tilted=ts, budget_cells=budget_cells)
    s = sim.law
    nm = _names(spec, code, cut)
    T = nm["T"]
    pa, sa = (p.values, p.names), (s.values, s.names)
    WI, WT, WTc, Y, XI = nm["WI"], nm["WT"], nm["WTc"], nm["YTc"], nm["XI"]
    Wd = [wh_name(i, d) for i in T if i in spec.sources]
    log_w = float(sum(math.log2(code.message_sizes[i - 1]) for i in T))
    rate_bound = sum(n * code.rates[i - 1] for i in T) + (
        -math.inf if eps_bar >= 1.0 else lam / (lam - 1.0) * math.log2(1.0 - eps_bar))

    chain = {"rate_bound": rate_bound}
    if Wd:
        flat = _named.flatten_axes(*_marg(pa, WT + Wd), [WT, Wd])
        alpha = float(max(0.0, 1.0 - np.trace(flat)))
    else:
        alpha = 0.0
    chain["fano_eps_bar"] = fano_renyi_rhs(log_w, eps_bar, lam)
    chain["fano_alpha"] = fano_renyi_rhs(log_w, alpha, lam)

    pWI = _marg(pa, WI)
    if Wd:
        chain["lhs"] = _divergence(_marg(pa, WT + Wd), _mul(_marg(pa, WT), _marg(sa, Wd), out=WT + Wd), lam)
    else:
        chain["lhs"] = 0.0
    out = WI + Wd
    chain["dpi_messages"] = _divergence(_marg(pa, out), _mul(_marg(pa, WT), _marg(sa, WTc + Wd), out=out), lam)
    chain["dpi_kernel"] = _divergence(_marg(pa, out), _mul(pWI, _cond(sa, Wd, WTc), out=out), lam)
    out = WI + Wd + Y
    chain["dpi_outputs"] = _divergence(_marg(pa, out), _mul(pWI, _cond(sa, Wd + Y, WTc), out=out), lam)
    k_hat = _cond(pa, Wd, WTc + Y)
    p_y = _cond(pa, Y, WI)
    chain["dpi_markov"] = _divergence(_mul(pWI, k_hat, p_y, out=out),
                                      _mul(pWI, k_hat, _cond(sa, Y, WTc), out=out), lam)
    out = WI + Wd + XI + Y
    p_side = _mul(pWI, k_hat, _cond(pa, XI + Y, WI), out=out)
    ref = [pWI, k_hat, _cond(sa, nm["XTc"] + Y, WTc)]
    for k in range(1, n + 1):
        xt = [xk_name(i, k) for i in T]
        if xt:
            ref.append(_cond(pa, xt, WI + _past(tc, k, spec.nodes) + _xtc(tc, k)))
    chain["dpi_inputs"] = _divergence(p_side, _mul(*ref, out=out), lam)

    lhs_f, rhs_f = [pWI, k_hat], [pWI, k_hat]
    qk = _named_channel(spec, cut)
    for k in range(1, n + 1):
        xk = [xk_name(i, k) for i in spec.nodes]
        ck = _cond(pa, xk, WI + _past(tc, k, spec.nodes))
        lhs_f += [ck, _rename(qk, k)]
        rhs_f += [ck, _s_kernel_named(ts, spec, k)]
    chain["channel_form"] = _divergence(_mul(*lhs_f, out=out), _mul(*rhs_f, out=out), lam)

    chain["likelihood_form"] = _likelihood_form(p, ts, n, lam)
    chain = {k: float(v) for k, v in chain.items()}
    chain["log_normalizer"] = ts.log_normalizers[-1] / ((lam - 1.0) * LN2)
    chain["per_letter_sum"] = ts.per_letter_sum
    chain["n_aggregate"] = n * ts.aggregate_divergence

    slacks = {f"{a}->{b}": _slack(chain[a], chain[b], rel) for a, rel, b in CHAIN}

    # tilted inputs recomputed with the simulating law's own output kernels
    s_conds = []
    lay_x = list(ts.x_nodes)
    for k in range(1, n + 1):
        sk = _cond(sa, _ytc(tc, k), _xtc(tc, k))
        s_conds.append(_named.flatten_axes(sk[0], sk[1], [_xtc(tc, k), _ytc(tc, k)]))
    ts2 = build_tilted_sequence(p, cut, lam, n, spec=spec, s_conditionals=s_conds, budget_cells=budget_cells)
    tilt = max(float(np.abs(a.values - b.values).sum()) for a, b in zip(ts.joints, ts2.joints))
    mean = ts.per_letter_sum / n
    slacks["tilt_identity"] = -tilt
    slacks["jensen"] = _slack(mean, ts.aggregate_divergence, "le")
    holds = all(v >= -CHECK_TOL for v in slacks.values() if not math.isnan(v))
    holds = holds and not any(math.isnan(v) for v in slacks.values())
    lemma = verify_lemma1(p, s, cut, lam, spec, code, tilted=ts)
    notes = []
    if lay_x and not lambda_in_window(n):
        notes.append("order schedule 1 + n^-1/2 lies above 5/4 for this n")
    return Certificate(cut, d, lam, n, eps_bar, alpha, rate_bound, chain["lhs"], chain, slacks, tilt,
                       mean, ts.aggregate_divergence, holds, lemma, notes)


def _named_channel(spec: NetworkSpec, cut: Cut):
    """``q(y_Tc | x_I)`` as a named array over single-letter names."""
    tc = list(cut.complement(spec.node_count))
    q = marginal_channel_matrix(spec, cut)
    shape = list(spec.input_sizes) + [spec.output_sizes[j - 1] for j in tc]
    return q.reshape(shape), tuple([x_name(i) for i in spec.nodes] + [y_name(j) for j in tc])


def _rename(na, k):
    arr, names = na
    return arr, tuple(f"{a}.{k}" for a in names)


def _likelihood_form(p: JointPmf, ts: TiltedSequence, n: int, lam: float) -> float:
    """``(lam-1)^{-1} log sum p(x^n, y^n) prod_k (q/s_k)^{lam-1}`` in bits."""
    x_nodes, tc = list(ts.x_nodes), list(ts.y_nodes)
    sub = p.marginal([a for g in _time_groups(n, x_nodes, tc) for a in g])
    P = _named.flatten_axes(sub.values, sub.names, _time_groups(n, x_nodes, tc)).reshape(-1)
    lay = _Layout(x_nodes, [p.size_of(xk_name(i, 1)) for i in x_nodes], tc,
                  [p.size_of(yk_name(j, 1)) for j in tc])
    q = ts.channel
    logr = np.zeros(1)
    for k in range(n):
        Sx = ts.conditionals[k][lay.xtc]
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)) - np.log(np.where(Sx > 0, Sx, 1.0)), 0.0)
        logr = (logr[:, None] + lr.reshape(-1)[None, :]).reshape(-1)
    w = P
    m = w > 0
    t = lam - 1.0
    from .prob import _log_tilted_mean
    return _log_tilted_mean(w[m], logr[m], t) / (t * LN2)
