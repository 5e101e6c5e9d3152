"""Dense finite-alphabet probability tensors and information measures.

All quantities are reported in bits. The conventions ``0 log 0 = 0`` and
``0 log(0/0) = 0`` hold throughout; a divergence is ``+inf`` whenever the
first argument puts mass where the second has none.

Axes are identified by name. Every :class:`JointPmf` stores its axes sorted
by name, so two tensors over the same variables always have identical
layouts regardless of the order in which they were built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import _named
from .errors import (
    AxisMismatch,
    AxisOverlap,
    InvalidLambda,
    NegativeMass,
    NotNormalized,
    ShapeMismatch,
    UnknownAxis,
    ZeroMassConditioning,
)

NORM_TOL = 1e-9
LN2 = np.log(2.0)


@dataclass(frozen=True, order=True)
class Axis:
    name: str
    size: int

    def __post_init__(self):
        if int(self.size) < 1:
            raise ShapeMismatch(f"axis {self.name!r} must have size >= 1, got {self.size}")


AxisLike = Union[Axis, tuple]
Names = Union[str, Iterable[str]]


def _as_axes(axes) -> tuple[Axis, ...]:
    if isinstance(axes, Mapping):
        axes = list(axes.items())
    out = []
    for a in axes:
        out.append(a if isinstance(a, Axis) else Axis(str(a[0]), int(a[1])))
    names = [a.name for a in out]
    if len(set(names)) != len(names):
        raise ShapeMismatch(f"duplicate axis names in {names}")
    return tuple(out)


def _as_names(names: Names | None) -> tuple[str, ...]:
    if names is None:
        return ()
    if isinstance(names, str):
        return (names,)
    return tuple(names)


def _canonical(axes: tuple[Axis, ...], values: np.ndarray):
    order = sorted(range(len(axes)), key=lambda i: axes[i].name)
    return tuple(axes[i] for i in order), np.transpose(values, order)


class JointPmf:
    """A normalized probability tensor over named finite axes."""

    __slots__ = ("axes", "values")

    def __init__(self, axes, values, tol: float = NORM_TOL):
        axes = _as_axes(axes)
        values = np.array(values, dtype=float)
        shape = tuple(a.size for a in axes)
        if values.shape != shape:
            if values.size == int(np.prod(shape, dtype=np.int64)):
                values = values.reshape(shape)
            else:
                raise ShapeMismatch(f"values of shape {values.shape} do not match axes {shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise NegativeMass("probability tensor has negative or non-finite entries")
        total = values.sum()
        if abs(total - 1.0) > tol:
            raise NotNormalized(f"entries sum to {total!r}, not 1")
        axes, values = _canonical(axes, values)
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        self.axes = axes
        self.values = values

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def size_of(self, name: str) -> int:
        for a in self.axes:
            if a.name == name:
                return a.size
        raise UnknownAxis(name)

    def axes_for(self, names: Names) -> tuple[Axis, ...]:
        names = set(_as_names(names))
        unknown = names - set(self.names)
        if unknown:
            raise UnknownAxis(f"unknown axes {sorted(unknown)}; have {self.names}")
        return tuple(a for a in self.axes if a.name in names)

    def marginal(self, keep: Names) -> "JointPmf":
        return marginalize(self, keep)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __repr__(self) -> str:
        ax = ", ".join(f"{a.name}:{a.size}" for a in self.axes)
        return f"JointPmf([{ax}])"


@dataclass(frozen=True)
class CondKernel:
    """Row-stochastic map from assignments of ``from_axes`` to ``to_axes``.

    ``rows`` has shape ``from sizes + to sizes`` (both canonical order).
    ``undefined`` marks rows that came from zero-mass conditioning cells; those
    rows hold NaN until :meth:`fill_undefined` substitutes a total row.
    """

    from_axes: tuple[Axis, ...]
    to_axes: tuple[Axis, ...]
    rows: np.ndarray
    undefined: np.ndarray | None = None

    def __post_init__(self):
        fa, ta = _as_axes(self.from_axes), _as_axes(self.to_axes)
        if set(a.name for a in fa) & set(a.name for a in ta):
            raise AxisOverlap("kernel from/to axes overlap")
        rows = np.asarray(self.rows, dtype=float)
        shape = tuple(a.size for a in fa + ta)
        if rows.shape != shape:
            if rows.size == int(np.prod(shape, dtype=np.int64)):
                rows = rows.reshape(shape)
            else:
                raise ShapeMismatch(f"kernel rows {rows.shape} vs axes {shape}")
        fo = sorted(range(len(fa)), key=lambda i: fa[i].name)
        to = sorted(range(len(ta)), key=lambda i: ta[i].name)
        rows = np.transpose(rows, fo + [len(fa) + i for i in to])
        undefined = self.undefined
        if undefined is None:
            undefined = np.zeros(rows.shape[:len(fa)], dtype=bool)
        else:
            undefined = np.transpose(np.asarray(undefined, dtype=bool), fo)
        fa = tuple(fa[i] for i in fo)
        ta = tuple(ta[i] for i in to)
        flat = rows.reshape(int(np.prod(rows.shape[:len(fa)], dtype=np.int64)), -1)
        ok = ~undefined.reshape(-1)
        if np.any(flat[ok] < 0) or not np.all(np.isfinite(flat[ok])):
            raise NegativeMass("kernel has negative or non-finite entries")
        sums = flat[ok].sum(axis=1)
        if sums.size and np.max(np.abs(sums - 1.0)) > NORM_TOL:
            raise NotNormalized(f"kernel row sums deviate from 1 by {np.max(np.abs(sums - 1.0)):.3g}")
        rows = np.ascontiguousarray(rows)
        rows.setflags(write=False)
        object.__setattr__(self, "from_axes", fa)
        object.__setattr__(self, "to_axes", ta)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "undefined", undefined)

    @property
    def from_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.from_axes)

    @property
    def to_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.to_axes)

    @property
    def names(self) -> tuple[str, ...]:
        return self.from_names + self.to_names

    @property
    def is_total(self) -> bool:
        return not bool(self.undefined.any())

    def matrix(self) -> np.ndarray:
        """Rows flattened to a 2-D ``(from, to)`` matrix."""
        nf = int(np.prod([a.size for a in self.from_axes], dtype=np.int64))
        return self.rows.reshape(nf, -1)

    def fill_undefined(self, kind: str = "uniform") -> "CondKernel":
        """Return a total kernel, substituting ``kind`` rows at undefined cells.

        ``kind`` is ``"uniform"`` or ``"first"`` (point mass on the first
        to-assignment). The returned kernel keeps the original mask so callers
        can still see which rows were substituted.
        """
        if self.is_total:
            return self
        nt = int(np.prod([a.size for a in self.to_axes], dtype=np.int64))
        if kind == "uniform":
            row = np.full(nt, 1.0 / nt)
        elif kind == "first":
            row = np.zeros(nt)
            row[0] = 1.0
        else:
            raise ValueError(f"unknown substitution {kind!r}")
        mat = np.array(self.matrix())
        mat[self.undefined.reshape(-1)] = row
        return CondKernel(self.from_axes, self.to_axes, mat.reshape(self.rows.shape),
                          self.undefined.copy())

    def extended(self, from_axes) -> "CondKernel":
        """Broadcast the kernel so that it conditions on a superset of axes."""
        from_axes = _as_axes(from_axes)
        names = [a.name for a in from_axes]
        if not set(self.from_names) <= set(names):
            raise AxisMismatch("extension must contain the current conditioning axes")
        if set(names) & set(self.to_names):
            raise AxisOverlap("extension overlaps target axes")
        fa = tuple(sorted(from_axes, key=lambda a: a.name))
        full = [a.name for a in fa] + list(self.to_names)
        rows = _named.broadcast_to_names(self.rows, self.names, full)
        rows = np.broadcast_to(rows, tuple(a.size for a in fa + self.to_axes))
        und = _named.broadcast_to_names(self.undefined, self.from_names, [a.name for a in fa])
        und = np.broadcast_to(und, tuple(a.size for a in fa))
        return CondKernel(fa, self.to_axes, np.array(rows), np.array(und))


def make_joint(axes, values) -> JointPmf:
    """Build a validated :class:`JointPmf`; flat ``values`` are reshaped row-major."""
    return JointPmf(axes, values)


def uniform(axes) -> JointPmf:
    axes = _as_axes(axes)
    shape = tuple(a.size for a in axes)
    return JointPmf(axes, np.full(shape, 1.0 / np.prod(shape)))


def marginalize(p: JointPmf, keep: Names) -> JointPmf:
    keep_axes = p.axes_for(keep)
    kn = tuple(a.name for a in keep_axes)
    return JointPmf(keep_axes, _named.sum_to(p.values, p.names, kn))


def compose(p: JointPmf, kernel: CondKernel) -> JointPmf:
    """Joint law ``p(x) k(y|x)``; ``p`` must live exactly on the kernel's from-axes."""
    if set(p.names) != set(kernel.from_names):
        raise AxisMismatch(f"input axes {p.names} vs kernel from-axes {kernel.from_names}")
    k = kernel
    if not k.is_total:
        live = p.values > 0
        if np.any(live & k.undefined):
            raise ZeroMassConditioning("kernel undefined at a cell with positive input mass")
        k = k.fill_undefined()
    vals, names = _named.product([(p.values, p.names), (k.rows, k.names)])
    return JointPmf([(nm, s) for nm, s in zip(names, vals.shape)], vals)


def independent(*ps: JointPmf) -> JointPmf:
    """Product law of independent components with disjoint axes."""
    names = [nm for p in ps for nm in p.names]
    if len(set(names)) != len(names):
        raise AxisOverlap("independent components must have disjoint axes")
    vals, names = _named.product([(p.values, p.names) for p in ps])
    return JointPmf([(nm, s) for nm, s in zip(names, vals.shape)], vals)


def condition(p: JointPmf, given: Names, on_zero: str = "flag") -> CondKernel:
    """Conditional kernel of the remaining axes given ``given``.

    ``on_zero`` decides what happens at zero-mass conditioning cells:
    ``"flag"`` leaves NaN rows marked in ``undefined``, ``"raise"`` raises
    :class:`ZeroMassConditioning`, ``"uniform"`` substitutes uniform rows
    (still marked).
    """
    g_axes = p.axes_for(given)
    gn = tuple(a.name for a in g_axes)
    t_axes = tuple(a for a in p.axes if a.name not in gn)
    if not t_axes:
        raise AxisMismatch("conditioning on every axis leaves nothing to condition")
    tn = tuple(a.name for a in t_axes)
    joint = _named.transpose_to(p.values, p.names, gn + tn)
    marg = joint.reshape(joint.shape[:len(gn)] + (-1,)).sum(axis=-1)
    zero = marg <= 0
    if zero.any() and on_zero == "raise":
        raise ZeroMassConditioning(f"{int(zero.sum())} zero-mass conditioning cells", zero)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = joint / marg.reshape(marg.shape + (1,) * len(tn))
    kern = CondKernel(g_axes, t_axes, rows, zero)
    if on_zero == "uniform":
        kern = kern.fill_undefined("uniform")
    return kern


def _xlogy_ratio(num: np.ndarray, den: np.ndarray, weight: np.ndarray) -> float:
    """Sum of ``weight * log2(num/den)`` over cells with positive weight."""
    m = weight > 0
    return float(np.sum(weight[m] * (np.log(num[m]) - np.log(den[m])))) / LN2


def entropy(p: JointPmf, target: Names | None = None) -> float:
    q = p if target is None else marginalize(p, target)
    v = q.values[q.values > 0]
    return float(-np.sum(v * np.log(v))) / LN2


def _disjoint(*groups: tuple[str, ...]):
    seen: set[str] = set()
    for g in groups:
        if seen & set(g):
            raise AxisOverlap(f"axis sets overlap: {sorted(seen & set(g))}")
        seen |= set(g)


def conditional_entropy(p: JointPmf, target: Names, given: Names = ()) -> float:
    t, g = _as_names(target), _as_names(given)
    _disjoint(t, g)
    joint = marginalize(p, t + g)
    if not g:
        return entropy(joint)
    pg = _named.broadcast_to_names(_named.sum_to(joint.values, joint.names, g), g, joint.names)
    pg = np.broadcast_to(pg, joint.shape)
    return max(0.0, _xlogy_ratio(pg, joint.values, joint.values))


def conditional_mutual_information(p: JointPmf, a: Names, b: Names, given: Names = ()) -> float:
    a, b, c = _as_names(a), _as_names(b), _as_names(given)
    _disjoint(a, b, c)
    joint = marginalize(p, a + b + c)
    v, nm = joint.values, joint.names

    def part(keep):
        if not keep:
            return np.ones_like(v)
        return np.broadcast_to(_named.broadcast_to_names(_named.sum_to(v, nm, keep), keep, nm), v.shape)

    pac, pbc, pc = part(a + c), part(b + c), part(c)
    return _xlogy_ratio(v * pc, pac * pbc, v)


def mutual_information(p: JointPmf, a: Names, b: Names) -> float:
    return conditional_mutual_information(p, a, b, ())


def _same_axes(p: JointPmf, q: JointPmf):
    if p.axes != q.axes:
        raise AxisMismatch(f"axes differ: {p.axes} vs {q.axes}")


def _kl_terms(w: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    m = w > 0
    if np.any(den[m] <= 0):
        return float("inf")
    return float(np.sum(w[m] * (np.log(num[m]) - np.log(den[m])))) / LN2


def _log_tilted_mean(w: np.ndarray, loglr: np.ndarray, t: float) -> float:
    """``ln sum(w * exp(t * loglr))`` for weights summing to one, accurate as ``t -> 0``."""
    z = t * loglr
    if z.size == 0:
        return 0.0
    if z.max() < 30.0:
        s = float(np.sum(w * np.expm1(z)))
        return float(np.log1p(s))
    lw = np.log(w) + z
    top = lw.max()
    return float(top + np.log(np.sum(np.exp(lw - top))))


def _check_lambda(lam: float):
    if not np.isfinite(lam) or lam < 1.0:
        raise InvalidLambda(f"Rényi order must be a finite number >= 1, got {lam}")


def relative_entropy(p: JointPmf, q: JointPmf, conditioning=None) -> float:
    """``D(p||q)`` in bits.

    ``conditioning=(target, given, r)`` evaluates the conditional relative
    entropy ``D(p_{target|given} || q_{target|given} | r)`` with ``r`` a
    distribution over the given axes.
    """
    _same_axes(p, q)
    if conditioning is not None:
        target, given, r = conditioning
        t, g = _as_names(target), _as_names(given)
        pk = condition(marginalize(p, t + g), g)
        qk = condition(marginalize(q, t + g), g)
        return conditional_relative_entropy(pk, qk, r)
    return _kl_terms(p.values, p.values, q.values)


def _kernel_pair(pk: CondKernel, qk: CondKernel, r: JointPmf):
    if pk.from_axes != qk.from_axes or pk.to_axes != qk.to_axes:
        raise AxisMismatch("kernels must share from/to axes")
    if r.axes != pk.from_axes:
        raise AxisMismatch(f"weighting law axes {r.names} vs kernel from-axes {pk.from_names}")
    nt = len(pk.to_axes)
    w = r.values.reshape(r.shape + (1,) * nt)
    live = np.broadcast_to(r.values > 0, pk.undefined.shape)
    if np.any(live & (pk.undefined | qk.undefined)):
        raise ZeroMassConditioning("kernel undefined where the weighting law has mass")
    a = np.where(np.isnan(pk.rows), 0.0, pk.rows)
    b = np.where(np.isnan(qk.rows), 0.0, qk.rows)
    return w * a, a, b


def conditional_relative_entropy(pk: CondKernel, qk: CondKernel, r: JointPmf) -> float:
    w, a, b = _kernel_pair(pk, qk, r)
    return _kl_terms(w, a, b)


def renyi_divergence(p: JointPmf, q: JointPmf, lam: float) -> float:
    """Rényi divergence of order ``lam >= 1`` in bits (relative entropy at 1)."""
    _same_axes(p, q)
    _check_lambda(lam)
    if lam == 1.0:
        return relative_entropy(p, q)
    return _renyi_from_weights(p.values, p.values, q.values, lam)


def _renyi_from_weights(w, num, den, lam) -> float:
    m = w > 0
    if np.any(den[m] <= 0):
        return float("inf")
    loglr = np.log(num[m]) - np.log(den[m])
    t = lam - 1.0
    return _log_tilted_mean(w[m], loglr, t) / (t * LN2)


def conditional_renyi_divergence(pk: CondKernel, qk: CondKernel, r: JointPmf, lam: float) -> float:
    """``D_lam(p_{X|Z} || q_{X|Z} | r_Z)`` in bits."""
    _check_lambda(lam)
    w, a, b = _kernel_pair(pk, qk, r)
    if lam == 1.0:
        return _kl_terms(w, a, b)
    return _renyi_from_weights(w, a, b, lam)


def l1_distance(p: JointPmf, q: JointPmf) -> float:
    _same_axes(p, q)
    return float(np.abs(p.values - q.values).sum())


def markov_residual(p: JointPmf, x: Names, y: Names, z: Names) -> float:
    """Largest violation of ``p(x,y,z) p(y) = p(x,y) p(y,z)``.

    Zero exactly when ``X -> Y -> Z`` is a Markov chain under ``p``.
    """
    x, y, z = _as_names(x), _as_names(y), _as_names(z)
    _disjoint(x, y, z)
    joint = marginalize(p, x + y + z)
    v, nm = joint.values, joint.names

    def part(keep):
        if not keep:
            return np.ones(1)
        return _named.broadcast_to_names(_named.sum_to(v, nm, keep), keep, nm)

    res = v * part(y) - part(x + y) * part(y + z)
    return float(np.max(np.abs(res))) if res.size else 0.0


def product_marginals(p: JointPmf, groups: Sequence[Names]) -> JointPmf:
    """Product of the marginals of ``p`` on each group of axes."""
    return independent(*(marginalize(p, g) for g in groups))
