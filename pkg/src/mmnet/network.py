"""Discrete memoryless multicast networks and the standard network families.

Nodes are numbered ``1..N``. The channel is stored as a dense array of shape
``input_sizes + output_sizes`` holding ``q(y_1..y_N | x_1..x_N)``; the matching
:class:`~mmnet.prob.CondKernel` uses axis names ``X1..XN`` and ``Y1..YN``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AlphabetMismatch,
    InvalidCut,
    InvalidDestination,
    InvalidProbability,
    MmnetError,
    MultipleDestinations,
    NotNormalized,
    NotProductForm,
)
from .prob import Axis, CondKernel, JointPmf, l1_distance, product_marginals

NORM_TOL = 1e-9
MAX_NODES = 9


def x_name(i: int) -> str:
    return f"X{i}"


def y_name(i: int) -> str:
    return f"Y{i}"


@dataclass(frozen=True)
class Cut:
    """A node subset ``T``; the complement is taken relative to ``1..N``."""

    T: frozenset

    def __init__(self, T: Iterable[int] = ()):
        object.__setattr__(self, "T", frozenset(int(i) for i in T))

    @classmethod
    def from_bitmask(cls, mask: int, n_nodes: int) -> "Cut":
        if mask < 0 or mask >= (1 << n_nodes):
            raise InvalidCut(f"bitmask {mask} out of range for {n_nodes} nodes")
        return cls(i + 1 for i in range(n_nodes) if mask >> i & 1)

    @property
    def bitmask(self) -> int:
        return sum(1 << (i - 1) for i in self.T)

    def complement(self, n_nodes: int) -> tuple[int, ...]:
        return tuple(i for i in range(1, n_nodes + 1) if i not in self.T)

    def members(self) -> tuple[int, ...]:
        return tuple(sorted(self.T))

    def __repr__(self) -> str:
        return f"Cut({sorted(self.T)})"


@dataclass(frozen=True)
class LinkChannelTable:
    """Per-link transition matrices ``q_{Y_ij | X_ij}`` keyed by ``(i, j)``."""

    node_count: int
    links: Mapping[tuple[int, int], np.ndarray]

    def __post_init__(self):
        clean = {}
        for (i, j), mat in self.links.items():
            i, j = int(i), int(j)
            m = np.array(mat, dtype=float)
            if m.ndim != 2:
                raise AlphabetMismatch(f"link ({i},{j}) matrix must be 2-D, got shape {m.shape}")
            if not (1 <= i <= self.node_count and 1 <= j <= self.node_count) or i == j:
                raise AlphabetMismatch(f"link ({i},{j}) is not a pair of distinct nodes in 1..{self.node_count}")
            if (i, j) in clean:
                raise AlphabetMismatch(f"duplicate link ({i},{j})")
            if np.any(m < 0):
                raise InvalidProbability(f"link ({i},{j}) has negative entries")
            dev = np.max(np.abs(m.sum(axis=1) - 1.0))
            if dev > NORM_TOL:
                raise NotNormalized(f"link ({i},{j}) rows deviate from 1 by {dev:.3g}")
            m.setflags(write=False)
            clean[(i, j)] = m
        object.__setattr__(self, "links", dict(sorted(clean.items())))

    def matrix(self, i: int, j: int) -> np.ndarray:
        """Transition matrix of link ``(i, j)``; absent links are the trivial 1x1 kernel."""
        return self.links.get((i, j), np.ones((1, 1)))

    def pairs(self) -> list[tuple[int, int]]:
        n = self.node_count
        return [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]

    def out_components(self, i: int) -> list[int]:
        return [j for j in range(1, self.node_count + 1) if j != i]

    def in_components(self, j: int) -> list[int]:
        return [i for i in range(1, self.node_count + 1) if i != j]


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Node count, multicast demand, alphabets and the full channel tensor.

    ``links`` is kept for networks assembled from independent point-to-point
    channels, ``erasure`` for erasure networks, and ``feedback_of`` names the
    destination whose output was copied when this is a feedback version.
    """

    node_count: int
    sources: frozenset
    destinations: frozenset
    input_sizes: tuple[int, ...]
    output_sizes: tuple[int, ...]
    channel: np.ndarray
    links: LinkChannelTable | None = None
    erasure: dict | None = None
    feedback_of: int | None = None
    name: str = ""
    _kernel: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", frozenset(int(s) for s in self.sources))
        object.__setattr__(self, "destinations", frozenset(int(d) for d in self.destinations))
        object.__setattr__(self, "input_sizes", tuple(int(s) for s in self.input_sizes))
        object.__setattr__(self, "output_sizes", tuple(int(s) for s in self.output_sizes))
        ch = np.array(self.channel, dtype=float)
        shape = self.input_sizes + self.output_sizes
        if ch.shape != shape and ch.size == int(np.prod(shape, dtype=np.int64)):
            ch = ch.reshape(shape)
        ch.setflags(write=False)
        object.__setattr__(self, "channel", ch)

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(range(1, self.node_count + 1))

    @property
    def x_axes(self) -> tuple[Axis, ...]:
        return tuple(Axis(x_name(i), s) for i, s in zip(self.nodes, self.input_sizes))

    @property
    def y_axes(self) -> tuple[Axis, ...]:
        return tuple(Axis(y_name(i), s) for i, s in zip(self.nodes, self.output_sizes))

    @property
    def n_inputs(self) -> int:
        return int(np.prod(self.input_sizes, dtype=np.int64))

    @property
    def n_outputs(self) -> int:
        return int(np.prod(self.output_sizes, dtype=np.int64))

    def kernel(self) -> CondKernel:
        """The channel as a kernel ``X1..XN -> Y1..YN`` (validated on first use)."""
        if not self._kernel:
            self._kernel.append(CondKernel(self.x_axes, self.y_axes, self.channel))
        return self._kernel[0]

    def channel_matrix(self) -> np.ndarray:
        """``q`` as a ``(prod |X_i|, prod |Y_i|)`` matrix, both flattened row-major in node order."""
        return self.channel.reshape(self.n_inputs, self.n_outputs)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str


def validate_network(spec: NetworkSpec) -> list[Diagnostic]:
    """List every violated invariant; an empty list means the network is valid."""
    out: list[Diagnostic] = []
    N = spec.node_count
    if N < 1:
        out.append(Diagnostic("InvalidNodeCount", f"node count {N} < 1"))
        return out
    if N > MAX_NODES:
        out.append(Diagnostic("TooManyNodes", f"node count {N} exceeds {MAX_NODES}"))
    if not spec.sources:
        out.append(Diagnostic("MissingSources", "source set is empty"))
    if not spec.destinations:
        out.append(Diagnostic("MissingDestinations", "destination set is empty"))
    for label, group in (("sources", spec.sources), ("destinations", spec.destinations)):
        bad = sorted(i for i in group if not 1 <= i <= N)
        if bad:
            out.append(Diagnostic("UnknownNode", f"{label} contain nodes outside 1..{N}: {bad}"))
    if len(spec.input_sizes) != N or len(spec.output_sizes) != N:
        out.append(Diagnostic("AlphabetMismatch", "alphabet lists must have one entry per node"))
        return out
    if any(s < 1 for s in spec.input_sizes + spec.output_sizes):
        out.append(Diagnostic("EmptyAlphabet", "alphabet sizes must be >= 1"))
        return out
    ch = spec.channel
    if ch.shape != spec.input_sizes + spec.output_sizes:
        out.append(Diagnostic("ShapeMismatch",
                              f"channel shape {ch.shape} vs {spec.input_sizes + spec.output_sizes}"))
        return out
    if not np.all(np.isfinite(ch)) or np.any(ch < 0):
        out.append(Diagnostic("NegativeMass", "channel has negative or non-finite entries"))
    sums = spec.channel_matrix().sum(axis=1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > NORM_TOL):
        row = int(np.argmax(dev))
        out.append(Diagnostic("NotNormalized",
                              f"channel row {np.unravel_index(row, spec.input_sizes)} sums to {sums[row]!r}"))
    return out


def require_valid(spec: NetworkSpec) -> None:
    diags = validate_network(spec)
    if diags:
        raise MmnetError("; ".join(f"{d.code}: {d.message}" for d in diags))


def _check_cut(spec: NetworkSpec, cut: Cut) -> tuple[int, ...]:
    bad = [i for i in cut.T if not 1 <= i <= spec.node_count]
    if bad:
        raise InvalidCut(f"cut contains nodes outside 1..{spec.node_count}: {sorted(bad)}")
    return cut.complement(spec.node_count)


def marginal_channel(spec: NetworkSpec, cut: Cut) -> CondKernel:
    """``q_{Y_{T^c} | X_I}``, obtained by summing the outputs of ``T`` out of the channel."""
    tc = _check_cut(spec, cut)
    if not tc:
        raise InvalidCut("cut covers every node; no outputs remain")
    N = spec.node_count
    drop = tuple(N + i - 1 for i in cut.T)
    rows = spec.channel.sum(axis=drop) if drop else spec.channel
    return CondKernel(spec.x_axes, tuple(Axis(y_name(j), spec.output_sizes[j - 1]) for j in tc), rows)


def marginal_channel_matrix(spec: NetworkSpec, cut: Cut) -> np.ndarray:
    """Marginal channel as ``(flat X_I, flat Y_{T^c})`` in node order."""
    tc = _check_cut(spec, cut)
    N = spec.node_count
    drop = tuple(N + i - 1 for i in cut.T)
    rows = spec.channel.sum(axis=drop) if drop else spec.channel
    return rows.reshape(spec.n_inputs, -1)


def build_independent_dmc_network(links: LinkChannelTable | Mapping, sources: Iterable[int],
                                  destinations: Iterable[int], node_count: int | None = None,
                                  name: str = "") -> NetworkSpec:
    """Network whose channel is the product of independent point-to-point links.

    Node ``i`` sends the tuple ``(X_ij)_{j != i}`` and receives ``(Y_ji)_{j != i}``,
    both ordered by the other node's index. Links that are not listed are
    trivial (singleton alphabets on both ends).
    """
    if not isinstance(links, LinkChannelTable):
        if node_count is None:
            node_count = max(max(p) for p in links)
        links = LinkChannelTable(node_count, links)
    N = links.node_count
    factors = []
    x_groups: dict[int, list[str]] = {i: [] for i in range(1, N + 1)}
    y_groups: dict[int, list[str]] = {j: [] for j in range(1, N + 1)}
    for i, j in links.pairs():
        xa, ya = f"x{i}_{j}", f"y{i}_{j}"
        factors.append((links.matrix(i, j), (xa, ya)))
        x_groups[i].append(xa)
        y_groups[j].append(ya)
    from . import _named

    order_x = [nm for i in range(1, N + 1) for nm in x_groups[i]]
    order_y = [nm for j in range(1, N + 1) for nm in y_groups[j]]
    if factors:
        arr, names = _named.product(factors, order_x + order_y)
    else:
        arr, names = np.ones(()), ()
    groups = [x_groups[i] for i in range(1, N + 1)] + [y_groups[j] for j in range(1, N + 1)]
    channel = _flatten_groups(arr, names, groups)
    in_sizes = tuple(int(s) for s in channel.shape[:N])
    out_sizes = tuple(int(s) for s in channel.shape[N:])
    spec = NetworkSpec(N, frozenset(sources), frozenset(destinations), in_sizes, out_sizes,
                       channel, links=links, name=name)
    return spec


def _flatten_groups(arr, names, groups):
    from . import _named

    sizes = dict(zip(names, arr.shape))
    order = [nm for g in groups for nm in g]
    moved = _named.transpose_to(arr, names, order) if order else arr
    shape = [int(np.prod([sizes[nm] for nm in g], dtype=np.int64)) for g in groups]
    return moved.reshape(shape)


def build_erasure_network(edges: Sequence[tuple[int, int]], erasure_probs, sources: Iterable[int],
                          destinations: Iterable[int], input_sizes, node_count: int | None = None,
                          name: str = "") -> NetworkSpec:
    """Broadcast erasure network with the erasure pattern given to every destination.

    Node ``i`` transmits one symbol from ``input_sizes[i-1]``. Each edge
    ``(i, j)`` independently delivers it or erases it (symbol index
    ``input_sizes[i-1]``) with probability ``erasure_probs``. ``Y_j`` is the
    tuple of in-edge outputs ordered by source node; a destination's output
    also carries the pattern of all edges (bit ``b`` set when the ``b``-th
    edge in sorted order is erased), appended as the last coordinate.
    ``input_sizes`` is a per-node sequence or a per-edge mapping that must
    agree for edges leaving the same node.
    """
    given = [(int(a), int(b)) for a, b in edges]
    edges = sorted(given)
    if len(set(edges)) != len(edges):
        raise AlphabetMismatch("duplicate edges")
    if isinstance(erasure_probs, Mapping):
        eps = [float(erasure_probs[e]) for e in edges]
    elif np.ndim(erasure_probs) == 0:
        eps = [float(erasure_probs)] * len(edges)
    else:
        probs = list(erasure_probs)
        if len(probs) != len(edges):
            raise AlphabetMismatch("one erasure probability per edge is required")
        by_edge = dict(zip(given, probs))
        eps = [float(by_edge[e]) for e in edges]
    for e, p in zip(edges, eps):
        if not (0.0 <= p <= 1.0) or not np.isfinite(p):
            raise InvalidProbability(f"erasure probability {p} on edge {e} outside [0,1]")
    if isinstance(input_sizes, Mapping):
        per_node: dict[int, int] = {}
        for (a, _), s in input_sizes.items():
            if per_node.setdefault(int(a), int(s)) != int(s):
                raise AlphabetMismatch(f"edges leaving node {a} disagree on the input alphabet")
        if node_count is None:
            node_count = max([max(e) for e in edges] + list(per_node))
        sizes = [per_node.get(i, 1) for i in range(1, node_count + 1)]
    else:
        sizes = [int(s) for s in input_sizes]
        node_count = len(sizes) if node_count is None else node_count
        if len(sizes) != node_count:
            raise AlphabetMismatch("input_sizes must list one size per node")
    N = node_count
    for a, b in edges:
        if not (1 <= a <= N and 1 <= b <= N) or a == b:
            raise AlphabetMismatch(f"edge ({a},{b}) is not a pair of distinct nodes in 1..{N}")
    dests = frozenset(int(d) for d in destinations)
    E = len(edges)
    in_edges = {j: [k for k, e in enumerate(edges) if e[1] == j] for j in range(1, N + 1)}
    out_sizes = []
    for j in range(1, N + 1):
        size = int(np.prod([sizes[edges[k][0] - 1] + 1 for k in in_edges[j]], dtype=np.int64))
        if j in dests:
            size *= 2 ** E
        out_sizes.append(size)
    channel = np.zeros(tuple(sizes) + tuple(out_sizes))
    for pattern in range(2 ** E):
        erased = [(pattern >> k) & 1 for k in range(E)]
        prob = float(np.prod([eps[k] if erased[k] else 1.0 - eps[k] for k in range(E)]))
        if prob == 0.0:
            continue
        for x in itertools.product(*(range(s) for s in sizes)):
            y = []
            for j in range(1, N + 1):
                idx = 0
                for k in in_edges[j]:
                    src = edges[k][0]
                    sym = sizes[src - 1] if erased[k] else x[src - 1]
                    idx = idx * (sizes[src - 1] + 1) + sym
                if j in dests:
                    idx = idx * 2 ** E + pattern
                y.append(idx)
            channel[tuple(x) + tuple(y)] += prob
    info = {"edges": edges, "erasure_probs": eps, "input_sizes": sizes}
    return NetworkSpec(N, frozenset(sources), dests, tuple(sizes), tuple(out_sizes), channel,
                       erasure=info, name=name)


def build_feedback_version(spec: NetworkSpec, d: int | None = None) -> NetworkSpec:
    """Give every node a literal copy of the destination's output.

    ``Y~_i = (Y_i, Y_d)`` with flat index ``y_i * |Y_d| + y_d``.
    """
    if len(spec.destinations) != 1:
        raise MultipleDestinations(f"feedback version needs one destination, have {sorted(spec.destinations)}")
    (only,) = spec.destinations
    if d is None:
        d = only
    if d != only:
        raise InvalidDestination(f"node {d} is not the destination {only}")
    N = spec.node_count
    yd = spec.output_sizes[d - 1]
    out_sizes = tuple(s * yd for s in spec.output_sizes)
    mat = spec.channel_matrix()
    new = np.zeros((spec.n_inputs,) + out_sizes)
    ys = np.indices(spec.output_sizes).reshape(N, -1)
    target = tuple(ys[i] * yd + ys[d - 1] for i in range(N))
    new[(slice(None),) + target] = mat
    channel = new.reshape(spec.input_sizes + out_sizes)
    return NetworkSpec(N, spec.sources, spec.destinations, spec.input_sizes, out_sizes, channel,
                       links=spec.links, erasure=spec.erasure, feedback_of=d,
                       name=(spec.name + "+feedback") if spec.name else "feedback")


def region_cuts(spec: NetworkSpec) -> list[Cut]:
    """Cuts ``T`` with ``T^c`` meeting the destinations, in bitmask order."""
    N = spec.node_count
    cuts = []
    for mask in range(2 ** N):
        cut = Cut.from_bitmask(mask, N)
        if any(j not in cut.T for j in spec.destinations):
            cuts.append(cut)
    return cuts


def all_cuts(spec: NetworkSpec) -> list[Cut]:
    return [Cut.from_bitmask(m, spec.node_count) for m in range(2 ** spec.node_count)]


def check_determinism(spec: NetworkSpec, cuts: Sequence[Cut] | None = None) -> dict[Cut, bool]:
    """For each cut: does every supported ``(x_I, y_{T^c})`` admit exactly one ``y_T``?

    ``cuts=None`` checks the region cuts.
    """
    if cuts is None:
        cuts = region_cuts(spec)
    N = spec.node_count
    out = {}
    for cut in cuts:
        tc = _check_cut(spec, cut)
        t = cut.members()
        order = [N + i - 1 for i in t] + [N + j - 1 for j in tc]
        arr = np.transpose(spec.channel, list(range(N)) + order)
        ny_t = int(np.prod([spec.output_sizes[i - 1] for i in t], dtype=np.int64))
        arr = arr.reshape(spec.n_inputs, ny_t, -1)
        support = (arr > 0).sum(axis=1)
        mass = arr.sum(axis=1)
        out[cut] = bool(np.all(support[mass > 0] == 1))
    return out


def determinism_report(spec: NetworkSpec) -> dict[str, dict[int, bool]]:
    """Determinism on the region cuts and, separately, on every cut."""
    reg = check_determinism(spec, region_cuts(spec))
    every = check_determinism(spec, all_cuts(spec))
    return {
        "region_cuts": {c.bitmask: v for c, v in reg.items()},
        "all_cuts": {c.bitmask: v for c, v in every.items()},
    }


@dataclass(frozen=True)
class DominanceReport:
    slacks: dict          # cut bitmask -> (max over all inputs) - (value at p*)
    at_p_star: dict
    maxima: dict
    tolerance: float
    dominated: bool


def is_product_form(p: JointPmf, groups: Sequence[Sequence[str]], tol: float = 1e-12) -> bool:
    prod = product_marginals(p, groups)
    return l1_distance(p, prod) <= tol * max(1, p.values.size)


def check_product_dominance(spec: NetworkSpec, p_star: JointPmf, cuts: Sequence[Cut] | None = None,
                            oracle_resolution: int | None = None, tolerance: float = 1e-3,
                            budget: int | None = None) -> DominanceReport:
    """Compare each cut value at ``p_star`` with its maximum over all input laws."""
    from . import regions

    names = [x_name(i) for i in spec.nodes]
    if sorted(p_star.names) != sorted(names):
        raise NotProductForm(f"p* must be a law on {names}")
    if not is_product_form(p_star, [[nm] for nm in names]):
        raise NotProductForm("p* does not factorize over nodes")
    if cuts is None:
        cuts = region_cuts(spec)
    slacks, at, mx = {}, {}, {}
    for cut in cuts:
        v = regions.cut_value(spec, cut, p_star)
        best = regions.max_cut_value(spec, cut, "all-inputs", budget=budget,
                                     oracle_resolution=oracle_resolution)
        at[cut.bitmask] = v
        mx[cut.bitmask] = best.value
        slacks[cut.bitmask] = best.value - v
    dominated = all(s <= tolerance for s in slacks.values())
    return DominanceReport(slacks, at, mx, tolerance, dominated)


def product_input(spec: NetworkSpec, per_node: Sequence[np.ndarray]) -> JointPmf:
    """Product law over ``X1..XN`` from per-node marginals."""
    from .prob import independent, make_joint

    parts = [make_joint([(x_name(i), spec.input_sizes[i - 1])], np.asarray(v, dtype=float))
             for i, v in zip(spec.nodes, per_node)]
    return independent(*parts)


def uniform_product_input(spec: NetworkSpec) -> JointPmf:
    return product_input(spec, [np.full(s, 1.0 / s) for s in spec.input_sizes])
