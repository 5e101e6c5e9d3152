"""Block codes on multicast networks: induced laws, error probabilities, experiments.

Encoder ``(i, k)`` maps ``(w_i, y_i^{k-1})`` to ``x_{i,k}`` and is stored as an
integer table of shape ``(|W_i|,) + (d,) * (k-1)`` where each ``d`` is either
``|Y_i|`` or 1 (a time the encoder ignores). Decoder ``(i, j)`` maps
``(w_j, y_j^n)`` to an estimate of ``w_i`` with the same convention. Tables
whose feedback dimensions are all 1 describe feedback-blind encoders.

Axis names of induced laws: ``W{i}``, ``X{i}.{k}``, ``Y{i}.{k}``, ``Wh{i}_{j}``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _named
from .errors import AlphabetMismatch, BudgetExhausted, InvalidRates, ShapeMismatch
from .network import Cut, NetworkSpec, marginal_channel_matrix
from .prob import JointPmf, make_joint, markov_residual

DEFAULT_BUDGET = 1_000_000
Z95 = 1.96

# stream identifiers for the counter-based generator
PURPOSES = {"encoder": 1, "decoder": 2, "message": 3, "channel": 4}


def w_name(i: int) -> str:
    return f"W{i}"


def xk_name(i: int, k: int) -> str:
    return f"X{i}.{k}"


def yk_name(i: int, k: int) -> str:
    return f"Y{i}.{k}"


def wh_name(i: int, j: int) -> str:
    return f"Wh{i}_{j}"


def message_size(rate: float, n: int) -> int:
    """``ceil(2^{nR})``, with a guard against round-off just above an integer."""
    if rate <= 0:
        return 1
    return int(math.ceil(2.0 ** (n * rate) - 1e-9))


def make_rng(seed: int, purpose: str, node: int = 0, time_index: int = 0) -> np.random.Generator:
    """Philox stream keyed by ``(purpose, node, time)`` under the user seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(PURPOSES[purpose], int(node), int(time_index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class Code:
    n: int
    rates: tuple
    message_sizes: tuple
    encoders: dict        # (i, k) -> int array
    decoders: dict        # (i, j) -> int array

    @property
    def feedback_blind(self) -> bool:
        return all(all(d == 1 for d in t.shape[1:]) for t in self.encoders.values())

    def validate(self, spec: NetworkSpec, decoders: bool = True) -> None:
        N, n = spec.node_count, self.n
        if len(self.message_sizes) != N or len(self.rates) != N:
            raise ShapeMismatch("code must list one rate and one message size per node")
        for i in spec.nodes:
            r, m = self.rates[i - 1], self.message_sizes[i - 1]
            if i not in spec.sources and r != 0:
                raise InvalidRates(f"node {i} is not a source but has rate {r}")
            if m != message_size(r, n):
                raise ShapeMismatch(f"node {i}: message size {m} != ceil(2^(nR)) = {message_size(r, n)}")
        for i in spec.nodes:
            for k in range(1, n + 1):
                t = self.encoders.get((i, k))
                if t is None:
                    raise ShapeMismatch(f"missing encoder for node {i} at time {k}")
                _check_table(t, self.message_sizes[i - 1], spec.output_sizes[i - 1], k - 1,
                             spec.input_sizes[i - 1], f"encoder ({i},{k})")
        for i in sorted(spec.sources) if decoders else ():
            for j in sorted(spec.destinations):
                t = self.decoders.get((i, j))
                if t is None:
                    raise ShapeMismatch(f"missing decoder for message {i} at node {j}")
                _check_table(t, self.message_sizes[j - 1], spec.output_sizes[j - 1], n,
                             self.message_sizes[i - 1], f"decoder ({i},{j})")


def _check_table(t, w_size, y_size, depth, out_size, label):
    t = np.asarray(t)
    if t.ndim != depth + 1 or t.shape[0] != w_size:
        raise ShapeMismatch(f"{label}: shape {t.shape}, expected ({w_size},) + {depth} feedback dims")
    if any(d not in (1, y_size) for d in t.shape[1:]):
        raise ShapeMismatch(f"{label}: feedback dims must be 1 or {y_size}, got {t.shape[1:]}")
    if t.size and (t.min() < 0 or t.max() >= out_size):
        raise AlphabetMismatch(f"{label}: entries must lie in 0..{out_size - 1}")


def _one_hot(table: np.ndarray, size: int) -> np.ndarray:
    return (table[..., None] == np.arange(size)).astype(float)


def _squeeze_feedback(table: np.ndarray, names: list[str]):
    """Drop feedback dims of size 1 from a table, with their names."""
    keep = [0] + [d for d in range(1, table.ndim) if table.shape[d] != 1]
    sub = table.reshape([table.shape[d] for d in keep])
    return sub, [names[d] for d in keep]


def induced_axes(spec: NetworkSpec, code: Code, include_estimates: bool = True) -> list[tuple[str, int]]:
    axes = [(w_name(i), code.message_sizes[i - 1]) for i in spec.nodes]
    for k in range(1, code.n + 1):
        axes += [(xk_name(i, k), spec.input_sizes[i - 1]) for i in spec.nodes]
        axes += [(yk_name(i, k), spec.output_sizes[i - 1]) for i in spec.nodes]
    if include_estimates:
        axes += [(wh_name(i, j), code.message_sizes[i - 1])
                 for i in sorted(spec.sources) for j in sorted(spec.destinations)]
    return axes


def induced_distribution(spec: NetworkSpec, code: Code, marginal_cut: Cut | None = None,
                         budget_cells: int = DEFAULT_BUDGET, include_estimates: bool = True) -> JointPmf:
    """Exact joint law of messages, inputs, outputs and estimates under the code.

    Messages are uniform and independent. With ``marginal_cut`` the result is
    the marginal on all inputs and the outputs of the cut's complement.
    """
    code.validate(spec, decoders=include_estimates)
    axes = induced_axes(spec, code, include_estimates)
    cells = int(np.prod([s for _, s in axes], dtype=np.float64))
    if cells > budget_cells:
        raise BudgetExhausted(f"induced law needs {cells} cells > budget {budget_cells}")
    N, n = spec.node_count, code.n
    arr = np.ones([code.message_sizes[i - 1] for i in spec.nodes]) / np.prod(code.message_sizes)
    names = [w_name(i) for i in spec.nodes]
    q = np.asarray(spec.channel)
    for k in range(1, n + 1):
        for i in spec.nodes:
            hist = [w_name(i)] + [yk_name(i, l) for l in range(1, k)]
            sub, sub_names = _squeeze_feedback(np.asarray(code.encoders[(i, k)]), hist)
            arr, names = _named.product(
                [(arr, names), (_one_hot(sub, spec.input_sizes[i - 1]), sub_names + [xk_name(i, k)])],
                names + [xk_name(i, k)])
            names = list(names)
        chan_names = [xk_name(i, k) for i in spec.nodes] + [yk_name(i, k) for i in spec.nodes]
        arr, names = _named.product([(arr, names), (q, chan_names)],
                                    names + [yk_name(i, k) for i in spec.nodes])
        names = list(names)
    if include_estimates:
        for i in sorted(spec.sources):
            for j in sorted(spec.destinations):
                hist = [w_name(j)] + [yk_name(j, l) for l in range(1, n + 1)]
                sub, sub_names = _squeeze_feedback(np.asarray(code.decoders[(i, j)]), hist)
                arr, names = _named.product(
                    [(arr, names), (_one_hot(sub, code.message_sizes[i - 1]), sub_names + [wh_name(i, j)])],
                    names + [wh_name(i, j)])
                names = list(names)
    pmf = make_joint(list(zip(names, arr.shape)), arr)
    if marginal_cut is not None:
        tc = marginal_cut.complement(N)
        keep = [xk_name(i, k) for k in range(1, n + 1) for i in spec.nodes]
        keep += [yk_name(j, k) for k in range(1, n + 1) for j in tc]
        pmf = pmf.marginal(keep)
    return pmf


def memoryless_residual(spec: NetworkSpec, p: JointPmf, n: int) -> float:
    """Largest violation of the per-slot factorization through the channel.

    For each time ``k`` checks that ``Y_{I,k}`` depends on the past only
    through ``X_{I,k}`` and that the conditional law equals the channel.
    """
    worst = 0.0
    q = spec.channel_matrix()
    for k in range(1, n + 1):
        xs = [xk_name(i, k) for i in spec.nodes]
        ys = [yk_name(i, k) for i in spec.nodes]
        past = [a for a in p.names if _time_of(a) is not None and _time_of(a) < k]
        past += [a for a in p.names if a.startswith("W") and not a.startswith("Wh")]
        if past:
            worst = max(worst, markov_residual(p, past, xs, ys))
        joint = _named.flatten_axes(p.marginal(xs + ys).values, p.marginal(xs + ys).names, [xs, ys])
        px = joint.sum(axis=1)
        worst = max(worst, float(np.max(np.abs(joint - px[:, None] * q))))
    return worst


def _time_of(name: str) -> int | None:
    if name[0] in "XY" and "." in name:
        return int(name.split(".")[1])
    return None


# --------------------------------------------------------------------------
# exact error


def _codewords(spec: NetworkSpec, code: Code) -> np.ndarray:
    """``x[w_S, k]``: flat channel input at time ``k`` for each flat source-message tuple."""
    src = sorted(spec.sources)
    wsizes = [code.message_sizes[i - 1] for i in src]
    W = int(np.prod(wsizes, dtype=np.int64))
    w_digits = np.array(np.unravel_index(np.arange(W), wsizes)) if src else np.zeros((0, 1), int)
    out = np.zeros((W, code.n), dtype=np.int64)
    for k in range(1, code.n + 1):
        xs = []
        for i in spec.nodes:
            t = np.asarray(code.encoders[(i, k)]).reshape(code.message_sizes[i - 1], -1)[:, 0]
            wi = w_digits[src.index(i)] if i in src else np.zeros(W, dtype=np.int64)
            xs.append(t[wi])
        out[:, k - 1] = np.ravel_multi_index(xs, spec.input_sizes)
    return out


def _fast_path_ok(spec: NetworkSpec, code: Code) -> bool:
    return code.feedback_blind and all(code.message_sizes[j - 1] == 1 for j in spec.destinations)


def _dest_digits(spec: NetworkSpec, yflat: np.ndarray) -> dict[int, np.ndarray]:
    """Split flat ``Y_D`` indices (row-major over sorted destinations) per destination."""
    dests = sorted(spec.destinations)
    sizes = [spec.output_sizes[j - 1] for j in dests]
    parts = np.unravel_index(yflat, sizes)
    return dict(zip(dests, parts))


def _decoder_lookup(table: np.ndarray, ys: list[np.ndarray], w_j: int | np.ndarray = 0) -> np.ndarray:
    idx = [np.broadcast_to(np.asarray(w_j), ys[0].shape)]
    for d, y in zip(table.shape[1:], ys):
        idx.append(y if d != 1 else np.zeros_like(y))
    return table[tuple(idx)]


def exact_error_probability(spec: NetworkSpec, code: Code, budget_cells: int = DEFAULT_BUDGET,
                            chunk: int = 1 << 16) -> float:
    """Probability that some destination misdecodes some source message.

    Feedback-blind codes whose destinations carry no message of their own are
    evaluated by enumerating destination output sequences (``|Y_D|^n`` cells);
    other codes use the full induced law.
    """
    code.validate(spec)
    if all(m == 1 for m in code.message_sizes):
        return 0.0
    if not _fast_path_ok(spec, code):
        p = induced_distribution(spec, code, budget_cells=budget_cells)
        correct = np.ones(p.shape, dtype=bool)
        for i in sorted(spec.sources):
            wi = p.names.index(w_name(i))
            for j in sorted(spec.destinations):
                hj = p.names.index(wh_name(i, j))
                a = np.arange(p.shape[wi]).reshape([-1 if d == wi else 1 for d in range(len(p.shape))])
                b = np.arange(p.shape[hj]).reshape([-1 if d == hj else 1 for d in range(len(p.shape))])
                correct &= (a == b)
        return float(min(max(1.0 - p.values[correct].sum(), 0.0), 1.0))
    dests = sorted(spec.destinations)
    qD = marginal_channel_matrix(spec, Cut(i for i in spec.nodes if i not in spec.destinations))
    nyd = qD.shape[1]
    n = code.n
    total = nyd ** n
    if total > budget_cells:
        raise BudgetExhausted(f"enumeration over {total} output sequences > budget {budget_cells}")
    src = sorted(spec.sources)
    wsizes = [code.message_sizes[i - 1] for i in src]
    cw = _codewords(spec, code)
    correct_mass = 0.0
    for start in range(0, total, chunk):
        yflat = np.arange(start, min(total, start + chunk))
        per_time = np.unravel_index(yflat, (nyd,) * n)
        per_dest = [_dest_digits(spec, yk) for yk in per_time]
        ok = np.ones(yflat.size, dtype=bool)
        est = []
        for i in src:
            guess = None
            for j in dests:
                g = _decoder_lookup(np.asarray(code.decoders[(i, j)]), [pd[j] for pd in per_dest])
                if guess is None:
                    guess = g
                else:
                    ok &= guess == g
            est.append(guess)
        wflat = np.ravel_multi_index(est, wsizes) if src else np.zeros(yflat.size, dtype=np.int64)
        prob = np.ones(yflat.size)
        for k in range(n):
            prob *= qD[cw[wflat, k], per_time[k]]
        correct_mass += float(prob[ok].sum())
    W = int(np.prod(wsizes, dtype=np.int64))
    return float(min(max(1.0 - correct_mass / W, 0.0), 1.0))


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class ErrorEstimate:
    point: float
    half_width: float
    trials: int
    seed: int


def monte_carlo_error(spec: NetworkSpec, code: Code, trials: int, seed: int) -> ErrorEstimate:
    """Simulate ``trials`` independent transmissions; deterministic given ``seed``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    code.validate(spec)
    N, n = spec.node_count, code.n
    w = {i: make_rng(seed, "message", i).integers(0, code.message_sizes[i - 1], size=trials)
         for i in spec.nodes}
    cum = np.cumsum(spec.channel_matrix(), axis=1)
    cum[:, -1] = 1.0
    ys: dict[int, list[np.ndarray]] = {i: [] for i in spec.nodes}
    for k in range(1, n + 1):
        xs = []
        for i in spec.nodes:
            t = np.asarray(code.encoders[(i, k)])
            idx = [w[i]] + [ys[i][l] if t.shape[l + 1] != 1 else np.zeros(trials, dtype=np.int64)
                            for l in range(k - 1)]
            xs.append(t[tuple(idx)])
        xflat = np.ravel_multi_index(xs, spec.input_sizes)
        u = make_rng(seed, "channel", 0, k).random(trials)
        yflat = np.minimum((u[:, None] >= cum[xflat]).sum(axis=1), cum.shape[1] - 1)
        for i, y in zip(spec.nodes, np.unravel_index(yflat, spec.output_sizes)):
            ys[i].append(y)
    err = np.zeros(trials, dtype=bool)
    for i in sorted(spec.sources):
        for j in sorted(spec.destinations):
            est = _decoder_lookup(np.asarray(code.decoders[(i, j)]), ys[j], w[j])
            err |= est != w[i]
    point = float(err.mean())
    half = Z95 * math.sqrt(point * (1.0 - point) / trials)
    return ErrorEstimate(point, half, int(trials), int(seed))


# --------------------------------------------------------------------------
# code construction


def rate_tuple(spec: NetworkSpec, rates) -> tuple[float, ...]:
    """Per-node rates from a full tuple or a single source rate."""
    if np.ndim(rates) == 0:
        rates = [float(rates) if i in spec.sources else 0.0 for i in spec.nodes]
    rates = tuple(float(r) for r in rates)
    if len(rates) != spec.node_count:
        raise InvalidRates(f"expected {spec.node_count} rates, got {len(rates)}")
    for i, r in zip(spec.nodes, rates):
        if r < 0 or not np.isfinite(r):
            raise InvalidRates(f"rate of node {i} must be finite and nonnegative")
        if i not in spec.sources and r != 0:
            raise InvalidRates(f"node {i} is not a source but has rate {r}")
    return rates


def generate_random_code(spec: NetworkSpec, rates, n: int, seed: int, decoder: str = "ml",
                         feedback: bool = False, budget_cells: int = DEFAULT_BUDGET) -> Code:
    """Random encoder tables, i.i.d. uniform over each input alphabet.

    ``decoder="ml"`` decodes by maximum likelihood with ties going to the
    smallest message index; ``decoder="table"`` draws every decoder entry
    uniformly. ``feedback=True`` lets encoders depend on past outputs.
    """
    rates = rate_tuple(spec, rates)
    sizes = tuple(message_size(r, n) for r in rates)
    enc = {}
    for i in spec.nodes:
        for k in range(1, n + 1):
            shape = (sizes[i - 1],) + ((spec.output_sizes[i - 1],) if feedback else (1,)) * (k - 1)
            rng = make_rng(seed, "encoder", i, k)
            enc[(i, k)] = rng.integers(0, spec.input_sizes[i - 1], size=shape)
    code = Code(n, rates, sizes, enc, {})
    if decoder == "table":
        for i in sorted(spec.sources):
            for j in sorted(spec.destinations):
                shape = (sizes[j - 1],) + (spec.output_sizes[j - 1],) * n
                code.decoders[(i, j)] = make_rng(seed, "decoder", i * 64 + j).integers(0, sizes[i - 1], size=shape)
    elif decoder == "ml":
        code.decoders.update(ml_decoders(spec, code, budget_cells=budget_cells))
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    return code


def _first_within(values: np.ndarray, axis: int, tie: float = 1e-9) -> np.ndarray:
    top = values.max(axis=axis, keepdims=True)
    return np.argmax(values >= top - tie, axis=axis)


def ml_decoders(spec: NetworkSpec, code: Code, budget_cells: int = DEFAULT_BUDGET) -> dict:
    """Maximum-likelihood decoder tables for the given encoders.

    Destination ``j`` picks the source-message tuple maximizing the
    likelihood of ``(w_j, y_j^n)``; ties go to the smallest flat index.
    """
    src = sorted(spec.sources)
    wsizes = [code.message_sizes[i - 1] for i in src]
    out = {}
    if code.feedback_blind:
        cw = _codewords(spec, code)
        Wn = cw.shape[0]
        digits = np.array(np.unravel_index(np.arange(Wn), wsizes))
        for j in sorted(spec.destinations):
            qj = marginal_channel_matrix(spec, Cut(i for i in spec.nodes if i != j))
            with np.errstate(divide="ignore"):
                logq = np.where(qj > 0, np.log(np.maximum(qj, 1e-300)), -1e30)
            ny = qj.shape[1]
            wj = code.message_sizes[j - 1]
            tables = {i: np.zeros((wj,) + (ny,) * code.n, dtype=np.int64) for i in src}
            for own in range(wj):
                allowed = np.ones(Wn, dtype=bool)
                if j in src:
                    allowed &= digits[src.index(j)] == own
                best = _ml_argmax(cw, logq, code.n, allowed)
                for pos, i in enumerate(src):
                    tables[i][own] = digits[pos][best].reshape((ny,) * code.n)
            for i in src:
                out[(i, j)] = tables[i]
        return out
    # encoders with feedback: use the exact joint of (W_S, W_j, Y_j^n)
    p = induced_distribution(spec, code, budget_cells=budget_cells, include_estimates=False)
    wnames = [w_name(i) for i in src]
    for j in sorted(spec.destinations):
        ynames = [yk_name(j, k) for k in range(1, code.n + 1)]
        own = [] if j in src else [w_name(j)]
        m = p.marginal(wnames + own + ynames)
        arr = _named.flatten_axes(m.values, m.names, [wnames, own, ynames])
        Wn = arr.shape[0]
        digits = np.array(np.unravel_index(np.arange(Wn), wsizes))
        wj = code.message_sizes[j - 1]
        ny = spec.output_sizes[j - 1]
        tables = {i: np.zeros((wj,) + (ny,) * code.n, dtype=np.int64) for i in src}
        for o in range(wj):
            if j in src:
                sub = np.where((digits[src.index(j)] == o)[:, None], arr[:, 0, :], -1.0)
            else:
                sub = arr[:, o, :]
            best = _first_within(sub, axis=0, tie=1e-15)
            for pos, i in enumerate(src):
                tables[i][o] = digits[pos][best].reshape((ny,) * code.n)
        for i in src:
            out[(i, j)] = tables[i]
    return out


def _ml_argmax(cw: np.ndarray, logq: np.ndarray, n: int, allowed: np.ndarray, block: int = 32) -> np.ndarray:
    """Per output sequence, first allowed codeword index within 1e-9 of the best log-likelihood.

    The sequence is split into two halves so the work is ``|W| * |Y|^n``
    additions without materializing the full likelihood table.
    """
    ny = logq.shape[1]
    na = n // 2
    nb = n - na
    cw = cw[allowed]
    index = np.nonzero(allowed)[0]

    def half_ll(times):
        L = np.zeros((cw.shape[0],) + (ny,) * len(times))
        for pos, k in enumerate(times):
            shape = [cw.shape[0]] + [1] * len(times)
            shape[pos + 1] = ny
            L = L + logq[cw[:, k]].reshape(shape)
        return L.reshape(cw.shape[0], -1)

    La = half_ll(range(na))
    Lb = half_ll(range(na, n))
    out = np.empty(ny ** n, dtype=np.int64)
    nbcells = ny ** nb
    for start in range(0, La.shape[1], block):
        tot = La[:, start:start + block, None] + Lb[:, None, :]
        best = _first_within(tot, axis=0)
        out[start * nbcells:(start + best.shape[0]) * nbcells] = index[best.reshape(-1)]
    return out


def repetition_code(spec: NetworkSpec, bits: int, reps: int, source: int = 1,
                    erasure_symbol: int | None = None, fallback: int = 1) -> Code:
    """Send each of ``bits`` message bits ``reps`` times in a row (most significant bit first).

    The decoder at each destination reads every bit from its non-erased
    copies by majority. If some bit has no majority (in particular, all its
    copies erased) the decoder outputs message ``fallback``.
    Output symbol ``erasure_symbol`` (default: the source input alphabet
    size) marks an erasure; other output symbols are read as bit values.
    """
    if spec.input_sizes[source - 1] < 2:
        raise AlphabetMismatch("source needs a binary input")
    n = bits * reps
    size = 2 ** bits
    rates = tuple(bits / n if i == source else 0.0 for i in spec.nodes)
    sizes = tuple(message_size(r, n) for r in rates)
    if sizes[source - 1] != size:
        raise ShapeMismatch("message count does not match 2^bits")
    erase = spec.input_sizes[source - 1] if erasure_symbol is None else erasure_symbol
    enc = {}
    w = np.arange(size)
    for i in spec.nodes:
        for k in range(1, n + 1):
            shape = (sizes[i - 1],) + (1,) * (k - 1)
            if i == source:
                m = (k - 1) // reps
                enc[(i, k)] = ((w >> (bits - 1 - m)) & 1).reshape(shape)
            else:
                enc[(i, k)] = np.zeros(shape, dtype=np.int64)
    dec = {}
    for j in sorted(spec.destinations):
        ny = spec.output_sizes[j - 1]
        ys = np.indices((ny,) * n).reshape(n, -1)
        msg = np.zeros(ys.shape[1], dtype=np.int64)
        tie = np.zeros(ys.shape[1], dtype=bool)
        for m in range(bits):
            block = ys[m * reps:(m + 1) * reps]
            ones = ((block != erase) & (block == 1)).sum(axis=0)
            zeros = ((block != erase) & (block == 0)).sum(axis=0)
            tie |= ones == zeros
            msg = msg * 2 + (ones > zeros)
        msg[tie] = fallback
        dec[(source, j)] = msg.reshape((sizes[j - 1],) + (ny,) * n)
    return Code(n, rates, sizes, enc, dec)


# --------------------------------------------------------------------------
# phase transition


@dataclass
class PhaseCell:
    rate_bits: float
    n: int
    method: str
    error: float | None
    ci_half_width: float
    seed: int | None
    cell_runtime_ms: float
    counting_bound: float
    errors_by_seed: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "rate_bits": self.rate_bits,
            "n": self.n,
            "method": self.method,
            "error": self.error,
            "ci_half_width": self.ci_half_width,
            "seed": self.seed,
            "cell_runtime_ms": self.cell_runtime_ms,
        }


CSV_COLUMNS = ["rate_bits", "n", "method", "error", "ci_half_width", "seed", "cell_runtime_ms"]


def counting_bound(spec: NetworkSpec, code_sizes: Sequence[int], n: int) -> float:
    """Error lower bound from counting distinguishable codewords and observations."""
    W = int(np.prod([code_sizes[i - 1] for i in sorted(spec.sources)], dtype=np.int64))
    ny = min(spec.output_sizes[j - 1] for j in spec.destinations)
    distinct = min(float(spec.n_inputs) ** n, float(ny) ** n)
    return max(0.0, 1.0 - distinct / W)


def phase_transition_experiment(spec: NetworkSpec, rate_grid: Iterable[float], n_grid: Iterable[int],
                                seeds: Iterable[int], trials: int = 10_000,
                                budget_cells: int = DEFAULT_BUDGET, decoder: str = "ml",
                                timing: bool = True) -> list[PhaseCell]:
    """Best error over seeded random codes for each ``(rate, n)`` cell.

    A cell is evaluated exactly when the enumeration fits ``budget_cells`` and
    by Monte Carlo otherwise; cells where neither fits are marked skipped.
    """
    seeds = list(seeds)
    cells = []
    for rate in rate_grid:
        for n in n_grid:
            t0 = time.perf_counter()
            rates = rate_tuple(spec, rate)
            sizes = tuple(message_size(r, n) for r in rates)
            bound = counting_bound(spec, sizes, n)
            results = {}
            method = "exact"
            half = 0.0
            try:
                for s in seeds:
                    code = generate_random_code(spec, rates, n, s, decoder, budget_cells=max(budget_cells, 1))
                    try:
                        results[s] = (exact_error_probability(spec, code, budget_cells), 0.0)
                    except BudgetExhausted:
                        method = "mc"
                        est = monte_carlo_error(spec, code, trials, s)
                        results[s] = (est.point, est.half_width)
            except BudgetExhausted:
                ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
                cells.append(PhaseCell(float(rate), int(n), "skipped", None, 0.0, None, ms, bound))
                continue
            best_seed = min(results, key=lambda s: (results[s][0], s))
            err, half = results[best_seed]
            ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
            cells.append(PhaseCell(float(rate), int(n), method, float(err), float(half), int(best_seed),
                                   ms, bound, {s: v[0] for s, v in results.items()}))
    return cells


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def cells_to_csv(cells: Sequence[PhaseCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in cells:
        r = c.row()
        w.writerow([_fmt(r[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


# --------------------------------------------------------------------------
# serialization


def code_to_json(code: Code) -> dict:
    return {
        "n": code.n,
        "rates": list(code.rates),
        "message_sizes": list(code.message_sizes),
        "encoders": [{"node": i, "time": k, "shape": list(np.shape(t)),
                      "table": np.asarray(t).reshape(-1).tolist()}
                     for (i, k), t in sorted(code.encoders.items())],
        "decoders": [{"source": i, "destination": j, "shape": list(np.shape(t)),
                      "table": np.asarray(t).reshape(-1).tolist()}
                     for (i, j), t in sorted(code.decoders.items())],
    }


def code_from_json(obj: dict) -> Code:
    enc = {(int(e["node"]), int(e["time"])): np.array(e["table"], dtype=np.int64).reshape(e["shape"])
           for e in obj["encoders"]}
    dec = {(int(d["source"]), int(d["destination"])): np.array(d["table"], dtype=np.int64).reshape(d["shape"])
           for d in obj["decoders"]}
    return Code(int(obj["n"]), tuple(float(r) for r in obj["rates"]),
                tuple(int(m) for m in obj["message_sizes"]), enc, dec)
