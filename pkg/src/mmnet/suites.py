"""Seeded randomized verification suites shared by the test-suite and the ``verify`` command.

Every suite returns a :class:`SuiteResult`; ``worst`` is the smallest slack
seen (negative beyond the tolerance means a failure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import codes, converse, regions
from .network import (
    NetworkSpec,
    build_feedback_version,
    product_input,
    region_cuts,
    uniform_product_input,
)
from .prob import make_joint, markov_residual, renyi_divergence

RENYI_ORDERS = (1.0, 1.1, 2.0, 4.0)
PROP3_ORDERS = (1.01, 1.1, 1.25)


@dataclass
class SuiteResult:
    name: str
    count: int = 0
    failures: int = 0
    worst: float = math.inf
    details: list = field(default_factory=list)

    def record(self, slack: float, tol: float, what: str = "") -> None:
        self.count += 1
        if math.isnan(slack):
            slack = -math.inf
        self.worst = min(self.worst, slack)
        if slack < -tol:
            self.failures += 1
            if len(self.details) < 20:
                self.details.append({"check": what, "slack": slack})

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_json(self) -> dict:
        return {"name": self.name, "count": self.count, "failures": self.failures,
                "worst_slack": self.worst if self.count else None, "details": self.details}


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag,)))


def _dirichlet(rng, size, zeros=False):
    v = rng.dirichlet(np.ones(size))
    if zeros and size > 1 and rng.random() < 0.3:
        v[rng.integers(size)] = 0.0
        v = v / v.sum()
    return v


def renyi_suite(count: int = 1000, seed: int = 0, tol: float = 1e-12) -> SuiteResult:
    """Data processing, nonnegativity, monotonicity in the order and continuity at order 1."""
    res = SuiteResult("renyi")
    rng = _rng(seed, 1)
    for _ in range(count):
        nx, ny = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        p = make_joint([("X", nx)], _dirichlet(rng, nx, zeros=True))
        q = make_joint([("X", nx)], _dirichlet(rng, nx))
        g = rng.dirichlet(np.ones(ny), size=nx)
        pg = make_joint([("Y", ny)], p.values @ g)
        qg = make_joint([("Y", ny)], q.values @ g)
        vals = []
        for lam in RENYI_ORDERS:
            d = renyi_divergence(p, q, lam)
            vals.append(d)
            res.record(d, tol, f"nonnegativity lam={lam}")
            res.record(d - renyi_divergence(pg, qg, lam), tol, f"data processing lam={lam}")
        for a, b in zip(vals, vals[1:]):
            res.record(b - a, tol, "monotone in order")
        d1 = vals[0]
        prev = vals[1]
        for k in (4, 8, 16, 24, 30):
            dk = renyi_divergence(p, q, 1.0 + 2.0 ** -k)
            res.record(dk - d1, tol, "above order-1 value")
            res.record(prev - dk, tol, "decreasing toward order 1")
            prev = dk
        res.record(1e-6 - abs(prev - d1), tol, "continuity at order 1")
    return res


def prop2_suite(count: int = 1000, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    res = SuiteResult("prop2")
    rng = _rng(seed, 2)
    for _ in range(count):
        w = int(rng.integers(2, 9))
        rows = np.array([_dirichlet(rng, w, zeros=True) for _ in range(w)])
        if rng.random() < 0.3:
            rows = 0.5 * rows + 0.5 * np.eye(w)
        p = make_joint([("U", w), ("V", w)], rows / w)
        q = make_joint([("V", w)], _dirichlet(rng, w))
        lam = float(rng.choice([1.01, 1.1, 1.5, 2.0, 3.0, 5.0]))
        try:
            r = converse.prop2_bound(p, q, lam, ["U"])
        except converse.AlphaOne:
            continue
        res.record(r.lhs - r.rhs, tol, f"lower bound |W|={w} lam={lam}")
    p = make_joint([("U", 2), ("V", 2)], np.eye(2) / 2)
    q = make_joint([("V", 2)], np.full(2, 0.5))
    r = converse.prop2_bound(p, q, 2.0, ["U"])
    res.record(tol - abs(r.lhs - r.rhs), 0.0, "equality case")
    return res


def prop3_suite(count: int = 500, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    res = SuiteResult("prop3")
    rng = _rng(seed, 3)
    for _ in range(count):
        sx, sy, sz = (int(v) for v in rng.integers(1, 4, size=3))
        p = make_joint([("X", sx), ("Y", sy), ("Z", sz)],
                       _dirichlet(rng, sx * sy * sz, zeros=True).reshape(sx, sy, sz))
        for lam in PROP3_ORDERS:
            r = converse.prop3_gap(p, lam, ["X"], ["Y"], ["Z"])
            res.record(r.bound - r.d_lambda, tol, f"gap lam={lam}")
    return res


def prop4_suite(count: int = 200, seed: int = 0, tol: float = 1e-12) -> SuiteResult:
    """Factorized laws are Markov and keep their conditional kernel."""
    res = SuiteResult("prop4")
    rng = _rng(seed, 4)
    for _ in range(count):
        sx, sy, sz = (int(v) for v in rng.integers(1, 4, size=3))
        r = _dirichlet(rng, sx * sy, zeros=True).reshape(sx, sy)
        k = rng.dirichlet(np.ones(sz), size=sy)
        p = make_joint([("X", sx), ("Y", sy), ("Z", sz)], r[:, :, None] * k[None, :, :])
        res.record(-markov_residual(p, ["X"], ["Y"], ["Z"]), tol, "factorized law is Markov")
        py = p.marginal(["Y", "Z"]).values
        my = py.sum(axis=1)
        live = my > 0
        gap = np.abs(py[live] / my[live, None] - k[live]).max() if live.any() else 0.0
        res.record(-gap, tol, "conditional equals the kernel")
    return res


def lemma1_and_certificates(spec: NetworkSpec, n_values=(1, 2), lams=(1.0, 1.1, 2.0), seeds=range(2),
                            rate: float = 0.5, feedback: bool = True,
                            budget_cells: int = codes.DEFAULT_BUDGET) -> tuple[SuiteResult, SuiteResult]:
    """Simulating-law properties and certificate chains over seeded random codes."""
    lem = SuiteResult("lemma1")
    cert = SuiteResult("certificate")
    for n in n_values:
        for seed in seeds:
            code = codes.generate_random_code(spec, rate, n, seed, feedback=feedback, budget_cells=budget_cells)
            p = codes.induced_distribution(spec, code, budget_cells=budget_cells)
            for cut in region_cuts(spec):
                for lam in lams:
                    ts = converse.build_tilted_sequence(p, cut, lam, n, spec=spec, budget_cells=budget_cells)
                    sim = converse.build_simulating_distribution(spec, code, cut, lam, p=p, tilted=ts,
                                                                 budget_cells=budget_cells)
                    rep = converse.verify_lemma1(p, sim.law, cut, lam, spec, code, tilted=ts)
                    tag = f"n={n} seed={seed} cut={cut.bitmask} lam={lam}"
                    for key, v in rep.deviations.items():
                        lem.record(-v, converse.CHECK_TOL, f"property {key} {tag}")
                    lem.record(-ts.substitution_delta, 1e-12, f"null-history substitution {tag}")
                    lem.record(-ts.route_delta, converse.CHECK_TOL, f"direct vs log-domain tilt {tag}")
                    if rep.letter_match is not None:
                        lem.record(-rep.letter_match, 1e-12, f"order-1 letters match {tag}")
                    if lam > 1.0:
                        for d in sorted(set(cut.complement(spec.node_count)) & spec.destinations):
                            c = converse.single_letter_certificate(spec, code, cut, d, lam,
                                                                   budget_cells=budget_cells)
                            for step, v in c.slacks.items():
                                cert.record(v, converse.CHECK_TOL, f"{step} {tag} d={d}")
    return lem, cert


def random_network(rng: np.random.Generator, max_nodes: int = 3) -> NetworkSpec:
    N = int(rng.integers(2, max_nodes + 1))
    ins = tuple(int(v) for v in rng.integers(1, 3, size=N))
    outs = tuple(int(v) for v in rng.integers(1, 3, size=N))
    ch = rng.dirichlet(np.ones(int(np.prod(outs))), size=int(np.prod(ins))).reshape(ins + outs)
    nodes = np.arange(1, N + 1)
    dest = int(rng.choice(nodes))
    others = [int(i) for i in nodes if i != dest]
    k = int(rng.integers(1, len(others) + 1))
    sources = sorted(int(v) for v in rng.choice(others, size=k, replace=False))
    return NetworkSpec(N, sources, [dest], ins, outs, ch, name="random")


_ORDER = {"non-member": 0, "boundary": 1, "member": 2}


def region_order_suite(count: int = 50, seed: int = 0) -> SuiteResult:
    """Membership in the inner region implies the product outer region, which implies the outer region."""
    res = SuiteResult("region_order")
    rng = _rng(seed, 7)
    for t in range(count):
        spec = random_network(rng)
        parts = [rng.dirichlet(np.ones(s)) for s in spec.input_sizes]
        p = product_input(spec, parts)
        # half the draws are scaled into the inner region so both implications get exercised
        rates = [float(rng.uniform(0, 0.6)) if i in spec.sources else 0.0 for i in spec.nodes]
        if t % 2 == 0:
            rep = regions.membership_report(spec, rates, "R_in", p=p)
            worst = min((r.bound / r.rate_sum for r in rep.records if r.rate_sum > 0), default=1.0)
            rates = [r * max(0.0, worst) * 0.9 for r in rates]
        v_in = regions.membership_report(spec, rates, "R_in", p=p).verdict
        v_star = regions.membership_report(spec, rates, "R_out*", p=p).verdict
        v_out = regions.membership_report(spec, rates, "R_out").verdict
        tag = f"network {t} rates {rates}"
        if v_in == "member":
            res.record(float(_ORDER[v_star] - 1), 0.0, f"R_in member but R_out* {v_star}: {tag}")
        if v_star == "member":
            res.record(float(_ORDER[v_out] - 1), 0.0, f"R_out* member but R_out {v_out}: {tag}")
    return res


def lemma2_suite(spec: NetworkSpec, count: int = 200, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """Cut mutual information under any input law stays below the crossing link capacities."""
    res = SuiteResult("lemma2")
    rng = _rng(seed, 8)
    caps = regions.link_capacities(spec.links)
    bounds = {b.cut: b.value for b in regions.rprime_bounds(caps, spec)}
    for _ in range(count):
        flat = rng.dirichlet(np.full(spec.n_inputs, 0.5 if rng.random() < 0.5 else 1.0))
        for cut, bound in bounds.items():
            if not cut.T:
                continue
            res.record(bound - regions.cut_value_fast(spec, cut, flat), tol, f"cut {cut.bitmask}")
    return res


def feedback_suite(spec: NetworkSpec, count: int = 200, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """Cut values of the feedback version equal the originals whenever the destination is outside the cut."""
    res = SuiteResult("feedback_version")
    rng = _rng(seed, 9)
    fb = build_feedback_version(spec)
    (d,) = spec.destinations
    cuts = [c for c in region_cuts(spec) if d not in c.T and c.T]
    for k in range(count):
        flat = uniform_product_input(spec).values.reshape(-1) if k == 0 else rng.dirichlet(np.ones(spec.n_inputs))
        for cut in cuts:
            a = regions.cut_value_fast(spec, cut, flat)
            b = regions.cut_value_fast(fb, cut, flat)
            res.record(tol - abs(a - b), 0.0, f"cut {cut.bitmask}")
    return res


def run_all(spec: NetworkSpec, trials: int = 200, seed: int = 0, lams=(1.1, 2.0), n: int = 1,
            rate: float | None = None, budget_cells: int = codes.DEFAULT_BUDGET) -> list[SuiteResult]:
    """The suites run by ``verify``: proposition sweeps plus simulating-law audits on ``spec``."""
    out = [renyi_suite(trials, seed), prop2_suite(trials, seed), prop3_suite(trials, seed), prop4_suite(trials, seed)]
    r = 0.5 if rate is None else rate
    lem, cert = lemma1_and_certificates(spec, n_values=tuple(range(1, n + 1)),
                                        lams=tuple(sorted(set((1.0,) + tuple(lams)))),
                                        seeds=range(seed, seed + 2), rate=r, budget_cells=budget_cells)
    out += [lem, cert]
    if spec.links is not None:
        out.append(lemma2_suite(spec, trials, seed))
    if len(spec.destinations) == 1 and spec.feedback_of is None:
        out.append(feedback_suite(spec, min(trials, 50), seed))
    return out
