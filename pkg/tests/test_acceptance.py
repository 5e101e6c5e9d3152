"""Acceptance criteria, each at its stated tolerance and runtime limit.

Every check prints one ``PASS``/``FAIL`` line. Run directly with
``python tests/test_acceptance.py`` for the summary alone.
"""

import math
import time

import numpy as np
import pytest

from mmnet import codes, converse, io, regions, suites
from mmnet.prob import make_joint
from mmnet.network import check_determinism, check_product_dominance, uniform_product_input

PHASE_SEEDS = tuple(range(10))   # frozen seed set
PHASE_RATES = (0.25, 0.75)
PHASE_NS = (4, 8, 12)


def _line(label, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail} ({elapsed:.2f}s, limit {limit:g}s)", flush=True)
    return ok


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def hb(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# --------------------------------------------------------------------------
# criteria


def crit1():
    r, dt = _timed(lambda: suites.renyi_suite(1000, seed=0))
    return _line("1 Renyi suite", r.count > 0 and r.failures == 0 and r.worst >= -1e-12,
                 f"{r.count} checks, worst slack {r.worst:.3g}", dt, 10)


def crit2():
    def go():
        res = suites.prop2_suite(1000, seed=0)
        eq = converse.prop2_bound(make_joint([("U", 2), ("V", 2)], np.eye(2) / 2),
                                  make_joint([("V", 2)], [0.5, 0.5]), 2.0, ["U"])
        return res, eq
    (res, eq), dt = _timed(go)
    gap = abs(eq.lhs - eq.rhs)
    return _line("2 Fano-type bound", res.failures == 0 and res.worst >= -1e-9 and gap <= 1e-9 and eq.alpha == 0,
                 f"{res.count} draws, worst slack {res.worst:.3g}, equality gap {gap:.3g}", dt, 10)


def crit3():
    r, dt = _timed(lambda: suites.prop3_suite(500, seed=0))
    return _line("3 KL gap bound", r.count == 1500 and r.failures == 0,
                 f"{r.count} checks, worst slack {r.worst:.3g}", dt, 30)


def _lemma_cert(names=("bsc", "erasure_relay")):
    lem_all, cert_all = suites.SuiteResult("lemma1"), suites.SuiteResult("certificate")
    for name in names:
        spec = io.load_fixture(name)
        lem, cert = suites.lemma1_and_certificates(spec, n_values=(1, 2), lams=(1.0, 1.1, 2.0), seeds=range(3))
        for dst, src in ((lem_all, lem), (cert_all, cert)):
            dst.count += src.count
            dst.failures += src.failures
            dst.worst = min(dst.worst, src.worst)
            dst.details += src.details
    return lem_all, cert_all


def crit4():
    (lem, _), dt = _timed(_lemma_cert)
    return _line("4 simulating-law properties", lem.count > 0 and lem.failures == 0,
                 f"{lem.count} checks, worst slack {lem.worst:.3g}", dt, 120)


def crit5():
    (_, cert), dt = _timed(_lemma_cert)
    gate = converse.lambda_schedule(16)
    ok = cert.count > 0 and cert.failures == 0 and cert.worst >= -1e-9 and gate == 1.25
    return _line("5 certificate chain", ok,
                 f"{cert.count} slacks, worst {cert.worst:.3g}, lambda_16 = {gate!r}", dt, 120)


def crit6():
    def go():
        C, _ = regions.dmc_capacity([[0.9, 0.1], [0.1, 0.9]])
        line = io.load_fixture("line")
        caps = regions.link_capacities(line.links)
        rp = {b.cut.bitmask: b.value for b in regions.rprime_bounds(caps, line)}
        verdicts = {r: regions.membership_report(line, [r, 0, 0], "R_out").verdict for r in (0.52, 0.54)}
        pv = {r: regions.membership_report(line, [r, 0, 0], "R_prime").verdict for r in (0.52, 0.54)}
        return C, rp, verdicts, pv
    (C, rp, verdicts, pv), dt = _timed(go)
    oracle = 1 - hb(0.1)
    ok = (abs(C - oracle) <= 1e-4 and abs(C - 0.531004) <= 1e-4 and abs(rp[1] - C) <= 1e-4
          and abs(rp[3] - C) <= 1e-4 and verdicts == {0.52: "member", 0.54: "non-member"} and pv == verdicts)
    return _line("6 capacities and regions", ok,
                 f"C = {C:.9f}, oracle {oracle:.9f}, R' cut {rp[1]:.9f}, verdicts {verdicts}", dt, 30)


def crit7():
    def go():
        order = suites.region_order_suite(50, seed=0)
        er = io.load_fixture("erasure_relay")
        det = all(check_determinism(er).values())
        p = uniform_product_input(er)
        dom = check_product_dominance(er, p)
        rin = regions.membership_report(er, [0.3, 0, 0], "R_in", p=p)
        star = regions.membership_report(er, [0.3, 0, 0], "R_out*", p=p)
        gap = max(abs(a.bound - b.bound) for a, b in zip(rin.records, star.records))
        return order, det, dom, gap
    (order, det, dom, gap), dt = _timed(go)
    ok = order.failures == 0 and det and dom.dominated and gap <= 1e-3
    return _line("7 region orderings", ok,
                 f"{order.count} implications checked, {order.failures} violated; deterministic={det}, "
                 f"dominated={dom.dominated}, R_in vs R_out* max gap {gap:.3g}", dt, 300)


def crit8():
    def go():
        line = io.load_fixture("line")
        return suites.lemma2_suite(line, 200, seed=0), suites.feedback_suite(line, 200, seed=0)
    (l2, fb), dt = _timed(go)
    ok = l2.count > 0 and l2.failures == 0 and fb.count > 0 and fb.failures == 0
    return _line("8 link-capacity cut bound and feedback version", ok,
                 f"{l2.count} cut checks worst slack {l2.worst:.3g}; {fb.count} feedback checks", dt, 60)


_PHASE = {}


def _phase():
    if not _PHASE:
        bec = io.load_fixture("bec")
        t0 = time.perf_counter()
        cells = codes.phase_transition_experiment(bec, PHASE_RATES, PHASE_NS, PHASE_SEEDS, timing=False)
        _PHASE["cells"] = {(c.rate_bits, c.n): c for c in cells}
        _PHASE["elapsed"] = time.perf_counter() - t0
    return _PHASE["cells"], _PHASE["elapsed"]


def _monotone(rate, direction):
    cells, dt = _phase()
    errs = [cells[(rate, n)].error for n in PHASE_NS]
    methods = {cells[(rate, n)].method for n in PHASE_NS}
    pairs = list(zip(errs, errs[1:]))
    ok = methods == {"exact"} and all((b < a) if direction < 0 else (b > a) for a, b in pairs)
    word = "decreasing" if direction < 0 else "increasing"
    detail = f"rate {rate}: best errors {[f'{e:.6g}' for e in errs]} at n={list(PHASE_NS)}, want strictly {word}"
    return ok, detail, dt


def crit9a():
    ok, detail, dt = _monotone(0.25, -1)
    return _line("9a phase transition below capacity", ok, detail, dt, 300)


def crit9b():
    ok, detail, dt = _monotone(0.75, +1)
    return _line("9b phase transition above capacity", ok, detail, dt, 300)


def crit9c():
    def go():
        bec = io.load_fixture("bec")
        return codes.exact_error_probability(bec, codes.repetition_code(bec, bits=3, reps=4))
    err, dt = _timed(go)
    target = 1 - (1 - 2 ** -4) ** 3
    return _line("9c repetition code", abs(err - target) <= 1e-9,
                 f"exact error {err:.12g}, target {target:.12g}, diff {err - target:.3g}", dt, 300)


CRITERIA = [crit1, crit2, crit3, crit4, crit5, crit6, crit7, crit8, crit9a, crit9b, crit9c]


@pytest.mark.parametrize("crit", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_acceptance(crit, capsys):
    with capsys.disabled():
        print()
        ok = crit()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
