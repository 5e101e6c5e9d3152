"""``mmnet`` command line: capacity, region, verify, tilt and simulate.

Exit status: 0 when every requested check passes, 1 on failed checks,
2 on unreadable input or bad parameters, 3 when a cell budget is exhausted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import codes, converse, io, regions, suites
from .errors import BudgetExhausted, CheckFailed, InvalidCut, MmnetError, ParseError
from .network import Cut, NetworkSpec, region_cuts, uniform_product_input

log = logging.getLogger("mmnet")

COMMANDS = ("capacity", "region", "verify", "tilt", "simulate")
BUDGET_ENV = "MMNET_BUDGET_CELLS"
DEFAULT_SEEDS = tuple(range(10))
DEFAULT_TRIALS = 1000

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    network: NetworkSpec
    network_label: str
    lambdas: tuple = ()
    rates: tuple = ()
    cuts: tuple = ()
    n: tuple = ()
    trials: int | None = None
    seed: int = 0
    seeds: tuple = DEFAULT_SEEDS
    out: Path | None = None
    fmt: str = "json"
    budget_cells: int = codes.DEFAULT_BUDGET
    region: str = "R_out"
    timing: bool = True


def _csv(kind):
    def parse(text: str):
        try:
            return tuple(kind(v) for v in text.split(",") if v.strip() != "")
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values, got {text!r}")
    return parse


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmnet", description=__doc__.splitlines()[0])
    ap.add_argument("command_pos", nargs="?", choices=COMMANDS, metavar="COMMAND",
                    help=f"one of {', '.join(COMMANDS)}")
    ap.add_argument("--command", choices=COMMANDS, help="same as the positional COMMAND")
    ap.add_argument("--network", required=True, help="network JSON file or bundled fixture name "
                                                     f"({', '.join(io.FIXTURES)})")
    ap.add_argument("--lambda", dest="lambdas", type=_csv(float), default=(), help="orders, comma separated")
    ap.add_argument("--rates", type=_csv(float), default=(),
                    help="region: one rate per node; tilt: code rates; simulate: rate grid")
    ap.add_argument("--cuts", type=_csv(int), default=(), help="cut bitmasks (bit i-1 set for node i)")
    ap.add_argument("--n", type=_csv(int), default=(), help="blocklength(s)")
    ap.add_argument("--trials", type=_positive_int, default=None, help="draws per suite or Monte-Carlo trials")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seeds", type=_csv(int), default=DEFAULT_SEEDS, help="code seeds for simulate")
    ap.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    ap.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    ap.add_argument("--budget-cells", type=_positive_int, default=None,
                    help=f"largest joint table to build (default: ${BUDGET_ENV} or {codes.DEFAULT_BUDGET})")
    ap.add_argument("--region", choices=regions.REGIONS, default="R_out")
    ap.add_argument("--no-timing", action="store_true", help="write 0 in runtime columns")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return ap


def _default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return codes.DEFAULT_BUDGET
    try:
        v = int(raw)
    except ValueError:
        raise ParseError(f"${BUDGET_ENV}: expected an integer, got {raw!r}") from None
    if v < 1:
        raise ParseError(f"${BUDGET_ENV}: expected a positive integer, got {v}")
    return v


def _load(label: str) -> NetworkSpec:
    if label in io.FIXTURES and not Path(label).exists():
        return io.load_fixture(label)
    return io.load_network(label)


def make_config(args: argparse.Namespace) -> RunConfig:
    command = args.command or args.command_pos
    if command is None:
        raise ParseError("no command given; choose one of " + ", ".join(COMMANDS))
    if args.command and args.command_pos and args.command != args.command_pos:
        raise ParseError(f"conflicting commands {args.command_pos!r} and {args.command!r}")
    spec = _load(args.network)
    for mask in args.cuts:
        if not 0 <= mask < 2 ** spec.node_count:
            raise InvalidCut(f"cut bitmask {mask} outside 0..{2 ** spec.node_count - 1}")
    if any(v < 1 for v in args.n):
        raise ParseError("--n values must be positive")
    fmt = args.fmt or ("csv" if command == "simulate" else "json")
    if fmt == "csv" and command != "simulate":
        raise ParseError(f"--format csv is only available for simulate, not {command}")
    budget = args.budget_cells if args.budget_cells is not None else _default_budget()
    return RunConfig(command, spec, args.network, args.lambdas, args.rates, args.cuts, args.n, args.trials,
                     args.seed, args.seeds, args.out, fmt, budget, args.region, not args.no_timing)


def _cuts(cfg: RunConfig, default) -> list[Cut]:
    if cfg.cuts:
        return [Cut.from_bitmask(m, cfg.network.node_count) for m in cfg.cuts]
    return list(default)


def _source_rates(cfg: RunConfig, default: float) -> tuple:
    spec = cfg.network
    if not cfg.rates:
        return tuple(default if i in spec.sources else 0.0 for i in spec.nodes)
    if len(cfg.rates) == spec.node_count:
        return cfg.rates
    if len(cfg.rates) == 1:
        return tuple(cfg.rates[0] if i in spec.sources else 0.0 for i in spec.nodes)
    raise ParseError(f"--rates needs 1 or {spec.node_count} values, got {len(cfg.rates)}")


# --------------------------------------------------------------------------
# commands


def cmd_capacity(cfg: RunConfig) -> dict:
    spec = cfg.network
    out = {"command": "capacity", "network": spec.name or cfg.network_label}
    cuts = _cuts(cfg, regions.enumerate_cuts(spec))
    if spec.links is not None:
        caps = regions.link_capacities(spec.links)
        out["links"] = [{"from": i, "to": j, "capacity_bits": c, "input": caps.inputs[(i, j)]}
                        for (i, j), c in sorted(caps.capacities.items())]
        out["r_prime"] = [{"cut_bitmask": b.cut.bitmask, "bound_bits": b.value}
                          for b in regions.rprime_bounds(caps, spec, cuts)]
    out["cut_maxima"] = []
    for cut in cuts:
        b = regions.max_cut_value(spec, cut, regions.ALL_INPUTS, budget=cfg.budget_cells)
        out["cut_maxima"].append({"cut_bitmask": cut.bitmask, "bound_bits": b.value,
                                  "oracle_bits": b.oracle_value})
    return out


def cmd_region(cfg: RunConfig) -> dict:
    spec = cfg.network
    if not cfg.rates:
        raise ParseError("region needs --rates (one value per node)")
    p = uniform_product_input(spec) if cfg.region in ("R_in", "R_cutset", "R_out*") else None
    rep = regions.membership_report(spec, cfg.rates, cfg.region, budget=cfg.budget_cells, p=p)
    return {"command": "region", "network": spec.name or cfg.network_label, **rep.to_json()}


def cmd_verify(cfg: RunConfig) -> dict:
    spec = cfg.network
    lams = tuple(v for v in cfg.lambdas if v > 1.0) or (1.1, 2.0)
    results = suites.run_all(spec, trials=cfg.trials or DEFAULT_TRIALS, seed=cfg.seed, lams=lams,
                             n=max(cfg.n) if cfg.n else 1, budget_cells=cfg.budget_cells)
    failures = sum(r.failures for r in results)
    return {"command": "verify", "network": spec.name or cfg.network_label,
            "suites": [r.to_json() for r in results], "checks": sum(r.count for r in results),
            "failures": failures, "passed": failures == 0}


def cmd_tilt(cfg: RunConfig) -> dict:
    spec = cfg.network
    n = cfg.n[0] if cfg.n else 1
    lam = cfg.lambdas[0] if cfg.lambdas else converse.lambda_schedule(n)
    cuts = _cuts(cfg, [c for c in region_cuts(spec) if c.T & spec.sources])
    if not cuts:
        raise InvalidCut("network has no cut separating a source from a destination")
    cut = cuts[0]
    rates = _source_rates(cfg, 0.5)
    code = codes.generate_random_code(spec, rates, n, cfg.seed, budget_cells=cfg.budget_cells)
    p = codes.induced_distribution(spec, code, budget_cells=cfg.budget_cells, include_estimates=False)
    ts = converse.build_tilted_sequence(p, cut, lam, n, spec=spec, budget_cells=cfg.budget_cells)
    return {"command": "tilt", "network": spec.name or cfg.network_label, "seed": cfg.seed,
            "rates": list(rates), **ts.to_json()}


def cmd_simulate(cfg: RunConfig):
    spec = cfg.network
    rate_grid = cfg.rates or (0.25, 0.75)
    n_grid = cfg.n or (4, 8, 12)
    cells = codes.phase_transition_experiment(spec, rate_grid, n_grid, cfg.seeds,
                                              trials=cfg.trials or 10_000, budget_cells=cfg.budget_cells,
                                              timing=cfg.timing)
    for c in cells:
        log.info("rate %.4g n %d: %s error %s", c.rate_bits, c.n, c.method, c.error)
    if cfg.fmt == "csv":
        return codes.cells_to_csv(cells)
    return {"command": "simulate", "network": spec.name or cfg.network_label,
            "cells": [dict(zip(codes.CSV_COLUMNS, c.row())) for c in cells]}


HANDLERS = {"capacity": cmd_capacity, "region": cmd_region, "verify": cmd_verify,
            "tilt": cmd_tilt, "simulate": cmd_simulate}


def _emit(cfg: RunConfig, result) -> None:
    text = result if isinstance(result, str) else io.dumps(result)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(text)


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    result = HANDLERS[cfg.command](cfg)
    _emit(cfg, result)
    log.info("%s finished in %.3f s", cfg.command, time.perf_counter() - start)
    if isinstance(result, dict) and result.get("passed") is False:
        failed = [f"{s['name']}: {d['check']} (slack {d['slack']:.3g})"
                  for s in result["suites"] for d in s["details"]]
        raise CheckFailed(f"{result['failures']} check(s) failed", failed)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="mmnet: %(message)s")
    try:
        return run(make_config(args))
    except CheckFailed as e:
        print(f"mmnet: {e}", file=sys.stderr)
        for f in e.failures:
            print(f"  {f}", file=sys.stderr)
        return EXIT_CHECK
    except BudgetExhausted as e:
        print(f"mmnet: budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ParseError as e:
        print(f"mmnet: parse error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except MmnetError as e:
        print(f"mmnet: invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
