"""Network files, bundled fixtures and deterministic JSON/CSV output."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import MmnetError, ParseError
from .network import (
    NetworkSpec,
    build_erasure_network,
    build_feedback_version,
    build_independent_dmc_network,
    require_valid,
)

SIG_DIGITS = 12
FIXTURES = ("bsc", "bec", "line", "erasure_relay", "line_feedback")


def _schema() -> dict:
    text = resources.files("mmnet").joinpath("schemas/network.schema.json").read_text()
    return json.loads(text)


def fixture_path(name: str) -> Path:
    """Path of a bundled network file, e.g. ``fixture_path("bsc")``."""
    p = resources.files("mmnet").joinpath(f"fixtures/{name}.json")
    if not p.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}; available: {', '.join(FIXTURES)}")
    return Path(str(p))


def load_fixture(name: str) -> NetworkSpec:
    return load_network(fixture_path(name))


def _field(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _probs(v):
    """Decimal strings and numbers to floats, keeping list nesting."""
    if isinstance(v, list):
        return [_probs(x) for x in v]
    return float(v)


def parse_network(obj: dict, source: str = "<network>") -> NetworkSpec:
    """Build a :class:`NetworkSpec` from a decoded network document."""
    try:
        jsonschema.validate(obj, _schema())
    except jsonschema.ValidationError as e:
        raise ParseError(f"{source}: field {_field(e.absolute_path)}: {e.message}") from None
    N = obj["nodes"]
    for key in ("sources", "destinations"):
        bad = [v for v in obj[key] if v > N]
        if bad:
            raise ParseError(f"{source}: field {key}: nodes {bad} exceed node count {N}")
    ch = obj["channel"]
    name = obj.get("name", "")
    try:
        if ch["form"] == "dense":
            ins, outs = tuple(ch["input_sizes"]), tuple(ch["output_sizes"])
            if len(ins) != N or len(outs) != N:
                raise ParseError(f"{source}: field channel: alphabet lists must have {N} entries")
            mat = np.asarray(_probs(ch["matrix"]), dtype=float)
            want = (int(np.prod(ins)), int(np.prod(outs)))
            if mat.shape != want:
                raise ParseError(f"{source}: field channel.matrix: shape {mat.shape}, expected {want}")
            spec = NetworkSpec(N, obj["sources"], obj["destinations"], ins, outs, mat.reshape(ins + outs),
                               name=name)
        elif ch["form"] == "product_links":
            links = {}
            for pos, ln in enumerate(ch["links"]):
                key = (ln["from"], ln["to"])
                if key in links:
                    raise ParseError(f"{source}: field channel.links[{pos}]: duplicate link {key}")
                rows = _probs(ln["matrix"])
                if len({len(r) for r in rows}) != 1:
                    raise ParseError(f"{source}: field channel.links[{pos}].matrix: ragged rows")
                links[key] = rows
            spec = build_independent_dmc_network(links, obj["sources"], obj["destinations"], node_count=N,
                                                 name=name)
        else:
            probs = _probs(ch["erasure_probs"])
            spec = build_erasure_network([tuple(e) for e in ch["edges"]], probs, obj["sources"],
                                         obj["destinations"], ch["input_sizes"], node_count=N, name=name)
        require_valid(spec)
        if "feedback" in obj:
            spec = build_feedback_version(spec, obj["feedback"])
    except ParseError:
        raise
    except MmnetError as e:
        raise ParseError(f"{source}: field channel: {e}") from None
    return spec


def load_network(path) -> NetworkSpec:
    """Read and validate a network file; every failure is a :class:`ParseError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"{path}: cannot read ({e.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: line 1: top level must be an object")
    return parse_network(obj, str(path))


# --------------------------------------------------------------------------
# output


def fmt_number(x):
    """12 significant digits; infinities and NaN become strings."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(format(x, f".{SIG_DIGITS}g"))


def jsonable(obj):
    """Recursively convert numpy values and round floats for stable output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_number(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"
