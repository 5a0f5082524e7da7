"""JSON system files and result serialization.

One document per system, discriminated by "kind". Finite doubles round-trip
bit-for-bit (json emits repr), and infinite branch capacities are stored as
null. Schema violations surface as SchemaError with a field path instead of
raw KeyError/TypeError noise.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from ..errors import SchemaError
from ..geometry import HPolytope, VRep
from ..macod import AreaSystem, Generator, TieLine, TieLineSystem
from ..pve import PveResult
from ..tdcod import DerUnit, FeederBranch, FeederSystem, TransmissionSystem

SCHEMA_VERSION = 1
KINDS = ("polytope", "multi_area", "transmission_distribution")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):
            return None
        return v
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


class _Reader:
    """Field access with path-annotated schema errors."""

    def __init__(self, data: dict, path: str = ""):
        if not isinstance(data, dict):
            raise SchemaError("expected an object", path or "<root>")
        self.data = data
        self.path = path

    def _loc(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def require(self, key: str):
        if key not in self.data:
            raise SchemaError("missing required field", self._loc(key))
        return self.data[key]

    def number(self, key: str, default=None, allow_none=False) -> float | None:
        val = self.data.get(key, default) if (default is not None or allow_none or key not in self.data and default is None) else self.data[key]
        if key in self.data:
            val = self.data[key]
        if val is None:
            if allow_none:
                return None
            raise SchemaError("missing required number", self._loc(key))
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"expected a number, got {type(val).__name__}", self._loc(key))
        return float(val)

    def integer(self, key: str, default=None) -> int:
        val = self.data.get(key, default)
        if val is None:
            raise SchemaError("missing required integer", self._loc(key))
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaError(f"expected an integer, got {type(val).__name__}", self._loc(key))
        return val

    def array(self, key: str, ndim: int = 1) -> np.ndarray:
        val = self.require(key)
        try:
            arr = np.asarray(val, dtype=float)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"expected a numeric array: {exc}", self._loc(key)) from None
        if arr.ndim != ndim and arr.size:
            raise SchemaError(f"expected {ndim}-dimensional array, got {arr.ndim}", self._loc(key))
        return arr

    def items(self, key: str):
        val = self.require(key)
        if not isinstance(val, list):
            raise SchemaError("expected a list", self._loc(key))
        for i, item in enumerate(val):
            yield _Reader(item, f"{self._loc(key)}[{i}]")


def _segments(reader: _Reader) -> tuple[tuple[float, float], ...]:
    raw = reader.require("cost_segments")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("expected a non-empty list of [slope, intercept] pairs",
                          reader._loc("cost_segments"))
    out = []
    for i, seg in enumerate(raw):
        if not isinstance(seg, (list, tuple)) or len(seg) != 2:
            raise SchemaError("expected [slope, intercept]",
                              f"{reader._loc('cost_segments')}[{i}]")
        out.append((float(seg[0]), float(seg[1])))
    return tuple(out)


# ---------------------------------------------------------------------------
# per-kind encode/decode


def _polytope_to_dict(region: HPolytope) -> dict:
    return {
        "kind": "polytope",
        "schema_version": SCHEMA_VERSION,
        "num_x": region.num_x,
        "num_y": region.num_y,
        "A": _jsonable(region.A),
        "B": _jsonable(region.B),
        "c": _jsonable(region.c),
    }


def _polytope_from(reader: _Reader) -> HPolytope:
    num_x = reader.integer("num_x")
    num_y = reader.integer("num_y")
    c = reader.array("c")
    A = reader.array("A", ndim=2).reshape(len(c), num_x)
    B = reader.array("B", ndim=2).reshape(len(c), num_y) if num_y else np.zeros((len(c), 0))
    try:
        return HPolytope(num_x=num_x, num_y=num_y, A=A, B=B, c=c)
    except ValueError as exc:
        raise SchemaError(str(exc), reader.path or "<root>") from None


def _generator_from(reader: _Reader) -> Generator:
    return Generator(
        node=reader.integer("node"),
        p_min=reader.number("p_min"),
        p_max=reader.number("p_max"),
        cost_segments=_segments(reader),
    )


def _generator_to_dict(g: Generator) -> dict:
    return {"node": g.node, "p_min": _jsonable(g.p_min), "p_max": _jsonable(g.p_max),
            "cost_segments": _jsonable(g.cost_segments)}


def _area_from(reader: _Reader) -> AreaSystem:
    loads = reader.array("loads")
    caps = reader.array("branch_caps")
    ptdf = reader.array("ptdf", ndim=2).reshape(len(caps), len(loads)) if len(caps) \
        else np.zeros((0, len(loads)))
    try:
        return AreaSystem(
            id=reader.integer("id"),
            generators=tuple(_generator_from(g) for g in reader.items("generators")),
            loads=loads,
            ptdf=ptdf,
            branch_caps=caps,
            boundary_nodes=tuple(int(v) for v in reader.require("boundary_nodes")),
            cost_cap=reader.number("cost_cap", allow_none=True),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), reader.path) from None


def _area_to_dict(a: AreaSystem) -> dict:
    return {
        "id": a.id,
        "generators": [_generator_to_dict(g) for g in a.generators],
        "loads": _jsonable(a.loads),
        "ptdf": _jsonable(a.ptdf),
        "branch_caps": _jsonable(a.branch_caps),
        "boundary_nodes": list(a.boundary_nodes),
        "cost_cap": _jsonable(a.cost_cap),
    }


def _multi_area_from(reader: _Reader):
    areas = [_area_from(a) for a in reader.items("areas")]
    ties_reader = _Reader(reader.require("tie_lines"), "tie_lines")
    lines = tuple(
        TieLine(
            from_area=t.integer("from_area"),
            to_area=t.integer("to_area"),
            from_node=t.integer("from_node"),
            to_node=t.integer("to_node"),
            reactance=t.number("reactance"),
            flow_min=t.number("flow_min"),
            flow_max=t.number("flow_max"),
        )
        for t in ties_reader.items("lines")
    )
    ties = TieLineSystem(lines, reference_area=ties_reader.integer("reference_area", 0))
    return areas, ties


def _multi_area_to_dict(areas, ties: TieLineSystem) -> dict:
    return {
        "kind": "multi_area",
        "schema_version": SCHEMA_VERSION,
        "areas": [_area_to_dict(a) for a in areas],
        "tie_lines": {
            "reference_area": ties.reference_area,
            "lines": [
                {"from_area": t.from_area, "to_area": t.to_area,
                 "from_node": t.from_node, "to_node": t.to_node,
                 "reactance": _jsonable(t.reactance),
                 "flow_min": _jsonable(t.flow_min),
                 "flow_max": _jsonable(t.flow_max)}
                for t in ties.tie_lines
            ],
        },
    }


def _feeder_from(reader: _Reader) -> FeederSystem:
    ders = tuple(
        DerUnit(
            node=d.integer("node"),
            p_min=d.number("p_min"), p_max=d.number("p_max"),
            q_min=d.number("q_min"), q_max=d.number("q_max"),
            cost_segments=_segments(d),
        )
        for d in reader.items("ders")
    )
    branches = tuple(
        FeederBranch(
            from_node=b.integer("from_node"),
            to_node=b.integer("to_node"),
            resistance=b.number("resistance"),
            reactance=b.number("reactance"),
            cap=b.number("cap", allow_none=True) if b.data.get("cap") is not None else np.inf,
        )
        for b in reader.items("branches")
    )
    try:
        return FeederSystem(
            loads_p=reader.array("loads_p"),
            loads_q=reader.array("loads_q"),
            ders=ders,
            branches=branches,
            v_min2=reader.number("v_min2"),
            v_max2=reader.number("v_max2"),
            v0_2=reader.number("v0_2"),
            n_segments=reader.integer("n_segments", 8),
            cost_cap=reader.number("cost_cap", allow_none=True),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), reader.path) from None


def _feeder_to_dict(f: FeederSystem) -> dict:
    return {
        "loads_p": _jsonable(f.loads_p),
        "loads_q": _jsonable(f.loads_q),
        "ders": [
            {"node": d.node, "p_min": _jsonable(d.p_min), "p_max": _jsonable(d.p_max),
             "q_min": _jsonable(d.q_min), "q_max": _jsonable(d.q_max),
             "cost_segments": _jsonable(d.cost_segments)}
            for d in f.ders
        ],
        "branches": [
            {"from_node": b.from_node, "to_node": b.to_node,
             "resistance": _jsonable(b.resistance), "reactance": _jsonable(b.reactance),
             "cap": _jsonable(b.cap)}
            for b in f.branches
        ],
        "v_min2": _jsonable(f.v_min2),
        "v_max2": _jsonable(f.v_max2),
        "v0_2": _jsonable(f.v0_2),
        "n_segments": f.n_segments,
        "cost_cap": _jsonable(f.cost_cap),
    }


def _td_from(reader: _Reader):
    tn_reader = _Reader(reader.require("transmission"), "transmission")
    loads = tn_reader.array("loads")
    caps = tn_reader.array("line_caps")
    ptdf = tn_reader.array("ptdf", ndim=2).reshape(len(caps), len(loads)) if len(caps) \
        else np.zeros((0, len(loads)))
    tn = TransmissionSystem(
        generators=tuple(_generator_from(g) for g in tn_reader.items("generators")),
        loads=loads,
        ptdf=ptdf,
        line_caps=caps,
        feeder_nodes=tuple(int(v) for v in tn_reader.require("feeder_nodes")),
    )
    feeders = [_feeder_from(f) for f in reader.items("feeders")]
    return tn, feeders


def _td_to_dict(tn: TransmissionSystem, feeders) -> dict:
    return {
        "kind": "transmission_distribution",
        "schema_version": SCHEMA_VERSION,
        "transmission": {
            "generators": [_generator_to_dict(g) for g in tn.generators],
            "loads": _jsonable(tn.loads),
            "ptdf": _jsonable(tn.ptdf),
            "line_caps": _jsonable(tn.line_caps),
            "feeder_nodes": list(tn.feeder_nodes),
        },
        "feeders": [_feeder_to_dict(f) for f in feeders],
    }


# ---------------------------------------------------------------------------
# public entry points


def system_to_dict(payload) -> dict:
    """Serialize a system (HPolytope, (areas, ties), or (tn, feeders))."""
    if isinstance(payload, HPolytope):
        return _polytope_to_dict(payload)
    if isinstance(payload, tuple) and len(payload) == 2:
        a, b = payload
        if isinstance(b, TieLineSystem):
            return _multi_area_to_dict(a, b)
        if isinstance(a, TransmissionSystem):
            return _td_to_dict(a, b)
    raise TypeError(f"cannot serialize {type(payload).__name__} as a system file")


def save_system(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(payload), fh, indent=1)
        fh.write("\n")


def parse_system(data: dict):
    """Typed payload from a parsed JSON document.

    Returns ("polytope", HPolytope), ("multi_area", (areas, ties)), or
    ("transmission_distribution", (tn, feeders)).
    """
    reader = _Reader(data)
    kind = reader.require("kind")
    if kind not in KINDS:
        raise SchemaError(f"unknown kind {kind!r}; expected one of {KINDS}", "kind")
    version = reader.integer("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}", "schema_version")
    if kind == "polytope":
        return kind, _polytope_from(reader)
    if kind == "multi_area":
        return kind, _multi_area_from(reader)
    return kind, _td_from(reader)


def load_system(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_system(data)


def result_to_dict(result: PveResult, epsilon: float) -> dict:
    """Projection result as a stable, machine-readable document."""
    hull = result.hull
    return {
        "kind": "projection_result",
        "schema_version": SCHEMA_VERSION,
        "status": result.status.value,
        "epsilon": _jsonable(epsilon),
        "outer_loops": result.outer_loops,
        "error_trace": _jsonable(list(result.error_trace)),
        "new_vertex_counts": list(result.new_vertex_counts),
        "certified_bound": _jsonable(result.certified_bound),
        "dim": hull.dim,
        "vertices": _jsonable(hull.vertices),
        "facets": [
            {"normal": _jsonable(f.normal), "offset": _jsonable(f.offset)}
            for f in hull.facets
        ],
    }


def hull_from_result_dict(data: dict) -> VRep:
    """Rebuild the hull of a serialized projection result."""
    from ..geometry import Facet

    reader = _Reader(data)
    dim = reader.integer("dim")
    vertices = reader.array("vertices", ndim=2).reshape(-1, dim)
    facets = tuple(
        Facet(f.array("normal"), f.number("offset"))
        for f in reader.items("facets")
    )
    return VRep(dim=dim, vertices=vertices, facets=facets)
