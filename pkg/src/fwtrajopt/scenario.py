"""Scenario files: a versioned JSON schema, loading, serialization and the bundled suites.

A scenario file looks like::

    {
      "schema_version": 1,
      "name": "urban_00",
      "start": {"position": [0, 0, 30], "velocity": [15, 0, 0], "heading": 0.0},
      "goal": [250, 20, 35],
      "limits": {"v_min": 12, "v_max": 20, "gamma_max": 0.35, "phi_max": 0.7},
      "obstacles": [{"center": [120, 5, 35], "semi_axes": [9, 9, 180]}],
      "vehicle_radius": 1.0,
      "horizon": {"n": 50, "degree": 30, "total_time": "auto"},
      "weights": {"rho_nh": 10, "rho_c": 2, "w_goal": 10},
      "solver": {"max_iter": 300, "residual_tol": 0.001}
    }

Obstacles are stored un-inflated; loading grows every semi-axis by
``vehicle_radius``. Unknown keys are rejected at every level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    AUTO,
    BoundaryState,
    Ellipsoid,
    Horizon,
    Limits,
    ProblemSpec,
    ValidationError,
    Weights,
    inflate_obstacles,
)
from .solver import HeadingVariant, SolverConfig

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "name", "description", "start", "goal", "limits", "obstacles",
    "vehicle_radius", "horizon", "weights", "solver",
}
_REQUIRED = ("schema_version", "start", "goal", "limits")
_START_KEYS = {"position", "velocity", "acceleration", "heading", "heading_rate"}
_LIMIT_KEYS = {"v_min", "v_max", "gamma_max", "phi_max", "g"}
_OBSTACLE_KEYS = {"center", "semi_axes"}
_HORIZON_KEYS = {"n", "degree", "total_time"}
_WEIGHT_KEYS = {f.name for f in fields(Weights)}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_HEADING_ALIASES = {"admm": HeadingVariant.UNCONSTRAINED_ADMM, "qp": HeadingVariant.CONSTRAINED_QP}


class ScenarioError(ValueError):
    """A scenario file cannot be read or does not follow the schema.

    ``field`` is the dotted path of the offending entry and ``line`` the
    1-based line number when the error comes from the JSON parser.
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None,
                 source: Optional[str] = None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario: the problem, solver settings and the raw (un-inflated) obstacles."""

    spec: ProblemSpec
    config: SolverConfig = SolverConfig()
    name: str = ""
    description: str = ""
    raw_obstacles: tuple = ()
    vehicle_radius: float = 0.0
    source: Optional[Path] = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# Parsing


def _check_keys(obj, allowed, where: str) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(where or "scenario", "expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        prefix = f"{where}." if where else ""
        raise ValidationError(prefix + unknown[0], "unknown field")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(where, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(where, f"expected an integer, got {type(value).__name__}")
    return value


def _vector(value, where: str) -> list:
    if not isinstance(value, list) or len(value) != 3:
        raise ValidationError(where, "expected a list of 3 numbers")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _parse_start(obj) -> BoundaryState:
    _check_keys(obj, _START_KEYS, "start")
    if "position" not in obj:
        raise ValidationError("start.position", "required")
    kw = {"position": _vector(obj["position"], "start.position")}
    for name in ("velocity", "acceleration"):
        if name in obj:
            kw[name] = _vector(obj[name], f"start.{name}")
    if obj.get("heading") is not None:
        kw["heading"] = _number(obj["heading"], "start.heading")
    if "heading_rate" in obj:
        kw["heading_rate"] = _number(obj["heading_rate"], "start.heading_rate")
    return BoundaryState(**kw)


def _parse_limits(obj) -> Limits:
    _check_keys(obj, _LIMIT_KEYS, "limits")
    for name in ("v_min", "v_max", "gamma_max", "phi_max"):
        if name not in obj:
            raise ValidationError(f"limits.{name}", "required")
    return Limits(**{k: _number(v, f"limits.{k}") for k, v in obj.items()})


def _parse_obstacles(items) -> tuple:
    if not isinstance(items, list):
        raise ValidationError("obstacles", "expected a list")
    out = []
    for i, obj in enumerate(items):
        where = f"obstacles[{i}]"
        _check_keys(obj, _OBSTACLE_KEYS, where)
        for name in ("center", "semi_axes"):
            if name not in obj:
                raise ValidationError(f"{where}.{name}", "required")
        try:
            out.append(Ellipsoid(_vector(obj["center"], f"{where}.center"),
                                 _vector(obj["semi_axes"], f"{where}.semi_axes")))
        except ValidationError as exc:
            if exc.field.startswith(where):
                raise
            raise ValidationError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    return tuple(out)


def _parse_horizon(obj) -> Horizon:
    _check_keys(obj, _HORIZON_KEYS, "horizon")
    kw = {}
    for name in ("n", "degree"):
        if name in obj:
            kw[name] = _integer(obj[name], f"horizon.{name}")
    if "total_time" in obj:
        value = obj["total_time"]
        kw["total_time"] = AUTO if value == AUTO else _number(value, "horizon.total_time")
    return Horizon(**kw)


def _parse_weights(obj) -> Weights:
    _check_keys(obj, _WEIGHT_KEYS, "weights")
    return Weights(**{k: _number(v, f"weights.{k}") for k, v in obj.items()})


def _parse_solver(obj) -> SolverConfig:
    _check_keys(obj, _SOLVER_KEYS, "solver")
    kw = {}
    for name, value in obj.items():
        where = f"solver.{name}"
        if name in ("max_iter", "pre_iterations"):
            kw[name] = _integer(value, where)
        elif name == "heading_variant":
            kw[name] = parse_heading_variant(value, where)
        elif name == "shift_collision_targets":
            if not isinstance(value, bool):
                raise ValidationError(where, "expected true or false")
            kw[name] = value
        elif value is None and name.startswith("rho_"):
            kw[name] = None
        else:
            kw[name] = _number(value, where)
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        name = str(exc).split(" ", 1)[0]
        raise ValidationError(f"solver.{name}", str(exc)) from None


def parse_heading_variant(value, where: str = "solver.heading_variant") -> HeadingVariant:
    if value in _HEADING_ALIASES:
        return _HEADING_ALIASES[value]
    try:
        return HeadingVariant(value)
    except ValueError:
        choices = sorted(_HEADING_ALIASES) + [v.value for v in HeadingVariant]
        raise ValidationError(where, f"expected one of {choices}") from None


def scenario_from_dict(data: dict, source: Optional[Path] = None) -> Scenario:
    """Validate a decoded scenario document; raises :class:`ValidationError`."""
    _check_keys(data, _TOP_KEYS, "")
    for name in _REQUIRED:
        if name not in data:
            raise ValidationError(name, "required")
    version = _integer(data["schema_version"], "schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"unsupported version {version}, expected {SCHEMA_VERSION}")

    radius = _number(data.get("vehicle_radius", 0.0), "vehicle_radius")
    raw = _parse_obstacles(data.get("obstacles", []))
    spec = ProblemSpec(
        start=_parse_start(data["start"]),
        goal=_vector(data["goal"], "goal"),
        limits=_parse_limits(data["limits"]),
        obstacles=inflate_obstacles(raw, radius),
        weights=_parse_weights(data.get("weights", {})),
        horizon=_parse_horizon(data.get("horizon", {})),
    )
    return Scenario(
        spec=spec,
        config=_parse_solver(data.get("solver", {})),
        name=str(data.get("name", source.stem if source else "")),
        description=str(data.get("description", "")),
        raw_obstacles=raw,
        vehicle_radius=radius,
        source=source,
    )


def load_scenario_file(path) -> Scenario:
    """Read and validate a scenario file.

    Raises :class:`ScenarioError` for unreadable or malformed JSON (with the
    line number) and for schema violations (with the field path).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read file ({exc.strerror})", source=path) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                            line=exc.lineno, source=path) from exc
    try:
        return scenario_from_dict(data, source=path)
    except ValidationError as exc:
        raise ScenarioError(str(exc).split(": ", 1)[-1], field=exc.field, source=path) from exc


def load_scenario(path) -> ProblemSpec:
    """The validated, inflated problem of a scenario file."""
    return load_scenario_file(path).spec


# ---------------------------------------------------------------------------
# Serialization


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr).reshape(-1)]


def scenario_to_dict(scenario: Scenario) -> dict:
    spec, config = scenario.spec, scenario.config
    s = spec.start
    start = {
        "position": _floats(s.position),
        "velocity": _floats(s.velocity),
        "acceleration": _floats(s.acceleration),
        "heading": None if s.heading is None else float(s.heading),
        "heading_rate": float(s.heading_rate),
    }
    lim = spec.limits
    h = spec.horizon
    solver = {}
    for f in fields(SolverConfig):
        value = getattr(config, f.name)
        solver[f.name] = value.value if isinstance(value, HeadingVariant) else value
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "start": start,
        "goal": _floats(spec.goal),
        "limits": {"v_min": lim.v_min, "v_max": lim.v_max, "gamma_max": lim.gamma_max,
                   "phi_max": lim.phi_max, "g": lim.g},
        "obstacles": [{"center": _floats(o.center), "semi_axes": _floats(o.semi_axes)}
                      for o in scenario.raw_obstacles],
        "vehicle_radius": float(scenario.vehicle_radius),
        "horizon": {"n": int(h.n), "degree": int(h.degree),
                    "total_time": h.total_time if h.is_auto else float(h.total_time)},
        "weights": {f.name: float(getattr(spec.weights, f.name)) for f in fields(Weights)},
        "solver": solver,
    }
    if scenario.description:
        out["description"] = scenario.description
    return out


def scenario_from_spec(spec: ProblemSpec, config: SolverConfig = SolverConfig(), name: str = "") -> Scenario:
    """Wrap an already-inflated problem; it serializes with ``vehicle_radius`` 0."""
    return Scenario(spec=spec, config=config, name=name, raw_obstacles=spec.obstacles)


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(scenario))


def with_overrides(scenario: Scenario, n: Optional[int] = None, **config) -> Scenario:
    """Copy of ``scenario`` with a different step count and/or solver settings."""
    spec = scenario.spec
    if n is not None:
        spec = replace(spec, horizon=replace(spec.horizon, n=n))
    settings = {k: v for k, v in config.items() if v is not None}
    return replace(scenario, spec=spec, config=replace(scenario.config, **settings))


# ---------------------------------------------------------------------------
# Bundled suites

BUNDLED_WEIGHTS = {"rho_nh": 10.0, "rho_c": 2.0, "rho_in": 1.0, "w_goal": 10.0, "w_smooth": 1.0}
BUNDLED_LIMITS = {"v_min": 12.0, "v_max": 20.0, "gamma_max": 0.35, "phi_max": 0.7, "g": 9.81}
BUNDLED_DEGREE = 30
VEHICLE_RADIUS = 1.0
URBAN_COUNT = 20
URBAN_BUILDINGS = 13
FLIGHT_LEVEL = 35.0


def _exact(values) -> list:
    # full precision: the solver outcome is sensitive to centimetre-level changes
    return [float(v) for v in values]


def urban_scenario(index: int) -> dict:
    """Scenario document for the ``index``-th urban layout.

    Thirteen tall, round buildings are scattered between start and goal.
    Buildings are centered at the flight level so the polar projection
    pushes sideways rather than up, they keep clear of start, goal and one
    another, and none has its axis within half a radius of the straight
    start-goal line (there the projection has no sideways component).
    """
    rng = np.random.default_rng(index)
    psi0 = rng.uniform(-0.6, 0.6)
    speed = 15.0
    goal = np.array([rng.uniform(220, 300), rng.uniform(-80, 80), rng.uniform(25, 45)])
    direction = goal[:2] / np.linalg.norm(goal[:2])
    buildings = []
    while len(buildings) < URBAN_BUILDINGS:
        center = np.array([rng.uniform(40, goal[0] - 20), rng.uniform(-100, 100), FLIGHT_LEVEL])
        radius = rng.uniform(6, 14)
        height = rng.uniform(150, 250)
        ok = all(np.linalg.norm(center[:2] - c[:2]) > radius + r + 12 for c, r, _ in buildings)
        ok &= np.linalg.norm(center[:2]) > radius + 50
        ok &= np.linalg.norm(center[:2] - goal[:2]) > radius + 40
        ok &= abs(direction[0] * center[1] - direction[1] * center[0]) > 0.5 * radius
        if ok:
            buildings.append((center, radius, height))
    return {
        "schema_version": SCHEMA_VERSION,
        "name": f"urban_{index:02d}",
        "description": "13-building urban layout (representative, not the published geometry)",
        "start": {
            "position": [0.0, 0.0, 30.0],
            "velocity": _exact([speed * np.cos(psi0), speed * np.sin(psi0), 0.0]),
            "heading": float(psi0),
        },
        "goal": _exact(goal),
        "limits": dict(BUNDLED_LIMITS),
        "obstacles": [
            {"center": _exact(c), "semi_axes": _exact([r - VEHICLE_RADIUS, r - VEHICLE_RADIUS,
                                                        h - VEHICLE_RADIUS])}
            for c, r, h in buildings
        ],
        "vehicle_radius": VEHICLE_RADIUS,
        "horizon": {"n": 50, "degree": BUNDLED_DEGREE, "total_time": AUTO},
        "weights": dict(BUNDLED_WEIGHTS),
        "solver": {"max_iter": 300, "residual_tol": 1e-3},
    }


def open_field_scenario() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "open_field",
        "description": "obstacle-free cruise with a climb and a sideways offset",
        "start": {"position": [0.0, 0.0, 30.0], "velocity": [15.0, 0.0, 0.0], "heading": 0.0},
        "goal": [260.0, 40.0, 40.0],
        "limits": dict(BUNDLED_LIMITS),
        "obstacles": [],
        "vehicle_radius": VEHICLE_RADIUS,
        "horizon": {"n": 50, "degree": BUNDLED_DEGREE, "total_time": AUTO},
        "weights": dict(BUNDLED_WEIGHTS),
        "solver": {"max_iter": 300, "residual_tol": 1e-3},
    }


def tight_turn_scenarios() -> list:
    """Goals beside or behind the start that force turns near the bank limit.

    The traversal-time heuristic ignores the turn radius, so these fix the
    horizon explicitly.
    """
    cases = [
        ("tight_turn_left", [60.0, 120.0, 35.0], 10.0),
        ("tight_turn_right", [60.0, -120.0, 30.0], 10.0),
        ("tight_turn_reverse", [-40.0, 80.0, 30.0], 10.0),
    ]
    docs = []
    for name, goal, total_time in cases:
        docs.append({
            "schema_version": SCHEMA_VERSION,
            "name": name,
            "description": "turn at the bank limit; a stress case, not part of the urban suite",
            "start": {"position": [0.0, 0.0, 30.0], "velocity": [12.0, 0.0, 0.0], "heading": 0.0},
            "goal": goal,
            "limits": dict(BUNDLED_LIMITS),
            "obstacles": [],
            "vehicle_radius": VEHICLE_RADIUS,
            "horizon": {"n": 50, "degree": BUNDLED_DEGREE, "total_time": total_time},
            "weights": dict(BUNDLED_WEIGHTS),
            "solver": {"max_iter": 300, "residual_tol": 1e-3},
        })
    return docs


def suite_documents() -> dict:
    """Relative path -> scenario document for every bundled file."""
    docs = {f"urban/urban_{i:02d}.json": urban_scenario(i) for i in range(URBAN_COUNT)}
    docs["open_field.json"] = open_field_scenario()
    for doc in tight_turn_scenarios():
        docs[f"tight_turn/{doc['name']}.json"] = doc
    return docs


def write_suite(directory) -> list:
    """Write the bundled scenario files below ``directory``; returns the paths written."""
    directory = Path(directory)
    written = []
    for rel, doc in suite_documents().items():
        path = directory / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2) + "\n")
        written.append(path)
    return written


def bundled_dir() -> Path:
    """Directory holding the packaged scenario files."""
    return Path(str(resources.files("fwtrajopt") / "scenarios"))


def urban_suite_dir() -> Path:
    return bundled_dir() / "urban"
