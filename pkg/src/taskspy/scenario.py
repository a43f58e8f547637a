"""Scenario files: schema, strict validation, loading.

A scenario is a single JSON object. Unknown keys anywhere are rejected, and
every validation message names the offending field. Example:

    {
      "version": 1,
      "dt": 0.001,
      "t_final": 5.0,
      "seed": 0,
      "safety": {"d_s": 0.3, "gamma_cbf": 1.0},
      "robots": [
        {"id": 0, "start": [-1.5, 0.0], "params": {"goal": [1.5, 0.0], "k_p": 1.0}}
      ],
      "static_obstacles": [[0.0, -0.1]],
      "estimation": {
        "target": "goal",
        "eps_active": 1e-6,
        "theta0": [0.0, 0.0],
        "velocity_source": "exact",
        "ao": {"k_w": 5.0, "gamma": 10.0, "ie_threshold": 1e-4},
        "ukf": {"p0": 1.0, "q_proc": 1e-6, "r_meas": 1e-4,
                 "alpha": 0.5, "beta": 2.0, "kappa": 0.0}
      }
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .controller import SafetyConfig, TaskParams
from .errors import ScenarioParseError, ScenarioValidationError
from .linalg import Vec2
from .observer import AoConfig
from .regressor import TargetKind
from .ukf import UkfConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RobotSpec:
    id: int
    start: Vec2
    params: TaskParams


@dataclass(frozen=True)
class EstimationSpec:
    target: TargetKind
    eps_active: float
    theta0: tuple[float, ...]
    velocity_source: str
    ao: AoConfig
    ukf: UkfConfig

    @property
    def target_dim(self) -> int:
        return len(self.theta0)


@dataclass(frozen=True)
class Scenario:
    name: str
    dt: float
    t_final: float
    seed: int
    safety: SafetyConfig
    robots: tuple[RobotSpec, ...]
    static_obstacles: tuple[Vec2, ...]
    estimation: EstimationSpec

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def dist_tol(self) -> float:
        # Slack scales with the integration step (unit speed scale).
        return self.dt


def _fail(path: str, msg: str) -> None:
    raise ScenarioValidationError(f"{path}: {msg}")


def _require_keys(obj: dict, path: str, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - required - optional
    if unknown:
        _fail(path, f"unknown key '{sorted(unknown)[0]}'")
    missing = required - set(obj)
    if missing:
        _fail(path, f"missing key '{sorted(missing)[0]}'")


def _number(obj: Any, path: str) -> float:
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        _fail(path, f"expected a number, got {type(obj).__name__}")
    v = float(obj)
    if not math.isfinite(v):
        _fail(path, "must be finite")
    return v


def _positive(obj: Any, path: str) -> float:
    v = _number(obj, path)
    if v <= 0.0:
        _fail(path, f"must be positive, got {v}")
    return v


def _point(obj: Any, path: str) -> Vec2:
    if not isinstance(obj, list) or len(obj) != 2:
        _fail(path, "expected [x, y]")
    return Vec2(_number(obj[0], f"{path}[0]"), _number(obj[1], f"{path}[1]"))


def _parse_robot(obj: Any, path: str) -> RobotSpec:
    _require_keys(obj, path, {"id", "start", "params"})
    rid = obj["id"]
    if not isinstance(rid, int) or isinstance(rid, bool):
        _fail(f"{path}.id", "expected an integer")
    _require_keys(obj["params"], f"{path}.params", {"goal", "k_p"})
    try:
        params = TaskParams(
            goal=_point(obj["params"]["goal"], f"{path}.params.goal"),
            k_p=_positive(obj["params"]["k_p"], f"{path}.params.k_p"),
        )
    except ValueError as exc:
        _fail(f"{path}.params", str(exc))
    return RobotSpec(id=rid, start=_point(obj["start"], f"{path}.start"), params=params)


def _parse_estimation(obj: Any, dt: float) -> EstimationSpec:
    path = "estimation"
    _require_keys(
        obj, path, {"target"},
        {"eps_active", "theta0", "velocity_source", "ao", "ukf"},
    )
    target_raw = obj["target"]
    if target_raw not in ("goal", "gain"):
        _fail(f"{path}.target", f"expected 'goal' or 'gain', got {target_raw!r}")
    target = TargetKind(target_raw)
    p = 2 if target is TargetKind.GOAL else 1

    eps = obj.get("eps_active", 1e-6)
    eps = _positive(eps, f"{path}.eps_active")

    theta0_raw = obj.get("theta0")
    if theta0_raw is None:
        theta0 = (0.0, 0.0) if p == 2 else (1.0,)
    else:
        if not isinstance(theta0_raw, list) or len(theta0_raw) != p:
            _fail(f"{path}.theta0", f"expected {p} entries for target '{target_raw}'")
        theta0 = tuple(
            _number(v, f"{path}.theta0[{i}]") for i, v in enumerate(theta0_raw)
        )

    source = obj.get("velocity_source", "exact")
    if source not in ("exact", "finite_difference"):
        _fail(
            f"{path}.velocity_source",
            f"expected 'exact' or 'finite_difference', got {source!r}",
        )

    ao_obj = obj.get("ao", {})
    _require_keys(ao_obj, f"{path}.ao", set(), {"k_w", "gamma", "ie_threshold"})
    ukf_obj = obj.get("ukf", {})
    _require_keys(
        ukf_obj, f"{path}.ukf", set(),
        {"p0", "q_proc", "r_meas", "alpha", "beta", "kappa"},
    )
    try:
        ao = AoConfig(
            k_w=_number(ao_obj.get("k_w", 5.0), f"{path}.ao.k_w"),
            gamma_gain=_number(ao_obj.get("gamma", 10.0), f"{path}.ao.gamma"),
            ie_threshold=_number(
                ao_obj.get("ie_threshold", 1e-4), f"{path}.ao.ie_threshold"
            ),
            dt=dt,
        )
        ukf = UkfConfig(
            p0=_number(ukf_obj.get("p0", 1.0), f"{path}.ukf.p0"),
            q_proc=_number(ukf_obj.get("q_proc", 1e-6), f"{path}.ukf.q_proc"),
            r_meas=_number(ukf_obj.get("r_meas", 1e-4), f"{path}.ukf.r_meas"),
            alpha=_number(ukf_obj.get("alpha", 0.5), f"{path}.ukf.alpha"),
            beta=_number(ukf_obj.get("beta", 2.0), f"{path}.ukf.beta"),
            kappa=_number(ukf_obj.get("kappa", 0.0), f"{path}.ukf.kappa"),
            dt=dt,
        )
    except ValueError as exc:
        _fail(path, str(exc))
    return EstimationSpec(
        target=target,
        eps_active=eps,
        theta0=theta0,
        velocity_source=source,
        ao=ao,
        ukf=ukf,
    )


def parse_scenario(doc: Any, name: str = "<memory>") -> Scenario:
    """Validate a decoded JSON document into a Scenario."""
    _require_keys(
        doc, "scenario",
        {"version", "dt", "t_final", "safety", "robots"},
        {"seed", "static_obstacles", "estimation"},
    )
    if doc["version"] != SCHEMA_VERSION:
        _fail("version", f"expected {SCHEMA_VERSION}, got {doc['version']!r}")
    dt = _positive(doc["dt"], "dt")
    t_final = _positive(doc["t_final"], "t_final")
    if t_final < dt:
        _fail("t_final", f"must be at least dt={dt}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail("seed", "expected an integer")

    _require_keys(doc["safety"], "safety", {"d_s", "gamma_cbf"})
    try:
        safety = SafetyConfig(
            d_s=_positive(doc["safety"]["d_s"], "safety.d_s"),
            gamma_cbf=_positive(doc["safety"]["gamma_cbf"], "safety.gamma_cbf"),
        )
    except ValueError as exc:
        _fail("safety", str(exc))

    robots_raw = doc["robots"]
    if not isinstance(robots_raw, list) or not robots_raw:
        _fail("robots", "expected a non-empty list")
    robots = [
        _parse_robot(r, f"robots[{i}]") for i, r in enumerate(robots_raw)
    ]
    ids = [r.id for r in robots]
    if len(set(ids)) != len(ids):
        _fail("robots", "robot ids must be distinct")
    robots.sort(key=lambda r: r.id)

    statics_raw = doc.get("static_obstacles", [])
    if not isinstance(statics_raw, list):
        _fail("static_obstacles", "expected a list")
    statics = tuple(
        _point(o, f"static_obstacles[{i}]") for i, o in enumerate(statics_raw)
    )

    # Starts may touch exactly at the safety distance (active from step one)
    # but never closer; the slack absorbs decimal-to-binary roundoff.
    slack = 1e-12
    for i, ri in enumerate(robots):
        for rj in robots[i + 1 :]:
            if (ri.start - rj.start).norm() < safety.d_s - slack:
                _fail(
                    "robots",
                    f"starts of ids {ri.id} and {rj.id} are closer than d_s",
                )
        for k, ob in enumerate(statics):
            if (ri.start - ob).norm() < safety.d_s - slack:
                _fail(
                    "robots",
                    f"start of id {ri.id} is closer than d_s to static_obstacles[{k}]",
                )

    est = _parse_estimation(doc.get("estimation", {"target": "goal"}), dt)
    return Scenario(
        name=name,
        dt=dt,
        t_final=t_final,
        seed=seed,
        safety=safety,
        robots=tuple(robots),
        static_obstacles=statics,
        estimation=est,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read, decode, and validate a scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{p}: invalid JSON ({exc})") from exc
    return parse_scenario(doc, name=p.stem)
