"""JSON run-config files: parsing, defaults, validation, serialization.

Document layout (all fields optional except lattice.dims and run.t_end):

    {
      "lattice":    {"dims": [6,6,6], "periodic": true,
                     "coupling_rule": "dipolar_truncated",
                     "image_convention": "minimum_image_split",
                     "custom_table": [[dx,dy,dz,jz,jperp], ...]},
      "integrator": {"scheme": "rk4_renorm", "dt": 0.01},
      "feedback":   {"g0": 0.2, "omega": 7.0, "hz": 0.0,
                     "steering": {"kind": "linear", "fdot": -0.005},
                     "detector": {"noise_sigma": 0.0, "hold_interval": 0.0},
                     "guard_factor": 10.0},
      "run":        {"t_end": 100.0, "telemetry_interval": null, "seed": 0,
                     "init": {"kind": "infinite_temperature"},
                     "stop_rules": {"target_sz": null,
                                    "halt_on_tracking_lost": false},
                     "field_method": "auto", "checkpoint_interval": 0.0}
    }

Schedules (g0, omega) accept a number, an inline {"table": [[t, value], ...]},
or {"csv": "file"} with columns t,value; table steering likewise accepts
"points" inline or "csv". Relative CSV paths resolve against the config file's
directory. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import IntegratorConfig
from .errors import ConfigError
from .experiment import InitSpec, RunConfig, StopRules
from .feedback import DetectorModel, FeedbackConfig, Schedule, SteeringSpec, schedule_from_json
from .lattice import LatticeSpec

_AXIS_DIRECTIONS = {
    "+x": (1.0, 0.0, 0.0),
    "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0),
    "-z": (0.0, 0.0, -1.0),
}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _load_table_csv(path: Path) -> np.ndarray:
    rows = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read table CSV {path}: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 2:
            raise ConfigError(f"table CSV {path}: expected two columns, got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if not rows:
                continue  # header row
            raise ConfigError(f"table CSV {path}: bad row {line!r}")
    if not rows:
        raise ConfigError(f"table CSV {path} holds no data rows")
    return np.asarray(rows, dtype=np.float64)


def _schedule_from_json(obj, base_dir: Optional[Path]):
    if isinstance(obj, dict) and "csv" in obj:
        p = Path(obj["csv"])
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        return Schedule.from_table(_load_table_csv(p))
    return schedule_from_json(obj)


def _steering_from_json(obj: dict, base_dir: Optional[Path]) -> SteeringSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"steering must be an object, got {obj!r}")
    _reject_unknown(obj, {"kind", "fdot", "df", "dt_step", "points", "csv"}, "feedback.steering")
    kind = obj.get("kind", "linear")
    if kind == "linear":
        return SteeringSpec(kind="linear", fdot=float(obj.get("fdot", -0.005)))
    if kind == "stepwise":
        return SteeringSpec(
            kind="stepwise",
            df=float(obj.get("df", 0.0)),
            dt_step=float(obj.get("dt_step", 1.0)),
        )
    if kind == "table":
        if "csv" in obj:
            p = Path(obj["csv"])
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            pts = _load_table_csv(p)
        elif "points" in obj:
            pts = np.asarray(obj["points"], dtype=np.float64)
        else:
            raise ConfigError("table steering requires 'points' or 'csv'")
        return SteeringSpec(kind="table", table=pts)
    raise ConfigError(f"unknown steering kind {kind!r}")


def _steering_to_json(s: SteeringSpec) -> dict:
    if s.kind == "linear":
        return {"kind": "linear", "fdot": s.fdot}
    if s.kind == "stepwise":
        return {"kind": "stepwise", "df": s.df, "dt_step": s.dt_step}
    return {"kind": "table", "points": s.table.tolist()}


def _init_from_json(obj: dict) -> InitSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"init must be an object, got {obj!r}")
    _reject_unknown(obj, {"kind", "direction", "path"}, "run.init")
    kind = obj.get("kind", "infinite_temperature")
    if kind == "aligned":
        d = obj.get("direction", "+z")
        if isinstance(d, str):
            if d not in _AXIS_DIRECTIONS:
                raise ConfigError(f"unknown aligned direction {d!r}")
            d = _AXIS_DIRECTIONS[d]
        return InitSpec(kind="aligned", direction=tuple(float(x) for x in d))
    if kind == "from_checkpoint":
        return InitSpec(kind="from_checkpoint", path=obj.get("path"))
    if kind == "infinite_temperature":
        return InitSpec(kind="infinite_temperature")
    raise ConfigError(f"unknown init kind {kind!r}")


def _init_to_json(spec: InitSpec) -> dict:
    if spec.kind == "aligned":
        return {"kind": "aligned", "direction": list(spec.direction)}
    if spec.kind == "from_checkpoint":
        return {"kind": "from_checkpoint", "path": spec.path}
    return {"kind": "infinite_temperature"}


def config_from_dict(doc: dict, base_dir: Optional[Path] = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, {"lattice", "integrator", "feedback", "run"}, "config")

    lat = doc.get("lattice")
    if not isinstance(lat, dict) or "dims" not in lat:
        raise ConfigError("config requires lattice.dims")
    _reject_unknown(
        lat, {"dims", "periodic", "coupling_rule", "image_convention", "custom_table"}, "lattice"
    )
    custom = None
    if lat.get("custom_table") is not None:
        custom = {}
        for row in lat["custom_table"]:
            if len(row) != 5:
                raise ConfigError("custom_table rows must be [dx,dy,dz,jz,jperp]")
            custom[(int(row[0]), int(row[1]), int(row[2]))] = (float(row[3]), float(row[4]))
    lattice = LatticeSpec(
        dims=tuple(lat["dims"]),
        periodic=bool(lat.get("periodic", True)),
        coupling_rule=lat.get("coupling_rule", "dipolar_truncated"),
        image_convention=lat.get("image_convention", "minimum_image_split"),
        custom_table=custom,
    )

    integ = doc.get("integrator", {})
    _reject_unknown(integ, {"scheme", "dt"}, "integrator")
    integrator = IntegratorConfig(
        scheme=integ.get("scheme", "rk4_renorm"), dt=float(integ.get("dt", 0.01))
    )

    fb = doc.get("feedback", {})
    _reject_unknown(
        fb, {"g0", "omega", "hz", "steering", "detector", "guard_factor"}, "feedback"
    )
    det = fb.get("detector", {})
    _reject_unknown(det, {"noise_sigma", "hold_interval"}, "feedback.detector")
    feedback = FeedbackConfig(
        g0=_schedule_from_json(fb.get("g0", 0.2), base_dir),
        omega=_schedule_from_json(fb.get("omega", 7.0), base_dir),
        steering=_steering_from_json(fb.get("steering", {"kind": "linear"}), base_dir),
        hz=float(fb.get("hz", 0.0)),
        detector=DetectorModel(
            noise_sigma=float(det.get("noise_sigma", 0.0)),
            hold_interval=float(det.get("hold_interval", 0.0)),
        ),
        guard_factor=float(fb.get("guard_factor", 10.0)),
    )

    rn = doc.get("run", {})
    _reject_unknown(
        rn,
        {
            "t_end",
            "telemetry_interval",
            "seed",
            "init",
            "stop_rules",
            "field_method",
            "checkpoint_interval",
        },
        "run",
    )
    if "t_end" not in rn:
        raise ConfigError("config requires run.t_end")
    sr = rn.get("stop_rules", {})
    _reject_unknown(sr, {"target_sz", "halt_on_tracking_lost"}, "run.stop_rules")
    target = sr.get("target_sz")
    stop_rules = StopRules(
        target_sz=None if target is None else float(target),
        halt_on_tracking_lost=bool(sr.get("halt_on_tracking_lost", False)),
    )
    ti = rn.get("telemetry_interval")
    return RunConfig(
        lattice=lattice,
        integrator=integrator,
        feedback=feedback,
        t_end=float(rn["t_end"]),
        telemetry_interval=None if ti is None else float(ti),
        seed=int(rn.get("seed", 0)),
        init=_init_from_json(rn.get("init", {"kind": "infinite_temperature"})),
        stop_rules=stop_rules,
        field_method=rn.get("field_method", "auto"),
        checkpoint_interval=float(rn.get("checkpoint_interval", 0.0)),
    )


def config_to_dict(config: RunConfig) -> dict:
    lat = {
        "dims": list(config.lattice.dims),
        "periodic": config.lattice.periodic,
        "coupling_rule": config.lattice.coupling_rule,
        "image_convention": config.lattice.image_convention,
    }
    if config.lattice.custom_table is not None:
        lat["custom_table"] = [
            [d[0], d[1], d[2], v[0], v[1]] for d, v in sorted(config.lattice.custom_table.items())
        ]
    fb = config.feedback
    return {
        "lattice": lat,
        "integrator": {"scheme": config.integrator.scheme, "dt": config.integrator.dt},
        "feedback": {
            "g0": fb.g0.to_json(),
            "omega": fb.omega.to_json(),
            "hz": fb.hz,
            "steering": _steering_to_json(fb.steering),
            "detector": {
                "noise_sigma": fb.detector.noise_sigma,
                "hold_interval": fb.detector.hold_interval,
            },
            "guard_factor": fb.guard_factor,
        },
        "run": {
            "t_end": config.t_end,
            "telemetry_interval": config.telemetry_interval,
            "seed": config.seed,
            "init": _init_to_json(config.init),
            "stop_rules": {
                "target_sz": config.stop_rules.target_sz,
                "halt_on_tracking_lost": config.stop_rules.halt_on_tracking_lost,
            },
            "field_method": config.field_method,
            "checkpoint_interval": config.checkpoint_interval,
        },
    }


def merge_config_dicts(base: dict, override: dict) -> dict:
    """Deep merge of config documents; override wins, lists are replaced."""
    out = {}
    for key in set(base) | set(override):
        if key in base and key in override:
            b, o = base[key], override[key]
            if isinstance(b, dict) and isinstance(o, dict):
                out[key] = merge_config_dicts(b, o)
            else:
                out[key] = o
        elif key in base:
            out[key] = base[key]
        else:
            out[key] = override[key]
    return out


def load_config(path, seed_override: Optional[int] = None) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if seed_override is not None:
        doc.setdefault("run", {})["seed"] = int(seed_override)
    return config_from_dict(doc, base_dir=path.parent)
