"""JSON configuration documents.

A document holds a :class:`~cqed_sim.model.SystemConfig` at top level plus
optional sections used by the command-line tool (``grid``, ``sweep``,
``readout``).  Keys are checked strictly: a misspelt key is an error, never
silently ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Tuple

from .model import CavityParams, ConfigError, EmitterParams, SystemConfig, ZeemanModel, check

_TOP = {"cavity", "emitters", "b_field", "probe_power_note",
        "description", "provenance", "grid", "sweep", "readout"}
_CAVITY = {"omega_c", "kappa", "kappa_in", "kappa_out"}
_EMITTER = {"g", "gamma", "zeeman", "active", "prepared_spin"}
_ZEEMAN = {"omega_zero", "slope_up", "slope_down", "branching_fraction"}
_GRID = {"start", "stop", "points"}
_SWEEP = {"b_start", "b_stop", "b_points", "preps", "default_prep", "reference"}
_READOUT = {"rate_bright", "rate_dark", "flip_lifetime", "window", "trials", "seed",
            "mean_up", "mean_down", "target_fidelity"}

BUNDLED = ("device1", "device2", "fig2_pair", "fig3_readout", "fig4_sweep")


def bundled_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in BUNDLED:
        raise FileNotFoundError(f"no bundled config named {name!r}; available: {', '.join(BUNDLED)}")
    return Path(str(resources.files("cqed_sim") / "data" / f"{stem}.json"))


def resolve_path(path_or_name) -> Path:
    """A filesystem path, or the name of a bundled config such as ``device1``."""
    p = Path(path_or_name)
    if p.exists():
        return p
    return bundled_path(str(path_or_name))


def _unknown(obj: Dict[str, Any], allowed, where: str, errors: list) -> None:
    for k in obj:
        if k not in allowed:
            errors.append(f"{where}{k}: unknown key")


def _require(obj, keys, where, errors) -> bool:
    ok = True
    for k in keys:
        if k not in obj:
            errors.append(f"{where}{k}: missing required key")
            ok = False
    return ok


def _is_obj(x, where, errors) -> bool:
    if not isinstance(x, dict):
        errors.append(f"{where}: expected a JSON object, got {type(x).__name__}")
        return False
    return True


def config_from_dict(doc: Dict[str, Any]) -> SystemConfig:
    """Build and validate a config; all problems are reported together."""
    errors: list = []
    if not _is_obj(doc, "document", errors):
        raise ConfigError(errors)
    _unknown(doc, _TOP, "", errors)
    cavity = None
    if _require(doc, ["cavity"], "", errors) and _is_obj(doc["cavity"], "cavity", errors):
        c = doc["cavity"]
        _unknown(c, _CAVITY, "cavity.", errors)
        if _require(c, ["omega_c", "kappa"], "cavity.", errors):
            cavity = CavityParams(**{k: v for k, v in c.items() if k in _CAVITY})

    emitters = []
    raw = doc.get("emitters", [])
    if not isinstance(raw, list):
        errors.append("emitters: expected a JSON array")
        raw = []
    for i, e in enumerate(raw):
        p = f"emitters[{i}]."
        if not _is_obj(e, p[:-1], errors):
            continue
        _unknown(e, _EMITTER, p, errors)
        if not _require(e, ["g", "gamma", "zeeman"], p, errors):
            continue
        z = e["zeeman"]
        if not _is_obj(z, p + "zeeman", errors):
            continue
        _unknown(z, _ZEEMAN, p + "zeeman.", errors)
        if not _require(z, ["omega_zero"], p + "zeeman.", errors):
            continue
        zm = ZeemanModel(**{k: v for k, v in z.items() if k in _ZEEMAN})
        kw = {k: v for k, v in e.items() if k in _EMITTER and k != "zeeman"}
        emitters.append(EmitterParams(zeeman=zm, **kw))

    for name, allowed in (("grid", _GRID), ("sweep", _SWEEP), ("readout", _READOUT)):
        if name in doc and _is_obj(doc[name], name, errors):
            _unknown(doc[name], allowed, f"{name}.", errors)

    if cavity is None:
        raise ConfigError(errors)
    config = SystemConfig(cavity, tuple(emitters), doc.get("b_field", 0.0),
                          doc.get("probe_power_note", "weak probe; linear response"))
    errors.extend(check(config))
    if errors:
        raise ConfigError(errors)
    return config


def load_document(path) -> Tuple[SystemConfig, Dict[str, Any]]:
    """Parse a JSON document; returns the validated config and the raw dict."""
    path = resolve_path(path)
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}"]) from exc
    return config_from_dict(doc), doc


def load_config(path) -> SystemConfig:
    return load_document(path)[0]


def config_to_dict(config: SystemConfig) -> Dict[str, Any]:
    d = asdict(config)
    d["emitters"] = list(d["emitters"])
    return d


def dump_config(config: SystemConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")


def readout_section(doc: Dict[str, Any], seed=None, trials=None):
    """``ReadoutParams`` from a ``readout`` section.

    Rates may be given directly or as mean counts per window; with
    ``target_fidelity`` the flip lifetime is calibrated to hit it.  Returns
    ``(params, info)`` where ``info`` records any calibration.
    """
    from .readout import ReadoutParams, calibrate_flip_lifetime, params_for_means

    sec = doc.get("readout")
    if sec is None:
        raise ConfigError(["readout: section missing from config"])
    errors = []
    _unknown(sec, _READOUT, "readout.", errors)
    if "window" not in sec:
        errors.append("readout.window: missing required key")
    by_mean = "mean_up" in sec or "mean_down" in sec
    if by_mean and not ("mean_up" in sec and "mean_down" in sec):
        errors.append("readout: mean_up and mean_down must be given together")
    if not by_mean and not ("rate_bright" in sec and "rate_dark" in sec):
        errors.append("readout: give rate_bright/rate_dark or mean_up/mean_down")
    if "flip_lifetime" not in sec and "target_fidelity" not in sec:
        errors.append("readout: give flip_lifetime or target_fidelity")
    if errors:
        raise ConfigError(errors)

    window = float(sec["window"])
    seed = int(sec.get("seed", 0) if seed is None else seed)
    trials = int(sec.get("trials", 100_000) if trials is None else trials)
    info = {}
    flip = sec.get("flip_lifetime")
    flip = math.inf if flip in ("inf", "Infinity") else flip
    if "target_fidelity" in sec:
        if not by_mean:
            raise ConfigError(["readout.target_fidelity: calibration needs mean_up/mean_down"])
        if flip is not None:
            info["nominal_flip_lifetime"] = float(flip)
        flip = calibrate_flip_lifetime(float(sec["target_fidelity"]), float(sec["mean_up"]),
                                       float(sec["mean_down"]), window)
        info["calibrated_flip_lifetime"] = flip
        info["target_fidelity"] = float(sec["target_fidelity"])
    if by_mean:
        params = params_for_means(float(sec["mean_up"]), float(sec["mean_down"]), float(flip),
                                  window, trials, seed)
    else:
        params = ReadoutParams(float(sec["rate_bright"]), float(sec["rate_dark"]), float(flip),
                               window, trials, seed)
    params.validate()
    return params, info
