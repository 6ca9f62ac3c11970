"""Least-squares extraction of cavity-QED parameters from transmission data.

The fitted intensity is ``A^2 |t(w) + b e^{i phi}|^2``: the physical
transmission plus a coherent background added in amplitude, scaled by an
overall amplitude.  Free parameters are mapped onto the unit cube of their
bounds (logarithmically for strictly positive ones) and minimized with a
multi-start Nelder-Mead simplex.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .model import ConfigError, SystemConfig, contributing_transitions, validate

_EMITTER_PARAM = re.compile(r"^(g|omega|gamma)(\d+)$")
_GLOBAL_PARAMS = ("omega_c", "kappa", "A", "b", "phi")
_POSITIVE = {"g", "gamma", "kappa", "A"}


def _kind(name: str) -> str:
    m = _EMITTER_PARAM.match(name)
    return m.group(1) if m else name


class SpectrumModel:
    """Transmission model around a base configuration.

    Parameter names: ``g<j>``, ``omega<j>``, ``gamma<j>`` for emitter ``j`` of
    the configuration, plus ``omega_c``, ``kappa``, ``A``, ``b``, ``phi``.
    When ``kappa`` varies the port rates keep their fractions of it.
    """

    def __init__(self, config: SystemConfig):
        validate(config)
        self.config = config
        tr = contributing_transitions(config)
        self._slot = {int(j): k for k, j in enumerate(tr.emitter_index)}
        cav = config.cavity
        self._in_frac = cav.kappa_in / cav.kappa
        self._out_frac = cav.kappa_out / cav.kappa
        base = {"omega_c": float(cav.omega_c), "kappa": float(cav.kappa),
                "A": 1.0, "b": 0.0, "phi": 0.0}
        for j, k in self._slot.items():
            base[f"g{j}"] = float(tr.g[k])
            base[f"omega{j}"] = float(tr.omega[k])
            base[f"gamma{j}"] = float(tr.gamma[k])
        self.base = base
        self.names = tuple(base)

    def check_name(self, name: str) -> None:
        if name not in self.base:
            m = _EMITTER_PARAM.match(name)
            if m and int(m.group(2)) not in self._slot:
                raise KeyError(f"parameter {name!r} refers to an inactive or missing emitter")
            raise KeyError(f"unknown fit parameter {name!r}")

    def full(self, params: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
        p = dict(self.base)
        for k, v in (params or {}).items():
            self.check_name(k)
            p[k] = float(v)
        return p

    def intensity(self, omega, params: Optional[Mapping[str, float]] = None) -> np.ndarray:
        p = self.full(params)
        n = len(self._slot)
        om = np.empty(n)
        g = np.empty(n)
        ga = np.empty(n)
        for j, k in self._slot.items():
            om[k], g[k], ga[k] = p[f"omega{j}"], p[f"g{j}"], p[f"gamma{j}"]
        kappa = p["kappa"]
        omega = np.ascontiguousarray(omega, dtype=np.float64)
        t = _kernels.transmission(omega, p["omega_c"], kappa, kappa * self._in_frac,
                                  kappa * self._out_frac, om, g, ga)
        if p["b"] != 0.0:
            t = t + p["b"] * np.exp(1j * p["phi"])
        return p["A"] ** 2 * (t.real ** 2 + t.imag ** 2)


def model_T(omega_p, params: Optional[Mapping[str, float]], config: SystemConfig):
    """``A^2 |t(omega_p) + b e^{i phi}|^2`` for parameters overriding ``config``."""
    out = SpectrumModel(config).intensity(np.atleast_1d(np.asarray(omega_p, dtype=float)), params)
    return float(out[0]) if np.ndim(omega_p) == 0 else out


@dataclass
class FitProblem:
    """Data, model and search box for one fit.

    ``bounds`` must give a finite interval for every free parameter and
    ``initial`` an in-bounds starting value; everything else is fixed at the
    values in ``config``.
    """

    omega: np.ndarray
    T: np.ndarray
    config: SystemConfig
    free: Tuple[str, ...]
    bounds: Dict[str, Tuple[float, float]]
    initial: Dict[str, float]
    restarts: int = 16
    seed: int = 0
    max_iter: int = 20_000
    fixed: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.ascontiguousarray(self.omega, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        self.free = tuple(self.free)

    def check(self) -> list:
        errors = []
        if self.omega.shape != self.T.shape or self.omega.ndim != 1:
            errors.append("data: omega and T must be 1-D arrays of equal length")
        if len(self.free) == 0:
            errors.append("free: at least one free parameter is required")
        if len(set(self.free)) != len(self.free):
            errors.append("free: duplicate parameter names")
        if self.omega.size < 3 * len(self.free):
            errors.append(f"data: need >= {3 * len(self.free)} points for {len(self.free)} free "
                          f"parameters, got {self.omega.size}")
        model = SpectrumModel(self.config)
        for name in list(self.free) + list(self.fixed):
            try:
                model.check_name(name)
            except KeyError as exc:
                errors.append(f"free.{name}: {exc.args[0]}")
        for name in self.free:
            if name not in self.bounds:
                errors.append(f"bounds.{name}: missing")
                continue
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                errors.append(f"bounds.{name}: need finite lo < hi, got ({lo}, {hi})")
                continue
            if _kind(name) in _POSITIVE and lo <= 0:
                errors.append(f"bounds.{name}: lower bound must be > 0 for a positive parameter")
            x0 = self.initial.get(name)
            if x0 is None or not lo <= x0 <= hi:
                errors.append(f"initial.{name}: must lie in [{lo}, {hi}], got {x0}")
        return errors


@dataclass
class FitResult:
    best: Dict[str, float]
    rss: float
    iterations: int
    converged: bool
    restarts_used: int
    initial_rss: float = float("nan")

    def to_json(self) -> dict:
        return {"best": self.best, "rss": self.rss, "iterations": self.iterations,
                "converged": self.converged, "restarts_used": self.restarts_used,
                "initial_rss": self.initial_rss}


class _Objective:
    def __init__(self, problem: FitProblem):
        self.problem = problem
        self.model = SpectrumModel(problem.config)
        self.fixed = dict(problem.fixed)
        self.log = np.array([_kind(n) in _POSITIVE for n in problem.free])
        lo = np.array([problem.bounds[n][0] for n in problem.free], dtype=float)
        hi = np.array([problem.bounds[n][1] for n in problem.free], dtype=float)
        self.lo = np.where(self.log, np.log(np.where(self.log, lo, 1.0)), lo)
        self.hi = np.where(self.log, np.log(np.where(self.log, hi, 1.0)), hi)

    def to_params(self, u) -> Dict[str, float]:
        y = self.lo + np.clip(u, 0.0, 1.0) * (self.hi - self.lo)
        x = np.where(self.log, np.exp(y), y)
        p = dict(self.fixed)
        p.update({n: float(v) for n, v in zip(self.problem.free, x)})
        return p

    def to_unit(self, params: Mapping[str, float]) -> np.ndarray:
        x = np.array([params[n] for n in self.problem.free], dtype=float)
        y = np.where(self.log, np.log(np.where(self.log, x, 1.0)), x)
        return (y - self.lo) / (self.hi - self.lo)

    def __call__(self, u) -> float:
        r = self.model.intensity(self.problem.omega, self.to_params(u)) - self.problem.T
        return float(r @ r)


def residual(problem: FitProblem, params: Mapping[str, float]) -> float:
    """Residual sum of squares of ``params`` (unlisted parameters stay fixed)."""
    p = dict(problem.fixed)
    p.update(params)
    r = SpectrumModel(problem.config).intensity(problem.omega, p) - problem.T
    return float(r @ r)


def _simplex(u0: np.ndarray, step: float = 0.1) -> np.ndarray:
    n = len(u0)
    sim = np.tile(u0, (n + 1, 1))
    for k in range(n):
        sim[k + 1, k] += step if u0[k] + step <= 1.0 else -step
    return sim


def _nelder_mead(obj: _Objective, u0: np.ndarray, max_iter: int):
    res = minimize(obj, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(u0),
                   options={"initial_simplex": _simplex(u0), "xatol": 1e-6, "fatol": np.inf,
                            "maxiter": max_iter, "maxfev": 2 * max_iter, "adaptive": len(u0) > 4})
    return res.x, float(res.fun), int(res.nit), bool(res.success)


def fit(problem: FitProblem) -> FitResult:
    """Multi-start Nelder-Mead fit.

    Start 0 is the supplied initial vector; the remaining ``restarts`` starts
    are drawn uniformly inside the bounds from ``seed``.  The best run is
    re-started once from its optimum to shake off a collapsed simplex.
    ``converged`` means the final simplex spans less than 1e-6 of every
    bound width.
    """
    errors = problem.check()
    if errors:
        raise ConfigError(errors)
    obj = _Objective(problem)
    n = len(problem.free)
    u_init = obj.to_unit(problem.initial)
    if np.any(u_init < 0) or np.any(u_init > 1):
        raise ConfigError(["initial: no in-bounds start possible"])
    rng = np.random.default_rng(problem.seed)
    starts = [u_init] + [rng.uniform(0.0, 1.0, n) for _ in range(problem.restarts)]

    initial_rss = obj(u_init)
    results = []
    iterations = 0
    for u0 in starts:
        u, f, nit, ok = _nelder_mead(obj, u0, problem.max_iter)
        iterations += nit
        results.append((f, u, ok))
    k = int(np.argmin([r[0] for r in results]))
    f, u, ok = results[k]

    u2, f2, nit, ok2 = _nelder_mead(obj, u, problem.max_iter)
    iterations += nit
    if f2 <= f:
        f, u, ok = f2, u2, ok2
    if f > initial_rss:
        f, u, ok = initial_rss, u_init, False

    best = {name: obj.to_params(u)[name] for name in problem.free}
    return FitResult(best, f, iterations, ok, len(starts), initial_rss)


# ---------------------------------------------------------------------------
# IO


def read_data_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read ``omega_GHz,T`` columns."""
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    names = data.dtype.names or ()
    if "omega_GHz" not in names or "T" not in names:
        raise ValueError(f"{path}: expected header 'omega_GHz,T', got {names}")
    return np.asarray(data["omega_GHz"], dtype=float), np.asarray(data["T"], dtype=float)


_PROBLEM_KEYS = {"free", "bounds", "initial", "restarts", "seed", "max_iter", "fixed", "description"}


def problem_from_json(doc: Mapping, omega, T, config: SystemConfig) -> FitProblem:
    unknown = set(doc) - _PROBLEM_KEYS
    if unknown:
        raise ConfigError([f"problem.{k}: unknown key" for k in sorted(unknown)])
    missing = [k for k in ("free", "bounds", "initial") if k not in doc]
    if missing:
        raise ConfigError([f"problem.{k}: missing" for k in missing])
    return FitProblem(
        omega=omega, T=T, config=config, free=tuple(doc["free"]),
        bounds={k: (float(v[0]), float(v[1])) for k, v in doc["bounds"].items()},
        initial={k: float(v) for k, v in doc["initial"].items()},
        restarts=int(doc.get("restarts", 16)), seed=int(doc.get("seed", 0)),
        max_iter=int(doc.get("max_iter", 20_000)),
        fixed={k: float(v) for k, v in doc.get("fixed", {}).items()})


def write_fit_json(path, result: FitResult) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_json(), fh, indent=2)
        fh.write("\n")
