"""Single-shot spin readout by photon counting.

A spin prepared bright transmits at ``rate_bright`` until it flips to the dark
state after an exponentially distributed time; a dark spin only produces
background counts at ``rate_dark``.  The dark state is never re-pumped within
the window.  Fidelity is the balanced mean of the two conditional success
probabilities.
"""

from __future__ import annotations

import csv
import json
import math
import numbers
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import integrate, stats
from scipy.optimize import brentq

from . import _kernels

FIDELITY_DEFINITION = "1 - (P(n < threshold | up) + P(n >= threshold | down)) / 2"

# trials per work unit; chunking never changes results, only scheduling
_CHUNK = 1 << 15


@dataclass(frozen=True)
class ReadoutParams:
    """Count rates in counts/ms, times in ms."""

    rate_bright: float
    rate_dark: float
    flip_lifetime: float
    window: float
    trials: int = 100_000
    seed: int = 0

    def check(self) -> list:
        errors = []
        for name in ("rate_bright", "rate_dark"):
            v = getattr(self, name)
            if not (isinstance(v, numbers.Real) and math.isfinite(v) and v >= 0):
                errors.append(f"readout.{name}: must be a finite rate >= 0, got {v!r}")
        if not (isinstance(self.window, numbers.Real) and math.isfinite(self.window) and self.window > 0):
            errors.append(f"readout.window: must be > 0, got {self.window!r}")
        if not (isinstance(self.flip_lifetime, numbers.Real) and self.flip_lifetime > 0):
            errors.append(f"readout.flip_lifetime: must be > 0 (inf allowed), got {self.flip_lifetime!r}")
        if not isinstance(self.trials, numbers.Integral) or isinstance(self.trials, bool) or self.trials < 1:
            errors.append(f"readout.trials: must be an integer >= 1, got {self.trials!r}")
        if not isinstance(self.seed, numbers.Integral) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            errors.append(f"readout.seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        return errors

    def validate(self) -> "ReadoutParams":
        errors = self.check()
        if errors:
            from .model import ConfigError
            raise ConfigError(errors)
        return self


@dataclass
class ReadoutResult:
    """Count histograms (index = photon number) and the derived threshold."""

    histogram_up: np.ndarray
    histogram_down: np.ndarray
    mean_up: float
    mean_down: float
    threshold: Optional[int] = None
    fidelity: Optional[float] = None
    bright_above_threshold: bool = True

    @property
    def trials(self) -> int:
        return int(self.histogram_up.sum())

    def standard_error(self) -> float:
        """Binomial standard error of the Monte-Carlo fidelity."""
        p_up, p_dn = conditional_success(self.histogram_up, self.histogram_down,
                                         self.threshold, self.bright_above_threshold)
        n_up, n_dn = self.histogram_up.sum(), self.histogram_down.sum()
        return 0.5 * math.sqrt(p_up * (1 - p_up) / n_up + p_dn * (1 - p_dn) / n_dn)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else ``CQED_SIM_THREADS``, else the machine's core count."""
    if threads is None:
        env = os.environ.get("CQED_SIM_THREADS", "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def _prep_key(seed: int, bright: bool) -> int:
    # distinct streams for the two preparations
    return _kernels.seed_key(seed) ^ (0 if bright else 0x5DEECE66D)


def _counts(params: ReadoutParams, bright: bool, threads: int) -> np.ndarray:
    key = _prep_key(params.seed, bright)
    bounds = [(s, min(s + _CHUNK, params.trials)) for s in range(0, params.trials, _CHUNK)]
    args = (bright, float(params.rate_bright), float(params.rate_dark),
            float(params.flip_lifetime), float(params.window))

    def run(span):
        return _kernels.photon_counts(key, span[0], span[1], *args)

    if threads == 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    return np.concatenate(parts)


def simulate_trial(params: ReadoutParams, initial_spin: str, trial_index: int) -> int:
    """Photon count of a single trial; ``trial_index`` selects the random stream."""
    if initial_spin not in ("up", "down"):
        raise ValueError(f"initial spin must be 'up' or 'down', got {initial_spin!r}")
    key = _prep_key(params.seed, initial_spin == "up")
    out = _kernels.photon_counts(key, trial_index, trial_index + 1, initial_spin == "up",
                                 float(params.rate_bright), float(params.rate_dark),
                                 float(params.flip_lifetime), float(params.window))
    return int(out[0])


def count_histograms(params: ReadoutParams, threads: Optional[int] = None) -> ReadoutResult:
    """Run ``trials`` shots per preparation and histogram the counts."""
    params.validate()
    threads = resolve_threads(threads)
    up = _counts(params, True, threads)
    down = _counts(params, False, threads)
    size = int(max(up.max(), down.max())) + 1
    return ReadoutResult(np.bincount(up, minlength=size), np.bincount(down, minlength=size),
                         float(up.mean()), float(down.mean()))


def _cumulative_below(h: np.ndarray) -> np.ndarray:
    """``out[t] = sum(h[:t])`` for ``t = 0 .. len(h)``."""
    return np.concatenate([np.zeros(1, dtype=h.dtype), np.cumsum(h)])


def threshold_scan(histogram_up, histogram_down):
    """Fidelity for every integer threshold, for both orientations.

    Integer histograms are scored with exact integer arithmetic so that ties
    are decided exactly.
    """
    hu = np.asarray(histogram_up)
    hd = np.asarray(histogram_down)
    if hu.sum() <= 0 or hd.sum() <= 0:
        raise ValueError("both histograms need positive total weight")
    size = max(len(hu), len(hd))
    hu = np.pad(hu, (0, size - len(hu)))
    hd = np.pad(hd, (0, size - len(hd)))
    exact = np.issubdtype(hu.dtype, np.integer) and np.issubdtype(hd.dtype, np.integer)
    if exact:
        hu = hu.astype(object)
        hd = hd.astype(object)
        nu, nd = int(hu.sum()), int(hd.sum())
        cu = _cumulative_below(hu)
        cd = _cumulative_below(hd)
        # errors in units of 1 / (nu * nd)
        err_above = cu * nd + (nd - cd) * nu
        err_below = (nu - cu) * nd + cd * nu
        scale = 2 * nu * nd
        return err_above, err_below, scale
    hu = hu.astype(float) / hu.sum()
    hd = hd.astype(float) / hd.sum()
    cu = _cumulative_below(hu)
    cd = _cumulative_below(hd)
    return cu + (1.0 - cd), (1.0 - cu) + cd, 2.0


def _best(histogram_up, histogram_down):
    err_above, err_below, scale = threshold_scan(histogram_up, histogram_down)
    ia = int(np.argmin(err_above))
    ib = int(np.argmin(err_below))
    if err_below[ib] < err_above[ia]:
        return ib, 1.0 - float(err_below[ib]) / scale, False
    return ia, 1.0 - float(err_above[ia]) / scale, True


def optimal_threshold(histogram_up, histogram_down):
    """Integer threshold maximizing the balanced fidelity.

    Up is declared for counts ``>= threshold`` (the orientation flips when
    the dark histogram sits higher).  Ties go to the smaller threshold.
    """
    theta, fid, _ = _best(histogram_up, histogram_down)
    return theta, fid


def conditional_success(histogram_up, histogram_down, threshold, bright_above=True):
    hu = np.asarray(histogram_up, dtype=float)
    hd = np.asarray(histogram_down, dtype=float)
    below_u = hu[:threshold].sum() / hu.sum()
    below_d = hd[:threshold].sum() / hd.sum()
    if bright_above:
        return 1.0 - below_u, below_d
    return below_u, 1.0 - below_d


def simulate_readout(params: ReadoutParams, threads: Optional[int] = None) -> ReadoutResult:
    """Monte-Carlo histograms plus optimal threshold and fidelity."""
    res = count_histograms(params, threads)
    theta, fid, above = _best(res.histogram_up, res.histogram_down)
    res.threshold, res.fidelity, res.bright_above_threshold = theta, fid, above
    return res


# ---------------------------------------------------------------------------
# semi-analytic oracle


def _count_cutoff(params: ReadoutParams) -> int:
    top = max(params.rate_bright, params.rate_dark) * params.window
    return int(math.ceil(top + 15.0 * math.sqrt(top) + 40))


def count_distributions(params: ReadoutParams, n_max: Optional[int] = None):
    """Exact count probabilities for both preparations.

    The flip time is marginalized by adaptive quadrature over its exponential
    density on ``[0, window]``; flips after the window add a pure Poisson term.
    """
    params.validate()
    n = np.arange(_count_cutoff(params) if n_max is None else n_max)
    rb, rd, tau, w = params.rate_bright, params.rate_dark, params.flip_lifetime, params.window
    down = stats.poisson.pmf(n, rd * w)
    survive = math.exp(-w / tau)
    up = survive * stats.poisson.pmf(n, rb * w)
    if math.isfinite(tau):
        def density(t):
            return stats.poisson.pmf(n, rb * t + rd * (w - t)) * math.exp(-t / tau) / tau
        flipped, _ = integrate.quad_vec(density, 0.0, w, epsabs=1e-13, epsrel=1e-12, norm="max")
        up = up + flipped
    return up, down


def semi_analytic_fidelity(params: ReadoutParams) -> float:
    up, down = count_distributions(params)
    return _best(up, down)[1]


def semi_analytic_readout(params: ReadoutParams):
    """``(threshold, fidelity)`` of the exact count distributions."""
    up, down = count_distributions(params)
    theta, fid, _ = _best(up, down)
    return theta, fid


def bright_rate_for_mean(mean_up: float, rate_dark: float, flip_lifetime: float, window: float) -> float:
    """Bright-state rate that yields ``mean_up`` counts given the flip model."""
    if math.isinf(flip_lifetime):
        lit = window
    else:
        lit = flip_lifetime * -math.expm1(-window / flip_lifetime)
    return (mean_up - rate_dark * (window - lit)) / lit


def params_for_means(mean_up: float, mean_down: float, flip_lifetime: float, window: float,
                     trials: int = 100_000, seed: int = 0) -> ReadoutParams:
    """Rates that reproduce the given mean counts per window."""
    rd = mean_down / window
    rb = bright_rate_for_mean(mean_up, rd, flip_lifetime, window)
    if rb < 0:
        raise ValueError("mean counts are inconsistent with the flip lifetime")
    return ReadoutParams(rb, rd, flip_lifetime, window, trials, seed)


def calibrate_flip_lifetime(target_fidelity: float, mean_up: float, mean_down: float,
                            window: float, bracket=(0.5, 1e4)) -> float:
    """Flip lifetime at which the semi-analytic fidelity hits ``target_fidelity``.

    Rates are re-derived at every trial lifetime so the mean counts stay fixed.
    """
    def excess(tau):
        return semi_analytic_fidelity(params_for_means(mean_up, mean_down, tau, window)) - target_fidelity

    lo, hi = bracket
    if excess(lo) > 0 or excess(hi) < 0:
        raise ValueError(f"target fidelity {target_fidelity} not reachable within lifetimes {bracket} ms")
    return brentq(excess, lo, hi, xtol=1e-10, rtol=1e-12)


def poisson_fidelity(mean_up: float, mean_down: float):
    """Two-Poisson fidelity from exact tail sums (no flips, no sampling)."""
    top = max(mean_up, mean_down)
    n = np.arange(int(math.ceil(top + 15 * math.sqrt(top) + 40)))
    cu = stats.poisson.cdf(n - 1, mean_up)    # P(N < n | up)
    sd = stats.poisson.sf(n - 1, mean_down)   # P(N >= n | down)
    fid = 1.0 - 0.5 * (cu + sd)
    k = int(np.argmax(fid))
    return k, float(fid[k])


# ---------------------------------------------------------------------------
# export


def write_readout_json(path, params: ReadoutParams, result: ReadoutResult, extra=None) -> None:
    doc = {
        "params": asdict(params),
        "threshold": result.threshold,
        "fidelity": result.fidelity,
        "fidelity_definition": FIDELITY_DEFINITION,
        "bright_above_threshold": result.bright_above_threshold,
        "mean_up": result.mean_up,
        "mean_down": result.mean_down,
    }
    if math.isinf(params.flip_lifetime):
        doc["params"]["flip_lifetime"] = "inf"
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_histogram_csv(path, result: ReadoutResult) -> None:
    size = max(len(result.histogram_up), len(result.histogram_down))
    hu = np.pad(result.histogram_up, (0, size - len(result.histogram_up)))
    hd = np.pad(result.histogram_down, (0, size - len(result.histogram_down)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["count", "freq_up", "freq_down"])
        for k in range(size):
            w.writerow([k, int(hu[k]), int(hd[k])])
