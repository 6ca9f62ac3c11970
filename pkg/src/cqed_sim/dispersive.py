"""Cavity-mediated emitter-emitter coupling and collective modes.

Adiabatically eliminating the cavity at a reference frequency ``w_r`` leaves
an N x N non-Hermitian matrix over the probe-coupled transitions::

    M_jk = (w_j - i gamma_j / 2) delta_jk - g_j g_k (D + i kappa/2) / (D^2 + kappa^2/4)

with ``D = w_c - w_r``.  Its eigenvalues are complex mode frequencies: the real
part is the mode frequency and ``-2 Im`` the mode FWHM.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .model import NumericalError, SystemConfig, Transitions, contributing_transitions, validate
from .spectrum import transmission_spectrum


class EigenSolverError(NumericalError):
    def __init__(self, message, matrix):
        self.matrix = np.array(matrix)
        super().__init__(f"{message}\nmatrix:\n{np.array2string(self.matrix, precision=17)}")


def exchange_rate(g1: float, g2: float, delta: float, kappa: float) -> float:
    """Coherent flip-flop rate ``g1 g2 D / (D^2 + kappa^2/4)``.

    Reduces to ``g^2 / D`` for ``|D| >> kappa``; the sign follows ``D``.
    """
    if delta == 0:
        raise ValueError("exchange rate is undefined at zero detuning; "
                         "diagonalize the full effective matrix instead")
    return g1 * g2 * delta / (delta * delta + 0.25 * kappa * kappa)


def default_reference(tr: Transitions) -> float:
    """g^2-weighted mean transition frequency (plain mean if all g vanish)."""
    w = tr.g ** 2
    if w.sum() > 0:
        return float(np.sum(w * tr.omega) / w.sum())
    return float(np.mean(tr.omega))


def effective_system(config: SystemConfig, reference: Optional[float] = None, spins=None):
    """Effective matrix together with the transitions it is built on."""
    validate(config)
    tr = contributing_transitions(config, spins)
    if len(tr) == 0:
        raise ValueError("no probe-coupled transitions: every emitter is inactive")
    if reference is None:
        reference = default_reference(tr)
    cav = config.cavity
    d = cav.omega_c - reference
    chi = (d + 0.5j * cav.kappa) / (d * d + 0.25 * cav.kappa * cav.kappa)
    m = -np.outer(tr.g, tr.g) * chi
    m[np.diag_indices_from(m)] += tr.omega - 0.5j * tr.gamma
    return m, tr


def effective_matrix(config: SystemConfig, reference: Optional[float] = None) -> np.ndarray:
    return effective_system(config, reference)[0]


@dataclass(frozen=True)
class CollectiveModes:
    """Eigen-decomposition of an effective matrix, sorted by mode frequency.

    ``eigenvectors[k]`` is the normalized amplitude vector of mode ``k``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: tuple
    coupling_weights: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def linewidths(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    def __len__(self):
        return len(self.eigenvalues)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    mag = np.abs(v)
    k = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-12))[0])
    return v * (abs(v[k]) / v[k])


def label_modes(weights: np.ndarray) -> tuple:
    """Superradiant/subradiant/mixed labels from cavity-coupling weights.

    The strongest-coupled mode is superradiant unless another mode's weight is
    within 10% of it, in which case all such modes are mixed.
    """
    if len(weights) == 0:
        return ()
    top = weights.max()
    if top <= 0:
        return ("mixed",) * len(weights) if len(weights) > 1 else ("subradiant",)
    near = weights >= 0.9 * top
    if near.sum() > 1:
        return tuple("mixed" if n else "subradiant" for n in near)
    return tuple("superradiant" if n else "subradiant" for n in near)


def collective_modes(matrix, couplings=None) -> CollectiveModes:
    """Diagonalize ``matrix``; label modes by ``|sum_j g_j v_j|^2``.

    ``couplings`` defaults to equal unit couplings.
    """
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"need a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise EigenSolverError("matrix has non-finite entries", m)
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver failed to converge: {exc}", m) from exc

    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    vecs = vecs[:, order].T
    vecs = np.array([_fix_phase(v / np.linalg.norm(v)) for v in vecs]).reshape(len(vals), m.shape[0])

    g = np.ones(m.shape[0]) if couplings is None else np.asarray(couplings, dtype=float)
    weights = np.abs(vecs @ g) ** 2
    return CollectiveModes(vals, vecs, label_modes(weights), weights)


def modes_for(config: SystemConfig, reference: Optional[float] = None) -> CollectiveModes:
    m, tr = effective_system(config, reference)
    return collective_modes(m, tr.g)


# ---------------------------------------------------------------------------
# magnetic-field sweeps


@dataclass
class SweepResult:
    """Transmission map and tracked mode branches versus field.

    ``intensity`` has shape ``(len(b_values), len(probe_grid))``; ``branches``
    holds the complex mode frequency of every tracked branch at each field.
    """

    b_values: np.ndarray
    probe_grid: np.ndarray
    intensity: np.ndarray
    branches: np.ndarray
    branch_vectors: np.ndarray
    min_gap: Optional[float]
    crossing_field: Optional[float]
    gap_pair: Optional[tuple]

    def summary(self) -> dict:
        tables = []
        for k in range(self.branches.shape[1]):
            tables.append({
                "branch": k,
                "B_kG": [float(b) for b in self.b_values],
                "omega_GHz": [float(x) for x in self.branches[:, k].real],
                "fwhm_GHz": [float(x) for x in -2.0 * self.branches[:, k].imag],
            })
        return {
            "crossing_field": self.crossing_field,
            "min_gap_GHz": self.min_gap,
            "gap_branches": list(self.gap_pair) if self.gap_pair is not None else None,
            "branch_tables": tables,
        }


def _components(spin_prep) -> List[tuple]:
    if len(spin_prep) and isinstance(spin_prep[0], (list, tuple)):
        return [tuple(c) for c in spin_prep]
    return [tuple(spin_prep)]


def _modes_at(config: SystemConfig, b: float, components, reference):
    """Complex frequencies and block-embedded eigenvectors of every component."""
    n = len(config.emitters)
    cfg_b = replace(config, b_field=float(b))
    vals, vecs = [], []
    for c, comp in enumerate(components):
        if any(s == "unpolarized" for s in comp):
            raise ValueError("sweep spin preparations must be definite (up, down or None)")
        cfg = cfg_b.with_spins(comp)
        m, tr = effective_system(cfg, reference)
        modes = collective_modes(m, tr.g)
        for val, v in zip(modes.eigenvalues, modes.eigenvectors):
            full = np.zeros(n * len(components), dtype=np.complex128)
            full[c * n + tr.emitter_index] = v
            vals.append(val)
            vecs.append(full)
    return np.array(vals), np.array(vecs)


def _match(prev_vecs, vals, vecs):
    overlap = np.abs(np.conj(prev_vecs) @ vecs.T)
    rows, cols = linear_sum_assignment(-overlap)
    perm = cols[np.argsort(rows)]
    return vals[perm], vecs[perm]


def field_sweep(config: SystemConfig, b_values, spin_prep, probe_grid,
                reference: Optional[float] = None) -> SweepResult:
    """Sweep the magnetic field, recomputing spectra and collective modes.

    ``spin_prep`` is one per-emitter assignment (``"up"``, ``"down"`` or
    ``None`` for an emitter not addressed by the probe), or a list of such
    assignments forming a composite: component spectra are summed and their
    modes pooled.  Branches are followed by eigenvector overlap, so a true
    crossing is not mistaken for an avoided one.  ``reference`` fixes the
    elimination frequency; by default it follows the weighted mean transition.
    """
    validate(config)
    b_values = np.asarray(b_values, dtype=float)
    if b_values.ndim != 1 or b_values.size == 0:
        raise ValueError("b_values must be a non-empty 1-D sequence")
    if np.any(b_values < 0):
        raise ValueError("field magnitudes must be non-negative")
    components = _components(spin_prep)
    for comp in components:
        if len(comp) != len(config.emitters):
            raise ValueError(f"spin_prep entry {comp!r} does not cover all {len(config.emitters)} emitters")
    grid = np.asarray(probe_grid, dtype=float)

    intensity = np.empty((b_values.size, grid.size))
    all_vals, all_vecs = [], []
    prev = None
    for i, b in enumerate(b_values):
        cfg_b = replace(config, b_field=float(b))
        row = np.zeros(grid.size)
        for comp in components:
            row += transmission_spectrum(grid, cfg_b.with_spins(comp)).intensity
        intensity[i] = row

        vals, vecs = _modes_at(config, b, components, reference)
        if prev is None:
            order = np.argsort(vals.real, kind="stable")
            vals, vecs = vals[order], vecs[order]
        else:
            vals, vecs = _match(prev, vals, vecs)
        all_vals.append(vals)
        all_vecs.append(vecs)
        prev = vecs

    branches = np.array(all_vals)
    vectors = np.array(all_vecs)
    gap, where, pair = _min_gap(config, b_values, branches, vectors, components, reference)
    return SweepResult(b_values, grid, intensity, branches, vectors, gap, where, pair)


def _min_gap(config, b_values, branches, vectors, components, reference):
    nb = branches.shape[1]
    if nb < 2:
        return None, None, None
    best = None
    for a in range(nb):
        for c in range(a + 1, nb):
            d = np.abs(branches[:, a].real - branches[:, c].real)
            i = int(np.argmin(d))
            if best is None or d[i] < best[0]:
                best = (d[i], a, c, i)
    _, a, c, i = best
    diff = branches[:, a].real - branches[:, c].real

    def signed(b, ref_idx):
        vals, vecs = _modes_at(config, b, components, reference)
        vals, _ = _match(vectors[ref_idx], vals, vecs)
        return float(vals[a].real - vals[c].real)

    if diff[i] == 0.0:
        return 0.0, float(b_values[i]), (a, c)

    n = len(b_values)
    for j in (i - 1, i):
        if 0 <= j < n - 1 and np.sign(diff[j]) != np.sign(diff[j + 1]):
            lo, hi = b_values[j], b_values[j + 1]
            root = brentq(lambda b: signed(b, j), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return abs(signed(root, j)), float(root), (a, c)

    if n == 1:
        return float(abs(diff[0])), float(b_values[0]), (a, c)
    lo = b_values[max(i - 1, 0)]
    hi = b_values[min(i + 1, n - 1)]
    res = minimize_scalar(lambda b: abs(signed(b, i)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(hi - lo, 1e-300)})
    if res.fun < abs(diff[i]):
        return float(res.fun), float(res.x), (a, c)
    return float(abs(diff[i])), float(b_values[i]), (a, c)


def write_sweep_csv(path, result: SweepResult) -> None:
    """Long-format ``B_kG,omega_GHz,T`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B_kG", "omega_GHz", "T"])
        for b, row in zip(result.b_values, result.intensity):
            for om, t in zip(result.probe_grid, row):
                w.writerow([repr(float(b)), repr(float(om)), repr(float(t))])


def write_sweep_summary(path, result: SweepResult) -> None:
    with open(path, "w") as fh:
        json.dump(result.summary(), fh, indent=2)
        fh.write("\n")
