"""Weak-probe transmission of N emitters coupled to one cavity mode.

The closed form is the input-output result for the linearized system

    t(w) = sqrt(kappa_in kappa_out) /
           [ i(w_c - w) + kappa/2 + sum_j g_j^2 / (i(w_j - w) + gamma_j/2) ]

and :func:`steady_state_oracle` solves the same physics as an explicit
(N+1)-dimensional linear system, without using the formula above.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (ConfigError, NumericalError, SystemConfig, contributing_transitions,
                    spin_configurations, transition_frequency, validate)


class SingularSystemError(NumericalError):
    """The steady-state equations have an exactly vanishing pivot."""

    def __init__(self, message, emitter_index=None):
        self.emitter_index = emitter_index
        super().__init__(message)


@dataclass(frozen=True)
class TransmissionSpectrum:
    """Transmission over a probe grid.

    For a classical spin mixture the amplitude is not defined and is stored as
    NaN; ``intensity`` is then the population-weighted mean of ``|t|^2``.
    """

    probe_grid: np.ndarray
    amplitude: np.ndarray
    intensity: np.ndarray

    def __len__(self):
        return len(self.probe_grid)


def _pure_spins(config: SystemConfig):
    branches = spin_configurations(config)
    if len(branches) != 1:
        return None
    return branches[0][1]


def _amplitudes(grid: np.ndarray, config: SystemConfig, spins) -> np.ndarray:
    cav = config.cavity
    tr = contributing_transitions(config, spins)
    return _kernels.transmission(grid, float(cav.omega_c), float(cav.kappa),
                                 float(cav.kappa_in), float(cav.kappa_out),
                                 tr.omega, tr.g, tr.gamma)


def transmission_amplitude(omega_p: float, config: SystemConfig) -> complex:
    """Complex transmission at one probe frequency for a definite spin state."""
    validate(config)
    spins = _pure_spins(config)
    if spins is None:
        raise ValueError("amplitude is undefined for an unpolarized (mixed) spin configuration; "
                         "use transmission_spectrum for the averaged intensity")
    return complex(_amplitudes(np.array([float(omega_p)]), config, spins)[0])


def transmission_spectrum(grid, config: SystemConfig) -> TransmissionSpectrum:
    """Evaluate the transmission on a strictly increasing probe grid."""
    validate(config)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("probe grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("probe grid must be strictly increasing")
    grid = np.ascontiguousarray(grid)

    branches = spin_configurations(config)
    if len(branches) == 1:
        t = _amplitudes(grid, config, branches[0][1])
        return TransmissionSpectrum(grid, t, t.real * t.real + t.imag * t.imag)

    intensity = np.zeros(grid.shape)
    for weight, spins in branches:
        a = _amplitudes(grid, config, spins)
        intensity += weight * (a.real * a.real + a.imag * a.imag)
    amplitude = np.full(grid.shape, np.nan + 1j * np.nan)
    return TransmissionSpectrum(grid, amplitude, intensity)


def steady_state_matrix(omega_p: float, config: SystemConfig, spins=None):
    """Linear system ``A x = b`` for the steady state ``x = (alpha, s_1..s_N)``.

    Rows come from setting the mean-field equations of motion to zero in the
    frame rotating at ``omega_p``::

        0 = -(i(w_c - w_p) + kappa/2) alpha - i sum_j g_j s_j + sqrt(kappa_in)
        0 = -(i(w_j - w_p) + gamma_j/2) s_j - i g_j alpha
    """
    cav = config.cavity
    tr = contributing_transitions(config, spins)
    n = len(tr)
    a = np.zeros((n + 1, n + 1), dtype=np.complex128)
    b = np.zeros(n + 1, dtype=np.complex128)
    a[0, 0] = 1j * (cav.omega_c - omega_p) + 0.5 * cav.kappa
    a[0, 1:] = 1j * tr.g
    a[1:, 0] = 1j * tr.g
    a[1:, 1:] = np.diag(1j * (tr.omega - omega_p) + 0.5 * tr.gamma)
    b[0] = np.sqrt(cav.kappa_in)
    return a, b, tr


def transmission_poles(config: SystemConfig, spins=None) -> np.ndarray:
    """Complex resonance frequencies of ``t``: real part is the position, ``-2 imag`` the FWHM.

    These are the eigenvalues of the full cavity-plus-emitter matrix, sorted by
    real part.  The |t|^2 maxima can sit noticeably off these positions, since
    every emitter also puts a transmission zero at its bare frequency.
    """
    if spins is None:
        spins = _pure_spins(config)
        if spins is None:
            raise ValueError("an unpolarized mixture has no single set of poles; pass spins")
    a, _, _ = steady_state_matrix(0.0, config, spins)
    lam = -1j * np.linalg.eigvals(a)
    return lam[np.lexsort((lam.imag, lam.real))]


def steady_state_oracle(omega_p: float, config: SystemConfig) -> complex:
    """Transmission from a direct linear solve of the steady-state equations."""
    validate(config)
    spins = _pure_spins(config)
    if spins is None:
        raise ValueError("the steady-state oracle needs a definite spin configuration")
    a, b, tr = steady_state_matrix(float(omega_p), config, spins)
    if a[0, 0] == 0:
        raise SingularSystemError("cavity row is singular (kappa = 0 on resonance)")
    for j in range(len(tr)):
        if a[j + 1, j + 1] == 0:
            idx = int(tr.emitter_index[j])
            raise SingularSystemError(
                f"emitter {idx} has a zero steady-state denominator at probe {omega_p} GHz", idx)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"steady-state system is singular: {exc}") from exc
    return complex(np.sqrt(config.cavity.kappa_out) * x[0])


def extinction(config: SystemConfig, emitter_index: int) -> float:
    """Fractional transmission dip ``1 - T_with / T_without`` at one emitter's line.

    ``T_without`` deactivates only the referenced emitter.
    """
    validate(config)
    n = len(config.emitters)
    if not 0 <= emitter_index < n:
        raise IndexError(f"emitter index {emitter_index} out of range for {n} emitters")
    em = config.emitters[emitter_index]
    if not em.active:
        raise ValueError(f"emitter {emitter_index} is inactive")
    if em.prepared_spin == "unpolarized":
        raise ValueError(f"emitter {emitter_index} is unpolarized; prepare a definite spin")
    omega = transition_frequency(em, config.b_field)
    probe = np.array([omega])
    t_with = transmission_spectrum(probe, config).intensity[0]
    t_without = transmission_spectrum(probe, config.with_emitter(emitter_index, active=False)).intensity[0]
    if t_without == 0:
        raise ConfigError([f"emitters[{emitter_index}]: reference transmission is zero"])
    return float(1.0 - t_with / t_without)


def write_spectrum_csv(path, spectrum: TransmissionSpectrum) -> None:
    """Write ``omega_GHz,re_t,im_t,T`` rows at full round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_GHz", "re_t", "im_t", "T"])
        for om, t, T in zip(spectrum.probe_grid, spectrum.amplitude, spectrum.intensity):
            w.writerow([repr(float(om)), repr(float(t.real)), repr(float(t.imag)), repr(float(T))])


def read_spectrum_csv(path) -> TransmissionSpectrum:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    amp = data["re_t"] + 1j * data["im_t"]
    return TransmissionSpectrum(np.asarray(data["omega_GHz"]), amp, np.asarray(data["T"]))
