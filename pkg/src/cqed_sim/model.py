"""Domain types and closed-form cavity-QED quantities.

Every frequency and rate is a *linear* frequency in GHz (a value quoted as
2pi x 7.3 GHz is stored as 7.3).  All formulas below are homogeneous in the
rates, so no factors of 2pi appear anywhere in the package.  Magnetic fields
are in kG.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

SPIN_STATES = ("up", "down", "unpolarized")


class ConfigError(ValueError):
    """A configuration violates one or more invariants.

    ``errors`` holds every violation found, each prefixed with its field path.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")


class NumericalError(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


@dataclass(frozen=True)
class CavityParams:
    """Cavity resonance ``omega_c`` and FWHM energy decay ``kappa`` (GHz).

    ``kappa_in``/``kappa_out`` default to a symmetric lossless split of ``kappa``.
    """

    omega_c: float
    kappa: float
    kappa_in: Optional[float] = None
    kappa_out: Optional[float] = None

    def __post_init__(self):
        if self.kappa_in is None:
            object.__setattr__(self, "kappa_in", 0.5 * self.kappa)
        if self.kappa_out is None:
            object.__setattr__(self, "kappa_out", 0.5 * self.kappa)


@dataclass(frozen=True)
class ZeemanModel:
    """Linear Zeeman model for the two spin-conserving optical transitions.

    ``slope_up`` / ``slope_down`` are in GHz/kG; ``branching_fraction`` is the
    probability that a scattering event preserves the spin.
    """

    omega_zero: float
    slope_up: float = 0.0
    slope_down: float = 0.0
    branching_fraction: float = 1.0


@dataclass(frozen=True)
class EmitterParams:
    g: float
    gamma: float
    zeeman: ZeemanModel
    active: bool = True
    prepared_spin: str = "up"


@dataclass(frozen=True)
class SystemConfig:
    cavity: CavityParams
    emitters: Tuple[EmitterParams, ...] = ()
    b_field: float = 0.0
    probe_power_note: str = "weak probe; linear response"

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))

    def with_emitter(self, index: int, **changes) -> "SystemConfig":
        """Copy with the fields of one emitter replaced."""
        emitters = list(self.emitters)
        emitters[index] = replace(emitters[index], **changes)
        return replace(self, emitters=tuple(emitters))

    def with_spins(self, spins: Sequence[Optional[str]]) -> "SystemConfig":
        """Copy with per-emitter spin preparation.

        ``None`` marks an emitter whose populated spin level has no transition
        in the probed band and ``"ionized"`` one left in its optically inactive charge
        state; either way it is deactivated in the returned copy.
        """
        if len(spins) != len(self.emitters):
            raise ValueError(f"need {len(self.emitters)} spin entries, got {len(spins)}")
        emitters = []
        for em, s in zip(self.emitters, spins):
            if s is None or s == "ionized":
                emitters.append(replace(em, active=False))
            else:
                emitters.append(replace(em, prepared_spin=s))
        return replace(self, emitters=tuple(emitters))


# ---------------------------------------------------------------------------
# closed-form quantities


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """Single-emitter cooperativity ``4 g^2 / (kappa gamma)``."""
    if not kappa > 0 or not gamma > 0:
        raise ValueError(f"kappa and gamma must be positive (kappa={kappa}, gamma={gamma})")
    return 4.0 * g * g / (kappa * gamma)


def purcell_linewidth(delta, g: float, kappa: float, gamma: float):
    """Dressed-emitter FWHM at emitter-cavity detuning ``delta``.

    ``gamma + (4 g^2 / kappa) / (1 + 4 delta^2 / kappa^2)``.  Accepts scalar
    or array ``delta``.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    delta = np.asarray(delta, dtype=float)
    out = gamma + (4.0 * g * g / kappa) / (1.0 + 4.0 * delta * delta / (kappa * kappa))
    return float(out) if out.ndim == 0 else out


def transition_frequencies(zeeman: ZeemanModel, b: float) -> Tuple[float, float]:
    """Spin-up and spin-down optical transition frequencies at field ``b``."""
    return (zeeman.omega_zero + zeeman.slope_up * b,
            zeeman.omega_zero + zeeman.slope_down * b)


def transition_frequency(emitter: EmitterParams, b: float, spin: Optional[str] = None) -> float:
    spin = emitter.prepared_spin if spin is None else spin
    up, down = transition_frequencies(emitter.zeeman, b)
    if spin == "up":
        return up
    if spin == "down":
        return down
    raise ValueError(f"no single transition frequency for spin state {spin!r}")


def crossing_field(omega_zero_a: float, slope_a: float,
                   omega_zero_b: float, slope_b: float) -> float:
    """Field at which two linear transitions are degenerate."""
    if slope_a == slope_b:
        raise ValueError("parallel transitions never cross")
    return (omega_zero_b - omega_zero_a) / (slope_a - slope_b)


# ---------------------------------------------------------------------------
# validation


def _finite(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool) and math.isfinite(x)


def check(config: SystemConfig) -> list:
    """Return every invariant violation in ``config`` (empty when valid)."""
    errors = []
    cav = config.cavity
    for name in ("omega_c", "kappa", "kappa_in", "kappa_out"):
        if not _finite(getattr(cav, name)):
            errors.append(f"cavity.{name}: must be a finite number, got {getattr(cav, name)!r}")
    if not errors:
        if not cav.kappa > 0:
            errors.append(f"cavity.kappa: must be > 0, got {cav.kappa}")
        if cav.kappa_in < 0:
            errors.append(f"cavity.kappa_in: must be >= 0, got {cav.kappa_in}")
        if cav.kappa_out < 0:
            errors.append(f"cavity.kappa_out: must be >= 0, got {cav.kappa_out}")
        if cav.kappa_in + cav.kappa_out > cav.kappa * (1 + 1e-12):
            errors.append(
                "cavity.kappa_in + cavity.kappa_out: port decomposition exceeds total decay "
                f"kappa ({cav.kappa_in} + {cav.kappa_out} > {cav.kappa})")

    if not _finite(config.b_field) or config.b_field < 0:
        errors.append(f"b_field: must be a finite non-negative field in kG, got {config.b_field!r}")

    for i, em in enumerate(config.emitters):
        p = f"emitters[{i}]"
        if not _finite(em.g) or em.g < 0:
            errors.append(f"{p}.g: must be finite and >= 0, got {em.g!r}")
        if not _finite(em.gamma) or not em.gamma > 0:
            errors.append(f"{p}.gamma: must be finite and > 0, got {em.gamma!r}")
        if not isinstance(em.active, bool):
            errors.append(f"{p}.active: must be a boolean, got {em.active!r}")
        if em.prepared_spin not in SPIN_STATES:
            errors.append(f"{p}.prepared_spin: must be one of {SPIN_STATES}, got {em.prepared_spin!r}")
        z = em.zeeman
        for name in ("omega_zero", "slope_up", "slope_down", "branching_fraction"):
            if not _finite(getattr(z, name)):
                errors.append(f"{p}.zeeman.{name}: must be a finite number, got {getattr(z, name)!r}")
        if _finite(z.branching_fraction) and not 0.0 <= z.branching_fraction <= 1.0:
            errors.append(f"{p}.zeeman.branching_fraction: must lie in [0, 1], got {z.branching_fraction}")
    return errors


def validate(config: SystemConfig) -> SystemConfig:
    """Return ``config`` unchanged if valid, else raise :class:`ConfigError` with all violations."""
    errors = check(config)
    if errors:
        raise ConfigError(errors)
    return config


# ---------------------------------------------------------------------------
# spin resolution


@dataclass(frozen=True)
class Transitions:
    """Probe-coupled transitions of one definite spin configuration."""

    omega: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    emitter_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self):
        return len(self.omega)


def contributing_transitions(config: SystemConfig, spins: Optional[Sequence[str]] = None) -> Transitions:
    """Transitions of active emitters for a definite spin assignment.

    ``spins`` overrides ``prepared_spin`` per emitter; an ``unpolarized``
    emitter has no single transition and raises ``ValueError``.
    """
    omega, g, gamma, idx = [], [], [], []
    for i, em in enumerate(config.emitters):
        if not em.active:
            continue
        spin = em.prepared_spin if spins is None else spins[i]
        if spin == "unpolarized":
            raise ValueError(
                f"emitters[{i}] is unpolarized; resolve it with spin_configurations() first")
        omega.append(transition_frequency(em, config.b_field, spin))
        g.append(em.g)
        gamma.append(em.gamma)
        idx.append(i)
    return Transitions(np.array(omega, dtype=float), np.array(g, dtype=float),
                       np.array(gamma, dtype=float), np.array(idx, dtype=int))


def spin_configurations(config: SystemConfig):
    """Expand unpolarized emitters into an equal-weight classical mixture.

    Returns a list of ``(weight, spins)`` pairs.  Emitters with zero coupling
    are not expanded since both of their branches are identical.
    """
    branches = [(1.0, [em.prepared_spin for em in config.emitters])]
    for i, em in enumerate(config.emitters):
        if em.prepared_spin != "unpolarized":
            continue
        if not em.active or em.g == 0:
            for _, spins in branches:
                spins[i] = "up"
            continue
        expanded = []
        for w, spins in branches:
            for s in ("up", "down"):
                new = list(spins)
                new[i] = s
                expanded.append((0.5 * w, new))
        branches = expanded
    return [(w, tuple(s)) for w, s in branches]


def detunings(config: SystemConfig, spins: Optional[Sequence[str]] = None) -> np.ndarray:
    """Cavity-emitter detunings ``omega_c - omega_j`` of the contributing transitions."""
    tr = contributing_transitions(config, spins)
    return config.cavity.omega_c - tr.omega
