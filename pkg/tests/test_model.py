import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqed_sim import (CavityParams, ConfigError, EmitterParams, SystemConfig, ZeemanModel,
                      cooperativity, purcell_linewidth, transition_frequencies, validate)
from cqed_sim.model import (check, contributing_transitions, crossing_field, spin_configurations,
                            transition_frequency)

from conftest import single

pos = st.floats(0.01, 1e3, allow_nan=False)


def test_cooperativity_values():
    assert cooperativity(7.3, 48, 0.19) == pytest.approx(23.37, abs=0.005)
    assert cooperativity(7.3, 39, 0.5) == pytest.approx(10.93, abs=0.005)
    assert cooperativity(0.0, 48, 0.19) == 0.0


@pytest.mark.parametrize("kappa,gamma", [(0, 1), (-1, 1), (1, 0), (1, -0.1)])
def test_cooperativity_domain(kappa, gamma):
    with pytest.raises(ValueError):
        cooperativity(1.0, kappa, gamma)


def test_purcell_values():
    assert purcell_linewidth(0, 7.3, 48, 0.19) == pytest.approx(4.631, abs=1e-3)
    assert purcell_linewidth(336, 7.3, 48, 0.19) == pytest.approx(0.2125, abs=1e-4)
    assert purcell_linewidth(12.0, 0.0, 48, 0.19) == 0.19
    with pytest.raises(ValueError):
        purcell_linewidth(0, 1, 0, 1)


def test_purcell_array_and_monotone():
    d = np.linspace(0, 500, 101)
    w = purcell_linewidth(d, 7.3, 48, 0.19)
    assert w.shape == d.shape
    assert np.all(np.diff(w) < 0)


@settings(max_examples=200, deadline=None)
@given(d=st.floats(-1e3, 1e3), g=pos, kappa=pos, gamma=pos)
def test_purcell_even_and_half(d, g, kappa, gamma):
    assert purcell_linewidth(d, g, kappa, gamma) == purcell_linewidth(-d, g, kappa, gamma)
    full = purcell_linewidth(0, g, kappa, gamma) - gamma
    half = purcell_linewidth(kappa / 2, g, kappa, gamma) - gamma
    assert half == pytest.approx(full / 2, rel=1e-9, abs=1e-12 * gamma)


@settings(max_examples=200, deadline=None)
@given(g=pos, kappa=pos, gamma=pos, s=st.floats(1e-3, 1e3))
def test_cooperativity_scale_free(g, kappa, gamma, s):
    assert cooperativity(s * g, s * kappa, s * gamma) == pytest.approx(cooperativity(g, kappa, gamma), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(w0=st.floats(-1e3, 1e3), su=st.floats(-5, 5), sd=st.floats(-5, 5),
       b1=st.floats(0, 20), b2=st.floats(0, 20))
def test_zeeman_linear(w0, su, sd, b1, b2):
    z = ZeemanModel(w0, su, sd)
    lhs = np.add(transition_frequencies(z, b1), transition_frequencies(z, b2))
    rhs = np.add(transition_frequencies(z, b1 + b2), transition_frequencies(z, 0.0))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


def test_transition_frequency_spin():
    em = EmitterParams(7.3, 0.5, ZeemanModel(2.0, 0.6, -0.6), prepared_spin="down")
    assert transition_frequency(em, 5.0) == pytest.approx(-1.0)
    assert transition_frequency(em, 5.0, "up") == pytest.approx(5.0)
    assert crossing_field(-2.58, 0.6, 2.58, -0.6) == pytest.approx(4.3)


def test_validate_good():
    cfg = single()
    assert validate(cfg) is cfg
    assert validate(SystemConfig(CavityParams(0, 1))).emitters == ()


@pytest.mark.parametrize("cfg,needle", [
    (SystemConfig(CavityParams(0, 10, 6, 6)), "port decomposition"),
    (SystemConfig(CavityParams(0, 10, 11, 0)), "kappa_in"),
    (SystemConfig(CavityParams(0, -1)), "cavity.kappa"),
    (single(gamma=0.0), "emitters[0].gamma"),
    (single(g=-1.0), "emitters[0].g"),
    (single().with_emitter(0, prepared_spin="sideways"), "prepared_spin"),
    (single().with_emitter(0, zeeman=ZeemanModel(0, branching_fraction=1.5)), "branching_fraction"),
    (single(delta=math.nan), "omega_c"),
])
def test_validate_errors(cfg, needle):
    with pytest.raises(ConfigError) as exc:
        validate(cfg)
    assert any(needle in e for e in exc.value.errors), exc.value.errors


def test_validate_reports_all():
    cfg = SystemConfig(CavityParams(0, 10, 11, 0), (EmitterParams(-1, 0, ZeemanModel(0)),))
    assert len(check(cfg)) >= 3


def test_spin_masking():
    cfg = SystemConfig(CavityParams(0, 10), (
        EmitterParams(1, 1, ZeemanModel(0), prepared_spin="up"),
        EmitterParams(2, 1, ZeemanModel(1), active=False),
        EmitterParams(3, 1, ZeemanModel(2), prepared_spin="unpolarized"),
    ))
    branches = spin_configurations(cfg)
    assert [w for w, _ in branches] == [0.5, 0.5]
    tr = contributing_transitions(cfg, branches[0][1])
    assert list(tr.emitter_index) == [0, 2]
    # g = 0 emitters are not expanded into the mixture
    assert len(spin_configurations(cfg.with_emitter(2, g=0.0))) == 1


def test_with_spins():
    cfg = single().with_spins(["ionized"])
    assert not cfg.emitters[0].active
    assert single().with_spins([None]).emitters[0].active is False
    assert single().with_spins(["down"]).emitters[0].prepared_spin == "down"
    with pytest.raises(ValueError):
        single().with_spins(["up", "up"])


# Two linewidths are quoted at Delta = 79 GHz; each is checked at +-20% with
# the single-emitter parameters {7.3, 48, 0.19}.
def test_linewidth_79_matches_0p5():
    assert purcell_linewidth(79.0, 7.3, 48.0, 0.19) == pytest.approx(0.5, rel=0.2)


def test_linewidth_79_matches_0p4():
    # 0.565 GHz here; 0.4 GHz would need gamma <= 0.105 GHz, below any quoted emitter width
    assert purcell_linewidth(79.0, 7.3, 48.0, 0.19) == pytest.approx(0.4, rel=0.2)
