import math

import numpy as np
import pytest

from cqed_sim import (CavityParams, ConfigError, EmitterParams, SystemConfig, ZeemanModel, cooperativity,
                      extinction, steady_state_oracle, transmission_amplitude, transmission_poles,
                      transmission_spectrum)
from cqed_sim.spectrum import read_spectrum_csv, steady_state_matrix, write_spectrum_csv

from conftest import pair, random_config, single


def test_empty_cavity_resonance():
    cfg = SystemConfig(CavityParams(3.0, 20.0))
    assert transmission_amplitude(3.0, cfg) == pytest.approx(1.0, abs=1e-15)
    assert steady_state_oracle(3.0, cfg) == pytest.approx(1.0, abs=1e-15)


def test_triple_resonance():
    c = cooperativity(7.3, 48, 0.19)
    cfg = single()
    assert transmission_amplitude(0.0, cfg) == pytest.approx(1 / (1 + c), rel=1e-12)
    assert steady_state_oracle(0.0, cfg) == pytest.approx(1 / (1 + c), rel=1e-12)
    assert abs(transmission_amplitude(0.0, cfg)) ** 2 == pytest.approx(1.68e-3, abs=1e-5)


def test_oracle_equivalence(rng):
    worst = 0.0
    for _ in range(300):
        cfg = random_config(rng)
        for wp in rng.uniform(-80, 80, 3):
            t = transmission_amplitude(wp, cfg)
            o = steady_state_oracle(wp, cfg)
            worst = max(worst, abs(o - t) / abs(t))
    assert worst < 1e-10


def test_port_swap(rng):
    for _ in range(50):
        cfg = random_config(rng)
        c = cfg.cavity
        swapped = SystemConfig(CavityParams(c.omega_c, c.kappa, c.kappa_out, c.kappa_in), cfg.emitters, cfg.b_field)
        grid = np.linspace(-100, 100, 401)
        np.testing.assert_array_equal(transmission_spectrum(grid, cfg).intensity,
                                      transmission_spectrum(grid, swapped).intensity)


def test_inactive_equals_zero_coupling(rng):
    grid = np.linspace(-100, 100, 801)
    for _ in range(30):
        cfg = random_config(rng)
        for j, em in enumerate(cfg.emitters):
            if not em.active:
                off = transmission_spectrum(grid, cfg)
                on0 = transmission_spectrum(grid, cfg.with_emitter(j, active=True, g=0.0))
                assert np.array_equal(off.amplitude, on0.amplitude)


def test_far_detuned_lorentzian():
    kappa = 48.0
    cfg = SystemConfig(CavityParams(0.0, kappa), (EmitterParams(7.3, 0.19, ZeemanModel(1e6 * kappa)),
                                                 EmitterParams(9.0, 0.3, ZeemanModel(-1e6 * kappa))))
    grid = np.linspace(-5 * kappa, 5 * kappa, 2001)
    lor = 1.0 / (1.0 + 4 * grid ** 2 / kappa ** 2)
    assert np.max(np.abs(transmission_spectrum(grid, cfg).intensity - lor)) < 1e-6


def test_intensity_bounds_and_consistency(rng):
    for _ in range(50):
        cfg = random_config(rng)
        s = transmission_spectrum(np.linspace(-100, 100, 301), cfg)
        assert np.array_equal(s.intensity, s.amplitude.real ** 2 + s.amplitude.imag ** 2)
        assert np.all(s.intensity <= 1.0 + 1e-12) and np.all(s.intensity >= 0)


def test_two_emitter_dips():
    cfg = SystemConfig(CavityParams(0.0, 48.0), (EmitterParams(7.3, 0.19, ZeemanModel(-10.0)),
                                                 EmitterParams(7.3, 0.19, ZeemanModel(10.0))))
    assert abs(transmission_amplitude(-10.0, cfg)) ** 2 < 0.05
    assert abs(transmission_amplitude(10.0, cfg)) ** 2 < 0.05


def test_single_point_grid():
    cfg = single(delta=5.0)
    s = transmission_spectrum([1.5], cfg)
    assert len(s.intensity) == 1
    assert s.amplitude[0] == transmission_amplitude(1.5, cfg)


@pytest.mark.parametrize("grid", [[], [1.0, 1.0], [2.0, 1.0]])
def test_bad_grid(grid):
    with pytest.raises(ValueError):
        transmission_spectrum(grid, single())


def test_unpolarized_mixture():
    cfg = SystemConfig(CavityParams(0, 48), (EmitterParams(7.3, 0.19, ZeemanModel(0, 1, -1), prepared_spin="unpolarized"),),
                       b_field=3.0)
    grid = np.linspace(-20, 20, 201)
    up = transmission_spectrum(grid, cfg.with_emitter(0, prepared_spin="up")).intensity
    dn = transmission_spectrum(grid, cfg.with_emitter(0, prepared_spin="down")).intensity
    mix = transmission_spectrum(grid, cfg)
    np.testing.assert_allclose(mix.intensity, 0.5 * (up + dn), rtol=1e-15)
    assert np.all(np.isnan(mix.amplitude))
    with pytest.raises(ValueError):
        transmission_amplitude(0.0, cfg)


def test_extinction():
    c = cooperativity(7.3, 48, 0.19)
    assert extinction(single(), 0) == pytest.approx(1 - 1 / (1 + c) ** 2, rel=1e-12)
    assert extinction(single(), 0) == pytest.approx(0.998, abs=5e-4)
    assert extinction(single(g=0.0), 0) == 0.0
    e11 = extinction(single(g=math.sqrt(11 * 48 * 0.19 / 4)), 0)
    assert e11 == pytest.approx(1 - 1 / 144, rel=1e-12)
    with pytest.raises(IndexError):
        extinction(single(), 3)
    with pytest.raises(ValueError):
        extinction(single().with_emitter(0, active=False), 0)


def test_unvalidated_config_rejected():
    with pytest.raises(ConfigError):
        transmission_amplitude(0.0, single(gamma=-1.0))


def test_peak_near_shifted_emitter():
    # dressed emitter line sits near omega_1 - J with the Purcell width
    cfg = single(delta=79.0)
    grid = np.linspace(-3, 3, 60001)
    s = transmission_spectrum(grid, cfg)
    near = np.abs(grid) < 2
    k = np.argmax(np.where(near, s.intensity, -1))
    j = 7.3 ** 2 * 79 / (79 ** 2 + 24 ** 2)
    assert grid[k] == pytest.approx(-j, abs=0.3)


def test_poles_are_zeros_of_denominator():
    cfg = pair(delta=79.0, split=0.4)
    lam = transmission_poles(cfg)
    assert lam.shape == (3,)
    assert np.all(lam.imag < 0)
    for z in lam:
        a, _, _ = steady_state_matrix(z, cfg)
        s = np.linalg.svd(a, compute_uv=False)
        assert s[-1] < 1e-12 * s[0]


def test_poles_need_pure_state():
    cfg = single().with_emitter(0, prepared_spin="unpolarized", zeeman=ZeemanModel(0, 1, -1))
    with pytest.raises(ValueError):
        transmission_poles(cfg)
    assert len(transmission_poles(cfg, ("up",))) == 2


def test_csv_roundtrip(tmp_path):
    cfg = pair(split=1.3)
    s = transmission_spectrum(np.linspace(-50, 150, 2001), cfg)
    p = tmp_path / "s.csv"
    write_spectrum_csv(p, s)
    lines = p.read_text().splitlines()
    assert lines[0] == "omega_GHz,re_t,im_t,T"
    assert len(lines) == 2002
    back = read_spectrum_csv(p)
    assert np.array_equal(back.amplitude, s.amplitude)
    assert np.array_equal(back.probe_grid, s.probe_grid)
