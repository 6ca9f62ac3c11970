import numpy as np
import pytest

from cqed_sim import CavityParams, EmitterParams, SystemConfig, ZeemanModel

G, KAPPA, GAMMA = 7.3, 48.0, 0.19


def single(delta=0.0, g=G, kappa=KAPPA, gamma=GAMMA, **cav):
    """One emitter at 0 GHz, cavity at ``delta``."""
    return SystemConfig(CavityParams(delta, kappa, **cav), (EmitterParams(g, gamma, ZeemanModel(0.0)),))


def pair(delta=79.0, split=0.0, g=G, kappa=KAPPA, gamma=GAMMA):
    ems = (EmitterParams(g, gamma, ZeemanModel(-split / 2)), EmitterParams(g, gamma, ZeemanModel(split / 2)))
    return SystemConfig(CavityParams(delta, kappa), ems)


def random_config(rng, n_max=5):
    """Random valid config with mixed spins, inactive emitters and lossy ports."""
    kappa = rng.uniform(1, 100)
    kin = rng.uniform(0, kappa / 2)
    kout = rng.uniform(0, kappa - kin)
    ems = []
    for _ in range(rng.integers(0, n_max + 1)):
        z = ZeemanModel(rng.uniform(-50, 50), rng.uniform(-2, 2), rng.uniform(-2, 2))
        ems.append(EmitterParams(rng.uniform(0, 20), rng.uniform(0.01, 5), z,
                                 active=bool(rng.random() > 0.15),
                                 prepared_spin=str(rng.choice(["up", "down"]))))
    return SystemConfig(CavityParams(rng.uniform(-60, 60), kappa, kin, kout), tuple(ems),
                        b_field=rng.uniform(0, 10))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria append (number, title, ok, detail) here; printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")
