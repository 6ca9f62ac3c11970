"""numba vs numpy kernels: transmission maps and readout trials.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are always importable from ``cqed_sim._kernels``; this times
them side by side on the workloads the acceptance suite runs (a 200 x 2001
field-sweep map and 2 x 10^5 readout trials) and checks they agree.
"""

import argparse
import time

import numpy as np

from cqed_sim import _kernels
from cqed_sim.readout import _prep_key


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sweep_map(kernel):
    probe = np.linspace(-8.0, 8.0, 2001)
    g = np.array([7.3, 7.3])
    gamma = np.array([0.5, 0.5])

    def go():
        out = np.empty((200, probe.size))
        for i, b in enumerate(np.linspace(0.0, 8.6, 200)):
            om = np.array([-2.58 + 0.6 * b, 2.58 - 0.6 * b])
            t = kernel(probe, 109.0, 39.0, 19.5, 19.5, om, g, gamma)
            out[i] = t.real ** 2 + t.imag ** 2
        return out
    return go


def readout(kernel, trials):
    args = (16.82, 2.2857, 13.95, 7.0)

    def go():
        up = kernel(_prep_key(7, True), 0, trials, True, *args)
        dn = kernel(_prep_key(7, False), 0, trials, False, *args)
        return up, dn
    return go


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=100_000)
    a = ap.parse_args()

    rows = []
    for name, nb, npy in [
        ("transmission map 200x2001", sweep_map(_kernels._transmission_numba), sweep_map(_kernels._transmission_numpy)),
        (f"readout 2x{a.trials} trials", readout(_kernels._counts_numba, a.trials),
         readout(_kernels._counts_numpy, a.trials)),
    ]:
        r_nb, r_np = nb(), npy()
        if isinstance(r_nb, tuple):
            agree = all(np.array_equal(x, y) for x, y in zip(r_nb, r_np))
        else:
            agree = np.allclose(r_nb, r_np, rtol=1e-12, atol=0)
        t_nb, t_np = best_of(nb, a.repeat), best_of(npy, a.repeat)
        rows.append((name, t_nb, t_np, agree))

    print(f"{'workload':32s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  agree")
    for name, t_nb, t_np, agree in rows:
        print(f"{name:32s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x  {agree}")


if __name__ == "__main__":
    main()
