"""Hot loops: transmission over a probe grid and photon-count trials.

Each kernel has a numba implementation and a pure-numpy twin.  The public
names at the bottom point at whichever backend ``_accel`` selected; both
variants stay importable so tests and the benchmark can compare them.

Random numbers come from a counter-based generator: the uniform used for
draw ``k`` of trial ``i`` is a SplitMix64 hash of ``(seed, i, k)``.  A trial
therefore produces the same count no matter how trials are chunked across
threads.
"""

import math

import numpy as np
from scipy.special import gammaln

from . import _accel
from ._accel import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53 = 2.0 ** -53

# Poisson means below this use CDF inversion, above it transformed rejection.
_PTRS_CUTOFF = 10.0
_INVERSION_MAX = 1000


# ---------------------------------------------------------------------------
# transmission


@njit
def _transmission_numba(probe, omega_c, kappa, kappa_in, kappa_out, omega_j, g, gamma):
    n = probe.shape[0]
    m = omega_j.shape[0]
    out = np.empty(n, dtype=np.complex128)
    num = math.sqrt(kappa_in * kappa_out)
    for k in range(n):
        wp = probe[k]
        s = 0j
        for j in range(m):
            s += (g[j] * g[j]) / complex(0.5 * gamma[j], omega_j[j] - wp)
        out[k] = num / (complex(0.5 * kappa, omega_c - wp) + s)
    return out


def _transmission_numpy(probe, omega_c, kappa, kappa_in, kappa_out, omega_j, g, gamma):
    probe = np.asarray(probe, dtype=np.float64)
    s = np.zeros(probe.shape, dtype=np.complex128)
    # explicit emitter loop keeps the summation order fixed
    for j in range(len(omega_j)):
        s += (g[j] * g[j]) / (0.5 * gamma[j] + 1j * (omega_j[j] - probe))
    den = (0.5 * kappa + 1j * (omega_c - probe)) + s
    return math.sqrt(kappa_in * kappa_out) / den


# ---------------------------------------------------------------------------
# counter-based uniforms


@njit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def _stream_key(key, trial):
    return _mix64(key ^ _mix64((np.uint64(trial) + _ONE) * _GOLDEN))


@njit
def _uniform(stream, k):
    x = _mix64(stream + (np.uint64(k) + _ONE) * _GOLDEN)
    return (float(x >> _S11) + 0.5) * _TWO53


def seed_key(seed):
    """Scramble a user seed into the generator key."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(_mix64_np(np.array([seed], dtype=np.uint64))[0])


def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _stream_keys_np(key, trials):
    t = trials.astype(np.uint64)
    return _mix64_np(np.uint64(key) ^ _mix64_np((t + _ONE) * _GOLDEN))


def _uniforms_np(streams, k):
    x = _mix64_np(streams + (k.astype(np.uint64) + _ONE) * _GOLDEN)
    return ((x >> _S11).astype(np.float64) + 0.5) * _TWO53


# ---------------------------------------------------------------------------
# Poisson sampling (inversion for small means, Hormann PTRS otherwise)


@njit
def _poisson_numba(mu, stream, k):
    if mu <= 0.0:
        return 0
    if mu < _PTRS_CUTOFF:
        u = _uniform(stream, k)
        p = math.exp(-mu)
        cdf = p
        n = 0
        while u > cdf and n < _INVERSION_MAX:
            n += 1
            p *= mu / n
            cdf += p
        return n
    slam = math.sqrt(mu)
    loglam = math.log(mu)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = _uniform(stream, k) - 0.5
        V = _uniform(stream, k + 1)
        k += 2
        us = 0.5 - abs(U)
        n = int(math.floor((2.0 * a / us + b) * U + mu + 0.43))
        if us >= 0.07 and V <= vr:
            return n
        if n < 0 or (us < 0.013 and V > us):
            continue
        lhs = math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
        if lhs <= -mu + n * loglam - math.lgamma(n + 1.0):
            return n


@njit
def _trial_mean(bright, u, rate_bright, rate_dark, flip_lifetime, window):
    if not bright:
        return rate_dark * window
    t_flip = -flip_lifetime * math.log(u)
    t_b = min(t_flip, window)
    return rate_bright * t_b + rate_dark * (window - t_b)


@njit
def _counts_numba_kernel(ukey, start, stop, bright, rate_bright, rate_dark, flip_lifetime, window):
    out = np.empty(stop - start, dtype=np.int64)
    for i in range(start, stop):
        stream = _stream_key(ukey, i)
        k = 0
        u = 0.5
        if bright:
            u = _uniform(stream, 0)
            k = 1
        mu = _trial_mean(bright, u, rate_bright, rate_dark, flip_lifetime, window)
        out[i - start] = _poisson_numba(mu, stream, k)
    return out


def _counts_numba(key, start, stop, bright, rate_bright, rate_dark, flip_lifetime, window):
    # keys span the full uint64 range; a plain int above 2**63 would not type as int64
    return _counts_numba_kernel(np.uint64(key), start, stop, bright, rate_bright, rate_dark,
                                flip_lifetime, window)


def _poisson_numpy(mu, streams, k):
    n_out = np.zeros(mu.shape, dtype=np.int64)

    small = (mu > 0.0) & (mu < _PTRS_CUTOFF)
    if small.any():
        m = mu[small]
        u = _uniforms_np(streams[small], k[small])
        p = np.exp(-m)
        cdf = p.copy()
        n = np.zeros(m.shape, dtype=np.int64)
        live = u > cdf
        while live.any():
            n[live] += 1
            p[live] *= m[live] / n[live]
            cdf[live] += p[live]
            live &= (u > cdf) & (n < _INVERSION_MAX)
        n_out[small] = n

    large = np.flatnonzero(mu >= _PTRS_CUTOFF)
    if large.size:
        lam = mu[large]
        st = streams[large]
        kk = k[large].copy()
        slam = np.sqrt(lam)
        loglam = np.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        result = np.zeros(lam.shape, dtype=np.int64)
        live = np.ones(lam.shape, dtype=bool)
        while live.any():
            idx = np.flatnonzero(live)
            U = _uniforms_np(st[idx], kk[idx]) - 0.5
            V = _uniforms_np(st[idx], kk[idx] + 1)
            kk[idx] += 2
            us = 0.5 - np.abs(U)
            with np.errstate(divide="ignore", invalid="ignore"):
                n = np.floor((2.0 * a[idx] / us + b[idx]) * U + lam[idx] + 0.43).astype(np.int64)
                fast = (us >= 0.07) & (V <= vr[idx])
                reject = (n < 0) | ((us < 0.013) & (V > us))
                lhs = np.log(V) + np.log(invalpha[idx]) - np.log(a[idx] / (us * us) + b[idx])
                rhs = -lam[idx] + n * loglam[idx] - gammaln(n + 1.0)
            accept = fast | (~reject & (lhs <= rhs))
            done = idx[accept]
            result[done] = n[accept]
            live[done] = False
        n_out[large] = result
    return n_out


def _counts_numpy(key, start, stop, bright, rate_bright, rate_dark, flip_lifetime, window):
    trials = np.arange(start, stop, dtype=np.int64)
    streams = _stream_keys_np(key, trials)
    if bright:
        u = _uniforms_np(streams, np.zeros(trials.shape, dtype=np.int64))
        t_flip = -flip_lifetime * np.log(u)
        t_b = np.minimum(t_flip, window)
        mu = rate_bright * t_b + rate_dark * (window - t_b)
        k = np.ones(trials.shape, dtype=np.int64)
    else:
        mu = np.full(trials.shape, rate_dark * window)
        k = np.zeros(trials.shape, dtype=np.int64)
    return _poisson_numpy(mu, streams, k)


if _accel.USE_NUMBA:
    transmission = _transmission_numba
    photon_counts = _counts_numba
else:
    transmission = _transmission_numpy
    photon_counts = _counts_numpy
