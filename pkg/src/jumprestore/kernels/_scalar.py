"""Scalar building blocks, compiled with numba when it is enabled.

These are shared by the compiled block kernels and by the object-level API so
that both consume random draws and evaluate targets identically.
"""

import math

import numpy as np

from .._accel import USE_NUMBA, jit
from .. import rng as _rng

TWO_PI = 2.0 * math.pi
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
BELOW_ONE = float(np.nextafter(1.0, 0.0))
KAPPA_CAP = 1e300

TARGET_MIXTURE = 0
TARGET_DONUT = 1

OBS_COORD = 0
OBS_COORD_SQ = 1
OBS_INTERVAL = 2

if USE_NUMBA:
    _GAMMA = np.uint64(_rng.GAMMA)
    _M1 = np.uint64(0xBF58476D1CE4E5B9)
    _M2 = np.uint64(0x94D049BB133111EB)
    _S30 = np.uint64(30)
    _S27 = np.uint64(27)
    _S31 = np.uint64(31)
    _S11 = np.uint64(11)
    _INV53 = 1.0 / (1 << 53)

    @jit
    def mix64(z):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)

    @jit
    def uniform(key, ctr):
        bits = mix64(key + np.uint64(ctr + 1) * _GAMMA)
        return np.float64(bits >> _S11) * _INV53

    @jit
    def stream_key(seed_mixed, index):
        # seed_mixed is mix64(seed), precomputed by the caller
        return mix64(seed_mixed ^ (np.uint64(index) * _GAMMA))

else:

    def mix64(z):
        return _rng.mix64(int(z))

    def uniform(key, ctr):
        return _rng.bits_to_unit(_rng.draw_bits(int(key), int(ctr)))

    def stream_key(seed_mixed, index):
        return _rng.mix64(int(seed_mixed) ^ ((int(index) * _rng.GAMMA) & _rng.MASK))


@jit
def normal(key, ctr):
    """Box-Muller normal from draws ``ctr`` and ``ctr + 1``."""
    u1 = uniform(key, ctr)
    u2 = uniform(key, ctr + 1)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(TWO_PI * u2)


@jit
def exp_time(u, rate):
    if rate == math.inf:
        return 0.0
    if rate <= 0.0:
        return math.inf
    return -math.log(1.0 - u) / rate


@jit
def wrap1(v):
    r = v - math.floor(v)
    if r >= 1.0:
        r = BELOW_ONE
    return r


@jit
def neumaier(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


@jit
def normal_pdf(delta, sd):
    z = delta / sd
    return math.exp(-0.5 * z * z) * INV_SQRT_2PI / sd


@jit
def wrapped_normal_pdf(delta, sd):
    """Wrapped normal on [0, 1) from the three nearest images.

    Depends on ``|delta|`` only, so it is exactly symmetric in its arguments.
    """
    a = abs(delta)
    a = abs(a - math.floor(a + 0.5))
    return normal_pdf(a - 1.0, sd) + normal_pdf(a, sd) + normal_pdf(a + 1.0, sd)


# -- targets ------------------------------------------------------------------


@jit
def target_density(kind, coef, means, inv_sd, extra, x):
    d = x.shape[0]
    if kind == TARGET_MIXTURE:
        total = 0.0
        for k in range(coef.shape[0]):
            q = 0.0
            for j in range(d):
                z = (x[j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            total += coef[k] * math.exp(-0.5 * q)
        return total
    r = 0.0
    for j in range(d):
        r += x[j] * x[j]
    z = (math.sqrt(r) - extra[0]) / extra[1]
    return math.exp(-0.5 * z * z)


@jit
def target_logp(kind, coef, means, inv_sd, extra, x):
    d = x.shape[0]
    if kind == TARGET_MIXTURE:
        top = -math.inf
        for k in range(coef.shape[0]):
            q = 0.0
            for j in range(d):
                z = (x[j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            lw = math.log(coef[k]) - 0.5 * q
            if lw > top:
                top = lw
        s = 0.0
        for k in range(coef.shape[0]):
            q = 0.0
            for j in range(d):
                z = (x[j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            s += math.exp(math.log(coef[k]) - 0.5 * q - top)
        return top + math.log(s)
    r = 0.0
    for j in range(d):
        r += x[j] * x[j]
    z = (math.sqrt(r) - extra[0]) / extra[1]
    return -0.5 * z * z


@jit
def target_grad_log(kind, coef, means, inv_sd, extra, x, out):
    """Write grad log p~(x) into ``out`` (log-sum-exp stable for mixtures)."""
    d = x.shape[0]
    for j in range(d):
        out[j] = 0.0
    if kind == TARGET_MIXTURE:
        top = -math.inf
        for k in range(coef.shape[0]):
            q = 0.0
            for j in range(d):
                z = (x[j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            lw = math.log(coef[k]) - 0.5 * q
            if lw > top:
                top = lw
        s = 0.0
        for k in range(coef.shape[0]):
            q = 0.0
            for j in range(d):
                z = (x[j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            w = math.exp(math.log(coef[k]) - 0.5 * q - top)
            s += w
            for j in range(d):
                out[j] -= w * (x[j] - means[k, j]) * inv_sd[k, j] * inv_sd[k, j]
        for j in range(d):
            out[j] /= s
        return
    r = 0.0
    for j in range(d):
        r += x[j] * x[j]
    r = math.sqrt(r)
    if r > 0.0:
        fac = -(r - extra[0]) / (extra[1] * extra[1] * r)
        for j in range(d):
            out[j] = fac * x[j]


@jit
def observable(kind, dim, lo, hi, x):
    v = x[dim]
    if kind == OBS_COORD:
        return v
    if kind == OBS_COORD_SQ:
        return v * v
    return 1.0 if (v >= lo and v < hi) else 0.0
