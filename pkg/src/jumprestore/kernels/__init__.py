"""Block kernels behind a backend switch.

``USE_NUMBA`` selects the compiled scalar loops in ``_loops``; otherwise the
lockstep numpy versions in ``_vectorized`` run. Both take the same packed
arguments and follow the same random-draw order.
"""

from typing import NamedTuple

import numpy as np

from .. import rng as _rng
from .._accel import BACKEND, USE_NUMBA
from . import _loops, _vectorized
from ._loops import LOCAL_HMC, LOCAL_MALA, LOCAL_RWM
from ._scalar import (
    KAPPA_CAP,
    OBS_COORD,
    OBS_COORD_SQ,
    OBS_INTERVAL,
    TARGET_DONUT,
    TARGET_MIXTURE,
)

_impl = _loops if USE_NUMBA else _vectorized

LOCAL_KINDS = {"rwm": LOCAL_RWM, "mala": LOCAL_MALA, "hmc": LOCAL_HMC}

__all__ = [
    "BACKEND", "USE_NUMBA", "KAPPA_CAP", "LOCAL_KINDS", "LOCAL_RWM", "LOCAL_MALA", "LOCAL_HMC",
    "OBS_COORD", "OBS_COORD_SQ", "OBS_INTERVAL", "TARGET_MIXTURE", "TARGET_DONUT",
    "TargetSpec", "ObservableSpec", "HistogramSpec", "seed_key", "row_cumsum",
    "continuous_tours", "mh_chains", "finite_tours", "finite_chain", "backend_module",
]


class TargetSpec(NamedTuple):
    """Packed analytic target understood by the kernels."""

    kind: int
    coef: np.ndarray
    means: np.ndarray
    inv_sd: np.ndarray
    extra: np.ndarray

    @classmethod
    def mixture(cls, coef, means, sds):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        sds = np.broadcast_to(np.asarray(sds, dtype=float), means.shape)
        return cls(TARGET_MIXTURE, np.asarray(coef, dtype=float), np.ascontiguousarray(means),
                   np.ascontiguousarray(1.0 / sds), np.zeros(2))

    @classmethod
    def donut(cls, dim, radius, width):
        return cls(TARGET_DONUT, np.ones(1), np.zeros((1, dim)), np.ones((1, dim)),
                   np.array([float(radius), float(width)]))

    def args(self):
        return (self.kind, self.coef, self.means, self.inv_sd, self.extra)


class ObservableSpec(NamedTuple):
    """Coordinate observables: ``x_d``, ``x_d**2`` or ``1[lo <= x_d < hi]``."""

    kind: np.ndarray
    dim: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple

    @classmethod
    def build(cls, items):
        """``items``: iterable of dicts with ``kind`` in {coord, coord_sq, interval}."""
        codes = {"coord": OBS_COORD, "coord_sq": OBS_COORD_SQ, "interval": OBS_INTERVAL}
        kind, dim, lo, hi, names = [], [], [], [], []
        for it in items:
            kind.append(codes[it["kind"]])
            dim.append(int(it.get("dim", 0)))
            lo.append(float(it.get("lo", 0.0)))
            hi.append(float(it.get("hi", 0.0)))
            names.append(it.get("name") or _default_name(it))
        return cls(np.array(kind, np.int64), np.array(dim, np.int64), np.array(lo),
                   np.array(hi), tuple(names))

    def args(self):
        return (self.kind, self.dim, self.lo, self.hi)


def _default_name(it):
    d = int(it.get("dim", 0))
    if it["kind"] == "coord":
        return f"x{d}"
    if it["kind"] == "coord_sq":
        return f"x{d}^2"
    return f"1[{it['lo']}<=x{d}<{it['hi']}]"


class HistogramSpec(NamedTuple):
    dim: int
    lo: float
    hi: float
    bins: int

    def args(self):
        return (int(self.dim), float(self.lo), float(self.hi), int(self.bins))

    def edges(self):
        return np.linspace(self.lo, self.hi, self.bins + 1)


def seed_key(seed: int):
    """``mix64(seed)`` in the representation the active backend expects."""
    m = _rng.mix64(int(seed) & _rng.MASK)
    return np.uint64(m) if USE_NUMBA else m


def row_cumsum(P):
    """Row-wise cumulative sums with the last column pinned to exactly 1."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    cum = np.cumsum(P, axis=1)
    cum /= cum[:, -1:]
    cum[:, -1] = 1.0
    return np.ascontiguousarray(cum)


def backend_module():
    return _impl


def continuous_tours(seed, first, count, target, torus, lo, hi, local_kind, sigma, dt, eps,
                     n_leap, mass, c_eff, obs, hist, max_events):
    return _impl.continuous_tours(
        seed_key(seed), int(first), int(count), *target.args(), bool(torus),
        np.asarray(lo, float), np.asarray(hi, float), int(local_kind), float(sigma), float(dt),
        float(eps), int(n_leap), np.asarray(mass, float), float(c_eff), *obs.args(),
        *hist.args(), int(max_events))


def mh_chains(seed, chain_ids, x0, n_steps, target, torus, lo, hi, lam, local_kind, sigma, dt,
              eps, n_leap, mass, obs, hist, n_batches=1, ctr0=None):
    chain_ids = np.asarray(chain_ids, np.int64)
    ctr0 = np.zeros(chain_ids.shape[0], np.int64) if ctr0 is None else np.asarray(ctr0, np.int64)
    return _impl.mh_chains(
        seed_key(seed), chain_ids, np.atleast_2d(np.asarray(x0, float)), ctr0,
        int(n_steps), *target.args(), bool(torus), np.asarray(lo, float), np.asarray(hi, float),
        float(lam), int(local_kind), float(sigma), float(dt), float(eps), int(n_leap),
        np.asarray(mass, float), *obs.args(), *hist.args(), int(n_batches))


def finite_tours(seed, first, count, p_cum, mu_cum, kappa, F, max_events):
    return _impl.finite_tours(seed_key(seed), int(first), int(count), p_cum,
                              np.ascontiguousarray(mu_cum, dtype=float),
                              np.ascontiguousarray(kappa, dtype=float),
                              np.ascontiguousarray(np.atleast_2d(F), dtype=float), int(max_events))


def finite_chain(seed, index, x0, p_cum, n_steps):
    return _impl.finite_chain(seed_key(seed), int(index), int(x0), p_cum, int(n_steps))
