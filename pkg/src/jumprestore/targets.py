"""Built-in analytic targets.

Continuous targets are Gaussian mixtures (or the 2-D donut) packed into a
``kernels.TargetSpec`` so the compiled samplers and the object API evaluate
exactly the same expressions. Normalisers are integrals over R^d.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .core import StateSpace, UnnormalizedDensity
from .errors import InvalidParameterError
from .kernels import TARGET_MIXTURE, TargetSpec
from .kernels import _scalar

TRIMODAL_WEIGHTS = (0.3, 0.4, 0.3)
TRIMODAL_MEANS = (-29.0, -3.0, 10.0)
TRIMODAL_SDS = (2.0, 1.0, 1.5)


def _from_spec(spec: TargetSpec, space: StateSpace, normalizer, name) -> UnnormalizedDensity:
    args = spec.args()
    d = space.dim

    def fn(x):
        return _scalar.target_density(*args, np.asarray(x, dtype=float).reshape(d))

    def log_fn(x):
        return _scalar.target_logp(*args, np.asarray(x, dtype=float).reshape(d))

    def grad(x):
        out = np.zeros(d)
        _scalar.target_grad_log(*args, np.asarray(x, dtype=float).reshape(d), out)
        return out

    return UnnormalizedDensity(fn, grad_log=grad, normalizer=normalizer, log_fn=log_fn,
                               name=name, space=space, packed=spec)


def _space(kind, d):
    if kind not in ("euclidean", "torus"):
        raise InvalidParameterError(f"continuous target needs euclidean or torus space, got {kind!r}")
    return StateSpace(kind, d)


def gaussian_mixture(weights, means, sds, space="euclidean", name="gaussian-mixture"):
    """sum_k w_k N(x; m_k, diag(s_k^2)), each component normalised; Z = sum w_k."""
    w = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if means.shape[0] != w.shape[0]:
        means = means.T
    sds = np.broadcast_to(np.asarray(sds, dtype=float).reshape(len(w), -1), means.shape)
    if np.any(w <= 0) or np.any(sds <= 0):
        raise InvalidParameterError("weights and standard deviations must be positive")
    d = means.shape[1]
    coef = w / np.prod(sds * math.sqrt(2 * math.pi), axis=1)
    spec = TargetSpec.mixture(coef, means, sds)
    return _from_spec(spec, _space(space, d), float(w.sum()), name)


def gaussian(mean=0.0, var=1.0, dim=None, space="euclidean"):
    """p~(x) = exp(-|x - m|^2 / (2 var)), peak value 1."""
    m = np.atleast_1d(np.asarray(mean, dtype=float))
    if dim is not None and m.shape[0] == 1:
        m = np.full(int(dim), m[0])
    if not var > 0:
        raise InvalidParameterError("variance must be positive")
    sd = math.sqrt(var)
    d = m.shape[0]
    spec = TargetSpec.mixture([1.0], m[None, :], np.full((1, d), sd))
    return _from_spec(spec, _space(space, d), (2 * math.pi * var) ** (d / 2), "gaussian")


def trimodal1d():
    return gaussian_mixture(TRIMODAL_WEIGHTS, [[m] for m in TRIMODAL_MEANS],
                            [[s] for s in TRIMODAL_SDS], name="trimodal1d")


def donut2d(radius=1.5, width=0.25):
    """p~(x) = exp(-((|x| - r) / w)^2 / 2) on R^2."""
    if not (radius >= 0 and width > 0):
        raise InvalidParameterError("donut needs radius >= 0 and width > 0")
    r, s = float(radius), float(width)
    z = 2 * math.pi * (s * s * math.exp(-r * r / (2 * s * s))
                       + r * s * math.sqrt(2 * math.pi) * float(ndtr(r / s)))
    return _from_spec(TargetSpec.donut(2, r, s), StateSpace.euclidean(2), z, "donut2d")


def finite_random(n=5, seed=0, low=0.1, high=10.0):
    """Finite target with p~ entries drawn U(low, high); Z is their sum."""
    if int(n) < 1:
        raise InvalidParameterError("n must be positive")
    values = np.random.default_rng(seed).uniform(low, high, size=int(n))
    return finite_target(values, name="finite-random")


def finite_target(values, name="finite"):
    values = np.asarray(values, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise InvalidParameterError("finite target values must be finite and >= 0")

    def fn(i):
        return values[int(i)]

    dens = UnnormalizedDensity(fn, normalizer=float(values.sum()), name=name,
                               space=StateSpace.finite(values.shape[0]))
    dens.values = values
    return dens


TARGETS = {
    "trimodal1d": (trimodal1d, "1-D mixture 0.3 N(-29,2^2) + 0.4 N(-3,1) + 0.3 N(10,1.5^2)"),
    "gaussian": (gaussian, "isotropic Gaussian exp(-|x-mean|^2/(2 var)); params mean, var, dim, space"),
    "gaussian-mixture": (gaussian_mixture, "normalised mixture; params weights, means, sds, space"),
    "donut2d": (donut2d, "2-D ring exp(-((|x|-radius)/width)^2/2); params radius, width"),
    "finite-random": (finite_random, "finite target with U(0.1,10) weights; params n, seed"),
}


def builtin_target(name: str, **params) -> UnnormalizedDensity:
    try:
        builder = TARGETS[name][0]
    except KeyError:
        raise LookupError(f"unknown target {name!r}; known: {', '.join(TARGETS)}") from None
    return builder(**params)


def mixture_bin_masses(density: UnnormalizedDensity, edges, dim=0) -> np.ndarray:
    """Exact probability of each bin ``[edges[b], edges[b+1])`` along ``dim``.

    Only for Gaussian-mixture targets; masses are renormalised over the range.
    """
    spec = density.packed
    if spec is None or spec.kind != TARGET_MIXTURE:
        raise InvalidParameterError("analytic bin masses need a Gaussian-mixture target")
    edges = np.asarray(edges, dtype=float)
    sd = 1.0 / spec.inv_sd[:, dim]
    w = spec.coef * np.prod(math.sqrt(2 * math.pi) / spec.inv_sd, axis=1)
    cdf = (w[:, None] * ndtr((edges[None, :] - spec.means[:, dim, None]) / sd[:, None])).sum(0)
    mass = np.diff(cdf)
    return mass / mass.sum()


def mixture_interval_mass(density: UnnormalizedDensity, lo, hi, dim=0) -> float:
    """Normalised target probability of ``lo <= x_dim < hi`` for a mixture."""
    spec = density.packed
    sd = 1.0 / spec.inv_sd[:, dim]
    w = spec.coef * np.prod(math.sqrt(2 * math.pi) / spec.inv_sd, axis=1)
    m = spec.means[:, dim]
    p = w * (ndtr((hi - m) / sd) - ndtr((lo - m) / sd))
    return float(p.sum() / w.sum())


def density_minima_1d(density: UnnormalizedDensity, centers) -> list:
    """Location of the density minimum between each pair of adjacent centres."""
    from scipy.optimize import minimize_scalar

    centers = sorted(float(c) for c in centers)
    out = []
    for a, b in zip(centers[:-1], centers[1:]):
        r = minimize_scalar(lambda v: density.eval([v]), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-10})
        out.append(float(r.x))
    return out


def trimodal_basins() -> list:
    """(lo, hi) of the three basins of ``trimodal1d``, split at the density minima."""
    a, b = density_minima_1d(trimodal1d(), TRIMODAL_MEANS)
    return [(-math.inf, a), (a, b), (b, math.inf)]
