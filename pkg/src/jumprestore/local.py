"""Proposal kernels, the Metropolis-Hastings adjustment and one-step local rules.

A proposal kernel has ``sample(x, rng)``, ``density(x, y)`` (w.r.t. the
reference measure) and a ``symmetric`` flag. Kernels are immutable; every
random draw comes from the caller's ``RngStream``.

Local rules used by the restore engine expose ``step(x, rng) -> (y, accepted)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import StateSpace, UnnormalizedDensity, wrap_torus
from .errors import CapabilityError, InvalidParameterError, UndefinedGradientError
from .kernels import _scalar

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def wrapped_normal_density(delta, sd):
    """Per-coordinate wrapped normal density on [0, 1), three nearest images."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return float(np.prod([_scalar.wrapped_normal_pdf(float(v), float(sd)) for v in delta]))


class ProposalKernel:
    symmetric = False
    state_independent = False
    space: Optional[StateSpace] = None

    def sample(self, x, rng):
        raise NotImplementedError

    def density(self, x, y) -> float:
        raise NotImplementedError


class GaussianTorusStep(ProposalKernel):
    """x + sigma * xi wrapped to [0, 1)^d."""

    symmetric = True

    def __init__(self, sigma: float, dim: int = 1):
        if not sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        self.sigma = float(sigma)
        self.space = StateSpace.torus(dim)

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return wrap_torus(x + self.sigma * rng.normals(x.shape[0]))

    def density(self, x, y) -> float:
        return wrapped_normal_density(np.asarray(y, float) - np.asarray(x, float), self.sigma)


class GaussianStep(ProposalKernel):
    """x + sigma * xi on R^d."""

    symmetric = True

    def __init__(self, sigma: float, dim: int = 1):
        if not sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        self.sigma = float(sigma)
        self.space = StateSpace.euclidean(dim)

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + self.sigma * rng.normals(x.shape[0])

    def density(self, x, y) -> float:
        z = (np.asarray(y, float) - np.asarray(x, float)) / self.sigma
        d = z.shape[0]
        return math.exp(-0.5 * float(z @ z)) / (self.sigma * math.sqrt(2 * math.pi)) ** d


def gaussian_torus_step(sigma: float, dim: int = 1) -> GaussianTorusStep:
    return GaussianTorusStep(sigma, dim)


class UniformBox(ProposalKernel):
    """State-independent uniform law on the box [lo, hi)."""

    state_independent = True

    def __init__(self, lo, hi, torus: bool = False):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise InvalidParameterError("need lo < hi componentwise")
        self.volume = float(np.prod(self.hi - self.lo))
        d = self.lo.shape[0]
        self.space = StateSpace.torus(d) if torus else StateSpace.euclidean(d)

    @classmethod
    def unit_torus(cls, dim: int = 1) -> "UniformBox":
        return cls(np.zeros(dim), np.ones(dim), torus=True)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all((y >= self.lo) & (y < self.hi)))

    def sample(self, x, rng):
        d = self.lo.shape[0]
        y = np.empty(d)
        for j in range(d):
            y[j] = self.lo[j] + (self.hi[j] - self.lo[j]) * rng.uniform()
        return wrap_torus(y) if self.space.kind == "torus" else y

    def unnormalized(self, y) -> float:
        """mu~(y): indicator of the box (so Z_mu is the box volume)."""
        return 1.0 if self.contains(y) else 0.0

    def density(self, x, y) -> float:
        return 1.0 / self.volume if self.contains(y) else 0.0


def _categorical(cum, u) -> int:
    return min(int(np.searchsorted(cum, u, side="right")), cum.shape[0] - 1)


class FiniteProposal(ProposalKernel):
    """Row-stochastic proposal matrix on {0, ..., n-1}."""

    def __init__(self, Q):
        from .kernels import row_cumsum

        self.Q = np.asarray(Q, dtype=float)
        if self.Q.ndim != 2 or self.Q.shape[0] != self.Q.shape[1]:
            raise InvalidParameterError("proposal matrix must be square")
        if np.any(self.Q < 0) or np.max(np.abs(self.Q.sum(1) - 1)) > 1e-12:
            raise InvalidParameterError("proposal matrix must be row-stochastic")
        self.cum = row_cumsum(self.Q)
        self.symmetric = bool(np.array_equal(self.Q, self.Q.T))
        self.space = StateSpace.finite(self.Q.shape[0])

    def sample(self, x, rng):
        return _categorical(self.cum[int(x)], rng.uniform())

    def density(self, x, y) -> float:
        return float(self.Q[int(x), int(y)])


class FiniteDistribution(ProposalKernel):
    """State-independent law on {0, ..., n-1} given by weights."""

    state_independent = True

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not w.sum() > 0:
            raise InvalidParameterError("weights must be nonnegative with positive sum")
        self.probs = w / w.sum()
        self.weights = w
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0
        self.space = StateSpace.finite(w.shape[0])

    def sample(self, x, rng):
        return _categorical(self.cum, rng.uniform())

    def unnormalized(self, y) -> float:
        return float(self.weights[int(y)])

    def density(self, x, y) -> float:
        return float(self.probs[int(y)])


class MixtureKernel(ProposalKernel):
    """lam * mu(y) + (1 - lam) * zeta(x, y): a large step with probability lam."""

    def __init__(self, lam: float, mu: ProposalKernel, zeta: ProposalKernel):
        if not 0.0 <= lam <= 1.0:
            raise InvalidParameterError(f"mixture weight must lie in [0, 1], got {lam}")
        if not getattr(mu, "state_independent", False):
            raise InvalidParameterError("the large-step law must be state-independent")
        self.lam = float(lam)
        self.mu = mu
        self.zeta = zeta
        self.symmetric = self.lam == 0.0 and zeta.symmetric
        self.space = zeta.space

    def sample(self, x, rng):
        if rng.uniform() < self.lam:
            return self.mu.sample(x, rng)
        return self.zeta.sample(x, rng)

    def density(self, x, y) -> float:
        out = 0.0
        if self.lam > 0.0:
            out += self.lam * self.mu.density(x, y)
        if self.lam < 1.0:
            out += (1.0 - self.lam) * self.zeta.density(x, y)
        return out


def mixture_kernel(lam: float, mu: ProposalKernel, zeta: ProposalKernel) -> MixtureKernel:
    return MixtureKernel(lam, mu, zeta)


# -- Metropolis-Hastings -------------------------------------------------------


def mh_acceptance(p: UnnormalizedDensity, q: ProposalKernel, x, y) -> float:
    px = p.eval(x)
    if px <= 0.0:
        return 1.0
    qxy = q.density(x, y)
    if qxy <= 0.0:
        return 1.0
    py = p.eval(y)
    if q.symmetric:
        return min(1.0, py / px)
    return min(1.0, py * q.density(y, x) / (px * qxy))


def mh_step(x, q: ProposalKernel, p: UnnormalizedDensity, rng):
    """Propose ``y ~ q(x, .)``, then accept with one uniform draw."""
    y = q.sample(x, rng)
    return y if rng.uniform() < mh_acceptance(p, q, x, y) else x


class MetropolisHastings:
    """MH-adjusted local rule for an arbitrary proposal kernel."""

    def __init__(self, target: UnnormalizedDensity, proposal: ProposalKernel):
        self.target = target
        self.proposal = proposal

    def step(self, x, rng):
        y = self.proposal.sample(x, rng)
        if rng.uniform() < mh_acceptance(self.target, self.proposal, x, y):
            return y, True
        return x, False


class FiniteChainStep:
    """Jump according to row ``x`` of a row-stochastic matrix (one uniform)."""

    def __init__(self, P):
        from .kernels import row_cumsum

        self.P = np.asarray(P, dtype=float)
        self.cum = row_cumsum(self.P)

    def step(self, x, rng):
        y = _categorical(self.cum[int(x)], rng.uniform())
        return y, y != x


# -- diffusions ----------------------------------------------------------------


def langevin_drift(x, grad_log, Sigma, U=None) -> np.ndarray:
    """((Sigma + U) / 2) grad log p~(x) for constant Sigma.

    ``grad_log`` is either the gradient vector at ``x`` or an
    ``UnnormalizedDensity``; in the latter case p~(x) must be positive.
    """
    if isinstance(grad_log, UnnormalizedDensity):
        if not grad_log.eval(x) > 0.0:
            raise UndefinedGradientError("drift undefined where the density vanishes")
        g = grad_log.grad_log(x)
    else:
        g = np.atleast_1d(np.asarray(grad_log, dtype=float))
    if not np.all(np.isfinite(g)):
        raise UndefinedGradientError("non-finite gradient")
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if U is not None:
        S = S + np.atleast_2d(np.asarray(U, dtype=float))
    return 0.5 * (S @ g)


@dataclass(frozen=True)
class DiffusionSpec:
    """dZ = b(Z) dt + sigma dW discretised with step ``dt``."""

    drift: Callable
    sigma: np.ndarray
    dt: float
    U: Optional[np.ndarray] = None
    space: Optional[StateSpace] = None
    Sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "Sigma", s @ s.T)
        if not self.dt > 0:
            raise InvalidParameterError("time step must be positive")
        if self.U is not None:
            U = np.atleast_2d(np.asarray(self.U, dtype=float))
            if U.shape != (s.shape[0], s.shape[0]) or np.any(U + U.T != 0):
                raise InvalidParameterError("U must be antisymmetric and d x d")
            object.__setattr__(self, "U", U)

    @classmethod
    def langevin(cls, target: UnnormalizedDensity, sigma, dt, U=None, space=None):
        """Drift chosen so that the SDE leaves ``target`` invariant."""
        s = np.atleast_2d(np.asarray(sigma, dtype=float))
        Sigma = s @ s.T
        return cls(lambda x: langevin_drift(x, target.grad_log(x), Sigma, U), s, dt, U, space)


def euler_maruyama_step(x, spec: DiffusionSpec, rng):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = rng.normals(spec.sigma.shape[1])
    y = x + spec.dt * np.asarray(spec.drift(x), dtype=float) + math.sqrt(spec.dt) * (spec.sigma @ xi)
    if spec.space is not None and spec.space.kind == "torus":
        y = wrap_torus(y)
    return y


class MalaKernel(ProposalKernel):
    """N(x + dt * langevin_drift(x), dt * Sigma), wrapped on the torus."""

    def __init__(self, target: UnnormalizedDensity, dt: float, Sigma=None, space=None):
        if not target.has_grad:
            raise CapabilityError("MALA needs a target with grad_log")
        if not dt > 0:
            raise InvalidParameterError("time step must be positive")
        self.target = target
        self.dt = float(dt)
        self.space = space or target.space
        d = self.space.dim
        S = np.eye(d) if Sigma is None else np.atleast_2d(np.asarray(Sigma, dtype=float))
        self.Sigma = S
        self.torus = self.space.kind == "torus"
        if self.torus and np.any(S != np.diag(np.diag(S))):
            raise InvalidParameterError("torus MALA supports diagonal Sigma only")
        self.chol = np.linalg.cholesky(S)
        cov = self.dt * S
        self.cov_inv = np.linalg.inv(cov)
        self.log_norm = -0.5 * np.linalg.slogdet(cov)[1] - d * _LOG_SQRT_2PI
        self.sd_diag = np.sqrt(np.diag(cov))

    def mean(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return x + self.dt * langevin_drift(x, self.target.grad_log(x), self.Sigma)

    def sample(self, x, rng):
        m = self.mean(x)
        y = m + math.sqrt(self.dt) * (self.chol @ rng.normals(m.shape[0]))
        return wrap_torus(y) if self.torus else y

    def log_density(self, x, y) -> float:
        if self.target.eval(x) <= 0.0:
            return -math.inf
        delta = np.asarray(y, dtype=float) - self.mean(x)
        if self.torus:
            return sum(math.log(_scalar.wrapped_normal_pdf(float(v), float(s)))
                       for v, s in zip(delta, self.sd_diag))
        return float(self.log_norm - 0.5 * delta @ self.cov_inv @ delta)

    def density(self, x, y) -> float:
        return math.exp(self.log_density(x, y))


def mala_kernel(target: UnnormalizedDensity, dt: float, Sigma=None, space=None) -> MalaKernel:
    return MalaKernel(target, dt, Sigma, space)


# -- Hamiltonian Monte Carlo ---------------------------------------------------


@dataclass(frozen=True)
class HmcSpec:
    step_size: float
    leapfrog_steps: int
    mass: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mass, dtype=float))
        object.__setattr__(self, "mass", m)
        if not self.step_size > 0 or int(self.leapfrog_steps) < 1 or np.any(m <= 0):
            raise InvalidParameterError("need step_size > 0, leapfrog_steps >= 1, mass > 0")


def leapfrog(x, v, grad_log: Callable, eps: float, n_steps: int, mass, torus=False):
    """Velocity-Verlet integration of H = -log p~(x) + v' M^-1 v / 2."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    mass = np.asarray(mass, dtype=float)
    v += 0.5 * eps * grad_log(x)
    for i in range(n_steps):
        x += eps * v / mass
        if torus:
            x = wrap_torus(x)
        g = grad_log(x)
        v += (eps if i < n_steps - 1 else 0.5 * eps) * g
    return x, v


def hmc_propose(x, target: UnnormalizedDensity, spec: HmcSpec, rng, torus=False):
    """Return (proposal, log acceptance ratio -dH) for one leapfrog trajectory."""
    if not target.has_grad:
        raise CapabilityError("HMC needs a target with grad_log")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.sqrt(spec.mass) * rng.normals(x.shape[0])
    h0 = -target.log(x) + 0.5 * float(np.sum(v * v / spec.mass))
    y, w = leapfrog(x, v, target.grad_log, spec.step_size, int(spec.leapfrog_steps), spec.mass, torus)
    h1 = -target.log(y) + 0.5 * float(np.sum(w * w / spec.mass))
    return y, -(h1 - h0)


class HamiltonianMC:
    """HMC local rule: leapfrog proposal then one acceptance uniform."""

    def __init__(self, target: UnnormalizedDensity, spec: HmcSpec, torus: bool = False):
        if not target.has_grad:
            raise CapabilityError("HMC needs a target with grad_log")
        self.target = target
        self.spec = spec
        self.torus = torus

    def step(self, x, rng):
        y, log_ratio = hmc_propose(x, self.target, self.spec, rng, self.torus)
        alpha = math.exp(min(0.0, log_ratio)) if log_ratio == log_ratio else 0.0
        if rng.uniform() < alpha:
            return y, True
        return x, False
