"""The jump-Restore engine.

A local rule runs in continuous time with Exp(1) holding times. Each visit
also starts an Exp(kappa(x)) killing clock, and the earlier clock wins. A
killed tour ends; the next one regenerates from ``mu``. ``simulate_tour``
simulates one tour and ``run_sequential`` produces the concatenated path
skeleton, including state-dependent regeneration.

Per iteration the draw order is: holding-time uniform, killing-time uniform,
then the local rule's draws. The compiled kernels follow the same order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import UnnormalizedDensity, WeightedSample
from .errors import InvalidParameterError
from .kernels import KAPPA_CAP


class Event(enum.Enum):
    LOCAL_STEP = "local"
    KILL = "kill"


class Termination(enum.Enum):
    KILLED = "killed"
    BUDGET_EXHAUSTED = "budget_exhausted"


def killing_rate_simplified(x, kappa0, p: UnnormalizedDensity, Z_pi, mu_tilde: Callable, Z_mu):
    """kappa0 * (Z_pi / Z_mu) * mu~(x) / p~(x), infinite where p~(x) = 0."""
    px = p.eval(x)
    if px == 0.0:
        return math.inf
    return min(kappa0 * (Z_pi / Z_mu) * float(mu_tilde(x)) / px, KAPPA_CAP)


class KillingRate:
    """kappa(x) in [0, inf]; build with one of the classmethods."""

    def __init__(self, kind: str, fn: Callable, kappa0: float = 1.0, c_eff=None, vector=None):
        self.kind = kind
        self._fn = fn
        self.kappa0 = kappa0
        self.c_eff = c_eff
        self.vector = vector

    def __call__(self, x) -> float:
        k = float(self._fn(x))
        if k != k or k < 0.0:
            raise InvalidParameterError(f"killing rate {k} at {x!r}")
        return k if k == math.inf else min(k, KAPPA_CAP)

    def __repr__(self):
        return f"KillingRate({self.kind}, kappa0={self.kappa0}, c={self.c_eff})"

    @classmethod
    def simplified(cls, target: UnnormalizedDensity, mu_tilde: Callable, Z_mu: float,
                   kappa0: float = 1.0, Z_pi: Optional[float] = None):
        Z_pi = target.normalizer if Z_pi is None else Z_pi
        if Z_pi is None:
            raise InvalidParameterError("exact normaliser needed; use KillingRate.effective")
        if not (kappa0 > 0 and Z_pi > 0 and Z_mu > 0):
            raise InvalidParameterError("kappa0 and normalisers must be positive")
        c = kappa0 * Z_pi / Z_mu
        return cls("simplified", lambda x: killing_rate_simplified(x, kappa0, target, Z_pi, mu_tilde, Z_mu),
                   kappa0, c)

    @classmethod
    def effective(cls, target: UnnormalizedDensity, mu_tilde: Callable, c: float = 1.0):
        """c * mu~(x) / p~(x) with c standing in for kappa0 * Z_pi / Z_mu."""
        if not c > 0:
            raise InvalidParameterError("effective constant must be positive")
        return cls("effective", lambda x: killing_rate_simplified(x, c, target, 1.0, mu_tilde, 1.0),
                   None, c)

    @classmethod
    def finite(cls, kappa):
        kappa = np.asarray(kappa, dtype=float)
        if np.any(kappa < 0) or np.any(np.isnan(kappa)):
            raise InvalidParameterError("kappa entries must lie in [0, inf]")
        return cls("finite", lambda i: kappa[int(i)], vector=kappa)

    @classmethod
    def custom(cls, fn: Callable):
        return cls("custom", fn)

    @classmethod
    def constant(cls, value: float):
        return cls("custom", lambda x: value)


def competing_clocks(kappa_x: float, rng):
    """Race Exp(1) against Exp(kappa_x); returns (dt, Event)."""
    t1 = rng.exponential(1.0)
    t2 = rng.exponential(kappa_x)
    if t1 < t2:
        return t1, Event.LOCAL_STEP
    return t2, Event.KILL


@dataclass(frozen=True)
class TourBudget:
    max_events: int = 10**7

    def __post_init__(self):
        if int(self.max_events) < 1:
            raise InvalidParameterError("max_events must be >= 1")


@dataclass
class Tour:
    samples: list
    exit_point: object
    termination: Termination
    events: int
    index: int = 0
    accepted: int = 0

    @property
    def lifetime(self) -> float:
        return math.fsum(s.dt for s in self.samples)

    @property
    def killed(self) -> bool:
        return self.termination is Termination.KILLED


def simulate_tour(mu, local, kappa: KillingRate, budget: TourBudget = TourBudget(), rng=None) -> Tour:
    """One regeneration-to-kill lifetime; ``rng.index`` becomes the tour index."""
    x = mu.sample(None, rng)
    samples = []
    events = 0
    accepted = 0
    while True:
        dt, ev = competing_clocks(kappa(x), rng)
        samples.append(WeightedSample(dt, x))
        if ev is Event.KILL:
            return Tour(samples, x, Termination.KILLED, events, rng.index, accepted)
        x, acc = local.step(x, rng)
        events += 1
        accepted += bool(acc)
        if events >= budget.max_events:
            return Tour(samples, x, Termination.BUDGET_EXHAUSTED, events, rng.index, accepted)


def run_sequential(x0, N: int, local, kappa: KillingRate, mu_transfer, rng) -> list:
    """Path skeleton ((dt_1, x_0), ..., (dt_N, x_{N-1})).

    ``mu_transfer`` is a kernel whose ``sample(x_exit, rng)`` gives the next
    spawn point, or a callable mapping the exit point to such a sampler.
    """
    if int(N) < 1:
        raise InvalidParameterError("N must be >= 1")
    out = []
    x = x0
    while True:
        dt, ev = competing_clocks(kappa(x), rng)
        out.append(WeightedSample(dt, x))
        if len(out) == N:
            return out
        if ev is Event.LOCAL_STEP:
            x, _ = local.step(x, rng)
        elif hasattr(mu_transfer, "sample"):
            x = mu_transfer.sample(x, rng)
        else:
            x = mu_transfer(x).sample(x, rng)
