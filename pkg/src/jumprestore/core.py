"""State spaces, densities and the weighted-sample record shared by every module.

Points are plain numpy float arrays of shape ``(d,)`` on continuous spaces and
plain ``int`` indices on finite ones. The reference measure is Lebesgue on
continuous spaces and counting measure on finite ones; it is not configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

_BELOW_ONE = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class StateSpace:
    kind: str  # "torus" | "euclidean" | "finite"
    dim: int

    def __post_init__(self):
        if self.kind not in ("torus", "euclidean", "finite"):
            raise InvalidParameterError(f"unknown state space kind {self.kind!r}")
        if int(self.dim) < 1:
            raise InvalidParameterError("dimension/cardinality must be positive")

    @classmethod
    def torus(cls, d: int) -> "StateSpace":
        return cls("torus", d)

    @classmethod
    def euclidean(cls, d: int) -> "StateSpace":
        return cls("euclidean", d)

    @classmethod
    def finite(cls, n: int) -> "StateSpace":
        return cls("finite", n)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def contains(self, x) -> bool:
        if self.kind == "finite":
            return float(x).is_integer() and 0 <= int(x) < self.dim
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.kind == "torus":
            return bool(np.all((x >= 0.0) & (x < 1.0)))
        return True

    def point(self, coords):
        """Validate and normalise ``coords`` into a point of this space."""
        if self.kind == "finite":
            i = int(coords)
            if not 0 <= i < self.dim:
                raise InvalidInputError(f"state {coords} outside [0, {self.dim})")
            return i
        x = np.array(coords, dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise InvalidInputError(f"expected {self.dim} coordinates, got {x.shape[0]}")
        if self.kind == "torus":
            return wrap_torus(x)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("non-finite coordinate")
        return x


def wrap_torus(x) -> np.ndarray:
    """Reduce each coordinate to its fractional part, ``x - floor(x)``.

    A tiny negative input whose fractional part rounds up to 1.0 is mapped to
    the largest double below 1 so the result always lies in [0, 1).
    """
    v = np.array(x, dtype=float, ndmin=1)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("cannot wrap NaN or infinite coordinates")
    out = v - np.floor(v)
    out[out >= 1.0] = _BELOW_ONE
    return out


@dataclass(frozen=True)
class WeightedSample:
    """One path-skeleton pair: the process sat at ``x`` for ``dt`` time units."""

    dt: float
    x: object

    def __post_init__(self):
        if not (self.dt >= 0.0 and math.isfinite(self.dt)):
            raise InvalidInputError(f"holding time must be finite and >= 0, got {self.dt}")


class UnnormalizedDensity:
    """Unnormalised target density p~ with optional gradient and normaliser.

    ``fn`` maps a point to p~(x) >= 0. ``grad_log`` maps a point to the
    gradient of log p~; ``log_fn`` to log p~ (derived from ``fn`` if absent).
    ``normalizer`` is Z = integral of p~ against the reference measure when
    known exactly.
    """

    def __init__(
        self,
        fn: Callable,
        grad_log: Optional[Callable] = None,
        normalizer: Optional[float] = None,
        log_fn: Optional[Callable] = None,
        name: str = "custom",
        space: Optional[StateSpace] = None,
        packed=None,
    ):
        if normalizer is not None and not normalizer > 0:
            raise InvalidParameterError("normalizer must be positive")
        self._fn = fn
        self._grad = grad_log
        self._log = log_fn
        self.normalizer = normalizer
        self.name = name
        self.space = space
        # array form consumed by the compiled kernels (see kernels.TargetSpec)
        self.packed = packed

    def __repr__(self):
        return f"UnnormalizedDensity({self.name!r}, Z={self.normalizer})"

    @property
    def has_grad(self) -> bool:
        return self._grad is not None

    def __call__(self, x) -> float:
        return self.eval(x)

    def eval(self, x) -> float:
        v = float(self._fn(x))
        if not v >= 0.0:  # also catches NaN
            raise InvalidInputError(f"density returned {v} at {x!r}")
        return v

    def log(self, x) -> float:
        if self._log is not None:
            return float(self._log(x))
        v = self.eval(x)
        return math.log(v) if v > 0 else -math.inf

    def grad_log(self, x) -> np.ndarray:
        if self._grad is None:
            from .errors import CapabilityError

            raise CapabilityError(f"target {self.name!r} has no grad_log")
        return np.asarray(self._grad(x), dtype=float)
