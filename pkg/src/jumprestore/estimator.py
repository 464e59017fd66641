"""Ergodic averages, tour aggregation, histograms and standard errors.

All long sums use Neumaier compensation and a fixed merge order, so results
do not depend on how work was split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEstimateError, InvalidInputError


def neumaier_add(s: float, c: float, v: float):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


class EmptyHistogramError(EmptyEstimateError):
    pass


@dataclass
class Accumulator:
    """Compensated running sums of ``dt * f`` and ``dt``."""

    weighted_sum: float = 0.0
    weighted_comp: float = 0.0
    weight_sum: float = 0.0
    weight_comp: float = 0.0
    count: int = 0

    def add(self, dt: float, fx: float):
        self.weighted_sum, self.weighted_comp = neumaier_add(self.weighted_sum, self.weighted_comp, dt * fx)
        self.weight_sum, self.weight_comp = neumaier_add(self.weight_sum, self.weight_comp, dt)
        self.count += 1

    def merge(self, other: "Accumulator"):
        self.weighted_sum, self.weighted_comp = neumaier_add(self.weighted_sum, self.weighted_comp,
                                                             other.weighted_total)
        self.weight_sum, self.weight_comp = neumaier_add(self.weight_sum, self.weight_comp,
                                                         other.weight_total)
        self.count += other.count
        return self

    @property
    def weighted_total(self) -> float:
        return self.weighted_sum + self.weighted_comp

    @property
    def weight_total(self) -> float:
        return self.weight_sum + self.weight_comp

    @property
    def estimate(self) -> float:
        w = self.weight_total
        if not w > 0.0:
            raise EmptyEstimateError("total weight is zero")
        return self.weighted_total / w


def ergodic_average_weighted(pairs, f) -> float:
    acc = Accumulator()
    for s in pairs:
        acc.add(s.dt, f(s.x))
    return acc.estimate


def ergodic_average_discrete(states, f) -> float:
    acc = Accumulator()
    for x in states:
        acc.add(1.0, f(x))
    if acc.count == 0:
        raise EmptyEstimateError("no states")
    return acc.estimate


@dataclass
class Aggregate:
    estimate: float
    total_time: float
    diagnostics: dict = field(default_factory=dict)


def aggregate_tours(tours, f) -> Aggregate:
    """Fold per-tour sums in ascending tour index; zero-lifetime tours are skipped."""
    total = Accumulator()
    n = killed = exhausted = zero = 0
    for tour in sorted(tours, key=lambda t: t.index):
        n += 1
        killed += tour.killed
        exhausted += not tour.killed
        acc = Accumulator()
        for s in tour.samples:
            acc.add(s.dt, f(s.x))
        if acc.weight_total == 0.0:
            zero += 1
            continue
        total.merge(acc)
    if total.weight_total == 0.0:
        raise EmptyEstimateError("every tour has zero lifetime")
    T = total.weight_total
    diag = {"tours": n, "killed": killed, "budget_exhausted": exhausted,
            "zero_lifetime": zero, "mean_lifetime": T / n}
    return Aggregate(total.estimate, T, diag)


@dataclass
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    below: float
    above: float
    in_range_weight: float


def weighted_histogram(pairs, bins: int, range_, dim: int = 0) -> Histogram:
    lo, hi = float(range_[0]), float(range_[1])
    if int(bins) < 1 or not lo < hi:
        raise InvalidInputError("need bins >= 1 and lo < hi")
    bins = int(bins)
    sums = np.zeros(bins)
    comp = np.zeros(bins)
    below = above = 0.0
    width = (hi - lo) / bins
    for s in pairs:
        v = float(np.atleast_1d(s.x)[dim])
        if v < lo:
            below += s.dt
        elif v >= hi:
            above += s.dt
        else:
            b = min(int((v - lo) / width), bins - 1)
            sums[b], comp[b] = neumaier_add(sums[b], comp[b], s.dt)
    return histogram_from_sums(np.linspace(lo, hi, bins + 1), sums + comp, below, above)


def histogram_from_sums(edges, weights, below=0.0, above=0.0) -> Histogram:
    weights = np.asarray(weights, dtype=float)
    total = math.fsum(weights)
    if not total > 0.0:
        raise EmptyHistogramError("no weight inside the histogram range")
    return Histogram(np.asarray(edges, dtype=float), weights / total, below, above, total)


def tv_distance(h1, h2) -> float:
    a = np.asarray(h1, dtype=float)
    b = np.asarray(h2, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError("histograms have different bin counts")
    return 0.5 * float(np.abs(a - b).sum())


@dataclass
class BatchMeans:
    se: float
    estimate: float
    batch_estimates: np.ndarray
    sufficient: bool


def batch_means_se(pairs, f=None, num_batches: int = 64) -> BatchMeans:
    """Split total time into equal-weight batches; SE of the batch means.

    Pairs straddling a batch boundary are split exactly. ``f`` defaults to the
    identity on the stored state.
    """
    f = f or (lambda x: x)
    dts = np.array([s.dt for s in pairs], dtype=float)
    fx = np.array([float(f(s.x)) for s in pairs], dtype=float)
    return batch_means_arrays(dts, fx, num_batches)


def batch_means_arrays(dts, fx, num_batches: int = 64) -> BatchMeans:
    dts = np.asarray(dts, dtype=float)
    fx = np.asarray(fx, dtype=float)
    B = int(num_batches)
    T = math.fsum(dts)
    if B < 2 or not T > 0.0:
        return BatchMeans(math.nan, math.nan, np.array([]), False)
    size = T / B
    # cumulative weighted sum is piecewise linear in time, so boundary pairs split exactly
    ref = fx[0]
    g = fx - ref
    cum_t = np.concatenate(([0.0], np.cumsum(dts)))
    cum_s = np.concatenate(([0.0], np.cumsum(dts * g)))
    cuts = size * np.arange(1, B)
    i = np.clip(np.searchsorted(cum_t, cuts, side="right") - 1, 0, dts.shape[0] - 1)
    at = cum_s[i] + (cuts - cum_t[i]) * g[i]
    sums = np.diff(np.concatenate(([0.0], at, [cum_s[-1]])))
    means = ref + sums / size
    est = float(ref + math.fsum(dts * g) / T)
    se = float(np.std(means, ddof=1) / math.sqrt(B))
    return BatchMeans(se, est, means, True)


def batch_means_from_batches(batch_sums, batch_weights) -> BatchMeans:
    """SE from precomputed per-batch sums and weights (equal weights assumed)."""
    s = np.asarray(batch_sums, dtype=float)
    w = np.asarray(batch_weights, dtype=float)
    ok = w > 0
    if ok.sum() < 2:
        return BatchMeans(math.nan, math.nan, np.array([]), False)
    means = s[ok] / w[ok]
    se = float(np.std(means, ddof=1) / math.sqrt(ok.sum()))
    return BatchMeans(se, float(s.sum() / w.sum()), means, True)


def regenerative_se(sum_y, sum_t, sum_yy, sum_yt, sum_tt, n) -> float:
    """Ratio-estimator SE from per-tour (Y_i, T_i) moment sums."""
    if not sum_t > 0.0 or n < 2:
        return math.nan
    est = sum_y / sum_t
    var = sum_yy - 2.0 * est * sum_yt + est * est * sum_tt
    return math.sqrt(max(var, 0.0)) / sum_t
