import math

import numpy as np
import pytest
from scipy import stats

from jumprestore import InvalidParameterError, UnnormalizedDensity
from jumprestore.estimator import regenerative_se
from jumprestore.finite import build_restore, random_instance, simplified_killing_rate, two_state_fixture
from jumprestore.kernels import (
    LOCAL_RWM,
    HistogramSpec,
    ObservableSpec,
    continuous_tours,
    finite_tours,
    row_cumsum,
)
from jumprestore.local import FiniteChainStep, FiniteDistribution, GaussianStep, MetropolisHastings, UniformBox
from jumprestore.restore import (
    Event,
    KillingRate,
    Termination,
    TourBudget,
    competing_clocks,
    killing_rate_simplified,
    run_sequential,
    simulate_tour,
)
from jumprestore.rng import RngStream
from jumprestore.targets import builtin_target, finite_target


def test_simplified_rate_equals_kappa0_when_target_is_regeneration_law():
    p = builtin_target("gaussian")
    for x in (-2.0, 0.0, 0.7):
        assert killing_rate_simplified([x], 0.4, p, p.normalizer, p.eval, p.normalizer) == pytest.approx(0.4)


def test_simplified_rate_is_infinite_off_support():
    p = UnnormalizedDensity(lambda x: 0.0)
    assert killing_rate_simplified([0.0], 1.0, p, 1.0, lambda x: 1.0, 1.0) == math.inf


def test_two_state_rate():
    p = finite_target([2.0, 1.0])
    mu = np.ones(2)
    kap = [killing_rate_simplified(i, 1.0, p, 3.0, lambda j: mu[j], 2.0) for i in range(2)]
    assert kap == pytest.approx([0.75, 1.5], abs=1e-15)
    assert np.allclose(simplified_killing_rate(1.0, [2.0, 1.0], mu), [0.75, 1.5])


def test_killing_rate_constructors():
    p = builtin_target("gaussian")
    k = KillingRate.effective(p, lambda x: 1.0, c=2.0)
    assert k([0.0]) == 2.0 and k.c_eff == 2.0
    with pytest.raises(InvalidParameterError):
        KillingRate.effective(p, lambda x: 1.0, c=0.0)
    with pytest.raises(InvalidParameterError):
        KillingRate.finite([1.0, -1.0])
    assert KillingRate.finite([1.0, math.inf])(1) == math.inf
    assert KillingRate.custom(lambda x: 1e308 * 10)(0) == math.inf
    assert KillingRate.constant(1e305)(0) == 1e300
    with pytest.raises(InvalidParameterError):
        KillingRate.custom(lambda x: -1.0)(0)
    with pytest.raises(InvalidParameterError):
        TourBudget(0)


def test_competing_clocks_extremes():
    rng = RngStream(1, 0)
    for _ in range(100):
        assert competing_clocks(math.inf, rng) == (0.0, Event.KILL)
    times = []
    for _ in range(5000):
        dt, ev = competing_clocks(0.0, rng)
        assert ev is Event.LOCAL_STEP
        times.append(dt)
    assert stats.kstest(times, "expon").pvalue > 0.001


def test_competing_clocks_unit_rate_law():
    rng = RngStream(2, 0)
    n = 100_000
    kills = 0
    times = np.empty(n)
    for i in range(n):
        dt, ev = competing_clocks(1.0, rng)
        kills += ev is Event.KILL
        times[i] = dt
    assert abs(kills - n / 2) <= 3 * math.sqrt(n / 4)
    assert stats.kstest(times, "expon", args=(0, 0.5)).pvalue > 0.001


class Always:
    """Local rule that never moves (one uniform per step, like the finite kernel)."""

    def step(self, x, rng):
        rng.uniform()
        return x, False


def test_spawn_outside_support_is_killed_immediately():
    p = UnnormalizedDensity(lambda x: 0.0)
    mu = UniformBox([0.0], [1.0])
    kappa = KillingRate.effective(p, mu.unnormalized)
    tour = simulate_tour(mu, Always(), kappa, rng=RngStream(0, 5))
    assert tour.killed and tour.lifetime == 0.0 and len(tour.samples) == 1
    assert tour.samples[0].dt == 0.0 and tour.index == 5 and tour.events == 0


def test_constant_rate_lifetime_is_exponential():
    mu = FiniteDistribution([1.0])
    kappa0 = 0.5
    n = 100_000
    life = np.array([simulate_tour(mu, Always(), KillingRate.constant(kappa0), rng=RngStream(3, i)).lifetime
                     for i in range(n)])
    se = life.std() / math.sqrt(n)
    assert abs(life.mean() - 1 / kappa0) < 3 * se
    assert stats.kstest(life, "expon", args=(0, 1 / kappa0)).pvalue > 0.001


def test_budget_exhaustion_keeps_samples():
    mu = FiniteDistribution([1.0])
    tour = simulate_tour(mu, Always(), KillingRate.constant(0.0), TourBudget(25), RngStream(0, 0))
    assert tour.termination is Termination.BUDGET_EXHAUSTED
    assert tour.events == 25 and len(tour.samples) == 25
    assert all(s.dt > 0 for s in tour.samples)


def test_killed_tour_ends_with_kill_time():
    inst = two_state_fixture()
    sys_ = build_restore(inst)
    mu = FiniteDistribution(inst.mu_tilde)
    tour = simulate_tour(mu, FiniteChainStep(sys_.K0), KillingRate.finite(sys_.kappa), rng=RngStream(4, 1))
    assert tour.killed
    assert len(tour.samples) == tour.events + 1
    assert tour.exit_point == tour.samples[-1].x


def _finite_occupancy(inst, kappa, n_tours, seed=11, block=100_000):
    sys_ = build_restore(inst, kappa)
    p_cum = row_cumsum(sys_.K0)
    mu_cum = np.cumsum(inst.mu_tilde / inst.mu_tilde.sum())
    F = np.eye(inst.n)
    occ = np.zeros(inst.n)
    sy = np.zeros(inst.n)
    syy = np.zeros(inst.n)
    syt = np.zeros(inst.n)
    st = stt = 0.0
    for first in range(0, n_tours, block):
        o, obs, yy, yt, mom, counts = finite_tours(seed, first, min(block, n_tours - first), p_cum, mu_cum,
                                                   sys_.kappa, F, 10**7)
        occ += o.sum(0)
        sy += obs.sum(0)
        syy += yy
        syt += yt
        st += mom[0] + mom[1]
        stt += mom[2]
    se = np.array([regenerative_se(sy[k], st, syy[k], syt[k], stt, n_tours) for k in range(inst.n)])
    return occ / occ.sum(), se, sys_.pi


def test_two_state_occupancy_matches_target():
    inst = two_state_fixture()
    est, se, pi = _finite_occupancy(inst, [0.75, 1.5], 10**6)
    assert np.allclose(pi, [2 / 3, 1 / 3])
    assert np.all(np.abs(est - pi) < 3 * se)


def test_five_state_occupancy_tv_small():
    for s in range(5):
        inst = random_instance(500 + s, n=5)
        kappa = simplified_killing_rate(1.0, inst.p_tilde, inst.mu_tilde)
        # about 10^7 events: each tour has roughly 1 + mean lifetime events
        mean_events = 1 + float(inst.mu_tilde / inst.mu_tilde.sum() @ (1 / kappa))
        est, _, pi = _finite_occupancy(inst, kappa, int(10**7 / (2 * mean_events)), seed=s)
        assert 0.5 * np.abs(est - pi).sum() < 0.01


def _rwm_setup():
    target = builtin_target("trimodal1d")
    lo, hi = np.array([-40.0]), np.array([25.0])
    mu = UniformBox(lo, hi)
    c = 1.0
    kappa = KillingRate.effective(target, mu.unnormalized, c)
    local = MetropolisHastings(target, GaussianStep(1.0))
    return target, lo, hi, mu, kappa, local, c


def test_object_tours_match_compiled_kernel_bitwise():
    target, lo, hi, mu, kappa, local, c = _rwm_setup()
    obs = ObservableSpec.build([{"kind": "coord", "dim": 0}])
    hist = HistogramSpec(0, -40.0, 25.0, 65)
    ys, ts = [], []
    for i in range(40):
        tour = simulate_tour(mu, local, kappa, rng=RngStream(77, i))
        ys.append(math.fsum(s.dt * s.x[0] for s in tour.samples))
        ts.append(tour.lifetime)
        out = continuous_tours(77, i, 1, target.packed, False, lo, hi, LOCAL_RWM, 1.0, 0.0, 0.0, 1,
                               np.ones(1), c, obs, hist, 10**7)
        obs_sc, _, _, mom, _, _, counts = out
        assert counts[5] == tour.events and counts[6] == tour.accepted
        assert obs_sc[0, 0] + obs_sc[1, 0] == pytest.approx(ys[-1], rel=1e-13, abs=1e-13)
        assert mom[0] + mom[1] == pytest.approx(ts[-1], rel=1e-13, abs=1e-15)


def test_run_sequential_single_pair():
    rng = RngStream(0, 0)
    out = run_sequential(0, 1, Always(), KillingRate.finite([0.75, 1.5]), FiniteDistribution([1, 1]), rng)
    assert len(out) == 1 and out[0].x == 0 and out[0].dt > 0
    with pytest.raises(InvalidParameterError):
        run_sequential(0, 0, Always(), KillingRate.constant(1.0), FiniteDistribution([1]), rng)


def test_run_sequential_absorbing_point():
    class Drift:
        def step(self, x, rng):
            rng.uniform()
            return x + 1, True

    kappa = KillingRate.custom(lambda x: 1.0 if x == 3 else math.inf)
    point = FiniteDistribution([0, 0, 0, 1.0])
    out = run_sequential(3, 200, Drift(), kappa, point, RngStream(1, 0))
    assert all(s.x == 3 or s.dt == 0.0 for s in out)
    assert all(s.x in (3, 4) for s in out)


def test_run_sequential_equals_concatenated_tours():
    inst = random_instance(8, n=6)
    sys_ = build_restore(inst)
    local = FiniteChainStep(sys_.K0)
    kappa = KillingRate.finite(sys_.kappa)
    mu = FiniteDistribution(inst.mu_tilde)
    N = 3000
    # tours drawn from one stream; the path starts from the first tour's spawn
    rng = RngStream(5, 0)
    concat = []
    while len(concat) < N:
        concat.extend(simulate_tour(mu, local, kappa, rng=rng).samples)
    concat = concat[:N]
    rng2 = RngStream(5, 0)
    x0 = mu.sample(None, rng2)
    seq = run_sequential(x0, N, local, kappa, mu, rng2)
    assert [(s.dt, s.x) for s in seq] == [(s.dt, s.x) for s in concat]


def test_run_sequential_and_tours_have_same_law():
    inst = random_instance(9, n=5)
    sys_ = build_restore(inst)
    local = FiniteChainStep(sys_.K0)
    kappa = KillingRate.finite(sys_.kappa)
    mu = FiniteDistribution(inst.mu_tilde)
    N = 500_000
    seq = run_sequential(0, N, local, kappa, mu, RngStream(21, 0))
    a = np.bincount([s.x for s in seq], minlength=5)
    b = np.zeros(5, int)
    i = 0
    while b.sum() < N:
        for s in simulate_tour(mu, local, kappa, rng=RngStream(22, i)).samples:
            b[s.x] += 1
        i += 1
    _, pval, _, _ = stats.chi2_contingency(np.vstack([a, b]))
    assert pval > 0.001
