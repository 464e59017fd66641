"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
Every check computes its quantity at full size and compares it with the
stated tolerance; nothing is loosened when a check fails.
"""

import copy
import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest
from scipy import stats

from jumprestore.estimator import batch_means_arrays, tv_distance
from jumprestore.finite import (
    asymptotic_variance,
    build_restore,
    check_invariance,
    general_killing_rate,
    mh_kernel_matrix,
    random_instance,
    simplified_killing_rate,
    theorem_ordering_check,
    theorem_threshold,
    two_state_fixture,
)
from jumprestore.harness import PRESETS, run
from jumprestore.kernels import finite_chain, finite_tours, row_cumsum
from jumprestore.local import HmcSpec, MalaKernel, leapfrog
from jumprestore.restore import Event, KillingRate, competing_clocks, simulate_tour
from jumprestore.local import FiniteDistribution, FiniteChainStep
from jumprestore.rng import RngStream
from jumprestore.targets import builtin_target, mixture_bin_masses, mixture_interval_mass, trimodal_basins

DURATIONS = {}


def _timed(k, fn):
    t0 = time.perf_counter()
    out = fn()
    DURATIONS[k] = time.perf_counter() - t0
    return out


# -- 1: three-mode experiment ----------------------------------------------------------


def check_criterion_1():
    t0 = time.perf_counter()
    target = builtin_target("trimodal1d")
    basins = trimodal_basins()
    names = ["basin_left", "basin_center", "basin_right"]
    mh = run(copy.deepcopy(PRESETS["trimodal-mh-local"]), workers=1)
    per_chain = mh["estimate"]["per_chain"]
    outside = [1.0 - per_chain[names[c]][c] for c in range(3)]
    rs = run(copy.deepcopy(PRESETS["trimodal-restore"]), workers=1)
    est = rs["estimate"]["estimates"]
    exact = [mixture_interval_mass(target, lo, hi) for lo, hi in basins]
    mass_err = [abs(est[n] - e) for n, e in zip(names, exact)]
    hist = np.asarray(rs["histogram"]) / math.fsum(rs["histogram"])
    tv = tv_distance(hist, mixture_bin_masses(target, rs["edges"]))
    secs = time.perf_counter() - t0
    ok_trap = all(o < 0.01 for o in outside)
    ok = ok_trap and max(mass_err) <= 0.02 and tv < 0.05 and secs < 60
    detail = (f"local MH outside-basin fractions {', '.join(f'{o:.4f}' for o in outside)} (need < 0.01); "
              f"restore basin masses {', '.join(f'{est[n]:.4f}' for n in names)} vs "
              f"{', '.join(f'{e:.4f}' for e in exact)} (max err {max(mass_err):.4f} <= 0.02); "
              f"TV {tv:.4f} < 0.05; {secs:.1f}s < 60s")
    return ok, detail


# -- 2: finite invariance ----------------------------------------------------------------

DESIGNATED = [500, 501, 502, 503, 504]


def occupancy_tv(seed, events=10**7, block=200_000):
    inst = random_instance(seed, n=5)
    kappa = simplified_killing_rate(1.0, inst.p_tilde, inst.mu_tilde)
    sys_ = build_restore(inst, kappa)
    p_cum = row_cumsum(sys_.K0)
    mu_cum = np.cumsum(inst.mu_tilde / inst.mu_tilde.sum())
    occ = np.zeros(5)
    done = first = 0
    while done < events:
        o, _, _, _, _, counts = finite_tours(seed, first, block, p_cum, mu_cum, kappa, np.eye(5), 10**7)
        occ += o[0] + o[1]
        done += int(counts[4])
        first += block
    return 0.5 * float(np.abs(occ / occ.sum() - sys_.pi).sum()), done


def check_criterion_2():
    worst = 0.0
    for s in range(50):
        sys_ = build_restore(random_instance(s, kappa0=1.0))
        worst = max(worst, check_invariance(sys_.pi, sys_.A))
    tvs = [occupancy_tv(s) for s in DESIGNATED]
    ok = worst < 1e-10 and all(t < 0.01 for t, _ in tvs)
    detail = (f"max |pi^T A| over 50 instances {worst:.2e} < 1e-10; occupation TV on 5 instances "
              f"{', '.join(f'{t:.4f}' for t, _ in tvs)} < 0.01 (>= {min(e for _, e in tvs):.2e} events each)")
    return ok, detail


# -- 3: Dirichlet-form ordering ----------------------------------------------------------


def check_criterion_3():
    worst = math.inf
    violating = 0
    for s in range(100):
        inst = random_instance(s)
        rep = theorem_ordering_check(inst, kappa0=theorem_threshold(inst.p_tilde, inst.lam), n_f=20, seed=s)
        worst = min(worst, rep.min_difference)
        violating += rep.min_difference < -1e-12
    ok = violating == 0
    detail = f"min E - E_lam over 100 instances x 20 f = {worst:.3e} (need >= -1e-12); violating instances {violating}"
    return ok, detail


# -- 4: killing-rate simplification ----------------------------------------------------------


def check_criterion_4():
    worst = 0.0
    for s in range(100):
        inst = random_instance(s, kappa0=1.0)
        K, _ = mh_kernel_matrix(inst.Q, inst.p_tilde)
        M = np.tile(inst.mu_tilde / inst.mu_tilde.sum(), (inst.n, 1))
        g = general_killing_rate(1.0, M, K - np.eye(inst.n), inst.p_tilde)
        worst = max(worst, float(np.max(np.abs(g - simplified_killing_rate(1.0, inst.p_tilde, inst.mu_tilde)))))
    return worst < 1e-12, f"max |general - simplified| over 100 instances {worst:.2e} < 1e-12"


# -- 5: kernels ------------------------------------------------------------------------------

GRAD_CASES = [
    ("gaussian", {}, (-3, 3)),
    ("gaussian-mixture", {"weights": [0.2, 0.8], "means": [[-1.0, 0.0], [2.0, 1.0]],
                          "sds": [[0.5, 1.0], [1.5, 0.7]]}, (-3, 3)),
    ("trimodal1d", {}, (-40, 25)),
    ("donut2d", {}, (-3, 3)),
]


def _gradient_error():
    worst = 0.0
    rng = np.random.default_rng(11)
    h = 1e-5
    for name, params, (lo, hi) in GRAD_CASES:
        t = builtin_target(name, **params)
        d = t.space.dim
        n = 0
        while n < 100:
            x = rng.uniform(lo, hi, size=d)
            if t.eval(x) <= 1e-8:
                continue
            g = t.grad_log(x)
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                fd = (t.log(x + e) - t.log(x - e)) / (2 * h)
                worst = max(worst, abs(g[j] - fd) / max(1.0, abs(g[j])))
            n += 1
    return worst


def _leapfrog_checks():
    t = builtin_target("gaussian-mixture", weights=[1.0, 2.0], means=[[0.0, 1.0], [2.0, -1.0]],
                       sds=[[1.0, 0.5], [0.8, 1.2]])
    rng = np.random.default_rng(3)
    rev = 0.0
    m = np.array([1.0, 2.5])
    for _ in range(20):
        x, v = rng.standard_normal(2), rng.standard_normal(2)
        y, w = leapfrog(x, v, t.grad_log, 0.05, 25, m)
        x2, v2 = leapfrog(y, -w, t.grad_log, 0.05, 25, m)
        rev = max(rev, float(np.max(np.abs(x2 - x))), float(np.max(np.abs(v2 + v))))
    g = builtin_target("gaussian")
    errs = {0.2: [], 0.1: []}
    for _ in range(200):
        x, v = rng.standard_normal(1), rng.standard_normal(1)
        for eps in errs:
            y, w = leapfrog(x, v, g.grad_log, eps, int(round(2.0 / eps)), np.ones(1))
            errs[eps].append(abs((-g.log(y) + 0.5 * w @ w) - (-g.log(x) + 0.5 * v @ v)))
    return rev, float(np.mean(errs[0.2]) / np.mean(errs[0.1]))


def check_criterion_5():
    db = 0.0
    for s in range(50):
        inst = random_instance(100 + s)
        K, _ = mh_kernel_matrix(inst.Q, inst.p_tilde)
        D = inst.pi[:, None] * K
        db = max(db, float(np.max(np.abs(D - D.T))))
    mala = abs(MalaKernel(builtin_target("gaussian"), 0.01).mean([1.0])[0] - 0.995)
    grad = _gradient_error()
    rev, ratio = _leapfrog_checks()
    ok = db < 1e-12 and mala < 1e-12 and grad < 1e-6 and rev < 1e-10 and 3 <= ratio <= 5
    detail = (f"detailed balance {db:.1e} < 1e-12; MALA mean error {mala:.1e} < 1e-12; gradient rel err "
              f"{grad:.1e} < 1e-6; leapfrog reversal {rev:.1e} < 1e-10; energy error ratio {ratio:.2f} in [3, 5]")
    return ok, detail


# -- 6: competing clocks ----------------------------------------------------------------------


def check_criterion_6():
    rng = RngStream(2, 0)
    n = 100_000
    kills = 0
    times = np.empty(n)
    for i in range(n):
        dt, ev = competing_clocks(1.0, rng)
        kills += ev is Event.KILL
        times[i] = dt
    dev = abs(kills - n / 2) / math.sqrt(n / 4)
    p = stats.kstest(times, "expon", args=(0, 0.5)).pvalue
    inf_tours = [simulate_tour(FiniteDistribution([1.0, 1.0]), FiniteChainStep(np.eye(2)),
                               KillingRate.constant(math.inf), rng=RngStream(9, i)) for i in range(1000)]
    zero = all(t.lifetime == 0.0 and t.killed for t in inf_tours)
    ok = dev <= 3 and p > 0.001 and zero
    detail = (f"kill frequency {kills / n:.4f} ({dev:.2f} sigma <= 3); KS p = {p:.3f} > 0.001; "
              f"infinite rate gives zero lifetime in {sum(t.lifetime == 0 for t in inf_tours)}/1000 tours")
    return ok, detail


# -- 7: variance --------------------------------------------------------------------------------


def check_criterion_7():
    pi = np.array([0.2, 0.3, 0.5])
    f = np.array([1.0, -2.0, 4.0])
    iid = abs(asymptotic_variance(pi, f, K=np.tile(pi, (3, 1))) - (pi @ f**2 - (pi @ f) ** 2))
    inst = two_state_fixture()
    K, _ = mh_kernel_matrix(inst.Q, inst.p_tilde)
    g = np.array([1.0, 0.0])
    sigma2 = asymptotic_variance(inst.pi, g, K=K)
    n = 10**7
    states = finite_chain(17, 0, 0, row_cumsum(K), n)
    bm = batch_means_arrays(np.ones(n), g[states], 10_000)
    emp = bm.se**2 * n
    rel = abs(emp / sigma2 - 1)
    ok = iid < 1e-12 and rel < 0.1
    detail = (f"iid asymptotic variance error {iid:.1e} < 1e-12; two-state closed form {sigma2:.5f} vs "
              f"batch means {emp:.5f} at 1e7 steps (rel diff {rel:.3f} < 0.1)")
    return ok, detail


# -- 8: determinism and suite time ---------------------------------------------------------------


def _files(cfg, workers, root):
    d = os.path.join(root, f"w{workers}")
    run(cfg, out_dir=d, workers=workers)
    out = []
    for name in ("estimate.json", "histogram.csv"):
        with open(os.path.join(d, name), "rb") as fh:
            out.append(fh.read())
    return out


def check_criterion_8():
    same = True
    for preset, events in (("trimodal-restore", 200_000), ("trimodal-mh-mixture", 300_000), ("torus-default", 100_000)):
        cfg = copy.deepcopy(PRESETS[preset])
        cfg["budget"] = {"events": events}
        with tempfile.TemporaryDirectory() as root:
            outs = [_files(cfg, w, root) for w in (1, 2, 8)]
        same &= outs[0] == outs[1] == outs[2]
    for k, fn in CHECKS.items():
        if 2 <= k <= 7 and k not in DURATIONS:
            _timed(k, fn)
    total = sum(DURATIONS[k] for k in range(2, 8))
    ok = same and total < 600
    detail = (f"estimate.json and histogram.csv byte-identical for workers 1, 2, 8: {same}; "
              f"criteria 2-7 took {total:.1f}s < 600s")
    return ok, detail


CHECKS = {1: check_criterion_1, 2: check_criterion_2, 3: check_criterion_3, 4: check_criterion_4,
          5: check_criterion_5, 6: check_criterion_6, 7: check_criterion_7, 8: check_criterion_8}


def report(k):
    ok, detail = _timed(k, CHECKS[k])
    return ok, f"criterion {k} [{'PASS' if ok else 'FAIL'}] {detail}"


@pytest.mark.parametrize("k", sorted(CHECKS))
def test_criterion(k, capsys):
    ok, line = report(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report(k) for k in sorted(CHECKS)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
