"""Block kernels as explicit scalar loops (numba-compiled when enabled).

Every kernel simulates a contiguous range of tour (or chain) indices. Tour
``i`` draws from the stream ``(seed, i)`` starting at counter 0, so results do
not depend on how indices are grouped into blocks. Per-tour sums are folded
into the block totals in ascending index order.

Random draw order per Restore iteration: holding-time uniform, killing-time
uniform, then (local step only) the proposal draws followed by one acceptance
uniform. The object-level API in ``restore``/``local`` follows the same order.
"""

import math

import numpy as np

from .._accel import jit
from ._scalar import (
    KAPPA_CAP,
    exp_time,
    neumaier,
    normal,
    normal_pdf,
    observable,
    stream_key,
    target_density,
    target_grad_log,
    target_logp,
    uniform,
    wrap1,
    wrapped_normal_pdf,
)

LOCAL_RWM = 0
LOCAL_MALA = 1
LOCAL_HMC = 2

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@jit
def wrapped_normal_logpdf(delta, sd):
    a = abs(delta)
    a = abs(a - math.floor(a + 0.5))
    l0 = -0.5 * (a / sd) ** 2
    l1 = -0.5 * ((a - 1.0) / sd) ** 2
    l2 = -0.5 * ((a + 1.0) / sd) ** 2
    return l0 + math.log(1.0 + math.exp(l1 - l0) + math.exp(l2 - l0)) - math.log(sd) - LOG_SQRT_2PI


@jit
def gauss_logq(x_from, mean_shift, y, sd, torus):
    """log N(y; x_from + mean_shift, sd^2 I), wrapped on the torus."""
    s = 0.0
    for j in range(y.shape[0]):
        delta = y[j] - (x_from[j] + mean_shift[j])
        if torus:
            s += wrapped_normal_logpdf(delta, sd)
        else:
            s += -0.5 * (delta / sd) ** 2 - math.log(sd) - LOG_SQRT_2PI
    return s


@jit
def rwm_q(x, y, sd, torus):
    q = 1.0
    for j in range(x.shape[0]):
        if torus:
            q *= wrapped_normal_pdf(y[j] - x[j], sd)
        else:
            q *= normal_pdf(y[j] - x[j], sd)
    return q


@jit
def in_box(x, lo, hi):
    for j in range(x.shape[0]):
        if x[j] < lo[j] or x[j] >= hi[j]:
            return False
    return True


@jit
def categorical(cum, u):
    n = cum.shape[0]
    for j in range(n):
        if cum[j] > u:
            return j
    return n - 1


@jit
def _leapfrog(tkind, coef, means, inv_sd, extra, y, v, g, eps, n_leap, mass, torus):
    """In-place leapfrog on (y, v); ``g`` holds grad log p~(y) on entry and exit."""
    d = y.shape[0]
    for j in range(d):
        v[j] += 0.5 * eps * g[j]
    for step in range(n_leap):
        for j in range(d):
            y[j] += eps * v[j] / mass[j]
            if torus:
                y[j] = wrap1(y[j])
        target_grad_log(tkind, coef, means, inv_sd, extra, y, g)
        scale = eps if step < n_leap - 1 else 0.5 * eps
        for j in range(d):
            v[j] += scale * g[j]


@jit
def _local_move(key, ctr, tkind, coef, means, inv_sd, extra, torus, local_kind,
                sigma, dt, eps, n_leap, mass, x, px, lpx, gx, y, gy, v, shift):
    """One MH-adjusted local move from ``x``; returns (ctr, accepted, py, lpy).

    On acceptance ``y``/``gy`` hold the new state and its gradient.
    """
    d = x.shape[0]
    if local_kind == LOCAL_RWM:
        for j in range(d):
            y[j] = x[j] + sigma * normal(key, ctr)
            ctr += 2
            if torus:
                y[j] = wrap1(y[j])
        py = target_density(tkind, coef, means, inv_sd, extra, y)
        alpha = 1.0
        if px > 0.0:
            alpha = min(1.0, py / px)
        u = uniform(key, ctr)
        ctr += 1
        return ctr, u < alpha, py, 0.0
    if local_kind == LOCAL_MALA:
        sd = math.sqrt(dt) * sigma
        half = 0.5 * dt * sigma * sigma
        for j in range(d):
            shift[j] = half * gx[j]
        for j in range(d):
            y[j] = x[j] + shift[j] + sd * normal(key, ctr)
            ctr += 2
            if torus:
                y[j] = wrap1(y[j])
        py = target_density(tkind, coef, means, inv_sd, extra, y)
        lpy = target_logp(tkind, coef, means, inv_sd, extra, y)
        target_grad_log(tkind, coef, means, inv_sd, extra, y, gy)
        lq_xy = gauss_logq(x, shift, y, sd, torus)
        for j in range(d):
            shift[j] = half * gy[j]
        lq_yx = gauss_logq(y, shift, x, sd, torus)
        alpha = 1.0
        if px > 0.0:
            lr = lpy - lpx + lq_yx - lq_xy
            alpha = math.exp(min(0.0, lr)) if lr == lr else 0.0
        u = uniform(key, ctr)
        ctr += 1
        return ctr, u < alpha, py, lpy
    # HMC
    k0 = 0.0
    for j in range(d):
        v[j] = math.sqrt(mass[j]) * normal(key, ctr)
        ctr += 2
        k0 += 0.5 * v[j] * v[j] / mass[j]
        y[j] = x[j]
        gy[j] = gx[j]
    _leapfrog(tkind, coef, means, inv_sd, extra, y, v, gy, eps, n_leap, mass, torus)
    k1 = 0.0
    for j in range(d):
        k1 += 0.5 * v[j] * v[j] / mass[j]
    lpy = target_logp(tkind, coef, means, inv_sd, extra, y)
    lr = lpy - lpx - (k1 - k0)
    alpha = math.exp(min(0.0, lr)) if lr == lr else 0.0
    u = uniform(key, ctr)
    ctr += 1
    py = target_density(tkind, coef, means, inv_sd, extra, y)
    return ctr, u < alpha, py, lpy


@jit
def continuous_tours(seed_mixed, first, count, tkind, coef, means, inv_sd, extra,
                     torus, lo, hi, local_kind, sigma, dt, eps, n_leap, mass, c_eff,
                     obs_kind, obs_dim, obs_lo, obs_hi,
                     hist_dim, hist_lo, hist_hi, n_bins, max_events):
    d = lo.shape[0]
    m = obs_kind.shape[0]
    obs_sc = np.zeros((2, m))
    yy = np.zeros(m)
    yt = np.zeros(m)
    mom = np.zeros(3)
    hist_sc = np.zeros((2, n_bins))
    hist_out = np.zeros(2)
    counts = np.zeros(7, np.int64)
    x = np.empty(d)
    y = np.empty(d)
    gx = np.zeros(d)
    gy = np.zeros(d)
    v = np.empty(d)
    shift = np.empty(d)
    tour_y = np.zeros((2, m))
    width = (hist_hi - hist_lo) / n_bins

    for t in range(count):
        key = stream_key(seed_mixed, first + t)
        ctr = 0
        for j in range(d):
            x[j] = lo[j] + (hi[j] - lo[j]) * uniform(key, ctr)
            ctr += 1
            if torus:
                x[j] = wrap1(x[j])
        px = target_density(tkind, coef, means, inv_sd, extra, x)
        lpx = 0.0
        if local_kind != LOCAL_RWM:
            lpx = target_logp(tkind, coef, means, inv_sd, extra, x)
            target_grad_log(tkind, coef, means, inv_sd, extra, x, gx)
        for k in range(m):
            tour_y[0, k] = 0.0
            tour_y[1, k] = 0.0
        ts = 0.0
        tc = 0.0
        n_local = 0
        killed = False
        while True:
            if px == 0.0:
                kap = math.inf
            elif in_box(x, lo, hi):
                kap = min(c_eff / px, KAPPA_CAP)
            else:
                kap = 0.0
            t1 = exp_time(uniform(key, ctr), 1.0)
            t2 = exp_time(uniform(key, ctr + 1), kap)
            ctr += 2
            step = t1 < t2
            h = t1 if step else t2
            counts[4] += 1
            ts, tc = neumaier(ts, tc, h)
            for k in range(m):
                f = observable(obs_kind[k], obs_dim[k], obs_lo[k], obs_hi[k], x)
                tour_y[0, k], tour_y[1, k] = neumaier(tour_y[0, k], tour_y[1, k], h * f)
            hv = x[hist_dim]
            if hv < hist_lo:
                hist_out[0] += h
            elif hv >= hist_hi:
                hist_out[1] += h
            else:
                b = int((hv - hist_lo) / width)
                if b >= n_bins:
                    b = n_bins - 1
                hist_sc[0, b], hist_sc[1, b] = neumaier(hist_sc[0, b], hist_sc[1, b], h)
            if not step:
                killed = True
                break
            ctr, acc, py, lpy = _local_move(key, ctr, tkind, coef, means, inv_sd, extra, torus,
                                            local_kind, sigma, dt, eps, n_leap, mass,
                                            x, px, lpx, gx, y, gy, v, shift)
            n_local += 1
            counts[5] += 1
            if acc:
                counts[6] += 1
                for j in range(d):
                    x[j] = y[j]
                    gx[j] = gy[j]
                px = py
                lpx = lpy
            if n_local >= max_events:
                break
        T = ts + tc
        counts[0] += 1
        if killed:
            counts[1] += 1
        else:
            counts[2] += 1
        if T == 0.0:
            counts[3] += 1
        mom[0], mom[1] = neumaier(mom[0], mom[1], T)
        mom[2] += T * T
        for k in range(m):
            Y = tour_y[0, k] + tour_y[1, k]
            obs_sc[0, k], obs_sc[1, k] = neumaier(obs_sc[0, k], obs_sc[1, k], Y)
            yy[k] += Y * Y
            yt[k] += Y * T
    return obs_sc, yy, yt, mom, hist_sc, hist_out, counts


@jit
def mh_chains(seed_mixed, chain_ids, x0, ctr0, n_steps, tkind, coef, means, inv_sd, extra,
              torus, lo, hi, lam, local_kind, sigma, dt, eps, n_leap, mass,
              obs_kind, obs_dim, obs_lo, obs_hi,
              hist_dim, hist_lo, hist_hi, n_bins, n_batches):
    """Metropolis-Hastings chains with the large-step/small-step mixture proposal.

    For RWM and MALA the acceptance uses the mixture density
    ``lam * mu(y) + (1 - lam) * zeta(x, y)``. HMC has no proposal density, so
    there the chain mixes the two MH kernels instead.

    Each of the ``n_steps`` iterations records the current state and then
    transitions, so the returned final states and counters continue the
    chains seamlessly in a later call.
    """
    nc = chain_ids.shape[0]
    d = lo.shape[0]
    m = obs_kind.shape[0]
    obs_sc = np.zeros((nc, 2, m))
    batch = np.zeros((nc, n_batches, m))
    hist = np.zeros((nc, 2, n_bins))
    hist_out = np.zeros((nc, 2))
    stats = np.zeros((nc, 4), np.int64)
    final = np.empty((nc, d))
    ctr_out = np.empty(nc, np.int64)
    x = np.empty(d)
    y = np.empty(d)
    gx = np.zeros(d)
    gy = np.zeros(d)
    v = np.empty(d)
    shift = np.empty(d)
    width = (hist_hi - hist_lo) / n_bins
    vol = 1.0
    for j in range(d):
        vol *= hi[j] - lo[j]
    sd_mala = math.sqrt(dt) * sigma
    half = 0.5 * dt * sigma * sigma

    for c in range(nc):
        key = stream_key(seed_mixed, chain_ids[c])
        ctr = ctr0[c]
        for j in range(d):
            x[j] = x0[c, j]
        px = target_density(tkind, coef, means, inv_sd, extra, x)
        lpx = 0.0
        if local_kind != LOCAL_RWM:
            lpx = target_logp(tkind, coef, means, inv_sd, extra, x)
            target_grad_log(tkind, coef, means, inv_sd, extra, x, gx)
        b = 0
        b_end = n_steps // n_batches
        for t in range(n_steps):
            while t >= b_end and b < n_batches - 1:
                b += 1
                b_end = (b + 1) * n_steps // n_batches
            for k in range(m):
                f = observable(obs_kind[k], obs_dim[k], obs_lo[k], obs_hi[k], x)
                obs_sc[c, 0, k], obs_sc[c, 1, k] = neumaier(obs_sc[c, 0, k], obs_sc[c, 1, k], f)
                batch[c, b, k] += f
            hv = x[hist_dim]
            if hv < hist_lo:
                hist_out[c, 0] += 1.0
            elif hv >= hist_hi:
                hist_out[c, 1] += 1.0
            else:
                hb = int((hv - hist_lo) / width)
                if hb >= n_bins:
                    hb = n_bins - 1
                hist[c, 0, hb], hist[c, 1, hb] = neumaier(hist[c, 0, hb], hist[c, 1, hb], 1.0)
            u_mix = uniform(key, ctr)
            ctr += 1
            stats[c, 0] += 1
            is_global = u_mix < lam
            if is_global:
                stats[c, 2] += 1
                for j in range(d):
                    y[j] = lo[j] + (hi[j] - lo[j]) * uniform(key, ctr)
                    ctr += 1
                    if torus:
                        y[j] = wrap1(y[j])
                py = target_density(tkind, coef, means, inv_sd, extra, y)
                lpy = 0.0
                if local_kind != LOCAL_RWM:
                    lpy = target_logp(tkind, coef, means, inv_sd, extra, y)
                    target_grad_log(tkind, coef, means, inv_sd, extra, y, gy)
                if local_kind == LOCAL_HMC:
                    mu_x = 1.0 / vol if in_box(x, lo, hi) else 0.0
                    mu_y = 1.0 / vol if in_box(y, lo, hi) else 0.0
                    den = px * mu_y
                    alpha = 1.0 if den <= 0.0 else min(1.0, py * mu_x / den)
                    u = uniform(key, ctr)
                    ctr += 1
                    acc = u < alpha
                else:
                    acc = False
                    alpha = -1.0
            else:
                if local_kind == LOCAL_HMC:
                    ctr, acc, py, lpy = _local_move(key, ctr, tkind, coef, means, inv_sd, extra,
                                                    torus, local_kind, sigma, dt, eps, n_leap,
                                                    mass, x, px, lpx, gx, y, gy, v, shift)
                    alpha = 0.0
                else:
                    if local_kind == LOCAL_RWM:
                        for j in range(d):
                            y[j] = x[j] + sigma * normal(key, ctr)
                            ctr += 2
                            if torus:
                                y[j] = wrap1(y[j])
                    else:
                        for j in range(d):
                            y[j] = x[j] + half * gx[j] + sd_mala * normal(key, ctr)
                            ctr += 2
                            if torus:
                                y[j] = wrap1(y[j])
                    py = target_density(tkind, coef, means, inv_sd, extra, y)
                    lpy = 0.0
                    if local_kind == LOCAL_MALA:
                        lpy = target_logp(tkind, coef, means, inv_sd, extra, y)
                        target_grad_log(tkind, coef, means, inv_sd, extra, y, gy)
                    alpha = -1.0
                    acc = False
            if local_kind != LOCAL_HMC:
                # mixture-density acceptance shared by global and local proposals
                mu_x = 1.0 / vol if in_box(x, lo, hi) else 0.0
                mu_y = 1.0 / vol if in_box(y, lo, hi) else 0.0
                if local_kind == LOCAL_RWM:
                    z_xy = rwm_q(x, y, sigma, torus)
                    z_yx = z_xy
                else:
                    for j in range(d):
                        shift[j] = half * gx[j]
                    z_xy = math.exp(gauss_logq(x, shift, y, sd_mala, torus))
                    for j in range(d):
                        shift[j] = half * gy[j]
                    z_yx = math.exp(gauss_logq(y, shift, x, sd_mala, torus))
                q_xy = lam * mu_y + (1.0 - lam) * z_xy
                q_yx = lam * mu_x + (1.0 - lam) * z_yx
                den = px * q_xy
                alpha = 1.0 if den <= 0.0 else min(1.0, py * q_yx / den)
                u = uniform(key, ctr)
                ctr += 1
                acc = u < alpha
            if acc:
                stats[c, 1] += 1
                if is_global:
                    stats[c, 3] += 1
                for j in range(d):
                    x[j] = y[j]
                    gx[j] = gy[j]
                px = py
                lpx = lpy
        for j in range(d):
            final[c, j] = x[j]
        ctr_out[c] = ctr
    return obs_sc, batch, hist, hist_out, stats, final, ctr_out


@jit
def finite_tours(seed_mixed, first, count, p_cum, mu_cum, kappa, F, max_events):
    n = p_cum.shape[0]
    m = F.shape[0]
    occ = np.zeros((2, n))
    obs_sc = np.zeros((2, m))
    yy = np.zeros(m)
    yt = np.zeros(m)
    mom = np.zeros(3)
    counts = np.zeros(7, np.int64)
    tour_y = np.zeros((2, m))
    for t in range(count):
        key = stream_key(seed_mixed, first + t)
        ctr = 0
        x = categorical(mu_cum, uniform(key, ctr))
        ctr += 1
        for k in range(m):
            tour_y[0, k] = 0.0
            tour_y[1, k] = 0.0
        ts = 0.0
        tc = 0.0
        n_local = 0
        killed = False
        while True:
            kap = kappa[x]
            if kap > KAPPA_CAP and kap != math.inf:
                kap = KAPPA_CAP
            t1 = exp_time(uniform(key, ctr), 1.0)
            t2 = exp_time(uniform(key, ctr + 1), kap)
            ctr += 2
            step = t1 < t2
            h = t1 if step else t2
            counts[4] += 1
            ts, tc = neumaier(ts, tc, h)
            occ[0, x], occ[1, x] = neumaier(occ[0, x], occ[1, x], h)
            for k in range(m):
                tour_y[0, k], tour_y[1, k] = neumaier(tour_y[0, k], tour_y[1, k], h * F[k, x])
            if not step:
                killed = True
                break
            y = categorical(p_cum[x], uniform(key, ctr))
            ctr += 1
            n_local += 1
            counts[5] += 1
            if y != x:
                counts[6] += 1
            x = y
            if n_local >= max_events:
                break
        T = ts + tc
        counts[0] += 1
        if killed:
            counts[1] += 1
        else:
            counts[2] += 1
        if T == 0.0:
            counts[3] += 1
        mom[0], mom[1] = neumaier(mom[0], mom[1], T)
        mom[2] += T * T
        for k in range(m):
            Y = tour_y[0, k] + tour_y[1, k]
            obs_sc[0, k], obs_sc[1, k] = neumaier(obs_sc[0, k], obs_sc[1, k], Y)
            yy[k] += Y * Y
            yt[k] += Y * T
    return occ, obs_sc, yy, yt, mom, counts


@jit
def finite_chain(seed_mixed, index, x0, p_cum, n_steps):
    key = stream_key(seed_mixed, index)
    out = np.empty(n_steps, np.int64)
    x = x0
    out[0] = x
    for t in range(1, n_steps):
        x = categorical(p_cum[x], uniform(key, t - 1))
        out[t] = x
    return out
