"""Pure-numpy block kernels.

Same signatures and random-draw discipline as ``_loops``, but all tours of a
block advance in lockstep with per-tour counters into their own streams. The
states visited are identical to the compiled path up to last-ulp differences
in numpy's transcendental functions; histogram sums are accumulated per
lockstep iteration, so totals agree to rounding only.
"""

import math

import numpy as np

from .. import rng as _rng
from ._scalar import KAPPA_CAP, OBS_COORD, OBS_COORD_SQ, TARGET_MIXTURE
from ._loops import LOCAL_HMC, LOCAL_MALA, LOCAL_RWM

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_ERR = dict(divide="ignore", invalid="ignore", over="ignore", under="ignore")


def _keys(seed_mixed, indices):
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _rng.mix64_array(np.uint64(int(seed_mixed)) ^ (idx * np.uint64(_rng.GAMMA)))


def _u(keys, ctr, offset=0):
    return _rng.uniform_array(keys, ctr + np.uint64(offset))


def _normals(keys, ctr, d):
    """``d`` normals per row from counters ``ctr, ctr+2, ...``."""
    out = np.empty((keys.shape[0], d))
    for j in range(d):
        out[:, j] = _rng.normal_array(keys, ctr + np.uint64(2 * j))
    return out


def _neumaier(s, c, v):
    t = s + v
    big = np.abs(s) >= np.abs(v)
    c = c + np.where(big, (s - t) + v, (v - t) + s)
    return t, c


def _wrap(v):
    r = v - np.floor(v)
    r[r >= 1.0] = np.nextafter(1.0, 0.0)
    return r


def _exp_time(u, rate):
    with np.errstate(**_ERR):
        t = -np.log(1.0 - u) / rate
    t = np.where(rate == np.inf, 0.0, t)
    return np.where(rate <= 0.0, np.inf, t)


# -- targets ------------------------------------------------------------------


def density_rows(tkind, coef, means, inv_sd, extra, X):
    d = X.shape[1]
    if tkind == TARGET_MIXTURE:
        total = np.zeros(X.shape[0])
        for k in range(coef.shape[0]):
            q = np.zeros(X.shape[0])
            for j in range(d):
                z = (X[:, j] - means[k, j]) * inv_sd[k, j]
                q += z * z
            total += coef[k] * np.exp(-0.5 * q)
        return total
    r = np.zeros(X.shape[0])
    for j in range(d):
        r += X[:, j] * X[:, j]
    z = (np.sqrt(r) - extra[0]) / extra[1]
    return np.exp(-0.5 * z * z)


def _mixture_terms(coef, means, inv_sd, X):
    lw = np.empty((coef.shape[0], X.shape[0]))
    for k in range(coef.shape[0]):
        q = np.zeros(X.shape[0])
        for j in range(X.shape[1]):
            z = (X[:, j] - means[k, j]) * inv_sd[k, j]
            q += z * z
        lw[k] = math.log(coef[k]) - 0.5 * q
    return lw


def logp_rows(tkind, coef, means, inv_sd, extra, X):
    if tkind == TARGET_MIXTURE:
        lw = _mixture_terms(coef, means, inv_sd, X)
        top = lw.max(axis=0)
        s = np.zeros(X.shape[0])
        for k in range(lw.shape[0]):
            s += np.exp(lw[k] - top)
        return top + np.log(s)
    r = np.zeros(X.shape[0])
    for j in range(X.shape[1]):
        r += X[:, j] * X[:, j]
    z = (np.sqrt(r) - extra[0]) / extra[1]
    return -0.5 * z * z


def grad_rows(tkind, coef, means, inv_sd, extra, X):
    n, d = X.shape
    out = np.zeros((n, d))
    if tkind == TARGET_MIXTURE:
        lw = _mixture_terms(coef, means, inv_sd, X)
        top = lw.max(axis=0)
        s = np.zeros(n)
        for k in range(lw.shape[0]):
            w = np.exp(lw[k] - top)
            s += w
            for j in range(d):
                out[:, j] -= w * (X[:, j] - means[k, j]) * inv_sd[k, j] * inv_sd[k, j]
        return out / s[:, None]
    r = np.zeros(n)
    for j in range(d):
        r += X[:, j] * X[:, j]
    r = np.sqrt(r)
    with np.errstate(**_ERR):
        fac = np.where(r > 0.0, -(r - extra[0]) / (extra[1] * extra[1] * r), 0.0)
    return fac[:, None] * X


def _observables(obs_kind, obs_dim, obs_lo, obs_hi, X):
    F = np.empty((X.shape[0], obs_kind.shape[0]))
    for k in range(obs_kind.shape[0]):
        v = X[:, obs_dim[k]]
        if obs_kind[k] == OBS_COORD:
            F[:, k] = v
        elif obs_kind[k] == OBS_COORD_SQ:
            F[:, k] = v * v
        else:
            F[:, k] = ((v >= obs_lo[k]) & (v < obs_hi[k])).astype(float)
    return F


def _in_box(X, lo, hi):
    return np.all((X >= lo) & (X < hi), axis=1)


def _wrapped_logpdf(delta, sd):
    a = np.abs(delta)
    a = np.abs(a - np.floor(a + 0.5))
    l0 = -0.5 * (a / sd) ** 2
    l1 = -0.5 * ((a - 1.0) / sd) ** 2
    l2 = -0.5 * ((a + 1.0) / sd) ** 2
    return l0 + np.log(1.0 + np.exp(l1 - l0) + np.exp(l2 - l0)) - math.log(sd) - LOG_SQRT_2PI


def _gauss_logq(x_from, shift, Y, sd, torus):
    s = np.zeros(Y.shape[0])
    for j in range(Y.shape[1]):
        delta = Y[:, j] - (x_from[:, j] + shift[:, j])
        if torus:
            s += _wrapped_logpdf(delta, sd)
        else:
            s += -0.5 * (delta / sd) ** 2 - math.log(sd) - LOG_SQRT_2PI
    return s


def _rwm_q(X, Y, sd, torus):
    q = np.ones(X.shape[0])
    for j in range(X.shape[1]):
        delta = Y[:, j] - X[:, j]
        if torus:
            a = np.abs(delta)
            a = np.abs(a - np.floor(a + 0.5))
            q *= sum(np.exp(-0.5 * ((a + o) / sd) ** 2) * (1.0 / math.sqrt(2 * math.pi)) / sd
                     for o in (-1.0, 0.0, 1.0))
        else:
            q *= np.exp(-0.5 * (delta / sd) ** 2) * (1.0 / math.sqrt(2 * math.pi)) / sd
    return q


def _leapfrog(tgt, Y, V, G, eps, n_leap, mass, torus):
    V += 0.5 * eps * G
    for step in range(n_leap):
        Y += eps * V / mass
        if torus:
            Y[:] = _wrap(Y)
        G[:] = grad_rows(*tgt, Y)
        V += (eps if step < n_leap - 1 else 0.5 * eps) * G


def _local_move(keys, ctr, tgt, torus, local_kind, sigma, dt, eps, n_leap, mass, X, PX, LPX, GX):
    """Vectorised MH-adjusted local move; returns (ctr, acc, Y, PY, LPY, GY)."""
    n, d = X.shape
    Z = _normals(keys, ctr, d)
    ctr = ctr + np.uint64(2 * d)
    with np.errstate(**_ERR):
        if local_kind == LOCAL_RWM:
            Y = X + sigma * Z
            if torus:
                Y = _wrap(Y)
            PY = density_rows(*tgt, Y)
            alpha = np.where(PX > 0.0, np.minimum(1.0, PY / PX), 1.0)
            LPY = np.zeros(n)
            GY = GX
        elif local_kind == LOCAL_MALA:
            sd = math.sqrt(dt) * sigma
            half = 0.5 * dt * sigma * sigma
            shift = half * GX
            Y = X + shift + sd * Z
            if torus:
                Y = _wrap(Y)
            PY = density_rows(*tgt, Y)
            LPY = logp_rows(*tgt, Y)
            GY = grad_rows(*tgt, Y)
            lq_xy = _gauss_logq(X, shift, Y, sd, torus)
            lq_yx = _gauss_logq(Y, half * GY, X, sd, torus)
            lr = LPY - LPX + lq_yx - lq_xy
            a = np.where(np.isnan(lr), 0.0, np.exp(np.minimum(0.0, lr)))
            alpha = np.where(PX > 0.0, a, 1.0)
        else:
            V = np.sqrt(mass) * Z
            k0 = np.zeros(n)
            for j in range(d):
                k0 += 0.5 * V[:, j] * V[:, j] / mass[j]
            Y = X.copy()
            GY = GX.copy()
            _leapfrog(tgt, Y, V, GY, eps, n_leap, mass, torus)
            k1 = np.zeros(n)
            for j in range(d):
                k1 += 0.5 * V[:, j] * V[:, j] / mass[j]
            LPY = logp_rows(*tgt, Y)
            lr = LPY - LPX - (k1 - k0)
            alpha = np.where(np.isnan(lr), 0.0, np.exp(np.minimum(0.0, lr)))
            PY = density_rows(*tgt, Y)
    u = _u(keys, ctr)
    ctr = ctr + np.uint64(1)
    return ctr, u < alpha, Y, PY, LPY, GY


def continuous_tours(seed_mixed, first, count, tkind, coef, means, inv_sd, extra,
                     torus, lo, hi, local_kind, sigma, dt, eps, n_leap, mass, c_eff,
                     obs_kind, obs_dim, obs_lo, obs_hi,
                     hist_dim, hist_lo, hist_hi, n_bins, max_events):
    tgt = (tkind, coef, means, inv_sd, extra)
    d = lo.shape[0]
    m = obs_kind.shape[0]
    keys = _keys(seed_mixed, np.arange(first, first + count))
    ctr = np.zeros(count, np.uint64)
    X = np.empty((count, d))
    for j in range(d):
        X[:, j] = lo[j] + (hi[j] - lo[j]) * _u(keys, ctr, j)
    ctr += np.uint64(d)
    if torus:
        X = _wrap(X)
    PX = density_rows(*tgt, X)
    LPX = np.zeros(count)
    GX = np.zeros((count, d))
    if local_kind != LOCAL_RWM:
        LPX = logp_rows(*tgt, X)
        GX = grad_rows(*tgt, X)

    ty_s = np.zeros((count, m))
    ty_c = np.zeros((count, m))
    ts = np.zeros(count)
    tc = np.zeros(count)
    n_local = np.zeros(count, np.int64)
    killed = np.zeros(count, bool)
    hist_sc = np.zeros((2, n_bins))
    hist_out = np.zeros(2)
    counts = np.zeros(7, np.int64)
    width = (hist_hi - hist_lo) / n_bins

    active = np.arange(count)
    while active.size:
        a = active
        x = X[a]
        px = PX[a]
        with np.errstate(**_ERR):
            kap = np.where(_in_box(x, lo, hi), np.minimum(c_eff / px, KAPPA_CAP), 0.0)
        kap = np.where(px == 0.0, np.inf, kap)
        t1 = _exp_time(_u(keys[a], ctr[a]), 1.0)
        t2 = _exp_time(_u(keys[a], ctr[a], 1), kap)
        ctr[a] += np.uint64(2)
        step = t1 < t2
        h = np.where(step, t1, t2)
        counts[4] += a.size
        ts[a], tc[a] = _neumaier(ts[a], tc[a], h)
        F = _observables(obs_kind, obs_dim, obs_lo, obs_hi, x)
        ty_s[a], ty_c[a] = _neumaier(ty_s[a], ty_c[a], h[:, None] * F)
        hv = x[:, hist_dim]
        below = hv < hist_lo
        above = hv >= hist_hi
        hist_out[0] += h[below].sum()
        hist_out[1] += h[above].sum()
        inside = ~(below | above)
        b = np.minimum(((hv[inside] - hist_lo) / width).astype(np.int64), n_bins - 1)
        hist_sc[0], hist_sc[1] = _neumaier(hist_sc[0], hist_sc[1],
                                           np.bincount(b, weights=h[inside], minlength=n_bins))
        killed[a[~step]] = True
        mv = a[step]
        if mv.size == 0:
            break
        c2, acc, Y, PY, LPY, GY = _local_move(keys[mv], ctr[mv], tgt, torus, local_kind, sigma,
                                              dt, eps, n_leap, mass, X[mv], PX[mv], LPX[mv], GX[mv])
        ctr[mv] = c2
        n_local[mv] += 1
        counts[5] += mv.size
        counts[6] += int(acc.sum())
        upd = mv[acc]
        X[upd] = Y[acc]
        PX[upd] = PY[acc]
        LPX[upd] = LPY[acc]
        GX[upd] = GY[acc]
        active = mv[n_local[mv] < max_events]

    return _fold_tours(ty_s + ty_c, ts + tc, killed, counts, m) + (hist_sc, hist_out, counts)


def _fold_tours(Y, T, killed, counts, m):
    obs_sc = np.zeros((2, m))
    yy = np.zeros(m)
    yt = np.zeros(m)
    mom = np.zeros(3)
    for i in range(T.shape[0]):
        counts[0] += 1
        counts[1 if killed[i] else 2] += 1
        if T[i] == 0.0:
            counts[3] += 1
        mom[0], mom[1] = _scalar_neumaier(mom[0], mom[1], T[i])
        mom[2] += T[i] * T[i]
        for k in range(m):
            obs_sc[0, k], obs_sc[1, k] = _scalar_neumaier(obs_sc[0, k], obs_sc[1, k], Y[i, k])
            yy[k] += Y[i, k] * Y[i, k]
            yt[k] += Y[i, k] * T[i]
    return obs_sc, yy, yt, mom


def _scalar_neumaier(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c



def mh_chains(seed_mixed, chain_ids, x0, ctr0, n_steps, tkind, coef, means, inv_sd, extra,
              torus, lo, hi, lam, local_kind, sigma, dt, eps, n_leap, mass,
              obs_kind, obs_dim, obs_lo, obs_hi,
              hist_dim, hist_lo, hist_hi, n_bins, n_batches):
    tgt = (tkind, coef, means, inv_sd, extra)
    nc = chain_ids.shape[0]
    d = lo.shape[0]
    m = obs_kind.shape[0]
    keys = _keys(seed_mixed, chain_ids)
    ctr = np.asarray(ctr0).astype(np.uint64)
    X = np.array(x0, dtype=float, copy=True)
    PX = density_rows(*tgt, X)
    LPX = np.zeros(nc)
    GX = np.zeros((nc, d))
    if local_kind != LOCAL_RWM:
        LPX = logp_rows(*tgt, X)
        GX = grad_rows(*tgt, X)
    obs_sc = np.zeros((nc, 2, m))
    batch = np.zeros((nc, n_batches, m))
    hist = np.zeros((nc, 2, n_bins))
    hist_out = np.zeros((nc, 2))
    stats = np.zeros((nc, 4), np.int64)
    width = (hist_hi - hist_lo) / n_bins
    vol = float(np.prod(hi - lo))
    sd_mala = math.sqrt(dt) * sigma
    half = 0.5 * dt * sigma * sigma
    rows = np.arange(nc)
    b = 0
    b_end = n_steps // n_batches
    for t in range(n_steps):
        while t >= b_end and b < n_batches - 1:
            b += 1
            b_end = (b + 1) * n_steps // n_batches
        F = _observables(obs_kind, obs_dim, obs_lo, obs_hi, X)
        obs_sc[:, 0], obs_sc[:, 1] = _neumaier(obs_sc[:, 0], obs_sc[:, 1], F)
        batch[:, b] += F
        hv = X[:, hist_dim]
        hist_out[:, 0] += hv < hist_lo
        hist_out[:, 1] += hv >= hist_hi
        ins = (hv >= hist_lo) & (hv < hist_hi)
        hb = np.minimum(((hv[ins] - hist_lo) / width).astype(np.int64), n_bins - 1)
        r = rows[ins]
        hist[r, 0, hb], hist[r, 1, hb] = _neumaier(hist[r, 0, hb], hist[r, 1, hb], 1.0)
        u_mix = _u(keys, ctr)
        ctr += np.uint64(1)
        stats[:, 0] += 1
        glob = u_mix < lam
        stats[:, 2] += glob
        Y = np.empty((nc, d))
        PY = np.empty(nc)
        LPY = np.zeros(nc)
        GY = np.zeros((nc, d))
        acc = np.zeros(nc, bool)
        g = rows[glob]
        if g.size:
            Yg = np.empty((g.size, d))
            for j in range(d):
                Yg[:, j] = lo[j] + (hi[j] - lo[j]) * _u(keys[g], ctr[g], j)
            ctr[g] += np.uint64(d)
            if torus:
                Yg = _wrap(Yg)
            Y[g] = Yg
            PY[g] = density_rows(*tgt, Yg)
            if local_kind != LOCAL_RWM:
                LPY[g] = logp_rows(*tgt, Yg)
                GY[g] = grad_rows(*tgt, Yg)
            if local_kind == LOCAL_HMC:
                mu_x = np.where(_in_box(X[g], lo, hi), 1.0 / vol, 0.0)
                mu_y = np.where(_in_box(Yg, lo, hi), 1.0 / vol, 0.0)
                den = PX[g] * mu_y
                with np.errstate(**_ERR):
                    alpha = np.where(den <= 0.0, 1.0, np.minimum(1.0, PY[g] * mu_x / den))
                acc[g] = _u(keys[g], ctr[g]) < alpha
                ctr[g] += np.uint64(1)
        loc = rows[~glob]
        if loc.size:
            if local_kind == LOCAL_HMC:
                c2, a2, Yl, PYl, LPYl, GYl = _local_move(keys[loc], ctr[loc], tgt, torus, local_kind,
                                                         sigma, dt, eps, n_leap, mass,
                                                         X[loc], PX[loc], LPX[loc], GX[loc])
                ctr[loc] = c2
                acc[loc] = a2
            else:
                Z = _normals(keys[loc], ctr[loc], d)
                ctr[loc] += np.uint64(2 * d)
                if local_kind == LOCAL_RWM:
                    Yl = X[loc] + sigma * Z
                else:
                    Yl = X[loc] + half * GX[loc] + sd_mala * Z
                if torus:
                    Yl = _wrap(Yl)
                PYl = density_rows(*tgt, Yl)
                LPYl = np.zeros(loc.size)
                GYl = np.zeros((loc.size, d))
                if local_kind == LOCAL_MALA:
                    LPYl = logp_rows(*tgt, Yl)
                    GYl = grad_rows(*tgt, Yl)
            Y[loc] = Yl
            PY[loc] = PYl
            LPY[loc] = LPYl
            GY[loc] = GYl
        if local_kind != LOCAL_HMC:
            mu_x = np.where(_in_box(X, lo, hi), 1.0 / vol, 0.0)
            mu_y = np.where(_in_box(Y, lo, hi), 1.0 / vol, 0.0)
            with np.errstate(**_ERR):
                if local_kind == LOCAL_RWM:
                    z_xy = _rwm_q(X, Y, sigma, torus)
                    z_yx = z_xy
                else:
                    z_xy = np.exp(_gauss_logq(X, half * GX, Y, sd_mala, torus))
                    z_yx = np.exp(_gauss_logq(Y, half * GY, X, sd_mala, torus))
                q_xy = lam * mu_y + (1.0 - lam) * z_xy
                q_yx = lam * mu_x + (1.0 - lam) * z_yx
                den = PX * q_xy
                alpha = np.where(den <= 0.0, 1.0, np.minimum(1.0, PY * q_yx / den))
            acc = _u(keys, ctr) < alpha
            ctr += np.uint64(1)
        stats[:, 1] += acc
        stats[:, 3] += acc & glob
        X[acc] = Y[acc]
        PX[acc] = PY[acc]
        LPX[acc] = LPY[acc]
        GX[acc] = GY[acc]
    return obs_sc, batch, hist, hist_out, stats, X, ctr.astype(np.int64)


def _categorical_rows(cum_rows, u):
    n = cum_rows.shape[1]
    return np.minimum((cum_rows <= u[:, None]).sum(axis=1), n - 1)


def finite_tours(seed_mixed, first, count, p_cum, mu_cum, kappa, F, max_events):
    n = p_cum.shape[0]
    m = F.shape[0]
    keys = _keys(seed_mixed, np.arange(first, first + count))
    ctr = np.zeros(count, np.uint64)
    u0 = _u(keys, ctr)
    X = np.minimum(np.searchsorted(mu_cum, u0, side="right"), n - 1)
    ctr += np.uint64(1)
    kap_all = np.where((kappa > KAPPA_CAP) & (kappa != np.inf), KAPPA_CAP, kappa)
    occ = np.zeros((2, n))
    ty_s = np.zeros((count, m))
    ty_c = np.zeros((count, m))
    ts = np.zeros(count)
    tc = np.zeros(count)
    n_local = np.zeros(count, np.int64)
    killed = np.zeros(count, bool)
    counts = np.zeros(7, np.int64)
    active = np.arange(count)
    while active.size:
        a = active
        x = X[a]
        t1 = _exp_time(_u(keys[a], ctr[a]), 1.0)
        t2 = _exp_time(_u(keys[a], ctr[a], 1), kap_all[x])
        ctr[a] += np.uint64(2)
        step = t1 < t2
        h = np.where(step, t1, t2)
        counts[4] += a.size
        ts[a], tc[a] = _neumaier(ts[a], tc[a], h)
        ty_s[a], ty_c[a] = _neumaier(ty_s[a], ty_c[a], h[:, None] * F[:, x].T)
        occ[0], occ[1] = _neumaier(occ[0], occ[1], np.bincount(x, weights=h, minlength=n))
        killed[a[~step]] = True
        mv = a[step]
        if mv.size == 0:
            break
        y = _categorical_rows(p_cum[X[mv]], _u(keys[mv], ctr[mv]))
        ctr[mv] += np.uint64(1)
        n_local[mv] += 1
        counts[5] += mv.size
        counts[6] += int((y != X[mv]).sum())
        X[mv] = y
        active = mv[n_local[mv] < max_events]
    obs_sc, yy, yt, mom = _fold_tours(ty_s + ty_c, ts + tc, killed, counts, m)
    return occ, obs_sc, yy, yt, mom, counts


def finite_chain(seed_mixed, index, x0, p_cum, n_steps):
    key = _keys(seed_mixed, [index])[0]
    u = _rng.uniform_array(key, np.arange(n_steps - 1, dtype=np.uint64))
    out = np.empty(n_steps, np.int64)
    x = int(x0)
    out[0] = x
    n = p_cum.shape[0]
    for t in range(1, n_steps):
        x = min(int(np.searchsorted(p_cum[x], u[t - 1], side="right")), n - 1)
        out[t] = x
    return out
