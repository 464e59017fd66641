"""Run configuration, deterministic parallel execution and output files.

Restore runs are split into fixed-size blocks of consecutive tour indices.
Blocks are simulated by a thread pool (the compiled kernels release the GIL)
and consumed strictly in block order, so every reduction, budget decision and
output byte is independent of the number of workers. Mixture-MH runs advance
independent chains in segments; each segment is one batch for the standard
error.

Output files (in ``out_dir``):

``trace.csv``
    ``events,process_time,wall_seconds,estimate,se`` after each consumed
    block/segment, for the first observable. ``events`` counts path-skeleton
    pairs for restore and chain states for MH.
``estimate.json``
    final estimates per observable; contains no timing data and is
    byte-identical across worker counts.
``histogram.csv``
    ``bin_lo,bin_hi,mass`` with masses normalised over the in-range weight.
``diagnostics.json``
    kill/exhaustion counts, acceptance rates, overshoot, timing, backend.
"""

from __future__ import annotations

import copy
import json
import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import kernels as K
from .errors import EmptyEstimateError, InvalidParameterError
from .estimator import batch_means_from_batches, regenerative_se
from .kernels import HistogramSpec, ObservableSpec
from .rng import RngStream
from .targets import builtin_target, trimodal_basins

SCHEMA_VERSION = 1

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "target", "sampler", "budget"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "target": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
        "space": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["euclidean", "torus"]},
                "lo": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "hi": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "sampler": {"enum": ["restore", "mh-mixture"]},
        "local": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["rwm", "mala", "hmc"]},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "step_size": {"type": "number", "exclusiveMinimum": 0},
                "leapfrog_steps": {"type": "integer", "minimum": 1},
                "mass": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "lambda": {"type": "number", "minimum": 0, "maximum": 1},
        "kappa0": {"type": "number", "exclusiveMinimum": 0},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "budget": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "events": {"type": "integer", "minimum": 1},
                "tours": {"type": "integer", "minimum": 1},
                "wall_seconds": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "chains": {"type": "integer", "minimum": 1},
        "x0": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "segments": {"type": "integer", "minimum": 2},
        "block_size": {"type": "integer", "minimum": 1},
        "max_events_per_tour": {"type": "integer", "minimum": 1},
        "observables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": ["coord", "coord_sq", "interval"]},
                    "dim": {"type": "integer", "minimum": 0},
                    "lo": {"type": "number"},
                    "hi": {"type": "number"},
                    "name": {"type": "string"},
                },
            },
        },
        "histogram": {
            "type": "object",
            "required": ["lo", "hi"],
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 0},
                "lo": {"type": "number"},
                "hi": {"type": "number"},
                "bins": {"type": "integer", "minimum": 1},
            },
        },
        "outputs": {"type": "object", "properties": {"dir": {"type": "string"}}},
    },
}

DEFAULTS = {
    "space": {"kind": "torus"},
    "local": {"kind": "rwm", "sigma": 0.01, "dt": 0.01, "step_size": 0.1, "leapfrog_steps": 10},
    "lambda": 0.3,
    "kappa0": 1.0,
    "workers": os.cpu_count() or 1,
    "seed": 0,
    "chains": 1,
    "segments": 64,
    "block_size": 256,
    "max_events_per_tour": 10**7,
}

def _trimodal_basin_observables():
    names = ("basin_left", "basin_center", "basin_right")
    return [{"kind": "interval", "lo": max(lo, -1e300), "hi": min(hi, 1e300), "name": n}
            for n, (lo, hi) in zip(names, trimodal_basins())]


_TRIMODAL_BASINS = _trimodal_basin_observables()

PRESETS = {
    "trimodal-restore": {
        "schema_version": 1, "name": "trimodal-restore",
        "target": {"name": "trimodal1d"},
        "space": {"kind": "euclidean", "lo": [-40.0], "hi": [25.0]},
        "sampler": "restore", "local": {"kind": "rwm", "sigma": 1.0}, "kappa0": 1.0,
        "budget": {"events": 10**6}, "seed": 1,
        "observables": [{"kind": "coord", "dim": 0}] + _TRIMODAL_BASINS,
        "histogram": {"dim": 0, "lo": -40.0, "hi": 25.0, "bins": 200},
    },
    "trimodal-mh-local": {
        "schema_version": 1, "name": "trimodal-mh-local",
        "target": {"name": "trimodal1d"},
        "space": {"kind": "euclidean", "lo": [-40.0], "hi": [25.0]},
        "sampler": "mh-mixture", "local": {"kind": "rwm", "sigma": 1.0}, "lambda": 0.0,
        "budget": {"events": 3 * 10**6}, "chains": 3, "x0": [[-28.9], [-3.3], [10.3]], "seed": 1,
        "observables": [{"kind": "coord", "dim": 0}] + _TRIMODAL_BASINS,
        "histogram": {"dim": 0, "lo": -40.0, "hi": 25.0, "bins": 200},
    },
    "trimodal-mh-mixture": {
        "schema_version": 1, "name": "trimodal-mh-mixture",
        "target": {"name": "trimodal1d"},
        "space": {"kind": "euclidean", "lo": [-40.0], "hi": [25.0]},
        "sampler": "mh-mixture", "local": {"kind": "rwm", "sigma": 1.0}, "lambda": 0.3,
        "budget": {"events": 3 * 10**6}, "chains": 3, "x0": [[-28.9], [-3.3], [10.3]], "seed": 1,
        "observables": [{"kind": "coord", "dim": 0}] + _TRIMODAL_BASINS,
        "histogram": {"dim": 0, "lo": -40.0, "hi": 25.0, "bins": 200},
    },
    "torus-default": {
        "schema_version": 1, "name": "torus-default",
        "target": {"name": "gaussian-mixture",
                   "params": {"weights": [0.5, 0.5], "means": [[0.25, 0.25], [0.7, 0.6]],
                              "sds": [[0.05, 0.05], [0.08, 0.08]], "space": "torus"}},
        "space": {"kind": "torus"},
        "sampler": "restore", "local": {"kind": "rwm", "sigma": 0.01}, "kappa0": 1.0,
        "budget": {"events": 10**6}, "seed": 1,
        "observables": [{"kind": "coord", "dim": 0}, {"kind": "coord", "dim": 1}],
        "histogram": {"dim": 0, "lo": 0.0, "hi": 1.0, "bins": 100},
    },
}


class ConfigError(InvalidParameterError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return raw


def validate_config(raw: dict) -> dict:
    """Schema-check ``raw`` and fill defaults."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if "c" in raw and "kappa0" in raw:
        raise ConfigError("give either kappa0 or c, not both")
    if cfg["sampler"] == "mh-mixture" and "events" not in cfg["budget"]:
        raise ConfigError("mh-mixture runs take an events budget")
    return cfg


@dataclass
class RunSetup:
    cfg: dict
    target: object
    spec: object
    torus: bool
    lo: np.ndarray
    hi: np.ndarray
    obs: ObservableSpec
    hist: HistogramSpec
    local_kind: int
    sigma: float
    dt: float
    eps: float
    n_leap: int
    mass: np.ndarray
    c_eff: float


def prepare(cfg: dict) -> RunSetup:
    tcfg = cfg["target"]
    params = dict(tcfg.get("params", {}))
    target = builtin_target(tcfg["name"], **params)
    if target.packed is None:
        raise ConfigError(f"target {tcfg['name']!r} is not a continuous target")
    d = target.space.dim
    space = cfg["space"]
    torus = space.get("kind", "torus") == "torus"
    if torus:
        lo, hi = np.zeros(d), np.ones(d)
    else:
        if "lo" not in space or "hi" not in space:
            raise ConfigError("euclidean runs need space.lo and space.hi (regeneration box)")
        lo = np.asarray(space["lo"], dtype=float)
        hi = np.asarray(space["hi"], dtype=float)
    if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo):
        raise ConfigError(f"space box must have {d} coordinates with lo < hi")
    local = cfg["local"]
    mass = np.asarray(local.get("mass", [1.0] * d), dtype=float)
    if mass.shape != (d,):
        raise ConfigError(f"local.mass must have {d} entries")
    obs_items = cfg.get("observables") or [{"kind": "coord", "dim": 0}]
    for it in obs_items:
        if int(it.get("dim", 0)) >= d:
            raise ConfigError("observable dim out of range")
        if it["kind"] == "interval" and not ("lo" in it and "hi" in it):
            raise ConfigError("interval observables need lo and hi")
    hcfg = cfg.get("histogram") or {"dim": 0, "lo": float(lo[0]), "hi": float(hi[0])}
    hist = HistogramSpec(int(hcfg.get("dim", 0)), float(hcfg["lo"]), float(hcfg["hi"]),
                         int(hcfg.get("bins", 200)))
    if hist.dim >= d or not hist.lo < hist.hi:
        raise ConfigError("histogram needs dim < d and lo < hi")
    if "c" in cfg:
        c_eff = float(cfg["c"])
    else:
        if target.normalizer is None:
            raise ConfigError("target has no exact normaliser; give c instead of kappa0")
        c_eff = float(cfg["kappa0"]) * target.normalizer / float(np.prod(hi - lo))
    return RunSetup(cfg, target, target.packed, torus, lo, hi, ObservableSpec.build(obs_items), hist,
                    K.LOCAL_KINDS[local.get("kind", "rwm")], float(local.get("sigma", 0.01)),
                    float(local.get("dt", 0.01)), float(local.get("step_size", 0.1)),
                    int(local.get("leapfrog_steps", 10)), mass, c_eff)


# -- restore ----------------------------------------------------------------------


def _neumaier_arr(s, c, v):
    t = s + v
    c = c + np.where(np.abs(s) >= np.abs(v), (s - t) + v, (v - t) + s)
    return t, c


class _Totals:
    """Block totals folded in block order with compensated sums."""

    def __init__(self, m, bins):
        self.obs = np.zeros((2, m))
        self.yy = np.zeros(m)
        self.yt = np.zeros(m)
        self.time = np.zeros(2)
        self.tt = 0.0
        self.hist = np.zeros((2, bins))
        self.hist_out = np.zeros(2)
        self.counts = np.zeros(7, np.int64)

    def add(self, res):
        obs_sc, yy, yt, mom, hist_sc, hist_out, counts = res
        self.obs[0], self.obs[1] = _neumaier_arr(self.obs[0], self.obs[1], obs_sc[0] + obs_sc[1])
        self.yy += yy
        self.yt += yt
        self.time[0], self.time[1] = _neumaier_arr(self.time[0], self.time[1], mom[0] + mom[1])
        self.tt += mom[2]
        self.hist[0], self.hist[1] = _neumaier_arr(self.hist[0], self.hist[1], hist_sc[0] + hist_sc[1])
        self.hist_out += hist_out
        self.counts += counts

    @property
    def T(self):
        return float(self.time[0] + self.time[1])

    def estimates(self):
        T = self.T
        if not T > 0.0:
            raise EmptyEstimateError("all tours died immediately; the target vanishes on the regeneration box")
        return (self.obs[0] + self.obs[1]) / T

    def ses(self):
        Y = self.obs[0] + self.obs[1]
        return np.array([regenerative_se(Y[k], self.T, self.yy[k], self.yt[k], self.tt,
                                         int(self.counts[0])) for k in range(Y.shape[0])])


def _restore_block(setup: RunSetup, seed, first, count):
    return K.continuous_tours(seed, first, count, setup.spec, setup.torus, setup.lo, setup.hi,
                              setup.local_kind, setup.sigma, setup.dt, setup.eps, setup.n_leap,
                              setup.mass, setup.c_eff, setup.obs, setup.hist,
                              setup.cfg["max_events_per_tour"])


def _ordered_blocks(fn, n_blocks, workers):
    """Yield ``fn(b)`` for b = 0, 1, ... in order, computing ahead on a pool."""
    if workers <= 1:
        b = 0
        while n_blocks is None or b < n_blocks:
            yield b, fn(b)
            b += 1
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = deque()
        nxt = 0
        try:
            while True:
                while len(pending) < 2 * workers and (n_blocks is None or nxt < n_blocks):
                    pending.append((nxt, pool.submit(fn, nxt)))
                    nxt += 1
                if not pending:
                    return
                b, fut = pending.popleft()
                yield b, fut.result()
        finally:
            for _, fut in pending:
                fut.cancel()


def run_restore(setup: RunSetup, workers: int, progress=None):
    cfg = setup.cfg
    seed = int(cfg["seed"])
    bs = int(cfg["block_size"])
    budget = cfg["budget"]
    n_tours = budget.get("tours")
    n_blocks = None if n_tours is None else -(-n_tours // bs)

    def block(b):
        first = b * bs
        count = bs if n_tours is None else min(bs, n_tours - first)
        return _restore_block(setup, seed, first, count)

    tot = _Totals(setup.obs.kind.shape[0], setup.hist.bins)
    trace = []
    t0 = time.perf_counter()
    for b, res in _ordered_blocks(block, n_blocks, workers):
        tot.add(res)
        wall = time.perf_counter() - t0
        if tot.T > 0:
            trace.append((int(tot.counts[4]), tot.T, wall, float(tot.estimates()[0]), float(tot.ses()[0])))
        if progress:
            progress(b, tot)
        if "events" in budget and tot.counts[4] >= budget["events"]:
            break
        if "wall_seconds" in budget and wall >= budget["wall_seconds"]:
            break
    wall = time.perf_counter() - t0
    est = tot.estimates()
    se = tot.ses()
    c = tot.counts
    overshoot = int(c[4] - budget["events"]) if "events" in budget else 0
    estimate = {
        "sampler": "restore",
        "seed": seed,
        "tours": int(c[0]),
        "events": int(c[4]),
        "process_time": tot.T,
        "estimates": dict(zip(setup.obs.names, map(float, est))),
        "se": dict(zip(setup.obs.names, map(float, se))),
    }
    diagnostics = {
        "tours": int(c[0]),
        "killed": int(c[1]),
        "budget_exhausted": int(c[2]),
        "zero_lifetime": int(c[3]),
        "events": int(c[4]),
        "local_steps": int(c[5]),
        "accepted": int(c[6]),
        "acceptance_rate": float(c[6] / c[5]) if c[5] else None,
        "effective_c": setup.c_eff,
        "events_overshoot": overshoot,
        "replay_budget": {"tours": int(c[0])},
        "histogram_out_of_range": [float(v) for v in tot.hist_out],
    }
    hist = tot.hist[0] + tot.hist[1]
    return estimate, diagnostics, hist, trace, wall


# -- mixture MH -------------------------------------------------------------------------


def _initial_states(setup: RunSetup, n_chains: int):
    x0 = setup.cfg.get("x0")
    d = setup.lo.shape[0]
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n_chains, d):
            raise ConfigError(f"x0 must list {n_chains} points of dimension {d}")
        return x0
    out = np.empty((n_chains, d))
    for c in range(n_chains):
        s = RngStream(int(setup.cfg["seed"]), (1 << 63) + c)
        out[c] = setup.lo + (setup.hi - setup.lo) * s.uniforms(d)
    return out


def run_mh(setup: RunSetup, workers: int, progress=None):
    cfg = setup.cfg
    seed = int(cfg["seed"])
    nc = int(cfg["chains"])
    n_seg = int(cfg["segments"])
    steps = -(-int(cfg["budget"]["events"]) // nc)
    seg_len = [(s + 1) * steps // n_seg - s * steps // n_seg for s in range(n_seg)]
    m = setup.obs.kind.shape[0]
    X = _initial_states(setup, nc)
    ctr = np.zeros(nc, np.int64)
    obs = np.zeros((nc, 2, m))
    hist = np.zeros((nc, 2, setup.hist.bins))
    stats = np.zeros((nc, 4), np.int64)
    batch_sums = []
    batch_w = []
    groups = [g for g in np.array_split(np.arange(nc), min(workers, nc)) if g.size]
    trace = []
    t0 = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=len(groups)) if len(groups) > 1 else None
    done = 0
    try:
        for s, n_steps in enumerate(seg_len):
            if n_steps == 0:
                continue

            def seg(g):
                return K.mh_chains(seed, g, X[g], n_steps, setup.spec, setup.torus, setup.lo,
                                   setup.hi, cfg["lambda"], setup.local_kind, setup.sigma, setup.dt,
                                   setup.eps, setup.n_leap, setup.mass, setup.obs, setup.hist,
                                   1, ctr[g])

            results = list(pool.map(seg, groups)) if pool else [seg(g) for g in groups]
            for g, res in zip(groups, results):
                o, b, h, _, st, fin, c_out = res
                for k, c in enumerate(g):
                    obs[c, 0], obs[c, 1] = _neumaier_arr(obs[c, 0], obs[c, 1], o[k, 0] + o[k, 1])
                    hist[c, 0], hist[c, 1] = _neumaier_arr(hist[c, 0], hist[c, 1], h[k, 0] + h[k, 1])
                    batch_sums.append(b[k, 0])
                    batch_w.append(float(n_steps))
                stats[g] += st
                X[g] = fin
                ctr[g] = c_out
            done += n_steps * nc
            bm = batch_means_from_batches(np.array(batch_sums)[:, 0], batch_w)
            est0 = float((obs[:, 0, 0] + obs[:, 1, 0]).sum() / done)
            trace.append((done, float(done), time.perf_counter() - t0, est0, bm.se))
            if progress:
                progress(s, None)
    finally:
        if pool:
            pool.shutdown()
    wall = time.perf_counter() - t0
    tot = (obs[:, 0] + obs[:, 1]).sum(axis=0) / done
    bs = np.array(batch_sums)
    ses = [batch_means_from_batches(bs[:, k], batch_w).se for k in range(m)]
    per_chain = (obs[:, 0] + obs[:, 1]) / (done / nc)
    estimate = {
        "sampler": "mh-mixture",
        "seed": seed,
        "chains": nc,
        "events": done,
        "estimates": dict(zip(setup.obs.names, map(float, tot))),
        "se": dict(zip(setup.obs.names, map(float, ses))),
        "per_chain": {name: [float(v) for v in per_chain[:, k]] for k, name in enumerate(setup.obs.names)},
    }
    diagnostics = {
        "chains": nc,
        "steps_per_chain": steps,
        "events_overshoot": int(done - cfg["budget"]["events"]),
        "proposals": int(stats[:, 0].sum()),
        "accepted": int(stats[:, 1].sum()),
        "acceptance_rate": float(stats[:, 1].sum() / max(stats[:, 0].sum(), 1)),
        "large_step_proposals": int(stats[:, 2].sum()),
        "large_step_accepted": int(stats[:, 3].sum()),
        "per_chain_acceptance": [float(a / max(p, 1)) for p, a in zip(stats[:, 0], stats[:, 1])],
        "final_states": X.tolist(),
    }
    return estimate, diagnostics, (hist[:, 0] + hist[:, 1]).sum(axis=0), trace, wall


# -- files -----------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_outputs(out_dir, setup: RunSetup, estimate, diagnostics, hist, trace, wall, workers):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "estimate.json"), "w") as fh:
        json.dump(estimate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    edges = setup.hist.edges()
    total = math.fsum(hist)
    with open(os.path.join(out_dir, "histogram.csv"), "w") as fh:
        fh.write("bin_lo,bin_hi,mass\n")
        for b in range(setup.hist.bins):
            mass = hist[b] / total if total > 0 else 0.0
            fh.write(f"{_fmt(edges[b])},{_fmt(edges[b + 1])},{_fmt(mass)}\n")
    with open(os.path.join(out_dir, "trace.csv"), "w") as fh:
        fh.write("events,process_time,wall_seconds,estimate,se\n")
        for ev, pt, w, e, s in trace:
            fh.write(f"{ev},{_fmt(pt)},{w:.6f},{_fmt(e)},{_fmt(s)}\n")
    diag = dict(diagnostics)
    diag.update({"wall_seconds": wall, "workers": workers, "backend": K.BACKEND,
                 "config": setup.cfg})
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def run(config, out_dir=None, seed=None, workers=None, progress=None) -> dict:
    """Validate ``config`` (dict or path), run it and write the output files.

    Returns a dict with the estimate, diagnostics, histogram weights and trace.
    """
    raw = load_config(config) if isinstance(config, (str, os.PathLike)) else copy.deepcopy(config)
    if seed is not None:
        raw["seed"] = int(seed)
    if workers is not None:
        raw["workers"] = int(workers)
    cfg = validate_config(raw)
    setup = prepare(cfg)
    w = int(cfg["workers"])
    runner = run_restore if cfg["sampler"] == "restore" else run_mh
    estimate, diagnostics, hist, trace, wall = runner(setup, w, progress)
    out_dir = out_dir or cfg.get("outputs", {}).get("dir")
    if out_dir:
        write_outputs(out_dir, setup, estimate, diagnostics, hist, trace, wall, w)
    return {"estimate": estimate, "diagnostics": diagnostics, "histogram": hist,
            "edges": setup.hist.edges(), "trace": trace, "wall_seconds": wall, "setup": setup}


# -- finite verification -----------------------------------------------------------


def verify_instances(instances, n_f: int = 20, seed: int = 0) -> dict:
    """Invariance, Dirichlet ordering and asymptotic variances per instance."""
    from . import finite as F

    rows = []
    for i, inst in enumerate(instances):
        name = inst.name or f"instance-{i}"
        row = {"name": name, "n": inst.n}
        try:
            system = F.build_restore(inst)
        except F.KappaTooSmallError as exc:
            row.update({"invariance_pass": False, "error": str(exc),
                        "minimal_kappa0": exc.minimal_kappa0})
            rows.append(row)
            continue
        residual = F.check_invariance(system.pi, system.A)
        row["invariance_residual"] = residual
        row["invariance_pass"] = residual < 1e-10
        rep = F.theorem_ordering_check(inst, n_f=n_f, seed=seed + i, exploratory=True)
        row["ordering"] = {
            "kappa0": rep.kappa0,
            "threshold": rep.threshold,
            "hypothesis_holds": rep.hypothesis_holds,
            "min_difference": rep.min_difference,
            "violated": rep.violated,
            "argument_step_failures": rep.step_violations,
        }
        red = inst.reduced()
        K_lam = F.mixture_mh_kernel(red)
        fs = np.random.default_rng(seed + i).standard_normal((3, red.n))
        pairs = []
        for f in fs:
            try:
                v_restore = F.asymptotic_variance(system.pi, f, A=system.A)
                v_mh = F.asymptotic_variance(system.pi, f, K=K_lam)
            except F.ReducibilityError as exc:
                pairs.append({"error": str(exc)})
                continue
            pairs.append({"restore": v_restore, "mixture_mh": v_mh,
                          "dirichlet_ordered": bool(F.dirichlet_form(system.A, system.pi, f)
                                                    >= F.dirichlet_form(K_lam - np.eye(red.n), system.pi, f)),
                          "variance_ordered": bool(v_restore <= v_mh)})
        row["asymptotic_variance"] = pairs
        rows.append(row)
    inv_fail = sum(not r["invariance_pass"] for r in rows)
    with_hyp = [r for r in rows if "ordering" in r and r["ordering"]["hypothesis_holds"]]
    ord_viol = sum(r["ordering"]["violated"] for r in with_hyp)
    residuals = [r["invariance_residual"] for r in rows if "invariance_residual" in r]
    summary = {
        "instances": len(rows),
        "invariance_failures": inv_fail,
        "worst_invariance_residual": max(residuals) if residuals else None,
        "ordering_checked": len(with_hyp),
        "ordering_violations": ord_viol,
        "worst_ordering_difference": min((r["ordering"]["min_difference"] for r in with_hyp), default=None),
        "pass": inv_fail == 0 and ord_viol == 0,
    }
    return {"summary": summary, "instances": rows}
