"""Command line entry point: ``jumprestore run | verify | targets | presets``."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import JumpRestoreError


def _cmd_run(args) -> int:
    if (args.config is None) == (args.preset is None):
        print("run: give exactly one of --config or --preset", file=sys.stderr)
        return 2
    config = args.config if args.config else harness.PRESETS[args.preset]
    res = harness.run(config, out_dir=args.out, seed=args.seed, workers=args.workers)
    est = res["estimate"]
    print(json.dumps({"estimates": est["estimates"], "se": est["se"], "events": est["events"],
                      "wall_seconds": round(res["wall_seconds"], 3), "out": args.out}, indent=2))
    return 0


def _cmd_verify(args) -> int:
    from . import finite as F

    if args.instances:
        instances = F.load_instances(args.instances)
    elif args.random:
        instances = [F.random_instance(args.seed + i) for i in range(args.random)]
    else:
        print("verify: give --instances FILE or --random N", file=sys.stderr)
        return 2
    report = harness.verify_instances(instances, n_f=args.n_f, seed=args.seed)
    text = json.dumps(report, indent=2, default=float)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(json.dumps(report["summary"], indent=2))
    return 0 if report["summary"]["pass"] else 1


def _cmd_targets(args) -> int:
    from .targets import TARGETS

    for name, (_, desc) in TARGETS.items():
        print(f"{name:18s} {desc}")
    return 0


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name, cfg in harness.PRESETS.items():
            print(f"{name:18s} {cfg['sampler']:10s} target={cfg['target']['name']}")
    else:
        print(json.dumps(harness.PRESETS[args.name], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jumprestore", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a sampler from a JSON config or preset")
    r.add_argument("--config")
    r.add_argument("--preset", choices=sorted(harness.PRESETS))
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", default="out")
    r.set_defaults(fn=_cmd_run)

    v = sub.add_parser("verify", help="exact finite-state checks")
    v.add_argument("--instances")
    v.add_argument("--random", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n-f", type=int, default=20, dest="n_f")
    v.add_argument("--out")
    v.set_defaults(fn=_cmd_verify)

    t = sub.add_parser("targets", help="built-in targets")
    t.add_argument("action", choices=["list"])
    t.set_defaults(fn=_cmd_targets)

    p = sub.add_parser("presets", help="bundled run configurations")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(fn=_cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (JumpRestoreError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
