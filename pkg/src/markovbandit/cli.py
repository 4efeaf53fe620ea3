"""Command-line entry point: ``simulate``, ``verify-concentration`` and ``lower-bound``.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime failures.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .concentration import empirical_tail
from .errors import BanditError, ConfigError
from .exp_family import load_family, member
from .harness import emit_csv, load_config, run_experiment, summarize, write_counts
from .regret import lower_bound_constant, profile, proxy_gap_bound

log = logging.getLogger("markovbandit")


def _simulate(args):
    cfg = load_config(args.config, reps=args.reps, seed=args.seed, out=args.out)
    prof = profile(cfg.family, cfg.thetas, cfg.M)
    records = run_experiment(cfg, workers=args.workers)
    lb = lower_bound_constant(prof, cfg.family)
    out = Path(cfg.output_dir)
    emit_csv(summarize(records, prof, lb=lb), out / "summary.csv")
    if cfg.record_counts:
        write_counts(records, out / "counts.csv")
    instance = {
        "thetas": cfg.thetas.tolist(),
        "means": [member(cfg.family, th).mean for th in cfg.thetas],
        "M": cfg.M,
        "T": cfg.T,
        "reps": cfg.reps,
        "master_seed": cfg.master_seed,
        "policies": [vars(p) for p in cfg.policies],
        "lower_bound_const": lb,
        "proxy_gap_bound": proxy_gap_bound(cfg.family, cfg.thetas, cfg.init),
        "min_w": {p.name: min((r.min_w for r in records if r.policy == p.name
                               and r.min_w is not None), default=None) for p in cfg.policies},
    }
    (out / "instance.json").write_text(json.dumps(instance, indent=2) + "\n")
    print(out / "summary.csv")
    return 0


def _read_family(path):
    try:
        return load_family(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("family", str(e)) from None
    except BanditError as e:
        raise ConfigError("family", str(e)) from None


def _verify(args):
    fam = _read_family(args.family)
    if args.event == "chernoff":
        if args.mu is None:
            raise ConfigError("mu", "--mu is required for the chernoff event")
        level = args.mu
    else:
        if args.eps is None:
            raise ConfigError("eps", "--eps is required for the maximal event")
        level = args.eps
    r = empirical_tail(fam, args.theta0, args.event, level, args.n, args.reps, seed=args.seed)
    print("event,level,n,reps,bound,empirical,stderr")
    g = lambda x: format(x, ".17g")  # noqa: E731
    print(",".join([r.event, g(r.level), str(r.n), str(r.replications),
                    g(r.bound_value), g(r.empirical), g(r.stderr)]))
    return 0


def _lower_bound(args):
    cfg = load_config(args.config)
    print(format(lower_bound_constant(profile(cfg.family, cfg.thetas, cfg.M), cfg.family), ".17g"))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="markovbandit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a regret experiment and write summary.csv")
    s.add_argument("--config", required=True)
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_simulate)

    c = sub.add_parser("verify-concentration", help="compare a tail bound with simulation")
    c.add_argument("--family", required=True)
    c.add_argument("--theta0", type=float, default=0.0)
    c.add_argument("--event", choices=("chernoff", "maximal"), required=True)
    c.add_argument("--mu", type=float)
    c.add_argument("--eps", type=float)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--reps", type=int, default=10000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_verify)

    b = sub.add_parser("lower-bound", help="print the log T coefficient of the regret lower bound")
    b.add_argument("--config", required=True)
    b.set_defaults(func=_lower_bound)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (BanditError, ArithmeticError, RuntimeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
