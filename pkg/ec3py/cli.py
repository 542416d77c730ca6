import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from astropy.io import ascii

from ec3py.config import ConfigError, write_instance_config
from ec3py.env import build_instance
from ec3py.harness import compute_bounds, emit_report, episode_lengths, \
    ingest_dataset, load_experiment, run_anytime, run_experiment, sweep_rates
from ec3py.utils import mylog, set_log_level


def _rates(text):
    try:
        return [float(r) for r in text.split(",") if r.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated "
                                         f"list of rates")


def cmd_run(args):
    config = load_experiment(args.config, seed=args.seed, output_dir=args.out,
                             replications=args.replications)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.overwrite:
        config = replace(config, overwrite=True)
    traces, paths = run_experiment(config)
    for kind, path in paths.items():
        print(f"{kind}: {path}")


def cmd_ingest(args):
    instance = ingest_dataset(args.input, num_arms=args.arms,
                              split_rule=args.split, num_players=args.players,
                              horizon=args.horizon, seed=args.seed)
    write_instance_config(instance, args.out, overwrite=args.overwrite)
    print(f"mu_min = {instance.mu_min:.6g}, nu_max = {instance.nu_max:.6g}")
    print(f"wrote {args.out}")


def cmd_bounds(args):
    config = load_experiment(args.config, seed=args.seed)
    instance = build_instance(config.instance_for(config.seed))
    bounds = compute_bounds(config, instance=instance)
    print(json.dumps(bounds, indent=4))


def cmd_sweep(args):
    config = load_experiment(args.config, seed=args.seed, output_dir=args.out,
                             replications=args.replications)
    table = sweep_rates(config, args.rates)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fn = out / "sweep.csv"
    if fn.exists() and not args.overwrite:
        raise IOError(f"The file {fn} exists and overwrite=False!")
    ascii.write(table, fn, format="csv", overwrite=True,
                formats={"rate": "%.6g", "decode_error_rate": "%.6f",
                         "message_error_rate": "%.6f",
                         "mean_final_regret": "%.6f",
                         "convergence_fraction": "%.4f"})
    table.pprint(max_lines=-1)


def cmd_anytime(args):
    config = load_experiment(args.config, seed=args.seed, output_dir=args.out)
    traces = [run_anytime(config, args.stop, args.t0, seed=s)
              for s in config.seeds]
    bounds = compute_bounds(config, horizon=args.stop)
    restarts = [int(s) for s in np.cumsum(episode_lengths(args.t0, args.stop))[:-1]]
    paths = emit_report(traces, bounds, config.output_dir,
                        overwrite=args.overwrite,
                        meta={"algorithm": config.algorithm, "stop": args.stop,
                              "initial_horizon": args.t0, "restarts": restarts},
                        num_players=config.instance.num_players,
                        label="doubling", markers=restarts)
    for kind, path in paths.items():
        print(f"{kind}: {path}")


def make_parser():
    p = argparse.ArgumentParser(
        prog="ec3py",
        description="Multi-player bandits with collision-dependent rewards "
                    "(run | ingest | bounds | sweep | anytime)")
    p.add_argument("--quiet", action="store_true",
                   help="Only log warnings and errors")
    sub = p.add_subparsers(dest="cmd", required=True)

    pr = sub.add_parser("run", help="Run seeded replications and write a report")
    pr.add_argument("--config", type=str, required=True)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--out", type=str, default=None)
    pr.add_argument("--replications", type=int, default=None)
    pr.add_argument("--workers", type=int, default=None)
    pr.add_argument("--overwrite", action="store_true")
    pr.set_defaults(func=cmd_run)

    pi = sub.add_parser("ingest", help="Build a trace-based instance from group CSVs")
    pi.add_argument("--input", type=str, nargs="+", required=True)
    pi.add_argument("--arms", type=int, default=None)
    pi.add_argument("--players", type=int, default=None)
    pi.add_argument("--horizon", type=int, default=None)
    pi.add_argument("--split", choices=["rank", "random"], default="rank")
    pi.add_argument("--seed", type=int, default=0)
    pi.add_argument("--out", type=str, required=True)
    pi.add_argument("--overwrite", action="store_true")
    pi.set_defaults(func=cmd_ingest)

    pb = sub.add_parser("bounds", help="Print the lower and upper regret bounds")
    pb.add_argument("--config", type=str, required=True)
    pb.add_argument("--seed", type=int, default=None)
    pb.set_defaults(func=cmd_bounds)

    ps = sub.add_parser("sweep", help="Repeat an experiment over coding rates")
    ps.add_argument("--config", type=str, required=True)
    ps.add_argument("--rates", type=_rates, required=True)
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--out", type=str, default=None)
    ps.add_argument("--replications", type=int, default=None)
    ps.add_argument("--overwrite", action="store_true")
    ps.set_defaults(func=cmd_sweep)

    pa = sub.add_parser("anytime", help="Run with the doubling trick up to a slot")
    pa.add_argument("--config", type=str, required=True)
    pa.add_argument("--stop", type=int, required=True)
    pa.add_argument("--t0", type=int, required=True)
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--out", type=str, default=None)
    pa.add_argument("--overwrite", action="store_true")
    pa.set_defaults(func=cmd_anytime)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    if args.quiet:
        set_log_level("warning")
    try:
        args.func(args)
    except (ConfigError, KeyError, ValueError, IOError) as e:
        mylog.error(str(e))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
