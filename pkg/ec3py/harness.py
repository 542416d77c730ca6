"""
Experiment runner: seeded replications, report files, dataset
ingestion, the doubling-trick wrapper and coding rate sweeps.
"""
import json
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np
from astropy.io import ascii
from astropy.table import Table

from ec3py.analysis import centralized_lower_bound, regret_upper_bound, \
    regret_trace, phase_kinds
from ec3py.config import load_config
from ec3py.ec3 import Ec3Run, exploration_block, run_ec3
from ec3py.env import ArmModel, AssumptionViolation, InstanceConfig, \
    build_instance
from ec3py.plots import RegretPlot
from ec3py.protocol import message_error_rate, player_count_plan, \
    presence_plan
from ec3py.sources import TraceSource
from ec3py.utils import mylog, ensure_list

result_columns = ("t", "mean_regret", "std_regret", "mean_collisions",
                  "decode_errors")

result_formats = {"t": "%d",
                  "mean_regret": "%.6f",
                  "std_regret": "%.6f",
                  "mean_collisions": "%.6f",
                  "decode_errors": "%d"}


def default_stride(horizon):
    return max(1, horizon // 1000)


def run_replication(config, seed):
    """
    Run the algorithm of *config* once, on the instance seeded by
    *seed*. Returns the pair (seed, trace).
    """
    instance = build_instance(config.instance_for(seed))
    scheme = config.scheme_for(instance)
    stride = config.stride or default_stride(instance.horizon)
    res = run_ec3(instance, scheme, stride=stride)
    return seed, res.trace


def run_replications(config):
    """
    Run every replication of *config*, on *config.workers* processes
    if more than one. The traces come back ordered by seed.
    """
    seeds = config.seeds
    if config.workers > 1 and len(seeds) > 1:
        results = []
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            futures = [ex.submit(run_replication, config, s) for s in seeds]
            for f in as_completed(futures):
                results.append(f.result())
    else:
        results = [run_replication(config, s) for s in seeds]
    results.sort(key=lambda r: r[0])
    return [trace for _, trace in results]


def aggregate_traces(traces):
    """
    Mean and standard deviation (over runs) of the regret at each
    sampled slot, with the mean collision count and the total number
    of decode errors.

    Returns
    -------
    :class:`~astropy.table.Table`
        With the columns "t", "mean_regret", "std_regret",
        "mean_collisions" and "decode_errors".
    """
    traces = ensure_list(traces)
    if len(traces) == 0:
        raise ValueError("At least one regret trace is needed!")
    t = np.asarray(traces[0]["t"])
    for tr in traces[1:]:
        if not np.array_equal(np.asarray(tr["t"]), t):
            raise ValueError("All traces must be sampled at the same slots!")
    regret = np.array([tr["regret"] for tr in traces], dtype="float64")
    collisions = np.array([tr["collisions"] for tr in traces], dtype="float64")
    errors = np.array([tr["decode_errors"] for tr in traces], dtype="int64")
    return Table([t.astype("int64"), regret.mean(axis=0), regret.std(axis=0),
                  collisions.mean(axis=0), errors.sum(axis=0)],
                 names=result_columns)


def compute_bounds(config, instance=None, horizon=None):
    """
    Centralized lower bound and EC3 upper bound for the instance of
    *config*, evaluated at *horizon* if given (the stopping slot of an
    anytime run) instead of the configured horizon.
    """
    if instance is None:
        inst_config = config.instance_for(config.seed)
        if horizon is not None:
            inst_config = replace(inst_config, horizon=int(horizon))
        instance = build_instance(inst_config)
    elif horizon is not None:
        raise ValueError("Pass either an instance or a horizon, not both!")
    upper = regret_upper_bound(instance, sensing=config.sensing)
    return {"lower_bound": centralized_lower_bound(instance),
            "upper_bound": upper.value,
            "upper_bound_terms": upper.terms,
            "sigma_extrapolated": upper.sigma_extrapolated,
            "rounds_clamped": upper.rounds_clamped}


def summarize(traces, num_players):
    finals = np.array([tr.final_regret for tr in traces])
    messages = sum(tr.num_messages for tr in traces)
    errors = sum(tr.num_decode_errors for tr in traces)
    wrong_M = sum(any(v != num_players for v in tr.estimates.values())
                  for tr in traces)
    components = {k: float(np.mean([tr.components.get(k, 0.0) for tr in traces]))
                  for k in phase_kinds}
    return {"replications": len(traces),
            "final_regret_mean": float(finals.mean()),
            "final_regret_std": float(finals.std()),
            "final_regret_min": float(finals.min()),
            "final_regret_max": float(finals.max()),
            "convergence_fraction": float(np.mean([tr.converged for tr in traces])),
            "typical_fraction": float(np.mean([tr.typical for tr in traces])),
            "estimate_failures": int(wrong_M),
            "num_messages": int(messages),
            "decode_errors": int(errors),
            "decode_error_rate": float(errors/messages) if messages > 0 else 0.0,
            "mean_phases": float(np.mean([tr.num_phases for tr in traces])),
            "regret_components": components}


def _check_output_dir(output_dir):
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOError(f"Cannot create the output directory {output_dir}: {e}")
    if not os.access(output_dir, os.W_OK):
        raise IOError(f"The output directory {output_dir} is not writable!")
    return output_dir


def emit_report(traces, bounds, output_dir, overwrite=False, meta=None,
                num_players=None, label=None, markers=None):
    """
    Write results.csv, summary.json and regret.svg for a set of
    regret traces.

    Parameters
    ----------
    traces : list of :class:`~ec3py.analysis.RegretTrace`
        One per replication, all sampled at the same slots.
    bounds : dict
        Theoretical bounds to report, e.g. from :func:`compute_bounds`.
    output_dir : string or Path
        Directory the files are written to.
    overwrite : boolean, optional
        Whether to replace existing files. Default: False
    meta : dict, optional
        Extra entries for summary.json.
    num_players : integer, optional
        Number of players, to count wrong player-count estimates.
        Default: the largest estimate in the first trace
    label : string, optional
        Legend label of the regret curve.
    markers : list of integers, optional
        Slots marked with a vertical line on the plot, e.g. the
        restarts of an anytime run.

    Returns
    -------
    dict
        Paths of the written files.
    """
    traces = ensure_list(traces)
    if len(traces) == 0:
        raise ValueError("Cannot write a report without regret traces!")
    output_dir = _check_output_dir(output_dir)
    paths = {"results": output_dir / "results.csv",
             "summary": output_dir / "summary.json",
             "plot": output_dir / "regret.svg"}
    for path in paths.values():
        if path.exists() and not overwrite:
            raise IOError(f"The file {path} exists and overwrite=False!")
    table = aggregate_traces(traces)
    ascii.write(table, paths["results"], format="csv",
                formats=result_formats, overwrite=True)
    if num_players is None:
        num_players = max(traces[0].estimates.values(), default=1)
    summary = summarize(traces, num_players)
    summary.update({k: v for k, v in bounds.items()})
    if meta is not None:
        summary.update(meta)
    with open(paths["summary"], "w") as f:
        json.dump(summary, f, indent=4)
    p = RegretPlot(table, label=label)
    if bounds.get("lower_bound") is not None:
        p.add_hline(bounds["lower_bound"], ls="dashed", color="black")
    if markers is not None:
        for slot in ensure_list(markers):
            p.add_vline(slot, ls="dotted", color="gray")
    p.savefig(paths["plot"], format="svg")
    mylog.info("Wrote the report of %d runs to %s.", len(traces), output_dir)
    return paths


def run_experiment(config):
    """
    Run the replications of *config* and write their report.

    Parameters
    ----------
    config : :class:`~ec3py.config.ExperimentConfig`

    Returns
    -------
    traces : list of :class:`~ec3py.analysis.RegretTrace`
    paths : dict
        Paths of results.csv, summary.json and regret.svg.
    """
    output_dir = _check_output_dir(config.output_dir)
    mylog.info("Running %d replications of %s (scheme '%s', T = %d).",
               config.replications, config.algorithm, config.scheme_kind,
               config.instance.horizon)
    traces = run_replications(config)
    bounds = compute_bounds(config)
    meta = {"algorithm": config.algorithm,
            "scheme": config.scheme_kind,
            "rate": config.code.rate,
            "horizon": config.instance.horizon,
            "num_arms": len(config.instance.arms),
            "num_players": config.instance.num_players,
            "seeds": config.seeds}
    paths = emit_report(traces, bounds, output_dir, overwrite=config.overwrite,
                        meta=meta, num_players=config.instance.num_players,
                        label=config.algorithm)
    return traces, paths


def _read_groups(csv_paths):
    groups = []
    for path in ensure_list(csv_paths):
        if not Path(path).exists():
            raise IOError(f"Dataset file {path} does not exist!")
        t = ascii.read(path, format="csv")
        for col in t.colnames:
            values = t[col]
            if hasattr(values, "mask"):
                values = values[~np.asarray(values.mask)]
            try:
                groups.append(TraceSource(np.asarray(values, dtype="float64"),
                                          origin=(str(Path(path).resolve()), col)))
            except ValueError as e:
                raise ValueError(f"Group '{col}' of {path}: {e}")
    return groups


def ingest_dataset(csv_paths, num_arms=None, split_rule="rank",
                   num_players=None, horizon=None, seed=0):
    """
    Build a trace-based instance from per-group reward sequences.

    The groups are sorted by empirical mean; the upper half become the
    no-collision sources and the lower half the collision sources.

    Parameters
    ----------
    csv_paths : string or list of strings
        CSV files, one column per group, values in [0, 1].
    num_arms : integer, optional
        Number of arms; the group count must be twice this.
        Default: half the group count
    split_rule : string, optional
        "rank" pairs the i-th best upper group with the i-th best
        lower group; "random" pairs them at random. Default: "rank"
    num_players : integer, optional
        Default: half the number of arms, at least 1
    horizon : integer, optional
        Default: the length of the longest group
    seed : integer, optional
        Seed of the random pairing and of the instance. Default: 0

    Returns
    -------
    :class:`~ec3py.env.InstanceConfig`
    """
    groups = _read_groups(csv_paths)
    if len(groups) % 2 != 0:
        raise ValueError(f"An even number of groups is needed, got {len(groups)}!")
    if num_arms is None:
        num_arms = len(groups) // 2
    if 2*num_arms != len(groups):
        raise ValueError(f"{len(groups)} groups cannot make {num_arms} arms!")
    order = np.argsort([-g.mean for g in groups], kind="stable")
    top = [groups[i] for i in order[:num_arms]]
    bottom = [groups[i] for i in order[num_arms:]]
    if split_rule == "random":
        perm = np.random.default_rng(seed).permutation(num_arms)
        bottom = [bottom[i] for i in perm]
    elif split_rule != "rank":
        raise KeyError(f"Unknown split rule '{split_rule}'! Options are "
                       f"'rank' and 'random'.")
    mu_min = min(g.mean for g in top)
    nu_max = max(g.mean for g in bottom)
    if nu_max >= mu_min:
        raise AssumptionViolation(
            "reward separation", f"the collision half has mean up to "
                                 f"{nu_max}, the no-collision half down to {mu_min}")
    arms = tuple(ArmModel(nc, c) for nc, c in zip(top, bottom))
    if num_players is None:
        num_players = max(1, num_arms // 2)
    if horizon is None:
        horizon = max(g.values.size for g in groups)
    mylog.info("Ingested %d groups into %d arms, mu_min = %g, nu_max = %g.",
               len(groups), num_arms, mu_min, nu_max)
    return InstanceConfig(arms, num_players, horizon, 0.5, seed=seed,
                          mu_min=mu_min, nu_max=nu_max)


def episode_lengths(initial_horizon, stop):
    """
    Lengths of the doubling-trick episodes T0, 2 T0, 4 T0, ... run
    until slot *stop*, the last one truncated.

    Examples
    --------
    >>> episode_lengths(1000, 5000)
    [1000, 2000, 2000]
    """
    lengths = []
    total = 0
    i = 0
    while total < stop:
        n = min(initial_horizon*2**i, stop-total)
        lengths.append(n)
        total += n
        i += 1
    return lengths


def minimum_horizon(instance, scheme, horizon):
    """
    Slots needed to finish initialization and the first exploration
    phase when planning for *horizon*.
    """
    K = instance.num_arms
    scheme = scheme.with_horizon(horizon)
    init = presence_plan(K, scheme).length + player_count_plan(K, K, scheme).length
    return init + 2*K*exploration_block(horizon, instance.sigma)


def run_anytime(config, stop, initial_horizon, seed=None, stride=None):
    """
    Run EC3 without a known horizon by restarting it with horizons
    T0, 2 T0, 4 T0, ... until slot *stop*.

    Parameters
    ----------
    config : :class:`~ec3py.config.ExperimentConfig`
        Its instance horizon is ignored.
    stop : integer
        Slot at which the run ends.
    initial_horizon : integer
        Horizon T0 of the first episode.
    seed : integer, optional
        Instance seed. Default: the config seed
    stride : integer, optional
        Stride of the regret trace.

    Returns
    -------
    :class:`~ec3py.analysis.RegretTrace`
    """
    seed = config.seed if seed is None else seed
    instance = build_instance(replace(config.instance_for(seed), horizon=stop))
    scheme = config.scheme_for(instance)
    needed = minimum_horizon(instance, scheme, initial_horizon)
    if initial_horizon < needed:
        raise ValueError(f"The first episode needs at least {needed} slots, "
                         f"got T0 = {initial_horizon}!")
    runs = []
    t = 0
    for i, n in enumerate(episode_lengths(initial_horizon, stop)):
        res = run_ec3(instance, scheme, horizon=initial_horizon*2**i, stop=n,
                      slot_offset=t)
        runs.append(res.run)
        t += n
    mylog.debug("Ran %d episodes up to slot %d.", len(runs), stop)
    if stride is None:
        stride = config.stride or default_stride(stop)
    return regret_trace(instance, Ec3Run.concatenate(runs), stride=stride)


def sweep_rates(config, rates, probe_bits=8, probe_trials=2000):
    """
    Repeat the experiment of *config* for each coding rate in *rates*.

    Parameters
    ----------
    config : :class:`~ec3py.config.ExperimentConfig`
    rates : list of floats
        Coding rates in (0, 1].
    probe_bits : integer, optional
        Length of the messages of the Monte-Carlo error rate probe.
        Default: 8
    probe_trials : integer, optional
        Messages sent by the probe. Default: 2000

    Returns
    -------
    :class:`~astropy.table.Table`
        One row per rate with the decode-error rate (per message) seen
        in the runs, the probe's error rate on the arm with the
        smallest no-collision mean, the mean final regret and the
        convergence fraction.
    """
    instance = build_instance(config.instance_for(config.seed))
    worst = instance.arms[int(np.argmin(instance.mu))]
    rows = []
    for rate in ensure_list(rates):
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"Coding rates must be in (0, 1], got {rate}!")
        cfg = replace(config, code=replace(config.code, rate=float(rate)))
        traces = run_replications(cfg)
        summary = summarize(traces, config.instance.num_players)
        probe = message_error_rate(cfg.scheme_for(instance), worst, probe_bits,
                                   trials=probe_trials, seed=config.seed)
        mylog.info("Rate %g: decode-error rate %g, mean final regret %g.",
                   rate, summary["decode_error_rate"],
                   summary["final_regret_mean"])
        rows.append((float(rate), summary["decode_error_rate"], probe,
                     summary["final_regret_mean"],
                     summary["convergence_fraction"]))
    return Table(rows=rows, names=("rate", "decode_error_rate",
                                   "message_error_rate", "mean_final_regret",
                                   "convergence_fraction"))


def load_experiment(filename, seed=None, output_dir=None, replications=None):
    """
    Load a configuration file, overriding selected experiment entries.
    """
    config = load_config(filename)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if output_dir is not None:
        overrides["output_dir"] = str(output_dir)
    if replications is not None:
        overrides["replications"] = replications
    return replace(config, **overrides) if overrides else config
