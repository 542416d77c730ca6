import json
from dataclasses import replace

import numpy as np
import pytest
from astropy.io import ascii
from astropy.table import Table

from ec3py.analysis import RegretTrace
from ec3py.config import parse_config
from ec3py.env import AssumptionViolation, build_instance
from ec3py.harness import emit_report, aggregate_traces, run_experiment, \
    compute_bounds, ingest_dataset, episode_lengths, run_anytime, \
    minimum_horizon, sweep_rates, result_columns, run_replications, \
    run_replication
from .utils import assert_equal_arrays, assert_allclose_arrays


def make_trace(slope, n=100, stride=10):
    t = np.arange(0, n+1, stride)
    return RegretTrace({"t": t, "regret": slope*t.astype("float64"),
                        "realized_regret": slope*t.astype("float64"),
                        "collisions": np.zeros(t.size, dtype="int64"),
                        "decode_errors": np.zeros(t.size, dtype="int64")},
                       estimates={0: 1})


def small_spec(output_dir, **experiment):
    exp = {"replications": 2, "seed": 1, "output_dir": str(output_dir)}
    exp.update(experiment)
    return {"instance": {"num_players": 2, "horizon": 5000, "sigma": 0.1,
                         "arms": {"means": [0.9, 0.6, 0.3],
                                  "collision_mean": 0.1}},
            "algorithm": "ec3",
            "code": {"scheme": "repetition"},
            "experiment": exp}


def interleaved_spec(output_dir, horizon=10**5, rate=None, replications=3,
                     sensing=False):
    """
    Ten arms with means spread evenly over [0.3, 0.84], collision mean
    0.1, five players and sigma = 0.2, coded with Hamming repeats.
    """
    code = {"scheme": "hamming"}
    if rate is not None:
        code["rate"] = rate
    return {"instance": {"num_players": 5, "horizon": horizon, "sigma": 0.2,
                         "sensing": sensing, "shuffle_arms": True,
                         "arms": {"num_arms": 10,
                                  "means": {"linear": [0.3, 0.84]},
                                  "collision_mean": 0.1}},
            "algorithm": "ec3",
            "code": code,
            "experiment": {"replications": replications, "seed": 0,
                           "output_dir": str(output_dir)}}


def regret_at(trace, t):
    return float(trace["regret"][np.searchsorted(trace.times, t)])


def write_groups(fn, columns, nrows=5):
    Table([np.full(nrows, m) for m in columns.values()],
          names=list(columns)).write(fn, format="ascii.csv")


def test_emit_report_zero_trace(tmp_path):
    paths = emit_report([make_trace(0.0)], {"lower_bound": 0.0}, tmp_path)
    with open(paths["results"], "r") as f:
        header = f.readline().strip()
    assert header == ",".join(result_columns)
    t = ascii.read(paths["results"], format="csv")
    assert_equal_arrays(t["mean_regret"], 0.0)
    assert_equal_arrays(t["std_regret"], 0.0)
    assert paths["plot"].exists()
    with open(paths["summary"], "r") as f:
        summary = json.load(f)
    assert summary["lower_bound"] == 0.0
    assert summary["replications"] == 1
    assert summary["final_regret_mean"] == 0.0


def test_emit_report_aggregation(tmp_path):
    traces = [make_trace(1.0), make_trace(3.0)]
    table = aggregate_traces(traces)
    assert_allclose_arrays(table["mean_regret"], 2.0*table["t"])
    assert_allclose_arrays(table["std_regret"], table["t"])
    paths = emit_report(traces, {}, tmp_path)
    t = ascii.read(paths["results"], format="csv")
    assert_allclose_arrays(t["mean_regret"], 2.0*t["t"])
    with pytest.raises(IOError):
        emit_report(traces, {}, tmp_path)
    emit_report(traces, {}, tmp_path, overwrite=True)
    with pytest.raises(ValueError):
        emit_report([], {}, tmp_path / "empty")
    with pytest.raises(ValueError):
        aggregate_traces([make_trace(1.0), make_trace(1.0, stride=20)])


def test_run_experiment_trivial(tmp_path):
    spec = {"instance": {"num_players": 1, "horizon": 2000, "sigma": 0.2,
                         "arms": {"means": [0.8], "collision_mean": 0.1}},
            "experiment": {"output_dir": str(tmp_path / "out")}}
    traces, paths = run_experiment(parse_config(spec))
    assert len(traces) == 1
    t = ascii.read(paths["results"], format="csv")
    assert_equal_arrays(t["mean_regret"], 0.0)
    assert t["t"][-1] == 2000
    with open(paths["summary"], "r") as f:
        summary = json.load(f)
    assert summary["lower_bound"] == 0.0
    assert summary["convergence_fraction"] == 1.0


def test_run_experiment_reproducible(tmp_path):
    runs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        config = parse_config(small_spec(tmp_path / name, workers=workers))
        traces, paths = run_experiment(config)
        with open(paths["results"], "rb") as f:
            runs.append(f.read())
    assert runs[0] == runs[1]
    assert runs[0] == runs[2]


def test_compute_bounds(tmp_path):
    config = parse_config(small_spec(tmp_path))
    bounds = compute_bounds(config)
    assert 0.0 < bounds["lower_bound"] < bounds["upper_bound"]
    assert set(bounds["upper_bound_terms"]) == {"exploration", "statistics",
                                                "decisions", "atypical"}
    assert bounds["sigma_extrapolated"]
    longer = compute_bounds(config, horizon=10**4)
    assert_allclose_arrays(longer["lower_bound"]/bounds["lower_bound"],
                           np.log(10**4)/np.log(5000))
    with pytest.raises(ValueError):
        compute_bounds(config, build_instance(config.instance_for(1)),
                       horizon=10**4)


def test_ingest_rank_split(tmp_path):
    fn = tmp_path / "groups.csv"
    write_groups(fn, {"a": 0.3, "b": 0.8, "c": 0.2, "d": 0.7})
    config = ingest_dataset(fn)
    assert len(config.arms) == 2
    assert_allclose_arrays([a.mu for a in config.arms], [0.8, 0.7])
    assert_allclose_arrays([a.nu for a in config.arms], [0.3, 0.2])
    assert config.sigma == 0.5
    assert config.num_players == 1
    assert config.horizon == 5
    assert_allclose_arrays([config.mu_min, config.nu_max], [0.7, 0.3])
    inst = build_instance(replace(config, horizon=100))
    assert_equal_arrays(inst.top_arms, [0])
    with pytest.raises(ValueError):
        ingest_dataset(fn, num_arms=3)
    with pytest.raises(KeyError):
        ingest_dataset(fn, split_rule="greedy")


def test_ingest_errors(tmp_path):
    fn = tmp_path / "same.csv"
    write_groups(fn, {"a": 0.6, "b": 0.6})
    with pytest.raises(AssumptionViolation):
        ingest_dataset(fn)
    fn = tmp_path / "odd.csv"
    write_groups(fn, {"a": 0.6, "b": 0.5, "c": 0.1})
    with pytest.raises(ValueError):
        ingest_dataset(fn)
    fn = tmp_path / "big.csv"
    write_groups(fn, {"a": 1.6, "b": 0.5})
    with pytest.raises(ValueError) as e:
        ingest_dataset(fn)
    assert "'a'" in str(e.value)
    with pytest.raises(IOError):
        ingest_dataset(tmp_path / "missing.csv")


def test_ingest_many_groups(tmp_path):
    top = np.linspace(0.67, 0.95, 20)
    bottom = np.linspace(0.35, 0.60, 20)
    rng = np.random.default_rng(0)
    means = rng.permutation(np.concatenate([top, bottom]))
    # split the groups over two files
    write_groups(tmp_path / "a.csv", {f"g{i}": m for i, m in enumerate(means[:25])})
    write_groups(tmp_path / "b.csv", {f"h{i}": m for i, m in enumerate(means[25:])})
    files = [tmp_path / "a.csv", tmp_path / "b.csv"]
    config = ingest_dataset(files, num_players=5)
    assert len(config.arms) == 20
    assert_allclose_arrays(config.mu_min, 0.67)
    assert_allclose_arrays(config.nu_max, 0.60)
    assert_allclose_arrays([a.mu for a in config.arms], top[::-1])
    assert_allclose_arrays([a.nu for a in config.arms], bottom[::-1])
    shuffled = ingest_dataset(files, split_rule="random", seed=4)
    assert_allclose_arrays([a.mu for a in shuffled.arms], top[::-1])
    nus = np.array([a.nu for a in shuffled.arms])
    assert_allclose_arrays(np.sort(nus), bottom)
    assert not np.allclose(nus, bottom[::-1])


def test_episode_lengths():
    assert episode_lengths(1000, 5000) == [1000, 2000, 2000]
    assert episode_lengths(1000, 700) == [700]
    assert episode_lengths(1000, 3000) == [1000, 2000]


def test_run_anytime(tmp_path):
    config = parse_config(small_spec(tmp_path))
    trace = run_anytime(config, 5000, 1000)
    assert trace.times[-1] == 5000
    assert np.all(np.diff(trace["regret"]) >= -1e-9)
    short = run_anytime(config, 700, 1000)
    assert short.times[-1] == 700
    inst = build_instance(config.instance_for(1))
    assert minimum_horizon(inst, config.scheme_for(inst), 1000) < 1000
    assert minimum_horizon(inst, config.scheme_for(inst), 10) > 10
    with pytest.raises(ValueError):
        run_anytime(config, 5000, 10)


def test_sweep_rates(tmp_path):
    spec = small_spec(tmp_path, replications=1)
    spec["code"] = {"scheme": "hamming"}
    config = parse_config(spec)
    table = sweep_rates(config, [0.05, 0.2])
    assert list(table.colnames) == ["rate", "decode_error_rate",
                                    "message_error_rate", "mean_final_regret",
                                    "convergence_fraction"]
    assert_allclose_arrays(table["rate"], [0.05, 0.2])
    assert np.all(table["decode_error_rate"] >= 0.0)
    # shorter codes fail more often
    assert table["message_error_rate"][0] <= table["message_error_rate"][1]
    with pytest.raises(ValueError):
        sweep_rates(config, [0.0])


def test_coded_beats_uncoded(tmp_path, full_scale):
    n = 100 if full_scale else 3
    config = parse_config(interleaved_spec(tmp_path, horizon=5*10**5,
                                           rate=0.018, replications=n))
    coded = run_replications(config)
    uncoded = run_replications(replace(config, algorithm="ec3_ht"))
    n_coded = sum(tr.converged for tr in coded)
    n_uncoded = sum(tr.converged for tr in uncoded)
    assert n_coded >= 0.9*n
    assert n_uncoded < n_coded
    for tr in coded:
        if tr.converged:
            assert tr.num_decode_errors == 0


def test_regret_sublinear(tmp_path, full_scale):
    n = 50 if full_scale else 2
    config = parse_config(interleaved_spec(tmp_path, horizon=4*10**5,
                                           rate=0.018, replications=n))
    traces = run_replications(config)
    for T in (10**5, 2*10**5):
        r_T = np.mean([regret_at(tr, T) for tr in traces])
        r_2T = np.mean([regret_at(tr, 2*T) for tr in traces])
        assert 0.0 < r_T <= r_2T <= 1.5*r_T


def test_rate_tradeoff(tmp_path, full_scale):
    n = 10 if full_scale else 1
    config = parse_config(interleaved_spec(tmp_path, replications=n))
    rates = [0.004, 0.01, 0.018, 0.06, 0.3]
    table = sweep_rates(config, rates)
    errors = np.asarray(table["message_error_rate"])
    # nondecreasing in the rate, up to Monte-Carlo noise
    assert np.all(np.diff(errors) >= -0.01)
    assert errors[-1] > errors[0]
    best = int(np.argmin(table["mean_final_regret"]))
    assert 0 < best < len(rates)-1


def test_regret_within_bounds(tmp_path, full_scale):
    n = 20 if full_scale else 2
    config = parse_config(interleaved_spec(tmp_path, replications=n))
    traces = run_replications(config)
    bounds = compute_bounds(config)
    mean_regret = np.mean([tr.final_regret for tr in traces])
    assert bounds["lower_bound"] <= mean_regret <= bounds["upper_bound"]


def test_anytime_against_known_horizon(tmp_path, full_scale):
    n = 20 if full_scale else 3
    config = parse_config(interleaved_spec(tmp_path, sensing=True))
    ratios = []
    for seed in range(n):
        _, known = run_replication(config, seed)
        anytime = run_anytime(config, 10**5, 5*10**4, seed=seed)
        assert anytime.times[-1] == known.times[-1]
        ratios.append(anytime.final_regret/known.final_regret)
    assert np.median(ratios) <= 4.0
