import json

import numpy as np
import pytest

from ec3py.config import parse_config, load_config, ConfigError, \
    CodeConfig, instance_config_to_dict, parse_instance, \
    write_instance_config
from ec3py.env import build_instance
from .utils import assert_allclose_arrays


def interleaved_spec():
    return {"instance": {"num_players": 5, "horizon": 10**5, "sigma": 0.2,
                         "arms": {"num_arms": 10,
                                  "means": {"linear": [0.3, 0.84]},
                                  "collision_mean": 0.1},
                         "shuffle_arms": True},
            "algorithm": "ec3",
            "code": {"scheme": "hamming", "rate": 0.018},
            "experiment": {"replications": 4, "seed": 3}}


def test_parse_compact_config():
    config = parse_config(interleaved_spec())
    inst = config.instance
    assert len(inst.arms) == 10
    assert inst.num_players == 5
    assert inst.shuffle_arms
    assert_allclose_arrays([a.mu for a in inst.arms], np.linspace(0.3, 0.84, 10))
    assert_allclose_arrays([a.nu for a in inst.arms], 0.1)
    assert inst.arms[0].no_collision.sigma == 0.2
    assert config.code.rate == 0.018
    assert config.seeds == [3, 4, 5, 6]
    assert not config.sensing
    assert config.scheme_kind == "hamming"
    scheme = config.scheme_for(build_instance(config.instance_for(3)))
    assert scheme.kind == "hamming"
    assert scheme.rate == 0.018


def test_algorithm_variants():
    spec = interleaved_spec()
    spec["algorithm"] = "ec3_sensing"
    config = parse_config(spec)
    assert config.sensing
    assert config.scheme_kind == "uncoded"
    assert config.instance_for(7).sensing
    assert config.instance_for(7).seed == 7
    spec["algorithm"] = "ec3_ht"
    config = parse_config(spec)
    assert not config.sensing
    assert config.scheme_kind == "uncoded"
    spec["algorithm"] = "sic_mmab"
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "algorithm"


def test_config_errors():
    spec = interleaved_spec()
    del spec["instance"]["horizon"]
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "instance.horizon"
    assert "instance.horizon" in str(e.value)
    spec = interleaved_spec()
    spec["instance"]["arms"] = [{"no_collision": {"mean": 0.9},
                                 "collision": {"mean": 0.1}}]*3 + \
        [{"no_collision": {"mean": 1.3}, "collision": {"mean": 0.1}}]
    spec["instance"]["num_players"] = 2
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "instance.arms[3].no_collision.mean"
    spec = interleaved_spec()
    spec["code"]["scheme"] = "ldpc"
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "code.scheme"
    spec = interleaved_spec()
    spec["code"]["rate"] = 1.5
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "code.rate"
    spec = interleaved_spec()
    spec["experiment"]["replications"] = 0
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "experiment.replications"
    spec = interleaved_spec()
    spec["instance"]["num_players"] = 11
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "instance.num_players"
    spec = interleaved_spec()
    spec["plots"] = {}
    with pytest.raises(ConfigError):
        parse_config(spec)
    spec = interleaved_spec()
    spec["instance"]["arms"]["collision_mean"] = [0.1, 0.2]
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "instance.arms.collision_mean"


def test_suggested_rate():
    spec = interleaved_spec()
    spec["code"]["rate"] = "suggested"
    config = parse_config(spec)
    assert config.code.rate == "suggested"
    inst = build_instance(config.instance_for(0))
    scheme = config.scheme_for(inst)
    assert_allclose_arrays(scheme.rate, 0.04/(4.0*np.log(10**5)))
    assert CodeConfig("uncoded").make_scheme(inst).kind == "uncoded"


def test_collision_map():
    spec = {"num_players": 2, "horizon": 1000, "sigma": 0.5,
            "arms": [{"no_collision": {"kind": "bernoulli", "mean": m},
                      "collision": {"2": {"kind": "bernoulli", "mean": 0.2},
                                    "3": {"kind": "bernoulli", "mean": 0.1}}}
                     for m in (0.9, 0.8, 0.7)]}
    config = parse_instance(spec)
    arm = config.arms[0]
    assert arm.gamma_dependent
    assert arm.nu_gamma(2) == 0.2
    assert arm.nu_gamma(3) == 0.1
    spec["arms"][1]["collision"]["3"]["mean"] = 0.3
    with pytest.raises(ConfigError) as e:
        parse_instance(spec)
    assert e.value.key_path == "instance.arms[1]"


def test_trace_files(tmp_path):
    (tmp_path / "data").mkdir()
    with open(tmp_path / "data" / "groups.csv", "w") as f:
        f.write("a,b\n0.9,0.1\n0.7,0.2\n0.8,0.0\n")
    spec = {"instance": {"num_players": 1, "horizon": 100, "sigma": 0.5,
                         "arms": [{"no_collision": {"kind": "trace",
                                                    "file": "data/groups.csv",
                                                    "column": "a"},
                                   "collision": {"kind": "trace",
                                                 "file": "data/groups.csv",
                                                 "column": "b"}},
                                  {"no_collision": {"kind": "trace",
                                                    "values": [0.5, 0.6]},
                                   "collision": {"kind": "trace",
                                                 "values": [0.1]}}]}}
    fn = tmp_path / "config.json"
    with open(fn, "w") as f:
        json.dump(spec, f)
    config = load_config(fn)
    assert_allclose_arrays(config.instance.arms[0].mu, 0.8)
    assert_allclose_arrays(config.instance.arms[0].nu, 0.1)
    assert config.seed == 0
    spec["instance"]["arms"][0]["no_collision"]["column"] = "c"
    with open(fn, "w") as f:
        json.dump(spec, f)
    with pytest.raises(ConfigError) as e:
        load_config(fn)
    assert e.value.key_path == "instance.arms[0].no_collision"
    with open(fn, "w") as f:
        f.write("{not json")
    with pytest.raises(ConfigError):
        load_config(fn)
    with pytest.raises(IOError):
        load_config(tmp_path / "missing.json")


def test_write_instance_config(tmp_path):
    config = parse_config(interleaved_spec())
    fn = tmp_path / "instance.json"
    write_instance_config(config.instance, fn)
    with pytest.raises(IOError):
        write_instance_config(config.instance, fn)
    loaded = load_config(fn)
    assert instance_config_to_dict(loaded.instance) == \
        instance_config_to_dict(config.instance)
    assert loaded.algorithm == "ec3"
    assert loaded.replications == 1


def test_conv_tail_repeats_option():
    spec = interleaved_spec()
    spec["code"] = {"scheme": "conv"}
    inst = build_instance(parse_config(spec).instance_for(0))
    tail = parse_config(spec).scheme_for(inst)
    assert tail.tail_repeats
    spec["code"]["tail_repeats"] = False
    scheme = parse_config(spec).scheme_for(inst)
    assert not scheme.tail_repeats
    # 3*(10+2) against 3*10 coded bits at the same repeats
    assert 10*tail.length(10) == 12*scheme.length(10)
    spec["code"]["tail_repeats"] = "no"
    with pytest.raises(ConfigError) as e:
        parse_config(spec)
    assert e.value.key_path == "code.tail_repeats"
