"""
JSON experiment configurations.

A configuration file has the sections "instance", "algorithm", "code"
and "experiment"::

    {
        "instance": {
            "num_players": 5, "horizon": 500000, "sigma": 0.2,
            "arms": {"num_arms": 10, "means": {"linear": [0.3, 0.84]},
                     "collision_mean": 0.1},
            "shuffle_arms": true
        },
        "algorithm": "ec3",
        "code": {"scheme": "hamming", "rate": 0.018},
        "experiment": {"replications": 100, "seed": 0,
                       "output_dir": "interleaved"}
    }

Arms may also be listed one by one, each with a "no_collision" and a
"collision" source; a collision entry keyed by collider counts
("2", "3", ...) gives collider-dependent rewards.
"""
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ec3py.coding import CodeScheme, scheme_kinds, suggested_rate
from ec3py.env import ArmModel, InstanceConfig
from ec3py.sources import make_source, source_kinds

algorithms = ("ec3", "ec3_ht", "ec3_sensing")


class ConfigError(ValueError):
    def __init__(self, key_path, msg):
        self.key_path = key_path
        self.msg = msg

    def __str__(self):
        return f"Invalid configuration entry '{self.key_path}': {self.msg}"


@dataclass(frozen=True)
class CodeConfig:
    """
    Codec choice of an experiment. *rate* may be a number in (0, 1]
    or "suggested", which picks (mu_min - nu_max)^2/(4 ln T).
    """
    scheme: str = "hamming"
    rate: object = None
    repeats: int = None
    generators: tuple = (0o5, 0o7, 0o7)
    memory: int = 2
    d_free: int = 7
    b_free: float = 1.0
    tail_repeats: bool = True

    def make_scheme(self, instance, kind=None):
        kind = self.scheme if kind is None else kind
        rate = self.rate
        if rate == "suggested":
            rate = min(1.0, suggested_rate(instance.mu_min, instance.nu_max,
                                           instance.horizon))
        if kind == "uncoded":
            return CodeScheme.for_instance("uncoded", instance)
        return CodeScheme.for_instance(kind, instance, repeats=self.repeats,
                                       rate=rate, generators=self.generators,
                                       memory=self.memory, d_free=self.d_free,
                                       b_free=self.b_free,
                                       tail_repeats=self.tail_repeats)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceConfig
    algorithm: str = "ec3"
    code: CodeConfig = CodeConfig()
    replications: int = 1
    seed: int = 0
    output_dir: str = "ec3_output"
    stride: int = None
    workers: int = 1
    overwrite: bool = False

    def __post_init__(self):
        if self.algorithm not in algorithms:
            raise ConfigError("algorithm", f"unknown algorithm '{self.algorithm}', "
                                           f"options are {algorithms}")
        if self.replications < 1:
            raise ConfigError("experiment.replications",
                              f"must be at least 1, got {self.replications}")
        if self.workers < 1:
            raise ConfigError("experiment.workers",
                              f"must be at least 1, got {self.workers}")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("experiment.stride",
                              f"must be at least 1, got {self.stride}")

    @property
    def sensing(self):
        return self.algorithm == "ec3_sensing" or self.instance.sensing

    @property
    def scheme_kind(self):
        if self.algorithm == "ec3_ht" or self.sensing:
            return "uncoded"
        return self.code.scheme

    def instance_for(self, seed):
        """
        The instance configuration of the replication run with *seed*.
        """
        return replace(self.instance, seed=seed, sensing=self.sensing)

    def scheme_for(self, instance):
        return self.code.make_scheme(instance, kind=self.scheme_kind)

    @property
    def seeds(self):
        return [self.seed+r for r in range(self.replications)]


def _get(d, key, path, kind=None, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key,
                              "missing required entry")
        return default
    value = d[key]
    full = f"{path}.{key}" if path else key
    if kind is not None:
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
            raise ConfigError(full, f"expected {kind.__name__}, got {value!r}")
    return value


def parse_source(spec, path, sigma, base_dir=None):
    """
    Build a reward source from its config entry, resolving trace
    files relative to *base_dir*.
    """
    if not isinstance(spec, dict):
        raise ConfigError(path, f"expected a source entry, got {spec!r}")
    spec = dict(spec)
    kind = spec.get("kind", "gaussian")
    if kind not in source_kinds:
        raise ConfigError(f"{path}.kind", f"unknown source kind '{kind}', "
                                          f"options are {tuple(source_kinds)}")
    if kind in ("gaussian", "bernoulli"):
        mean = _get(spec, "mean", path, kind=float, required=True)
        if not 0.0 <= mean <= 1.0:
            raise ConfigError(f"{path}.mean", f"{mean} is outside [0, 1]")
    elif "values" not in spec:
        _get(spec, "column", path, kind=str, required=True)
        fn = Path(_get(spec, "file", path, kind=str, required=True))
        if base_dir is not None and not fn.is_absolute():
            fn = Path(base_dir) / fn
        spec["file"] = str(fn)
    try:
        return make_source(spec, sigma=sigma)
    except (KeyError, ValueError, IOError) as e:
        raise ConfigError(path, str(e))


def _parse_collision(spec, path, sigma, base_dir):
    if isinstance(spec, dict) and len(spec) > 0 and \
            all(str(k).isdigit() for k in spec):
        return {int(g): parse_source(s, f"{path}.{g}", sigma, base_dir)
                for g, s in spec.items()}
    return parse_source(spec, path, sigma, base_dir)


def _make_arm(no_collision, collision, path):
    try:
        return ArmModel(no_collision, collision)
    except ValueError as e:
        raise ConfigError(path, str(e))


def parse_arms(spec, sigma, base_dir=None, path="instance.arms"):
    """
    Parse the arms entry of an instance, either a list of
    per-arm entries or the compact form with "num_arms", "means" and
    "collision_mean".
    """
    if isinstance(spec, list):
        if len(spec) == 0:
            raise ConfigError(path, "at least one arm is needed")
        arms = []
        for k, arm in enumerate(spec):
            p = f"{path}[{k}]"
            if not isinstance(arm, dict):
                raise ConfigError(p, f"expected an arm entry, got {arm!r}")
            nc = parse_source(_get(arm, "no_collision", p, required=True),
                              f"{p}.no_collision", sigma, base_dir)
            c = _parse_collision(_get(arm, "collision", p, required=True),
                                 f"{p}.collision", sigma, base_dir)
            arms.append(_make_arm(nc, c, p))
        return tuple(arms)
    if not isinstance(spec, dict):
        raise ConfigError(path, f"expected a list or a dict, got {spec!r}")
    kind = spec.get("kind", "gaussian")
    if kind not in ("gaussian", "bernoulli"):
        raise ConfigError(f"{path}.kind", "the compact arm form supports only "
                                          "gaussian and bernoulli sources")
    means = _get(spec, "means", path, required=True)
    if isinstance(means, dict):
        bounds = _get(means, "linear", f"{path}.means", kind=list, required=True)
        if len(bounds) != 2:
            raise ConfigError(f"{path}.means.linear", f"expected [lo, hi], got {bounds}")
        lo, hi = bounds
        num_arms = _get(spec, "num_arms", path, kind=int, required=True)
        if num_arms < 1:
            raise ConfigError(f"{path}.num_arms", f"must be positive, got {num_arms}")
        means = np.linspace(lo, hi, num_arms).tolist()
    elif not isinstance(means, list):
        raise ConfigError(f"{path}.means", f"expected a list or "
                                           f"{{'linear': [lo, hi]}}, got {means!r}")
    cmean = _get(spec, "collision_mean", path, required=True)
    if not isinstance(cmean, list):
        cmean = [cmean]*len(means)
    if len(cmean) != len(means):
        raise ConfigError(f"{path}.collision_mean",
                          f"got {len(cmean)} values for {len(means)} arms")
    return parse_arms([{"no_collision": {"kind": kind, "mean": m},
                        "collision": {"kind": kind, "mean": c}}
                       for m, c in zip(means, cmean)], sigma, base_dir, path)


def parse_instance(spec, base_dir=None, path="instance"):
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected a dict")
    sigma = _get(spec, "sigma", path, kind=float, required=True)
    if sigma <= 0.0:
        raise ConfigError(f"{path}.sigma", f"must be positive, got {sigma}")
    arms = parse_arms(_get(spec, "arms", path, required=True), sigma,
                      base_dir=base_dir, path=f"{path}.arms")
    num_players = _get(spec, "num_players", path, kind=int, required=True)
    if not 1 <= num_players <= len(arms):
        raise ConfigError(f"{path}.num_players", f"must be in [1, {len(arms)}], "
                                                 f"got {num_players}")
    horizon = _get(spec, "horizon", path, kind=int, required=True)
    if horizon < 1:
        raise ConfigError(f"{path}.horizon", f"must be positive, got {horizon}")
    return InstanceConfig(arms, num_players, horizon, sigma,
                          sensing=_get(spec, "sensing", path, kind=bool, default=False),
                          seed=_get(spec, "seed", path, kind=int, default=0),
                          mu_min=_get(spec, "mu_min", path, kind=float),
                          nu_max=_get(spec, "nu_max", path, kind=float),
                          shuffle_arms=_get(spec, "shuffle_arms", path,
                                            kind=bool, default=False))


def parse_code(spec, path="code"):
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected a dict")
    scheme = _get(spec, "scheme", path, kind=str, default="hamming")
    if scheme not in scheme_kinds:
        raise ConfigError(f"{path}.scheme", f"unknown scheme '{scheme}', "
                                            f"options are {scheme_kinds}")
    rate = spec.get("rate")
    if rate is not None and rate != "suggested":
        rate = _get(spec, "rate", path, kind=float)
        if not 0.0 < rate <= 1.0:
            raise ConfigError(f"{path}.rate", f"must be in (0, 1], got {rate}")
    repeats = _get(spec, "repeats", path, kind=int)
    if repeats is not None and repeats < 1:
        raise ConfigError(f"{path}.repeats", f"must be at least 1, got {repeats}")
    generators = tuple(_get(spec, "generators", path, kind=list,
                            default=[0o5, 0o7, 0o7]))
    memory = _get(spec, "memory", path, kind=int, default=2)
    try:
        CodeScheme(scheme, generators=generators, memory=memory)
    except ValueError as e:
        raise ConfigError(f"{path}.generators", str(e))
    return CodeConfig(scheme, rate=rate, repeats=repeats,
                      generators=generators, memory=memory,
                      d_free=_get(spec, "d_free", path, kind=int, default=7),
                      b_free=_get(spec, "b_free", path, kind=float, default=1.0),
                      tail_repeats=_get(spec, "tail_repeats", path, kind=bool,
                                        default=True))


def parse_config(spec, base_dir=None):
    """
    Parse a configuration dict into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        With the dotted key path of the first invalid entry.
    """
    if not isinstance(spec, dict):
        raise ConfigError("", "the configuration must be a JSON object")
    unknown = set(spec) - {"instance", "algorithm", "code", "experiment"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    instance = parse_instance(_get(spec, "instance", "", required=True),
                              base_dir=base_dir)
    code = parse_code(spec.get("code", {}))
    exp = spec.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("experiment", "expected a dict")
    path = "experiment"
    return ExperimentConfig(
        instance,
        algorithm=_get(spec, "algorithm", "", kind=str, default="ec3"),
        code=code,
        replications=_get(exp, "replications", path, kind=int, default=1),
        seed=_get(exp, "seed", path, kind=int, default=instance.seed),
        output_dir=_get(exp, "output_dir", path, kind=str, default="ec3_output"),
        stride=_get(exp, "stride", path, kind=int),
        workers=_get(exp, "workers", path, kind=int, default=1),
        overwrite=_get(exp, "overwrite", path, kind=bool, default=False))


def load_config(filename):
    """
    Read an experiment configuration from the JSON file *filename*.
    Trace files are resolved relative to the configuration file.
    """
    filename = Path(filename)
    if not filename.exists():
        raise IOError(f"Configuration file {filename} does not exist!")
    with open(filename, "r") as f:
        try:
            spec = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("", f"{filename} is not valid JSON: {e}")
    return parse_config(spec, base_dir=filename.resolve().parent)


def _collision_to_dict(arm):
    if arm.gamma_dependent:
        return {str(g): s.to_dict() for g, s in arm.collision.items()}
    return arm.collision[2].to_dict()


def instance_config_to_dict(config):
    """
    The "instance" section describing *config*, the inverse of
    :func:`parse_instance`.
    """
    out = {"num_players": config.num_players,
           "horizon": config.horizon,
           "sigma": config.sigma,
           "arms": [{"no_collision": arm.no_collision.to_dict(),
                     "collision": _collision_to_dict(arm)}
                    for arm in config.arms]}
    for key in ("mu_min", "nu_max"):
        value = getattr(config, key)
        if value is not None:
            out[key] = float(value)
    if config.sensing:
        out["sensing"] = True
    if config.shuffle_arms:
        out["shuffle_arms"] = True
    if config.seed != 0:
        out["seed"] = config.seed
    return out


def write_instance_config(config, filename, overwrite=False):
    """
    Write *config* as a runnable configuration file with default
    algorithm, code and experiment sections.
    """
    if Path(filename).exists() and not overwrite:
        raise IOError(f"The file {filename} exists and overwrite=False!")
    with open(filename, "w") as f:
        json.dump({"instance": instance_config_to_dict(config),
                   "algorithm": "ec3",
                   "code": {"scheme": "hamming"},
                   "experiment": {"replications": 1, "seed": config.seed}},
                  f, indent=4)
