"""
Reward sources. A source turns standard normal variates (one per
pull) into rewards; trace sources ignore them and read a stored
sequence at the global slot index instead.
"""
from pathlib import Path

import numpy as np
from astropy.io import ascii
from scipy.stats import norm

from ec3py.utils import ensure_numpy_array


class RewardSource:
    kind = None

    @property
    def mean(self):
        raise NotImplementedError

    def sample(self, slots, z):
        """
        Draw rewards for the pulls at global *slots*, using the
        matching standard normal variates *z*.
        """
        raise NotImplementedError

    def cdf(self, x):
        """
        P(X <= x) for a single reward drawn from this source.
        """
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{self.__class__.__name__}(mean={self.mean:.6g})"


class GaussianSource(RewardSource):
    """
    Gaussian rewards with mean *mean* and standard deviation *sigma*.
    Draws are not truncated to [0, 1].
    """
    kind = "gaussian"

    def __init__(self, mean, sigma):
        if sigma < 0.0:
            raise ValueError(f"Gaussian sigma must be non-negative, got {sigma}!")
        self._mean = float(mean)
        self.sigma = float(sigma)

    @property
    def mean(self):
        return self._mean

    def sample(self, slots, z):
        return self._mean + self.sigma*np.asarray(z, dtype="float64")

    def cdf(self, x):
        if self.sigma == 0.0:
            return float(x >= self._mean)
        return float(norm.cdf((x-self._mean)/self.sigma))

    def to_dict(self):
        return {"kind": self.kind, "mean": self._mean, "sigma": self.sigma}


class BernoulliSource(RewardSource):
    kind = "bernoulli"

    def __init__(self, mean):
        self._mean = float(mean)

    @property
    def mean(self):
        return self._mean

    def sample(self, slots, z):
        # Phi(z) is uniform on (0, 1)
        return (norm.cdf(z) < self._mean).astype("float64")

    def cdf(self, x):
        if x < 0.0:
            return 0.0
        if x < 1.0:
            return 1.0-self._mean
        return 1.0

    def to_dict(self):
        return {"kind": self.kind, "mean": self._mean}


class TraceSource(RewardSource):
    """
    A finite reward sequence, indexed cyclically by the global slot.

    Parameters
    ----------
    values : array_like
        The reward sequence, values in [0, 1].
    origin : tuple of (string, string), optional
        The (file, column) the values were read from, kept so that
        configurations written by the ingestion step stay small.
    """
    kind = "trace"

    def __init__(self, values, origin=None):
        values = ensure_numpy_array(values).astype("float64")
        if values.size == 0:
            raise ValueError("A trace source needs at least one value!")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("Trace values must lie in [0, 1]!")
        self.values = values
        self.origin = origin
        self._mean = float(values.mean())

    @classmethod
    def from_csv(cls, filename, column):
        """
        Read one column of a CSV file of per-group reward sequences.
        """
        if not Path(filename).exists():
            raise IOError(f"Trace file {filename} does not exist!")
        t = ascii.read(filename, format="csv")
        if column not in t.colnames:
            raise KeyError(f"Column '{column}' not found in {filename}!")
        col = t[column]
        if hasattr(col, "mask"):
            col = col[~np.asarray(col.mask)]
        return cls(np.asarray(col, dtype="float64"),
                   origin=(str(filename), column))

    @property
    def mean(self):
        return self._mean

    def sample(self, slots, z):
        return self.values[np.asarray(slots) % self.values.size]

    def cdf(self, x):
        return float(np.mean(self.values <= x))

    def to_dict(self):
        if self.origin is not None:
            return {"kind": self.kind, "file": self.origin[0],
                    "column": self.origin[1]}
        return {"kind": self.kind, "values": self.values.tolist()}


source_kinds = {"gaussian": GaussianSource,
                "bernoulli": BernoulliSource,
                "trace": TraceSource}


def make_source(spec, sigma=None):
    """
    Create a reward source from a dict such as
    ``{"kind": "gaussian", "mean": 0.3}``. Gaussian sources take
    *sigma* unless the dict gives their own.
    """
    spec = dict(spec)
    kind = spec.pop("kind", "gaussian")
    if kind not in source_kinds:
        raise KeyError(f"Unknown reward source kind '{kind}'!")
    if kind == "gaussian":
        sigma = spec.get("sigma", sigma)
        if sigma is None:
            raise ValueError("A gaussian source needs a sigma!")
        return GaussianSource(spec["mean"], sigma)
    elif kind == "bernoulli":
        return BernoulliSource(spec["mean"])
    if "values" in spec:
        return TraceSource(spec["values"])
    return TraceSource.from_csv(spec["file"], spec["column"])
