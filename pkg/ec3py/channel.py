"""
The collision channel seen as a binary channel, with its capacity,
random coding error exponent and optimal block lengths. All rates
and exponents are in nats.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr

from ec3py.coding import crossover_probs
from ec3py.utils import mylog


@dataclass(frozen=True)
class ChannelModel:
    """
    A binary channel with crossover probabilities *p0* (a sent 0 read
    as 1) and *p1* (a sent 1 read as 0). *p1* defaults to *p0*.

    Parameters
    ----------
    p0 : float
    p1 : float, optional
    phi : float, optional
        Slack in (0, C) used by :func:`optimal_block_length`.
        Default: C/2

    Examples
    --------
    >>> ch = ChannelModel(0.11)
    >>> ch.capacity
    0.3466...
    """
    p0: float
    p1: float = None
    phi: float = None

    def __post_init__(self):
        if self.p1 is None:
            object.__setattr__(self, "p1", self.p0)
        for name in ("p0", "p1"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} = {p} is not a probability!")

    @classmethod
    def from_instance(cls, instance, phi=None):
        """
        The worst-case channel over the arms of *instance* for the
        threshold (mu_min + nu_max)/2.
        """
        probs = np.array([crossover_probs(arm, instance.theta,
                                          mu_min=instance.mu_min,
                                          nu_max=instance.nu_max)
                          for arm in instance.arms])
        p0, p1 = probs.max(axis=0)
        return cls(float(p0), float(p1), phi=phi)

    @property
    def symmetric(self):
        return self.p0 == self.p1

    @property
    def capacity(self):
        return capacity(self)

    @property
    def slack(self):
        return 0.5*self.capacity if self.phi is None else self.phi

    def exponent(self, rate):
        return error_exponent(self, rate)

    def transition(self):
        """
        Transition matrix W[x, y] = P(y | x).
        """
        return np.array([[1.0-self.p0, self.p0],
                         [self.p1, 1.0-self.p1]])


def binary_entropy(p):
    """
    Binary entropy in nats.
    """
    return entr(p)+entr(1.0-p)


def mutual_information(channel, q):
    """
    I(X; Y) in nats when P(X = 1) = q.
    """
    q = min(max(q, 0.0), 1.0)
    py1 = (1.0-q)*channel.p0 + q*(1.0-channel.p1)
    return float(binary_entropy(py1) - (1.0-q)*binary_entropy(channel.p0)
                 - q*binary_entropy(channel.p1))


def capacity(channel, numeric=None):
    """
    Capacity of *channel* in nats.

    Parameters
    ----------
    channel : :class:`ChannelModel`
    numeric : boolean, optional
        Maximize the mutual information over the input prior with a
        golden-section search instead of using ln 2 - H(p). Default:
        only for asymmetric channels

    Examples
    --------
    >>> capacity(ChannelModel(0.0))
    0.6931471805599453
    """
    if numeric is None:
        numeric = not channel.symmetric
    if not numeric:
        return float(np.log(2.0)-binary_entropy(channel.p0))
    if abs(channel.p0+channel.p1-1.0) < 1e-15:
        # output independent of input
        return 0.0
    res = minimize_scalar(lambda q: -mutual_information(channel, q),
                          bracket=(0.0, 0.5, 1.0), method="golden",
                          tol=1e-10)
    return max(-float(res.fun), 0.0)


def gallager_e0(channel, rho):
    """
    Gallager's E0(rho) for the uniform input distribution, in nats.
    """
    rho = np.asarray(rho, dtype="float64")
    a = 1.0/(1.0+rho)
    W = channel.transition()
    total = 0.0
    for y in (0, 1):
        inner = 0.5*np.power(W[0, y], a) + 0.5*np.power(W[1, y], a)
        total = total + np.power(inner, 1.0+rho)
    return -np.log(total)


def error_exponent(channel, rate):
    """
    Random coding error exponent E_r(R) = max over rho in [0, 1]
    of E0(rho) - rho R, found on a grid and refined with a bounded
    scalar search.

    Examples
    --------
    >>> error_exponent(ChannelModel(0.0), 0.0)
    0.6931...
    """
    if rate < 0.0:
        raise ValueError(f"The rate must be non-negative, got {rate}!")
    grid = np.linspace(0.0, 1.0, 101)
    vals = gallager_e0(channel, grid)-grid*rate
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i-1, 0)], grid[min(i+1, grid.size-1)]
    res = minimize_scalar(lambda r: -(gallager_e0(channel, r)-r*rate),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return max(best, -float(res.fun), 0.0)


def _slack(channel, phi):
    C = channel.capacity
    phi = channel.slack if phi is None else phi
    if not 0.0 < phi < C:
        raise ValueError(f"The slack phi = {phi} must lie in (0, C = {C})!")
    return C, phi


def optimal_block_length(channel, L, T, phi=None, method="closed"):
    """
    Block length N'(L) of a code sending *L* bits with error
    probability at most 1/T.

    Parameters
    ----------
    channel : :class:`ChannelModel`
    L : integer
        Message length in bits (may be 0).
    T : float
        Horizon.
    phi : float, optional
        Slack in (0, C). Default: the channel's slack (C/2)
    method : string, optional
        "closed" for ceil(max(L/(C - phi), ln T / E_r(C - phi))), an
        upper bound; "exact" for the smallest N with
        N E_r(L/N) >= ln T, found by bisection. Default: "closed"

    Examples
    --------
    >>> optimal_block_length(ChannelModel(0.0), 10, np.exp(10),
    ...                      phi=np.log(2)-0.5)
    52
    """
    C, phi = _slack(channel, phi)
    log_T = np.log(T)
    if method == "closed":
        rate = C-phi
        E = error_exponent(channel, rate)
        return int(np.ceil(max(L/rate, log_T/E)))
    elif method != "exact":
        raise KeyError(f"Unknown block length method '{method}'!")

    def reliable(N):
        return N*error_exponent(channel, L/N) >= log_T

    hi = 1
    while not reliable(hi):
        hi *= 2
        if hi > 2**48:
            raise RuntimeError("No block length reaches the target error "
                               "probability!")
    lo = hi // 2
    # invariant: reliable(hi), not reliable(lo) (or lo == 0)
    while hi-lo > 1:
        mid = (lo+hi) // 2
        if reliable(mid):
            hi = mid
        else:
            lo = mid
    mylog.debug("Block length for L = %d, T = %g: %d.", L, T, hi)
    return hi
