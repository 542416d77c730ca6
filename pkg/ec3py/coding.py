"""
Codecs for messages sent over the collision channel. Every scheme
ends with a repetition stage: each coded bit is sent over a group of
consecutive slots and decided by comparing the group's mean reward
with the threshold theta (mean > theta reads as bit 0, no collision).
"""
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import commpy.channelcoding.convcode as convcode

from ec3py.utils import ensure_numpy_array

scheme_kinds = ("uncoded", "repetition", "hamming", "conv")

# (7,4) Hamming generator and parity-check matrices; the syndrome
# H r, read with the first row as the least significant bit, is the
# 1-based position of a single flipped bit
hamming_G = np.array([[1, 1, 0, 1],
                      [1, 0, 1, 1],
                      [1, 0, 0, 0],
                      [0, 1, 1, 1],
                      [0, 1, 0, 0],
                      [0, 0, 1, 0],
                      [0, 0, 0, 1]], dtype="int64")

hamming_H = np.array([[1, 0, 1, 0, 1, 0, 1],
                      [0, 1, 1, 0, 0, 1, 1],
                      [0, 0, 0, 1, 1, 1, 1]], dtype="int64")

# message bits sit at codeword positions 3, 5, 6, 7
hamming_data_positions = np.array([2, 4, 5, 6])


@dataclass(frozen=True)
class CodeScheme:
    """
    A codec configuration together with the channel context its
    lengths are computed from.

    Parameters
    ----------
    kind : string
        One of "uncoded", "repetition", "hamming" or "conv".
    theta : float
        Decision threshold, normally (mu_min + nu_max)/2.
    horizon, mu_min, nu_max, sigma : optional
        Channel context used by the closed-form code lengths.
    repeats : integer, optional
        Explicit repeats per coded bit (N0 for repetition, A for the
        concatenated codes), overriding the closed form.
    rate : float, optional
        Target coding rate in (0, 1], overriding the closed form.
    generators : tuple of integers, optional
        Convolutional generator polynomials. Default: octal (5, 7, 7)
    memory : integer, optional
        Convolutional encoder memory. Default: 2
    d_free, b_free : optional
        Free distance and its error coefficient, used only by the
        convolutional closed form. Default: 7 and 1
    tail_repeats : boolean, optional
        If True, the closed-form convolutional length also gives the
        *memory* termination bits their A repeats per coded bit, so
        that no coded bit is sent over fewer than A slots. If False,
        the budget is (L/R_conv)*A and is spread over the tail too.
        Default: True

    Examples
    --------
    >>> s = CodeScheme("hamming", theta=0.2, horizon=10**6, mu_min=0.3,
    ...                nu_max=0.1, sigma=0.2)
    >>> s.length(4)
    476
    """
    kind: str = "uncoded"
    theta: float = 0.5
    horizon: int = None
    mu_min: float = None
    nu_max: float = None
    sigma: float = None
    repeats: int = None
    rate: float = None
    generators: tuple = (0o5, 0o7, 0o7)
    memory: int = 2
    d_free: int = 7
    b_free: float = 1.0
    tail_repeats: bool = True

    def __post_init__(self):
        if self.kind not in scheme_kinds:
            raise KeyError(f"Unknown code scheme '{self.kind}'! Options "
                           f"are {scheme_kinds}.")
        if self.repeats is not None and self.repeats < 1:
            raise ValueError(f"repeats must be at least 1, got {self.repeats}!")
        if self.rate is not None and not 0.0 < self.rate <= 1.0:
            raise ValueError(f"The coding rate must be in (0, 1], got {self.rate}!")
        if len(self.generators) == 0:
            raise ValueError("At least one generator polynomial is needed!")
        if self.memory < 0 or max(self.generators) >= 2**(self.memory+1):
            raise ValueError(f"Generators {self.generators} do not fit an "
                             f"encoder with memory {self.memory}!")
        object.__setattr__(self, "generators", tuple(self.generators))

    @classmethod
    def for_instance(cls, kind, instance, **kwargs):
        """
        Scheme of kind *kind* with threshold and channel context taken
        from a :class:`~ec3py.env.BanditInstance`.
        """
        return cls(kind, theta=instance.theta, horizon=instance.horizon,
                   mu_min=instance.mu_min, nu_max=instance.nu_max,
                   sigma=instance.sigma, **kwargs)

    def with_horizon(self, horizon):
        return replace(self, horizon=horizon)

    @property
    def conv_rate(self):
        return 1.0/len(self.generators)

    def framed_bits(self, L):
        """
        Message length after block alignment.
        """
        if self.kind == "hamming":
            return 4*(-(-L // 4))
        return L

    def coded_bits(self, L):
        if self.kind == "hamming":
            return 7*self.framed_bits(L)//4
        elif self.kind == "conv":
            return len(self.generators)*(L+self.memory)
        return L

    def length(self, L):
        return code_length(self, L)

    def repeat_plan(self, L):
        """
        Number of slots carrying each coded bit: the slot budget of
        :func:`code_length` spread as evenly as possible, earlier
        bits taking the remainder.
        """
        N = code_length(self, L)
        c = self.coded_bits(L)
        base, extra = divmod(N, c)
        reps = np.full(c, base, dtype="int64")
        reps[:extra] += 1
        return reps


def code_length(scheme, L, T=None, mu_min=None, nu_max=None, sigma=None):
    """
    Number of slots needed to send an *L*-bit message with *scheme*.
    Channel parameters not given are taken from the scheme.

    Parameters
    ----------
    scheme : :class:`CodeScheme`
    L : integer
        Message length in bits.
    T : integer, optional
        Horizon.
    mu_min, nu_max, sigma : float, optional
        Reward bounds and subgaussian parameter.

    Examples
    --------
    >>> code_length(CodeScheme("repetition"), 10, T=10**6, mu_min=0.3,
    ...             nu_max=0.1, sigma=0.2)
    1350
    """
    L = int(L)
    if L < 1:
        raise ValueError(f"The message length must be positive, got {L}!")
    if scheme.kind == "uncoded":
        return L
    c = scheme.coded_bits(L)
    if scheme.repeats is not None:
        return c*scheme.repeats
    if scheme.rate is not None:
        return max(int(np.ceil(L/scheme.rate)), c)
    T = scheme.horizon if T is None else T
    mu_min = scheme.mu_min if mu_min is None else mu_min
    nu_max = scheme.nu_max if nu_max is None else nu_max
    sigma = scheme.sigma if sigma is None else sigma
    if None in (T, mu_min, nu_max, sigma):
        raise ValueError("The closed-form code lengths need T, mu_min, "
                         "nu_max and sigma!")
    if T < 1:
        raise ValueError(f"The horizon must be positive, got {T}!")
    gap2 = (mu_min-nu_max)**2
    if mu_min <= nu_max:
        raise ValueError(f"Non-positive gap mu_min - nu_max = {mu_min-nu_max}!")
    s2 = sigma*sigma
    if scheme.kind == "repetition":
        N = L*int(np.ceil(8.0*s2*np.log(2.0*L*T)/gap2))
    elif scheme.kind == "hamming":
        Lf = scheme.framed_bits(L)
        A = int(np.ceil(4.0*s2*np.log(6.0*Lf*T)/gap2))
        N = 7*(Lf//4)*A
    else:
        A = int(np.ceil(16.0*s2*np.log(scheme.b_free*2.0**scheme.d_free*L*T) /
                        (scheme.d_free*gap2)))
        if scheme.tail_repeats:
            N = c*A
        else:
            N = len(scheme.generators)*L*A
    return max(N, c)


def suggested_rate(mu_min, nu_max, T):
    """
    A practical coding rate, (mu_min - nu_max)^2 / (4 ln T), that
    usually balances decoding errors against communication cost.
    """
    return (mu_min-nu_max)**2/(4.0*np.log(T))


def _check_bits(bits):
    bits = ensure_numpy_array(bits).astype("int8").ravel()
    if bits.size == 0:
        raise ValueError("Cannot encode an empty message!")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("Messages must consist of 0/1 bits!")
    return bits


def hamming_encode(bits):
    """
    Encode a message whose length is a multiple of 4, block by block.
    """
    blocks = np.asarray(bits, dtype="int64").reshape(-1, 4)
    return ((blocks @ hamming_G.T) % 2).astype("int8").ravel()


def hamming_decode(hard):
    """
    Syndrome-decode hard bits, one 7-bit block per row (or a
    flat sequence of blocks). Returns the message bits.
    """
    hard = np.array(hard, dtype="int64")
    shape = hard.shape[:-1]
    r = hard.reshape(shape + (-1, 7))
    s = (r @ hamming_H.T) % 2
    pos = s[..., 0] + 2*s[..., 1] + 4*s[..., 2]
    idx = np.nonzero(pos)
    r[idx + (pos[idx]-1,)] ^= 1
    msg = r[..., hamming_data_positions]
    return msg.reshape(shape + (-1,)).astype("int8")


@lru_cache(maxsize=None)
def _trellis(generators, memory):
    return convcode.Trellis(np.array([memory]), np.array([list(generators)]))


def conv_encode(bits, generators=(0o5, 0o7, 0o7), memory=2):
    """
    Feedforward convolutional encoding, terminated with *memory*
    zero bits.
    """
    trellis = _trellis(tuple(generators), memory)
    bits = np.asarray(bits, dtype="int64")
    return convcode.conv_encode(bits, trellis, termination="term").astype("int8")


def viterbi_decode(hard, L, generators=(0o5, 0o7, 0o7), memory=2):
    """
    Hard-decision Viterbi decoding of a terminated convolutional
    codeword with the Hamming distance as branch metric.

    Parameters
    ----------
    hard : array_like
        The received hard bits, len(generators)*(L+memory) of them.
    L : integer
        Message length.

    Returns
    -------
    ndarray
        The L decoded message bits.
    """
    hard = np.asarray(hard, dtype="int64").ravel()
    n_coded = len(generators)*(L+memory)
    if hard.size != n_coded:
        raise ValueError(f"Expected {n_coded} coded bits for a {L}-bit "
                         f"message, got {hard.size}!")
    trellis = _trellis(tuple(generators), memory)
    # the decoder returns the message followed by the tail bits
    decoded = convcode.viterbi_decode(hard, trellis, decoding_type="hard")
    return np.asarray(decoded[:L], dtype="int8")


def inner_encode(scheme, bits):
    """
    The coded bits of a message, before the repetition stage.
    """
    if scheme.kind == "hamming":
        pad = scheme.framed_bits(bits.size) - bits.size
        return hamming_encode(np.concatenate([bits, np.zeros(pad, dtype="int8")]))
    elif scheme.kind == "conv":
        return conv_encode(bits, scheme.generators, scheme.memory)
    return bits


def encode(scheme, message):
    """
    Encode *message* into the per-slot bit sequence sent over the
    channel. The result has exactly ``code_length(scheme, L)`` bits.

    Examples
    --------
    >>> encode(CodeScheme("repetition", repeats=3), [1, 0])
    array([1, 1, 1, 0, 0, 0], dtype=int8)
    """
    bits = _check_bits(message)
    coded = inner_encode(scheme, bits)
    return np.repeat(coded, scheme.repeat_plan(bits.size)).astype("int8")


def decode_hard(scheme, hard, L):
    """
    Decode coded bits that have already been decided, one per coded
    bit, for a batch of messages (one per row).
    """
    hard = np.atleast_2d(np.asarray(hard, dtype="int8"))
    if scheme.kind == "hamming":
        return hamming_decode(hard)[:, :L]
    elif scheme.kind == "conv":
        return np.array([viterbi_decode(row, L, scheme.generators, scheme.memory)
                         for row in hard], dtype="int8")
    return hard


def hard_decisions(scheme, samples, L):
    """
    Threshold the mean reward of each repeat group. *samples* has one
    message per row; returns one decided bit per coded bit and row.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype="float64"))
    N = code_length(scheme, L)
    if samples.shape[1] != N:
        raise ValueError(f"Expected {N} samples for a {L}-bit message, "
                         f"got {samples.shape[1]}!")
    reps = scheme.repeat_plan(L)
    starts = np.concatenate([[0], np.cumsum(reps)[:-1]])
    means = np.add.reduceat(samples, starts, axis=1)/reps
    return (means <= scheme.theta).astype("int8")


def decode_batch(scheme, samples, L):
    return decode_hard(scheme, hard_decisions(scheme, samples, L), L)


def decode(scheme, samples, L):
    """
    Decode the rewards observed by a receiver into an *L*-bit message.

    Parameters
    ----------
    scheme : :class:`CodeScheme`
    samples : array_like
        The rewards, exactly ``code_length(scheme, L)`` of them.
    L : integer
        The agreed message length.

    Examples
    --------
    >>> decode(CodeScheme("uncoded", theta=0.2), [0.9], 1)
    array([0], dtype=int8)
    """
    samples = ensure_numpy_array(samples).astype("float64").ravel()
    return decode_batch(scheme, samples[np.newaxis, :], L)[0]


def crossover_probs(arm, theta, mu_min=None, nu_max=None):
    """
    Crossover probabilities of the binary channel an arm induces
    for a single sample and threshold *theta*.

    Parameters
    ----------
    arm : :class:`~ec3py.env.ArmModel`
    theta : float
        Must lie strictly between the collision and no-collision
        means (and between *nu_max* and *mu_min* if given).

    Returns
    -------
    p0, p1 : float
        P(bit 0 is read as 1) = P_A(X <= theta) and
        P(bit 1 is read as 0) = P_B(X > theta).
    """
    lo = arm.nu if nu_max is None else nu_max
    hi = arm.mu if mu_min is None else mu_min
    if not lo < theta < hi:
        raise ValueError(f"The threshold {theta} must lie strictly "
                         f"between {lo} and {hi}!")
    p0 = arm.no_collision.cdf(theta)
    p1 = 1.0-arm.collision_source(2).cdf(theta)
    return p0, p1
