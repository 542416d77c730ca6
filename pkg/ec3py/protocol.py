"""
Implicit communication over the collision channel: a sender writes
bit 1 by pulling the receiver's communication arm (a collision) and
bit 0 by staying on its own; the receiver pulls its own arm and
decodes what it observes. Player m's communication arm is arm m.
"""
from dataclasses import dataclass

import numpy as np

from ec3py.coding import code_length, decode_batch, decode_hard, \
    inner_encode, encode
from ec3py.utils import ensure_numpy_array, index_bits, mylog


def send_bits(sender, receiver, bits):
    """
    Per-slot arms of a sender transmitting *bits* to *receiver*.

    Examples
    --------
    >>> send_bits(1, 0, [1, 0, 1])
    array([0, 1, 0])
    """
    if sender == receiver:
        raise ValueError(f"Player {sender} cannot send to itself!")
    bits = ensure_numpy_array(bits).ravel()
    if bits.size == 0:
        raise ValueError("Cannot send an empty bit sequence!")
    return np.where(bits == 1, receiver, sender).astype("int64")


def receive_bits(rewards, flags=None):
    """
    What a receiver takes away from an exchange on its own arm: the
    collision flags when they are observed, otherwise the raw rewards
    to be decoded.
    """
    if flags is not None:
        return ensure_numpy_array(flags).astype("int8").ravel()
    return np.asarray(rewards, dtype="float64").ravel()


def read_message(scheme, rewards, L, flags=None):
    """
    Decode an *L*-bit message from the receiver's observations. With
    collision flags, each repeat group is decided by a majority of
    flags; otherwise by thresholding its mean reward.
    """
    obs = receive_bits(rewards, flags)
    if flags is None:
        return decode_batch(scheme, obs[np.newaxis, :], L)[0]
    reps = scheme.repeat_plan(L)
    if obs.size != reps.sum():
        raise ValueError(f"Expected {reps.sum()} flags for a {L}-bit "
                         f"message, got {obs.size}!")
    starts = np.concatenate([[0], np.cumsum(reps)[:-1]])
    hard = (2*np.add.reduceat(obs, starts) >= reps).astype("int8")
    return decode_hard(scheme, hard, L)[0]


@dataclass(frozen=True)
class QuantizedMean:
    """
    A sample mean written with one integer bit and *Q* fraction bits.
    """
    integer_bit: int
    fraction_bits: tuple

    @property
    def bits(self):
        return np.array((self.integer_bit,) + tuple(self.fraction_bits),
                        dtype="int8")

    @property
    def value(self):
        q = len(self.fraction_bits)
        weights = 0.5**np.arange(1, q+1)
        return float(self.integer_bit + np.dot(self.fraction_bits, weights))

    @classmethod
    def from_bits(cls, bits):
        bits = [int(b) for b in bits]
        return cls(bits[0], tuple(bits[1:]))


def quantize_mean(value, Q):
    """
    Floor-quantize *value* onto the grid of step 2**-Q in [0, 2).
    Negative values and values of 2 or more are clamped to the
    ends of the grid.

    Examples
    --------
    >>> quantize_mean(0.7375, 4).fraction_bits
    (1, 0, 1, 1)
    """
    if Q < 1:
        raise ValueError(f"At least one fraction bit is needed, got Q = {Q}!")
    scale = 2**Q
    level = int(np.floor(value*scale))
    if level < 0 or level > 2*scale-1:
        mylog.debug("Clamping sample mean %g to the quantization grid.", value)
        level = min(max(level, 0), 2*scale-1)
    bits = [(level >> (Q-i)) & 1 for i in range(Q+1)]
    return QuantizedMean(bits[0], tuple(bits[1:]))


def dequantize(qmean):
    return qmean.value


@dataclass(frozen=True)
class Exchange:
    """
    One message of a communication schedule, occupying the slots
    [start, start + length).
    """
    sender: int
    receiver: int
    n_bits: int
    start: int
    length: int
    label: str = "message"
    arm: int = None

    @property
    def stop(self):
        return self.start+self.length


class CommSlotPlan:
    """
    A schedule of point-to-point messages. In every slot one sender
    either collides on the receiver's arm or sits on its own, the
    receiver pulls its own arm and everybody else idles on their own
    communication arm, so the only collision possible is the
    intended one.

    Parameters
    ----------
    num_players : integer
        Players taking part (including idle ones).
    exchanges : list of :class:`Exchange`
    """
    def __init__(self, num_players, exchanges):
        self.num_players = num_players
        self.exchanges = list(exchanges)

    @classmethod
    def build(cls, num_players, scheme, messages, start=0):
        """
        Lay out *messages*, given as (sender, receiver, n_bits, label,
        arm) tuples, back to back from slot *start*.
        """
        exchanges = []
        t = start
        for sender, receiver, n_bits, label, arm in messages:
            n = code_length(scheme, n_bits)
            exchanges.append(Exchange(sender, receiver, n_bits, t, n, label, arm))
            t += n
        return cls(num_players, exchanges)

    @property
    def start(self):
        return self.exchanges[0].start if self.exchanges else 0

    @property
    def length(self):
        return sum(ex.length for ex in self.exchanges)

    def __len__(self):
        return len(self.exchanges)

    def __iter__(self):
        return iter(self.exchanges)

    def __getitem__(self, item):
        return self.exchanges[item]

    def player_actions(self, player, exchange, coded=None):
        """
        Arms pulled by *player* during *exchange*; the sender needs the
        per-slot coded bits *coded*.
        """
        if player == exchange.sender:
            return send_bits(exchange.sender, exchange.receiver, coded)
        return np.full(exchange.length, player, dtype="int64")

    def joint_actions(self, exchange, coded):
        actions = np.empty((exchange.length, self.num_players), dtype="int64")
        for m in range(self.num_players):
            actions[:, m] = self.player_actions(m, exchange, coded)
        return actions


def presence_plan(num_arms, scheme):
    """
    First part of the player count estimate: the player sitting on
    arm k = 1, ..., K-1 (if any) sends one bit to the leader.
    """
    messages = [(k, 0, 1, "presence", None) for k in range(1, num_arms)]
    return CommSlotPlan.build(num_arms, scheme, messages)


def player_count_plan(num_players, num_arms, scheme, start=0):
    """
    Second part of the player count estimate: the leader sends its
    estimate to followers 1, ..., num_players-1.
    """
    width = index_bits(num_arms)
    messages = [(0, m, width, "num_players", None)
                for m in range(1, num_players)]
    return CommSlotPlan.build(num_players, scheme, messages, start=start)


def statistics_plan(num_players, active_arms, n_bits, scheme, start=0):
    """
    Followers 1, ..., num_players-1 in turn send one quantized mean per
    active arm to the leader.
    """
    messages = [(i, 0, n_bits, "statistics", int(k))
                for i in range(1, num_players) for k in active_arms]
    return CommSlotPlan.build(num_players, scheme, messages, start=start)


def count_plan(num_players, num_arms, scheme, start=0):
    """
    The leader sends the sizes of the newly accepted and rejected sets
    to every follower.
    """
    width = 2*index_bits(num_arms+1)
    messages = [(0, m, width, "counts", None) for m in range(1, num_players)]
    return CommSlotPlan.build(num_players, scheme, messages, start=start)


def index_plan(num_players, num_arms, n_indices, scheme, start=0):
    """
    The leader sends the indices of the newly accepted then rejected
    arms to every follower. Empty when there is nothing to send.
    """
    if n_indices == 0:
        return CommSlotPlan(num_players, [])
    width = n_indices*index_bits(num_arms)
    messages = [(0, m, width, "indices", None) for m in range(1, num_players)]
    return CommSlotPlan.build(num_players, scheme, messages, start=start)


@dataclass
class TransmitResult:
    decoded: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    flags: np.ndarray = None


def transmit_message(scheme, sender, receiver, message, instance, t0=0,
                     stream=None):
    """
    Send *message* from *sender* to *receiver* over *instance*, with
    every other player idle on its own communication arm.

    Parameters
    ----------
    scheme : :class:`~ec3py.coding.CodeScheme`
    sender, receiver : integer
        Player indices; player m's communication arm is arm m.
    message : array_like
        The message bits.
    instance : :class:`~ec3py.env.BanditInstance`
    t0 : integer, optional
        First slot of the exchange. Default: 0

    Returns
    -------
    :class:`TransmitResult`
        The decoded message and the joint actions, rewards and flags
        of every slot, for regret accounting.
    """
    message = ensure_numpy_array(message).astype("int8").ravel()
    plan = CommSlotPlan.build(instance.num_players, scheme,
                              [(sender, receiver, message.size, "message", None)],
                              start=t0)
    exchange = plan[0]
    actions = plan.joint_actions(exchange, encode(scheme, message))
    out = instance.pull_block(t0, actions, stream=stream)
    flags = None if out.flags is None else out.flags[:, receiver]
    decoded = read_message(scheme, out.rewards[:, receiver], message.size,
                           flags=flags)
    return TransmitResult(decoded, actions, out.rewards, out.flags)


def message_error_rate(scheme, arm, L, trials=10000, seed=0):
    """
    Monte-Carlo estimate of the probability that an *L*-bit message
    sent with *scheme* over the channel of *arm* is decoded wrongly.

    Parameters
    ----------
    scheme : :class:`~ec3py.coding.CodeScheme`
    arm : :class:`~ec3py.env.ArmModel`
    L : integer
        Message length in bits.
    trials : integer, optional
        Number of random messages. Default: 10000
    seed : integer, optional
        Seed of the messages and channel noise. Default: 0

    Returns
    -------
    rate : float
        Fraction of messages decoded wrongly.
    """
    rng = np.random.default_rng(seed)
    msgs = rng.integers(0, 2, size=(trials, L)).astype("int8")
    if scheme.kind == "hamming":
        pad = scheme.framed_bits(L)-L
        padded = np.hstack([msgs, np.zeros((trials, pad), dtype="int8")])
        coded = inner_encode(scheme, padded.ravel()).reshape(trials, -1)
    elif scheme.kind == "conv":
        coded = np.array([inner_encode(scheme, m) for m in msgs])
    else:
        coded = msgs
    sent = np.repeat(coded, scheme.repeat_plan(L), axis=1)
    N = sent.shape[1]
    z = rng.standard_normal((trials, N))
    slots = rng.integers(0, 2**31, size=(trials, 1)) + np.arange(N)
    alone = np.broadcast_to(arm.no_collision.sample(slots, z), z.shape)
    colliding = np.broadcast_to(arm.collision_source(2).sample(slots, z), z.shape)
    rewards = np.where(sent == 1, colliding, alone)
    decoded = decode_batch(scheme, rewards, L)
    errors = np.any(decoded != msgs, axis=1)
    return float(errors.mean())
