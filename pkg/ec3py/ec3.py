"""
The EC3 algorithm. Each player runs as a generator that yields the
arms it will pull over its next segment of slots and receives what it
observed on them; :func:`simulate` interleaves the players slot by slot
against a :class:`~ec3py.env.BanditInstance`. Players keep fully
separate state, so a decoding error at one player leads to the same
disagreement it would cause in a real deployment.
"""
from dataclasses import dataclass, field

import numpy as np

from ec3py.coding import CodeScheme, encode
from ec3py.protocol import QuantizedMean, presence_plan, \
    player_count_plan, statistics_plan, count_plan, index_plan, \
    quantize_mean, read_message
from ec3py.utils import mylog, index_bits, int_to_bits, bits_to_int


def exploration_block(horizon, sigma):
    """
    Pulls per arm per unit of phase index, ceil(sigma^2 ln T).
    """
    return max(1, int(np.ceil(sigma*sigma*np.log(horizon))))


def confidence_radius(total_pulls, horizon, sigma):
    return float(np.sqrt(2.0*sigma*sigma*np.log(horizon)/total_pulls))


def quantization_bits(radius):
    """
    Fraction bits Q_p = ceil(log2(1/B)), at least one, so that the
    quantization error 2**-Q_p never exceeds the radius B.
    """
    return max(1, int(np.ceil(np.log2(1.0/radius))))


def exploration_sequence(active_arms, player):
    """
    The active arms rotated by the player index; distinct players
    get distinct arms in every block.

    Examples
    --------
    >>> exploration_sequence([2, 5, 7], 1)
    [5, 7, 2]
    """
    active_arms = list(active_arms)
    if len(active_arms) == 0:
        return []
    r = player % len(active_arms)
    return active_arms[r:] + active_arms[:r]


def aggregate_means(means, pulls):
    """
    Pull-weighted average of the sample means several players hold
    for one arm.

    Examples
    --------
    >>> aggregate_means([0.6, 0.3], [2, 1])
    0.5
    """
    means = np.asarray(means, dtype="float64")
    pulls = np.asarray(pulls, dtype="float64")
    return float((means*pulls).sum()/pulls.sum())


def accept_reject(means, radius, num_active_players, arms=None):
    """
    Decide which active arms are surely among the best
    *num_active_players* of them, and which surely are not.

    Parameters
    ----------
    means : array_like
        One aggregated sample mean per active arm.
    radius : float
        The confidence radius B; arms are separated when their means
        differ by at least 4B.
    num_active_players : integer
        M_p.
    arms : list, optional
        Labels of the active arms, in the order of *means*. Default:
        their positions.

    Returns
    -------
    accepted, rejected : list
        Arms accepted and rejected, in the order of *arms*.

    Examples
    --------
    >>> accept_reject([0.9, 0.5, 0.4], 0.05, 1)
    ([0], [1, 2])
    """
    means = np.asarray(means, dtype="float64")
    K_p = means.size
    if arms is None:
        arms = list(range(K_p))
    lower = means-2.0*radius
    upper = means+2.0*radius
    # beats[k, j]: arm k is surely better than arm j
    beats = lower[:, np.newaxis] >= upper[np.newaxis, :]
    worse = beats.sum(axis=1)
    better = beats.sum(axis=0)
    accepted = [arms[k] for k in range(K_p)
                if worse[k] >= K_p-num_active_players]
    rejected = [arms[k] for k in range(K_p)
                if better[k] >= num_active_players]
    return accepted, rejected


@dataclass
class Observation:
    rewards: np.ndarray
    flags: np.ndarray = None


@dataclass
class PhaseState:
    """
    One player's bookkeeping. *pulls* holds, for every player (as
    far as this player knows), the number of pulls it has made on
    each still-active arm; *sums* and *counts* are this player's own
    exploration statistics.
    """
    player: int
    num_arms: int
    num_players: int
    p: int = 1
    active: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    pulls: np.ndarray = None
    sums: np.ndarray = None
    counts: np.ndarray = None
    fixed_arm: int = None
    radius: float = np.inf
    fraction_bits: int = None

    def __post_init__(self):
        if not self.active:
            self.active = list(range(self.num_arms))
        if self.pulls is None:
            self.pulls = np.zeros(self.num_players, dtype="int64")
        if self.sums is None:
            self.sums = np.zeros(self.num_arms)
        if self.counts is None:
            self.counts = np.zeros(self.num_arms, dtype="int64")

    @property
    def is_leader(self):
        return self.player == 0

    @property
    def num_active_players(self):
        return max(self.num_players-len(self.accepted), 0)

    @property
    def total_pulls(self):
        return int(self.pulls.sum())

    @property
    def message_bits(self):
        return 1+self.fraction_bits

    def is_active(self, m):
        """
        Players still exploring: the ones with index below
        M - |accepted|; the others sit on an accepted arm.
        """
        return m < self.num_players-len(self.accepted)

    def own_mean(self, arm):
        if self.counts[arm] == 0:
            return 0.0
        return self.sums[arm]/self.counts[arm]

    def sequence(self):
        """
        The exploration order of this player's arms for the phase.
        """
        if self.fixed_arm is not None:
            return [self.fixed_arm]
        return exploration_sequence(self.active, self.player)

    def check_partition(self):
        arms = sorted(self.accepted + self.rejected + self.active)
        return arms == list(range(self.num_arms))


class EventLog:
    """
    Write-only record of a run: messages as sent and as decoded
    (keyed by first slot and receiver), phase starts, accept/reject
    decisions, fixations and player count estimates.
    """
    def __init__(self):
        self.sent = {}
        self.received = {}
        self.phases = []
        self.decisions = []
        self.fixations = []
        self.estimates = {}

    def log_sent(self, slot, sender, receiver, label, bits):
        self.sent[slot, receiver] = (sender, label, tuple(int(b) for b in bits))

    def log_received(self, slot, receiver, label, bits, stop):
        self.received[slot, receiver] = (label, tuple(int(b) for b in bits), stop)

    def log_phase(self, player, p, kind, slot):
        self.phases.append((player, p, kind, slot))

    def log_decision(self, player, p, accepted, rejected, total_pulls, slot):
        self.decisions.append((player, p, tuple(accepted), tuple(rejected),
                               total_pulls, slot))

    def log_fixation(self, player, arm, slot):
        self.fixations.append((player, arm, slot))

    @property
    def num_messages(self):
        return len(self.received)

    def decode_errors(self):
        """
        Messages whose decoded bits differ from what was sent; silence
        (no sender) counts as an all-zero message.

        Returns
        -------
        list of (stop slot, receiver, label)
        """
        errors = []
        for (slot, receiver), (label, bits, stop) in sorted(self.received.items()):
            sent = self.sent.get((slot, receiver))
            expected = sent[2] if sent is not None else (0,)*len(bits)
            if expected != bits:
                errors.append((stop, receiver, label))
        return errors

    def phase_boundaries(self, player):
        return [(p, kind, slot) for m, p, kind, slot in self.phases if m == player]


class Ec3Player:
    """
    One EC3 player. Player 0 is the leader. *horizon* is the horizon
    the player plans for, and *scheme* must carry the same horizon.
    """
    def __init__(self, index, num_arms, horizon, sigma, scheme,
                 sensing=False, log=None):
        self.index = index
        self.num_arms = num_arms
        self.horizon = horizon
        self.sigma = sigma
        self.scheme = scheme
        self.sensing = sensing
        self.log = EventLog() if log is None else log
        self.slot = 0
        self.state = None
        self.block = exploration_block(horizon, sigma)

    def _pull(self, actions):
        obs = yield actions
        self.slot += len(actions)
        return obs

    def _run_plan(self, plan, outgoing=None):
        """
        Take part in every exchange of *plan*: send the bits in
        *outgoing* (keyed by exchange position), decode what is
        addressed to this player and idle on the own arm otherwise.
        Returns the decoded messages keyed by exchange position.
        """
        outgoing = {} if outgoing is None else outgoing
        received = {}
        idle = 0
        for i, ex in enumerate(plan):
            if self.index not in (ex.sender, ex.receiver):
                idle += ex.length
                continue
            if idle > 0:
                yield from self._pull(np.full(idle, self.index, dtype="int64"))
                idle = 0
            if ex.sender == self.index:
                bits = outgoing[i]
                self.log.log_sent(self.slot, self.index, ex.receiver, ex.label, bits)
                yield from self._pull(plan.player_actions(
                    self.index, ex, encode(self.scheme, bits)))
            else:
                start = self.slot
                obs = yield from self._pull(plan.player_actions(self.index, ex))
                bits = read_message(self.scheme, obs.rewards, ex.n_bits,
                                    flags=obs.flags if self.sensing else None)
                self.log.log_received(start, self.index, ex.label, bits, self.slot)
                received[i] = bits
        if idle > 0:
            yield from self._pull(np.full(idle, self.index, dtype="int64"))
        return received

    def estimate_M(self):
        """
        Initialization. The leader counts the followers announcing
        themselves on arm 0, then sends its count to each of them.
        """
        K = self.num_arms
        m = self.index
        self.log.log_phase(m, 0, "init", self.slot)
        plan = presence_plan(K, self.scheme)
        outgoing = {i: [1] for i, ex in enumerate(plan) if ex.sender == m}
        received = yield from self._run_plan(plan, outgoing)
        width = index_bits(K)
        if m == 0:
            M_hat = 1+sum(int(bits[0]) for bits in received.values())
            plan = player_count_plan(M_hat, K, self.scheme)
            outgoing = {i: int_to_bits(M_hat-1, width) for i in range(len(plan))}
            yield from self._run_plan(plan, outgoing)
        else:
            # listen at our own turn, then wait out the turns after it
            plan = player_count_plan(m+1, K, self.scheme)
            received = yield from self._run_plan(plan)
            M_hat = min(bits_to_int(received[m-1])+1, K)
            if M_hat > m+1:
                rest = player_count_plan(M_hat, K, self.scheme)
                yield from self._pull(np.full(rest.length-plan.length, m,
                                              dtype="int64"))
        self.log.estimates[m] = M_hat
        mylog.debug("Player %d estimates M = %d at slot %d.", m, M_hat, self.slot)
        return M_hat

    def explore_phase(self):
        st = self.state
        n = (2**st.p)*self.block
        self.log.log_phase(self.index, st.p, "explore", self.slot)
        arms = st.sequence()
        if st.fixed_arm is not None:
            actions = np.full(len(st.active)*n, st.fixed_arm, dtype="int64")
        else:
            actions = np.repeat(np.asarray(arms, dtype="int64"), n)
        obs = yield from self._pull(actions)
        if st.fixed_arm is None:
            np.add.at(st.sums, actions, obs.rewards)
            np.add.at(st.counts, actions, 1)
        for i in range(st.num_players):
            if st.is_active(i):
                st.pulls[i] += n
        st.radius = confidence_radius(st.total_pulls, self.horizon, self.sigma)
        st.fraction_bits = quantization_bits(st.radius)

    def _update_sets(self, accepted, rejected):
        st = self.state
        st.accepted += list(accepted)
        st.rejected += list(rejected)
        done = set(accepted) | set(rejected)
        st.active = [k for k in st.active if k not in done]
        self.log.log_decision(self.index, st.p, accepted, rejected,
                              st.total_pulls, self.slot)
        if st.fixed_arm is None and not st.is_active(self.index):
            st.fixed_arm = st.accepted[st.num_players-self.index-1]
            self.log.log_fixation(self.index, st.fixed_arm, self.slot)

    def leader_round(self):
        """
        Collect the followers' quantized means, aggregate them with the
        leader's own, decide and broadcast the accepted and rejected
        arms.
        """
        st = self.state
        K = self.num_arms
        self.log.log_phase(self.index, st.p, "communicate", self.slot)
        plan = statistics_plan(st.num_players, st.active, st.message_bits,
                               self.scheme)
        received = yield from self._run_plan(plan)
        reports = {k: ([st.own_mean(k)], [st.pulls[0]]) for k in st.active}
        for i, ex in enumerate(plan):
            reports[ex.arm][0].append(QuantizedMean.from_bits(received[i]).value)
            reports[ex.arm][1].append(st.pulls[ex.sender])
        means = [aggregate_means(*reports[k]) for k in st.active]
        accepted, rejected = accept_reject(means, st.radius,
                                           st.num_active_players, st.active)
        width = index_bits(K+1)
        counts = np.concatenate([int_to_bits(len(accepted), width),
                                 int_to_bits(len(rejected), width)])
        plan = count_plan(st.num_players, K, self.scheme)
        yield from self._run_plan(plan, {i: counts for i in range(len(plan))})
        n_idx = len(accepted)+len(rejected)
        plan = index_plan(st.num_players, K, n_idx, self.scheme)
        if len(plan) > 0:
            w = index_bits(K)
            indices = np.concatenate([int_to_bits(k, w) for k in accepted + rejected])
            yield from self._run_plan(plan, {i: indices for i in range(len(plan))})
        self._update_sets(accepted, rejected)

    def follower_round(self):
        """
        Send quantized means of all active arms to the leader, then
        receive the accepted and rejected arms.
        """
        st = self.state
        K = self.num_arms
        m = self.index
        self.log.log_phase(m, st.p, "communicate", self.slot)
        plan = statistics_plan(st.num_players, st.active, st.message_bits,
                               self.scheme)
        outgoing = {i: quantize_mean(st.own_mean(ex.arm), st.fraction_bits).bits
                    for i, ex in enumerate(plan) if ex.sender == m}
        yield from self._run_plan(plan, outgoing)
        width = index_bits(K+1)
        plan = count_plan(st.num_players, K, self.scheme)
        received = yield from self._run_plan(plan)
        bits = received[m-1]
        n_acc = bits_to_int(bits[:width])
        n_rej = bits_to_int(bits[width:])
        plan = index_plan(st.num_players, K, n_acc+n_rej, self.scheme)
        accepted, rejected = [], []
        if len(plan) > 0:
            received = yield from self._run_plan(plan)
            w = index_bits(K)
            bits = received[m-1]
            arms = [bits_to_int(bits[j*w:(j+1)*w]) for j in range(n_acc+n_rej)]
            seen = set()
            for j, k in enumerate(arms):
                # indices outside the active set can only come from errors
                if k not in st.active or k in seen:
                    continue
                seen.add(k)
                (accepted if j < n_acc else rejected).append(k)
        self._update_sets(accepted, rejected)

    def exploit(self, arm):
        self.log.log_phase(self.index, self.state.p if self.state else 0,
                           "exploit", self.slot)
        n = self.horizon-self.slot
        if n > 0:
            yield from self._pull(np.full(n, arm, dtype="int64"))

    def exploit_arm(self):
        st = self.state
        if st.fixed_arm is not None:
            return st.fixed_arm
        if len(st.active) > 0:
            return st.sequence()[0]
        return self.index

    def run(self):
        M_hat = yield from self.estimate_M()
        m = self.index
        if m >= M_hat:
            # the leader's count does not include us
            self.state = PhaseState(m, self.num_arms, max(M_hat, 1))
            yield from self.exploit(m)
            return
        self.state = st = PhaseState(m, self.num_arms, M_hat)
        while len(st.active) > 1 and len(st.accepted) < st.num_players:
            yield from self.explore_phase()
            if st.is_leader:
                yield from self.leader_round()
            else:
                yield from self.follower_round()
            st.p += 1
        arm = self.exploit_arm()
        if st.fixed_arm is None:
            st.fixed_arm = arm
            self.log.log_fixation(m, arm, self.slot)
        yield from self.exploit(arm)


@dataclass
class Ec3Run:
    """
    The raw record of a simulation: joint actions, rewards and
    collider counts for every simulated slot, the event log (a list
    of logs for concatenated episodes), each player's final state
    and the summaries the regret accounting needs. *phase_marks*
    holds the leader's (slot, phase kind) boundaries and
    *error_slots* the slots at which wrongly decoded messages ended.
    """
    actions: np.ndarray
    rewards: np.ndarray
    gammas: np.ndarray
    events: object
    states: list
    horizon: int
    slot_offset: int = 0
    error_slots: np.ndarray = None
    phase_marks: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    typical: bool = False
    num_messages: int = 0
    num_phases: int = 0

    @property
    def num_slots(self):
        return self.actions.shape[0]

    @property
    def assignment(self):
        """
        Arms pulled in the last simulated slot.
        """
        if self.num_slots == 0:
            return np.array([], dtype="int64")
        return self.actions[-1].astype("int64")

    @classmethod
    def from_log(cls, actions, rewards, gammas, log, states, horizon,
                 slot_offset=0):
        errors = log.decode_errors()
        M = actions.shape[1]
        marks = [(slot, kind) for p, kind, slot in log.phase_boundaries(0)]
        explored = [p for p, kind, slot in log.phase_boundaries(0)
                    if kind == "explore"]
        typical = (len(errors) == 0 and len(log.estimates) == M and
                   all(v == M for v in log.estimates.values()))
        return cls(actions, rewards, gammas, log, states, horizon,
                   slot_offset=slot_offset,
                   error_slots=np.array([e[0] for e in errors], dtype="int64"),
                   phase_marks=marks, estimates=dict(log.estimates),
                   typical=typical, num_messages=log.num_messages,
                   num_phases=max(explored, default=0))

    @classmethod
    def concatenate(cls, runs):
        """
        Join consecutive episodes into one record.
        """
        offsets = np.cumsum([0] + [r.num_slots for r in runs[:-1]])
        marks = [(slot+off, kind) for r, off in zip(runs, offsets)
                 for slot, kind in r.phase_marks]
        return cls(np.concatenate([r.actions for r in runs]),
                   np.concatenate([r.rewards for r in runs]),
                   np.concatenate([r.gammas for r in runs]),
                   [r.events for r in runs], runs[-1].states,
                   sum(r.horizon for r in runs),
                   slot_offset=runs[0].slot_offset,
                   error_slots=np.concatenate([r.error_slots+off for r, off
                                               in zip(runs, offsets)]),
                   phase_marks=marks, estimates=dict(runs[0].estimates),
                   typical=all(r.typical for r in runs),
                   num_messages=sum(r.num_messages for r in runs),
                   num_phases=sum(r.num_phases for r in runs))



def simulate(instance, players, horizon, stop=None, slot_offset=0):
    """
    Run *players* in lock step against *instance*.

    Parameters
    ----------
    instance : :class:`~ec3py.env.BanditInstance`
    players : list of :class:`Ec3Player`
        One per player of the instance, sharing one event log.
    horizon : integer
        Number of slots the players plan for.
    stop : integer, optional
        Stop after this many slots (at most *horizon*).
    slot_offset : integer, optional
        Global slot of the first simulated slot.

    Returns
    -------
    :class:`Ec3Run`
    """
    M = instance.num_players
    n_slots = horizon if stop is None else min(stop, horizon)
    stream = instance.stream(slot_offset)
    gens = [p.run() for p in players]
    actions = np.zeros((n_slots, M), dtype="int32")
    rewards = np.zeros((n_slots, M))
    gammas = np.zeros((n_slots, M), dtype="int16")
    segs = [None]*M
    pos = [0]*M
    buf_r = [None]*M
    buf_f = [None]*M
    done = [False]*M

    def advance(m, obs):
        seg = np.empty(0, dtype="int64")
        try:
            while seg.size == 0:
                seg = next(gens[m]) if obs is None else gens[m].send(obs)
                obs = None if seg.size > 0 else Observation(np.empty(0))
        except StopIteration:
            done[m] = True
            seg = np.empty(0, dtype="int64")
        segs[m] = seg
        pos[m] = 0
        buf_r[m] = np.empty(seg.size)
        buf_f[m] = np.empty(seg.size, dtype="int8") if instance.sensing else None

    for m in range(M):
        advance(m, None)
    t = 0
    while t < n_slots:
        if any(done):
            m = done.index(True)
            raise RuntimeError(f"Player {m} stopped at slot {t}, before "
                               f"the end of the run at {n_slots}!")
        n = min(min(segs[m].size-pos[m] for m in range(M)), n_slots-t)
        joint = np.column_stack([segs[m][pos[m]:pos[m]+n] for m in range(M)])
        out = instance.pull_block(t, joint, stream=stream)
        actions[t:t+n] = joint
        rewards[t:t+n] = out.rewards
        gammas[t:t+n] = out.gammas
        t += n
        for m in range(M):
            buf_r[m][pos[m]:pos[m]+n] = out.rewards[:, m]
            if instance.sensing:
                buf_f[m][pos[m]:pos[m]+n] = out.flags[:, m]
            pos[m] += n
            if pos[m] == segs[m].size and t < n_slots:
                advance(m, Observation(buf_r[m], buf_f[m]))
    for g in gens:
        g.close()
    return Ec3Run.from_log(actions, rewards, gammas, players[0].log,
                           [p.state for p in players], horizon,
                           slot_offset=slot_offset)


@dataclass
class Ec3Result:
    trace: object
    assignment: np.ndarray
    run: Ec3Run


def run_ec3(instance, scheme=None, horizon=None, stop=None, slot_offset=0,
            stride=None):
    """
    Run EC3 on *instance*.

    Parameters
    ----------
    instance : :class:`~ec3py.env.BanditInstance`
    scheme : :class:`~ec3py.coding.CodeScheme` or string, optional
        The codec, or just its kind. An uncoded scheme is the
        hypothesis-testing baseline. In sensing mode the codec is
        dropped and bits are read from the collision flags.
        Default: "hamming"
    horizon : integer, optional
        Horizon the players plan for. Default: the instance horizon
    stop : integer, optional
        Truncate the run after this many slots.
    slot_offset : integer, optional
        Global slot of the first slot of the run.
    stride : integer, optional
        Stride of the regret trace. Default: about 1000 points

    Returns
    -------
    :class:`Ec3Result`
        The regret trace, the final assignment and the raw run.

    Examples
    --------
    >>> res = run_ec3(instance, "hamming")
    >>> res.trace["regret"][-1]
    """
    from ec3py.analysis import regret_trace
    if horizon is None:
        horizon = instance.horizon-slot_offset
    if scheme is None:
        scheme = "hamming"
    if isinstance(scheme, str):
        scheme = CodeScheme.for_instance(scheme, instance)
    if instance.sensing and scheme.kind != "uncoded":
        mylog.debug("Collision flags are observed, dropping the %s codec.",
                    scheme.kind)
        scheme = CodeScheme("uncoded", theta=scheme.theta)
    scheme = scheme.with_horizon(horizon)
    log = EventLog()
    players = [Ec3Player(m, instance.num_arms, horizon, instance.sigma,
                         scheme, sensing=instance.sensing, log=log)
               for m in range(instance.num_players)]
    run = simulate(instance, players, horizon, stop=stop,
                   slot_offset=slot_offset)
    if stride is None:
        stride = max(1, run.num_slots // 1000)
    trace = regret_trace(instance, run, stride=stride)
    n_err = len(log.decode_errors())
    mylog.debug("EC3 run of %d slots: %d messages, %d decode errors.",
                run.num_slots, log.num_messages, n_err)
    return Ec3Result(trace, run.assignment, run)
