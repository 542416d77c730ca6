"""
The collision-dependent multi-player bandit environment.
"""
from dataclasses import dataclass

import numpy as np

from ec3py.sources import RewardSource
from ec3py.utils import mylog, ensure_numpy_array

# slots per pre-drawn block of normal variates
CHUNK_SLOTS = 4096


class AssumptionViolation(ValueError):
    def __init__(self, what, detail):
        self.what = what
        self.detail = detail

    def __str__(self):
        return f"The instance violates the {self.what} assumption: {self.detail}"


class ArmModel:
    """
    The reward model of a single arm.

    Parameters
    ----------
    no_collision : :class:`~ec3py.sources.RewardSource`
        Source of the rewards a player gets when alone on the arm.
    collision : :class:`~ec3py.sources.RewardSource` or dict
        Source of the rewards of colliding players, or a dict mapping
        the number of colliders (2, 3, ...) to a source. For a dict,
        a collider count with no entry uses the largest configured
        count below it.

    Examples
    --------
    >>> from ec3py.sources import GaussianSource
    >>> arm = ArmModel(GaussianSource(0.8, 0.2), GaussianSource(0.1, 0.2))
    """
    def __init__(self, no_collision, collision):
        self.no_collision = no_collision
        if isinstance(collision, RewardSource):
            collision = {2: collision}
        collision = {int(k): v for k, v in collision.items()}
        if len(collision) == 0:
            raise ValueError("An arm needs at least one collision source!")
        gammas = sorted(collision)
        if gammas[0] != 2:
            raise ValueError("The collision map must start at 2 colliders, "
                             f"got {gammas[0]}!")
        means = [collision[g].mean for g in gammas]
        if np.any(np.diff(means) > 0.0):
            raise AssumptionViolation(
                "collision monotonicity",
                f"collision means {means} increase with the number of colliders")
        self.collision = dict((g, collision[g]) for g in gammas)

    @property
    def mu(self):
        return self.no_collision.mean

    @property
    def nu(self):
        """
        Mean reward under a two-player collision, the largest
        collision mean of the arm.
        """
        return self.collision[2].mean

    @property
    def nu_floor(self):
        return min(s.mean for s in self.collision.values())

    @property
    def gamma_dependent(self):
        return len(self.collision) > 1

    def collision_source(self, gamma):
        key = max(g for g in self.collision if g <= gamma)
        return self.collision[key]

    def nu_gamma(self, gamma):
        return self.collision_source(gamma).mean

    def __repr__(self):
        return f"ArmModel(mu={self.mu:.6g}, nu={self.nu:.6g})"


@dataclass(frozen=True)
class InstanceConfig:
    """
    Everything needed to build a :class:`BanditInstance`.
    *mu_min* and *nu_max* default to the smallest no-collision
    mean and largest collision mean of the arms.
    """
    arms: tuple
    num_players: int
    horizon: int
    sigma: float
    sensing: bool = False
    seed: int = 0
    mu_min: float = None
    nu_max: float = None
    shuffle_arms: bool = False


@dataclass
class StepOutcome:
    rewards: np.ndarray
    flags: np.ndarray = None


@dataclass
class BlockOutcome:
    """
    Rewards, collider counts and (in sensing mode) collision flags
    for a block of consecutive slots, all of shape (slots, players).
    """
    rewards: np.ndarray
    gammas: np.ndarray
    flags: np.ndarray = None


class RewardStream:
    """
    Standard normal variates for one simulation run. The variates for
    arm *k* at a global slot come from a Philox stream keyed by the
    instance seed whose counter encodes the arm and the block of
    slots, so they do not depend on the order in which slots are
    simulated. The j-th player (by index) on an arm in a slot uses
    column j of that slot's row.
    """
    def __init__(self, instance, slot_offset=0):
        self.instance = instance
        self.slot_offset = int(slot_offset)
        self._cache = {}

    def _chunk(self, arm, chunk):
        key = (arm, chunk)
        if key not in self._cache:
            if len(self._cache) > 4*self.instance.num_arms:
                self._cache.clear()
            bitgen = np.random.Philox(key=self.instance.seed % 2**128,
                                      counter=[0, 0, arm, chunk])
            rng = np.random.Generator(bitgen)
            self._cache[key] = rng.standard_normal(
                (CHUNK_SLOTS, self.instance.num_players))
        return self._cache[key]

    def normals(self, arm, g0, n):
        """
        Variates for *arm* at global slots g0, ..., g0+n-1.
        """
        c0 = g0 // CHUNK_SLOTS
        c1 = (g0+n-1) // CHUNK_SLOTS
        block = np.concatenate([self._chunk(arm, c) for c in range(c0, c1+1)])
        start = g0-c0*CHUNK_SLOTS
        return block[start:start+n]


class BanditInstance:
    """
    An immutable bandit instance with K arms and M players.
    Use :func:`build_instance` to construct one from an
    :class:`InstanceConfig`.

    Attributes
    ----------
    mu, nu : ndarray
        Per-arm no-collision and (two-player) collision means.
    mu_sorted, nu_sorted : ndarray
        The same means in decreasing order.
    delta : float
        Gap between the M-th and (M+1)-th best arm, inf when K = M.
    delta_c : float
        Worst per-slot collision loss, mu_(1) - nu_(K).
    """
    def __init__(self, arms, num_players, horizon, sigma, mu_min, nu_max,
                 sensing=False, seed=0, permutation=None):
        self.arms = tuple(arms)
        self.num_arms = len(self.arms)
        self.num_players = int(num_players)
        self.horizon = int(horizon)
        self.sigma = float(sigma)
        self.mu_min = float(mu_min)
        self.nu_max = float(nu_max)
        self.sensing = bool(sensing)
        self.seed = int(seed)
        if permutation is None:
            permutation = np.arange(self.num_arms)
        self.permutation = np.asarray(permutation)
        self.mu = np.array([a.mu for a in self.arms])
        self.nu = np.array([a.nu for a in self.arms])
        self.mu_sorted = np.sort(self.mu)[::-1]
        self.nu_sorted = np.sort(self.nu)[::-1]
        M = self.num_players
        if M < self.num_arms:
            self.delta = float(self.mu_sorted[M-1]-self.mu_sorted[M])
        else:
            self.delta = np.inf
        nu_floor = min(a.nu_floor for a in self.arms)
        self.delta_c = float(self.mu_sorted[0]-nu_floor)
        self.top_arms = np.sort(np.argsort(-self.mu, kind="stable")[:M])
        self.best_reward = float(self.mu_sorted[:M].sum())

    @property
    def theta(self):
        """
        Decision threshold between collision and no-collision rewards.
        """
        return 0.5*(self.mu_min+self.nu_max)

    @property
    def all_bernoulli(self):
        return all(a.no_collision.kind == "bernoulli" for a in self.arms)

    def stream(self, slot_offset=0):
        return RewardStream(self, slot_offset=slot_offset)

    def pull_block(self, t0, actions, stream=None):
        """
        Simulate consecutive slots t0, t0+1, ... given the joint
        actions for each of them.

        Parameters
        ----------
        t0 : integer
            The first slot, counted from the start of the stream.
        actions : array_like
            Integer array of shape (slots, players) of arm choices.
        stream : :class:`RewardStream`, optional
            The run's variates. A fresh stream at offset 0 is used
            if not given.

        Returns
        -------
        :class:`BlockOutcome`
        """
        if stream is None:
            stream = self.stream()
        actions = np.asarray(actions, dtype="int64")
        if actions.ndim == 1:
            actions = actions[np.newaxis, :]
        n, M = actions.shape
        if M != self.num_players:
            raise ValueError(f"Got actions for {M} players, but the instance "
                             f"has {self.num_players}!")
        if np.any(actions < 0) or np.any(actions >= self.num_arms):
            raise IndexError(f"Actions must be arms in [0, {self.num_arms})!")
        g0 = stream.slot_offset+int(t0)
        if t0 < 0 or g0+n > self.horizon:
            raise ValueError(f"Slots {g0}..{g0+n-1} are outside the "
                             f"horizon T = {self.horizon}!")
        same = actions[:, :, np.newaxis] == actions[:, np.newaxis, :]
        gammas = same.sum(axis=2)
        rank = (same & np.tri(M, k=-1, dtype=bool)).sum(axis=2)
        slots = g0+np.arange(n)
        rewards = np.empty((n, M))
        for k in np.unique(actions):
            rows, cols = np.nonzero(actions == k)
            z = stream.normals(k, g0, n)[rows, rank[rows, cols]]
            g = gammas[rows, cols]
            arm = self.arms[k]
            out = np.empty(rows.size)
            alone = g == 1
            out[alone] = arm.no_collision.sample(slots[rows[alone]], z[alone])
            for gamma in np.unique(g[~alone]):
                sel = g == gamma
                out[sel] = arm.collision_source(gamma).sample(slots[rows[sel]], z[sel])
            rewards[rows, cols] = out
        flags = (gammas > 1).astype("int8") if self.sensing else None
        return BlockOutcome(rewards, gammas, flags)

    def step(self, t, joint_action, stream=None):
        """
        Simulate the single slot *t*. See :func:`step`.
        """
        joint_action = ensure_numpy_array(joint_action)
        out = self.pull_block(t, joint_action[np.newaxis, :], stream=stream)
        flags = None if out.flags is None else out.flags[0]
        return StepOutcome(out.rewards[0], flags)

    def __repr__(self):
        return (f"BanditInstance(K={self.num_arms}, M={self.num_players}, "
                f"T={self.horizon}, sigma={self.sigma}, "
                f"sensing={self.sensing})")


def build_instance(config):
    """
    Validate an :class:`InstanceConfig` and build the
    :class:`BanditInstance` it describes.

    Parameters
    ----------
    config : :class:`InstanceConfig`

    Examples
    --------
    >>> import numpy as np
    >>> from ec3py.sources import GaussianSource
    >>> arms = tuple(ArmModel(GaussianSource(m, 0.2), GaussianSource(0.1, 0.2))
    ...              for m in np.linspace(0.3, 0.84, 10))
    >>> inst = build_instance(InstanceConfig(arms, 5, 10**5, 0.2))
    >>> round(inst.delta, 12)
    0.06
    """
    arms = list(config.arms)
    K = len(arms)
    M = config.num_players
    if K == 0:
        raise ValueError("The instance needs at least one arm!")
    if M < 1:
        raise ValueError(f"The number of players must be positive, got {M}!")
    if M > K:
        raise ValueError(f"More players ({M}) than arms ({K}) is not supported!")
    if config.horizon < 1:
        raise ValueError(f"The horizon must be positive, got {config.horizon}!")
    if config.sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {config.sigma}!")
    for k, arm in enumerate(arms):
        for name, mean in [("no-collision", arm.mu)] + \
                [(f"collision ({g})", s.mean) for g, s in arm.collision.items()]:
            if not 0.0 <= mean <= 1.0:
                raise ValueError(f"Arm {k} has a {name} mean {mean} "
                                 f"outside [0, 1]!")
    mu = np.array([a.mu for a in arms])
    nu = np.array([a.nu for a in arms])
    mu_min = mu.min() if config.mu_min is None else config.mu_min
    nu_max = nu.max() if config.nu_max is None else config.nu_max
    if nu_max >= mu_min:
        raise AssumptionViolation(
            "reward separation", f"nu_max = {nu_max} >= mu_min = {mu_min}")
    if np.any(mu < mu_min):
        raise AssumptionViolation(
            "reward separation", f"an arm mean lies below mu_min = {mu_min}")
    if np.any(nu > nu_max):
        raise AssumptionViolation(
            "reward separation", f"a collision mean lies above nu_max = {nu_max}")
    if M < K:
        mu_sorted = np.sort(mu)[::-1]
        if mu_sorted[M-1] <= mu_sorted[M]:
            raise ValueError("The M-th and (M+1)-th best arms have equal "
                             "means, so the optimal allocation is not unique!")
    permutation = np.arange(K)
    if config.shuffle_arms:
        permutation = np.random.default_rng(config.seed).permutation(K)
        arms = [arms[i] for i in permutation]
    instance = BanditInstance(arms, M, config.horizon, config.sigma,
                              mu_min, nu_max, sensing=config.sensing,
                              seed=config.seed, permutation=permutation)
    mylog.debug("Built %s with delta = %g, delta_c = %g.", instance,
                instance.delta, instance.delta_c)
    return instance


def step(instance, t, joint_action):
    """
    Simulate slot *t* of *instance* for the joint action
    *joint_action* (one arm per player).

    Returns
    -------
    :class:`StepOutcome`
        Per-player rewards; collision flags only in sensing mode.
    """
    return instance.step(t, joint_action)
