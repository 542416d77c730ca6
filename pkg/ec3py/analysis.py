"""
Regret bounds and regret accounting.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from ec3py.channel import ChannelModel, optimal_block_length
from ec3py.time_series import TimeSeriesData
from ec3py.utils import mylog, index_bits

phase_kinds = ("init", "explore", "communicate", "exploit")


def gaussian_kl(a, b, sigma):
    return (a-b)**2/(2.0*sigma*sigma)


def bernoulli_kl(a, b):
    return float(rel_entr(a, b)+rel_entr(1.0-a, 1.0-b))


def centralized_lower_bound(instance, T=None):
    """
    Asymptotic lower bound on the regret of any consistent
    centralized algorithm,

        sum_{k > M} (mu_(M) - mu_(k)) / kl(mu_(k), mu_(M)) * ln T,

    with the Bernoulli divergence when every arm's no-collision
    rewards are Bernoulli and the Gaussian one otherwise.

    Parameters
    ----------
    instance : :class:`~ec3py.env.BanditInstance`
    T : float, optional
        Horizon. Default: the instance horizon
    """
    T = instance.horizon if T is None else T
    M = instance.num_players
    mus = instance.mu_sorted
    if M == instance.num_arms:
        return 0.0
    if instance.delta <= 0.0:
        raise ValueError("The lower bound needs a positive gap!")
    coeff = 0.0
    for mu_k in mus[M:]:
        gap = mus[M-1]-mu_k
        if instance.all_bernoulli:
            kl = bernoulli_kl(mu_k, mus[M-1])
        else:
            kl = gaussian_kl(mu_k, mus[M-1], instance.sigma)
        coeff += gap/kl
    return float(coeff*np.log(T))


@dataclass
class RegretBound:
    """
    A closed-form regret upper bound and its terms.

    Attributes
    ----------
    value : float
        The bound.
    terms : dict
        The exploration, communication and atypical-event terms.
    sigma_extrapolated : boolean
        True when sigma != 1; the constants are derived for sigma = 1
        and the exploration term is scaled by sigma^2.
    rounds_clamped : boolean
        True when the phase-count factor log2(8 sqrt(6)/Delta) was
        raised to 1 (e.g. K = M).
    """
    value: float
    terms: dict = field(default_factory=dict)
    sigma_extrapolated: bool = False
    rounds_clamped: bool = False

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"value": self.value, "terms": dict(self.terms),
                "sigma_extrapolated": self.sigma_extrapolated,
                "rounds_clamped": self.rounds_clamped}


def regret_upper_bound(instance, T=None, channel=None, phi=None,
                       sensing=False):
    """
    Evaluate the closed-form regret upper bound of EC3.

    Parameters
    ----------
    instance : :class:`~ec3py.env.BanditInstance`
    T : float, optional
        Horizon. Default: the instance horizon
    channel : :class:`~ec3py.channel.ChannelModel`, optional
        Channel whose optimal block lengths price the messages.
        Default: the instance's worst-case channel
    phi : float, optional
        Slack for the block lengths. Default: C/2
    sensing : boolean, optional
        Evaluate the collision-sensing bound, where messages cost one
        slot per bit. Default: False

    Returns
    -------
    :class:`RegretBound`
    """
    T = instance.horizon if T is None else T
    K = instance.num_arms
    M = instance.num_players
    mus = instance.mu_sorted
    log_T = np.log(T)
    delta = instance.delta
    delta_c = instance.delta_c
    sigma_extrapolated = instance.sigma != 1.0
    if sigma_extrapolated:
        mylog.warning("Regret bound constants assume sigma = 1; scaling the "
                    "exploration term by sigma^2 = %g.", instance.sigma**2)
    explore = 0.0
    for mu_k in mus[M:]:
        explore += 8.0*np.sqrt(6.0)*log_T/(mus[M-1]-mu_k)
    explore *= 113.0*instance.sigma**2
    rounds = np.log2(8.0*np.sqrt(6.0)/delta) if np.isfinite(delta) else 0.0
    rounds_clamped = rounds < 1.0
    rounds = max(rounds, 1.0)
    terms = {"exploration": float(explore)}
    if sensing:
        terms["statistics"] = 2.0*M*M*K*rounds*delta_c
        terms["decisions"] = 4.0*M*M*rounds*delta_c
        terms["initialization"] = (M*M*K + 2.0*M*K)*delta_c
        terms["atypical"] = 2.0*M*M*K*delta_c*np.log2(T)
    else:
        if channel is None:
            channel = ChannelModel.from_instance(instance)
        if np.isfinite(delta):
            L_H = 1+int(np.ceil(np.log2(8.0*np.sqrt(3.0)/delta)))
        else:
            L_H = 2
        N_H = optimal_block_length(channel, max(L_H, 1), T, phi=phi)
        N_K = optimal_block_length(channel, int(np.ceil(np.log2(K))), T, phi=phi)
        terms["statistics"] = 2.0*rounds*M*M*K*delta_c*N_H
        terms["decisions"] = (4.0*M*M*rounds + 2.0*M*K + M*M*K)*delta_c*N_K
        terms["atypical"] = 6.0*M*M*K*delta_c*np.log2(T)
    terms = {k: float(v) for k, v in terms.items()}
    return RegretBound(sum(terms.values()), terms, sigma_extrapolated,
                       bool(rounds_clamped))


class RegretTrace(TimeSeriesData):
    """
    Cumulative regret of a run, sampled every *stride* slots.

    The columns are "t", "regret" (pseudo-regret, crediting each pull
    with the mean of the distribution it was drawn from),
    "realized_regret", "collisions" (cumulative number of colliding
    pulls) and "decode_errors" (cumulative wrongly decoded messages).
    """
    def __init__(self, table, assignment=None, converged=False,
                 typical=False, components=None, num_messages=0,
                 estimates=None, num_phases=0):
        super(RegretTrace, self).__init__(table=table)
        self.assignment = assignment
        self.converged = converged
        self.typical = typical
        self.components = {} if components is None else components
        self.num_messages = num_messages
        self.estimates = {} if estimates is None else estimates
        self.num_phases = num_phases

    @property
    def final_regret(self):
        return float(self.final("regret"))

    @property
    def num_decode_errors(self):
        return int(self.final("decode_errors"))


def credit_table(instance):
    """
    Mean reward of a pull on arm k shared by g players, as a
    (K, M+1) table; column 1 is the no-collision mean.
    """
    M = instance.num_players
    table = np.zeros((instance.num_arms, M+1))
    for k, arm in enumerate(instance.arms):
        table[k, 1] = arm.mu
        for g in range(2, M+1):
            table[k, g] = arm.nu_gamma(g)
    return table


def per_slot_regret(instance, actions, gammas):
    credits = credit_table(instance)[actions, gammas]
    return instance.best_reward-credits.sum(axis=1)


def regret_components(instance, run, per_slot=None):
    """
    Split the pseudo-regret of *run* by the leader's phase kind.
    """
    if per_slot is None:
        per_slot = per_slot_regret(instance, run.actions, run.gammas)
    comps = dict.fromkeys(phase_kinds, 0.0)
    marks = list(run.phase_marks) + [(run.num_slots, None)]
    for (start, kind), (stop, _) in zip(marks[:-1], marks[1:]):
        comps[kind] += float(per_slot[start:stop].sum())
    return comps


def regret_trace(instance, run, stride=1):
    """
    Regret accounting for a simulated run.

    Parameters
    ----------
    instance : :class:`~ec3py.env.BanditInstance`
    run : :class:`~ec3py.ec3.Ec3Run`
        Joint actions, rewards and collider counts of every slot.
    stride : integer, optional
        Sampling stride of the trace. Default: 1

    Returns
    -------
    :class:`RegretTrace`
    """
    actions = np.asarray(run.actions)
    if actions.ndim != 2 or actions.shape[1] != instance.num_players:
        raise ValueError("The action log does not match the number of "
                         "players of the instance!")
    if actions.size > 0 and (actions.min() < 0 or actions.max() >= instance.num_arms):
        raise ValueError("The action log contains arms the instance does "
                         "not have!")
    n = actions.shape[0]
    per_slot = per_slot_regret(instance, actions, run.gammas)
    regret = np.concatenate([[0.0], np.cumsum(per_slot)])
    realized = np.concatenate(
        [[0.0], np.cumsum(instance.best_reward-run.rewards.sum(axis=1))])
    collisions = np.concatenate(
        [[0], np.cumsum((np.asarray(run.gammas) > 1).sum(axis=1))])
    t = np.arange(0, n+1, stride)
    if t[-1] != n:
        t = np.append(t, n)
    errors = np.searchsorted(np.sort(run.error_slots), t, side="right")
    table = {"t": t,
             "regret": regret[t],
             "realized_regret": realized[t],
             "collisions": collisions[t],
             "decode_errors": errors}
    assignment = run.assignment
    converged = bool(len(np.unique(assignment)) == instance.num_players and
                     set(assignment.tolist()) == set(instance.top_arms.tolist()))
    return RegretTrace(table, assignment=assignment, converged=converged,
                       typical=run.typical,
                       components=regret_components(instance, run, per_slot),
                       num_messages=run.num_messages,
                       estimates=dict(run.estimates),
                       num_phases=run.num_phases)
