import logging
from contextlib import contextmanager

import numpy as np
from numpy.testing import assert_equal, assert_allclose

from ec3py.ec3 import Ec3Run
from ec3py.env import ArmModel, InstanceConfig, build_instance
from ec3py.sources import GaussianSource, TraceSource
from ec3py.utils import mylog


def gaussian_arms(mus, nus, sigma):
    nus = np.broadcast_to(nus, (len(mus),))
    return tuple(ArmModel(GaussianSource(m, sigma), GaussianSource(n, sigma))
                 for m, n in zip(mus, nus))


def constant_arms(mus, nus):
    """
    Arms with constant trace rewards, a channel without noise.
    """
    nus = np.broadcast_to(nus, (len(mus),))
    return tuple(ArmModel(TraceSource([m]), TraceSource([n]))
                 for m, n in zip(mus, nus))


def gaussian_instance(mus, nus=0.1, num_players=1, horizon=10**4, sigma=0.2,
                      **kwargs):
    config = InstanceConfig(gaussian_arms(mus, nus, sigma), num_players,
                            horizon, sigma, **kwargs)
    return build_instance(config)


def constant_instance(mus, nus=0.1, num_players=1, horizon=10**4, sigma=0.5,
                      **kwargs):
    config = InstanceConfig(constant_arms(mus, nus), num_players, horizon,
                            sigma, **kwargs)
    return build_instance(config)


def interleaved_instance(horizon=10**5, seed=0, sensing=False):
    """
    Ten Gaussian arms with means spread evenly over [0.3, 0.84],
    collision mean 0.1, five players, sigma = 0.2.
    """
    mus = np.linspace(0.3, 0.84, 10)
    config = InstanceConfig(gaussian_arms(mus, 0.1, 0.2), 5, horizon, 0.2,
                            sensing=sensing, seed=seed, shuffle_arms=True)
    return build_instance(config)


def collider_counts(actions):
    actions = np.asarray(actions)
    return (actions[:, :, np.newaxis] == actions[:, np.newaxis, :]).sum(axis=2)


def make_run(actions, rewards=None):
    """
    A run record for a hand-made action log.
    """
    actions = np.asarray(actions, dtype="int64")
    if actions.ndim == 1:
        actions = actions[:, np.newaxis]
    if rewards is None:
        rewards = np.zeros(actions.shape)
    return Ec3Run(actions, rewards, collider_counts(actions), None, [],
                  actions.shape[0], error_slots=np.zeros(0, dtype="int64"),
                  phase_marks=[(0, "exploit")])


def brute_force_regret(instance, actions):
    """
    Cumulative pseudo-regret by explicit loops over slots and players.
    """
    best = sum(sorted(instance.mu, reverse=True)[:instance.num_players])
    total = 0.0
    out = [0.0]
    for row in actions:
        credit = 0.0
        for k in row:
            n = list(row).count(k)
            arm = instance.arms[k]
            credit += arm.mu if n == 1 else arm.nu_gamma(n)
        total += best-credit
        out.append(total)
    return np.array(out)


def phase_ranges(run, kind):
    """
    Slot ranges [start, stop) of the leader's phases of *kind*.
    """
    marks = list(run.phase_marks) + [(run.num_slots, None)]
    return [(start, stop) for (start, k), (stop, _) in zip(marks[:-1], marks[1:])
            if k == kind]


def assert_equal_arrays(a, b):
    assert_equal(np.asarray(a), np.asarray(b))


def assert_allclose_arrays(a, b, rtol=1e-07, atol=0, err_msg=''):
    assert_allclose(np.asarray(a), np.asarray(b), rtol=rtol, atol=atol,
                    err_msg=err_msg)


class _ListHandler(logging.Handler):
    def __init__(self):
        super().__init__(logging.DEBUG)
        self.records = []

    def emit(self, record):
        self.records.append(record)


@contextmanager
def captured_log(level=logging.DEBUG):
    """
    Collect the records ``mylog`` emits at *level* or above; the
    package logger does not propagate, so caplog never sees them.
    """
    handler = _ListHandler()
    old = mylog.level
    mylog.addHandler(handler)
    mylog.setLevel(level)
    try:
        yield handler.records
    finally:
        mylog.removeHandler(handler)
        mylog.setLevel(old)
