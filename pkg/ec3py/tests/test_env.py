import numpy as np
import pytest

from ec3py.env import ArmModel, InstanceConfig, AssumptionViolation, \
    build_instance, step
from ec3py.sources import GaussianSource, BernoulliSource, TraceSource
from .utils import gaussian_arms, gaussian_instance, constant_arms, \
    constant_instance, collider_counts, assert_equal_arrays, \
    assert_allclose_arrays


def test_linear_means_instance():
    inst = gaussian_instance(np.linspace(0.3, 0.84, 10), 0.1, num_players=5)
    assert inst.num_arms == 10
    assert_allclose_arrays(inst.delta, 0.06, atol=1e-12)
    assert_allclose_arrays(inst.mu_min, 0.3, atol=1e-12)
    assert_allclose_arrays(inst.nu_max, 0.1, atol=1e-12)
    assert_equal_arrays(inst.top_arms, [5, 6, 7, 8, 9])
    assert_allclose_arrays(inst.theta, 0.2, atol=1e-12)


def test_single_arm_instance():
    inst = gaussian_instance([1.0], 0.0, num_players=1)
    assert inst.delta == np.inf
    assert inst.delta_c == 1.0


def test_order_statistics():
    inst = gaussian_instance([0.9, 0.8, 0.7], [0.2, 0.1, 0.05], num_players=2)
    assert_allclose_arrays(inst.delta, 0.1, atol=1e-12)
    assert_allclose_arrays(inst.delta_c, 0.85, atol=1e-12)
    assert_allclose_arrays(inst.mu_sorted, [0.9, 0.8, 0.7])
    assert_allclose_arrays(inst.nu_sorted, [0.2, 0.1, 0.05])


def test_build_instance_errors():
    arms = gaussian_arms([0.9, 0.8], 0.1, 0.2)
    with pytest.raises(ValueError):
        build_instance(InstanceConfig(arms, 3, 1000, 0.2))
    with pytest.raises(ValueError):
        build_instance(InstanceConfig(arms, 1, 0, 0.2))
    with pytest.raises(ValueError):
        build_instance(InstanceConfig(gaussian_arms([1.2, 0.8], 0.1, 0.2),
                                      1, 1000, 0.2))
    with pytest.raises(AssumptionViolation):
        build_instance(InstanceConfig(gaussian_arms([0.9, 0.3], 0.4, 0.2),
                                      1, 1000, 0.2))
    with pytest.raises(AssumptionViolation):
        build_instance(InstanceConfig(arms, 1, 1000, 0.2, mu_min=0.85))
    # tied M-th and (M+1)-th arms
    with pytest.raises(ValueError):
        build_instance(InstanceConfig(gaussian_arms([0.9, 0.8, 0.8], 0.1, 0.2),
                                      2, 1000, 0.2))
    with pytest.raises(ValueError):
        TraceSource([])
    with pytest.raises(ValueError):
        TraceSource([0.5, 1.5])


def test_collision_map_validation():
    with pytest.raises(AssumptionViolation):
        ArmModel(BernoulliSource(0.9), {2: BernoulliSource(0.1),
                                        3: BernoulliSource(0.2)})
    with pytest.raises(ValueError):
        ArmModel(BernoulliSource(0.9), {3: BernoulliSource(0.1)})
    arm = ArmModel(BernoulliSource(0.9), {2: BernoulliSource(0.2),
                                          4: BernoulliSource(0.1)})
    assert arm.nu == 0.2
    assert arm.nu_floor == 0.1
    assert arm.nu_gamma(3) == 0.2
    assert arm.nu_gamma(7) == 0.1


def test_step_collision_routing():
    inst = constant_instance([0.9, 0.8, 0.7, 0.6], 0.1, num_players=2,
                             sensing=True)
    out = step(inst, 0, [3, 3])
    assert_equal_arrays(out.rewards, [0.1, 0.1])
    assert_equal_arrays(out.flags, [1, 1])
    out = step(inst, 1, [0, 3])
    assert_equal_arrays(out.rewards, [0.9, 0.6])
    assert_equal_arrays(out.flags, [0, 0])
    # flags stay hidden without sensing
    inst = constant_instance([0.9, 0.8, 0.7, 0.6], 0.1, num_players=2)
    assert step(inst, 0, [3, 3]).flags is None


def test_trace_indexing():
    arms = (ArmModel(TraceSource([0.4, 0.6, 0.8]), TraceSource([0.1])),
            ArmModel(TraceSource([0.3]), TraceSource([0.1])))
    inst = build_instance(InstanceConfig(arms, 1, 100, 0.5))
    assert step(inst, 0, [0]).rewards[0] == 0.4
    assert step(inst, 1, [0]).rewards[0] == 0.6
    assert step(inst, 5, [0]).rewards[0] == 0.8


def test_gamma_dependent_collisions():
    collision = {2: BernoulliSource(0.2), 3: BernoulliSource(0.1)}
    arms = tuple(ArmModel(BernoulliSource(m), collision)
                 for m in (0.9, 0.8, 0.7))
    n = 10**5
    inst = build_instance(InstanceConfig(arms, 3, n, 0.5, seed=7))
    out = inst.pull_block(0, np.zeros((n, 3), dtype="int64"))
    assert_equal_arrays(out.gammas, 3)
    rewards = out.rewards.ravel()
    tol = 4.0*np.sqrt(0.1*0.9/rewards.size)
    assert abs(rewards.mean()-0.1) < tol


def test_determinism_and_segmentation():
    inst = gaussian_instance([0.9, 0.8, 0.7, 0.5], 0.1, num_players=3,
                             horizon=20000, seed=11)
    rng = np.random.default_rng(0)
    actions = rng.integers(0, 4, size=(10000, 3))
    a = inst.pull_block(0, actions).rewards
    b = inst.pull_block(0, actions).rewards
    assert_equal_arrays(a, b)
    stream = inst.stream()
    c = np.vstack([inst.pull_block(0, actions[:3001], stream=stream).rewards,
                   inst.pull_block(3001, actions[3001:], stream=stream).rewards])
    assert_equal_arrays(a, c)
    # a shifted stream sees the same global slots
    shifted = inst.stream(5000)
    d = inst.pull_block(0, actions[5000:], stream=shifted).rewards
    assert_equal_arrays(a[5000:], d)
    other = gaussian_instance([0.9, 0.8, 0.7, 0.5], 0.1, num_players=3,
                              horizon=20000, seed=12)
    assert not np.array_equal(a, other.pull_block(0, actions).rewards)


def test_flags_match_brute_force():
    inst = constant_instance([0.9, 0.8, 0.7, 0.6, 0.5], 0.1, num_players=4,
                             sensing=True)
    rng = np.random.default_rng(3)
    actions = rng.integers(0, 5, size=(2000, 4))
    out = inst.pull_block(0, actions)
    for row, flags, gammas in zip(actions, out.flags, out.gammas):
        for m in range(4):
            count = sum(1 for k in row if k == row[m])
            assert flags[m] == int(count > 1)
            assert gammas[m] == count
    assert_equal_arrays(out.gammas, collider_counts(actions))


def test_distribution_routing():
    sigma = 0.2
    n = 10**5
    inst = gaussian_instance([0.9, 0.5], [0.15, 0.1], num_players=2,
                             horizon=n, sigma=sigma, seed=5)
    actions = np.zeros((n, 2), dtype="int64")
    actions[:, 1] = 1
    out = inst.pull_block(0, actions)
    tol = 4.0*sigma/np.sqrt(n)
    assert abs(out.rewards[:, 0].mean()-0.9) < tol
    assert abs(out.rewards[:, 1].mean()-0.5) < tol
    out = inst.pull_block(0, np.zeros((n, 2), dtype="int64"))
    tol = 4.0*sigma/np.sqrt(2*n)
    assert abs(out.rewards.mean()-0.15) < tol
    # colliders draw independently
    assert not np.array_equal(out.rewards[:, 0], out.rewards[:, 1])


def test_step_errors():
    inst = constant_instance([0.9, 0.8], 0.1, num_players=2, horizon=10)
    with pytest.raises(IndexError):
        step(inst, 0, [0, 2])
    with pytest.raises(IndexError):
        step(inst, 0, [-1, 0])
    with pytest.raises(ValueError):
        step(inst, 10, [0, 1])
    with pytest.raises(ValueError):
        step(inst, 0, [0])


def test_shuffle_arms():
    mus = np.linspace(0.3, 0.84, 10)
    arms = gaussian_arms(mus, 0.1, 0.2)
    inst = build_instance(InstanceConfig(arms, 5, 1000, 0.2, seed=4,
                                         shuffle_arms=True))
    assert_allclose_arrays(inst.mu, mus[inst.permutation])
    assert sorted(inst.permutation.tolist()) == list(range(10))
    assert_allclose_arrays(inst.mu_sorted, mus[::-1])
    assert_allclose_arrays(np.sort(inst.mu[inst.top_arms]), mus[5:])


def test_collision_free_instance():
    arms = constant_arms([0.9, 0.6], 0.0)
    inst = build_instance(InstanceConfig(arms, 1, 100, 0.5))
    assert inst.nu_max == 0.0
    arms = (ArmModel(BernoulliSource(0.9), BernoulliSource(0.0)),
            ArmModel(BernoulliSource(0.6), BernoulliSource(0.0)))
    inst = build_instance(InstanceConfig(arms, 2, 100, 0.5))
    out = inst.pull_block(0, np.zeros((100, 2), dtype="int64"))
    assert_equal_arrays(out.rewards, 0.0)


def test_gaussian_source_not_truncated():
    src = GaussianSource(0.9, 0.5)
    z = np.array([-3.0, 0.0, 3.0])
    assert_allclose_arrays(src.sample(np.arange(3), z), [-0.6, 0.9, 2.4])
