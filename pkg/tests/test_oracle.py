"""Tabular oracle tests: Monte-Carlo cross-checks and the consistency suites."""

import numpy as np
import pytest

from sdpc.oracle import (
    check_bridge,
    check_kl_equivalence,
    check_variance_limit,
    decomposed_soft_q,
    joint_policy_probs,
    joint_soft_q,
    random_mdp,
    random_policies,
    raw_entropies,
)
from sdpc.tabular import TabularMdp


# ---------------------------------------------------------------------------
# Monte-Carlo rollout oracle
# ---------------------------------------------------------------------------

def sample_rows(cum, rows, rng):
    """Inverse-cdf draw from cum[rows] along the last axis."""
    u = rng.random(rows.shape[0])
    return (cum[rows] < u[:, None]).sum(axis=1)


def mc_joint_q(mdp, pi, alpha, s0, a0, n_traj, horizon, rng):
    """Monte-Carlo estimate of the discounted reward+entropy series from
    (s0, a0); returns (mean, standard error)."""
    joint_pi = joint_policy_probs(pi, mdp)
    h = raw_entropies(pi).sum(axis=1)
    cum_p = np.cumsum(mdp.transitions, axis=2).reshape(-1, mdp.num_states)
    cum_pi = np.cumsum(joint_pi, axis=1)
    a_count = mdp.num_joint_actions

    totals = np.full(n_traj, mdp.rewards[s0, a0])
    states = np.full(n_traj, s0)
    actions = np.full(n_traj, a0)
    for k in range(1, horizon):
        flat = states * a_count + actions
        states = sample_rows(cum_p, flat, rng)
        actions = sample_rows(cum_pi, states, rng)
        totals += mdp.gamma ** k * (mdp.rewards[states, actions]
                                    + alpha * h[states])
    return totals.mean(), totals.std(ddof=1) / np.sqrt(n_traj)


def mc_decomposed_q(mdp, m, pi, alpha, s0, a0m, n_traj, horizon, rng):
    """Monte-Carlo estimate of the per-dimension series: dimension m holds
    a0m at step 0, the other dimensions sample their policies throughout."""
    h_all = raw_entropies(pi)
    h_total = h_all.sum(axis=1)
    h_excl = h_total - h_all[:, m]
    cum_p = np.cumsum(mdp.transitions, axis=2).reshape(-1, mdp.num_states)
    cum_dim = np.cumsum(pi, axis=2)  # [S, M, N]
    a_count = mdp.num_joint_actions
    n = mdp.actions_per_dim

    def joint_of(own, others_matrix, states):
        digits = []
        col = 0
        for d in range(mdp.action_dims):
            if d == m:
                digits.append(own)
            else:
                digits.append(others_matrix[:, col])
                col += 1
        joint = np.zeros_like(states)
        for d in range(mdp.action_dims):
            joint = joint * n + digits[d]
        return joint

    states = np.full(n_traj, s0)
    own = np.full(n_traj, a0m)
    others = np.empty((n_traj, mdp.action_dims - 1), dtype=np.int64)
    col = 0
    for d in range(mdp.action_dims):
        if d != m:
            others[:, col] = sample_rows(cum_dim[:, d, :], states, rng)
            col += 1
    joint = joint_of(own, others, states)
    totals = mdp.rewards[states, joint] + alpha * h_excl[states]
    for k in range(1, horizon):
        flat = states * a_count + joint
        states = sample_rows(cum_p, flat, rng)
        own = sample_rows(cum_dim[:, m, :], states, rng)
        col = 0
        for d in range(mdp.action_dims):
            if d != m:
                others[:, col] = sample_rows(cum_dim[:, d, :], states, rng)
                col += 1
        joint = joint_of(own, others, states)
        totals += mdp.gamma ** k * (mdp.rewards[states, joint]
                                    + alpha * h_total[states])
    return totals.mean(), totals.std(ddof=1) / np.sqrt(n_traj)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def test_myopic_discount_returns_reward_table():
    rng = np.random.default_rng(0)
    mdp = random_mdp(rng, gamma=0.0)
    pi = random_policies(rng, mdp)
    np.testing.assert_array_equal(joint_soft_q(mdp, pi, alpha=0.7), mdp.rewards)


def test_single_state_geometric_series():
    transitions = np.ones((1, 2, 1))
    rewards = np.array([[1.5, -0.5]])
    mdp = TabularMdp(transitions, rewards, gamma=0.9, action_dims=1,
                     actions_per_dim=2)
    pi = np.zeros((1, 1, 2))
    pi[0, 0, 0] = 1.0  # always pick action 0
    q = joint_soft_q(mdp, pi, alpha=0.0)
    # Q(a) = r(a) + gamma * 1.5 / (1 - gamma)
    expected = rewards[0] + 0.9 * 1.5 / 0.1
    np.testing.assert_allclose(q[0], expected, rtol=1e-11)


def test_joint_q_matches_monte_carlo():
    rng = np.random.default_rng(1)
    mdp = random_mdp(rng, gamma=0.85)
    pi = random_policies(rng, mdp)
    q = joint_soft_q(mdp, pi, alpha=0.3)
    mc_rng = np.random.default_rng(2)
    for s0, a0 in ((0, 0), (2, 5)):
        est, sem = mc_joint_q(mdp, pi, 0.3, s0, a0, n_traj=200_000,
                              horizon=220, rng=mc_rng)
        assert abs(est - q[s0, a0]) <= 3.0 * sem


def test_decomposed_equals_joint_when_single_dimension():
    rng = np.random.default_rng(3)
    mdp = random_mdp(rng, action_dims=1, actions_per_dim=5)
    pi = random_policies(rng, mdp)
    q_joint = joint_soft_q(mdp, pi, alpha=0.4)
    q_dec = decomposed_soft_q(mdp, 0, pi, alpha=0.4)
    np.testing.assert_allclose(q_dec, q_joint, rtol=1e-11, atol=1e-11)


def test_decomposed_myopic_value():
    rng = np.random.default_rng(4)
    mdp = random_mdp(rng, gamma=0.0)
    pi = random_policies(rng, mdp)
    alpha = 0.6
    q = decomposed_soft_q(mdp, 0, pi, alpha)
    # gamma = 0: expected reward over the other dimension plus its entropy
    h_excl = raw_entropies(pi)[:, 1]
    n = mdp.actions_per_dim
    for s in range(mdp.num_states):
        for own in range(n):
            expected = sum(
                pi[s, 1, e] * mdp.rewards[s, own * n + e] for e in range(n)
            ) + alpha * h_excl[s]
            np.testing.assert_allclose(q[s, own], expected, rtol=1e-12)


def test_decomposed_q_matches_monte_carlo():
    rng = np.random.default_rng(5)
    mdp = random_mdp(rng, gamma=0.85)
    pi = random_policies(rng, mdp)
    q = decomposed_soft_q(mdp, 1, pi, alpha=0.25)
    est, sem = mc_decomposed_q(mdp, 1, pi, 0.25, s0=1, a0m=2,
                               n_traj=200_000, horizon=220,
                               rng=np.random.default_rng(6))
    assert abs(est - q[1, 2]) <= 3.0 * sem


def test_solvers_are_contractions():
    rng = np.random.default_rng(7)
    mdp = random_mdp(rng)
    pi = random_policies(rng, mdp)
    hist_joint: list = []
    joint_soft_q(mdp, pi, alpha=0.5, residuals=hist_joint)
    hist_dec: list = []
    decomposed_soft_q(mdp, 0, pi, alpha=0.5, residuals=hist_dec)
    for hist in (hist_joint, hist_dec):
        assert len(hist) > 10
        diffs = np.diff(np.asarray(hist))
        assert np.all(diffs <= 1e-15)


def test_solver_rejects_bad_discount():
    rng = np.random.default_rng(8)
    mdp = random_mdp(rng)
    mdp.gamma = 1.0
    pi = random_policies(rng, mdp)
    with pytest.raises(ValueError):
        joint_soft_q(mdp, pi, alpha=0.0)


def test_desk_scale_cap_enforced():
    with pytest.raises(ValueError):
        TabularMdp(np.ones((1, 5 ** 6, 1)), np.zeros((1, 5 ** 6)), 0.9,
                   action_dims=6, actions_per_dim=5)


def test_transition_rows_validated():
    bad = np.ones((2, 2, 2)) * 0.4
    with pytest.raises(ValueError):
        TabularMdp(bad, np.zeros((2, 2)), 0.9, 1, 2)


# ---------------------------------------------------------------------------
# value identity between decomposed and joint solutions
# ---------------------------------------------------------------------------

def test_bridge_exact_at_zero_temperature():
    rng = np.random.default_rng(9)
    for _ in range(5):
        mdp = random_mdp(rng)
        pi = random_policies(rng, mdp)
        corrected, uncorrected = check_bridge(mdp, pi, alpha=0.0)
        assert corrected < 1e-9
        assert uncorrected < 1e-9


def test_bridge_single_dimension_any_temperature():
    rng = np.random.default_rng(10)
    mdp = random_mdp(rng, action_dims=1, actions_per_dim=4)
    pi = random_policies(rng, mdp)
    for alpha in (0.0, 0.3, 2.0):
        corrected, uncorrected = check_bridge(mdp, pi, alpha)
        assert corrected < 1e-12
        assert uncorrected < 1e-12  # no exclusive dimensions, no correction


def test_bridge_corrected_identity_with_entropy():
    rng = np.random.default_rng(11)
    for _ in range(5):
        mdp = random_mdp(rng)
        pi = random_policies(rng, mdp)
        for alpha in (0.1, 1.0):
            corrected, uncorrected = check_bridge(mdp, pi, alpha)
            assert corrected < 1e-9
            # the uncorrected form misses exactly the exclusive entropy
            assert uncorrected > 1e-3


# ---------------------------------------------------------------------------
# gradient equivalence and variance limit
# ---------------------------------------------------------------------------

def test_kl_gradient_zero_at_optimum():
    rng = np.random.default_rng(12)
    q = rng.uniform(-2, 2, size=6)
    alpha = 0.5
    logits = q / alpha + 3.7  # softmax-equal to the target
    assert check_kl_equivalence(q, logits, alpha) < 1e-12


def test_kl_gradient_equivalence_random_rows():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(-2, 2, size=7)
        logits = rng.uniform(-2, 2, size=7)
        for alpha in (0.1, 1.0, 10.0):
            worst = max(worst, check_kl_equivalence(q, logits, alpha))
    assert worst < 1e-10


def test_variance_limit_constant_direction_exempt():
    q = np.array([0.3, -0.2, 0.8, 0.1])
    ratios = check_variance_limit(q, 1.0, np.ones(4), scales=(1e-1, 1e-3))
    assert ratios == [None, None]


def test_variance_limit_ratio_approaches_one():
    rng = np.random.default_rng(14)
    for alpha in (1.0, 2.0):
        for _ in range(20):
            q = rng.uniform(-2, 2, size=6)
            x = rng.normal(size=6)
            x -= x.mean()
            ratios = check_variance_limit(q, alpha, x,
                                          scales=(1e-1, 1e-2, 1e-3))
            assert 0.98 <= ratios[-1] <= 1.02
            # deviation from 1 shrinks with the scale
            assert abs(ratios[-1] - 1) <= abs(ratios[0] - 1) + 1e-9
