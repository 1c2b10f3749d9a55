"""Decomposed policy tests: softmax/Boltzmann rows, sampling, entropies."""

import mpmath
import numpy as np
import pytest

from sdpc.policy import (
    ActionGrid,
    boltzmann_policy,
    greedy_action,
    greedy_indices,
    joint_log_prob,
    normalized_entropy,
    policy_from_logits,
    sample_action,
    sample_indices,
)


def gaussian_cell_pmf(n: int, sigma: float = 0.3) -> np.ndarray:
    """Gaussian-shaped weights exp(-(a/sigma)^2) at the N cell centers of
    [-1, 1]; the reference pmf for the entropy-normalization checks."""
    centers = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    w = np.exp(-((centers / sigma) ** 2))
    return w / w.sum()


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def test_grid_endpoints_and_monotonicity():
    grid = ActionGrid(3, 9)
    assert grid.values[0] == -1.0 and grid.values[-1] == 1.0
    assert np.all(np.diff(grid.values) > 0)


def test_grid_index_value_roundtrip_exact():
    for n in (2, 5, 20, 101):
        grid = ActionGrid(1, n)
        idx = np.arange(n)
        np.testing.assert_array_equal(grid.nearest_index(grid.values[idx]), idx)


def test_grid_nearest_index_clips_out_of_range():
    grid = ActionGrid(1, 5)
    np.testing.assert_array_equal(grid.nearest_index(np.array([-3.0, 3.0])), [0, 4])


def test_grid_rejects_degenerate_sizes():
    with pytest.raises(ValueError):
        ActionGrid(1, 1)
    with pytest.raises(ValueError):
        ActionGrid(0, 4)


# ---------------------------------------------------------------------------
# softmax rows
# ---------------------------------------------------------------------------

def test_zero_logits_give_uniform_rows():
    p = policy_from_logits(np.zeros((3, 4)))
    np.testing.assert_allclose(p, 0.25, atol=1e-15)


def test_two_point_closed_form():
    p = policy_from_logits(np.array([[0.0, np.log(3.0)]]))
    np.testing.assert_allclose(p, [[0.25, 0.75]], rtol=1e-14)


def test_softmax_matches_high_precision_oracle():
    rng = np.random.default_rng(12)
    d = rng.uniform(-8.0, 8.0, size=(3, 5))
    p = policy_from_logits(d)
    mpmath.mp.dps = 50
    for r in range(3):
        exps = [mpmath.exp(mpmath.mpf(v)) for v in d[r]]
        total = sum(exps)
        for c in range(5):
            assert abs(p[r, c] - float(exps[c] / total)) < 1e-12


def test_rows_sum_to_one():
    rng = np.random.default_rng(13)
    p = policy_from_logits(rng.normal(size=(6, 4, 7)) * 10)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(p >= 0)


def test_shift_invariance_exact_for_representable_shifts():
    # logits on a coarse binary grid keep d + c exactly representable
    rng = np.random.default_rng(14)
    d = np.round(rng.uniform(-4, 4, size=(4, 6)) * 1024) / 1024
    for c in (1.0, -2.5, 8.0):
        assert np.array_equal(policy_from_logits(d), policy_from_logits(d + c))


def test_boltzmann_equals_scaled_softmax():
    rng = np.random.default_rng(15)
    d = rng.normal(size=(5, 2, 9)) * 3
    for alpha in (0.25, 1.0, 7.5):
        assert np.array_equal(boltzmann_policy(d, alpha),
                              policy_from_logits(d / alpha))


def test_boltzmann_closed_form_and_high_temperature_limit():
    p = boltzmann_policy(np.array([[1.0, 0.0]]), 1.0)
    e = np.e
    np.testing.assert_allclose(p, [[e / (e + 1), 1 / (e + 1)]], rtol=1e-12)

    rng = np.random.default_rng(16)
    d = rng.normal(size=(4, 6))
    p = boltzmann_policy(d, 1e9)
    np.testing.assert_allclose(p, 1.0 / 6.0, atol=1e-8)


def test_boltzmann_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        boltzmann_policy(np.zeros((1, 3)), 0.0)
    with pytest.raises(ValueError):
        boltzmann_policy(np.zeros((1, 3)), -1.0)


# ---------------------------------------------------------------------------
# sampling and argmax
# ---------------------------------------------------------------------------

def test_one_hot_rows_sample_deterministically():
    grid = ActionGrid(2, 4)
    probs = np.zeros((2, 4))
    probs[0, 2] = 1.0
    probs[1, 0] = 1.0
    action, p_joint, idx = sample_action(probs, grid, np.random.default_rng(0))
    assert p_joint == 1.0
    np.testing.assert_array_equal(idx, [2, 0])
    np.testing.assert_array_equal(action, grid.values[[2, 0]])


def test_uniform_rows_have_product_probability():
    grid = ActionGrid(2, 10)
    probs = np.full((2, 10), 0.1)
    rng = np.random.default_rng(1)
    for _ in range(20):
        _, p_joint, _ = sample_action(probs, grid, rng)
        np.testing.assert_allclose(p_joint, 0.01, rtol=1e-12)


def test_sampling_frequencies_match_probabilities():
    rng = np.random.default_rng(2)
    probs = policy_from_logits(rng.normal(size=(1, 6)))
    draws = 100_000
    idx = sample_indices(np.broadcast_to(probs, (draws, 1, 6)), rng)
    counts = np.bincount(idx[:, 0], minlength=6) / draws
    sigma = np.sqrt(probs[0] * (1 - probs[0]) / draws)
    assert np.all(np.abs(counts - probs[0]) <= 3.5 * sigma + 1e-12)


def test_greedy_breaks_ties_toward_lowest_index():
    grid = ActionGrid(1, 3)
    uniform = np.full((1, 3), 1.0 / 3.0)
    np.testing.assert_array_equal(greedy_action(uniform, grid), [-1.0])
    probs = np.array([[0.2, 0.5, 0.3]])
    np.testing.assert_array_equal(greedy_action(probs, grid), [0.0])
    assert greedy_indices(np.array([[0.4, 0.4, 0.2]]))[0] == 0


# ---------------------------------------------------------------------------
# log probabilities
# ---------------------------------------------------------------------------

def test_joint_log_prob_uniform_and_one_hot():
    probs = np.full((2, 10), 0.1)
    np.testing.assert_allclose(joint_log_prob(probs, np.array([3, 7])),
                               np.log(0.01), rtol=1e-12)
    one_hot = np.zeros((1, 4))
    one_hot[0, 1] = 1.0
    assert joint_log_prob(one_hot, np.array([1])) == 0.0


def test_joint_log_prob_matches_direct_product():
    rng = np.random.default_rng(3)
    probs = policy_from_logits(rng.normal(size=(3, 5)))
    idx = rng.integers(0, 5, size=3)
    direct = np.prod([probs[m, idx[m]] for m in range(3)])
    assert abs(np.exp(joint_log_prob(probs, idx)) - direct) < 1e-12


def test_joint_log_prob_rejects_bad_indices():
    probs = np.full((2, 4), 0.25)
    with pytest.raises(IndexError):
        joint_log_prob(probs, np.array([0, 4]))


def test_sampled_probability_equals_exp_log_prob():
    rng = np.random.default_rng(4)
    probs = policy_from_logits(rng.normal(size=(3, 8)))
    grid = ActionGrid(3, 8)
    _, p_joint, idx = sample_action(probs, grid, rng)
    np.testing.assert_allclose(p_joint, np.exp(joint_log_prob(probs, idx)),
                               rtol=1e-12)


# ---------------------------------------------------------------------------
# normalized entropy
# ---------------------------------------------------------------------------

def test_uniform_entropy_is_log_two_for_any_n():
    for n in (2, 5, 20, 100):
        h = normalized_entropy(np.full((1, n), 1.0 / n))
        np.testing.assert_allclose(h, np.log(2.0), atol=1e-12)


def test_one_hot_entropy_is_minus_log_half_n():
    one_hot = np.zeros((1, 20))
    one_hot[0, 7] = 1.0
    np.testing.assert_allclose(normalized_entropy(one_hot), -np.log(10.0),
                               atol=1e-12)


def test_entropy_bounds_hold_for_random_distributions():
    rng = np.random.default_rng(5)
    for n in (2, 7, 31):
        probs = policy_from_logits(rng.normal(size=(200, n)) * 6)
        h = normalized_entropy(probs)
        assert np.all(h <= np.log(2.0) + 1e-12)
        assert np.all(h >= -np.log(n / 2.0) - 1e-12)


def test_gaussian_pmf_matches_reference_entropy_values():
    # raw discrete entropies of the sigma=0.3 reference pmf
    expected = {20: 2.18, 50: 3.09, 100: 3.78}
    raw = {}
    for n, target in expected.items():
        pmf = gaussian_cell_pmf(n)
        raw[n] = -np.sum(pmf * np.log(pmf))
        assert abs(raw[n] - target) <= 0.03
    # the density-normalized values barely move with N
    norm = [raw[n] - np.log(n / 2.0) for n in expected]
    assert max(norm) - min(norm) <= 0.02


def test_normalized_entropy_insensitive_to_grid_resolution():
    values = []
    for n in (10, 20, 50, 100):
        pmf = gaussian_cell_pmf(n)[None, :]
        values.append(float(normalized_entropy(pmf)[0]))
    assert max(values) - min(values) <= 0.05
