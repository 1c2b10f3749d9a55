"""Environment tests: dynamics oracles, determinism, bounds, JSON MDPs."""

import numpy as np
import pytest

from sdpc.envs import PointMass, Pendulum, TabularEnv, make_env
from sdpc.tabular import chain_mdp, load_mdp_json, save_mdp_json


# ---------------------------------------------------------------------------
# pendulum
# ---------------------------------------------------------------------------

def test_pendulum_reset_is_deterministic_per_seed():
    env = make_env("pendulum")
    s1 = env.reset(seed=0)
    s2 = env.reset(seed=0)
    np.testing.assert_array_equal(s1, s2)
    s3 = env.reset(seed=1)
    assert not np.array_equal(s1, s3)


def test_pendulum_upright_equilibrium():
    env = Pendulum()
    env.reset(seed=0)
    env._th = 0.0
    env._thdot = 0.0
    r = env.step([0.0])
    assert r.reward == 0.0
    np.testing.assert_allclose(r.next_state, [1.0, 0.0, 0.0], atol=1e-15)


def test_pendulum_hanging_symmetry_and_reward():
    # evaluate the dynamics by hand: at th=pi, sin(th)=0 so thdot stays 0,
    # and the cost is th_wrapped^2 = pi^2 (computed before integration)
    env = Pendulum()
    env.reset(seed=0)
    env._th = np.pi
    env._thdot = 0.0
    r = env.step([0.0])
    np.testing.assert_allclose(r.reward, -np.pi ** 2, rtol=1e-12)
    assert abs(r.next_state[2]) < 1e-12


def test_pendulum_one_step_dynamics_oracle():
    env = Pendulum()
    env.reset(seed=3)
    th, thdot = env._th, env._thdot
    u = 0.37
    r = env.step([u])
    torque = 2.0 * u
    new_thdot = thdot + (15.0 * np.sin(th) + 3.0 * torque) * 0.05
    new_thdot = np.clip(new_thdot, -8.0, 8.0)
    new_th = th + new_thdot * 0.05
    wrapped = (th + np.pi) % (2 * np.pi) - np.pi
    expected_reward = -(wrapped ** 2 + 0.1 * thdot ** 2 + 0.001 * torque ** 2)
    np.testing.assert_allclose(
        r.next_state, [np.cos(new_th), np.sin(new_th), new_thdot], rtol=1e-12)
    np.testing.assert_allclose(r.reward, expected_reward, rtol=1e-12)


def test_pendulum_reward_bounds_over_random_rollout():
    env = make_env("pendulum")
    rng = np.random.default_rng(7)
    env.reset(seed=7)
    lo = -(np.pi ** 2 + 0.1 * 64.0 + 0.001 * 4.0)
    for _ in range(400):
        r = env.step(rng.uniform(-1, 1, size=1))
        assert lo <= r.reward <= 0.0
        if r.truncated:
            env.reset()


def test_pendulum_truncates_at_200_steps():
    env = make_env("pendulum")
    env.reset(seed=0)
    for t in range(1, 201):
        r = env.step([0.0])
        assert r.terminal is False
        assert r.truncated is (t == 200)


def test_trajectories_bit_reproducible():
    actions = np.random.default_rng(9).uniform(-1, 1, size=(50, 1))

    def rollout():
        env = make_env("pendulum")
        env.reset(seed=5)
        return [env.step(a).next_state for a in actions]

    for a, b in zip(rollout(), rollout()):
        np.testing.assert_array_equal(a, b)


def test_nan_action_rejected():
    env = make_env("pendulum")
    env.reset(seed=0)
    with pytest.raises(ValueError):
        env.step([np.nan])


# ---------------------------------------------------------------------------
# point mass
# ---------------------------------------------------------------------------

def test_pointmass_state_dimension():
    env = make_env("pointmass-3")
    assert env.spec.state_dim == 6
    assert env.reset(seed=0).shape == (6,)


def test_pointmass_zero_action_integrator_identity():
    env = PointMass(2)
    env.reset(seed=1)  # starts at v = 0
    x0 = env._x.copy()
    r = env.step(np.zeros(2))
    # position advances by v*dt (= 0 from rest) and velocity stays 0
    np.testing.assert_array_equal(r.next_state[:2], x0)
    np.testing.assert_array_equal(r.next_state[2:], np.zeros(2))


def test_pointmass_dynamics_oracle():
    env = PointMass(2)
    env.reset(seed=2)
    env._v = np.array([0.3, -0.2])
    x0, v0 = env._x.copy(), env._v.copy()
    a = np.array([0.5, -1.0])
    r = env.step(a)
    np.testing.assert_allclose(r.next_state[:2], x0 + v0 * 0.1, rtol=1e-14)
    np.testing.assert_allclose(r.next_state[2:], v0 + a * 0.1 - 0.1 * v0,
                               rtol=1e-14)
    np.testing.assert_allclose(
        r.reward, -np.sum(x0 ** 2) - 0.01 * np.sum(a ** 2), rtol=1e-14)


def test_pointmass_truncates_at_150():
    env = make_env("pointmass-2")
    env.reset(seed=0)
    steps = 0
    while True:
        r = env.step(np.zeros(2))
        steps += 1
        if r.truncated:
            break
    assert steps == 150


# ---------------------------------------------------------------------------
# bandit
# ---------------------------------------------------------------------------

def test_bandit_terminates_every_step_with_squared_reward():
    env = make_env("bandit")
    env.reset(seed=0)
    r = env.step([0.6])
    assert r.terminal and not r.truncated
    np.testing.assert_allclose(r.reward, 0.36, rtol=1e-14)
    env.reset()
    assert env.step([-1.0]).reward == 1.0


# ---------------------------------------------------------------------------
# tabular
# ---------------------------------------------------------------------------

def test_chain_mdp_fixed_start_state():
    env = make_env("chain-mdp")
    for seed in (0, 1, 99):
        s = env.reset(seed=seed)
        assert s[0] == 1.0 and s.sum() == 1.0


def test_chain_mdp_tables_are_valid_and_fixed():
    a = chain_mdp()
    b = chain_mdp()
    np.testing.assert_array_equal(a.transitions, b.transitions)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    np.testing.assert_allclose(a.transitions.sum(axis=2), 1.0, atol=1e-12)


def test_tabular_env_maps_actions_to_nearest_grid_point():
    env = TabularEnv(chain_mdp())
    env.reset(seed=0)
    # continuous 0.9 rounds to grid index 2 (value +1), -0.9 to index 0
    idx = np.clip(np.rint((np.array([0.9, -0.9]) + 1) * 1.0), 0, 2)
    np.testing.assert_array_equal(idx, [2, 0])
    r = env.step([0.9, -0.9])
    assert r.next_state.shape == (5,)


def test_tabular_env_episode_and_termination(tmp_path):
    mdp = chain_mdp()
    # make state 4 absorbing-terminal via the JSON round trip
    path = tmp_path / "chain.json"
    save_mdp_json(mdp, path, max_episode_steps=10)
    import json
    doc = json.loads(path.read_text())
    doc["terminal_states"] = [4]
    path.write_text(json.dumps(doc))
    env = make_env(str(path))
    assert env.spec.has_termination
    rng = np.random.default_rng(0)
    env.reset(seed=0)
    steps = 0
    while True:
        r = env.step(rng.uniform(-1, 1, size=2))
        steps += 1
        if r.terminal:
            assert r.next_state[4] == 1.0
            break
        if r.truncated:
            break
    assert steps <= 10


def test_mdp_json_roundtrip(tmp_path):
    mdp = chain_mdp()
    path = tmp_path / "mdp.json"
    save_mdp_json(mdp, path, max_episode_steps=17)
    loaded, max_steps = load_mdp_json(path)
    assert max_steps == 17
    np.testing.assert_array_equal(loaded.transitions, mdp.transitions)
    np.testing.assert_array_equal(loaded.rewards, mdp.rewards)
    assert loaded.action_dims == 2 and loaded.actions_per_dim == 3


def test_episodes_never_exceed_limit():
    for env_id in ("pendulum", "pointmass-2", "chain-mdp", "bandit"):
        env = make_env(env_id)
        env.reset(seed=3)
        rng = np.random.default_rng(3)
        count = 0
        for _ in range(env.spec.max_episode_steps + 5):
            r = env.step(rng.uniform(-1, 1, size=env.spec.action_dim))
            count += 1
            if r.terminal or r.truncated:
                break
        assert count <= env.spec.max_episode_steps


def test_make_env_rejects_unknown_ids():
    with pytest.raises(ValueError):
        make_env("walker")
    with pytest.raises(ValueError):
        make_env("pointmass-x")
    with pytest.raises(ValueError):
        make_env("pointmass-0")
