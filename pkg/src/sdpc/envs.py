"""Built-in desk-scale control environments.

All environments expose the same small interface: ``spec`` (an EnvSpec),
``reset(seed=None) -> state`` and ``step(action) -> StepResult``.  Actions are
vectors in [-1, 1]^M and are clipped to that range.  Episodes end either by
true termination (``terminal``) or by hitting the step limit (``truncated``);
the two are kept distinct because TD targets bootstrap through truncation but
not through termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tabular import TabularMdp, chain_mdp, load_mdp_json


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_dim: int
    max_episode_steps: int
    has_termination: bool


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool


def _clean_action(action, action_dim: int) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (action_dim,):
        raise ValueError(f"expected action of shape ({action_dim},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("action contains NaN or infinity")
    return np.clip(a, -1.0, 1.0)


class Pendulum:
    """Torque-limited swing-up.

    State is (cos th, sin th, thdot); the single action u in [-1, 1] applies
    torque 2u.  Semi-implicit Euler with dt=0.05, gravity 10, unit mass and
    length, angular velocity clipped to +-8.  Cost is computed on the state
    where the torque is applied: th_wrapped^2 + 0.1 thdot^2 + 0.001 (2u)^2.
    Episodes run 200 steps with no termination.
    """

    spec = EnvSpec(state_dim=3, action_dim=1, max_episode_steps=200,
                   has_termination=False)

    _G = 10.0
    _DT = 0.05
    _MAX_SPEED = 8.0
    _MAX_TORQUE = 2.0

    def __init__(self):
        self._rng = np.random.default_rng(0)
        self._th = 0.0
        self._thdot = 0.0
        self._steps = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._th = self._rng.uniform(-np.pi, np.pi)
        self._thdot = self._rng.uniform(-1.0, 1.0)
        self._steps = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self._th), np.sin(self._th), self._thdot])

    @staticmethod
    def _wrap(angle: float) -> float:
        return (angle + np.pi) % (2.0 * np.pi) - np.pi

    def step(self, action) -> StepResult:
        u = _clean_action(action, 1)[0]
        torque = self._MAX_TORQUE * u
        cost = (
            self._wrap(self._th) ** 2
            + 0.1 * self._thdot ** 2
            + 0.001 * torque ** 2
        )
        thdot = self._thdot + (
            3.0 * self._G / 2.0 * np.sin(self._th) + 3.0 * torque
        ) * self._DT
        thdot = min(max(thdot, -self._MAX_SPEED), self._MAX_SPEED)
        self._th = self._th + thdot * self._DT
        self._thdot = thdot
        self._steps += 1
        truncated = self._steps >= self.spec.max_episode_steps
        return StepResult(self._obs(), -float(cost), False, truncated)


class PointMass:
    """M-dimensional double integrator with velocity damping.

    State is (x, v) in R^{2M}.  Updates: x <- x + v*dt, then
    v <- v + a*dt - 0.1*v, with dt = 0.1.  Reward is -|x|^2 - 0.01|a|^2 on
    the current position.  Episodes start at x ~ U[-1,1]^M, v = 0 and run
    150 steps with no termination.
    """

    _DT = 0.1
    _DAMPING = 0.1

    def __init__(self, action_dim: int):
        if action_dim < 1:
            raise ValueError("action_dim must be >= 1")
        self.spec = EnvSpec(state_dim=2 * action_dim, action_dim=action_dim,
                            max_episode_steps=150, has_termination=False)
        self._rng = np.random.default_rng(0)
        self._x = np.zeros(action_dim)
        self._v = np.zeros(action_dim)
        self._steps = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        m = self.spec.action_dim
        self._x = self._rng.uniform(-1.0, 1.0, size=m)
        self._v = np.zeros(m)
        self._steps = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.concatenate([self._x, self._v])

    def step(self, action) -> StepResult:
        a = _clean_action(action, self.spec.action_dim)
        reward = -float(np.sum(self._x ** 2)) - 0.01 * float(np.sum(a ** 2))
        self._x = self._x + self._v * self._DT
        self._v = self._v + a * self._DT - self._DAMPING * self._v
        self._steps += 1
        truncated = self._steps >= self.spec.max_episode_steps
        return StepResult(self._obs(), reward, False, truncated)


class TwoArmBandit:
    """Stationary one-step continuous bandit with two symmetric optima.

    A single constant state, one action dimension, reward u^2 (maximized at
    u = -1 and u = +1).  Every step terminates the episode, so value targets
    reduce to the immediate reward; useful for studying exploration and
    temperature regulation in isolation.
    """

    spec = EnvSpec(state_dim=1, action_dim=1, max_episode_steps=1,
                   has_termination=True)

    def __init__(self):
        self._rng = np.random.default_rng(0)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        return np.zeros(1)

    def step(self, action) -> StepResult:
        u = _clean_action(action, 1)[0]
        return StepResult(np.zeros(1), float(u * u), True, False)


class TabularEnv:
    """Episodic wrapper around a TabularMdp.

    States are presented one-hot.  Each continuous action component is mapped
    to the nearest point of the MDP's own uniform grid over [-1, 1].
    """

    def __init__(self, mdp: TabularMdp, max_episode_steps: int = 40):
        self.mdp = mdp
        self.spec = EnvSpec(
            state_dim=mdp.num_states,
            action_dim=mdp.action_dims,
            max_episode_steps=max_episode_steps,
            has_termination=bool(mdp.terminal_states),
        )
        n = mdp.actions_per_dim
        self._grid = -1.0 + 2.0 * np.arange(n) / (n - 1)
        self._rng = np.random.default_rng(0)
        self._state = mdp.initial_state
        self._steps = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._state = self.mdp.initial_state
        self._steps = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        one_hot = np.zeros(self.mdp.num_states)
        one_hot[self._state] = 1.0
        return one_hot

    def step(self, action) -> StepResult:
        a = _clean_action(action, self.spec.action_dim)
        dim_idx = np.clip(
            np.rint((a + 1.0) * (self.mdp.actions_per_dim - 1) / 2.0).astype(np.int64),
            0, self.mdp.actions_per_dim - 1,
        )
        joint = self.mdp.joint_index(dim_idx)
        reward = float(self.mdp.rewards[self._state, joint])
        probs = self.mdp.transitions[self._state, joint]
        self._state = int(self._rng.choice(self.mdp.num_states, p=probs))
        self._steps += 1
        terminal = self._state in self.mdp.terminal_states
        truncated = not terminal and self._steps >= self.spec.max_episode_steps
        return StepResult(self._obs(), reward, terminal, truncated)


def make_env(env_id: str):
    """Build an environment from its string id.

    Known ids: ``pendulum``, ``pointmass-<M>``, ``chain-mdp``, ``bandit``, or
    a path to a tabular MDP JSON file (anything ending in ``.json``).
    """
    if env_id == "pendulum":
        return Pendulum()
    if env_id == "chain-mdp":
        return TabularEnv(chain_mdp())
    if env_id == "bandit":
        return TwoArmBandit()
    if env_id.startswith("pointmass-"):
        try:
            m = int(env_id.split("-", 1)[1])
        except ValueError:
            raise ValueError(f"bad pointmass id {env_id!r}; expected pointmass-<M>")
        return PointMass(m)
    if env_id.endswith(".json"):
        mdp, max_steps = load_mdp_json(env_id)
        return TabularEnv(mdp, max_episode_steps=max_steps)
    raise ValueError(
        f"unknown env id {env_id!r}; expected pendulum, pointmass-<M>, "
        f"chain-mdp, bandit, or a .json tabular MDP path"
    )
