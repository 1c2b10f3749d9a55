"""Soft decomposed-critic Q: supervised regression of decomposed advantages.

The decomposed network emits an M x N matrix of advantage-like values whose
rows, divided by the adaptive temperature, define Boltzmann exploration
policies.  Each row is regressed onto the centered min-critic values of the
swapped joint actions:

    target_mn = q_mn - sum_n' pi_mn' * q_mn',   q = Qmin(s, swap(a, m, n))
    J = mean_B (1/M) sum_{m,n} (d_mn - target_mn)^2

Value targets are three-step with the slow target temperature alpha', and
minibatch gradients are weighted by normalized importance ratios of the two
follow-up steps.  No target copy of the decomposed network is kept.
"""

from __future__ import annotations

import numpy as np

from .critic import SoftCriticPair, multistep_td_target
from .nn import Adam, Mlp
from .policy import (
    ActionGrid,
    boltzmann_policy,
    greedy_indices,
    joint_log_prob,
    normalized_entropy,
    sample_action,
    sample_indices,
)
from .replay import WindowBatch
from .sdac import swapped_action_inputs
from .temperature import TemperatureState
from .training import run_training


class SdcqAgent:
    kind = "sdcq"

    def __init__(self, obs_dim: int, action_dim: int, cfg,
                 rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.grid = ActionGrid(action_dim, cfg.n_bins)
        widths = (obs_dim, *cfg.hidden_dims, action_dim * cfg.n_bins)
        self.qd = Mlp(widths, rng)
        self.qd_opt = Adam(self.qd.n_params, cfg.lr_policy)
        self.critics = SoftCriticPair(
            obs_dim, action_dim, cfg.hidden_dims, cfg.tau, cfg.lr_critic, rng
        )
        self.temperature = TemperatureState(
            cfg.resolved_target_entropy(), cfg.lr_alpha,
            cfg.log_alpha_min, cfg.log_alpha_max, cfg.init_log_alpha,
        )
        self.gamma = cfg.gamma
        self.multistep = bool(cfg.multistep)
        self.importance_sampling = bool(cfg.importance_sampling)
        self.importance_direction = cfg.importance_direction
        self.importance_sigma = float(cfg.importance_sigma)
        self.use_target_alpha = bool(cfg.use_target_alpha)
        self._cfg = cfg

    # -- policy ------------------------------------------------------------

    @property
    def policy_net(self) -> Mlp:
        return self.qd

    def policy_matrix(self, states: np.ndarray) -> np.ndarray:
        m, n = self.grid.action_dim, self.grid.n_bins
        return self.qd.forward(states).reshape(-1, m, n)

    def policy_probs(self, states: np.ndarray,
                     alpha: float | None = None) -> np.ndarray:
        """Boltzmann policies of the decomposed values at the given temperature."""
        if alpha is None:
            alpha = self.temperature.alpha
        return boltzmann_policy(self.policy_matrix(states), alpha)

    def target_probs(self, states: np.ndarray) -> np.ndarray:
        """Target policy: Boltzmann at the slow temperature alpha'."""
        return self.policy_probs(states, alpha=self.temperature.alpha_target)

    def state_entropy(self, state: np.ndarray) -> float:
        probs = self.policy_probs(np.asarray(state)[None, :])
        return float(normalized_entropy(probs).mean())

    def act(self, state, explore: bool, rng: np.random.Generator | None):
        d = self.policy_matrix(np.asarray(state, dtype=np.float64)[None, :])[0]
        probs = boltzmann_policy(d, self.temperature.alpha)
        if explore:
            return sample_action(probs, self.grid, rng)
        indices = greedy_indices(d)
        p_joint = float(np.exp(joint_log_prob(probs, indices)))
        return self.grid.actions(indices), p_joint, indices

    # -- updates -----------------------------------------------------------

    def policy_loss_and_grads(self, states: np.ndarray,
                              base_indices: np.ndarray,
                              ) -> tuple[float, np.ndarray]:
        """Regression loss and gradients with swap actions and targets fixed."""
        B = states.shape[0]
        m, n = self.grid.action_dim, self.grid.n_bins
        d_flat, tape = self.qd.forward_tape(states)
        d = d_flat.reshape(B, m, n)
        pi = boltzmann_policy(d, self.temperature.alpha)
        base_actions = self.grid.actions(base_indices)
        x = swapped_action_inputs(states, base_actions, self.grid)
        q = self.critics.q_min(x.reshape(B * m * n, -1)).reshape(B, m, n)
        target = q - (pi * q).sum(axis=2, keepdims=True)
        err = d - target
        loss = float((err * err).sum(axis=(1, 2)).mean() / m)
        d_grad = 2.0 * err / (m * B)
        grads = self.qd.backward(tape, d_grad.reshape(B, m * n))
        return loss, grads

    def policy_update(self, states: np.ndarray, rng: np.random.Generator) -> float:
        base_indices = sample_indices(self.policy_probs(states), rng)
        loss, grads = self.policy_loss_and_grads(states, base_indices)
        self.qd_opt.step(self.qd.params, grads)
        return loss

    def temperature_update(self, states: np.ndarray) -> tuple[float, float]:
        entropy = float(normalized_entropy(self.policy_probs(states)).mean())
        loss = self.temperature.update(entropy)
        return loss, entropy

    def importance_weights(self, windows: WindowBatch) -> np.ndarray:
        """Per-window products of normalized follow-up importance ratios.

        Raw ratio per follow-up step: stored behavior probability over the
        current target-temperature policy probability (flipped under the
        ``new-over-old`` direction).  Log ratios are z-scored over the
        minibatch, clipped to [-1, 1], scaled by sigma and exponentiated;
        missing steps contribute a factor of one, as does a z-score-degenerate
        batch.
        """
        B, W = windows.p_old.shape
        if W < 2:
            return np.ones(B)
        follow = windows.valid[:, 1:]
        if not follow.any():
            return np.ones(B)
        states = windows.state[:, 1:].reshape(B * (W - 1), -1)
        probs = self.target_probs(states).reshape(
            B, W - 1, self.grid.action_dim, self.grid.n_bins
        )
        log_pi = joint_log_prob(probs, windows.indices[:, 1:])
        with np.errstate(divide="ignore"):
            log_i = np.log(windows.p_old[:, 1:]) - log_pi
        if self.importance_direction == "new-over-old":
            log_i = -log_i
        vals = log_i[follow]
        std = vals.std()
        if std < 1e-8:
            return np.ones(B)
        z = np.clip((log_i - vals.mean()) / std, -1.0, 1.0)
        factors = np.exp(self.importance_sigma * z)
        factors = np.where(follow, factors, 1.0)
        return factors.prod(axis=1)

    def train_step(self, buffer, rng: np.random.Generator) -> dict:
        cfg = self._cfg
        width = 3 if self.multistep else 1
        windows = buffer.sample_windows(cfg.batch_size, rng, width=width)
        if self.importance_sampling:
            weights = self.importance_weights(windows)
        else:
            weights = np.ones(cfg.batch_size)
        y = multistep_td_target(
            self.critics, windows, self.target_probs, self.grid,
            self.temperature.alpha_target, self.gamma, rng,
        )
        x = np.concatenate([windows.state[:, 0], windows.action[:, 0]], axis=1)
        c1, c2 = self.critics.update(x, y, weights)
        policy_loss = self.policy_update(windows.state[:, 0], rng)
        alpha_loss, entropy = self.temperature_update(windows.state[:, 0])
        # with the target temperature disabled, alpha' just mirrors alpha
        self.temperature.relax_target(
            self.critics.tau if self.use_target_alpha else 1.0
        )
        self.critics.soft_update()
        return {
            "critic_loss": 0.5 * (c1 + c2),
            "policy_loss": policy_loss,
            "alpha_loss": alpha_loss,
            "entropy": entropy,
            "alpha": self.temperature.alpha,
        }

    def train(self, env, cfg, rng: np.random.Generator, checkpoint_fn=None,
              stop_fn=None):
        return run_training(self, env, cfg, rng, checkpoint_fn, stop_fn)
