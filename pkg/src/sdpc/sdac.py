"""Soft decomposed actor-critic: policy-gradient training of row softmax policies.

The actor emits an M x N matrix of logits per state.  Its loss scores every
grid action of every dimension with the frozen min-critic at a "swapped"
joint action (the sampled action with one component replaced), weighting by
the policy probability and the entropy bonus:

    J = mean_B (1/M) sum_{m,n} pi_mn * (alpha * log pi_mn - Qmin(s, swap(a, m, n)))

The gradient flows through the pi factors only, which gives the closed form
dJ/dD = pi * (f - E_pi[f]) / (M B) with f = alpha*log pi - q; the critic and
the sampled action are held fixed.
"""

from __future__ import annotations

import numpy as np

from .critic import SoftCriticPair, soft_td_target
from .nn import Adam, Mlp
from .policy import (
    ActionGrid,
    greedy_indices,
    joint_log_prob,
    log_policy_from_logits,
    normalized_entropy,
    policy_from_logits,
    sample_action,
    sample_indices,
)
from .temperature import TemperatureState
from .training import run_training


def swapped_action_inputs(states: np.ndarray, base_actions: np.ndarray,
                          grid: ActionGrid) -> np.ndarray:
    """Critic inputs for every (dimension, grid point) swap of a base action.

    Returns [B, M, N, obs + M]: row (b, m, n) is state b joined with base
    action b whose m-th component is replaced by grid value n.
    """
    B = states.shape[0]
    m, n = grid.action_dim, grid.n_bins
    obs = states.shape[1]
    x = np.empty((B, m, n, obs + m))
    x[..., :obs] = states[:, None, None, :]
    x[..., obs:] = base_actions[:, None, None, :]
    for d in range(m):
        x[:, d, :, obs + d] = grid.values[None, :]
    return x


class SdacAgent:
    kind = "sdac"

    def __init__(self, obs_dim: int, action_dim: int, cfg,
                 rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.grid = ActionGrid(action_dim, cfg.n_bins)
        widths = (obs_dim, *cfg.hidden_dims, action_dim * cfg.n_bins)
        self.actor = Mlp(widths, rng)
        self.actor_opt = Adam(self.actor.n_params, cfg.lr_policy)
        self.critics = SoftCriticPair(
            obs_dim, action_dim, cfg.hidden_dims, cfg.tau, cfg.lr_critic, rng
        )
        self.temperature = TemperatureState(
            cfg.resolved_target_entropy(), cfg.lr_alpha,
            cfg.log_alpha_min, cfg.log_alpha_max, cfg.init_log_alpha,
        )
        self.gamma = cfg.gamma
        self._cfg = cfg

    # -- policy ------------------------------------------------------------

    @property
    def policy_net(self) -> Mlp:
        return self.actor

    def policy_matrix(self, states: np.ndarray) -> np.ndarray:
        m, n = self.grid.action_dim, self.grid.n_bins
        return self.actor.forward(states).reshape(-1, m, n)

    def policy_probs(self, states: np.ndarray) -> np.ndarray:
        return policy_from_logits(self.policy_matrix(states))

    def target_probs(self, states: np.ndarray) -> np.ndarray:
        """Distribution used when sampling TD bootstrap actions."""
        return self.policy_probs(states)

    def state_entropy(self, state: np.ndarray) -> float:
        probs = self.policy_probs(np.asarray(state)[None, :])
        return float(normalized_entropy(probs).mean())

    def act(self, state, explore: bool, rng: np.random.Generator | None):
        probs = self.policy_probs(np.asarray(state, dtype=np.float64)[None, :])[0]
        if explore:
            return sample_action(probs, self.grid, rng)
        indices = greedy_indices(probs)
        p_joint = float(np.exp(joint_log_prob(probs, indices)))
        return self.grid.actions(indices), p_joint, indices

    # -- updates -----------------------------------------------------------

    def policy_loss_and_grads(self, states: np.ndarray,
                              base_indices: np.ndarray,
                              ) -> tuple[float, np.ndarray]:
        """Loss and actor-parameter gradients with the swap actions held fixed."""
        B = states.shape[0]
        m, n = self.grid.action_dim, self.grid.n_bins
        alpha = self.temperature.alpha
        d_flat, tape = self.actor.forward_tape(states)
        pi, log_pi = log_policy_from_logits(d_flat.reshape(B, m, n))
        base_actions = self.grid.actions(base_indices)
        x = swapped_action_inputs(states, base_actions, self.grid)
        q = self.critics.q_min(x.reshape(B * m * n, -1)).reshape(B, m, n)
        f = alpha * log_pi - q
        loss = float((pi * f).sum(axis=(1, 2)).mean() / m)
        f_mean = (pi * f).sum(axis=2, keepdims=True)
        d_grad = pi * (f - f_mean) / (m * B)
        grads = self.actor.backward(tape, d_grad.reshape(B, m * n))
        return loss, grads

    def policy_update(self, states: np.ndarray, rng: np.random.Generator) -> float:
        base_indices = sample_indices(self.policy_probs(states), rng)
        loss, grads = self.policy_loss_and_grads(states, base_indices)
        self.actor_opt.step(self.actor.params, grads)
        return loss

    def temperature_update(self, states: np.ndarray) -> tuple[float, float]:
        entropy = float(normalized_entropy(self.policy_probs(states)).mean())
        loss = self.temperature.update(entropy)
        return loss, entropy

    def train_step(self, buffer, rng: np.random.Generator) -> dict:
        cfg = self._cfg
        batch = buffer.sample_batch(cfg.batch_size, rng)
        y = soft_td_target(
            self.critics, batch, self.target_probs(batch.next_state),
            self.grid, self.temperature.alpha, self.gamma, rng,
        )
        x = np.concatenate([batch.state, batch.action], axis=1)
        c1, c2 = self.critics.update(x, y, np.ones(cfg.batch_size))
        policy_loss = self.policy_update(batch.state, rng)
        alpha_loss, entropy = self.temperature_update(batch.state)
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
