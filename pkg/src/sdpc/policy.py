"""Decomposed discrete policies over an M x N action grid.

A policy matrix ``d`` has one row per action dimension and one column per
discrete action.  Rows are turned into independent categorical distributions
either directly (``policy_from_logits``) or by dividing by a temperature
first (``boltzmann_policy``).  Entropies are reported on the density scale of
the underlying [-1, 1] interval so that they are insensitive to the grid
resolution N.

All functions accept matrices of shape ``[..., M, N]`` and vectorize over
leading axes.
"""

from __future__ import annotations

import numpy as np

from . import backend as K


class ActionGrid:
    """Uniform, endpoint-inclusive discretization of [-1, 1] per dimension.

    Grid point n (0-based) sits at -1 + 2n/(N-1); the same grid is shared by
    all M dimensions.
    """

    def __init__(self, action_dim: int, n_bins: int):
        if action_dim < 1:
            raise ValueError("action_dim must be >= 1")
        if n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        self.action_dim = int(action_dim)
        self.n_bins = int(n_bins)
        self.values = -1.0 + 2.0 * np.arange(n_bins, dtype=np.float64) / (n_bins - 1)
        self.values[-1] = 1.0

    def actions(self, indices: np.ndarray) -> np.ndarray:
        """Continuous action components for grid indices of shape [..., M]."""
        return self.values[np.asarray(indices)]

    def nearest_index(self, actions: np.ndarray) -> np.ndarray:
        """Nearest grid index for each component; exact on grid points."""
        a = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
        idx = np.rint((a + 1.0) * (self.n_bins - 1) / 2.0).astype(np.int64)
        return np.clip(idx, 0, self.n_bins - 1)


def _rows(d: np.ndarray) -> np.ndarray:
    d = np.ascontiguousarray(d, dtype=np.float64)
    if d.ndim < 2:
        raise ValueError("expected an [..., M, N] matrix")
    return d


def policy_from_logits(d: np.ndarray) -> np.ndarray:
    """Row-wise softmax of the policy matrix, stabilized by max subtraction."""
    d = _rows(d)
    p, _ = K.softmax_parts(d.reshape(-1, d.shape[-1]))
    return p.reshape(d.shape)


def log_policy_from_logits(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (probs, log probs) of the policy matrix."""
    d = _rows(d)
    p, logp = K.softmax_parts(d.reshape(-1, d.shape[-1]))
    return p.reshape(d.shape), logp.reshape(d.shape)


def boltzmann_policy(d: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise softmax of d / alpha; rows of d are decomposed Q-values."""
    if not alpha > 0.0:
        raise ValueError(f"temperature must be positive, got {alpha}")
    return policy_from_logits(_rows(d) / alpha)


def sample_indices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one column index per row; shape [..., M, N] -> [..., M]."""
    p = np.asarray(probs, dtype=np.float64)
    flat = p.reshape(-1, p.shape[-1])
    cum = np.cumsum(flat, axis=1)
    u = rng.random(flat.shape[0])
    idx = (cum < u[:, None]).sum(axis=1)
    np.clip(idx, 0, p.shape[-1] - 1, out=idx)
    return idx.reshape(p.shape[:-1])


def greedy_indices(probs: np.ndarray) -> np.ndarray:
    """Column argmax per row; ties break toward the lowest index."""
    return np.argmax(np.asarray(probs), axis=-1)


def joint_log_prob(probs: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Sum over dimensions of log prob at the chosen indices."""
    p = np.asarray(probs, dtype=np.float64)
    idx = np.asarray(indices)
    if np.any(idx < 0) or np.any(idx >= p.shape[-1]):
        raise IndexError("action index out of range")
    chosen = np.take_along_axis(p, idx[..., None], axis=-1)[..., 0]
    return np.log(chosen).sum(axis=-1)


def normalized_entropy(probs: np.ndarray) -> np.ndarray:
    """Per-dimension entropy on the density scale: -sum p*log(p*N/2).

    A uniform row gives log 2 (the density entropy of the whole interval); a
    one-hot row gives -log(N/2).  Sum over the last axis for the global value.
    """
    p = np.asarray(probs, dtype=np.float64)
    h = K.entropy_rows(np.ascontiguousarray(p.reshape(-1, p.shape[-1])))
    return h.reshape(p.shape[:-1])


def sample_action(probs: np.ndarray, grid: ActionGrid,
                  rng: np.random.Generator) -> tuple[np.ndarray, float, np.ndarray]:
    """Draw one joint action from an [M, N] distribution.

    Returns (action components, joint probability, grid indices).
    """
    if probs.ndim != 2:
        raise ValueError("sample_action expects a single [M, N] distribution")
    indices = sample_indices(probs, rng)
    p_joint = float(np.exp(joint_log_prob(probs, indices)))
    return grid.actions(indices), p_joint, indices


def greedy_action(probs: np.ndarray, grid: ActionGrid) -> np.ndarray:
    """Per-dimension argmax action of an [M, N] distribution."""
    if probs.ndim != 2:
        raise ValueError("greedy_action expects a single [M, N] distribution")
    return grid.actions(greedy_indices(probs))
