"""Exact tabular machinery: soft value iteration on joint and decomposed MDPs,
and the three executable consistency checks relating them.

Entropies here are raw discrete entropies (-sum p log p), not the density-
normalized variant used by the training code: the identities below hold for
any convention as long as both solvers share it, and the raw form keeps the
algebra free of constant offsets.

The key identity checked by :func:`check_bridge`: for every state s and
dimension m,

    E_{a_m ~ pi_m}[Q_d(s, a_m)] = E_{a ~ pi}[Q(s, a)] + alpha * Hbar_m(s),

where Hbar_m is the summed entropy of the other dimensions' policies at s.
The correction appears only for the first step because later exclusive
entropies are already inside the joint Q's per-step entropy sum; at alpha=0
the expectations match exactly.
"""

from __future__ import annotations

import numpy as np

from .tabular import TabularMdp


def random_mdp(rng: np.random.Generator, num_states: int = 4,
               action_dims: int = 2, actions_per_dim: int = 3,
               gamma: float = 0.9) -> TabularMdp:
    """Random dense MDP with Dirichlet-like transition rows."""
    a = actions_per_dim ** action_dims
    raw = rng.uniform(0.05, 1.0, size=(num_states, a, num_states))
    transitions = raw / raw.sum(axis=2, keepdims=True)
    rewards = rng.uniform(-1.0, 1.0, size=(num_states, a))
    return TabularMdp(transitions, rewards, gamma, action_dims, actions_per_dim)


def random_policies(rng: np.random.Generator, mdp: TabularMdp) -> np.ndarray:
    """Random per-state per-dimension distributions, shape [S, M, N]."""
    raw = rng.uniform(0.05, 1.0,
                      size=(mdp.num_states, mdp.action_dims, mdp.actions_per_dim))
    return raw / raw.sum(axis=2, keepdims=True)


def raw_entropies(pi: np.ndarray) -> np.ndarray:
    """-sum_n p log p per (state, dimension); 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = pi * np.log(pi)
    terms = np.where(pi > 0.0, terms, 0.0)
    return -terms.sum(axis=-1)


def joint_policy_probs(pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """[S, M, N] per-dimension policies -> [S, N^M] joint action probabilities."""
    s, m, _ = pi.shape
    joint = pi[:, 0, :]
    for d in range(1, m):
        joint = (joint[:, :, None] * pi[:, d, None, :]).reshape(s, -1)
    return joint


def joint_soft_q(mdp: TabularMdp, pi: np.ndarray, alpha: float,
                 tol: float = 1e-13, max_iter: int = 100_000,
                 residuals: list | None = None) -> np.ndarray:
    """Fixed point of Q = R + gamma P (E_pi[Q] + alpha H); returns [S, A]."""
    if not 0.0 <= mdp.gamma < 1.0:
        raise ValueError("soft evaluation requires gamma in [0, 1)")
    joint_pi = joint_policy_probs(pi, mdp)
    h = raw_entropies(pi).sum(axis=1)  # [S]
    q = np.zeros_like(mdp.rewards)
    for _ in range(max_iter):
        v = (joint_pi * q).sum(axis=1) + alpha * h
        q_new = mdp.rewards + mdp.gamma * mdp.transitions @ v
        residual = np.abs(q_new - q).max()
        if residuals is not None:
            residuals.append(residual)
        q = q_new
        if residual < tol:
            return q
    raise RuntimeError("joint soft value iteration did not converge")


def _exclusive_probs(pi: np.ndarray, mdp: TabularMdp, m: int) -> np.ndarray:
    """[S, N^(M-1)] probabilities of the other dimensions' joint actions."""
    s = mdp.num_states
    others = [d for d in range(mdp.action_dims) if d != m]
    if not others:
        return np.ones((s, 1))
    excl = pi[:, others[0], :]
    for d in others[1:]:
        excl = (excl[:, :, None] * pi[:, d, None, :]).reshape(s, -1)
    return excl


def _joint_from_parts(mdp: TabularMdp, m: int, own: int, excl: int) -> int:
    """Joint action index from dimension m's index and the flattened rest."""
    n = mdp.actions_per_dim
    digits = []
    rest = excl
    for _ in range(mdp.action_dims - 1):
        digits.append(rest % n)
        rest //= n
    digits.reverse()
    digits.insert(m, own)
    joint = 0
    for d in digits:
        joint = joint * n + d
    return joint


def decomposed_soft_q(mdp: TabularMdp, m: int, pi: np.ndarray, alpha: float,
                      tol: float = 1e-13, max_iter: int = 100_000,
                      residuals: list | None = None) -> np.ndarray:
    """Fixed point of the per-dimension soft evaluation operator; [S, N].

    The dimension-m MDP averages transitions and rewards over the other
    dimensions' ("exclusive") policies; its per-step reward also carries the
    exclusive entropy bonus, while the recursion adds dimension m's own
    entropy.
    """
    if not 0.0 <= mdp.gamma < 1.0:
        raise ValueError("soft evaluation requires gamma in [0, 1)")
    s, n = mdp.num_states, mdp.actions_per_dim
    excl = _exclusive_probs(pi, mdp, m)
    n_excl = excl.shape[1]

    p_m = np.zeros((s, n, s))
    r_m = np.zeros((s, n))
    for own in range(n):
        for e in range(n_excl):
            joint = _joint_from_parts(mdp, m, own, e)
            p_m[:, own, :] += excl[:, e, None] * mdp.transitions[:, joint, :]
            r_m[:, own] += excl[:, e] * mdp.rewards[:, joint]
    h_all = raw_entropies(pi)  # [S, M]
    h_own = h_all[:, m]
    h_excl = h_all.sum(axis=1) - h_own
    r_m += alpha * h_excl[:, None]

    q = np.zeros((s, n))
    for _ in range(max_iter):
        v = (pi[:, m, :] * q).sum(axis=1) + alpha * h_own
        q_new = r_m + mdp.gamma * p_m @ v
        residual = np.abs(q_new - q).max()
        if residuals is not None:
            residuals.append(residual)
        q = q_new
        if residual < tol:
            return q
    raise RuntimeError("decomposed soft value iteration did not converge")


def check_bridge(mdp: TabularMdp, pi: np.ndarray,
                 alpha: float) -> tuple[float, float]:
    """Residuals of the decomposed/joint value identity over all (s, m).

    Returns (corrected, uncorrected): ``corrected`` tests the identity with
    the first-step exclusive-entropy term alpha*Hbar_m(s) on the joint side
    and should vanish for every alpha; ``uncorrected`` drops that term (the
    cheap form actually used for policy improvement) and vanishes only at
    alpha = 0 -- it is reported, not asserted.
    """
    q_joint = joint_soft_q(mdp, pi, alpha)
    joint_pi = joint_policy_probs(pi, mdp)
    rhs_base = (joint_pi * q_joint).sum(axis=1)  # [S]
    h_all = raw_entropies(pi)
    corrected = 0.0
    uncorrected = 0.0
    for m in range(mdp.action_dims):
        q_d = decomposed_soft_q(mdp, m, pi, alpha)
        lhs = (pi[:, m, :] * q_d).sum(axis=1)
        h_excl = h_all.sum(axis=1) - h_all[:, m]
        corrected = max(corrected, np.abs(lhs - rhs_base - alpha * h_excl).max())
        uncorrected = max(uncorrected, np.abs(lhs - rhs_base).max())
    return corrected, uncorrected


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def check_kl_equivalence(q_row: np.ndarray, logits: np.ndarray,
                         alpha: float) -> float:
    """Max |grad KL(pi(logits) || softmax(q/alpha)) - (1/alpha) grad J_pg|.

    J_pg = sum_n pi_n (alpha log pi_n - q_n); both gradients are taken with
    respect to the logits, each from its own analytic formula.
    """
    pi = _softmax(logits)
    log_pi = np.log(pi)
    log_target = q_row / alpha - _logsumexp(q_row / alpha)
    diff = log_pi - log_target
    grad_kl = pi * (diff - (pi * diff).sum())
    f = alpha * log_pi - q_row
    grad_pg = pi * (f - (pi * f).sum())
    return float(np.abs(grad_kl - grad_pg / alpha).max())


def _logsumexp(z: np.ndarray) -> float:
    zmax = z.max()
    return float(zmax + np.log(np.exp(z - zmax).sum()))


def check_variance_limit(q_row: np.ndarray, alpha: float, direction: np.ndarray,
                         scales) -> list[float | None]:
    """Ratio KL / (Var_p(scale * X) / (2 alpha^2)) per perturbation scale.

    p is the Boltzmann distribution of q_row at alpha; perturbing the row by
    scale * X and measuring the KL back to p approaches the weighted variance
    quadratic form as the scale shrinks, so the ratios approach 1.  A
    constant direction shifts every row entry equally, leaving both KL and
    variance at exactly zero; such scales report None (the 0/0 exemption).
    """
    direction = np.asarray(direction, dtype=np.float64)
    if np.ptp(direction) == 0.0:
        # a pure per-row shift: KL and variance both vanish identically
        return [None for _ in scales]
    p = _softmax(q_row / alpha)
    out: list[float | None] = []
    for s in scales:
        x = s * direction
        pd = _softmax((q_row + x) / alpha)
        kl = float((pd * (np.log(pd) - np.log(p))).sum())
        var = float((p * x * x).sum() - (p * x).sum() ** 2)
        out.append(kl / (var / (2.0 * alpha ** 2)))
    return out
