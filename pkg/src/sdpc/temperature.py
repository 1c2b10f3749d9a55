"""Learnable entropy temperature with clipped log parameterization.

The temperature alpha = exp(log_alpha) is trained so that the mean
per-dimension policy entropy tracks a target; the gradient is taken with
respect to log_alpha (keeping alpha positive) and log_alpha is clipped back
into its bounds after every step.  A slowly relaxed copy alpha' is kept for
algorithms that sample target actions from a stabilized policy.
"""

from __future__ import annotations

import numpy as np

from .nn import Adam


class TemperatureState:
    def __init__(self, target_entropy: float, lr: float,
                 log_alpha_min: float = -10.0, log_alpha_max: float = 2.0,
                 init_log_alpha: float = 0.0):
        if log_alpha_min >= log_alpha_max:
            raise ValueError("log_alpha bounds are inverted")
        self.target_entropy = float(target_entropy)
        self.log_alpha_min = float(log_alpha_min)
        self.log_alpha_max = float(log_alpha_max)
        self._log_alpha = np.array(
            [np.clip(init_log_alpha, log_alpha_min, log_alpha_max)]
        )
        self.opt = Adam(1, lr)
        self.alpha_target = float(np.exp(self._log_alpha[0]))

    @property
    def log_alpha(self) -> float:
        return float(self._log_alpha[0])

    @property
    def alpha(self) -> float:
        return float(np.exp(self._log_alpha[0]))

    def loss(self, mean_entropy: float) -> float:
        """alpha * (H - H_target): descending in log_alpha raises alpha when
        entropy is below target and lowers it when above."""
        return self.alpha * (mean_entropy - self.target_entropy)

    def update(self, mean_entropy: float) -> float:
        """One optimizer step on the temperature loss; returns the loss."""
        value = self.loss(mean_entropy)
        grad = np.array([value])  # d/dlog_alpha of alpha*(H - H_target)
        self.opt.step(self._log_alpha, grad)
        self._log_alpha[0] = np.clip(
            self._log_alpha[0], self.log_alpha_min, self.log_alpha_max
        )
        return value

    def relax_target(self, tau: float) -> None:
        """alpha' <- tau * alpha + (1 - tau) * alpha'."""
        self.alpha_target = tau * self.alpha + (1.0 - tau) * self.alpha_target
