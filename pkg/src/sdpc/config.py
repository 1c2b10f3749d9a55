"""Run configuration with validated, table-driven defaults.

Defaults follow the standard hyperparameter set for this family of
algorithms: N=20 grid points, gamma=0.99, tau=5e-3, batch 256, learning
rates 1e-3 (networks) and 3e-4 (temperature), log-temperature bounds
[-10, 2].  The target entropy default depends on the algorithm (-1 for
sdac, 0 for sdcq) and can be overridden.  The replay capacity defaults to
1e6; a tiny on-policy-like buffer is configurable as well.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

ALGORITHMS = ("sdac", "sdcq")
# numerator convention of the off-policy ratio: behavior probability over the
# current target-policy probability, or the reverse
IMPORTANCE_DIRECTIONS = ("old-over-new", "new-over-old")

_ALGO_TARGET_ENTROPY = {"sdac": -1.0, "sdcq": 0.0}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    algo: str = "sdac"
    env: str = "pendulum"
    seed: int = 0
    n_bins: int = 20
    target_entropy: float | None = None  # resolved per algorithm when None
    gamma: float = 0.99
    tau: float = 5e-3
    lr_policy: float = 1e-3
    lr_critic: float = 1e-3
    lr_alpha: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    total_steps: int = 30_000
    eval_every: int = 1000
    eval_episodes: int = 5
    warmup_steps: int = 1000
    hidden_dims: tuple[int, ...] = (64, 64)
    multistep: bool = True
    importance_sampling: bool = True
    importance_direction: str = "old-over-new"
    importance_sigma: float = 2.0
    use_target_alpha: bool = True
    log_alpha_min: float = -10.0
    log_alpha_max: float = 2.0
    init_log_alpha: float = 0.0
    checkpoint_every: int = 5000

    def resolved_target_entropy(self) -> float:
        if self.target_entropy is None:
            return _ALGO_TARGET_ENTROPY[self.algo]
        return float(self.target_entropy)

    def validate(self) -> "RunConfig":
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"algo: unknown algorithm {self.algo!r}")
        if not self.env:
            raise ConfigError("env: an environment id is required")
        if self.n_bins < 2:
            raise ConfigError("n_bins: need at least 2 grid points per dimension")
        for name in ("lr_policy", "lr_critic", "lr_alpha"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name}: learning rates must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma: discount must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau: soft update rate must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size: must be >= 1")
        if self.buffer_capacity < self.batch_size:
            raise ConfigError("buffer_capacity: must be >= batch_size")
        if self.total_steps < 0:
            raise ConfigError("total_steps: must be >= 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every: must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes: must be >= 1")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps: must be >= 0")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden_dims: need positive layer widths")
        if self.importance_direction not in IMPORTANCE_DIRECTIONS:
            raise ConfigError(
                f"importance_direction: expected one of {IMPORTANCE_DIRECTIONS}"
            )
        if self.importance_sigma <= 0.0:
            raise ConfigError("importance_sigma: must be positive")
        if self.log_alpha_min >= self.log_alpha_max:
            raise ConfigError("log_alpha_min: bounds are inverted")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every: must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown configuration field")
        kwargs = dict(d)
        if "hidden_dims" in kwargs and kwargs["hidden_dims"] is not None:
            kwargs["hidden_dims"] = tuple(int(h) for h in kwargs["hidden_dims"])
        return cls(**kwargs)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return RunConfig.from_dict(json.load(f))


def save_config(cfg: RunConfig, path) -> None:
    doc = cfg.to_dict()
    doc["target_entropy"] = cfg.resolved_target_entropy()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
