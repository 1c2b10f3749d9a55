"""Soft decomposed policy-critic reinforcement learning.

Continuous control with per-dimension discretized policies evaluated by
shared continuous critics.  Two training algorithms are provided: SDAC
(policy gradients on decomposed softmax actors) and SDCQ (supervised
regression of decomposed advantages with Boltzmann exploration).
"""

from .config import RunConfig
from .envs import make_env
from .policy import ActionGrid
from .sdac import SdacAgent
from .sdcq import SdcqAgent

__all__ = ["ActionGrid", "RunConfig", "SdacAgent", "SdcqAgent", "make_env"]
__version__ = "0.1.0"
