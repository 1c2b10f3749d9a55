"""Minimal reverse-mode MLP engine: networks, gradient tapes, Adam, checkpoints.

Networks are rectified-linear MLPs with an identity output layer, stored as a
single flat float64 parameter vector (see :mod:`sdpc.backend` for the layout).
``forward_tape`` records the hidden activations needed by ``backward``; a tape
is single-use.  All arithmetic is float64.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from . import backend as K


class GradTape:
    """Recorded forward intermediates for one batch; consumed by backward."""

    __slots__ = ("x", "acts", "consumed")

    def __init__(self, x: np.ndarray, acts: np.ndarray):
        self.x = x
        self.acts = acts
        self.consumed = False


class Mlp:
    """Fully connected network with ReLU hidden layers and linear output.

    Weights are initialized uniformly in +-1/sqrt(fan_in); biases start at
    zero.  Pass ``rng=None`` for an all-zero network.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator | None = None):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"invalid layer widths {widths!r}")
        self.widths = widths
        self._widths_arr = np.asarray(widths, dtype=np.int64)
        n = sum((widths[i] + 1) * widths[i + 1] for i in range(len(widths) - 1))
        self.params = np.zeros(n, dtype=np.float64)
        if rng is not None:
            off = 0
            for i in range(len(widths) - 1):
                nin, nout = widths[i], widths[i + 1]
                scale = 1.0 / np.sqrt(nin)
                self.params[off:off + nin * nout] = rng.uniform(
                    -scale, scale, size=nin * nout
                )
                off += nin * nout + nout  # biases stay zero

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"expected a [B x {self.in_dim}] batch, got shape {x.shape}")
        if x.shape[1] != self.in_dim:
            raise ValueError(
                f"input width {x.shape[1]} does not match network input width {self.in_dim}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        _, out = K.mlp_forward(self.params, self._widths_arr, x)
        return out

    def forward_tape(self, x: np.ndarray) -> tuple[np.ndarray, GradTape]:
        x = self._check_input(x)
        acts, out = K.mlp_forward(self.params, self._widths_arr, x)
        return out, GradTape(x, acts)

    def backward(self, tape: GradTape, out_grad: np.ndarray) -> np.ndarray:
        """Gradient of sum(out * out_grad) w.r.t. the flat parameter vector."""
        if tape.consumed:
            raise RuntimeError("gradient tape already consumed; rerun forward_tape")
        out_grad = np.ascontiguousarray(out_grad, dtype=np.float64)
        if out_grad.shape != (tape.x.shape[0], self.out_dim):
            raise ValueError(
                f"out_grad shape {out_grad.shape} does not match "
                f"({tape.x.shape[0]}, {self.out_dim})"
            )
        tape.consumed = True
        return K.mlp_backward(self.params, self._widths_arr, tape.x, tape.acts, out_grad)

    def copy(self) -> "Mlp":
        dup = Mlp(self.widths)
        dup.params[:] = self.params
        return dup


class Adam:
    """Adaptive-moment optimizer over one flat parameter vector."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0.0:
            raise ValueError("learning rate must be non-negative")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        if grads.shape != params.shape or params.shape != self.m.shape:
            raise ValueError("parameter/gradient shape mismatch")
        if not np.all(np.isfinite(grads)):
            raise FloatingPointError("non-finite gradient passed to Adam")
        self.t += 1
        K.adam_step(params, grads, self.m, self.v, self.t,
                    self.lr, self.beta1, self.beta2, self.eps)


def soft_mix(dst: np.ndarray, src: np.ndarray, tau: float) -> None:
    """In-place soft target update: dst <- tau * src + (1 - tau) * dst.

    Written incrementally so dst == src is an exact fixed point.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if tau == 1.0:
        dst[:] = src
    else:
        dst += tau * (src - dst)


# ---------------------------------------------------------------------------
# checkpoint container: JSON header line + little-endian float64 payload
# ---------------------------------------------------------------------------

def save_arrays(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write named float64 arrays with a JSON header; round-trip is bit-exact."""
    entries = []
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape)})
        payload.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    header = dict(meta)
    header["arrays"] = entries
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(blob + b"\n")
        for chunk in payload:
            f.write(chunk)


def load_arrays(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.readline()
        try:
            header = json.loads(raw.decode("utf-8"))
            entries = header.pop("arrays")
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
            raise ValueError(f"not a valid checkpoint file: {path}") from exc
        arrays = {}
        for entry in entries:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = f.read(count * 8)
            if len(data) != count * 8:
                raise ValueError(f"truncated checkpoint payload in {path}")
            arrays[entry["name"]] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
    return header, arrays
