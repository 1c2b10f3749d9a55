"""Numerical kernels in two interchangeable implementations.

The hot inner loops of training (MLP forward/backward, Adam updates, row
softmax and entropy) are provided both as numba ``@njit`` kernels and as
pure-numpy functions.  The active implementation is chosen by the
``SDPC_BACKEND`` environment variable (``"numba"`` or ``"numpy"``); the
default is numba when it imports cleanly, numpy otherwise.  ``set_backend``
swaps implementations at runtime, which the benchmark and the backend tests
rely on.

All kernels operate on float64 C-contiguous arrays.  MLP parameters are a
single flat vector laid out per layer as ``[W (in*out, row-major), b (out)]``,
and hidden activations are packed layer-major into one flat buffer so that
each layer's block is itself C-contiguous.

Both implementations compute the same expressions in the same order; they
agree to within a few ulp (reductions may associate differently).
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_VAR = "SDPC_BACKEND"
_BACKENDS = ("numba", "numpy")


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _np_mlp_forward(params, widths, x):
    """Forward pass. Returns (acts, out): packed hidden activations and output."""
    B = x.shape[0]
    L = widths.shape[0] - 1
    hid = int(widths[1:L].sum())
    acts = np.empty(B * hid)
    out = np.empty((B, int(widths[L])))
    h = x
    off = 0
    aoff = 0
    for i in range(L):
        nin = int(widths[i])
        nout = int(widths[i + 1])
        W = params[off:off + nin * nout].reshape(nin, nout)
        off += nin * nout
        b = params[off:off + nout]
        off += nout
        if i < L - 1:
            z = acts[aoff:aoff + B * nout].reshape(B, nout)
            aoff += B * nout
        else:
            z = out
        np.matmul(h, W, out=z)
        z += b
        if i < L - 1:
            np.maximum(z, 0.0, out=z)
        h = z
    return acts, out


def _np_mlp_backward(params, widths, x, acts, out_grad):
    """Backprop of sum(out * out_grad) w.r.t. params. Returns flat gradients."""
    B = x.shape[0]
    L = widths.shape[0] - 1
    grads = np.empty_like(params)
    offs = []
    off = 0
    for i in range(L):
        nin = int(widths[i])
        nout = int(widths[i + 1])
        offs.append((off, off + nin * nout, nin, nout))
        off += nin * nout + nout
    blocks = []
    aoff = 0
    for i in range(1, L):
        n = int(widths[i])
        blocks.append(acts[aoff:aoff + B * n].reshape(B, n))
        aoff += B * n
    delta = out_grad
    for i in range(L - 1, -1, -1):
        wo, bo, nin, nout = offs[i]
        h_prev = x if i == 0 else blocks[i - 1]
        gW = grads[wo:bo].reshape(nin, nout)
        np.matmul(h_prev.T, delta, out=gW)
        grads[bo:bo + nout] = delta.sum(axis=0)
        if i > 0:
            W = params[wo:bo].reshape(nin, nout)
            delta = delta @ W.T
            delta *= h_prev > 0.0
    return grads


def _np_adam_step(params, grads, m, v, t, lr, beta1, beta2, eps):
    """One in-place Adam update with bias correction."""
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    params -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _np_softmax_parts(z):
    """Row-wise softmax with max subtraction. Returns (probs, log probs)."""
    zmax = z.max(axis=1, keepdims=True)
    sh = z - zmax
    ez = np.exp(sh)
    total = ez.sum(axis=1, keepdims=True)
    p = ez / total
    logp = sh - np.log(total)
    return p, logp


def _np_entropy_rows(p):
    """Row-wise entropy of a pmf re-expressed as a density on [-1, 1].

    Each of the N cells carries width 2/N, so the returned value is
    -sum_n p_n * log(p_n * N / 2), with 0 * log 0 taken as 0.
    """
    half_n = p.shape[1] / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * np.log(p * half_n)
    terms[p == 0.0] = 0.0
    return -terms.sum(axis=1)


_NUMPY_IMPL = {
    "mlp_forward": _np_mlp_forward,
    "mlp_backward": _np_mlp_backward,
    "adam_step": _np_adam_step,
    "softmax_parts": _np_softmax_parts,
    "entropy_rows": _np_entropy_rows,
}


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily on first selection)
# ---------------------------------------------------------------------------

_NUMBA_IMPL: dict | None = None
_NUMBA_ERROR: Exception | None = None


def _build_numba_impl():
    from numba import njit

    @njit(cache=True)
    def nb_mlp_forward(params, widths, x):
        B = x.shape[0]
        L = widths.shape[0] - 1
        hid = 0
        for i in range(1, L):
            hid += widths[i]
        acts = np.empty(B * hid)
        out = np.empty((B, widths[L]))
        h = x
        off = 0
        aoff = 0
        for i in range(L):
            nin = widths[i]
            nout = widths[i + 1]
            W = params[off:off + nin * nout].reshape(nin, nout)
            off += nin * nout
            b = params[off:off + nout]
            off += nout
            if i < L - 1:
                z = acts[aoff:aoff + B * nout].reshape(B, nout)
                aoff += B * nout
            else:
                z = out
            np.dot(h, W, z)
            last = i == L - 1
            for r in range(B):
                for c in range(nout):
                    val = z[r, c] + b[c]
                    if not last and val < 0.0:
                        val = 0.0
                    z[r, c] = val
            h = z
        return acts, out

    @njit(cache=True)
    def nb_mlp_backward(params, widths, x, acts, out_grad):
        B = x.shape[0]
        L = widths.shape[0] - 1
        grads = np.empty_like(params)
        # walk layers backwards; recompute offsets on the way down
        delta = out_grad
        for i in range(L - 1, -1, -1):
            woff = 0
            for j in range(i):
                woff += widths[j] * widths[j + 1] + widths[j + 1]
            nin = widths[i]
            nout = widths[i + 1]
            boff = woff + nin * nout
            if i == 0:
                h_prev = x
            else:
                aoff = 0
                for j in range(1, i):
                    aoff += B * widths[j]
                h_prev = acts[aoff:aoff + B * widths[i]].reshape(B, widths[i])
            gW = grads[woff:boff].reshape(nin, nout)
            np.dot(h_prev.T, delta, gW)
            gb = grads[boff:boff + nout]
            gb[:] = 0.0
            for r in range(B):
                for c in range(nout):
                    gb[c] += delta[r, c]
            if i > 0:
                W = params[woff:boff].reshape(nin, nout)
                new_delta = np.dot(delta, W.T)
                for r in range(B):
                    for c in range(nin):
                        if h_prev[r, c] <= 0.0:
                            new_delta[r, c] = 0.0
                delta = new_delta
        return grads

    @njit(cache=True)
    def nb_adam_step(params, grads, m, v, t, lr, beta1, beta2, eps):
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        for i in range(params.shape[0]):
            g = grads[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            params[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)

    @njit(cache=True, fastmath=True)
    def nb_softmax_parts(z):
        R, N = z.shape
        p = np.empty((R, N))
        logp = np.empty((R, N))
        for r in range(R):
            zmax = z[r, 0]
            for c in range(1, N):
                if z[r, c] > zmax:
                    zmax = z[r, c]
            total = 0.0
            for c in range(N):
                e = math.exp(z[r, c] - zmax)
                p[r, c] = e
                total += e
            logt = math.log(total)
            for c in range(N):
                p[r, c] /= total
                logp[r, c] = (z[r, c] - zmax) - logt
        return p, logp

    @njit(cache=True, fastmath=True)
    def nb_entropy_rows(p):
        R, N = p.shape
        half_n = N / 2.0
        h = np.empty(R)
        for r in range(R):
            acc = 0.0
            for c in range(N):
                val = p[r, c]
                if val > 0.0:
                    acc += val * math.log(val * half_n)
            h[r] = -acc
        return h

    return {
        "mlp_forward": nb_mlp_forward,
        "mlp_backward": nb_mlp_backward,
        "adam_step": nb_adam_step,
        "softmax_parts": nb_softmax_parts,
        "entropy_rows": nb_entropy_rows,
    }


def _numba_impl():
    global _NUMBA_IMPL, _NUMBA_ERROR
    if _NUMBA_IMPL is None and _NUMBA_ERROR is None:
        try:
            _NUMBA_IMPL = _build_numba_impl()
        except Exception as exc:  # pragma: no cover - depends on environment
            _NUMBA_ERROR = exc
    if _NUMBA_IMPL is None:
        raise RuntimeError(f"numba backend unavailable: {_NUMBA_ERROR!r}")
    return _NUMBA_IMPL


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

_active_name = "numpy"

mlp_forward = _NUMPY_IMPL["mlp_forward"]
mlp_backward = _NUMPY_IMPL["mlp_backward"]
adam_step = _NUMPY_IMPL["adam_step"]
softmax_parts = _NUMPY_IMPL["softmax_parts"]
entropy_rows = _NUMPY_IMPL["entropy_rows"]


def set_backend(name: str) -> str:
    """Activate a kernel implementation; returns the active backend name."""
    global _active_name, mlp_forward, mlp_backward, adam_step
    global softmax_parts, entropy_rows
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {_BACKENDS}")
    impl = _numba_impl() if name == "numba" else _NUMPY_IMPL
    mlp_forward = impl["mlp_forward"]
    mlp_backward = impl["mlp_backward"]
    adam_step = impl["adam_step"]
    softmax_parts = impl["softmax_parts"]
    entropy_rows = impl["entropy_rows"]
    _active_name = name
    return _active_name


def backend_name() -> str:
    return _active_name


def _init_from_env() -> None:
    requested = os.environ.get(_ENV_VAR, "numba").strip().lower()
    if requested not in _BACKENDS:
        raise ValueError(
            f"{_ENV_VAR}={requested!r} is not valid; expected one of {_BACKENDS}"
        )
    if requested == "numba":
        try:
            set_backend("numba")
        except RuntimeError:
            set_backend("numpy")
    else:
        set_backend("numpy")


_init_from_env()
