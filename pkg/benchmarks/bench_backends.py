"""Benchmark the numba kernels against the pure-numpy fallback.

Times the four hot kernels on training-shaped inputs and a full SDAC
train_step, under each backend.  Run from the repository root:

    python benchmarks/bench_backends.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from sdpc import backend as K
from sdpc.cli import make_agent
from sdpc.config import RunConfig
from sdpc.envs import make_env
from sdpc.replay import ReplayBuffer, Transition


def timeit(fn, repeats):
    fn()  # warmup / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e3


def kernel_cases(rng):
    widths = np.array([4, 64, 64, 1], dtype=np.int64)
    n_params = sum((widths[i] + 1) * widths[i + 1] for i in range(len(widths) - 1))
    params = rng.normal(size=n_params) * 0.2
    x = np.ascontiguousarray(rng.normal(size=(5120, 4)))
    out_grad = np.ascontiguousarray(rng.normal(size=(5120, 1)))
    acts, _ = K.mlp_forward(params, widths, x)
    m = np.zeros(n_params)
    v = np.zeros(n_params)
    grads = rng.normal(size=n_params)
    z = np.ascontiguousarray(rng.normal(size=(5120, 20)))
    p, _ = K.softmax_parts(z)
    p = np.ascontiguousarray(p)
    return {
        "mlp_forward (5120x4->64->64->1)":
            lambda: K.mlp_forward(params, widths, x),
        "mlp_backward (same net)":
            lambda: K.mlp_backward(params, widths, x, acts, out_grad),
        "adam_step (9k params)":
            lambda: K.adam_step(params.copy(), grads, m.copy(), v.copy(),
                                3, 1e-3, 0.9, 0.999, 1e-8),
        "softmax_parts (5120x20)":
            lambda: K.softmax_parts(z),
        "entropy_rows (5120x20)":
            lambda: K.entropy_rows(p),
    }


def train_step_case():
    cfg = RunConfig(algo="sdac", env="pendulum", batch_size=256,
                    hidden_dims=(64, 64)).validate()
    env = make_env(cfg.env)
    rng = np.random.default_rng(0)
    agent = make_agent(cfg, env.spec, rng)
    buf = ReplayBuffer(4096, env.spec.state_dim, env.spec.action_dim)
    state = env.reset(seed=0)
    for k in range(600):
        action, p, idx = agent.act(state, explore=True, rng=rng)
        r = env.step(action)
        buf.push(Transition(state, action, idx, p, r.reward, r.next_state,
                            r.terminal, r.truncated, 0, k))
        state = env.reset() if (r.terminal or r.truncated) else r.next_state
    return lambda: agent.train_step(buf, rng)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    backends = ["numpy"]
    try:
        K._numba_impl()
        backends.append("numba")
    except RuntimeError as exc:
        print(f"numba unavailable ({exc}); benchmarking numpy only")

    rng = np.random.default_rng(42)
    results: dict[str, dict[str, float]] = {}
    for name in backends:
        K.set_backend(name)
        for label, fn in kernel_cases(rng).items():
            results.setdefault(label, {})[name] = timeit(fn, args.repeats)
        results.setdefault("sdac train_step (B=256)", {})[name] = timeit(
            train_step_case(), max(args.repeats // 5, 5))

    width = max(len(label) for label in results)
    header = f"{'case':{width}s}  " + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for label, times in results.items():
        row = f"{label:{width}s}  " + "".join(
            f"{times[b]:10.3f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['numpy'] / times['numba']:9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
