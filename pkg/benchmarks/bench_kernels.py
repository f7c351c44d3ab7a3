"""Time the numba kernels against the pure-numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``. Each kernel is called on the
same inputs through both backends; the numba side is warmed up first so
compilation is excluded. An end-to-end mining run is also timed in two
subprocesses, one with ``KGEXPLAIN_NO_NUMBA=1``.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from kgexplain.kernels import numba_backend, numpy_backend


def random_csr(n_nodes: int, n_edges: int, seed: int):
    rng = np.random.default_rng(seed)
    src = np.sort(rng.integers(n_nodes, size=n_edges))
    dst = rng.integers(n_nodes, size=n_edges).astype(np.int64)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    edge_ok = np.ones(n_edges, dtype=np.bool_)
    node_ok = np.ones(n_nodes, dtype=np.bool_)
    expand_ok = np.bincount(src, minlength=n_nodes) <= 50
    return indptr, dst, edge_ok, node_ok, expand_ok


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(seed: int):
    graph = random_csr(20_000, 100_000, seed)
    roots = list(range(0, 20_000, 400))
    rng = np.random.default_rng(seed)
    X = (rng.random((2000, 3000)) < 0.05).astype(np.uint8)
    y = rng.integers(2, size=2000).astype(np.int64)
    w = rng.random(2000) + 0.5
    rows = np.sort(rng.choice(2000, size=1500, replace=False)).astype(np.int64)
    pos, neg = rng.random(5000), rng.random(5000)
    return {
        "bfs_within k=3": lambda b: [b.bfs_within(*graph, r, 3) for r in roots],
        "simple_paths k=3": lambda b: [b.simple_paths(*graph, r, 3) for r in roots],
        "feature_masses 1500x3000": lambda b: b.feature_masses(X, rows, w, y),
        "auc_score 5000x5000": lambda b: b.auc_score(pos, neg),
    }


def mining_run(no_numba: bool) -> float:
    code = (
        "import time\n"
        "from kgexplain.graph import canonicalize\n"
        "from kgexplain.mining import MiningParams, mine_features\n"
        "from kgexplain.synthetic import planted_task\n"
        "task = planted_task(n_roots=200, seed=0)\n"
        "g = canonicalize(task.graph())\n"
        "roots = [g.resolve(r) for r in task.dataset.roots]\n"
        "mine_features(g, roots[:5], MiningParams(k=2, t=1))\n"
        "t0 = time.perf_counter()\n"
        "mine_features(g, roots, MiningParams(k=3, t=2, s_min=5))\n"
        "print(time.perf_counter() - t0)\n"
    )
    env = dict(os.environ, KGEXPLAIN_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-mining", action="store_true")
    args = ap.parse_args()
    if numba_backend is None:
        sys.exit("numba is not installed; nothing to compare")
    print(f"{'kernel':28s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name, call in kernel_cases(args.seed).items():
        call(numba_backend)  # compile
        t_np = best_of(lambda: call(numpy_backend), args.repeat)
        t_nb = best_of(lambda: call(numba_backend), args.repeat)
        print(f"{name:28s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")
    if not args.skip_mining:
        t_np, t_nb = mining_run(True), mining_run(False)
        print(f"{'mine_features planted k=3':28s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
