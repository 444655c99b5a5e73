"""Benchmarks comparing the accelerated kernels against the pure-numpy
fallback: per-kernel microbenchmarks plus a whole scene-inference loop,
run over a fixed list of seeds so numbers are comparable across machines
and runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import diffusion, inference, kernels
from .backend import ToyBackend

DEFAULT_SEEDS = tuple(range(51))
DEFAULT_KERNEL_SIZE = 256
DEFAULT_REPEATS = 5
DEFAULT_INNER = 10


@dataclass(slots=True)
class BenchRow:
    name: str
    per_path_s: dict[str, float]

    def to_document(self) -> dict:
        doc = {"name": self.name, "seconds": dict(self.per_path_s)}
        if "numpy" in self.per_path_s and "numba" in self.per_path_s:
            numba_s = self.per_path_s["numba"]
            if numba_s > 0.0:
                doc["speedup"] = self.per_path_s["numpy"] / numba_s
        return doc


def _best_of(fn, repeats: int, inner: int) -> float:
    """Best mean-per-call over ``repeats`` batches of ``inner`` calls."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def _kernel_args(size: int, rng: np.random.Generator) -> dict[str, tuple]:
    z = rng.standard_normal((2, size, size))
    e = rng.standard_normal((2, size, size))
    b = rng.standard_normal((2, size, size))
    m = (rng.random((size, size)) < 0.5).astype(np.float64)
    small = rng.standard_normal((2, size // 8, size // 8))
    return {
        "lincomb": (z, e, 0.25, 0.75),
        "mul_add": (b, z, e),
        "ddim_step": (z, e, 0.8, 0.6, 0.9, 0.435),
        "where_blend": (z, e, m),
        "masked_sq_residual": (z, e, m),
        "block_mean_2d": (m, 8),
        "block_mean_3d": (z, 8),
        "upsample_nn_3d": (small, 8),
    }


def run_kernel_bench(
    size: int = DEFAULT_KERNEL_SIZE,
    repeats: int = DEFAULT_REPEATS,
    inner: int = DEFAULT_INNER,
    seed: int = 0,
) -> list[BenchRow]:
    """Time each kernel on each available path at one array size."""
    kernels.warmup()
    args_by_name = _kernel_args(size, np.random.default_rng(seed))
    tables = dict(zip(("numpy", "numba"), kernels.implementations()))
    rows = []
    for name, args in args_by_name.items():
        per_path = {}
        for path, table in tables.items():
            if table is None:
                continue
            fn = table[name]
            fn(*args)  # one untimed call (compilation, cache warmup)
            per_path[path] = _best_of(lambda: fn(*args), repeats, inner)
        rows.append(BenchRow(name=name, per_path_s=per_path))
    return rows


def _inference_case(seed: int, size: int, steps: int):
    toy = ToyBackend()
    schedule = diffusion.make_schedule(steps)
    shape = toy.profile.latent_shape(size, size)
    rng = np.random.default_rng(seed)
    z_start = diffusion.initial_noise(shape, seed)
    z_init = rng.standard_normal(shape)
    m_init = np.zeros(shape[1:], dtype=np.float64)
    m_init[: shape[1] // 2, : shape[2] // 2] = 1.0
    enc_g = toy.encode_prompt("a photo of a cat and a vase in a courtyard")
    enc_b = toy.encode_prompt("a photo of a courtyard")
    return toy, schedule, z_start, z_init, m_init, enc_g, enc_b


def run_pipeline_bench(
    seeds=DEFAULT_SEEDS,
    size: int = 64,
    steps: int = 10,
    alpha: float = 0.5,
) -> BenchRow:
    """Time the full two-phase inference loop per seed on each path."""
    kernels.warmup()
    per_path = {}
    for path in kernels.available_paths():
        with kernels.use(path):
            t0 = time.perf_counter()
            for seed in seeds:
                toy, schedule, z_start, z_init, m_init, enc_g, enc_b = _inference_case(
                    int(seed), size, steps
                )
                inference.infer_scene_latent(
                    toy, schedule, z_start, z_init, m_init,
                    enc_g, enc_b, alpha=alpha, seed=int(seed),
                )
            per_path[path] = (time.perf_counter() - t0) / max(len(list(seeds)), 1)
    return BenchRow(name=f"scene_inference[{size}px,T={steps}]", per_path_s=per_path)


def run(
    size: int = DEFAULT_KERNEL_SIZE,
    repeats: int = DEFAULT_REPEATS,
    inner: int = DEFAULT_INNER,
    seeds=DEFAULT_SEEDS,
    pipeline_size: int = 64,
    pipeline_steps: int = 10,
) -> dict:
    """Full benchmark document: kernel rows plus the pipeline row."""
    rows = run_kernel_bench(size=size, repeats=repeats, inner=inner)
    rows.append(
        run_pipeline_bench(seeds=seeds, size=pipeline_size, steps=pipeline_steps)
    )
    return {
        "configured_backend": kernels.BACKEND,
        "paths": kernels.available_paths(),
        "seeds": [int(s) for s in seeds],
        "kernel_size": size,
        "results": [r.to_document() for r in rows],
    }
