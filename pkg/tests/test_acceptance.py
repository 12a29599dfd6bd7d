"""Acceptance gate: every criterion below runs at its stated tolerance
and prints one [PASS]/[FAIL] line (run with -s to see them live).

    pytest tests/test_acceptance.py -v -s
"""

import time
from contextlib import contextmanager

import numpy as np

from priorforge import (
    EmbeddingSet,
    MaskRefineConfig,
    SynthesisConfig,
    compute_dmax,
    compute_metrics,
    derive_stream,
    diverging_map,
    refine_mask,
    synthesize_dataset,
)

from test_metrics import oracle_metrics


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException as e:
        print(f"[FAIL] {name}: {type(e).__name__}: {e}")
        raise


def test_diverging_filter_contract():
    name = "diverging-filter contract"
    with criterion(name):
        fixed = diverging_map(np.array([0.0, 0.5, 1.0]))
        assert fixed.tolist() == [0.0, 0.5, 1.0]

        h = 1e-5
        left = float(diverging_map(np.array(0.5)) - diverging_map(np.array(0.5 - h))) / h
        right = float(diverging_map(np.array(0.5 + h)) - diverging_map(np.array(0.5))) / h
        assert abs(left - 2.0) < 1e-3, f"left slope {left}"
        assert abs(right - 2.0) < 1e-3, f"right slope {right}"

        lower = np.arange(0.001, 0.5, 0.001)
        upper = np.arange(0.501, 1.0, 0.001)
        assert np.all(diverging_map(lower) < lower)
        assert np.all(diverging_map(upper) > upper)
    print(f"[PASS] {name}: fixed points exact, slopes {left:.6f}/{right:.6f}, "
          f"diverging on both 1e-3 grids")


def test_mask_convergence_statistics():
    name = "mask convergence (1000 seeds, 32x32, default blur)"
    with criterion(name):
        cfg = MaskRefineConfig()  # epsilon 1e-2, cap 50, kernel 5, sigma 1.5
        start = time.perf_counter()
        iterations = np.array([
            refine_mask(derive_stream(2026, i), 32, 32, cfg)[1] for i in range(1000)
        ])
        elapsed = time.perf_counter() - start
        converged = iterations < cfg.max_iters
        median = float(np.median(iterations))
        assert converged.all(), f"{(~converged).sum()} runs hit the iteration cap"
        assert 5 <= median <= 20, f"median {median}"
        assert elapsed < 30.0, f"took {elapsed:.1f}s"
    print(f"[PASS] {name}: 100% converged, median {median:.0f} iterations "
          f"(range {iterations.min()}-{iterations.max()}), {elapsed:.1f}s")


def test_dmax_table():
    name = "d_max table"
    with criterion(name):
        table = {(32, 32): 5, (28, 28): 5, (64, 64): 6, (224, 224): 8}
        for (h, w), expected in table.items():
            actual = compute_dmax(h, w)
            assert actual == expected, f"({h},{w}) -> {actual}, expected {expected}"
    print(f"[PASS] {name}: 32->5 28->5 64->6 224->8")


def test_generation_determinism(tmp_path):
    name = "determinism (1000 images, rerun + 1 vs 8 workers)"
    with criterion(name):
        cfg = SynthesisConfig(
            channels=3, height=32, width=32, count=1000, master_seed=7, shard_size=500
        )
        runs = {
            "first": synthesize_dataset(cfg, tmp_path / "first", workers=1),
            "second": synthesize_dataset(cfg, tmp_path / "second", workers=1),
            "parallel": synthesize_dataset(cfg, tmp_path / "parallel", workers=8),
        }
        for label in ("second", "parallel"):
            for base_shard, other_shard in zip(runs["first"].shards, runs[label].shards):
                assert base_shard.sha256 == other_shard.sha256, f"{label} shard diverged"
                base_bytes = (tmp_path / "first" / base_shard.path).read_bytes()
                other_bytes = (tmp_path / label / other_shard.path).read_bytes()
                assert base_bytes == other_bytes, f"{label} bytes diverged"
    print(f"[PASS] {name}: {len(runs['first'].shards)} shards byte-identical across "
          f"rerun and 8-worker run")


def test_metrics_against_bruteforce_oracle():
    name = "metrics oracle (50 instances + identical + disjoint)"
    with criterion(name):
        start = time.perf_counter()
        rng = np.random.default_rng(5)
        for _ in range(50):
            n_real = int(rng.integers(4, 65))
            n_fake = int(rng.integers(4, 65))
            dim = int(rng.integers(1, 5))
            k = int(rng.integers(1, 4))
            real = rng.normal(size=(n_real, dim)).astype(np.float32)
            fake = (rng.normal(size=(n_fake, dim)) * rng.uniform(0.5, 2)).astype(np.float32)
            got = compute_metrics(EmbeddingSet(real), EmbeddingSet(fake), k)
            expected = oracle_metrics(real, fake, k)
            assert (got.precision, got.recall, got.density, got.coverage) == expected

        pts = np.random.default_rng(8).normal(size=(300, 6)).astype(np.float32)
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        assert d2.min() > 0, "pairwise distances not distinct"
        same = compute_metrics(EmbeddingSet(pts), EmbeddingSet(pts.copy()), 5)
        assert same.precision == 1.0 and same.recall == 1.0 and same.coverage == 1.0
        assert abs(same.density - 6 / 5) < 1e-9

        rng2 = np.random.default_rng(9)
        near = rng2.normal(size=(50, 3)).astype(np.float32)
        far = (rng2.normal(size=(40, 3)) + 1e6).astype(np.float32)
        apart = compute_metrics(EmbeddingSet(near), EmbeddingSet(far), 5)
        assert (apart.precision, apart.recall, apart.density, apart.coverage) == (0, 0, 0, 0)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.1f}s"
    print(f"[PASS] {name}: exact on all 50, identical-set density {same.density:.12f}, "
          f"disjoint all zero, {elapsed:.1f}s")


def test_throughput_floor(tmp_path):
    name = "throughput (10,000 priors at 3x32x32, single core)"
    with criterion(name):
        cfg = SynthesisConfig(
            channels=3, height=32, width=32, count=10_000, master_seed=0, shard_size=10_000
        )
        start = time.perf_counter()
        manifest = synthesize_dataset(cfg, tmp_path / "bulk", workers=1)
        elapsed = time.perf_counter() - start
        assert manifest.total_count == 10_000
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
    print(f"[PASS] {name}: {elapsed:.1f}s ({10_000 / elapsed:.0f} images/s)")
