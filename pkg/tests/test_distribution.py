"""Rasterization, normalization, and distribution divergences."""

import math

import numpy as np
import pytest

from poialias.distribution import (
    BoundingBox,
    DensityMatrix,
    cell_index,
    jaccard_distance,
    jaccard_overlap,
    kl_divergence,
    normalize,
    rasterize,
)
from poialias.errors import (
    AllPointsOutsideBboxError,
    GridMismatchError,
    InvalidConfigError,
    ZeroTotalError,
)

BBOX = BoundingBox(31.0, 32.0, 120.0, 121.0)


def _dist_from_counts(grid, bbox=BBOX):
    return normalize(DensityMatrix.from_dense(np.array(grid), bbox))


def dense_kl_oracle(p_grid, q_grid, epsilon):
    """Straightforward dense smoothed-KL computation."""
    p = np.asarray(p_grid, dtype=float)
    q = np.asarray(q_grid, dtype=float)
    n = p.size
    ps = (p + epsilon) / (p.sum() + epsilon * n)
    qs = (q + epsilon) / (q.sum() + epsilon * n)
    return float(np.sum(ps * np.log(ps / qs)))


# ---------------------------------------------------------------- rasterize


def test_rasterize_single_cell():
    dm = rasterize(np.array([[31.5, 120.5]]), BBOX, 1)
    assert dm.dense_counts().tolist() == [[1]]


def test_rasterize_keeps_max_corner():
    dm = rasterize(np.array([[32.0, 121.0]]), BBOX, 4)
    dense = dm.dense_counts()
    assert dense[3, 3] == 1
    assert dm.dropped == 0


def test_rasterize_drops_and_reports_outside_points():
    pts = np.array([[31.5, 120.5], [35.0, 120.5], [31.5, 119.0]])
    dm = rasterize(pts, BBOX, 10)
    assert dm.total == 1
    assert dm.dropped == 2


def test_rasterize_all_outside_errors():
    with pytest.raises(AllPointsOutsideBboxError):
        rasterize(np.array([[40.0, 100.0]]), BBOX, 10)


def test_rasterize_invalid_grid():
    with pytest.raises(InvalidConfigError):
        rasterize(np.array([[31.5, 120.5]]), BBOX, 0)


def test_rasterize_matches_floor_index_oracle():
    rng = np.random.default_rng(13)
    n_grid = 50
    pts = np.column_stack(
        [rng.uniform(31.0, 32.0, 1000), rng.uniform(120.0, 121.0, 1000)]
    )
    dm = rasterize(pts, BBOX, n_grid)
    assert dm.total == 1000

    oracle = {}
    for lat, lon in pts:
        rc = cell_index(float(lat), float(lon), BBOX, n_grid)
        assert rc is not None
        oracle[rc] = oracle.get(rc, 0) + 1
    dense = dm.dense_counts()
    for (r, c), count in oracle.items():
        assert dense[r, c] == count
    assert sum(oracle.values()) == int(dense.sum())


def test_rasterize_sum_invariant_across_grids():
    rng = np.random.default_rng(21)
    pts = np.column_stack(
        [rng.uniform(31.0, 32.0, 500), rng.uniform(120.0, 121.0, 500)]
    )
    for n_grid in (1, 3, 7, 50, 128):
        assert rasterize(pts, BBOX, n_grid).total == 500


# ---------------------------------------------------------------- normalize


def test_normalize_direct_division():
    d = _dist_from_counts([[2, 2], [0, 0]])
    assert d.dense_probs().tolist() == [[0.5, 0.5], [0.0, 0.0]]


def test_normalize_uniform():
    d = _dist_from_counts(np.full((50, 50), 3))
    assert np.allclose(d.dense_probs(), 1.0 / 2500.0)
    assert d.total == pytest.approx(1.0, abs=1e-9)


def test_normalize_matches_division_oracle():
    rng = np.random.default_rng(31)
    counts = rng.integers(0, 40, (20, 20))
    counts[0, 0] = 1  # guarantee a nonzero total
    d = _dist_from_counts(counts)
    oracle = counts / counts.sum()
    assert np.abs(d.dense_probs() - oracle).max() < 1e-12


def test_normalize_zero_total_errors():
    with pytest.raises(ZeroTotalError):
        normalize(DensityMatrix.from_dense(np.zeros((3, 3), dtype=int), BBOX))


# ------------------------------------------------------------------------ KL


def test_kl_identity_is_zero():
    rng = np.random.default_rng(41)
    counts = rng.integers(0, 20, (50, 50))
    counts[10, 10] += 1
    p = _dist_from_counts(counts)
    q = _dist_from_counts(counts.copy())
    assert abs(kl_divergence(p, q)) <= 1e-12


def test_kl_hand_computed_two_cell_example():
    p = _dist_from_counts([[2, 2], [0, 0]])
    q = _dist_from_counts([[1, 3], [0, 0]])
    expected = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    assert kl_divergence(p, q, epsilon=1e-9) == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(0.14384, abs=1e-5)


def test_kl_zero_mass_cells_finite_and_decreasing_in_epsilon():
    p = _dist_from_counts([[4, 0], [0, 0]])
    q = _dist_from_counts([[0, 4], [0, 0]])
    values = [kl_divergence(p, q, epsilon=e) for e in (1e-9, 1e-6, 1e-3)]
    assert all(math.isfinite(v) for v in values)
    assert values[0] > values[1] > values[2]


def test_kl_sparse_equals_dense_oracle():
    rng = np.random.default_rng(43)
    for _ in range(20):
        a = rng.integers(0, 5, (30, 30)) * (rng.random((30, 30)) < 0.1)
        b = rng.integers(0, 5, (30, 30)) * (rng.random((30, 30)) < 0.1)
        a[0, 0] += 1
        b[29, 29] += 1
        p = _dist_from_counts(a)
        q = _dist_from_counts(b)
        for eps in (1e-9, 1e-4):
            got = kl_divergence(p, q, eps)
            want = dense_kl_oracle(p.dense_probs(), q.dense_probs(), eps)
            assert got == pytest.approx(want, abs=1e-10)


def test_kl_nonnegative_on_random_pairs():
    rng = np.random.default_rng(47)
    for _ in range(50):
        a = rng.integers(0, 10, (25, 25))
        b = rng.integers(0, 10, (25, 25))
        a[0, 0] += 1
        b[0, 1] += 1
        assert kl_divergence(_dist_from_counts(a), _dist_from_counts(b)) >= -1e-12


def test_kl_grid_mismatch():
    p = _dist_from_counts([[1, 1], [1, 1]])
    q = normalize(
        DensityMatrix.from_dense(np.ones((3, 3), dtype=int), BBOX)
    )
    with pytest.raises(GridMismatchError):
        kl_divergence(p, q)


# -------------------------------------------------------------- Jaccard


def test_jaccard_identity():
    p = _dist_from_counts([[1, 2], [3, 4]])
    assert jaccard_overlap(p, p) == pytest.approx(1.0, abs=1e-15)
    assert jaccard_distance(p, p) == pytest.approx(0.0, abs=1e-15)


def test_jaccard_disjoint_supports():
    p = _dist_from_counts([[4, 0], [0, 0]])
    q = _dist_from_counts([[0, 0], [0, 4]])
    assert jaccard_overlap(p, q) == 0.0
    assert jaccard_distance(p, q) == 1.0


def test_jaccard_half_overlap_hand_example():
    # p on cells {a, b}, q on cells {b, c}, all masses 0.5:
    # overlap = (0.5 + 0.5) / 2 = 0.5
    p = _dist_from_counts([[1, 1], [0, 0]])
    q = _dist_from_counts([[0, 1], [1, 0]])
    assert jaccard_overlap(p, q) == pytest.approx(0.5, abs=1e-12)
    assert jaccard_distance(p, q) == pytest.approx(0.5, abs=1e-12)


def test_jaccard_symmetric_and_bounded():
    rng = np.random.default_rng(53)
    for _ in range(100):
        a = rng.integers(0, 4, (20, 20)) * (rng.random((20, 20)) < 0.15)
        b = rng.integers(0, 4, (20, 20)) * (rng.random((20, 20)) < 0.15)
        a[3, 3] += 1
        b[5, 5] += 1
        p = _dist_from_counts(a)
        q = _dist_from_counts(b)
        dpq = jaccard_distance(p, q)
        dqp = jaccard_distance(q, p)
        assert abs(dpq - dqp) <= 1e-15
        assert 0.0 <= dpq <= 1.0


def test_refinement_never_increases_overlap():
    # a coarse cell jointly occupied can split into disjoint fine cells,
    # never the reverse
    rng = np.random.default_rng(59)
    for trial in range(10):
        pa = np.column_stack(
            [rng.uniform(31.0, 32.0, 80), rng.uniform(120.0, 121.0, 80)]
        )
        pb = pa + rng.normal(0, 0.01, pa.shape)
        pb = pb.clip([31.0, 120.0], [32.0, 121.0])
        for n in (5, 10, 20, 40):
            p1 = normalize(rasterize(pa, BBOX, n))
            q1 = normalize(rasterize(pb, BBOX, n))
            p2 = normalize(rasterize(pa, BBOX, 2 * n))
            q2 = normalize(rasterize(pb, BBOX, 2 * n))
            assert jaccard_overlap(p2, q2) <= jaccard_overlap(p1, q1) + 1e-12
