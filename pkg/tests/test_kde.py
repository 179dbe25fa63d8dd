import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endobias import kde
from endobias.audits import kde_window_demo_data, kde_sweep_demo_data
from endobias.config import AuditConfig
from endobias.core import GridSpec, PointDataset, RasterGrid, Rect, bounding_box
from endobias.errors import DegenerateDataError, EmptyInputError, EmptyWindowError, ParameterError
from endobias.synthgen import gen_clusters

# frozen output of the kde-window demo at seed 42 (mean angle, radians)
WINDOW_MEAN_BASELINE = 0.8797351237885637


def test_silverman_formula():
    rng = np.random.default_rng(0)
    x = rng.normal(size=100)
    x = (x - x.mean()) / x.std(ddof=1)
    d = PointDataset(x, rng.normal(size=100))
    h = kde.silverman_bandwidth(d)
    assert h.hx == pytest.approx(100 ** (-1 / 6), rel=1e-12)
    assert h.hx == pytest.approx(0.46416, abs=1e-5)


def test_silverman_homogeneous_and_decreasing(rng):
    d = PointDataset(rng.normal(size=50), rng.normal(size=50))
    h = kde.silverman_bandwidth(d)
    h3 = kde.silverman_bandwidth(PointDataset(3 * d.x, d.y))
    assert h3.hx == pytest.approx(3 * h.hx, rel=1e-12) and h3.hy == h.hy
    # same spread, more points -> smaller bandwidth
    big = PointDataset(np.tile(d.x, 4), np.tile(d.y, 4))
    assert kde.silverman_bandwidth(big).hx < h.hx


def test_silverman_degenerate_axis():
    with pytest.raises(DegenerateDataError, match="y"):
        kde.silverman_bandwidth(PointDataset([0, 1, 2], [1, 1, 1]))


def _grid_around(cx, cy, half, n):
    cell = 2 * half / n
    return GridSpec(cx - half, cy - half, cell, n, n)


def test_single_point_mass_and_argmax():
    h = kde.Bandwidth2D.isotropic(0.5)
    g = _grid_around(0, 0, 6 * 0.5, 129)
    r = kde.kde_grid(PointDataset([0.0], [0.0]), h, g)
    assert np.unravel_index(np.argmax(r.values), g.shape) == (64, 64)
    mass = r.values.sum() * g.cell_size ** 2
    assert 0.99 <= mass <= 1.001
    assert np.all(r.values > 0)


def test_integral_near_one(rng):
    d = PointDataset(rng.normal(size=40), rng.normal(size=40) * 2)
    h = kde.silverman_bandwidth(d)
    pad = 6 * max(h.hx, h.hy)
    b = bounding_box(d).expand(pad)
    g = GridSpec(b.min_x, b.min_y, max(b.width, b.height) / 160, 160, 160)
    r = kde.kde_grid(d, h, g)
    assert abs(r.values.sum() * g.cell_size ** 2 - 1) < 0.01


def test_translation_equivariance(rng):
    d = PointDataset(rng.normal(size=30), rng.normal(size=30))
    h = kde.Bandwidth2D(0.7, 0.4)
    g = GridSpec(-4, -4, 0.25, 32, 32)
    dx, dy = 0.375, -1.25  # exact binary offsets keep grid centers aligned
    a = kde.kde_grid(d, h, g).values
    b = kde.kde_grid(PointDataset(d.x + dx, d.y + dy), h, GridSpec(-4 + dx, -4 + dy, 0.25, 32, 32)).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_duplication_invariance(rng):
    d = PointDataset(rng.normal(size=30), rng.normal(size=30))
    dd = PointDataset(np.r_[d.x, d.x], np.r_[d.y, d.y])
    h = kde.Bandwidth2D(0.5, 0.5)
    g = GridSpec(-3, -3, 0.3, 20, 20)
    np.testing.assert_allclose(kde.kde_grid(d, h, g).values, kde.kde_grid(dd, h, g).values, rtol=1e-12)


def test_kde_matches_direct_formula(rng):
    d = PointDataset(rng.normal(size=7), rng.normal(size=7))
    h = kde.Bandwidth2D(0.8, 0.3)
    g = GridSpec(-2, -2, 0.5, 8, 8)
    r = kde.kde_grid(d, h, g)
    cx, cy = g.mesh()
    for (i, j) in [(0, 0), (3, 5), (7, 7)]:
        s = sum(math.exp(-((cx[i, j] - x) ** 2 / (2 * 0.64) + (cy[i, j] - y) ** 2 / (2 * 0.09)))
                for x, y in zip(d.x, d.y))
        assert r.values[i, j] == pytest.approx(s / (7 * 2 * math.pi * 0.8 * 0.3), rel=1e-12)


def test_kde_empty():
    with pytest.raises(EmptyInputError):
        kde.kde_grid(PointDataset([], []), kde.Bandwidth2D(1, 1), GridSpec(0, 0, 1, 3, 3))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_argmax_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    d = PointDataset(rng.normal(size=15), rng.normal(size=15))
    g = GridSpec(-3, -3, 0.5, 12, 12)
    s = kde.kernel_sums(d, kde.Bandwidth2D(0.6, 0.6), g)
    assert np.argmax(s) == np.argmax(c * s)


def brute_gradient(v, cell):
    h, w = v.shape
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    for i in range(h):
        for j in range(w):
            if j == 0:
                gx[i, j] = (v[i, 1] - v[i, 0]) / cell
            elif j == w - 1:
                gx[i, j] = (v[i, j] - v[i, j - 1]) / cell
            else:
                gx[i, j] = (v[i, j + 1] - v[i, j - 1]) / (2 * cell)
            if i == 0:
                gy[i, j] = (v[1, j] - v[0, j]) / cell
            elif i == h - 1:
                gy[i, j] = (v[i, j] - v[i - 1, j]) / cell
            else:
                gy[i, j] = (v[i + 1, j] - v[i - 1, j]) / (2 * cell)
    return gx, gy


def test_gradient_brute_force(rng):
    for _ in range(10):
        v = rng.normal(size=(8, 8))
        cell = float(rng.uniform(0.1, 3))
        f = kde.gradient_field(RasterGrid(GridSpec(0, 0, cell, 8, 8), v))
        gx, gy = brute_gradient(v, cell)
        np.testing.assert_allclose(f.gx, gx, atol=1e-12)
        np.testing.assert_allclose(f.gy, gy, atol=1e-12)


def test_gradient_constant_and_ramp():
    g = GridSpec(0, 0, 0.5, 6, 5)
    f = kde.gradient_field(RasterGrid(g, np.full(g.shape, 4.0)))
    assert np.all(f.gx == 0) and np.all(f.gy == 0)
    cx, _ = g.mesh()
    f = kde.gradient_field(RasterGrid(g, cx))
    np.testing.assert_allclose(f.gx, 1.0)
    np.testing.assert_allclose(f.gy, 0.0)


def test_gradient_too_small():
    with pytest.raises(ParameterError):
        kde.gradient_field(RasterGrid(GridSpec(0, 0, 1, 2, 5), np.zeros((5, 2))))


def _field(rng):
    g = GridSpec(0, 0, 1, 6, 6)
    return kde.VectorField(g, rng.normal(size=(6, 6)), rng.normal(size=(6, 6)))


def test_divergence_identical_and_opposite(rng):
    a = _field(rng)
    w = Rect(-1, -1, 7, 7)
    s = kde.gradient_divergence(a, a, w)
    assert s.mean == 0 and s.max == 0 and s.n_cells == 36
    s = kde.gradient_divergence(a, kde.VectorField(a.spec, -a.gx, -a.gy), w)
    assert s.mean == pytest.approx(math.pi) and s.max == pytest.approx(math.pi)


def test_divergence_against_acos(rng):
    a, b = _field(rng), _field(rng)
    s = kde.gradient_divergence(a, b, Rect(-1, -1, 7, 7))
    cos = (a.gx * b.gx + a.gy * b.gy) / (np.hypot(a.gx, a.gy) * np.hypot(b.gx, b.gy))
    assert s.mean == pytest.approx(np.arccos(np.clip(cos, -1, 1)).mean(), abs=1e-7)


def test_divergence_skips_and_empty_window(rng):
    a = _field(rng)
    z = kde.VectorField(a.spec, np.zeros((6, 6)), np.zeros((6, 6)))
    with pytest.raises(EmptyWindowError):
        kde.gradient_divergence(a, z, Rect(-1, -1, 7, 7))
    with pytest.raises(EmptyWindowError):
        kde.gradient_divergence(a, a, Rect(100, 100, 101, 101))
    gx = a.gx.copy()
    gx[0, 0] = 0
    gy = a.gy.copy()
    gy[0, 0] = 0
    s = kde.gradient_divergence(a, kde.VectorField(a.spec, gx, gy), Rect(-1, -1, 7, 7))
    assert s.n_skipped == 1 and s.n_cells == 35


def test_window_demo_baseline():
    local, full, window = kde_window_demo_data(AuditConfig())
    assert len(local) == 5 and len(full) == 55
    hl, hf = kde.silverman_bandwidth(local), kde.silverman_bandwidth(full)
    pad = 3 * max(hl.hx, hl.hy, hf.hx, hf.hy)
    g = GridSpec.covering(bounding_box(full).expand(pad), 0.1)
    s = kde.gradient_divergence(kde.gradient_field(kde.kde_grid(local, hl, g)),
                                kde.gradient_field(kde.kde_grid(full, hf, g)), window)
    assert s.mean > 0
    assert s.mean == pytest.approx(WINDOW_MEAN_BASELINE, rel=1e-9)


def test_sweep_two_steps_are_endpoints():
    d = gen_clusters([(0, 0)], [1], [30], seed=1)
    sw = kde.bandwidth_sweep(d, 0.3, 4.0, 2, GridSpec(-4, -4, 0.5, 16, 16))
    assert sw.sweep_bandwidths == (0.3, 4.0)


def test_sweep_geometric_spacing():
    d = gen_clusters([(0, 0)], [1], [30], seed=1)
    hs = np.array(kde.bandwidth_sweep(d, 0.5, 8.0, 5, GridSpec(-4, -4, 0.5, 16, 16)).sweep_bandwidths)
    np.testing.assert_allclose(hs[1:] / hs[:-1], 2.0)


def test_sweep_validation():
    d = gen_clusters([(0, 0)], [1], [30], seed=1)
    with pytest.raises(ParameterError):
        kde.bandwidth_sweep(d, 2, 1, 5, GridSpec(0, 0, 1, 4, 4))
    with pytest.raises(ParameterError):
        kde.bandwidth_sweep(d, 1, 2, 1, GridSpec(0, 0, 1, 4, 4))


def test_single_symmetric_cluster_fixed_mode():
    # a symmetric + pattern centred on a cell center
    d = PointDataset([0.25, 0.25, 0.25, -0.75, 1.25], [0.25, -0.75, 1.25, 0.25, 0.25])
    g = GridSpec(-4, -4, 0.5, 17, 17)
    sw = kde.bandwidth_sweep(d, 0.3, 6, 8, g)
    cells = {(t.row, t.col) for t in sw.mode_tracks}
    assert len(cells) == 1
    assert not kde.false_center_audit(sw, d).false_center_bandwidths


def _sweep_grid(d, hmax):
    return GridSpec.covering(bounding_box(d).expand(3 * hmax), 0.25)


def test_three_cluster_mode_migrates():
    d = kde_sweep_demo_data(AuditConfig())
    sw = kde.bandwidth_sweep(d, 0.3, 12, 12, _sweep_grid(d, 12), keep_frames=False)
    first, last = sw.mode_tracks[0], sw.mode_tracks[-1]
    # brute-force densest cluster: the one with the most points within radius 1 of its center
    from endobias.audits import SWEEP_CENTERS
    dens = [np.sum(np.hypot(d.x - cx, d.y - cy) < 1) for cx, cy in SWEEP_CENTERS]
    cx, cy = SWEEP_CENTERS[int(np.argmax(dens))]
    assert math.hypot(first.x - cx, first.y - cy) < 1.5
    centroid = (d.x.mean(), d.y.mean())
    assert math.hypot(last.x - centroid[0], last.y - centroid[1]) < math.hypot(first.x - centroid[0], first.y - centroid[1])


def test_false_centers_triangle_vs_collinear():
    tri = gen_clusters([(0, 0), (10, 0), (5, 8.66)], [1, 1, 1], [100] * 3, seed=42)
    line = gen_clusters([(0, 0), (10, 0), (20, 0)], [1, 1, 1], [100] * 3, seed=42)
    out = {}
    for name, d in (("tri", tri), ("line", line)):
        sw = kde.bandwidth_sweep(d, 0.5, 12, 12, _sweep_grid(d, 12), keep_frames=False)
        out[name] = (sw, kde.false_center_audit(sw, d))
    sw, f = out["line"]
    assert not [h for h in f.false_center_bandwidths if h >= 8]
    assert set(f.false_center_bandwidths) <= set(sw.sweep_bandwidths)
    sw, f = out["tri"]
    assert sw.sweep_bandwidths[-1] in f.false_center_bandwidths
    # once flagged, every larger bandwidth is flagged
    hs = sw.sweep_bandwidths
    first = hs.index(f.false_center_bandwidths[0])
    assert f.false_center_bandwidths == hs[first:]


def test_single_cluster_no_false_centers():
    d = gen_clusters([(0, 0)], [1], [200], seed=3)
    sw = kde.bandwidth_sweep(d, 0.3, 10, 8, _sweep_grid(d, 10), keep_frames=False)
    assert kde.false_center_audit(sw, d).false_center_bandwidths == ()


def test_sweep_demo_flags_something():
    d = kde_sweep_demo_data(AuditConfig())
    sw = kde.bandwidth_sweep(d, 0.3, 12, 12, _sweep_grid(d, 12), keep_frames=False)
    assert len(kde.false_center_audit(sw, d).false_center_bandwidths) >= 1
