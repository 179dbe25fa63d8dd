import numpy as np
import pytest

from endobias.core import GridSpec
from endobias.errors import ParameterError
from endobias.simpson import fit_grouped, fit_ols
from endobias.synthgen import (gen_clusters, gen_county, gen_gwr_surface, gen_random_surface,
                               gen_simpson_regions, normal, make_rng)


def test_box_muller_moments():
    z = normal(make_rng(1), 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


def test_simpson_noise_free_exact_slope():
    d = gen_simpson_regions(20, within_slope=1.0, noise_sd=0.0, seed=3)
    for f in fit_grouped(d, "var1", "var2").values():
        assert f.slope == pytest.approx(1.0, abs=1e-12)


def test_simpson_default_paradox_sign_pattern():
    d = gen_simpson_regions(seed=42)
    groups = fit_grouped(d, "var1", "var2")
    assert all(f.slope > 0 and f.p_value < 0.01 for f in groups.values())
    pooled = fit_ols(d.column("var1"), d.column("var2"))
    assert pooled.slope <= 0 or pooled.p_value >= 0.05


def test_simpson_homogeneous_control():
    d = gen_simpson_regions(region_offsets=((2, 2),) * 3, seed=42)
    pooled = fit_ols(d.column("var1"), d.column("var2"))
    for f in fit_grouped(d, "var1", "var2").values():
        assert abs(pooled.slope - f.slope) <= 3 * np.hypot(pooled.slope_se, f.slope_se)


def test_simpson_rejects_tiny_regions():
    with pytest.raises(ParameterError):
        gen_simpson_regions(2)


def test_gwr_ramp_exact_ratio():
    d = gen_gwr_surface("smooth_ramp", noise_sd=0.0)
    x1 = d.attrs["x1"]
    assert np.allclose(d.attrs["y_obs"][x1 != 0] / x1[x1 != 0], d.attrs["p_true"][x1 != 0], rtol=1e-14)
    # linear in x, constant in y
    p = d.attrs["p_true"].reshape(32, 32)
    assert np.allclose(np.diff(p, axis=1), np.diff(p, axis=1)[0, 0])
    assert np.all(np.diff(p, axis=0) == 0)


def test_gwr_step_x_midline():
    g = GridSpec(0, 0, 1, 10, 6)
    d = gen_gwr_surface("step_x", g, p_levels=(1, 3))
    p = d.attrs["p_true"].reshape(6, 10)
    assert set(np.unique(p)) == {1.0, 3.0}
    assert np.all(p[:, :5] == 1) and np.all(p[:, 5:] == 3)


@pytest.mark.parametrize("kind", ["step_x", "step_diag", "circular_patch", "smooth_ramp"])
def test_gwr_determinism(kind):
    a = gen_gwr_surface(kind, seed=9)
    b = gen_gwr_surface(kind, seed=9)
    for name in a.columns:
        assert a.column(name).tobytes() == b.column(name).tobytes()
    c = gen_gwr_surface(kind, seed=10)
    assert not np.array_equal(a.attrs["y_obs"], c.attrs["y_obs"])


def test_gwr_unknown_kind():
    with pytest.raises(ParameterError):
        gen_gwr_surface("wavy")
    with pytest.raises(ParameterError):
        gen_gwr_surface("step_x", p_levels=(2, 2))


def test_clusters_degenerate_sigma():
    d = gen_clusters([(3.0, -4.0)], [1e-9], [1], seed=1)
    assert abs(d.x[0] - 3.0) < 1e-6 and abs(d.y[0] + 4.0) < 1e-6


def test_cluster_means_near_centers():
    centers = [(0, 0), (10, 0), (5, 9)]
    d = gen_clusters(centers, [1, 1, 1], [500] * 3, seed=42)
    for k, (cx, cy) in enumerate(centers):
        m = d.group_mask(str(k))
        assert np.hypot(d.x[m].mean() - cx, d.y[m].mean() - cy) < 1.0


def test_local_cluster_subset_of_global():
    full = gen_clusters([(0, 0), (4, 3)], [2.5, 0.6], [50, 5], seed=42)
    alone = gen_clusters([(0, 0), (4, 3)], [2.5, 0.6], [0, 5], seed=42)
    local = full.subset(full.group_mask("1"))
    assert len(local) == 5
    assert np.array_equal(local.x, alone.x) and np.array_equal(local.y, alone.y)


def test_clusters_length_mismatch():
    with pytest.raises(ParameterError):
        gen_clusters([(0, 0)], [1, 2], [3])


def test_random_surface_raw_noise_extremes():
    r = gen_random_surface(50, 0, seed=1)
    assert r.values.min() == 0.0 and r.values.max() == 1.0
    assert r.spec == GridSpec(0, 0, 1, 50, 50)


def test_random_surface_determinism():
    assert gen_random_surface(100, 5, 7).values.tobytes() == gen_random_surface(100, 5, 7).values.tobytes()


def _lag1(z):
    a = np.concatenate([z[:, :-1].ravel(), z[:-1, :].ravel()])
    b = np.concatenate([z[:, 1:].ravel(), z[1:, :].ravel()])
    return np.corrcoef(a, b)[0, 1]


def test_smoothing_raises_autocorrelation():
    rough = gen_random_surface(100, 0, 42).values
    smooth = gen_random_surface(100, 25, 42).values
    assert _lag1(smooth) > _lag1(rough)


def test_random_surface_side_validation():
    with pytest.raises(ParameterError):
        gen_random_surface(0)


def test_county_shapes():
    demand, fac = gen_county(n_side=6, n_facilities=3, seed=1)
    assert len(demand) == 36 and len(fac) == 3
    for s in demand:
        assert sum(s.pop_by_group.values()) == pytest.approx(s.pop_total)
