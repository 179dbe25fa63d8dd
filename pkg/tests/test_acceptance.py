"""Acceptance criteria, one test each, at their stated tolerances.

Every criterion prints a single ``PASS``/``FAIL`` line; under pytest the
lines are repeated in the terminal summary. Run standalone with
``python3 tests/test_acceptance.py``.
"""
import math
import statistics
import tempfile
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from endobias import kde
from endobias.access import DecaySpec, DemandSite, Facility, stratified_accessibility, three_sfca
from endobias.audits import EXPERIMENTS, SWEEP_CENTERS, SWEEP_COUNTS, SWEEP_SIGMAS, run_demo
from endobias.config import AuditConfig
from endobias.core import GridSpec, PointDataset, RasterGrid, bounding_box
from endobias.gwr import continuity_audit, domain_diameter, gwr_fit, select_bandwidth_cv
from endobias.maup import consistency_stats, make_block_partition, maup_audit, zonal_mean
from endobias.report import read_report, validate_report
from endobias.simpson import detect_simpson, fit_grouped, fit_ols
from endobias.synthgen import gen_clusters, gen_gwr_surface, gen_random_surface, gen_simpson_regions

RESULTS = []


def _record(number, title, checks):
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{name}={'ok' if good else 'FAIL'} ({info})" for name, good, info in checks)
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# -- 1 ---------------------------------------------------------------------

def criterion_1():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 201))
        x = rng.normal(size=n) * rng.uniform(0.1, 10)
        y = rng.uniform(-3, 3) * x + rng.uniform(-5, 5) + rng.normal(size=n)
        f = fit_ols(x, y)
        X = np.column_stack([np.ones(n), x])
        b = np.linalg.solve(X.T @ X, X.T @ y)
        res = y - X @ b
        r2 = 1 - (res @ res) / ((y - y.mean()) @ (y - y.mean()))
        worst = max(worst, abs(f.slope - b[1]), abs(f.intercept - b[0]), abs(f.r2 - r2))
    dt = time.perf_counter() - t0
    return [("oracle", worst <= 1e-9, f"max err {worst:.2e}"), ("runtime", dt < 1.0, f"{dt:.3f}s")]


# -- 2 ---------------------------------------------------------------------

def criterion_2():
    d = gen_simpson_regions(seed=42)
    groups = fit_grouped(d, "var1", "var2")
    pooled = fit_ols(d.column("var1"), d.column("var2"))
    kind = detect_simpson(pooled, groups).kind
    g_ok = all(f.slope > 0 and f.p_value < 0.01 for f in groups.values())
    p_ok = pooled.p_value >= 0.05 or pooled.slope < 0
    return [
        ("groups", g_ok, ", ".join(f"{k}: {f.slope:.3f} p={f.p_value:.1e}" for k, f in groups.items())),
        ("pooled", p_ok, f"slope {pooled.slope:.3f} p={pooled.p_value:.1e}"),
        ("kind", kind in ("significance_loss", "sign_reversal"), kind),
    ]


# -- 3 ---------------------------------------------------------------------

def criterion_3():
    t0 = time.perf_counter()
    checks = []
    d = gen_gwr_surface("step_x", seed=42)
    s = gwr_fit(d, 1e6 * domain_diameter(d))
    ols = fit_ols(d.attrs["x1"], d.attrs["y_obs"]).slope
    err = float(np.max(np.abs(s.b1_est.values - ols)))
    checks.append(("limit", err <= 1e-6, f"max |b1 - ols| {err:.1e}"))

    g = GridSpec(0, 0, 1, 32, 32)
    cx, cy = g.mesh()
    x1 = np.random.default_rng(7).uniform(1, 5, g.size)
    const = PointDataset(cx.ravel(), cy.ravel(), {"x1": x1, "y_obs": 2.0 * x1})
    err = float(np.max(np.abs(gwr_fit(const, 1.5).b1_est.values - 2.0)))
    checks.append(("constant", err <= 1e-6, f"max err {err:.1e}"))

    h = select_bandwidth_cv(d, (0.5, 20.0), 0.01)
    rho = continuity_audit(gwr_fit(d, h)).rank_correlation
    checks.append(("step_x", rho >= 0.3, f"rho {rho:.3f} at h {h:.3f}"))

    ramp = gen_gwr_surface("smooth_ramp", noise_sd=0.0, seed=42)
    h = select_bandwidth_cv(ramp, (0.5, 20.0), 0.01)
    rho = continuity_audit(gwr_fit(ramp, h)).rank_correlation
    checks.append(("ramp", rho <= 0.2, f"rho {rho:.3f} at h {h:.3f}"))
    dt = time.perf_counter() - t0
    checks.append(("runtime", dt < 30, f"{dt:.2f}s"))
    return checks


# -- 4 ---------------------------------------------------------------------

def criterion_4():
    checks = []
    rng = np.random.default_rng(4)
    d = PointDataset(rng.normal(size=60), rng.normal(size=60) * 0.5)
    h = kde.silverman_bandwidth(d)
    n = len(d)
    hx = statistics.stdev(d.x.tolist()) * n ** (-1 / 6)
    hy = statistics.stdev(d.y.tolist()) * n ** (-1 / 6)
    err = max(abs(h.hx - hx), abs(h.hy - hy))
    checks.append(("silverman", err <= 1e-12, f"err {err:.1e}"))

    span = 6 * max(h.hx, h.hy)
    b = bounding_box(d).expand(span)
    cell = max(b.width, b.height) / 128
    grid = GridSpec(b.min_x, b.min_y, cell, 128, 128)
    mass = float(kde.kde_grid(d, h, grid).values.sum() * cell * cell)
    checks.append(("integral", abs(mass - 1) <= 0.01, f"mass {mass:.5f}"))

    dx, dy = 3.25, -1.5
    a = kde.kde_grid(d, h, grid).values
    moved = kde.kde_grid(PointDataset(d.x + dx, d.y + dy), h,
                         GridSpec(grid.origin_x + dx, grid.origin_y + dy, cell, 128, 128)).values
    err = float(np.max(np.abs(a - moved)))
    checks.append(("translation", err <= 1e-12, f"max diff {err:.1e}"))

    tri = gen_clusters(SWEEP_CENTERS, SWEEP_SIGMAS, SWEEP_COUNTS, 42)
    g = GridSpec.covering(bounding_box(tri).expand(3 * 12.0), 0.25)
    f = kde.false_center_audit(kde.bandwidth_sweep(tri, 0.3, 12.0, 12, g, keep_frames=False), tri)
    checks.append(("false_center", len(f.false_center_bandwidths) >= 1,
                   f"{len(f.false_center_bandwidths)} of 12 bandwidths flagged"))
    checks.append(("reference", True, "0.6070/0.3526 cited only, datasets unavailable"))
    return checks


# -- 5 ---------------------------------------------------------------------

def criterion_5():
    checks = []
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(2, 7))
        maps = [RasterGrid(GridSpec(0, 0, 1, 30, 30), (rng.random((30, 30)) > rng.random()).astype(float))
                for _ in range(k)]
        worst = max(worst, abs(sum(consistency_stats(maps, 10).classes.values()) - 1))
    checks.append(("sum", worst <= 1e-12, f"max |sum-1| {worst:.1e}"))

    r = gen_random_surface(100, 25, 42)
    p = make_block_partition(r, 10)
    checks.append(("identical", maup_audit(r, [p] * 4).report.unanimous == 1, "unanimous 1"))

    parts = [make_block_partition(r, s) for s in (5, 10, 20, 25)]
    u = maup_audit(r, parts, 0.25, 10).report.classes
    checks.append(("demo", u["unanimous"] < 1, ", ".join(f"{k} {v:.4f}" for k, v in u.items())))

    worst = 0.0
    for side in (3, 5, 7, 10, 20, 25, 33):
        pp = make_block_partition(r, side, (int(rng.integers(0, side)), int(rng.integers(0, side))))
        zs = zonal_mean(r, pp)
        worst = max(worst, abs(float((zs.means * pp.cell_counts()).sum() - r.values.sum())))
    checks.append(("conservation", worst <= 1e-9, f"max err {worst:.1e}"))
    checks.append(("reference", True, "21.25/28.75/50.00 percent cited only"))
    return checks


# -- 6 ---------------------------------------------------------------------

def _triple_loop(demand, fac, spec):
    n, m = len(demand), len(fac)
    W = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            dd = math.hypot(demand[i].x - fac[j].x, demand[i].y - fac[j].y)
            W[i][j] = math.exp(-dd * dd / spec.beta) if dd <= spec.d0 else 0.0
    G = [[W[i][j] / sum(W[i]) if sum(W[i]) > 0 else 0.0 for j in range(m)] for i in range(n)]
    R = []
    for j in range(m):
        den = sum(G[i][j] * demand[i].pop_total * W[i][j] for i in range(n))
        R.append(fac[j].supply / den if den > 0 else None)
    return [sum(G[i][j] * W[i][j] * R[j] for j in range(m) if R[j] is not None) for i in range(n)]


def criterion_6():
    rng = np.random.default_rng(6)
    spec = DecaySpec(30.0)
    worst_c = worst_a = ident = 0.0
    mono = scale = True
    for _ in range(50):
        parts = rng.uniform(0, 100, (20, 3))
        demand = [DemandSite(*rng.uniform(0, 10, 2), float(p.sum()), {"a": p[0], "b": p[1], "c": p[2]})
                  for p in parts]
        fac = [Facility(*rng.uniform(0, 10, 2), float(rng.uniform(1, 50))) for _ in range(5)]
        A = _triple_loop(demand, fac, spec)
        r = three_sfca(demand, fac, spec)
        supply = sum(f.supply for f in fac)
        served = sum(s.pop_total * a for s, a in zip(demand, A))
        worst_c = max(worst_c, abs(served - supply) / supply, abs(float(r.population @ r.A) - supply) / supply)
        worst_a = max(worst_a, float(np.max(np.abs(r.A - A) / np.maximum(np.abs(A), 1e-300))))
        j = int(rng.integers(5))
        more = list(fac)
        more[j] = Facility(fac[j].x, fac[j].y, fac[j].supply * 2)
        mono &= bool(np.all(three_sfca(demand, more, spec).A >= r.A - 1e-15))
        c = float(rng.uniform(0.1, 10))
        sc = three_sfca([DemandSite(s.x, s.y, s.pop_total * c) for s in demand], fac, spec)
        scale &= bool(np.allclose(sc.A, r.A / c, rtol=1e-9, atol=0))
        s = stratified_accessibility(r, demand)
        lhs = sum(s.group_population[g] * s.group_means[g] for g in s.group_means)
        rhs = float(sum(sum(site.pop_by_group.values()) * a for site, a in zip(demand, r.A)))
        ident = max(ident, abs(lhs - rhs) / abs(rhs))
    return [
        ("conservation", worst_c <= 1e-9, f"max rel err {worst_c:.1e}"),
        ("oracle", worst_a <= 1e-9, f"max rel diff to triple loop {worst_a:.1e}"),
        ("monotone", mono, "A never decreases when a supply grows"),
        ("stratified", ident <= 1e-12, f"rel err {ident:.1e}"),
        ("scale", scale, "A scales by 1/c"),
        ("reference", True, "county values optional; no dataset supplied"),
    ]


# -- 7 and 8 ---------------------------------------------------------------

def _run_all_demos(root: Path):
    for tag in ("a", "b"):
        for exp in EXPERIMENTS:
            run_demo(exp, root / tag / exp, AuditConfig(seed=42), timestamp=False)


def criterion_7(root: Path):
    bad = []
    files = 0
    for exp in EXPERIMENTS:
        a, b = root / "a" / exp, root / "b" / exp
        names = sorted(p.name for p in a.iterdir())
        if names != sorted(p.name for p in b.iterdir()):
            bad.append(f"{exp}: file sets differ")
            continue
        for n in names:
            if n == "report.json" or n.endswith(".svg"):
                files += 1
                if (a / n).read_bytes() != (b / n).read_bytes():
                    bad.append(f"{exp}/{n}")
    return [("identical", not bad, f"{files} report/SVG files compared" + (f"; differ: {bad}" if bad else ""))]


def criterion_8(root: Path):
    import json

    problems = []
    svgs = 0
    for exp in EXPERIMENTS:
        out = root / "a" / exp
        doc = json.loads((out / "report.json").read_text())
        try:
            validate_report(doc)
        except jsonschema.ValidationError as exc:
            problems.append(f"{exp}: schema: {exc.message}")
        rep = read_report(out / "report.json")
        for f in rep.findings:
            for art in f.artifacts:
                if not (out / art).is_file():
                    problems.append(f"{exp}: missing {art}")
        for p in out.glob("*.svg"):
            svgs += 1
            try:
                ET.parse(p)
            except ET.ParseError as exc:
                problems.append(f"{exp}/{p.name}: {exc}")
    return [("integrity", not problems, f"6 reports, {svgs} SVGs" + (f"; {problems}" if problems else ""))]


# -- pytest entry points -----------------------------------------------------

@pytest.fixture(scope="module")
def demo_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("demos")
    _run_all_demos(root)
    return root


def test_criterion_1_ols_oracle():
    assert _record(1, "OLS vs normal equations", criterion_1())


def test_criterion_2_simpson_demo():
    assert _record(2, "Simpson demo", criterion_2())


def test_criterion_3_gwr():
    assert _record(3, "GWR limit, recovery and continuity", criterion_3())


def test_criterion_4_kde():
    assert _record(4, "KDE integral, Silverman, equivariance, false centers", criterion_4())


def test_criterion_5_maup():
    assert _record(5, "MAUP consistency", criterion_5())


def test_criterion_6_access():
    assert _record(6, "3SFCA conservation and properties", criterion_6())


def test_criterion_7_determinism(demo_root):
    assert _record(7, "demo determinism", criterion_7(demo_root))


def test_criterion_8_report_integrity(demo_root):
    assert _record(8, "report integrity", criterion_8(demo_root))


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        _run_all_demos(root)
        outcomes = [
            _record(1, "OLS vs normal equations", criterion_1()),
            _record(2, "Simpson demo", criterion_2()),
            _record(3, "GWR limit, recovery and continuity", criterion_3()),
            _record(4, "KDE integral, Silverman, equivariance, false centers", criterion_4()),
            _record(5, "MAUP consistency", criterion_5()),
            _record(6, "3SFCA conservation and properties", criterion_6()),
            _record(7, "demo determinism", criterion_7(root)),
            _record(8, "report integrity", criterion_8(root)),
        ]
    raise SystemExit(0 if all(outcomes) else 1)
