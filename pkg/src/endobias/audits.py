"""End-to-end audit pipelines: run an analysis, render its figures, and
return typed findings whose artifact paths are relative to ``out_dir``.

``run_demo`` generates the seeded synthetic data for each experiment family
and feeds it through the matching pipeline.
"""
from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import access as acc
from . import gwr as gwr_mod
from . import kde as kde_mod
from . import maup as maup_mod
from . import simpson as simp
from . import svg
from .config import AuditConfig
from .core import GridSpec, PointDataset, RasterGrid, Rect, bounding_box, write_points_csv
from .errors import ParameterError
from .report import AuditReport, Finding, now_utc, write_report
from .synthgen import gen_clusters, gen_county, gen_gwr_surface, gen_random_surface, gen_simpson_regions

log = logging.getLogger("endobias")

EXPERIMENTS = ("simpson", "gwr", "kde-window", "kde-sweep", "maup", "access")

# Reference figures quoted by the experiments these demos imitate. They are
# reported for context only; none of them is a reproduction target.
REFERENCE_VALUES = {
    "kde_silverman_bandwidths": (0.6070, 0.3526),
    "maup_consistency": {"unanimous": 0.2125, "strong_majority": 0.2875, "split": 0.5000},
    "access_means": {"overall": 0.000977, "white": 0.00103, "black": 0.000879,
                     "american_indian": 0.000907, "asian": 0.00106},
}

# triangle of clusters with an empty centroid; the third cluster is sparse
SWEEP_CENTERS = ((0.0, 0.0), (10.0, 0.0), (5.0, 8.66))
SWEEP_SIGMAS = (0.8, 1.2, 1.0)
SWEEP_COUNTS = (100, 100, 20)

WINDOW_CENTERS = ((0.0, 0.0), (4.0, 3.0))
WINDOW_SIGMAS = (2.5, 0.6)
WINDOW_COUNTS = (50, 5)


def _write(out: Path, name: str, data: bytes) -> str:
    (out / name).write_bytes(data)
    return name


def _write_csv(out: Path, name: str, header: Sequence[str], rows) -> str:
    with open(out / name, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return name


# -- data level ------------------------------------------------------------

SIMPSON_SEVERITY = {"sign_reversal": "critical", "significance_loss": "warning", "mixed_groups": "warning",
                    "none": "info"}


def run_simpson(d: PointDataset, xvar: str, yvar: str, out_dir, cfg: AuditConfig, group_key: str | None = None,
                axes: Sequence[str] | None = None) -> list[Finding]:
    out = Path(out_dir)
    c = cfg.simpson
    pooled = simp.fit_ols(d.column(xvar), d.column(yvar))
    groups = simp.fit_grouped(d, xvar, yvar, group_key)
    res = simp.detect_simpson(pooled, groups, c.alpha)
    log.info("simpson: pooled slope %.4g (p=%.3g), kind=%s", pooled.slope, pooled.p_value, res.kind)

    labels = d.groups if group_key in (None, "group") else simp._group_keys(d, group_key)
    arts = [_write(out, "simpson_scatter.svg", svg.render_scatter(
        d.column(xvar), d.column(yvar), labels,
        {k: (f.slope, f.intercept) for k, f in groups.items()}, (pooled.slope, pooled.intercept),
        title="Pooled versus grouped regression", xlabel=xvar, ylabel=yvar))]
    axes = tuple(axes) if axes else ("x", "y", xvar, yvar)
    table = simp.parallel_coords_table(d, axes, c.normalization)
    arts.append(_write(out, "simpson_parallel_coords.svg",
                       svg.render_parallel_coords(table, title="Parallel coordinates")))
    arts.append(_write_csv(out, "simpson_parallel_coords.csv", (*table.axes, "group"),
                           ([*row, labels[i] if labels is not None else ""] for i, row in enumerate(table.values))))
    metrics = dict(res.metrics)
    metrics.update(pooled.as_metrics("pooled"))
    for k, f in groups.items():
        metrics.update(f.as_metrics(f"group.{k}"))
    notes = list(res.notes) + [
        f"significance is a two-sided t-test on the slope at alpha={c.alpha}",
    ]
    return [Finding(f"simpson-{xvar}-{yvar}", "data", f"simpson.{res.kind}", SIMPSON_SEVERITY[res.kind],
                    metrics, arts, notes)]


# -- modeling level --------------------------------------------------------

def run_gwr(d: PointDataset, out_dir, cfg: AuditConfig, x1: str = "x1", y: str = "y_obs") -> list[Finding]:
    out = Path(out_dir)
    c = cfg.gwr
    notes = []
    if c.bandwidth is None:
        h = gwr_mod.select_bandwidth_cv(d, tuple(c.search), c.tolerance, x1, y)
        notes.append(f"bandwidth selected by leave-one-out CV over {list(c.search)} (golden section, tol {c.tolerance})")
    else:
        h = float(c.bandwidth)
        notes.append("bandwidth fixed by configuration")
    if c.cell_size is None:
        grid = None
    else:
        grid = GridSpec.covering(bounding_box(d), c.cell_size)
    surf = gwr_mod.gwr_fit(d, h, grid, x1, y)
    f = gwr_mod.continuity_audit(surf, c.threshold_quantile)
    log.info("gwr: bandwidth %.4g, spearman %.3f, %d flagged cells", h, f.rank_correlation, len(f.flagged_cells))
    arts = [
        _write(out, "gwr_b1_est.svg", svg.render_heatmap(surf.b1_est, flagged=f.flagged_cells,
                                                          title="Local slope b1 with flagged discontinuities")),
        _write(out, "gwr_discontinuity.svg", svg.render_heatmap(f.discontinuity, title="Slope discontinuity")),
        _write(out, "gwr_residual.svg", svg.render_heatmap(surf.residual, ramp="diverging", title="GWR residual")),
    ]
    res = surf.residual.valid_values()
    metrics = {
        "bandwidth": h,
        "rank_correlation": f.rank_correlation,
        "flagged_cells": len(f.flagged_cells),
        "threshold": f.threshold,
        "threshold_quantile": c.threshold_quantile,
        "valid_cells": f.n_valid,
        "nodata_cells": int(surf.b1_est.nodata.sum()),
        "mean_abs_residual": float(np.mean(np.abs(res))) if res.size else None,
    }
    if "p_true" in d.attrs and grid is None:
        p = d.attrs["p_true"].reshape(surf.grid.shape)
        err = np.abs(surf.b1_est.values - p)[surf.b1_est.valid]
        metrics["mean_abs_b1_error"] = float(err.mean())
    notes.append("Spearman correlation between discontinuity score and |residual| across valid cells")
    return [Finding("gwr-continuity", "modeling", "gwr.discontinuity", f.severity, metrics, arts, notes)]


def divergence_severity(mean_angle: float) -> str:
    if mean_angle >= math.pi / 4:
        return "critical"
    if mean_angle >= math.pi / 12:
        return "warning"
    return "info"


def run_kde_window(local: PointDataset, full: PointDataset, window: Rect, out_dir, cfg: AuditConfig) -> list[Finding]:
    """Compare gradient directions of two KDE surfaces, each at its own Silverman bandwidth."""
    out = Path(out_dir)
    c = cfg.kde
    h_local = kde_mod.silverman_bandwidth(local)
    h_full = kde_mod.silverman_bandwidth(full)
    pad = 3 * max(h_local.hx, h_local.hy, h_full.hx, h_full.hy)
    grid = GridSpec.covering(bounding_box(full).expand(pad), c.window_cell_size)
    ra = kde_mod.kde_grid(local, h_local, grid)
    rb = kde_mod.kde_grid(full, h_full, grid)
    ga, gb = kde_mod.gradient_field(ra), kde_mod.gradient_field(rb)
    st = kde_mod.gradient_divergence(ga, gb, window)
    log.info("kde-window: mean angular deviation %.3f rad over %d cells", st.mean, st.n_cells)

    cx, cy = grid.centers()
    cols = np.flatnonzero((cx >= window.min_x) & (cx <= window.max_x))
    rows = np.flatnonzero((cy >= window.min_y) & (cy <= window.max_y))
    sub = GridSpec(grid.origin_x + cols[0] * grid.cell_size, grid.origin_y + rows[0] * grid.cell_size,
                   grid.cell_size, cols.size, rows.size)
    win = np.s_[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    arts = []
    for name, r, g in (("local", ra, ga), ("global", rb, gb)):
        vf = kde_mod.VectorField(sub, g.gx[win], g.gy[win])
        arts.append(_write(out, f"kde_window_{name}.svg", svg.render_heatmap(
            RasterGrid(sub, r.values[win]), quiver=vf, title=f"KDE gradient directions ({name})")))
        arts.append(_write(out, f"kde_full_{name}.svg", svg.render_heatmap(r, title=f"KDE surface ({name})")))
    ref = REFERENCE_VALUES["kde_silverman_bandwidths"]
    metrics = {
        "local.hx": h_local.hx, "local.hy": h_local.hy, "local.n": len(local),
        "global.hx": h_full.hx, "global.hy": h_full.hy, "global.n": len(full),
        "mean_angle": st.mean, "max_angle": st.max, "window_cells": st.n_cells, "skipped_cells": st.n_skipped,
        "reference.bandwidth_a": ref[0], "reference.bandwidth_b": ref[1],
    }
    notes = ["bandwidths from the rule of thumb sd * n^(-1/6) per axis",
             "reference bandwidths are quoted for context, not reproduced"]
    return [Finding("kde-window", "modeling", "kde.gradient_divergence", divergence_severity(st.mean), metrics,
                    arts, notes)]


def run_kde_sweep(d: PointDataset, out_dir, cfg: AuditConfig) -> list[Finding]:
    out = Path(out_dir)
    c = cfg.kde
    if not (0 < c.h_lo < c.h_hi):
        raise ParameterError(f"need 0 < h_lo < h_hi, got {c.h_lo}, {c.h_hi}")
    box = bounding_box(d)
    grid = GridSpec.covering(box.expand(max(3.0, 0.25 * box.diameter)), c.cell_size)
    sweep = kde_mod.bandwidth_sweep(d, c.h_lo, c.h_hi, c.steps, grid)
    res = kde_mod.false_center_audit(sweep, d, c.radius_factor)
    flagged = set(res.false_center_bandwidths)
    log.info("kde-sweep: %d of %d bandwidths flagged as false centers", len(flagged), len(res.sweep_bandwidths))
    arts = []
    for i, (t, frame) in enumerate(zip(res.mode_tracks, res.frames)):
        arts.append(_write(out, f"kde_sweep_{i:03d}.svg", svg.render_heatmap(
            frame, markers=[(t.x, t.y)], title=f"KDE bandwidth {t.bandwidth:.4g}")))
    arts.append(_write_csv(out, "kde_sweep.csv", ("bandwidth", "mode_x", "mode_y", "mode_density", "flagged"),
                           ((t.bandwidth, t.x, t.y, t.density, int(t.bandwidth in flagged)) for t in res.mode_tracks)))
    first = min(flagged) if flagged else None
    metrics = {
        "steps": len(res.sweep_bandwidths), "h_lo": c.h_lo, "h_hi": c.h_hi,
        "false_centers": len(flagged), "first_false_center_bandwidth": first,
        "median_nn_distance": res.nn_median, "radius_factor": c.radius_factor,
    }
    notes = ["a mode is a false center when its nearest data point is farther than "
             f"{c.radius_factor} x the median nearest-neighbor distance"]
    return [Finding("kde-sweep", "modeling", "kde.false_center", "warning" if flagged else "info", metrics,
                    arts, notes)]


# -- interpretation level --------------------------------------------------

def run_maup(r: RasterGrid, out_dir, cfg: AuditConfig) -> list[Finding]:
    out = Path(out_dir)
    c = cfg.maup
    parts = [maup_mod.make_block_partition(r, b, tuple(c.offset)) for b in c.block_sides]
    f = maup_mod.maup_audit(r, parts, c.q, c.ref_cell_side)
    cl = f.report.classes
    log.info("maup: unanimous %.4f, strong_majority %.4f, split %.4f", cl["unanimous"], cl["strong_majority"], cl["split"])
    arts = [_write(out, "maup_surface.svg", svg.render_heatmap(r, title="Attribute surface"))]
    for i, (p, b) in enumerate(zip(parts, f.binaries)):
        arts.append(_write(out, f"maup_partition_{i}_block{c.block_sides[i]}.svg", svg.render_heatmap(
            b, zones=p, title=f"Top {c.q:.0%} zones, block side {c.block_sides[i]}")))
    s = maup_mod._ref_blocks(r.spec, c.ref_cell_side)
    ref = GridSpec(r.origin_x, r.origin_y, r.cell_size * s, *f.report.agreement.shape[::-1])
    arts.append(_write(out, "maup_consistency.svg", svg.render_heatmap(
        RasterGrid(ref, f.report.agreement.astype(float)), title="Agreement count per reference cell")))
    metrics = {f"class.{k}": v for k, v in cl.items()}
    metrics.update({f"threshold.block{b}": t for b, t in zip(c.block_sides, f.thresholds)})
    metrics.update({"q": c.q, "ref_cell_side": c.ref_cell_side, "partitions": len(parts),
                    "reference_cells": int(f.report.agreement.size)})
    metrics.update({f"reference.{k}": v for k, v in REFERENCE_VALUES["maup_consistency"].items()})
    notes = [
        "reference-cell vote is the majority of its cells, ties count as top-quantile",
        "classes: unanimous = all partitions agree; strong_majority = all but one; split = the rest "
        "(reading the 3-of-4 agreement class as 'consistent for only two groupings' is an interpretation)",
        f"partitions: {', '.join(f.partitions)}",
    ]
    kind = "maup.inconsistency" if cl["unanimous"] < 1 else "maup.consistent"
    return [Finding("maup-consistency", "interpretation", kind, f.severity, metrics, arts, notes)]


def run_access(demand, facilities, out_dir, cfg: AuditConfig) -> list[Finding]:
    out = Path(out_dir)
    c = cfg.access
    spec = acc.DecaySpec(c.d0, c.w_at_d0)
    total = acc.three_sfca(demand, facilities, spec)
    strat = acc.stratified_accessibility(total, demand)
    f = acc.disparity_audit(strat, c.threshold_ratio)
    supply = [fac.supply for fac in facilities]
    log.info("access: overall %.6g, flagged %s", strat.overall_mean, ", ".join(f.flagged) or "none")
    box = bounding_box(PointDataset(total.x, total.y))
    grid = GridSpec.covering(box.expand(c.cell_size / 2), c.cell_size)
    arts = []
    site_rows = [[total.x[i], total.y[i], total.population[i], total.A[i]] for i in range(total.A.size)]
    metrics = {
        "overall_mean": strat.overall_mean,
        "conservation_residual": total.conservation_residual(supply),
        "unreached_sites": total.unreached_sites,
        "idle_facilities": len(total.idle_facilities),
        "threshold_ratio": c.threshold_ratio,
        "min_ratio": f.min_ratio,
        "max_ratio": f.max_ratio,
        "d0": c.d0,
        "w_at_d0": c.w_at_d0,
    }
    groups = acc.group_names(demand)
    for g in groups:
        metrics[f"group.{g}.mean"] = strat.group_means[g]
        metrics[f"group.{g}.ratio"] = f.ratios.get(g)
        metrics[f"group.{g}.flagged"] = int(g in f.flagged)
        gres = acc.group_specific_access(demand, facilities, spec, g)
        metrics[f"group.{g}.specific_mean"] = gres.overall_mean
        metrics[f"group.{g}.conservation_residual"] = gres.conservation_residual(supply)
        nt, ng, diff = acc.normalized_difference_map(total, gres, grid)
        if g == groups[0]:
            arts.append(_write(out, "access_total.svg", svg.render_heatmap(nt, title="Normalized accessibility, total")))
        arts.append(_write(out, f"access_group_{g}.svg", svg.render_heatmap(ng, title=f"Normalized accessibility, {g}")))
        arts.append(_write(out, f"access_difference_{g}.svg", svg.render_heatmap(
            diff, ramp="diverging", title=f"Total minus {g}")))
        for i in range(len(site_rows)):
            site_rows[i].append(gres.A[i])
    arts.append(_write_csv(out, "access_sites.csv", ("x", "y", "pop_total", "A_total", *[f"A_{g}" for g in groups]),
                           site_rows))
    notes = [
        "group means weight the total-population scores by group population",
        "difference maps use group-specific runs where the group is the only demand",
        "decay: Gaussian truncated at d0, weight w_at_d0 at the boundary",
    ]
    if total.idle_facilities:
        notes.append(f"facilities without reachable demand: {list(total.idle_facilities)}")
    return [Finding("access-disparity", "interpretation", "access.disparity", f.severity, metrics, arts, notes)]


# -- demos -----------------------------------------------------------------

def simpson_demo_data(cfg: AuditConfig) -> PointDataset:
    c = cfg.simpson
    return gen_simpson_regions(c.n_per_region, noise_sd=c.noise_sd, var1_sd=c.var1_sd, seed=cfg.seed)


def gwr_demo_data(cfg: AuditConfig) -> PointDataset:
    c = cfg.gwr
    n = c.grid_size
    return gen_gwr_surface(c.kind, GridSpec(0, 0, 1, n, n), noise_sd=c.noise_sd, p_levels=tuple(c.p_levels),
                           seed=cfg.seed)


def kde_window_demo_data(cfg: AuditConfig):
    full = gen_clusters(WINDOW_CENTERS, WINDOW_SIGMAS, WINDOW_COUNTS, cfg.seed)
    local = full.subset(full.group_mask("1"))
    h = kde_mod.silverman_bandwidth(local)
    box = bounding_box(local).expand(2 * max(h.hx, h.hy))
    return local, full, box


def kde_sweep_demo_data(cfg: AuditConfig) -> PointDataset:
    return gen_clusters(SWEEP_CENTERS, SWEEP_SIGMAS, SWEEP_COUNTS, cfg.seed)


def maup_demo_data(cfg: AuditConfig) -> RasterGrid:
    return gen_random_surface(cfg.maup.side, cfg.maup.smoothness, cfg.seed)


def run_demo(experiment: str, out_dir, cfg: AuditConfig, timestamp: bool = True) -> AuditReport:
    """Generate the experiment's data, audit it, and write ``report.json``."""
    if experiment not in EXPERIMENTS:
        raise ParameterError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if experiment == "simpson":
        d = simpson_demo_data(cfg)
        with open(out / "simpson_data.csv", "w", newline="", encoding="utf-8") as fh:
            write_points_csv(d, fh)
        findings = run_simpson(d, "var1", "var2", out, cfg)
        findings[0].artifacts.append("simpson_data.csv")
    elif experiment == "gwr":
        findings = run_gwr(gwr_demo_data(cfg), out, cfg)
    elif experiment == "kde-window":
        local, full, window = kde_window_demo_data(cfg)
        findings = run_kde_window(local, full, window, out, cfg)
    elif experiment == "kde-sweep":
        findings = run_kde_sweep(kde_sweep_demo_data(cfg), out, cfg)
    elif experiment == "maup":
        findings = run_maup(maup_demo_data(cfg), out, cfg)
    else:
        demand, facilities = gen_county(seed=cfg.seed)
        with open(out / "county_demand.csv", "w", newline="", encoding="utf-8") as fh:
            acc.write_demand_csv(demand, fh)
        with open(out / "county_facilities.csv", "w", newline="", encoding="utf-8") as fh:
            acc.write_facilities_csv(facilities, fh)
        findings = run_access(demand, facilities, out, cfg)
        findings[0].artifacts += ["county_demand.csv", "county_facilities.csv"]
        findings[0].notes.append("synthetic county; not real demographic data")
    config = cfg.to_dict()
    config["experiment"] = experiment
    report = AuditReport(findings, config, cfg.seed, now_utc() if timestamp else None)
    write_report(report, out)
    return report
