"""Geographically weighted regression with one predictor, and a continuity
audit of the fitted slope surface.

The local model at each evaluation point is ``y ~ b0 + b1 * x1`` fitted by
weighted least squares with Gaussian weights ``exp(-d^2 / (2 h^2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import GridSpec, PointDataset, RasterGrid, bounding_box
from .errors import ParameterError, SampleSizeError

# local weighted x-variance below this marks a cell as no-data
DEGENERATE_VAR = 1e-12
_CHUNK = 512
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class CoefficientSurface:
    """Local coefficients on a grid, plus residuals where samples sit in cells."""

    b1_est: RasterGrid
    b0_est: RasterGrid
    residual: RasterGrid
    bandwidth: float
    kernel: str = "gaussian"

    @property
    def grid(self) -> GridSpec:
        return self.b1_est.spec


@dataclass(frozen=True)
class LocalFit:
    """Per-point WLS estimates; ``valid`` is False where the local design is degenerate."""

    b0: np.ndarray
    b1: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class GwrFinding:
    discontinuity: RasterGrid
    rank_correlation: float
    flagged_cells: tuple[tuple[int, int], ...]  # (row, col)
    threshold: float
    bandwidth: float
    n_valid: int
    severity: str


def _kernel(d2: np.ndarray, bandwidth: float, kernel: str) -> np.ndarray:
    if kernel == "gaussian":
        return np.exp(-d2 / (2.0 * bandwidth * bandwidth))
    if kernel == "bisquare":
        raise NotImplementedError("bisquare kernel is reserved but not implemented")
    raise ParameterError(f"unknown kernel {kernel!r}")


def local_wls(px, py, sx, sy, x1, yv, bandwidth: float, kernel: str = "gaussian", exclude_self: bool = False) -> LocalFit:
    """Weighted simple regression of ``yv`` on ``x1`` at each point ``(px, py)``.

    With ``exclude_self`` the evaluation points must be the samples and each
    sample's own weight is zeroed (leave-one-out).
    """
    if not bandwidth > 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    px, py = np.asarray(px, float), np.asarray(py, float)
    # centering by global means limits cancellation in the moment formulas
    xc = x1 - x1.mean()
    yc = yv - yv.mean()
    m = px.size
    b0 = np.empty(m)
    b1 = np.empty(m)
    valid = np.empty(m, dtype=bool)
    for start in range(0, m, _CHUNK):
        sl = slice(start, min(start + _CHUNK, m))
        d2 = (px[sl, None] - sx[None, :]) ** 2 + (py[sl, None] - sy[None, :]) ** 2
        w = _kernel(d2, bandwidth, kernel)
        if exclude_self:
            rows = np.arange(sl.start, sl.stop)
            w[rows - sl.start, rows] = 0.0
        s0 = w.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mx = (w @ xc) / s0
            my = (w @ yc) / s0
            vxx = (w @ (xc * xc)) / s0 - mx * mx
            cxy = (w @ (xc * yc)) / s0 - mx * my
        ok = (s0 > 0) & np.isfinite(vxx) & (vxx >= DEGENERATE_VAR)
        slope = np.where(ok, cxy / np.where(ok, vxx, 1.0), np.nan)
        b1[sl] = slope
        b0[sl] = np.where(ok, (my + yv.mean()) - slope * (mx + x1.mean()), np.nan)
        valid[sl] = ok
    return LocalFit(b0, b1, valid)


def _samples(d: PointDataset, x1: str, y: str):
    if len(d) < 5:
        raise SampleSizeError(f"GWR needs at least 5 samples, got {len(d)}")
    return d.column(x1).astype(float), d.column(y).astype(float)


def gwr_fit(d: PointDataset, bandwidth: float, eval_grid: GridSpec | None = None,
            x1: str = "x1", y: str = "y_obs", kernel: str = "gaussian") -> CoefficientSurface:
    """Fit local slopes at every cell center of ``eval_grid``.

    ``eval_grid=None`` evaluates at the samples, which must then sit one per
    cell of the grid covering them at their spacing (the layout produced by
    :func:`~endobias.synthgen.gen_gwr_surface`). Residuals ``y - yhat`` are
    computed at sample locations and binned into the surface's grid.
    """
    if not bandwidth > 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    xv, yv = _samples(d, x1, y)
    grid = eval_grid or infer_sample_grid(d)
    cx, cy = grid.mesh()
    fit = local_wls(cx.reshape(-1), cy.reshape(-1), d.x, d.y, xv, yv, bandwidth, kernel)
    nodata = ~fit.valid.reshape(grid.shape)
    b1 = RasterGrid(grid, np.where(nodata, np.nan, fit.b1.reshape(grid.shape)), nodata)
    b0 = RasterGrid(grid, np.where(nodata, np.nan, fit.b0.reshape(grid.shape)), nodata)

    # residual at each sample uses the fit at that sample's own location
    at = local_wls(d.x, d.y, d.x, d.y, xv, yv, bandwidth, kernel)
    res = np.where(at.valid, yv - (at.b0 + at.b1 * xv), np.nan)
    col, row, inside = grid.cell_of(d.x, d.y)
    keep = inside & at.valid
    flat = row[keep] * grid.width + col[keep]
    sums = np.bincount(flat, weights=res[keep], minlength=grid.size)
    cnt = np.bincount(flat, minlength=grid.size)
    rnod = (cnt == 0).reshape(grid.shape)
    rvals = np.divide(sums, cnt, out=np.zeros_like(sums), where=cnt > 0).reshape(grid.shape)
    residual = RasterGrid(grid, np.where(rnod, np.nan, rvals), rnod)
    return CoefficientSurface(b1, b0, residual, float(bandwidth), kernel)


def infer_sample_grid(d: PointDataset) -> GridSpec:
    """Grid whose cell centers are the samples of a regular lattice."""
    ux = np.unique(d.x)
    uy = np.unique(d.y)
    if ux.size < 2 or uy.size < 2:
        raise ParameterError("cannot infer a grid from samples on a line; pass eval_grid")
    step = float(min(np.min(np.diff(ux)), np.min(np.diff(uy))))
    width = int(round((ux[-1] - ux[0]) / step)) + 1
    height = int(round((uy[-1] - uy[0]) / step)) + 1
    return GridSpec(float(ux[0] - step / 2), float(uy[0] - step / 2), step, width, height)


def loo_cv_score(d: PointDataset, bandwidth: float, x1: str = "x1", y: str = "y_obs", kernel: str = "gaussian") -> float:
    """Mean squared leave-one-out prediction error at one bandwidth.

    Samples whose leave-one-out design is degenerate are predicted by the
    global mean of the others.
    """
    xv, yv = _samples(d, x1, y)
    fit = local_wls(d.x, d.y, d.x, d.y, xv, yv, bandwidth, kernel, exclude_self=True)
    n = yv.size
    fallback = (yv.sum() - yv) / (n - 1)
    pred = np.where(fit.valid, fit.b0 + fit.b1 * xv, fallback)
    return float(np.mean((yv - pred) ** 2))


def select_bandwidth_cv(d: PointDataset, search: tuple[float, float], tolerance: float = 1e-2,
                        x1: str = "x1", y: str = "y_obs", kernel: str = "gaussian") -> float:
    """Golden-section search for the bandwidth minimizing leave-one-out CV error.

    The search endpoints are scored as well and win if they beat the interior
    optimum, so the result is never worse than either end of the range.
    """
    lo, hi = search
    if not (lo > 0 and hi > lo):
        raise ParameterError(f"search range must satisfy 0 < lo < hi, got {search}")
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive")
    if len(d) < 10:
        raise SampleSizeError(f"bandwidth selection needs at least 10 samples, got {len(d)}")

    def score(h):
        return loo_cv_score(d, h, x1, y, kernel)

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    e = a + _INVPHI * (b - a)
    fc, fe = score(c), score(e)
    while b - a > tolerance:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _INVPHI * (b - a)
            fc = score(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INVPHI * (b - a)
            fe = score(e)
    best, fbest = (c, fc) if fc <= fe else (e, fe)
    for h in (lo, hi):
        fh = score(h)
        if fh < fbest:
            best, fbest = h, fh
    return float(best)


def discontinuity_score(s: CoefficientSurface) -> RasterGrid:
    """Largest absolute b1 jump from each cell to its valid 4-neighbors."""
    b = s.b1_est.values
    valid = s.b1_est.valid
    h, w = b.shape
    out = np.full((h, w), -np.inf)
    seen = np.zeros((h, w), dtype=bool)
    pairs = (
        (np.s_[1:, :], np.s_[:-1, :]),
        (np.s_[:-1, :], np.s_[1:, :]),
        (np.s_[:, 1:], np.s_[:, :-1]),
        (np.s_[:, :-1], np.s_[:, 1:]),
    )
    for here, there in pairs:
        ok = valid[here] & valid[there]
        diff = np.where(ok, np.abs(np.where(ok, b[here] - b[there], 0.0)), -np.inf)
        out[here] = np.maximum(out[here], diff)
        seen[here] |= ok
    nodata = ~seen
    return RasterGrid(s.grid, np.where(nodata, np.nan, out), nodata)


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties; 0 if either side is constant."""
    ra = stats.rankdata(a)
    rb = stats.rankdata(b)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if den == 0:
        return 0.0
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))


def severity_for_rank(rho: float) -> str:
    if rho >= 0.5:
        return "critical"
    if rho >= 0.3:
        return "warning"
    return "info"


def continuity_audit(s: CoefficientSurface, threshold_quantile: float = 0.95) -> GwrFinding:
    """Relate slope discontinuity to residual size across the surface.

    Reports the Spearman correlation between the discontinuity score and
    ``|residual|`` over cells where both exist, and flags cells whose score
    is strictly above the ``threshold_quantile`` of the score distribution.
    """
    if not 0 < threshold_quantile < 1:
        raise ParameterError("threshold_quantile must lie in (0, 1)")
    score = discontinuity_score(s)
    both = score.valid & s.residual.valid
    n = int(both.sum())
    if n < 10:
        raise SampleSizeError(f"continuity audit needs at least 10 valid cells, got {n}")
    sc = score.values[both]
    rho = spearman(sc, np.abs(s.residual.values[both]))
    thr = float(np.quantile(score.valid_values(), threshold_quantile))
    rows, cols = np.nonzero(score.valid & (np.nan_to_num(score.values, nan=-np.inf) > thr))
    flagged = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    return GwrFinding(score, rho, flagged, thr, s.bandwidth, n, severity_for_rank(rho))


def domain_diameter(d: PointDataset) -> float:
    return bounding_box(d).diameter
