"""Gaussian product-kernel density surfaces and bandwidth audits.

No edge correction is applied, so densities are biased low near the data
boundary; the audits here compare surfaces, not absolute levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .core import GridSpec, PointDataset, RasterGrid, Rect
from .errors import DegenerateDataError, EmptyInputError, EmptyWindowError, ParameterError, SampleSizeError

_CHUNK = 4096
MIN_MAGNITUDE = 1e-15


@dataclass(frozen=True)
class Bandwidth2D:
    hx: float
    hy: float

    def __post_init__(self):
        for name in ("hx", "hy"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def isotropic(cls, h: float) -> "Bandwidth2D":
        return cls(h, h)


@dataclass(frozen=True)
class VectorField:
    spec: GridSpec
    gx: np.ndarray
    gy: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)


@dataclass(frozen=True)
class DivergenceStats:
    mean: float
    max: float
    n_cells: int
    n_skipped: int


@dataclass(frozen=True)
class ModeTrack:
    bandwidth: float
    row: int
    col: int
    x: float
    y: float
    density: float


@dataclass(frozen=True)
class KdeFinding:
    sweep_bandwidths: tuple[float, ...] = ()
    mode_tracks: tuple[ModeTrack, ...] = ()
    false_center_bandwidths: tuple[float, ...] = ()
    divergence_stats: DivergenceStats | None = None
    frames: tuple[RasterGrid, ...] = field(default=(), repr=False, compare=False)
    nn_median: float | None = None
    radius_factor: float | None = None


def silverman_bandwidth(d: PointDataset) -> Bandwidth2D:
    """Per-axis rule-of-thumb bandwidth ``sd * n ** (-1/6)``.

    In two dimensions the normal-reference factor ``(4 / (d + 2)) ** (1 / (d + 4))``
    is exactly 1, leaving only the sample standard deviation and ``n``.
    """
    n = len(d)
    if n < 2:
        raise SampleSizeError(f"need at least 2 points, got {n}")
    factor = n ** (-1.0 / 6.0)
    h = {}
    for axis, v in (("x", d.x), ("y", d.y)):
        sd = float(np.std(v, ddof=1))
        if sd == 0:
            raise DegenerateDataError(f"zero variance along the {axis} axis")
        h[axis] = sd * factor
    return Bandwidth2D(h["x"], h["y"])


def kernel_sums(d: PointDataset, h: Bandwidth2D, grid: GridSpec) -> np.ndarray:
    """Unnormalized Gaussian kernel sums at cell centers, shape ``grid.shape``."""
    cx, cy = grid.centers()
    # the product kernel separates: one factor per axis per point
    kx = np.exp(-((cx[None, :] - d.x[:, None]) ** 2) / (2 * h.hx * h.hx))  # (n, W)
    out = np.zeros(grid.shape)
    for start in range(0, len(d), _CHUNK):
        sl = slice(start, start + _CHUNK)
        ky = np.exp(-((cy[None, :] - d.y[sl, None]) ** 2) / (2 * h.hy * h.hy))  # (n, H)
        out += ky.T @ kx[sl]
    return out


def kde_grid(d: PointDataset, h: Bandwidth2D, grid: GridSpec) -> RasterGrid:
    """Density at every cell center, normalized by ``n * 2 pi hx hy``."""
    n = len(d)
    if n == 0:
        raise EmptyInputError("kernel density of an empty dataset")
    dens = kernel_sums(d, h, grid) / (n * 2 * math.pi * h.hx * h.hy)
    return RasterGrid(grid, dens)


def gradient_field(r: RasterGrid) -> VectorField:
    """Central differences inside, one-sided differences on the border."""
    if r.width < 3 or r.height < 3:
        raise ParameterError(f"gradient needs a grid of at least 3x3, got {r.width}x{r.height}")
    gy, gx = np.gradient(r.values, r.cell_size)
    return VectorField(r.spec, gx, gy)


def gradient_divergence(a: VectorField, b: VectorField, window: Rect) -> DivergenceStats:
    """Angle between two gradient fields, in [0, pi], over cells centered in ``window``.

    Cells where either vector is shorter than ``MIN_MAGNITUDE`` are skipped.
    """
    if a.spec != b.spec:
        raise ParameterError("vector fields must share a grid layout")
    cx, cy = a.spec.mesh()
    inside = window.contains(cx, cy)
    if not inside.any():
        raise EmptyWindowError("window does not intersect the grid")
    strong = (np.hypot(a.gx, a.gy) >= MIN_MAGNITUDE) & (np.hypot(b.gx, b.gy) >= MIN_MAGNITUDE)
    use = inside & strong
    skipped = int((inside & ~strong).sum())
    if not use.any():
        raise EmptyWindowError("no cell in the window has two non-vanishing gradients")
    ax, ay, bx, by = a.gx[use], a.gy[use], b.gx[use], b.gy[use]
    ang = np.arctan2(np.abs(ax * by - ay * bx), ax * bx + ay * by)
    return DivergenceStats(float(ang.mean()), float(ang.max()), int(use.sum()), skipped)


def bandwidth_sweep(d: PointDataset, h_lo: float, h_hi: float, steps: int, grid: GridSpec,
                    keep_frames: bool = True) -> KdeFinding:
    """Geometric sweep of isotropic bandwidths, tracking the global density mode."""
    if not (h_lo > 0 and h_hi > h_lo):
        raise ParameterError(f"need 0 < h_lo < h_hi, got {h_lo}, {h_hi}")
    if steps < 2:
        raise ParameterError("steps must be >= 2")
    hs = np.geomspace(h_lo, h_hi, steps)
    hs[0], hs[-1] = h_lo, h_hi
    cx, cy = grid.centers()
    tracks, frames = [], []
    for h in hs:
        r = kde_grid(d, Bandwidth2D.isotropic(float(h)), grid)
        row, col = np.unravel_index(int(np.argmax(r.values)), grid.shape)
        tracks.append(ModeTrack(float(h), int(row), int(col), float(cx[col]), float(cy[row]), float(r.values[row, col])))
        if keep_frames:
            frames.append(r)
    return KdeFinding(tuple(float(h) for h in hs), tuple(tracks), frames=tuple(frames))


def median_nn_distance(d: PointDataset) -> float:
    if len(d) < 2:
        raise SampleSizeError("nearest-neighbor distance needs at least 2 points")
    pts = np.column_stack([d.x, d.y])
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(dist[:, 1]))


def false_center_audit(sweep: KdeFinding, d: PointDataset, radius_factor: float = 2.0) -> KdeFinding:
    """Flag bandwidths whose density mode sits far from every data point.

    A mode is a false center when its distance to the nearest point exceeds
    ``radius_factor`` times the median nearest-neighbor spacing of the data.
    """
    if not sweep.mode_tracks:
        raise ParameterError("sweep has no mode tracks")
    nn = median_nn_distance(d)
    tree = cKDTree(np.column_stack([d.x, d.y]))
    flagged = []
    for t in sweep.mode_tracks:
        dist, _ = tree.query([t.x, t.y])
        if dist > radius_factor * nn:
            flagged.append(t.bandwidth)
    return replace(sweep, false_center_bandwidths=tuple(flagged), nn_median=nn, radius_factor=radius_factor)
