"""Seeded generators for the synthetic experiments.

All generators draw from numpy's PCG64 bit generator (64-bit output
permuted congruential generator) seeded with an unsigned 64-bit integer.
Gaussian variates are produced with the Box-Muller transform on PCG64
uniforms, so streams can be matched loosely by other implementations that
follow the same recipe. Output is a pure function of (parameters, seed).

The simulation sizes, boxes and noise levels are our own defaults; the
experiments these mimic publish none of them.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import GridSpec, PointDataset, RasterGrid, Rect
from .errors import ParameterError

SIMPSON_OFFSETS = ((0.0, 4.0), (2.0, 2.0), (4.0, 0.0))
SIMPSON_BOXES = (Rect(0, 0, 10, 10), Rect(10, 0, 20, 10), Rect(20, 0, 30, 10))
GWR_KINDS = ("step_x", "step_diag", "circular_patch", "smooth_ramp")

_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    if seed < 0 or seed > _MASK64:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def normal(rng: np.random.Generator, size, loc=0.0, scale=1.0) -> np.ndarray:
    """Box-Muller Gaussian draws (both variates of each pair are used)."""
    n = int(np.prod(size))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1]: keeps log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
    return loc + scale * z.reshape(size)


def gen_simpson_regions(
    n_per_region: int = 60,
    within_slope: float = 1.0,
    region_offsets: Sequence[tuple[float, float]] = SIMPSON_OFFSETS,
    noise_sd: float = 0.3,
    region_boxes: Sequence[Rect] = SIMPSON_BOXES,
    seed: int = 42,
    var1_sd: float = 0.5,
    labels: Sequence[str] = ("A", "B", "C"),
) -> PointDataset:
    """Three regions whose within-region trend disagrees with the pooled one.

    In region ``k`` with offset ``(m1, m2)``::

        var1 = m1 + N(0, var1_sd)
        var2 = m2 + within_slope * (var1 - m1) + N(0, noise_sd)

    Locations are uniform inside ``region_boxes[k]``. With the default
    offsets the region means fall on a line of slope -1, so pooling reverses
    a positive within-region slope.
    """
    if n_per_region < 3:
        raise ParameterError(f"n_per_region must be >= 3, got {n_per_region}")
    if noise_sd < 0 or var1_sd <= 0:
        raise ParameterError("noise_sd must be >= 0 and var1_sd > 0")
    if not (len(region_offsets) == len(region_boxes) == len(labels)):
        raise ParameterError("region_offsets, region_boxes and labels must have equal length")
    rng = make_rng(seed)
    parts = []
    for (m1, m2), box, label in zip(region_offsets, region_boxes, labels):
        x = box.min_x + box.width * rng.random(n_per_region)
        y = box.min_y + box.height * rng.random(n_per_region)
        dv = normal(rng, n_per_region, scale=var1_sd)
        eps = normal(rng, n_per_region, scale=noise_sd) if noise_sd > 0 else np.zeros(n_per_region)
        var1 = m1 + dv
        var2 = m2 + within_slope * dv + eps
        parts.append(PointDataset(x, y, {"var1": var1, "var2": var2}, [label] * n_per_region))
    return PointDataset.concat(parts)


def p_true_pattern(kind: str, grid: GridSpec, p_levels: tuple[float, float]) -> np.ndarray:
    """True coefficient surface of shape ``grid.shape`` for one named geometry."""
    lo, hi = p_levels
    if kind not in GWR_KINDS:
        raise ParameterError(f"unknown surface kind {kind!r}; expected one of {GWR_KINDS}")
    if kind != "smooth_ramp" and lo == hi:
        raise ParameterError("p_low and p_high must differ for step and patch surfaces")
    # normalized cell-center coordinates in (0, 1)
    u = (np.arange(grid.width) + 0.5) / grid.width
    v = (np.arange(grid.height) + 0.5) / grid.height
    uu, vv = np.meshgrid(u, v)
    if kind == "step_x":
        return np.where(uu < 0.5, lo, hi)
    if kind == "step_diag":
        return np.where(uu + vv < 1.0, lo, hi)
    if kind == "circular_patch":
        aspect = grid.width / grid.height
        r = np.hypot((uu - 0.5) * aspect, vv - 0.5)
        return np.where(r <= 0.25 * min(aspect, 1.0), hi, lo)
    return lo + (hi - lo) * uu


def gen_gwr_surface(
    kind: str,
    grid: GridSpec = GridSpec(0, 0, 1, 32, 32),
    x1_range: tuple[float, float] = (1.0, 5.0),
    noise_sd: float = 0.1,
    p_levels: tuple[float, float] = (1.0, 3.0),
    seed: int = 42,
) -> PointDataset:
    """One sample per cell center with ``y_obs = x1 * p_true + N(0, noise_sd)``.

    Returns attributes ``x1``, ``y_obs`` and ``p_true``; records are in row-major
    cell order (row 0 first).
    """
    if noise_sd < 0:
        raise ParameterError("noise_sd must be >= 0")
    if not x1_range[0] < x1_range[1]:
        raise ParameterError("x1_range must be an increasing pair")
    p = p_true_pattern(kind, grid, p_levels).reshape(-1)
    rng = make_rng(seed)
    n = grid.size
    x1 = x1_range[0] + (x1_range[1] - x1_range[0]) * rng.random(n)
    eps = normal(rng, n, scale=noise_sd) if noise_sd > 0 else np.zeros(n)
    cx, cy = grid.mesh()
    return PointDataset(cx.reshape(-1), cy.reshape(-1), {"x1": x1, "y_obs": x1 * p + eps, "p_true": p})


def gen_clusters(
    centers: Sequence[tuple[float, float]],
    sigmas: Sequence[float],
    counts: Sequence[int],
    seed: int = 42,
) -> PointDataset:
    """Isotropic Gaussian blobs, labelled by cluster index ("0", "1", ...).

    Each cluster is drawn from its own child stream, so the points of cluster
    ``k`` do not depend on the counts of the other clusters.
    """
    if not (len(centers) == len(sigmas) == len(counts)):
        raise ParameterError("centers, sigmas and counts must have equal length")
    if any(s <= 0 for s in sigmas):
        raise ParameterError("sigmas must be positive")
    if any(c < 0 for c in counts):
        raise ParameterError("counts must be non-negative")
    streams = np.random.SeedSequence(int(seed)).spawn(len(centers))
    xs, ys, labels = [], [], []
    for k, ((cx, cy), s, c) in enumerate(zip(centers, sigmas, counts)):
        rng = np.random.Generator(np.random.PCG64(streams[k]))
        xy = normal(rng, (c, 2), scale=s)
        xs.append(cx + xy[:, 0])
        ys.append(cy + xy[:, 1])
        labels += [str(k)] * c
    return PointDataset(np.concatenate(xs), np.concatenate(ys), {}, labels)


def gen_random_surface(side: int = 100, smoothness: int = 25, seed: int = 42) -> RasterGrid:
    """Smoothed white noise on a ``side`` x ``side`` unit grid, scaled to [0, 1].

    Uniform noise is passed ``smoothness`` times through a 3x3 mean filter with
    reflective borders, then min-max normalized (a constant field maps to 0.5).
    """
    if side < 1:
        raise ParameterError(f"side must be >= 1, got {side}")
    if smoothness < 0:
        raise ParameterError("smoothness must be >= 0")
    rng = make_rng(seed)
    z = rng.random((side, side))
    for _ in range(smoothness):
        z = ndimage.uniform_filter(z, size=3, mode="reflect")
    lo, hi = z.min(), z.max()
    z = np.full_like(z, 0.5) if hi == lo else (z - lo) / (hi - lo)
    return RasterGrid(GridSpec(0.0, 0.0, 1.0, side, side), z)


def gen_county(
    n_side: int = 24,
    n_facilities: int = 12,
    groups: Sequence[str] = ("white", "black", "asian", "other"),
    seed: int = 42,
    extent: float = 48.0,
):
    """Synthetic county: tract demand sites on a lattice and clustered facilities.

    Group shares vary smoothly across space so that groups sit at different
    distances from the facility cluster. Returns ``(demand, facilities)`` as
    lists of :class:`~endobias.access.DemandSite` and
    :class:`~endobias.access.Facility`.
    """
    from .access import DemandSite, Facility

    if n_side < 2 or n_facilities < 1 or not groups:
        raise ParameterError("need n_side >= 2, n_facilities >= 1 and at least one group")
    rng = make_rng(seed)
    step = extent / n_side
    coords = (np.arange(n_side) + 0.5) * step
    xx, yy = np.meshgrid(coords, coords)
    xx, yy = xx.reshape(-1), yy.reshape(-1)
    n = xx.size
    pop = np.round(200 + 1800 * rng.random(n))
    # each group has a home corner; its share decays away from it
    anchors = [(extent * a, extent * b) for a, b in ((0.25, 0.3), (0.85, 0.8), (0.3, 0.75), (0.7, 0.2))]
    raw = np.empty((len(groups), n))
    for g in range(len(groups)):
        ax, ay = anchors[g % len(anchors)]
        d = np.hypot(xx - ax, yy - ay) / extent
        raw[g] = np.exp(-4.0 * d**2) + 0.05 * rng.random(n)
    shares = raw / raw.sum(axis=0)
    demand = [
        DemandSite(float(xx[i]), float(yy[i]), float(pop[i]),
                   {g: float(pop[i] * shares[k, i]) for k, g in enumerate(groups)})
        for i in range(n)
    ]
    # facilities cluster toward the first group's home corner
    fx, fy = anchors[0]
    loc = normal(rng, (n_facilities, 2), scale=0.22 * extent)
    supply = np.round(1 + 4 * rng.random(n_facilities))
    facilities = [
        Facility(float(np.clip(fx + loc[j, 0], 0, extent)), float(np.clip(fy + loc[j, 1], 0, extent)),
                 float(supply[j]))
        for j in range(n_facilities)
    ]
    return demand, facilities
