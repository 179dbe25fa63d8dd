"""Zonal aggregation under alternative partitions and the consistency of
top-quantile classifications across them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import GridSpec, RasterGrid
from .errors import EmptyInputError, ParameterError

CLASSES = ("unanimous", "strong_majority", "split")


@dataclass(frozen=True)
class ZonePartition:
    """Dense zone id per cell of a grid layout."""

    spec: GridSpec
    zone_of: np.ndarray  # (height, width) int
    zone_count: int
    label: str = ""

    def __post_init__(self):
        z = np.array(self.zone_of, dtype=np.int64, copy=True)
        if z.shape != self.spec.shape:
            raise ParameterError("zone_of shape does not match the grid")
        if z.size and (z.min() < 0 or z.max() >= self.zone_count):
            raise ParameterError("zone ids must lie in [0, zone_count)")
        if np.unique(z).size != self.zone_count:
            raise ParameterError("zone ids must be dense")
        z.setflags(write=False)
        object.__setattr__(self, "zone_of", z)

    @classmethod
    def from_labels(cls, spec: GridSpec, labels, label: str = "") -> "ZonePartition":
        """Build a partition from arbitrary per-cell labels, renumbering densely."""
        labels = np.asarray(labels)
        _, inv = np.unique(labels.reshape(-1), return_inverse=True)
        inv = inv.reshape(spec.shape)
        return cls(spec, inv, int(inv.max()) + 1, label)

    def cell_counts(self) -> np.ndarray:
        return np.bincount(self.zone_of.reshape(-1), minlength=self.zone_count)


@dataclass(frozen=True)
class ZonalStats:
    partition: ZonePartition
    means: np.ndarray
    nodata: np.ndarray


@dataclass(frozen=True)
class ConsistencyReport:
    ref_cell_side: float
    classes: dict
    agreement: np.ndarray  # per reference cell, (rows, cols)
    n_groupings: int

    @property
    def unanimous(self) -> float:
        return self.classes["unanimous"]


@dataclass(frozen=True)
class MaupFinding:
    report: ConsistencyReport
    thresholds: tuple[float, ...]
    partitions: tuple[str, ...]
    binaries: tuple[RasterGrid, ...]
    severity: str
    q: float


def make_block_partition(grid: RasterGrid | GridSpec, block_side: int, offset: tuple[int, int] = (0, 0)) -> ZonePartition:
    """Square blocks of ``block_side`` cells anchored at ``offset`` (col, row).

    Blocks clipped by the grid border become smaller zones.
    """
    spec = grid.spec if isinstance(grid, RasterGrid) else grid
    if int(block_side) != block_side or block_side < 1:
        raise ParameterError(f"block_side must be a positive integer, got {block_side}")
    ox, oy = offset
    rows, cols = np.indices(spec.shape)
    bx = np.floor_divide(cols - ox, block_side)
    by = np.floor_divide(rows - oy, block_side)
    key = (by - by.min()) * (bx.max() - bx.min() + 1) + (bx - bx.min())
    return ZonePartition.from_labels(spec, key, label=f"block{block_side}@{ox},{oy}")


def zonal_mean(r: RasterGrid, p: ZonePartition) -> ZonalStats:
    """Mean of valid cells per zone; zones without valid cells are no-data."""
    if r.spec != p.spec:
        raise ParameterError("raster and partition layouts differ")
    z = p.zone_of.reshape(-1)
    valid = r.valid.reshape(-1)
    vals = np.where(valid, r.values.reshape(-1), 0.0)
    sums = np.bincount(z, weights=vals, minlength=p.zone_count)
    cnt = np.bincount(z, weights=valid.astype(float), minlength=p.zone_count)
    nod = cnt == 0
    means = np.divide(sums, cnt, out=np.full_like(sums, np.nan), where=~nod)
    return ZonalStats(p, means, nod)


def top_quantile_threshold(zone_values: ZonalStats, q: float) -> float:
    if not 0 < q < 1:
        raise ParameterError(f"q must lie in (0, 1), got {q}")
    ok = zone_values.means[~zone_values.nodata]
    if ok.size == 0:
        raise EmptyInputError("every zone is no-data")
    return float(np.quantile(ok, 1.0 - q, method="linear"))


def top_quantile_binarize(zone_values: ZonalStats, q: float = 0.25) -> RasterGrid:
    """Label cells 1 when their zone mean reaches the top-``q`` threshold.

    The threshold is the linearly interpolated ``1 - q`` quantile of the valid
    zone means; zones tied with it are included. No-data zones get 0.
    """
    thr = top_quantile_threshold(zone_values, q)
    top = ~zone_values.nodata & (np.nan_to_num(zone_values.means, nan=-np.inf) >= thr)
    p = zone_values.partition
    return RasterGrid(p.spec, top[p.zone_of].astype(float))


def _ref_blocks(spec: GridSpec, ref_cell_side: float) -> int:
    k = ref_cell_side / spec.cell_size
    if not ref_cell_side > 0 or abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ParameterError(f"ref_cell_side must be a positive multiple of the cell size {spec.cell_size}")
    return int(round(k))


def consistency_stats(binaries: Sequence[RasterGrid], ref_cell_side: float = 10) -> ConsistencyReport:
    """Agreement of binary maps on a coarser reference grid.

    Each map votes one label per reference cell (majority of its cells, ties
    to 1). The agreement count is the size of the largest block of identical
    votes among the k maps. Classes: ``unanimous`` (k), ``strong_majority``
    (k - 1 when that is still a strict majority), ``split`` (everything else).
    Reference cells clipped by the grid border are kept as partial cells.
    """
    if len(binaries) < 2:
        raise ParameterError("need at least two binary maps")
    spec = binaries[0].spec
    if any(b.spec != spec for b in binaries):
        raise ParameterError("binary maps must share a grid layout")
    s = _ref_blocks(spec, ref_cell_side)
    nr, nc = math.ceil(spec.height / s), math.ceil(spec.width / s)
    rows, cols = np.indices(spec.shape)
    ref = (rows // s) * nc + cols // s
    size = np.bincount(ref.reshape(-1), minlength=nr * nc)
    k = len(binaries)
    ones = np.zeros(nr * nc)
    for b in binaries:
        frac = np.bincount(ref.reshape(-1), weights=(b.values.reshape(-1) > 0.5), minlength=nr * nc) / size
        ones += frac >= 0.5
    agreement = np.maximum(ones, k - ones).astype(int)
    n_unan = int(np.count_nonzero(agreement == k))
    # k - 1 only counts as a majority class when it is more than half of k
    n_strong = int(np.count_nonzero(agreement == k - 1)) if 2 * (k - 1) > k else 0
    n = agreement.size
    classes = {
        "unanimous": n_unan / n,
        "strong_majority": n_strong / n,
        "split": (n - n_unan - n_strong) / n,
    }
    return ConsistencyReport(float(ref_cell_side), classes, agreement.reshape(nr, nc), k)


def severity_for_unanimous(frac: float) -> str:
    if frac >= 1.0:
        return "info"
    if frac >= 0.5:
        return "warning"
    return "critical"


def maup_audit(r: RasterGrid, partitions: Sequence[ZonePartition], q: float = 0.25, ref_cell_side: float = 10) -> MaupFinding:
    """Binarize ``r`` under every partition and measure cross-partition agreement."""
    if not partitions:
        raise ParameterError("need at least one partition")
    binaries, thresholds = [], []
    for p in partitions:
        zs = zonal_mean(r, p)
        thresholds.append(top_quantile_threshold(zs, q))
        binaries.append(top_quantile_binarize(zs, q))
    if len(binaries) == 1:
        binaries = binaries * 2
    rep = consistency_stats(binaries, ref_cell_side)
    return MaupFinding(rep, tuple(thresholds), tuple(p.label for p in partitions), tuple(binaries),
                       severity_for_unanimous(rep.unanimous), q)
