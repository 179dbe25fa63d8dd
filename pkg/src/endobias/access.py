"""Three-step floating catchment area (3SFCA) accessibility and its
population-group stratifications.

Distance decay is a Gaussian truncated at the catchment radius ``d0`` and
calibrated so the weight at ``d0`` equals ``w_at_d0``::

    W(d) = exp(-d^2 / beta),  beta = d0^2 / ln(1 / w_at_d0),  d <= d0
    W(d) = 0,                  d > d0

Steps, for demand sites i and facilities j:

1. ``G_ij = W_ij / sum_k W_ik`` over facilities within reach of i
2. ``R_j = S_j / sum_i G_ij W_ij P_i``
3. ``A_i = sum_j G_ij W_ij R_j``

so that ``sum_i P_i A_i`` equals the total supply of facilities that have
any reachable demand.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import GridSpec, PointDataset, RasterGrid, _as_text, rasterize
from .errors import DegenerateDataError, EmptyInputError, ParameterError, ParseError, SchemaError


@dataclass(frozen=True)
class DemandSite:
    x: float
    y: float
    pop_total: float
    pop_by_group: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.pop_total < 0 or any(v < 0 for v in self.pop_by_group.values()):
            raise ParameterError("populations must be non-negative")
        if sum(self.pop_by_group.values()) > self.pop_total + 1e-9 * max(1.0, self.pop_total):
            raise ParameterError("group populations exceed the site total")


@dataclass(frozen=True)
class Facility:
    x: float
    y: float
    supply: float

    def __post_init__(self):
        if not self.supply > 0:
            raise ParameterError(f"facility supply must be positive, got {self.supply}")


@dataclass(frozen=True)
class DecaySpec:
    d0: float
    w_at_d0: float = 0.01

    def __post_init__(self):
        if not self.d0 > 0:
            raise ParameterError(f"catchment radius must be positive, got {self.d0}")
        if not 0 < self.w_at_d0 < 1:
            raise ParameterError(f"w_at_d0 must lie in (0, 1), got {self.w_at_d0}")

    @property
    def beta(self) -> float:
        return self.d0 * self.d0 / math.log(1.0 / self.w_at_d0)


@dataclass(frozen=True)
class AccessibilityResult:
    A: np.ndarray
    population: np.ndarray
    x: np.ndarray
    y: np.ndarray
    overall_mean: float | None
    selector: str = "total"
    R: np.ndarray | None = None
    unreached_sites: int = 0
    idle_facilities: tuple[int, ...] = ()
    group_means: Mapping[str, float | None] = field(default_factory=dict)

    def conservation_residual(self, supply) -> float:
        """Relative gap between served supply and ``sum P_i A_i``."""
        supply = np.asarray(supply, dtype=float)
        active = np.ones(supply.size, dtype=bool)
        active[list(self.idle_facilities)] = False
        total = supply[active].sum()
        if total == 0:
            return 0.0
        return float(abs(self.population @ self.A - total) / total)


@dataclass(frozen=True)
class StratifiedAccess:
    overall_mean: float
    group_means: dict
    group_population: dict


@dataclass(frozen=True)
class AccessFinding:
    overall_mean: float
    ratios: dict
    flagged: tuple[str, ...]
    threshold_ratio: float
    min_ratio: float | None
    max_ratio: float | None
    severity: str


def decay_weight(d, spec: DecaySpec):
    """Truncated Gaussian decay; accepts scalars or arrays."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ParameterError("distances must be non-negative")
    w = np.where(d <= spec.d0, np.exp(-(d * d) / spec.beta), 0.0)
    return float(w) if w.ndim == 0 else w


def _population(demand: Sequence[DemandSite], selector: str) -> np.ndarray:
    if selector == "total":
        return np.array([s.pop_total for s in demand], dtype=float)
    if not any(selector in s.pop_by_group for s in demand):
        raise SchemaError(f"no demand site carries group {selector!r}")
    return np.array([s.pop_by_group.get(selector, 0.0) for s in demand], dtype=float)


def three_sfca(demand: Sequence[DemandSite], facilities: Sequence[Facility], spec: DecaySpec,
               population: str = "total") -> AccessibilityResult:
    """Accessibility score per demand site.

    ``population`` selects ``pop_total`` or one group's population as the
    demand ``P_i``. Facilities with no reachable weighted demand get no ratio
    and are listed in ``idle_facilities``; sites with no facility in reach get
    ``A_i = 0`` and are counted in ``unreached_sites``.
    """
    if not demand or not facilities:
        raise EmptyInputError("need at least one demand site and one facility")
    P = _population(demand, population)
    dx = np.array([s.x for s in demand], dtype=float)
    dy = np.array([s.y for s in demand], dtype=float)
    fx = np.array([f.x for f in facilities], dtype=float)
    fy = np.array([f.y for f in facilities], dtype=float)
    S = np.array([f.supply for f in facilities], dtype=float)
    D = np.hypot(dx[:, None] - fx[None, :], dy[:, None] - fy[None, :])
    W = decay_weight(D, spec)
    row = W.sum(axis=1, keepdims=True)
    G = np.divide(W, row, out=np.zeros_like(W), where=row > 0)
    GW = G * W
    den = P @ GW
    active = den > 0
    R = np.divide(S, den, out=np.full_like(S, np.nan), where=active)
    A = GW[:, active] @ R[active]
    total_p = P.sum()
    overall = float(P @ A / total_p) if total_p > 0 else None
    return AccessibilityResult(
        A=A, population=P, x=dx, y=dy, overall_mean=overall, selector=population, R=R,
        unreached_sites=int(np.count_nonzero(row[:, 0] == 0)),
        idle_facilities=tuple(int(j) for j in np.flatnonzero(~active)),
    )


def group_names(demand: Sequence[DemandSite]) -> list[str]:
    names = set()
    for s in demand:
        names.update(s.pop_by_group)
    return sorted(names)


def stratified_accessibility(result_total: AccessibilityResult, demand: Sequence[DemandSite]) -> StratifiedAccess:
    """Population-weighted means of the total-population scores, overall and per group."""
    groups = group_names(demand)
    if not groups:
        raise SchemaError("demand sites carry no population groups")
    A = result_total.A
    P = np.array([s.pop_total for s in demand], dtype=float)
    if P.sum() == 0:
        raise DegenerateDataError("total population is zero")
    overall = float(P @ A / P.sum())
    means, pops = {}, {}
    for g in groups:
        Pg = np.array([s.pop_by_group.get(g, 0.0) for s in demand], dtype=float)
        pops[g] = float(Pg.sum())
        means[g] = float(Pg @ A / Pg.sum()) if Pg.sum() > 0 else None
    return StratifiedAccess(overall, means, pops)


def group_specific_access(demand: Sequence[DemandSite], facilities: Sequence[Facility], spec: DecaySpec,
                          group: str) -> AccessibilityResult:
    """3SFCA with one group's population as the only demand."""
    return three_sfca(demand, facilities, spec, population=group)


def _minmax(r: RasterGrid) -> RasterGrid:
    vals = r.valid_values()
    if vals.size == 0:
        return r
    lo, hi = vals.min(), vals.max()
    norm = np.full(r.spec.shape, 0.5) if hi == lo else (r.values - lo) / (hi - lo)
    return r.replace(np.where(r.nodata, np.nan, norm), r.nodata)


def normalized_difference_map(a_total: AccessibilityResult, a_group: AccessibilityResult, grid: GridSpec):
    """Rasterize both score sets, min-max normalize each, and subtract.

    Returns ``(normalized_total, normalized_group, total - group)``. A constant
    surface normalizes to 0.5.
    """
    if a_total.A.shape != a_group.A.shape or not (
        np.array_equal(a_total.x, a_group.x) and np.array_equal(a_total.y, a_group.y)
    ):
        raise ParameterError("results must come from the same demand sites")
    nt = _minmax(rasterize(PointDataset(a_total.x, a_total.y, {"A": a_total.A}), "A", grid, "mean"))
    ng = _minmax(rasterize(PointDataset(a_group.x, a_group.y, {"A": a_group.A}), "A", grid, "mean"))
    nod = nt.nodata | ng.nodata
    diff = RasterGrid(grid, np.where(nod, np.nan, nt.values - ng.values), nod)
    return nt, ng, diff


def disparity_audit(stratified: StratifiedAccess, threshold_ratio: float = 0.95) -> AccessFinding:
    """Flag groups whose mean score falls below ``threshold_ratio`` of the overall mean."""
    valid = {g: m for g, m in stratified.group_means.items() if m is not None}
    if len(stratified.group_means) < 2:
        raise ParameterError("disparity audit needs at least two groups")
    if not stratified.overall_mean:
        raise DegenerateDataError("overall mean accessibility is zero")
    ratios = {g: m / stratified.overall_mean for g, m in sorted(valid.items())}
    flagged = tuple(g for g, r in ratios.items() if r < threshold_ratio)
    lo = min(ratios.values()) if ratios else None
    hi = max(ratios.values()) if ratios else None
    if not flagged:
        sev = "info"
    elif lo < 0.5 * threshold_ratio:
        sev = "critical"
    else:
        sev = "warning"
    return AccessFinding(stratified.overall_mean, ratios, flagged, threshold_ratio, lo, hi, sev)


def load_demand_csv(source) -> list[DemandSite]:
    """Demand CSV: ``x, y, pop_total`` plus one ``pop_<group>`` column per group."""
    rows = _read_rows(source, ("x", "y", "pop_total"))
    out = []
    for rownum, row in rows:
        try:
            groups = {k[4:]: float(v) for k, v in row.items() if k.startswith("pop_") and k != "pop_total"}
            out.append(DemandSite(float(row["x"]), float(row["y"]), float(row["pop_total"]), groups))
        except ValueError as exc:
            raise ParseError(f"row {rownum}: {exc}") from None
    return out


def load_facilities_csv(source) -> list[Facility]:
    """Facility CSV: ``x, y, supply``."""
    rows = _read_rows(source, ("x", "y", "supply"))
    out = []
    for rownum, row in rows:
        try:
            out.append(Facility(float(row["x"]), float(row["y"]), float(row["supply"])))
        except ValueError as exc:
            raise ParseError(f"row {rownum}: {exc}") from None
    return out


def _read_rows(source, required):
    reader = csv.DictReader(_as_text(source))
    if reader.fieldnames is None:
        raise EmptyInputError("CSV input is empty")
    reader.fieldnames = [f.strip() for f in reader.fieldnames]
    for name in required:
        if name not in reader.fieldnames:
            raise SchemaError(f"column {name!r} not found in CSV header")
    rows = [(i, r) for i, r in enumerate(reader, start=2) if any((v or "").strip() for v in r.values())]
    if not rows:
        raise EmptyInputError("CSV input has no data rows")
    return rows


def write_demand_csv(demand: Sequence[DemandSite], sink) -> None:
    groups = group_names(demand)
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["x", "y", "pop_total", *[f"pop_{g}" for g in groups]])
    for s in demand:
        w.writerow([repr(s.x), repr(s.y), repr(s.pop_total), *[repr(s.pop_by_group.get(g, 0.0)) for g in groups]])


def write_facilities_csv(facilities: Sequence[Facility], sink) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["x", "y", "supply"])
    for f in facilities:
        w.writerow([repr(f.x), repr(f.y), repr(f.supply)])
