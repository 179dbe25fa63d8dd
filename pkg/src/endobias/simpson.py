"""Pooled versus grouped regression and Simpson's-paradox detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .core import PointDataset
from .errors import DegenerateDataError, ParameterError, SampleSizeError, SchemaError

KINDS = ("sign_reversal", "significance_loss", "mixed_groups", "none")


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_se: float
    t_stat: float
    p_value: float
    r2: float
    n: int

    def significant(self, alpha: float) -> bool:
        return self.p_value < alpha

    def as_metrics(self, prefix: str) -> dict:
        return {f"{prefix}.{k}": getattr(self, k) for k in ("slope", "intercept", "slope_se", "t_stat", "p_value", "r2", "n")}


@dataclass(frozen=True)
class SimpsonFinding:
    kind: str
    pooled: RegressionFit
    per_group: Mapping[str, RegressionFit]
    alpha: float
    notes: tuple[str, ...] = ()
    metrics: Mapping[str, float] = field(default_factory=dict)


def fit_ols(xs, ys) -> RegressionFit:
    """Ordinary least squares of ``ys`` on ``xs`` with a two-sided slope t-test."""
    x = np.asarray(xs, dtype=float).reshape(-1)
    y = np.asarray(ys, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ParameterError("xs and ys differ in length")
    n = x.size
    if n < 3:
        raise SampleSizeError(f"need at least 3 observations, got {n}")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0.0 or sxx <= 1e-300:
        raise DegenerateDataError("predictor has zero variance")
    syy = float(dy @ dy)
    slope = float(dx @ dy) / sxx
    intercept = ym - slope * xm
    resid = dy - slope * dx
    ssr = float(resid @ resid)
    df = n - 2
    se = math.sqrt(ssr / df / sxx)
    if se > 0:
        t = slope / se
        p = float(2.0 * stats.t.sf(abs(t), df))
    elif slope != 0:
        t, p = math.copysign(math.inf, slope), 0.0
    else:
        t, p = 0.0, 1.0
    r2 = 1.0 if syy == 0 else max(0.0, min(1.0, 1.0 - ssr / syy))
    return RegressionFit(slope, float(intercept), se, t, p, r2, n)


def _group_keys(d: PointDataset, group_key: str | None) -> list[str]:
    if group_key is None or group_key == "group":
        if d.groups is None:
            raise SchemaError("dataset has no group labels")
        return list(d.groups)
    col = d.column(group_key)
    return [repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in col]


def fit_grouped(d: PointDataset, xvar: str, yvar: str, group_key: str | None = None) -> dict[str, RegressionFit]:
    """Independent OLS fit per group, keyed by sorted label.

    ``group_key`` is None (or ``"group"``) for the dataset's group labels, or
    the name of an attribute whose distinct values define the groups.
    """
    x, y = d.column(xvar), d.column(yvar)
    keys = np.array(_group_keys(d, group_key), dtype=object)
    out = {}
    for label in sorted(set(keys)):
        m = keys == label
        if m.sum() < 3:
            raise SampleSizeError(f"group {label!r} has {int(m.sum())} records; need at least 3")
        out[label] = fit_ols(x[m], y[m])
    return out


def detect_simpson(pooled: RegressionFit, per_group: Mapping[str, RegressionFit], alpha: float = 0.05) -> SimpsonFinding:
    """Classify the pooled-versus-grouped pattern.

    Significant group slopes of both signs give ``mixed_groups``. Otherwise,
    if every group is significant with common sign s, a pooled slope that is
    significant with sign -s is a ``sign_reversal`` and a non-significant
    pooled slope is a ``significance_loss``. Anything else is ``none``.
    """
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if not per_group:
        raise ParameterError("per_group is empty")
    groups = dict(sorted(per_group.items()))
    sig = {k: f for k, f in groups.items() if f.significant(alpha)}
    signs = {int(np.sign(f.slope)) for f in sig.values()}
    metrics = {
        "alpha": alpha,
        "n_groups": len(groups),
        "n_significant_groups": len(sig),
        "pooled_slope": pooled.slope,
        "pooled_p_value": pooled.p_value,
    }
    for k, f in groups.items():
        metrics[f"group.{k}.slope"] = f.slope
        metrics[f"group.{k}.p_value"] = f.p_value
    notes = []
    if len(signs) > 1:
        kind = "mixed_groups"
    elif len(sig) < len(groups):
        kind = "none"
        notes.append("insufficient evidence: at least one group slope is not significant")
        metrics["insufficient_evidence"] = 1
    else:
        s = signs.pop()
        if not pooled.significant(alpha):
            kind = "significance_loss"
        elif np.sign(pooled.slope) == -s:
            kind = "sign_reversal"
        else:
            kind = "none"
    return SimpsonFinding(kind, pooled, groups, alpha, tuple(notes), metrics)


@dataclass(frozen=True)
class ParallelCoordsTable:
    axes: tuple[str, ...]
    values: np.ndarray  # (n_records, n_axes)
    groups: tuple[str, ...] | None
    normalization: str

    def __len__(self):
        return self.values.shape[0]


def parallel_coords_table(d: PointDataset, axes: Sequence[str], normalization: str = "minmax") -> ParallelCoordsTable:
    """Per-record axis values, each axis normalized independently.

    ``minmax`` maps to [0, 1] (a constant axis becomes 0.5); ``zscore`` uses the
    population standard deviation (a constant axis becomes 0).
    """
    if len(axes) < 2:
        raise ParameterError("need at least two axes")
    if normalization not in ("minmax", "zscore"):
        raise ParameterError(f"unknown normalization {normalization!r}")
    cols = []
    for name in axes:
        v = np.asarray(d.column(name), dtype=float)
        if normalization == "minmax":
            lo, hi = v.min(), v.max()
            cols.append(np.full_like(v, 0.5) if hi == lo else (v - lo) / (hi - lo))
        else:
            sd = v.std()
            cols.append(np.zeros_like(v) if sd == 0 else (v - v.mean()) / sd)
    values = np.column_stack(cols)
    values.setflags(write=False)
    return ParallelCoordsTable(tuple(axes), values, d.groups, normalization)
