"""Point datasets, raster grids and the CSV/GeoJSON readers.

Coordinates are planar and distances Euclidean; project real data before
loading it. Every container here is read-only after construction.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyInputError, ParameterError, ParseError, SchemaError

__all__ = [
    "Rect",
    "GridSpec",
    "RasterGrid",
    "PointDataset",
    "PointSchema",
    "load_points_csv",
    "write_points_csv",
    "load_points_geojson",
    "bounding_box",
    "rasterize",
]


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Rect:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y):
            raise ParameterError(f"inverted rectangle {self}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.min_x) & (x <= self.max_x) & (y >= self.min_y) & (y <= self.max_y)

    def expand(self, pad: float) -> "Rect":
        return Rect(self.min_x - pad, self.min_y - pad, self.max_x + pad, self.max_y + pad)


@dataclass(frozen=True)
class GridSpec:
    """Layout of a regular grid: lower-left origin, square cells, size in cells.

    Row 0 is the southernmost row; column 0 the westernmost column.
    """

    origin_x: float
    origin_y: float
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise ParameterError(f"cell_size must be positive, got {self.cell_size}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ParameterError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def covering(cls, rect: Rect, cell_size: float) -> "GridSpec":
        """Smallest grid anchored at the rectangle's lower-left corner that covers it."""
        width = max(1, math.ceil(rect.width / cell_size - 1e-12))
        height = max(1, math.ceil(rect.height / cell_size - 1e-12))
        # the subtraction above can round the far edge inward; grow until covered
        while rect.min_x + width * cell_size < rect.max_x:
            width += 1
        while rect.min_y + height * cell_size < rect.max_y:
            height += 1
        return cls(rect.min_x, rect.min_y, cell_size, width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def extent(self) -> Rect:
        return Rect(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.cell_size,
            self.origin_y + self.height * self.cell_size,
        )

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates along x (length width) and y (length height)."""
        cx = self.origin_x + (np.arange(self.width) + 0.5) * self.cell_size
        cy = self.origin_y + (np.arange(self.height) + 0.5) * self.cell_size
        return cx, cy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        cx, cy = self.centers()
        return np.meshgrid(cx, cy)

    def cell_of(self, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Column, row and inside-mask for coordinates.

        Cells are half-open ``[lo, lo + cell_size)``; a coordinate exactly on
        the grid's outer max edge belongs to the last cell.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.floor((x - self.origin_x) / self.cell_size).astype(np.int64)
        row = np.floor((y - self.origin_y) / self.cell_size).astype(np.int64)
        ext = self.extent
        col = np.where((col == self.width) & (x == ext.max_x), self.width - 1, col)
        row = np.where((row == self.height) & (y == ext.max_y), self.height - 1, row)
        inside = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        return col, row, inside


@dataclass(frozen=True)
class RasterGrid:
    """Scalar values on a :class:`GridSpec`, with an explicit no-data mask.

    ``values`` has shape ``(height, width)``. Cells flagged in ``nodata`` hold
    NaN so that accidental arithmetic on them cannot pass silently, but the
    mask is the authority.
    """

    spec: GridSpec
    values: np.ndarray
    nodata: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != self.spec.shape:
            raise ParameterError(f"values shape {values.shape} does not match grid {self.spec.shape}")
        if self.nodata is None:
            nodata = ~np.isfinite(values)
        else:
            nodata = np.array(self.nodata, dtype=bool, copy=True)
            if nodata.shape != values.shape:
                raise ParameterError("nodata mask shape does not match values")
        if np.any(~np.isfinite(values) & ~nodata):
            raise ParameterError("non-finite value in a cell not flagged as no-data")
        values[nodata] = np.nan
        values.setflags(write=False)
        nodata.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "nodata", nodata)

    origin_x = property(lambda self: self.spec.origin_x)
    origin_y = property(lambda self: self.spec.origin_y)
    cell_size = property(lambda self: self.spec.cell_size)
    width = property(lambda self: self.spec.width)
    height = property(lambda self: self.spec.height)

    @property
    def valid(self) -> np.ndarray:
        return ~self.nodata

    def masked(self) -> np.ma.MaskedArray:
        return np.ma.MaskedArray(self.values, mask=self.nodata)

    def valid_values(self) -> np.ndarray:
        return self.values[~self.nodata]

    def replace(self, values, nodata=None) -> "RasterGrid":
        return RasterGrid(self.spec, values, nodata)


@dataclass(frozen=True)
class PointDataset:
    """Georeferenced records stored column-wise.

    Every record shares the same attribute names; ``groups`` is either
    ``None`` or one non-empty label per record.
    """

    x: np.ndarray
    y: np.ndarray
    attrs: Mapping[str, np.ndarray] = field(default_factory=dict)
    groups: tuple[str, ...] | None = None

    def __post_init__(self):
        x = _frozen(self.x).reshape(-1)
        y = _frozen(self.y).reshape(-1)
        if x.shape != y.shape:
            raise ParameterError("x and y must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ParameterError("coordinates must be finite")
        attrs = {}
        for name, col in self.attrs.items():
            if name in ("x", "y"):
                raise SchemaError(f"attribute name {name!r} collides with a coordinate")
            col = _frozen(col).reshape(-1)
            if col.shape != x.shape:
                raise ParameterError(f"attribute {name!r} has {col.size} values for {x.size} records")
            attrs[name] = col
        groups = self.groups
        if groups is not None:
            groups = tuple(str(g) for g in groups)
            if len(groups) != x.size:
                raise ParameterError("one group label per record required")
            if any(g == "" for g in groups):
                raise ParameterError("group labels must be non-empty")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "attrs", MappingProxyType(attrs))
        object.__setattr__(self, "groups", groups)

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def attr_names(self) -> tuple[str, ...]:
        return tuple(self.attrs)

    @property
    def columns(self) -> tuple[str, ...]:
        return ("x", "y") + self.attr_names

    def column(self, name: str) -> np.ndarray:
        if name == "x":
            return self.x
        if name == "y":
            return self.y
        try:
            return self.attrs[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}; available: {', '.join(self.columns)}") from None

    def group_labels(self) -> list[str]:
        if self.groups is None:
            return []
        return sorted(set(self.groups))

    def group_mask(self, label: str) -> np.ndarray:
        if self.groups is None:
            raise SchemaError("dataset has no group labels")
        return np.array([g == label for g in self.groups], dtype=bool)

    def subset(self, mask) -> "PointDataset":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        groups = None if self.groups is None else tuple(self.groups[i] for i in idx)
        return PointDataset(self.x[idx], self.y[idx], {k: v[idx] for k, v in self.attrs.items()}, groups)

    def with_attrs(self, **cols) -> "PointDataset":
        attrs = dict(self.attrs)
        attrs.update(cols)
        return PointDataset(self.x, self.y, attrs, self.groups)

    def records(self) -> Iterator[dict]:
        for i in range(len(self)):
            yield {
                "x": float(self.x[i]),
                "y": float(self.y[i]),
                "attrs": {k: float(v[i]) for k, v in self.attrs.items()},
                "group": None if self.groups is None else self.groups[i],
            }

    @staticmethod
    def concat(parts: Sequence["PointDataset"]) -> "PointDataset":
        if not parts:
            raise EmptyInputError("nothing to concatenate")
        names = parts[0].attr_names
        if any(p.attr_names != names for p in parts):
            raise SchemaError("datasets have different attribute names")
        has_groups = [p.groups is not None for p in parts]
        if any(has_groups) and not all(has_groups):
            raise SchemaError("either all or none of the datasets must carry group labels")
        groups = None
        if all(has_groups):
            groups = tuple(g for p in parts for g in p.groups)
        return PointDataset(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.y for p in parts]),
            {n: np.concatenate([p.attrs[n] for p in parts]) for n in names},
            groups,
        )


@dataclass(frozen=True)
class PointSchema:
    """Column mapping for the CSV and GeoJSON readers.

    ``attrs=None`` takes every column other than the coordinates and group.
    """

    x: str = "x"
    y: str = "y"
    attrs: Sequence[str] | None = None
    group: str | None = None


def _as_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def load_points_csv(source, schema: PointSchema = PointSchema()) -> PointDataset:
    """Parse a comma-separated file with a header row into a PointDataset.

    ``source`` may be bytes, text, or a text/binary stream. Row numbers in
    parse errors count the header as row 1.
    """
    reader = csv.reader(_as_text(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyInputError("CSV input is empty") from None
    index = {name: i for i, name in enumerate(header)}
    fixed = [schema.x, schema.y] + ([schema.group] if schema.group else [])
    attr_names = list(schema.attrs) if schema.attrs is not None else [h for h in header if h not in fixed]
    for name in fixed + attr_names:
        if name not in index:
            raise SchemaError(f"column {name!r} not found in CSV header")

    numeric = [schema.x, schema.y] + attr_names
    cols = {name: [] for name in numeric}
    groups = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")
        for name in numeric:
            cell = row[index[name]].strip()
            try:
                cols[name].append(float(cell))
            except ValueError:
                raise ParseError(f"row {rownum}: column {name!r} is not numeric: {cell!r}") from None
        if schema.group:
            groups.append(row[index[schema.group]].strip())
    if not cols[schema.x]:
        raise EmptyInputError("CSV input has no data rows")
    return PointDataset(
        cols[schema.x],
        cols[schema.y],
        {name: cols[name] for name in attr_names},
        groups if schema.group else None,
    )


def write_points_csv(d: PointDataset, sink: IO[str], group_column: str = "group") -> None:
    """Write ``d`` in the reader's format; floats use shortest round-trip repr."""
    writer = csv.writer(sink, lineterminator="\n")
    header = ["x", "y", *d.attr_names]
    if d.groups is not None:
        header.append(group_column)
    writer.writerow(header)
    for i in range(len(d)):
        row = [repr(float(d.x[i])), repr(float(d.y[i]))]
        row += [repr(float(d.attrs[n][i])) for n in d.attr_names]
        if d.groups is not None:
            row.append(d.groups[i])
        writer.writerow(row)


def load_points_geojson(source, attrs: Sequence[str] | None = None, group: str | None = None) -> PointDataset:
    """Read a FeatureCollection of Point features; properties become attributes."""
    text = _as_text(source).read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid GeoJSON: {exc}") from None
    if doc.get("type") != "FeatureCollection":
        raise ParseError("expected a GeoJSON FeatureCollection")
    feats = doc.get("features") or []
    if not feats:
        raise EmptyInputError("FeatureCollection has no features")
    xs, ys, props, labels = [], [], [], []
    for k, feat in enumerate(feats):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Point":
            raise ParseError(f"feature {k}: geometry is not a Point")
        x, y = geom["coordinates"][:2]
        xs.append(float(x))
        ys.append(float(y))
        p = feat.get("properties") or {}
        props.append(p)
        if group is not None:
            if group not in p:
                raise SchemaError(f"feature {k}: missing group property {group!r}")
            labels.append(str(p[group]))
    if attrs is None:
        attrs = [k for k in props[0] if k != group]
    cols = {}
    for name in attrs:
        vals = []
        for k, p in enumerate(props):
            if name not in p:
                raise SchemaError(f"feature {k}: missing property {name!r}")
            try:
                vals.append(float(p[name]))
            except (TypeError, ValueError):
                raise ParseError(f"feature {k}: property {name!r} is not numeric") from None
        cols[name] = vals
    return PointDataset(xs, ys, cols, labels if group is not None else None)


def bounding_box(d: PointDataset) -> Rect:
    if len(d) == 0:
        raise EmptyInputError("bounding box of an empty dataset")
    return Rect(float(d.x.min()), float(d.y.min()), float(d.x.max()), float(d.y.max()))


def rasterize(d: PointDataset, attr: str | None, grid: GridSpec, aggregator: str = "mean") -> RasterGrid:
    """Bin points into grid cells and aggregate one attribute per cell.

    Empty cells are no-data for ``mean`` and 0 for ``sum``/``count``. Points
    outside the grid are ignored. ``attr`` may be None for ``count``.
    """
    if aggregator not in ("mean", "sum", "count"):
        raise ParameterError(f"unknown aggregator {aggregator!r}")
    if aggregator != "count" or attr is not None:
        vals = d.column(attr)
    else:
        vals = np.ones(len(d))
    col, row, inside = grid.cell_of(d.x, d.y)
    flat = (row * grid.width + col)[inside]
    counts = np.bincount(flat, minlength=grid.size).astype(float)
    if aggregator == "count":
        return RasterGrid(grid, counts.reshape(grid.shape))
    sums = np.bincount(flat, weights=vals[inside], minlength=grid.size)
    if aggregator == "sum":
        return RasterGrid(grid, sums.reshape(grid.shape))
    empty = counts == 0
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=~empty)
    return RasterGrid(grid, means.reshape(grid.shape), empty.reshape(grid.shape))
