"""Grid-point series ingestion and preprocessing.

Input is a long CSV, UTF-8, with the exact header ``point_id,lat,lon,year,value``
and one row per (point, year). Every point must cover the same years.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

HEADER = ("point_id", "lat", "lon", "year", "value")


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSeries:
    """Annual maxima at one grid point."""

    point_id: str
    lat: float
    lon: float
    values: np.ndarray
    time_index: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        years = _frozen(self.time_index, np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time_index", years)
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if values.ndim != 1 or years.ndim != 1 or len(values) != len(years):
            raise DataError(f"point {self.point_id}: values and years must be 1-d of equal length")
        if not np.all(np.isfinite(values)):
            raise DataError(f"point {self.point_id}: non-finite value")
        if np.any(values <= 0):
            raise DataError(f"point {self.point_id}: non-positive value")
        if np.any(np.diff(years) <= 0):
            raise DataError(f"point {self.point_id}: years not strictly increasing")
        if not -90.0 <= self.lat <= 90.0:
            raise DataError(f"point {self.point_id}: latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise DataError(f"point {self.point_id}: longitude {self.lon} outside [-180, 180)")

    @property
    def n(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, GridSeries):
            return NotImplemented
        return (
            self.point_id == other.point_id
            and self.lat == other.lat
            and self.lon == other.lon
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.time_index, other.time_index)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    points: tuple[GridSeries, ...]
    label: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple(self.points)
        object.__setattr__(self, "points", points)
        index = {}
        for k, s in enumerate(points):
            if s.point_id in index:
                raise DataError(f"duplicate point_id {s.point_id!r}")
            index[s.point_id] = k
        if points:
            years = points[0].time_index
            for s in points[1:]:
                if len(s.time_index) != len(years):
                    raise DataError(
                        f"ragged series: point {s.point_id!r} has {s.n} years, "
                        f"point {points[0].point_id!r} has {len(years)}"
                    )
                if not np.array_equal(s.time_index, years):
                    raise DataError(f"point {s.point_id!r} does not share the common years")
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.points[self._index[key]]
        return self.points[key]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.label == other.label and self.points == other.points

    @property
    def p(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return self.points[0].n if self.points else 0

    @property
    def point_ids(self) -> list[str]:
        return [s.point_id for s in self.points]

    @property
    def years(self) -> np.ndarray:
        return self.points[0].time_index if self.points else np.empty(0, dtype=np.int64)

    def values_matrix(self) -> np.ndarray:
        """(p, n) array of values, rows in point order."""
        if not self.points:
            return np.empty((0, 0))
        return np.vstack([s.values for s in self.points])

    def subset(self, keep, label=None) -> "Dataset":
        return Dataset(tuple(s for s in self.points if keep(s)), self.label if label is None else label)


def load_dataset(path, label=None) -> Dataset:
    """Read a long-CSV file into a :class:`Dataset`.

    Points keep the order of first appearance; each series is sorted by year.
    Any malformed row raises :class:`DataError` (nothing is dropped silently).
    """
    path = Path(path)
    rows: dict[str, list] = {}
    coords: dict[str, tuple[float, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        missing = [h for h in HEADER if h not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        if tuple(header) != HEADER:
            raise DataError(f"{path}: header must be exactly {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
            pid, lat, lon, year, value = (c.strip() for c in row)
            try:
                lat_f, lon_f, v = float(lat), float(lon), float(value)
                yr = int(year)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{lineno}: non-finite value {value!r}")
            if v <= 0:
                raise DataError(f"{path}:{lineno}: non-positive value {value!r}")
            if pid in coords:
                if coords[pid] != (lat_f, lon_f):
                    raise DataError(f"{path}:{lineno}: point {pid!r} changes coordinates")
            else:
                coords[pid] = (lat_f, lon_f)
                rows[pid] = []
            rows[pid].append((yr, v))

    points = []
    for pid, obs in rows.items():
        obs.sort()
        years = [y for y, _ in obs]
        if len(set(years)) != len(years):
            dup = next(y for y in years if years.count(y) > 1)
            raise DataError(f"{path}: duplicate (point_id, year) = ({pid!r}, {dup})")
        lat_f, lon_f = coords[pid]
        points.append(GridSeries(pid, lat_f, lon_f, [v for _, v in obs], years))
    return Dataset(tuple(points), path.stem if label is None else label)


def save_dataset(d: Dataset, path) -> None:
    """Write ``d`` in the long-CSV format; floats use ``repr`` so a reload is exact."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for s in d.points:
            for yr, v in zip(s.time_index.tolist(), s.values.tolist()):
                w.writerow((s.point_id, repr(s.lat), repr(s.lon), yr, repr(v)))


def split_hemispheres(d: Dataset) -> tuple[Dataset, Dataset]:
    """Return ``(northern, southern)``; the equator (lat == 0) goes north."""
    north = d.subset(lambda s: s.lat >= 0, label=f"{d.label}:north" if d.label else "north")
    south = d.subset(lambda s: s.lat < 0, label=f"{d.label}:south" if d.label else "south")
    if d.p and not (north.p and south.p):
        log.warning("hemisphere split of %r leaves one side empty (north=%d, south=%d)", d.label, north.p, south.p)
    return north, south


def rescale_by_mean(s: GridSeries) -> GridSeries:
    with np.errstate(over="ignore"):
        m = float(np.mean(s.values))
    if not math.isfinite(m) or m <= 0:
        raise DataError(f"point {s.point_id}: cannot rescale by mean {m}")
    return GridSeries(s.point_id, s.lat, s.lon, s.values / m, s.time_index)


def point_seed(seed: int, key: str) -> int:
    """Deterministic 64-bit seed for a named stream derived from ``seed``."""
    h = hashlib.blake2b(f"{int(seed)}:{key}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def fisher_yates(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Durstenfeld's in-place Fisher-Yates on a copy, drawing from ``rng``."""
    out = np.array(values, copy=True)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def shuffle_in_time(d: Dataset, seed: int) -> Dataset:
    """Permute every series independently, destroying cross-point dependence.

    Point ``i`` uses a PCG64 generator seeded with ``point_seed(seed, point_id)``,
    so the result does not depend on point order.
    """
    points = []
    for s in d.points:
        rng = np.random.Generator(np.random.PCG64(point_seed(seed, "shuffle:" + s.point_id)))
        points.append(GridSeries(s.point_id, s.lat, s.lon, fisher_yates(s.values, rng), s.time_index))
    return Dataset(tuple(points), f"{d.label}:shuffled" if d.label else "shuffled")
