"""F-madogram and RFA-madogram estimators.

For a pair of series observed in the same years, the RFA-madogram at scale
``c`` is

    D_n(c) = 1/(2n) * sum_i | F2_n(c * y1_i) - F1_n(y2_i / c) |

with empirical CDFs ``F_n(x) = #{values <= x} / n``. It vanishes when
``y2 = c * y1`` and reduces to the F-madogram when the pair is homogeneous
and ``c`` is the homogeneity scale. The dissimilarity used for clustering is
``D_n(c*)`` with ``c*`` the minimiser over ``c > 0``.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .dataset import Dataset
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

#: relative tolerance under which two rescaled values count as tied
TIE_RTOL = 1e-12

MATRIX_HEADER = ("i", "j", "d_rfa", "d_fmad", "c_star", "boundary")


class EmpiricalCdf:
    """Step CDF ``x -> #{v <= x} / n``.

    With ``plotting=True`` the count is divided by ``n + 1`` instead, which
    keeps values strictly inside (0, 1).
    """

    def __init__(self, values, plotting=False):
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.ndim != 1 or len(v) == 0:
            raise DataError("EmpiricalCdf needs a non-empty 1-d sample")
        self.sorted_values = v
        self.n = len(v)
        self._denom = self.n + 1 if plotting else self.n

    def __call__(self, x):
        return np.searchsorted(self.sorted_values, x, side="right") / self._denom

    evaluate = __call__


def _pair(y1, y2):
    y1 = np.ascontiguousarray(y1, dtype=np.float64)
    y2 = np.ascontiguousarray(y2, dtype=np.float64)
    if y1.ndim != 1 or y2.ndim != 1:
        raise DataError("series must be one-dimensional")
    if len(y1) != len(y2):
        raise DataError(f"length mismatch: {len(y1)} vs {len(y2)}")
    if len(y1) < 2:
        raise DataError("need at least two paired observations")
    return y1, y2


def _sorted(y):
    o = np.argsort(y, kind="stable").astype(np.int64)
    return np.ascontiguousarray(y[o]), o


def fmadogram(y1, y2) -> float:
    """Empirical F-madogram ``1/(2n) sum |F1_n(y1_i) - F2_n(y2_i)|``, in [0, 1/2]."""
    y1, y2 = _pair(y1, y2)
    n = len(y1)
    buf1 = np.empty(n, dtype=np.int64)
    buf2 = np.empty(n, dtype=np.int64)
    (s1, o1), (s2, o2) = _sorted(y1), _sorted(y2)
    s = _kernels.fmado_sum(s1, s2, o1, o2, buf1, buf2)
    return s / (2.0 * n * n)


def rfa_madogram_at(y1, y2, c: float, tol: float = TIE_RTOL) -> float:
    """RFA-madogram estimate at a fixed scale ``c`` (already carrying the 1/2)."""
    y1, y2 = _pair(y1, y2)
    c = float(c)
    if not (c > 0 and math.isfinite(c)):
        raise ConfigError(f"scale c must be positive and finite, got {c}")
    n = len(y1)
    (s1, o1), (s2, o2) = _sorted(y1), _sorted(y2)
    s = _kernels.rfa_sum(
        s1, s2, o1, o2, c, 1.0, tol,
        np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64),
    )
    return s / (2.0 * n * n)


@dataclass(frozen=True)
class CStarConfig:
    """Search settings for c*: ``grid_points`` log-spaced values on
    [c_min, c_max] followed by ``refine_rounds`` step-halving rounds."""

    c_min: float = 0.1
    c_max: float = 10.0
    grid_points: int = 129
    refine_rounds: int = 3
    tie_rtol: float = TIE_RTOL

    def __post_init__(self):
        if not (self.c_min > 0 and math.isfinite(self.c_min) and math.isfinite(self.c_max)):
            raise ConfigError("c_min must be positive and both bounds finite")
        if self.c_min >= self.c_max:
            raise ConfigError(f"c_min ({self.c_min}) must be below c_max ({self.c_max})")
        if self.grid_points < 3:
            raise ConfigError("grid_points must be at least 3")
        if self.grid_points % 2 == 0:
            raise ConfigError("grid_points must be odd so the grid centre is on the grid")
        if self.refine_rounds < 0:
            raise ConfigError("refine_rounds must be >= 0")
        if not 0 <= self.tie_rtol < 1e-6:
            raise ConfigError("tie_rtol must lie in [0, 1e-6)")

    def log_grid(self):
        """Return ``(grid, step)`` in log c.

        Points sit at symmetric integer offsets around the centre, so the grid
        is exactly symmetric under ``c -> 1/c`` whenever ``c_min * c_max == 1``.
        """
        lo, hi = math.log(self.c_min), math.log(self.c_max)
        if math.isclose(lo, -hi, rel_tol=0, abs_tol=1e-14):
            centre, half = 0.0, hi
        else:
            centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        m = (self.grid_points - 1) // 2
        step = half / m
        offsets = np.arange(-m, m + 1, dtype=np.float64)
        return centre + step * offsets, step


class OptimalC(NamedTuple):
    c_star: float
    d_rfa: float
    boundary: bool


def optimal_c(y1, y2, cfg: CStarConfig | None = None) -> OptimalC:
    """Minimise the RFA-madogram over ``c``.

    Ties between scales with the same value go to the smallest ``|log c|``.
    ``boundary`` is set when the coarse-grid argmin is an end point.
    """
    cfg = cfg or CStarConfig()
    y1, y2 = _pair(y1, y2)
    n = len(y1)
    grid, step = cfg.log_grid()
    (s1, o1), (s2, o2) = _sorted(y1), _sorted(y2)
    s, u, bnd = _kernels.search_log_c(
        s1, s2, o1, o2, grid, step, cfg.refine_rounds,
        grid[0], grid[-1], cfg.tie_rtol,
        np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64),
    )
    return OptimalC(math.exp(u), s / (2.0 * n * n), bool(bnd))


@dataclass(eq=False)
class DissimilarityMatrix:
    """Symmetric matrices over the points of one dataset.

    ``c_star[i, j]`` is the optimal scale in the units of the raw series
    (``y_j ~ c * y_i``), so ``c_star[j, i] == 1 / c_star[i, j]``.
    """

    point_ids: list
    d_rfa: np.ndarray
    d_fmad: np.ndarray
    c_star: np.ndarray
    boundary: np.ndarray
    degenerate: np.ndarray = field(default=None)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = np.zeros(len(self.point_ids), dtype=bool)

    @property
    def p(self) -> int:
        return len(self.point_ids)

    @property
    def values(self) -> np.ndarray:
        return self.d_rfa

    def to_csv(self, path) -> None:
        p = self.p
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MATRIX_HEADER)
            for i in range(p):
                for j in range(i + 1, p):
                    w.writerow((
                        i, j, repr(float(self.d_rfa[i, j])), repr(float(self.d_fmad[i, j])),
                        repr(float(self.c_star[i, j])), int(bool(self.boundary[i, j])),
                    ))

    @classmethod
    def from_csv(cls, path, point_ids=None) -> "DissimilarityMatrix":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(h.strip() for h in next(reader, ()))
            if header != MATRIX_HEADER:
                raise DataError(f"{path}: header must be {','.join(MATRIX_HEADER)}")
            rows = [r for r in reader if r]
        if not rows:
            raise DataError(f"{path}: no pairs")
        try:
            ii = np.array([int(r[0]) for r in rows])
            jj = np.array([int(r[1]) for r in rows])
            vals = np.array([[float(r[2]), float(r[3]), float(r[4])] for r in rows])
            bnd = np.array([int(r[5]) for r in rows], dtype=bool)
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: {exc}") from None
        p = int(max(ii.max(), jj.max())) + 1
        if len(rows) != p * (p - 1) // 2 or np.any(ii >= jj):
            raise DataError(f"{path}: expected every pair i<j exactly once for p={p}")
        d = np.zeros((p, p))
        f = np.zeros((p, p))
        c = np.ones((p, p))
        b = np.zeros((p, p), dtype=bool)
        d[ii, jj] = d[jj, ii] = vals[:, 0]
        f[ii, jj] = f[jj, ii] = vals[:, 1]
        c[ii, jj] = vals[:, 2]
        c[jj, ii] = 1.0 / vals[:, 2]
        b[ii, jj] = b[jj, ii] = bnd
        if point_ids is None:
            point_ids = [str(k) for k in range(p)]
        elif len(point_ids) != p:
            raise DataError(f"{path}: {p} points but {len(point_ids)} ids supplied")
        return cls(list(point_ids), d, f, c, b)


def _resolve_threads(threads):
    if threads is None:
        threads = os.environ.get("RFAMADO_THREADS", 1)
    try:
        threads = int(threads)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid thread count {threads!r}") from None
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def dissimilarity_matrix(d: Dataset, cfg: CStarConfig | None = None, threads=None,
                         prescale: bool = True, chunk: int = 512) -> DissimilarityMatrix:
    """All-pairs ``D_n(c*)`` for a dataset.

    Series are divided by their empirical mean first (unless ``prescale`` is
    off), which centres the c-grid on 1 without changing the attainable
    values. Pairs are split into fixed chunks and run on ``threads`` worker
    threads; each pair writes only its own slot, so the output is identical
    for any thread count.
    """
    cfg = cfg or CStarConfig()
    threads = _resolve_threads(threads)
    p = d.p
    if p < 2:
        raise DataError(f"need at least 2 points, got {p}")
    raw = d.values_matrix()
    means = raw.mean(axis=1)
    X = raw / means[:, None] if prescale else raw.copy()
    X = np.ascontiguousarray(X)
    O = np.ascontiguousarray(np.argsort(X, axis=1, kind="stable").astype(np.int64))
    XS = np.ascontiguousarray(np.take_along_axis(X, O, axis=1))
    degenerate = np.all(raw == raw[:, :1], axis=1)
    if degenerate.any():
        log.warning("%d constant series; their pairs are computed as defined", int(degenerate.sum()))

    I, J = np.triu_indices(p, k=1)
    I = I.astype(np.int64)
    J = J.astype(np.int64)
    npairs = len(I)
    out_sum = np.empty(npairs, dtype=np.int64)
    out_fsum = np.empty(npairs, dtype=np.int64)
    out_u = np.empty(npairs, dtype=np.float64)
    out_bnd = np.empty(npairs, dtype=np.bool_)
    grid, step = cfg.log_grid()
    bounds = [(a, min(a + chunk, npairs)) for a in range(0, npairs, chunk)]

    def work(b):
        _kernels.pair_block(XS, O, I, J, b[0], b[1], grid, step, cfg.refine_rounds,
                            grid[0], grid[-1], cfg.tie_rtol, out_sum, out_u, out_bnd, out_fsum)

    if threads == 1 or len(bounds) == 1:
        for b in bounds:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(work, b) for b in bounds]:
                fut.result()

    n = X.shape[1]
    norm = 2.0 * n * n
    D = np.zeros((p, p))
    F = np.zeros((p, p))
    C = np.ones((p, p))
    B = np.zeros((p, p), dtype=bool)
    D[I, J] = D[J, I] = out_sum / norm
    F[I, J] = F[J, I] = out_fsum / norm
    c = np.exp(out_u)
    if prescale:
        c = c * (means[J] / means[I])
    C[I, J] = c
    C[J, I] = 1.0 / c
    B[I, J] = B[J, I] = out_bnd
    meta = {
        "label": d.label, "n": n, "prescale": prescale, "c_min": cfg.c_min, "c_max": cfg.c_max,
        "grid_points": cfg.grid_points, "refine_rounds": cfg.refine_rounds,
        "boundary_pairs": int(out_bnd.sum()), "degenerate_points": int(degenerate.sum()),
    }
    return DissimilarityMatrix(d.point_ids, D, F, C, B, degenerate, meta)
