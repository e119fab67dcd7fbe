"""PAM clustering on a dissimilarity matrix, silhouette, shuffle ablation."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, shuffle_in_time, split_hemispheres
from .errors import ConfigError, DataError
from .madogram import CStarConfig, DissimilarityMatrix, dissimilarity_matrix

log = logging.getLogger(__name__)

PARTITION_HEADER = ("point_id", "cluster", "is_medoid")


@dataclass(eq=False)
class Partition:
    """Cluster labels ``0..k-1`` with one medoid index per cluster.

    ``medoids[c]`` is the point index of the medoid of cluster ``c``; it may
    be ``-1`` for partitions read from files without medoid information.
    """

    labels: np.ndarray
    medoids: np.ndarray
    k: int
    total_cost: float = float("nan")
    point_ids: list | None = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.medoids = np.asarray(self.medoids, dtype=np.int64)
        if self.labels.ndim != 1:
            raise DataError("labels must be one-dimensional")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise DataError(f"labels must lie in [0, {self.k})")
        if len(self.medoids) != self.k:
            raise DataError(f"expected {self.k} medoids, got {len(self.medoids)}")
        for c, m in enumerate(self.medoids):
            if m >= 0 and self.labels[m] != c:
                raise DataError(f"medoid {m} is not in its own cluster {c}")
        if self.point_ids is not None and len(self.point_ids) != len(self.labels):
            raise DataError("point_ids and labels differ in length")

    @property
    def p(self) -> int:
        return len(self.labels)

    def relabel(self, mapping) -> "Partition":
        """New partition with label ``l`` replaced by ``mapping[l]``."""
        mapping = np.asarray(mapping, dtype=np.int64)
        medoids = np.empty(self.k, dtype=np.int64)
        medoids[mapping] = self.medoids
        return Partition(mapping[self.labels], medoids, self.k, self.total_cost, self.point_ids, list(self.history))

    def to_csv(self, path) -> None:
        ids = self.point_ids if self.point_ids is not None else [str(i) for i in range(self.p)]
        med = set(int(m) for m in self.medoids if m >= 0)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PARTITION_HEADER)
            for i, (pid, lab) in enumerate(zip(ids, self.labels.tolist())):
                w.writerow((pid, lab, int(i in med)))

    @classmethod
    def from_csv(cls, path, k=None) -> "Partition":
        ids, labels, is_med = [], [], []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(h.strip() for h in next(reader, ()))
            if header != PARTITION_HEADER:
                raise DataError(f"{path}: header must be {','.join(PARTITION_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    ids.append(row[0].strip())
                    labels.append(int(row[1]))
                    is_med.append(bool(int(row[2])))
                except (ValueError, IndexError):
                    raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
        if len(set(ids)) != len(ids):
            raise DataError(f"{path}: duplicate point ids")
        labels = np.array(labels, dtype=np.int64)
        if k is None:
            k = int(labels.max()) + 1 if len(labels) else 0
        medoids = np.full(k, -1, dtype=np.int64)
        for i, flag in enumerate(is_med):
            if flag:
                if medoids[labels[i]] >= 0:
                    raise DataError(f"{path}: cluster {labels[i]} has two medoids")
                medoids[labels[i]] = i
        return cls(labels, medoids, k, float("nan"), ids)


def _as_matrix(D) -> np.ndarray:
    M = D.d_rfa if isinstance(D, DissimilarityMatrix) else D
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError("dissimilarity matrix must be square")
    if not np.all(np.isfinite(M)):
        raise DataError("dissimilarity matrix has non-finite entries")
    if np.any(M < 0):
        raise DataError("dissimilarity matrix has negative entries")
    if not np.array_equal(M, M.T):
        raise DataError("dissimilarity matrix is not symmetric")
    if np.any(np.diag(M) != 0):
        raise DataError("dissimilarity matrix must have a zero diagonal")
    return M


def assignment_cost(M, medoids) -> float:
    """Sum over points of the dissimilarity to the closest medoid."""
    return float(M[:, list(medoids)].min(axis=1).sum())


def _assign(M, medoids):
    """Labels in medoid order; medoids are pinned to their own cluster, ties go to the lowest cluster id."""
    labels = np.argmin(M[:, medoids], axis=1)
    labels[medoids] = np.arange(len(medoids))
    return labels


def pam(D, k: int, point_ids=None, max_iter: int = 10_000) -> Partition:
    """Partitioning around medoids (BUILD then best-improvement SWAP).

    Works with any symmetric non-negative dissimilarity with zero diagonal;
    the triangle inequality is not needed. Ties are resolved towards the lowest
    point index, making the result deterministic. Clusters are numbered by
    increasing medoid index. ``history`` holds the cost after BUILD and after
    every accepted swap.
    """
    M = _as_matrix(D)
    if point_ids is None and isinstance(D, DissimilarityMatrix):
        point_ids = list(D.point_ids)
    p = M.shape[0]
    if not 1 <= k <= p:
        raise ConfigError(f"k must lie in [1, {p}], got {k}")

    # BUILD
    medoids = [int(np.argmin(M.sum(axis=0)))]
    nearest = M[:, medoids[0]].copy()
    for _ in range(1, k):
        gain = np.maximum(nearest[:, None] - M, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        h = int(np.argmax(gain))
        medoids.append(h)
        nearest = np.minimum(nearest, M[:, h])
    medoids.sort()
    cost = assignment_cost(M, medoids)
    history = [cost]

    # SWAP
    for _ in range(max_iter):
        if k == p:
            break
        Dm = M[:, medoids]
        order = np.argsort(Dm, axis=1, kind="stable")
        slot = order[:, 0]
        d1 = Dm[np.arange(p), slot]
        d2 = Dm[np.arange(p), order[:, 1]] if k > 1 else np.full(p, np.inf)
        A = np.minimum(M, d1[:, None])  # point o, candidate h: kept medoid set is unaffected
        B = np.minimum(M, d2[:, None])  # point o loses its nearest medoid
        onehot = np.zeros((k, p))
        onehot[slot, np.arange(p)] = 1.0
        total = A.sum(axis=0)[None, :] + onehot @ (B - A)  # (slot, candidate)
        total[:, medoids] = np.inf
        # (cost, candidate index, medoid index) lexicographic: scan candidates in index order
        flat = total.T.ravel()
        best = int(np.argmin(flat))
        h, s = divmod(best, k)
        if not flat[best] < cost:
            break
        trial = sorted(medoids[:s] + medoids[s + 1:] + [h])
        new_cost = assignment_cost(M, trial)
        if not new_cost < cost:
            break
        medoids, cost = trial, new_cost
        history.append(cost)
    else:
        log.warning("PAM stopped after max_iter=%d swaps", max_iter)

    medoids = np.array(medoids, dtype=np.int64)
    labels = _assign(M, medoids)
    total_cost = float(M[np.arange(p), medoids[labels]].sum())
    return Partition(labels, medoids, k, total_cost, point_ids, history)


def silhouette(D, part: Partition) -> float:
    """Mean silhouette width; singleton clusters and points with a == b == 0 score 0."""
    M = _as_matrix(D)
    if part.k < 2:
        raise ConfigError("silhouette needs k >= 2")
    labels = part.labels
    p = len(labels)
    if M.shape[0] != p:
        raise DataError("partition and matrix sizes differ")
    sums = np.zeros((p, part.k))
    for c in range(part.k):
        sums[:, c] = M[:, labels == c].sum(axis=1)
    counts = np.bincount(labels, minlength=part.k).astype(np.float64)
    if np.any(counts == 0):
        raise DataError("every cluster must be non-empty")
    own = counts[labels]
    a = np.where(own > 1, sums[np.arange(p), labels] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts[None, :]
    means[np.arange(p), labels] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


@dataclass
class HemisphereResult:
    name: str
    dataset: Dataset
    matrix: DissimilarityMatrix
    partition: Partition
    silhouette: float | None


def run_pipeline(d: Dataset, k: int = 4, cfg: CStarConfig | None = None, threads=None,
                 hemisphere: str = "both", prescale: bool = True) -> list[HemisphereResult]:
    """Dissimilarity matrix + PAM, separately per hemisphere.

    ``hemisphere`` is ``north``, ``south``, ``both`` (each side separately) or
    ``global`` (no split). Empty hemispheres are skipped.
    """
    if hemisphere == "global":
        parts = [("global", d)]
    else:
        north, south = split_hemispheres(d)
        parts = {"north": [("north", north)], "south": [("south", south)],
                 "both": [("north", north), ("south", south)]}.get(hemisphere)
        if parts is None:
            raise ConfigError(f"unknown hemisphere mode {hemisphere!r}")
    out = []
    for name, sub in parts:
        if sub.p == 0:
            continue
        if sub.p < k:
            raise ConfigError(f"{name}: {sub.p} points is fewer than k={k}")
        log.info("%s: %d points, dissimilarity matrix", name, sub.p)
        mat = dissimilarity_matrix(sub, cfg, threads=threads, prescale=prescale)
        part = pam(mat, k)
        sil = silhouette(mat, part) if 2 <= k < sub.p else None
        out.append(HemisphereResult(name, sub, mat, part, sil))
    return out


@dataclass
class AblationReport:
    original: list
    shuffled: list
    point_ids: list
    hemisphere: list
    d_original: np.ndarray
    d_shuffled: np.ndarray
    seed: int

    @property
    def lower(self) -> np.ndarray:
        return self.d_original < self.d_shuffled

    @property
    def fraction_lower(self) -> float:
        return float(self.lower.mean()) if len(self.lower) else float("nan")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("point_id", "hemisphere", "d_original", "d_shuffled", "lower"))
            for row in zip(self.point_ids, self.hemisphere, self.d_original.tolist(),
                           self.d_shuffled.tolist(), self.lower.tolist()):
                w.writerow((row[0], row[1], repr(row[2]), repr(row[3]), int(row[4])))


def _medoid_distance(res: HemisphereResult) -> np.ndarray:
    part = res.partition
    return res.matrix.d_rfa[np.arange(part.p), part.medoids[part.labels]]


def shuffle_ablation(d: Dataset, k: int = 4, seed: int = 0, cfg: CStarConfig | None = None,
                     threads=None, hemisphere: str = "both", prescale: bool = True) -> AblationReport:
    """Compare each point's dissimilarity to its medoid with and without temporal shuffling."""
    orig = run_pipeline(d, k, cfg, threads, hemisphere, prescale)
    shuf = run_pipeline(shuffle_in_time(d, seed), k, cfg, threads, hemisphere, prescale)
    ids, hemi, d0, d1 = [], [], [], []
    for a, b in zip(orig, shuf):
        assert a.dataset.point_ids == b.dataset.point_ids
        ids += a.dataset.point_ids
        hemi += [a.name] * a.dataset.p
        d0.append(_medoid_distance(a))
        d1.append(_medoid_distance(b))
    return AblationReport(orig, shuf, ids, hemi,
                          np.concatenate(d0) if d0 else np.empty(0),
                          np.concatenate(d1) if d1 else np.empty(0), seed)
