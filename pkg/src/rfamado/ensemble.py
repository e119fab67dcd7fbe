"""Combining partitions from several models.

Labels are arbitrary, so every partition is first relabelled to agree as much
as possible with a reference (minimum Hamming disagreement over all label
permutations). Aligned labels are then tallied per point; the central
partition keeps the most frequent cluster and its frequency.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .cluster import Partition
from .errors import ConfigError, DataError

MAX_K = 8
CENTRAL_HEADER = ("point_id", "modal_cluster", "probability", "tie_flag")
CHANGES_HEADER = ("point_id", "changed")


class Alignment(NamedTuple):
    relabeled: Partition
    mapping: tuple  # mapping[target_label] -> reference label
    disagreement: int


def _labels(x):
    return x.labels if isinstance(x, Partition) else np.asarray(x, dtype=np.int64)


def _check_same_points(a, b):
    ia = getattr(a, "point_ids", None)
    ib = getattr(b, "point_ids", None)
    if ia is not None and ib is not None and list(ia) != list(ib):
        raise DataError("partitions are defined over different point sets")


def contingency(ref_labels, tgt_labels, k) -> np.ndarray:
    """``T[r, t]`` = number of points labelled ``r`` in the reference and ``t`` in the target."""
    T = np.zeros((k, k), dtype=np.int64)
    np.add.at(T, (ref_labels, tgt_labels), 1)
    return T


def best_mapping(ref_labels, tgt_labels, k):
    """Exhaustive search over the k! relabellings; first in lexicographic order wins ties."""
    if k > MAX_K:
        raise ConfigError(f"exhaustive alignment supports k <= {MAX_K}, got {k}")
    T = contingency(ref_labels, tgt_labels, k)
    cols = np.arange(k)
    best, best_agree = None, -1
    for perm in itertools.permutations(range(k)):
        agree = int(T[list(perm), cols].sum())
        if agree > best_agree:
            best, best_agree = perm, agree
    return best, len(ref_labels) - best_agree


def align_partitions(reference, target: Partition) -> Alignment:
    """Relabel ``target`` to minimise disagreement with ``reference``.

    ``reference`` may be a :class:`Partition` or a plain label vector.
    """
    ref = _labels(reference)
    if len(ref) != target.p:
        raise DataError(f"point count mismatch: {len(ref)} vs {target.p}")
    _check_same_points(reference, target)
    k = target.k
    if isinstance(reference, Partition) and reference.k != k:
        raise DataError(f"cluster count mismatch: {reference.k} vs {k}")
    if len(ref) and ref.max() >= k:
        raise DataError("reference labels exceed target k")
    mapping, dis = best_mapping(ref, target.labels, k)
    return Alignment(target.relabel(mapping), tuple(mapping), int(dis))


def inverse(mapping) -> tuple:
    inv = [0] * len(mapping)
    for t, r in enumerate(mapping):
        inv[r] = t
    return tuple(inv)


def cycles(mapping, one_based: bool = True) -> list[tuple]:
    """Cycle decomposition of a permutation given in one-line form; fixed points omitted."""
    seen = set()
    out = []
    off = 1 if one_based else 0
    for start in range(len(mapping)):
        if start in seen or mapping[start] == start:
            continue
        cyc = []
        i = start
        while i not in seen:
            seen.add(i)
            cyc.append(i + off)
            i = mapping[i]
        out.append(tuple(cyc))
    return out


def _tally(label_rows, k):
    m, p = label_rows.shape
    counts = np.zeros((p, k), dtype=np.int64)
    for row in label_rows:
        counts[np.arange(p), row] += 1
    return counts


@dataclass(eq=False)
class CentralPartition:
    """Per-point modal cluster across aligned partitions.

    ``fractions[i, c]`` is the share of partitions putting point ``i`` in
    cluster ``c``; ``probability`` is its row maximum. ``fractions`` is None
    for central partitions read back from CSV.
    """

    modal: np.ndarray
    probability: np.ndarray
    tie: np.ndarray
    k: int
    point_ids: list | None = None
    fractions: np.ndarray | None = None
    aligned: list | None = None
    counts: np.ndarray | None = None

    @property
    def p(self) -> int:
        return len(self.modal)

    @property
    def m(self) -> int:
        return 0 if self.aligned is None else len(self.aligned)

    def to_csv(self, path) -> None:
        ids = self.point_ids if self.point_ids is not None else [str(i) for i in range(self.p)]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CENTRAL_HEADER)
            for row in zip(ids, self.modal.tolist(), self.probability.tolist(), self.tie.tolist()):
                w.writerow((row[0], row[1], repr(row[2]), int(row[3])))

    @classmethod
    def from_csv(cls, path, k=None) -> "CentralPartition":
        ids, modal, prob, tie = [], [], [], []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(h.strip() for h in next(reader, ()))
            if header != CENTRAL_HEADER:
                raise DataError(f"{path}: header must be {','.join(CENTRAL_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    ids.append(row[0].strip())
                    modal.append(int(row[1]))
                    prob.append(float(row[2]))
                    tie.append(bool(int(row[3])))
                except (ValueError, IndexError):
                    raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
        modal = np.array(modal, dtype=np.int64)
        if k is None:
            k = int(modal.max()) + 1 if len(modal) else 0
        return cls(modal, np.array(prob), np.array(tie, dtype=bool), k, ids)

    def as_partition(self) -> Partition:
        return Partition(self.modal, np.full(self.k, -1), self.k, point_ids=self.point_ids)


def _modal(counts):
    modal = np.argmax(counts, axis=1)  # first maximum = lowest cluster id
    top = counts[np.arange(len(modal)), modal]
    tie = (counts == top[:, None]).sum(axis=1) > 1
    return modal, top, tie


def central_partition(parts, reference=None) -> CentralPartition:
    """Align ``parts`` and take the per-point mode.

    Without ``reference`` the first partition seeds a running consensus and
    each following partition is aligned to the current consensus (majority
    over the partitions aligned so far), so the result depends on input
    order. With ``reference`` (a partition or label vector, e.g. another
    central partition) every partition is aligned to it directly.
    """
    parts = list(parts)
    if not parts:
        raise DataError("need at least one partition")
    k = parts[0].k
    p = parts[0].p
    for q in parts[1:]:
        if q.k != k or q.p != p:
            raise DataError("all partitions must share k and the point count")
        _check_same_points(parts[0], q)
    if k > MAX_K:
        raise ConfigError(f"exhaustive alignment supports k <= {MAX_K}, got {k}")

    counts = np.zeros((p, k), dtype=np.int64)
    aligned = []
    if reference is not None:
        ref = _labels(reference)
        for q in parts:
            aligned.append(align_partitions(ref, q).relabeled)
            counts[np.arange(p), aligned[-1].labels] += 1
    else:
        aligned.append(parts[0])
        counts[np.arange(p), parts[0].labels] += 1
        for q in parts[1:]:
            consensus, _, _ = _modal(counts)
            aligned.append(align_partitions(consensus, q).relabeled)
            counts[np.arange(p), aligned[-1].labels] += 1

    m = len(parts)
    modal, top, tie = _modal(counts)
    return CentralPartition(
        modal, top / m, tie, k, parts[0].point_ids, counts / m, aligned, counts,
    )


@dataclass(eq=False)
class ComparisonReport:
    changed: np.ndarray
    gained: np.ndarray  # per cluster: points whose modal cluster became this one
    lost: np.ndarray  # per cluster: points that left this cluster
    mapping: tuple  # relabelling applied to the factual side
    point_ids: list | None = None
    probability_delta: np.ndarray | None = None  # factual - counterfactual membership fractions

    @property
    def n_changed(self) -> int:
        return int(self.changed.sum())

    def to_csv(self, path) -> None:
        ids = self.point_ids if self.point_ids is not None else [str(i) for i in range(len(self.changed))]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CHANGES_HEADER)
            for pid, c in zip(ids, self.changed.tolist()):
                w.writerow((pid, int(c)))


def compare_central(counterfactual: CentralPartition, factual: CentralPartition) -> ComparisonReport:
    """Flag points whose modal cluster differs, after aligning the factual side."""
    if counterfactual.p != factual.p or counterfactual.k != factual.k:
        raise DataError("central partitions must share points and k")
    if counterfactual.point_ids is not None and factual.point_ids is not None \
            and list(counterfactual.point_ids) != list(factual.point_ids):
        raise DataError("central partitions are defined over different point sets")
    k = counterfactual.k
    mapping, _ = best_mapping(counterfactual.modal, factual.modal, k)
    mapping = np.asarray(mapping)
    f_modal = mapping[factual.modal]
    changed = f_modal != counterfactual.modal
    gained = np.bincount(f_modal[changed], minlength=k)
    lost = np.bincount(counterfactual.modal[changed], minlength=k)
    delta = None
    if counterfactual.fractions is not None and factual.fractions is not None:
        f_frac = np.empty_like(factual.fractions)
        f_frac[:, mapping] = factual.fractions
        delta = f_frac - counterfactual.fractions
    return ComparisonReport(changed, gained, lost, tuple(int(x) for x in mapping),
                            counterfactual.point_ids, delta)


def write_geojson(path, point_ids, lat, lon, cluster, probability, changed=None) -> None:
    """Point features for external map plotting."""
    feats = []
    for i, pid in enumerate(point_ids):
        props = {"point_id": pid, "cluster": int(cluster[i]), "probability": float(probability[i])}
        if changed is not None:
            props["changed"] = bool(changed[i])
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [float(lon[i]), float(lat[i])]},
            "properties": props,
        })
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=1)
        fh.write("\n")
