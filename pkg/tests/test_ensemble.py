import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from rfamado.cluster import Partition
from rfamado.ensemble import (
    CentralPartition,
    align_partitions,
    best_mapping,
    central_partition,
    compare_central,
    cycles,
    inverse,
    write_geojson,
)
from rfamado.errors import ConfigError, DataError


def part(labels, k=None, ids=None):
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if k is None else k
    medoids = [int(np.flatnonzero(labels == c)[0]) if np.any(labels == c) else -1 for c in range(k)]
    return Partition(labels, medoids, k, point_ids=ids)


@st.composite
def label_pair(draw, k=3):
    p = draw(st.integers(k, 25))
    a = draw(st.lists(st.integers(0, k - 1), min_size=p, max_size=p))
    b = draw(st.lists(st.integers(0, k - 1), min_size=p, max_size=p))
    return np.array(a), np.array(b)


def test_worked_permutation_example():
    ref = part(np.array([1, 1, 1, 2, 2, 3]) - 1)
    tgt = part(np.array([3, 3, 3, 1, 1, 2]) - 1)
    al = align_partitions(ref, tgt)
    assert al.disagreement == 0
    assert al.relabeled.labels.tolist() == ref.labels.tolist()
    # target label t is renamed mapping[t]; read the other way round it is the cycle (1 3 2)
    assert cycles(inverse(al.mapping)) == [(1, 3, 2)]


def test_identity():
    p = part([0, 1, 2, 2, 1, 0, 3])
    al = align_partitions(p, p)
    assert al.mapping == (0, 1, 2, 3) and al.disagreement == 0
    assert cycles(al.mapping) == []


@given(label_pair())
def test_alignment_matches_brute_force(ab):
    a, b = ab
    al = align_partitions(a, part(b, 3))
    assert al.disagreement == oracles.min_disagreement(a, b, 3)
    assert al.disagreement == int(np.sum(al.relabeled.labels != a))
    # grouping structure unchanged
    for i, j in itertools.combinations(range(len(b)), 2):
        assert (b[i] == b[j]) == (al.relabeled.labels[i] == al.relabeled.labels[j])


@given(label_pair(k=4))
def test_disagreement_symmetry(ab):
    a, b = ab
    assert align_partitions(a, part(b, 4)).disagreement == align_partitions(b, part(a, 4)).disagreement


def test_lexicographic_tie_break():
    # all labels equal: every permutation that sends 0 -> 0 ties; identity is first
    mapping, dis = best_mapping(np.zeros(4, dtype=int), np.zeros(4, dtype=int), 3)
    assert mapping == (0, 1, 2) and dis == 0


def test_alignment_errors():
    with pytest.raises(DataError):
        align_partitions(part([0, 1, 1]), part([0, 1]))
    with pytest.raises(DataError):
        align_partitions(part([0, 1], ids=["a", "b"]), part([0, 1], ids=["a", "c"]))
    big = part(np.arange(9))
    with pytest.raises(ConfigError):
        align_partitions(big, big)


def vote_ensemble():
    # nine anchor points fixed by every model plus one contested point
    anchors = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    votes = [0] * 6 + [1] * 9 + [2] * 1
    return [part(anchors + [v], 3) for v in votes]


@pytest.mark.parametrize("use_reference", [False, True])
def test_vote_split_nine_sixteenths(use_reference):
    parts = vote_ensemble()
    ref = parts[0] if use_reference else None
    cp = central_partition(parts, reference=ref)
    assert cp.modal[-1] == 1
    assert cp.probability[-1] == 9 / 16
    assert not cp.tie[-1]
    assert cp.counts[-1].tolist() == [6, 9, 1]
    np.testing.assert_array_equal(cp.probability[:9], 1.0)


def test_single_model():
    p = part([0, 2, 1, 1, 0], ids=list("abcde"))
    cp = central_partition([p])
    assert cp.modal.tolist() == p.labels.tolist()
    np.testing.assert_array_equal(cp.probability, 1.0)
    assert cp.point_ids == list("abcde")


def test_permuted_copies_agree_fully():
    rng = np.random.default_rng(0)
    base = rng.integers(0, 4, size=30)
    base[:4] = [0, 1, 2, 3]
    parts = [part(np.asarray(perm)[base], 4) for perm in itertools.permutations(range(4))][:10]
    cp = central_partition(parts)
    np.testing.assert_array_equal(cp.probability, 1.0)
    assert oracles.min_disagreement(base, cp.modal, 4) == 0


def test_invariants_and_common_relabeling():
    rng = np.random.default_rng(1)
    base = rng.integers(0, 3, size=40)
    parts = []
    for _ in range(7):
        lab = base.copy()
        flip = rng.random(40) < 0.2
        lab[flip] = rng.integers(0, 3, size=flip.sum())
        parts.append(part(np.asarray(rng.permutation(3))[lab], 3))
    cp = central_partition(parts)
    np.testing.assert_allclose(cp.fractions.sum(axis=1), 1.0)
    np.testing.assert_array_equal(cp.probability, cp.fractions.max(axis=1))
    assert np.all(cp.probability >= 1 / 7) and np.all(cp.probability <= 1)
    sigma = np.array([2, 0, 1])
    cp2 = central_partition([q.relabel(sigma) for q in parts])
    np.testing.assert_array_equal(cp2.modal, sigma[cp.modal])
    np.testing.assert_array_equal(cp2.probability, cp.probability)


def test_tie_flag_lowest_id():
    parts = [part([0, 1, 0], 2), part([0, 1, 1], 2)]
    cp = central_partition(parts)
    assert cp.tie.tolist() == [False, False, True]
    assert cp.modal[2] == 0 and cp.probability[2] == 0.5


def test_central_errors():
    with pytest.raises(DataError):
        central_partition([])
    with pytest.raises(DataError):
        central_partition([part([0, 1]), part([0, 1, 1])])


def test_central_csv_round_trip(tmp_path):
    cp = central_partition(vote_ensemble())
    cp.to_csv(tmp_path / "c.csv")
    back = CentralPartition.from_csv(tmp_path / "c.csv", k=3)
    np.testing.assert_array_equal(back.modal, cp.modal)
    np.testing.assert_array_equal(back.probability, cp.probability)
    np.testing.assert_array_equal(back.tie, cp.tie)


def grid_partition(rows, cols, boundary_row, swap=False):
    lab = np.repeat((np.arange(rows) >= boundary_row).astype(int), cols)
    return part(1 - lab if swap else lab, 2, ids=[f"r{r}c{c}" for r in range(rows) for c in range(cols)])


def test_compare_identical():
    cp = central_partition([grid_partition(6, 4, 3)])
    rep = compare_central(cp, cp)
    assert rep.n_changed == 0


def test_compare_single_flip():
    a = part([0, 0, 1, 1, 2, 2], 3)
    b = part([0, 0, 1, 2, 2, 2], 3)
    rep = compare_central(central_partition([a]), central_partition([b]))
    assert rep.changed.tolist() == [False, False, False, True, False, False]
    assert rep.gained.tolist() == [0, 0, 1] and rep.lost.tolist() == [0, 1, 0]


def test_compare_boundary_row_shift():
    rows, cols = 8, 5
    counter = central_partition([grid_partition(rows, cols, 4, swap=s) for s in (False, True, False)])
    factual = central_partition([grid_partition(rows, cols, 5, swap=s) for s in (True, True, False)])
    rep = compare_central(counter, factual)
    changed_rows = {int(pid[1:pid.index("c")]) for pid, ch in zip(rep.point_ids, rep.changed) if ch}
    assert changed_rows == {4}
    assert rep.n_changed == cols


def test_compare_errors():
    with pytest.raises(DataError):
        compare_central(central_partition([part([0, 1])]), central_partition([part([0, 1, 1])]))


def test_geojson(tmp_path):
    write_geojson(tmp_path / "g.json", ["a", "b"], [10.0, -5.0], [20.0, 30.0], [0, 1], [1.0, 0.5], [True, False])
    obj = json.loads((tmp_path / "g.json").read_text())
    assert obj["type"] == "FeatureCollection"
    f = obj["features"][1]
    assert f["geometry"]["coordinates"] == [30.0, -5.0]
    assert f["properties"] == {"point_id": "b", "cluster": 1, "probability": 0.5, "changed": False}
