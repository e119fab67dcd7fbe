"""Slow, independent reference implementations used as test oracles.

Nothing here shares code with the package: ranks come from O(n^2)
broadcast comparisons instead of sorted merges.
"""
import itertools

import numpy as np

TOL = 1e-12


def ecdf_counts(sample, at):
    """#{s in sample : s <= at_i} for each i."""
    return (np.asarray(sample)[None, :] <= np.asarray(at)[:, None]).sum(axis=1)


def fmadogram_counts(y1, y2):
    n = len(y1)
    a = ecdf_counts(y1, y1)
    b = ecdf_counts(y2, y2)
    return np.abs(a - b).sum() / (2.0 * n * n)


def rfa_counts(y1, y2, c, tol=TOL):
    """Counts behind the RFA estimate, with the same relative tie slack.

    A[i] = n F2(c y1_i), B[i] = n F1(y2_i / c), both evaluated through
    multiplications only: y2_j <= (c y1_i)(1+tol) and c y1_j <= y2_i (1+tol).
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    cy1 = c * y1
    A = (y2[None, :] <= (cy1 * (1.0 + tol))[:, None]).sum(axis=1)
    B = (cy1[None, :] <= (y2 * (1.0 + tol))[:, None]).sum(axis=1)
    return A, B


def rfa_via_max(y1, y2, c, tol=TOL):
    """RFA estimate through 1/2|a - b| = max(a, b) - (a + b)/2."""
    n = len(y1)
    A, B = rfa_counts(y1, y2, c, tol)
    a, b = A / n, B / n
    return float(np.mean(np.maximum(a, b) - 0.5 * (a + b)))


def dist_diff_terms(y1, y2, c, tol=TOL):
    """Integer sums (S_d, S_D, sum Delta1, sum Delta2) on the 1/n^2 count scale.

    The bound 2|d - D| <= mean Delta(c, Y1) + mean Delta(c, Y2/c) becomes
    |S_d - S_D| <= sum Delta1 + sum Delta2 after multiplying by n^2.
    """
    A, B = rfa_counts(y1, y2, c, tol)
    C = ecdf_counts(y1, y1)
    E = ecdf_counts(y2, y2)
    S_d = int(np.abs(C - E).sum())
    S_D = int(np.abs(A - B).sum())
    return S_d, S_D, int(np.abs(A - C).sum()), int(np.abs(E - B).sum())


def pam_exhaustive(D, k):
    """Minimum assignment cost over all medoid subsets of size k."""
    D = np.asarray(D)
    best = np.inf
    for med in itertools.combinations(range(len(D)), k):
        best = min(best, float(D[:, list(med)].min(axis=1).sum()))
    return best


def min_disagreement(ref, tgt, k):
    best = None
    for perm in itertools.permutations(range(k)):
        relab = np.asarray(perm)[np.asarray(tgt)]
        dis = int(np.sum(relab != np.asarray(ref)))
        best = dis if best is None else min(best, dis)
    return best
