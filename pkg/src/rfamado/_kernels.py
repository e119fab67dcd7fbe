"""Compiled inner loops for the madogram estimators.

All estimators reduce to integer rank counts, so sums are exact and the
result does not depend on evaluation order or thread count.

Notation: ``x`` and ``y`` are the two series, ``xs``/``ys`` the same values
sorted and ``ox``/``oy`` the stable argsorts. For multipliers ``ma``, ``mb``
the pair ``a = ma*x``, ``b = mb*y`` is compared with

    cnt_a[t] = #{j : b_j <= a_t (1 + tol)}   (n * F2-hat evaluated at c*x_t)
    cnt_b[t] = #{j : a_j <= b_t (1 + tol)}   (n * F1-hat evaluated at y_t/c)

where ``c = ma / mb``. ``tol`` absorbs last-ulp noise from the rescaling so
that exactly homogeneous pairs give exact zeros.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def rfa_sum(xs, ys, ox, oy, ma, mb, tol, cnt_a, cnt_b):
    """Return sum_t |cnt_a[t] - cnt_b[t]| (an integer).

    ``xs``/``ys`` are the sorted series, ``ox``/``oy`` the original positions
    of the sorted entries.
    """
    n = xs.shape[0]
    up = 1.0 + tol
    q = 0
    for r in range(n):
        thr = ma * xs[r] * up
        while q < n and mb * ys[q] <= thr:
            q += 1
        cnt_a[ox[r]] = q
    q = 0
    for r in range(n):
        thr = mb * ys[r] * up
        while q < n and ma * xs[q] <= thr:
            q += 1
        cnt_b[oy[r]] = q
    s = 0
    for t in range(n):
        d = cnt_a[t] - cnt_b[t]
        s += d if d >= 0 else -d
    return s


@njit(cache=True, nogil=True)
def own_rank_counts(xs, ox, out):
    """out[t] = #{j : x_j <= x_t} (max rank, ties share the top count)."""
    n = xs.shape[0]
    r = n - 1
    while r >= 0:
        e = r
        v = xs[r]
        while r >= 0 and xs[r] == v:
            r -= 1
        for s in range(r + 1, e + 1):
            out[ox[s]] = e + 1


@njit(cache=True, nogil=True)
def fmado_sum(xs, ys, ox, oy, c1, c2):
    own_rank_counts(xs, ox, c1)
    own_rank_counts(ys, oy, c2)
    s = 0
    for t in range(xs.shape[0]):
        d = c1[t] - c2[t]
        s += d if d >= 0 else -d
    return s


@njit(cache=True, nogil=True)
def _eval_log(xs, ys, ox, oy, u, tol, cnt_a, cnt_b):
    # Multiply the series whose factor is >= 1; the mirrored problem at -u
    # then performs bit-identical arithmetic with the roles swapped.
    if u >= 0.0:
        return rfa_sum(xs, ys, ox, oy, math.exp(u), 1.0, tol, cnt_a, cnt_b)
    return rfa_sum(xs, ys, ox, oy, 1.0, math.exp(-u), tol, cnt_a, cnt_b)


@njit(cache=True, nogil=True)
def _better(s, u, best_s, best_u):
    # Order: smaller sum, then smaller |log c|, then negative log c.
    if s != best_s:
        return s < best_s
    au = abs(u)
    ab = abs(best_u)
    if au != ab:
        return au < ab
    return u < best_u


@njit(cache=True, nogil=True)
def search_log_c(xs, ys, ox, oy, grid, step, refine, lo, hi, tol, cnt_a, cnt_b):
    """Grid argmin of the RFA sum over log c, then ``refine`` halving rounds.

    Returns (best_sum, best_log_c, hit_boundary).
    """
    k = grid.shape[0]
    best_s = -1
    best_u = 0.0
    best_k = 0
    for i in range(k):
        s = _eval_log(xs, ys, ox, oy, grid[i], tol, cnt_a, cnt_b)
        if best_s < 0 or _better(s, grid[i], best_s, best_u):
            best_s = s
            best_u = grid[i]
            best_k = i
    boundary = best_k == 0 or best_k == k - 1
    h = step
    for _ in range(refine):
        h = 0.5 * h
        centre = best_u
        for sign in (-1.0, 1.0):
            u = centre + sign * h
            if u < lo or u > hi:
                continue
            s = _eval_log(xs, ys, ox, oy, u, tol, cnt_a, cnt_b)
            if _better(s, u, best_s, best_u):
                best_s = s
                best_u = u
    return best_s, best_u, boundary


@njit(cache=True, nogil=True)
def pair_block(XS, O, I, J, start, stop, grid, step, refine, lo, hi, tol,
               out_sum, out_u, out_bnd, out_fsum):
    """Process pairs ``I[start:stop], J[start:stop]``; writes by pair index."""
    n = XS.shape[1]
    cnt_a = np.empty(n, dtype=np.int64)
    cnt_b = np.empty(n, dtype=np.int64)
    for q in range(start, stop):
        i = I[q]
        j = J[q]
        s, u, b = search_log_c(XS[i], XS[j], O[i], O[j], grid, step, refine, lo, hi, tol, cnt_a, cnt_b)
        out_sum[q] = s
        out_u[q] = u
        out_bnd[q] = b
        out_fsum[q] = fmado_sum(XS[i], XS[j], O[i], O[j], cnt_a, cnt_b)
