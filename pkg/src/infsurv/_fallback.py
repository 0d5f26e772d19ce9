"""Pure-Python/numpy versions of the hot kernels in ``_kernels.pyx``.

Both modules expose the same three functions with the same semantics; the
package picks one at import time (see ``_backend``).
"""

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT, NUMERICAL = 0, 1, 2, 3


def logrank_scan(time_rank, event, n_times, cuts):
    """Log-rank statistics for every split of a feature-sorted node.

    Parameters
    ----------
    time_rank : int array, shape (n,)
        Rank of each row's time among the node's distinct times, rows
        ordered by the split feature.
    event : int8 array, shape (n,)
    n_times : int
    cuts : int array
        Increasing split positions; cut ``p`` sends rows ``[:p]`` left.

    Returns
    -------
    ndarray of |sum(O - E)| / sqrt(V) per cut, 0 where V is 0.
    """
    time_rank = np.asarray(time_rank, dtype=np.int64)
    event = np.asarray(event, dtype=np.int64)
    cuts = np.asarray(cuts, dtype=np.int64)
    deaths = np.bincount(time_rank, weights=event, minlength=n_times)
    at_risk = np.cumsum(np.bincount(time_rank, minlength=n_times)[::-1])[::-1].astype(float)
    mask = deaths > 0
    D = deaths[mask]
    Y = at_risk[mask]
    out = np.zeros(cuts.shape[0])
    for k, p in enumerate(cuts):
        left_count = np.bincount(time_rank[:p], minlength=n_times)
        left_deaths = np.bincount(time_rank[:p], weights=event[:p], minlength=n_times)[mask]
        yl = np.cumsum(left_count[::-1])[::-1][mask].astype(float)
        num = 0.0
        var = 0.0
        for j in range(D.shape[0]):
            num += left_deaths[j] - yl[j] * D[j] / Y[j]
            if Y[j] > 1:
                frac = yl[j] / Y[j]
                var += frac * (1.0 - frac) * (Y[j] - D[j]) / (Y[j] - 1.0) * D[j]
        out[k] = abs(num) / np.sqrt(var) if var > 0 else 0.0
    return out


def route_tree(feature, threshold, left, right, X):
    """Leaf node index reached by every row of ``X``; ``x <= threshold`` goes left."""
    X = np.asarray(X, dtype=float)
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            return node
        go_left = X[rows[active], f[active]] <= threshold[node[active]]
        node[active] = np.where(go_left, left[node[active]], right[node[active]])


def simplex_core(T, rhs, cost, basis, upper, at_upper, blocked,
                 opt_tol, pivot_tol, max_iter):
    """Bounded-variable primal simplex iterations with Bland's rule.

    Works in place on a tableau ``T = B^-1 A`` whose variables all have
    lower bound 0 and upper bound ``upper`` (possibly inf).  ``rhs`` holds
    the basic values, ``cost`` the reduced costs.  Nonbasic variables sit at
    0 or, when ``at_upper`` is set, at their upper bound.  ``blocked``
    columns never enter.

    Returns ``(status, iterations)``.
    """
    m, n = T.shape
    is_basic = np.zeros(n, dtype=bool)
    is_basic[basis] = True
    eligible = ~is_basic & ~blocked.astype(bool)
    it = 0
    while True:
        increase = eligible & (at_upper == 0) & (cost < -opt_tol)
        decrease = eligible & (at_upper != 0) & (cost > opt_tol)
        candidates = np.flatnonzero(increase | decrease)
        if candidates.size == 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        it += 1
        q = candidates[0]
        s = 1.0 if increase[q] else -1.0
        rate = -s * T[:, q]
        best = upper[q]
        leave = -1
        to_upper = False
        for i in range(m):
            r = rate[i]
            if r < -pivot_tol:
                theta = max(rhs[i], 0.0) / -r
                hits_upper = False
            elif r > pivot_tol and np.isfinite(upper[basis[i]]):
                theta = max(upper[basis[i]] - rhs[i], 0.0) / r
                hits_upper = True
            else:
                continue
            if leave < 0:
                if theta < best:
                    best, leave, to_upper = theta, i, hits_upper
            elif theta < best or (theta == best and basis[i] < basis[leave]):
                best, leave, to_upper = theta, i, hits_upper
        if leave < 0 and not np.isfinite(best):
            return UNBOUNDED, it
        rhs += best * rate
        if leave < 0:
            at_upper[q] = 0 if at_upper[q] else 1
            continue
        piv = T[leave, q]
        if abs(piv) <= pivot_tol:
            return NUMERICAL, it
        p = basis[leave]
        entering_value = best if s > 0 else upper[q] - best
        T[leave] /= piv
        col = T[:, q].copy()
        col[leave] = 0.0
        T -= np.outer(col, T[leave])
        cost -= cost[q] * T[leave]
        rhs[leave] = entering_value
        basis[leave] = q
        at_upper[q] = 0
        at_upper[p] = 1 if to_upper else 0
        is_basic[q] = True
        is_basic[p] = False
        eligible[q] = False
        eligible[p] = not blocked[p]
