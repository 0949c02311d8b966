"""Pivoting core of the bounded-variable primal simplex.

Kept free of Python objects so numba can compile it; when numba is not
importable the same functions run as plain Python, just slower. All state
lives in the arrays passed in: the dense tableau T (the basis inverse
applied to the extended constraint matrix), the basis column indices, the
per-column values x and states, and the bound/cost vectors.

Column states: 0 at lower bound, 1 at upper bound, 2 free at zero,
3 basic. Status codes returned: 0 optimal, 1 unbounded, 2 iteration limit.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is expected to be present
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3
STATUS_OPTIMAL, STATUS_UNBOUNDED, STATUS_ITER_LIMIT = 0, 1, 2


@njit(cache=True)
def _refactor(T, A0, b, basis, x, state, lb, ub):
    m = T.shape[0]
    n_all = x.shape[0]
    B = np.empty((m, m))
    for i in range(m):
        for r in range(m):
            B[r, i] = A0[r, basis[i]]
    T[:, :] = np.linalg.solve(B, A0)
    rhs = b.copy()
    for j in range(n_all):
        if state[j] == BASIC:
            continue
        if state[j] == AT_LOWER:
            x[j] = lb[j]
        elif state[j] == AT_UPPER:
            x[j] = ub[j]
        else:
            x[j] = 0.0
        if x[j] != 0.0:
            for r in range(m):
                rhs[r] -= A0[r, j] * x[j]
    xb = np.linalg.solve(B, rhs)
    for i in range(m):
        x[basis[i]] = xb[i]


@njit(cache=True)
def pivot_loop(T, A0, b, basis, x, state, lb, ub, cost,
               feas_tol, piv_tol, max_iter, bland_after):
    m = T.shape[0]
    n_all = x.shape[0]
    degenerate_run = 0
    bland = False
    d = np.empty(n_all)
    cB = np.empty(m)

    for it in range(max_iter):
        if m > 0 and it > 0 and it % 150 == 0:
            _refactor(T, A0, b, basis, x, state, lb, ub)

        # Reduced costs d = cost - cost[basis] @ T.
        if m > 0:
            for i in range(m):
                cB[i] = cost[basis[i]]
            for j in range(n_all):
                acc = 0.0
                for i in range(m):
                    acc += cB[i] * T[i, j]
                d[j] = cost[j] - acc
        else:
            for j in range(n_all):
                d[j] = cost[j]

        # Entering column: Dantzig on |d| among eligible moves, Bland when
        # degeneracy has stalled progress for too long.
        best_j = -1
        best_mag = 0.0
        direction = 1.0
        for j in range(n_all):
            st = state[j]
            if st == BASIC:
                continue
            if not (ub[j] - lb[j] > piv_tol):
                continue
            dj = d[j]
            if dj < -feas_tol and st != AT_UPPER:
                mag = -dj
                dirj = 1.0
            elif dj > feas_tol and st != AT_LOWER:
                mag = dj
                dirj = -1.0
            else:
                continue
            if bland:
                best_j = j
                direction = dirj
                break
            if mag > best_mag:
                best_mag = mag
                best_j = j
                direction = dirj
        if best_j < 0:
            return STATUS_OPTIMAL
        j = best_j

        if direction > 0:
            own_limit = ub[j] - x[j]
        else:
            own_limit = x[j] - lb[j]

        # Ratio test over the basic variables.
        row_limit = np.inf
        r_best = -1
        for i in range(m):
            rate = direction * T[i, j]
            bi = basis[i]
            if rate > piv_tol:
                lim = (x[bi] - lb[bi]) / rate
            elif rate < -piv_tol:
                lim = (ub[bi] - x[bi]) / (-rate)
            else:
                continue
            if lim < 0.0:
                lim = 0.0
            if lim < row_limit - 1e-12:
                row_limit = lim
                r_best = i
            elif r_best >= 0 and lim <= row_limit + 1e-12:
                if bland:
                    if basis[i] < basis[r_best]:
                        r_best = i
                else:
                    if abs(T[i, j]) > abs(T[r_best, j]):
                        r_best = i

        step = own_limit if own_limit < row_limit else row_limit
        if not np.isfinite(step):
            return STATUS_UNBOUNDED
        if step <= piv_tol:
            degenerate_run += 1
            if degenerate_run > bland_after:
                bland = True
        else:
            degenerate_run = 0

        if own_limit <= row_limit:
            # Bound flip, no basis change.
            if step > 0.0:
                for i in range(m):
                    x[basis[i]] -= direction * T[i, j] * step
            if direction > 0:
                x[j] = ub[j]
                state[j] = AT_UPPER
            else:
                x[j] = lb[j]
                state[j] = AT_LOWER
            continue

        leaving = basis[r_best]
        if step > 0.0:
            for i in range(m):
                x[basis[i]] -= direction * T[i, j] * step
            x[j] += direction * step
        if direction * T[r_best, j] > 0.0:
            x[leaving] = lb[leaving]
            state[leaving] = AT_LOWER
        else:
            x[leaving] = ub[leaving]
            state[leaving] = AT_UPPER
        state[j] = BASIC
        basis[r_best] = j

        # Pivot the tableau on (r_best, j).
        piv = T[r_best, j]
        for col in range(T.shape[1]):
            T[r_best, col] /= piv
        for i in range(m):
            if i == r_best:
                continue
            factor = T[i, j]
            if factor != 0.0:
                for col in range(T.shape[1]):
                    T[i, col] -= factor * T[r_best, col]

    return STATUS_ITER_LIMIT
