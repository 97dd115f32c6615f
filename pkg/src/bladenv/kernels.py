"""Hot numeric kernels with two interchangeable backends.

The accelerated backend compiles the kernels with numba's ``@njit``; the
fallback backend runs vectorized numpy translations of the same
algorithms.  Selection happens once at import time: the environment
variable ``BLADENV_NUMBA`` set to ``0``, ``false`` or ``off`` forces the
numpy fallback, anything else (or an importable numba) enables the
compiled path.  Both backends consume identical pre-generated random
streams, so results are bitwise-comparable up to floating-point
reassociation.
"""

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_FLAG = os.environ.get("BLADENV_NUMBA", "1").strip().lower()
USE_NUMBA = _HAVE_NUMBA and _FLAG not in ("0", "false", "off")


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def _maybe_njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigenvalue sweeps for symmetric matrices.
# ---------------------------------------------------------------------------


def _jacobi_sweeps_loop(a, v, tol_abs, max_sweeps):
    """Diagonalize symmetric ``a`` in place, accumulating rotations in ``v``.

    Runs cyclic sweeps over the strict upper triangle with the stable
    Rutishauser rotation.  Returns ``(sweeps_used, off)`` where ``off``
    is the largest remaining off-diagonal magnitude.
    """
    n = a.shape[0]
    off = 0.0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                m = abs(a[p, q])
                if m > off:
                    off = m
        if off <= tol_abs:
            return sweep, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-3 * tol_abs:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if abs(theta) > 1e150:
                    # exact formula would overflow theta**2
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = a[i, p]
                        aiq = a[i, q]
                        a[i, p] = c * aip - s * aiq
                        a[p, i] = a[i, p]
                        a[i, q] = s * aip + c * aiq
                        a[q, i] = a[i, q]
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            m = abs(a[p, q])
            if m > off:
                off = m
    return max_sweeps, off


def _jacobi_sweeps_vec(a, v, tol_abs, max_sweeps):
    """Numpy translation of `_jacobi_sweeps_loop` with sliced row updates."""
    n = a.shape[0]
    off = 0.0
    for sweep in range(max_sweeps):
        absa = np.abs(a)
        np.fill_diagonal(absa, 0.0)
        off = float(absa.max()) if n > 1 else 0.0
        if off <= tol_abs:
            return sweep, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-3 * tol_abs:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                col_p = v[:, p].copy()
                col_q = v[:, q].copy()
                v[:, p] = c * col_p - s * col_q
                v[:, q] = s * col_p + c * col_q
    absa = np.abs(a)
    np.fill_diagonal(absa, 0.0)
    off = float(absa.max()) if n > 1 else 0.0
    return max_sweeps, off


# ---------------------------------------------------------------------------
# Hit-and-run chain over a bounded polytope  A z <= b.
# ---------------------------------------------------------------------------


def _hit_and_run_chain(a_mat, b, z0, directions, uniforms, burn_in, thin, out):
    """Walk the chain and fill ``out`` with thinned post-burn-in states.

    ``directions`` holds one unit direction per step and ``uniforms`` one
    uniform draw per step, both pre-generated so the consumed randomness
    is backend-independent.  Returns ``(kept, degenerate, status)`` where
    status 1 flags an unbounded chord (the polytope is not bounded).
    Steps whose feasible chord collapses to a point are counted as
    degenerate and skipped without moving.
    """
    m = b.shape[0]
    total = directions.shape[0]
    n_out = out.shape[0]
    z = z0.copy()
    kept = 0
    degenerate = 0
    for k in range(total):
        d = directions[k]
        ad = a_mat @ d
        slack = b - a_mat @ z
        t_lo = -np.inf
        t_hi = np.inf
        for i in range(m):
            coef = ad[i]
            if coef > 1e-14:
                t = slack[i] / coef
                if t < t_hi:
                    t_hi = t
            elif coef < -1e-14:
                t = slack[i] / coef
                if t > t_lo:
                    t_lo = t
        if not (np.isfinite(t_lo) and np.isfinite(t_hi)):
            return kept, degenerate, 1
        if t_hi <= t_lo:
            degenerate += 1
            continue
        z = z + (t_lo + uniforms[k] * (t_hi - t_lo)) * d
        if k >= burn_in and (k - burn_in + 1) % thin == 0 and kept < n_out:
            out[kept] = z
            kept += 1
    return kept, degenerate, 0


# ---------------------------------------------------------------------------
# Tensorized polynomial basis evaluation and ridge gradients.
#
# ``tables`` has shape (n, d, p + 1): univariate basis values per point
# and dimension.  ``deriv`` matches it with univariate derivatives.
# ``indices`` has shape (n_terms, d) with the per-dimension degrees.
# ---------------------------------------------------------------------------


def _basis_matrix_loop(indices, tables, out):
    n = tables.shape[0]
    n_terms = indices.shape[0]
    d = indices.shape[1]
    for k in range(n):
        for i in range(n_terms):
            prod = 1.0
            for j in range(d):
                prod *= tables[k, j, indices[i, j]]
            out[k, i] = prod


def _basis_matrix_vec(indices, tables, out):
    out[:] = 1.0
    d = indices.shape[1]
    for j in range(d):
        out *= tables[:, j, :][:, indices[:, j]]


def _ridge_gradients_loop(indices, tables, deriv, coeffs, out):
    """Accumulate gradients of ``sum_i coeffs[i] * psi_i`` into ``out``.

    Uses prefix/suffix partial products per term so dimensions with zero
    basis value never force a division.
    """
    n = tables.shape[0]
    n_terms = indices.shape[0]
    d = indices.shape[1]
    prefix = np.empty(d)
    for k in range(n):
        for i in range(n_terms):
            ci = coeffs[i]
            if ci == 0.0:
                continue
            prod = 1.0
            for j in range(d):
                prefix[j] = prod
                prod *= tables[k, j, indices[i, j]]
            suffix = 1.0
            for j in range(d - 1, -1, -1):
                out[k, j] += ci * prefix[j] * suffix * deriv[k, j, indices[i, j]]
                suffix *= tables[k, j, indices[i, j]]


def _ridge_gradients_vec(indices, tables, deriv, coeffs, out):
    n = tables.shape[0]
    d = indices.shape[1]
    prefix = np.empty((d, n))
    for i in range(indices.shape[0]):
        ci = coeffs[i]
        if ci == 0.0:
            continue
        prod = np.ones(n)
        for j in range(d):
            prefix[j] = prod
            prod = prod * tables[:, j, indices[i, j]]
        suffix = np.ones(n)
        for j in range(d - 1, -1, -1):
            out[:, j] += ci * prefix[j] * suffix * deriv[:, j, indices[i, j]]
            suffix = suffix * tables[:, j, indices[i, j]]


if USE_NUMBA:
    jacobi_sweeps = numba.njit(cache=True)(_jacobi_sweeps_loop)
    hit_and_run_chain = numba.njit(cache=True)(_hit_and_run_chain)
    basis_matrix_fill = numba.njit(cache=True)(_basis_matrix_loop)
    ridge_gradients_fill = numba.njit(cache=True)(_ridge_gradients_loop)
else:
    jacobi_sweeps = _jacobi_sweeps_vec
    hit_and_run_chain = _hit_and_run_chain
    basis_matrix_fill = _basis_matrix_vec
    ridge_gradients_fill = _ridge_gradients_vec
