"""Deterministic numerical primitives.

Four building blocks live here: a cyclic-Jacobi symmetric eigensolver,
a dense two-phase simplex solver for small linear programs, an ADMM
solver for the constrained basis-pursuit-denoise problem, and a
rank-revealing pseudo-inverse for positive semidefinite matrices.  All
are deterministic for fixed inputs: no randomized pivoting, no
iteration-order ambiguity.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ResidualInfeasibleWarning, ValidationError
from .kernels import jacobi_sweeps


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def symmetrize(a):
    """Return the symmetric part ``(a + a.T) / 2`` as a fresh array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def eigh_symmetric(a, tol=1e-12, max_sweeps=60):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    a : (n, n) array_like
        Matrix to decompose.  It is symmetrized as ``(a + a.T) / 2``
        before anything else, so mild asymmetry from accumulation
        round-off is tolerated.
    tol : float
        Relative off-diagonal convergence threshold.
    max_sweeps : int
        Cap on full cyclic sweeps before giving up.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted descending and the matching orthonormal
        eigenvector columns.  Each eigenvector is scaled so its largest-
        magnitude component is nonnegative (first such component on
        ties), which pins an otherwise arbitrary sign.

    Raises
    ------
    ValidationError
        On non-square or non-finite input.
    ConvergenceError
        If the off-diagonal mass fails to shrink below tolerance.
    """
    sym = symmetrize(a)
    if not np.all(np.isfinite(sym)):
        raise ValidationError("matrix contains non-finite entries")
    n = sym.shape[0]
    scale = float(np.max(np.abs(sym))) if n > 0 else 0.0
    if scale == 0.0:
        return EigenDecomposition(np.zeros(n), np.eye(n))
    work = np.array(sym, dtype=np.float64, order="C", copy=True)
    vecs = np.eye(n, dtype=np.float64)
    sweeps, off = jacobi_sweeps(work, vecs, tol * scale, max_sweeps)
    if off > tol * scale:
        raise ConvergenceError(
            f"jacobi sweeps stalled: off-diagonal {off:.3e} above "
            f"{tol * scale:.3e} after {max_sweeps} sweeps"
        )
    vals = np.diag(work).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(n):
        col = vecs[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            np.negative(col, out=col)
    return EigenDecomposition(vals, vecs)


# ---------------------------------------------------------------------------
# Linear programming: dense two-phase simplex with Bland's rule.
# ---------------------------------------------------------------------------


@dataclass
class LinearProgram:
    """``min c.x`` (or max) subject to ``a_ub @ x <= b_ub`` and box bounds.

    ``bounds`` holds one ``(lo, hi)`` pair per variable, where either
    end may be None for unbounded.  Defaults to fully free variables.
    """

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    bounds: Optional[list] = None
    maximize: bool = False


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None


_LP_TOL = 1e-9
_LP_MAX_ITER = 10000


def _pivot(tab, obj, basis, leave, enter):
    piv = tab[leave, enter]
    tab[leave] /= piv
    col = tab[:, enter].copy()
    col[leave] = 0.0
    tab -= np.outer(col, tab[leave])
    obj -= obj[enter] * tab[leave]
    basis[leave] = enter


def _simplex_phase(tab, obj, basis, tol=_LP_TOL):
    """Run simplex pivots until optimal or unbounded.  Bland's rule."""
    m = tab.shape[0]
    ncols = tab.shape[1] - 1
    for _ in range(_LP_MAX_ITER):
        enter = -1
        for j in range(ncols):
            if obj[j] < -tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave = -1
        best = np.inf
        for i in range(m):
            aij = tab[i, enter]
            if aij > tol:
                ratio = tab[i, -1] / aij
                if ratio < best - tol or (
                    ratio < best + tol and (leave < 0 or basis[i] < basis[leave])
                ):
                    if ratio < best:
                        best = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(tab, obj, basis, leave, enter)
    raise ConvergenceError(f"simplex exceeded {_LP_MAX_ITER} pivots")


def lp_solve(lp):
    """Solve a small dense linear program.

    Returns an `LPResult`; on ``status == "optimal"`` the reported
    objective sits within solver tolerance of the true optimum.  Ties
    between optimal vertices resolve deterministically through Bland's
    pivoting rule, so repeated calls agree bitwise.
    """
    c = np.atleast_1d(np.asarray(lp.c, dtype=float))
    a = np.atleast_2d(np.asarray(lp.a_ub, dtype=float))
    b = np.atleast_1d(np.asarray(lp.b_ub, dtype=float))
    n = c.shape[0]
    if a.size == 0:
        a = np.zeros((0, n))
        b = np.zeros(0)
    if a.shape[1] != n or b.shape[0] != a.shape[0]:
        raise ValidationError(
            f"inconsistent LP shapes: c {c.shape}, a_ub {a.shape}, b_ub {b.shape}"
        )
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("LP data contains non-finite entries")
    bounds = lp.bounds if lp.bounds is not None else [(None, None)] * n
    if len(bounds) != n:
        raise ValidationError(f"expected {n} bound pairs, got {len(bounds)}")
    sign = -1.0 if lp.maximize else 1.0
    c_eff = sign * c

    # Substitute each variable by nonnegative ones.  Records hold
    # (kind, column index/indices, offset) for back-mapping.
    cols = []
    costs = []
    recs = []
    extra_rows = []
    const = 0.0
    b_work = b.copy()
    for j in range(n):
        lo, hi = bounds[j]
        if lo is not None and hi is not None and hi < lo:
            return LPResult(status="infeasible")
        if lo is None and hi is None:
            recs.append(("free", len(cols), 0.0))
            cols.append(a[:, j].copy())
            costs.append(c_eff[j])
            cols.append(-a[:, j])
            costs.append(-c_eff[j])
        elif lo is not None and hi is None:
            recs.append(("shift", len(cols), lo))
            b_work -= a[:, j] * lo
            const += c_eff[j] * lo
            cols.append(a[:, j].copy())
            costs.append(c_eff[j])
        elif lo is None and hi is not None:
            recs.append(("flip", len(cols), hi))
            b_work -= a[:, j] * hi
            const += c_eff[j] * hi
            cols.append(-a[:, j])
            costs.append(-c_eff[j])
        else:
            recs.append(("shift", len(cols), lo))
            b_work -= a[:, j] * lo
            const += c_eff[j] * lo
            cols.append(a[:, j].copy())
            costs.append(c_eff[j])
            extra_rows.append((len(cols) - 1, hi - lo))

    n_std = len(cols)
    m = a.shape[0] + len(extra_rows)
    a_std = np.zeros((m, n_std))
    if n_std:
        a_std[: a.shape[0]] = np.column_stack(cols) if cols else np.zeros((a.shape[0], 0))
    b_std = np.concatenate([b_work, [ub for _, ub in extra_rows]])
    for i, (col_idx, _) in enumerate(extra_rows):
        a_std[a.shape[0] + i, col_idx] = 1.0
    c_std = np.asarray(costs, dtype=float)

    # Slack per row, then flip rows with negative rhs and add artificials.
    a_full = np.hstack([a_std, np.eye(m)])
    neg = b_std < 0.0
    a_full[neg] *= -1.0
    b_full = np.abs(b_std)
    art_rows = np.nonzero(neg)[0]
    n_real = n_std + m
    n_art = art_rows.shape[0]
    tab = np.hstack([a_full, np.zeros((m, n_art)), b_full[:, None]])
    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = n_std + i  # slack
    for k, i in enumerate(art_rows):
        tab[i, n_real + k] = 1.0
        basis[i] = n_real + k

    if n_art:
        obj = np.zeros(tab.shape[1])
        obj[n_real:-1] = 1.0
        for i in range(m):
            if basis[i] >= n_real:
                obj -= tab[i]
        status = _simplex_phase(tab, obj, basis)
        if status != "optimal" or -obj[-1] > 1e-7 * max(1.0, np.abs(b_full).max()):
            return LPResult(status="infeasible")
        # Pivot remaining artificials out of the basis where possible.
        for i in range(m):
            if basis[i] >= n_real:
                enter = -1
                for j in range(n_real):
                    if abs(tab[i, j]) > _LP_TOL:
                        enter = j
                        break
                if enter >= 0:
                    obj2 = np.zeros(tab.shape[1])
                    _pivot(tab, obj2, basis, i, enter)
        keep = [i for i in range(m) if basis[i] < n_real]
        tab = np.hstack([tab[keep][:, :n_real], tab[keep][:, -1:]])
        basis = basis[keep]
        m = tab.shape[0]

    obj = np.zeros(tab.shape[1])
    obj[:n_std] = c_std
    for i in range(m):
        if obj[basis[i]] != 0.0:
            obj -= obj[basis[i]] * tab[i]
    status = _simplex_phase(tab, obj, basis)
    if status == "unbounded":
        return LPResult(status="unbounded")

    x_std = np.zeros(n_real)
    for i in range(m):
        x_std[basis[i]] = tab[i, -1]
    x = np.empty(n)
    for j, (kind, pos, off) in enumerate(recs):
        if kind == "free":
            x[j] = x_std[pos] - x_std[pos + 1]
        elif kind == "shift":
            x[j] = off + x_std[pos]
        else:
            x[j] = off - x_std[pos]
    objective = float(c @ x)
    return LPResult(status="optimal", x=x, objective=objective)


# ---------------------------------------------------------------------------
# Basis pursuit denoise via ADMM.
# ---------------------------------------------------------------------------


def bpdn_solve(psi, f, epsilon, rho=50.0, alpha=1.8, max_iter=5000, tol=1e-8):
    """Minimize ``||a||_1`` subject to ``||psi @ a - f||_2 <= epsilon``.

    The system is normalized first (unit column norms, unit ``||f||``)
    so the fixed ADMM penalty ``rho`` behaves uniformly across problem
    scales; ``alpha`` is the usual fixed over-relaxation mix and the
    returned coefficients are denormalized.  Among iterates that
    satisfy the residual constraint (to a 1e-6 relative margin) the one
    with the smallest l1 norm is returned, so the reported objective
    never degrades as iterations proceed.

    If no iterate attains the constraint the bound is unachievable for
    this system; a `ResidualInfeasibleWarning` is issued and the plain
    least-squares solution comes back instead.
    """
    psi = np.asarray(psi, dtype=float)
    f = np.asarray(f, dtype=float).ravel()
    if psi.ndim != 2 or psi.shape[0] != f.shape[0]:
        raise ValidationError(
            f"shape mismatch: psi {psi.shape} against f {f.shape}"
        )
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(f))):
        raise ValidationError("bpdn data contains non-finite entries")
    if epsilon < 0:
        raise ValidationError(f"epsilon must be nonnegative, got {epsilon}")
    n_rows, n_cols = psi.shape

    f_scale = float(np.linalg.norm(f))
    if f_scale <= epsilon or f_scale == 0.0:
        return np.zeros(n_cols)
    col_norms = np.linalg.norm(psi, axis=0)
    col_norms[col_norms == 0.0] = 1.0
    psi_n = psi / col_norms
    f_n = f / f_scale
    eps_n = epsilon / f_scale
    feas_margin = 1e-6

    # Cache the factorization of (I + Psi^T Psi); go through the smaller
    # Gram matrix when the system is underdetermined.
    if n_cols <= n_rows:
        gram = np.eye(n_cols) + psi_n.T @ psi_n
        chol = scipy.linalg.cho_factor(gram, lower=True)

        def solve_normal(rhs):
            return scipy.linalg.cho_solve(chol, rhs)

    else:
        small = np.eye(n_rows) + psi_n @ psi_n.T
        chol = scipy.linalg.cho_factor(small, lower=True)

        def solve_normal(rhs):
            return rhs - psi_n.T @ scipy.linalg.cho_solve(chol, psi_n @ rhs)

    x = np.zeros(n_cols)
    z = np.zeros(n_cols)
    r = np.zeros(n_rows)
    u = np.zeros(n_cols)
    w = np.zeros(n_rows)
    shrink = 1.0 / rho
    best = None
    best_l1 = np.inf
    stall = 0
    for _ in range(max_iter):
        rhs = (z - u) + psi_n.T @ (f_n + r - w)
        x = solve_normal(rhs)
        px = psi_n @ x
        z_prev = z
        r_prev = r
        xh = alpha * x + (1.0 - alpha) * z
        pxh = alpha * px + (1.0 - alpha) * (f_n + r)
        v = xh + u
        z = np.sign(v) * np.maximum(np.abs(v) - shrink, 0.0)
        v = pxh - f_n + w
        vn = float(np.linalg.norm(v))
        r = v if vn <= eps_n else v * (eps_n / vn)
        u = u + xh - z
        w = w + pxh - f_n - r

        res_z = float(np.linalg.norm(psi_n @ z - f_n))
        if res_z <= eps_n + feas_margin:
            l1 = float(np.abs(z).sum())
            material = best is None or l1 < best_l1 - 1e-9 * max(1.0, best_l1)
            if best is None or l1 < best_l1:
                best_l1 = l1
                best = z.copy()
            if material:
                stall = 0
            else:
                stall += 1
                # the objective has converged; further sweeps only polish
                if stall >= 250:
                    break

        prim = np.sqrt(
            np.linalg.norm(x - z) ** 2 + np.linalg.norm(px - f_n - r) ** 2
        )
        dual = rho * np.sqrt(
            np.linalg.norm(z - z_prev) ** 2
            + np.linalg.norm(psi_n.T @ (r - r_prev)) ** 2
        )
        if prim <= tol and dual <= tol:
            break

    if best is None:
        ls, *_ = np.linalg.lstsq(psi, f, rcond=None)
        achieved = float(np.linalg.norm(psi @ ls - f))
        warnings.warn(
            f"residual bound {epsilon:.3e} is below the minimum achievable "
            f"{achieved:.3e}; returning the least-squares solution",
            ResidualInfeasibleWarning,
            stacklevel=2,
        )
        return ls
    return best / col_norms * f_scale


# ---------------------------------------------------------------------------
# PSD pseudo-inverse.
# ---------------------------------------------------------------------------


def psd_spectrum(s, rel_tol=1e-10):
    """Eigenvalues (descending), eigenvectors and numerical rank of a PSD matrix.

    Eigenvalues are retained while they exceed ``rel_tol`` times the
    largest one.  An eigenvalue below ``-1e-8 * trace`` means the input
    is not positive semidefinite and raises.
    """
    sym = symmetrize(s)
    vals, vecs = eigh_symmetric(sym)
    trace = float(np.trace(sym))
    neg_floor = -1e-8 * max(trace, 0.0)
    worst = float(vals[-1]) if vals.size else 0.0
    if worst < neg_floor:
        raise ValidationError(
            f"matrix is not positive semidefinite: eigenvalue {worst:.6e} "
            f"below tolerance {neg_floor:.6e}"
        )
    lam_max = float(vals[0]) if vals.size else 0.0
    if lam_max <= 0.0:
        return vals, vecs, 0
    rank = int(np.sum(vals > rel_tol * lam_max))
    return vals, vecs, rank


def pinv_psd(s, rel_tol=1e-10):
    """Moore-Penrose pseudo-inverse of a PSD matrix with its numerical rank.

    Eigenvalues at or below ``rel_tol`` times the largest are treated
    as zero and excluded; the result is exactly symmetric.
    """
    vals, vecs, rank = psd_spectrum(s, rel_tol=rel_tol)
    n = vals.shape[0]
    if rank == 0:
        return np.zeros((n, n)), 0
    q = vecs[:, :rank]
    pinv = (q / vals[:rank]) @ q.T
    return symmetrize(pinv), rank
