"""Preconditioned conjugate gradients with explicit residual accounting.

The default tolerances follow the free-surface model: Laplace solves stop at
a relative residual of 1e-6 (absolute 1e-15) and mass solves at 1e-5.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import parallel

__all__ = [
    "SolveReport",
    "SolverError",
    "NonConvergenceError",
    "MatrixPropertyError",
    "JacobiPreconditioner",
    "SymmetricGaussSeidelPreconditioner",
    "FactorizedPreconditioner",
    "make_preconditioner",
    "cg_solve",
    "mass_solve",
    "LAPLACE_RTOL",
    "LAPLACE_ATOL",
    "MASS_RTOL",
    "MASS_ATOL",
]

LAPLACE_RTOL = 1e-6
LAPLACE_ATOL = 1e-15
MASS_RTOL = 1e-5
MASS_ATOL = 1e-15


@dataclass
class SolveReport:
    iterations: int
    rel_residual: float
    abs_residual: float
    converged: bool
    wall_time: float
    rtol: float = LAPLACE_RTOL
    atol: float = LAPLACE_ATOL
    stage: str = ""

    CSV_FIELDS = (
        "stage", "iterations", "rel_residual", "abs_residual", "converged", "wall_time", "rtol", "atol"
    )

    def as_row(self):
        d = asdict(self)
        return [d[k] for k in self.CSV_FIELDS]


class SolverError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonConvergenceError(SolverError):
    pass


class MatrixPropertyError(SolverError):
    pass


class JacobiPreconditioner:
    def __init__(self, A):
        d = np.asarray(A.diagonal(), dtype=float)
        if np.any(d <= 0):
            raise MatrixPropertyError("non-positive diagonal entry; matrix is not SPD")
        self.inv_diag = 1.0 / d

    def __call__(self, r, out=None):
        if out is None:
            out = np.empty_like(r)
        return parallel.scale(self.inv_diag, r, out)


class SymmetricGaussSeidelPreconditioner:
    """One forward and one backward Gauss-Seidel sweep."""

    def __init__(self, A):
        A = sp.csr_matrix(A)
        self.lower = sp.tril(A, format="csr")
        self.upper = sp.triu(A, format="csr")
        self.diag = A.diagonal()
        if np.any(self.diag <= 0):
            raise MatrixPropertyError("non-positive diagonal entry; matrix is not SPD")

    def __call__(self, r, out=None):
        y = spla.spsolve_triangular(self.lower, r, lower=True)
        z = spla.spsolve_triangular(self.upper, self.diag * y, lower=False)
        if out is not None:
            out[:] = z
            return out
        return z


class FactorizedPreconditioner:
    """Exact sparse LU factorisation of a reference operator.

    Used with a frozen reference geometry: the factor of the undisturbed
    domain stays an excellent preconditioner while the free surface moves.
    """

    def __init__(self, A):
        self.lu = spla.splu(sp.csc_matrix(A))

    def __call__(self, r, out=None):
        z = self.lu.solve(r)
        if out is not None:
            out[:] = z
            return out
        return z


_PRECONDITIONERS = {
    "jacobi": JacobiPreconditioner,
    "sgs": SymmetricGaussSeidelPreconditioner,
    "lu": FactorizedPreconditioner,
}


def make_preconditioner(kind, A):
    if kind is None or kind == "none":
        return None
    if callable(kind) and not isinstance(kind, str):
        return kind
    try:
        return _PRECONDITIONERS[kind](A)
    except KeyError:
        raise ValueError(f"unknown preconditioner {kind!r}") from None


def cg_solve(A, b, precond="jacobi", rtol=LAPLACE_RTOL, atol=LAPLACE_ATOL, maxiter=None,
             x0=None, raise_on_failure=True, stage=""):
    """Solve the SPD system A x = b by preconditioned conjugate gradients.

    Stops once the true residual satisfies
    ``||b - A x|| <= max(rtol ||b||, atol)``. The recursively updated residual
    is used to decide when to check; the true residual is recomputed before
    accepting, and iteration resumes from it if the two disagree.

    Parameters
    ----------
    A : scipy.sparse.csr_matrix
    b : ndarray
    precond : str, callable or None
        ``"jacobi"``, ``"sgs"``, ``"lu"``, any callable ``M(r) -> z`` or
        None for plain CG.
    x0 : ndarray, optional
        Initial guess.

    Returns
    -------
    x : ndarray
    report : SolveReport

    Raises
    ------
    NonConvergenceError
        When `maxiter` is reached (only if `raise_on_failure`).
    MatrixPropertyError
        If a search direction has non-positive curvature.
    """
    t0 = time.perf_counter()
    A = A if sp.isspmatrix_csr(A) else sp.csr_matrix(A)
    b = np.ascontiguousarray(b, dtype=float)
    n = len(b)
    if maxiter is None:
        maxiter = max(10 * n, 100)
    M = make_preconditioner(precond, A)
    bnorm = parallel.norm(b)
    target = max(rtol * bnorm, atol)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    ap = np.empty(n)
    r = b - parallel.matvec(A, x, ap) if x0 is not None else b.copy()
    rnorm = parallel.norm(r)
    it = 0

    def finish(converged):
        rel = rnorm / bnorm if bnorm > 0 else (0.0 if rnorm == 0 else np.inf)
        return SolveReport(it, float(rel), float(rnorm), converged, time.perf_counter() - t0, rtol, atol, stage)

    restarts = 0
    while True:
        if rnorm <= target:
            true_r = b - parallel.matvec(A, x, ap)
            true_norm = parallel.norm(true_r)
            if true_norm <= target or restarts > 5:
                r, rnorm = true_r, true_norm
                break
            r, rnorm = true_r, true_norm
            restarts += 1
        z = M(r) if M is not None else r.copy()
        p = z.copy()
        rz = parallel.dot(r, z)
        while rnorm > target and it < maxiter:
            parallel.matvec(A, p, ap)
            pap = parallel.dot(p, ap)
            if pap <= 0:
                raise MatrixPropertyError(
                    f"non-positive curvature p'Ap = {pap:.3e} at iteration {it}; matrix is not SPD",
                    finish(False),
                )
            alpha = rz / pap
            parallel.axpy_pair(x, p, r, ap, alpha)
            rnorm = parallel.norm(r)
            it += 1
            if rnorm <= target:
                break
            z = M(r, z) if M is not None else r.copy()
            rz_new = parallel.dot(r, z)
            parallel.xpby(z, rz_new / rz, p)
            rz = rz_new
        if it >= maxiter and rnorm > target:
            rnorm = parallel.norm(b - parallel.matvec(A, x, ap))
            report = finish(rnorm <= target)
            if not report.converged and raise_on_failure:
                raise NonConvergenceError(
                    f"CG did not converge in {maxiter} iterations (rel. residual {report.rel_residual:.3e})",
                    report,
                )
            return x, report
    return x, finish(rnorm <= target)


def mass_solve(M, r, rtol=MASS_RTOL, atol=MASS_ATOL, precond="jacobi", x0=None, stage="mass"):
    """CG solve with a mass matrix; returns (x, report)."""
    return cg_solve(M, r, precond=precond, rtol=rtol, atol=atol, x0=x0, stage=stage)
