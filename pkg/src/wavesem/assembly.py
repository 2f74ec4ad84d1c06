"""Weak-form assembly on the extruded quadrilateral mesh and the free surface.

Volume operators (stiffness, mass and the vertical-derivative coupling used
by gradient recovery) share one CSR sparsity pattern computed once per mesh
topology. Element matrices are evaluated in batches and scattered with
``np.bincount`` in a fixed order, so the assembled values do not depend on
how the element loop is split over threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import parallel
from .basis import ReferenceElement, gauss_points_for_degree, gll_nodes, lagrange_basis, quadrature_rule
from .mesh import MeshError, SurfaceMesh, VolumeMesh
from .solver import LAPLACE_ATOL, LAPLACE_RTOL, cg_solve

__all__ = [
    "TangledMeshError",
    "SingularSystemError",
    "PeriodicityError",
    "VolumeAssembler",
    "SurfaceAssembler",
    "DirichletSystem",
    "assemble_laplace",
    "assemble_volume_mass",
    "apply_dirichlet",
    "gradient_recovery",
    "assemble_surface_mass",
    "assemble_fs_rhs",
    "interpolate_surface",
    "evaluate_surface",
    "is_symmetric",
    "dump_coo",
]

LPF = "LPF"
FNPF = "FNPF"


class TangledMeshError(MeshError):
    pass


class SingularSystemError(ValueError):
    pass


class PeriodicityError(ValueError):
    pass


def _check_mode(mode):
    mode = mode.upper()
    if mode not in (LPF, FNPF):
        raise ValueError(f"mode must be LPF or FNPF, got {mode!r}")
    return mode


@dataclass
class _Pattern:
    indptr: np.ndarray
    indices: np.ndarray
    rows: np.ndarray
    scatter: np.ndarray  # element-matrix entry -> nnz slot
    shape: tuple

    @classmethod
    def from_connectivity(cls, conn, ndof):
        n = conn.shape[1]
        rows = np.repeat(conn, n, axis=1).ravel().astype(np.int64)
        cols = np.tile(conn, (1, n)).ravel().astype(np.int64)
        keys = rows * ndof + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        r = uniq // ndof
        c = uniq % ndof
        indptr = np.zeros(ndof + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=ndof), out=indptr[1:])
        return cls(indptr, c.astype(np.int32), r.astype(np.int32), inverse.ravel(), (ndof, ndof))

    @property
    def nnz(self):
        return len(self.indices)

    def matrix(self, local):
        data = np.bincount(self.scatter, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


class DirichletSystem:
    """Reduced SPD system on the free DoFs after symmetric elimination.

    ``A`` and ``b`` act on the unknowns ``free``; :meth:`expand` returns the
    full-length solution with the prescribed values reinserted.
    """

    def __init__(self, A, b, free, fixed, fixed_values, ndof):
        self.A = A
        self.b = b
        self.free = free
        self.fixed = fixed
        self.fixed_values = fixed_values
        self.ndof = ndof

    def expand(self, x_free):
        x = np.empty(self.ndof)
        x[self.free] = x_free
        x[self.fixed] = self.fixed_values
        return x

    def solve(self, **kwargs):
        x, report = cg_solve(self.A, self.b, **kwargs)
        return self.expand(x), report


class VolumeAssembler:
    """Assembles volume operators for the current coordinates of `volume`.

    Parameters
    ----------
    volume : VolumeMesh
    element : ReferenceElement
    quad_order : int, optional
        Gauss order per direction (q+1 points). Defaults to p+1, one more
        than needed for exact integration on undeformed elements.
    """

    def __init__(self, volume: VolumeMesh, element: ReferenceElement, quad_order=None, chunk=1024):
        if element.p != volume.p:
            raise ValueError("element order does not match mesh order")
        self.volume = volume
        self.element = element
        self.chunk = chunk
        q = volume.p + 1 if quad_order is None else quad_order
        r, w = quadrature_rule(q, "gauss")
        L, dL = element.tabulate(r)
        # tensor tables: quadrature index qb*nq + qa, local index b*n + a
        self.B = np.kron(L, L)
        self.Br = np.kron(L, dL)
        self.Bs = np.kron(dL, L)
        self.W = np.kron(w, w)
        self.pattern = _Pattern.from_connectivity(volume.connectivity, volume.ndof)
        fixed = np.asarray(volume.surface_map)
        is_fixed = np.zeros(volume.ndof, bool)
        is_fixed[fixed] = True
        self._fixed = fixed
        self._free = np.flatnonzero(~is_fixed)
        renum = np.full(volume.ndof, -1, dtype=np.int64)
        renum[self._free] = np.arange(len(self._free))
        pr, pc = self.pattern.rows, self.pattern.indices
        self._ii = np.flatnonzero(~is_fixed[pr] & ~is_fixed[pc])
        self._ib = np.flatnonzero(~is_fixed[pr] & is_fixed[pc])
        self._ii_indices = renum[pc[self._ii]].astype(np.int32)
        self._ii_indptr = np.zeros(len(self._free) + 1, dtype=np.int64)
        np.cumsum(np.bincount(renum[pr[self._ii]], minlength=len(self._free)), out=self._ii_indptr[1:])
        self._ib_rows = renum[pr[self._ib]]
        self._ib_cols = pc[self._ib]

    @property
    def free(self):
        return self._free

    @property
    def fixed(self):
        return self._fixed

    def element_matrices(self, want=("stiffness", "mass", "dz")):
        """Local matrices, each of shape (n_elements, n_loc, n_loc)."""
        xe, ze = self.volume.element_coordinates()
        ne, nloc = xe.shape
        out = {k: np.empty((ne, nloc, nloc)) for k in want}
        B, Br, Bs, W = self.B, self.Br, self.Bs, self.W
        bad = []

        def kernel(lo, hi):
            x, z = xe[lo:hi], ze[lo:hi]
            xr, xs = x @ Br.T, x @ Bs.T
            zr, zs = z @ Br.T, z @ Bs.T
            det = xr * zs - xs * zr
            if np.any(det <= 0):
                bad.append(lo + int(np.argmin(det.min(axis=1))))
                return
            wdet = W * det
            inv = 1.0 / det
            gx = (zs * inv)[:, :, None] * Br - (zr * inv)[:, :, None] * Bs
            gz = (xr * inv)[:, :, None] * Bs - (xs * inv)[:, :, None] * Br
            if "stiffness" in out:
                gxw = gx * wdet[:, :, None]
                gzw = gz * wdet[:, :, None]
                out["stiffness"][lo:hi] = np.matmul(gxw.transpose(0, 2, 1), gx) + np.matmul(
                    gzw.transpose(0, 2, 1), gz
                )
            if "mass" in out or "dz" in out:
                bw = B[None, :, :] * wdet[:, :, None]
                if "mass" in out:
                    out["mass"][lo:hi] = np.matmul(bw.transpose(0, 2, 1), B)
                if "dz" in out:
                    out["dz"][lo:hi] = np.matmul(bw.transpose(0, 2, 1), gz)

        parallel.map_chunks(kernel, ne, self.chunk)
        if bad:
            e = min(bad)
            raise TangledMeshError(f"non-positive Jacobian determinant in volume element {e}")
        return out

    def assemble(self, want=("stiffness", "mass", "dz")):
        """Dict of global CSR operators for the current geometry."""
        local = self.element_matrices(want)
        return {k: self.pattern.matrix(v) for k, v in local.items()}

    def dirichlet(self, A, fixed_values):
        """Eliminate the surface-top DoFs of `A` with values `fixed_values`."""
        data = A.data
        n_free = len(self._free)
        A_ii = sp.csr_matrix((data[self._ii], self._ii_indices, self._ii_indptr), shape=(n_free, n_free))
        full = np.zeros(self.volume.ndof)
        full[self._fixed] = fixed_values
        b = -np.bincount(self._ib_rows, weights=data[self._ib] * full[self._ib_cols], minlength=n_free)
        return DirichletSystem(A_ii, b, self._free, self._fixed, np.asarray(fixed_values, float), self.volume.ndof)


def assemble_laplace(volume: VolumeMesh, element: ReferenceElement, quad_order=None):
    """Stiffness matrix of <grad phi, grad v> on the current volume geometry."""
    return VolumeAssembler(volume, element, quad_order).assemble(("stiffness",))["stiffness"]


def assemble_volume_mass(volume: VolumeMesh, element: ReferenceElement, quad_order=None):
    return VolumeAssembler(volume, element, quad_order).assemble(("mass",))["mass"]


def apply_dirichlet(A, b, surface_map, phi_eta, surface: SurfaceMesh | None = None):
    """Symmetric elimination of Dirichlet values on the DoFs `surface_map`.

    `phi_eta` is either nodal values or a callable of x; a callable is
    sampled through :func:`interpolate_surface` (which checks periodicity)
    and therefore requires `surface`.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    fixed = np.asarray(surface_map)
    if fixed.size == 0:
        raise SingularSystemError("no Dirichlet DoFs: the pure-Neumann Laplace system is singular")
    if callable(phi_eta):
        if surface is None:
            raise ValueError("a surface mesh is needed to sample a Dirichlet function")
        phi_eta = interpolate_surface(surface, phi_eta)
    values = np.asarray(phi_eta, dtype=float)
    if values.shape != fixed.shape:
        raise ValueError("Dirichlet data does not conform to the surface map")
    is_fixed = np.zeros(n, bool)
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed)
    full = np.zeros(n)
    full[fixed] = values
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    rhs = b[free] - A[free][:, fixed] @ values
    return DirichletSystem(A[free][:, free].tocsr(), rhs, free, fixed, values, n)


def gradient_recovery(phi, volume: VolumeMesh, element: ReferenceElement, lumped=False,
                      operators=None, rtol=LAPLACE_RTOL, atol=LAPLACE_ATOL, x0=None):
    """Vertical velocity w as the L2 projection of d(phi)/dz onto the C0 space.

    Returns ``(w, report)``; `report` is None for the lumped variant.
    """
    if operators is None:
        operators = VolumeAssembler(volume, element).assemble(("mass", "dz"))
    M, C = operators["mass"], operators["dz"]
    load = parallel.matvec(C, phi)
    if lumped:
        return load / np.asarray(M.sum(axis=1)).ravel(), None
    return cg_solve(M, load, precond="jacobi", rtol=rtol, atol=atol, x0=x0, stage="GradientRecovery")


class SurfaceAssembler:
    """Free-surface mass matrix and right-hand sides on a fixed 1-D mesh.

    Nonlinear terms are integrated with a Gauss rule exact to degree
    ``fs_degree`` (default 3p).
    """

    def __init__(self, surface: SurfaceMesh, element: ReferenceElement, fs_degree=None, g=9.82):
        self.surface = surface
        self.element = element
        self.g = g
        p = surface.p
        self.jac = 0.5 * surface.element_lengths  # (ne,)
        rm, wm = quadrature_rule(p, "gauss")
        Lm, _ = element.tabulate(rm)
        Me = np.einsum("q,qi,qj->ij", wm, Lm, Lm)
        self.pattern = _Pattern.from_connectivity(surface.connectivity, surface.ndof)
        self.mass = self.pattern.matrix(self.jac[:, None, None] * Me[None])
        self.lumped_mass = np.asarray(self.mass.sum(axis=1)).ravel()
        degree = 3 * p if fs_degree is None else fs_degree
        q = max(gauss_points_for_degree(degree), 1)
        self.fs_points, self.fs_weights = quadrature_rule(q, "gauss")
        self.L, self.dL = element.tabulate(self.fs_points)

    def _scatter(self, local):
        return np.bincount(self.surface.connectivity.ravel(), weights=local.ravel(), minlength=self.surface.ndof)

    def rhs(self, eta, phi_eta, w_eta, mode=FNPF):
        """Load vectors (r_k, r_d) of the kinematic and dynamic conditions."""
        mode = _check_mode(mode)
        conn = self.surface.connectivity
        L, wq = self.L, self.fs_weights
        jw = self.jac[:, None] * wq[None, :]  # (ne, nq)
        eta_q = eta[conn] @ L.T
        w_q = w_eta[conn] @ L.T
        if mode == LPF:
            fk = w_q
            fd = -self.g * eta_q
        else:
            dL = self.dL
            inv = 1.0 / self.jac[:, None]
            eta_x = (eta[conn] @ dL.T) * inv
            phi_x = (phi_eta[conn] @ dL.T) * inv
            slope = 1.0 + eta_x**2
            fk = -eta_x * phi_x + w_q * slope
            fd = -self.g * eta_q - 0.5 * phi_x**2 + 0.5 * w_q**2 * slope
        rk = self._scatter((fk * jw) @ L)
        rd = self._scatter((fd * jw) @ L)
        return rk, rd


def assemble_surface_mass(surface: SurfaceMesh, element: ReferenceElement):
    """Consistent mass matrix of the free-surface mesh."""
    return SurfaceAssembler(surface, element).mass


def assemble_fs_rhs(eta, phi_eta, w_eta, surface: SurfaceMesh, element: ReferenceElement,
                    mode=FNPF, fs_degree=None, g=9.82):
    """Weak right-hand sides of the kinematic and dynamic free-surface conditions."""
    return SurfaceAssembler(surface, element, fs_degree, g).rhs(
        np.asarray(eta, float), np.asarray(phi_eta, float), np.asarray(w_eta, float), mode
    )


def interpolate_surface(surface: SurfaceMesh, func, rtol=1e-10):
    """Nodal values of `func(x)` on `surface`.

    On periodic meshes the function must take equal values at both ends of
    the domain; otherwise :class:`PeriodicityError` is raised.
    """
    values = np.asarray(func(surface.coords), dtype=float)
    if surface.periodic:
        x0, x1 = surface.vertices[0], surface.vertices[-1]
        f0, f1 = np.asarray(func(np.array([x0, x1])), dtype=float)
        scale = max(np.max(np.abs(values)), 1e-300)
        if abs(f1 - f0) > rtol * scale:
            raise PeriodicityError(
                f"data is not periodic: f({x0:g}) = {f0:.6g} but f({x1:g}) = {f1:.6g}"
            )
    return values


def evaluate_surface(surface: SurfaceMesh, values, x):
    """Evaluate the piecewise-polynomial field at arbitrary points `x`."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = surface.vertices
    span = v[-1] - v[0]
    xx = x
    if surface.periodic:
        xx = v[0] + np.mod(x - v[0], span)
    e = np.clip(np.searchsorted(v, xx, side="right") - 1, 0, surface.n_elements - 1)
    r = 2.0 * (xx - v[e]) / (v[e + 1] - v[e]) - 1.0
    local = np.asarray(values)[surface.connectivity]
    L, _ = lagrange_basis(gll_nodes(surface.p)[0], r)
    return np.sum(L * local[e], axis=1)


def is_symmetric(A, rtol=1e-12):
    A = sp.csr_matrix(A)
    diff = abs(A - A.T)
    scale = abs(A).max()
    return bool(diff.max() <= rtol * scale) if diff.nnz else True


def dump_coo(A, path):
    """Write a sparse matrix as ``row col value`` lines."""
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v!r}\n")
