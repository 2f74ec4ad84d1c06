"""Reference-element machinery on [-1, 1].

Nodal Lagrange bases on Gauss-Lobatto-Legendre (GLL) points, orthonormal
Legendre modes, Vandermonde and differentiation matrices, quadrature rules
and the exponential modal filter used to stabilise free-surface fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "legendre",
    "orthonormal_legendre",
    "gll_nodes",
    "gauss_nodes",
    "quadrature_rule",
    "vandermonde",
    "differentiation_matrix",
    "lagrange_basis",
    "filter_matrix",
    "ReferenceElement",
    "apply_modal_filter",
    "modal_energy",
]

DEFAULT_FILTER_STRENGTH = -np.log(np.finfo(float).eps)


def legendre(n, x):
    """Legendre polynomial P_n and its derivative at `x` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    dp_prev = np.zeros_like(x)
    if n == 0:
        return p_prev, dp_prev
    p = x.copy()
    dp = np.ones_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        dp_next = dp_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


def orthonormal_legendre(n, x):
    """psi_n = sqrt((2n+1)/2) P_n and its derivative."""
    p, dp = legendre(n, x)
    scale = np.sqrt((2 * n + 1) / 2.0)
    return scale * p, scale * dp


def gll_nodes(p):
    """Gauss-Lobatto-Legendre nodes and weights for a degree-`p` basis.

    Returns the p+1 points {-1, 1} together with the roots of P'_p, sorted
    ascending, and their quadrature weights 2 / (p (p+1) P_p(r)^2).
    """
    if int(p) != p or p < 1:
        raise ValueError(f"GLL order must be an integer >= 1, got {p}")
    p = int(p)
    # Newton on (1 - r^2) P'_p(r) starting from Chebyshev-Gauss-Lobatto points
    r = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(100):
        pn, _ = legendre(p, r)
        pm, _ = legendre(p - 1, r)
        # (1 - r^2) P'_p = p (P_{p-1} - r P_p)
        step = (r * pn - pm) / ((p + 1) * pn)
        r = r - step
        if np.max(np.abs(step)) < 1e-16:
            break
    r[0], r[-1] = -1.0, 1.0
    pn, _ = legendre(p, r)
    w = 2.0 / (p * (p + 1) * pn**2)
    return r, w


def gauss_nodes(q):
    """Gauss-Legendre rule with q+1 points (exact to degree 2q+1)."""
    if q < 0:
        raise ValueError("Gauss order must be >= 0")
    return np.polynomial.legendre.leggauss(int(q) + 1)


def quadrature_rule(q, kind="gauss"):
    """Points and weights of order `q`.

    ``kind="gauss"`` uses q+1 Gauss points (exactness 2q+1); ``kind="gll"``
    uses q+1 Lobatto points (exactness 2q-1).
    """
    if q < 1:
        raise ValueError(f"quadrature order must be >= 1, got {q}")
    kind = kind.lower()
    if kind == "gauss":
        return gauss_nodes(q)
    if kind == "gll":
        return gll_nodes(q)
    raise ValueError(f"unknown quadrature kind {kind!r}")


def gauss_points_for_degree(degree):
    """Smallest Gauss rule (as an order q) integrating `degree` exactly."""
    return max(int(np.ceil((degree - 1) / 2.0)), 0)


def vandermonde(p, nodes):
    """Return (V, V^-1) with V_ij = psi_j(r_i) for orthonormal Legendre psi_j."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape != (p + 1,):
        raise ValueError(f"expected {p + 1} nodes, got shape {nodes.shape}")
    if np.min(np.abs(np.subtract.outer(nodes, nodes)) + np.eye(p + 1)) < 1e-14:
        raise np.linalg.LinAlgError("repeated nodes: Vandermonde matrix is singular")
    V = np.column_stack([orthonormal_legendre(j, nodes)[0] for j in range(p + 1)])
    return V, np.linalg.inv(V)


def vandermonde_grad(p, nodes):
    nodes = np.asarray(nodes, dtype=float)
    return np.column_stack([orthonormal_legendre(j, nodes)[1] for j in range(p + 1)])


def differentiation_matrix(p, nodes):
    V, Vinv = vandermonde(p, nodes)
    return vandermonde_grad(p, nodes) @ Vinv


def lagrange_basis(nodes, x):
    """Values and derivatives of the Lagrange polynomials on `nodes` at `x`.

    Returns arrays of shape (len(x), len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    p = len(nodes) - 1
    _, Vinv = vandermonde(p, nodes)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (
        np.column_stack([orthonormal_legendre(j, x)[0] for j in range(p + 1)]) @ Vinv,
        vandermonde_grad(p, x) @ Vinv,
    )


def filter_matrix(p, cutoff=None, strength=DEFAULT_FILTER_STRENGTH, order=2):
    """Diagonal exponential modal filter.

    sigma(j) = 1 for j <= cutoff and exp(-strength ((j - cutoff)/(p - cutoff))^order)
    above it. The default cutoff p-1 touches only the highest mode.
    """
    if cutoff is None:
        cutoff = p - 1
    if not 0 <= cutoff <= p:
        raise ValueError(f"filter cutoff must lie in [0, {p}], got {cutoff}")
    if strength <= 0:
        raise ValueError("filter strength must be positive")
    if order < 2 or order % 2:
        raise ValueError("filter order must be an even integer >= 2")
    j = np.arange(p + 1)
    sigma = np.ones(p + 1)
    if cutoff < p:
        hi = j > cutoff
        sigma[hi] = np.exp(-strength * ((j[hi] - cutoff) / (p - cutoff)) ** order)
    return np.diag(sigma)


@dataclass(frozen=True)
class ReferenceElement:
    """One-dimensional reference element of order `p`.

    The two-dimensional quadrilateral element is the tensor product of this
    one with itself; only 1-D tables are stored.
    """

    p: int
    filter_cutoff: int | None = None
    filter_strength: float = DEFAULT_FILTER_STRENGTH
    filter_order: int = 2
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    V: np.ndarray = field(init=False, repr=False)
    Vinv: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)
    F: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r, w = gll_nodes(self.p)
        V, Vinv = vandermonde(self.p, r)
        F = filter_matrix(self.p, self.filter_cutoff, self.filter_strength, self.filter_order)
        set_ = object.__setattr__
        set_(self, "nodes", r)
        set_(self, "weights", w)
        set_(self, "V", V)
        set_(self, "Vinv", Vinv)
        set_(self, "D", vandermonde_grad(self.p, r) @ Vinv)
        set_(self, "F", F)
        set_(self, "_filter_op", V @ F @ Vinv)

    @property
    def filter_operator(self):
        """Nodal filter V F V^-1."""
        return self._filter_op

    def tabulate(self, points):
        """Basis values and derivatives at reference points, shape (npts, p+1)."""
        return lagrange_basis(self.nodes, points)

    def quadrature(self, q=None, kind="gauss"):
        """Rule of order `q` (default p, exact for the mass matrix)."""
        return quadrature_rule(self.p if q is None else q, kind)


def modal_energy(local_values, element):
    """Per-element sum of squared modal coefficients, shape (n_elements,)."""
    modes = np.asarray(local_values) @ element.Vinv.T
    return np.sum(modes**2, axis=-1)


def apply_modal_filter(values, mesh, element, operator=None):
    """Filter a C0 surface field element by element.

    Each element's nodal values are mapped to Legendre modes, damped by the
    filter matrix and mapped back. Nodes shared by two elements receive the
    mean of both element results so the output stays continuous.

    Parameters
    ----------
    values : ndarray, shape (mesh.ndof,)
    mesh : SurfaceMesh
    element : ReferenceElement
        Must have the same order as the mesh.
    operator : ndarray, optional
        Nodal filter to use instead of ``element.filter_operator``.
    """
    if element.p != mesh.p:
        raise ValueError("element order does not match mesh order")
    op = element.filter_operator if operator is None else operator
    conn = mesh.connectivity
    local = np.asarray(values)[conn] @ op.T
    out = np.bincount(conn.ravel(), weights=local.ravel(), minlength=mesh.ndof)
    return out / mesh.multiplicity
