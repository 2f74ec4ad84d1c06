"""Surface and vertically extruded volume meshes.

The free surface is a line of high-order 1-D elements. The fluid domain is
built by stacking `nz` layers of quadrilaterals under every surface element,
so each surface node owns one vertical column of volume nodes. Volume DoFs
are numbered column by column (bottom to top), which makes the
surface-to-volume map a strided index array.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import gll_nodes

__all__ = [
    "MeshError",
    "DegenerateDomainError",
    "SurfaceMesh",
    "VolumeMesh",
    "build_surface_mesh",
    "extrude",
    "update_mesh",
    "extract_surface",
    "lift_surface",
    "layer_fractions",
    "piecewise_linear_depth",
]


class MeshError(ValueError):
    pass


class DegenerateDomainError(MeshError):
    """A fluid column has collapsed (eta + h <= 0)."""


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    p: int
    periodic: bool
    connectivity: np.ndarray  # (n_elements, p+1) global DoF ids
    coords: np.ndarray  # (ndof,) node x-coordinates
    element_nodes: np.ndarray  # (n_elements, p+1) x-coordinates incl. the periodic image
    multiplicity: np.ndarray = field(repr=False)

    @property
    def n_elements(self):
        return len(self.vertices) - 1

    @property
    def ndof(self):
        return len(self.coords)

    @property
    def length(self):
        return float(self.vertices[-1] - self.vertices[0])

    @property
    def element_lengths(self):
        return np.diff(self.vertices)

    @property
    def h_max(self):
        return float(np.max(self.element_lengths))

    @property
    def dx_min(self):
        """Smallest gap between neighbouring nodes."""
        return float(np.min(np.diff(self.element_nodes, axis=1)))

    def summary(self):
        return {
            "n_elements": self.n_elements,
            "order": self.p,
            "periodic": self.periodic,
            "ndof": self.ndof,
            "length": self.length,
            "h_max": self.h_max,
            "dx_min": self.dx_min,
        }


def build_surface_mesh(length, n_elements, p, periodic=False, x0=0.0, vertices=None):
    """Uniform 1-D mesh of `n_elements` GLL elements of order `p` on [x0, x0+length].

    Passing `vertices` overrides the uniform spacing. A periodic mesh
    identifies its last node with the first, giving n_elements*p DoFs.
    """
    if vertices is None:
        if not length > 0:
            raise MeshError(f"domain length must be positive, got {length}")
        if int(n_elements) != n_elements or n_elements < 1:
            raise MeshError(f"element count must be a positive integer, got {n_elements}")
        vertices = x0 + length * np.arange(n_elements + 1) / n_elements
    vertices = np.asarray(vertices, dtype=float)
    if np.any(np.diff(vertices) <= 0):
        raise MeshError("element lengths must be positive")
    if p < 1:
        raise MeshError(f"polynomial order must be >= 1, got {p}")
    n_el = len(vertices) - 1
    r, _ = gll_nodes(p)
    left, right = vertices[:-1, None], vertices[1:, None]
    element_nodes = left + 0.5 * (r[None, :] + 1.0) * (right - left)
    conn = np.arange(n_el)[:, None] * p + np.arange(p + 1)[None, :]
    ndof = n_el * p + 1
    if periodic:
        ndof -= 1
        conn[-1, -1] = 0
    coords = np.empty(ndof)
    coords[conn[:, :-1].ravel()] = element_nodes[:, :-1].ravel()
    if not periodic:
        coords[-1] = vertices[-1]
    mult = np.bincount(conn.ravel(), minlength=ndof).astype(float)
    return SurfaceMesh(vertices, int(p), bool(periodic), conn, coords, element_nodes, mult)


def layer_fractions(nz, p, clustering=0.0):
    """Vertical node fractions sigma in [0, 1], bottom to top, for one column.

    `clustering` in [0, 1) blends uniform layer interfaces with a cosine
    distribution that refines toward the surface.
    """
    if nz < 1:
        raise MeshError(f"layer count must be >= 1, got {nz}")
    s = np.arange(nz + 1) / nz
    if clustering:
        s = (1.0 - clustering) * s + clustering * np.sin(0.5 * np.pi * s)
    r, _ = gll_nodes(p)
    lo, hi = s[:-1, None], s[1:, None]
    levels = (lo + 0.5 * (r[None, :] + 1.0) * (hi - lo))[:, :-1].ravel()
    return np.append(levels, 1.0)


@dataclass
class VolumeMesh:
    """Quadrilateral mesh of the fluid domain.

    `x`, `z` hold coordinates of every volume DoF; `z` is rewritten in
    place by :func:`update_mesh`. DoF (column i, level j) has index
    ``i * n_levels + j``.
    """

    surface: SurfaceMesh
    nz: int
    sigma: np.ndarray  # (n_levels,)
    depth: np.ndarray  # (surface.ndof,)
    x: np.ndarray
    z: np.ndarray
    connectivity: np.ndarray  # (n_elements, (p+1)^2), x index fastest
    surface_map: np.ndarray  # (surface.ndof,)
    bottom_map: np.ndarray

    @property
    def p(self):
        return self.surface.p

    @property
    def n_levels(self):
        return len(self.sigma)

    @property
    def ndof(self):
        return len(self.x)

    @property
    def n_elements(self):
        return len(self.connectivity)

    def element_coordinates(self, periodic_image=True):
        """Per-element nodal (x, z) arrays of shape (n_elements, (p+1)^2).

        For periodic meshes the last element column's right edge is shifted
        by the domain length so element geometry stays positively oriented.
        """
        xe = self.x[self.connectivity]
        if periodic_image and self.surface.periodic:
            xe = self._unwrapped_x
        return xe, self.z[self.connectivity]

    @property
    def _unwrapped_x(self):
        p = self.p
        n = p + 1
        sx = self.surface.element_nodes  # already unwrapped
        nz = self.nz
        xe = np.repeat(sx[:, None, None, :], nz, axis=1)
        xe = np.broadcast_to(xe, (sx.shape[0], nz, n, n))
        return xe.reshape(-1, n * n)

    def summary(self):
        info = self.surface.summary()
        info.update(
            {
                "n_layers": self.nz,
                "n_levels": self.n_levels,
                "volume_ndof": self.ndof,
                "volume_elements": self.n_elements,
                "min_depth": float(self.depth.min()),
                "max_depth": float(self.depth.max()),
            }
        )
        return info

    def report(self):
        """Plain-text mesh summary."""
        return "\n".join(f"{k:16s} {v}" for k, v in self.summary().items()) + "\n"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dof_id", "x", "z"])
            for i, (x, z) in enumerate(zip(self.x, self.z)):
                w.writerow([i, repr(float(x)), repr(float(z))])


def _depth_values(bathymetry, x):
    if callable(bathymetry):
        h = np.asarray(bathymetry(x), dtype=float)
        return np.broadcast_to(h, x.shape).copy()
    return np.full(x.shape, float(bathymetry))


def extrude(surface: SurfaceMesh, nz, bathymetry: float | Callable = 1.0, clustering=0.0):
    """Extrude `surface` into `nz` layers down to z = -h(x).

    The returned mesh has a flat top at z = 0; call :func:`update_mesh` to
    follow a surface elevation.
    """
    depth = _depth_values(bathymetry, surface.coords)
    if np.any(~np.isfinite(depth)) or np.any(depth <= 0):
        raise MeshError("water depth must be positive at every surface node")
    p = surface.p
    sigma = layer_fractions(nz, p, clustering)
    nlev = len(sigma)
    ncol = surface.ndof
    x = np.repeat(surface.coords, nlev)
    z = (sigma[None, :] * depth[:, None] - depth[:, None]).ravel()
    # element (e, l): columns conn[e, a], levels l*p + b
    n = p + 1
    cols = surface.connectivity  # (ne, n)
    lev = np.arange(nz)[:, None] * p + np.arange(n)[None, :]  # (nz, n)
    conn = cols[:, None, None, :] * nlev + lev[None, :, :, None]  # (ne, nz, b, a)
    conn = conn.reshape(-1, n * n)
    surface_map = np.arange(ncol) * nlev + nlev - 1
    bottom_map = np.arange(ncol) * nlev
    return VolumeMesh(surface, int(nz), sigma, depth, x, z, conn, surface_map, bottom_map)


def column_z(volume: VolumeMesh, eta):
    """Node elevations z = sigma (eta + h) - h, shape (n_columns, n_levels)."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != volume.depth.shape:
        raise MeshError("eta does not conform to the surface mesh")
    total = eta + volume.depth
    if np.any(total <= 0):
        bad = int(np.argmin(total))
        raise DegenerateDomainError(
            f"fluid column at x={volume.surface.coords[bad]:.6g} collapsed (eta + h = {total[bad]:.3g})"
        )
    return volume.sigma[None, :] * total[:, None] - volume.depth[:, None]


def update_mesh(volume: VolumeMesh, eta):
    """Move every column so its nodes span [-h(x), eta(x)]; x is untouched."""
    volume.z[:] = column_z(volume, eta).ravel()
    return volume.z


def extract_surface(field, surface_map):
    """Gather the surface values of a volume field."""
    field = np.asarray(field)
    if field.ndim != 1 or (len(surface_map) and surface_map.max() >= field.size):
        raise MeshError("volume field does not match the mesh")
    return field[surface_map]


def lift_surface(values, volume: VolumeMesh, fill=0.0):
    """Volume field equal to `values` on the surface nodes and `fill` elsewhere."""
    out = np.full(volume.ndof, fill, dtype=float)
    out[volume.surface_map] = values
    return out


def piecewise_linear_depth(points):
    """Depth function interpolating (x, h) breakpoints, constant beyond the ends."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or np.any(np.diff(pts[:, 0]) <= 0):
        raise MeshError("bathymetry breakpoints must be (x, h) pairs with increasing x")
    return lambda x: np.interp(x, pts[:, 0], pts[:, 1])
