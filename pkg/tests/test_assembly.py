import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st

from wavesem.assembly import (
    FNPF,
    LPF,
    PeriodicityError,
    SingularSystemError,
    SurfaceAssembler,
    TangledMeshError,
    VolumeAssembler,
    apply_dirichlet,
    assemble_fs_rhs,
    assemble_laplace,
    assemble_surface_mass,
    assemble_volume_mass,
    dump_coo,
    evaluate_surface,
    gradient_recovery,
    interpolate_surface,
    is_symmetric,
)
from wavesem.basis import ReferenceElement
from wavesem.mesh import build_surface_mesh, extrude, update_mesh


def box(nx=2, nz=2, p=2, length=1.0, depth=1.0, periodic=False):
    s = build_surface_mesh(length, nx, p, periodic=periodic)
    return s, extrude(s, nz, depth), ReferenceElement(p)


def test_unit_square_bilinear_stiffness():
    s, v, el = box(1, 1, 1)
    K = assemble_laplace(v, el).toarray()
    # DoFs: column-major (x0,z-1),(x0,z0),(x1,z-1),(x1,z0)
    diag = np.diag(K)
    np.testing.assert_allclose(diag, 2 / 3)
    assert K[0, 1] == pytest.approx(-1 / 6)  # vertical neighbour
    assert K[0, 2] == pytest.approx(-1 / 6)  # horizontal neighbour
    assert K[0, 3] == pytest.approx(-1 / 3)  # opposite corner


@pytest.mark.parametrize("p", [1, 2, 4])
def test_stiffness_symmetric_psd_with_constant_nullspace(p):
    s, v, el = box(3, 2, p)
    update_mesh(v, 0.05 * np.sin(3 * s.coords))
    K = assemble_laplace(v, el)
    assert is_symmetric(K, 1e-12)
    np.testing.assert_allclose(K @ np.ones(v.ndof), 0.0, atol=1e-12)
    ev = np.linalg.eigvalsh(K.toarray())
    assert ev.min() > -1e-10


def test_stiffness_energy_of_linear_field():
    # integral |grad(a x + b z)|^2 = (a^2 + b^2) area
    s, v, el = box(3, 2, 3, length=2.0, depth=0.5)
    K = assemble_laplace(v, el)
    u = 0.3 * v.x - 1.2 * v.z
    assert u @ (K @ u) == pytest.approx((0.09 + 1.44) * 1.0, rel=1e-12)


@given(st.integers(1, 5), st.floats(0.1, 2.0))
def test_mass_integrates_area(p, depth):
    s, v, el = box(2, 2, p, length=1.5, depth=depth)
    M = assemble_volume_mass(v, el)
    assert np.ones(v.ndof) @ (M @ np.ones(v.ndof)) == pytest.approx(1.5 * depth, rel=1e-12)


def test_area_of_deformed_domain():
    s, v, el = box(8, 2, 4, periodic=True)
    eta = 0.1 * np.cos(2 * np.pi * s.coords)
    update_mesh(v, eta)
    M = assemble_volume_mass(v, el)
    # mean of cos is zero: area unchanged
    assert np.ones(v.ndof) @ (M @ np.ones(v.ndof)) == pytest.approx(1.0, rel=1e-12)


def test_tangled_mesh_detected():
    s, v, el = box(2, 1, 2)
    v.z[v.surface_map[1]] = -2.0  # push a top node below the bottom
    with pytest.raises(TangledMeshError):
        assemble_laplace(v, el)


def test_fast_dirichlet_matches_generic():
    s, v, el = box(4, 2, 3)
    update_mesh(v, 0.05 * np.cos(s.coords))
    asm = VolumeAssembler(v, el)
    K = asm.assemble(("stiffness",))["stiffness"]
    phi = np.sin(s.coords)
    a = asm.dirichlet(K, phi)
    b = apply_dirichlet(K, None, v.surface_map, phi)
    np.testing.assert_array_equal(a.free, b.free)
    assert abs(a.A - b.A).max() < 1e-14
    np.testing.assert_allclose(a.b, b.b, atol=1e-13)


def test_dirichlet_errors():
    s, v, el = box(2, 1, 2, periodic=True)
    K = assemble_laplace(v, el)
    with pytest.raises(SingularSystemError):
        apply_dirichlet(K, None, np.array([], dtype=int), np.array([]))
    with pytest.raises(PeriodicityError):
        apply_dirichlet(K, None, v.surface_map, lambda x: x, surface=s)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_linear_harmonic_reproduced(p):
    """phi = x + 2z is harmonic and in the discrete space: recovered exactly."""
    s, v, el = box(3, 2, p, length=1.0, depth=0.7)
    update_mesh(v, 0.03 * s.coords)
    asm = VolumeAssembler(v, el)
    ops = asm.assemble()
    # Neumann data of x+2z is not zero, so impose Dirichlet on all boundaries
    boundary = np.unique(np.concatenate([v.surface_map, v.bottom_map, np.arange(v.n_levels),
                                         v.ndof - v.n_levels + np.arange(v.n_levels)]))
    exact = v.x + 2 * v.z
    sys_ = apply_dirichlet(ops["stiffness"], None, boundary, exact[boundary])
    phi = sys_.expand(spla.spsolve(sys_.A.tocsc(), sys_.b))
    np.testing.assert_allclose(phi, exact, atol=1e-11)
    w, rep = gradient_recovery(phi, v, el, operators=ops, rtol=1e-13)
    np.testing.assert_allclose(w, 2.0, atol=1e-9)


def test_gradient_recovery_lumped_exact_for_linear():
    s, v, el = box(3, 2, 1)
    w, rep = gradient_recovery(3.0 * v.z, v, el, lumped=True)
    assert rep is None
    np.testing.assert_allclose(w, 3.0, atol=1e-12)


def test_surface_mass_and_rhs():
    s = build_surface_mesh(1.0, 4, 3, periodic=True)
    el = ReferenceElement(3)
    M = assemble_surface_mass(s, el)
    assert np.ones(s.ndof) @ (M @ np.ones(s.ndof)) == pytest.approx(1.0)
    x = s.coords
    eta = 0.01 * np.cos(2 * np.pi * x)
    w = 0.02 * np.sin(2 * np.pi * x)
    rk, rd = assemble_fs_rhs(eta, np.zeros_like(x), w, s, el, LPF, g=10.0)
    np.testing.assert_allclose(rk, M @ w, atol=1e-15)
    np.testing.assert_allclose(rd, -10.0 * (M @ eta), atol=1e-15)
    # FNPF with flat, still surface and only w: r_k = M w, r_d = 1/2 M w^2
    rk, rd = assemble_fs_rhs(np.zeros_like(x), np.zeros_like(x), w, s, el, FNPF)
    np.testing.assert_allclose(rk, M @ w, atol=1e-15)


def test_fnpf_rhs_integrand_against_dense_quadrature():
    """Oracle: integrate the FNPF integrands with a 40-point rule per element."""
    s = build_surface_mesh(1.0, 3, 3, periodic=True)
    el = ReferenceElement(3)
    x = s.coords
    eta = 0.05 * np.cos(2 * np.pi * x)
    phi = 0.1 * np.sin(2 * np.pi * x) + 0.02 * np.cos(4 * np.pi * x)
    w = 0.3 * np.sin(2 * np.pi * x)
    # the richest integrand, w eta_x^2 v, has degree 4p - 2
    rk, rd = SurfaceAssembler(s, el, fs_degree=4 * 3, g=9.82).rhs(eta, phi, w, FNPF)
    rk3, rd3 = SurfaceAssembler(s, el, g=9.82).rhs(eta, phi, w, FNPF)
    rq, wq = np.polynomial.legendre.leggauss(40)
    L, dL = el.tabulate(rq)
    rk_o = np.zeros(s.ndof)
    rd_o = np.zeros(s.ndof)
    for e, c in enumerate(s.connectivity):
        J = 0.5 * s.element_lengths[e]
        et, ex = L @ eta[c], dL @ eta[c] / J
        px, wv = dL @ phi[c] / J, L @ w[c]
        fk = -ex * px + wv * (1 + ex**2)
        fd = -9.82 * et - 0.5 * px**2 + 0.5 * wv**2 * (1 + ex**2)
        np.add.at(rk_o, c, L.T @ (wq * J * fk))
        np.add.at(rd_o, c, L.T @ (wq * J * fd))
    np.testing.assert_allclose(rk, rk_o, atol=1e-14)
    np.testing.assert_allclose(rd, rd_o, atol=1e-14)
    # default 3p rule: small aliasing only in the cubic terms
    assert 0 < np.abs(rk3 - rk_o).max() < 1e-3 * np.abs(rk_o).max()


def test_evaluate_surface_interpolates_polynomials():
    s = build_surface_mesh(2.0, 3, 4)
    vals = s.coords**3
    x = np.linspace(0, 2, 31)
    np.testing.assert_allclose(evaluate_surface(s, vals, x), x**3, atol=1e-12)


def test_interpolate_surface_periodic_ok():
    s = build_surface_mesh(1.0, 4, 2, periodic=True)
    v = interpolate_surface(s, lambda x: np.cos(2 * np.pi * x))
    np.testing.assert_allclose(v, np.cos(2 * np.pi * s.coords))


def test_dump_coo(tmp_path):
    s, v, el = box(1, 1, 1)
    dump_coo(assemble_laplace(v, el), tmp_path / "k.txt")
    lines = (tmp_path / "k.txt").read_text().splitlines()
    assert lines[0] == "# 4 4 16"


_HASH_SCRIPT = """
import hashlib, json, numpy as np
from wavesem import parallel
from wavesem.mesh import build_surface_mesh, extrude, update_mesh
from wavesem.basis import ReferenceElement
from wavesem.assembly import VolumeAssembler
from wavesem.solver import cg_solve
parallel.set_threads({threads})
s = build_surface_mesh(1.0, 40, 4, periodic=True)
v = extrude(s, 3, 0.3)
update_mesh(v, 0.02 * np.sin(2 * np.pi * s.coords))
asm = VolumeAssembler(v, ReferenceElement(4), chunk=16)
ops = asm.assemble()
sysm = asm.dirichlet(ops["stiffness"], np.cos(2 * np.pi * s.coords))
x, rep = cg_solve(sysm.A, sysm.b, precond="jacobi")
h = {{k: hashlib.sha256(m.data.tobytes() + m.indices.tobytes()).hexdigest() for k, m in ops.items()}}
h["solution"] = hashlib.sha256(x.tobytes()).hexdigest()
h["threads"] = parallel.get_threads()
print(json.dumps(h))
"""


def _hashes(threads):
    env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
    out = subprocess.run([sys.executable, "-c", _HASH_SCRIPT.format(threads=threads)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_operators_and_cg_bitwise_identical_across_thread_counts():
    one, four = _hashes(1), _hashes(4)
    assert one["threads"] == 1 and four["threads"] == 4
    for key in ("stiffness", "mass", "dz", "solution"):
        assert one[key] == four[key]
