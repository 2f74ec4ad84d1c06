"""Verification and benchmark studies built on the solver.

* static convergence of the recovered surface velocity for steady waves,
* a manufactured Laplace problem with a separable harmonic solution,
* the submerged-bar flume configuration,
* a relaxation-zone reflection test,
* the per-routine timing benchmark used for thread-scaling sweeps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import ConvergenceRecord, convergence_rate, harmonic_fit, reflection_coefficient, transient_window
from .assembly import FNPF, LPF, VolumeAssembler, gradient_recovery
from .basis import ReferenceElement
from .config import RunConfig, parse_config
from .dynamics import LAPLACE_SOLVE, WaveModel
from .mesh import build_surface_mesh, extrude, update_mesh
from .solver import cg_solve
from .wavetheory import WaveSpec, stream_function_solve, surface_fields

__all__ = [
    "STUDY_RTOL",
    "observed_order",
    "static_error",
    "h_study",
    "p_study",
    "manufactured_laplace",
    "manufactured_study",
    "bar_config",
    "reflection_config",
    "reflection_study",
    "bar_harmonics",
    "laplace_benchmark",
]

# Algebraic tolerance for static convergence studies: well below the
# discretisation error of the finest meshes studied.
STUDY_RTOL = 1e-12


def observed_order(h, errors):
    """Least-squares slope of log(error) against log(h)."""
    h = np.log(np.asarray(h, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


@dataclass
class StaticResult:
    error: float
    h_max: float
    p: int
    nx: int
    nz: int
    ndof: int
    reports: list


def static_error(wave, p, nx, nz, length=1.0, mode=FNPF, rtol=STUDY_RTOL, preconditioner="lu"):
    """inf-norm error of w_eta for a steady wave sampled at t = 0.

    The mesh is moved to the wave surface (FNPF) or kept flat (LPF), the
    Laplace problem is solved with the wave's surface potential and the
    recovered w_eta is compared with the exact surface velocity.
    """
    surface = build_surface_mesh(length, nx, p, periodic=True)
    volume = extrude(surface, nz, wave.h)
    model = WaveModel(surface, volume, ReferenceElement(p), mode, preconditioner=preconditioner,
                      laplace_rtol=rtol, keep_reports=True)
    eta, phi_eta, w_true = surface_fields(wave, surface.coords, 0.0, linear=mode == LPF)
    w_eta = model.w_eta(eta, phi_eta)
    return StaticResult(float(np.max(np.abs(w_eta - w_true))), float(surface.h_max), p, nx, nz,
                        volume.ndof, model.reports)


def _steady_wave(kh, rel, length=1.0, n_modes=None):
    return stream_function_solve(WaveSpec.from_kh(kh, L=length, rel_steepness=rel), n_modes=n_modes)


def h_study(kh, rel, p, nx0=4, nz0=None, refinements=3, length=1.0, wave=None, rtol=STUDY_RTOL):
    """Error of w_eta under uniform refinement of both directions."""
    wave = wave or _steady_wave(kh, rel, length)
    if nz0 is None:
        nz0 = max(1, round(nx0 * wave.h / length))
    rec = ConvergenceRecord(kind="h", label=f"kh={kh:g} rel={rel:g} p={p}")
    reports = []
    for r in range(refinements + 1):
        res = static_error(wave, p, nx0 * 2**r, nz0 * 2**r, length, rtol=rtol)
        rec.add(res.h_max, res.error)
        reports += res.reports
    rec.reports = reports
    return rec


def p_study(kh, rel, orders=(2, 3, 4, 5, 6), nx=8, nz=None, length=1.0, wave=None, rtol=STUDY_RTOL):
    """Error of w_eta for increasing element order on a fixed mesh."""
    wave = wave or _steady_wave(kh, rel, length)
    if nz is None:
        nz = max(1, round(nx * wave.h / length))
    rec = ConvergenceRecord(kind="p", label=f"kh={kh:g} rel={rel:g} h={length / nx:g}")
    reports = []
    for p in orders:
        res = static_error(wave, p, nx, nz, length, rtol=rtol)
        rec.add(p, res.error)
        reports += res.reports
    rec.reports = reports
    return rec


def manufactured_laplace(p, nx, nz=None, kh=1.0, length=1.0, rtol=STUDY_RTOL):
    """Flat periodic box with phi = cos(kx) on z = 0.

    The exact solution is cos(kx) cosh(k(z+h))/cosh(kh) with surface
    velocity k tanh(kh) cos(kx). Returns (phi_error, w_eta_error, h_max, reports).
    """
    k = 2 * np.pi / length
    h = kh / k
    nz = nz if nz is not None else max(1, nx // 4)
    surface = build_surface_mesh(length, nx, p, periodic=True)
    volume = extrude(surface, nz, h)
    element = ReferenceElement(p)
    asm = VolumeAssembler(volume, element)
    ops = asm.assemble()
    x = surface.coords
    system = asm.dirichlet(ops["stiffness"], np.cos(k * x))
    sol, rep = cg_solve(system.A, system.b, precond="lu", rtol=rtol, stage=LAPLACE_SOLVE)
    phi = system.expand(sol)
    w, rep2 = gradient_recovery(phi, volume, element, operators=ops, rtol=rtol)
    exact = np.cos(k * volume.x) * np.cosh(k * (volume.z + h)) / np.cosh(k * h)
    w_exact = k * np.tanh(k * h) * np.cos(k * x)
    reports = [r for r in (rep, rep2) if r is not None]
    return (float(np.max(np.abs(phi - exact))), float(np.max(np.abs(w[volume.surface_map] - w_exact))),
            float(surface.h_max), reports)


def manufactured_study(p, nx0=4, refinements=3, kh=1.0):
    phi_rec = ConvergenceRecord(kind="h", label=f"phi p={p}")
    w_rec = ConvergenceRecord(kind="h", label=f"w_eta p={p}")
    for r in range(refinements + 1):
        nx = nx0 * 2**r
        ep, ew, hmax, _ = manufactured_laplace(p, nx, max(1, nx // 4), kh)
        phi_rec.add(hmax, ep)
        w_rec.add(hmax, ew)
    return phi_rec, w_rec


# -- flume configurations -------------------------------------------------------

BAR_PROBES = (4.0, 10.5, 12.5, 13.5, 14.5, 15.7, 17.3, 19.0, 21.0, 22.5, 25.0, 27.0, 29.0, 31.0, 33.0, 35.0)


def bar_config(periods=25.0, order=4, dx=0.1, n_layers=4, out=None):
    """Submerged-bar flume: generation 0-8 m, bar, absorption 30-38 m."""
    length = 38.0
    n = int(math.ceil(length / (dx * order)))
    probes = ", ".join(f"{x:g}" for x in BAR_PROBES)
    text = f"""
[domain]
length = 38.0
bathymetry = bar
periodic = false

[discretization]
n_elements = {n}
n_layers = {n_layers}
order = {order}

[wave]
mode = FNPF
theory = stream
initial = rest
period = 2.018
height = 0.02

[zones]
generation = 0.0, 8.0
absorption = 30.0, 38.0

[time]
periods = {periods}

[probes]
x = {probes}
every = 2

[output]
snapshot_every = 0
"""
    cfg = parse_config(text)
    if out is not None:
        cfg.output.directory = str(out)
    return cfg


def bar_harmonics(result, start_periods=15.0, n_max=4):
    """Harmonic amplitudes A_1..A_n at every probe over the steady window.

    Returns (x, A) with A of shape (n_probes, n_max).
    """
    T = result.wave.T
    xs, amps = [], []
    for pr in result.probes:
        a = pr.arrays()
        mask = transient_window(a["t"], T, start_periods)
        fit = harmonic_fit(a["t"][mask], a["eta"][mask], T, n_max)
        xs.append(pr.x)
        amps.append(fit.amplitudes)
    return np.asarray(xs), np.asarray(amps)


def reflection_config(periods=20.0, order=4, elements_per_wavelength=8, absorber_wavelengths=2.0,
                      kh=1.0, depth=0.5, rel=0.1, mode="LPF"):
    """Flat flume with a one-wavelength generation zone and a 2L absorber."""
    L = 2 * np.pi * depth / kh
    gen = L
    target = 3.0 * L
    absorb = absorber_wavelengths * L
    length = gen + target + absorb
    n = int(round(elements_per_wavelength * length / L))
    x1, x2 = gen + 1.0 * L, gen + 1.3 * L
    text = f"""
[domain]
length = {length!r}
h = {depth!r}
periodic = false

[discretization]
n_elements = {n}
n_layers = 2
order = {order}

[wave]
mode = {mode}
theory = airy
initial = rest
wavelength = {L!r}
rel_steepness = {rel!r}

[zones]
generation = 0.0, {gen!r}
absorption = {gen + target!r}, {length!r}

[time]
periods = {periods}

[probes]
x = {x1!r}, {x2!r}
"""
    return parse_config(text)


def reflection_study(cfg=None, start_periods=None):
    """Reflected/incident amplitude ratio at two probes upstream of the absorber."""
    from .simulation import run

    cfg = cfg or reflection_config()
    result = run(cfg)
    T, k = result.wave.T, result.wave.k
    a, b = (pr.arrays() for pr in result.probes)
    if start_periods is None:
        # wait for the ramp and for the reflected wave to return to the probes
        start_periods = cfg.time.periods / 2
    mask = transient_window(a["t"], T, start_periods)
    ratio, inc, ref = reflection_coefficient(a["t"][mask], a["eta"][mask], b["eta"][mask],
                                             result.probes[0].x, result.probes[1].x, T, k)
    return ratio, inc, ref, result


# -- scaling benchmark ---------------------------------------------------------------


def laplace_benchmark(nx, nz, p=4, steps=2, length=None, kh=1.0, rel=0.1, preconditioner="jacobi"):
    """Time the three routines for a few RHS evaluations of a deformed FNPF domain.

    Returns a dict with routine totals and problem size; used for thread sweeps.
    """
    length = length if length is not None else float(nx) / 8.0
    L = 1.0
    wave = _steady_wave(kh, rel, L)
    surface = build_surface_mesh(length, nx, p, periodic=True)
    volume = extrude(surface, nz, wave.h)
    model = WaveModel(surface, volume, ReferenceElement(p), FNPF, preconditioner=preconditioner)
    # periodic in `length` only when it holds whole wavelengths
    eta, phi_eta, _ = surface_fields(wave, surface.coords, 0.0)
    model.evaluate(eta, phi_eta)  # warm-up (JIT, caches)
    model.timers.reset()
    t0 = time.perf_counter()
    for _ in range(steps):
        model._phi_guess = None  # cold start each time: fixed work per evaluation
        model._w_guess = None
        model.evaluate(eta, phi_eta)
    wall = time.perf_counter() - t0
    out = {name: model.timers.total[name] for name in model.timers.total}
    out.update(volume_ndof=volume.ndof, surface_ndof=surface.ndof, wall=wall, evaluations=steps)
    return out
