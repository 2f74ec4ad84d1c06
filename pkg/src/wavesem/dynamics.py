"""Method-of-lines time integration of the free-surface equations.

One right-hand-side evaluation runs the whole pipeline: move the mesh to
the current surface, solve the Laplace problem with the surface potential
as Dirichlet data, recover the vertical velocity, and project the
kinematic and dynamic conditions onto the surface space. Time stepping is
the classical four-stage Runge-Kutta scheme, followed by relaxation-zone
blending and modal filtering after each step.
"""

from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import FNPF, LPF, SurfaceAssembler, VolumeAssembler, _check_mode, gradient_recovery
from .basis import ReferenceElement, apply_modal_filter
from .mesh import SurfaceMesh, VolumeMesh, update_mesh
from .solver import (
    LAPLACE_ATOL,
    LAPLACE_RTOL,
    MASS_ATOL,
    MASS_RTOL,
    FactorizedPreconditioner,
    SolverError,
    cg_solve,
    mass_solve,
)
from .wavetheory import G

__all__ = [
    "LAPLACE_SOLVE",
    "EVALUATE_RHS",
    "LAPLACE_UPDATE",
    "RoutineTimers",
    "SimulationState",
    "RelaxationZone",
    "TimeControls",
    "BlowUpError",
    "StageError",
    "WaveModel",
    "compute_dt",
    "estimate_u_max",
    "erk4_step",
    "relaxation_weight",
    "ramp_factor",
    "apply_relaxation",
    "run",
]

LAPLACE_SOLVE = "LaplaceSolve"
EVALUATE_RHS = "EvaluateRHS"
LAPLACE_UPDATE = "LaplaceUpdate"
ROUTINES = (LAPLACE_SOLVE, EVALUATE_RHS, LAPLACE_UPDATE)


class StageError(SolverError):
    """A linear solve failed inside a named routine."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}", getattr(cause, "report", None))
        self.stage = stage
        self.cause = cause


class BlowUpError(RuntimeError):
    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class RoutineTimers:
    """Accumulated wall time and call counts per named routine."""

    def __init__(self):
        self.total = defaultdict(float)
        self.calls = defaultdict(int)

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.total[name] += time.perf_counter() - t0
            self.calls[name] += 1

    def shares(self):
        tot = sum(self.total[r] for r in ROUTINES)
        return {r: (self.total[r] / tot if tot else 0.0) for r in ROUTINES}

    def rows(self):
        return [
            (r, self.calls[r], self.total[r], self.total[r] / self.calls[r] if self.calls[r] else 0.0)
            for r in ROUTINES
        ]

    def reset(self):
        self.total.clear()
        self.calls.clear()


@dataclass
class SimulationState:
    t: float
    eta: np.ndarray
    phi_eta: np.ndarray
    w_eta: np.ndarray | None = None
    phi: np.ndarray | None = None
    w: np.ndarray | None = None
    step: int = 0

    def copy(self):
        c = lambda a: None if a is None else a.copy()  # noqa: E731
        return SimulationState(self.t, c(self.eta), c(self.phi_eta), c(self.w_eta), c(self.phi), c(self.w), self.step)


@dataclass
class TimeControls:
    dt: float
    end_time: float
    cfl: float = 0.95
    u_max: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")

    @property
    def n_steps(self):
        return int(np.ceil(self.end_time / self.dt - 1e-9))


def compute_dt(cfl, dx_min, u_max):
    """dt = C_CFL dx_min / u_max."""
    if not (cfl > 0 and dx_min > 0 and u_max > 0):
        raise ValueError("CFL number, dx_min and u_max must be positive")
    return cfl * dx_min / u_max


def estimate_u_max(celerity, H, T, safety=1.5):
    """Velocity scale for the CFL rule: the larger of the celerity and
    `safety` times 2 pi H / T."""
    return max(celerity, safety * 2 * np.pi * H / T)


def erk4_step(t, y, dt, rhs):
    """One classical RK4 step for a tuple of arrays.

    ``rhs(t, y) -> tuple`` with the same structure as `y`.
    """
    k1 = rhs(t, y)
    y2 = tuple(a + 0.5 * dt * b for a, b in zip(y, k1))
    k2 = rhs(t + 0.5 * dt, y2)
    y3 = tuple(a + 0.5 * dt * b for a, b in zip(y, k2))
    k3 = rhs(t + 0.5 * dt, y3)
    y4 = tuple(a + dt * b for a, b in zip(y, k3))
    k4 = rhs(t + dt, y4)
    return tuple(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


# -- relaxation zones -------------------------------------------------------


RELAXATION_SHAPES = ("classical", "steep")


def relaxation_weight(s, exponent=3.5, shape="classical"):
    """C_r as a function of normalised distance s from the target-zone edge
    (s = 0) to the outer boundary (s = 1): 0 at s=0, 1 at s=1.

    "classical" is (exp(s^a) - 1)/(e - 1), flat at the target edge;
    "steep" is 1 - (exp((1-s)^a) - 1)/(e - 1), flat at the outer boundary.
    """
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    if shape == "classical":
        return (np.exp(s**exponent) - 1.0) / (np.e - 1.0)
    if shape == "steep":
        return 1.0 - (np.exp((1.0 - s) ** exponent) - 1.0) / (np.e - 1.0)
    raise ValueError(f"unknown relaxation shape {shape!r}")


def ramp_factor(t, duration, kind="cosine"):
    if duration is None or duration <= 0 or t >= duration:
        return 1.0
    if t <= 0:
        return 0.0
    if kind == "linear":
        return t / duration
    return 0.5 * (1.0 - np.cos(np.pi * t / duration))


@dataclass
class RelaxationZone:
    """Interval [x0, x1] blended toward a target solution.

    `target` is ``f(x, t) -> (eta, phi_eta)`` for generation zones; for
    absorption zones the target is zero. `outer` names the side of the
    zone facing the domain boundary ("left" or "right").
    """

    x0: float
    x1: float
    kind: str = "absorption"
    target: Callable | None = None
    ramp_time: float | None = None
    ramp: str = "cosine"
    outer: str | None = None
    exponent: float = 3.5
    shape: str = "classical"

    def __post_init__(self):
        if not self.x1 > self.x0:
            raise ValueError("relaxation zone must have positive width")
        if self.kind not in ("generation", "absorption"):
            raise ValueError(f"unknown zone kind {self.kind!r}")
        if self.kind == "generation" and self.target is None:
            raise ValueError("generation zone needs a target wave")

    def resolve_outer(self, domain_x0, domain_x1):
        if self.outer is None:
            left = abs(self.x0 - domain_x0)
            right = abs(domain_x1 - self.x1)
            self.outer = "left" if left <= right else "right"
        return self

    def weights(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x0) & (x <= self.x1)
        width = self.x1 - self.x0
        if self.outer == "right":
            s = (x - self.x0) / width
        else:
            s = (self.x1 - x) / width
        return np.where(inside, relaxation_weight(s, self.exponent, self.shape), 0.0)


def check_zones(zones):
    spans = sorted((z.x0, z.x1) for z in zones)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            raise ValueError("relaxation zones overlap")


def apply_relaxation(eta, phi_eta, x, zones, t, weights=None):
    """Return (eta, phi_eta) blended as f <- (1 - C_r) f + C_r f_target."""
    eta = eta.copy()
    phi_eta = phi_eta.copy()
    for i, zone in enumerate(zones):
        cr = zone.weights(x) if weights is None else weights[i]
        mask = cr > 0
        if not np.any(mask):
            continue
        if zone.kind == "generation":
            r = ramp_factor(t, zone.ramp_time, zone.ramp)
            te, tp = zone.target(x[mask], t)
            te, tp = r * np.asarray(te), r * np.asarray(tp)
        else:
            te = tp = 0.0
        c = cr[mask]
        eta[mask] = (1 - c) * eta[mask] + c * te
        phi_eta[mask] = (1 - c) * phi_eta[mask] + c * tp
    return eta, phi_eta


# -- spatial operator ---------------------------------------------------------


class WaveModel:
    """Discrete free-surface operator (eta, phi_eta) -> (d eta/dt, d phi_eta/dt).

    Parameters
    ----------
    surface, volume : meshes; `volume` must be extruded from `surface`.
    element : ReferenceElement of the mesh order.
    mode : "FNPF" or "LPF". LPF freezes the mesh at z = 0 and evaluates the
        linear surface conditions pointwise.
    preconditioner : "lu" (factor of the undisturbed operator), "jacobi" or "sgs".
    mesh_update : "stage" moves the mesh at every RK stage, "step" only at
        the first stage of a step.
    """

    def __init__(self, surface: SurfaceMesh, volume: VolumeMesh, element: ReferenceElement, mode=FNPF,
                 g=G, preconditioner="lu", quad_order=None, fs_degree=None, mesh_update="stage",
                 lumped_recovery=False, laplace_rtol=LAPLACE_RTOL, laplace_atol=LAPLACE_ATOL,
                 mass_rtol=MASS_RTOL, mass_atol=MASS_ATOL, keep_reports=False):
        self.surface = surface
        self.volume = volume
        self.element = element
        self.mode = _check_mode(mode)
        self.g = g
        self.mesh_update = mesh_update
        self.lumped_recovery = lumped_recovery
        self.tol = dict(laplace=(laplace_rtol, laplace_atol), mass=(mass_rtol, mass_atol))
        self.timers = RoutineTimers()
        self.keep_reports = keep_reports
        self.reports = []
        self.volume_asm = VolumeAssembler(volume, element, quad_order)
        self.surface_asm = SurfaceAssembler(surface, element, fs_degree, g)
        self.rhs_evaluations = 0

        update_mesh(volume, np.zeros(surface.ndof))
        self._ops = self.volume_asm.assemble()
        self._reference_system = self.volume_asm.dirichlet(self._ops["stiffness"], np.zeros(surface.ndof))
        if preconditioner == "lu":
            self._precond = FactorizedPreconditioner(self._reference_system.A)
        else:
            self._precond = preconditioner
        self._phi_guess = None
        self._w_guess = None
        self._fs_guess = [None, None]
        self._geometry_eta = np.zeros(surface.ndof)

    # -- pieces of the pipeline --------------------------------------------------

    def _record(self, report):
        if self.keep_reports:
            self.reports.append(report)

    def update_geometry(self, eta):
        with self.timers(LAPLACE_UPDATE):
            update_mesh(self.volume, eta)
            self._geometry_eta = np.array(eta, dtype=float)
            self._ops = None

    def laplace_solve(self, phi_eta):
        """Solve for phi on the current mesh and recover w; returns (phi, w)."""
        with self.timers(LAPLACE_SOLVE):
            if self._ops is None:
                self._ops = self.volume_asm.assemble()
            system = self.volume_asm.dirichlet(self._ops["stiffness"], phi_eta)
            rtol, atol = self.tol["laplace"]
            try:
                x, rep = cg_solve(system.A, system.b, precond=self._precond, rtol=rtol, atol=atol,
                                  x0=self._phi_guess, stage=LAPLACE_SOLVE)
            except SolverError as exc:
                raise StageError(LAPLACE_SOLVE, exc) from exc
            self._record(rep)
            self._phi_guess = x
            phi = system.expand(x)
            try:
                w, rep = gradient_recovery(phi, self.volume, self.element, lumped=self.lumped_recovery,
                                           operators=self._ops, rtol=rtol, atol=atol, x0=self._w_guess)
            except SolverError as exc:
                raise StageError(LAPLACE_SOLVE, exc) from exc
            if rep is not None:
                self._record(rep)
            self._w_guess = w
        return phi, w

    def surface_rates(self, eta, phi_eta, w_eta):
        with self.timers(EVALUATE_RHS):
            if self.mode == LPF:
                return w_eta.copy(), -self.g * eta
            rk, rd = self.surface_asm.rhs(eta, phi_eta, w_eta, FNPF)
            rtol, atol = self.tol["mass"]
            out = []
            for i, r in enumerate((rk, rd)):
                try:
                    x, rep = mass_solve(self.surface_asm.mass, r, rtol=rtol, atol=atol,
                                        x0=self._fs_guess[i], stage=EVALUATE_RHS)
                except SolverError as exc:
                    raise StageError(EVALUATE_RHS, exc) from exc
                self._record(rep)
                self._fs_guess[i] = x
                out.append(x)
        return out[0], out[1]

    def evaluate(self, eta, phi_eta, move_mesh=True):
        """Full RHS evaluation; returns (d_eta, d_phi, w_eta, phi, w)."""
        if self.mode == FNPF and move_mesh:
            self.update_geometry(eta)
        phi, w = self.laplace_solve(phi_eta)
        w_eta = w[self.volume.surface_map]
        d_eta, d_phi = self.surface_rates(eta, phi_eta, w_eta)
        self.rhs_evaluations += 1
        return d_eta, d_phi, w_eta, phi, w

    def w_eta(self, eta, phi_eta):
        return self.evaluate(eta, phi_eta)[2]


def run(config, out_dir=None, progress=None):
    """Run a validated :class:`~wavesem.config.RunConfig`; returns a RunResult."""
    from .simulation import run as _run

    return _run(config, out_dir, progress)
