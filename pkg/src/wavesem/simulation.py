"""Setup, time loop and exports for a configured run."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .assembly import FNPF, LPF, evaluate_surface
from .basis import ReferenceElement, apply_modal_filter
from .config import RunConfig
from .dynamics import (
    BlowUpError,
    RelaxationZone,
    SimulationState,
    TimeControls,
    WaveModel,
    apply_relaxation,
    check_zones,
    compute_dt,
    estimate_u_max,
)
from .mesh import MeshError, build_surface_mesh, extrude
from .wavetheory import AiryWave, WaveSpec, dispersion_solve, stream_function_solve, surface_fields

__all__ = ["ProbeSeries", "RunResult", "Simulation", "build_wave", "run"]

log = logging.getLogger(__name__)


@dataclass
class ProbeSeries:
    x: float
    t: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    phi_eta: list = field(default_factory=list)
    w_eta: list = field(default_factory=list)

    def arrays(self):
        return {k: np.asarray(getattr(self, k)) for k in io.PROBE_COLUMNS}


@dataclass
class RunResult:
    config: RunConfig
    state: SimulationState
    probes: list
    controls: TimeControls
    model: WaveModel
    wave: object = None
    files: list = field(default_factory=list)
    wall_time: float = 0.0
    n_steps: int = 0

    @property
    def timers(self):
        return self.model.timers

    @property
    def reports(self):
        return self.model.reports


def build_wave(cfg: RunConfig):
    """Reference wave from the [wave] section, or None when not needed."""
    w = cfg.wave
    if w.initial != "wave" and cfg.zones.generation is None:
        return None
    h = cfg.wave_depth()
    L, T = w.wavelength, w.period
    if T is None and L is None:
        L = 2 * np.pi * h / w.kh
    spec = WaveSpec(h=h, L=L if T is None else None, T=T, H=w.height, rel_steepness=w.rel_steepness, g=w.g)
    spec = dispersion_solve(spec)
    if w.theory == "airy":
        return AiryWave(spec)
    return stream_function_solve(spec, n_modes=w.n_modes)


class Simulation:
    """A configured run: meshes, model, zones and time controls."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        d, disc = cfg.domain, cfg.discretization
        p = disc.order
        self.surface = build_surface_mesh(d.length, disc.n_elements, p, periodic=d.periodic, x0=d.x0)
        self.volume = extrude(self.surface, disc.n_layers, cfg.depth_function(), disc.layer_clustering)
        f = cfg.filter
        self.element = ReferenceElement(p, f.cutoff, f.strength, f.order)
        # the exponential filter would remove the linear mode of p = 1 elements
        self.filter_on = f.enabled and f.cadence != "off" and p > 1
        self.wave = build_wave(cfg)
        s = cfg.solver
        self.model = WaveModel(
            self.surface, self.volume, self.element, cfg.wave.mode, g=cfg.wave.g,
            preconditioner=s.preconditioner, quad_order=disc.quad_order, fs_degree=disc.fs_degree,
            mesh_update=s.mesh_update, lumped_recovery=s.lumped_recovery,
            laplace_rtol=s.laplace_rtol, laplace_atol=s.laplace_atol,
            mass_rtol=s.mass_rtol, mass_atol=s.mass_atol, keep_reports=s.keep_reports,
        )
        self.linear = self.model.mode == LPF
        self.controls = self._time_controls()
        self.zones = self._zones()
        self._zone_weights = [z.weights(self.surface.coords) for z in self.zones]
        self.probe_x = np.asarray(cfg.probes.x, dtype=float)

    # -- setup ---------------------------------------------------------------

    def _time_controls(self):
        t = self.cfg.time
        if t.dt is not None:
            dt = t.dt
            u_max = t.u_max
        else:
            u_max = t.u_max
            if u_max is None:
                u_max = estimate_u_max(self.wave.c, self.wave.H, self.wave.T)
            dt = compute_dt(t.cfl, self.surface.dx_min, u_max)
        if t.end_time is not None:
            end = t.end_time
        elif t.periods is not None:
            end = t.periods * self.wave.T
        else:
            end = t.steps * dt
        return TimeControls(dt=dt, end_time=end, cfl=t.cfl, u_max=u_max)

    def _zones(self):
        z, d = self.cfg.zones, self.cfg.domain
        zones = []
        ramp = z.ramp_periods * self.wave.T if self.wave is not None else None
        if z.generation is not None:
            wave, linear = self.wave, self.linear

            def target(x, t):
                eta, phi, _ = surface_fields(wave, x, t, linear)
                return eta, phi

            zones.append(RelaxationZone(*z.generation, kind="generation", target=target, ramp_time=ramp,
                                        ramp=z.ramp, exponent=z.exponent, shape=z.shape))
        if z.absorption is not None:
            zones.append(RelaxationZone(*z.absorption, kind="absorption", exponent=z.exponent,
                                        shape=z.shape))
        for zone in zones:
            zone.resolve_outer(d.x0, d.x0 + d.length)
        check_zones(zones)
        return zones

    def initial_state(self):
        x = self.surface.coords
        if self.cfg.wave.initial == "wave":
            eta, phi, _ = surface_fields(self.wave, x, 0.0, self.linear)
        else:
            eta = np.zeros_like(x)
            phi = np.zeros_like(x)
        return SimulationState(0.0, np.array(eta, dtype=float), np.array(phi, dtype=float))

    # -- time loop -------------------------------------------------------------

    def _filter(self, eta, phi):
        fields = self.cfg.filter.fields
        if "eta" in fields:
            eta = apply_modal_filter(eta, self.surface, self.element)
        if "phi_eta" in fields:
            phi = apply_modal_filter(phi, self.surface, self.element)
        return eta, phi

    def step(self, state: SimulationState, on_first_stage=None):
        """Advance one ERK4 step followed by relaxation and filtering."""
        dt = self.controls.dt
        t = state.t
        stage_filter = self.filter_on and self.cfg.filter.cadence == "stage"
        per_stage_mesh = self.model.mesh_update == "stage"
        y0 = (state.eta, state.phi_eta)
        ks = []
        y = y0
        coeff = (0.0, 0.5, 0.5, 1.0)
        for i in range(4):
            if i > 0:
                y = tuple(a + coeff[i] * dt * b for a, b in zip(y0, ks[-1]))
                if stage_filter:
                    y = self._filter(*y)
            try:
                de, dp, w_eta, phi, w = self.model.evaluate(y[0], y[1], move_mesh=per_stage_mesh or i == 0)
            except MeshError as exc:
                raise BlowUpError(f"stage {i + 1} at t={t + coeff[i] * dt:.6g}: {exc}", state) from exc
            if not (np.all(np.isfinite(de)) and np.all(np.isfinite(dp))):
                raise BlowUpError(f"non-finite tendency in stage {i + 1} at t={t + coeff[i] * dt:.6g}", state)
            if i == 0:
                state.w_eta, state.phi, state.w = w_eta, phi, w
                if on_first_stage is not None:
                    on_first_stage(state)
            ks.append((de, dp))
        eta = y0[0] + dt / 6 * (ks[0][0] + 2 * ks[1][0] + 2 * ks[2][0] + ks[3][0])
        phi_eta = y0[1] + dt / 6 * (ks[0][1] + 2 * ks[1][1] + 2 * ks[2][1] + ks[3][1])
        n = state.step + 1
        t_new = n * dt
        if self.zones:
            eta, phi_eta = apply_relaxation(eta, phi_eta, self.surface.coords, self.zones, t_new,
                                            self._zone_weights)
        if self.filter_on and self.cfg.filter.cadence == "step" and n % self.cfg.filter.every == 0:
            eta, phi_eta = self._filter(eta, phi_eta)
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(phi_eta))):
            raise BlowUpError(f"non-finite state after step {n}", state)
        return SimulationState(t_new, eta, phi_eta, step=n)

    def run(self, out_dir=None, progress=None):
        cfg = self.cfg
        out = Path(out_dir) if out_dir is not None else (
            Path(cfg.output.directory) if cfg.output.directory else None
        )
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        probes = [ProbeSeries(float(x)) for x in self.probe_x]
        files = []
        every = cfg.probes.every
        snap = cfg.output.snapshot_every if out is not None and cfg.output.write_vtk else 0

        def record(state):
            if state.step % every == 0 and probes:
                vals = [evaluate_surface(self.surface, f, self.probe_x)
                        for f in (state.eta, state.phi_eta, state.w_eta)]
                for i, pr in enumerate(probes):
                    pr.t.append(state.t)
                    pr.eta.append(vals[0][i])
                    pr.phi_eta.append(vals[1][i])
                    pr.w_eta.append(vals[2][i])
            if snap and state.step % snap == 0:
                path = out / f"snapshot_{state.step:06d}.vtk"
                io.write_vtk(path, self.volume, {"phi": state.phi, "w": state.w})
                files.append(path)

        n_steps = self.controls.n_steps
        state = self.initial_state()
        t0 = time.perf_counter()
        for n in range(n_steps):
            state = self.step(state, on_first_stage=record)
            if progress is not None:
                progress(state, n_steps)
        # diagnostics for the final state
        _, _, w_eta, phi, w = self.model.evaluate(state.eta, state.phi_eta)
        state.w_eta, state.phi, state.w = w_eta, phi, w
        record(state)
        wall = time.perf_counter() - t0
        result = RunResult(cfg, state, probes, self.controls, self.model, self.wave, files, wall, n_steps)
        if out is not None:
            result.files = files + write_outputs(result, out)
        return result


def write_outputs(result: RunResult, out: Path):
    files = []
    for i, pr in enumerate(result.probes):
        a = pr.arrays()
        files.append(io.write_probe_csv(out / f"probe_{i:02d}.csv", a["t"], a["eta"], a["phi_eta"], a["w_eta"]))
    files.append(io.write_timings(out / "timings.csv", result.timers))
    if result.config.output.write_reports and result.reports:
        files.append(io.write_reports(out / "solver_reports.csv", result.reports))
    return files


def run(cfg: RunConfig, out_dir=None, progress=None) -> RunResult:
    """Execute a validated configuration; see :class:`Simulation`."""
    return Simulation(cfg).run(out_dir, progress)
