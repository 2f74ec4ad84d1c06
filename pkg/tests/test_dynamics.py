import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavesem.assembly import FNPF, LPF
from wavesem.basis import ReferenceElement
from wavesem.config import parse_config
from wavesem.dynamics import (
    EVALUATE_RHS,
    LAPLACE_SOLVE,
    LAPLACE_UPDATE,
    RelaxationZone,
    TimeControls,
    WaveModel,
    apply_relaxation,
    check_zones,
    compute_dt,
    erk4_step,
    estimate_u_max,
    ramp_factor,
    relaxation_weight,
)
from wavesem.mesh import build_surface_mesh, extrude
from wavesem.simulation import Simulation
from wavesem.wavetheory import AiryWave, WaveSpec, airy_wave, dispersion_solve, stream_function_solve


def test_compute_dt_formula():
    assert compute_dt(0.95, 0.01, 2.0) == pytest.approx(0.00475)
    assert compute_dt(0.95, 0.02, 2.0) == pytest.approx(2 * compute_dt(0.95, 0.01, 2.0))
    with pytest.raises(ValueError):
        compute_dt(0.95, 0.0, 1.0)


def test_u_max_estimate():
    assert estimate_u_max(2.0, 0.01, 1.0) == 2.0
    assert estimate_u_max(0.1, 1.0, 1.0) == pytest.approx(1.5 * 2 * np.pi)


def test_bar_time_step_reproduced_by_formula():
    from wavesem.studies import bar_config

    sim = Simulation(bar_config(periods=1))
    spec = dispersion_solve(WaveSpec(h=0.4, T=2.018, H=0.02))
    u = max(sim.wave.c, 1.5 * 2 * np.pi * 0.02 / 2.018)
    assert sim.wave.c == pytest.approx(spec.celerity, rel=2e-3)
    assert sim.controls.dt == pytest.approx(0.95 * sim.surface.dx_min / u, rel=1e-14)


def test_time_controls():
    tc = TimeControls(dt=0.1, end_time=1.0)
    assert tc.n_steps == 10
    with pytest.raises(ValueError):
        TimeControls(dt=0.0, end_time=1.0)


@given(st.floats(-3.0, 1.0), st.floats(0.01, 1.0))
def test_erk4_stability_polynomial(lam, dt):
    (y,) = erk4_step(0.0, (np.array([1.0]),), dt, lambda t, y: (lam * y[0],))
    z = lam * dt
    assert y[0] == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24, rel=1e-13)


# -- relaxation -------------------------------------------------------------


def test_relaxation_weight_endpoints_and_range():
    s = np.linspace(0, 1, 101)
    for shape in ("classical", "steep"):
        c = relaxation_weight(s, shape=shape)
        assert c[0] == pytest.approx(0.0, abs=1e-15) and c[-1] == pytest.approx(1.0)
        assert np.all((c >= 0) & (c <= 1)) and np.all(np.diff(c) >= 0)
    with pytest.raises(ValueError):
        relaxation_weight(s, shape="other")


def test_zone_orientation():
    right = RelaxationZone(8.0, 10.0).resolve_outer(0.0, 10.0)
    left = RelaxationZone(0.0, 2.0, kind="generation", target=lambda x, t: (x, x)).resolve_outer(0.0, 10.0)
    assert right.outer == "right" and left.outer == "left"
    np.testing.assert_allclose(right.weights(np.array([8.0, 10.0, 5.0])), [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(left.weights(np.array([2.0, 0.0])), [0.0, 1.0], atol=1e-15)


def test_zones_must_not_overlap():
    with pytest.raises(ValueError):
        check_zones([RelaxationZone(0.0, 2.0), RelaxationZone(1.5, 3.0)])
    with pytest.raises(ValueError):
        RelaxationZone(1.0, 1.0)
    with pytest.raises(ValueError):
        RelaxationZone(0.0, 1.0, kind="generation")


def test_relaxation_zero_weight_is_identity():
    x = np.linspace(0, 1, 11)
    z = RelaxationZone(2.0, 3.0).resolve_outer(0.0, 3.0)
    eta, phi = np.sin(x), np.cos(x)
    e2, p2 = apply_relaxation(eta, phi, x, [z], 0.0)
    np.testing.assert_array_equal(e2, eta)
    np.testing.assert_array_equal(p2, phi)


def test_relaxation_full_weight_absorbs():
    x = np.linspace(0, 1, 11)
    z = RelaxationZone(0.0, 1.0).resolve_outer(0.0, 1.0)
    e2, p2 = apply_relaxation(np.ones(11), np.ones(11), x, [z], 0.0, weights=[np.ones(11)])
    np.testing.assert_array_equal(e2, 0.0)
    np.testing.assert_array_equal(p2, 0.0)


def test_relaxation_mid_zone_blend_hand_computed():
    target = lambda x, t: (np.full_like(x, 2.0), np.full_like(x, -1.0))  # noqa: E731
    z = RelaxationZone(0.0, 1.0, kind="generation", target=target, ramp_time=None).resolve_outer(0.0, 5.0)
    x = np.array([0.5])
    s = 0.5  # distance from the target edge x=1
    cr = (np.exp(s**3.5) - 1) / (np.e - 1)
    e2, p2 = apply_relaxation(np.array([0.3]), np.array([0.7]), x, [z], 0.0)
    assert e2[0] == pytest.approx((1 - cr) * 0.3 + cr * 2.0, rel=1e-15)
    assert p2[0] == pytest.approx((1 - cr) * 0.7 + cr * -1.0, rel=1e-15)


@given(st.lists(st.floats(-1, 1), min_size=20, max_size=20), st.floats(0, 20))
def test_relaxation_never_touches_target_zone(vals, t):
    x = np.linspace(0, 10, 20)
    gen = RelaxationZone(0.0, 2.0, kind="generation", target=lambda x, t: (np.ones_like(x), np.ones_like(x)),
                         ramp_time=5.0).resolve_outer(0.0, 10.0)
    ab = RelaxationZone(8.0, 10.0).resolve_outer(0.0, 10.0)
    eta = np.array(vals)
    e2, p2 = apply_relaxation(eta, eta, x, [gen, ab], t)
    inside = (x >= 2.0) & (x <= 8.0)
    np.testing.assert_array_equal(e2[inside], eta[inside])


def test_ramp_factor():
    assert ramp_factor(0.0, 10.0) == 0.0
    assert ramp_factor(5.0, 10.0) == pytest.approx(0.5)
    assert ramp_factor(12.0, 10.0) == 1.0
    assert ramp_factor(2.5, 10.0, "linear") == pytest.approx(0.25)
    assert ramp_factor(1.0, None) == 1.0


# -- right-hand side ---------------------------------------------------------


def model(p, nx, nz, depth, mode, length=1.0, **kw):
    s = build_surface_mesh(length, nx, p, periodic=True)
    v = extrude(s, nz, depth)
    return WaveModel(s, v, ReferenceElement(p), mode, **kw)


@pytest.mark.parametrize("mode", [LPF, FNPF])
def test_still_water_rhs_is_zero(mode):
    m = model(3, 4, 2, 0.3, mode)
    z = np.zeros(m.surface.ndof)
    de, dp, w, _, _ = m.evaluate(z, z)
    assert np.abs(de).max() == 0.0 and np.abs(dp).max() == 0.0 and np.abs(w).max() == 0.0
    shares = m.timers.shares()
    assert set(shares) == {LAPLACE_SOLVE, EVALUATE_RHS, LAPLACE_UPDATE}


def test_lpf_rhs_matches_airy_derivative_at_order_p():
    spec = dispersion_solve(WaveSpec(h=1 / (2 * np.pi), L=1.0, H=0.01))
    for p in (2, 3):
        errs = []
        for nx in (4, 8, 16):
            m = model(p, nx, max(1, nx // 4), spec.h, LPF, laplace_rtol=1e-12)
            x = m.surface.coords
            eta, phi, _, w0 = airy_wave(spec, x, 0.0, 0.0)
            de, dp, *_ = m.evaluate(eta, phi)
            errs.append(np.abs(de - w0).max())
            np.testing.assert_allclose(dp, -spec.g * eta, atol=1e-14)
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert rates[-1] > p - 0.4


def test_fnpf_rhs_matches_travelling_wave():
    wave = stream_function_solve(WaveSpec.from_kh(1.0, L=1.0, rel_steepness=0.5))
    errs = []
    d = 1e-6
    for nx in (4, 8, 16):
        m = model(4, nx, max(1, nx // 4), wave.h, FNPF, laplace_rtol=1e-12, mass_rtol=1e-12)
        x = m.surface.coords
        eta, phi, _ = wave.surface(x)
        de, dp, *_ = m.evaluate(eta, phi)
        e1, p1, _ = wave.surface(x, d)
        e0, p0, _ = wave.surface(x, -d)
        errs.append(max(np.abs(de - (e1 - e0) / (2 * d)).max(), np.abs(dp - (p1 - p0) / (2 * d)).max()))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4 * wave.c * wave.k * wave.H


def test_stage_error_tagging():
    from wavesem.dynamics import StageError

    m = model(2, 4, 1, 0.3, FNPF)
    m.tol["laplace"] = (1e-30, 0.0)

    class Boom:
        def __call__(self, r, out=None):
            raise np.linalg.LinAlgError("boom")

    m._precond = Boom()
    with pytest.raises(np.linalg.LinAlgError):
        m.evaluate(0.01 * np.sin(2 * np.pi * m.surface.coords), np.ones(m.surface.ndof))
    err = StageError(LAPLACE_SOLVE, RuntimeError("x"))
    assert str(err).startswith("[LaplaceSolve]")


# -- time integration ----------------------------------------------------------


def _cfg(body):
    return parse_config(body)


REST = """
[domain]
length = 1.0
h = 0.2
[discretization]
n_elements = 4
n_layers = 2
order = 3
[wave]
initial = rest
[time]
steps = {steps}
dt = 0.01
[probes]
x = 0.5
"""


def test_rest_state_stays_at_rest():
    sim = Simulation(_cfg(REST.format(steps=100)))
    res = sim.run()
    assert np.abs(res.state.eta).max() < 1e-13
    assert np.abs(np.asarray(res.probes[0].eta)).max() < 1e-13
    assert res.n_steps == 100


AIRY = """
[domain]
length = 1.0
[discretization]
n_elements = {nx}
n_layers = 2
order = {p}
[wave]
mode = LPF
theory = airy
kh = 1.0
rel_steepness = 0.1
[time]
{time}
[solver]
laplace_rtol = 1e-13
"""


def test_temporal_self_convergence_sixteen():
    finals = []
    for dt in (0.04, 0.02, 0.01):
        cfg = _cfg(AIRY.format(nx=4, p=3, time=f"end_time = 0.48\ndt = {dt}"))
        cfg.filter.enabled = False
        finals.append(Simulation(cfg).run().state.eta)
    ratio = np.abs(finals[0] - finals[1]).max() / np.abs(finals[1] - finals[2]).max()
    assert 13.0 < ratio < 19.0


def test_lpf_energy_bounded_over_25_periods():
    from wavesem.analysis import discrete_energy

    sim = Simulation(_cfg(AIRY.format(nx=8, p=4, time="periods = 25")))
    energies = []
    M = sim.model.surface_asm.mass
    state = sim.initial_state()

    def record(s):
        energies.append(discrete_energy(M, s.eta, s.phi_eta, s.w_eta, sim.cfg.wave.g))

    for _ in range(sim.controls.n_steps):
        state = sim.step(state, on_first_stage=record)
    e = np.array(energies)
    assert np.abs(e / e[0] - 1).max() < 5e-3


def test_blow_up_reports_stage():
    from wavesem.dynamics import BlowUpError

    cfg = _cfg(AIRY.format(nx=4, p=3, time="steps = 50\ndt = 5.0"))
    cfg.wave.mode = "FNPF"
    cfg.wave.theory = "stream"
    cfg.wave.rel_steepness = 0.5
    with pytest.raises(BlowUpError) as exc:
        Simulation(cfg).run()
    assert "stage" in str(exc.value) or "step" in str(exc.value)
    assert exc.value.last_good is not None
