import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavesem.wavetheory import (
    G,
    AiryWave,
    ExtrapolationWarning,
    StreamFunctionError,
    WaveSpec,
    airy_wave,
    default_modes,
    dispersion_solve,
    max_steepness,
    stream_function_eval,
    stream_function_solve,
    surface_fields,
)


@given(st.floats(0.05, 10.0), st.floats(0.1, 5.0))
def test_dispersion_relation_satisfied(h, T):
    s = dispersion_solve(WaveSpec(h=h, T=T))
    assert s.omega**2 == pytest.approx(G * s.k * np.tanh(s.k * h), rel=1e-12)
    assert s.L == pytest.approx(2 * np.pi / s.k)
    assert s.period_given


def test_bar_wave_kh():
    s = dispersion_solve(WaveSpec(h=0.4, T=2.018, H=0.02))
    # quoted flume value kh = 0.6725
    assert s.kh == pytest.approx(0.6725, rel=2e-3)
    assert 0.05 < s.rel_steepness < 0.1


def test_from_kh_sets_depth():
    s = WaveSpec.from_kh(1.0, L=1.0, rel_steepness=0.5)
    assert s.h == pytest.approx(1 / (2 * np.pi))
    assert s.H / s.L == pytest.approx(0.5 * max_steepness(s))


def test_max_steepness_limits():
    deep = max_steepness(WaveSpec(h=100.0, L=1.0))
    assert deep == pytest.approx(0.141063 / (1 + 0.078834 * 0.01 + 0.0317567e-4 + 0.0093407e-6) * 1.0, rel=1e-2)
    assert 0.135 < deep < 0.142
    shallow = WaveSpec(h=1.0, L=1e5)
    # H_max / h tends to 0.0077829 / 0.0093407 = 0.833 in shallow water
    assert max_steepness(shallow) * shallow.L / shallow.h == pytest.approx(0.833, rel=1e-2)


def test_spec_validation():
    with pytest.raises(ValueError):
        dispersion_solve(WaveSpec(h=-1.0, L=1.0))
    with pytest.raises(ValueError):
        dispersion_solve(WaveSpec(h=1.0))


def test_airy_satisfies_laplace_and_linear_conditions():
    s = dispersion_solve(WaveSpec(h=0.5, L=2.0, H=0.01))
    x, z, t, d = 0.3, -0.2, 0.4, 1e-4
    phi = lambda x, z, t: airy_wave(s, x, z, t)[1]  # noqa: E731
    lap = (phi(x + d, z, t) - 2 * phi(x, z, t) + phi(x - d, z, t) + phi(x, z + d, t) - 2 * phi(x, z, t)
           + phi(x, z - d, t)) / d**2
    assert abs(lap) < 1e-5
    eta, _, _, w0 = airy_wave(s, x, 0.0, t)
    deta = (airy_wave(s, x, 0.0, t + d)[0] - airy_wave(s, x, 0.0, t - d)[0]) / (2 * d)
    assert deta == pytest.approx(w0, rel=1e-6)
    dphi = (phi(x, 0.0, t + d) - phi(x, 0.0, t - d)) / (2 * d)
    assert dphi == pytest.approx(-G * eta, rel=1e-6)
    # no flow through the bed
    assert abs(airy_wave(s, x, -0.5, t)[3]) < 1e-15


def test_airy_wave_class_and_linear_surface_fields():
    s = dispersion_solve(WaveSpec(h=1.0, L=3.0, H=0.1))
    a = AiryWave(s)
    x = np.linspace(0, 3, 7)
    e, p, w = surface_fields(a, x, 0.2, linear=True)
    e2, p2, _, w2 = airy_wave(s, x, 0.0, 0.2)
    np.testing.assert_allclose([e, p, w], [e2, p2, w2])
    assert a.c == pytest.approx(s.L / s.T)


@pytest.fixture(scope="module")
def sf_waves():
    out = {}
    for kh in (1.0, 3.0, 6.0):
        for rel in (0.1, 0.5, 0.9):
            out[kh, rel] = stream_function_solve(WaveSpec.from_kh(kh, L=1.0, rel_steepness=rel))
    return out


def test_stream_function_height_and_mean_level(sf_waves):
    for (kh, rel), w in sf_waves.items():
        spec = w.spec
        assert w.residual < 1e-9
        assert w.H == pytest.approx(spec.H, rel=1e-10)
        x = np.linspace(0, w.L, 4001)[:-1]
        assert abs(np.mean(w.eta(x))) < 1e-10 * w.L
        assert w.eta(0.0) == pytest.approx(w.eta(x).max(), rel=1e-8)


def test_stream_function_stokes_celerity_at_low_steepness():
    kh = 1.0
    w = stream_function_solve(WaveSpec.from_kh(kh, L=1.0, rel_steepness=0.05))
    k, a = w.k, w.H / 2
    sig = np.tanh(kh)
    c0 = np.sqrt(G / k * sig)
    c3 = c0 * (1 + (k * a) ** 2 * (9 - 10 * sig**2 + 9 * sig**4) / (16 * sig**4))
    assert w.c == pytest.approx(c3, rel=5 * (k * a) ** 4)
    assert abs(w.c - c0) > 10 * abs(w.c - c3)


def test_stream_function_surface_conditions(sf_waves):
    """Kinematic and zero-constant Bernoulli conditions along the surface.

    For near-breaking waves the default 16-32 modes leave a truncation error
    in the slope of the surface series, so only the Bernoulli condition is
    checked there, at the collocation nodes.
    """
    d = 1e-6
    for (kh, rel), w in sf_waves.items():
        nodes = np.arange(w.n_modes + 1) * w.L / (2 * w.n_modes)
        x = nodes if rel > 0.5 else np.concatenate([nodes, np.linspace(0, w.L, 13)])
        eta = w.eta(x)
        u, v = w.velocity(x, eta)
        phi_t = (w.potential(x, eta, d) - w.potential(x, eta, -d)) / (2 * d)
        bern = phi_t + 0.5 * (u**2 + v**2) + G * eta
        np.testing.assert_allclose(bern, 0.0, atol=1e-6 * w.c**2)
        if rel <= 0.5:
            eta_t = (w.eta(x, d) - w.eta(x, -d)) / (2 * d)
            np.testing.assert_allclose(eta_t, v - u * w.eta_x(x), atol=1e-6 * w.c)


def test_stream_function_laplace_and_bed(sf_waves):
    w = sf_waves[1.0, 0.5]
    x, z, d = 0.21, -0.05, 1e-4
    p = w.potential
    lap = (p(x + d, z) + p(x - d, z) + p(x, z + d) + p(x, z - d) - 4 * p(x, z)) / d**2
    assert abs(lap) < 1e-4
    assert abs(w.velocity(0.3, -w.h)[1]) < 1e-14


def test_stream_function_linear_limit_matches_airy():
    spec = WaveSpec.from_kh(1.0, L=1.0, H=1e-5)
    w = stream_function_solve(spec)
    x = np.linspace(0, 1, 9)
    e_a, p_a, _, w_a = airy_wave(spec, x, 0.0, 0.0)
    np.testing.assert_allclose(w.eta(x), e_a, atol=1e-9)
    assert w.c == pytest.approx(spec.celerity, rel=1e-8)


def test_stream_function_period_given():
    spec = dispersion_solve(WaveSpec(h=0.4, T=2.018, H=0.02))
    w = stream_function_solve(spec)
    assert w.T == pytest.approx(2.018, rel=1e-10)
    assert w.L < spec.L * 1.01


def test_stream_function_breaking_limit():
    with pytest.raises(StreamFunctionError):
        stream_function_solve(WaveSpec.from_kh(1.0, L=1.0, rel_steepness=0.999).__class__(
            h=1 / (2 * np.pi), L=1.0, H=0.2))


def test_stream_function_eval_and_extrapolation_warning():
    w = stream_function_solve(WaveSpec.from_kh(1.0, L=1.0, rel_steepness=0.3))
    eta, phi, phi_eta, u, v = stream_function_eval(w, 0.25, -0.05)
    assert phi_eta == pytest.approx(w.potential(0.25, w.eta(0.25)))
    with pytest.warns(ExtrapolationWarning):
        stream_function_eval(w, 0.0, w.eta(0.0) + 0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        stream_function_eval(w, 0.0, w.eta(0.0) + 0.01, warn=False)


def test_default_modes():
    assert default_modes(WaveSpec.from_kh(1.0, rel_steepness=0.1)) == 16
    assert default_modes(WaveSpec.from_kh(6.0, rel_steepness=0.9)) == 32


def test_stream_function_csv(tmp_path):
    w = stream_function_solve(WaveSpec.from_kh(1.0, L=1.0, rel_steepness=0.1))
    w.to_csv(tmp_path / "w.csv", n=8)
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "x,eta,phi_eta,w_eta" and len(lines) == 9
