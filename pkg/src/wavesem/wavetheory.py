"""Regular-wave solutions: linear (Airy) theory and steady stream-function waves.

The stream-function wave is the Fourier-collocation solution of the steady
nonlinear problem in the frame moving with the wave: a truncated series
satisfying Laplace and the bed condition exactly, with the two free-surface
conditions imposed at N+1 points over half a wavelength and solved by
Newton's method. Units are SI throughout; internally the solver works in
units of depth h and sqrt(g h).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "G",
    "WaveSpec",
    "dispersion_solve",
    "max_steepness",
    "airy_wave",
    "AiryWave",
    "surface_fields",
    "StreamFunctionWave",
    "StreamFunctionError",
    "stream_function_solve",
    "stream_function_eval",
    "default_modes",
    "ExtrapolationWarning",
]

G = 9.82

_FIT_NUM = (0.141063, 0.0095721, 0.0077829)
_FIT_DEN = (0.0788340, 0.0317567, 0.0093407)


class StreamFunctionError(RuntimeError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WaveSpec:
    """Regular wave parameters.

    Give the depth `h`, one of wavelength `L` or period `T`, and optionally
    one of height `H` or relative steepness `rel_steepness` (H/L over its
    breaking limit). :func:`dispersion_solve` fills in the rest.
    """

    h: float
    L: float | None = None
    T: float | None = None
    H: float | None = None
    rel_steepness: float | None = None
    g: float = G
    k: float | None = field(default=None, compare=False)
    omega: float | None = field(default=None, compare=False)
    period_given: bool = field(default=False, compare=False)

    @classmethod
    def from_kh(cls, kh, L=1.0, H=None, rel_steepness=None, g=G):
        return dispersion_solve(cls(h=kh * L / (2 * np.pi), L=L, H=H, rel_steepness=rel_steepness, g=g))

    @property
    def kh(self):
        return self.k * self.h

    @property
    def eps(self):
        return self.H / self.L

    @property
    def eps_max(self):
        return max_steepness(self)

    @property
    def celerity(self):
        return self.omega / self.k

    def validate(self):
        for name in ("h", "L", "T", "H"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"wave parameter {name} must be positive, got {v}")
        if self.rel_steepness is not None and not 0 < self.rel_steepness < 1:
            raise ValueError("relative steepness must lie in (0, 1)")


def _solve_k(omega, h, g, tol=1e-14, maxiter=100):
    """Wavenumber from omega^2 = g k tanh(k h) by bracketed Newton."""
    target = omega**2 / g
    # k tanh(kh) is increasing; bracket between the deep and shallow limits
    lo = 0.0
    hi = max(target, omega / np.sqrt(g * h)) * 2.0 + 1e-12
    k = max(target, omega / np.sqrt(g * h))  # deep or shallow estimate
    for _ in range(maxiter):
        t = np.tanh(k * h)
        f = k * t - target
        if f > 0:
            hi = min(hi, k)
        else:
            lo = max(lo, k)
        df = t + k * h * (1 - t * t)
        k_new = k - f / df
        if not lo < k_new < hi:
            k_new = 0.5 * (lo + hi)
        if abs(k_new - k) <= tol * k_new:
            k = k_new
            if abs(k * np.tanh(k * h) - target) <= 1e-12 * target:
                return k
        k = k_new
    raise RuntimeError(f"dispersion relation did not converge (omega={omega}, h={h})")


def dispersion_solve(spec: WaveSpec) -> WaveSpec:
    """Complete a spec with k, omega and the missing one of L/T from linear dispersion."""
    spec.validate()
    g, h = spec.g, spec.h
    if spec.L is not None:
        k = 2 * np.pi / spec.L
        omega = np.sqrt(g * k * np.tanh(k * h))
    elif spec.T is not None:
        omega = 2 * np.pi / spec.T
        k = _solve_k(omega, h, g)
    else:
        raise ValueError("either wavelength L or period T must be given")
    out = replace(spec, L=2 * np.pi / k, T=2 * np.pi / omega, k=float(k), omega=float(omega),
                  period_given=spec.L is None)
    if out.H is None and out.rel_steepness is not None:
        out = replace(out, H=out.rel_steepness * max_steepness(out) * out.L)
    elif out.H is not None and out.rel_steepness is None:
        out = replace(out, rel_steepness=out.H / out.L / max_steepness(out))
    return out


def max_steepness(spec: WaveSpec):
    """Breaking-limit steepness H_max / L from Fenton's (1990) rational fit in L/h."""
    q = spec.L / spec.h
    a1, a2, a3 = _FIT_NUM
    b1, b2, b3 = _FIT_DEN
    hmax_over_h = (a1 * q + a2 * q**2 + a3 * q**3) / (1 + b1 * q + b2 * q**2 + b3 * q**3)
    return hmax_over_h / q


def airy_wave(spec: WaveSpec, x, z, t):
    """Linear progressive wave: returns (eta, phi, u, w)."""
    k, w_, h, g, a = spec.k, spec.omega, spec.h, spec.g, 0.5 * spec.H
    theta = k * np.asarray(x) - w_ * t
    z = np.asarray(z, dtype=float)
    ch = _cosh_ratio(k, z, h)
    sh = _sinh_ratio(k, z, h)
    amp = a * g / w_
    eta = a * np.cos(theta)
    phi = amp * ch * np.sin(theta)
    u = amp * k * ch * np.cos(theta)
    w = amp * k * sh * np.sin(theta)
    return eta, phi, u, w


@dataclass(frozen=True)
class AiryWave:
    """Linear progressive wave with the evaluator interface of
    :class:`StreamFunctionWave`."""

    spec: WaveSpec

    @classmethod
    def from_spec(cls, spec: WaveSpec):
        return cls(spec if spec.k is not None else dispersion_solve(spec))

    k = property(lambda self: self.spec.k)
    L = property(lambda self: self.spec.L)
    T = property(lambda self: self.spec.T)
    H = property(lambda self: self.spec.H)
    h = property(lambda self: self.spec.h)
    c = property(lambda self: self.spec.celerity)

    def eta(self, x, t=0.0):
        return airy_wave(self.spec, x, 0.0, t)[0]

    def potential(self, x, z, t=0.0):
        return airy_wave(self.spec, x, z, t)[1]

    def velocity(self, x, z, t=0.0):
        return airy_wave(self.spec, x, z, t)[2:]

    def surface(self, x, t=0.0):
        """(eta, phi, w) at the still-water level z = 0."""
        eta, phi, _, w = airy_wave(self.spec, x, 0.0, t)
        return eta, phi, w


def surface_fields(wave, x, t=0.0, linear=False):
    """(eta, phi_eta, w_eta) of a reference wave.

    With `linear` the potential and velocity are taken at z = 0, matching
    the flat-surface linear model.
    """
    if not linear:
        return wave.surface(x, t)
    x = np.asarray(x, dtype=float)
    return wave.eta(x, t), wave.potential(x, 0.0 * x, t), wave.velocity(x, 0.0 * x, t)[1]


def _cosh_ratio(a, z, h):
    """cosh(a (z+h)) / cosh(a h) without overflow (z measured from the mean level)."""
    return (np.exp(a * z) + np.exp(-a * (z + 2 * h))) / (1 + np.exp(-2 * a * h))


def _sinh_ratio(a, z, h):
    return (np.exp(a * z) - np.exp(-a * (z + 2 * h))) / (1 + np.exp(-2 * a * h))


MAX_DEFAULT_MODES = 32


def default_modes(spec: WaveSpec):
    """Fourier modes for a wave: grows with steepness and kh, capped at 32.

    Beyond ~32 modes the surface values of the highest modes of steep
    waves amplify round-off past the Newton tolerance.
    """
    rel = spec.rel_steepness if spec.rel_steepness is not None else 0.0
    return min(MAX_DEFAULT_MODES, max(16, int(math.ceil(8 * rel * spec.kh + 8))))


@dataclass(frozen=True)
class StreamFunctionWave:
    """Converged steady wave travelling in +x with celerity `c`.

    Fourier data are dimensional: the moving-frame stream function is
    ``-c (z+h) + sum_j B_j sinh(jk(z+h))/cosh(jkh) cos(jkX)`` with
    ``X = x - c t``, and the surface is ``sum''_j E_j cos(jkX)``.
    """

    spec: WaveSpec
    n_modes: int
    k: float
    c: float
    B: np.ndarray
    E: np.ndarray
    eta_nodes: np.ndarray
    Q: float
    R: float
    residual: float
    mean_current: float = 0.0

    @property
    def L(self):
        return 2 * np.pi / self.k

    @property
    def T(self):
        return self.L / self.c

    @property
    def H(self):
        return float(self.eta_nodes[0] - self.eta_nodes[-1])

    @property
    def h(self):
        return self.spec.h

    def _phase(self, x, t):
        return self.k * (np.asarray(x, dtype=float) - self.c * t)

    def eta(self, x, t=0.0):
        X = self._phase(x, t)
        j = np.arange(self.n_modes + 1)
        w = np.ones(self.n_modes + 1)
        w[0] = w[-1] = 0.5
        return np.cos(np.multiply.outer(X, j)) @ (w * self.E)

    def eta_x(self, x, t=0.0):
        X = self._phase(x, t)
        j = np.arange(self.n_modes + 1)
        w = np.ones(self.n_modes + 1)
        w[0] = w[-1] = 0.5
        return -np.sin(np.multiply.outer(X, j)) @ (w * self.E * j * self.k)

    def _series(self, x, z, t):
        X = self._phase(x, t)
        z = np.asarray(z, dtype=float)
        j = np.arange(1, self.n_modes + 1)
        jk = j * self.k
        zz = z[..., None]
        ch = _cosh_ratio(jk, zz, self.h)
        sh = _sinh_ratio(jk, zz, self.h)
        arg = np.multiply.outer(X, j)
        return arg, ch, sh, jk

    @property
    def bernoulli_constant(self):
        """C in the fixed-frame Bernoulli law phi_t + |grad phi|^2/2 + g eta = C."""
        return self.R - 0.5 * self.c**2 + self.c * self.mean_current

    def potential(self, x, z, t=0.0):
        """Fixed-frame potential, gauged so that the Bernoulli constant is zero."""
        arg, ch, _, _ = self._series(x, z, t)
        return np.sum(self.B * ch * np.sin(arg), axis=-1) - self.bernoulli_constant * t

    def velocity(self, x, z, t=0.0):
        """Fixed-frame (u, w)."""
        arg, ch, sh, jk = self._series(x, z, t)
        u = self.mean_current + np.sum(self.B * jk * ch * np.cos(arg), axis=-1)
        w = np.sum(self.B * jk * sh * np.sin(arg), axis=-1)
        return u, w

    def surface(self, x, t=0.0):
        """(eta, phi_eta, w_eta) along z = eta(x, t)."""
        eta = self.eta(x, t)
        phi = self.potential(x, eta, t)
        _, w = self.velocity(x, eta, t)
        return eta, phi, w

    def to_csv(self, path, n=256, t=0.0):
        x = np.linspace(0.0, self.L, n, endpoint=False)
        eta, phi, w = self.surface(x, t)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["x", "eta", "phi_eta", "w_eta"])
            for row in zip(x, eta, phi, w):
                out.writerow([repr(float(v)) for v in row])


def _ratios(a, z, h):
    # works for complex z (complex-step differentiation)
    e2 = np.exp(-2 * a * h)
    return (
        (np.exp(a * z) + np.exp(-a * (z + 2 * h))) / (1 + e2),
        (np.exp(a * z) - np.exp(-a * (z + 2 * h))) / (1 + e2),
    )


class _Collocation:
    """Dimensionless residual system (g = 1, depth `d` in the chosen length unit)."""

    def __init__(self, N, H, k=None, T=None, depth=1.0):
        self.N = N
        self.d = depth
        self.H = H
        self.k_fixed = k
        self.T = T
        self.m = np.arange(N + 1)
        self.j = np.arange(1, N + 1)
        self.trap = np.ones(N + 1)
        self.trap[0] = self.trap[-1] = 0.5

    @property
    def n_unknowns(self):
        return 2 * self.N + 4 + (self.k_fixed is None)

    def unpack(self, x):
        N = self.N
        eta = x[: N + 1]
        B = x[N + 1 : 2 * N + 1]
        c, Q, R = x[2 * N + 1], x[2 * N + 2], x[2 * N + 3]
        k = x[2 * N + 4] if self.k_fixed is None else self.k_fixed
        return eta, B, c, Q, R, k

    def pack(self, eta, B, c, Q, R, k):
        parts = [eta, B, [c, Q, R]] + ([[k]] if self.k_fixed is None else [])
        return np.concatenate([np.asarray(p, dtype=complex if np.iscomplexobj(eta) else float) for p in parts])

    def residual(self, x):
        eta, B, c, Q, R, k = self.unpack(x)
        N = self.N
        jk = self.j * k
        # surface points X_m = m pi / (N k): cos(j k X_m) = cos(j m pi / N)
        ang = np.outer(self.m, self.j) * np.pi / N
        cs, sn = np.cos(ang), np.sin(ang)
        ch, sh = _ratios(jk[None, :], eta[:, None], self.d)
        psi = -c * (self.d + eta) + (sh * cs) @ B
        u = -c + (ch * cs) @ (jk * B)
        w = (sh * sn) @ (jk * B)
        kin = psi + Q
        dyn = 0.5 * (u * u + w * w) + eta - R
        mean = (self.trap @ eta) / N
        height = eta[0] - eta[-1] - self.H
        res = [kin, dyn, [mean, height]]
        if self.k_fixed is None:
            res.append([k * c * self.T - 2 * np.pi])
        return np.concatenate([np.asarray(r) for r in res])

    def jacobian(self, x, step=1e-30):
        n = len(x)
        J = np.empty((n, n))
        xc = x.astype(complex)
        for i in range(n):
            xc[i] += 1j * step
            J[:, i] = self.residual(xc).imag / step
            xc[i] -= 1j * step
        return J

    def linear_guess(self, k):
        N = self.N
        t = np.tanh(k * self.d)
        c = np.sqrt(t / k)
        eta = 0.5 * self.H * np.cos(self.m * np.pi / N)
        B = np.zeros(N)
        B[0] = 0.5 * self.H * c / t
        return self.pack(eta, B, c, c * self.d, 0.5 * c * c, k)


def _newton(system, x, tol, maxiter=60, floor=1e-9):
    """Newton with backtracking. An iterate that stops improving is accepted
    if its residual is below `floor` (the round-off level of steep,
    many-mode waves)."""
    F = system.residual(x)
    err = np.max(np.abs(F))
    for it in range(maxiter):
        if not np.isfinite(err) or err < tol:
            break
        J = system.jacobian(x)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        # backtrack on the residual norm
        fnorm = np.linalg.norm(F)
        lam = 1.0
        while lam > 1e-4:
            x_try = x + lam * dx
            F_try = system.residual(x_try)
            if np.all(np.isfinite(F_try)) and np.linalg.norm(F_try) < fnorm:
                break
            lam *= 0.5
        else:
            break
        x, F = x_try, F_try
        err = np.max(np.abs(F))
    if np.isfinite(err) and err < max(tol, floor):
        return x, err
    raise StreamFunctionError(
        f"Newton iteration failed (max residual {err:.3e}); the wave may be too steep "
        "for the chosen number of modes -- increase `n_modes` or `steps`"
    )


def stream_function_solve(spec: WaveSpec, n_modes=None, steps=None, tol=1e-12) -> StreamFunctionWave:
    """Steady nonlinear wave of height spec.H by Fourier collocation.

    With a wavelength the wavenumber is fixed; with only a period the
    wavenumber is an unknown and the nonlinear dispersion relation is
    solved together with the wave. Heights above half the breaking limit
    are reached by continuation in H over `steps` increments.
    """
    if spec.k is None:
        spec = dispersion_solve(spec)
    if spec.H is None:
        raise ValueError("wave height (or relative steepness) required")
    rel = spec.H / spec.L / max_steepness(spec)
    if rel >= 1.0:
        raise StreamFunctionError(f"wave exceeds the breaking limit (eps/eps_max = {rel:.2f})")
    N = default_modes(replace(spec, rel_steepness=rel)) if n_modes is None else int(n_modes)
    if steps is None:
        steps = 1 if rel <= 0.5 else int(min(10, math.ceil(rel * 10)))
    g = spec.g
    # length unit: depth in shallow water, 1/k in deep water
    ell = spec.h if spec.kh <= 1.0 else 1.0 / spec.k
    vel = np.sqrt(g * ell)
    k_dimless = spec.k * ell
    T_dimless = spec.T * np.sqrt(g / ell)

    history = []
    x = None
    for s in range(1, steps + 1):
        H_s = spec.H / ell * s / steps
        system = _Collocation(N, H_s, k=None if spec.period_given else k_dimless, T=T_dimless,
                              depth=spec.h / ell)
        if x is None:
            x = system.linear_guess(k_dimless)
        elif len(history) >= 2:
            x = 2 * history[-1] - history[-2]
        x, err = _newton(system, x, tol)
        history.append(x)
    eta, B, c, Q, R, k = system.unpack(x)
    # cosine coefficients of the surface (DCT-I of the collocation values)
    m = np.arange(N + 1)
    trap = np.ones(N + 1)
    trap[0] = trap[-1] = 0.5
    E = (2.0 / N) * np.cos(np.outer(m, m) * np.pi / N) @ (trap * eta)
    return StreamFunctionWave(
        spec=spec,
        n_modes=N,
        k=float(k / ell),
        c=float(c * vel),
        B=B * vel * ell,
        E=E * ell,
        eta_nodes=eta * ell,
        Q=float(Q * vel * ell),
        R=float(R * g * ell),
        residual=float(err),
    )


def stream_function_eval(wave: StreamFunctionWave, x, z, t=0.0, warn=True):
    """Fields of a stream-function wave: (eta, phi, phi_eta, u, w).

    `eta` and `phi_eta` are surface values at `x`; `phi`, `u`, `w` are
    evaluated at (x, z). Points above the free surface are extrapolated
    and trigger an :class:`ExtrapolationWarning`.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    eta, phi_eta, _ = wave.surface(x, t)
    if warn and np.any(z > eta + 1e-12 * max(wave.H, 1.0)):
        warnings.warn("evaluating the stream-function wave above the free surface", ExtrapolationWarning)
    phi = wave.potential(x, z, t)
    u, w = wave.velocity(x, z, t)
    return eta, phi, phi_eta, u, w
