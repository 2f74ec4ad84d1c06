"""Error norms, convergence rates, harmonic decomposition, probe statistics
and parallel-efficiency metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RankDeficientError",
    "ConvergenceRecord",
    "ScalingRecord",
    "HarmonicFit",
    "inf_error",
    "convergence_rate",
    "harmonic_fit",
    "probe_stats",
    "scaling_metrics",
    "reflection_coefficient",
    "transient_window",
    "discrete_energy",
]


class RankDeficientError(ValueError):
    pass


def inf_error(numeric, reference):
    """max |reference - numeric|; `reference` may be an array or a callable
    of no arguments returning one."""
    ref = reference() if callable(reference) else reference
    return float(np.max(np.abs(np.asarray(ref) - np.asarray(numeric))))


@dataclass
class ConvergenceRecord:
    """Error samples against a resolution parameter (h_max or p)."""

    parameter: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    norm: str = "inf"
    kind: str = "h"
    label: str = ""

    def add(self, parameter, error):
        self.parameter.append(float(parameter))
        self.errors.append(float(error))

    def validate(self):
        e = np.asarray(self.errors)
        if np.any(e < 0):
            raise ValueError("errors must be non-negative")
        if self.kind == "h" and np.any(np.diff(self.parameter) >= 0):
            raise ValueError("h_max values must be strictly decreasing")
        return self

    def rows(self):
        rates = convergence_rate(self) if len(self.errors) > 1 else []
        out = []
        for i, (h, e) in enumerate(zip(self.parameter, self.errors)):
            out.append((self.label, self.kind, h, e, rates[i - 1] if i > 0 else float("nan")))
        return out


def convergence_rate(record: ConvergenceRecord):
    """Pairwise observed orders log(e1/e2)/log(h1/h2).

    For p-records the "order" is the decay per unit p, log(e1/e2)/(p2-p1).
    A pair involving a zero error yields NaN (rate undefined).
    """
    h = np.asarray(record.parameter, dtype=float)
    e = np.asarray(record.errors, dtype=float)
    if len(e) < 2:
        raise ValueError("need at least two samples")
    rates = []
    for i in range(len(e) - 1):
        if e[i] == 0 or e[i + 1] == 0:
            rates.append(float("nan"))
        elif record.kind == "p":
            rates.append(math.log(e[i] / e[i + 1]) / (h[i + 1] - h[i]))
        else:
            rates.append(math.log(e[i] / e[i + 1]) / math.log(h[i] / h[i + 1]))
    return rates


@dataclass
class HarmonicFit:
    mean: float
    amplitudes: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    residual: float


def harmonic_fit(t, eta, T, n_max=4):
    """Least-squares fit of eta(t) to mean + sum_n a_n cos(2 pi n t/T) + b_n sin(...).

    Returns a :class:`HarmonicFit` with A_n = sqrt(a_n^2 + b_n^2).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(eta, dtype=float)
    ncol = 2 * n_max + 1
    if len(t) < ncol:
        raise RankDeficientError(f"{len(t)} samples cannot determine {ncol} coefficients")
    X = np.empty((len(t), ncol))
    X[:, 0] = 1.0
    for n in range(1, n_max + 1):
        arg = 2 * np.pi * n * t / T
        X[:, 2 * n - 1] = np.cos(arg)
        X[:, 2 * n] = np.sin(arg)
    coef, res, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < ncol:
        raise RankDeficientError(f"design matrix rank {rank} < {ncol}; sampling too sparse or too short")
    a = coef[1::2]
    b = coef[2::2]
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return HarmonicFit(float(coef[0]), np.hypot(a, b), a, b, resid)


def transient_window(t, T, start_periods=15.0, end_periods=None):
    """Boolean mask of samples with start_periods*T <= t (<= end_periods*T)."""
    t = np.asarray(t)
    mask = t >= start_periods * T - 1e-12
    if end_periods is not None:
        mask &= t <= end_periods * T + 1e-12
    return mask


def probe_stats(eta):
    """(eta_m, eta_v): maximum elevation and max-minus-min variation."""
    eta = np.asarray(eta, dtype=float)
    if eta.size == 0:
        raise ValueError("empty series")
    return float(eta.max()), float(eta.max() - eta.min())


@dataclass
class ScalingRecord:
    workers: list
    times: list
    baseline_workers: int | None = None
    baseline_time: float | None = None
    kind: str = "strong"
    routine: str = "LaplaceSolve"

    def __post_init__(self):
        if any(t <= 0 for t in self.times):
            raise ValueError("times must be positive")
        if self.baseline_workers is None:
            i = int(np.argmin(self.workers))
            self.baseline_workers = self.workers[i]
            self.baseline_time = self.times[i]


def scaling_metrics(record: ScalingRecord):
    """Dict with workers, speedup, gamma_s (strong) and gamma_w (weak).

    gamma_s = T_b N_b / (T_N N) and gamma_w = T_b / T_N; speedup = T_b / T_N.
    """
    N = np.asarray(record.workers, dtype=float)
    T = np.asarray(record.times, dtype=float)
    Tb, Nb = float(record.baseline_time), float(record.baseline_workers)
    return {
        "workers": N,
        "time": T,
        "speedup": Tb / T,
        "ideal": N / Nb,
        "gamma_s": Tb * Nb / (T * N),
        "gamma_w": Tb / T,
    }


def reflection_coefficient(t, eta1, eta2, x1, x2, T, k):
    """Reflected-to-incident amplitude ratio from two probes.

    Fits the first harmonic at each probe and separates the incident and
    reflected components of a linear standing-wave pattern (Goda-Suzuki).
    The probe spacing must not be a multiple of half a wavelength.
    """
    f1 = harmonic_fit(t, eta1, T, 1)
    f2 = harmonic_fit(t, eta2, T, 1)
    # complex amplitude Z with eta = Re(Z exp(-i omega t)); cos term a, sin term b
    Z1 = f1.cos_coeffs[0] + 1j * f1.sin_coeffs[0]
    Z2 = f2.cos_coeffs[0] + 1j * f2.sin_coeffs[0]
    # eta = Re[(I e^{ikx} + R e^{-ikx}) e^{-i omega t}]
    M = np.array([[np.exp(1j * k * x1), np.exp(-1j * k * x1)], [np.exp(1j * k * x2), np.exp(-1j * k * x2)]])
    if abs(np.linalg.det(M)) < 1e-8:
        raise RankDeficientError("probe spacing is a multiple of half a wavelength")
    I, R = np.linalg.solve(M, np.array([Z1, Z2]))
    return float(abs(R) / abs(I)), float(abs(I)), float(abs(R))


def discrete_energy(mass, eta, phi_eta, w_eta, g=9.82):
    """Linear energy surrogate 1/2 <g eta, eta> + 1/2 <phi_eta, w_eta> in the surface mass inner product."""
    return 0.5 * g * float(eta @ (mass @ eta)) + 0.5 * float(phi_eta @ (mass @ w_eta))
