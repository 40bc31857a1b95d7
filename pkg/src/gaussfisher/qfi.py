"""Quantum Fisher information for frequency estimation with Gaussian probes.

The general route feeds ``u = d<X>/dw`` and ``Sigma = d sigma/dw`` into

    F = 2 u^T sigma^{-1} u + 1/2 vec(Sigma)^T M^+ vec(Sigma),
    M = sigma (x) sigma - OMEGA (x) OMEGA.

``M`` is singular for pure states, where ``vec(Sigma)`` still lies in its
range, so the Moore-Penrose pseudo-inverse is used throughout.  The
remaining functions are the closed-form and perturbative expressions for
special regimes of the squeezed Markovian model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularCovarianceError
from .gaussian import OMEGA, GaussianState, vectorize
from .markovian import (
    SystemParams,
    cov_omega_derivative,
    evolve_covariance,
    mean_omega_derivative,
)

PINV_RCOND = 1e-12
NEGATIVE_CLAMP = 1e-12
_OMEGA_KRON = np.kron(OMEGA, OMEGA)


@dataclass(frozen=True)
class QfiResult:
    t: float
    qfi: float
    method: str = "general"


def _clamp(value):
    value = np.asarray(value, dtype=float)
    return np.where((value < 0) & (value >= -NEGATIVE_CLAMP), 0.0, value)


def lyapunov_metric(sigma) -> np.ndarray:
    """``M = sigma (x) sigma - OMEGA (x) OMEGA``; broadcasts over leading axes."""
    sigma = np.asarray(sigma, dtype=float)
    outer = np.einsum("...ij,...kl->...ikjl", sigma, sigma)
    return outer.reshape(sigma.shape[:-2] + (4, 4)) - _OMEGA_KRON


def qfi_gaussian(u, sigma, big_sigma) -> float:
    """Gaussian QFI from the derivatives of the first and second moments."""
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    big_sigma = np.asarray(big_sigma, dtype=float)
    if np.linalg.det(sigma) < 1e-12:
        raise SingularCovarianceError(f"covariance matrix is singular: {sigma}")

    value = 2.0 * u @ np.linalg.solve(sigma, u)
    if np.any(big_sigma != 0):
        v = vectorize(big_sigma)
        Mp = np.linalg.pinv(lyapunov_metric(sigma), rcond=PINV_RCOND)
        value += 0.5 * v @ Mp @ v
    return float(_clamp(value))


def qfi_gaussian_batch(u, sigma, big_sigma) -> np.ndarray:
    """Vectorised :func:`qfi_gaussian` over a leading batch axis."""
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    big_sigma = np.asarray(big_sigma, dtype=float)
    if np.any(np.linalg.det(sigma) < 1e-12):
        raise SingularCovarianceError("covariance matrix is singular")
    mean_term = 2.0 * np.einsum("ni,ni->n", u, np.linalg.solve(sigma, u[..., None])[..., 0])
    v = np.swapaxes(big_sigma, -1, -2).reshape(-1, 4)
    Mp = np.linalg.pinv(lyapunov_metric(sigma), rcond=PINV_RCOND)
    cov_term = 0.5 * np.einsum("ni,nij,nj->n", v, Mp, v)
    cov_term = np.where(np.any(v != 0, axis=1), cov_term, 0.0)
    return _clamp(mean_term + cov_term)


def _require_beta_zero(p: SystemParams):
    if p.beta_mod != 0:
        raise DomainError("closed form requires beta = 0")


def qfi_closed_beta_zero(p: SystemParams, t):
    """``4|alpha|^2 t^2 / (2n(e^{gamma t} - 1) + e^{gamma t})``."""
    _require_beta_zero(p)
    t = np.asarray(t, dtype=float)
    g = p.gamma * t
    out = 4 * p.alpha_mod**2 * t**2 / (2 * p.n_th * np.expm1(g) + np.exp(g))
    return float(out) if out.ndim == 0 else out


def qfi_short_time(p: SystemParams, t):
    """Leading short-time behaviour including the cubic squeezing correction."""
    t = np.asarray(t, dtype=float)
    phase = p.beta_arg - 2 * p.alpha_arg
    out = 4 * p.alpha_mod**2 * t**2 * (
        1 - p.gamma * t * (1 + 2 * p.n_th) + 4 * p.beta_mod * t * math.sin(phase)
    )
    return float(out) if out.ndim == 0 else out


def qfi_small_beta_unitary(p: SystemParams, t, legacy_second_order: bool = False):
    """Unitary (gamma = 0) QFI expanded to second order in ``|beta|``.

    The ``|beta|^2`` coefficient was checked against an exact Fock-space
    computation.  ``legacy_second_order=True`` restores an older variant of
    that coefficient whose ``|alpha|^2`` part is off by
    ``4|beta|^2|alpha|^2 (2x^2 + 6x^2 cos 2x - 4x sin 2x) / w^4``, ``x = wt``.
    """
    if p.gamma != 0:
        raise DomainError("small-beta expansion is only valid for gamma = 0")
    t = np.asarray(t, dtype=float)
    w, b, a2 = p.omega, p.beta_mod, p.alpha_mod**2
    phase = p.beta_arg - 2 * p.alpha_arg
    wt = w * t

    zeroth = 4 * a2 * t**2
    first = 16 * t * a2 * b / w**2 * (
        wt * math.cos(phase) - np.sin(wt) * np.cos(phase + wt)
    )
    if legacy_second_order:
        second = 4 * b**2 / w**4 * (
            1 + 2 * a2 + 2 * wt**2 * (1 + 5 * a2)
            - np.cos(2 * wt) * (1 + a2 * (2 + 6 * wt**2))
            - 2 * wt * np.sin(2 * wt) * (1 + 2 * a2)
        )
    else:
        second = 4 * b**2 / w**4 * (
            1 + 2 * a2 + 2 * wt**2 * (1 + 6 * a2)
            - np.cos(2 * wt) * (1 + 2 * a2)
            - 2 * wt * np.sin(2 * wt) * (1 + 4 * a2)
        )
    out = zeroth + first + second
    return float(out) if out.ndim == 0 else out


def qfi_markovian(p: SystemParams, t: float, s0: GaussianState | None = None) -> QfiResult:
    """Full pipeline: quadrature derivatives fed to :func:`qfi_gaussian`."""
    if t < 0:
        raise ValueError("t must be non-negative")
    s0 = p.initial_state() if s0 is None else s0
    sigma = evolve_covariance(p, s0, t)
    u = mean_omega_derivative(p, s0, t)
    big_sigma = cov_omega_derivative(p, s0, t)
    return QfiResult(float(t), qfi_gaussian(u, sigma, big_sigma), "general")
