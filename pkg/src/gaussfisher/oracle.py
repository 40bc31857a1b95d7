"""Brute-force cross-checks.

Nothing here imports the closed-form or quadrature code it is meant to
validate: drift matrices, rates and Fisher-information formulas are rebuilt
from scratch, and the comparison against the library happens only in
:func:`run_verification`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, special
from scipy.linalg import expm

from .gaussian import GaussianState


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    analytic: float
    oracle: float
    rel_error: float
    tolerance: float
    passed: bool


def compare(quantity: str, analytic, oracle, tolerance: float,
            abs_floor: float = 1e-12) -> OracleReport:
    """Relative (norm-wise for arrays) discrepancy, absolute when ``analytic`` is ~0."""
    a = np.atleast_1d(np.asarray(analytic, dtype=float)).ravel()
    o = np.atleast_1d(np.asarray(oracle, dtype=float)).ravel()
    scale = float(np.linalg.norm(a))
    diff = float(np.linalg.norm(a - o))
    err = diff / scale if scale > abs_floor else diff
    return OracleReport(quantity, scale if a.size > 1 else float(a[0]),
                        float(np.linalg.norm(o)) if o.size > 1 else float(o[0]),
                        err, tolerance, bool(err <= tolerance))


# --- Markovian moments by Runge-Kutta ---------------------------------------

def _drift(omega, beta_mod, beta_arg, gamma):
    b1 = beta_mod * math.cos(beta_arg)
    b2 = beta_mod * math.sin(beta_arg)
    G = np.array([[omega + 2 * b1, 2 * b2], [2 * b2, omega - 2 * b1]])
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return J @ G - 0.5 * gamma * np.eye(2)


def ode_moments(p, s0: GaussianState, t: float, dt: float) -> GaussianState:
    """Fixed-step RK4 for ``dX/dt = A X`` and ``d sigma/dt = A sigma + sigma A^T + D``.

    ``p`` is any object with ``omega, beta_mod, beta_arg, gamma, n_th``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = _drift(p.omega, p.beta_mod, p.beta_arg, p.gamma)
    D = p.gamma * (2 * p.n_th + 1) * np.eye(2)
    steps = max(int(math.ceil(t / dt - 1e-12)), 1) if t > 0 else 0
    h = t / steps if steps else 0.0

    def fx(x):
        return A @ x

    def fs(s):
        return A @ s + s @ A.T + D

    x = np.array(s0.mean, dtype=float)
    s = np.array(s0.cov, dtype=float)
    for _ in range(steps):
        k1, l1 = fx(x), fs(s)
        k2, l2 = fx(x + 0.5 * h * k1), fs(s + 0.5 * h * l1)
        k3, l3 = fx(x + 0.5 * h * k2), fs(s + 0.5 * h * l2)
        k4, l4 = fx(x + h * k3), fs(s + h * l3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
    return GaussianState(x, 0.5 * (s + s.T))


def fd_omega(moments: Callable[[float], tuple], omega: float, h: float):
    """Central differences of ``moments(omega) -> (mean, cov)``, Richardson
    extrapolated over steps ``h`` and ``h/2``."""
    if h <= 0:
        raise ValueError("h must be positive")

    def central(step):
        mp, cp = moments(omega + step)
        mm, cm = moments(omega - step)
        return ((np.asarray(mp) - np.asarray(mm)) / (2 * step),
                (np.asarray(cp) - np.asarray(cm)) / (2 * step))

    u1, c1 = central(h)
    u2, c2 = central(h / 2)
    return (4 * u2 - u1) / 3, (4 * c2 - c1) / 3


# --- QBM coefficients from their defining double integrals -------------------

class NestedCoefficients(NamedTuple):
    gamma_num: float
    delta_num: float
    gamma_tail_bound: float
    delta_tail_bound: float


def _lorentz_drude(lam, cutoff):
    return 2 * lam / np.pi * cutoff**2 / (cutoff**2 + lam**2)


def _thermal_weight(lam, cutoff, kT):
    """``J(lam) coth(lam / 2kT)``, finite at ``lam = 0``."""
    x = lam / (2 * kT)
    x_coth = 1.0 if x < 1e-8 else x / math.tanh(x)
    return 2 / np.pi * cutoff**2 / (cutoff**2 + lam**2) * 2 * kT * x_coth


def nested_quadrature_coefficients(p, t: float, cut_factor: float = 50.0) -> NestedCoefficients:
    """``gamma(t)`` and ``Delta(t)`` straight from their double-integral
    definitions, with the full ``coth`` thermal factor.

    Outer integral over ``s`` and inner integral over the bath frequency,
    truncated at ``cut_factor * max(lambda_c, omega)``.  For ``gamma`` the
    ``2 lambda_c^2 / (pi lam)`` tail beyond the cut is added analytically
    through the sine integral; the reported bounds cover what is left out.
    """
    t = float(t)
    xi, lc, w = p.xi, p.lambda_c, p.omega
    kT = p.temp_ratio * lc
    cut = cut_factor * max(lc, w)
    if t == 0:
        return NestedCoefficients(0.0, 0.0, 0.0, 0.0)

    quad_kw = dict(limit=400, epsabs=1e-14, epsrel=1e-11)

    def inner_sin(s):
        head, _ = integrate.quad(_lorentz_drude, 0.0, cut, args=(lc,), weight="sin",
                                 wvar=s, **quad_kw)
        tail = 2 * lc**2 / np.pi * (np.pi / 2 - special.sici(cut * s)[0])
        return head + tail

    def inner_cos(s):
        head, _ = integrate.quad(_thermal_weight, 0.0, cut, args=(lc, kT), weight="cos",
                                 wvar=s, **quad_kw)
        return head

    outer_kw = dict(limit=400, epsabs=1e-13, epsrel=1e-10)
    with warnings.catch_warnings():
        # quad flags round-off once it hits the double-precision floor
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        gamma_num, _ = integrate.quad(lambda s: math.sin(w * s) * inner_sin(s), 0.0, t, **outer_kw)
        delta_num, _ = integrate.quad(lambda s: math.cos(w * s) * inner_cos(s), 0.0, t, **outer_kw)

    gamma_tail = xi**2 * t * lc**4 / (np.pi * cut**2)
    delta_tail = xi**2 * 2 * lc**2 / np.pi * (2 * kT / cut + 1) / (cut - w)
    return NestedCoefficients(xi**2 * gamma_num, xi**2 * delta_num, gamma_tail, delta_tail)


# --- Fisher information of Gaussian outcomes ---------------------------------

def _gaussian_logpdf(x, mean, cov):
    diff = x - mean
    inv = np.linalg.inv(cov)
    quad = np.einsum("...i,ij,...j->...", diff, inv, diff)
    return -0.5 * (quad + math.log(np.linalg.det(cov)) + 2 * math.log(2 * math.pi))


def likelihood_curvature_cfi(sigma_out, mean_deriv, sigma_out_deriv,
                             eps: float = 1e-5, order: int = 8) -> float:
    """Fisher information ``E[(d log p)^2]`` of a bivariate Gaussian family
    whose mean and covariance move along ``mean_deriv`` and ``sigma_out_deriv``.

    The score is obtained by central differences of the log-density and its
    square is averaged by tensor Gauss-Hermite quadrature, which is exact for
    the quartic polynomial that results.
    """
    S = np.asarray(sigma_out, dtype=float)
    du = np.asarray(mean_deriv, dtype=float)
    dS = np.asarray(sigma_out_deriv, dtype=float)
    L = np.linalg.cholesky(S)
    y, wts = hermgauss(order)
    Y = np.stack(np.meshgrid(y, y, indexing="ij"), axis=-1).reshape(-1, 2)
    W = np.outer(wts, wts).ravel() / np.pi
    X = math.sqrt(2.0) * Y @ L.T
    score = (_gaussian_logpdf(X, eps * du, S + eps * dS)
             - _gaussian_logpdf(X, -eps * du, S - eps * dS)) / (2 * eps)
    return float(np.sum(W * score**2))


# --- Pure-state QFI in a truncated Fock space --------------------------------

def fock_pure_state_qfi(omega, beta, alpha, t, dim: int = 60, h: float = 1e-5) -> float:
    """QFI of ``exp(-iHt)|alpha>`` for ``H = w a^dag a + beta a^dag^2 + beta^* a^2``,
    from ``4 (<d psi|d psi> - |<psi|d psi>|^2)`` with a central difference in ``w``."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ad = a.T
    ket = np.zeros(dim, dtype=complex)
    ket[0] = 1.0
    for k in range(1, dim):
        ket[k] = ket[k - 1] * alpha / math.sqrt(k)
    ket /= np.linalg.norm(ket)

    def evolve(w):
        H = w * ad @ a + beta * ad @ ad + np.conj(beta) * a @ a
        return expm(-1j * H * t) @ ket

    psi = evolve(omega)
    dpsi = (evolve(omega + h) - evolve(omega - h)) / (2 * h)
    return float(4 * (np.vdot(dpsi, dpsi) - abs(np.vdot(psi, dpsi)) ** 2).real)


# --- Verification batch -------------------------------------------------------

def run_verification() -> list[OracleReport]:
    """Compare the library against every oracle above at the reference parameters."""
    from .dyne import DyneSetting, cfi_general_dyne, markovian_derivatives
    from .markovian import (SystemParams, cov_omega_derivative, evolve_covariance,
                            evolve_mean, mean_omega_derivative, propagator)
    from .gaussian import coherent_state
    from .qbm import QbmParams, delta_of_t, gamma_of_t, qfi_qbm
    from .qfi import qfi_closed_beta_zero, qfi_markovian

    reports = []
    squeezed = SystemParams.from_cartesian(2.1, 0.3, -0.5, 0.0, 1.0, gamma=0.05, n_th=0.1)
    s0 = squeezed.initial_state()

    for t in (1.0, 2.0):
        ode = ode_moments(squeezed, s0, t, 1e-4)
        reports.append(compare(f"mean vs RK4 (t={t:g})", evolve_mean(squeezed, s0, t),
                               ode.mean, 1e-8))
        reports.append(compare(f"covariance vs RK4 (t={t:g})",
                               evolve_covariance(squeezed, s0, t), ode.cov, 1e-7))
    basis = GaussianState(np.array([1.0, 0.0]), np.eye(2))
    prop = propagator(squeezed, 1.0)
    ode_col = ode_moments(squeezed, basis, 1.0, 1e-4).mean
    reports.append(compare("propagator column vs RK4 (t=1)", prop[:, 0], ode_col, 1e-8))

    def rk4_moments(t):
        def moments(w):
            state = ode_moments(squeezed.with_(omega=w), s0, t, 1e-3)
            return state.mean, state.cov
        return moments

    for t in (1.0, 2.0):
        u_fd, c_fd = fd_omega(rk4_moments(t), squeezed.omega, 1e-5 * squeezed.omega)
        reports.append(compare(f"d<X>/dw integral vs finite difference (t={t:g})",
                               mean_omega_derivative(squeezed, s0, t), u_fd, 1e-6))
        reports.append(compare(f"d sigma/dw integral vs finite difference (t={t:g})",
                               cov_omega_derivative(squeezed, s0, t), c_fd, 1e-6))

    nm = QbmParams(7.0, 0.3, 1.0, 1000.0)
    for t in (0.5, 1.0, 2.0):
        nested = nested_quadrature_coefficients(nm, t)
        reports.append(compare(f"gamma(t) vs nested quadrature (t={t:g})",
                               gamma_of_t(nm, t), nested.gamma_num, 1e-6))
        reports.append(compare(f"Delta(t) vs nested quadrature, full coth (t={t:g})",
                               delta_of_t(nm, t), nested.delta_num, 1e-2))

    # Convention sensitivity of the bath-model mean decay; informational only.
    probe = coherent_state(0.1)
    for t in (1.0, 5.0):
        half = qfi_qbm(nm, probe, t)
        full = qfi_qbm(nm, probe, t, mean_decay="full")
        reports.append(OracleReport(
            f"bath-model QFI, mean decay exp(-Gamma) vs exp(-Gamma/2) (t={t:g}, sensitivity only)",
            half, full, abs(full - half) / half, math.inf, True))

    u, sig, dsig = markovian_derivatives(squeezed, 1.0)
    het = cfi_general_dyne(u, sig, dsig, DyneSetting.heterodyne())
    curv = likelihood_curvature_cfi(0.5 * (sig + np.eye(2)), u, 0.5 * dsig)
    reports.append(compare("heterodyne CFI vs likelihood curvature (t=1)", het, curv, 1e-4))

    for gamma, n in ((0.0, 0.0), (0.05, 0.0), (0.05, 0.1)):
        p = SystemParams(2.1, 0.0, 0.0, 1.0, math.pi / 2, gamma, n)
        for t in (10.0, 40.0):
            reports.append(compare(f"QFI pipeline vs beta=0 closed form (gamma={gamma:g}, n={n:g}, t={t:g})",
                                   qfi_markovian(p, t).qfi, qfi_closed_beta_zero(p, t), 1e-9))

    unitary = SystemParams(2.1, 0.5, -math.pi / 2, 1.0, math.pi / 2)
    reports.append(compare("unitary squeezed QFI vs Fock-space pure state (t=1)",
                           qfi_markovian(unitary, 1.0).qfi,
                           fock_pure_state_qfi(2.1, -0.5j, 1j, 1.0), 1e-7))
    return reports
