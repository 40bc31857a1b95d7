"""Squeezed oscillator under a thermal GKSL master equation.

Hamiltonian ``H = w a^dag a + beta a^dag^2 + beta^* a^2`` with damping rate
``gamma`` into a bath with ``n_th`` thermal photons.  The first and second
moments obey

    d<X>/dt = A <X>,         d sigma/dt = A sigma + sigma A^T + D,

with ``A = B - (gamma/2) I`` and ``D = gamma (2 n_th + 1) I``.  The
omega-derivatives ``u = d<X>/dw`` and ``Sigma = d sigma/dw`` needed by the
Gaussian QFI are evaluated as the convolution integrals

    u(t)     = int_0^t e^{A(t-s)} OMEGA <X(s)> ds
    Sigma(t) = int_0^t e^{A(t-s)} [OMEGA sigma(s) - sigma(s) OMEGA] e^{A^T(t-s)} ds

by adaptive quadrature.  :func:`moments_on_grid` provides an exact
matrix-exponential alternative for long uniform time grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from . import quadrature
from .gaussian import OMEGA, GaussianState, coherent_state, vectorize

#: Relative width of the band around omega^2 = 4|beta|^2 treated as critical.
CRITICAL_THRESHOLD = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the squeezed Markovian scenario.

    ``beta = beta_mod * exp(i beta_arg)`` is the Hamiltonian squeezing and
    ``alpha = alpha_mod * exp(i alpha_arg)`` the coherent-probe amplitude.
    """

    omega: float
    beta_mod: float = 0.0
    beta_arg: float = 0.0
    alpha_mod: float = 0.0
    alpha_arg: float = 0.0
    gamma: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        for name in ("omega", "beta_mod", "beta_arg", "alpha_mod", "alpha_arg",
                     "gamma", "n_th"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        for name in ("beta_mod", "alpha_mod", "gamma", "n_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_cartesian(cls, omega, beta_re=0.0, beta_im=0.0, alpha_re=0.0,
                       alpha_im=0.0, gamma=0.0, n_th=0.0) -> "SystemParams":
        beta = complex(beta_re, beta_im)
        alpha = complex(alpha_re, alpha_im)
        return cls(omega, abs(beta), np.angle(beta) if beta else 0.0,
                   abs(alpha), np.angle(alpha) if alpha else 0.0, gamma, n_th)

    @property
    def beta1(self) -> float:
        return self.beta_mod * math.cos(self.beta_arg)

    @property
    def beta2(self) -> float:
        return self.beta_mod * math.sin(self.beta_arg)

    def with_(self, **changes) -> "SystemParams":
        fields = dict(self.__dict__)
        fields.update(changes)
        return SystemParams(**fields)

    def initial_state(self) -> GaussianState:
        return coherent_state(self.alpha_mod, self.alpha_arg)


class DriftDiffusion(NamedTuple):
    A: np.ndarray
    D: np.ndarray


def rotating_generator(p: SystemParams) -> np.ndarray:
    """The traceless part ``B = OMEGA G`` of the drift matrix."""
    b1, b2, w = p.beta1, p.beta2, p.omega
    return np.array([[2 * b2, w - 2 * b1], [-(w + 2 * b1), -2 * b2]])


def drift_diffusion(p: SystemParams) -> DriftDiffusion:
    A = rotating_generator(p) - 0.5 * p.gamma * np.eye(2)
    D = p.gamma * (2 * p.n_th + 1) * np.eye(2)
    return DriftDiffusion(A, D)


def _regime(p: SystemParams) -> tuple[str, float]:
    disc = p.omega**2 - 4 * p.beta_mod**2
    if abs(disc) < CRITICAL_THRESHOLD * p.omega**2:
        return "critical", 0.0
    if disc > 0:
        return "oscillatory", math.sqrt(disc)
    return "hyperbolic", math.sqrt(-disc)


def propagator(p: SystemParams, t, branch: str | None = None) -> np.ndarray:
    """``exp(A t)`` in closed form; ``t`` may be an array (result ``(..., 2, 2)``).

    ``branch`` forces one of ``"oscillatory"``, ``"hyperbolic"`` or
    ``"critical"``; by default it is chosen from the sign of
    ``omega^2 - 4|beta|^2``.
    """
    t = np.asarray(t, dtype=float)
    B = rotating_generator(p)
    regime, kappa = _regime(p)
    if branch is not None:
        regime = branch
        kappa = math.sqrt(abs(p.omega**2 - 4 * p.beta_mod**2))
    if regime == "oscillatory":
        c = np.cos(kappa * t)
        s = np.sin(kappa * t) / kappa
    elif regime == "hyperbolic":
        c = np.cosh(kappa * t)
        s = np.sinh(kappa * t) / kappa
    elif regime == "critical":
        c = np.ones_like(t)
        s = t
    else:
        raise ValueError(f"unknown branch {branch!r}")
    out = c[..., None, None] * np.eye(2) + s[..., None, None] * B
    return np.exp(-0.5 * p.gamma * t)[..., None, None] * out


def _initial_panels(p: SystemParams, t: float, harmonics: int = 2) -> int:
    regime, kappa = _regime(p)
    n = 1
    if regime == "oscillatory":
        n = math.ceil(harmonics * kappa * t / math.pi)
    else:
        n = math.ceil((p.gamma + harmonics * kappa) * t / 4)
    return int(min(max(n, 1), 4000))


def evolve_mean(p: SystemParams, s0: GaussianState, t: float) -> np.ndarray:
    return propagator(p, t) @ s0.mean


def _lyapunov_inverse(A: np.ndarray) -> np.ndarray | None:
    L = np.kron(np.eye(2), A) + np.kron(A, np.eye(2))
    if np.linalg.cond(L) > 1e10:
        return None
    return np.linalg.inv(L)


def _noise_integral_nodes(p: SystemParams, s: np.ndarray) -> np.ndarray:
    """``int_0^s e^{Ar} D e^{A^T r} dr`` at every node of ``s`` (shape ``(n, 2, 2)``)."""
    A, D = drift_diffusion(p)
    if p.gamma == 0:
        return np.zeros(s.shape + (2, 2))
    Linv = _lyapunov_inverse(A)
    if Linv is None:
        # A has eigenvalues summing to zero; integrate node by node instead.
        return np.array([_noise_integral(p, float(si)) for si in s])
    E = propagator(p, s)
    rhs = E @ D @ np.swapaxes(E, -1, -2) - D
    vec_rhs = np.swapaxes(rhs, -1, -2).reshape(s.shape + (4,))
    vec_p = vec_rhs @ Linv.T
    return np.swapaxes(vec_p.reshape(s.shape + (2, 2)), -1, -2)


def _noise_integral(p: SystemParams, t: float) -> np.ndarray:
    if p.gamma == 0 or t == 0:
        return np.zeros((2, 2))
    _, D = drift_diffusion(p)

    def integrand(s):
        E = propagator(p, s)
        return E @ D @ np.swapaxes(E, -1, -2)

    return quadrature.integrate(integrand, 0.0, t,
                                initial_panels=_initial_panels(p, t))


def evolve_covariance(p: SystemParams, s0: GaussianState, t: float) -> np.ndarray:
    """``sigma(t)``: homogeneous part in closed form plus the noise integral by quadrature."""
    E = propagator(p, t)
    out = E @ s0.cov @ E.T + _noise_integral(p, float(t))
    return 0.5 * (out + out.T)


def covariance_path(p: SystemParams, s0: GaussianState, s) -> np.ndarray:
    """``sigma(s)`` at many times at once, using the Lyapunov identity
    ``A P + P A^T = e^{As} D e^{A^T s} - D`` for the noise integral ``P``."""
    s = np.asarray(s, dtype=float)
    E = propagator(p, s)
    return E @ s0.cov @ np.swapaxes(E, -1, -2) + _noise_integral_nodes(p, s)


def mean_omega_derivative(p: SystemParams, s0: GaussianState, t: float) -> np.ndarray:
    """``u(t) = d<X(t)>/d omega``."""
    t = float(t)
    if t == 0:
        return np.zeros(2)
    x0 = s0.mean

    def integrand(s):
        inner = OMEGA @ (propagator(p, s) @ x0)[..., None]
        return (propagator(p, t - s) @ inner)[..., 0]

    return quadrature.integrate(integrand, 0.0, t,
                                initial_panels=_initial_panels(p, t))


def cov_omega_derivative(p: SystemParams, s0: GaussianState, t: float) -> np.ndarray:
    """``Sigma(t) = d sigma(t)/d omega``."""
    t = float(t)
    commutes = np.allclose(OMEGA @ s0.cov, s0.cov @ OMEGA, rtol=0, atol=0)
    if t == 0 or (p.beta_mod == 0 and commutes):
        return np.zeros((2, 2))

    def integrand(s):
        sig = covariance_path(p, s0, s)
        source = OMEGA @ sig - sig @ OMEGA
        E = propagator(p, t - s)
        return E @ source @ np.swapaxes(E, -1, -2)

    out = quadrature.integrate(integrand, 0.0, t,
                               initial_panels=_initial_panels(p, t, harmonics=3))
    return 0.5 * (out + out.T)


class MomentGrid(NamedTuple):
    t: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    u: np.ndarray
    dcov: np.ndarray


def _augmented_generators(p: SystemParams):
    A, D = drift_diffusion(p)
    first = np.zeros((4, 4))
    first[:2, :2] = A
    first[2:, :2] = OMEGA
    first[2:, 2:] = A

    I2 = np.eye(2)
    L = np.kron(I2, A) + np.kron(A, I2)
    K = np.kron(I2, OMEGA) - np.kron(OMEGA.T, I2)
    second = np.zeros((9, 9))
    second[:4, :4] = L
    second[:4, 8] = vectorize(D)
    second[4:8, :4] = K
    second[4:8, 4:8] = L
    return first, second


def moments_on_grid(p: SystemParams, s0: GaussianState, t_grid) -> MomentGrid:
    """Exact moments and omega-derivatives on a uniform time grid.

    ``(<X>, u)`` and ``(vec sigma, vec Sigma, 1)`` obey autonomous linear
    ODEs, so one matrix exponential per step size advances them exactly.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    steps = np.diff(t)
    if t.size > 1:
        dt = (t[-1] - t[0]) / (t.size - 1)
        if np.any(steps <= 0) or not np.allclose(steps, dt, rtol=1e-9, atol=0):
            raise ValueError("t_grid must be uniform and increasing")
    else:
        dt = 0.0

    first, second = _augmented_generators(p)
    y = np.concatenate([s0.mean, np.zeros(2)])
    z = np.concatenate([vectorize(s0.cov), np.zeros(4), [1.0]])
    if t[0] != 0:
        y = expm(first * t[0]) @ y
        z = expm(second * t[0]) @ z
    step1 = expm(first * dt)
    step2 = expm(second * dt)

    ys = np.empty((t.size, 4))
    zs = np.empty((t.size, 9))
    ys[0], zs[0] = y, z
    for k in range(1, t.size):
        y = step1 @ y
        z = step2 @ z
        ys[k], zs[k] = y, z

    cov = zs[:, :4].reshape(-1, 2, 2).transpose(0, 2, 1)
    dcov = zs[:, 4:8].reshape(-1, 2, 2).transpose(0, 2, 1)
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    dcov = 0.5 * (dcov + dcov.transpose(0, 2, 1))
    return MomentGrid(t, ys[:, :2], cov, ys[:, 2:], dcov)
