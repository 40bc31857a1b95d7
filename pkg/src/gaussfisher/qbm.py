"""Quantum Brownian motion: a probe oscillator weakly coupled to an Ohmic
bath with Lorentz-Drude cutoff, in the secular time-local description.

The reduced dynamics is fixed by the dissipation and diffusion coefficients
``gamma(t)`` and ``Delta(t)``; their sums and differences
``Gamma_pm = Delta +- gamma`` are the instantaneous GKSL rates, and any
interval where one of them is negative breaks CP-divisibility.  Units are
hbar = k_B = 1 and temperature enters as ``temp_ratio = k_B T / Lambda_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import quadrature
from .dyne import DyneSetting, cfi_general_dyne, optimize_dyne, CfiResult
from .gaussian import GaussianState, rotation
from .qfi import qfi_gaussian

KERNEL_EPSABS = 1e-13
KERNEL_EPSREL = 1e-12
FD_REL_STEP = 1e-5
BISECTION_TOL = 1e-8


@dataclass(frozen=True)
class QbmParams:
    omega: float
    xi: float
    lambda_c: float
    temp_ratio: float

    def __post_init__(self):
        for name in ("omega", "xi", "lambda_c", "temp_ratio"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
            object.__setattr__(self, name, value)

    @property
    def r(self) -> float:
        """Cutoff-to-system frequency ratio; small values mean long bath memory."""
        return self.lambda_c / self.omega

    @property
    def kT(self) -> float:
        return self.temp_ratio * self.lambda_c

    @property
    def gamma_markov(self) -> float:
        r2 = self.r**2
        return self.xi**2 * self.omega * r2 / (r2 + 1)

    @property
    def delta_markov(self) -> float:
        r2 = self.r**2
        return 2 * self.xi**2 * self.kT * r2 / (r2 + 1)

    def with_(self, **changes) -> "QbmParams":
        fields = dict(self.__dict__)
        fields.update(changes)
        return QbmParams(**fields)


class RateSample(NamedTuple):
    t: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    rate_plus: np.ndarray
    rate_minus: np.ndarray


def spectral_density(freq, lambda_c: float):
    """Ohmic spectral density with Lorentz-Drude cutoff."""
    freq = np.asarray(freq, dtype=float)
    out = 2 * freq / np.pi * lambda_c**2 / (lambda_c**2 + freq**2)
    return float(out) if out.ndim == 0 else out


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def gamma_of_t(p: QbmParams, t):
    """Dissipation coefficient; tends to ``p.gamma_markov`` for ``t >> 1/lambda_c``."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-p.lambda_c * t)
    wt = p.omega * t
    out = p.gamma_markov * (1 - decay * np.cos(wt) - p.r * decay * np.sin(wt))
    return _scalar(out)


def delta_of_t(p: QbmParams, t):
    """High-temperature diffusion coefficient; tends to ``p.delta_markov``."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-p.lambda_c * t)
    wt = p.omega * t
    out = p.delta_markov * (1 - decay * (np.cos(wt) - np.sin(wt) / p.r))
    return _scalar(out)


def rates(p: QbmParams, t) -> RateSample:
    t = np.asarray(t, dtype=float)
    g = np.asarray(gamma_of_t(p, t))
    d = np.asarray(delta_of_t(p, t))
    return RateSample(t, g, d, d + g, d - g)


def _min_rate(p: QbmParams):
    def f(t):
        s = rates(p, t)
        return np.minimum(s.rate_plus, s.rate_minus)
    return f


def _bisect(f, a: float, b: float, fa: float, tol: float) -> float:
    """Locate the sign change of ``f`` in ``[a, b]`` (``f(a)`` has sign of ``fa``)."""
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = float(f(m))
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def cp_divisibility_violations(
    p: QbmParams | None,
    t_grid,
    rate_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = BISECTION_TOL,
) -> list[tuple[float, float]]:
    """Maximal intervals of ``t_grid`` on which ``min(Gamma_+, Gamma_-) < 0``.

    ``rate_fn`` replaces the QBM rates by any vectorised function returning
    the smaller of the two rates (used for synthetic checks).
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be increasing")
    f = rate_fn if rate_fn is not None else _min_rate(p)
    values = np.asarray(f(t), dtype=float)
    negative = values < 0

    out = []
    start = t[0] if negative[0] else None
    for k in range(1, t.size):
        if negative[k] and not negative[k - 1]:
            start = _bisect(f, t[k - 1], t[k], values[k - 1], tol)
        elif not negative[k] and negative[k - 1]:
            out.append((float(start), _bisect(f, t[k - 1], t[k], values[k - 1], tol)))
            start = None
    if start is not None:
        out.append((float(start), float(t[-1])))
    return out


def violation_length(intervals) -> float:
    return float(sum(b - a for a, b in intervals))


def gamma_integral_closed(p: QbmParams, t):
    """``Gamma(t) = 2 int_0^t gamma(s) ds`` via the elementary antiderivative."""
    t = np.asarray(t, dtype=float)
    lam, w = p.lambda_c, p.omega
    decay = np.exp(-lam * t)
    norm = lam**2 + w**2
    int_cos = (lam - decay * (lam * np.cos(w * t) - w * np.sin(w * t))) / norm
    int_sin = (w - decay * (lam * np.sin(w * t) + w * np.cos(w * t))) / norm
    out = 2 * p.gamma_markov * (t - int_cos - p.r * int_sin)
    return _scalar(out)


class MemoryKernels(NamedTuple):
    big_gamma: float
    delta_gamma: float
    t_approx: float


def _kernel_panels(p: QbmParams, t: float) -> int:
    return int(min(max(math.ceil(p.omega * t / math.pi), 1), 4000))


def memory_kernels(p: QbmParams, t: float) -> MemoryKernels:
    """``Gamma(t)``, ``Delta_Gamma(t) = int e^{Gamma(s)} Delta(s) ds`` and ``int_0^t Delta``."""
    t = float(t)
    if t == 0:
        return MemoryKernels(0.0, 0.0, 0.0)
    n = _kernel_panels(p, t)
    kw = dict(epsabs=KERNEL_EPSABS, epsrel=KERNEL_EPSREL, initial_panels=n)
    stacked = quadrature.integrate(
        lambda s: np.stack([
            2 * np.asarray(gamma_of_t(p, s)),
            np.exp(gamma_integral_closed(p, s)) * delta_of_t(p, s),
            np.asarray(delta_of_t(p, s)),
        ], axis=-1),
        0.0, t, **kw,
    )
    return MemoryKernels(float(stacked[0]), float(stacked[1]), float(stacked[2]))


def _gamma_and_noise(p: QbmParams, t: float, exact_noise: bool):
    t = float(t)
    if t == 0:
        return 0.0, 0.0
    kw = dict(epsabs=KERNEL_EPSABS, epsrel=KERNEL_EPSREL,
              initial_panels=_kernel_panels(p, t))
    if exact_noise:
        k = memory_kernels(p, t)
        return k.big_gamma, math.exp(-k.big_gamma) * k.delta_gamma
    both = quadrature.integrate(
        lambda s: np.stack([2 * np.asarray(gamma_of_t(p, s)),
                            np.asarray(delta_of_t(p, s))], axis=-1),
        0.0, t, **kw,
    )
    return float(both[0]), float(both[1])


def evolve_qbm(
    p: QbmParams,
    s0: GaussianState,
    t: float,
    mean_decay: str = "half",
    exact_noise: bool = False,
) -> GaussianState:
    """Moments after time ``t``: ``<X> = e^{-k Gamma} R(wt) <X(0)>``,
    ``sigma = e^{-Gamma} sigma(0) + T(t) I``.

    ``mean_decay="half"`` uses ``k = 1/2`` (amplitude decays at half the
    rate of the covariance), ``"full"`` uses ``k = 1``.  ``T`` is the
    weak-coupling ``int_0^t Delta`` unless ``exact_noise`` is set, in which
    case ``T = e^{-Gamma} Delta_Gamma``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if mean_decay not in ("half", "full"):
        raise ValueError("mean_decay must be 'half' or 'full'")
    big_gamma, noise = _gamma_and_noise(p, t, exact_noise)
    k = 0.5 if mean_decay == "half" else 1.0
    mean = math.exp(-k * big_gamma) * (rotation(p.omega * t) @ s0.mean)
    cov = math.exp(-big_gamma) * s0.cov + noise * np.eye(2)
    return GaussianState(mean, cov)


class QbmDerivatives(NamedTuple):
    u: np.ndarray
    sigma: np.ndarray
    dsigma: np.ndarray


def _central(p: QbmParams, s0, t, h, **opts):
    hi = evolve_qbm(p.with_(omega=p.omega + h), s0, t, **opts)
    lo = evolve_qbm(p.with_(omega=p.omega - h), s0, t, **opts)
    return (hi.mean - lo.mean) / (2 * h), (hi.cov - lo.cov) / (2 * h)


def qbm_derivatives(
    p: QbmParams,
    s0: GaussianState,
    t: float,
    rel_step: float = FD_REL_STEP,
    **opts,
) -> QbmDerivatives:
    """omega-derivatives of the moments by Richardson-extrapolated central
    differences with steps ``h = rel_step * omega`` and ``h/2``.

    The derivative sees omega both through the rotation and through the
    coefficients (via ``r = lambda_c / omega``).
    """
    state = evolve_qbm(p, s0, t, **opts)
    if t == 0:
        return QbmDerivatives(np.zeros(2), state.cov, np.zeros((2, 2)))
    h = rel_step * p.omega
    u1, s1 = _central(p, s0, t, h, **opts)
    u2, s2 = _central(p, s0, t, h / 2, **opts)
    u = (4 * u2 - u1) / 3
    ds = (4 * s2 - s1) / 3
    return QbmDerivatives(u, state.cov, 0.5 * (ds + ds.T))


def qfi_qbm(p: QbmParams, s0: GaussianState, t: float, **opts) -> float:
    return qfi_gaussian(*qbm_derivatives(p, s0, t, **opts))


def cfi_qbm(p: QbmParams, s0: GaussianState, t: float, setting: DyneSetting, **opts) -> float:
    return cfi_general_dyne(*qbm_derivatives(p, s0, t, **opts), setting)


def optimize_dyne_qbm(p: QbmParams, s0: GaussianState, t: float, **opts) -> CfiResult:
    return optimize_dyne(*qbm_derivatives(p, s0, t, **opts), t=float(t))
