"""Classical Fisher information of general-dyne measurements.

A general-dyne measurement with seed covariance ``sigma_m`` turns a Gaussian
state ``(<X>, sigma)`` into Gaussian outcomes with covariance
``S = (sigma + sigma_m)/2``, whose Fisher information is

    F = u^T S^{-1} u + 1/2 Tr[S^{-1} dS S^{-1} dS],    dS = d sigma / 2.

Seeds are restricted to ``diag(z, 1/z)``.  ``z -> 0`` is homodyne detection
of ``q``, ``z -> inf`` homodyne detection of ``p`` and ``z = 1`` heterodyne;
the homodyne limits are evaluated as one-dimensional Gaussian statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError
from .markovian import (
    SystemParams,
    cov_omega_derivative,
    evolve_covariance,
    mean_omega_derivative,
)

LOG10_Z_RANGE = (-8.0, 8.0)
COARSE_POINTS = 17
GOLDEN_ITERATIONS = 90
_INVPHI = (math.sqrt(5) - 1) / 2
# A limit setting is reported whenever an interior z does not beat it by more
# than this relative margin.
LIMIT_PREFERENCE = 1e-12


class DyneKind(str, Enum):
    GENERAL = "general"
    HOMODYNE_Q = "homodyne_q"
    HOMODYNE_P = "homodyne_p"
    HETERODYNE = "heterodyne"


@dataclass(frozen=True)
class DyneSetting:
    kind: DyneKind
    z: float | None = None

    def __post_init__(self):
        kind = DyneKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is DyneKind.GENERAL:
            if self.z is None or not (self.z > 0) or not math.isfinite(self.z):
                raise DomainError(f"general-dyne parameter must be finite and > 0, got {self.z}")
            object.__setattr__(self, "z", float(self.z))
        elif kind is DyneKind.HETERODYNE:
            object.__setattr__(self, "z", 1.0)
        else:
            object.__setattr__(self, "z", None)

    @classmethod
    def general(cls, z: float) -> "DyneSetting":
        return cls(DyneKind.GENERAL, z)

    @classmethod
    def homodyne_q(cls) -> "DyneSetting":
        return cls(DyneKind.HOMODYNE_Q)

    @classmethod
    def homodyne_p(cls) -> "DyneSetting":
        return cls(DyneKind.HOMODYNE_P)

    @classmethod
    def heterodyne(cls) -> "DyneSetting":
        return cls(DyneKind.HETERODYNE)

    @property
    def is_homodyne(self) -> bool:
        return self.kind in (DyneKind.HOMODYNE_Q, DyneKind.HOMODYNE_P)

    @property
    def quadrature(self) -> int | None:
        return {DyneKind.HOMODYNE_Q: 0, DyneKind.HOMODYNE_P: 1}.get(self.kind)


class HomodyneLimit(NamedTuple):
    """Stand-in for the singular seed ``lim diag(z, 1/z)`` of homodyne detection."""

    quadrature: int  # 0 = q (z -> 0), 1 = p (z -> inf)


@dataclass(frozen=True)
class CfiResult:
    t: float | None
    setting: DyneSetting
    cfi: float


def seed_covariance(setting: DyneSetting):
    if setting.is_homodyne:
        return HomodyneLimit(setting.quadrature)
    return np.diag([setting.z, 1.0 / setting.z])


def homodyne_cfi(u, sigma, dsigma, quadrature: int):
    """Fisher information of the single-quadrature marginal; broadcasts over a batch."""
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    dsigma = np.asarray(dsigma, dtype=float)
    k = quadrature
    var = 0.5 * sigma[..., k, k]
    dvar = 0.5 * dsigma[..., k, k]
    return u[..., k] ** 2 / var + 0.5 * (dvar / var) ** 2


def general_dyne_cfi(u, sigma, dsigma, z):
    """CFI for seed ``diag(z, 1/z)``; ``z`` broadcasts against the batch shape."""
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    dsigma = np.asarray(dsigma, dtype=float)
    z = np.asarray(z, dtype=float)
    a = 0.5 * (sigma[..., 0, 0] + z)
    d = 0.5 * (sigma[..., 1, 1] + 1.0 / z)
    b = 0.5 * sigma[..., 0, 1]
    det = a * d - b * b
    # S^{-1} = [[d, -b], [-b, a]] / det
    uq, up = u[..., 0], u[..., 1]
    mean_term = (d * uq * uq - 2 * b * uq * up + a * up * up) / det
    ea, eb, ed = 0.5 * dsigma[..., 0, 0], 0.5 * dsigma[..., 0, 1], 0.5 * dsigma[..., 1, 1]
    # X = S^{-1} dS
    x00 = (d * ea - b * eb) / det
    x01 = (d * eb - b * ed) / det
    x10 = (-b * ea + a * eb) / det
    x11 = (-b * eb + a * ed) / det
    trace_term = x00 * x00 + 2 * x01 * x10 + x11 * x11
    return mean_term + 0.5 * trace_term


def cfi_general_dyne(u, sigma, dsigma, setting: DyneSetting) -> float:
    seed = seed_covariance(setting)
    if isinstance(seed, HomodyneLimit):
        return float(homodyne_cfi(u, sigma, dsigma, seed.quadrature))
    return float(general_dyne_cfi(u, sigma, dsigma, setting.z))


def cfi_closed_beta_zero(p: SystemParams, t, z):
    """Closed-form general-dyne CFI for the unsqueezed model."""
    if p.beta_mod != 0:
        raise DomainError("closed form requires beta = 0")
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("z must be positive")
    t = np.asarray(t, dtype=float)
    n, g = p.n_th, np.exp(p.gamma * t)
    phase = p.omega * t - p.alpha_arg
    out = 4 * t**2 * p.alpha_mod**2 * (
        z * np.cos(phase) ** 2 / ((2 * n * z + z + 1) * g - 2 * n * z)
        + np.sin(phase) ** 2 / ((2 * n + z + 1) * g - 2 * n)
    )
    return float(out) if out.ndim == 0 else out


class DyneOptimum(NamedTuple):
    cfi: np.ndarray
    z: np.ndarray  # 0 for homodyne_q, inf for homodyne_p
    kind: np.ndarray  # DyneKind values as strings
    homodyne_q: np.ndarray
    homodyne_p: np.ndarray
    heterodyne: np.ndarray


def optimize_dyne_batch(u, sigma, dsigma) -> DyneOptimum:
    """Maximise the CFI over ``z`` independently for every batch entry.

    Both homodyne limits and heterodyne are always candidates.  Interior
    values of ``log10 z`` in [-8, 8] are searched by golden section started
    from every bracket of a 17-point coarse grid.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    sigma = np.asarray(sigma, dtype=float).reshape(-1, 2, 2)
    dsigma = np.asarray(dsigma, dtype=float).reshape(-1, 2, 2)
    n = u.shape[0]

    def f(logz):  # logz: (n, k)
        return general_dyne_cfi(u[:, None, :], sigma[:, None], dsigma[:, None], 10.0**logz)

    coarse = np.linspace(*LOG10_Z_RANGE, COARSE_POINTS)
    lo = np.clip(coarse - (coarse[1] - coarse[0]), *LOG10_Z_RANGE)
    hi = np.clip(coarse + (coarse[1] - coarse[0]), *LOG10_Z_RANGE)
    lo = np.broadcast_to(lo, (n, COARSE_POINTS)).copy()
    hi = np.broadcast_to(hi, (n, COARSE_POINTS)).copy()
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(GOLDEN_ITERATIONS):
        left = f1 >= f2  # maximum lies in [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new_x1 = np.where(left, hi - _INVPHI * (hi - lo), x2)
        new_x2 = np.where(left, x1, lo + _INVPHI * (hi - lo))
        x1, x2 = new_x1, new_x2
        fresh = f(np.where(left, x1, x2))
        f1, f2 = np.where(left, fresh, f2), np.where(left, f1, fresh)
    x = 0.5 * (lo + hi)
    candidates = np.concatenate([x, np.broadcast_to(coarse, (n, COARSE_POINTS))], axis=1)
    values = f(candidates)
    best = np.argmax(values, axis=1)
    interior = values[np.arange(n), best]
    interior_logz = candidates[np.arange(n), best]

    hq = homodyne_cfi(u, sigma, dsigma, 0)
    hp = homodyne_cfi(u, sigma, dsigma, 1)
    het = general_dyne_cfi(u, sigma, dsigma, 1.0)

    limits = np.stack([hq, hp, het], axis=1)
    which = np.argmax(limits, axis=1)
    limit_best = limits[np.arange(n), which]
    use_limit = limit_best >= interior - LIMIT_PREFERENCE * np.abs(interior)

    cfi = np.where(use_limit, limit_best, interior)
    limit_kind = np.array([DyneKind.HOMODYNE_Q.value, DyneKind.HOMODYNE_P.value,
                           DyneKind.HETERODYNE.value])[which]
    limit_z = np.array([0.0, np.inf, 1.0])[which]
    kind = np.where(use_limit, limit_kind, DyneKind.GENERAL.value)
    z = np.where(use_limit, limit_z, 10.0**interior_logz)
    return DyneOptimum(cfi, z, kind, hq, hp, het)


def optimize_dyne(u, sigma, dsigma, t: float | None = None) -> CfiResult:
    """Best general-dyne measurement for one set of moment derivatives."""
    opt = optimize_dyne_batch(u, sigma, dsigma)
    kind = DyneKind(str(opt.kind[0]))
    setting = DyneSetting.general(float(opt.z[0])) if kind is DyneKind.GENERAL else DyneSetting(kind)
    return CfiResult(t, setting, float(opt.cfi[0]))


def markovian_derivatives(p: SystemParams, t: float, s0=None):
    """``(u, sigma, dsigma)`` of the squeezed Markovian model at time ``t``."""
    s0 = p.initial_state() if s0 is None else s0
    return (mean_omega_derivative(p, s0, t), evolve_covariance(p, s0, t),
            cov_omega_derivative(p, s0, t))


def cfi_markovian(p: SystemParams, t: float, setting: DyneSetting, s0=None) -> CfiResult:
    return CfiResult(float(t), setting, cfi_general_dyne(*markovian_derivatives(p, t, s0), setting))


def optimize_dyne_markovian(p: SystemParams, t: float, s0=None) -> CfiResult:
    return optimize_dyne(*markovian_derivatives(p, t, s0), t=float(t))


def saturation_times(p: SystemParams, m_max: int) -> list[tuple[float, DyneSetting]]:
    """Times ``(2 theta + m pi) / (2 omega)`` where a homodyne CFI equals the QFI.

    Even ``m`` pairs with momentum homodyne, odd ``m`` with position homodyne.
    """
    if p.beta_mod != 0:
        raise DomainError("saturation times are only known for beta = 0")
    out = []
    for m in range(int(m_max) + 1):
        t = (2 * p.alpha_arg + m * math.pi) / (2 * p.omega)
        if t >= 0:
            setting = DyneSetting.homodyne_p() if m % 2 == 0 else DyneSetting.homodyne_q()
            out.append((t, setting))
    return out


def maximize_over_time(
    t_grid: np.ndarray,
    values: np.ndarray,
    point: Callable[[float], float],
    iterations: int = 40,
) -> tuple[float, float]:
    """Grid argmax refined by golden section on ``point`` within the adjacent cells."""
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    k = int(np.argmax(values))
    lo = t_grid[max(k - 1, 0)]
    hi = t_grid[min(k + 1, t_grid.size - 1)]
    best_t, best_v = float(t_grid[k]), float(values[k])
    if hi <= lo:
        return best_t, best_v
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = point(x1), point(x2)
    for _ in range(iterations):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = point(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = point(x2)
    for t, v in ((x1, f1), (x2, f2)):
        if v > best_v:
            best_t, best_v = float(t), float(v)
    return best_t, best_v
