"""Single-mode Gaussian states and the small amount of phase-space algebra
shared by the rest of the package.

Conventions: hbar = 1, quadratures ``q = (a + a^dag)/sqrt(2)`` and
``p = (a - a^dag)/(i sqrt(2))``, and the covariance matrix is the symmetrised
second moment, so the vacuum and every coherent state have ``cov = I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Symplectic form for one mode.
OMEGA = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA.setflags(write=False)

PHYSICALITY_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First and second moments of a single-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean)
        cov = _frozen(self.cov)
        if mean.shape != (2,):
            raise ValueError(f"mean must have shape (2,), got {mean.shape}")
        if cov.shape != (2, 2):
            raise ValueError(f"cov must have shape (2, 2), got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("Gaussian state moments must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.cov, other.cov
        )

    __hash__ = None


def coherent_state(alpha_mod: float, alpha_arg: float = 0.0) -> GaussianState:
    """Coherent state ``|alpha>`` with ``alpha = alpha_mod * exp(i alpha_arg)``."""
    if not np.isfinite(alpha_mod) or not np.isfinite(alpha_arg):
        raise ValueError("coherent-state amplitude must be finite")
    if alpha_mod == 0:
        return GaussianState(np.zeros(2), np.eye(2))
    r = np.sqrt(2.0) * alpha_mod
    return GaussianState(
        np.array([r * np.cos(alpha_arg), r * np.sin(alpha_arg)]), np.eye(2)
    )


def validate_state(state: GaussianState, tol: float = PHYSICALITY_TOL) -> bool:
    """True if ``state.cov`` is symmetric and obeys ``det(cov) >= 1 - tol``.

    For a single mode this is equivalent to ``cov + i*OMEGA >= 0`` together
    with positivity of the diagonal, which is also checked.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cov = np.asarray(state.cov, dtype=float)
    if abs(cov[0, 1] - cov[1, 0]) > tol:
        return False
    if np.trace(cov) <= 0 or cov[0, 0] <= 0:
        return False
    return bool(np.linalg.det(cov) >= 1.0 - tol)


def vectorize(m) -> np.ndarray:
    """Column-stacking vectorisation, so ``vec(A X B) = (B^T kron A) vec(X)``."""
    return np.asarray(m, dtype=float).reshape(-1, order="F")


def unvectorize(v, n: int = 2) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((n, n), order="F")


def kronecker(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def rotation(angle) -> np.ndarray:
    """Phase-space rotation ``exp(angle * OMEGA)``; broadcasts over ``angle``."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty(angle.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return out
