"""Exceptions and input validation helpers shared across the package."""

from __future__ import annotations

import math
from numbers import Real

import numpy as np


class PhasekitError(Exception):
    """Base class for all errors raised by phasekit."""


class DomainError(PhasekitError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateStateError(PhasekitError, ArithmeticError):
    """The SLD equation has no solution on the support of the state."""


class ZeroInformationError(PhasekitError, ArithmeticError):
    """A Fisher information vanishes where a bound or inverse is requested."""


def check_real(name: str, value, *, finite: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (Real, np.floating, np.integer)):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if finite and not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def check_nonnegative(name: str, value) -> float:
    value = check_real(name, value)
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_probe_angle(theta, *, open_interval: bool = False) -> float:
    """Validate a probe preparation angle.

    The closed interval [0, pi/2] spans pole to pole. With
    ``open_interval=True`` the poles are rejected as well.
    """
    theta = check_real("theta", theta)
    half_pi = math.pi / 2
    if open_interval:
        if not 0.0 < theta < half_pi:
            raise DomainError(f"theta must lie in (0, pi/2), got {theta}")
    elif not 0.0 <= theta <= half_pi:
        raise DomainError(f"theta must lie in [0, pi/2], got {theta}")
    return theta


def check_window(window, alpha: float = 0.0) -> tuple[float, float]:
    """Validate a phase window against the analyzer angle.

    The window has to sit inside [alpha - pi, alpha + pi] so that the
    likelihood stays (up to a reflection) identifiable.
    """
    try:
        lo, hi = window
    except (TypeError, ValueError):
        raise DomainError(f"window must be a (lo, hi) pair, got {window!r}") from None
    lo = check_real("window lo", lo)
    hi = check_real("window hi", hi)
    if not lo < hi:
        raise DomainError(f"window must satisfy lo < hi, got ({lo}, {hi})")
    tol = 1e-12
    if lo < alpha - math.pi - tol or hi > alpha + math.pi + tol:
        raise DomainError(
            f"window ({lo}, {hi}) must lie inside [alpha - pi, alpha + pi] "
            f"for alpha = {alpha}"
        )
    return lo, hi


def check_density_matrix(rho, atol: float = 1e-12) -> np.ndarray:
    """Return ``rho`` as a complex 2x2 array after checking it is a state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DomainError(f"density matrix must be 2x2, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise DomainError("density matrix has non-finite entries")
    if abs(rho[1, 0] - np.conj(rho[0, 1])) > atol or abs(rho[0, 0].imag) > atol \
            or abs(rho[1, 1].imag) > atol:
        raise DomainError("density matrix is not Hermitian")
    if abs((rho[0, 0] + rho[1, 1]).real - 1.0) > atol:
        raise DomainError("density matrix does not have unit trace")
    det = (rho[0, 0] * rho[1, 1]).real - abs(rho[0, 1]) ** 2
    if det < -atol or rho[0, 0].real < -atol or rho[1, 1].real < -atol:
        raise DomainError("density matrix is not positive semidefinite")
    return rho


def wrap_angle(x):
    """Reduce angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, 2 * math.pi) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.ndim(y) == 0 else y
