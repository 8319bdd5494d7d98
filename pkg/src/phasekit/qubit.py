"""Qubit states, the phase-shift gate and the phase-diffusion channel.

Density matrices are plain ``(2, 2)`` complex numpy arrays written in the
sigma_z eigenbasis, index 0 = |+1/2> (H polarization) and index 1 = |-1/2>
(V polarization). The phase gate is ``exp(-i phi sigma_+ sigma_-)`` with
``sigma_+ sigma_- = diag(1, 0)``, so it multiplies the coherence
``rho[0, 1]`` by ``exp(-i phi)``.

Dephasing is available in three equivalent forms:

* :func:`apply_dephasing`, the closed-form damping of the coherences,
* :func:`evolve_master_equation`, an RK4 integration of the master equation,
* :func:`gaussian_phase_average`, Gauss-Hermite averaging over random
  phase kicks of variance ``2 * delta_sq``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ._validation import (
    DomainError,
    check_density_matrix,
    check_nonnegative,
    check_positive_int,
    check_probe_angle,
    check_real,
)

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "PHASE_GENERATOR",
    "NoiseSpec",
    "ProbeSpec",
    "to_bloch",
    "from_bloch",
    "purity",
    "make_probe",
    "phase_gate",
    "apply_phase_shift",
    "apply_dephasing",
    "dephasing_generator",
    "evolve_master_equation",
    "gaussian_phase_average",
]

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# raising operator |+1/2><-1/2|
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T
# sigma_+ sigma_- = diag(1, 0): unit eigenvalue spread
PHASE_GENERATOR = SIGMA_PLUS @ SIGMA_MINUS


@dataclass(frozen=True)
class NoiseSpec:
    """Strength of the phase diffusion.

    ``delta_sq`` is the effective noise factor. When the noise comes from a
    dephasing rate ``gamma`` acting for a time ``t`` then
    ``delta_sq = gamma * t / 2``; use :meth:`from_rate` for that case.
    """

    delta_sq: float = 0.0
    gamma: Optional[float] = None
    t: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "delta_sq", check_nonnegative("delta_sq", self.delta_sq))
        if (self.gamma is None) != (self.t is None):
            raise DomainError("gamma and t must be given together")
        if self.gamma is not None:
            gamma = check_nonnegative("gamma", self.gamma)
            t = check_nonnegative("t", self.t)
            if self.delta_sq != gamma * t / 2:
                raise DomainError(
                    f"delta_sq={self.delta_sq} inconsistent with gamma*t/2={gamma * t / 2}"
                )

    @classmethod
    def from_rate(cls, gamma: float, t: float) -> "NoiseSpec":
        gamma = check_nonnegative("gamma", gamma)
        t = check_nonnegative("t", t)
        return cls(delta_sq=gamma * t / 2, gamma=gamma, t=t)

    @classmethod
    def from_delta(cls, delta: float) -> "NoiseSpec":
        """Build from the noise amplitude Delta (the square root of delta_sq)."""
        delta = check_real("delta", delta)
        return cls(delta_sq=delta * delta)

    @property
    def damping(self) -> float:
        """Coherence damping factor ``exp(-delta_sq)``."""
        return math.exp(-self.delta_sq)


NoiseLike = Union[NoiseSpec, float, int]


def as_delta_sq(noise: NoiseLike) -> float:
    """Accept a :class:`NoiseSpec` or a bare ``delta_sq`` value."""
    if isinstance(noise, NoiseSpec):
        return noise.delta_sq
    return check_nonnegative("delta_sq", noise)


@dataclass(frozen=True)
class ProbeSpec:
    """Pure probe prepared at angle ``theta`` in [0, pi/2]."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", check_probe_angle(self.theta))

    @property
    def bloch(self) -> np.ndarray:
        return np.array([math.sin(2 * self.theta), 0.0, math.cos(2 * self.theta)])


def to_bloch(rho) -> np.ndarray:
    """Bloch vector ``(r_x, r_y, r_z)`` of a qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    return np.array(
        [2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real]
    )


def from_bloch(r) -> np.ndarray:
    """Density matrix ``(1 + r.sigma) / 2``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise DomainError(f"Bloch vector must have 3 components, got shape {r.shape}")
    if np.linalg.norm(r) > 1 + 1e-12:
        raise DomainError(f"Bloch vector norm exceeds 1: {np.linalg.norm(r)}")
    return 0.5 * (IDENTITY + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def purity(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.trace(rho @ rho).real)


def make_probe(spec: Union[ProbeSpec, float]) -> np.ndarray:
    """Pure probe state with Bloch vector ``(sin 2theta, 0, cos 2theta)``.

    Args:
        spec: a :class:`ProbeSpec` or the angle ``theta`` itself.

    Returns:
        The 2x2 density matrix of the probe.
    """
    theta = spec.theta if isinstance(spec, ProbeSpec) else check_probe_angle(spec)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c * c, c * s], [c * s, s * s]], dtype=complex)


def phase_gate(phi: float) -> np.ndarray:
    """Unitary ``exp(-i phi sigma_+ sigma_-)`` = ``diag(exp(-i phi), 1)``."""
    return np.diag([np.exp(-1j * phi), 1.0 + 0j])


def apply_phase_shift(rho, phi: float) -> np.ndarray:
    rho = check_density_matrix(rho)
    phi = check_real("phi", phi)
    out = rho.copy()
    out[0, 1] = np.exp(-1j * phi) * rho[0, 1]
    out[1, 0] = np.conj(out[0, 1])
    return out


def apply_dephasing(rho, noise: NoiseLike) -> np.ndarray:
    """Damp the coherences by ``exp(-delta_sq)``; populations are untouched."""
    rho = check_density_matrix(rho)
    damping = math.exp(-as_delta_sq(noise))
    out = rho.copy()
    out[0, 1] = damping * rho[0, 1]
    out[1, 0] = damping * rho[1, 0]
    return out


def dephasing_generator(rho: np.ndarray, gamma: float) -> np.ndarray:
    """Right-hand side ``gamma * D[sigma_+ sigma_-] rho`` of the master equation."""
    a = PHASE_GENERATOR
    ad = a.conj().T
    ada = ad @ a
    return gamma * (a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada))


def evolve_master_equation(rho, gamma: float, t: float, steps: int = 1000) -> np.ndarray:
    """Integrate the dephasing master equation with fixed-step RK4.

    The result converges to :func:`apply_dephasing` with
    ``delta_sq = gamma * t / 2``; the global error falls as ``steps**-4``.
    """
    rho = check_density_matrix(rho)
    gamma = check_nonnegative("gamma", gamma)
    t = check_nonnegative("t", t)
    steps = check_positive_int("steps", steps)

    h = t / steps
    state = rho.copy()
    for _ in range(steps):
        k1 = dephasing_generator(state, gamma)
        k2 = dephasing_generator(state + 0.5 * h * k1, gamma)
        k3 = dephasing_generator(state + 0.5 * h * k2, gamma)
        k4 = dephasing_generator(state + h * k3, gamma)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    # symmetrize away rounding drift
    return 0.5 * (state + state.conj().T)


def gaussian_phase_average(
    rho, center_phi: float, noise: NoiseLike, quad_points: int = 64
) -> np.ndarray:
    """Average ``U_phi rho U_phi^dag`` over ``phi ~ Normal(center_phi, 2 delta_sq)``.

    Uses Gauss-Hermite quadrature with ``quad_points`` nodes. A kick of
    variance ``2 delta_sq`` has ``E[exp(-i phi)] = exp(-delta_sq)``, which
    is exactly the closed-form damping.
    """
    rho = check_density_matrix(rho)
    center_phi = check_real("center_phi", center_phi)
    delta_sq = as_delta_sq(noise)
    quad_points = check_positive_int("quad_points", quad_points, minimum=3)

    if delta_sq == 0.0:
        return apply_phase_shift(rho, center_phi)
    nodes, weights = np.polynomial.hermite.hermgauss(quad_points)
    # phi = center + sqrt(2 * variance) * x with variance = 2 delta_sq
    phis = center_phi + 2.0 * math.sqrt(delta_sq) * nodes
    out = np.zeros((2, 2), dtype=complex)
    for phi, w in zip(phis, weights):
        u = phase_gate(phi)
        out += w * (u @ rho @ u.conj().T)
    out /= math.sqrt(math.pi)
    return 0.5 * (out + out.conj().T)
