"""Quantum and classical Fisher information for the noisy phase-shift model.

The probe family is the equatorial-to-polar pure state of angle ``theta``,
shifted by ``phi`` and dephased by ``delta_sq``::

    rho_phi = [[cos^2 t,                 e^{-i phi - D} cos t sin t],
               [e^{i phi - D} cos t sin t, sin^2 t                 ]]

Measurements are projective spin measurements along
``Theta_alpha = sigma_x cos(alpha) + sigma_y sin(alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    DegenerateStateError,
    DomainError,
    ZeroInformationError,
    check_probe_angle,
    check_real,
    wrap_angle,
)
from .qubit import (
    PHASE_GENERATOR,
    SIGMA_X,
    SIGMA_Y,
    NoiseLike,
    as_delta_sq,
    phase_gate,
)

__all__ = [
    "Eigensystem",
    "MeasurementSetting",
    "shifted_state",
    "state_derivative",
    "eigensystem",
    "qfi",
    "qfi_spectral",
    "sld",
    "sld_for_state",
    "optimal_estimator",
    "outcome_probabilities",
    "born_probabilities",
    "expectation",
    "fisher_information",
    "sensitivity",
    "cramer_rao",
]

# generator eigenvalues k = +1/2, -1/2 once the global phase is dropped
_CENTERED_GENERATOR = PHASE_GENERATOR - 0.5 * np.eye(2)
# cos^2(2 theta) at theta = pi/4 rounds to ~4e-33, not 0
_PURE_EQUATORIAL_TOL = 1e-30


@dataclass(frozen=True)
class MeasurementSetting:
    """Analyzer angle ``alpha`` of the spin observable ``Theta_alpha``."""

    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_real("alpha", self.alpha))

    @property
    def observable(self) -> np.ndarray:
        return math.cos(self.alpha) * SIGMA_X + math.sin(self.alpha) * SIGMA_Y

    @property
    def eigenvectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized eigenvectors for the outcomes +1 and -1."""
        a = np.exp(-1j * self.alpha)
        s = 1 / math.sqrt(2)
        return np.array([a * s, s]), np.array([a * s, -s])


def _alpha(setting) -> float:
    if isinstance(setting, MeasurementSetting):
        return setting.alpha
    return check_real("alpha", setting)


@dataclass(frozen=True)
class Eigensystem:
    """Spectral decomposition of the dephased probe (before the phase shift).

    ``v_plus`` and ``v_minus`` are computed by direct diagonalization of the
    real symmetric 2x2 matrix. ``g_plus``/``g_minus`` are the ratios of the
    first to the second eigenvector component, ``(lambda - rho_11)/rho_01``,
    and ``z_plus``/``z_minus`` the matching norms ``sqrt(1 + g**2)``; they are
    ``inf`` when the second component vanishes.

    The ``alt_*`` fields hold a second closed-form parametrization,
    ``f = sqrt(e^{-2D} + (1 - e^{-2D}) cos 4t)``,
    ``lambda = (1 +/- (1 + f)/sqrt 2)/2`` and
    ``g = cos 2t +/- f/(sqrt 2 sin 2t)``. It is not consistent with the
    matrix (it gives ``lambda_plus > 1`` for pure states) and is kept only
    for comparison; nothing in the package computes with it.
    """

    lambda_plus: float
    lambda_minus: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    g_plus: float
    g_minus: float
    z_plus: float
    z_minus: float
    alt_f: float = field(default=math.nan)
    alt_lambda_plus: float = field(default=math.nan)
    alt_lambda_minus: float = field(default=math.nan)
    alt_g_plus: float = field(default=math.nan)
    alt_g_minus: float = field(default=math.nan)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([self.lambda_plus, self.lambda_minus])

    @property
    def eigenvectors(self) -> np.ndarray:
        """Eigenvectors as columns, ordered like :attr:`eigenvalues`."""
        return np.column_stack([self.v_plus, self.v_minus])


def shifted_state(theta: float, phi: float, noise: NoiseLike) -> np.ndarray:
    """Dephased probe after the phase shift ``phi``."""
    theta = check_probe_angle(theta)
    phi = check_real("phi", phi)
    d = math.exp(-as_delta_sq(noise))
    c, s = math.cos(theta), math.sin(theta)
    off = d * c * s * np.exp(-1j * phi)
    return np.array([[c * c, off], [np.conj(off), s * s]], dtype=complex)


def state_derivative(theta: float, phi: float, noise: NoiseLike) -> np.ndarray:
    """Analytic ``d rho_phi / d phi``; only the coherences move."""
    rho = shifted_state(theta, phi, noise)
    return np.array([[0, -1j * rho[0, 1]], [1j * rho[1, 0], 0]], dtype=complex)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf
    # a subnormal denominator overflows to inf, which is the intended limit
    with np.errstate(over="ignore"):
        return float(num / den)


def eigensystem(theta: float, noise: NoiseLike) -> Eigensystem:
    theta = check_probe_angle(theta)
    delta_sq = as_delta_sq(noise)
    e2 = math.exp(-2 * delta_sq)
    cos2, sin2 = math.cos(2 * theta), math.sin(2 * theta)
    # rho = [[a, b], [b, d]] with a - d = cos 2t and 2b = e^{-D} sin 2t
    two_b = math.exp(-delta_sq) * sin2
    radius = math.hypot(cos2, two_b)
    lam_p = 0.5 * (1 + radius)
    lam_m = 0.5 * (1 - radius)

    # pick the cancellation-free pair of unnormalized eigenvectors
    if cos2 >= 0:
        vp = np.array([cos2 + radius, two_b])
        vm = np.array([-two_b, cos2 + radius])
    else:
        vp = np.array([two_b, radius - cos2])
        vm = np.array([cos2 - radius, two_b])
    vp = vp / np.linalg.norm(vp)
    vm = vm / np.linalg.norm(vm)

    g_p = _ratio(vp[0], vp[1])
    g_m = _ratio(vm[0], vm[1])

    alt_f = math.sqrt(max(e2 + (1 - e2) * math.cos(4 * theta), 0.0))
    alt_lp = 0.5 * (1 + (1 + alt_f) / math.sqrt(2))
    alt_lm = 0.5 * (1 - (1 + alt_f) / math.sqrt(2))
    if sin2 != 0:
        alt_gp = cos2 + alt_f / (math.sqrt(2) * sin2)
        alt_gm = cos2 - alt_f / (math.sqrt(2) * sin2)
    else:
        alt_gp = alt_gm = math.nan

    return Eigensystem(
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        v_plus=vp.astype(complex),
        v_minus=vm.astype(complex),
        g_plus=g_p,
        g_minus=g_m,
        z_plus=math.hypot(1.0, g_p),
        z_minus=math.hypot(1.0, g_m),
        alt_f=alt_f,
        alt_lambda_plus=alt_lp,
        alt_lambda_minus=alt_lm,
        alt_g_plus=alt_gp,
        alt_g_minus=alt_gm,
    )


def qfi(theta: float, noise: NoiseLike) -> float:
    """Quantum Fisher information ``exp(-2 delta_sq) sin^2(2 theta)``."""
    theta = check_probe_angle(theta)
    return math.exp(-2 * as_delta_sq(noise)) * math.sin(2 * theta) ** 2


def qfi_spectral(theta: float, noise: NoiseLike, phi: float = 0.0) -> float:
    """QFI from the spectral sum over eigenpairs of ``rho_phi``.

    Evaluates ``2 sum_{n != m} (l_n - l_m)^2/(l_n + l_m) |<psi_m|d psi_n>|^2``
    with ``psi_n(phi) = U_phi v_n``. The eigenvalues do not depend on
    ``phi``, so only the eigenvector term contributes. Returns 0 at the
    poles where the state carries no coherence.
    """
    theta = check_probe_angle(theta)
    phi = check_real("phi", phi)
    es = eigensystem(theta, noise)
    u = phase_gate(phi)
    psis = [u @ es.v_plus, u @ es.v_minus]
    dpsis = [-1j * (_CENTERED_GENERATOR @ p) for p in psis]
    lams = es.eigenvalues
    total = 0.0
    for n in range(2):
        for m in range(2):
            if n == m or lams[n] + lams[m] <= 0:
                continue
            overlap = np.vdot(psis[m], dpsis[n])
            total += (lams[n] - lams[m]) ** 2 / (lams[n] + lams[m]) * abs(overlap) ** 2
    return float(2 * total)


def _solve_in_eigenbasis(lams, vecs, drho, atol=1e-14):
    d_eig = vecs.conj().T @ drho @ vecs
    sums = lams[:, None] + lams[None, :]
    live = sums > atol
    if np.any(np.abs(d_eig[~live]) > 1e-10):
        raise DegenerateStateError("state derivative leaves the support of the state")
    l_eig = np.zeros((2, 2), dtype=complex)
    l_eig[live] = 2 * d_eig[live] / sums[live]
    out = vecs @ l_eig @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def sld_for_state(rho, drho) -> np.ndarray:
    """Solve ``drho = (L rho + rho L)/2`` for Hermitian ``L``.

    Works in the eigenbasis of ``rho`` where the solution is
    ``L_nm = 2 drho_nm / (l_n + l_m)``. Components outside the support of
    ``rho`` are set to zero.

    Raises:
        DegenerateStateError: if ``drho`` has weight on a pair of
            eigenvectors with ``l_n + l_m = 0``.
    """
    lams, vecs = np.linalg.eigh(np.asarray(rho, dtype=complex))
    return _solve_in_eigenbasis(lams, vecs, np.asarray(drho, dtype=complex))


def sld(theta: float, phi: float, noise: NoiseLike) -> np.ndarray:
    """Symmetric logarithmic derivative of ``rho_phi`` with respect to ``phi``.

    Uses the closed-form eigensystem rotated by the phase gate.
    """
    theta = check_probe_angle(theta)
    phi = check_real("phi", phi)
    es = eigensystem(theta, noise)
    vecs = phase_gate(phi) @ es.eigenvectors
    return _solve_in_eigenbasis(es.eigenvalues, vecs, state_derivative(theta, phi, noise))


def optimal_estimator(theta: float, phi: float, noise: NoiseLike) -> np.ndarray:
    """Locally unbiased optimal observable ``phi * 1 + L_phi / H``."""
    h = qfi(theta, noise)
    if h == 0:
        raise ZeroInformationError("QFI vanishes; no optimal estimator exists")
    return phi * np.eye(2, dtype=complex) + sld(theta, phi, noise) / h


def outcome_probabilities(
    theta: float, phi: float, noise: NoiseLike, setting=MeasurementSetting()
) -> tuple[float, float]:
    """Probabilities of the outcomes +1 and -1 of ``Theta_alpha``."""
    theta = check_probe_angle(theta)
    phi = check_real("phi", phi)
    delta = wrap_angle(_alpha(setting) - phi)
    contrast = math.exp(-as_delta_sq(noise)) * math.cos(delta) * math.sin(2 * theta)
    p_plus = min(max(0.5 * (1 + contrast), 0.0), 1.0)
    return p_plus, 1.0 - p_plus


def born_probabilities(rho, setting=MeasurementSetting()) -> tuple[float, float]:
    """Outcome probabilities from the Born rule on an arbitrary state."""
    rho = np.asarray(rho, dtype=complex)
    plus, minus = MeasurementSetting(_alpha(setting)).eigenvectors
    return float(np.vdot(plus, rho @ plus).real), float(np.vdot(minus, rho @ minus).real)


def expectation(theta: float, phi: float, noise: NoiseLike, setting=MeasurementSetting()) -> float:
    p_plus, p_minus = outcome_probabilities(theta, phi, noise, setting)
    return p_plus - p_minus


def _info_terms(theta, phi, noise, setting):
    # returns (e^{-2D} s^2 sin^2 d, 1 - e^{-2D} s^2 cos^2 d) without cancellation
    theta = check_probe_angle(theta)
    phi = check_real("phi", phi)
    delta_sq = as_delta_sq(noise)
    delta = wrap_angle(_alpha(setting) - phi)
    e2 = math.exp(-2 * delta_sq)
    s2 = math.sin(2 * theta) ** 2
    c2 = math.cos(2 * theta) ** 2
    slope = e2 * s2 * math.sin(delta) ** 2
    mixedness = -math.expm1(-2 * delta_sq) + e2 * c2
    if mixedness < _PURE_EQUATORIAL_TOL:
        mixedness = 0.0
    return slope, mixedness + slope


def fisher_information(
    theta: float, phi: float, noise: NoiseLike, setting=MeasurementSetting()
) -> float:
    """Classical Fisher information of the ``Theta_alpha`` measurement.

    At the removable singularity (pure equatorial probe, ``alpha - phi = k pi``)
    the continuity value 1 is returned.
    """
    num, den = _info_terms(theta, phi, noise, setting)
    if den == 0:
        return 1.0
    return num / den


def sensitivity(theta: float, phi: float, noise: NoiseLike, setting=MeasurementSetting()) -> float:
    """Squared sensitivity ``Var[Theta] / (d<Theta>/dphi)^2``.

    Returns ``math.inf`` when the expectation value is stationary in ``phi``.
    """
    num, den = _info_terms(theta, phi, noise, setting)
    if num == 0:
        return math.inf
    return den / num


def cramer_rao(
    variance_kind: str,
    theta: float,
    phi: float,
    noise: NoiseLike,
    setting=MeasurementSetting(),
    n_measurements: float = 1,
) -> float:
    """Cramer-Rao bound ``1 / (N * info)``.

    Args:
        variance_kind: ``"classical"`` uses the Fisher information of the
            spin measurement, ``"quantum"`` the QFI.
        n_measurements: effective number of measurements, ``M * n_bar``.
            Need not be an integer.
    """
    n = check_real("n_measurements", n_measurements)
    if n <= 0:
        raise DomainError(f"n_measurements must be > 0, got {n}")
    if variance_kind == "quantum":
        info = qfi(theta, noise)
    elif variance_kind == "classical":
        info = fisher_information(theta, phi, noise, setting)
    else:
        raise DomainError(f"variance_kind must be 'classical' or 'quantum', got {variance_kind!r}")
    if info == 0:
        raise ZeroInformationError(f"{variance_kind} Fisher information is zero")
    return 1.0 / (n * info)
