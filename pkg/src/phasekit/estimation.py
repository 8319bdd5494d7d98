"""Phase estimation from photon counts: inversion and Bayesian posterior.

Both estimators exist as plain functions (:func:`invert_counts`,
:func:`bayes_posterior`, :func:`bayes_estimate`) and as scikit-learn style
estimators (:class:`InversionPhaseEstimator`, :class:`BayesianPhaseEstimator`)
whose ``fit`` takes an ``(M, 2)`` array of per-acquisition counts
``[n_plus, n_minus]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np
from scipy.integrate import trapezoid
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import (
    DomainError,
    check_positive_int,
    check_probe_angle,
    check_real,
    check_window,
)
from .metrology import MeasurementSetting, _alpha
from .qubit import NoiseLike, as_delta_sq

__all__ = [
    "DEFAULT_WINDOW",
    "DEFAULT_GRID_SIZE",
    "COUNTS_SCHEMA",
    "CountRecord",
    "PhaseEstimate",
    "Posterior",
    "load_counts",
    "invert_counts",
    "log_likelihood",
    "posterior_from_log_likelihood",
    "bayes_posterior",
    "bayes_estimate",
    "InversionPhaseEstimator",
    "BayesianPhaseEstimator",
]

DEFAULT_WINDOW = (0.0, math.pi)
DEFAULT_GRID_SIZE = 2048

COUNTS_SCHEMA = {
    "type": "object",
    "properties": {
        "acquisitions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "alpha": {"type": "number"},
        "delta_sq": {"type": "number", "minimum": 0},
        "theta": {"type": "number", "minimum": 0, "maximum": math.pi / 2},
    },
    "required": ["acquisitions"],
}


@dataclass(frozen=True)
class CountRecord:
    """Photon counts in the +/- output ports.

    ``acquisitions`` optionally keeps the per-acquisition breakdown; the
    totals must then match its column sums.
    """

    n_plus: int
    n_minus: int
    acquisitions: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self):
        for name in ("n_plus", "n_minus"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise DomainError(f"{name} must be a nonnegative integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.acquisitions is not None:
            acq = tuple((int(a), int(b)) for a, b in self.acquisitions)
            if any(a < 0 or b < 0 for a, b in acq):
                raise DomainError("acquisition counts must be nonnegative")
            if (sum(a for a, _ in acq), sum(b for _, b in acq)) != (self.n_plus, self.n_minus):
                raise DomainError("totals do not match the per-acquisition breakdown")
            object.__setattr__(self, "acquisitions", acq)

    @classmethod
    def from_acquisitions(cls, acquisitions) -> "CountRecord":
        arr = _check_counts_array(acquisitions)
        return cls(
            n_plus=int(arr[:, 0].sum()),
            n_minus=int(arr[:, 1].sum()),
            acquisitions=tuple(map(tuple, arr.tolist())),
        )

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def n_acquisitions(self) -> Optional[int]:
        return None if self.acquisitions is None else len(self.acquisitions)


@dataclass(frozen=True)
class PhaseEstimate:
    """Point estimate of the phase with its variance.

    ``clamped`` is set when the observed contrast fell outside the range the
    noise model allows and had to be clipped before inversion.
    """

    value: float
    variance: float
    method: str
    clamped: bool = False

    def __post_init__(self):
        if self.method not in ("inversion", "bayes"):
            raise DomainError(f"unknown estimation method {self.method!r}")
        if not self.variance >= 0:
            raise DomainError(f"variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def variance_is_infinite(self) -> bool:
        return math.isinf(self.variance)


@dataclass(frozen=True)
class Posterior:
    """Gridded posterior density over a phase window."""

    grid: np.ndarray
    density: np.ndarray
    window: tuple[float, float] = DEFAULT_WINDOW
    log_likelihood: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def mean(self) -> float:
        return float(trapezoid(self.grid * self.density, self.grid))

    def variance(self) -> float:
        m = self.mean()
        return float(trapezoid((self.grid - m) ** 2 * self.density, self.grid))

    def mode(self) -> float:
        return float(self.grid[np.argmax(self.density)])

    def cdf(self) -> np.ndarray:
        steps = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def quantile(self, q: float) -> float:
        return float(np.interp(q, self.cdf(), self.grid))

    def normalization(self) -> float:
        return float(trapezoid(self.density, self.grid))


def _check_counts_array(X) -> np.ndarray:
    arr = check_array(X, dtype=None, ensure_min_samples=1)
    if arr.shape[1] != 2:
        raise DomainError(f"counts must have two columns (n_plus, n_minus), got {arr.shape[1]}")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise DomainError("counts must be nonnegative integers")
    return arr.astype(np.int64)


def load_counts(source) -> tuple[CountRecord, dict]:
    """Read a counts document.

    ``source`` is a path or an already-parsed mapping of the form
    ``{"acquisitions": [[n_plus, n_minus], ...], "alpha": ..., "delta_sq": ...,
    "theta": ...}``. Returns the record and a dict of the model keys found.

    Raises:
        DomainError: if the document violates the schema.
    """
    if isinstance(source, (str, Path)):
        try:
            doc = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"counts file is not valid JSON: {exc}") from None
    else:
        doc = source
    try:
        jsonschema.validate(doc, COUNTS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise DomainError(f"counts document violates schema: {exc.message}") from None
    record = CountRecord.from_acquisitions(doc["acquisitions"])
    model = {k: float(doc[k]) for k in ("alpha", "delta_sq", "theta") if k in doc}
    return record, model


def _branch_into_window(alpha: float, arc: float, window) -> float:
    lo, hi = window
    center = 0.5 * (lo + hi)
    best = None
    for cand in (alpha + arc, alpha - arc):
        cand += 2 * math.pi * round((center - cand) / (2 * math.pi))
        inside = lo - 1e-12 <= cand <= hi + 1e-12
        dist = 0.0 if inside else min(abs(cand - lo), abs(cand - hi))
        if best is None or dist < best[0]:
            best = (dist, cand)
    return min(max(best[1], lo), hi)


def invert_counts(
    counts: CountRecord,
    noise: NoiseLike = 0.0,
    theta: float = math.pi / 4,
    setting=MeasurementSetting(),
    window=DEFAULT_WINDOW,
) -> PhaseEstimate:
    """Invert the outcome probabilities on the observed count fractions.

    The contrast ``c = e^{delta_sq} (n+ - n-) / ((n+ + n-) sin 2theta)``
    estimates ``cos(alpha - phi)``; it is clipped to [-1, 1] (setting
    ``clamped``) and the branch ``alpha +/- arccos(c)`` inside ``window`` is
    returned. With ``alpha = 0`` and the default window this is
    ``arccos(c)``.

    The variance comes from first-order error propagation with Poissonian
    count fluctuations ``sigma^2(n) = n``, which reduces to
    ``4 e^{2 delta_sq} n+ n- / (n^3 sin^2 2theta (1 - c^2))``. It is
    infinite when ``|c| >= 1``.
    """
    delta_sq = as_delta_sq(noise)
    theta = check_probe_angle(theta)
    alpha = _alpha(setting)
    window = check_window(window, alpha)
    n = counts.total
    if n == 0:
        raise DomainError("cannot invert zero counts")
    visibility = math.exp(-delta_sq) * math.sin(2 * theta)
    if visibility <= 0:
        raise DomainError("probe carries no phase information (sin 2theta = 0)")

    c = (counts.n_plus - counts.n_minus) / (n * visibility)
    clamped = abs(c) > 1
    c_used = min(max(c, -1.0), 1.0)
    value = _branch_into_window(alpha, math.acos(c_used), window)

    one_minus_c2 = 1.0 - c_used * c_used
    if one_minus_c2 <= 0:
        variance = math.inf
    else:
        # (d phi/d n_pm)^2 n_pm summed over both ports
        variance = 4 * counts.n_plus * counts.n_minus / (n ** 3 * visibility ** 2 * one_minus_c2)
    return PhaseEstimate(value=value, variance=variance, method="inversion", clamped=clamped)


def log_likelihood(
    phi,
    counts: CountRecord,
    noise: NoiseLike = 0.0,
    theta: float = math.pi / 4,
    setting=MeasurementSetting(),
):
    """``n+ ln p+(phi) + n- ln p-(phi)`` with ``0 ln 0 = 0``.

    ``phi`` may be a scalar or an array. Points where a positive count meets
    a vanishing probability give ``-inf``.
    """
    theta = check_probe_angle(theta)
    visibility = math.exp(-as_delta_sq(noise)) * math.sin(2 * theta)
    phi_arr = np.asarray(phi, dtype=float)
    contrast = visibility * np.cos(_alpha(setting) - phi_arr)
    with np.errstate(divide="ignore"):
        lp = np.log1p(contrast) - math.log(2)
        lm = np.log1p(-contrast) - math.log(2)
    out = np.zeros_like(contrast)
    if counts.n_plus:
        out = out + counts.n_plus * lp
    if counts.n_minus:
        out = out + counts.n_minus * lm
    return float(out) if np.ndim(out) == 0 else out


def posterior_from_log_likelihood(grid, logl, window=None) -> Posterior:
    """Normalize ``exp(logl)`` on ``grid`` under a flat prior."""
    grid = np.asarray(grid, dtype=float)
    logl = np.asarray(logl, dtype=float)
    if grid.ndim != 1 or grid.shape != logl.shape or grid.size < 2:
        raise DomainError("grid and log-likelihood must be matching 1-D arrays")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    finite = np.isfinite(logl)
    if not finite.any():
        raise DomainError("log-likelihood is -inf everywhere on the grid")
    weights = np.zeros_like(logl)
    weights[finite] = np.exp(logl[finite] - logl[finite].max())
    norm = trapezoid(weights, grid)
    if not norm > 0:
        raise DomainError("posterior mass vanished on the grid")
    window = (float(grid[0]), float(grid[-1])) if window is None else tuple(window)
    return Posterior(grid=grid, density=weights / norm, window=window, log_likelihood=logl)


def bayes_posterior(
    counts: CountRecord,
    noise: NoiseLike = 0.0,
    theta: float = math.pi / 4,
    setting=MeasurementSetting(),
    grid_size: int = DEFAULT_GRID_SIZE,
    window=DEFAULT_WINDOW,
) -> Posterior:
    """Posterior over ``window`` under a flat prior.

    Mass outside the window is discarded, so estimates near its edges carry
    the usual truncation bias.
    """
    alpha = _alpha(setting)
    lo, hi = check_window(window, alpha)
    grid_size = check_positive_int("grid_size", grid_size, minimum=64)
    grid = np.linspace(lo, hi, grid_size)
    logl = log_likelihood(grid, counts, noise, theta, alpha)
    return posterior_from_log_likelihood(grid, logl, (lo, hi))


def bayes_estimate(posterior: Posterior) -> PhaseEstimate:
    """Posterior mean and variance by trapezoid quadrature."""
    return PhaseEstimate(
        value=posterior.mean(), variance=max(posterior.variance(), 0.0), method="bayes"
    )


class _PhaseEstimatorBase(BaseEstimator):
    def __init__(
        self,
        delta_sq: float = 0.0,
        theta: float = math.pi / 4,
        alpha: float = 0.0,
        window: Sequence[float] = DEFAULT_WINDOW,
    ):
        self.delta_sq = delta_sq
        self.theta = theta
        self.alpha = alpha
        self.window = window

    def _validated_params(self):
        alpha = check_real("alpha", self.alpha)
        return (
            as_delta_sq(self.delta_sq),
            check_probe_angle(self.theta),
            alpha,
            check_window(self.window, alpha),
        )

    def _record(self, X) -> CountRecord:
        return CountRecord.from_acquisitions(X)

    def score(self, X, y=None) -> float:
        """Log-likelihood of ``X`` at the fitted phase."""
        check_is_fitted(self, "phase_")
        delta_sq, theta, alpha, _ = self._validated_params()
        return log_likelihood(self.phase_, self._record(X), delta_sq, theta, alpha)


class InversionPhaseEstimator(_PhaseEstimatorBase):
    """Phase estimate by inverting the outcome probabilities.

    Parameters
    ----------
    delta_sq : float
        Noise factor assumed by the model.
    theta : float
        Probe preparation angle.
    alpha : float
        Analyzer angle.
    window : (float, float)
        Phase window used to select the inversion branch.

    Attributes
    ----------
    estimate_ : PhaseEstimate
    phase_ : float
    variance_ : float
    clamped_ : bool
    """

    def fit(self, X, y=None):
        delta_sq, theta, alpha, window = self._validated_params()
        self.counts_ = self._record(X)
        self.estimate_ = invert_counts(self.counts_, delta_sq, theta, alpha, window)
        self.phase_ = self.estimate_.value
        self.variance_ = self.estimate_.variance
        self.clamped_ = self.estimate_.clamped
        return self


class BayesianPhaseEstimator(_PhaseEstimatorBase):
    """Posterior-mean phase estimate under a flat prior on ``window``.

    Parameters are those of :class:`InversionPhaseEstimator` plus
    ``grid_size``, the number of posterior grid points.

    Attributes
    ----------
    posterior_ : Posterior
    estimate_ : PhaseEstimate
    phase_ : float
    variance_ : float
    """

    def __init__(
        self,
        delta_sq: float = 0.0,
        theta: float = math.pi / 4,
        alpha: float = 0.0,
        window: Sequence[float] = DEFAULT_WINDOW,
        grid_size: int = DEFAULT_GRID_SIZE,
    ):
        super().__init__(delta_sq=delta_sq, theta=theta, alpha=alpha, window=window)
        self.grid_size = grid_size

    def fit(self, X, y=None):
        delta_sq, theta, alpha, window = self._validated_params()
        self.counts_ = self._record(X)
        self.posterior_ = bayes_posterior(
            self.counts_, delta_sq, theta, alpha, self.grid_size, window
        )
        self.estimate_ = bayes_estimate(self.posterior_)
        self.phase_ = self.estimate_.value
        self.variance_ = self.estimate_.variance
        return self
