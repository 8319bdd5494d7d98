"""Seeded Monte Carlo simulation of the photon-counting phase experiment.

Every acquisition sends a coherent pulse with Poissonian photon number
(mean ``n_bar``) through the phase shifter and a polarizing analyzer. Phase
diffusion is realized as Gaussian phase kicks of variance ``2 delta_sq``
added to the true phase; the detection response itself is noiseless. The
estimators then use the dephased (kick-averaged) likelihood.

Kicks are drawn either once per photon (``kick_mode="photon"``, the
default) or once per acquisition (``kick_mode="acquisition"``). Per-photon
kicks make the photon outcomes independent with exactly the dephased
outcome probabilities. A shared kick per acquisition correlates the
photons of a pulse, which inflates the spread of the estimates well above
the Cramer-Rao bound when ``n_bar`` is large.

Random streams are derived from ``numpy.random.SeedSequence`` with a spawn
key per (phase index, replication), so results do not depend on the order
or the parallelism with which tasks run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from ._validation import (
    DomainError,
    ZeroInformationError,
    check_nonnegative,
    check_positive_int,
    check_probe_angle,
    check_real,
    check_window,
)
from .estimation import (
    DEFAULT_GRID_SIZE,
    DEFAULT_WINDOW,
    CountRecord,
    PhaseEstimate,
    bayes_estimate,
    bayes_posterior,
    invert_counts,
)
from .metrology import cramer_rao

__all__ = [
    "KICK_MODES",
    "SWEEP_CSV_HEADER",
    "ADAPTIVE_CSV_HEADER",
    "ExperimentConfig",
    "SweepRow",
    "SweepResult",
    "AdaptiveStep",
    "AdaptiveTrace",
    "DetectorSpec",
    "CoincidenceRates",
    "make_rng",
    "resolve_n_jobs",
    "simulate_counts",
    "simulate_acquisition",
    "run_estimate",
    "sweep",
    "adaptive_run",
    "coincidence_counts",
]

KICK_MODES = ("photon", "acquisition")
SWEEP_CSV_HEADER = (
    "phi",
    "var_inv",
    "var_bayes",
    "post_var_mean",
    "crb_classical",
    "crb_quantum",
    "replications",
)
ADAPTIVE_CSV_HEADER = ("step", "alpha", "estimate", "variance")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a simulated experiment.

    ``M`` acquisitions of mean photon number ``n_bar`` give an effective
    ``N = M * n_bar`` measurements.
    """

    M: int = 60
    n_bar: float = 12.0
    delta_sq: float = 0.0
    theta: float = math.pi / 4
    alpha: float = 0.0
    window: tuple[float, float] = DEFAULT_WINDOW
    seed: int = 0
    grid_size: int = DEFAULT_GRID_SIZE
    kick_mode: str = "photon"

    def __post_init__(self):
        check_positive_int("M", self.M)
        n_bar = check_real("n_bar", self.n_bar)
        if n_bar <= 0:
            raise DomainError(f"n_bar must be > 0, got {n_bar}")
        object.__setattr__(self, "n_bar", n_bar)
        object.__setattr__(self, "delta_sq", check_nonnegative("delta_sq", self.delta_sq))
        object.__setattr__(self, "theta", check_probe_angle(self.theta))
        object.__setattr__(self, "alpha", check_real("alpha", self.alpha))
        object.__setattr__(self, "window", check_window(self.window, self.alpha))
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        check_positive_int("grid_size", self.grid_size, minimum=64)
        if self.kick_mode not in KICK_MODES:
            raise DomainError(f"kick_mode must be one of {KICK_MODES}, got {self.kick_mode!r}")

    @property
    def n_effective(self) -> float:
        return self.M * self.n_bar

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the substream ``key`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def resolve_n_jobs(n_jobs: Optional[int] = None) -> int:
    """Parallelism cap: explicit value, else ``PHASEKIT_THREADS``, else 1."""
    if n_jobs is None:
        env = os.environ.get("PHASEKIT_THREADS")
        if env is None:
            return 1
        try:
            n_jobs = int(env)
        except ValueError:
            raise DomainError(f"PHASEKIT_THREADS must be an integer, got {env!r}") from None
    return check_positive_int("n_jobs", n_jobs)


def simulate_counts(
    phi_true: float,
    config: ExperimentConfig,
    rng: np.random.Generator,
    size: int = 1,
    alpha: Optional[float] = None,
) -> np.ndarray:
    """Simulate ``size`` acquisitions; returns an ``(size, 2)`` int array."""
    phi_true = check_real("phi_true", phi_true)
    alpha = config.alpha if alpha is None else check_real("alpha", alpha)
    visibility = math.sin(2 * config.theta)
    kick_sd = math.sqrt(2 * config.delta_sq)

    photons = rng.poisson(config.n_bar, size)
    if config.kick_mode == "acquisition":
        kicks = rng.normal(0.0, kick_sd, size)
        p_plus = 0.5 * (1 + visibility * np.cos(alpha - phi_true - kicks))
        n_plus = rng.binomial(photons, np.clip(p_plus, 0.0, 1.0))
    else:
        total = int(photons.sum())
        kicks = rng.normal(0.0, kick_sd, total)
        p_plus = 0.5 * (1 + visibility * np.cos(alpha - phi_true - kicks))
        hits = rng.random(total) < p_plus
        owner = np.repeat(np.arange(size), photons)
        n_plus = np.bincount(owner, weights=hits, minlength=size).astype(np.int64)
    return np.column_stack([n_plus, photons - n_plus])


def simulate_acquisition(
    phi_true: float, config: ExperimentConfig, rng: np.random.Generator
) -> tuple[int, int]:
    """One acquisition; returns ``(n_plus, n_minus)``."""
    n_plus, n_minus = simulate_counts(phi_true, config, rng, size=1)[0]
    return int(n_plus), int(n_minus)


def run_estimate(
    phi_true: float,
    config: ExperimentConfig,
    rng: np.random.Generator,
    alpha: Optional[float] = None,
    window: Optional[Sequence[float]] = None,
) -> tuple[PhaseEstimate, PhaseEstimate]:
    """Simulate ``M`` acquisitions and return (inversion, Bayes) estimates."""
    alpha = config.alpha if alpha is None else alpha
    window = config.window if window is None else check_window(window, alpha)
    counts = CountRecord.from_acquisitions(
        simulate_counts(phi_true, config, rng, size=config.M, alpha=alpha)
    )
    inv = invert_counts(counts, config.delta_sq, config.theta, alpha, window)
    post = bayes_posterior(counts, config.delta_sq, config.theta, alpha, config.grid_size, window)
    return inv, bayes_estimate(post)


@dataclass(frozen=True)
class SweepRow:
    phi: float
    var_inv: float
    var_bayes: float
    post_var_mean: float
    crb_classical: float
    crb_quantum: float
    replications: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in SWEEP_CSV_HEADER)


@dataclass(frozen=True)
class SweepResult:
    """Variance of the estimates across replications, per true phase.

    ``var_inv``/``var_bayes`` are the sample variances of the point
    estimates; ``post_var_mean`` is the average single-run posterior
    variance. The bounds are ``1/(F M n_bar)`` and ``1/(H M n_bar)``.
    """

    rows: tuple[SweepRow, ...]
    config: ExperimentConfig
    mean_inv: tuple[float, ...] = field(default=(), compare=False)
    mean_bayes: tuple[float, ...] = field(default=(), compare=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row.as_tuple()])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [
            {k: (_fmt(v) if isinstance(v, float) and math.isinf(v) else v)
             for k, v in zip(SWEEP_CSV_HEADER, row.as_tuple())}
            for row in self.rows
        ]
        doc = {"config": self.config.to_dict(), "seed": self.config.seed, "rows": rows}
        return json.dumps(doc, indent=2)


def _bound(kind, config, phi, alpha):
    try:
        return cramer_rao(kind, config.theta, phi, config.delta_sq, alpha, config.n_effective)
    except ZeroInformationError:
        return math.inf


def _sweep_row(index: int, phi: float, replications: int, config: ExperimentConfig):
    inv = np.empty(replications)
    bayes = np.empty(replications)
    post_var = np.empty(replications)
    for r in range(replications):
        rng = make_rng(config.seed, index, r)
        est_inv, est_bayes = run_estimate(phi, config, rng)
        inv[r] = est_inv.value
        bayes[r] = est_bayes.value
        post_var[r] = est_bayes.variance
    ddof = 1 if replications > 1 else 0
    row = SweepRow(
        phi=float(phi),
        var_inv=float(np.var(inv, ddof=ddof)),
        var_bayes=float(np.var(bayes, ddof=ddof)),
        post_var_mean=float(post_var.mean()),
        crb_classical=_bound("classical", config, phi, config.alpha),
        crb_quantum=_bound("quantum", config, phi, config.alpha),
        replications=replications,
    )
    return index, row, float(inv.mean()), float(bayes.mean())


def sweep(
    phi_grid: Sequence[float],
    replications: int,
    config: ExperimentConfig,
    n_jobs: Optional[int] = None,
) -> SweepResult:
    """Run ``replications`` simulated experiments at each phase of ``phi_grid``."""
    replications = check_positive_int("replications", replications)
    phis = [check_real("phi", p) for p in phi_grid]
    if not phis:
        raise DomainError("phi_grid is empty")
    n_jobs = resolve_n_jobs(n_jobs)
    tasks = (delayed(_sweep_row)(i, phi, replications, config) for i, phi in enumerate(phis))
    if n_jobs == 1:
        results = [fn(*args, **kw) for fn, args, kw in tasks]
    else:
        results = Parallel(n_jobs=n_jobs)(tasks)
    results.sort(key=lambda item: item[0])
    return SweepResult(
        rows=tuple(r[1] for r in results),
        config=config,
        mean_inv=tuple(r[2] for r in results),
        mean_bayes=tuple(r[3] for r in results),
    )


@dataclass(frozen=True)
class AdaptiveStep:
    step: int
    alpha: float
    estimate: float
    variance: float


@dataclass(frozen=True)
class AdaptiveTrace:
    steps: tuple[AdaptiveStep, ...]
    config: Optional[ExperimentConfig] = None
    phi_true: Optional[float] = None

    @property
    def variances(self) -> np.ndarray:
        return np.array([s.variance for s in self.steps])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([s.estimate for s in self.steps])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ADAPTIVE_CSV_HEADER)
        for s in self.steps:
            writer.writerow([s.step, _fmt(s.alpha), _fmt(s.estimate), _fmt(s.variance)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": None if self.config is None else self.config.to_dict(),
            "seed": None if self.config is None else self.config.seed,
            "phi_true": self.phi_true,
            "steps": [asdict(s) for s in self.steps],
        }
        return json.dumps(doc, indent=2)


def adaptive_run(
    phi_true: float,
    steps: int,
    config: ExperimentConfig,
    rng: Optional[np.random.Generator] = None,
) -> AdaptiveTrace:
    """Adaptive protocol: re-aim the analyzer at ``pi/2 + estimate`` each step.

    Step 1 measures at ``config.alpha`` over ``config.window``. Every later
    step uses ``alpha = (pi/2 + previous Bayes estimate) mod 2pi`` and the
    window ``(alpha - pi, alpha)``, on which the likelihood is one-to-one.
    Each step draws ``M`` fresh acquisitions and reports the Bayes estimate
    with its posterior variance.
    """
    steps = check_positive_int("steps", steps)
    rng = make_rng(config.seed) if rng is None else rng
    alpha, window = config.alpha, config.window
    trace = []
    for k in range(1, steps + 1):
        _, est = run_estimate(phi_true, config, rng, alpha=alpha, window=window)
        trace.append(AdaptiveStep(step=k, alpha=alpha, estimate=est.value, variance=est.variance))
        alpha = math.fmod(math.pi / 2 + est.value, 2 * math.pi)
        if alpha < 0:
            alpha += 2 * math.pi
        window = (alpha - math.pi, alpha)
    return AdaptiveTrace(steps=tuple(trace), config=config, phi_true=float(phi_true))


@dataclass(frozen=True)
class DetectorSpec:
    """Count rates (counts/s) of the coincidence detection scheme.

    ``direct_rates`` and ``dark_rates`` hold one entry per signal detector;
    ``gate_rate`` is the rate on the gate detector, ``coincidence_window``
    the electronic window and ``acquisition_time`` the length of one
    acquisition, both in seconds.
    """

    direct_rates: tuple[float, ...]
    gate_rate: float
    dark_rates: tuple[float, ...]
    coincidence_window: float = 90e-9
    acquisition_time: float = 10e-3

    def __post_init__(self):
        direct = tuple(check_nonnegative("direct rate", r) for r in self.direct_rates)
        dark = tuple(check_nonnegative("dark rate", r) for r in self.dark_rates)
        if len(direct) != len(dark) or not direct:
            raise DomainError("direct_rates and dark_rates must be non-empty and equally long")
        object.__setattr__(self, "direct_rates", direct)
        object.__setattr__(self, "dark_rates", dark)
        object.__setattr__(self, "gate_rate", check_nonnegative("gate_rate", self.gate_rate))
        if check_real("coincidence_window", self.coincidence_window) <= 0:
            raise DomainError("coincidence_window must be > 0")
        if check_real("acquisition_time", self.acquisition_time) <= 0:
            raise DomainError("acquisition_time must be > 0")


@dataclass(frozen=True)
class CoincidenceRates:
    """Expected coincidence rates (per second) for one signal channel."""

    channel: int
    total: float
    true: float
    dark: float
    acquisition_time: float

    @property
    def true_to_dark(self) -> float:
        return math.inf if self.dark == 0 else self.true / self.dark

    @property
    def counts_per_acquisition(self) -> float:
        return self.total * self.acquisition_time


def coincidence_counts(spec: DetectorSpec) -> list[CoincidenceRates]:
    """``N_ig = (N_i + N_i,dc) N_g dt`` split into signal and dark parts."""
    out = []
    for i, (direct, dark) in enumerate(zip(spec.direct_rates, spec.dark_rates), start=1):
        true = direct * spec.gate_rate * spec.coincidence_window
        dc = dark * spec.gate_rate * spec.coincidence_window
        out.append(CoincidenceRates(i, true + dc, true, dc, spec.acquisition_time))
    return out
