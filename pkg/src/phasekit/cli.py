"""Command-line interface.

Every subcommand validates its flags before computing anything and writes
its output in one piece, so a failed run never leaves a partial file.

Exit codes: 0 success, 2 invalid flags or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from ._validation import DomainError, PhasekitError
from .estimation import (
    DEFAULT_GRID_SIZE,
    DEFAULT_WINDOW,
    bayes_estimate,
    bayes_posterior,
    invert_counts,
    load_counts,
)
from .experiment import (
    KICK_MODES,
    DetectorSpec,
    ExperimentConfig,
    adaptive_run,
    coincidence_counts,
    sweep,
)
from .metrology import (
    eigensystem,
    fisher_information,
    outcome_probabilities,
    qfi,
    qfi_spectral,
    sensitivity,
    shifted_state,
)
from .qubit import purity, to_bloch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return _fmt(x) if math.isinf(x) else "nan"
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _dump_json(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _delta_sq(args) -> float:
    if args.delta is not None:
        if not args.delta >= 0:
            raise DomainError(f"--delta must be >= 0, got {args.delta}")
        return args.delta ** 2
    if args.delta_sq is None:
        return 0.0
    if not args.delta_sq >= 0:
        raise DomainError(f"--delta-sq must be >= 0, got {args.delta_sq}")
    return args.delta_sq


def _phi_grid(args):
    if args.phi_values:
        return [float(p) for p in args.phi_values]
    if args.phi_points < 1:
        raise DomainError("--phi-points must be >= 1")
    return np.linspace(args.phi_min, args.phi_max, args.phi_points).tolist()


def _add_noise(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta", type=float, help="noise amplitude Delta (squared internally)")
    g.add_argument("--delta-sq", type=float, help="noise factor Delta^2")


def _add_output(p, formats, default):
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("-o", "--output", help="output path (default: stdout)")


def _add_phi_grid(p, lo, hi, points):
    p.add_argument("--phi-values", type=float, nargs="+", metavar="PHI",
                   help="explicit phase grid; overrides --phi-min/--phi-max/--phi-points")
    p.add_argument("--phi-min", type=float, default=lo)
    p.add_argument("--phi-max", type=float, default=hi)
    p.add_argument("--phi-points", type=int, default=points)


def _add_experiment(p):
    p.add_argument("--M", type=int, default=60, help="acquisitions per estimate")
    p.add_argument("--n-bar", type=float, default=12.0, help="mean photons per acquisition")
    _add_noise(p)
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--window-lo", type=float, default=DEFAULT_WINDOW[0])
    p.add_argument("--window-hi", type=float, default=DEFAULT_WINDOW[1])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--kick-mode", choices=KICK_MODES, default="photon")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        M=args.M,
        n_bar=args.n_bar,
        delta_sq=_delta_sq(args),
        theta=args.theta,
        alpha=args.alpha,
        window=(args.window_lo, args.window_hi),
        seed=args.seed,
        grid_size=args.grid_size,
        kick_mode=args.kick_mode,
    )


def cmd_qfi(args) -> str:
    delta_sq = _delta_sq(args)
    h = qfi(args.theta, delta_sq)
    h_spec = qfi_spectral(args.theta, delta_sq)
    es = eigensystem(args.theta, delta_sq)
    doc = {
        "theta": args.theta,
        "delta_sq": delta_sq,
        "H": h,
        "H_spectral": h_spec,
        "difference": h_spec - h,
        "lambda_plus": es.lambda_plus,
        "lambda_minus": es.lambda_minus,
        "v_plus": es.v_plus.real.tolist(),
        "v_minus": es.v_minus.real.tolist(),
    }
    if args.format == "json":
        return _dump_json(doc)
    lines = [
        f"H = {h:.9f}",
        f"H_spectral = {h_spec:.9f}",
        f"difference = {h_spec - h:.3e}",
        f"lambda_plus = {es.lambda_plus:.9f}",
        f"lambda_minus = {es.lambda_minus:.9f}",
        "v_plus = [{:.9f}, {:.9f}]".format(*es.v_plus.real),
        "v_minus = [{:.9f}, {:.9f}]".format(*es.v_minus.real),
    ]
    return "\n".join(lines) + "\n"


def cmd_fisher(args) -> str:
    delta_sq = _delta_sq(args)
    if args.n_measurements <= 0:
        raise DomainError("--n-measurements must be > 0")
    rows = []
    for phi in _phi_grid(args):
        f = fisher_information(args.theta, phi, delta_sq, args.alpha)
        s = sensitivity(args.theta, phi, delta_sq, args.alpha)
        crb = math.inf if f == 0 else 1.0 / (args.n_measurements * f)
        rows.append((phi, f, s, crb))
    if args.format == "json":
        doc = {
            "theta": args.theta, "delta_sq": delta_sq, "alpha": args.alpha,
            "n_measurements": args.n_measurements,
            "rows": [dict(zip(("phi", "F", "S", "crb"), r)) for r in rows],
        }
        return _dump_json(doc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("phi", "F", "S", "crb"))
    w.writerows([_fmt(v) for v in r] for r in rows)
    return buf.getvalue()


def cmd_probe(args) -> str:
    delta_sq = _delta_sq(args)
    rho = shifted_state(args.theta, args.phi, delta_sq)
    p_plus, p_minus = outcome_probabilities(args.theta, args.phi, delta_sq, args.alpha)
    doc = {
        "theta": args.theta, "phi": args.phi, "delta_sq": delta_sq, "alpha": args.alpha,
        "rho_real": rho.real.tolist(),
        "rho_imag": rho.imag.tolist(),
        "bloch": to_bloch(rho).tolist(),
        "purity": purity(rho),
        "p_plus": p_plus,
        "p_minus": p_minus,
    }
    if args.format == "json":
        return _dump_json(doc)
    r = doc["bloch"]
    return (
        f"rho_00 = {rho[0, 0].real:.9f}\n"
        f"rho_01 = {rho[0, 1].real:.9f}{rho[0, 1].imag:+.9f}j\n"
        f"rho_11 = {rho[1, 1].real:.9f}\n"
        f"bloch = [{r[0]:.9f}, {r[1]:.9f}, {r[2]:.9f}]\n"
        f"purity = {doc['purity']:.9f}\n"
        f"p_plus = {p_plus:.9f}\n"
        f"p_minus = {p_minus:.9f}\n"
    )


def cmd_estimate(args) -> str:
    record, model = load_counts(args.counts_file)
    alpha = args.alpha if args.alpha is not None else model.get("alpha", 0.0)
    theta = args.theta if args.theta is not None else model.get("theta", math.pi / 4)
    if args.delta is not None or args.delta_sq is not None:
        delta_sq = _delta_sq(args)
    else:
        delta_sq = model.get("delta_sq", 0.0)
    window = (
        args.window_lo if args.window_lo is not None else DEFAULT_WINDOW[0],
        args.window_hi if args.window_hi is not None else DEFAULT_WINDOW[1],
    )
    inv = invert_counts(record, delta_sq, theta, alpha, window)
    post = bayes_posterior(record, delta_sq, theta, alpha, args.grid_size, window)
    bay = bayes_estimate(post)
    doc = {
        "model": {"alpha": alpha, "theta": theta, "delta_sq": delta_sq, "window": list(window)},
        "counts": {"n_plus": record.n_plus, "n_minus": record.n_minus,
                   "acquisitions": record.n_acquisitions},
        "phi_inv": inv.value,
        "var_inv": inv.variance,
        "clamped": inv.clamped,
        "phi_bayes": bay.value,
        "var_bayes": bay.variance,
        "posterior": {
            "grid_size": int(post.grid.size),
            "mode": post.mode(),
            "std": bay.std,
            "q025": post.quantile(0.025),
            "q975": post.quantile(0.975),
        },
    }
    return _dump_json(doc)


def cmd_sweep(args) -> str:
    config = _config(args)
    phis = _phi_grid(args)
    result = sweep(phis, args.replications, config, n_jobs=args.jobs)
    if args.format == "json":
        doc = json.loads(result.to_json())
        doc["replications"] = args.replications
        return _dump_json(doc)
    sys.stderr.write(json.dumps({"config": config.to_dict(), "seed": config.seed}) + "\n")
    return result.to_csv()


def cmd_adaptive(args) -> str:
    config = _config(args)
    trace = adaptive_run(args.phi, args.steps, config)
    if args.format == "json":
        return trace.to_json() + "\n"
    sys.stderr.write(json.dumps({"config": config.to_dict(), "seed": config.seed,
                                 "phi_true": args.phi}) + "\n")
    return trace.to_csv()


def cmd_detector(args) -> str:
    dark = args.dark_rates if args.dark_rates is not None else [0.0] * len(args.direct_rates)
    spec = DetectorSpec(
        direct_rates=tuple(args.direct_rates),
        gate_rate=args.gate_rate,
        dark_rates=tuple(dark),
        coincidence_window=args.coincidence_window,
        acquisition_time=args.acquisition_time,
    )
    rates = coincidence_counts(spec)
    header = ("channel", "total", "true", "dark", "true_to_dark", "counts_per_acquisition")
    rows = [(r.channel, r.total, r.true, r.dark, r.true_to_dark, r.counts_per_acquisition)
            for r in rates]
    if args.format == "json":
        return _dump_json({"rows": [dict(zip(header, r)) for r in rows]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([r[0]] + [_fmt(v) for v in r[1:]] for r in rows)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekit", description="Qubit phase estimation under phase diffusion."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qfi", help="quantum Fisher information and eigen-system")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    _add_noise(p)
    _add_output(p, ("text", "json"), "text")
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser("fisher", help="Fisher information profile over phi")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    _add_noise(p)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--n-measurements", type=float, default=1.0)
    _add_phi_grid(p, 0.0, math.pi, 181)
    _add_output(p, ("csv", "json"), "csv")
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("probe", help="shifted, dephased probe state")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--phi", type=float, default=0.0)
    _add_noise(p)
    p.add_argument("--alpha", type=float, default=0.0)
    _add_output(p, ("text", "json"), "text")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("estimate", help="estimate phi from a counts file")
    p.add_argument("counts_file")
    p.add_argument("--theta", type=float)
    p.add_argument("--alpha", type=float)
    _add_noise(p)
    p.add_argument("--window-lo", type=float)
    p.add_argument("--window-hi", type=float)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_estimate, format="json")

    p = sub.add_parser("sweep", help="Monte Carlo variance sweep over phi")
    _add_experiment(p)
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--jobs", type=int, help="parallel workers (default: PHASEKIT_THREADS or 1)")
    _add_phi_grid(p, 0.1, 3.0, 30)
    _add_output(p, ("csv", "json"), "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("adaptive", help="adaptive two-step protocol trace")
    _add_experiment(p)
    p.add_argument("--phi", type=float, required=True, help="true phase")
    p.add_argument("--steps", type=int, default=4)
    _add_output(p, ("csv", "json"), "csv")
    p.set_defaults(func=cmd_adaptive)

    p = sub.add_parser("detector", help="coincidence-count rates")
    p.add_argument("--direct-rates", type=float, nargs="+", required=True)
    p.add_argument("--gate-rate", type=float, required=True)
    p.add_argument("--dark-rates", type=float, nargs="+")
    p.add_argument("--coincidence-window", type=float, default=90e-9)
    p.add_argument("--acquisition-time", type=float, default=10e-3)
    _add_output(p, ("csv", "json"), "csv")
    p.set_defaults(func=cmd_detector)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except DomainError as exc:
        print(f"phasekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"phasekit {args.command}: cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhasekitError, ArithmeticError, FloatingPointError) as exc:
        print(f"phasekit {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        _emit(text, args.output)
    except OSError as exc:
        print(f"phasekit {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
