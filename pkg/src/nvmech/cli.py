"""Command-line entry point.

One subcommand per experiment kind (plus a generic ``run --experiment``);
flags override JSON config fields of the same name.  Exit codes: 0 success,
2 validation error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENT_KINDS, PROFILES, ExperimentConfig, run_experiment
from .numerics import CapacityError, ConvergenceError


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--out", dest="out_dir", help="output directory (default: results)")
    parser.add_argument("--seed", type=int, help="ensemble base seed")
    parser.add_argument("--realizations", type=int, help="override realization count")
    parser.add_argument("--pulses", type=int, help="pulse count override")
    parser.add_argument("--n-max", dest="n_max", type=int, help="oscillator truncation")
    parser.add_argument(
        "--q-factor", dest="q_factor", type=float, action="append",
        help="oscillator quality factor (repeatable)",
    )
    parser.add_argument("--t2e", type=float, help="electron dephasing time, seconds")
    parser.add_argument(
        "--t2n", type=float, action="append",
        help="nuclear dephasing time, seconds (repeatable)",
    )
    parser.add_argument("--profile", choices=sorted(PROFILES), help="realization preset")
    parser.add_argument("--n-centers", dest="n_centers", type=int, help="number of centers")
    parser.add_argument("--samples", type=int, help="number of sampled times")
    parser.add_argument("--total-time", dest="total_time", type=float, help="evolution window, seconds")
    parser.add_argument("--workers", type=int, help="threads for ensemble batches")
    parser.add_argument(
        "--pulse-timing", dest="pulse_timing", choices=("cpmg", "periodic"),
        help="equidistant pulse placement convention",
    )
    parser.add_argument("--pulse-axis", dest="pulse_axis", choices=("x", "y"))
    parser.add_argument(
        "--skip-convergence-check", dest="skip_convergence_check",
        action="store_const", const=True, default=None,
        help="skip the oscillator-truncation probe (faster, unchecked)",
    )
    parser.add_argument(
        "--plot", action="store_true",
        help="also render a quick-look PNG next to each CSV",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmech",
        description="Simulations of oscillator-mediated nuclear-spin entanglement",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        _add_common_flags(p)
    generic = sub.add_parser("run", help="run an experiment selected by flag/config")
    generic.add_argument("--experiment", choices=EXPERIMENT_KINDS)
    _add_common_flags(generic)
    return parser


_OVERRIDE_FIELDS = (
    "out_dir", "seed", "realizations", "pulses", "n_max", "q_factor",
    "t2e", "t2n", "profile", "n_centers", "samples", "total_time",
    "workers", "pulse_timing", "pulse_axis", "skip_convergence_check",
)


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_FIELDS}
    kind = args.command if args.command != "run" else getattr(args, "experiment", None)
    if args.config:
        if kind is not None:
            overrides["experiment"] = kind
        return ExperimentConfig.from_json(args.config, **overrides)
    if kind is None:
        raise ValueError("no experiment selected: pass a subcommand, --experiment, or --config")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig(experiment=kind, **overrides)


def _render_quicklook(csv_path: str):
    """Minimal plot of one result CSV, written next to it as PNG."""
    import csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    t = [float(r["time_s"]) * 1e3 for r in rows]
    f = [float(r["mean_fidelity"]) for r in rows]
    s = [float(r["stderr"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(t, f, lw=1.2)
    if any(v > 0 for v in s):
        lo = [fi - si for fi, si in zip(f, s)]
        hi = [fi + si for fi, si in zip(f, s)]
        ax.fill_between(t, lo, hi, alpha=0.3, lw=0)
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("fidelity")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    out = csv_path[:-4] + ".png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run_experiment(cfg)
    except (ValueError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    for csv_path, json_path in paths:
        print(csv_path)
        print(json_path)
        if getattr(args, "plot", False):
            print(_render_quicklook(csv_path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
