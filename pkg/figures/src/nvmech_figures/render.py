"""Figure rendering from the simulation CLI's CSV/JSON output contract.

Each result is a CSV with the fixed header ``time_s,mean_fidelity,stderr``
plus an optional JSON sidecar of the same basename.  Rendering never alters
or re-derives data: the time and fidelity columns are handed to matplotlib
verbatim (axes are labeled in ms through a tick formatter, not by rescaling),
and :func:`render` returns matching hashes of the CSV columns and of the
arrays actually attached to the plot artists.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = ["time_s", "mean_fidelity", "stderr"]


@dataclass(frozen=True)
class Curve:
    """One loaded result: CSV columns plus sidecar metadata (may be empty)."""

    path: str
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    sidecar: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        record = self.sidecar.get("record")
        if record:
            return str(record)
        return os.path.splitext(os.path.basename(self.path))[0]

    @property
    def experiment(self) -> str | None:
        return self.sidecar.get("experiment")

    @property
    def metadata(self) -> dict:
        return self.sidecar.get("metadata", {})


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: input curves, figure kind, output image path."""

    kind: str
    csv_paths: tuple[str, ...]
    out_path: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; choose from {sorted(FIGURE_KINDS)}"
            )
        if not self.csv_paths:
            raise ValueError("at least one input CSV is required")
        for path in self.csv_paths:
            if not os.path.exists(path):
                raise ValueError(f"input file not found: {path}")


def load_curve(csv_path: str) -> Curve:
    """Parse one result CSV and its sidecar (``<name>.json`` next to it)."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(
            f"{csv_path}: expected header {','.join(CSV_HEADER)}, "
            f"got {','.join(rows[0]) if rows else 'an empty file'}"
        )
    body = rows[1:]
    if not body:
        raise ValueError(f"{csv_path}: no data rows")
    try:
        data = np.array([[float(cell) for cell in row] for row in body])
    except ValueError as exc:
        raise ValueError(f"{csv_path}: non-numeric cell ({exc})") from None
    if data.shape[1] != 3:
        raise ValueError(f"{csv_path}: expected 3 columns, got {data.shape[1]}")

    sidecar = {}
    json_path = os.path.splitext(csv_path)[0] + ".json"
    if os.path.exists(json_path):
        with open(json_path) as fh:
            sidecar = json.load(fh)
    return Curve(csv_path, data[:, 0], data[:, 1], data[:, 2], sidecar)


def _array_hash(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return digest.hexdigest()


def _check_experiment(curves: list[Curve], allowed: tuple[str, ...]):
    for c in curves:
        if c.experiment is not None and c.experiment not in allowed:
            raise ValueError(
                f"{c.path}: sidecar experiment {c.experiment!r} does not match "
                f"this figure kind (expects one of {allowed})"
            )


def _ms_axis(ax):
    from matplotlib.ticker import FuncFormatter

    ax.xaxis.set_major_formatter(FuncFormatter(lambda x, _: f"{x * 1e3:g}"))
    ax.set_xlabel("time (ms)")


def _new_figure(n_axes: int = 1):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, n_axes, figsize=(4.2 * n_axes, 3.2), squeeze=False)
    return fig, axes[0]


def _band(ax, curve: Curve, line):
    if np.any(curve.stderr > 0):
        ax.fill_between(
            curve.times,
            curve.mean - curve.stderr,
            curve.mean + curve.stderr,
            color=line.get_color(),
            alpha=0.25,
            linewidth=0,
        )


def _finish(fig, axes, out_path: str, lines) -> dict:
    for ax in axes:
        ax.set_ylabel("fidelity")
        _ms_axis(ax)
    fig.tight_layout()
    fig.savefig(out_path, dpi=200)
    plotted = _array_hash(*[a for line in lines for a in (line.get_xdata(), line.get_ydata())])
    import matplotlib.pyplot as plt

    plt.close(fig)
    return {"out_path": out_path, "plotted_hash": plotted}


def _render_spinflip(curves: list[Curve], out_path: str) -> dict:
    """Overlay of the exact model (line) and the reduced model (markers)."""
    _check_experiment(curves, ("spinflip",))
    if len(curves) != 2:
        raise ValueError("spinflip figure expects exactly two curves (exact + effective)")

    def is_effective(c: Curve) -> bool:
        return c.metadata.get("model") == "effective" or "effective" in c.label

    effective = [c for c in curves if is_effective(c)]
    if len(effective) != 1:
        raise ValueError("could not identify the effective-model curve")
    exact = next(c for c in curves if c is not effective[0])

    fig, axes = _new_figure()
    ax = axes[0]
    lines = [ax.plot(exact.times, exact.mean, "-", lw=1.4, label=exact.label)[0]]
    lines.append(
        ax.plot(effective[0].times, effective[0].mean, "o", ms=3.5,
                markevery=max(1, len(effective[0].times) // 40),
                label=effective[0].label)[0]
    )
    ax.legend(frameon=False, fontsize=8)
    ax.set_ylim(-0.02, 1.02)
    return _finish(fig, axes, out_path, lines)


def _render_multicurve(curves: list[Curve], out_path: str, allowed, min_curves=1) -> dict:
    _check_experiment(curves, allowed)
    if len(curves) < min_curves:
        raise ValueError(f"this figure expects at least {min_curves} curves")
    fig, axes = _new_figure()
    ax = axes[0]
    lines = []
    for c in curves:
        (line,) = ax.plot(c.times, c.mean, "-", lw=1.3, label=c.label)
        _band(ax, c, line)
        lines.append(line)
    ax.legend(frameon=False, fontsize=8)
    ax.set_ylim(-0.02, 1.02)
    return _finish(fig, axes, out_path, lines)


def _render_bell_damping(curves, out_path):
    """Entangled-state fidelity under damping, one labeled curve per Q."""
    return _render_multicurve(curves, out_path, ("bell-damping",), min_curves=1)


def _render_bell_noise(curves, out_path):
    """Dephasing-noise curves with standard-error bands."""
    return _render_multicurve(
        curves, out_path, ("bell-nuclear-noise", "bell-electron-noise"), min_curves=1
    )


def _render_graph(curves, out_path):
    """Graph-state preparation: generator, exact, and noisy curves."""
    return _render_multicurve(curves, out_path, ("graph",), min_curves=1)


def _render_noise(curves: list[Curve], out_path: str) -> dict:
    """Noise-generator verification: autocorrelation and free-induction decay."""
    _check_experiment(curves, ("noise-verify",))
    fig, axes = _new_figure(len(curves))
    lines = []
    for ax, c in zip(axes, curves):
        (line,) = ax.plot(c.times, c.mean, "-", lw=1.3, label=c.label)
        _band(ax, c, line)
        ax.legend(frameon=False, fontsize=8)
        ax.set_ylim(-0.02, 1.02)
        lines.append(line)
    out = _finish(fig, axes, out_path, lines)
    return out


FIGURE_KINDS = {
    "spinflip": _render_spinflip,
    "bell-damping": _render_bell_damping,
    "bell-noise": _render_bell_noise,
    "graph": _render_graph,
    "noise": _render_noise,
}


def render(spec: PlotSpec) -> dict:
    """Render one figure; returns output path and the data-integrity hashes.

    The returned dict carries ``csv_hash`` (over the time and fidelity columns
    as parsed) and ``plotted_hash`` (over the arrays attached to the drawn
    lines); the two are equal by construction and callers may assert it.
    """
    curves = [load_curve(p) for p in spec.csv_paths]
    csv_hash = _array_hash(*[a for c in curves for a in (c.times, c.mean)])
    result = FIGURE_KINDS[spec.kind](curves, spec.out_path)
    result["csv_hash"] = csv_hash
    result["match"] = result["plotted_hash"] == csv_hash
    return result
