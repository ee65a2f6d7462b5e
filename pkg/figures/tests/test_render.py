import json
import os

import numpy as np
import pytest

from nvmech_figures.cli import main
from nvmech_figures.render import FIGURE_KINDS, PlotSpec, load_curve, render


def write_curve(tmp_path, name, experiment, times, mean, stderr=None, metadata=None):
    stderr = np.zeros_like(mean) if stderr is None else np.asarray(stderr)
    lines = ["time_s,mean_fidelity,stderr"]
    for t, m, s in zip(times, mean, stderr):
        lines.append(f"{t:.12g},{m:.12g},{s:.12g}")
    csv_path = tmp_path / f"{name}.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    sidecar = {"experiment": experiment, "record": name, "metadata": metadata or {}}
    (tmp_path / f"{name}.json").write_text(json.dumps(sidecar))
    return str(csv_path)


@pytest.fixture
def spinflip_pair(tmp_path):
    t = np.linspace(0, 5e-3, 40)
    exact = write_curve(tmp_path, "spinflip_exact", "spinflip",
                        t, 0.5 - 0.5 * np.cos(400 * np.pi * t),
                        metadata={"model": "exact"})
    eff = write_curve(tmp_path, "spinflip_effective", "spinflip",
                      t, np.sin(200 * np.pi * t) ** 2,
                      metadata={"model": "effective"})
    return exact, eff


class TestLoadCurve:
    def test_roundtrip(self, tmp_path):
        t = np.array([0.0, 1e-3])
        path = write_curve(tmp_path, "x", "spinflip", t, np.array([0.1, 0.9]))
        c = load_curve(path)
        assert np.array_equal(c.times, t)
        assert c.experiment == "spinflip"
        assert c.label == "x"

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_curve(str(p))

    def test_header_only_rejected(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("time_s,mean_fidelity,stderr\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_curve(str(p))

    def test_wrong_header_rejected(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("t,f,s\n0,1,0\n")
        with pytest.raises(ValueError, match="header"):
            load_curve(str(p))

    def test_non_numeric_rejected(self, tmp_path):
        p = tmp_path / "n.csv"
        p.write_text("time_s,mean_fidelity,stderr\n0,oops,0\n")
        with pytest.raises(ValueError, match="non-numeric"):
            load_curve(str(p))

    def test_sidecar_optional(self, tmp_path):
        p = tmp_path / "bare.csv"
        p.write_text("time_s,mean_fidelity,stderr\n0,0.5,0\n")
        c = load_curve(str(p))
        assert c.sidecar == {}
        assert c.label == "bare"


class TestPlotSpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown figure kind"):
            PlotSpec(kind="pie", csv_paths=("x.csv",), out_path="o.png")

    def test_missing_file(self):
        with pytest.raises(ValueError, match="not found"):
            PlotSpec(kind="spinflip", csv_paths=("missing.csv",), out_path="o.png")

    def test_no_inputs(self):
        with pytest.raises(ValueError, match="at least one"):
            PlotSpec(kind="spinflip", csv_paths=(), out_path="o.png")


class TestRender:
    def test_spinflip_hash_matches(self, tmp_path, spinflip_pair):
        out = str(tmp_path / "fig.png")
        result = render(PlotSpec("spinflip", spinflip_pair, out))
        assert result["match"]
        assert result["plotted_hash"] == result["csv_hash"]
        assert os.path.getsize(out) > 0

    def test_spinflip_needs_identifiable_pair(self, tmp_path):
        t = np.linspace(0, 1e-3, 5)
        a = write_curve(tmp_path, "a", "spinflip", t, t * 0)
        b = write_curve(tmp_path, "b", "spinflip", t, t * 0)
        with pytest.raises(ValueError, match="effective"):
            render(PlotSpec("spinflip", (a, b), str(tmp_path / "o.png")))

    def test_experiment_kind_mismatch_rejected(self, tmp_path):
        t = np.linspace(0, 1e-3, 5)
        path = write_curve(tmp_path, "q", "graph", t, t * 0 + 0.5)
        with pytest.raises(ValueError, match="does not match"):
            render(PlotSpec("bell-damping", (path,), str(tmp_path / "o.png")))

    def test_bell_damping_triple(self, tmp_path):
        t = np.linspace(0, 1.25e-3, 20)
        paths = tuple(
            write_curve(tmp_path, f"bell-damping_q1e+{k:02d}", "bell-damping",
                        t, np.linspace(0.25, 1.0 - 0.01 * k, 20),
                        metadata={"q_factor": 10.0**k})
            for k in (5, 6, 7)
        )
        out = str(tmp_path / "fig3a.png")
        result = render(PlotSpec("bell-damping", paths, out))
        assert result["match"]

    def test_noise_panels(self, tmp_path):
        t = np.linspace(0, 40e-3, 30)
        acf = write_curve(tmp_path, "noise-autocorrelation", "noise-verify",
                          t, np.exp(-t / 20e-3))
        fid = write_curve(tmp_path, "noise-fid", "noise-verify",
                          t, np.exp(-((t / 30e-3) ** 2)))
        result = render(PlotSpec("noise", (acf, fid), str(tmp_path / "fig6.png")))
        assert result["match"]

    def test_stderr_band_does_not_change_hash(self, tmp_path):
        t = np.linspace(0, 1.25e-3, 20)
        mean = np.linspace(0.25, 0.9, 20)
        path = write_curve(tmp_path, "bell-nuclear-noise_t2n1ms_p1",
                           "bell-nuclear-noise", t, mean, stderr=np.full(20, 0.01))
        result = render(PlotSpec("bell-noise", (path,), str(tmp_path / "o.png")))
        assert result["match"]

    def test_svg_output(self, tmp_path, spinflip_pair):
        out = str(tmp_path / "fig.svg")
        result = render(PlotSpec("spinflip", spinflip_pair, out))
        assert result["match"]
        assert open(out).read(200).lstrip().startswith("<?xml")

    def test_all_kinds_registered(self):
        assert set(FIGURE_KINDS) == {
            "spinflip", "bell-damping", "bell-noise", "graph", "noise"
        }


class TestCLI:
    def test_render_success(self, tmp_path, spinflip_pair, capsys):
        out = str(tmp_path / "fig.png")
        rc = main(["render", "--kind", "spinflip", "--in", *spinflip_pair,
                   "--out", out])
        assert rc == 0
        assert capsys.readouterr().out.strip() == out

    def test_empty_csv_exit_two(self, tmp_path, capsys):
        p = tmp_path / "e.csv"
        p.write_text("")
        rc = main(["render", "--kind", "graph", "--in", str(p),
                   "--out", str(tmp_path / "o.png")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_missing_input_exit_two(self, tmp_path, capsys):
        rc = main(["render", "--kind", "graph", "--in", "nope.csv",
                   "--out", str(tmp_path / "o.png")])
        assert rc == 2
