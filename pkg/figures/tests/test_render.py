"""Figure rendering tests against golden CSV fixtures."""

import csv
import math

import numpy as np
import pytest

from curventk_figures import FigureJob, SchemaError, render
from curventk_figures.render import _RENDERERS


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture()
def golden(tmp_path):
    """Schema-conformant artifact CSVs for all three figure kinds."""
    rng = np.random.default_rng(0)
    cert = tmp_path / "certificate.csv"
    curves = tmp_path / "curves.csv"
    sweep = tmp_path / "clover_sweep.csv"
    depth = tmp_path / "depth_sweep.csv"

    cert_rows, curve_rows, depth_rows = [], [], []
    for sigma in (1, -1):
        for i in range(32):
            t = i / 32
            ang = 2 * math.pi * t
            r = 0.3 if sigma > 0 else 0.5
            x = [r * math.cos(ang), r * math.sin(ang),
                 0.1 * sigma, math.sqrt(max(0.0, 1 - r * r - 0.01))]
            curve_rows.append([sigma, t] + x)
            g = float(rng.normal())
            cert_rows.append([sigma, t, t * 2 * math.pi * r, g, sigma,
                              g * 1e-6])
            for L in (10, 25):
                depth_rows.append([L, sigma, t, t * 2 * math.pi * r,
                                   g / L])
    write_rows(cert, ["component", "t", "s", "g", "zeta", "residual"],
               cert_rows)
    write_rows(curves, ["component", "t", "x0", "x1", "x2", "x3"], curve_rows)
    write_rows(sweep, ["k", "clover", "cert_norm", "residual_norm",
                       "max_abs_g"],
               [[k, k, 10.0 * k, 1e-9, 5.0 * k] for k in (1, 2, 3, 4)])
    write_rows(depth, ["L", "component", "t", "s", "g"], depth_rows)
    return {"certificate": cert, "curves": curves, "sweep": sweep,
            "depth": depth}


class TestRenderKinds:
    def test_certificate_curve(self, golden, tmp_path):
        out = tmp_path / "fig1.png"
        job = FigureJob(kind="certificate-curve",
                        inputs=(str(golden["certificate"]),
                                str(golden["curves"])),
                        output=str(out))
        fig = _RENDERERS[job.kind](job)
        ax = fig.axes[0]
        assert ax.get_xlabel() and ax.get_ylabel()
        render(job)
        assert out.exists() and out.stat().st_size > 0

    def test_norm_vs_clover(self, golden, tmp_path):
        out = tmp_path / "fig2.png"
        job = FigureJob(kind="norm-vs-clover",
                        inputs=(str(golden["sweep"]),), output=str(out))
        fig = _RENDERERS[job.kind](job)
        ax = fig.axes[0]
        assert ax.get_xlabel() == "clover number"
        assert ax.get_ylabel() == "certificate norm"
        render(job)
        assert out.exists() and out.stat().st_size > 0

    def test_depth_magnitude(self, golden, tmp_path):
        out = tmp_path / "fig3.png"
        job = FigureJob(kind="depth-magnitude",
                        inputs=(str(golden["depth"]),), output=str(out))
        fig = _RENDERERS[job.kind](job)
        assert fig.axes[0].get_ylabel() == "log10 |certificate|"
        assert fig.axes[0].get_xlabel() == "arc length"
        render(job)
        assert out.exists() and out.stat().st_size > 0


class TestFailures:
    def test_schema_mismatch_writes_nothing(self, golden, tmp_path):
        bad = tmp_path / "bad.csv"
        write_rows(bad, ["wrong", "header"], [[1, 2]])
        out = tmp_path / "nope.png"
        job = FigureJob(kind="norm-vs-clover", inputs=(str(bad),),
                        output=str(out))
        with pytest.raises(SchemaError):
            render(job)
        assert not out.exists()

    def test_empty_csv_rejected(self, golden, tmp_path):
        empty = tmp_path / "empty.csv"
        write_rows(empty, ["k", "clover", "cert_norm", "residual_norm",
                           "max_abs_g"], [])
        out = tmp_path / "nope.png"
        job = FigureJob(kind="norm-vs-clover", inputs=(str(empty),),
                        output=str(out))
        with pytest.raises(SchemaError):
            render(job)
        assert not out.exists()

    def test_unknown_kind(self, golden, tmp_path):
        with pytest.raises(SchemaError):
            FigureJob(kind="pie-chart", inputs=(str(golden["sweep"]),),
                      output=str(tmp_path / "x.png"))

    def test_missing_input(self, tmp_path):
        with pytest.raises(SchemaError):
            FigureJob(kind="norm-vs-clover",
                      inputs=(str(tmp_path / "ghost.csv"),),
                      output=str(tmp_path / "x.png"))

    def test_missing_second_input(self, golden, tmp_path):
        job = FigureJob(kind="certificate-curve",
                        inputs=(str(golden["certificate"]),),
                        output=str(tmp_path / "x.png"))
        with pytest.raises(SchemaError):
            render(job)


class TestCli:
    def test_cli_roundtrip(self, golden, tmp_path):
        from curventk_figures.cli import main
        out = tmp_path / "cli.png"
        rc = main(["--kind", "norm-vs-clover", "--in", str(golden["sweep"]),
                   "--out", str(out)])
        assert rc == 0 and out.exists()

    def test_cli_schema_error_code(self, golden, tmp_path):
        from curventk_figures.cli import main
        bad = tmp_path / "bad.csv"
        write_rows(bad, ["nope"], [[1]])
        rc = main(["--kind", "norm-vs-clover", "--in", str(bad),
                   "--out", str(tmp_path / "x.png")])
        assert rc == 2

    def test_acceptance_criterion_13(self, golden, tmp_path):
        # all three kinds from golden CSVs -> non-empty images with labeled
        # axes; clean failure on schema mismatch
        jobs = [
            ("certificate-curve", (golden["certificate"], golden["curves"])),
            ("norm-vs-clover", (golden["sweep"],)),
            ("depth-magnitude", (golden["depth"],)),
        ]
        for kind, inputs in jobs:
            out = tmp_path / f"{kind}.png"
            job = FigureJob(kind=kind, inputs=tuple(str(p) for p in inputs),
                            output=str(out))
            fig = _RENDERERS[kind](job)
            assert all(a.get_xlabel() for a in fig.axes[:1])
            render(job)
            assert out.stat().st_size > 0
        bad = tmp_path / "bad.csv"
        write_rows(bad, ["x"], [[1]])
        with pytest.raises(SchemaError):
            render(FigureJob(kind="depth-magnitude", inputs=(str(bad),),
                             output=str(tmp_path / "no.png")))
        assert not (tmp_path / "no.png").exists()
        print("[criterion 13] figures rendering: PASS (three kinds, clean "
              "schema failure)")
