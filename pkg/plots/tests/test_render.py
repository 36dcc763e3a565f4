"""Rendering: all five figure kinds from the shipped round-band trace, with
envelope constants agreeing with the shipped verify summary."""

import shutil
import subprocess
from pathlib import Path

import pytest

from cylflow_plots import KINDS, PlotJob, SchemaError, read_summary, render

DATA = Path(__file__).parent / "data"
TRACE = DATA / "sphere_band_deep.csv"
SUMMARY = DATA / "sphere_band_deep_summary.tsv"


@pytest.mark.parametrize("kind", KINDS)
def test_each_kind_renders(tmp_path, kind):
    out = tmp_path / f"{kind}.png"
    result = render(PlotJob(csv_path=str(TRACE), kind=kind, out_path=str(out)))
    assert out.exists() and out.stat().st_size > 5000
    assert result.constant_source == "refit"


@pytest.mark.parametrize("kind", KINDS)
def test_refit_constants_match_verify_summary(tmp_path, kind):
    from cylflow_plots.render import SUMMARY_KEYS
    out = tmp_path / f"{kind}.png"
    result = render(PlotJob(csv_path=str(TRACE), kind=kind, out_path=str(out)))
    reported = read_summary(SUMMARY)[SUMMARY_KEYS[kind]]["constant"]
    assert abs(result.constant - reported) <= 1e-12 * max(1.0, abs(reported))


@pytest.mark.parametrize("kind", KINDS)
def test_summary_constants_are_used_when_given(tmp_path, kind):
    from cylflow_plots.render import SUMMARY_KEYS
    out = tmp_path / f"{kind}.png"
    result = render(PlotJob(csv_path=str(TRACE), kind=kind, out_path=str(out),
                            constants_path=str(SUMMARY)))
    assert result.constant_source == f"summary:{SUMMARY_KEYS[kind]}"
    assert result.constant == read_summary(SUMMARY)[SUMMARY_KEYS[kind]]["constant"]


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaError, match="kind"):
        PlotJob(csv_path=str(TRACE), kind="waterfall", out_path=str(tmp_path / "x.png"))


def test_render_is_deterministic(tmp_path):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    render(PlotJob(csv_path=str(TRACE), kind="blowup", out_path=str(a)))
    render(PlotJob(csv_path=str(TRACE), kind="blowup", out_path=str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_cli_smoke(tmp_path):
    from cylflow_plots.cli import main
    out = tmp_path / "fig.png"
    assert main([str(TRACE), "--kind", "lengths", "--out", str(out),
                 "--constants", str(SUMMARY)]) == 0
    assert out.exists()
    assert main([str(TRACE), "--kind", "lengths", "--out",
                 str(tmp_path / "nodir" / "fig.png")]) == 1


@pytest.mark.skipif(shutil.which("cylflow") is None,
                    reason="flow package CLI not on PATH")
def test_end_to_end_against_fresh_run(tmp_path):
    """Full interface exercise: produce a trace + summary with the flow
    CLI, then render from them."""
    cfg = tmp_path / "band.cfg"
    cfg.write_text(
        "scenario = cos_band\na = 1.0\nrho = 0.7853981633974483\nn = 64\n"
        "scheme = implicit_euler\nstop = area_below\nstop_value = 1e-2\n"
        f"record_every = 1\nout = {tmp_path / 'band.csv'}\n")
    run = subprocess.run(["cylflow", "run", str(cfg)], capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    summary = tmp_path / "band_summary.tsv"
    subprocess.run(["cylflow", "verify", str(cfg), "--suite", "asymptotic",
                    "--summary", str(summary)], capture_output=True, text=True)
    out = tmp_path / "band.png"
    result = render(PlotJob(csv_path=str(tmp_path / "band.csv"),
                            kind="lengths", out_path=str(out),
                            constants_path=str(summary)))
    assert out.exists()
    assert result.constant > 0
