"""Test report rows, CSV/JSON emission, the markdown report and figures."""
import json
import tempfile
from pathlib import Path

import pandas as pd
import pytest

from src.pdsketch.certify import OutputDistribution, check_pseudodeterministic
from src.pdsketch.errors import InvalidSpecError
from src.pdsketch.reporting import (
    REPORT_FIELDS,
    TrialReport,
    emit_report,
    load_report,
    report_format,
    reports_frame,
    save_distribution_figure,
    save_space_figure,
    write_markdown_report,
)
from src.pdsketch.trials import TrialConfig, run_trials


@pytest.fixture(scope="module")
def report() -> TrialReport:
    cfg = TrialConfig.build("nonzero-row-pd", "gen:random-sparse-row-matrix:n=16,rows=2,noise=2,seed=3", trials=40)
    outcome = run_trials(cfg)
    return TrialReport.from_outcome(outcome, check_pseudodeterministic(outcome.distribution), valid=None)


def test_report_row(report):
    """Test the fields drawn from the outcome and the check."""
    assert report.algorithm == "nonzero-row-pd"
    assert report.trials == 40
    assert report.property == "pd"
    assert report.verdict == "pass"
    assert report.peak_words == 32
    assert report.cover_50 == 1
    assert report.zero_error_violations is None
    assert REPORT_FIELDS[0] == "algorithm"


def test_csv_round_trip_keeps_field_order(report):
    """Test that CSV output has the fixed columns and reloads."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = emit_report([report, report], "csv", Path(tmpdir) / "out" / "r.csv")
        frame = load_report(path)
        assert list(frame.columns) == list(REPORT_FIELDS)
        assert len(frame) == 2
        assert frame.loc[0, "modal_output"] == report.modal_output
        assert report_format(path) == "csv"


def test_json_output(report):
    """Test the JSON payload layout."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = emit_report([report], "json", Path(tmpdir) / "r.json")
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["fields"] == list(REPORT_FIELDS)
        assert payload["reports"][0]["verdict"] == "pass"
        assert report_format(path) == "json"
        assert load_report(path).loc[0, "algorithm"] == "nonzero-row-pd"


def test_empty_report_writes_header():
    """Test that no reports still produce a header row."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = emit_report([], "csv", Path(tmpdir) / "empty.csv")
        assert path.read_text(encoding="utf-8").strip() == ",".join(REPORT_FIELDS)
        with pytest.raises(InvalidSpecError):
            emit_report([], "xml", Path(tmpdir) / "x.xml")


def test_markdown_report(report):
    """Test the certificate table, verdict counts and figure links."""
    with tempfile.TemporaryDirectory() as tmpdir:
        figure = Path(tmpdir) / "figures" / "space_scaling.png"
        space = pd.DataFrame({"label": ["p=1"], "n": [64], "peak_words": [66]})
        path = write_markdown_report(
            path=Path(tmpdir) / "REPORT.md",
            certificates=reports_frame([report]),
            space=space,
            slopes={"p=1": 1.0},
            figure_paths=[figure],
        )
        text = path.read_text(encoding="utf-8")
        assert "## Certificates" in text
        assert "- Verdicts: pass 1, fail 0, indeterminate 0" in text
        assert "- log-log slope for p=1: 1.000" in text
        assert "![Space Scaling](figures/space_scaling.png)" in text

        empty = write_markdown_report(path=Path(tmpdir) / "EMPTY.md", certificates=reports_frame([]))
        assert "No experiments were run." in empty.read_text(encoding="utf-8")


def test_figures():
    """Test that both figures are written and empty inputs are skipped."""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir)
        frame = pd.DataFrame({"label": ["a", "a", "b", "b"], "n": [4, 8, 4, 8], "peak_words": [2, 4, 3, 3]})
        assert save_space_figure(frame, x="n", out_path=out / "space.png")
        assert (out / "space.png").stat().st_size > 0
        assert not save_space_figure(frame, x="m", out_path=out / "none.png")

        dist = OutputDistribution({"1": 3, "2": 1}, 4)
        assert save_distribution_figure(dist, out_path=out / "dist.png", title="outputs")
        assert (out / "dist.png").exists()
