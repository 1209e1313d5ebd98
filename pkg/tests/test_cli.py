# tests/test_cli.py

import json
from fractions import Fraction

import pytest
from click.testing import CliRunner

from qp_recast.cli import EXIT_PARSE, EXIT_PIPELINE, EXIT_REPLAY, EXIT_VERIFY, recast
from qp_recast.fileformat import load_report


@pytest.fixture
def run():
    """Invoke the `recast` group and return the click Result."""
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(recast, [str(a) for a in args])

    return invoke


@pytest.mark.feature
def test_info_brusselator(run, fixture_file):
    result = run("info", fixture_file("brusselator"))
    assert result.exit_code == 0
    assert "n=2 m=4 rank(A)=2 rank(B)=2 rank(M)=2 standard=yes" in result.output
    assert "nonlinear terms: 4" in result.output


@pytest.mark.feature
def test_info_reports_rank_deficiency(run, fixture_file):
    result = run("info", fixture_file("morse_lv"))
    assert result.exit_code == 0
    assert "rank(M)=3 standard=no" in result.output
    assert "first integrals from rank(M): 2" in result.output


@pytest.mark.feature
def test_standardize_writes_a_replayable_report(run, fixture_file, tmp_path):
    """
    GIVEN the Morse Lotka-Volterra system file
    WHEN `standardize` is run
    THEN a report is written, the summary shows n 5 -> 3 and the report replays
    """
    out = tmp_path / "std.json"
    result = run("standardize", fixture_file("morse_lv"), out)
    assert result.exit_code == 0
    assert "n 5 -> 3" in result.output
    assert "2 first integrals" in result.output
    report = load_report(out)
    assert report.output.n == 3


@pytest.mark.feature
def test_to_lv_full(run, fixture_file, tmp_path):
    out = tmp_path / "lv.json"
    result = run("to-lv", fixture_file("morse"), out, "--embed", "full")
    assert result.exit_code == 0
    assert "n 3 -> 5" in result.output
    assert load_report(out).output.B.is_identity()


@pytest.mark.feature
def test_to_lv_rejects_bad_partial_count(run, fixture_file, tmp_path):
    """
    GIVEN the Brusselator, for which m - n = 2
    WHEN a partial embedding of 5 variables is requested
    THEN the command exits with the pipeline code and names the stage
    """
    result = run("to-lv", fixture_file("brusselator"), tmp_path / "x.json", "--embed", "partial=5")
    assert result.exit_code == EXIT_PIPELINE
    assert "error in stage 'to_lotka_volterra[partial=5]': BadMode" in result.output
    assert not (tmp_path / "x.json").exists()


@pytest.mark.feature
def test_to_unimonomial_reports_projection_invariance(run, fixture_file, tmp_path):
    out = tmp_path / "um.json"
    result = run("to-unimonomial", fixture_file("brusselator"), out, "--embed", "full")
    assert result.exit_code == 0
    assert "projection invariance: ok" in result.output
    assert load_report(out).projection.retained_count == 2


@pytest.mark.feature
def test_transform_and_newtime(run, fixture_file, tmp_path):
    out = tmp_path / "t.json"
    result = run("transform", fixture_file("brusselator"), out, "--matrix", "1,0;0,2")
    assert result.exit_code == 0
    assert load_report(out).trace[0].stage == "transform"

    result = run("newtime", fixture_file("rank_deficient_a"), out, "--beta=-1,0")
    assert result.exit_code == 0
    assert load_report(out).output.rank_summary()["A"] == 2


@pytest.mark.feature
def test_transform_errors(run, fixture_file, tmp_path):
    out = tmp_path / "t.json"
    singular = run("transform", fixture_file("brusselator"), out, "--matrix", "1,1;1,1")
    assert singular.exit_code == EXIT_PIPELINE
    assert "SingularMatrix" in singular.output

    unreadable = run("transform", fixture_file("brusselator"), out, "--matrix", "a,b")
    assert unreadable.exit_code == 2
    assert "--matrix" in unreadable.output


@pytest.mark.feature
def test_first_integrals(run, fixture_file):
    result = run("first-integrals", fixture_file("exciton"), "--lv")
    assert result.exit_code == 0
    assert "3 first integrals" in result.output
    assert "alpha of y3" in result.output

    result = run("first-integrals", fixture_file("morse_lv"))
    assert "2 first integrals" in result.output


@pytest.mark.feature
def test_verify_accepts_a_correct_recast(run, fixture_file, tmp_path):
    """
    GIVEN the standardized Morse Lotka-Volterra system
    WHEN it is verified from a point on the level set
    THEN the command prints OK and exits 0
    """
    out = tmp_path / "std.json"
    run("standardize", fixture_file("morse_lv"), out)
    result = run(
        "verify",
        fixture_file("morse_lv"),
        out,
        "--x0",
        "1,1,0.25,0.0625,1",
        "--t-end",
        "2",
    )
    assert result.exit_code == 0, result.output
    assert "OK:" in result.output


@pytest.mark.feature
def test_verify_unimonomial_report_with_defaults(run, fixture_file, tmp_path):
    out = tmp_path / "um.json"
    run("to-unimonomial", fixture_file("brusselator"), out, "--embed", "full")
    result = run("verify", fixture_file("brusselator"), out)
    assert result.exit_code == 0, result.output


@pytest.mark.feature
def test_verify_fails_when_positivity_is_lost(run, fixture_file, tmp_path):
    out = tmp_path / "std.json"
    run("standardize", fixture_file("blowup"), out)
    result = run("verify", fixture_file("blowup"), out, "--t-end", "2")
    assert result.exit_code == EXIT_VERIFY


@pytest.mark.feature
def test_verify_rejects_reports_of_other_systems(run, fixture_file, tmp_path):
    out = tmp_path / "std.json"
    run("standardize", fixture_file("brusselator"), out)
    result = run("verify", fixture_file("morse"), out)
    assert result.exit_code == EXIT_REPLAY


@pytest.mark.feature
def test_tampered_report_exits_with_replay_code(run, fixture_file, tmp_path):
    out = tmp_path / "std.json"
    run("standardize", fixture_file("morse_lv"), out)
    data = json.loads(out.read_text())
    data["output"]["lambda"][0] = "7"
    out.write_text(json.dumps(data))
    result = run("verify", fixture_file("morse_lv"), out)
    assert result.exit_code == EXIT_REPLAY


@pytest.mark.feature
def test_malformed_system_file_exits_with_parse_code(run, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "lambda": ["1"],\n  "A": [["1"]],\n  "B": [["x"]]\n}\n')
    result = run("info", path)
    assert result.exit_code == EXIT_PARSE
    assert "line 4" in result.output


@pytest.mark.feature
def test_selfcheck(run):
    result = run("selfcheck", "--seed", "3", "--count", "4")
    assert result.exit_code == 0, result.output
    assert "class invariant: 8 runs, ok" in result.output
    assert "standardization: 4 runs, ok" in result.output


@pytest.mark.feature
def test_standardize_with_levels(run, fixture_file, tmp_path):
    """
    GIVEN the Morse Lotka-Volterra system and levels 2 and 1 for its constants of motion
    WHEN `standardize --levels` is run
    THEN the report records the levels and the first integral for level 2 equals 1/2
    """
    out = tmp_path / "std.json"
    result = run("standardize", fixture_file("morse_lv"), out, "--levels", "2,1")
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert report.first_integrals[0].constant == Fraction(1, 2)
    assert report.recipe.levels == (2, 1)

    wrong_count = run("standardize", fixture_file("morse_lv"), out, "--levels", "2")
    assert wrong_count.exit_code == EXIT_PIPELINE
    assert "maximize_rank_M" in wrong_count.output

    unreadable = run("standardize", fixture_file("morse_lv"), out, "--levels", "two")
    assert unreadable.exit_code == 2
    assert "--levels" in unreadable.output


@pytest.mark.feature
def test_edited_projection_exits_with_replay_code(run, fixture_file, tmp_path):
    out = tmp_path / "um.json"
    run("to-unimonomial", fixture_file("brusselator"), out, "--embed", "full")
    data = json.loads(out.read_text())
    data["projection"]["P"][0][0] = "5"
    out.write_text(json.dumps(data))
    result = run("verify", fixture_file("brusselator"), out)
    assert result.exit_code == EXIT_REPLAY
