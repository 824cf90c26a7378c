import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from oracles import detect_oracle
from sgdecomp import DecompositionModel, PeakComponent, compute_metrics, sample_model
from sgdecomp.cli import EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, main
from sgdecomp.formats import parse_profile_csv, parse_report

DATA = Path(__file__).parent / "data"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# ---------------------------------------------------------------- decompose

def test_decompose_overlapping_fixture(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, err = run(["decompose", DATA / "overlap.csv", "-o", out], capsys)
    assert code == EXIT_OK, err
    doc = json.loads(out.read_text())
    assert doc["fit"]["model"]["n_peaks"] == 3
    assert doc["fit"]["metrics"]["r_squared"] >= 0.99
    assert doc["label"] == "overlap"
    assert doc["fit"]["diagnostics"]["converged"] is True


def test_decompose_to_stdout_is_deterministic(capsys):
    a = run(["decompose", DATA / "skewed.csv"], capsys)
    b = run(["decompose", DATA / "skewed.csv"], capsys)
    assert a[0] == EXIT_OK and a[1] == b[1]
    assert json.loads(a[1])["fit"]["model"]["peaks"][0]["alpha"] < -1


def test_decompose_symmetric(capsys):
    code, out, _ = run(["decompose", DATA / "table6_sunday.csv", "--symmetric"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["fit"]["diagnostics"]["symmetric"] is True
    assert all(p["alpha"] == 0 for p in doc["fit"]["model"]["peaks"])


def test_decompose_csv_format(capsys):
    code, out, _ = run(["decompose", DATA / "overlap.csv", "--format", "csv"], capsys)
    table = rows(out)
    assert code == EXIT_OK and table[0] == ["A", "mu", "sigma", "alpha"] and len(table) == 4


def test_decompose_from_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO((DATA / "symmetric.csv").read_bytes())))
    code, out, _ = run(["decompose", "-", "--label", "piped"], capsys)
    assert code == EXIT_OK and json.loads(out)["label"] == "piped"


def test_malformed_csv_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text((DATA / "overlap.csv").read_text().replace("\n5,", "\n5,x"))
    code, out, err = run(["decompose", bad], capsys)
    assert code == EXIT_INVALID
    assert "line 7" in err and out == ""


def test_missing_input_is_invalid(tmp_path, capsys):
    code, _, err = run(["decompose", tmp_path / "nope.csv"], capsys)
    assert code == EXIT_INVALID and "error" in err


def test_flat_profile_has_no_peaks(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    flat.write_text("\n".join(["5"] * 24))
    code, _, err = run(["decompose", flat], capsys)
    # a constant day is one 24-hour plateau, so it still yields a candidate
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED), err


def test_non_convergence_exit_code_still_writes(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["decompose", DATA / "overlap.csv", "--max-iterations", "1", "-o", out], capsys)
    assert code == EXIT_NOT_CONVERGED
    assert json.loads(out.read_text())["fit"]["diagnostics"]["converged"] is False


def test_emit_curves_default_path(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = run(["decompose", DATA / "overlap.csv", "-o", out, "--emit-curves", "0.1"], capsys)
    assert code == EXIT_OK
    table = rows((tmp_path / "report.curves.csv").read_text())
    assert table[0] == ["t", "baseline", "peak_1", "peak_2", "peak_3", "total"]
    assert len(table) == 232


def test_emit_curves_needs_a_path_when_report_on_stdout(capsys):
    code, out, err = run(["decompose", DATA / "overlap.csv", "--emit-curves", "0.5"], capsys)
    assert code == EXIT_INVALID and "--curves-output" in err and out == ""


def test_emit_curves_rejects_bad_step_before_fitting(tmp_path, capsys):
    code, _, err = run(["decompose", DATA / "overlap.csv", "--emit-curves", "2",
                        "--curves-output", tmp_path / "c.csv"], capsys)
    assert code == EXIT_INVALID and "step" in err


def test_emit_peaks(tmp_path, capsys):
    peaks = tmp_path / "peaks.csv"
    code, _, _ = run(["decompose", DATA / "overlap.csv", "--emit-peaks", peaks], capsys)
    table = rows(peaks.read_text())
    assert code == EXIT_OK and table[0] == ["hour", "value", "kind"]
    values = list(parse_profile_csv((DATA / "overlap.csv").read_text()).values)
    assert {int(r[0]): r[2] for r in table[1:]} == detect_oracle(values)
    assert len(table) == 4


def test_fit_flags_reach_the_fit(capsys):
    code, out, _ = run(["decompose", DATA / "overlap.csv", "--precision", "full",
                        "--sigma-starts", "2", "--alpha-starts", "0"], capsys)
    diag = json.loads(out)["fit"]["diagnostics"]
    assert code == EXIT_OK and diag["starts_tried"] == 1 and diag["best_start"] == [2.0, 0.0]


@pytest.mark.parametrize("flag", [["--sigma-bounds", "1"], ["--precision", "0"], ["--alpha-starts", "a,b"]])
def test_bad_flag_values_exit_nonzero(flag, capsys):
    with pytest.raises(SystemExit) as err:
        main(["decompose", str(DATA / "overlap.csv"), *flag])
    assert err.value.code != 0


def test_invalid_config_is_exit_1(capsys):
    code, _, err = run(["decompose", DATA / "overlap.csv", "--sigma-bounds", "5,1"], capsys)
    assert code == EXIT_INVALID and err


def test_pipeline_closure(tmp_path, capsys):
    report, scenario, series = tmp_path / "r.json", tmp_path / "fit.scenario", tmp_path / "s.csv"
    assert run(["decompose", DATA / "overlap.csv", "-o", report, "--precision", "full",
                "--emit-scenario", scenario], capsys)[0] == EXIT_OK
    assert run(["generate", scenario, "-o", series], capsys)[0] == EXIT_OK
    model = parse_report(report.read_bytes()).fit.model
    generated = np.array([float(r[2]) for r in rows(series.read_text())[1:]])
    np.testing.assert_array_equal(generated, sample_model(model))


# ---------------------------------------------------------------- compare

def test_compare_skewed_fixture(capsys):
    code, out, _ = run(["compare", DATA / "skewed.csv"], capsys)
    doc = json.loads(out)
    cmp = doc["comparison"]
    assert code == EXIT_OK
    assert doc["fit"]["metrics"]["rmse"] < doc["symmetric"]["metrics"]["rmse"]
    assert cmp["rmse_ratio"] > 1.5
    assert cmp["warm_start_holds"] is True and cmp["symmetric_converged"] is True
    assert cmp["skewed_loss"] <= cmp["symmetric_loss"]


def test_compare_symmetric_fixture(capsys):
    code, out, _ = run(["compare", DATA / "symmetric.csv", "--precision", "full"], capsys)
    delta = json.loads(out)["comparison"]["delta"]
    assert code == EXIT_OK
    assert abs(delta["rmse"]) <= 1e-6 and abs(delta["mae"]) <= 1e-6


def test_compare_flags_non_convergence(capsys):
    code, out, _ = run(["compare", DATA / "overlap.csv", "--max-iterations", "1"], capsys)
    assert code == EXIT_NOT_CONVERGED
    assert json.loads(out)["comparison"]["symmetric_converged"] is False


# ---------------------------------------------------------------- generate

def test_generate_table6(tmp_path, capsys):
    code, out, _ = run(["generate", "table6.scenario"], capsys)
    table = rows(out)
    assert code == EXIT_OK and table[0] == ["day", "t", "total"] and len(table) == 169
    totals = np.array([float(r[2]) for r in table[1:]]).reshape(7, 24)
    for i in range(1, 5):
        np.testing.assert_array_equal(totals[i], totals[0])
    assert not np.array_equal(totals[5], totals[0]) and totals.min() >= 2


def test_generate_zero_noise_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["generate", "table6.scenario", "--noise", "0", "-o", a], capsys)
    run(["generate", "table6.scenario", "--noise", "0", "-o", b], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_generate_seeded_noise(capsys):
    a = run(["generate", "table6.scenario", "--noise", "0.1", "--seed", "4"], capsys)[1]
    b = run(["generate", "table6.scenario", "--noise", "0.1", "--seed", "4"], capsys)[1]
    c = run(["generate", "table6.scenario", "--noise", "0.1", "--seed", "5"], capsys)[1]
    assert a == b and a != c


def test_generate_fine_grid_with_components(capsys):
    code, out, _ = run(["generate", "table6.scenario", "--grid-step", "0.1", "--components"], capsys)
    table = rows(out)
    assert code == EXIT_OK and len(table) == 1 + 7 * 231
    assert table[0] == ["day", "t", "total", "baseline", "peak_1", "peak_2", "peak_3"]
    body = np.array([r[1:] for r in table[1:]], dtype=float)
    np.testing.assert_allclose(body[:, 1], body[:, 2:].sum(axis=1), rtol=0, atol=1e-12)


def test_generate_bad_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.scenario"
    bad.write_text("[Monday]\npeak_hours = 7\nbaseline = 2\namplitudes = 1, 2\nsigmas = 1\nalphas = 0\n")
    code, _, err = run(["generate", bad], capsys)
    assert code == EXIT_INVALID and "equal length" in err
    assert run(["generate", tmp_path / "missing.scenario"], capsys)[0] == EXIT_INVALID
    assert run(["generate", "table6.scenario", "--grid-step", "3"], capsys)[0] == EXIT_INVALID


# ---------------------------------------------------------------- metrics

def test_metrics_subcommand(capsys):
    code, out, _ = run(["metrics", DATA / "table6_sunday.csv", DATA / "table6_friday.csv",
                        "--precision", "full"], capsys)
    observed = parse_profile_csv((DATA / "table6_sunday.csv").read_text()).values
    predicted = parse_profile_csv((DATA / "table6_friday.csv").read_text()).values
    assert code == EXIT_OK
    assert json.loads(out) == compute_metrics(observed, predicted).as_dict()


# ---------------------------------------------------------------- surface

def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["decompose", "--help"])
    text = capsys.readouterr().out
    for flag, default in [("--r1", "2.0"), ("--r2", "0.01"), ("--sigma-starts", "1,2,3"),
                          ("--alpha-starts", "-1,0,1"), ("--sigma-bounds", "0.1,10"),
                          ("--alpha-bounds", "-5,5"), ("--amplitude-cap-factor", "1.2"),
                          ("--baseline-percentile", "10.0"), ("--max-iterations", "500"),
                          ("--gradient-tolerance", "1e-08"), ("--history-size", "10")]:
        assert flag in text and default in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sgdecomp", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sgdecomp" in proc.stdout
