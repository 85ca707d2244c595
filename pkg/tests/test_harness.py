import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_helmholtz import harness
from nonlocal_helmholtz.harness import (COVERAGE, ExperimentConfig, Row, VerificationReport, emit_report, main,
                                        render)

GOLDEN = Path(__file__).parent / "golden" / "report_default.json"

SMALL_DIFFUSION = """\
[diffusion]
alphas = 0.0
paths = 2000
k_max = 3
"""


def write_config(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("default")
    code = main(["report", "--out", str(out)])
    return code, out


def test_default_suite_passes_and_covers_every_result(default_run):
    code, out = default_run
    assert code == 0
    doc = json.loads((out / "report.json").read_text(encoding="utf-8"))
    ids = {r["check"].split(":")[0] for r in doc["rows"]}
    assert set(COVERAGE) <= ids
    assert all(r["passed"] for r in doc["rows"])


def test_default_suite_matches_golden(default_run):
    _, out = default_run
    got = json.loads((out / "report.json").read_text(encoding="utf-8"))
    want = json.loads(GOLDEN.read_text(encoding="utf-8"))
    assert got["config_hash"] == want["config_hash"]
    assert got["notes"] == want["notes"]
    assert len(got["rows"]) == len(want["rows"])
    for g, w in zip(got["rows"], want["rows"]):
        assert (g["check"], g["route"], g["params"], g["tolerance"], g["passed"], g["kind"]) == \
            (w["check"], w["route"], w["params"], w["tolerance"], w["passed"], w["kind"])
        assert math.isclose(float(g["measured"]), float(w["measured"]), rel_tol=1e-9, abs_tol=1e-14)


def test_curve_files_written(default_run):
    _, out = default_run
    assert (out / "energy_curve.csv").read_text().splitlines()[0] == "l,r,H,dH_dr"
    for alpha in ("0", "0.5"):
        assert (out / f"escape_alpha_{alpha}.csv").read_text().startswith("k,trials,hits,p_hat,ci_lo,ci_hi\n")


@pytest.mark.parametrize("command,extra", [("verify-poly", ""), ("diffusion", SMALL_DIFFUSION)])
def test_repeat_runs_are_byte_identical(tmp_path, command, extra):
    cfg = write_config(tmp_path, extra)
    for fmt in ("json", "csv", "text"):
        a, b = tmp_path / f"a_{fmt}", tmp_path / f"b_{fmt}"
        assert main([command, "--config", cfg, "--out", str(a), "--format", fmt]) == 0
        assert main([command, "--config", cfg, "--out", str(b), "--format", fmt, "--jobs", "2"]) == 0
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes()


def test_json_and_csv_row_counts_agree(tmp_path):
    assert main(["verify-bernstein", "--out", str(tmp_path), "--format", "json"]) == 0
    assert main(["verify-bernstein", "--out", str(tmp_path), "--format", "csv"]) == 0
    rows = json.loads((tmp_path / "report.json").read_text())["rows"]
    raw = (tmp_path / "report.csv").read_bytes()
    assert b"\r" not in raw
    table = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert tuple(table[0]) == harness.HEADER
    assert len(table) - 1 == len(rows)


def test_bernstein_reports_missing_weights(tmp_path):
    main(["verify-bernstein", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "report.json").read_text())
    assert any("log: weight not available" in n for n in doc["notes"])
    assert {r["params"] for r in doc["rows"] if r["check"] == "thm1.3:extension"} == {"psi=power:0.5;n=2"}


def test_injected_weight_fails_gate_with_exit_2(tmp_path):
    cfg = write_config(tmp_path, "[bernstein]\ninject_alpha = 1.5\n")
    assert main(["verify-bernstein", "--config", cfg, "--out", str(tmp_path)]) == 2
    doc = json.loads((tmp_path / "report.json").read_text())
    assert any("hypothesis failed for injected weight t^1.5" in n for n in doc["notes"])


def test_too_few_paths_exit_3(tmp_path):
    cfg = write_config(tmp_path, "[diffusion]\npaths = 10\n")
    assert main(["diffusion", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_internal_error_exit_1(tmp_path):
    cfg = write_config(tmp_path, "[bernstein]\nlabels = nope\n")
    assert main(["verify-bernstein", "--config", cfg, "--out", str(tmp_path)]) == 1
    cfg = write_config(tmp_path, "[tolerances]\nspectral = -1\n", "neg.ini")
    assert main(["verify-poly", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert main(["verify-poly", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 1


def test_empty_solution_set(tmp_path):
    cfg = write_config(tmp_path, "[fractional]\ns_values =\ndims =\ncontrol_s =\nhigh_s_values =\n")
    with pytest.warns(RuntimeWarning, match="empty solution set"):
        code = main(["verify-fractional", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    assert json.loads((tmp_path / "report.json").read_text())["rows"] == []


def test_zero_trace_energy_curve(tmp_path):
    cfg = write_config(tmp_path, "[energy]\namplitude = 0\nbalance_s =\nr_max = 20\nradial_points = 401\n")
    assert main(["energy-scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "energy_curve.csv").read_text().splitlines()[1:]
    assert lines and all(float(x) == 0.0 for line in lines for x in line.split(",")[2:])


def test_seed_changes_hash_and_tallies(tmp_path):
    a = ExperimentConfig.load(seed=1)
    b = ExperimentConfig.load(seed=2)
    assert a.digest() != b.digest()
    assert ExperimentConfig.load(seed=1).digest() == a.digest()
    with pytest.raises(SystemExit):
        harness.build_parser().parse_args(["report", "--format", "xml"])
    assert main(["verify-poly", "--seed", str(2**64), "--out", str(tmp_path)]) == 1


def test_extra_catalogue_sections():
    cfg = ExperimentConfig.load(text="[psi.quarter]\nformula = power\ns = 0.25\n[bernstein]\nlabels = quarter\n")
    assert cfg.bernstein("quarter")(16.0) == pytest.approx(2.0)


@given(measured=st.floats(allow_nan=False), tolerance=st.floats(allow_nan=False))
def test_row_pass_flag_is_exact_comparison(measured, tolerance):
    assert Row("x", "r", "", measured, tolerance).passed == (measured <= tolerance)


def test_render_formats_and_exit_codes(tmp_path):
    rep = VerificationReport(config_hash="h")
    rep.add("thm1.1:spectral", "spectral", {"s": 0.1}, 1 / 3, 0.5)
    text = render(rep, "json")
    assert '"measured": "0.33333333333333331"' in text
    assert rep.exit_code() == 0
    rep.add("thm1.1:spectral", "spectral", {"s": 0.2}, 1.0, 0.5)
    assert rep.exit_code() == 1
    rep.add("thm1.3:a2-gate", "bernstein", {}, 1.0, 0.5, kind="gate")
    assert rep.exit_code() == 2
    with pytest.raises(ValueError):
        render(rep, "xml")
    path = emit_report(rep, tmp_path / "nested" / "dir", "text")
    assert path.read_text().count("FAIL") == 2


def test_io_errors_surface(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(VerificationReport(), blocker / "sub")
