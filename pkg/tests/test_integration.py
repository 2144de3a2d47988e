"""
Tests for integration between the toolkit components through the phg command line.
"""

import json
import os
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from src.cli import EXIT_BUDGET, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main, parse_int_list, parse_test_function
from src.grid_io import read_grid
from src.kernels import KernelKind, KernelTag, kernel_diag
from src.torus import TorusSpec
from src.transform import SpectralFunction


@pytest.fixture
def failing_suite():
    """Suite table with one failed check."""
    return pd.DataFrame({
        "suite": ["identities", "identities"],
        "name": ["normalization_identity n=1 L=3", "disc_diag n=1 L=3"],
        "value": [1e-14, 0.5],
        "tolerance": [1e-10, 1e-6],
        "passed": [True, False],
    })


def test_sample_rerun_is_byte_identical(tmp_path):
    """Test sample output does not depend on workers or reruns"""
    first, second = tmp_path / "a.grid", tmp_path / "b.grid"
    assert main(["sample", "--n", "2", "--L", "9", "--seed", "7", "--out", str(first)]) == EXIT_OK
    assert main(["sample", "--n", "2", "--L", "9", "--seed", "7", "--out", str(second), "--workers", "4"]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    loaded = read_grid(first)
    assert loaded.seed == 7
    assert abs(loaded.grid.mean()) < 1e-12

def test_sample_extension_and_heatmap(tmp_path):
    """Test sampling with an extension and a heatmap"""
    out, pgm = tmp_path / "fine.grid", tmp_path / "fine.pgm"
    code = main([
        "sample", "--n", "2", "--L", "3", "--M", "9", "--extend", "pwc",
        "--kind", "spectrally-reduced", "--out", str(out), "--pgm", str(pgm),
    ])
    assert code == EXIT_OK
    loaded = read_grid(out)
    assert loaded.grid.M == 9
    assert loaded.kind == "spectrally_reduced"
    assert loaded.meta["extension"] == "pwc"
    assert pgm.read_bytes().startswith(b"P5\n")

def test_sample_white_noise_route(tmp_path):
    """Test the white-noise route through the CLI"""
    out = tmp_path / "wn.grid"
    assert main(["sample", "--n", "1", "--L", "9", "--route", "white-noise", "--out", str(out)]) == EXIT_OK
    assert read_grid(out).meta["route"] == "white-noise"

def test_even_lattice_is_usage_error(tmp_path):
    """Test even L exits with a usage error"""
    assert main(["sample", "--n", "1", "--L", "4", "--out", str(tmp_path / "x.grid")]) == EXIT_USAGE

def test_kernel_profile_and_sidecar(tmp_path):
    """Test the kernel command writes the profile and its sidecar"""
    out = tmp_path / "disc.grid"
    assert main(["kernel", "--kind", "disc", "--n", "1", "--L", "3", "--out", str(out)]) == EXIT_OK
    profile = read_grid(out).grid.values
    assert profile == pytest.approx([1.209200, -0.604600, -0.604600], abs=1e-6)
    sidecar = json.loads((tmp_path / "disc.grid.json").read_text())
    assert sidecar["kind"] == "disc"
    assert sidecar["diag"] == pytest.approx(1.209200, abs=1e-6)

def test_kernel_grid_mismatch_is_usage_error(tmp_path):
    """Test invalid kernel grids and kinds"""
    code = main(["kernel", "--kind", "disc", "--n", "1", "--L", "3", "--M", "9", "--out", str(tmp_path / "k.grid")])
    assert code == EXIT_USAGE
    assert main(["kernel", "--kind", "gaussian", "--n", "1", "--L", "3", "--out", str(tmp_path / "k.grid")]) == EXIT_USAGE

def test_budget_exceeded_exit_code(tmp_path):
    """Test the memory budget exit code"""
    with patch.dict(os.environ, {"PHG_BUDGET_BYTES": "1000"}):
        code = main(["kernel", "--kind", "cont-trunc", "--n", "2", "--K", "99", "--out", str(tmp_path / "k.grid")])
    assert code == EXIT_BUDGET

def test_converge_field_table(tmp_path):
    """Test the pairing error table"""
    out = tmp_path / "field.csv"
    assert main(["converge-field", "--n", "1", "--f", "phi:1", "--Ls", "3,9,27", "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["L"]) == [3, 9, 27]
    assert table["total"].iloc[0] == pytest.approx(4.964e-3, rel=1e-3)
    assert np.all(np.diff(table["total"]) < 0)
    payload = json.loads((tmp_path / "field.json").read_text())
    assert payload["attrs"]["f"] == "phi:1"
    assert len(payload["rows"]) == 3

def test_converge_field_from_file(tmp_path):
    """Test test functions loaded from JSON"""
    source = tmp_path / "f.json"
    source.write_text(SpectralFunction.from_dict(2, {(1, 0): 1.0, (0, 5): 0.5}).to_json())
    out = tmp_path / "field.csv"
    code = main(["converge-field", "--n", "2", "--f", f"file:{source}", "--Ls", "3,9", "--route", "pwc", "--out", str(out)])
    assert code == EXIT_OK
    assert (pd.read_csv(out)["tail"] > 0).all()

def test_converge_field_sobolev_columns(tmp_path):
    """Test converge-field reports the expected H^{-s} gap of both extensions"""
    out = tmp_path / "field.csv"
    code = main(["converge-field", "--n", "1", "--f", "phi:1", "--Ls", "3,9,27", "--sobolev", "1", "--out", str(out)])
    assert code == EXIT_OK
    table = pd.read_csv(out)
    for column in ("sobolev_fourier", "sobolev_pwc"):
        assert np.all(np.diff(table[column]) < 0)
    attrs = json.loads((tmp_path / "field.json").read_text())["attrs"]
    assert attrs["sobolev_K"] == 81
    assert attrs["sobolev_s"] == 1.0

def test_converge_field_sobolev_cutoff_below_lattice(tmp_path):
    """Test an H^{-s} truncation below the largest lattice is a usage error"""
    code = main([
        "converge-field", "--n", "1", "--f", "phi:1", "--Ls", "3,9", "--sobolev", "1", "--K", "5",
        "--out", str(tmp_path / "f.csv"),
    ])
    assert code == EXIT_USAGE

def test_converge_field_rejects_wrong_dimension(tmp_path):
    """Test a mode of the wrong dimension"""
    code = main(["converge-field", "--n", "1", "--f", "phi:1,0", "--Ls", "3", "--out", str(tmp_path / "f.csv")])
    assert code == EXIT_USAGE

def test_converge_measure_table(tmp_path):
    """Test the nested-lattice table through the CLI"""
    out = tmp_path / "measure.csv"
    code = main([
        "converge-measure", "--n", "1", "--l-max", "2", "--gamma", "0", "--f", "phi:1",
        "--seeds", "8", "--out", str(out),
    ])
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["L"]) == [3, 9]
    assert (table["D"] < 1e-10).all()

def test_gmc_moment_report_rerun_is_identical(tmp_path):
    """Test moment reports and atoms do not depend on workers"""
    reports = []
    for workers in ("1", "3"):
        report = tmp_path / f"moments_{workers}.csv"
        code = main([
            "gmc", "--n", "1", "--L", "3", "--gamma", "0.5", "--moments", "1000",
            "--report", str(report), "--out", str(tmp_path / f"atoms_{workers}.grid"), "--workers", workers,
        ])
        assert code == EXIT_OK
        reports.append(report.read_bytes())
    assert reports[0] == reports[1]
    assert (tmp_path / "atoms_1.grid").read_bytes() == (tmp_path / "atoms_3.grid").read_bytes()

def test_gmc_flat_measure(tmp_path):
    """Test the flat measure command records its cutoff-dependent diagonal"""
    out = tmp_path / "flat.grid"
    assert main(["gmc", "--n", "1", "--L", "3", "--gamma", "0.5", "--kind", "flat", "--K", "27", "--out", str(out)]) == EXIT_OK
    loaded = read_grid(out)
    assert loaded.kind == "flat"
    assert loaded.grid.M == 3
    assert loaded.meta["diag"] == pytest.approx(kernel_diag(KernelKind(KernelTag.FLAT, K=27), TorusSpec(1, 3)))

def test_converge_measure_natural(tmp_path):
    """Test converge-measure accepts the piecewise constant measure kinds"""
    out = tmp_path / "natural.csv"
    code = main([
        "converge-measure", "--n", "1", "--l-max", "2", "--gamma", "0.3", "--kind", "natural", "--f", "phi:1",
        "--seeds", "8", "--out", str(out),
    ])
    assert code == EXIT_OK
    assert list(pd.read_csv(out)["L"]) == [3, 9]

def test_gmc_supercritical_gamma(tmp_path):
    """Test a supercritical γ exits with a usage error"""
    assert main(["gmc", "--n", "1", "--L", "3", "--gamma", "2", "--out", str(tmp_path / "m.grid")]) == EXIT_USAGE

def test_bound_table(tmp_path):
    """Test the uniform integrability table"""
    out = tmp_path / "bound.csv"
    assert main(["bound", "--n", "2", "--gamma", "0", "--Ls", "3,9", "--kinds", "semidisc,enhanced", "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out)
    assert (table["integral"] == 1.0).all()
    attrs = json.loads((tmp_path / "bound.json").read_text())["attrs"]
    assert attrs["gamma_upper"] == pytest.approx(2.0)

def test_log_div(tmp_path):
    """Test the log-divergence table"""
    out = tmp_path / "logdiv.csv"
    assert main(["log-div", "--n", "1", "--K", "33", "--M", "99", "--out", str(out)]) == EXIT_OK
    attrs = json.loads((tmp_path / "logdiv.json").read_text())["attrs"]
    assert attrs["C_estimate"] >= 0

@patch("src.cli.run_suite")
def test_verify_failure_exit_code(mock_run_suite, tmp_path, failing_suite):
    """Test a failed check exits with code 1"""
    mock_run_suite.return_value = failing_suite
    out = tmp_path / "verify.json"
    assert main(["verify", "--suite", "identities", "--out", str(out)]) == EXIT_CHECK_FAILED
    payload = json.loads(out.read_text())
    assert payload["passed"] is False
    assert payload["schema"] == "phg-verify"
    assert len(payload["checks"]) == 2

@patch("src.cli.run_suite")
def test_verify_success(mock_run_suite, tmp_path, failing_suite):
    """Test a passing suite exits with code 0"""
    mock_run_suite.return_value = failing_suite.assign(passed=True)
    out = tmp_path / "verify.json"
    assert main(["verify", "--suite", "gmc", "--out", str(out)]) == EXIT_OK
    mock_run_suite.assert_called_once_with("gmc")

def test_parsers():
    """Test integer list and test function parsing"""
    assert parse_int_list("3, 9,27") == [3, 9, 27]
    assert parse_test_function("phi:1,-2", 2).as_dict() == {(1, -2): 1.0}
    with pytest.raises(ValueError):
        parse_test_function("cos:1", 1)

def test_unknown_command_exits():
    """Test unknown subcommands"""
    with pytest.raises(SystemExit):
        main(["plot"])
