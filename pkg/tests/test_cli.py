"""Command-line interface: parsing, exit codes, output formats, artifacts."""

import json

import pytest

from caloric.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# kernel eval


def test_kernel_eval_prints_bare_value(capsys):
    code, out, err = run(
        ["kernel", "eval", "--M", "1", "--n", "1", "--target", "0,1", "--source", "0,0"],
        capsys,
    )
    assert code == 0
    assert out == "0.2820948\n"
    assert err == ""


def test_kernel_eval_json_format(capsys):
    code, out, _ = run(
        [
            "kernel", "eval", "--M", "1", "--n", "1",
            "--target", "0,1", "--source", "0,0", "--format", "json",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["value"] == pytest.approx(0.28209479177387814, abs=1e-15)


def test_kernel_eval_dimension_mismatch_is_usage_error(capsys):
    code, _, err = run(
        ["kernel", "eval", "--M", "1", "--n", "2", "--target", "0,1", "--source", "0,0"],
        capsys,
    )
    assert code == 2
    assert "error" in err


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_randomized_command_requires_seed(capsys):
    code, _, err = run(
        ["measure", "estimate", "--domain", "cylinder", "--pole", "0,1"], capsys
    )
    assert code == 2
    assert "--seed" in err


def test_unknown_bundled_domain_is_usage_error(capsys):
    code, _, err = run(
        ["measure", "estimate", "--domain", "moebius", "--pole", "0,1", "--seed", "1"],
        capsys,
    )
    assert code == 2
    assert "moebius" in err


def test_bad_datum_string_is_usage_error(capsys):
    code, _, err = run(
        [
            "dirichlet", "solve", "--domain", "cylinder", "--datum", "sine:3",
            "--pole", "0,1", "--seed", "1",
        ],
        capsys,
    )
    assert code == 2
    assert "datum" in err


# ---------------------------------------------------------------------------
# capacity / content via set files


def test_capacity_estimate_pinned_slab(tmp_path, capsys):
    setfile = tmp_path / "slab.json"
    setfile.write_text(
        json.dumps(
            {
                "set": {
                    "type": "slab",
                    "center_x": [0.0],
                    "half_side": 1.0,
                    "t_lo": -1.0,
                    "t_hi": -0.25,
                    "depth": 2,
                }
            }
        )
    )
    code, out, _ = run(
        ["capacity", "estimate", "--set", str(setfile), "--M", "1", "--format", "csv"],
        capsys,
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "lp_value,verify_max_potential,certified_lower,constraint_count,atom_count"
    assert lines[1] == "3.7342849463179384,1.3707075758817733,2.724348367240679,551,96"


def test_content_estimate_slab(tmp_path, capsys):
    setfile = tmp_path / "slab.json"
    setfile.write_text(
        json.dumps(
            {
                "set": {
                    "type": "slab",
                    "center_x": [0.0],
                    "half_side": 1.0,
                    "t_lo": -1.0,
                    "t_hi": 0.0,
                }
            }
        )
    )
    code, out, _ = run(
        ["content", "estimate", "--set", str(setfile), "--s", "2", "--format", "json"],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["upper_bound"] == pytest.approx(2.0)
    assert payload["frostman_lower"] <= payload["upper_bound"] + 1e-12


# ---------------------------------------------------------------------------
# Monte Carlo commands


def test_dirichlet_constant_datum(capsys):
    code, out, _ = run(
        [
            "dirichlet", "solve", "--domain", "cylinder", "--datum", "const:1",
            "--pole", "0,1", "--paths", "200", "--seed", "3",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    row = payload["values"][0]
    assert row["value"] == 1.0
    assert row["se"] == 0.0


def test_measure_estimate_artifacts_and_worker_invariance(tmp_path, capsys):
    base = [
        "measure", "estimate", "--domain", "cylinder", "--pole", "0,1",
        "--paths", "300", "--seed", "11",
    ]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    code_a, stdout_a, _ = run(base + ["--out-dir", str(out_a), "--workers", "1"], capsys)
    code_b, stdout_b, _ = run(base + ["--out-dir", str(out_b), "--workers", "3"], capsys)
    assert code_a == code_b == 0
    assert stdout_a == stdout_b
    names = {p.name for p in out_a.iterdir()}
    assert {"hits.csv", "measure_estimate.json", "manifest.json"} <= names
    assert (out_a / "hits.csv").read_bytes() == (out_b / "hits.csv").read_bytes()
    manifest = json.loads((out_a / "manifest.json").read_text())
    assert manifest["seed"] == 11
    assert "hits.csv" in manifest["outputs"]


def test_check_tbhcc_report_csv(capsys):
    code, out, _ = run(
        [
            "check", "tbhcc", "--domain", "complement-cube",
            "--scales", "0.25,0.5", "--sigma-count", "4", "--seed", "2",
            "--format", "csv",
        ],
        capsys,
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("x0")
    assert len(lines) >= 2


def test_wiener_series_stdout(capsys):
    code, out, _ = run(
        [
            "wiener", "series", "--domain", "complement-cube", "--M", "1",
            "--point", "0,0", "--lam", "0.2", "--terms", "4", "--mode", "cylinder",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["terms"] == 4
    assert len(payload["partial_sums"]) == 4
    assert payload["partial_sums"][-1] > 0.0


# ---------------------------------------------------------------------------
# scenarios and validation


def test_scenario_writes_report_and_exits_by_verdict(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run(
        ["scenario", "complement-cube", "--seed", "0", "--out-dir", str(out_dir)],
        capsys,
    )
    assert code == 0
    assert "complement-cube: passed" in out
    assert "PASS" in out
    names = {p.name for p in out_dir.iterdir()}
    assert {
        "result.json", "config.json", "decay.csv", "measurements.csv",
        "checks.csv", "manifest.json",
    } <= names
    assert any(n.endswith(".png") for n in names)


def test_scenario_no_figures(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, _, _ = run(
        [
            "scenario", "sparse-cubes", "--radii", "16,64", "--J", "2",
            "--paths", "800", "--seed", "0", "--out-dir", str(out_dir),
            "--no-figures",
        ],
        capsys,
    )
    assert code in (0, 1)  # verdict depends on path budget; artifacts must not
    assert not any(p.name.endswith(".png") for p in out_dir.iterdir())


def test_validate_is_deterministic(capsys):
    code_a, out_a, _ = run(["validate", "--seed", "7"], capsys)
    code_b, out_b, _ = run(["validate", "--seed", "7"], capsys)
    assert code_a == code_b == 0
    assert out_a == out_b
    assert "validation: passed" in out_a
