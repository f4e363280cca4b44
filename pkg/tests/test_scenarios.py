"""Packaged experiments, result serialization, and figure rendering."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from caloric.scenarios import (
    BUNDLED_DOMAINS,
    bundled_domain,
    boundary_mass_trio,
    run_complement_cube,
    run_petrovsky,
    run_scenario,
    run_sparse_cubes,
    write_result,
)
from caloric.serialization import (
    RunManifest,
    canonical_json,
    config_hash,
    format_csv,
    measure_csv,
    measure_header,
)


# ---------------------------------------------------------------------------
# preconditions


def test_complement_cube_requires_admissible_radii():
    with pytest.raises(ValueError):
        run_complement_cube(1, [8.0, 16.0, 32.0], 100)  # fewer than 4
    with pytest.raises(ValueError):
        run_complement_cube(1, [4.0, 8.0, 16.0, 32.0], 100)  # below the floor
    with pytest.raises(ValueError):
        run_complement_cube(1, [8.0, 16.0, 24.0, 32.0], 100)  # not dyadic


def test_sparse_cubes_schedule_preconditions():
    with pytest.raises(ValueError):
        run_sparse_cubes(1, [16.0, 8.0, 32.0], 3, 100)  # not increasing
    with pytest.raises(ValueError):
        run_sparse_cubes(1, [4.0, 8.0, 16.0, 32.0], 4, 100)  # mass sum >= 0.5
    with pytest.raises(ValueError):
        run_sparse_cubes(1, [16.0], 2, 100)  # J exceeds schedule


def test_sparse_cubes_trivial_empty_schedule():
    result = run_sparse_cubes(1, [], 0, 100)
    assert result.passed
    assert result.measurement("mass_infinity")["value"] == 1.0
    assert result.measurement("total_boundary_mass")["value"] == 0.0


def test_petrovsky_requires_both_reference_speeds():
    with pytest.raises(ValueError):
        run_petrovsky([1.0], [0.5, 0.35, 0.25, 0.18], 100)


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError):
        run_scenario({"scenario": "warp-drive", "seed": 0})


# ---------------------------------------------------------------------------
# bundled domains


def test_bundled_domains_members():
    assert set(BUNDLED_DOMAINS) == {"cylinder", "complement-cube", "sparse-cubes"}
    for name in BUNDLED_DOMAINS:
        d = bundled_domain(name)
        assert d.dim == 1
    with pytest.raises(ValueError):
        bundled_domain("torus")


# ---------------------------------------------------------------------------
# a small end-to-end scenario run


@pytest.fixture(scope="module")
def small_decay_result():
    return run_complement_cube(1, [8.0, 16.0, 32.0, 64.0], n_paths=3000, seed=0)


def test_decay_result_structure(small_decay_result):
    r = small_decay_result
    assert r.scenario == "complement-cube"
    header, rows = r.tables["decay"]
    assert header[0] == "R"
    assert len(rows) == 4
    assert [row[0] for row in rows] == [8.0, 16.0, 32.0, 64.0]
    assert r.measurement("slope")["value"] < 0.0
    assert isinstance(r.check("slope")["passed"], bool)


def test_decay_masses_decrease(small_decay_result):
    _, rows = small_decay_result.tables["decay"]
    masses = [row[2] for row in rows]
    assert all(b <= a for a, b in zip(masses, masses[1:]))


def test_snapshot_reproduces_byte_identical_numbers(small_decay_result):
    replay = run_scenario(small_decay_result.config)
    assert canonical_json(replay.to_json()) == canonical_json(small_decay_result.to_json())


def test_result_json_roundtrip(small_decay_result):
    blob = canonical_json(small_decay_result.to_json())
    parsed = json.loads(blob)
    assert parsed["scenario"] == "complement-cube"
    assert parsed["passed"] in (True, False)
    assert {m["name"] for m in parsed["measurements"]} >= {"slope", "min_mass"}


def test_write_result_files(tmp_path, small_decay_result):
    files = write_result(small_decay_result, tmp_path, figures=True)
    names = {f.name for f in files}
    assert {"result.json", "config.json", "decay.csv", "measurements.csv", "checks.csv"} <= names
    assert any(n.endswith(".png") for n in names)
    text = (tmp_path / "decay.csv").read_text()
    assert text.endswith("\n") and '"' not in text
    assert text.splitlines()[0].startswith("R,")


def test_write_result_can_skip_figures(tmp_path, small_decay_result):
    files = write_result(small_decay_result, tmp_path / "nofig", figures=False)
    assert not any(f.name.endswith(".png") for f in files)


# ---------------------------------------------------------------------------
# boundary-mass case trio


def test_case_trio_masses():
    rows = boundary_mass_trio(n_paths=1500, seed=0)
    cases = {name: (mass, se) for name, mass, se in rows}
    assert cases["bounded_box"][0] == 1.0
    obstacle_mass, obstacle_se = cases["bounded_obstacle"]
    assert obstacle_mass + 3.0 * obstacle_se < 1.0
    slab_mass, slab_se = cases["finite_past_slab"]
    assert abs(slab_mass - 1.0) <= 3.0 * max(slab_se, 1e-9)


# ---------------------------------------------------------------------------
# serialization helpers


def test_canonical_json_is_stable_and_clean():
    blob = canonical_json({"b": 1.5, "a": np.float64(2.0), "c": [np.int64(3), float("nan")]})
    assert blob == '{\n  "a": 2.0,\n  "b": 1.5,\n  "c": [\n    3,\n    null\n  ]\n}\n'


def test_canonical_json_shortest_roundtrip_floats():
    x = 0.1 + 0.2
    blob = canonical_json({"x": x})
    assert json.loads(blob)["x"] == x
    assert "0.30000000000000004" in blob


def test_config_hash_sensitivity():
    base = {"scenario": "x", "seed": 0}
    assert config_hash(base) == config_hash({"seed": 0, "scenario": "x"})
    assert config_hash(base) != config_hash({"scenario": "x", "seed": 1})


def test_format_csv_rules():
    text = format_csv(("a", "b"), [(1, 2.5), (True, "z")])
    assert text == "a,b\n1,2.5\ntrue,z\n"


def test_measure_serialization():
    from caloric.geometry import Cylinder, SpacetimePoint
    from caloric.walker import ScaledHeat, WalkConfig, estimate_measure

    d = Cylinder(box=[[-1.0, 1.0]], time=(0.0, 2.0))
    meas = estimate_measure(
        d, ScaledHeat(1.0, 1), SpacetimePoint.of((0.0,), 1.0), 200, WalkConfig(seed=5)
    )
    header = measure_header(meas, {"seed": 5})
    assert header["masses"]["boundary"] == 1.0
    assert header["n_paths"] == 200
    assert len(header["config_hash"]) == 64
    text = measure_csv(meas)
    lines = text.splitlines()
    assert lines[0] == "x0,t,weight"
    assert len(lines) == 201


def test_manifest_write(tmp_path):
    manifest = RunManifest.create("measure estimate", {"seed": 1}, 1, "0.1.0", ["a.csv"])
    path = manifest.write(tmp_path)
    data = json.loads(Path(path).read_text())
    assert data["command"] == "measure estimate"
    assert data["outputs"] == ["a.csv"]
    assert data["seed"] == 1
    assert "created_utc" in data
