"""Backward exit walker: exit laws, mass bookkeeping, determinism."""

import math

import numpy as np
import pytest
from scipy import stats

from caloric.geometry import (
    ComplementOfCubes,
    Cylinder,
    HalfTimeSlab,
    ParabolicCube,
    SpacetimePoint,
)
from caloric.walker import (
    DiagonalField,
    ScaledHeat,
    WalkConfig,
    EmpiricalBoundaryMeasure,
    estimate_measure,
    lattice_estimate_measure,
    solve_dirichlet,
)


def pt(*vals: float) -> SpacetimePoint:
    return SpacetimePoint.of(tuple(vals[:-1]), vals[-1])


def box() -> Cylinder:
    return Cylinder(box=[[-1.0, 1.0]], time=(0.0, 2.0))


def half_space() -> HalfTimeSlab:
    return HalfTimeSlab(after=0.0, dim=1)


# ---------------------------------------------------------------------------
# mass bookkeeping


def test_masses_sum_to_one_exactly():
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 777, WalkConfig(seed=1))
    total = meas.mass_boundary + meas.mass_infinity + meas.mass_truncated + meas.mass_budget
    assert total == pytest.approx(1.0, abs=1e-12)
    assert meas.count_boundary + meas.count_infinity + meas.count_truncated + meas.count_budget == 777
    assert meas.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_bounded_box_never_escapes():
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 1000, WalkConfig(seed=0))
    assert meas.mass_infinity == 0.0
    assert meas.mass_boundary == 1.0
    assert not meas.flagged


def test_causality_every_hit_in_the_past():
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.3, 1.7), 500, WalkConfig(seed=2))
    assert np.all(meas.hits_t < 1.7)


def test_hits_lie_on_the_boundary():
    d = box()
    meas = estimate_measure(d, ScaledHeat(1.0, 1), pt(0.0, 1.0), 500, WalkConfig(seed=3))
    on_wall = np.isclose(np.abs(meas.hits_x[:, 0]), 1.0, atol=1e-3)
    on_bottom = np.isclose(meas.hits_t, 0.0, atol=1e-6)
    assert np.all(on_wall | on_bottom)
    # no hit is interior
    assert not np.any(d.contains_batch(meas.hits_x, meas.hits_t))


def test_pole_outside_is_rejected():
    with pytest.raises(ValueError):
        estimate_measure(box(), ScaledHeat(1.0, 1), pt(5.0, 1.0), 10, WalkConfig(seed=0))


def test_budget_exhaustion_is_flagged():
    cfg = WalkConfig(seed=0, max_steps=3, dt_max=1e-6)
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 100, cfg)
    assert meas.mass_budget > 0.9
    assert meas.flagged
    total = meas.mass_boundary + meas.mass_infinity + meas.mass_truncated + meas.mass_budget
    assert total == pytest.approx(1.0, abs=1e-12)


def test_time_floor_truncates_before_exact_classification():
    # obstacle far in the past; a floor above its era cuts the descent and
    # books it in the truncation bucket, not as exact escape
    d = ComplementOfCubes([ParabolicCube(SpacetimePoint.of((0.0,), -256.0), 1.0)])
    cfg = WalkConfig(seed=4, time_floor=-10.0, dt_max=0.5)
    meas = estimate_measure(d, ScaledHeat(1.0, 1), pt(0.0, 0.0), 50, cfg)
    assert meas.mass_truncated == 1.0
    assert meas.mass_infinity == 0.0


def test_whole_past_inside_classifies_exactly():
    # everything below t = 10 is in the domain: escape is exact, no floor needed
    d = HalfTimeSlab(before=10.0, dim=1)
    meas = estimate_measure(d, ScaledHeat(1.0, 1), pt(0.0, 0.0), 50, WalkConfig(seed=4))
    assert meas.mass_infinity == 1.0
    assert meas.mass_truncated == 0.0


# ---------------------------------------------------------------------------
# determinism


def test_seed_determinism_and_worker_invariance():
    d = box()
    op = ScaledHeat(1.0, 1)
    a = estimate_measure(d, op, pt(0.0, 1.0), 600, WalkConfig(seed=9), workers=1)
    b = estimate_measure(d, op, pt(0.0, 1.0), 600, WalkConfig(seed=9), workers=3)
    assert np.array_equal(a.hits_x, b.hits_x)
    assert np.array_equal(a.hits_t, b.hits_t)
    c = estimate_measure(d, op, pt(0.0, 1.0), 600, WalkConfig(seed=10), workers=1)
    assert not np.array_equal(a.hits_t, c.hits_t)


# ---------------------------------------------------------------------------
# exit-law oracles


def test_half_space_exit_law_matches_kernel():
    # exits from (0, 1) hit t = 0 with law Normal(0, 2M)
    meas = estimate_measure(
        half_space(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 4000, WalkConfig(seed=0)
    )
    assert meas.mass_infinity == 0.0
    assert np.allclose(meas.hits_t, 0.0, atol=1e-6)
    ks = stats.kstest(meas.hits_x[:, 0], stats.norm(scale=math.sqrt(2.0)).cdf)
    assert ks.statistic < 0.03


def test_half_space_exit_law_scales_with_m():
    meas = estimate_measure(
        half_space(), ScaledHeat(0.25, 1), pt(0.0, 1.0), 4000, WalkConfig(seed=0)
    )
    ks = stats.kstest(meas.hits_x[:, 0], stats.norm(scale=math.sqrt(0.5)).cdf)
    assert ks.statistic < 0.03


def test_reflection_symmetry_within_errors():
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 4000, WalkConfig(seed=5))
    left = float(np.sum(meas.weights[meas.hits_x[:, 0] < 0]))
    right = float(np.sum(meas.weights[meas.hits_x[:, 0] > 0]))
    se = meas.se_for_mass(left) + meas.se_for_mass(right)
    assert abs(left - right) <= 3.0 * max(se, 1e-3)


def test_sparse_obstacles_leak_to_infinity():
    cubes = [
        ParabolicCube(SpacetimePoint.of((0.0,), -(r * r)), 1.0)
        for r in (16.0, 64.0)
    ]
    d = ComplementOfCubes(cubes)
    meas = estimate_measure(d, ScaledHeat(1.0, 1), pt(0.0, 0.0), 400, WalkConfig(seed=0))
    assert meas.mass_infinity > 0.5
    assert meas.mass_boundary < 0.5


# ---------------------------------------------------------------------------
# measure queries


def test_mass_in_region_and_cube():
    d = box()
    meas = estimate_measure(d, ScaledHeat(1.0, 1), pt(0.0, 1.0), 1000, WalkConfig(seed=6))
    everything = meas.mass_in(lambda x, t: np.ones(len(t), dtype=bool))
    assert everything == pytest.approx(meas.mass_boundary, abs=1e-12)
    bottom = meas.mass_in(lambda x, t: t < 1e-6)
    walls = meas.mass_in(lambda x, t: t >= 1e-6)
    assert bottom + walls == pytest.approx(meas.mass_boundary, abs=1e-12)
    cube_mass = meas.mass_in_cube(ParabolicCube(SpacetimePoint.of((0.0,), 1.0), 1.01))
    assert 0.0 <= cube_mass <= 1.0 + 1e-9


def test_se_for_mass_is_binomial():
    meas = estimate_measure(box(), ScaledHeat(1.0, 1), pt(0.0, 1.0), 400, WalkConfig(seed=7))
    m = 0.25
    want = math.sqrt(m * (1 - m) / 400)
    assert meas.se_for_mass(m) == pytest.approx(want, rel=1e-9)


# ---------------------------------------------------------------------------
# Dirichlet solutions


def test_constant_datum_is_exactly_one():
    results = solve_dirichlet(
        box(),
        ScaledHeat(1.0, 1),
        lambda x, t: np.ones(len(t)),
        [pt(0.0, 1.0), pt(0.5, 0.5)],
        300,
        WalkConfig(seed=0),
    )
    for value, se in results:
        assert value == 1.0
        assert se == 0.0


def test_odd_datum_vanishes_by_symmetry():
    results = solve_dirichlet(
        box(),
        ScaledHeat(1.0, 1),
        lambda x, t: x[:, 0],
        [pt(0.0, 1.0)],
        4000,
        WalkConfig(seed=1),
    )
    value, se = results[0]
    assert abs(value) <= 3.0 * max(se, 1e-4)


def test_bump_datum_matches_kernel_quadrature():
    # On all of space after t = 0 the solution is the kernel convolution of
    # the initial datum.
    d = half_space()
    sigma2 = 0.09

    def datum(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.exp(-x[:, 0] ** 2 / (2.0 * sigma2))

    value, se = solve_dirichlet(
        d, ScaledHeat(1.0, 1), datum, [pt(0.0, 1.0)], 20000, WalkConfig(seed=2)
    )[0]
    # exact: Gaussian-Gaussian convolution at variance 2M t + sigma2
    var = 2.0 * 1.0 * 1.0 + sigma2
    want = math.sqrt(sigma2 / var)
    assert value == pytest.approx(want, abs=max(3.5 * se, 1e-3))


def test_escaping_paths_require_infinity_value():
    cubes = [ParabolicCube(SpacetimePoint.of((0.0,), -256.0), 1.0)]
    d = ComplementOfCubes(cubes)
    with pytest.raises(ValueError):
        solve_dirichlet(
            d,
            ScaledHeat(1.0, 1),
            lambda x, t: np.ones(len(t)),
            [pt(0.0, 0.0)],
            50,
            WalkConfig(seed=0),
        )
    # with the value supplied the solve goes through
    value, _ = solve_dirichlet(
        d,
        ScaledHeat(1.0, 1),
        lambda x, t: np.ones(len(t)),
        [pt(0.0, 0.0)],
        50,
        WalkConfig(seed=0),
        infinity_value=1.0,
    )[0]
    assert value == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# operators


def test_scaled_heat_validation():
    with pytest.raises(ValueError):
        ScaledHeat(0.0, 1)
    with pytest.raises(ValueError):
        ScaledHeat(1.0, 0)


def test_diagonal_field_validation():
    with pytest.raises(ValueError):
        DiagonalField(lambda x, t: np.ones((len(t), 1)), 0.0, 1)
    with pytest.raises(ValueError):
        DiagonalField(lambda x, t: np.ones((len(t), 1)), 1.5, 1)


def test_continuous_walker_rejects_ellipticity_violation():
    bad = DiagonalField(lambda x, t: np.full((len(t), 1), 0.1), 0.5, 1)
    with pytest.raises(RuntimeError):
        estimate_measure(box(), bad, pt(0.0, 1.0), 10, WalkConfig(seed=0))


def test_walk_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(dt_max=0.0)
    with pytest.raises(ValueError):
        WalkConfig(kappa=1.5)
    with pytest.raises(ValueError):
        WalkConfig(boundary_tol=0.0)
    with pytest.raises(ValueError):
        WalkConfig(max_steps=0)


# ---------------------------------------------------------------------------
# lattice walker


def constant_field(level: float) -> DiagonalField:
    return DiagonalField(lambda x, t: np.full((len(t), 1), level), 0.5, 1)


def test_lattice_matches_continuous_for_constant_coefficients():
    d = half_space()
    pole = pt(0.0, 1.0)
    lat = lattice_estimate_measure(
        d, constant_field(1.0), pole, h=0.05, n_paths=2000, cfg=WalkConfig(seed=3)
    )
    cont = estimate_measure(d, ScaledHeat(1.0, 1), pole, 2000, WalkConfig(seed=3))
    ks = stats.ks_2samp(lat.hits_x[:, 0], cont.hits_x[:, 0])
    assert ks.statistic < 0.08
    assert np.allclose(lat.hits_t, 0.0, atol=0.05**2 + 1e-9)


def test_lattice_self_convergence_for_checkerboard():
    def checker(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        cells = np.floor(x[:, 0] * 4.0) + np.floor(t * 4.0)
        return np.where(cells.astype(np.int64) % 2 == 0, 0.5, 2.0)[:, None]

    field = DiagonalField(checker, 0.5, 1)
    d = half_space()
    pole = pt(0.0, 1.0)
    coarse = lattice_estimate_measure(d, field, pole, 0.2, 3000, WalkConfig(seed=4))
    fine = lattice_estimate_measure(d, field, pole, 0.1, 3000, WalkConfig(seed=5))
    finer = lattice_estimate_measure(d, field, pole, 0.05, 3000, WalkConfig(seed=6))
    d1 = stats.ks_2samp(coarse.hits_x[:, 0], fine.hits_x[:, 0]).statistic
    d2 = stats.ks_2samp(fine.hits_x[:, 0], finer.hits_x[:, 0]).statistic
    assert d2 < d1 + 0.05  # Cauchy-in-h within Monte Carlo noise


def test_lattice_rejects_degenerate_coefficients():
    bad = DiagonalField(lambda x, t: np.full((len(t), 1), 0.2), 0.5, 1)
    with pytest.raises(RuntimeError):
        lattice_estimate_measure(half_space(), bad, pt(0.0, 1.0), 0.1, 10, WalkConfig(seed=0))


def test_lattice_deterministic_under_seed():
    field = constant_field(1.0)
    a = lattice_estimate_measure(half_space(), field, pt(0.0, 1.0), 0.1, 200, WalkConfig(seed=8))
    b = lattice_estimate_measure(half_space(), field, pt(0.0, 1.0), 0.1, 200, WalkConfig(seed=8))
    assert np.array_equal(a.hits_x, b.hits_x)
    assert np.array_equal(a.hits_t, b.hits_t)
