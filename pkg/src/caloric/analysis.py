"""Boundary-behaviour diagnostics: non-degeneracy of parabolic measure near
the boundary, Hölder-type decay exponents, tail decay, and the iteration
exponent linking the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import Domain, ParabolicCube, SpacetimePoint
from .walker import Operator, WalkConfig, estimate_measure, solve_dirichlet

__all__ = [
    "BourgainReport",
    "ExponentFit",
    "FitRejected",
    "bourgain_eta",
    "holder_fit",
    "tail_decay_fit",
    "fit_loglog",
    "iteration_exponent",
]


class FitRejected(ValueError):
    """Raised when a decay fit fails its quality gates."""


@dataclass(frozen=True)
class BourgainReport:
    """Minimum boundary mass seen from poles near a boundary point.

    ``eta_hat`` is the minimum over tested poles of the parabolic measure of
    ``Q_r(x0)``; poles are drawn inside ``Q_{gamma r}(x0) ∩ Ω``.
    """

    x0: SpacetimePoint
    r: float
    gamma: float
    eta_hat: float
    eta_se: float
    table: tuple[tuple[SpacetimePoint, float, float], ...]  # (pole, mass, se)
    n_paths: int


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power-law fit on log-log samples."""

    kind: str
    samples: tuple[tuple[float, float, float], ...]  # (scale, value, se)
    slope: float
    band: float  # one-standard-error band on the slope

    def __post_init__(self) -> None:
        if len(self.samples) < 4:
            raise ValueError("an exponent fit needs at least 4 samples")


def fit_loglog(
    kind: str, scales: Sequence[float], values: Sequence[float], ses: Sequence[float] | None = None
) -> ExponentFit:
    """Unweighted least squares of ``log value`` against ``log scale``.

    The band is the one-sigma standard error of the slope computed from fit
    residuals. Rejects non-positive values and fits with fewer than four
    samples.
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    if ses is None:
        ses = np.zeros_like(values)
    ses = np.asarray(ses, dtype=float)
    if len(scales) < 4:
        raise FitRejected("need at least 4 samples for a decay fit")
    if np.any(values <= 0.0):
        raise FitRejected("non-positive values cannot enter a log-log fit")
    lx = np.log(scales)
    ly = np.log(values)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, _, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    resid = ly - A @ coef
    dof = max(len(scales) - 2, 1)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    band = math.sqrt(float(resid @ resid) / dof / max(sxx, 1e-300))
    samples = tuple(
        (float(s), float(v), float(e)) for s, v, e in zip(scales, values, ses)
    )
    return ExponentFit(kind=kind, samples=samples, slope=slope, band=band)


def iteration_exponent(eta: float, gamma: float) -> float:
    """Decay exponent ``log(1 - eta) / (2 log gamma)`` produced by the
    standard iteration argument from a mass-loss factor per dyadic scale."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return math.log(1.0 - eta) / (2.0 * math.log(gamma))


# ---------------------------------------------------------------------------
# Pole placement helpers
# ---------------------------------------------------------------------------


def _sample_poles_in_cube(
    d: Domain, x0: SpacetimePoint, radius: float, count: int, rng: np.random.Generator
) -> list[SpacetimePoint]:
    """Rejection-sample interior poles inside the full cube Q_radius(x0)."""
    n = x0.dim
    poles: list[SpacetimePoint] = []
    for _ in range(200):
        m = max(count * 8, 64)
        if n == 1:
            xs = rng.uniform(-radius, radius, size=(m, 1))
        else:
            dirs = rng.standard_normal((m, n))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            xs = dirs * (radius * rng.uniform(0, 1, size=m) ** (1.0 / n))[:, None]
        xs = xs + x0.x_array()
        ts = x0.t + rng.uniform(-radius * radius, radius * radius, size=m)
        inside = d.contains_batch(xs, ts)
        for i in np.nonzero(inside)[0]:
            poles.append(SpacetimePoint(tuple(xs[i]), float(ts[i])))
            if len(poles) >= count:
                return poles
    if not poles:
        raise ValueError(
            "no admissible poles found: the cube around the boundary point "
            "does not intersect the domain at sampling resolution"
        )
    return poles


def _inward_normal(d: Domain, x0: SpacetimePoint, probe: float) -> np.ndarray:
    """Axis direction with the deepest interior probe just above ``x0``."""
    n = x0.dim
    best_dir = None
    best_gap = -1.0
    for axis in range(n):
        for sgn in (+1.0, -1.0):
            nu = np.zeros(n)
            nu[axis] = sgn
            px = (x0.x_array() + probe * nu)[None, :]
            pt = np.array([x0.t + 0.5 * probe * probe])
            if bool(d.contains_batch(px, pt)[0]):
                gap = float(d.gap_inside(px, pt)[0])
                if gap > best_gap:
                    best_gap = gap
                    best_dir = nu
    if best_dir is None:
        raise ValueError("no inward spatial direction found at the boundary point")
    return best_dir


def _ladder_poles(
    d: Domain,
    x0: SpacetimePoint,
    deltas: Sequence[float],
    normal: Sequence[float] | None,
) -> list[tuple[float, SpacetimePoint]]:
    """Poles approaching ``x0`` along the inward spatial normal, each at
    time offset ``+delta^2 / 2``; rungs that exit the domain are dropped."""
    if normal is None:
        nu = _inward_normal(d, x0, probe=float(max(deltas)))
    else:
        nu = np.asarray(normal, dtype=float)
        nu = nu / np.linalg.norm(nu)
    out: list[tuple[float, SpacetimePoint]] = []
    for delta in sorted(deltas, reverse=True):
        pole = SpacetimePoint(
            tuple(x0.x_array() + delta * nu), x0.t + 0.5 * delta * delta
        )
        if d.contains(pole):
            out.append((float(delta), pole))
    return out


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def bourgain_eta(
    d: Domain,
    op: Operator,
    x0: SpacetimePoint,
    r: float,
    gamma: float,
    pole_count: int,
    n_paths: int,
    cfg: WalkConfig = WalkConfig(),
    workers: int = 1,
) -> BourgainReport:
    """Empirical non-degeneracy constant: minimum over sampled poles in
    ``Q_{gamma r}(x0) ∩ Ω`` of the measure of the boundary inside
    ``Q_r(x0)``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if r <= 0:
        raise ValueError("r must be positive")
    rng = np.random.default_rng(cfg.seed)
    poles = _sample_poles_in_cube(d, x0, gamma * r, pole_count, rng)
    cube = ParabolicCube(x0, r, kind="full")
    table: list[tuple[SpacetimePoint, float, float]] = []
    for i, pole in enumerate(poles):
        meas = estimate_measure(
            d, op, pole, n_paths, replace(cfg, seed=cfg.seed + 7919 * (i + 1)), workers=workers
        )
        mass = meas.mass_in_cube(cube)
        table.append((pole, mass, meas.se_for_mass(mass)))
    masses = [row[1] for row in table]
    k = int(np.argmin(masses))
    return BourgainReport(
        x0=x0,
        r=r,
        gamma=gamma,
        eta_hat=table[k][1],
        eta_se=table[k][2],
        table=tuple(table),
        n_paths=n_paths,
    )


def holder_fit(
    d: Domain,
    op: Operator,
    patch: ParabolicCube,
    pole_ladder: Sequence[float],
    n_paths: int,
    cfg: WalkConfig = WalkConfig(),
    normal: Sequence[float] | None = None,
    infinity_value: float = 1.0,
    workers: int = 1,
    max_rel_se: float = 0.25,
) -> ExponentFit:
    """Hölder-type decay exponent of a solution vanishing on a boundary patch.

    The datum is one outside the patch cube and zero inside it, so the
    solution vanishes continuously at the patch center; poles approach the
    center along the inward normal at distances ``pole_ladder``. Fits
    ``log u`` against ``log delta``; rejects the fit when any estimate's
    relative standard error exceeds ``max_rel_se``.
    """
    x0 = patch.center
    rungs = _ladder_poles(d, x0, pole_ladder, normal)
    if len(rungs) < 4:
        raise FitRejected("fewer than 4 ladder poles lie inside the domain")
    deltas = [delta for delta, _ in rungs]
    poles = [pole for _, pole in rungs]

    def datum(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (~patch.contains_batch(x, t)).astype(float)

    results = solve_dirichlet(
        d, op, datum, poles, n_paths, cfg, infinity_value=infinity_value, workers=workers
    )
    values = [v for v, _ in results]
    ses = [s for _, s in results]
    for v, s in zip(values, ses):
        if v <= 0.0 or s / v > max_rel_se:
            raise FitRejected(
                f"estimate {v!r} with standard error {s!r} exceeds the "
                f"{max_rel_se:.0%} relative-error gate"
            )
    return fit_loglog("holder_decay", deltas, values, ses)


def tail_decay_fit(
    d: Domain,
    op: Operator,
    x0: SpacetimePoint,
    r: float,
    pole_ladder: Sequence[float],
    n_paths: int,
    cfg: WalkConfig = WalkConfig(),
    normal: Sequence[float] | None = None,
    workers: int = 1,
    max_rel_se: float = 0.25,
) -> ExponentFit:
    """Decay of the far-boundary mass ``omega(essential boundary outside
    Q_{4r}(x0))`` as poles approach ``x0``; the scale variable is
    ``distance / r``. Mass at infinity counts as far boundary."""
    rungs = _ladder_poles(d, x0, pole_ladder, normal)
    if len(rungs) < 4:
        raise FitRejected("fewer than 4 ladder poles lie inside the domain")
    far_cube = ParabolicCube(x0, 4.0 * r, kind="full")
    scales: list[float] = []
    values: list[float] = []
    ses: list[float] = []
    for i, (delta, pole) in enumerate(rungs):
        meas = estimate_measure(
            d, op, pole, n_paths, replace(cfg, seed=cfg.seed + 104729 * (i + 1)), workers=workers
        )
        mass = meas.mass_in(lambda x, t: ~far_cube.contains_batch(x, t))
        mass += meas.mass_infinity + meas.mass_truncated
        se = meas.se_for_mass(mass)
        if mass <= 0.0 or se / mass > max_rel_se:
            raise FitRejected(
                f"tail mass {mass!r} with standard error {se!r} exceeds the "
                f"{max_rel_se:.0%} relative-error gate"
            )
        scales.append(delta / r)
        values.append(mass)
        ses.append(se)
    return fit_loglog("tail_decay", scales, values, ses)
