"""Backward-in-time Monte Carlo exit sampling for parabolic measure.

A path started at a pole ``(X, t)`` moves backward in time: each step draws
a Gaussian spatial increment with covariance ``2 A dt`` while ``t``
decreases by ``dt``. The first step whose endpoint leaves the domain is
bisected along its straight space-time chord to locate the exit point. The
empirical distribution of exit points estimates the parabolic measure of
the pole; paths that fall below every obstacle (or a configured time floor)
are classified at infinity.

Determinism: each path consumes its own counter-based random stream keyed
by ``(seed, path_index)``, so results are identical for any execution
order, block size, or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .geometry import ComplementOfCubes, Domain, ParabolicCube, SpacetimePoint

__all__ = [
    "ScaledHeat",
    "DiagonalField",
    "WalkConfig",
    "ExitRecord",
    "EmpiricalBoundaryMeasure",
    "sample_exit",
    "estimate_measure",
    "solve_dirichlet",
    "lattice_exit",
    "lattice_estimate_measure",
]

_BLOCK = 4096  # paths simulated together
_CHUNK = 256  # normals prefetched per path

_STATUS_ACTIVE = 0
_STATUS_BOUNDARY = 1
_STATUS_INFINITY = 2
_STATUS_BUDGET = 3
_STATUS_TRUNCATED = 4


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaledHeat:
    """Constant-diffusivity operator ``d/dt - M Laplacian``."""

    M: float
    n: int

    def __post_init__(self) -> None:
        if self.M <= 0:
            raise ValueError("diffusivity M must be positive")
        if self.n < 1:
            raise ValueError("spatial dimension must be >= 1")


@dataclass(frozen=True)
class DiagonalField:
    """Divergence-form operator with diagonal coefficients ``a_i(x, t)``.

    ``a`` maps batch positions/times to an ``(m, n)`` array of diagonal
    entries; every sampled entry must lie in ``[lam, 1/lam]``.
    """

    a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lam: float
    n: int

    def __post_init__(self) -> None:
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("ellipticity constant lam must lie in (0, 1]")
        if self.n < 1:
            raise ValueError("spatial dimension must be >= 1")


Operator = ScaledHeat | DiagonalField


def _eval_coefficients(op: DiagonalField, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    vals = np.atleast_2d(np.asarray(op.a(x, t), dtype=float))
    if vals.shape != (len(t), op.n):
        vals = vals.reshape(len(t), op.n)
    lo, hi = op.lam, 1.0 / op.lam
    if np.any(vals < lo - 1e-12) or np.any(vals > hi + 1e-12):
        bad = np.argwhere((vals < lo - 1e-12) | (vals > hi + 1e-12))[0]
        raise RuntimeError(
            f"ellipticity violation: coefficient axis {bad[1]} = "
            f"{vals[bad[0], bad[1]]!r} outside [{lo}, {hi}] at sampled point"
        )
    return vals


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkConfig:
    """Stepping parameters for the backward exit walk.

    ``dt = min(dt_max, kappa * max(gap, boundary_tol)^2)`` with ``gap`` a
    conservative lower bound on the parabolic distance to the complement.
    ``time_floor`` truncates unbounded descents that exact obstacle
    clearance cannot classify; truncated paths are reported in their own
    mass bucket.
    """

    dt_max: float = math.inf
    kappa: float = 0.1
    boundary_tol: float = 1e-4
    time_floor: float = -math.inf
    max_steps: int = 200_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0, 1]")
        if self.boundary_tol <= 0:
            raise ValueError("boundary_tol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class ExitRecord:
    status: str  # boundary | infinity | budget_exhausted
    exit_point: SpacetimePoint | None
    steps: int
    path_index: int
    truncated: bool = False  # infinity via configured time_floor truncation


@dataclass(frozen=True)
class EmpiricalBoundaryMeasure:
    """Weighted exit-point cloud plus mass buckets; masses sum to one.

    Counts are exact integers; the float masses are ``count / n_paths``.
    ``mass_truncated`` collects paths stopped by the configured time floor
    (a truncation error bucket, distinct from exact infinity
    classification); ``mass_budget`` collects paths that exhausted
    ``max_steps`` and flags the estimate when above ``flag_fraction``.
    """

    pole: SpacetimePoint
    n_paths: int
    hits_x: np.ndarray  # (k, n)
    hits_t: np.ndarray  # (k,)
    weights: np.ndarray  # (k,) each 1 / n_paths
    count_infinity: int
    count_truncated: int
    count_budget: int
    seed: int
    boundary_tol: float
    flag_fraction: float = 0.01

    @property
    def count_boundary(self) -> int:
        return len(self.hits_t)

    @property
    def mass_infinity(self) -> float:
        return self.count_infinity / self.n_paths

    @property
    def mass_truncated(self) -> float:
        return self.count_truncated / self.n_paths

    @property
    def mass_budget(self) -> float:
        return self.count_budget / self.n_paths

    @property
    def mass_boundary(self) -> float:
        return self.count_boundary / self.n_paths

    @property
    def flagged(self) -> bool:
        return self.count_budget > self.flag_fraction * self.n_paths

    def total_mass(self) -> float:
        return float(self.weights.sum()) + self.mass_infinity + self.mass_truncated + self.mass_budget

    def mass_in(self, region: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        if self.count_boundary == 0:
            return 0.0
        mask = np.asarray(region(self.hits_x, self.hits_t), dtype=bool)
        return float(self.weights[mask].sum())

    def mass_in_cube(self, cube: ParabolicCube) -> float:
        return self.mass_in(lambda x, t: cube.contains_batch(x, t))

    def se_for_mass(self, mass: float) -> float:
        return math.sqrt(max(mass * (1.0 - mass), 0.0) / self.n_paths)


# ---------------------------------------------------------------------------
# Path engine
# ---------------------------------------------------------------------------


def _path_generators(seed: int, path_indices: np.ndarray) -> list[np.random.Generator]:
    base = int(seed) % 2**64
    return [
        np.random.Generator(np.random.Philox(key=[base, int(pi) % 2**64]))
        for pi in path_indices
    ]


class _NormalBuffer:
    """Per-path prefetched standard normals, refilled stream-by-stream."""

    def __init__(self, gens: list[np.random.Generator], n: int):
        self.gens = gens
        self.n = n
        self.buf = np.empty((len(gens), _CHUNK, n))
        self.pos = np.full(len(gens), _CHUNK, dtype=np.int64)

    def draw(self, rows: np.ndarray) -> np.ndarray:
        need = rows[self.pos[rows] >= _CHUNK]
        for i in need:
            self.buf[i] = self.gens[i].standard_normal((_CHUNK, self.n))
            self.pos[i] = 0
        out = self.buf[rows, self.pos[rows], :]
        self.pos[rows] += 1
        return out


class _UniformBuffer:
    def __init__(self, gens: list[np.random.Generator]):
        self.gens = gens
        self.buf = np.empty((len(gens), _CHUNK))
        self.pos = np.full(len(gens), _CHUNK, dtype=np.int64)

    def draw(self, rows: np.ndarray) -> np.ndarray:
        need = rows[self.pos[rows] >= _CHUNK]
        for i in need:
            self.buf[i] = self.gens[i].random(_CHUNK)
            self.pos[i] = 0
        out = self.buf[rows, self.pos[rows]]
        self.pos[rows] += 1
        return out


def _infinity_threshold(d: Domain) -> float | None:
    """Time below which a backward path can never exit (exact), with a
    one-parabolic-diameter safety margin for obstacle complements."""
    clearance = d.past_clearance_time()
    if clearance is None:
        return None
    margin = 0.0
    if isinstance(d, ComplementOfCubes):
        diam = 2.0 * max(c.radius for c in d.obstacles)
        margin = diam * diam
    return clearance - margin


def _bisect_exit(
    d: Domain,
    ax: np.ndarray,
    at: np.ndarray,
    bx: np.ndarray,
    bt: np.ndarray,
    tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Shrink inside/outside brackets along straight space-time chords until
    their parabolic length is below ``tol``; returns the outside endpoints."""
    ax, bx = ax.copy(), bx.copy()
    at, bt = at.copy(), bt.copy()
    for _ in range(120):
        seg = np.maximum(np.linalg.norm(ax - bx, axis=1), np.sqrt(np.abs(at - bt)))
        if np.all(seg <= tol):
            break
        mx = 0.5 * (ax + bx)
        mt = 0.5 * (at + bt)
        mid_in = d.contains_batch(mx, mt)
        ax = np.where(mid_in[:, None], mx, ax)
        at = np.where(mid_in, mt, at)
        bx = np.where(mid_in[:, None], bx, mx)
        bt = np.where(mid_in, bt, mt)
    return bx, bt


def _run_block(
    d: Domain,
    op: Operator,
    pole: SpacetimePoint,
    cfg: WalkConfig,
    path_indices: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Simulate a block of paths; returns (status, exit_x, exit_t, steps)."""
    B = len(path_indices)
    n = d.dim
    gens = _path_generators(cfg.seed, path_indices)
    normals = _NormalBuffer(gens, n)
    x = np.tile(pole.x_array(), (B, 1))
    t = np.full(B, pole.t)
    steps = np.zeros(B, dtype=np.int64)
    status = np.full(B, _STATUS_ACTIVE, dtype=np.int8)
    exit_x = np.full((B, n), np.nan)
    exit_t = np.full(B, np.nan)
    threshold = _infinity_threshold(d)
    tol2 = cfg.boundary_tol**2

    while True:
        act = np.nonzero(status == _STATUS_ACTIVE)[0]
        if len(act) == 0:
            break
        xa, ta = x[act], t[act]
        gap = d.gap_inside(xa, ta)
        dt = np.minimum(cfg.dt_max, cfg.kappa * np.maximum(gap * gap, tol2))
        # A step below the float resolution of the clock would round away and
        # freeze the path; far from t = 0 that resolution can exceed the
        # configured floor.
        dt = np.maximum(dt, 4.0 * np.spacing(np.abs(ta)))
        if isinstance(op, ScaledHeat):
            sig = np.sqrt(2.0 * op.M * dt)[:, None]
        else:
            a_vals = _eval_coefficients(op, xa, ta)
            sig = np.sqrt(2.0 * a_vals * dt[:, None])
        xi = normals.draw(act)
        x_new = xa + sig * xi
        t_new = ta - dt
        steps[act] += 1

        done_inf = np.zeros(len(act), dtype=bool)
        done_trunc = np.zeros(len(act), dtype=bool)
        if threshold is not None:
            done_inf = t_new < threshold
        if math.isfinite(cfg.time_floor):
            done_trunc = (t_new < cfg.time_floor) & ~done_inf

        inside = d.contains_batch(x_new, t_new)
        exiting = ~inside & ~done_inf & ~done_trunc
        if np.any(exiting):
            rows = act[exiting]
            ex, et = _bisect_exit(
                d, xa[exiting], ta[exiting], x_new[exiting], t_new[exiting], cfg.boundary_tol
            )
            exit_x[rows] = ex
            exit_t[rows] = et
            status[rows] = _STATUS_BOUNDARY

        status[act[done_inf]] = _STATUS_INFINITY
        status[act[done_trunc]] = _STATUS_TRUNCATED

        cont = ~exiting & ~done_inf & ~done_trunc
        rows = act[cont]
        x[rows] = x_new[cont]
        t[rows] = t_new[cont]
        over = rows[steps[rows] >= cfg.max_steps]
        status[over] = _STATUS_BUDGET
    return status, exit_x, exit_t, steps


def sample_exit(
    d: Domain, op: Operator, pole: SpacetimePoint, cfg: WalkConfig, path_index: int = 0
) -> ExitRecord:
    """Simulate one backward exit path (stream keyed by ``(seed, path_index)``)."""
    if op.n != d.dim:
        raise ValueError("operator dimension does not match the domain")
    if not d.contains(pole):
        raise ValueError("pole must lie inside the domain")
    status, exit_x, exit_t, steps = _run_block(d, op, pole, cfg, np.array([path_index]))
    return _record(status[0], exit_x[0], exit_t[0], steps[0], path_index, pole)


def _record(
    status: int, ex: np.ndarray, et: float, steps: int, path_index: int, pole: SpacetimePoint
) -> ExitRecord:
    if status == _STATUS_BOUNDARY:
        point = SpacetimePoint(tuple(ex), float(et))
        assert point.t < pole.t, "exit must lie strictly in the pole's past"
        return ExitRecord("boundary", point, int(steps), path_index)
    if status == _STATUS_INFINITY:
        return ExitRecord("infinity", None, int(steps), path_index)
    if status == _STATUS_TRUNCATED:
        return ExitRecord("infinity", None, int(steps), path_index, truncated=True)
    return ExitRecord("budget_exhausted", None, int(steps), path_index)


def _run_blocks(
    d: Domain,
    op: Operator,
    pole: SpacetimePoint,
    cfg: WalkConfig,
    n_paths: int,
    workers: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    blocks = [
        np.arange(start, min(start + _BLOCK, n_paths), dtype=np.int64)
        for start in range(0, n_paths, _BLOCK)
    ]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _run_block(d, op, pole, cfg, b), blocks))
    else:
        results = [_run_block(d, op, pole, cfg, b) for b in blocks]
    status = np.concatenate([r[0] for r in results])
    exit_x = np.concatenate([r[1] for r in results])
    exit_t = np.concatenate([r[2] for r in results])
    return status, exit_x, exit_t


def estimate_measure(
    d: Domain,
    op: Operator,
    pole: SpacetimePoint,
    n_paths: int,
    cfg: WalkConfig,
    workers: int = 1,
) -> EmpiricalBoundaryMeasure:
    """Equal-weight aggregation of ``n_paths`` exit samples.

    Deterministic for a fixed seed regardless of worker count: per-path
    streams are keyed by path index and merged in index order.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if op.n != d.dim:
        raise ValueError("operator dimension does not match the domain")
    if not d.contains(pole):
        raise ValueError("pole must lie inside the domain")
    status, exit_x, exit_t = _run_blocks(d, op, pole, cfg, n_paths, workers)
    hit = status == _STATUS_BOUNDARY
    hits_x = exit_x[hit]
    hits_t = exit_t[hit]
    assert np.all(hits_t < pole.t), "exits must lie strictly in the pole's past"
    return EmpiricalBoundaryMeasure(
        pole=pole,
        n_paths=n_paths,
        hits_x=hits_x,
        hits_t=hits_t,
        weights=np.full(len(hits_t), 1.0 / n_paths),
        count_infinity=int(np.sum(status == _STATUS_INFINITY)),
        count_truncated=int(np.sum(status == _STATUS_TRUNCATED)),
        count_budget=int(np.sum(status == _STATUS_BUDGET)),
        seed=cfg.seed,
        boundary_tol=cfg.boundary_tol,
    )


def solve_dirichlet(
    d: Domain,
    op: Operator,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    poles: Sequence[SpacetimePoint],
    n_paths: int,
    cfg: WalkConfig,
    infinity_value: float | None = None,
    workers: int = 1,
) -> list[tuple[float, float]]:
    """Monte Carlo Dirichlet values ``u(pole) = mean of f(exit)``.

    ``f`` is evaluated on batches of boundary hits; ``infinity_value`` is
    the datum at infinity, required whenever paths escape (exactly or via
    the time-floor truncation). Budget-exhausted paths contribute zero and
    trip the budget flag. Returns one ``(value, standard_error)`` pair per
    pole; pole ``i`` uses seed ``cfg.seed + i`` so the pole estimates are
    independent.
    """
    out: list[tuple[float, float]] = []
    for i, pole in enumerate(poles):
        meas = estimate_measure(
            d, op, pole, n_paths, replace(cfg, seed=cfg.seed + i), workers=workers
        )
        vals = np.zeros(0)
        if meas.count_boundary:
            vals = np.asarray(f(meas.hits_x, meas.hits_t), dtype=float)
        n_escape = meas.count_infinity + meas.count_truncated
        if n_escape:
            if infinity_value is None:
                raise ValueError("paths reached infinity but no infinity_value given")
            vals = np.concatenate([vals, np.full(n_escape, float(infinity_value))])
        if meas.count_budget:
            vals = np.concatenate([vals, np.zeros(meas.count_budget)])
        value = float(vals.sum() / n_paths)
        se = float(vals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
        out.append((value, se))
    return out


# ---------------------------------------------------------------------------
# Lattice walker for rough diagonal coefficients
# ---------------------------------------------------------------------------

_CFL_MARGIN = 0.9


def _lattice_block(
    d: Domain,
    op: DiagonalField,
    pole: SpacetimePoint,
    h: float,
    cfg: WalkConfig,
    path_indices: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Monotone explicit random walk on the spatial lattice ``pole + h Z^n``.

    Per step, jump to ``x ± h e_i`` with probability ``(k/h^2) a_i`` read at
    the half-grid midpoints ``x ± (h/2) e_i``; otherwise stay. The step
    ``k = margin * h^2 / (2 n / lam)`` satisfies the monotonicity (CFL)
    budget for all admissible coefficients; a visited site pushing the jump
    budget past one aborts with a diagnostic.
    """
    B = len(path_indices)
    n = d.dim
    k = _CFL_MARGIN * h * h / (2.0 * n / op.lam)
    gens = _path_generators(cfg.seed, path_indices)
    uniforms = _UniformBuffer(gens)
    x = np.tile(pole.x_array(), (B, 1))
    t = np.full(B, pole.t)
    steps = np.zeros(B, dtype=np.int64)
    status = np.full(B, _STATUS_ACTIVE, dtype=np.int8)
    exit_x = np.full((B, n), np.nan)
    exit_t = np.full(B, np.nan)
    threshold = _infinity_threshold(d)

    while True:
        act = np.nonzero(status == _STATUS_ACTIVE)[0]
        if len(act) == 0:
            break
        xa, ta = x[act], t[act]
        m = len(act)
        probs = np.empty((m, 2 * n))
        for axis in range(n):
            for sgn, col in ((+1.0, 2 * axis), (-1.0, 2 * axis + 1)):
                mid = xa.copy()
                mid[:, axis] += sgn * h / 2.0
                probs[:, col] = _eval_coefficients(op, mid, ta)[:, axis] * (k / (h * h))
        total = probs.sum(axis=1)
        if np.any(total > 1.0 + 1e-12):
            bad = int(np.argmax(total))
            raise RuntimeError(
                f"CFL/monotonicity violation: jump probabilities sum to "
                f"{total[bad]:.6f} > 1 at site x={xa[bad]!r}, t={ta[bad]!r}"
            )
        u = uniforms.draw(act)
        cdf = np.cumsum(probs, axis=1)
        outcome = np.sum(u[:, None] >= cdf, axis=1)  # 2n means stay
        x_new = xa.copy()
        move = outcome < 2 * n
        axes = outcome[move] // 2
        sgns = np.where(outcome[move] % 2 == 0, 1.0, -1.0)
        x_new[np.nonzero(move)[0], axes] += sgns * h
        t_new = ta - k
        steps[act] += 1

        done_inf = np.zeros(m, dtype=bool)
        done_trunc = np.zeros(m, dtype=bool)
        if threshold is not None:
            done_inf = t_new < threshold
        if math.isfinite(cfg.time_floor):
            done_trunc = (t_new < cfg.time_floor) & ~done_inf
        inside = d.contains_batch(x_new, t_new)
        exiting = ~inside & ~done_inf & ~done_trunc
        rows = act[exiting]
        exit_x[rows] = x_new[exiting]
        exit_t[rows] = t_new[exiting]
        status[rows] = _STATUS_BOUNDARY
        status[act[done_inf]] = _STATUS_INFINITY
        status[act[done_trunc]] = _STATUS_TRUNCATED
        cont = ~exiting & ~done_inf & ~done_trunc
        rows = act[cont]
        x[rows] = x_new[cont]
        t[rows] = t_new[cont]
        over = rows[steps[rows] >= cfg.max_steps]
        status[over] = _STATUS_BUDGET
    return status, exit_x, exit_t, steps


def lattice_exit(
    d: Domain,
    op: DiagonalField,
    pole: SpacetimePoint,
    h: float,
    cfg: WalkConfig,
    path_index: int = 0,
) -> ExitRecord:
    """One path of the monotone lattice walk (rough-coefficient route)."""
    if not isinstance(op, DiagonalField):
        raise TypeError("lattice walker requires a DiagonalField operator")
    if h <= 0:
        raise ValueError("spatial step h must be positive")
    if not d.contains(pole):
        raise ValueError("pole must lie inside the domain")
    status, exit_x, exit_t, steps = _lattice_block(d, op, pole, h, cfg, np.array([path_index]))
    return _record(status[0], exit_x[0], exit_t[0], steps[0], path_index, pole)


def lattice_estimate_measure(
    d: Domain,
    op: DiagonalField,
    pole: SpacetimePoint,
    h: float,
    n_paths: int,
    cfg: WalkConfig,
) -> EmpiricalBoundaryMeasure:
    """Equal-weight aggregation of lattice exit paths (same bookkeeping as
    ``estimate_measure``)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not d.contains(pole):
        raise ValueError("pole must lie inside the domain")
    blocks = [
        np.arange(start, min(start + _BLOCK, n_paths), dtype=np.int64)
        for start in range(0, n_paths, _BLOCK)
    ]
    results = [_lattice_block(d, op, pole, h, cfg, b) for b in blocks]
    status = np.concatenate([r[0] for r in results])
    exit_x = np.concatenate([r[1] for r in results])
    exit_t = np.concatenate([r[2] for r in results])
    hit = status == _STATUS_BOUNDARY
    return EmpiricalBoundaryMeasure(
        pole=pole,
        n_paths=n_paths,
        hits_x=exit_x[hit],
        hits_t=exit_t[hit],
        weights=np.full(int(hit.sum()), 1.0 / n_paths),
        count_infinity=int(np.sum(status == _STATUS_INFINITY)),
        count_truncated=int(np.sum(status == _STATUS_TRUNCATED)),
        count_budget=int(np.sum(status == _STATUS_BUDGET)),
        seed=cfg.seed,
        boundary_tol=h,
    )
