"""Thermal capacity by linear programming, parabolic Hausdorff content by
dyadic covering, and the time-backwards density condition checkers.

Conventions:

* Thermal capacity of a compact set sample is approximated by the finite
  linear program ``max sum(w)`` subject to ``sum_i w_i G(z_j; p_i) <= 1``
  over a forward-in-time constraint grid, with a denser verify grid used to
  rescale the result into a certified feasible value.
* Dyadic cells are boxes with spatial side ``h`` and time side ``h^2``; the
  parabolic diameter of a cell is taken as ``sqrt(n) * h`` throughout.
* Slabs in this module are spatial sup-norm boxes times time intervals, so
  dyadic subdivision tiles them exactly.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .geometry import Domain, SigmaSample, SpacetimePoint
from .kernels import (
    DiscreteMeasure,
    ScaledHeatKernel,
    aronson_constant_for_heat,
    heat_kernel_grid,
)

__all__ = [
    "DyadicCells",
    "CompactSetSample",
    "CapacityEstimate",
    "ConditionRow",
    "ConditionReport",
    "Slab",
    "cell_diameter",
    "rasterize",
    "slab_sample",
    "slab_complement_sample",
    "backward_cube_complement_sample",
    "singleton_sample",
    "build_capacity_grids",
    "estimate_capacity",
    "hausdorff_content_upper",
    "frostman_lower_bound",
    "slab_subdivision",
    "check_tbhcc",
    "check_tbcdc",
    "heat_ball_contains",
    "wiener_partial_sums",
]


def cell_diameter(h: float, n: int) -> float:
    """Parabolic diameter assigned to a dyadic cell of spatial side ``h``."""
    return math.sqrt(n) * h


# ---------------------------------------------------------------------------
# Dyadic cells and compact-set samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicCells:
    """Occupied cells of a dyadic grid anchored at ``(origin_x, origin_t)``.

    A cell with index ``(i_1..i_n, j)`` occupies the box
    ``prod_k [origin_x_k + i_k h, origin_x_k + (i_k+1) h] x
    [origin_t + j h^2, origin_t + (j+1) h^2]``.
    """

    origin_x: tuple[float, ...]
    origin_t: float
    h: float
    idx: np.ndarray  # (m, n+1) integer rows, unique

    def __post_init__(self) -> None:
        idx = np.atleast_2d(np.asarray(self.idx, dtype=np.int64))
        if idx.size == 0:
            idx = idx.reshape(0, len(self.origin_x) + 1)
        object.__setattr__(self, "idx", idx)

    @property
    def n(self) -> int:
        return len(self.origin_x)

    @property
    def count(self) -> int:
        return len(self.idx)

    def diameter(self) -> float:
        return cell_diameter(self.h, self.n)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ox = np.asarray(self.origin_x, dtype=float)
        xs = ox + (self.idx[:, : self.n] + 0.5) * self.h
        ts = self.origin_t + (self.idx[:, self.n] + 0.5) * self.h**2
        return xs, ts

    def coarsened_counts(self, level: int) -> int:
        """Number of distinct ancestor cells ``level`` dyadic steps up."""
        if level == 0:
            return self.count
        sp = self.idx[:, : self.n] >> level
        ti = self.idx[:, self.n] >> (2 * level)
        merged = np.column_stack([sp, ti])
        return len(np.unique(merged, axis=0))


@dataclass(frozen=True)
class CompactSetSample:
    """Candidate atom sites inside a compact set plus a dyadic cover."""

    x: np.ndarray  # (k, n)
    t: np.ndarray  # (k,)
    cells: DyadicCells | None
    resolution: float

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if x.shape[0] != t.shape[0]:
            raise ValueError("atom arrays must share a length")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def atom_count(self) -> int:
        return len(self.t)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def rasterize(
    region: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_lo: Sequence[float],
    x_hi: Sequence[float],
    t_lo: float,
    t_hi: float,
    h: float,
) -> CompactSetSample:
    """Sample a region on a dyadic lattice of spatial side ``h``.

    Cell centers satisfying the region predicate become atom sites; the
    matching cells form the dyadic cover.
    """
    x_lo = np.asarray(x_lo, dtype=float)
    x_hi = np.asarray(x_hi, dtype=float)
    n = len(x_lo)
    counts = [max(1, int(math.ceil((x_hi[i] - x_lo[i]) / h - 1e-9))) for i in range(n)]
    count_t = max(1, int(math.ceil((t_hi - t_lo) / h**2 - 1e-9)))
    axes_i = [np.arange(c, dtype=np.int64) for c in counts]
    idx_t = np.arange(count_t, dtype=np.int64)
    grids = np.meshgrid(*axes_i, idx_t, indexing="ij")
    flat_idx = np.column_stack([g.ravel() for g in grids])
    xs = x_lo + (flat_idx[:, :n] + 0.5) * h
    ts = t_lo + (flat_idx[:, n] + 0.5) * h**2
    mask = np.asarray(region(xs, ts), dtype=bool)
    cells = DyadicCells(tuple(x_lo), t_lo, h, flat_idx[mask])
    return CompactSetSample(xs[mask], ts[mask], cells, h)


# ---------------------------------------------------------------------------
# Slabs (spatial box x time interval)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Slab:
    """Closed spatial box ``[c - r, c + r]^n`` times ``[t_lo, t_hi]``."""

    center_x: tuple[float, ...]
    half_side: float
    t_lo: float
    t_hi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center_x", tuple(float(v) for v in self.center_x))
        if self.half_side <= 0 or not self.t_lo < self.t_hi:
            raise ValueError("slab needs positive half side and t_lo < t_hi")

    @property
    def dim(self) -> int:
        return len(self.center_x)

    def contains_batch(self, x, t) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        c = np.asarray(self.center_x)
        ok = np.all(np.abs(xa - c) <= self.half_side, axis=1)
        return ok & (ta >= self.t_lo) & (ta <= self.t_hi)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center_x)
        return c - self.half_side, c + self.half_side


def slab_sample(slab: Slab, depth: int = 2) -> CompactSetSample:
    """Rasterize a full slab at spatial side ``half_side / 2^depth``."""
    h = slab.half_side / 2**depth
    lo, hi = slab.bbox()
    return rasterize(lambda x, t: np.ones(len(t), dtype=bool), lo, hi, slab.t_lo, slab.t_hi, h)


def slab_complement_sample(d: Domain, slab: Slab, depth: int = 2) -> CompactSetSample:
    """Rasterize ``slab ∩ complement(d)`` (cell-center test)."""
    h = slab.half_side / 2**depth
    lo, hi = slab.bbox()
    return rasterize(
        lambda x, t: ~d.contains_batch(x, t), lo, hi, slab.t_lo, slab.t_hi, h
    )


def backward_cube_complement_sample(
    d: Domain, x0: Sequence[float], t0: float, r: float, depth: int = 3
) -> CompactSetSample:
    """Rasterize ``Q_r^-(x0, t0) ∩ complement(d)`` into dyadic cells."""
    x0 = np.asarray(x0, dtype=float)
    h = r / 2**depth

    def region(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        in_cube = (np.linalg.norm(x - x0, axis=1) < r) & (t > t0 - r * r) & (t < t0)
        return in_cube & ~d.contains_batch(x, t)

    return rasterize(region, x0 - r, x0 + r, t0 - r * r, t0, h)


def singleton_sample(p: SpacetimePoint, resolution: float = 1e-8) -> CompactSetSample:
    """A single-point compact set at the stated sampling resolution."""
    return CompactSetSample(p.x_array()[None, :], np.array([p.t]), None, resolution)


def slab_subdivision(slab: Slab, a: float) -> list[Slab]:
    """Tile ``[c-r, c+r]^n x [t_hi - (a r)^2, t_hi]`` by ``a^-n`` congruent
    parabolic subcubes of side ``a r`` (spatial box side ``2 a r``, time
    height ``(a r)^2``).

    Requires ``a = 2^-m`` with ``m >= 1`` and a slab of time height exactly
    ``(a r)^2``.
    """
    m = round(math.log2(1.0 / a))
    if m < 1 or not math.isclose(a, 2.0**-m, rel_tol=0, abs_tol=1e-12):
        raise ValueError("subdivision ratio must be a = 2^-m with m >= 1")
    r = slab.half_side
    height = slab.t_hi - slab.t_lo
    if not math.isclose(height, (a * r) ** 2, rel_tol=1e-9, abs_tol=1e-15):
        raise ValueError("slab time height must equal (a*r)^2")
    k = 2**m  # splits per spatial axis
    sub_r = a * r
    out: list[Slab] = []
    base = np.asarray(slab.center_x) - r
    for combo in itertools.product(range(k), repeat=slab.dim):
        center = base + (2 * np.asarray(combo, dtype=float) + 1.0) * sub_r
        out.append(Slab(tuple(center), sub_r, slab.t_lo, slab.t_hi))
    return out


# ---------------------------------------------------------------------------
# Capacity by linear programming
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityEstimate:
    lp_value: float
    verify_max_potential: float
    certified_lower: float
    constraint_count: int
    atom_count: int


def _offset_lattice(n: int, reach: int, pitch: float) -> np.ndarray:
    """Spatial offsets ``{-reach..reach}^n * pitch``."""
    axis = np.arange(-reach, reach + 1, dtype=float) * pitch
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _dedupe(points_x: np.ndarray, points_t: np.ndarray, qx: float, qt: float):
    keys = np.column_stack(
        [np.round(points_x / qx).astype(np.int64), np.round(points_t / qt).astype(np.int64)]
    )
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return points_x[first], points_t[first]


def _filter_near_atoms(
    px: np.ndarray, pt: np.ndarray, ax: np.ndarray, at: np.ndarray, min_dist: float
) -> tuple[np.ndarray, np.ndarray]:
    """Drop grid points parabolically closer than ``min_dist`` to an atom.

    Such points sit below the sampling resolution; floating-point collisions
    between ladder times and atom times would otherwise produce spurious
    near-singular kernel entries.
    """
    keep = np.ones(len(pt), dtype=bool)
    chunk = 8192
    for i in range(0, len(pt), chunk):
        dx = np.linalg.norm(px[i : i + chunk, None, :] - ax[None, :, :], axis=2)
        dt = np.sqrt(np.abs(pt[i : i + chunk, None] - at[None, :]))
        keep[i : i + chunk] = np.maximum(dx, dt).min(axis=1) >= min_dist
    return px[keep], pt[keep]


_LADDER_PHASE = (1.0 + math.sqrt(5.0)) / 2.0  # keeps ladder times off the atom lattice


def build_capacity_grids(
    K: CompactSetSample, kernel: ScaledHeatKernel
) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Constraint and verify grids in the atoms' forward cone.

    Constraint points sit on dyadic time offsets from ``(res/2)^2`` up to
    ``(3 diam)^2`` with spatial lattice pitch ``sqrt(tau)``; the verify grid
    refines both ladders at least four-fold. All pitches scale with the
    sample, so the construction is parabolic-scaling covariant.
    """
    if K.atom_count == 0:
        raise ValueError("cannot build grids for an empty sample")
    n = K.dim
    h = float(K.resolution)
    span_x = float(np.linalg.norm(K.x.max(axis=0) - K.x.min(axis=0))) if K.atom_count > 1 else 0.0
    span_t = float(K.t.max() - K.t.min())
    s0 = max(span_x, math.sqrt(max(span_t, 0.0)), h)
    tau_min = _LADDER_PHASE * (h / 2.0) ** 2
    tau_max = (3.0 * s0) ** 2

    def ladder(points: list, taus: Sequence[float], reach: int, subdiv: int) -> None:
        for tau in taus:
            pitch = math.sqrt(tau) / subdiv
            offs = _offset_lattice(n, reach, pitch)
            px = (K.x[:, None, :] + offs[None, :, :]).reshape(-1, n)
            pt = np.repeat(K.t + tau, len(offs))
            px, pt = _dedupe(px, pt, pitch / 2.0, tau / 4.0)
            points.append((px, pt))

    taus_c: list[float] = []
    tau = tau_min
    while tau <= tau_max * 1.0001 and len(taus_c) < 48:
        taus_c.append(tau)
        tau *= 4.0
    cpts: list = []
    ladder(cpts, taus_c, reach=1, subdiv=1)

    taus_v: list[float] = []
    tau = tau_min
    while tau <= tau_max * 1.0001 and len(taus_v) < 192:
        taus_v.append(tau)
        tau *= math.sqrt(2.0)
    vpts: list = []
    ladder(vpts, taus_v, reach=4, subdiv=4)

    cx = np.concatenate([p[0] for p in cpts])
    ct = np.concatenate([p[1] for p in cpts])
    cx, ct = _filter_near_atoms(cx, ct, K.x, K.t, h / 4.0)
    vx = np.concatenate([p[0] for p in vpts] + [cx])
    vt = np.concatenate([p[1] for p in vpts] + [ct])
    vx, vt = _filter_near_atoms(vx, vt, K.x, K.t, h / 4.0)
    return (cx, ct), (vx, vt)


def _max_potential(
    kernel: ScaledHeatKernel,
    w: np.ndarray,
    atoms_x: np.ndarray,
    atoms_t: np.ndarray,
    gx: np.ndarray,
    gt: np.ndarray,
    chunk: int = 8192,
) -> float:
    best = 0.0
    for i in range(0, len(gt), chunk):
        A = heat_kernel_grid(kernel.M, kernel.n, gx[i : i + chunk], gt[i : i + chunk], atoms_x, atoms_t)
        val = float((A @ w).max()) if len(w) else 0.0
        best = max(best, val)
    return best


def estimate_capacity(
    K: CompactSetSample,
    kernel: ScaledHeatKernel,
    constraint_grid: tuple[np.ndarray, np.ndarray] | None = None,
    verify_grid: tuple[np.ndarray, np.ndarray] | None = None,
) -> CapacityEstimate:
    """Thermal capacity lower bound for a sampled compact set.

    Solves ``max sum(w)`` subject to ``w >= 0`` and potential ``<= 1`` on the
    constraint grid, then evaluates the optimal potential on the (finer)
    verify grid; ``certified_lower = lp_value / max(1, verify_max)`` is the
    value of a measure whose potential is ``<= 1`` on every checked point.
    """
    if K.atom_count == 0:
        return CapacityEstimate(0.0, 0.0, 0.0, 0, 0)
    if kernel.n != K.dim:
        raise ValueError("kernel dimension does not match the sample")
    if constraint_grid is None or verify_grid is None:
        cg, vg = build_capacity_grids(K, kernel)
        constraint_grid = constraint_grid or cg
        verify_grid = verify_grid or vg
    cx, ct = constraint_grid
    A = heat_kernel_grid(kernel.M, kernel.n, cx, ct, K.x, K.t)
    col_max = A.max(axis=0) if len(A) else np.zeros(K.atom_count)
    if np.any(col_max <= 0.0):
        raise ValueError(
            "constraint grid does not see some atoms (all-zero kernel column); "
            "bad grid geometry"
        )
    res = linprog(
        c=-np.ones(K.atom_count),
        A_ub=A,
        b_ub=np.ones(len(ct)),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"capacity LP failed: {res.message}")
    w = np.asarray(res.x)
    lp_value = float(w.sum())
    vx, vt = verify_grid
    vmax = _max_potential(kernel, w, K.x, K.t, vx, vt)
    certified = lp_value / max(1.0, vmax)
    return CapacityEstimate(lp_value, vmax, certified, len(ct), K.atom_count)


# ---------------------------------------------------------------------------
# Hausdorff content and Frostman mass
# ---------------------------------------------------------------------------


def hausdorff_content_upper(cells: DyadicCells | None, s: float, max_depth: int = 12) -> float:
    """Greedy dyadic covering upper bound for the parabolic ``s``-content."""
    if s < 0:
        raise ValueError("exponent s must be >= 0")
    if cells is None or cells.count == 0:
        return 0.0
    best = math.inf
    for level in range(max_depth + 1):
        n_cells = cells.coarsened_counts(level)
        diam = cell_diameter(cells.h * 2**level, cells.n)
        best = min(best, n_cells * diam**s)
        if n_cells == 1:
            break
    return best


def frostman_lower_bound(
    cells: DyadicCells | None, s: float
) -> tuple[float, DiscreteMeasure]:
    """Bottom-up dyadic mass distribution with per-ancestor caps.

    Each finest cell starts with mass ``diam^s``; ancestor totals are capped
    at their own ``diam^s`` by proportional down-scaling. The total is a
    Frostman-type lower bound for the parabolic content up to a dimensional
    constant; the witness measure satisfies ``mu(cell) <= diam(cell)^s`` on
    every dyadic cell by construction.
    """
    if s < 0:
        raise ValueError("exponent s must be >= 0")
    if cells is None or cells.count == 0:
        return 0.0, DiscreteMeasure(np.zeros((0, 1)), np.zeros(0), np.zeros(0))
    n = cells.n
    mass = np.full(cells.count, cell_diameter(cells.h, n) ** s, dtype=float)
    level = 0
    while True:
        level += 1
        if level > 62:
            break
        sp = cells.idx[:, :n] >> level
        ti = cells.idx[:, n] >> (2 * level)
        merged = np.column_stack([sp, ti])
        uniq, inverse = np.unique(merged, axis=0, return_inverse=True)
        totals = np.bincount(inverse, weights=mass)
        cap = cell_diameter(cells.h * 2**level, n) ** s
        factors = np.minimum(1.0, cap / np.maximum(totals, 1e-300))
        mass = mass * factors[inverse]
        if len(uniq) == 1:
            break
    xs, ts = cells.centers()
    return float(mass.sum()), DiscreteMeasure(xs, ts, mass)


# ---------------------------------------------------------------------------
# Condition reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionRow:
    x: tuple[float, ...]
    t: float
    r: float
    ratio: float


@dataclass(frozen=True)
class ConditionReport:
    """Per-sample density ratios for a time-backwards boundary condition."""

    condition: str  # "TBCDC" or "TBHCC"
    rows: tuple[ConditionRow, ...]
    worst_ratio: float  # min over rows; +inf when the report is empty
    parameters: dict
    resolution: dict

    def csv_rows(self) -> list[list]:
        n = len(self.rows[0].x) if self.rows else 0
        header = [f"x{i}" for i in range(n)] + ["t", "r", "ratio"]
        out: list[list] = [header]
        for row in self.rows:
            out.append(list(row.x) + [row.t, row.r, row.ratio])
        return out


def check_tbhcc(
    d: Domain,
    sigma: SigmaSample,
    scales: Sequence[float],
    eps: float = 1.0,
    depth: int = 3,
) -> ConditionReport:
    """Time-backwards Hausdorff content condition.

    For each boundary sample and admissible radius, rasterizes the backward
    cube's intersection with the complement, runs the Frostman mass
    distribution at exponent ``s = n + eps``, and reports
    ``mass / r^(n+eps)``; ``worst_ratio`` is the empirical condition
    constant.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = d.dim
    s = n + eps
    rows: list[ConditionRow] = []
    for pt, rmax in zip(sigma.points, sigma.max_radii):
        admissible = [r for r in scales if r < rmax]
        if not admissible:
            continue
        for r in admissible:
            sample = backward_cube_complement_sample(d, pt.x, pt.t, r, depth=depth)
            mass, _ = frostman_lower_bound(sample.cells, s)
            rows.append(ConditionRow(pt.x, pt.t, r, mass / r**s))
    worst = min((row.ratio for row in rows), default=math.inf)
    return ConditionReport(
        condition="TBHCC",
        rows=tuple(rows),
        worst_ratio=worst,
        parameters={"eps": eps, "scales": list(map(float, scales))},
        resolution={"depth": depth, "cells_per_radius": 2**depth},
    )


_SLAB_CAP_CACHE: dict[tuple, float] = {}


def _reference_slab_capacity(kernel: ScaledHeatKernel, r: float, a: float, depth: int) -> float:
    key = (kernel.M, kernel.n, float(r), float(a), int(depth))
    if key not in _SLAB_CAP_CACHE:
        slab = Slab((0.0,) * kernel.n, r, -(r * r), -((a * r) ** 2))
        est = estimate_capacity(slab_sample(slab, depth=depth), kernel)
        _SLAB_CAP_CACHE[key] = est.lp_value
    return _SLAB_CAP_CACHE[key]


def check_tbcdc(
    d: Domain,
    kernel: ScaledHeatKernel,
    sigma: SigmaSample,
    scales: Sequence[float],
    a: float = 0.5,
    depth: int = 2,
) -> ConditionReport:
    """Time-backwards capacity density condition.

    For each boundary sample and admissible radius, estimates the thermal
    capacity of ``(box slab of side r over [t0-r^2, t0-(a r)^2]) ∩
    complement`` and divides by the full-slab capacity at the same
    discretization.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    rows: list[ConditionRow] = []
    for pt, rmax in zip(sigma.points, sigma.max_radii):
        admissible = [r for r in scales if r < rmax]
        if not admissible:
            continue
        for r in admissible:
            slab = Slab(pt.x, r, pt.t - r * r, pt.t - (a * r) ** 2)
            numer_sample = slab_complement_sample(d, slab, depth=depth)
            if numer_sample.atom_count == 0:
                ratio = 0.0
            else:
                numer = estimate_capacity(numer_sample, kernel).lp_value
                denom = _reference_slab_capacity(kernel, r, a, depth)
                ratio = numer / denom
            rows.append(ConditionRow(pt.x, pt.t, r, ratio))
    worst = min((row.ratio for row in rows), default=math.inf)
    return ConditionReport(
        condition="TBCDC",
        rows=tuple(rows),
        worst_ratio=worst,
        parameters={"a": a, "scales": list(map(float, scales)), "M": kernel.M},
        resolution={"depth": depth, "cells_per_radius": 2**depth},
    )


# ---------------------------------------------------------------------------
# Heat balls and partial Wiener sums
# ---------------------------------------------------------------------------


def heat_ball_contains(
    M: float, center: SpacetimePoint, r: float, q: SpacetimePoint, closed: bool = False
) -> bool:
    """Super-level set of the diffusivity-``M`` kernel at level ``(4 pi r)^(-n/2)``.

    Closed-form reduction: with ``tau = center.t - q.t`` the point lies in
    the heat ball iff ``tau > 0``, ``M tau < r`` and
    ``|x_center - x_q|^2 < 2 n M tau log(r / (M tau))``.
    """
    if r <= 0:
        raise ValueError("heat ball radius must be positive")
    n = center.dim
    tau = center.t - q.t
    if tau <= 0:
        return False
    if M * tau >= r:
        return False
    rhs = 2.0 * n * M * tau * math.log(r / (M * tau))
    lhs = float(np.sum((center.x_array() - q.x_array()) ** 2))
    return lhs <= rhs if closed else lhs < rhs


def _heat_ball_mask(
    M: float, n: int, x0: np.ndarray, t0: float, r: float, x: np.ndarray, t: np.ndarray, closed: bool
) -> np.ndarray:
    tau = t0 - np.asarray(t, dtype=float)
    lhs = np.sum((np.atleast_2d(x) - x0) ** 2, axis=1)
    ok = (tau > 0) & (M * tau < r)
    rhs = np.zeros_like(tau)
    rhs[ok] = 2.0 * n * M * tau[ok] * np.log(r / (M * tau[ok]))
    inside = np.zeros(len(tau), dtype=bool)
    inside[ok] = lhs[ok] <= rhs[ok] if closed else lhs[ok] < rhs[ok]
    return inside


def wiener_partial_sums(
    d: Domain,
    kernel: ScaledHeatKernel,
    point: SpacetimePoint,
    lam: float,
    terms: int,
    mode: str = "heat_ball",
    a: float = 0.5,
    depth: int = 2,
    base_radius: float = 1.0,
) -> list[float]:
    """Partial sums ``S_j = sum_{k<=j} lam^(-k n / 2) Cap(complement ∩ shell_k)``.

    ``heat_ball`` mode uses closed heat-ball annuli between radii
    ``base_radius * lam^k`` and ``base_radius * lam^(k+1)``; ``cylinder``
    mode uses box slabs of side ``r_k = sqrt(4 pi) N^(1/n) a^-1 lam^((k+1)/2)``
    over ``[t - r_k^2, t - (a r_k)^2]``. Capacities come from the LP
    estimator at the stated rasterization depth. A warning marks terms whose
    shells fall below time resolution at the pole; those terms are untrusted.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    if terms < 1:
        raise ValueError("need at least one term")
    if mode not in ("heat_ball", "cylinder"):
        raise ValueError(f"unknown mode {mode!r}")
    n = d.dim
    M = kernel.M
    x0 = point.x_array()
    t0 = point.t
    t_floor = 1e-12 * max(1.0, abs(t0))
    sums: list[float] = []
    total = 0.0
    warned = False
    for k in range(1, terms + 1):
        if mode == "heat_ball":
            r_out = base_radius * lam**k
            r_in = base_radius * lam ** (k + 1)
            if r_out / M < t_floor and not warned:
                warnings.warn(
                    f"shells from term {k} fall below time resolution; "
                    "further terms are untrusted"
                )
                warned = True

            def region(x: np.ndarray, t: np.ndarray) -> np.ndarray:
                shell = _heat_ball_mask(M, n, x0, t0, r_out, x, t, closed=True) & ~_heat_ball_mask(
                    M, n, x0, t0, r_in, x, t, closed=False
                )
                return shell & ~d.contains_batch(x, t)

            half = math.sqrt(2.0 * n * r_out / math.e)
            h = math.sqrt(r_out / M) / 2**depth
            sample = rasterize(region, x0 - half, x0 + half, t0 - r_out / M, t0, h)
        else:
            N = aronson_constant_for_heat(M, n)
            r_k = math.sqrt(4.0 * math.pi) * N ** (1.0 / n) / a * lam ** ((k + 1) / 2.0)
            if r_k * r_k < t_floor and not warned:
                warnings.warn(
                    f"shells from term {k} fall below time resolution; "
                    "further terms are untrusted"
                )
                warned = True
            slab = Slab(tuple(x0), r_k, t0 - r_k * r_k, t0 - (a * r_k) ** 2)
            sample = slab_complement_sample(d, slab, depth=depth)
        cap = estimate_capacity(sample, kernel).lp_value if sample.atom_count else 0.0
        total += lam ** (-k * n / 2.0) * cap
        sums.append(total)
    return sums
