"""Space-time points, the parabolic metric, composable open domains, and
sampled boundary classification.

Conventions used throughout the package:

* A space-time point is ``(x, t)`` with ``x`` an ``n``-vector of lengths and
  ``t`` a time carrying length-squared units.
* The parabolic norm is ``max(|x|, sqrt(|t|))`` with ``|x|`` Euclidean; the
  induced metric scales time like length squared.
* Domains are *open* sets: points exactly on a boundary are exterior for
  membership purposes.
* Membership oracles are total, deterministic and vectorised
  (``contains_batch`` takes ``(m, n)`` positions and ``(m,)`` times).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "SpacetimePoint",
    "ParabolicCube",
    "BoundaryClass",
    "SigmaSample",
    "Domain",
    "Cylinder",
    "HalfTimeSlab",
    "CubeDomain",
    "PetrovskyDomain",
    "ComplementOfCubes",
    "Union",
    "Intersection",
    "Complement",
    "parabolic_norm",
    "parabolic_dist",
    "contains",
    "classify_boundary",
    "dist_to_essential_boundary",
    "sample_sigma",
    "domain_to_dsl",
    "domain_from_dsl",
    "domain_to_json",
    "domain_from_json",
    "load_domain",
]

DSL_SCHEMA = "caloric-domain/1"


# ---------------------------------------------------------------------------
# Points and the parabolic metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpacetimePoint:
    """A point ``(x, t)`` with spatial vector ``x`` and time ``t``."""

    x: tuple[float, ...]
    t: float

    def __post_init__(self) -> None:
        xs = tuple(float(v) for v in self.x)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "t", float(self.t))
        if len(xs) < 1:
            raise ValueError("spatial dimension must be >= 1")
        if not all(math.isfinite(v) for v in xs) or not math.isfinite(self.t):
            raise ValueError("all coordinates must be finite")

    @property
    def dim(self) -> int:
        return len(self.x)

    def x_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    @staticmethod
    def of(x: float | Sequence[float], t: float) -> "SpacetimePoint":
        if isinstance(x, (int, float)):
            return SpacetimePoint((float(x),), float(t))
        return SpacetimePoint(tuple(float(v) for v in x), float(t))


def parabolic_norm(p: SpacetimePoint) -> float:
    """``max(|x|, sqrt(|t|))`` with Euclidean ``|x|``."""
    return max(float(np.linalg.norm(p.x_array())), math.sqrt(abs(p.t)))


def parabolic_dist(p: SpacetimePoint, q: SpacetimePoint) -> float:
    """Parabolic distance ``max(|x_p - x_q|, sqrt(|t_p - t_q|))``."""
    dx = float(np.linalg.norm(p.x_array() - q.x_array()))
    return max(dx, math.sqrt(abs(p.t - q.t)))


def parabolic_dist_arrays(
    x: np.ndarray, t: np.ndarray, x0: np.ndarray, t0: float
) -> np.ndarray:
    """Vectorised parabolic distance from rows of ``(x, t)`` to ``(x0, t0)``."""
    dx = np.linalg.norm(np.atleast_2d(x) - np.asarray(x0, dtype=float), axis=1)
    return np.maximum(dx, np.sqrt(np.abs(np.asarray(t, dtype=float) - t0)))


def _as_batch(x: np.ndarray | Sequence[Sequence[float]], t) -> tuple[np.ndarray, np.ndarray]:
    xa = np.atleast_2d(np.asarray(x, dtype=float))
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if xa.shape[0] != ta.shape[0]:
        raise ValueError("position and time batches differ in length")
    return xa, ta


# ---------------------------------------------------------------------------
# Parabolic cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParabolicCube:
    """Parabolic metric ball: spatial Euclidean ball x open time interval.

    ``kind`` restricts the time interval: ``full`` spans
    ``(t_c - r^2, t_c + r^2)``, ``backward`` keeps only ``t < t_c`` and
    ``forward`` only ``t > t_c``.
    """

    center: SpacetimePoint
    radius: float
    kind: str = "full"

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.kind not in ("full", "backward", "forward"):
            raise ValueError(f"unknown cube kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.center.dim

    def time_interval(self) -> tuple[float, float]:
        tc, r2 = self.center.t, self.radius**2
        if self.kind == "full":
            return (tc - r2, tc + r2)
        if self.kind == "backward":
            return (tc - r2, tc)
        return (tc, tc + r2)

    def contains_batch(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        lo, hi = self.time_interval()
        dx = np.linalg.norm(xa - self.center.x_array(), axis=1)
        return (dx < self.radius) & (ta > lo) & (ta < hi)

    def contains(self, p: SpacetimePoint) -> bool:
        return bool(self.contains_batch(p.x_array()[None, :], [p.t])[0])

    def dist_outside(self, x, t) -> np.ndarray:
        """Exact parabolic distance from batch points to the closed cube."""
        xa, ta = _as_batch(x, t)
        lo, hi = self.time_interval()
        dsp = np.maximum(np.linalg.norm(xa - self.center.x_array(), axis=1) - self.radius, 0.0)
        dti = np.maximum(np.maximum(lo - ta, ta - hi), 0.0)
        return np.maximum(dsp, np.sqrt(dti))

    def dist_inside(self, x, t) -> np.ndarray:
        """Exact parabolic distance from batch points to the cube's exterior.

        Zero for points outside the open cube.
        """
        xa, ta = _as_batch(x, t)
        lo, hi = self.time_interval()
        gsp = self.radius - np.linalg.norm(xa - self.center.x_array(), axis=1)
        gti = np.minimum(ta - lo, hi - ta)
        out = np.minimum(gsp, np.sqrt(np.maximum(gti, 0.0)))
        return np.where((gsp > 0) & (gti > 0), out, 0.0)

    def to_dsl(self) -> dict:
        node: dict = {
            "center": {"x": list(self.center.x), "t": self.center.t},
            "r": self.radius,
        }
        if self.kind != "full":
            node["kind"] = self.kind
        return node

    @staticmethod
    def from_dsl(node: dict) -> "ParabolicCube":
        c = node["center"]
        return ParabolicCube(
            SpacetimePoint(tuple(c["x"]), c["t"]), float(node["r"]), node.get("kind", "full")
        )


# ---------------------------------------------------------------------------
# Boundary classes
# ---------------------------------------------------------------------------


class BoundaryClass(Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    NORMAL = "normal"
    BOTTOM = "bottom"
    SINGULAR = "singular"
    SEMI_SINGULAR = "semi_singular"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class SigmaSample:
    """Sampled points of the quasi-lateral boundary with admissible radii.

    Every point passed a membership-flip test at tolerance ``tol``: a point
    within ``tol`` on one side is interior and within ``tol`` on the other
    side is exterior.
    """

    points: tuple[SpacetimePoint, ...]
    max_radii: tuple[float, ...]
    tol: float

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# Domain base
# ---------------------------------------------------------------------------


class Domain:
    """Open space-time set with a total, deterministic membership oracle.

    Subclasses provide vectorised membership, conservative parabolic gap
    bounds used by the exit walker, and time/spatial extent metadata.
    """

    dim: int

    # -- membership --------------------------------------------------------
    def contains_batch(self, x, t) -> np.ndarray:
        raise NotImplementedError

    def contains(self, p: SpacetimePoint) -> bool:
        return bool(self.contains_batch(p.x_array()[None, :], [p.t])[0])

    # -- extent metadata ----------------------------------------------------
    def time_bounds(self) -> tuple[float, float]:
        """(T_min, T_max); infinite entries allowed."""
        raise NotImplementedError

    def spatial_bounds(self) -> np.ndarray | None:
        """Axis-aligned bounding box ``(dim, 2)`` or None when unbounded."""
        raise NotImplementedError

    @property
    def spatially_bounded(self) -> bool:
        return self.spatial_bounds() is not None

    @property
    def time_bounded(self) -> bool:
        lo, hi = self.time_bounds()
        return math.isfinite(lo) and math.isfinite(hi)

    @property
    def bounded(self) -> bool:
        return self.spatially_bounded and self.time_bounded

    # -- conservative parabolic gap bounds ----------------------------------
    def gap_inside(self, x, t) -> np.ndarray:
        """Lower bound on the parabolic distance to the complement.

        Zero (or negative-clipped to zero) wherever the point is not inside.
        """
        raise NotImplementedError

    def gap_outside(self, x, t) -> np.ndarray:
        """Lower bound on the parabolic distance to the (closed) set."""
        raise NotImplementedError

    # -- walker support ------------------------------------------------------
    def past_clearance_time(self) -> float | None:
        """A time ``c`` such that the whole half-space ``t < c`` lies in the
        domain (so a backward path below ``c`` can never exit), or None."""
        return None

    # -- sampling support ----------------------------------------------------
    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        """Finite region enclosing the interesting part of the boundary."""
        box = self.spatial_bounds()
        lo, hi = self.time_bounds()
        if box is None:
            box = np.array([[-1.0, 1.0]] * self.dim)
        else:
            pad = 0.25 * max((box[:, 1] - box[:, 0]).max(), 1e-9)
            box = np.column_stack([box[:, 0] - pad, box[:, 1] + pad])
        if not math.isfinite(lo):
            lo = -1.0 if not math.isfinite(hi) else hi - 4.0
        if not math.isfinite(hi):
            hi = lo + 4.0
        span = max(hi - lo, 1e-9)
        return box, (lo - 0.25 * span, hi + 0.25 * span)

    # -- serialization -------------------------------------------------------
    def to_dsl(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Primitive domains
# ---------------------------------------------------------------------------


class Cylinder(Domain):
    """Open spatial box times open time interval."""

    def __init__(self, box: Sequence[Sequence[float]], time: Sequence[float]):
        self.box = np.asarray(box, dtype=float).reshape(-1, 2)
        self.dim = self.box.shape[0]
        self.t0, self.t1 = float(time[0]), float(time[1])
        if not np.all(self.box[:, 0] < self.box[:, 1]) or not self.t0 < self.t1:
            raise ValueError("cylinder needs nonempty box and time interval")

    def contains_batch(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        ok = (ta > self.t0) & (ta < self.t1)
        ok &= np.all((xa > self.box[:, 0]) & (xa < self.box[:, 1]), axis=1)
        return ok

    def time_bounds(self) -> tuple[float, float]:
        return (self.t0, self.t1)

    def spatial_bounds(self) -> np.ndarray:
        return self.box.copy()

    def gap_inside(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        lat = np.minimum(xa - self.box[:, 0], self.box[:, 1] - xa).min(axis=1)
        tim = np.minimum(ta - self.t0, self.t1 - ta)
        gap = np.minimum(lat, np.sqrt(np.maximum(tim, 0.0)))
        return np.where((lat > 0) & (tim > 0), gap, 0.0)

    def gap_outside(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        clip = np.clip(xa, self.box[:, 0], self.box[:, 1])
        dsp = np.linalg.norm(xa - clip, axis=1)
        dti = np.maximum(np.maximum(self.t0 - ta, ta - self.t1), 0.0)
        return np.maximum(dsp, np.sqrt(dti))

    def essential_gap(self, x, t) -> np.ndarray:
        """Exact distance to the essential boundary (lateral faces + bottom).

        The terminal face ``t = t1`` is singular and excluded.
        """
        xa, ta = _as_batch(x, t)
        lat = np.minimum(xa - self.box[:, 0], self.box[:, 1] - xa).min(axis=1)
        return np.minimum(lat, np.sqrt(np.maximum(ta - self.t0, 0.0)))

    def to_dsl(self) -> dict:
        return {"type": "cylinder", "box": self.box.tolist(), "time": [self.t0, self.t1]}


class HalfTimeSlab(Domain):
    """All of space before (``t < cut``) or after (``t > cut``) a time."""

    def __init__(self, *, before: float | None = None, after: float | None = None, dim: int = 1):
        if (before is None) == (after is None):
            raise ValueError("exactly one of before/after must be given")
        self.before = None if before is None else float(before)
        self.after = None if after is None else float(after)
        self.dim = int(dim)

    @property
    def cut(self) -> float:
        return self.before if self.before is not None else self.after  # type: ignore[return-value]

    def contains_batch(self, x, t) -> np.ndarray:
        _, ta = _as_batch(x, t)
        return ta < self.before if self.before is not None else ta > self.after

    def time_bounds(self) -> tuple[float, float]:
        if self.before is not None:
            return (-math.inf, self.before)
        return (self.after, math.inf)  # type: ignore[return-value]

    def spatial_bounds(self) -> None:
        return None

    def gap_inside(self, x, t) -> np.ndarray:
        _, ta = _as_batch(x, t)
        gap = (self.before - ta) if self.before is not None else (ta - self.after)
        return np.sqrt(np.maximum(gap, 0.0))

    def gap_outside(self, x, t) -> np.ndarray:
        _, ta = _as_batch(x, t)
        gap = (ta - self.before) if self.before is not None else (self.after - ta)
        return np.sqrt(np.maximum(gap, 0.0))

    def essential_gap(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        if self.after is not None:
            # the bottom slice is the whole essential boundary
            return np.sqrt(np.maximum(ta - self.after, 0.0))
        # t < cut: the slice {t == cut} is singular; only infinity is essential
        return np.full(ta.shape, math.inf)

    def past_clearance_time(self) -> float | None:
        return self.before

    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        box = np.array([[-1.0, 1.0]] * self.dim)
        return box, (self.cut - 1.0, self.cut + 1.0)

    def to_dsl(self) -> dict:
        if self.before is not None:
            return {"type": "half_slab", "before": self.before, "dim": self.dim}
        return {"type": "half_slab", "after": self.after, "dim": self.dim}


class CubeDomain(Domain):
    """An open parabolic cube considered as a domain."""

    def __init__(self, cube: ParabolicCube):
        self.cube = cube
        self.dim = cube.dim

    def contains_batch(self, x, t) -> np.ndarray:
        return self.cube.contains_batch(x, t)

    def time_bounds(self) -> tuple[float, float]:
        return self.cube.time_interval()

    def spatial_bounds(self) -> np.ndarray:
        c, r = self.cube.center.x_array(), self.cube.radius
        return np.column_stack([c - r, c + r])

    def gap_inside(self, x, t) -> np.ndarray:
        return self.cube.dist_inside(x, t)

    def gap_outside(self, x, t) -> np.ndarray:
        return self.cube.dist_outside(x, t)

    def essential_gap(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        lo, _ = self.cube.time_interval()
        lat = self.cube.radius - np.linalg.norm(xa - self.cube.center.x_array(), axis=1)
        return np.minimum(lat, np.sqrt(np.maximum(ta - lo, 0.0)))

    def to_dsl(self) -> dict:
        return {"type": "parabolic_cube", **self.cube.to_dsl()}


class PetrovskyDomain(Domain):
    """The log-log thin tip domain ``x^2 < -4 t log|log|t||`` on -1/e < t < 0.

    With ``reflected=True`` the mirror image across ``t = 0`` is added; the
    two lobes pinch to zero width at the origin, so the junction segment at
    ``t = 0`` is empty in the limit (``junction_half_width`` keeps the schema
    extensible; membership at ``t == 0`` requires ``|x| < junction_half_width``).
    """

    T_MIN = -1.0 / math.e

    def __init__(self, reflected: bool = False, junction_half_width: float = 0.0):
        self.reflected = bool(reflected)
        self.junction_half_width = float(junction_half_width)
        self.dim = 1

    @staticmethod
    def half_width_sq(t) -> np.ndarray:
        """``B(t)^2 = -4 t log|log|t||`` for t in (-1/e, 0); 0 outside."""
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(ta)
        ok = (ta > PetrovskyDomain.T_MIN) & (ta < 0.0)
        u = -ta[ok]
        out[ok] = 4.0 * u * np.log(-np.log(u))
        return np.maximum(out, 0.0)

    def contains_batch(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        if xa.shape[1] != 1:
            raise ValueError("Petrovsky domain is one-dimensional in space")
        xs = xa[:, 0]
        below = (ta > self.T_MIN) & (ta < 0.0) & (xs**2 < self.half_width_sq(ta))
        if not self.reflected:
            return below
        above = (ta > 0.0) & (ta < -self.T_MIN) & (xs**2 < self.half_width_sq(-ta))
        junction = (ta == 0.0) & (np.abs(xs) < self.junction_half_width)
        return below | above | junction

    def time_bounds(self) -> tuple[float, float]:
        return (self.T_MIN, -self.T_MIN if self.reflected else 0.0)

    def spatial_bounds(self) -> np.ndarray:
        # max of B over the lobe (attained where log|log u| = 1/|log u|)
        b_max = 0.6241  # slight over-estimate of sup B, box needs only to cover
        return np.array([[-b_max, b_max]])

    def gap_inside(self, x, t) -> np.ndarray:
        """Bisection lower bound: largest rho whose parabolic ball stays in
        one lobe (B is unimodal on each lobe, so interval minima sit at the
        endpoints)."""
        xa, ta = _as_batch(x, t)
        xs = np.abs(xa[:, 0])
        inside = self.contains_batch(xa, ta)
        u = np.abs(ta)  # position within the lobe, 0 < u < 1/e; both lobes
        lo = np.zeros(len(ta))  # share the width profile B(-u).
        hi = np.full(len(ta), 0.7)

        def safe(rho: np.ndarray) -> np.ndarray:
            r2 = rho**2
            in_window = (u - r2 > 0.0) & (u + r2 < -self.T_MIN)
            b_lo = np.sqrt(self.half_width_sq(-(u - r2)))
            b_hi = np.sqrt(self.half_width_sq(-(u + r2)))
            return in_window & (np.minimum(b_lo, b_hi) >= xs + rho)

        for _ in range(40):
            mid = 0.5 * (lo + hi)
            good = safe(mid)
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
        return np.where(inside, lo, 0.0)

    def gap_outside(self, x, t) -> np.ndarray:
        _, ta = _as_batch(x, t)
        t_lo, t_hi = self.time_bounds()
        dti = np.maximum(np.maximum(t_lo - ta, ta - t_hi), 0.0)
        return np.sqrt(dti)

    def boundary_cloud(self, count: int = 512) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic dense cloud on the lateral curves and end points."""
        u = -self.T_MIN * 0.5 * (1.0 - np.cos(np.linspace(1e-6, math.pi - 1e-6, count)))
        u = np.clip(u, 1e-12, -self.T_MIN - 1e-12)
        b = np.sqrt(self.half_width_sq(-u))
        ts = [-u, -u]
        xs = [b, -b]
        if self.reflected:
            ts += [u, u]
            xs += [b, -b]
        t_all = np.concatenate(ts + [np.array([0.0, self.T_MIN] + ([-self.T_MIN] if self.reflected else []))])
        x_all = np.concatenate(xs + [np.zeros(3 if self.reflected else 2)])
        return x_all[:, None], t_all

    def essential_gap(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        cx, ct = self.boundary_cloud()
        dx = np.abs(xa[:, 0:1] - cx[:, 0][None, :])
        dt = np.sqrt(np.abs(ta[:, None] - ct[None, :]))
        return np.maximum(dx, dt).min(axis=1)

    def to_dsl(self) -> dict:
        node: dict = {"type": "petrovsky", "reflected": self.reflected}
        if self.junction_half_width:
            node["junction_half_width"] = self.junction_half_width
        return node


class ComplementOfCubes(Domain):
    """All of space-time minus a finite union of closed parabolic cubes."""

    def __init__(self, obstacles: Sequence[ParabolicCube]):
        self.obstacles = tuple(obstacles)
        if not self.obstacles:
            raise ValueError("need at least one obstacle")
        dims = {c.dim for c in self.obstacles}
        if len(dims) != 1:
            raise ValueError("obstacles must share a spatial dimension")
        self.dim = dims.pop()

    def contains_batch(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        inside_any = np.zeros(len(ta), dtype=bool)
        for cube in self.obstacles:
            lo, hi = cube.time_interval()
            dx = np.linalg.norm(xa - cube.center.x_array(), axis=1)
            inside_any |= (dx <= cube.radius) & (ta >= lo) & (ta <= hi)
        return ~inside_any

    def time_bounds(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def spatial_bounds(self) -> None:
        return None

    def gap_inside(self, x, t) -> np.ndarray:
        gaps = np.stack([c.dist_outside(x, t) for c in self.obstacles])
        return gaps.min(axis=0)

    def gap_outside(self, x, t) -> np.ndarray:
        xa, ta = _as_batch(x, t)
        best = np.zeros(len(ta))
        for cube in self.obstacles:
            lo, hi = cube.time_interval()
            dx = np.linalg.norm(xa - cube.center.x_array(), axis=1)
            inside = (dx <= cube.radius) & (ta >= lo) & (ta <= hi)
            gap = np.minimum(
                cube.radius - dx,
                np.sqrt(np.maximum(np.minimum(ta - lo, hi - ta), 0.0)),
            )
            best = np.maximum(best, np.where(inside, np.maximum(gap, 0.0), 0.0))
        return best

    def essential_gap(self, x, t) -> np.ndarray:
        # every obstacle boundary point is essential for the complement
        return self.gap_inside(x, t)

    def past_clearance_time(self) -> float | None:
        return min(c.time_interval()[0] for c in self.obstacles)

    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        centers = np.stack([c.center.x_array() for c in self.obstacles])
        radii = np.array([c.radius for c in self.obstacles])
        lo = (centers - radii[:, None]).min(axis=0)
        hi = (centers + radii[:, None]).max(axis=0)
        pad = max(radii.max(), 1e-9)
        spans = [c.time_interval() for c in self.obstacles]
        t_lo = min(s[0] for s in spans) - pad**2
        t_hi = max(s[1] for s in spans) + pad**2
        return np.column_stack([lo - pad, hi + pad]), (t_lo, t_hi)

    def to_dsl(self) -> dict:
        return {"type": "complement_cubes", "cubes": [c.to_dsl() for c in self.obstacles]}


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------


class Union(Domain):
    def __init__(self, args: Sequence[Domain]):
        self.args = tuple(args)
        if not self.args:
            raise ValueError("union of nothing")
        dims = {d.dim for d in self.args}
        if len(dims) != 1:
            raise ValueError("union members must share a spatial dimension")
        self.dim = dims.pop()

    def contains_batch(self, x, t) -> np.ndarray:
        out = self.args[0].contains_batch(x, t)
        for d in self.args[1:]:
            out = out | d.contains_batch(x, t)
        return out

    def time_bounds(self) -> tuple[float, float]:
        bounds = [d.time_bounds() for d in self.args]
        return (min(b[0] for b in bounds), max(b[1] for b in bounds))

    def spatial_bounds(self) -> np.ndarray | None:
        boxes = [d.spatial_bounds() for d in self.args]
        if any(b is None for b in boxes):
            return None
        lo = np.min([b[:, 0] for b in boxes], axis=0)
        hi = np.max([b[:, 1] for b in boxes], axis=0)
        return np.column_stack([lo, hi])

    def gap_inside(self, x, t) -> np.ndarray:
        return np.max([d.gap_inside(x, t) for d in self.args], axis=0)

    def gap_outside(self, x, t) -> np.ndarray:
        return np.min([d.gap_outside(x, t) for d in self.args], axis=0)

    def past_clearance_time(self) -> float | None:
        cs = [d.past_clearance_time() for d in self.args]
        cs = [c for c in cs if c is not None]
        return max(cs) if cs else None

    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        boxes, times = zip(*(d.sample_box() for d in self.args))
        lo = np.min([b[:, 0] for b in boxes], axis=0)
        hi = np.max([b[:, 1] for b in boxes], axis=0)
        return np.column_stack([lo, hi]), (min(t[0] for t in times), max(t[1] for t in times))

    def to_dsl(self) -> dict:
        return {"type": "union", "args": [d.to_dsl() for d in self.args]}


class Intersection(Domain):
    def __init__(self, args: Sequence[Domain]):
        self.args = tuple(args)
        if not self.args:
            raise ValueError("intersection of nothing")
        dims = {d.dim for d in self.args}
        if len(dims) != 1:
            raise ValueError("intersection members must share a spatial dimension")
        self.dim = dims.pop()

    def contains_batch(self, x, t) -> np.ndarray:
        out = self.args[0].contains_batch(x, t)
        for d in self.args[1:]:
            out = out & d.contains_batch(x, t)
        return out

    def time_bounds(self) -> tuple[float, float]:
        bounds = [d.time_bounds() for d in self.args]
        return (max(b[0] for b in bounds), min(b[1] for b in bounds))

    def spatial_bounds(self) -> np.ndarray | None:
        boxes = [b for b in (d.spatial_bounds() for d in self.args) if b is not None]
        if not boxes:
            return None
        lo = np.max([b[:, 0] for b in boxes], axis=0)
        hi = np.min([b[:, 1] for b in boxes], axis=0)
        return np.column_stack([lo, hi])

    def gap_inside(self, x, t) -> np.ndarray:
        return np.min([d.gap_inside(x, t) for d in self.args], axis=0)

    def gap_outside(self, x, t) -> np.ndarray:
        return np.max([d.gap_outside(x, t) for d in self.args], axis=0)

    def past_clearance_time(self) -> float | None:
        cs = [d.past_clearance_time() for d in self.args]
        if any(c is None for c in cs):
            return None
        return min(cs)  # type: ignore[arg-type]

    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        boxes, times = zip(*(d.sample_box() for d in self.args))
        lo = np.max([b[:, 0] for b in boxes], axis=0)
        hi = np.min([b[:, 1] for b in boxes], axis=0)
        hi = np.maximum(hi, lo + 1e-9)
        t_lo = max(t[0] for t in times)
        t_hi = max(min(t[1] for t in times), t_lo + 1e-9)
        return np.column_stack([lo, hi]), (t_lo, t_hi)

    def to_dsl(self) -> dict:
        return {"type": "intersection", "args": [d.to_dsl() for d in self.args]}


class Complement(Domain):
    def __init__(self, arg: Domain):
        self.arg = arg
        self.dim = arg.dim

    def contains_batch(self, x, t) -> np.ndarray:
        return ~self.arg.contains_batch(x, t)

    def time_bounds(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def spatial_bounds(self) -> None:
        return None

    def gap_inside(self, x, t) -> np.ndarray:
        return self.arg.gap_outside(x, t)

    def gap_outside(self, x, t) -> np.ndarray:
        return self.arg.gap_inside(x, t)

    def past_clearance_time(self) -> float | None:
        lo, _ = self.arg.time_bounds()
        return lo if math.isfinite(lo) else None

    def sample_box(self) -> tuple[np.ndarray, tuple[float, float]]:
        return self.arg.sample_box()

    def to_dsl(self) -> dict:
        return {"type": "complement", "args": [self.arg.to_dsl()]}


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def contains(d: Domain, p: SpacetimePoint) -> bool:
    """Membership in the open set; boundary points are exterior."""
    return d.contains(p)


def _sample_in_half_cube(
    center: SpacetimePoint, r: float, half: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples in Q_r (half=0), Q_r^- (half=-1) or Q_r^+ (half=+1)."""
    n = center.dim
    if n == 1:
        xs = rng.uniform(-r, r, size=(count, 1))
    else:
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = r * rng.uniform(0.0, 1.0, size=count) ** (1.0 / n)
        xs = dirs * radii[:, None]
    xs = xs + center.x_array()
    if half < 0:
        ts = center.t - rng.uniform(0.0, r * r, size=count)
    elif half > 0:
        ts = center.t + rng.uniform(0.0, r * r, size=count)
    else:
        ts = center.t + rng.uniform(-r * r, r * r, size=count)
    return xs, ts


def classify_boundary(
    d: Domain,
    p: SpacetimePoint,
    scales: Sequence[float] | None = None,
    samples_per_scale: int = 200,
    seed: int = 0,
) -> BoundaryClass:
    """Sampled implementation of the definitional boundary tests.

    The class is resolution-dependent: each test quantifier ("for every r",
    "there exists r") is decided at the supplied dyadic scales only, with
    ``samples_per_scale`` membership queries per half-cube. Nested-cube
    verdicts that contradict monotonicity (a finer backward cube showing
    complement after a coarser one sampled fully inside, or a finer forward
    cube showing domain points after a coarser one sampled empty) yield
    ``AMBIGUOUS``.
    """
    if scales is None:
        scales = [0.5 * 2.0**-j for j in range(9)]
    scales = sorted((float(s) for s in scales), reverse=True)
    if not scales:
        raise ValueError("scales must be nonempty")

    if d.contains(p):
        return BoundaryClass.INTERIOR

    rng = np.random.default_rng(seed)
    back_has_comp: list[bool] = []
    fwd_all_in: list[bool] = []
    fwd_any_in: list[bool] = []
    full_any_in: list[bool] = []
    for r in scales:
        bx, bt = _sample_in_half_cube(p, r, -1, samples_per_scale, rng)
        fx, ft = _sample_in_half_cube(p, r, +1, samples_per_scale, rng)
        b_in = d.contains_batch(bx, bt)
        f_in = d.contains_batch(fx, ft)
        back_has_comp.append(bool(np.any(~b_in)))
        fwd_all_in.append(bool(np.all(f_in)))
        fwd_any_in.append(bool(np.any(f_in)))
        full_any_in.append(bool(np.any(b_in)) or bool(np.any(f_in)))

    if not full_any_in[-1] and not any(full_any_in):
        return BoundaryClass.EXTERIOR

    # nested-cube consistency: backward complement hits are monotone
    # (finer hit implies coarser hit); forward emptiness is monotone
    # (coarser empty implies finer empty). scales[] is descending.
    for coarse in range(len(scales)):
        for fine in range(coarse + 1, len(scales)):
            if not back_has_comp[coarse] and back_has_comp[fine]:
                return BoundaryClass.AMBIGUOUS
            if not fwd_any_in[coarse] and fwd_any_in[fine]:
                return BoundaryClass.AMBIGUOUS

    if all(back_has_comp):
        # parabolic boundary; bottom when some forward cube is fully inside
        if any(fwd_all_in):
            return BoundaryClass.BOTTOM
        return BoundaryClass.NORMAL
    # abnormal: some backward cube sampled fully inside
    if any(not a for a in fwd_any_in):
        return BoundaryClass.SINGULAR
    return BoundaryClass.SEMI_SINGULAR


def essential_boundary_cloud(
    d: Domain, count: int = 256, seed: int = 0, tol: float = 1e-6
) -> tuple[np.ndarray, np.ndarray, float]:
    """Sampled essential-boundary point cloud ``(x, t, resolution)``.

    Boundary points are located by bisection between interior/exterior
    sample pairs; points classified singular at the sampling resolution are
    dropped. The returned resolution is the nominal covering scale (median
    nearest-neighbour parabolic spacing).
    """
    xs, ts = _boundary_points(d, count, seed, tol)
    if len(ts) == 0:
        return xs, ts, math.inf
    keep = []
    for i in range(len(ts)):
        cls = classify_boundary(
            d,
            SpacetimePoint(tuple(xs[i]), float(ts[i])),
            scales=[0.25 * 2.0**-j for j in range(5)],
            samples_per_scale=48,
            seed=seed + i,
        )
        keep.append(cls is not BoundaryClass.SINGULAR)
    keep_arr = np.asarray(keep, dtype=bool)
    xs, ts = xs[keep_arr], ts[keep_arr]
    if len(ts) < 2:
        return xs, ts, math.inf
    # median nearest-neighbour parabolic spacing
    dx = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=2)
    dp = np.maximum(dx, np.sqrt(np.abs(ts[:, None] - ts[None, :])))
    np.fill_diagonal(dp, np.inf)
    res = float(np.median(dp.min(axis=1)))
    return xs, ts, res


def _boundary_points(
    d: Domain, count: int, seed: int, tol: float
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    box, (t_lo, t_hi) = d.sample_box()
    found_x: list[np.ndarray] = []
    found_t: list[float] = []
    attempts = 0
    while len(found_t) < count and attempts < 60:
        attempts += 1
        m = max(count * 4, 256)
        xs = rng.uniform(box[:, 0], box[:, 1], size=(m, d.dim))
        ts = rng.uniform(t_lo, t_hi, size=m)
        inside = d.contains_batch(xs, ts)
        xi, ti = xs[inside], ts[inside]
        xo, to = xs[~inside], ts[~inside]
        k = min(len(ti), len(to), count - len(found_t))
        if k == 0:
            continue
        a_x, a_t = xi[:k].copy(), ti[:k].copy()  # inside ends
        b_x, b_t = xo[:k].copy(), to[:k].copy()  # outside ends
        for _ in range(80):
            seg = np.maximum(
                np.linalg.norm(a_x - b_x, axis=1), np.sqrt(np.abs(a_t - b_t))
            )
            if np.all(seg <= tol):
                break
            m_x, m_t = 0.5 * (a_x + b_x), 0.5 * (a_t + b_t)
            mid_in = d.contains_batch(m_x, m_t)
            a_x = np.where(mid_in[:, None], m_x, a_x)
            a_t = np.where(mid_in, m_t, a_t)
            b_x = np.where(mid_in[:, None], b_x, m_x)
            b_t = np.where(mid_in, b_t, m_t)
        found_x.extend(b_x)
        found_t.extend(b_t.tolist())
    if not found_t:
        return np.zeros((0, d.dim)), np.zeros(0)
    return np.asarray(found_x), np.asarray(found_t)


def dist_to_essential_boundary(d: Domain, p: SpacetimePoint) -> float:
    """Parabolic distance to the essential boundary.

    Exact for primitive domains (minimum over essential faces); for
    composites a conservative lower bound from a sampled cloud (cloud
    minimum minus the cloud's covering resolution).
    """
    if not d.contains(p):
        raise ValueError("point must lie inside the domain")
    x, t = p.x_array()[None, :], np.array([p.t])
    if hasattr(d, "essential_gap"):
        return float(d.essential_gap(x, t)[0])  # type: ignore[attr-defined]
    xs, ts, res = essential_boundary_cloud(d)
    if len(ts) == 0:
        return math.inf
    dmin = float(parabolic_dist_arrays(xs, ts, p.x_array(), p.t).min())
    if not math.isfinite(res):
        return dmin
    return max(dmin - res, 0.0)


def sample_sigma(d: Domain, count: int, rng_seed: int, tol_b: float = 1e-6) -> SigmaSample:
    """Sample the quasi-lateral boundary (drops initial/terminal slices).

    Every returned point passes a membership-flip test at tolerance
    ``tol_b`` (located by inside/outside bisection). Points within a slice
    tolerance of ``T_min`` or ``T_max`` are excluded, matching the removal of
    the initial bottom slice and the terminal singular slice.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    xs, ts = _boundary_points(d, count * 3, rng_seed, tol_b)
    if len(ts) == 0:
        return SigmaSample((), (), tol_b)
    t_min, t_max = d.time_bounds()
    _, (s_lo, s_hi) = d.sample_box()
    slice_tol = max(1e-9, 1e-3 * (s_hi - s_lo))
    keep = np.ones(len(ts), dtype=bool)
    if math.isfinite(t_min):
        keep &= ts > t_min + slice_tol
    if math.isfinite(t_max):
        keep &= ts < t_max - slice_tol
    xs, ts = xs[keep], ts[keep]
    pts = []
    radii = []
    for i in range(min(count, len(ts))):
        pt = SpacetimePoint(tuple(xs[i]), float(ts[i]))
        pts.append(pt)
        radii.append(
            math.sqrt(pt.t - t_min) / 4.0 if math.isfinite(t_min) else math.inf
        )
    return SigmaSample(tuple(pts), tuple(radii), tol_b)


# ---------------------------------------------------------------------------
# Domain DSL (JSON)
# ---------------------------------------------------------------------------


def domain_to_dsl(d: Domain) -> dict:
    return d.to_dsl()


def domain_from_dsl(node: dict) -> Domain:
    kind = node.get("type")
    if kind == "cylinder":
        return Cylinder(node["box"], node["time"])
    if kind == "half_slab":
        return HalfTimeSlab(
            before=node.get("before"), after=node.get("after"), dim=int(node.get("dim", 1))
        )
    if kind == "parabolic_cube":
        return CubeDomain(ParabolicCube.from_dsl(node))
    if kind == "petrovsky":
        return PetrovskyDomain(
            reflected=bool(node.get("reflected", False)),
            junction_half_width=float(node.get("junction_half_width", 0.0)),
        )
    if kind == "complement_cubes":
        return ComplementOfCubes([ParabolicCube.from_dsl(c) for c in node["cubes"]])
    if kind == "union":
        return Union([domain_from_dsl(a) for a in node["args"]])
    if kind == "intersection":
        return Intersection([domain_from_dsl(a) for a in node["args"]])
    if kind == "complement":
        return Complement(domain_from_dsl(node["args"][0]))
    raise ValueError(f"unknown domain DSL node type {kind!r}")


def domain_to_json(d: Domain) -> str:
    return json.dumps({"schema": DSL_SCHEMA, "domain": d.to_dsl()}, sort_keys=True)


def domain_from_json(text: str) -> Domain:
    obj = json.loads(text)
    if isinstance(obj, dict) and "domain" in obj:
        schema = obj.get("schema", DSL_SCHEMA)
        if not str(schema).startswith("caloric-domain/"):
            raise ValueError(f"unsupported domain schema {schema!r}")
        obj = obj["domain"]
    return domain_from_dsl(obj)


def load_domain(path: str) -> Domain:
    with open(path, "r", encoding="utf-8") as fh:
        return domain_from_json(fh.read())
