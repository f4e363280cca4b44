"""Fundamental solutions, Gaussian envelopes and discrete potentials.

The scaled heat kernel with diffusivity ``M`` in ``n`` space dimensions is

    G_M(x, t; y, s) = (4 pi M (t-s))^(-n/2) exp(-|x-y|^2 / (4 M (t-s)))

for ``t > s`` and zero otherwise; it is the density of a centred Gaussian
with covariance ``2 M (t-s) I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .geometry import Domain, SpacetimePoint, parabolic_dist

__all__ = [
    "ScaledHeatKernel",
    "AronsonEnvelope",
    "ComparisonConstants",
    "DiscreteMeasure",
    "MollifiedField",
    "heat_kernel",
    "heat_kernel_grid",
    "kernel_sup_bound",
    "kernel_sup_constant",
    "aronson_envelope",
    "aronson_constant_for_heat",
    "comparison_constants",
    "potential",
    "mollify_coefficients",
]


# ---------------------------------------------------------------------------
# Scaled heat kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaledHeatKernel:
    """Fundamental solution of ``u_t = M \\Delta u`` in ``n`` dimensions."""

    M: float
    n: int

    def __post_init__(self) -> None:
        if self.M <= 0:
            raise ValueError("diffusivity M must be positive")
        if self.n < 1:
            raise ValueError("spatial dimension must be >= 1")

    def evaluate(self, x, t, y, s) -> np.ndarray:
        """Vectorised kernel values; broadcasting over the target batch."""
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        ya = np.asarray(y, dtype=float).reshape(-1)
        tau = ta - float(s)
        r2 = np.sum((xa - ya) ** 2, axis=1)
        out = np.zeros_like(tau)
        pos = tau > 0
        c = 4.0 * math.pi * self.M
        out[pos] = (c * tau[pos]) ** (-self.n / 2.0) * np.exp(
            -r2[pos] / (4.0 * self.M * tau[pos])
        )
        return out

    def __call__(self, target: SpacetimePoint, source: SpacetimePoint) -> float:
        return float(
            self.evaluate(target.x_array()[None, :], [target.t], source.x_array(), source.t)[0]
        )

    def sup_constant(self) -> float:
        """C with ``G_M(p; q) <= C * pdist(p, q)^(-n)`` for all p != q."""
        flat = (4.0 * math.pi * self.M) ** (-self.n / 2.0)
        ridge = (self.n / (2.0 * math.pi)) ** (self.n / 2.0) * math.exp(-self.n / 2.0)
        return max(flat, ridge)

    def step_scale(self, dt: float) -> float:
        """Standard deviation of each spatial increment over time ``dt``."""
        return math.sqrt(2.0 * self.M * dt)


def heat_kernel(M: float, n: int, target: SpacetimePoint, source: SpacetimePoint) -> float:
    return ScaledHeatKernel(M, n)(target, source)


def heat_kernel_grid(
    M: float, n: int, x, t, atoms_x, atoms_t
) -> np.ndarray:
    """Kernel matrix ``K[i, j] = G_M(x_i, t_i; atom_j)``."""
    xa = np.atleast_2d(np.asarray(x, dtype=float))
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    ax = np.atleast_2d(np.asarray(atoms_x, dtype=float))
    at = np.atleast_1d(np.asarray(atoms_t, dtype=float))
    tau = ta[:, None] - at[None, :]
    r2 = np.sum((xa[:, None, :] - ax[None, :, :]) ** 2, axis=2)
    out = np.zeros_like(tau)
    pos = tau > 0
    c = 4.0 * math.pi * M
    out[pos] = (c * tau[pos]) ** (-n / 2.0) * np.exp(-r2[pos] / (4.0 * M * tau[pos]))
    return out


def kernel_sup_constant(M: float, n: int) -> float:
    return ScaledHeatKernel(M, n).sup_constant()


def kernel_sup_bound(M: float, n: int, p: SpacetimePoint, q: SpacetimePoint) -> float:
    """Upper bound ``C_M * pdist(p, q)^(-n)``; rejects coincident points."""
    d = parabolic_dist(p, q)
    if d == 0.0:
        raise ValueError("sup bound is undefined for coincident points")
    return kernel_sup_constant(M, n) * d ** (-n)


# ---------------------------------------------------------------------------
# Aronson-type Gaussian envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AronsonEnvelope:
    """Two-sided Gaussian bounds with a single structural constant ``N``:

    ``N^-1 tau^(-n/2) exp(-N R^2 / tau) <= u <= N tau^(-n/2) exp(-R^2/(N tau))``.
    """

    N: float
    n: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("envelope constant N must be >= 1")
        if self.n < 1:
            raise ValueError("spatial dimension must be >= 1")

    def bounds(self, x, t, y, s) -> tuple[np.ndarray, np.ndarray]:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        ya = np.asarray(y, dtype=float).reshape(-1)
        tau = ta - float(s)
        r2 = np.sum((xa - ya) ** 2, axis=1)
        lower = np.zeros_like(tau)
        upper = np.zeros_like(tau)
        pos = tau > 0
        tp, rp = tau[pos], r2[pos]
        lower[pos] = tp ** (-self.n / 2.0) * np.exp(-self.N * rp / tp) / self.N
        upper[pos] = self.N * tp ** (-self.n / 2.0) * np.exp(-rp / (self.N * tp))
        return lower, upper


def aronson_envelope(
    N: float, n: int, target: SpacetimePoint, source: SpacetimePoint
) -> tuple[float, float]:
    env = AronsonEnvelope(N, n)
    lo, hi = env.bounds(target.x_array()[None, :], [target.t], source.x_array(), source.t)
    return float(lo[0]), float(hi[0])


def aronson_constant_for_heat(M: float, n: int) -> float:
    """Smallest N for which the envelope brackets the scaled heat kernel.

    The exponent comparisons force ``N >= 4M`` and ``N >= 1/(4M)``; the
    prefactor comparisons force ``N >= (4 pi M)^(±n/2)``.
    """
    if M <= 0:
        raise ValueError("diffusivity M must be positive")
    c = 4.0 * math.pi * M
    return max(4.0 * M, 1.0 / (4.0 * M), c ** (n / 2.0), c ** (-n / 2.0))


@dataclass(frozen=True)
class ComparisonConstants:
    """Scaled-heat-kernel sandwich implied by an Aronson envelope:

    ``C_low * G_M1 <= u <= C_high * G_M2``.
    """

    M1: float
    M2: float
    C_low: float
    C_high: float


def comparison_constants(N: float, n: int) -> ComparisonConstants:
    if N < 1:
        raise ValueError("envelope constant N must be >= 1")
    return ComparisonConstants(
        M1=1.0 / (4.0 * N),
        M2=N / 4.0,
        C_low=(math.pi / N) ** (n / 2.0) / N,
        C_high=N * (math.pi * N) ** (n / 2.0),
    )


# ---------------------------------------------------------------------------
# Discrete measures and potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted atoms in space-time."""

    x: np.ndarray  # (k, n)
    t: np.ndarray  # (k,)
    w: np.ndarray  # (k,)

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if not (len(x) == len(t) == len(w)):
            raise ValueError("atom arrays must share a length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def atom_count(self) -> int:
        return len(self.w)

    def total_mass(self) -> float:
        return float(self.w.sum())


def potential(measure: DiscreteMeasure, M: float, n: int, x, t) -> np.ndarray:
    """Heat potential of a discrete measure at batch targets."""
    K = heat_kernel_grid(M, n, x, t, measure.x, measure.t)
    return K @ measure.w


# ---------------------------------------------------------------------------
# Parabolic mollification of diagonal coefficient fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MollifiedField:
    """Smoothed diagonal coefficient field sampled on a rectangular grid."""

    axes: tuple[np.ndarray, ...]  # n spatial axes then the time axis
    values: np.ndarray  # shape (*grid_shape, n)
    k: int

    def __call__(self, x, t) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        pts = np.column_stack([xa, ta])
        out = np.empty((len(ta), self.values.shape[-1]))
        for i in range(self.values.shape[-1]):
            interp = RegularGridInterpolator(
                self.axes, self.values[..., i], bounds_error=False, fill_value=None
            )
            out[:, i] = interp(pts)
        return out


def _bump_weights(radius: float, spacing: float) -> np.ndarray:
    """Discretised compact bump ``exp(-1/(1-u^2))`` on ``|u| < 1``."""
    half = max(int(math.floor(radius / spacing)), 1)
    u = np.arange(-half, half + 1) * spacing / radius
    w = np.where(np.abs(u) < 1.0, np.exp(-1.0 / np.maximum(1.0 - u**2, 1e-300)), 0.0)
    s = w.sum()
    if s <= 0:
        return np.array([1.0])
    return w / s


def mollify_coefficients(
    field: Callable[[np.ndarray, np.ndarray], np.ndarray],
    k: int,
    grid: Sequence[np.ndarray],
    domain: Domain | None = None,
) -> MollifiedField:
    """Parabolic mollification of a diagonal coefficient field on a grid.

    ``grid`` lists ``n`` uniformly spaced spatial axes followed by the time
    axis. The smoothing window has radius ``1/k`` in each spatial axis and
    ``1/k^2`` in time. If ``domain`` is given the raw field is replaced by
    the identity (all ones) outside it before smoothing, so the output is a
    convex average of admissible diagonal matrices everywhere.
    """
    if k < 1:
        raise ValueError("mollification index k must be >= 1")
    axes = tuple(np.asarray(a, dtype=float) for a in grid)
    if len(axes) < 2:
        raise ValueError("grid needs at least one spatial axis and a time axis")
    n = len(axes) - 1
    mesh = np.meshgrid(*axes, indexing="ij")
    flat_x = np.column_stack([m.ravel() for m in mesh[:n]])
    flat_t = mesh[n].ravel()
    raw = np.asarray(field(flat_x, flat_t), dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.shape[1] != n:
        raise ValueError("field must return one diagonal entry per spatial axis")
    if domain is not None:
        inside = domain.contains_batch(flat_x, flat_t)
        raw = np.where(inside[:, None], raw, 1.0)
    shape = tuple(len(a) for a in axes)
    vals = raw.reshape(*shape, n).astype(float)
    for axis, ax in enumerate(axes):
        spacing = float(ax[1] - ax[0]) if len(ax) > 1 else 1.0
        radius = 1.0 / k if axis < n else 1.0 / (k * k)
        w = _bump_weights(radius, spacing)
        if len(w) > 1:
            for i in range(n):
                vals[..., i] = ndimage.convolve1d(vals[..., i], w, axis=axis, mode="nearest")
    return MollifiedField(axes=axes, values=vals, k=k)
