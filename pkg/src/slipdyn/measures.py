"""Measure-valued states: weighted atoms, cell densities, and dislocation configurations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Rect

#: default absolute tolerance for deciding that two slip-plane coordinates coincide
PLANE_TOL = 1e-9


@dataclass(frozen=True)
class ScalingSchedule:
    """Power-law rules n -> eps_n (core radius) and n -> r_n (minimal separation).

    The admissible-regime conditions eps_n/r_n^3 -> 0 and n r_n -> 0 translate to
    eps_exp > 3 r_exp and r_exp > 1 for power laws.
    """

    eps_coef: float = 1.0
    eps_exp: float = 6.0
    r_coef: float = 1.0
    r_exp: float = 1.5

    def __post_init__(self):
        if self.eps_coef <= 0 or self.r_coef <= 0:
            raise ValueError("schedule coefficients must be positive")
        if not self.eps_exp > 3.0 * self.r_exp:
            raise ValueError("need eps_n / r_n^3 -> 0, i.e. eps_exp > 3 r_exp")
        if not self.r_exp > 1.0:
            raise ValueError("need n r_n -> 0, i.e. r_exp > 1")

    def eps(self, n: int) -> float:
        return self.eps_coef * float(n) ** (-self.eps_exp)

    def r(self, n: int) -> float:
        return self.r_coef * float(n) ** (-self.r_exp)

    def check_sample(self, ns=(10, 100, 1000, 10_000)) -> bool:
        """Sanity-check the decay conditions on a finite sample of n."""
        ratios = [self.eps(n) / self.r(n) ** 3 for n in ns]
        products = [n * self.r(n) for n in ns]
        return all(a > b for a, b in zip(ratios, ratios[1:])) and all(
            a > b for a, b in zip(products, products[1:]))


def group_by_plane(points: np.ndarray, tol: float = PLANE_TOL):
    """Group point indices by (nearly) equal second coordinate.

    Returns a list of (plane_y, index_array) sorted by plane_y, indices sorted
    by first coordinate.  Representative plane_y is the first point's exact
    stored value, so configs built from shared canonical plane coordinates
    compare bit-exactly.
    """
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    planes = []
    current: list[int] = []
    current_y = None
    for idx in order:
        y = pts[idx, 1]
        if current_y is None or abs(y - current_y) > tol:
            if current:
                planes.append((current_y, np.array(current, dtype=int)))
            current = [idx]
            current_y = y
        else:
            current.append(idx)
    if current:
        planes.append((current_y, np.array(current, dtype=int)))
    return planes


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted atoms with total mass one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 2))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float).reshape(-1))
        if len(pts) != len(w):
            raise ValueError("points and weights must have equal length")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"total mass must be 1, got {w.sum()!r}")
        if len(pts) > 1:
            d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, np.inf)
            if d2.min() == 0.0:
                raise ValueError("atoms must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def equal_weights(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n = len(pts)
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def n_atoms(self) -> int:
        return len(self.points)

    def planes(self, tol: float = PLANE_TOL):
        return group_by_plane(self.points, tol)

    def vertical_marginal(self, tol: float = PLANE_TOL):
        """List of (plane_y, mass) sorted by plane_y."""
        return [(y, float(self.weights[idx].sum())) for y, idx in self.planes(tol)]

    def translated(self, dx: float, dy: float = 0.0) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points + np.array([dx, dy]), self.weights.copy())


@dataclass(frozen=True)
class CellMeasure:
    """Piecewise-constant density on square cells of one grid.

    Cells are indexed on the lattice origin + spacing * (i, j); ``masses`` maps
    occupied cells to their total mass.  The density on an occupied cell is
    mass / spacing^2.
    """

    origin: tuple[float, float]
    spacing: float
    indices: np.ndarray          # (M, 2) int
    masses: np.ndarray           # (M,)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(-1, 2)
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if self.spacing <= 0:
            raise ValueError("cell spacing must be positive")
        if len(idx) != len(m):
            raise ValueError("indices and masses must have equal length")
        if np.any(m < 0):
            raise ValueError("cell masses must be nonnegative")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ValueError(f"total mass must be 1, got {m.sum()!r}")
        keep = m > 0
        idx, m = idx[keep], m[keep]
        order = np.lexsort((idx[:, 0], idx[:, 1]))
        object.__setattr__(self, "indices", np.ascontiguousarray(idx[order]))
        object.__setattr__(self, "masses", np.ascontiguousarray(m[order]))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return len(self.masses)

    def cell_rect(self, k: int) -> Rect:
        i, j = self.indices[k]
        h = self.spacing
        x0 = self.origin[0] + i * h
        y0 = self.origin[1] + j * h
        return Rect(x0, y0, x0 + h, y0 + h)

    def cell_centers(self) -> np.ndarray:
        h = self.spacing
        return np.stack([self.origin[0] + (self.indices[:, 0] + 0.5) * h,
                         self.origin[1] + (self.indices[:, 1] + 0.5) * h], axis=1)

    def densities(self) -> np.ndarray:
        return self.masses / self.spacing**2

    def support_rect(self) -> Rect:
        h = self.spacing
        i0, j0 = self.indices.min(axis=0)
        i1, j1 = self.indices.max(axis=0)
        return Rect(self.origin[0] + i0 * h, self.origin[1] + j0 * h,
                    self.origin[0] + (i1 + 1) * h, self.origin[1] + (j1 + 1) * h)

    def scaled_mass(self, alpha: float) -> "CellMeasure":
        """Rescaled copy with total mass alpha (bypasses the mass-1 invariant check)."""
        out = object.__new__(CellMeasure)
        object.__setattr__(out, "origin", self.origin)
        object.__setattr__(out, "spacing", self.spacing)
        object.__setattr__(out, "indices", self.indices.copy())
        object.__setattr__(out, "masses", self.masses * alpha)
        return out


@dataclass(frozen=True)
class DislocationConfig:
    """n equal-weight dislocations confined to a box, with minimal separation r_n.

    Embodies an admissible empirical measure: atoms of weight 1/n inside the
    confinement rectangle, pairwise distance at least ``schedule.r(n)``, grouped
    into slip planes by their second coordinate.
    """

    points: np.ndarray
    schedule: ScalingSchedule
    box: Rect
    plane_tol: float = PLANE_TOL
    _skip_checks: bool = field(default=False, repr=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "points", pts)
        if self._skip_checks:
            return
        n = len(pts)
        if n == 0:
            raise ValueError("configuration must contain at least one dislocation")
        for p in pts:
            if not self.box.contains(p, tol=1e-12):
                raise ValueError(f"dislocation {p} outside the confinement box")
        if n > 1:
            r_n = self.schedule.r(n)
            d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, np.inf)
            dmin = math.sqrt(d2.min())
            if dmin < r_n * (1 - 1e-9):
                raise ValueError(
                    f"pairwise separation {dmin:.3e} below the schedule minimum {r_n:.3e}")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def r_n(self) -> float:
        return self.schedule.r(self.n)

    @property
    def eps_n(self) -> float:
        return self.schedule.eps(self.n)

    def planes(self):
        return group_by_plane(self.points, self.plane_tol)

    def plane_counts(self):
        return [(y, len(idx)) for y, idx in self.planes()]

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.equal_weights(self.points)

    def min_separation(self) -> float:
        if self.n < 2:
            return math.inf
        d2 = np.sum((self.points[:, None, :] - self.points[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, np.inf)
        return math.sqrt(d2.min())

    def with_points(self, points: np.ndarray) -> "DislocationConfig":
        return DislocationConfig(points, self.schedule, self.box, self.plane_tol)

    def canonical_order(self) -> "DislocationConfig":
        """Points sorted by (plane, horizontal coordinate)."""
        pts = self.points
        order = np.lexsort((pts[:, 0], pts[:, 1]))
        return self.with_points(pts[order])
