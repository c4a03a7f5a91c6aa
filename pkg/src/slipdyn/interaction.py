"""Two-point interaction potential V on the bounded domain and interaction energies.

V(y, z) is the cross elastic energy of two unit dislocations,

    V(y, z) = int_Omega C K(x; y) : K(x; z) dx,

log-divergent on the diagonal with leading coefficient ``mat.log_coef``.
Two evaluation routes are implemented:

* ``v_pair`` -- adaptive 2-D cell quadrature of the defining integral, with
  dyadic refinement around the two sources and an odd-symmetry subtraction on
  the cells containing them;
* a boundary reduction (divergence theorem against a cut displacement branch)
  that turns V into 1-D integrals over the domain boundary plus a closed-form
  cut contribution.  It evaluates whole pair matrices at once and is used for
  configuration sums; agreement of the two routes is enforced in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial.legendre import leggauss

from .geometry import Geometry, Rect
from .kernels import (MIN_SEPARATION, Material, K_many, apply_C, displacement_v)
from .measures import CellMeasure, DislocationConfig

__all__ = [
    "QuadratureConfig", "v_freespace_leading", "v_pair", "v_pair_boundary",
    "interaction_cross_matrix", "pairwise_interaction_matrix",
    "interaction_sum", "continuum_interaction", "continuum_interaction_freespace",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Resolution knobs for the interaction quadratures."""

    base_cells: int = 24
    singular_refine_depth: int = 7
    tol: float = 1e-6
    cell_gauss: int = 3            # per-axis points on regular cells
    boundary_points: int = 128     # Gauss points per domain edge (boundary route)
    cheb_degree: int = 96          # boundary antiderivative degree per edge
    density_gauss: int = 4         # per-axis points per cell in continuum energies

    def __post_init__(self):
        if self.base_cells < 4 or self.singular_refine_depth < 0 or self.tol <= 0:
            raise ValueError("invalid quadrature configuration")


def v_freespace_leading(y, z, mat: Material) -> float:
    """Leading free-space interaction, -log_coef * log|y - z|."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    s = float(np.hypot(*(y - z)))
    if s < MIN_SEPARATION:
        raise ValueError("coincident dislocations")
    return -mat.log_coef * math.log(s)


# ---------------------------------------------------------------------------
# direct 2-D quadrature route
# ---------------------------------------------------------------------------

def _gauss_rect(rect, order):
    """Tensor Gauss nodes/weights on a rectangle given as (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = rect
    gx, gw = leggauss(order)
    xs = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gx
    ys = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gx
    wx = 0.5 * (x1 - x0) * gw
    wy = 0.5 * (y1 - y0) * gw
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return pts, W.ravel()


def _cross_density(xs, y, z, mat):
    """Integrand C K(x; y) : K(x; z) at a batch of points."""
    ky = K_many(xs, y, mat)
    kz = K_many(xs, z, mat)
    return np.einsum("nij,nij->n", apply_C(ky, mat), kz)


def _refine_cells(omega: Rect, targets, base: int, depth: int):
    """Dyadically refined cell list; cells near either target split to max depth."""
    nx = base
    ny = max(4, round(base * omega.height / omega.width))
    hx0, hy0 = omega.width / nx, omega.height / ny
    cells = [(omega.x0 + i * hx0, omega.y0 + j * hy0, hx0, hy0, 0)
             for i in range(nx) for j in range(ny)]
    leaves = []
    while cells:
        x0, y0, hx, hy, lev = cells.pop()
        cx, cy = x0 + hx / 2, y0 + hy / 2
        diag = math.hypot(hx, hy)
        near = min(math.hypot(cx - t[0], cy - t[1]) for t in targets)
        if lev < depth and near <= 2.5 * diag:
            hx2, hy2 = hx / 2, hy / 2
            for di in (0, 1):
                for dj in (0, 1):
                    cells.append((x0 + di * hx2, y0 + dj * hy2, hx2, hy2, lev + 1))
        else:
            leaves.append((x0, y0, hx, hy))
    return leaves, (hx0 / 2**depth, hy0 / 2**depth)


def _rect_dist(cell, p):
    """Chebyshev distance from a point to a cell; keeps corner clusters rectangular."""
    x0, y0, hx, hy = cell
    dx = max(x0 - p[0], 0.0, p[0] - (x0 + hx))
    dy = max(y0 - p[1], 0.0, p[1] - (y0 + hy))
    return max(dx, dy)


def _graded_strip(rect, near_side, levels=6):
    """Split a rectangle into pieces graded geometrically toward one side.

    ``near_side`` is one of 'L', 'R', 'B', 'T': the side closest to the
    singular point.
    """
    x0, y0, x1, y1 = rect
    pieces = []
    for _ in range(levels):
        if near_side == "L":
            xm = 0.5 * (x0 + x1)
            pieces.append((xm, y0, x1, y1)); x1 = xm
        elif near_side == "R":
            xm = 0.5 * (x0 + x1)
            pieces.append((x0, y0, xm, y1)); x0 = xm
        elif near_side == "B":
            ym = 0.5 * (y0 + y1)
            pieces.append((x0, ym, x1, y1)); y1 = ym
        else:
            ym = 0.5 * (y0 + y1)
            pieces.append((x0, y0, x1, ym)); y0 = ym
    pieces.append((x0, y0, x1, y1))
    return pieces


def _cluster_integral(bbox, p, other, mat, which):
    """Integral of the cross density over a small rectangle containing source p.

    Splits off the largest sub-rectangle centered at p, over which the
    singular part integrates to zero by odd symmetry, and integrates the
    bounded remainder; the leftover strips are graded toward p.
    ``which`` is 'y' if p is the first argument of V, 'z' otherwise.
    """
    x0, y0, x1, y1 = bbox
    px, py = p
    a = min(px - x0, x1 - px)
    b = min(py - y0, y1 - py)
    if a <= 0 or b <= 0:
        raise ValueError("singular point on the cluster boundary")
    from .kernels import eval_K
    # smooth factor frozen at the singular point: K(p; other source)
    k_const = eval_K(p, other, mat)

    total = 0.0
    # centered square part: subtract the odd singular term, integrate the rest
    s_rect = (px - a, py - b, px + a, py + b)
    pts, w = _gauss_rect(s_rect, 8)
    if which == "y":
        kp = K_many(pts, p, mat)
        f = np.einsum("nij,nij->n", apply_C(kp, mat),
                      K_many(pts, other, mat) - k_const[None])
    else:
        kp = K_many(pts, p, mat)
        f = np.einsum("nij,nij->n",
                      apply_C(K_many(pts, other, mat) - k_const[None], mat), kp)
    total += float(f @ w)

    # leftover strips (at most one horizontal and one vertical)
    strips = []
    if px - x0 > a:
        strips.append(((x0, y0, px - a, y1), "R"))
    elif x1 - px > a:
        strips.append(((px + a, y0, x1, y1), "L"))
    if py - y0 > b:
        strips.append(((px - a, y0, px + a, py - b), "T"))
    elif y1 - py > b:
        strips.append(((px - a, py + b, px + a, y1), "B"))
    for rect, side in strips:
        for piece in _graded_strip(rect, side):
            pts, w = _gauss_rect(piece, 4)
            total += float(_cross_density(pts, *( (p, other) if which == "y" else (other, p) ), mat) @ w)
    return total


def v_pair(y, z, geom: Geometry, mat: Material, q: QuadratureConfig) -> float:
    """Interaction potential V(y, z) by adaptive cell quadrature over Omega.

    Returns +inf on the diagonal.  Both points must lie in Omega, safely away
    from its boundary (they normally lie in the confinement box).
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    sep = float(np.hypot(*(y - z)))
    if sep < MIN_SEPARATION:
        return math.inf
    omega = geom.omega
    for p in (y, z):
        if not omega.contains(p):
            raise ValueError(f"point {p} outside the domain")

    h0 = omega.width / q.base_cells
    depth = q.singular_refine_depth
    # keep the two singular clusters separated and the leaves fine enough
    while h0 / 2**depth > sep / 8 and depth < 24:
        depth += 1
    leaves, (hminx, hminy) = _refine_cells(omega, (y, z), q.base_cells, depth)
    hmin = max(hminx, hminy)
    if min(omega.boundary_distance(y), omega.boundary_distance(z)) < 4 * hmin:
        raise ValueError("source too close to the domain boundary for this resolution")

    pad = 0.26 * hmin
    regular, clus_y, clus_z = [], [], []
    for cell in leaves:
        if _rect_dist(cell, y) <= pad:
            clus_y.append(cell)
        elif _rect_dist(cell, z) <= pad:
            clus_z.append(cell)
        else:
            regular.append(cell)

    pts_list, w_list = [], []
    for x0, y0_, hx, hy in regular:
        pts, w = _gauss_rect((x0, y0_, x0 + hx, y0_ + hy), q.cell_gauss)
        pts_list.append(pts)
        w_list.append(w)
    pts = np.concatenate(pts_list)
    w = np.concatenate(w_list)
    total = float(_cross_density(pts, y, z, mat) @ w)

    for cells, p, which in ((clus_y, y, "y"), (clus_z, z, "z")):
        if not cells:
            raise RuntimeError("refinement produced no cluster around a source")
        bx0 = min(c[0] for c in cells); by0 = min(c[1] for c in cells)
        bx1 = max(c[0] + c[2] for c in cells); by1 = max(c[1] + c[3] for c in cells)
        area = sum(c[2] * c[3] for c in cells)
        if abs(area - (bx1 - bx0) * (by1 - by0)) > 1e-9 * area:
            raise RuntimeError("cluster cells do not tile a rectangle")
        other = z if which == "y" else y
        total += _cluster_integral((bx0, by0, bx1, by1), p, other, mat, which)
    return total


# ---------------------------------------------------------------------------
# boundary-reduction route
# ---------------------------------------------------------------------------

def _edges_ccw(rect: Rect):
    """Counterclockwise edge list: (start, end, outward normal, length)."""
    c = rect.corners()
    normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    out = []
    for k in range(4):
        a, b = c[k], c[(k + 1) % 4]
        out.append((a, b, normals[k], float(np.hypot(*(b - a)))))
    return out


@lru_cache(maxsize=16)
def _boundary_grid(rect_key, n_per_edge, cheb_degree):
    """Cached Gauss and Chebyshev sampling layouts along the rectangle boundary."""
    rect = Rect(*rect_key)
    gx, gw = leggauss(n_per_edge)
    deg = cheb_degree
    tcheb = np.cos(math.pi * (2 * np.arange(deg + 1) + 1) / (2 * (deg + 1)))  # first kind
    # interpolation matrix: values at tcheb -> chebyshev coefficients
    jj = np.arange(deg + 1)
    F = np.cos(np.outer(jj, np.arccos(tcheb))) * (2.0 / (deg + 1))
    F[0] *= 0.5

    g_pts, g_w, g_nu, g_tau, g_s = [], [], [], [], []
    c_pts, c_s0, c_len = [], [], []
    s_acc = 0.0
    for a, b, nu, length in _edges_ccw(rect):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        tau = (b - a) / length
        pts = mid[None, :] + gx[:, None] * half[None, :]
        g_pts.append(pts)
        g_w.append(gw * length / 2)
        g_nu.append(np.tile(nu, (n_per_edge, 1)))
        g_tau.append(np.tile(tau, (n_per_edge, 1)))
        g_s.append(s_acc + (gx + 1) * length / 2)
        c_pts.append(mid[None, :] + tcheb[:, None] * half[None, :])
        c_s0.append(s_acc)
        c_len.append(length)
        s_acc += length
    return {
        "rect": rect,
        "gauss_pts": np.concatenate(g_pts),
        "gauss_w": np.concatenate(g_w),
        "gauss_nu": np.concatenate(g_nu),
        "gauss_tau": np.concatenate(g_tau),
        "gauss_s": np.concatenate(g_s),
        "cheb_pts": np.stack(c_pts),       # (4, deg+1, 2)
        "cheb_fit": F,                      # (deg+1, deg+1)
        "edge_s0": np.array(c_s0),
        "edge_len": np.array(c_len),
        "perimeter": s_acc,
    }


def _ray_exit_lengths(starts, dirs, rect: Rect):
    """Exit parameter of rays from interior points, plus exit boundary coordinate.

    Returns (t_exit, s_coord, edge_index) for each ray; the boundary coordinate
    runs counterclockwise from the lower-left corner.
    """
    px, py = starts[..., 0], starts[..., 1]
    dx, dy = dirs[..., 0], dirs[..., 1]
    with np.errstate(divide="ignore"):
        tx = np.where(dx > 0, (rect.x1 - px) / dx,
                      np.where(dx < 0, (rect.x0 - px) / dx, np.inf))
        ty = np.where(dy > 0, (rect.y1 - py) / dy,
                      np.where(dy < 0, (rect.y0 - py) / dy, np.inf))
    t = np.minimum(tx, ty)
    ex = px + t * dx
    ey = py + t * dy
    W, H = rect.width, rect.height
    on_x = tx <= ty
    edge = np.where(on_x, np.where(dx > 0, 1, 3), np.where(dy > 0, 2, 0))
    s = np.empty_like(ex)
    s[edge == 0] = ex[edge == 0] - rect.x0
    s[edge == 1] = W + (ey[edge == 1] - rect.y0)
    s[edge == 2] = W + H + (rect.x1 - ex[edge == 2])
    s[edge == 3] = 2 * W + H + (rect.y1 - ey[edge == 3])
    return t, s, edge


def _tractions_and_potentials(points, geom, mat, q):
    """Boundary tractions of every source and their cumulative horizontal work.

    For sources z_i this returns, on the shared boundary grid:
      T1[i, q]  horizontal traction component (C K(x; z_i) nu) . e1,
      Tv[i, q, c] full traction vector,
      P[i, q]   cumulative integral of T1 along the boundary (zero mean drift),
      cheb      per-edge Chebyshev antiderivatives for point evaluation of P.
    """
    grid = _boundary_grid((geom.omega.x0, geom.omega.y0, geom.omega.x1, geom.omega.y1),
                          q.boundary_points, q.cheb_degree)
    pts_g = grid["gauss_pts"]
    nu_g = grid["gauss_nu"]
    n = len(points)
    ng = len(pts_g)
    Tv = np.empty((n, ng, 2))
    for i, zi in enumerate(points):
        Tv[i] = np.einsum("qij,qj->qi", apply_C(K_many(pts_g, zi, mat), mat), nu_g)

    deg = q.cheb_degree
    cheb_pts = grid["cheb_pts"]
    F = grid["cheb_fit"]
    coeffs = np.empty((4, deg + 2, n))
    p_start = np.zeros((5, n))
    for e in range(4):
        vals = np.empty((n, deg + 1))
        for i, zi in enumerate(points):
            tr = np.einsum("qij,j->qi", apply_C(K_many(cheb_pts[e], zi, mat), mat),
                           _edges_ccw(grid["rect"])[e][2])
            vals[i] = tr[:, 0]
        c = F @ vals.T                              # (deg+1, n)
        ci = _cheb.chebint(c, m=1, axis=0) * (grid["edge_len"][e] / 2)
        ci_at = lambda t: _cheb.chebval(t, ci, tensor=False)
        lo = ci_at(-1.0)
        coeffs[e] = ci - 0.0
        coeffs[e][0] -= lo                          # antiderivative zero at edge start
        p_start[e + 1] = p_start[e] + (ci_at(1.0) - lo)
    # evaluate P on the Gauss grid
    P = np.empty((n, ng))
    s = grid["gauss_s"]
    s0 = grid["edge_s0"]
    elen = grid["edge_len"]
    done = np.zeros(ng, dtype=bool)
    for e in range(4):
        sel = (~done) & (s <= s0[e] + elen[e] + 1e-12)
        tloc = 2 * (s[sel] - s0[e]) / elen[e] - 1
        P[:, sel] = _cheb.chebval(tloc, coeffs[e]) + p_start[e][:, None]
        done |= sel
    return grid, Tv, P, coeffs, p_start


def _eval_P(coeffs, p_start, grid, i, s_vals, edges):
    """Evaluate the cumulative traction potential of source i at boundary coords."""
    out = np.empty(len(s_vals))
    s0 = grid["edge_s0"]
    elen = grid["edge_len"]
    for e in range(4):
        sel = edges == e
        if not np.any(sel):
            continue
        tloc = 2 * (s_vals[sel] - s0[e]) / elen[e] - 1
        out[sel] = _cheb.chebval(tloc, coeffs[e][:, i]) + p_start[e][i]
    return out


def interaction_cross_matrix(ys, zs, geom: Geometry, mat: Material,
                             q: QuadratureConfig) -> np.ndarray:
    """Matrix of V(y_i, z_j) over two point families (coincident pairs get 0).

    Boundary-reduction route: for each pair, V splits into a closed-form cut
    contribution along the ray leaving the domain plus boundary integrals of
    smooth fields, assembled here as dense matrix products.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1, 2)
    zs = np.asarray(zs, dtype=float).reshape(-1, 2)
    n, m = len(ys), len(zs)
    omega = geom.omega
    coef = mat.log_coef

    grid, Tv, P, coeffs, p_start = _tractions_and_potentials(ys, geom, mat, q)
    xg = grid["gauss_pts"]
    wg = grid["gauss_w"]
    ng = len(xg)

    # pair separations and cut geometry: for V(y_i, z_j) the cut leaves z_j
    # along the direction z_j - y_i
    diff = zs[None, :, :] - ys[:, None, :]            # [i, j] = z_j - y_i
    sep = np.hypot(diff[..., 0], diff[..., 1])
    coincident = sep < MIN_SEPARATION
    sep = np.where(coincident, 1.0, sep)
    dirs = diff / sep[..., None]
    dirs[coincident] = (1.0, 0.0)                     # dummy rays for coincident pairs
    starts = np.broadcast_to(zs[None, :, :], dirs.shape)
    t_exit, s_exit, e_exit = _ray_exit_lengths(starts.reshape(-1, 2),
                                               dirs.reshape(-1, 2), omega)
    t_exit = t_exit.reshape(n, m)
    s_exit = s_exit.reshape(n, m)
    e_exit = e_exit.reshape(n, m)
    cut = coef * np.log((sep + t_exit) / sep)

    # smooth boundary terms
    vvals = np.empty((ng, 2, m))
    theta_p = np.empty((ng, m))
    tau = grid["gauss_tau"]
    for j, zj in enumerate(zs):
        u = xg - zj
        vvals[:, :, j] = displacement_v(u, mat)
        r2 = u[:, 0] ** 2 + u[:, 1] ** 2
        theta_p[:, j] = (u[:, 0] * tau[:, 1] - u[:, 1] * tau[:, 0]) / r2

    A = Tv * wg[None, :, None]                        # (n, ng, 2)
    M = A.reshape(n, 2 * ng) @ vvals.reshape(ng * 2, m)
    M += -(1.0 / (2 * math.pi)) * (P * wg[None, :]) @ theta_p

    # branch correction: + P_i at the cut exit of pair (i, j)
    for i in range(n):
        M[i, :] += _eval_P(coeffs, p_start, grid, i, s_exit[i], e_exit[i])

    M += cut
    M[coincident] = 0.0
    return M


def pairwise_interaction_matrix(points, geom: Geometry, mat: Material,
                                q: QuadratureConfig) -> np.ndarray:
    """Matrix of V(z_i, z_j) over all ordered pairs (diagonal set to zero)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return np.zeros((len(pts), len(pts)))
    return interaction_cross_matrix(pts, pts, geom, mat, q)


def v_pair_boundary(y, z, geom: Geometry, mat: Material, q: QuadratureConfig,
                    cut_from=None) -> float:
    """Single-pair V via the boundary reduction.

    ``cut_from`` freezes the cut ray at the one through ``cut_from`` and z;
    used by smooth finite differencing in the force assembly.  With a frozen
    cut the contribution along the ray is integrated numerically.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    sep = float(np.hypot(*(y - z)))
    if sep < MIN_SEPARATION:
        return math.inf
    omega = geom.omega
    coef = mat.log_coef
    anchor = y if cut_from is None else np.asarray(cut_from, dtype=float)
    d = (z - anchor) / np.hypot(*(z - anchor))
    t_exit, s_exit, e_exit = _ray_exit_lengths(z[None, :], d[None, :], omega)

    if cut_from is None:
        cut = coef * math.log((sep + float(t_exit[0])) / sep)
    else:
        # numeric cut integral: (C K(x; y) m) . e1 along the frozen ray
        gx, gw = leggauss(64)
        ts = 0.5 * float(t_exit[0]) * (gx + 1)
        ws = 0.5 * float(t_exit[0]) * gw
        xs = z[None, :] + ts[:, None] * d[None, :]
        m = np.array([-d[1], d[0]])
        tr = np.einsum("qij,j->qi", apply_C(K_many(xs, y, mat), mat), m)
        cut = float(tr[:, 0] @ ws)
    grid, Tv, P, coeffs, p_start = _tractions_and_potentials(y[None, :], geom, mat, q)
    xg = grid["gauss_pts"]
    wg = grid["gauss_w"]
    tau = grid["gauss_tau"]
    u = xg - z
    vvals = displacement_v(u, mat)
    r2 = u[:, 0] ** 2 + u[:, 1] ** 2
    theta_p = (u[:, 0] * tau[:, 1] - u[:, 1] * tau[:, 0]) / r2

    total = float(np.einsum("qi,qi,q->", Tv[0], vvals, wg))
    total += -(1.0 / (2 * math.pi)) * float((P[0] * wg) @ theta_p)
    total += float(_eval_P(coeffs, p_start, grid, 0, s_exit, e_exit)[0])
    total += cut
    return total


# ---------------------------------------------------------------------------
# interaction energies
# ---------------------------------------------------------------------------

def interaction_sum(cfg: DislocationConfig, mode: str, geom: Geometry | None,
                    mat: Material, q: QuadratureConfig) -> float:
    """Configuration interaction energy (1 / 2 n^2) sum_{i != j} V(z_i, z_j).

    ``mode`` is 'bounded' (V on the domain) or 'freespace' (leading log only).
    Points are summed in canonical (plane, horizontal) order so the result is
    reproducible under permutations of the input.
    """
    cfg = cfg.canonical_order()
    pts = cfg.points
    n = cfg.n
    if n == 1:
        return 0.0
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    if d2.min() < MIN_SEPARATION**2:
        raise ValueError("coincident dislocations in configuration")
    if mode == "freespace":
        np.fill_diagonal(d2, 1.0)
        logsum = -mat.log_coef * 0.5 * np.log(d2)
        np.fill_diagonal(logsum, 0.0)
        return float(logsum.sum()) / (2.0 * n * n)
    if mode != "bounded":
        raise ValueError(f"unknown interaction mode {mode!r}")
    if geom is None:
        raise ValueError("bounded mode requires a geometry")
    M = pairwise_interaction_matrix(pts, geom, mat, q)
    return float(M.sum()) / (2.0 * n * n)


@lru_cache(maxsize=None)
def _cell_log_moment(di: int, dj: int) -> float:
    """E[log|y - z|] for uniform y, z on unit cells offset by (di, dj).

    Only the touching offsets are needed; distant pairs are handled by plain
    quadrature of the smooth integrand.
    """
    from scipy.integrate import dblquad

    di, dj = abs(di), abs(dj)

    def tri(t, delta):
        return max(0.0, 1.0 - abs(t - delta))

    def integrand(u2, u1):
        r2 = u1 * u1 + u2 * u2
        if r2 == 0.0:
            return 0.0
        return tri(u1, di) * tri(u2, dj) * 0.5 * math.log(r2)

    val, _ = dblquad(integrand, di - 1.0, di + 1.0,
                     lambda u1: dj - 1.0, lambda u1: dj + 1.0,
                     epsabs=1e-11, epsrel=1e-11)
    return val


def continuum_interaction_freespace(density: CellMeasure, mat: Material,
                                    q: QuadratureConfig) -> float:
    """(1/2) double integral of the leading log potential against a cell density."""
    h = density.spacing
    idx = density.indices
    masses = density.masses
    coef = mat.log_coef
    g = q.density_gauss
    gx, gw = leggauss(g)
    gw = gw / 2.0
    offs = 0.5 + 0.5 * gx
    rel = np.stack(np.meshgrid(offs, offs, indexing="ij"), axis=-1).reshape(-1, 2) * h
    wts = np.outer(gw, gw).ravel()
    total = 0.0
    for a in range(len(masses)):
        ra = density.cell_rect(a)
        pa = np.array([ra.x0, ra.y0]) + rel
        for b in range(len(masses)):
            dij = idx[b] - idx[a]
            if max(abs(dij[0]), abs(dij[1])) <= 1:
                val = -coef * (math.log(h) + _cell_log_moment(int(dij[0]), int(dij[1])))
            else:
                rb = density.cell_rect(b)
                pb = np.array([rb.x0, rb.y0]) + rel
                d = pa[:, None, :] - pb[None, :, :]
                r = np.hypot(d[..., 0], d[..., 1])
                val = -coef * float(wts @ np.log(r) @ wts)
            total += masses[a] * masses[b] * val
    return 0.5 * total


def continuum_interaction(density: CellMeasure, geom: Geometry, mat: Material,
                          q: QuadratureConfig) -> float:
    """(1/2) double integral of V against a piecewise-constant cell density.

    Distant cell pairs use tensor Gauss quadrature of V; same-cell and touching
    pairs split V into its leading logarithm, integrated in closed form via
    cached unit-cell log moments, plus the smooth remainder.
    """
    if not isinstance(density, CellMeasure):
        raise TypeError("continuum_interaction expects a cell density; use "
                        "interaction_sum for atomic measures")
    h = density.spacing
    m = density.n_cells
    masses = density.masses
    idx = density.indices
    coef = mat.log_coef

    g = q.density_gauss
    gx, gw = leggauss(g)
    gw = gw / 2.0                       # weights on [0, 1], sum 1
    offs = 0.5 + 0.5 * gx               # nodes on [0, 1]
    nodes = []
    node_w = []
    for k in range(m):
        r = density.cell_rect(k)
        X, Y = np.meshgrid(r.x0 + offs * h, r.y0 + offs * h, indexing="ij")
        W = np.outer(gw, gw).ravel()
        nodes.append(np.stack([X.ravel(), Y.ravel()], axis=1))
        node_w.append(W)
    nodes_all = np.concatenate(nodes)
    Vmat = pairwise_interaction_matrix(nodes_all, geom, mat, q)

    g2 = g * g
    total = 0.0
    for a in range(m):
        wa = node_w[a]
        sa = slice(a * g2, (a + 1) * g2)
        for b in range(m):
            wb = node_w[b]
            sb = slice(b * g2, (b + 1) * g2)
            dij = idx[b] - idx[a]
            block = Vmat[sa, sb]
            if max(abs(dij[0]), abs(dij[1])) <= 1:
                # split off the exact log part on touching cells
                pa, pb = nodes[a], nodes[b]
                d = pa[:, None, :] - pb[None, :, :]
                r = np.hypot(d[..., 0], d[..., 1])
                if a == b:
                    np.fill_diagonal(r, 1.0)
                W_block = block + coef * np.log(r)
                if a == b:
                    np.fill_diagonal(W_block, 0.0)
                    denom = 1.0 - float(np.outer(wa, wb).trace())
                    w_mean = float(wa @ W_block @ wb) / denom
                else:
                    w_mean = float(wa @ W_block @ wb)
                log_part = -coef * (math.log(h) + _cell_log_moment(int(dij[0]), int(dij[1])))
                total += masses[a] * masses[b] * (log_part + w_mean)
            else:
                total += masses[a] * masses[b] * float(wa @ block @ wb)
    return 0.5 * total
