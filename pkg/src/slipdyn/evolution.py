"""Rate-independent quasi-static evolution by incremental energy minimization.

Each time step minimizes total energy plus the slip-confined transport cost to
the previous state.  The solver operates in the per-dislocation scaling where
the yield threshold equals one: a dislocation moves only when the magnitude of
its configurational force exceeds 1, and it lands where the force magnitude
falls back to 1, at a neighbor separation barrier, or at the confinement box
edge.  Cyclic per-plane sweeps repeat until the stability residual drops below
the solver tolerance; optional multi-start perturbations probe for deeper
minima and warn when they find one.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .corrector import RitzBasis, get_solver
from .geometry import Geometry
from .interaction import (QuadratureConfig, interaction_cross_matrix,
                          pairwise_interaction_matrix)
from .kernels import Material
from .measures import DislocationConfig
from .transport import slip_distance

__all__ = ["LoadingProgram", "SolverConfig", "EnergyContext", "ForceRecord",
           "EvolutionTrace", "driving_force", "incremental_step",
           "run_quasistatic", "stability_residual", "stability_excess",
           "energy_balance_series",
           "energy_balance_residual", "flow_rule_steps", "flow_rule_residual"]

EDGE_TOL = 1e-10


@dataclass(frozen=True)
class LoadingProgram:
    """Time-dependent loading potential.

    ``uniform_shear`` realizes f(t, x) = sigma(t) x1; ``custom`` takes the
    potential and its derivatives directly.  All callables are scalar in t;
    spatial arguments are (N, 2) arrays.
    """

    kind: str
    time_horizon: float
    sigma: object = None          # t -> scalar           (uniform_shear)
    sigma_dot: object = None      # t -> scalar, optional
    f: object = None              # (t, pts) -> (N,)      (custom)
    f_dot: object = None
    f_x1: object = None

    @classmethod
    def uniform_shear(cls, sigma, time_horizon, sigma_dot=None):
        return cls(kind="uniform_shear", time_horizon=time_horizon,
                   sigma=sigma, sigma_dot=sigma_dot)

    @classmethod
    def custom(cls, f, f_dot, f_x1, time_horizon):
        return cls(kind="custom", time_horizon=time_horizon,
                   f=f, f_dot=f_dot, f_x1=f_x1)

    def potential(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self.kind == "uniform_shear":
            return self.sigma(t) * pts[:, 0]
        return np.asarray(self.f(t, pts), dtype=float)

    def potential_dot(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self.kind == "uniform_shear":
            if self.sigma_dot is not None:
                rate = self.sigma_dot(t)
            else:
                h = 1e-6 * max(1.0, self.time_horizon)
                rate = (self.sigma(min(t + h, self.time_horizon))
                        - self.sigma(max(t - h, 0.0))) / (
                            min(t + h, self.time_horizon) - max(t - h, 0.0))
            return rate * pts[:, 0]
        return np.asarray(self.f_dot(t, pts), dtype=float)

    def horizontal_gradient(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self.kind == "uniform_shear":
            return np.full(len(pts), float(self.sigma(t)))
        return np.asarray(self.f_x1(t, pts), dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    sweep_tol: float = 1e-9
    max_sweeps: int = 80
    restarts: int = 0
    line_grid: int = 48
    mode: str = "freespace"

    def __post_init__(self):
        if self.sweep_tol <= 0 or self.max_sweeps < 1 or self.line_grid < 4:
            raise ValueError("invalid solver configuration")
        if self.mode not in ("freespace", "bounded"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class EnergyContext:
    """Bundle of everything the energy and force evaluations need."""

    mode: str
    mat: Material
    geom: Geometry | None = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    basis: RitzBasis | None = None

    def __post_init__(self):
        if self.mode == "bounded" and (self.geom is None or self.basis is None):
            raise ValueError("bounded mode requires geometry and basis")

    # -- energies ----------------------------------------------------------
    def interaction_of_points(self, pts: np.ndarray) -> float:
        n = len(pts)
        if n == 1:
            return 0.0
        if self.mode == "freespace":
            d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, 1.0)
            s = -self.mat.log_coef * 0.5 * np.log(d2)
            np.fill_diagonal(s, 0.0)
            return float(s.sum()) / (2 * n * n)
        M = pairwise_interaction_matrix(pts, self.geom, self.mat, self.quad)
        return float(M.sum()) / (2 * n * n)

    def corrector_energy_of_points(self, pts: np.ndarray) -> float:
        if self.mode != "bounded":
            return 0.0
        from .measures import DiscreteMeasure
        solver = get_solver(self.geom, self.mat, self.basis, self.quad)
        return solver.solve(DiscreteMeasure.equal_weights(pts)).energy

    def renormalized_energy(self, cfg: DislocationConfig) -> float:
        pts = cfg.canonical_order().points
        return self.interaction_of_points(pts) + self.corrector_energy_of_points(pts)

    def total_with_load(self, cfg: DislocationConfig, t: float,
                        load: LoadingProgram) -> float:
        pts = cfg.points
        return (self.renormalized_energy(cfg)
                - float(np.mean(load.potential(t, pts))))

    # -- per-dislocation horizontal forces ----------------------------------
    def interaction_forces(self, pts: np.ndarray) -> np.ndarray:
        """-n d/dz_i of the interaction energy, horizontal components."""
        n = len(pts)
        if n == 1:
            return np.zeros(1)
        if self.mode == "bounded":
            return np.array([self.interaction_force_single(pts, i)
                             for i in range(n)])
        dx = pts[:, None, 0] - pts[None, :, 0]
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, 1.0)
        rep = self.mat.log_coef * dx / d2
        np.fill_diagonal(rep, 0.0)
        return rep.sum(axis=1) / n

    def _row_sum(self, pts: np.ndarray, i: int, delta: float) -> float:
        """Sum over j != i of the boundary part of V(z_i + delta e1, z_j)."""
        y = pts[i].copy()
        y[0] += delta
        others = np.delete(pts, i, axis=0)
        row = interaction_cross_matrix(y[None, :], others, self.geom, self.mat,
                                       self.quad)[0]
        d2 = np.sum((y - others) ** 2, axis=-1)
        log_part = -self.mat.log_coef * 0.5 * np.log(d2)
        return float(row.sum() - log_part.sum())

    def corrector_force_single(self, pts: np.ndarray, i: int) -> float:
        """Corrector contribution by central differences; one-sided at the box edges."""
        if self.mode != "bounded":
            return 0.0
        from .measures import DiscreteMeasure
        solver = get_solver(self.geom, self.mat, self.basis, self.quad)
        box = self.geom.r_box
        n = len(pts)
        delta = 1e-5 * box.diam
        hi = min(delta, box.x1 - pts[i, 0])
        lo = min(delta, pts[i, 0] - box.x0)
        if hi + lo <= 0:
            return 0.0
        ep = pts.copy(); ep[i, 0] += hi
        em = pts.copy(); em[i, 0] -= lo
        e_p = solver.solve(DiscreteMeasure.equal_weights(ep)).energy
        e_m = solver.solve(DiscreteMeasure.equal_weights(em)).energy
        return -n * (e_p - e_m) / (hi + lo)

    def corrector_forces(self, pts: np.ndarray) -> np.ndarray:
        return np.array([self.corrector_force_single(pts, i)
                         for i in range(len(pts))])

    def interaction_force_single(self, pts: np.ndarray, i: int) -> float:
        n = len(pts)
        if n == 1:
            return 0.0
        others = np.delete(pts, i, axis=0)
        dx = pts[i, 0] - others[:, 0]
        d2 = np.sum((pts[i] - others) ** 2, axis=-1)
        f = float(np.sum(self.mat.log_coef * dx / d2)) / n
        if self.mode == "bounded":
            delta = 1e-6 * self.geom.r_box.diam
            f += -(self._row_sum(pts, i, delta)
                   - self._row_sum(pts, i, -delta)) / (2 * delta) / n
        return f


@dataclass(frozen=True)
class ForceRecord:
    """Per-dislocation horizontal configurational forces, yield threshold 1."""

    values: np.ndarray


def _forces_at(pts: np.ndarray, t: float, load: LoadingProgram,
               ctx: EnergyContext) -> np.ndarray:
    return (ctx.interaction_forces(pts) + ctx.corrector_forces(pts)
            + load.horizontal_gradient(t, pts))


def _force_single(pts: np.ndarray, i: int, t: float, load: LoadingProgram,
                  ctx: EnergyContext) -> float:
    return (ctx.interaction_force_single(pts, i)
            + ctx.corrector_force_single(pts, i)
            + float(load.horizontal_gradient(t, pts[i:i + 1])[0]))


def driving_force(cfg: DislocationConfig, t: float, load: LoadingProgram,
                  ctx: EnergyContext) -> ForceRecord:
    """Configurational horizontal force on each dislocation at time t.

    Values follow the ordering of ``cfg.points``.
    """
    return ForceRecord(values=_forces_at(cfg.points, t, load, ctx))


def _edge_state(x: float, box) -> int:
    if x - box.x0 <= EDGE_TOL:
        return -1
    if box.x1 - x <= EDGE_TOL:
        return 1
    return 0


def _residual_from_forces(pts: np.ndarray, forces: np.ndarray, box) -> float:
    res = 0.0
    for x, f in zip(pts[:, 0], forces):
        e = _edge_state(x, box)
        if e == -1:
            r = max(f - 1.0, 0.0)
        elif e == 1:
            r = max(-f - 1.0, 0.0)
        else:
            r = max(abs(f) - 1.0, 0.0)
        res = max(res, r)
    return res


def stability_residual(cfg: DislocationConfig, t: float, load: LoadingProgram,
                       ctx: EnergyContext) -> float:
    """max_i (|force_i| - 1)_+ with one-sided treatment at the box edges."""
    forces = _forces_at(cfg.points, t, load, ctx)
    return _residual_from_forces(cfg.points, forces, cfg.box)


def stability_excess(cfg: DislocationConfig, record: ForceRecord) -> float:
    """Stability residual from an already-computed force record."""
    return _residual_from_forces(cfg.points, record.values, cfg.box)


def _land_position(pts, i, direction, barrier, t, load, ctx, solver_cfg):
    """March toward the barrier while the force magnitude exceeds 1; bisect the landing."""
    x0 = pts[i, 0]
    grid = np.linspace(x0, barrier, solver_cfg.line_grid + 1)[1:]

    def f_at(x):
        trial = pts.copy()
        trial[i, 0] = x
        return _force_single(trial, i, t, load, ctx) * direction

    lo = x0
    hi = None
    for g in grid:
        if f_at(g) >= 1.0:
            lo = g
        else:
            hi = g
            break
    if hi is None:
        return barrier
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f_at(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) < 1e-13 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def _sweep_to_stability(pts, t, load, ctx, solver_cfg, box, r_n, planes):
    """Cyclic per-dislocation relaxation; mutates pts, returns the final residual."""
    for _ in range(solver_cfg.max_sweeps):
        moved = False
        for _, idx in planes:
            order = np.argsort(pts[idx, 0])
            ordered = idx[order]
            for k, i in enumerate(ordered):
                f = _force_single(pts, i, t, load, ctx)
                direction = 1.0 if f > 0 else -1.0
                if abs(f) <= 1.0 + 1e-12:
                    continue
                if direction > 0:
                    barrier = box.x1 if k == len(ordered) - 1 else \
                        pts[ordered[k + 1], 0] - r_n
                else:
                    barrier = box.x0 if k == 0 else pts[ordered[k - 1], 0] + r_n
                if (barrier - pts[i, 0]) * direction <= 1e-15:
                    continue
                pts[i, 0] = _land_position(pts, i, direction, barrier, t, load,
                                           ctx, solver_cfg)
                moved = True
        resid = _residual_from_forces(pts, _forces_at(pts, t, load, ctx), box)
        if resid <= solver_cfg.sweep_tol and not moved:
            return resid
    return _residual_from_forces(pts, _forces_at(pts, t, load, ctx), box)


def incremental_step(prev: DislocationConfig, t: float, load: LoadingProgram,
                     solver_cfg: SolverConfig, ctx: EnergyContext,
                     rng: np.random.Generator | None = None) -> DislocationConfig:
    """One incremental minimization step of energy plus transport cost.

    The vertical marginal is preserved exactly (only horizontal coordinates
    move).  Motion follows the threshold rule, so every elementary move pays
    for its own dissipation and the minimality inequality against the previous
    state holds along the whole sweep.
    """
    prev = prev.canonical_order()
    box = prev.box
    r_n = prev.r_n
    planes = prev.planes()

    def relax(start_pts):
        pts = start_pts.copy()
        resid = _sweep_to_stability(pts, t, load, ctx, solver_cfg, box, r_n, planes)
        return pts, resid

    pts, resid = relax(prev.points)
    if resid > solver_cfg.sweep_tol:
        raise RuntimeError(
            f"incremental step failed to reach stability (residual {resid:.3e})")
    best = DislocationConfig(pts, prev.schedule, box, prev.plane_tol)
    if solver_cfg.restarts > 0:
        rng = rng or np.random.default_rng(0)
        prev_measure = prev.measure()
        best_obj = (ctx.total_with_load(best, t, load)
                    + slip_distance(best.measure(), prev_measure))
        improved = False
        for _ in range(solver_cfg.restarts):
            jitter = rng.uniform(-0.05, 0.05, len(pts)) * box.width
            trial = prev.points.copy()
            trial[:, 0] = np.clip(trial[:, 0] + jitter, box.x0, box.x1)
            for _, idx in planes:
                xs = np.sort(trial[idx, 0])
                for k in range(1, len(xs)):
                    xs[k] = max(xs[k], xs[k - 1] + r_n)
                trial[idx, 0] = np.clip(xs, box.x0, box.x1)
            try:
                cand_pts, cand_resid = relax(trial)
                if cand_resid > solver_cfg.sweep_tol:
                    continue
                cand = DislocationConfig(cand_pts, prev.schedule, box,
                                         prev.plane_tol)
            except ValueError:
                continue
            obj = (ctx.total_with_load(cand, t, load)
                   + slip_distance(cand.measure(), prev_measure))
            if obj < best_obj - 1e-12:
                best, best_obj, improved = cand, obj, True
        if improved:
            warnings.warn("multi-start found a deeper minimum; the sweep solution "
                          "was only locally stable", RuntimeWarning)
    return best


@dataclass
class EvolutionTrace:
    """Record of one quasi-static run."""

    times: np.ndarray
    configs: list
    step_d: np.ndarray
    energies: np.ndarray            # renormalized energies, no load term
    forces: list

    @property
    def dissipation(self) -> np.ndarray:
        return np.cumsum(self.step_d)

    def positions(self) -> np.ndarray:
        return np.stack([c.points for c in self.configs])


def run_quasistatic(init: DislocationConfig, times, load: LoadingProgram,
                    solver_cfg: SolverConfig, ctx: EnergyContext,
                    pre_relax: bool = False,
                    rng: np.random.Generator | None = None) -> EvolutionTrace:
    """Sequential incremental minimization over a time grid.

    The initial configuration must satisfy the stability condition at the
    first time; pass ``pre_relax=True`` to replace it by the result of an
    incremental step at that time instead.
    """
    times = np.asarray(times, dtype=float)
    init = init.canonical_order()
    t0 = float(times[0])
    if pre_relax:
        init = incremental_step(init, t0, load, solver_cfg, ctx, rng)
    else:
        resid = stability_residual(init, t0, load, ctx)
        if resid > max(solver_cfg.sweep_tol, 1e-9):
            raise ValueError(
                f"initial configuration unstable (residual {resid:.3e}); "
                "relax it first or pass pre_relax=True")
    configs = [init]
    step_d = [0.0]
    energies = [ctx.renormalized_energy(init)]
    forces = [driving_force(init, t0, load, ctx)]
    for t in times[1:]:
        new = incremental_step(configs[-1], float(t), load, solver_cfg, ctx, rng)
        step_d.append(slip_distance(new.measure(), configs[-1].measure()))
        energies.append(ctx.renormalized_energy(new))
        forces.append(driving_force(new, float(t), load, ctx))
        configs.append(new)
    return EvolutionTrace(times=times, configs=configs,
                          step_d=np.array(step_d), energies=np.array(energies),
                          forces=forces)


def energy_balance_series(trace: EvolutionTrace, load: LoadingProgram,
                          ctx: EnergyContext) -> np.ndarray:
    """Per-time deviation from the energy balance (trapezoid work integral)."""
    times = trace.times
    m = len(times)
    load_vals = np.array([float(np.mean(load.potential(float(times[k]),
                                                       trace.configs[k].points)))
                          for k in range(m)])
    fdot_vals = np.array([float(np.mean(load.potential_dot(float(times[k]),
                                                           trace.configs[k].points)))
                          for k in range(m)])
    lhs = trace.energies - load_vals + trace.dissipation
    work = np.concatenate([[0.0], np.cumsum(
        0.5 * (fdot_vals[1:] + fdot_vals[:-1]) * np.diff(times))])
    rhs = (trace.energies[0] - load_vals[0]) - work
    return np.abs(lhs - rhs)


def energy_balance_residual(trace: EvolutionTrace, load: LoadingProgram,
                            ctx: EnergyContext) -> float:
    """Worst deviation from the energy balance along the trace."""
    return float(np.max(energy_balance_series(trace, load, ctx)))


def flow_rule_steps(trace: EvolutionTrace, load: LoadingProgram,
                    ctx: EnergyContext, motion_tol: float = 1e-9) -> np.ndarray:
    """Per-step complementarity defect: moving dislocations must see unit force.

    Forces are taken at the arrival state; at the box edges the outward force
    is clamped to the threshold (one-sided convention for pinned dislocations).
    """
    box = trace.configs[0].box
    out = np.zeros(len(trace.times))
    for k in range(1, len(trace.times)):
        prev_pts = trace.configs[k - 1].points
        new_pts = trace.configs[k].points
        f = trace.forces[k].values
        worst = 0.0
        for i in range(len(new_pts)):
            dx = new_pts[i, 0] - prev_pts[i, 0]
            if abs(dx) <= motion_tol:
                continue
            e = _edge_state(new_pts[i, 0], box)
            fi = f[i]
            if e == 1:
                fi = min(fi, 1.0)
            elif e == -1:
                fi = max(fi, -1.0)
            worst = max(worst, abs(fi * dx - abs(dx)))
        out[k] = worst
    return out


def flow_rule_residual(trace: EvolutionTrace, load: LoadingProgram,
                       ctx: EnergyContext, motion_tol: float = 1e-9) -> float:
    """Worst per-step complementarity defect along the trace."""
    return float(np.max(flow_rule_steps(trace, load, ctx, motion_tol)))
