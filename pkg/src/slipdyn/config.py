"""Declarative experiment configuration: JSON with a strict, versioned schema.

Every section rejects unknown keys.  Numeric values are in the nondimensional
units of the model (yield threshold normalized to 1).  See README for the full
schema and the shipped example configs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corrector import RitzBasis
from .geometry import Disk, Geometry, Rect
from .interaction import QuadratureConfig
from .kernels import Material
from .measures import ScalingSchedule
from .evolution import LoadingProgram, SolverConfig

SCHEMA_VERSION = 1

EXPERIMENTS = ("simulate", "gamma", "distance", "kernel_check")


class ConfigError(ValueError):
    pass


def _take(section: dict, name: str, allowed: dict):
    """Pop known keys with defaults; reject anything else."""
    out = {}
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in section '{name}': {sorted(extra)}")
    for key, default in allowed.items():
        if default is _REQUIRED and key not in section:
            raise ConfigError(f"missing required key '{key}' in section '{name}'")
        out[key] = section.get(key, default)
    return out


_REQUIRED = object()


def _sigma_callable(spec: dict):
    kind = spec.get("kind")
    if kind == "constant":
        v = float(spec["value"])
        return (lambda t: v), (lambda t: 0.0)
    if kind == "ramp":
        rate = float(spec["rate"])
        return (lambda t: rate * t), (lambda t: rate)
    if kind == "piecewise_linear":
        import numpy as np
        ts = np.asarray(spec["times"], dtype=float)
        vs = np.asarray(spec["values"], dtype=float)
        if len(ts) != len(vs) or len(ts) < 2:
            raise ConfigError("piecewise_linear needs matching times/values, length >= 2")
        slopes = np.diff(vs) / np.diff(ts)

        def sigma(t, ts=ts, vs=vs):
            return float(np.interp(t, ts, vs))

        def sigma_dot(t, ts=ts, slopes=slopes):
            k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(slopes) - 1))
            return float(slopes[k])

        return sigma, sigma_dot
    raise ConfigError(f"unknown sigma kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    material: Material
    geometry: Geometry
    schedule: ScalingSchedule
    quadrature: QuadratureConfig
    basis: RitzBasis
    solver: SolverConfig
    loading: LoadingProgram | None
    section: dict            # experiment-specific parameters
    output_dir: str | None
    raw: dict = field(repr=False)
    sha: str = ""


def load_config(path) -> ExperimentConfig:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    top = _take(raw, "top", {
        "experiment": _REQUIRED, "seed": 0, "output_dir": None,
        "material": {}, "geometry": {}, "schedule": {}, "quadrature": {},
        "basis": {}, "solver": {}, "loading": None,
        "evolution": None, "gamma": None, "distance": None, "kernel_check": None,
    })
    exp = top["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")

    m = _take(top["material"], "material", {"lam": 1.0, "mu": 1.0})
    material = Material(lam=float(m["lam"]), mu=float(m["mu"]))

    g = _take(top["geometry"], "geometry", {
        "omega": [0.0, 0.0, 1.0, 1.0],
        "box": [0.2, 0.2, 0.8, 0.8],
        "ball": [0.06, 0.5, 0.03],
    })
    geometry = Geometry(omega=Rect(*map(float, g["omega"])),
                        r_box=Rect(*map(float, g["box"])),
                        ball=Disk(*map(float, g["ball"])))

    s = _take(top["schedule"], "schedule", {
        "eps_coef": 1.0, "eps_exp": 6.0, "r_coef": 1.0, "r_exp": 1.5})
    schedule = ScalingSchedule(**{k: float(v) for k, v in s.items()})

    qd = _take(top["quadrature"], "quadrature", {
        "base_cells": 24, "singular_refine_depth": 7, "tol": 1e-6,
        "cell_gauss": 3, "boundary_points": 128, "cheb_degree": 96,
        "density_gauss": 4})
    quadrature = QuadratureConfig(
        base_cells=int(qd["base_cells"]),
        singular_refine_depth=int(qd["singular_refine_depth"]),
        tol=float(qd["tol"]), cell_gauss=int(qd["cell_gauss"]),
        boundary_points=int(qd["boundary_points"]),
        cheb_degree=int(qd["cheb_degree"]),
        density_gauss=int(qd["density_gauss"]))

    b = _take(top["basis"], "basis", {"degree": 8})
    basis = RitzBasis(degree=int(b["degree"]))

    sv = _take(top["solver"], "solver", {
        "sweep_tol": 1e-9, "max_sweeps": 80, "restarts": 0,
        "line_grid": 48, "mode": "freespace"})
    solver = SolverConfig(sweep_tol=float(sv["sweep_tol"]),
                          max_sweeps=int(sv["max_sweeps"]),
                          restarts=int(sv["restarts"]),
                          line_grid=int(sv["line_grid"]), mode=sv["mode"])

    loading = None
    if top["loading"] is not None:
        ld = _take(top["loading"], "loading", {
            "kind": "uniform_shear", "sigma": _REQUIRED, "time_horizon": _REQUIRED})
        if ld["kind"] != "uniform_shear":
            raise ConfigError("config files support the uniform_shear loading kind")
        sigma, sigma_dot = _sigma_callable(ld["sigma"])
        loading = LoadingProgram.uniform_shear(sigma, float(ld["time_horizon"]),
                                               sigma_dot=sigma_dot)

    sections = {
        "simulate": ("evolution", {
            "initial_points": _REQUIRED, "steps": 200, "pre_relax": False}),
        "gamma": ("gamma", {
            "target": _REQUIRED, "h": _REQUIRED, "origin": None,
            "n_ladder": [64, 256, 1024], "mode": "bounded",
            "gamma_c": [0.0, 1.0]}),
        "distance": ("distance", {
            "mu": _REQUIRED, "nu": _REQUIRED,
            "eps_ladder": [1.0, 0.1, 0.01, 0.001]}),
        "kernel_check": ("kernel_check", {
            "quad_n": 512, "radii": [0.05, 0.1, 0.5], "eps": 0.05,
            "source": [0.5, 0.5], "div_points": 50, "div_h": 1e-4,
            "traction_samples": 64, "break_traction": False}),
    }
    sec_name, allowed = sections[exp]
    sec_raw = top[sec_name]
    if sec_raw is None:
        raise ConfigError(f"experiment '{exp}' requires a '{sec_name}' section")
    section = _take(sec_raw, sec_name, allowed)
    if exp == "simulate" and loading is None:
        raise ConfigError("simulate requires a 'loading' section")

    sha = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
    return ExperimentConfig(
        experiment=exp, seed=int(top["seed"]), material=material,
        geometry=geometry, schedule=schedule, quadrature=quadrature,
        basis=basis, solver=solver, loading=loading, section=section,
        output_dir=top["output_dir"], raw=raw, sha=sha)
