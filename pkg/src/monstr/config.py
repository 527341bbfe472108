"""Run configuration: a single strict JSON document.

Sections: geometry, elasticity, phantom, agents, mace, experiments. Every
key is required and unknown keys are rejected, so a typo in a solver
parameter fails loudly with the offending dotted path.
"""
from __future__ import annotations

import json

from monstr.agents import AgentParams, QggmrfParams
from monstr.core import ConfigError, Geometry, uniform_angles
from monstr.elasticity import ElasticityModel
from monstr.phantom import BeamPhantomParams


def default_config():
    """The reference experiment configuration (values the suite was tuned at)."""
    return {
        "geometry": {
            "grid_rows": 128,
            "grid_cols": 128,
            "num_views": 50,
            "num_detector_cols": 128,
        },
        "elasticity": {
            "youngs_modulus": 1.0,
            "poisson_ratio": 0.3,
        },
        "phantom": {
            "length": 91,
            "width": 45,
            "peak_strain_microstrain": 300.0,
        },
        "agents": {
            "alpha_y": 1e-4,
            "alpha_v": 1e-4,
            "alpha_e": 0.02,
            "recon_inner_iters": 10,
            "recon_cg_iters": 12,
            "recon_cg_tol": 0.01,
            "equil_sweeps": 3,
            "cg_tol": 1e-10,
            "xy_solver": "dct",
            "qggmrf": {
                "q": 1.2,
                "p": 2.0,
                "T": 1.0,
                "sigma_x": "auto",
                "neighbor_weights": "8-neighborhood",
            },
        },
        "mace": {
            "max_iters": 50,
        },
        "experiments": {
            "noise_microstrain": 10.0,
            "noise_seed": 20250809,
            "subsample_views": 10,
        },
    }


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_positive_int(v, path):
    if not _is_int(v) or v < 1:
        raise ConfigError(f"{path}: expected a positive integer, got {v!r}")


def _check_int(v, path):
    if not _is_int(v):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")


def _check_positive(v, path):
    if not _is_number(v) or not v > 0:
        raise ConfigError(f"{path}: expected a positive number, got {v!r}")


def _check_nonnegative(v, path):
    if not _is_number(v) or v < 0:
        raise ConfigError(f"{path}: expected a non-negative number, got {v!r}")


def _check_poisson(v, path):
    if not _is_number(v) or not -1.0 < v < 0.5:
        raise ConfigError(f"{path}: Poisson ratio must lie in (-1, 0.5), got {v!r}")


def _check_q(v, path):
    if not _is_number(v) or not 1.0 < v <= 2.0:
        raise ConfigError(f"{path}: q must lie in (1, 2], got {v!r}")


def _check_p(v, path):
    if v != 2.0 and v != 2:
        raise ConfigError(f"{path}: p is fixed at 2, got {v!r}")


def _check_sigma_x(v, path):
    if v == "auto":
        return
    if not _is_number(v) or not v > 0:
        raise ConfigError(f'{path}: expected a positive number or "auto", got {v!r}')


def _check_choice(*choices):
    def check(v, path):
        if v not in choices:
            raise ConfigError(f"{path}: expected one of {choices}, got {v!r}")

    return check


_SCHEMA = {
    "geometry": {
        "grid_rows": _check_positive_int,
        "grid_cols": _check_positive_int,
        "num_views": _check_positive_int,
        "num_detector_cols": _check_positive_int,
    },
    "elasticity": {
        "youngs_modulus": _check_positive,
        "poisson_ratio": _check_poisson,
    },
    "phantom": {
        "length": _check_positive_int,
        "width": _check_positive_int,
        "peak_strain_microstrain": _check_positive,
    },
    "agents": {
        "alpha_y": _check_positive,
        "alpha_v": _check_positive,
        "alpha_e": _check_positive,
        "recon_inner_iters": _check_positive_int,
        "recon_cg_iters": _check_positive_int,
        "recon_cg_tol": _check_nonnegative,
        "equil_sweeps": _check_positive_int,
        "cg_tol": _check_positive,
        "xy_solver": _check_choice("dct", "cg"),
        "qggmrf": {
            "q": _check_q,
            "p": _check_p,
            "T": _check_positive,
            "sigma_x": _check_sigma_x,
            "neighbor_weights": _check_choice("8-neighborhood"),
        },
    },
    "mace": {
        "max_iters": _check_positive_int,
    },
    "experiments": {
        "noise_microstrain": _check_nonnegative,
        "noise_seed": _check_int,
        "subsample_views": _check_positive_int,
    },
}


def _validate_node(schema, node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    for key in node:
        if key not in schema:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"{where}: unknown key")
    for key, sub in schema.items():
        where = f"{path}.{key}" if path else key
        if key not in node:
            raise ConfigError(f"{where}: missing required key")
        if isinstance(sub, dict):
            _validate_node(sub, node[key], where)
        else:
            sub(node[key], where)


def validate_config(cfg):
    """Validate a config dict in place; returns it for chaining."""
    _validate_node(_SCHEMA, cfg, "")
    sub = cfg["experiments"]["subsample_views"]
    if sub > cfg["geometry"]["num_views"]:
        raise ConfigError(
            "experiments.subsample_views: cannot exceed geometry.num_views"
        )
    return cfg


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return validate_config(cfg)


def make_geometry(cfg) -> Geometry:
    g = cfg["geometry"]
    return Geometry(
        g["grid_rows"], g["grid_cols"], uniform_angles(g["num_views"]),
        g["num_detector_cols"],
    )


def make_model(cfg) -> ElasticityModel:
    e = cfg["elasticity"]
    return ElasticityModel.from_constants(e["youngs_modulus"], e["poisson_ratio"])


def make_phantom_params(cfg) -> BeamPhantomParams:
    p = cfg["phantom"]
    return BeamPhantomParams(
        length=p["length"],
        width=p["width"],
        youngs_modulus=cfg["elasticity"]["youngs_modulus"],
        poisson_ratio=cfg["elasticity"]["poisson_ratio"],
        peak_strain_microstrain=p["peak_strain_microstrain"],
    )


def make_agent_params(cfg) -> AgentParams:
    a = cfg["agents"]
    qg = a["qggmrf"]
    params = AgentParams(
        alpha_y=a["alpha_y"],
        alpha_v=a["alpha_v"],
        alpha_e=a["alpha_e"],
        qggmrf=QggmrfParams(
            q=qg["q"], p=float(qg["p"]), T=qg["T"], sigma_x=qg["sigma_x"],
            neighbor_weights=qg["neighbor_weights"],
        ),
        recon_inner_iters=a["recon_inner_iters"],
        recon_cg_iters=a["recon_cg_iters"],
        recon_cg_tol=a["recon_cg_tol"],
        equil_sweeps=a["equil_sweeps"],
        cg_tol=a["cg_tol"],
        xy_solver=a["xy_solver"],
    )
    return params.validate()
