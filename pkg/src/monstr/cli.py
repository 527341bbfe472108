"""Command-line pipeline: simulate, reconstruct, evaluate, render, suite.

Every command writes a manifest JSON sufficient to re-run it exactly.
Exit codes: 0 success, 2 config/schema error, 3 geometry/shape error,
4 numerical divergence, 1 other errors (I/O, corrupt files).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

import monstr
from monstr import _kernels
from monstr.agents import AgentParams
from monstr.config import (
    default_config,
    load_config,
    make_agent_params,
    make_geometry,
    make_model,
    make_phantom_params,
)
from monstr.core import (
    ConfigError,
    DivergenceError,
    GeometryError,
    MonstrError,
    ScalarField,
    TensorField2D,
    read_field,
    read_mask,
    write_field,
)
from monstr.forward_model import add_noise, subsample_views, synthesize_strain_sinogram
from monstr.mace import resolve_sigma_x, run_monstr
from monstr.metrics import nrmse
from monstr.phantom import cantilever_strain, reference_experiments
from monstr.projector import Projector
from monstr.render import RenderError, render_field, symmetric_range


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _manifest(command, args_dict, config, extra=None):
    payload = {
        "command": command,
        "arguments": args_dict,
        "config": config,
        "package_version": monstr.__version__,
        "kernel_backend": _kernels.BACKEND,
    }
    if extra:
        payload.update(extra)
    return payload


def _load_config_arg(config_path):
    if config_path is None:
        from monstr.config import validate_config

        return validate_config(default_config())
    return load_config(config_path)


def _experiment_table(cfg):
    """Canonical experiment list with config-controlled noise/view counts."""
    table = []
    for spec in reference_experiments():
        keep = cfg["experiments"]["subsample_views"] if spec.keep_views else None
        sigma = cfg["experiments"]["noise_microstrain"] if spec.noise_microstrain else 0.0
        table.append((spec, keep, sigma))
    return table


def cmd_simulate(config_path, out_dir):
    """Write ground truth, mask, and the four experiment input sinograms."""
    cfg = _load_config_arg(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geom = make_geometry(cfg)
    model = make_model(cfg)
    phantom_params = make_phantom_params(cfg)
    truth, mask = cantilever_strain(phantom_params, geom)
    projector = Projector(geom)
    clean = synthesize_strain_sinogram(truth, mask, projector, model)

    write_field(truth, out / "truth_strain.mfld")
    write_field(mask, out / "mask.mfld")

    experiments = []
    seed = cfg["experiments"]["noise_seed"]
    for spec, keep, sigma in _experiment_table(cfg):
        sino = clean
        if keep is not None:
            sino = subsample_views(sino, keep)
        if sigma > 0.0:
            sino = add_noise(sino, sigma, seed)
        exp_dir = out / spec.name
        exp_dir.mkdir(exist_ok=True)
        write_field(sino, exp_dir / "sinogram.mfld")
        experiments.append(
            {
                "name": spec.name,
                "views": sino.geometry.num_views,
                "noise_microstrain": sigma,
                "noise_seed": seed if sigma > 0.0 else None,
                "enable_equilibrium": spec.enable_equilibrium,
                "sinogram": str(Path(spec.name) / "sinogram.mfld"),
            }
        )

    manifest = _manifest(
        "simulate",
        {"config": config_path, "out": str(out_dir)},
        cfg,
        {
            "experiments": experiments,
            "ground_truth": "truth_strain.mfld",
            "mask": "mask.mfld",
        },
    )
    _write_json(out / "manifest.json", manifest)
    return manifest


def _format_float(x):
    return f"{x:.17g}"


def _write_trace(path, state):
    lines = ["iteration,consensus_nrmse,wall_seconds"]
    for i, (value, wall) in enumerate(zip(state.trace, state.wall_seconds), start=1):
        lines.append(f"{i},{_format_float(value)},{_format_float(wall)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_reconstruct(sinogram_path, mask_path, config_path, out_dir,
                    no_equilibrium=False, threads=0, projector=None):
    """Reconstruct a strain tensor from a sinogram + mask; write tensor and trace."""
    cfg = _load_config_arg(config_path)
    sino = read_field(sinogram_path)
    mask = read_mask(mask_path)
    if not hasattr(sino, "path_lengths"):
        raise GeometryError(f"{sinogram_path} is not a sinogram file")
    if not sino.geometry.grid_compatible(mask.geometry):
        raise GeometryError(
            f"sinogram grid {sino.geometry.grid_shape} does not match mask grid "
            f"{mask.geometry.grid_shape}"
        )
    model = make_model(cfg)
    params = make_agent_params(cfg)
    if projector is None:
        projector = Projector(sino.geometry)

    if isinstance(params.qggmrf.sigma_x, str):
        from monstr.forward_model import compute_weights

        weights = compute_weights(sino.geometry.angles, model)
        sigma_x = resolve_sigma_x(sino, projector, weights, params.alpha_y, mask)
        params = params.with_sigma_x(sigma_x)
    strain, state = run_monstr(
        sino, mask, model, params,
        max_iters=cfg["mace"]["max_iters"],
        enable_equilibrium=not no_equilibrium,
        projector=projector,
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_field(strain, out / "recon_strain.mfld")
    _write_trace(out / "trace.csv", state)
    manifest = _manifest(
        "reconstruct",
        {
            "sinogram": str(sinogram_path),
            "mask": str(mask_path),
            "config": config_path,
            "out": str(out_dir),
            "no_equilibrium": bool(no_equilibrium),
            "threads": int(threads),
        },
        cfg,
        {
            "variant": "baseline" if no_equilibrium else "monstr",
            "sigma_x": params.qggmrf.sigma_x,
            "iterations": state.iteration,
            "final_consensus_nrmse": state.trace[-1] if state.trace else None,
            "outputs": ["recon_strain.mfld", "trace.csv"],
        },
    )
    _write_json(out / "manifest.json", manifest)
    return strain, state, manifest


def _nrmse_row(name, report):
    return (
        f"{name},{_format_float(report.xx)},{_format_float(report.yy)},"
        f"{_format_float(report.xy)},{_format_float(report.total)}"
    )


def _nrmse_text_table(rows):
    header = f"{'run':<18}{'eps_xx':>10}{'eps_yy':>10}{'eps_xy':>10}{'eps':>10}"
    lines = [header, "-" * len(header)]
    for name, rep in rows:
        lines.append(
            f"{name:<18}{rep.xx:>10.4f}{rep.yy:>10.4f}{rep.xy:>10.4f}{rep.total:>10.4f}"
        )
    return "\n".join(lines)


def cmd_evaluate(recon_path, truth_path, mask_path, out_csv=None, name="recon"):
    """NRMSE of a reconstruction against ground truth; prints a Table-1-style row."""
    recon = read_field(recon_path)
    truth = read_field(truth_path)
    mask = read_mask(mask_path)
    if not isinstance(recon, TensorField2D) or not isinstance(truth, TensorField2D):
        raise GeometryError("evaluate expects tensor fields for recon and truth")
    if recon.geometry.grid_shape != truth.geometry.grid_shape:
        raise GeometryError(
            f"grid mismatch: reconstruction {recon.geometry.grid_shape} vs "
            f"truth {truth.geometry.grid_shape}"
        )
    report = nrmse(recon, truth, mask)
    text = _nrmse_text_table([(name, report)])
    print(text)
    if out_csv is not None:
        content = "run,nrmse_xx,nrmse_yy,nrmse_xy,nrmse_total\n"
        content += _nrmse_row(name, report) + "\n"
        Path(out_csv).write_text(content, encoding="utf-8")
    return report


def cmd_render(field_path, out_image, component=None, scale=1.0, value_range=None,
               colormap="diverging"):
    """Render one component of a field file to a PGM/PPM raster."""
    obj = read_field(field_path)
    if isinstance(obj, TensorField2D):
        if component is None:
            raise RenderError("tensor fields need --component xx|yy|xy")
        comps = obj.components
        if component not in comps:
            raise RenderError(f"unknown component {component!r}")
        values = comps[component].values
    elif isinstance(obj, ScalarField):
        if component not in (None, "scalar"):
            raise RenderError(f"scalar fields have no component {component!r}")
        values = obj.values
    else:
        raise RenderError("sinogram rendering is not supported; render fields")
    used = render_field(values, out_image, value_range, scale, colormap)
    return used


def cmd_suite(config_path, out_dir, threads=0):
    """Run the four reference experiments end to end and emit a combined report."""
    cfg = _load_config_arg(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = out / "inputs"
    cmd_simulate(config_path, inputs)

    truth_path = inputs / "truth_strain.mfld"
    mask_path = inputs / "mask.mfld"
    projectors = {}
    rows = []
    results = {}
    for spec, keep, sigma in _experiment_table(cfg):
        exp_dir = out / spec.name
        sino_path = inputs / spec.name / "sinogram.mfld"
        sino = read_field(sino_path)
        key = sino.geometry
        if key not in projectors:
            projectors[key] = Projector(key)
        strain, state, _ = cmd_reconstruct(
            sino_path, mask_path, config_path, exp_dir,
            no_equilibrium=not spec.enable_equilibrium, threads=threads,
            projector=projectors[key],
        )
        truth = read_field(truth_path)
        mask = read_mask(mask_path)
        report = nrmse(strain, truth, mask)
        csv = "run,nrmse_xx,nrmse_yy,nrmse_xy,nrmse_total\n"
        csv += _nrmse_row(spec.name, report) + "\n"
        (exp_dir / "nrmse.csv").write_text(csv, encoding="utf-8")
        rows.append((spec.name, report))
        results[spec.name] = {"nrmse": report, "trace": state.trace}

    report_csv = "run,nrmse_xx,nrmse_yy,nrmse_xy,nrmse_total\n"
    for name, rep in rows:
        report_csv += _nrmse_row(name, rep) + "\n"
    (out / "report.csv").write_text(report_csv, encoding="utf-8")
    text = _nrmse_text_table(rows)
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)

    manifest = _manifest(
        "suite",
        {"config": config_path, "out": str(out_dir), "threads": int(threads)},
        cfg,
        {"experiments": [name for name, _ in rows]},
    )
    _write_json(out / "manifest.json", manifest)
    return results


def _parse_range(text):
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as exc:
        raise RenderError(f"--range expects 'lo,hi', got {text!r}") from exc
    return (lo, hi)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="monstr",
        description="Strain tensor tomography from Bragg-edge strain sinograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate phantom ground truth and sinograms")
    p.add_argument("--config", default=None, help="JSON config (default: built-in)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("reconstruct", help="run the consensus reconstruction")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-equilibrium", action="store_true",
                   help="baseline variant without the equilibrium agent")
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (0 = auto); output is thread-count independent")

    p = sub.add_parser("evaluate", help="NRMSE against ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", default=None, help="also write the table as CSV")

    p = sub.add_parser("render", help="render a field component to PGM/PPM")
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--component", default=None, choices=["xx", "yy", "xy", "scalar"])
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--range", dest="value_range", default=None,
                   help="linear mapping range 'lo,hi' (default: symmetric max-abs)")
    p.add_argument("--colormap", default="diverging", choices=["gray", "diverging"])

    p = sub.add_parser("suite", help="run all four reference experiments")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=0)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out)
        elif args.command == "reconstruct":
            cmd_reconstruct(args.sinogram, args.mask, args.config, args.out,
                            no_equilibrium=args.no_equilibrium, threads=args.threads)
        elif args.command == "evaluate":
            cmd_evaluate(args.recon, args.truth, args.mask, out_csv=args.out)
        elif args.command == "render":
            value_range = _parse_range(args.value_range) if args.value_range else None
            cmd_render(args.field, args.out, component=args.component,
                       scale=args.scale, value_range=value_range,
                       colormap=args.colormap)
        elif args.command == "suite":
            cmd_suite(args.config, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except (MonstrError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
