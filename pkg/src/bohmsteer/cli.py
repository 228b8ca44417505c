"""Command-line entry point.

    bohmsteer [--config FILE] [--outdir DIR] COMMAND [options]

Commands: simulate, steer, velocity-map, emulate, reconstruct, calibrate,
render. Failures exit non-zero with one line ``error: <category>: <message>``
on stderr.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, load_config
from .pipeline import (SampledVelocityField, emulate_plane, labelled_states, parse_steer_label,
                       reconstruct_plane, steer_label)
from .state import Outcome, ProjectionBasis, VelocityField, project
from .trajectory import trace_many, trace_steered_many, velocity_change_map
from .weakmeas import calibrate_zeta, make_calibration_sweep, read_image, write_image


def _note(msg: str) -> None:
    print(f"note: {msg}", file=sys.stderr)


def _analytic_fields(cfg: ExperimentConfig, theta: float, outcome: Outcome):
    split = cfg.split_state()
    before = VelocityField(split, cfg.wavenumber, density_floor=cfg.density_floor)
    projected, _ = project(split, ProjectionBasis.from_degrees(theta), outcome)
    return before, VelocityField(projected, cfg.wavenumber, density_floor=cfg.density_floor)


def _snap(grid, z: float) -> float:
    snapped = grid.nearest(z)
    if abs(snapped - z) > 1e-9:
        _note(f"z_switch {z:g} m snapped to imaging plane {snapped:.6g} m")
    return snapped


def cmd_simulate(cfg, args, outdir: Path) -> list[Path]:
    field = VelocityField(cfg.split_state(), cfg.wavenumber, density_floor=cfg.density_floor)
    trajs = trace_many(cfg.seed_positions(), cfg.grid(), field, midpoint=args.midpoint)
    path = outdir / "trajectories_unprojected.csv"
    io.write_trajectories(path, trajs)
    return [path]


def _steer_files(cfg, grid, seeds, thetas, outcome, z_switches, fields_for, unprojected, prefix, outdir):
    paths = []
    for z_req in z_switches:
        zs = _snap(grid, z_req)
        trajs = trace_many(seeds, grid, unprojected)
        for theta in thetas:
            before, after = fields_for(theta)
            trajs += trace_steered_many(seeds, grid, zs, before, after, label=(theta, outcome))
        path = outdir / f"{prefix}_z{zs:.3f}.csv"
        io.write_trajectories(path, trajs)
        paths.append(path)
    return paths


def cmd_steer(cfg, args, outdir: Path) -> list[Path]:
    grid = cfg.grid()
    outcome = Outcome.parse(args.outcome)
    thetas = args.theta or list(cfg.theta_list)
    z_switches = args.z_switch or list(cfg.z_switch_list)
    unprojected = VelocityField(cfg.split_state(), cfg.wavenumber, density_floor=cfg.density_floor)
    return _steer_files(cfg, grid, cfg.seed_positions(), thetas, outcome, z_switches,
                        lambda t: _analytic_fields(cfg, t, outcome), unprojected, "steer", outdir)


def cmd_velocity_map(cfg, args, outdir: Path) -> list[Path]:
    outcome = Outcome.parse(args.outcome)
    x, z = cfg.map_x(), cfg.grid().z
    paths = []
    for theta in args.theta or list(cfg.theta_list):
        dv = velocity_change_map(cfg.split_state(), x, z, ProjectionBasis.from_degrees(theta),
                                 outcome, cfg.wavenumber, density_floor=cfg.density_floor)
        path = outdir / f"velocity_map_theta{theta:g}_{outcome.value}.csv"
        io.write_map(path, x, z, dv)
        paths.append(path)
    return paths


def cmd_emulate(cfg, args, outdir: Path) -> list[Path]:
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    n = cfg.plane_count
    planes = range(n) if args.plane in (None, "all") else [int(args.plane)]
    outcome = Outcome.parse(args.outcome)
    states = labelled_states(cfg, [(t, outcome) for t in (args.theta or cfg.theta_list)])
    imgdir = outdir / "images"
    paths = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j in planes:
            if not 0 <= j < n:
                raise ConfigError(f"plane index {j} outside 0..{n - 1}")
            for label, (img_r, img_l) in emulate_plane(cfg, j, seed, states).items():
                for img in (img_r, img_l):
                    path = imgdir / f"plane{j:02d}_{label}_{img.port}.txt"
                    write_image(path, img)
                    paths.append(path)
    return paths


def load_image_set(imgdir: Path) -> dict[int, dict]:
    """{plane index: {label: (R, L)}} from an ``emulate`` output directory."""
    found: dict[int, dict] = {}
    for path in sorted(Path(imgdir).glob("plane*_*_[RL].txt")):
        stem = path.stem
        plane = int(stem[5:7])
        label = stem[8:-2]
        found.setdefault(plane, {}).setdefault(label, {})[stem[-1]] = read_image(path)
    if not found:
        raise FileNotFoundError(f"no detector images in {imgdir}")
    return {j: {lab: (d["R"], d["L"]) for lab, d in labels.items()} for j, labels in found.items()}


def cmd_reconstruct(cfg, args, outdir: Path) -> list[Path]:
    imgdir = Path(args.images) if args.images else outdir / "images"
    images = load_image_set(imgdir)
    model = cfg.coupling()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        recs = [reconstruct_plane(images[j], model, cfg.count_floor) for j in sorted(images)]
    labels = list(recs[0].profiles)
    fields = {lab: SampledVelocityField([r.profiles[lab] for r in recs], cfg.kernel_bandwidth_px)
              for lab in labels}
    paths = []
    for lab in labels:
        path = outdir / f"reconstructed_velocity_{lab}.csv"
        io.write_profiles(path, [r.profiles[lab] for r in recs])
        paths.append(path)
    grid = cfg.grid()
    if len(recs) != grid.z.size:
        _note("not every plane was emulated; trajectories skipped")
        return paths
    seeds = cfg.seed_positions()
    path = outdir / "reconstructed_trajectories_unprojected.csv"
    io.write_trajectories(path, trace_many(seeds, grid, fields["unprojected"]))
    paths.append(path)
    steered = [parse_steer_label(lab) for lab in labels if lab.startswith("theta")]
    for outcome in sorted({o for _, o in steered}, key=lambda o: o.value):
        thetas = [t for t, o in steered if o is outcome]
        paths += _steer_files(cfg, grid, seeds, thetas, outcome, cfg.z_switch_list,
                              lambda t: (fields["unprojected"], fields[steer_label(t, outcome)]),
                              fields["unprojected"], "reconstructed_steer", outdir)
    return paths


def cmd_calibrate(cfg, args, outdir: Path) -> list[Path]:
    seeds = args.seed or list(cfg.seeds)
    results = []
    for s in (seeds if args.photons else [None]):
        sweep = make_calibration_sweep(cfg.zeta, cfg.phi0, photons=args.photons, seed=s,
                                       principal_only=args.mode == "principal")
        results.append(calibrate_zeta(sweep, mode=args.mode))
    zeta = float(np.mean([r.model.zeta for r in results]))
    phi0 = float(np.mean([r.model.phi0 for r in results]))
    err = float(np.mean([r.zeta_stderr for r in results]))
    report = (f"zeta={zeta:.4f} zeta_stderr={err:.4g} phi0={phi0:.6f} "
              f"points={results[0].n_points} runs={len(results)} mode={args.mode}")
    print(report)
    path = outdir / "calibration.txt"
    io.atomic_write_text(path, report + "\n")
    return [path]


def cmd_render(cfg, args, outdir: Path) -> list[Path]:
    from .render import render_csv
    sources = [Path(p) for p in args.csv] or sorted(outdir.glob("*.csv"))
    return [render_csv(p, p.with_suffix(".svg")) for p in sources]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bohmsteer", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--outdir", default="out", help="output directory (default: out)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="unprojected trajectories")
    p.add_argument("--midpoint", action="store_true", help="midpoint velocity instead of left-plane Euler")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("steer", help="trajectories steered by a remote projection")
    p.add_argument("--theta", type=float, action="append", help="projection angle in degrees")
    p.add_argument("--outcome", default="Theta")
    p.add_argument("--z-switch", dest="z_switch", type=float, action="append")
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("velocity-map", help="velocity change caused by the projection")
    p.add_argument("--theta", type=float, action="append")
    p.add_argument("--outcome", default="Theta")
    p.set_defaults(func=cmd_velocity_map)

    p = sub.add_parser("emulate", help="synthetic detector images")
    p.add_argument("--plane", default="all", help="plane index or 'all'")
    p.add_argument("--seed", type=int)
    p.add_argument("--theta", type=float, action="append")
    p.add_argument("--outcome", default="Theta")
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("reconstruct", help="velocities and trajectories from detector images")
    p.add_argument("--images", help="image directory (default: OUTDIR/images)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("calibrate", help="coupling-strength calibration on a synthetic tilt sweep")
    p.add_argument("--photons", type=float, help="photons per sweep point (noiseless if omitted)")
    p.add_argument("--seed", type=int, action="append")
    p.add_argument("--mode", choices=("unwrap", "principal"), default="unwrap")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("render", help="SVG plots of CSV outputs")
    p.add_argument("csv", nargs="*")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for path in args.func(cfg, args, outdir):
            print(path)
    except Exception as exc:  # noqa: BLE001
        category = getattr(exc, "category", None) or {
            FileNotFoundError: "io", ValueError: "value"}.get(type(exc), "internal")
        message = " ".join(str(exc).split())
        print(f"error: {category}: {message}", file=sys.stderr)
        return 2 if category == "config" else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
