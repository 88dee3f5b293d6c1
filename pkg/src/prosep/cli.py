"""Command-line front end: simulate, reconstruct, analyze, metrics.

All experiment parameters live in a JSON run configuration (every field
has a default, so flags alone suffice); ``manifest.json`` written next to
the outputs records the fully resolved configuration and is enough to
replay the run bit-for-bit.  Arrays are exchanged as binary tensor files
(see ``tensorio``), tables as CSV.

Exit codes: 0 success, 1 configuration or I/O error, 2 solver stopped at
the iteration cap without reaching its tolerance.

The environment variable ``PROSEP_THREADS`` caps the worker count used
for the per-frame FBP loops.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import analysis
from .errors import ProsepError
from .phantom import (
    Ellipse,
    MotionSpec,
    PhantomSpec,
    TimeSequentialSinogram,
    benchmark_movie,
    render_movie,
    simulate_acquisition,
)
from .psmodel import HarmonicOrder, spline_interpolator
from .radon import DetectorGrid
from .recon import ProSepSolution, movie_metrics, reconstruct_movie
from .sampling import AngularScheme, bit_reversed, progressive, random_scheme, span_for
from .solver import SolverConfig, solve
from .tensorio import read_tensor, write_tensor

# hyperparameter presets (P, K, N, d) for the two symmetry modes
PRESETS = {
    "p256": {"P": 256, "K": 3, "N": 24, "d": 4, "symmetric": False},
    "p256-symm": {"P": 256, "K": 5, "N": 30, "d": 6, "symmetric": True},
    "p512": {"P": 512, "K": 5, "N": 28, "d": 6, "symmetric": False},
    "p512-symm": {"P": 512, "K": 7, "N": 48, "d": 8, "symmetric": True},
    "p1024": {"P": 1024, "K": 7, "N": 48, "d": 8, "symmetric": False},
    "p1024-symm": {"P": 1024, "K": 9, "N": 56, "d": 10, "symmetric": True},
}

DEFAULT_CONFIG = {
    "grid": {"width": 64, "support_diameter": 2.0},
    "phantom": "example",
    "motion": {"translation": [0.06875, -0.0625], "rotation": 0.19634954084936207,
               "scaling": [0.05, -0.04]},
    "P": 256,
    "scheme": {"kind": "bit_reversed", "seed": 0},
    "symmetric": True,
    "model": {"K": 5, "N": 30, "d": 6},
    "detector": {"count": None, "spacing": None},
    "noise_sigma": 0.0,
    "seed": 0,
    "fbp_angles_count": None,
    "solver": {
        "max_iters": 5000,
        "step_size": 0.2,
        "penalty_weight": 1.0,
        "tol_rel_objective": 1e-9,
        "restarts": 5,
        "seed": 0,
        "pinv_rank_rtol": 1e-10,
    },
}


class ConfigError(ProsepError):
    """Invalid run configuration; the message names the offending field."""


def worker_count() -> int:
    raw = os.environ.get("PROSEP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_text_atomic(path, text: str) -> None:
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, os.fspath(path))


def _deep_update(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None = None, preset: str | None = None,
                overrides: dict | None = None, force: bool = False) -> dict:
    """Resolve the run configuration from defaults, file, preset, and flags."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as f:
                cfg = _deep_update(cfg, json.load(f))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"field 'preset': unknown preset {preset!r} (choose from {sorted(PRESETS)})"
            )
        p = PRESETS[preset]
        cfg["P"] = p["P"]
        cfg["symmetric"] = p["symmetric"]
        cfg["model"] = {"K": p["K"], "N": p["N"], "d": p["d"]}
    if overrides:
        cfg = _deep_update(cfg, overrides)
    _validate_config(cfg, force=force)
    return cfg


def _validate_config(cfg: dict, force: bool = False) -> None:
    def need(cond, field, msg):
        if not cond:
            raise ConfigError(f"field {field!r}: {msg}")

    grid = cfg.get("grid", {})
    need(isinstance(grid.get("width"), int) and grid["width"] >= 8, "grid.width",
         "must be an integer >= 8")
    need(grid.get("support_diameter", 0) > 0, "grid.support_diameter", "must be positive")
    need(isinstance(cfg.get("P"), int) and cfg["P"] >= 2, "P", "must be an integer >= 2")
    kind = cfg.get("scheme", {}).get("kind")
    need(kind in ("progressive", "random", "bit_reversed"), "scheme.kind",
         "must be progressive | random | bit_reversed")
    if kind == "bit_reversed":
        need(cfg["P"] & (cfg["P"] - 1) == 0, "P", "must be a power of two for bit_reversed")
    model = cfg.get("model", {})
    for key in ("K", "N", "d"):
        need(isinstance(model.get(key), int) and model[key] >= 0, f"model.{key}",
             "must be a nonnegative integer")
    need(model["d"] >= model["K"] + 1, "model.d", "must be at least K + 1")
    need(cfg.get("noise_sigma", 0) >= 0, "noise_sigma", "must be nonnegative")
    cols = (2 * model["N"] + 1) * (model["K"] + 1)
    if 2 * cfg["P"] < cols and not force:
        raise ConfigError(
            f"field 'model': 2P = {2 * cfg['P']} < (2N+1)(K+1) = {cols}; the model is "
            "not recoverable (pass --force to proceed anyway)"
        )


def _phantom_from_config(cfg: dict) -> PhantomSpec:
    grid = cfg["grid"]
    width = grid["width"]
    diameter = grid["support_diameter"]
    ph = cfg["phantom"]
    if ph == "example":
        from .phantom import example_phantom

        return example_phantom(width=width, support_diameter=diameter)
    if isinstance(ph, str):
        try:
            with open(ph) as f:
                ph = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"field 'phantom': file not found: {ph}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"field 'phantom': not valid JSON: {e}")
    try:
        ells = tuple(
            Ellipse(
                center=tuple(e["center"]),
                semi_axes=tuple(e["semi_axes"]),
                angle=float(e.get("angle", 0.0)),
                intensity=float(e.get("intensity", 1.0)),
            )
            for e in ph["ellipses"]
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"field 'phantom.ellipses': {e}")
    return PhantomSpec(ellipses=ells, width=width, pixel_size=diameter / width)


def _motion_from_config(cfg: dict) -> MotionSpec:
    m = cfg["motion"]
    try:
        return MotionSpec(
            translation=tuple(m.get("translation", (0.0, 0.0))),
            rotation=float(m.get("rotation", 0.0)),
            scaling=tuple(m.get("scaling", (0.0, 0.0))),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"field 'motion': {e}")


def _scheme_from_config(cfg: dict) -> AngularScheme:
    span = span_for(cfg["symmetric"])
    kind = cfg["scheme"]["kind"]
    if kind == "progressive":
        return progressive(cfg["P"], span)
    if kind == "bit_reversed":
        return bit_reversed(cfg["P"], span)
    return random_scheme(cfg["P"], span, seed=int(cfg["scheme"].get("seed", 0) or 0))


def _detector_from_config(cfg: dict) -> DetectorGrid:
    grid = cfg["grid"]
    pixel = grid["support_diameter"] / grid["width"]
    det = cfg.get("detector", {})
    count = det.get("count") or grid["width"] + 1
    spacing = det.get("spacing") or pixel
    return DetectorGrid(count=count, spacing=spacing)


def _solver_config(cfg: dict) -> SolverConfig:
    s = cfg["solver"]
    try:
        return SolverConfig(
            max_iters=int(s["max_iters"]),
            step_size=float(s["step_size"]),
            penalty_weight=float(s["penalty_weight"]),
            tol_rel_objective=float(s["tol_rel_objective"]),
            restarts=int(s["restarts"]),
            seed=int(s["seed"]),
            pinv_rank_rtol=float(s["pinv_rank_rtol"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"field 'solver': {e}")


def _resolved_manifest(cfg: dict, spec: PhantomSpec) -> dict:
    manifest = copy.deepcopy(cfg)
    manifest["phantom"] = {
        "ellipses": [
            {
                "center": list(e.center),
                "semi_axes": list(e.semi_axes),
                "angle": e.angle,
                "intensity": e.intensity,
            }
            for e in spec.ellipses
        ]
    }
    if manifest["fbp_angles_count"] is None:
        manifest["fbp_angles_count"] = cfg["P"]
    manifest["detector"] = {
        "count": _detector_from_config(cfg).count,
        "spacing": _detector_from_config(cfg).spacing,
    }
    manifest["format_version"] = 1
    return manifest


# ------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    overrides = {}
    if args.P is not None:
        overrides["P"] = args.P
    if args.scheme is not None:
        overrides.setdefault("scheme", {})["kind"] = args.scheme
    if args.scheme_seed is not None:
        overrides.setdefault("scheme", {})["seed"] = args.scheme_seed
    if args.symmetric is not None:
        overrides["symmetric"] = args.symmetric == "on"
    if args.noise_sigma is not None:
        overrides["noise_sigma"] = args.noise_sigma
    if args.seed is not None:
        overrides["seed"] = args.seed
    for key in ("K", "N", "d"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.setdefault("model", {})[key] = val
    if args.width is not None:
        overrides.setdefault("grid", {})["width"] = args.width

    cfg = load_config(args.config, args.preset, overrides, force=args.force)
    spec = _phantom_from_config(cfg)
    motion = _motion_from_config(cfg)
    scheme = _scheme_from_config(cfg)
    detector = _detector_from_config(cfg)
    workers = worker_count()

    data = simulate_acquisition(
        spec, motion, scheme, detector,
        noise_sigma=cfg["noise_sigma"], seed=cfg["seed"],
    )
    fbp_count = cfg["fbp_angles_count"] or cfg["P"]
    truth = render_movie(spec, motion, cfg["P"], workers=workers)
    bench = benchmark_movie(spec, motion, cfg["P"], fbp_count, detector=detector,
                            workers=workers)

    out = args.out
    os.makedirs(out, exist_ok=True)
    write_tensor(os.path.join(out, "sinogram.tensor"), data.values)
    write_tensor(os.path.join(out, "angles.tensor"), scheme.angles)
    write_tensor(os.path.join(out, "times.tensor"), data.times)
    write_tensor(os.path.join(out, "truth_movie.tensor"), truth.as_array())
    write_tensor(os.path.join(out, "benchmark_movie.tensor"), bench.as_array())
    manifest = _resolved_manifest(cfg, spec)
    _write_text_atomic(
        os.path.join(out, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    print(f"simulate: wrote {out} (J={detector.count}, P={cfg['P']})")
    return 0


def _load_manifest(indir: str) -> dict:
    path = os.path.join(indir, "manifest.json")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as f:
        return json.load(f)


def cmd_reconstruct(args) -> int:
    indir = args.input
    manifest = _load_manifest(indir)
    sino = read_tensor(os.path.join(indir, "sinogram.tensor"))
    angles = read_tensor(os.path.join(indir, "angles.tensor"))

    model_cfg = dict(manifest["model"])
    for key in ("K", "N", "d"):
        val = getattr(args, key, None)
        if val is not None:
            model_cfg[key] = val
    symmetric = manifest["symmetric"] if args.symmetric is None else args.symmetric == "on"
    solver_cfg = dict(manifest["solver"])
    for key in ("max_iters", "step_size", "restarts", "seed", "penalty_weight"):
        val = getattr(args, f"solver_{key}", None)
        if val is not None:
            solver_cfg[key] = val

    P = manifest["P"]
    span = span_for(symmetric)
    if np.any(angles >= span):
        raise ConfigError(
            "field 'symmetric': acquired angles exceed [0, pi); the data was "
            "simulated without the half-turn symmetry"
        )
    scheme = AngularScheme(angles=angles, span=span, kind=manifest["scheme"]["kind"])
    detector = DetectorGrid(**manifest["detector"])
    data = TimeSequentialSinogram(values=sino, scheme=scheme, detector=detector)
    order = HarmonicOrder(N=model_cfg["N"], K=model_cfg["K"], d=model_cfg["d"])
    U = spline_interpolator(P, order.d)
    config = _solver_config({"solver": solver_cfg})

    Z, beta, report = solve(data, order, U, config, symmetric=symmetric)
    solution = ProSepSolution(
        Z=Z, U=U, beta=beta, model=order, scheme=scheme, detector=detector,
        times=data.times, symmetric=symmetric,
    )
    width = manifest["grid"]["width"]
    pixel = manifest["grid"]["support_diameter"] / width
    movie = reconstruct_movie(
        solution, fbp_angles_count=manifest["fbp_angles_count"],
        width=width, pixel_size=pixel, workers=worker_count(),
    )

    out = args.out or indir
    os.makedirs(out, exist_ok=True)
    write_tensor(os.path.join(out, "Z.tensor"), Z)
    write_tensor(os.path.join(out, "beta.tensor"), beta.beta)
    write_tensor(os.path.join(out, "psi.tensor"), U @ Z)
    write_tensor(os.path.join(out, "movie.tensor"), movie.as_array())
    trace_lines = ["iter,objective,incumbent"]
    for i, (raw, inc) in enumerate(zip(report.raw_objective_trace, report.objective_trace)):
        trace_lines.append(f"{i},{float(raw)!r},{float(inc)!r}")
    _write_text_atomic(os.path.join(out, "solver_report.csv"), "\n".join(trace_lines) + "\n")
    summary = {
        "final_objective": report.final_objective,
        "final_orthonormality_defect": report.final_orthonormality_defect,
        "chosen_restart": report.chosen_restart,
        "iterations_used": report.iterations_used,
        "converged": report.converged,
        "restart_objectives": report.restart_objectives,
        "aborted_restarts": report.aborted_restarts,
        "model": model_cfg,
        "symmetric": symmetric,
    }
    _write_text_atomic(
        os.path.join(out, "solver_report.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    print(
        f"reconstruct: objective {report.final_objective:.3e}, "
        f"{'converged' if report.converged else 'iteration cap reached'}"
    )
    return 0 if report.converged else 2


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and np.isinf(x):
        return "inf"
    return repr(x) if isinstance(x, float) else str(x)


def cmd_analyze(args) -> int:
    out = args.out
    os.makedirs(out, exist_ok=True)
    wrote = []
    if args.table1:
        rows = analysis.table1(
            P=args.P or 512, K=args.K if args.K is not None else 5,
            N=args.N if args.N is not None else 28,
            random_trials=args.trials or 1000, seed=args.seed or 0,
            d=args.d if args.d is not None else 8, J=args.J or 128,
        )
        lines = ["quantity,scheme,symmetric,value"]
        for r in rows[:6]:
            lines.append(f"kappa_L1,{r.scheme_kind},{int(r.symmetric)},{_fmt(r.kappa_L1)}")
        lines.append(f"kappa_L2,{rows[6].scheme_kind},{int(rows[6].symmetric)},{_fmt(rows[6].kappa_L2)}")
        _write_text_atomic(os.path.join(out, "table1.csv"), "\n".join(lines) + "\n")
        wrote.append("table1.csv")
    if args.thm2:
        P = args.P or 64
        K = args.K if args.K is not None else 2
        N = args.N if args.N is not None else 10
        trials = args.trials or 100
        passes = analysis.rank_check_L1(P=P, K=K, N=N, trials=trials, seed=args.seed or 0)
        lines = [
            "P,K,N,trials,full_rank_passes",
            f"{P},{K},{N},{trials},{passes}",
        ]
        _write_text_atomic(os.path.join(out, "thm2.csv"), "\n".join(lines) + "\n")
        wrote.append("thm2.csv")
    if args.thm3:
        trials = args.trials or 100
        passes, worst = analysis.theorem3_sweep(trials=trials, seed=args.seed or 0)
        lines = [
            "trials,bound_satisfied,worst_ratio",
            f"{trials},{passes},{worst!r}",
        ]
        _write_text_atomic(os.path.join(out, "thm3.csv"), "\n".join(lines) + "\n")
        wrote.append("thm3.csv")
    if args.bounds:
        B = args.bandwidth if args.bandwidth is not None else 1.0
        cmax = args.cmax if args.cmax is not None else 1.0
        L = args.L if args.L is not None else 1.0
        tmax = args.thetamax if args.thetamax is not None else 1.0
        kmax = args.kmax if args.kmax is not None else 12
        lines = ["K,translation_bound,rotation_bound"]
        for K in range(kmax + 1):
            tb = analysis.translation_bound(
                analysis.MotionBoundSpec(B=B, c_max=cmax, K=K)
            )
            rb = analysis.rotation_bound(
                analysis.MotionBoundSpec(B=B, L=L, theta_max=tmax, K=K)
            )
            lines.append(f"{K},{tb!r},{rb!r}")
        _write_text_atomic(os.path.join(out, "bounds.csv"), "\n".join(lines) + "\n")
        wrote.append("bounds.csv")
    if not wrote:
        print("analyze: nothing to do (pass --table1 / --thm2 / --thm3 / --bounds)",
              file=sys.stderr)
        return 1
    print(f"analyze: wrote {', '.join(wrote)} in {out}")
    return 0


def cmd_metrics(args) -> int:
    movie_arr = read_tensor(args.movie)
    bench_arr = read_tensor(args.benchmark)
    if movie_arr.shape != bench_arr.shape or movie_arr.ndim != 3:
        print(
            f"metrics: dimension mismatch {movie_arr.shape} vs {bench_arr.shape}",
            file=sys.stderr,
        )
        return 1
    from .phantom import Movie
    from .radon import Frame

    P = movie_arr.shape[0]
    times = np.arange(P) / P
    movie = Movie(frames=tuple(Frame(values=v) for v in movie_arr), times=times)
    bench = Movie(frames=tuple(Frame(values=v) for v in bench_arr), times=times)
    rows, summary = movie_metrics(movie, bench)
    lines = ["frame,psnr,ssim,mae"]
    for p, r in enumerate(rows):
        lines.append(f"{p},{r.psnr!r},{r.ssim!r},{r.mae!r}")
    lines.append(f"average,{summary.psnr!r},{summary.ssim!r},{summary.mae!r}")
    _write_text_atomic(args.out, "\n".join(lines) + "\n")
    print(f"metrics: average PSNR {summary.psnr:.2f} dB, SSIM {summary.ssim:.4f}, "
          f"MAE {summary.mae:.4g}")
    return 0


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prosep",
        description="Dynamic tomography with a projection-domain separable model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a time-sequential acquisition")
    sim.add_argument("--config", help="JSON run configuration")
    sim.add_argument("--preset", choices=sorted(PRESETS), help="hyperparameter preset")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--P", type=int, help="number of views / time samples")
    sim.add_argument("--scheme", choices=["progressive", "random", "bit_reversed"])
    sim.add_argument("--scheme-seed", type=int, dest="scheme_seed")
    sim.add_argument("--symmetric", choices=["on", "off"])
    sim.add_argument("--K", type=int)
    sim.add_argument("--N", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--width", type=int, help="grid width in pixels")
    sim.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--force", action="store_true",
                     help="allow 2P < (2N+1)(K+1)")
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("reconstruct", help="solve and rebuild the movie")
    rec.add_argument("--input", required=True, help="directory written by simulate")
    rec.add_argument("--out", help="output directory (default: input dir)")
    rec.add_argument("--K", type=int)
    rec.add_argument("--N", type=int)
    rec.add_argument("--d", type=int)
    rec.add_argument("--symmetric", choices=["on", "off"])
    rec.add_argument("--solver-max-iters", type=int, dest="solver_max_iters")
    rec.add_argument("--solver-step-size", type=float, dest="solver_step_size")
    rec.add_argument("--solver-restarts", type=int, dest="solver_restarts")
    rec.add_argument("--solver-seed", type=int, dest="solver_seed")
    rec.add_argument("--solver-penalty-weight", type=float, dest="solver_penalty_weight")
    rec.set_defaults(func=cmd_reconstruct)

    ana = sub.add_parser("analyze", help="conditioning studies and bound tables")
    ana.add_argument("--out", required=True, help="output directory")
    ana.add_argument("--table1", action="store_true")
    ana.add_argument("--thm2", action="store_true")
    ana.add_argument("--thm3", action="store_true")
    ana.add_argument("--bounds", action="store_true")
    ana.add_argument("--P", type=int)
    ana.add_argument("--K", type=int)
    ana.add_argument("--N", type=int)
    ana.add_argument("--d", type=int)
    ana.add_argument("--J", type=int)
    ana.add_argument("--trials", type=int)
    ana.add_argument("--seed", type=int)
    ana.add_argument("--bandwidth", type=float, help="spatial bandwidth B")
    ana.add_argument("--cmax", type=float, help="max translation")
    ana.add_argument("--L", type=float, help="support radius")
    ana.add_argument("--thetamax", type=float, help="max rotation angle")
    ana.add_argument("--kmax", type=int, help="largest truncation order in the table")
    ana.set_defaults(func=cmd_analyze)

    met = sub.add_parser("metrics", help="PSNR/SSIM/MAE of a movie vs the benchmark")
    met.add_argument("--movie", required=True, help="movie tensor file")
    met.add_argument("--benchmark", required=True, help="benchmark movie tensor file")
    met.add_argument("--out", default="metrics.csv", help="output CSV path")
    met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProsepError, FileNotFoundError, NotADirectoryError) as e:
        print(f"prosep {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
