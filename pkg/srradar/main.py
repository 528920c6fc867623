#!/usr/bin/env python3
"""srradar command line: scenes, recovery, sweeps, certificates, conditioning.

Run:
    srradar gen-scene --L 201 --S 10 --seed 1 --out scene.json
    srradar solve --scene scene.json --srf 4 --snr-db 30
    srradar sweep-srf --preset siso-paper --workers 4 --out sweep.csv
    srradar certify --L 31 --S 2 --seed 3
    srradar condnum --L 200 --S 2 4 8 16 32
    srradar mimo-sim --nt 3 --nr 3 --L 41 --S 5 --seed 0 --out y.csv

Data products go to --out (stdout by default); logs and error JSON go to
stderr. Exit status is 1 on errors and 2 when a solver or certificate
reports a non-success status.
"""

import argparse
import contextlib
import dataclasses
import json
import logging
import math
import sys

import numpy as np

from .analysis import condition_sweep
from .certify import build_certificate, verify_certificate
from .constants import (
    CERTIFICATE_GRID,
    CONDITION_EPS_POINTS,
    CONDITION_L,
    CONDITION_S_VALUES,
    NOISELESS_RELATIVE_RESIDUAL,
    PRESETS,
    ExperimentSpec,
)
from .errors import SuperResolutionError
from .experiments import (
    recover_siso,
    run_sweep,
    trial_probe,
    trial_rng,
    trial_scene,
    write_condition_csv,
    write_sweep_csv,
)
from .mimo import MimoGrid, MimoScene, mimo_resolution_error, random_probes, solve_l1_mimo, synthesize_mimo
from .scenes import add_noise, noise_delta, read_scene, sample_scene, write_measurement_csv, write_scene
from .signal import random_probing, synthesize
from .solver import SolverConfig, SolverStatus, resolution_error

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

logger = logging.getLogger("srradar")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _emit_error(name: str, operation, message: str) -> None:
    print(json.dumps({"error": name, "operation": operation, "message": message}), file=sys.stderr)


class CliParser(argparse.ArgumentParser):
    """Reports usage errors as an error JSON object instead of argparse text."""

    def error(self, message):
        _, _, command = self.prog.partition(" ")
        _emit_error("ArgumentError", command or None, message)
        sys.exit(EXIT_ERROR)


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _emit_json(obj, path=None) -> None:
    with _output(path) as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _spec_from_args(args) -> ExperimentSpec:
    spec = PRESETS[args.preset] if getattr(args, "preset", None) else ExperimentSpec()
    overrides = {
        "mode": args.mode,
        "L": args.L,
        "n_t": args.nt,
        "n_r": args.nr,
        "S": args.S,
        "srf_list": tuple(args.srf) if args.srf else None,
        "snr_db_list": tuple(args.snr_db) if args.snr_db else None,
        "trials": getattr(args, "trials", None),
        "seed": args.seed,
        "separation_policy": args.separation,
        "box": args.box,
        "probe_kind": args.probe_kind,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.mode == "siso" and args.nt is None and args.nr is None:
        overrides.update(n_t=1, n_r=1)
    return dataclasses.replace(spec, **overrides)


def _solver_config(args, delta: float = 0.0) -> SolverConfig:
    kwargs = {"delta": delta}
    if args.max_iters is not None:
        kwargs["max_iters"] = args.max_iters
    if args.tol is not None:
        kwargs["tol"] = args.tol
    return SolverConfig(**kwargs)


def _not_converged(summary: dict) -> int:
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_scene(args) -> int:
    spec = _spec_from_args(args)
    scene = trial_scene(spec, 0)
    with _output(args.out) as fh:
        write_scene(fh, scene, seed=spec.seed, probe_kind=spec.probe_kind)
    logger.info("wrote scene with %d scatterers", scene.S)
    return EXIT_OK


def cmd_solve(args) -> int:
    with open(args.scene, encoding="utf-8") as fh:
        scene, seed, probe_kind = read_scene(fh)
    srf = args.srf[0] if args.srf else 1.0
    snr_db = args.snr_db[0] if args.snr_db else math.inf
    probe_rng = trial_rng(seed, 0, "probe")

    if isinstance(scene, MimoScene):
        cfg = scene.cfg
        probes = random_probes(cfg, probe_rng, probe_kind)
        clean = synthesize_mimo(probes, scene, cfg).y
    else:
        x = random_probing(scene.L, probe_rng, probe_kind)
        clean = synthesize(x, scene).y

    noisy, _ = add_noise(clean, snr_db, trial_rng(seed, 0, "noise", 0))
    delta = args.delta if args.delta is not None else noise_delta(clean, snr_db, NOISELESS_RELATIVE_RESIDUAL)
    config = _solver_config(args, delta)

    if isinstance(scene, MimoScene):
        sol = solve_l1_mimo(noisy, probes, cfg, MimoGrid.from_srf(cfg, srf), config)
        err = mimo_resolution_error(sol.estimates, scene.scatterers, cfg)
    else:
        sol = recover_siso(noisy, x, srf, config)
        err = resolution_error(sol.estimates, scene.scatterers, scene.L)

    _emit_json(sol.to_dict(resolution_error=err), args.out)
    if sol.status is not SolverStatus.CONVERGED:
        return _not_converged({"status": sol.status.value, "iters": sol.iters})
    return EXIT_OK


def cmd_sweep_srf(args) -> int:
    spec = _spec_from_args(args)
    results = run_sweep(spec, _solver_config(args), workers=args.workers)
    with _output(args.out) as fh:
        write_sweep_csv(fh, results, spec.mode)
    failed = [r for r in results if r.status != SolverStatus.CONVERGED.value]
    if failed:
        return _not_converged({"rows": len(results), "not_converged": len(failed)})
    return EXIT_OK


def cmd_certify(args) -> int:
    L = args.L or 31
    S = args.S or 2
    seed = args.seed if args.seed is not None else 0
    scene = sample_scene(L, S, trial_rng(seed, 0, "scene"), box=1.0, gain_kind="circle")
    x = random_probing(L, trial_rng(seed, 0, "probe"), args.probe_kind or "gaussian")
    nodes = [(s.tau, s.nu) for s in scene.scatterers]
    cert = build_certificate(x, nodes, scene.gains)
    report = verify_certificate(cert, args.grid_size)
    out = report.to_dict()
    out.update(status=cert.status.value, condition_number=cert.condition_number,
               nodes=[list(n) for n in nodes])
    _emit_json(out, args.out)
    if not report.passed:
        return _not_converged({"status": cert.status.value, "pass": False})
    return EXIT_OK


def cmd_condnum(args) -> int:
    L = args.L or CONDITION_L
    s_values = args.S or CONDITION_S_VALUES
    eps = np.linspace(0.0, 0.95, args.eps_points)
    with _output(args.out) as fh:
        write_condition_csv(fh, condition_sweep(L, s_values, eps))
    return EXIT_OK


def cmd_mimo_sim(args) -> int:
    args.mode = "mimo"
    spec = _spec_from_args(args)
    if args.scene:
        with open(args.scene, encoding="utf-8") as fh:
            scene, seed, probe_kind = read_scene(fh)
        if not isinstance(scene, MimoScene):
            raise SuperResolutionError("mimo-sim", "scene file has no n_t / n_r header")
        spec = dataclasses.replace(spec, seed=seed, probe_kind=probe_kind, L=scene.L,
                                   n_t=scene.cfg.n_t, n_r=scene.cfg.n_r)
    else:
        scene = trial_scene(spec, 0)
    probes = trial_probe(spec, 0)
    clean = synthesize_mimo(probes, scene, scene.cfg)
    snr_db = spec.snr_db_list[0]
    noisy, _ = add_noise(clean.y, snr_db, trial_rng(spec.seed, 0, "noise", 0))
    if args.scene_out:
        with open(args.scene_out, "w", encoding="utf-8") as fh:
            write_scene(fh, scene, seed=spec.seed, probe_kind=spec.probe_kind)
    with _output(args.out) as fh:
        write_measurement_csv(fh, dataclasses.replace(clean, y=noisy))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--L", type=int, help="samples per antenna (odd)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--probe-kind", choices=["gaussian", "signs", "complex"])
    common.add_argument("-v", "--verbose", action="count", default=0)

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--preset", choices=sorted(PRESETS))
    experiment.add_argument("--mode", choices=["siso", "mimo"])
    experiment.add_argument("--nt", type=_positive_int, help="transmit antennas")
    experiment.add_argument("--nr", type=_positive_int, help="receive antennas")
    experiment.add_argument("--S", type=int, help="scatterers per scene")
    experiment.add_argument("--srf", type=float, nargs="+", help="super-resolution factors")
    experiment.add_argument("--snr-db", type=float, nargs="+", help="power SNRs in dB, 'inf' for noiseless")
    experiment.add_argument("--separation", choices=["enforce", "free"])
    experiment.add_argument("--box", type=float, help="side of the (tau, nu) sampling box")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--delta", type=float, help="squared residual bound")
    solver.add_argument("--max-iters", type=_positive_int)
    solver.add_argument("--tol", type=float)

    parser = CliParser(prog="srradar", description="Super-resolution radar toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", parents=[common, experiment], help="sample a scene file")
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("solve", parents=[common, experiment, solver], help="recover a scene file")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-srf", parents=[common, experiment, solver], help="resolution error versus SRF")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep_srf)

    p = sub.add_parser("certify", parents=[common], help="build and verify a dual certificate")
    p.add_argument("--S", type=int)
    p.add_argument("--grid-size", type=_positive_int, default=CERTIFICATE_GRID)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("condnum", parents=[common], help="Vandermonde conditioning study")
    p.add_argument("--S", type=_positive_int, nargs="+")
    p.add_argument("--eps-points", type=_positive_int, default=CONDITION_EPS_POINTS)
    p.set_defaults(func=cmd_condnum)

    p = sub.add_parser("mimo-sim", parents=[common, experiment], help="synthesize MIMO measurements")
    p.add_argument("--scene", help="MIMO scene JSON (default: sample one)")
    p.add_argument("--scene-out", help="also write the scene JSON here")
    p.set_defaults(func=cmd_mimo_sim)
    return parser


def main(argv=None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    try:
        code = args.func(args)
    except (SuperResolutionError, ValueError, OSError) as exc:
        _emit_error(type(exc).__name__, getattr(exc, "operation", None), str(exc))
        code = EXIT_ERROR
    sys.exit(code)


if __name__ == "__main__":
    main()
