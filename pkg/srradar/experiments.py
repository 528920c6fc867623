"""Seeded recovery trials and SRF / SNR sweeps.

Every random draw comes from numpy.random.SeedSequence([seed, trial, purpose,
...]) so a trial's scene, probe and noise depend only on the master seed and
the trial number, never on worker scheduling.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import IO

import numpy as np

from .analysis import ConditionPoint
from .constants import REGION_GUARD, VERSION, ExperimentSpec
from .grid import FineGrid, snap_to_grid
from .mimo import (
    MimoConfig,
    MimoGrid,
    MimoScene,
    beta_error,
    mimo_resolution_error,
    random_probes,
    solve_l1_mimo,
    synthesize_mimo,
)
from .scenes import add_noise, default_box, noise_delta, sample_mimo_scene, sample_scene
from .signal import ProbingSignal, Scene, random_probing, synthesize
from .solver import SolverConfig, SparseSolution, extract_and_debias, resolution_error, solve_l1_err

logger = logging.getLogger(__name__)

PURPOSES = {"scene": 0, "probe": 1, "noise": 2}

SISO_COLUMNS = ["seed", "trial", "srf", "snr_db", "resolution_error", "iters", "status"]
MIMO_COLUMNS = ["seed", "trial", "n_t", "n_r", "srf", "snr_db", "resolution_error", "beta_error", "iters", "status"]


def trial_rng(seed: int, trial: int, purpose: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, PURPOSES[purpose], *extra]))


@dataclass(frozen=True)
class TrialResult:
    seed: int
    trial: int
    srf: float
    snr_db: float
    resolution_error: float
    iters: int
    status: str
    n_t: int = 1
    n_r: int = 1
    beta_error: float = float("nan")

    def row(self, mode: str) -> list:
        if mode == "mimo":
            return [self.seed, self.trial, self.n_t, self.n_r, self.srf, self.snr_db, self.resolution_error,
                    self.beta_error, self.iters, self.status]
        return [self.seed, self.trial, self.srf, self.snr_db, self.resolution_error, self.iters, self.status]


# ---------------------------------------------------------------------------
# Scene and probe per trial
# ---------------------------------------------------------------------------

def trial_scene(spec: ExperimentSpec, trial: int) -> Scene | MimoScene:
    rng = trial_rng(spec.seed, trial, "scene")
    srf_max = max(spec.srf_list)
    if spec.mode == "mimo":
        cfg = MimoConfig(spec.n_t, spec.n_r, spec.L)
        shape = MimoGrid.from_srf(cfg, srf_max).shape if spec.on_grid else None
        return sample_mimo_scene(cfg, spec.S, rng, box=spec.box, separation=spec.separation_policy,
                                 gain_kind=spec.gain_kind, grid_shape=shape)
    grid_K = FineGrid.from_srf(spec.L, srf_max).K if spec.on_grid else None
    return sample_scene(spec.L, spec.S, rng, box=spec.box, separation=spec.separation_policy,
                        gain_kind=spec.gain_kind, grid_K=grid_K)


def trial_probe(spec: ExperimentSpec, trial: int):
    rng = trial_rng(spec.seed, trial, "probe")
    if spec.mode == "mimo":
        return random_probes(MimoConfig(spec.n_t, spec.n_r, spec.L), rng, spec.probe_kind)
    return random_probing(spec.L, rng, spec.probe_kind)


# ---------------------------------------------------------------------------
# Single recoveries
# ---------------------------------------------------------------------------

def search_region(spec: ExperimentSpec) -> tuple[float, float] | None:
    """Grid region covering the sampling box plus a guard band, None for the whole torus."""
    side = default_box(spec.L) if spec.box is None else spec.box
    frac = side + REGION_GUARD / spec.L
    return None if frac >= 1.0 else (frac, frac)


def recover_siso(y: np.ndarray, x: ProbingSignal, srf: float, config: SolverConfig,
                 region: tuple[float, float] | None = None) -> SparseSolution:
    grid = FineGrid.from_srf(x.L, srf, region)
    sol = solve_l1_err(y, x, grid, config)
    return extract_and_debias(sol, x, grid, config.cluster_radius, config.support_threshold)


def run_trial(spec: ExperimentSpec, trial: int, config: SolverConfig) -> list[TrialResult]:
    """All (srf, snr) combinations of one trial, sharing scene, probe and noise."""
    scene = trial_scene(spec, trial)
    probe = trial_probe(spec, trial)
    if spec.mode == "mimo":
        cfg = scene.cfg
        clean = synthesize_mimo(probe, scene, cfg).y
    else:
        clean = synthesize(probe, scene).y

    results = []
    for snr_index, snr_db in enumerate(spec.snr_db_list):
        noisy, _ = add_noise(clean, snr_db, trial_rng(spec.seed, trial, "noise", snr_index))
        delta = noise_delta(clean, snr_db, spec.noiseless_rel_residual)
        solver = replace(config, delta=delta)
        for srf in spec.srf_list:
            if spec.mode == "mimo":
                sol = solve_l1_mimo(noisy, probe, cfg, MimoGrid.from_srf(cfg, srf), solver)
                err = mimo_resolution_error(sol.estimates, scene.scatterers, cfg)
                b_err = beta_error(sol.estimates, scene.scatterers, cfg)
                results.append(TrialResult(spec.seed, trial, srf, snr_db, err, sol.iters, sol.status.value,
                                           spec.n_t, spec.n_r, b_err))
            else:
                sol = recover_siso(noisy, probe, srf, solver, search_region(spec))
                err = resolution_error(sol.estimates, scene.scatterers, spec.L)
                results.append(TrialResult(spec.seed, trial, srf, snr_db, err, sol.iters, sol.status.value))
            logger.info("trial %d srf %g snr %g: error %.4g (%s)", trial, srf, snr_db, err, sol.status.value)
    return results


def _run_trial_args(args) -> list[TrialResult]:
    return run_trial(*args)


def run_sweep(spec: ExperimentSpec, config: SolverConfig = SolverConfig(), workers: int = 1) -> list[TrialResult]:
    """Run every trial, in a process pool when workers > 1, sorted by (trial, srf, snr)."""
    jobs = [(spec, t, config) for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_trial_args, jobs))
    else:
        batches = [_run_trial_args(job) for job in jobs]
    rows = [r for batch in batches for r in batch]
    return sorted(rows, key=lambda r: (r.trial, r.srf, r.snr_db))


def mean_error_by_srf(results: list[TrialResult], snr_db: float) -> dict[float, float]:
    """Average resolution error per SRF at one SNR, ignoring unmatched trials."""
    out = {}
    for srf in sorted({r.srf for r in results}):
        vals = [r.resolution_error for r in results
                if r.srf == srf and (r.snr_db == snr_db or (math.isinf(r.snr_db) and math.isinf(snr_db)))]
        vals = [v for v in vals if not math.isnan(v)]
        out[srf] = float(np.mean(vals)) if vals else float("nan")
    return out


def snap_scene(scene: Scene, K: int) -> Scene:
    """Nearest K-grid rounding of every scatterer, the quantization baseline."""
    return Scene(tuple(type(s)(s.b, float(snap_to_grid(s.tau, K)), float(snap_to_grid(s.nu, K)))
                       for s in scene.scatterers), scene.L)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _header(fh: IO[str]) -> None:
    fh.write(f"# srradar {VERSION}\n")


def write_sweep_csv(fh: IO[str], results: list[TrialResult], mode: str) -> None:
    _header(fh)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(MIMO_COLUMNS if mode == "mimo" else SISO_COLUMNS)
    for r in results:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in r.row(mode)])


def write_condition_csv(fh: IO[str], points: list[ConditionPoint]) -> None:
    _header(fh)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["s", "eps", "inv_kappa"])
    for p in points:
        writer.writerow([p.s, repr(p.eps), repr(p.inv_kappa)])
