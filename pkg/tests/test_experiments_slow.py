"""Experiment-scale acceptance runs.

Requires: SRRADAR_SLOW=1

These solve hundreds of problems each and take minutes. They check the
qualitative claims the toolkit is built around: exact on-grid recovery,
the resolution gain from a finer grid, certificate existence and the MIMO
desk-scale behaviour.
"""

import io
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from srradar.analysis import wrap_distance
from srradar.certify import CertificateStatus, build_certificate, discrete_certificate, isotropy_check, verify_certificate
from srradar.constants import PRESETS
from srradar.experiments import (
    mean_error_by_srf,
    recover_siso,
    run_sweep,
    snap_scene,
    trial_probe,
    trial_rng,
    trial_scene,
    write_sweep_csv,
)
from srradar.grid import FineGrid
from srradar.mimo import MimoGrid, mimo_resolution_error, solve_l1_mimo, synthesize_mimo
from srradar.scenes import sample_scene
from srradar.signal import random_probing, synthesize
from srradar.solver import SolverConfig, SolverStatus, extract_and_debias, resolution_error, solve_l1


def _exact(estimates, scatterers, tol=1e-6) -> bool:
    """Every scatterer has an estimate at its location with matching gain."""
    if len(estimates) != len(scatterers):
        return False
    for s in scatterers:
        d = [max(wrap_distance(e.tau, s.tau), wrap_distance(e.nu, s.nu), wrap_distance(e.beta or 0.0,
                 getattr(s, "beta", 0.0))) for e in estimates]
        best = estimates[int(np.argmin(d))]
        if min(d) > tol or abs(best.b - s.b) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# SISO
# ---------------------------------------------------------------------------

def test_on_grid_exact_recovery(slow):
    spec = PRESETS["siso-onset"]
    hits = 0
    start = time.perf_counter()
    for trial in range(spec.trials):
        scene = trial_scene(spec, trial)
        x = trial_probe(spec, trial)
        sol = recover_siso(synthesize(x, scene).y, x, 2.0, SolverConfig())
        assert sol.status is SolverStatus.CONVERGED, f"trial {trial}: {sol.status.value} after {sol.iters}"
        hits += _exact(sol.estimates, scene.scatterers)
    assert hits >= 95
    assert time.perf_counter() - start < 120


def test_srf_benefit(slow):
    start = time.perf_counter()
    rows = run_sweep(PRESETS["siso-paper"], workers=4)
    assert time.perf_counter() - start < 30 * 60
    clean = mean_error_by_srf(rows, math.inf)
    noisy = mean_error_by_srf(rows, 30.0)
    assert clean[8.0] * 4 <= clean[1.0]
    assert noisy[8.0] < noisy[1.0]


def test_gridding_error_decays(slow):
    spec = replace(PRESETS["siso-paper"], snr_db_list=(math.inf,), trials=10)
    means = mean_error_by_srf(run_sweep(spec, workers=4), math.inf)
    srfs = sorted(means)
    errors = [means[s] for s in srfs]
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= coarse * 1.05
    slope = np.polyfit(np.log(srfs[:3]), np.log(errors[:3]), 1)[0]
    assert -1.6 <= slope <= -0.5


def test_unit_srf_matches_quantization(slow):
    spec = PRESETS["siso-paper"]
    recovered, rounded = [], []
    for trial in range(10):
        scene = trial_scene(spec, trial)
        x = trial_probe(spec, trial)
        y = synthesize(x, scene).y
        sol = recover_siso(y, x, 1.0, SolverConfig(delta=1e-6 * float(np.vdot(y, y).real)))
        recovered.append(resolution_error(sol.estimates, scene.scatterers, spec.L))
        snapped = snap_scene(scene, spec.L)
        rounded.append(resolution_error(snapped.scatterers, scene.scatterers, spec.L))
    rec, snap = np.nanmean(recovered), np.mean(rounded)
    assert snap <= math.sqrt(2) / 2
    assert 0.25 * snap <= rec <= 4 * snap


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

def test_certificate_suite(slow):
    L, K = 31, 31
    built = 0
    for seed in range(10):
        scene = sample_scene(L, 2, trial_rng(seed, 0, "scene"), box=1.0, gain_kind="circle", grid_K=K)
        x = random_probing(L, trial_rng(seed, 0, "probe"))
        nodes = [(s.tau, s.nu) for s in scene.scatterers]
        cert = build_certificate(x, nodes, scene.gains)
        if cert.status is not CertificateStatus.OK:
            continue
        report = verify_certificate(cert, 512)
        if not report.passed:
            continue
        built += 1
        assert report.interp_residual < 1e-8
        assert report.max_offgrid_Q < 1.0
        assert discrete_certificate(cert, K).satisfied
        grid = FineGrid(L, K)
        sol = extract_and_debias(solve_l1(synthesize(x, scene).y, x, grid), x, grid)
        assert _exact(sol.estimates, scene.scatterers, tol=1e-5)
    assert built >= 8


def test_isotropy(slow):
    stats = isotropy_check(15, 2000, seed=11)
    assert stats.diag_z.max() < 4.0
    assert stats.max_offdiag < 4 / np.sqrt(2000)


# ---------------------------------------------------------------------------
# MIMO
# ---------------------------------------------------------------------------

def test_mimo_on_grid_recovery(slow):
    spec = PRESETS["mimo-onset"]
    hits = 0
    for trial in range(spec.trials):
        scene = trial_scene(spec, trial)
        probes = trial_probe(spec, trial)
        cfg = scene.cfg
        sol = solve_l1_mimo(synthesize_mimo(probes, scene, cfg), probes, cfg, MimoGrid.from_srf(cfg, 1.0))
        hits += _exact(sol.estimates, scene.scatterers) and mimo_resolution_error(
            sol.estimates, scene.scatterers, cfg) < 1e-6
    assert hits >= 90


def test_mimo_srf_benefit(slow):
    spec = replace(PRESETS["mimo-paper"], snr_db_list=(20.0,))
    means = mean_error_by_srf(run_sweep(spec, workers=4), 20.0)
    assert means[3.0] < means[1.0]


# ---------------------------------------------------------------------------
# Reproducibility
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["siso-paper", "mimo-paper"])
def test_parallel_sweep_matches_serial(slow, preset):
    spec = replace(PRESETS[preset], trials=3)
    csv = []
    for workers in (1, 2):
        fh = io.StringIO()
        write_sweep_csv(fh, run_sweep(spec, workers=workers), spec.mode)
        csv.append(fh.getvalue())
    assert csv[0] == csv[1]
