"""Random scenes, measurement noise and scene/measurement files."""

from __future__ import annotations

import csv
import json
import math
from typing import IO, NamedTuple

import numpy as np

from .analysis import wrap_distance
from .constants import MAX_SCENE_ATTEMPTS, MIMO_BETA_SEPARATION, MIMO_SHIFT_SEPARATION, SISO_SEPARATION
from .errors import DimensionError, SceneGenerationError
from .mimo import MimoConfig, MimoMeasurement, MimoScatterer, MimoScene
from .signal import Measurement, Scatterer, Scene, check_odd, signed_indices

GAIN_KINDS = ("disc", "circle")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def default_box(L: int) -> float:
    return 2.0 / math.sqrt(L)


def random_gains(S: int, rng: np.random.Generator, kind: str = "disc") -> np.ndarray:
    """Gains uniform on the complex unit disc, or on the unit circle."""
    phase = np.exp(2j * np.pi * rng.uniform(size=S))
    if kind == "circle":
        return phase
    if kind == "disc":
        return np.sqrt(rng.uniform(size=S)) * phase
    raise ValueError(f"unknown gain kind {kind!r}, expected one of {GAIN_KINDS}")


def separation_capacity(sides, thresholds) -> int:
    """Pigeonhole bound on how many separated points fit in the sampling box.

    Points must differ by at least ``thresholds[i]`` along some axis i, so
    two points in the same cell of side ``thresholds`` conflict.
    """
    capacity = 1
    for side, th in zip(sides, thresholds):
        if not np.isfinite(th):
            continue
        if side >= 1.0:
            capacity *= max(1, math.ceil(1.0 / th))
        else:
            capacity *= math.floor(side / th) + 1
    return capacity


def _sample_points(S: int, sides, thresholds, rng: np.random.Generator, *, enforce: bool,
                   snap=None, operation: str) -> np.ndarray:
    """Sequential rejection sampling of S points in [0, side_i) per axis."""
    sides = np.minimum(np.asarray(sides, dtype=float), 1.0)
    thresholds = np.asarray(thresholds, dtype=float)
    scale = np.where(np.isfinite(thresholds), 1.0 / thresholds, 0.0)
    if enforce:
        capacity = separation_capacity(sides, thresholds)
        if S > capacity:
            raise SceneGenerationError(
                operation, f"{S} separated scatterers cannot fit, capacity is {capacity}",
                attempts=0, capacity=capacity,
            )
    else:
        capacity = -1

    points = np.zeros((0, sides.size))
    attempts = 0
    while points.shape[0] < S:
        if attempts >= MAX_SCENE_ATTEMPTS:
            raise SceneGenerationError(
                operation,
                f"placed {points.shape[0]} of {S} scatterers in {attempts} attempts",
                attempts=attempts, capacity=capacity,
            )
        attempts += 1
        cand = rng.uniform(size=sides.size) * sides
        if snap is not None:
            cand = snap(cand)
        if points.shape[0]:
            d = np.asarray(wrap_distance(points, cand[None, :]))
            if np.any(np.all(d < 1e-12, axis=1)):
                continue
            if enforce and np.any(np.max(d * scale, axis=1) < 1.0):
                continue
        points = np.vstack([points, cand])
    return points


def sample_scene(L: int, S: int, rng: np.random.Generator, *, box: float | None = None,
                 separation: str = "enforce", gain_kind: str = "disc", grid_K: int | None = None) -> Scene:
    """Draw S scatterers with (tau, nu) uniform on [0, box)^2.

    With ``separation="enforce"`` every pair satisfies the single-antenna
    minimum separation. ``grid_K`` snaps locations onto the K-grid.
    """
    check_odd(L, "sample_scene")
    N = (L - 1) // 2
    side = default_box(L) if box is None else box
    snap = None if grid_K is None else (lambda p: (np.round(p * grid_K) % grid_K) / grid_K)
    th = SISO_SEPARATION / N
    pts = _sample_points(S, [side, side], [th, th], rng, enforce=separation == "enforce",
                         snap=snap, operation="sample_scene")
    gains = random_gains(S, rng, gain_kind)
    return Scene(tuple(Scatterer(complex(b), float(t), float(n)) for b, (t, n) in zip(gains, pts)), L)


def sample_mimo_scene(cfg: MimoConfig, S: int, rng: np.random.Generator, *, box: float | None = None,
                      separation: str = "enforce", gain_kind: str = "disc",
                      grid_shape: tuple[int, int, int] | None = None) -> MimoScene:
    """Draw S scatterers with beta uniform on [0, 1) and (tau, nu) on [0, box)^2."""
    N = (cfg.L - 1) // 2
    side = default_box(cfg.L) if box is None else box
    n_v = cfg.n_virtual
    beta_th = MIMO_BETA_SEPARATION / (n_v - 1) if n_v > 1 else np.inf
    shift_th = MIMO_SHIFT_SEPARATION / N
    snap = None
    if grid_shape is not None:
        K = np.asarray(grid_shape, dtype=float)

        def snap(p):
            return (np.round(p * K) % K) / K
    pts = _sample_points(S, [1.0, side, side], [beta_th, shift_th, shift_th], rng,
                         enforce=separation == "enforce", snap=snap, operation="sample_mimo_scene")
    gains = random_gains(S, rng, gain_kind)
    return MimoScene(
        tuple(MimoScatterer(complex(b), float(be), float(t), float(n)) for b, (be, t, n) in zip(gains, pts)),
        cfg,
    )


def diagonal_mimo_scene(cfg: MimoConfig, gains) -> MimoScene:
    """On-grid scene with scatterer k at (k/(N_T N_R), k/L, k/L)."""
    gains = np.asarray(gains, dtype=complex)
    return MimoScene(
        tuple(MimoScatterer(complex(b), k / cfg.n_virtual, k / cfg.L, k / cfg.L) for k, b in enumerate(gains)),
        cfg,
    )


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

def add_noise(y: np.ndarray, snr_db: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Add complex white Gaussian noise with ||y||^2 / ||n||^2 = 10^(snr_db/10) exactly.

    ``snr_db = inf`` returns y unchanged with zero noise.
    """
    y = np.asarray(y, dtype=complex)
    if math.isinf(snr_db) and snr_db > 0:
        return y.copy(), np.zeros_like(y)
    n = (rng.normal(size=y.shape) + 1j * rng.normal(size=y.shape)) / math.sqrt(2.0)
    power = float(np.vdot(y, y).real)
    if power == 0.0:
        return y.copy(), np.zeros_like(y)
    n *= math.sqrt(power / 10.0 ** (snr_db / 10.0)) / np.linalg.norm(n)
    return y + n, n


def noise_delta(y_clean: np.ndarray, snr_db: float, noiseless_rel_residual: float) -> float:
    """Squared residual bound: the noise energy, or (rel ||y||)^2 without noise."""
    power = float(np.vdot(y_clean, y_clean).real)
    if math.isinf(snr_db) and snr_db > 0:
        return (noiseless_rel_residual ** 2) * power
    return power / 10.0 ** (snr_db / 10.0)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

class SceneFile(NamedTuple):
    scene: Scene | MimoScene
    seed: int
    probe_kind: str


def scene_to_dict(scene: Scene | MimoScene, *, seed: int, probe_kind: str) -> dict:
    out = {"L": int(scene.L)}
    if isinstance(scene, MimoScene):
        out["n_t"] = scene.cfg.n_t
        out["n_r"] = scene.cfg.n_r
    rows = []
    for s in scene.scatterers:
        row = {"b_re": float(np.real(s.b)), "b_im": float(np.imag(s.b)), "tau": float(s.tau), "nu": float(s.nu)}
        if isinstance(s, MimoScatterer):
            row["beta"] = float(s.beta)
        rows.append(row)
    out["scatterers"] = rows
    out["seed"] = int(seed)
    out["probe_kind"] = probe_kind
    return out


def scene_from_dict(data: dict) -> SceneFile:
    try:
        L = int(data["L"])
        rows = data["scatterers"]
        seed = int(data.get("seed", 0))
        probe_kind = data.get("probe_kind", "gaussian")
        if "n_t" in data:
            cfg = MimoConfig(int(data["n_t"]), int(data["n_r"]), L)
            scene = MimoScene(tuple(
                MimoScatterer(complex(r["b_re"], r["b_im"]), float(r["beta"]), float(r["tau"]), float(r["nu"]))
                for r in rows
            ), cfg)
        else:
            scene = Scene(tuple(
                Scatterer(complex(r["b_re"], r["b_im"]), float(r["tau"]), float(r["nu"])) for r in rows
            ), L)
    except (KeyError, TypeError) as exc:
        raise DimensionError("read_scene", f"malformed scene: {exc}") from exc
    return SceneFile(scene, seed, probe_kind)


def write_scene(fh: IO[str], scene: Scene | MimoScene, *, seed: int, probe_kind: str) -> None:
    json.dump(scene_to_dict(scene, seed=seed, probe_kind=probe_kind), fh, indent=2)
    fh.write("\n")


def read_scene(fh: IO[str]) -> SceneFile:
    return scene_from_dict(json.load(fh))


def write_measurement_csv(fh: IO[str], measurement: Measurement | MimoMeasurement) -> None:
    """Columns p,re,im; MIMO measurements get a leading receive-antenna column r."""
    writer = csv.writer(fh, lineterminator="\n")
    if isinstance(measurement, MimoMeasurement):
        p = signed_indices(measurement.L)
        writer.writerow(["r", "p", "re", "im"])
        for r, block in enumerate(measurement.blocks):
            for pi, v in zip(p, block):
                writer.writerow([r, int(pi), repr(float(v.real)), repr(float(v.imag))])
        return
    writer.writerow(["p", "re", "im"])
    for pi, v in zip(signed_indices(measurement.L), measurement.y):
        writer.writerow([int(pi), repr(float(v.real)), repr(float(v.imag))])
