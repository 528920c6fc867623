"""MIMO virtual-array model: geometry, synthesis, the 3D dictionary and recovery.

With N_T transmit and N_R receive antennas spaced c/(2 f_c) and
N_T c/(2 f_c) apart, transmitter j and receiver r see the phase
exp(i 2 pi (j + r N_T) beta), so the pairs (j, r) sweep the virtual array
positions v = 0..N_T N_R - 1 exactly once.

Dictionary coefficients are held as b[n1, n2, n3] (beta, tau, nu axes),
column n being the response to r_n = (n1/K1, n2/K2, n3/K3).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .analysis import wrap_distance
from .constants import CLUSTER_RADIUS, SPEED_OF_LIGHT, SUPPORT_THRESHOLD
from .errors import DimensionError
from .grid import dictionary_adjoint, dictionary_forward
from .signal import ProbingSignal, centered_fft, check_odd, random_probing, shifted_copies, signed_indices
from .solver import (
    Estimate,
    LinearMap,
    ResolutionReport,
    SolverConfig,
    SparseSolution,
    cluster_centroid,
    cluster_support,
    debias,
    equality_delta,
    match_pairs,
    report_from_distances,
    solve_constrained,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Data structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MimoConfig:
    """Array dimensions.

    Attributes
    ----------
    n_t, n_r : int
        Transmit and receive antenna counts.
    L : int
        Odd number of samples per receive antenna.
    f_c : float | None
        Carrier frequency in Hz, only needed by the geometry helpers.
    """

    n_t: int
    n_r: int
    L: int
    f_c: float | None = None

    def __post_init__(self):
        check_odd(self.L, "MimoConfig")
        if self.n_t < 1 or self.n_r < 1:
            raise DimensionError("MimoConfig", f"antenna counts must be positive, got ({self.n_t}, {self.n_r})")

    @property
    def n_virtual(self) -> int:
        return self.n_t * self.n_r

    @property
    def transmit_spacing(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self._carrier())

    @property
    def receive_spacing(self) -> float:
        return SPEED_OF_LIGHT * self.n_t / (2.0 * self._carrier())

    def _carrier(self) -> float:
        if not self.f_c:
            raise DimensionError("MimoConfig", "carrier frequency f_c is not set")
        return self.f_c

    def virtual_indices(self) -> np.ndarray:
        """v[j, r] = j + r N_T."""
        return np.arange(self.n_t)[:, None] + self.n_t * np.arange(self.n_r)[None, :]


@dataclass(frozen=True)
class MimoScatterer:
    b: complex
    beta: float
    tau: float
    nu: float


@dataclass(frozen=True)
class MimoScene:
    scatterers: tuple[MimoScatterer, ...]
    cfg: MimoConfig

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        seen = set()
        for s in self.scatterers:
            key = tuple(round(v % 1.0, 12) % 1.0 for v in (s.beta, s.tau, s.nu))
            if key in seen:
                raise DimensionError("MimoScene", f"duplicate scatterer location {key}")
            seen.add(key)

    @property
    def S(self) -> int:
        return len(self.scatterers)

    @property
    def L(self) -> int:
        return self.cfg.L


@dataclass(frozen=True, eq=False)
class MimoMeasurement:
    """Stacked samples y_0, ..., y_{N_R - 1}, L per receive antenna."""

    y: np.ndarray = field(repr=False)
    n_r: int
    L: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        if y.size != self.n_r * self.L:
            raise DimensionError("MimoMeasurement", f"expected {self.n_r * self.L} samples, got {y.size}")
        object.__setattr__(self, "y", y)

    @property
    def blocks(self) -> np.ndarray:
        return self.y.reshape(self.n_r, self.L)


@dataclass(frozen=True)
class MimoGrid:
    """K1 x K2 x K3 grid over (beta, tau, nu)."""

    K1: int
    K2: int
    K3: int
    cfg: MimoConfig

    def __post_init__(self):
        if self.K1 < self.cfg.n_virtual or self.K2 < self.cfg.L or self.K3 < self.cfg.L:
            raise DimensionError(
                "MimoGrid",
                f"grid ({self.K1}, {self.K2}, {self.K3}) too small for N_T N_R={self.cfg.n_virtual}, L={self.cfg.L}",
            )

    @classmethod
    def from_srf(cls, cfg: MimoConfig, srf: float) -> "MimoGrid":
        K1 = int(round(srf * cfg.n_virtual))
        K = int(round(srf * cfg.L))
        return cls(K1, K, K, cfg)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.K1, self.K2, self.K3)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def angle_to_beta(theta: float) -> float:
    """beta = -sin(theta) / 2, mapped into [0, 1)."""
    return float((-np.sin(theta) / 2.0) % 1.0)


def scatterer_from_geometry(gain: complex, distance: float, velocity: float, theta: float,
                            f_c: float, B: float, T: float) -> MimoScatterer:
    """Scatterer at ``distance`` (m) moving at radial ``velocity`` (m/s) under angle ``theta``."""
    delay = 2.0 * distance / SPEED_OF_LIGHT
    doppler = 2.0 * velocity * f_c / SPEED_OF_LIGHT
    b = gain * np.exp(-2j * np.pi * doppler * delay)
    return MimoScatterer(complex(b), angle_to_beta(theta), float((delay / T) % 1.0), float((doppler / B) % 1.0))


def mimo_atom(r, cfg: MimoConfig) -> np.ndarray:
    """Entries exp(i 2 pi (v beta + k tau + p nu)) over (v, k, p), flattened."""
    beta, tau, nu = r
    idx = signed_indices(cfg.L)
    v = np.arange(cfg.n_virtual)
    return (np.exp(2j * np.pi * v * beta)[:, None, None]
            * np.exp(2j * np.pi * idx * tau)[None, :, None]
            * np.exp(2j * np.pi * idx * nu)[None, None, :]).reshape(-1)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def _check_probes(probes, cfg: MimoConfig, operation: str) -> np.ndarray:
    if len(probes) != cfg.n_t:
        raise DimensionError(operation, f"expected {cfg.n_t} probes, got {len(probes)}")
    samples = np.array([p.samples for p in probes])
    if samples.shape[1] != cfg.L:
        raise DimensionError(operation, f"probe length {samples.shape[1]} but L={cfg.L}")
    return samples


def mimo_columns(probes, cfg: MimoConfig, betas, taus, nus) -> np.ndarray:
    """Responses to unit scatterers at (beta_k, tau_k, nu_k), as (N_R L) x S columns."""
    samples = _check_probes(probes, cfg, "mimo_columns")
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    shifted = np.stack([shifted_copies(s, taus, nus) for s in samples])           # [j, k, p]
    phases = np.exp(2j * np.pi * betas[:, None, None] * cfg.virtual_indices()[None])  # [k, j, r]
    cols = np.einsum("kjr,jkp->krp", phases, shifted)
    return cols.reshape(betas.size, cfg.n_r * cfg.L).T


def synthesize_mimo(probes, scene, cfg: MimoConfig) -> MimoMeasurement:
    """[y_r]_p = sum_k b_k exp(i2pi r N_T beta_k) sum_j exp(i2pi j beta_k) [F T x_j]_p."""
    scatterers = scene.scatterers if isinstance(scene, MimoScene) else tuple(scene)
    _check_probes(probes, cfg, "synthesize_mimo")
    if not scatterers:
        return MimoMeasurement(np.zeros(cfg.n_r * cfg.L, dtype=complex), cfg.n_r, cfg.L)
    cols = mimo_columns(probes, cfg,
                        [s.beta for s in scatterers], [s.tau for s in scatterers], [s.nu for s in scatterers])
    gains = np.array([s.b for s in scatterers], dtype=complex)
    return MimoMeasurement(cols @ gains, cfg.n_r, cfg.L)


def random_probes(cfg: MimoConfig, seed, kind: str = "gaussian") -> list[ProbingSignal]:
    """N_T independent probes with per-sample variance 1/(N_T L)."""
    rng = np.random.default_rng(seed)
    var = 1.0 / (cfg.n_t * cfg.L)
    return [random_probing(cfg.L, rng, kind, variance=var) for _ in range(cfg.n_t)]


def identifiability_rank(probes, scene, cfg: MimoConfig) -> int:
    """Rank of the stacked responses of the scene's scatterers."""
    scatterers = scene.scatterers if isinstance(scene, MimoScene) else tuple(scene)
    cols = mimo_columns(probes, cfg, [s.beta for s in scatterers],
                        [s.tau for s in scatterers], [s.nu for s in scatterers])
    return int(np.linalg.matrix_rank(cols))


# ---------------------------------------------------------------------------
# 3D dictionary
# ---------------------------------------------------------------------------

def mimo_map(probes, cfg: MimoConfig, grid: MimoGrid) -> LinearMap:
    samples = _check_probes(probes, cfg, "mimo_map")
    xhat = centered_fft(samples, axis=-1)
    n_v = cfg.n_virtual
    v = np.arange(n_v)
    xhat_v = xhat[v % cfg.n_t]          # v = j + r N_T
    receiver = v // cfg.n_t
    K1, K2, K3 = grid.shape

    def forward(b):
        bv = K1 * sfft.ifft(b, axis=0)[:n_v]
        yv = dictionary_forward(bv.transpose(0, 2, 1), xhat_v, K3, K2)
        return yv.reshape(cfg.n_r, cfg.n_t, cfg.L).sum(axis=1).reshape(-1)

    def adjoint(y):
        yv = np.asarray(y, dtype=complex).reshape(cfg.n_r, cfg.L)[receiver]
        c = dictionary_adjoint(yv, xhat_v, K3, K2).transpose(0, 2, 1)
        full = np.zeros(grid.shape, dtype=complex)
        full[:n_v] = c
        return sfft.fft(full, axis=0)

    return LinearMap(forward, adjoint, grid.shape)


def _measurement_vector(y, cfg: MimoConfig) -> np.ndarray:
    yv = y.y if isinstance(y, MimoMeasurement) else np.asarray(y, dtype=complex).reshape(-1)
    if yv.size != cfg.n_r * cfg.L:
        raise DimensionError("mimo", f"expected {cfg.n_r * cfg.L} samples, got {yv.size}")
    return yv


def _coefficients(b, grid: MimoGrid) -> np.ndarray:
    arr = np.asarray(b, dtype=complex)
    if arr.size != grid.K1 * grid.K2 * grid.K3:
        raise DimensionError("mimo_operator", f"expected {grid.shape} coefficients, got {arr.shape}")
    return arr.reshape(grid.shape)


def mimo_operator_forward(b, probes, cfg: MimoConfig, grid: MimoGrid) -> MimoMeasurement:
    return MimoMeasurement(mimo_map(probes, cfg, grid).forward(_coefficients(b, grid)), cfg.n_r, cfg.L)


def mimo_operator_adjoint(y, probes, cfg: MimoConfig, grid: MimoGrid) -> np.ndarray:
    return mimo_map(probes, cfg, grid).adjoint(_measurement_vector(y, cfg))


# ---------------------------------------------------------------------------
# Recovery
# ---------------------------------------------------------------------------

def extract_and_debias_mimo(sol: SparseSolution, probes, cfg: MimoConfig, grid: MimoGrid,
                            cluster_radius: int = CLUSTER_RADIUS,
                            threshold: float = SUPPORT_THRESHOLD) -> SparseSolution:
    clusters = cluster_support(sol.coeffs, cluster_radius, threshold)
    if not clusters:
        return replace(sol, estimates=())
    centroids = np.array([cluster_centroid(sol.coeffs, c) for c in clusters])
    betas = centroids[:, 0] / grid.K1
    taus = centroids[:, 1] / grid.K2
    nus = centroids[:, 2] / grid.K3
    gains, flags = debias(mimo_columns(probes, cfg, betas, taus, nus), sol.y)
    if flags.any():
        logger.warning("%d of %d clusters are rank deficient", int(flags.sum()), len(clusters))
    estimates = tuple(
        Estimate(complex(g), float(t), float(n), beta=float(be), rank_deficient=bool(f))
        for g, be, t, n, f in zip(gains, betas, taus, nus, flags)
    )
    return replace(sol, estimates=estimates)


def solve_l1_mimo(y, probes, cfg: MimoConfig, grid: MimoGrid,
                  solver_config: SolverConfig = SolverConfig()) -> SparseSolution:
    """min ||b||_1 s.t. ||y - R b||^2 <= delta over the 3D grid, then extract estimates."""
    yv = _measurement_vector(y, cfg)
    delta = max(solver_config.delta, equality_delta(yv))
    sol = solve_constrained(mimo_map(probes, cfg, grid), yv, delta, solver_config, refine=True)
    return extract_and_debias_mimo(sol, probes, cfg, grid,
                                   solver_config.cluster_radius, solver_config.support_threshold)


def _wrapped_offsets(estimates, truth) -> np.ndarray:
    est = np.array([(e.beta, e.tau, e.nu) for e in estimates], dtype=float).reshape(-1, 3)
    tru = np.array([(s.beta, s.tau, s.nu) for s in truth], dtype=float).reshape(-1, 3)
    return np.asarray(wrap_distance(est[:, None, :], tru[None, :, :]))


def _distances(offsets: np.ndarray, cfg: MimoConfig) -> np.ndarray:
    scale = np.array([cfg.n_virtual, cfg.L, cfg.L], dtype=float)
    return np.sqrt(np.sum((offsets * scale) ** 2, axis=-1))


def mimo_resolution_report(estimates, truth, cfg: MimoConfig) -> ResolutionReport:
    """Average of sqrt((N_T N_R dbeta)^2 + (L dtau)^2 + (L dnu)^2) over matched pairs."""
    return report_from_distances(_distances(_wrapped_offsets(estimates, truth), cfg))


def mimo_resolution_error(estimates, truth, cfg: MimoConfig) -> float:
    return mimo_resolution_report(estimates, truth, cfg).value


def beta_error(estimates, truth, cfg: MimoConfig) -> float:
    """Average N_T N_R |dbeta| over the pairs matched by the resolution metric."""
    offsets = _wrapped_offsets(estimates, truth)
    pairs = match_pairs(_distances(offsets, cfg))
    if not pairs:
        return float("nan")
    return float(np.mean([cfg.n_virtual * offsets[i, j, 0] for i, j in pairs]))
