"""Numeric constants, experiment presets and defaults."""

from __future__ import annotations

from dataclasses import dataclass

VERSION = "0.1.0"


# --- Minimum separation ---
SISO_SEPARATION = 2.38          # max(|dtau|, |dnu|) >= 2.38 / N
MIMO_BETA_SEPARATION = 10.0     # |dbeta| >= 10 / (N_T N_R - 1)
MIMO_SHIFT_SEPARATION = 5.0     # |dtau| or |dnu| >= 5 / N
PHYSICAL_SEPARATION = 4.77      # |dtau_bar| >= 4.77 / B or |dnu_bar| >= 4.77 / T
MIMO_PHYSICAL_SEPARATION = 10.01

# --- Physics ---
SPEED_OF_LIGHT = 299_792_458.0  # m/s

# --- Solver defaults ---
POWER_ITERATIONS = 50
SUPPORT_THRESHOLD = 1e-3        # relative to max |b|
CLUSTER_RADIUS = 1              # fine-grid cells
EQUALITY_RELATIVE_RESIDUAL = 1e-8
EQUALITY_DELTA_FLOOR = 1e-20
NOISELESS_RELATIVE_RESIDUAL = 1e-3
REGION_GUARD = 2.0              # cells of 1/L searched beyond the sampling box

# --- Certificate defaults ---
CERTIFICATE_GRID = 512
CERTIFICATE_EXCLUSION = 0.12    # exclusion radius is 0.12 / N per axis
CERTIFICATE_CONDITION_LIMIT = 1e12

# --- Scene sampling ---
MAX_SCENE_ATTEMPTS = 10_000

# --- Conditioning study ---
CONDITION_L = 200
CONDITION_S_VALUES = (2, 4, 8, 16, 32)
CONDITION_EPS_POINTS = 50


# ---------------------------------------------------------------------------
# Experiment registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of a seeded recovery experiment.

    Attributes
    ----------
    mode : str
        ``"siso"`` or ``"mimo"``.
    L : int
        Number of samples per receive antenna (odd).
    n_t, n_r : int
        Transmit and receive antenna counts (1 for SISO).
    S : int
        Number of scatterers per scene.
    srf_list : tuple[float, ...]
        Super-resolution factors to sweep.
    snr_db_list : tuple[float, ...]
        Power SNRs in dB; ``inf`` means noiseless.
    trials : int
        Number of independent scenes.
    seed : int
        Master seed every trial seed is split from.
    separation_policy : str
        ``"enforce"`` rejects scenes violating the applicable separation
        predicate, ``"free"`` keeps every draw.
    box : float | None
        Side of the (tau, nu) sampling box; ``None`` selects 2 / sqrt(L).
    gain_kind : str
        ``"disc"`` (uniform on the complex unit disc) or ``"circle"``.
    probe_kind : str
        ``"gaussian"``, ``"signs"`` or ``"complex"``.
    on_grid : bool
        Snap scatterers onto the SRF = max(srf_list) fine grid.
    """

    mode: str = "siso"
    L: int = 201
    n_t: int = 1
    n_r: int = 1
    S: int = 10
    srf_list: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    snr_db_list: tuple[float, ...] = (float("inf"),)
    trials: int = 20
    seed: int = 0
    separation_policy: str = "enforce"
    box: float | None = None
    gain_kind: str = "disc"
    probe_kind: str = "gaussian"
    on_grid: bool = False
    noiseless_rel_residual: float = NOISELESS_RELATIVE_RESIDUAL

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.srf_list:
            raise ValueError("srf_list must be nonempty")
        if self.mode not in ("siso", "mimo"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.separation_policy not in ("enforce", "free"):
            raise ValueError(f"unknown separation policy {self.separation_policy!r}")


# --- Preset registry ---
PRESETS = {
    # Fine-grid SRF sweep on S = 10 shifts drawn from [0, 2/sqrt(201)]^2.
    "siso-paper": ExperimentSpec(
        mode="siso", L=201, S=10,
        srf_list=(1.0, 2.0, 4.0, 8.0),
        snr_db_list=(float("inf"), 30.0),
        trials=20,
    ),
    # On-grid exact recovery, K = 2L, unit-modulus gains.
    "siso-onset": ExperimentSpec(
        mode="siso", L=63, S=4,
        srf_list=(2.0,), trials=100,
        box=1.0, gain_kind="circle", on_grid=True,
    ),
    # MIMO desk-scale parameters N_T = N_R = 3, L = 41, S = 5. The OR-rule
    # separation cannot hold for five nodes in a 2/sqrt(41) box.
    "mimo-paper": ExperimentSpec(
        mode="mimo", L=41, n_t=3, n_r=3, S=5,
        srf_list=(1.0, 3.0),
        snr_db_list=(float("inf"), 20.0),
        trials=20, separation_policy="free",
    ),
    # Separated on-grid MIMO scenes over the whole unit box.
    "mimo-onset": ExperimentSpec(
        mode="mimo", L=41, n_t=3, n_r=3, S=5,
        srf_list=(1.0,), trials=100,
        box=1.0, gain_kind="circle", on_grid=True,
    ),
}
