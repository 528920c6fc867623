"""Wrap-around metric, minimum-separation predicates and Vandermonde conditioning."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .constants import (
    CONDITION_EPS_POINTS,
    CONDITION_L,
    CONDITION_S_VALUES,
    MIMO_BETA_SEPARATION,
    MIMO_PHYSICAL_SEPARATION,
    MIMO_SHIFT_SEPARATION,
    PHYSICAL_SEPARATION,
    SISO_SEPARATION,
)
from .errors import DimensionError


def wrap_distance(a, b):
    """Distance on the unit circle: min(|a - b| mod 1, 1 - (|a - b| mod 1))."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SeparationReport:
    """Outcome of a pairwise separation check.

    ``min_pairwise`` and ``threshold`` share units: the raw max-coordinate
    distance for SISO, a normalized ratio (threshold 1) for the OR rules.
    """

    min_pairwise: float
    satisfied: bool
    threshold: float
    violating_pairs: list[tuple[int, int]] = field(default_factory=list)


def _points(nodes, width: int) -> np.ndarray:
    rows = []
    for node in nodes:
        if hasattr(node, "tau"):
            row = (node.beta, node.tau, node.nu) if width == 3 else (node.tau, node.nu)
        else:
            row = tuple(node)
        rows.append(row)
    return np.asarray(rows, dtype=float).reshape(-1, width)


def _pairwise_report(scaled: np.ndarray, threshold: float) -> SeparationReport:
    """Pairs separated when the max over axes of scaled wrap distances >= threshold."""
    n = scaled.shape[0]
    best = float("inf")
    violating = []
    for i, j in itertools.combinations(range(n), 2):
        d = float(np.max(scaled[i, j]))
        best = min(best, d)
        if d < threshold:
            violating.append((i, j))
    return SeparationReport(best, not violating, threshold, violating)


def _wrap_matrix(points: np.ndarray) -> np.ndarray:
    return np.asarray(wrap_distance(points[:, None, :], points[None, :, :]))


def check_separation_siso(nodes, L: int) -> SeparationReport:
    """max(|tau - tau'|, |nu - nu'|) >= 2.38 / N for every pair."""
    N = (L - 1) // 2
    pts = _points(nodes, 2)
    return _pairwise_report(_wrap_matrix(pts), SISO_SEPARATION / N)


def check_separation_mimo(nodes, n_t: int, n_r: int, L: int) -> SeparationReport:
    """|dbeta| >= 10/(N_T N_R - 1) or |dtau| >= 5/N or |dnu| >= 5/N for every pair.

    Nodes are (beta, tau, nu). The report is normalized: each axis distance
    is divided by its threshold and a pair passes at ratio >= 1.
    """
    N = (L - 1) // 2
    pts = _points(nodes, 3)
    n_v = n_t * n_r
    beta_scale = (n_v - 1) / MIMO_BETA_SEPARATION if n_v > 1 else 0.0
    scale = np.array([beta_scale, N / MIMO_SHIFT_SEPARATION, N / MIMO_SHIFT_SEPARATION])
    return _pairwise_report(_wrap_matrix(pts) * scale, 1.0)


def _physical_report(delays, dopplers, B: float, T: float, constant: float) -> SeparationReport:
    pts = np.column_stack([np.asarray(delays, dtype=float) / T, np.asarray(dopplers, dtype=float) / B])
    # both axes compare B T times the normalized wrap distance with the constant
    scale = np.array([T * B / constant, B * T / constant])
    return _pairwise_report(_wrap_matrix(pts) * scale, 1.0)


def check_separation_physical(delays, dopplers, B: float, T: float) -> SeparationReport:
    """|dtau_bar| >= 4.77 / B or |dnu_bar| >= 4.77 / T for every pair (seconds, Hz)."""
    return _physical_report(delays, dopplers, B, T, PHYSICAL_SEPARATION)


def check_separation_mimo_physical(delays, dopplers, B: float, T: float) -> SeparationReport:
    return _physical_report(delays, dopplers, B, T, MIMO_PHYSICAL_SEPARATION)


# ---------------------------------------------------------------------------
# Vandermonde conditioning
# ---------------------------------------------------------------------------

class ConditionPoint(NamedTuple):
    s: int
    eps: float
    inv_kappa: float


def vandermonde_matrix(S: int, eps: float, L: int) -> np.ndarray:
    p = np.arange(L)[:, None]
    q = np.arange(2 * S)[None, :]
    return np.exp(-2j * np.pi * p * q * (1.0 - eps) / L)


def vandermonde_condition(S: int, eps: float, L: int) -> float:
    """Condition number of the L x 2S Vandermonde matrix with node spacing (1 - eps)/L."""
    if 2 * S > L:
        raise DimensionError("vandermonde_condition", f"2S={2 * S} exceeds L={L}")
    if not 0.0 <= eps < 1.0:
        raise DimensionError("vandermonde_condition", f"eps must lie in [0, 1), got {eps}")
    sv = scipy.linalg.svdvals(vandermonde_matrix(S, eps, L))
    return float(sv[0] / sv[-1])


def condition_sweep(L: int = CONDITION_L, s_values=CONDITION_S_VALUES, eps_values=None) -> list[ConditionPoint]:
    if eps_values is None:
        eps_values = np.linspace(0.0, 0.95, CONDITION_EPS_POINTS)
    return [
        ConditionPoint(int(s), float(eps), 1.0 / vandermonde_condition(int(s), float(eps), L))
        for s in s_values
        for eps in eps_values
    ]
