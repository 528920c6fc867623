"""Fine-grid dictionary operator R.

Column (m, n) of R is F_{m/K} T_{n/K} x. Coefficients are held as a K x K
array b[m, n] (axis 0 the frequency-shift index, axis 1 the time-shift
index). Both R and R^H run in O(K**2 log K) through FFTs along each axis,
never forming the L x K**2 matrix.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionError
from .signal import Measurement, ProbingSignal, centered_fft, check_odd, signed_indices


@dataclass(frozen=True)
class FineGrid:
    """K x K grid of time-frequency shifts (n/K, m/K) for L samples.

    Attributes
    ----------
    L : int
        Odd number of samples.
    K : int
        Points per axis, K >= L.
    region : tuple[float, float] | None
        Optional restriction (tau_max_frac, nu_max_frac): only columns with
        n < ceil(tau_max_frac K) and m < ceil(nu_max_frac K) are active.
    """

    L: int
    K: int
    region: tuple[float, float] | None = None

    def __post_init__(self):
        check_odd(self.L, "FineGrid")
        if self.K < self.L:
            raise DimensionError("FineGrid", f"K={self.K} is smaller than L={self.L}")
        if self.region is not None:
            tf, nf = self.region
            if not (0 < tf <= 1 and 0 < nf <= 1):
                raise DimensionError("FineGrid", f"region fractions must lie in (0, 1], got {self.region}")

    @classmethod
    def from_srf(cls, L: int, srf: float, region=None) -> "FineGrid":
        return cls(L=L, K=int(round(srf * L)), region=region)

    @property
    def srf(self) -> float:
        return self.K / self.L

    @property
    def shape(self) -> tuple[int, int]:
        return (self.K, self.K)

    @property
    def column_count(self) -> int:
        rows, cols = self.active_shape
        return rows * cols

    @property
    def active_shape(self) -> tuple[int, int]:
        """(rows, columns) of the active block, the full shape when unrestricted."""
        if self.region is None:
            return self.shape
        tf, nf = self.region
        return (math.ceil(nf * self.K), math.ceil(tf * self.K))

    @property
    def mask(self) -> np.ndarray | None:
        """Boolean [m, n] array of active columns, None when unrestricted."""
        if self.region is None:
            return None
        rows, cols = self.active_shape
        m_active = np.arange(self.K) < rows
        n_active = np.arange(self.K) < cols
        return np.outer(m_active, n_active)

    def locations(self, m, n) -> tuple[np.ndarray, np.ndarray]:
        """(tau, nu) of grid indices (m, n)."""
        return np.asarray(n) / self.K, np.asarray(m) / self.K


def restricted_region(tau_max: float, nu_max: float, T: float, B: float) -> tuple[float, float]:
    """Convert a maximal delay (s) and Doppler (Hz) into grid region fractions."""
    return min(1.0, tau_max / T), min(1.0, nu_max / B)


def snap_to_grid(value, K: int):
    """Round a shift in [0, 1) to the nearest multiple of 1/K."""
    return (np.round(np.asarray(value) * K) % K) / K


# ---------------------------------------------------------------------------
# Batched FFT kernels
# ---------------------------------------------------------------------------

def _phase(L: int) -> np.ndarray:
    idx = signed_indices(L)
    return np.exp(2j * np.pi * np.outer(idx, idx) / L)          # [p, k]


def dictionary_forward(b: np.ndarray, xhat: np.ndarray, k_nu: int, k_tau: int) -> np.ndarray:
    """Apply R to coefficients b[..., m, n] given the centered DFT of the probe.

    ``xhat`` has shape (L,) or broadcasts against the leading axes of ``b``.
    """
    L = xhat.shape[-1]
    idx = signed_indices(L)
    bf = sfft.fft(b, axis=-1)[..., idx % k_tau]                  # [..., m, k]
    c = k_nu * sfft.ifft(bf, axis=-2)[..., idx % k_nu, :]        # [..., p, k]
    e = xhat[..., None, :] * _phase(L)
    return np.sum(e * c, axis=-1) / L


def dictionary_adjoint(y: np.ndarray, xhat: np.ndarray, k_nu: int, k_tau: int) -> np.ndarray:
    """Apply R^H to y[..., p], returning coefficients [..., m, n]."""
    L = xhat.shape[-1]
    idx = signed_indices(L)
    e = xhat[..., None, :] * _phase(L)
    c = np.conj(e) * y[..., :, None] / L                         # [..., p, k]
    lead = c.shape[:-2]
    rows = np.zeros(lead + (k_nu, L), dtype=complex)
    rows[..., idx % k_nu, :] = c
    d = sfft.fft(rows, axis=-2)
    cols = np.zeros(lead + (k_nu, k_tau), dtype=complex)
    cols[..., idx % k_tau] = d
    return k_tau * sfft.ifft(cols, axis=-1)


class BlockKernel(NamedTuple):
    """Dense factors of R restricted to the leading (rows, cols) block.

    For a region covering a small fraction of the grid, two matrix products
    of sizes L x rows and cols x L are cheaper than the K x K FFTs.
    """

    e: np.ndarray          # [p, k] probe spectrum times the synthesis phase
    w_nu: np.ndarray       # [p, m] = exp(+i 2 pi p m / K)
    w_tau: np.ndarray      # [n, k] = exp(-i 2 pi n k / K)


def block_kernel(xhat: np.ndarray, K: int, active_shape: tuple[int, int]) -> BlockKernel:
    L = xhat.shape[-1]
    idx = signed_indices(L)
    rows, cols = active_shape
    w_nu = np.exp(2j * np.pi * np.outer(idx, np.arange(rows)) / K)
    w_tau = np.exp(-2j * np.pi * np.outer(np.arange(cols), idx) / K)
    return BlockKernel(xhat[None, :] * _phase(L), w_nu, w_tau)


def block_forward(b: np.ndarray, kernel: BlockKernel) -> np.ndarray:
    """Same as ``dictionary_forward`` for coefficients confined to the block."""
    c = kernel.w_nu @ (b @ kernel.w_tau)
    return np.sum(kernel.e * c, axis=-1) / kernel.e.shape[-1]


def block_adjoint(y: np.ndarray, kernel: BlockKernel) -> np.ndarray:
    c = np.conj(kernel.e) * y[:, None] / kernel.e.shape[-1]
    return kernel.w_nu.conj().T @ c @ kernel.w_tau.conj().T


# ---------------------------------------------------------------------------
# Public operators
# ---------------------------------------------------------------------------

def _coefficient_array(b, grid: FineGrid, operation: str) -> np.ndarray:
    if isinstance(b, Mapping):
        arr = np.zeros(grid.shape, dtype=complex)
        for (m, n), value in b.items():
            if not (0 <= m < grid.K and 0 <= n < grid.K):
                raise DimensionError(operation, f"index ({m}, {n}) outside the {grid.K}x{grid.K} grid")
            arr[m, n] = value
        return arr
    arr = np.asarray(b, dtype=complex)
    if arr.size != grid.K * grid.K:
        raise DimensionError(operation, f"expected {grid.K * grid.K} coefficients, got {arr.size}")
    return arr.reshape(grid.shape)


def _check_probe(x: ProbingSignal, grid: FineGrid, operation: str) -> None:
    if x.L != grid.L:
        raise DimensionError(operation, f"probe L={x.L} but grid L={grid.L}")


def grid_forward(b, x: ProbingSignal, grid: FineGrid) -> Measurement:
    """y = R b, with b a K x K array, a flat vector or a {(m, n): value} map."""
    _check_probe(x, grid, "grid_forward")
    arr = _coefficient_array(b, grid, "grid_forward")
    if grid.mask is not None:
        arr = arr * grid.mask
    return Measurement(dictionary_forward(arr, centered_fft(x.samples), grid.K, grid.K))


def grid_adjoint(y, x: ProbingSignal, grid: FineGrid) -> np.ndarray:
    """R^H y as a K x K coefficient array."""
    _check_probe(x, grid, "grid_adjoint")
    yv = y.y if isinstance(y, Measurement) else np.asarray(y, dtype=complex).reshape(-1)
    if yv.size != grid.L:
        raise DimensionError("grid_adjoint", f"expected {grid.L} samples, got {yv.size}")
    out = dictionary_adjoint(yv, centered_fft(x.samples), grid.K, grid.K)
    if grid.mask is not None:
        out = out * grid.mask
    return out


def grid_operator(x: ProbingSignal, grid: FineGrid) -> LinearOperator:
    """R as a scipy LinearOperator of shape (L, K**2)."""
    return LinearOperator(
        (grid.L, grid.K * grid.K),
        matvec=lambda b: grid_forward(b, x, grid).y,
        rmatvec=lambda y: grid_adjoint(y, x, grid).reshape(-1),
        dtype=complex,
    )
