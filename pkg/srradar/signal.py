"""Signal model: fractional shift operators, Gabor structure and synthesis.

Every length-L vector is stored with logical index p = -N..N at slot p + N,
N = (L - 1) / 2. All transforms below use that centered convention: the
forward DFT is unnormalized and the inverse carries the 1/L factor.

Atoms f(r), r = (tau, nu), are L x L arrays indexed [r, q] (r the tau index,
q the nu index, both -N..N), flattened row-major to length L**2, with
entries exp(-i 2 pi (r tau + q nu)). Inner products are <a, b> = b^H a.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionError


# ---------------------------------------------------------------------------
# Data structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProbingSignal:
    """L samples x_{-N}, ..., x_N of the probing signal, L odd."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).reshape(-1)
        check_odd(samples.size, "ProbingSignal")
        object.__setattr__(self, "samples", samples)

    @property
    def L(self) -> int:
        return self.samples.size

    @property
    def N(self) -> int:
        return (self.L - 1) // 2


@dataclass(frozen=True)
class Scatterer:
    """A point scatterer with complex gain b at time-frequency shift (tau, nu)."""

    b: complex
    tau: float
    nu: float


@dataclass(frozen=True)
class Scene:
    """Scatterers observed through L samples.

    Attributes
    ----------
    scatterers : tuple[Scatterer, ...]
        Distinct as (tau, nu) pairs modulo 1.
    L : int
        Odd number of samples.
    """

    scatterers: tuple[Scatterer, ...]
    L: int

    def __post_init__(self):
        check_odd(self.L, "Scene")
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        seen = set()
        for s in self.scatterers:
            key = (round(s.tau % 1.0, 12) % 1.0, round(s.nu % 1.0, 12) % 1.0)
            if key in seen:
                raise DimensionError("Scene", f"duplicate scatterer location {key}")
            seen.add(key)

    @property
    def S(self) -> int:
        return len(self.scatterers)

    @property
    def gains(self) -> np.ndarray:
        return np.array([s.b for s in self.scatterers], dtype=complex)

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.scatterers], dtype=float)

    @property
    def nus(self) -> np.ndarray:
        return np.array([s.nu for s in self.scatterers], dtype=float)


@dataclass(frozen=True, eq=False)
class Measurement:
    """Received samples y_{-N}, ..., y_N."""

    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=complex).reshape(-1))

    @property
    def L(self) -> int:
        return self.y.size


# ---------------------------------------------------------------------------
# Index helpers and centered transforms
# ---------------------------------------------------------------------------

def check_odd(L: int, operation: str) -> None:
    if L < 1 or L % 2 == 0:
        raise DimensionError(operation, f"L must be a positive odd integer, got {L}")


def signed_indices(L: int) -> np.ndarray:
    """Logical indices -N..N in storage order."""
    N = (L - 1) // 2
    return np.arange(-N, N + 1)


def centered_fft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    return sfft.fftshift(sfft.fft(sfft.ifftshift(x, axes=axis), axis=axis), axes=axis)


def centered_ifft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    return sfft.fftshift(sfft.ifft(sfft.ifftshift(x, axes=axis), axis=axis), axes=axis)


def centered_fft2(x: np.ndarray) -> np.ndarray:
    axes = (-2, -1)
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(x, axes=axes), axes=axes), axes=axes)


def centered_ifft2(x: np.ndarray) -> np.ndarray:
    axes = (-2, -1)
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(x, axes=axes), axes=axes), axes=axes)


def _samples(x) -> np.ndarray:
    if isinstance(x, ProbingSignal):
        return x.samples
    return np.asarray(x, dtype=complex).reshape(-1)


# ---------------------------------------------------------------------------
# Shift operators
# ---------------------------------------------------------------------------

def fractional_time_shift(x, tau: float) -> np.ndarray:
    """Return T_tau x, a per-bin phase ramp exp(-i 2 pi k tau) in the DFT domain."""
    samples = _samples(x)
    check_odd(samples.size, "fractional_time_shift")
    k = signed_indices(samples.size)
    ramp = np.exp(-2j * np.pi * k * (float(tau) % 1.0))
    return centered_ifft(centered_fft(samples) * ramp)


def frequency_shift(x, nu: float) -> np.ndarray:
    """Return F_nu x, i.e. x_p exp(i 2 pi p nu)."""
    samples = _samples(x)
    p = signed_indices(samples.size)
    return samples * np.exp(2j * np.pi * p * (float(nu) % 1.0))


def shifted_copies(x, taus, nus) -> np.ndarray:
    """Stack F_{nu_j} T_{tau_j} x as rows of an (S, L) array."""
    samples = _samples(x)
    check_odd(samples.size, "shifted_copies")
    taus = np.atleast_1d(np.asarray(taus, dtype=float)) % 1.0
    nus = np.atleast_1d(np.asarray(nus, dtype=float)) % 1.0
    idx = signed_indices(samples.size)
    ramps = np.exp(-2j * np.pi * np.outer(taus, idx))
    delayed = centered_ifft(centered_fft(samples)[None, :] * ramps, axis=-1)
    return delayed * np.exp(2j * np.pi * np.outer(nus, idx))


def synthesize(x: ProbingSignal, scene: Scene) -> Measurement:
    """Noiseless samples y_p = sum_j b_j [F_{nu_j} T_{tau_j} x]_p."""
    if scene.L != x.L:
        raise DimensionError("synthesize", f"scene L={scene.L} but probe L={x.L}")
    if scene.S == 0:
        return Measurement(np.zeros(x.L, dtype=complex))
    columns = shifted_copies(x, scene.taus, scene.nus)
    return Measurement(scene.gains @ columns)


def line_spectral_samples(x, nus, gains) -> np.ndarray:
    """Frequency-only special case y_p = x_p sum_j b_j exp(i 2 pi p nu_j)."""
    samples = _samples(x)
    p = signed_indices(samples.size)
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    gains = np.atleast_1d(np.asarray(gains, dtype=complex))
    if nus.shape != gains.shape:
        raise DimensionError("line_spectral_samples", "nus and gains differ in length")
    return samples * (gains @ np.exp(2j * np.pi * np.outer(nus, p)))


# ---------------------------------------------------------------------------
# Gabor structure
# ---------------------------------------------------------------------------

def gabor_column(x, k: int, l: int) -> np.ndarray:
    """Column (k, l) of the Gabor matrix: x_{p-l} exp(i 2 pi k p / L)."""
    samples = _samples(x)
    L = samples.size
    check_odd(L, "gabor_column")
    N = (L - 1) // 2
    if not (-N <= k <= N and -N <= l <= N):
        raise DimensionError("gabor_column", f"(k, l) = ({k}, {l}) outside [-{N}, {N}]")
    p = signed_indices(L)
    return np.roll(samples, l) * np.exp(2j * np.pi * k * p / L)


def gabor_matrix(x) -> np.ndarray:
    """Dense L x L**2 Gabor matrix, columns ordered (k, l) row-major."""
    samples = _samples(x)
    L = samples.size
    check_odd(L, "gabor_matrix")
    idx = signed_indices(L)
    shifts = np.stack([np.roll(samples, l) for l in idx])           # [l, p]
    mods = np.exp(2j * np.pi * np.outer(idx, idx) / L)              # [k, p]
    cols = mods[:, None, :] * shifts[None, :, :]                    # [k, l, p]
    return cols.reshape(L * L, L).T


# ---------------------------------------------------------------------------
# Atoms and the measurement operator A = G_x F^H
# ---------------------------------------------------------------------------

def atom(r, L: int) -> np.ndarray:
    """Atom f(r) of length L**2 for r = (tau, nu)."""
    tau, nu = r
    idx = signed_indices(L)
    return np.outer(np.exp(-2j * np.pi * idx * tau), np.exp(-2j * np.pi * idx * nu)).reshape(-1)


def _circulant(samples: np.ndarray) -> np.ndarray:
    """Xc[m, p] = x_{p - m}, circular, both indices in storage order."""
    L = samples.size
    N = (L - 1) // 2
    slots = np.arange(L)
    return samples[(slots[None, :] - slots[:, None] + N) % L]


def apply_atoms(x, z: np.ndarray) -> np.ndarray:
    """Apply A to z in C^{L**2}; A f(r) equals F_nu T_tau x."""
    samples = _samples(x)
    L = samples.size
    Z = np.asarray(z, dtype=complex).reshape(L, L)
    W = centered_ifft2(Z)
    U = L * centered_ifft(W, axis=1)
    return np.sum(_circulant(samples) * U, axis=0)


def apply_atoms_adjoint(x, y: np.ndarray) -> np.ndarray:
    """Apply A^H to y in C^L, returning a length-L**2 vector."""
    samples = _samples(x)
    L = samples.size
    V = np.conj(_circulant(samples)) * np.asarray(y, dtype=complex)[None, :]
    M = centered_fft(V, axis=1)
    return (centered_fft2(M) / L**2).reshape(-1)


def atom_operator(x) -> LinearOperator:
    """A as a scipy LinearOperator of shape (L, L**2)."""
    samples = _samples(x)
    L = samples.size
    return LinearOperator(
        (L, L * L),
        matvec=lambda z: apply_atoms(samples, z),
        rmatvec=lambda y: apply_atoms_adjoint(samples, y),
        dtype=complex,
    )


# ---------------------------------------------------------------------------
# Random probing
# ---------------------------------------------------------------------------

PROBE_KINDS = ("gaussian", "signs", "complex")


def random_probing(L: int, seed, kind: str = "gaussian", variance: float | None = None) -> ProbingSignal:
    """Draw a random probing signal.

    Parameters
    ----------
    L : int
        Odd number of samples.
    seed : int | numpy.random.SeedSequence | numpy.random.Generator
        Anything ``numpy.random.default_rng`` accepts.
    kind : str
        ``"gaussian"`` draws real N(0, variance) samples, ``"signs"`` draws
        +-sqrt(variance) uniformly and ``"complex"`` draws circular complex
        Gaussians of the given variance.
    variance : float, optional
        Per-sample variance, 1/L by default.
    """
    check_odd(L, "random_probing")
    rng = np.random.default_rng(seed)
    var = 1.0 / L if variance is None else float(variance)
    if kind == "gaussian":
        samples = rng.normal(0.0, np.sqrt(var), L)
    elif kind == "signs":
        samples = rng.choice([-1.0, 1.0], size=L) * np.sqrt(var)
    elif kind == "complex":
        samples = (rng.normal(size=L) + 1j * rng.normal(size=L)) * np.sqrt(var / 2)
    else:
        raise ValueError(f"unknown probe kind {kind!r}, expected one of {PROBE_KINDS}")
    return ProbingSignal(samples.astype(complex))
