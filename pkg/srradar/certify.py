"""Dual certificates for recovery on the continuum and on the fine grid.

A certificate is the trigonometric polynomial Q(r) = <q, A f(r)> built so
that Q(r_j) = u_j and grad Q(r_j) = 0 at the support, |Q| < 1 elsewhere.
Its coefficients in atom space, c = A^H q (an L x L array over the (tau, nu)
frequency pair), make point and grid evaluation cheap:

    Q(tau, nu) = sum_{r, q} c[r, q] exp(i 2 pi (r tau + q nu)).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
import scipy.linalg

from .analysis import wrap_distance
from .constants import CERTIFICATE_CONDITION_LIMIT, CERTIFICATE_EXCLUSION, CERTIFICATE_GRID
from .errors import DimensionError, GridError
from .grid import FineGrid, grid_adjoint
from .signal import (
    ProbingSignal,
    apply_atoms,
    apply_atoms_adjoint,
    atom,
    gabor_matrix,
    random_probing,
    shifted_copies,
    signed_indices,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Squared Fejer kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FejerKernel:
    """Coefficients g_{-N..N} of F(t) = sum_j g_j exp(i 2 pi t j), F(0) = 1."""

    g: np.ndarray
    N: int

    def evaluate(self, t, derivative: int = 0):
        """F and its derivatives up to the second at points t."""
        if derivative not in (0, 1, 2):
            raise DimensionError("FejerKernel.evaluate", f"unsupported derivative order {derivative}")
        j = signed_indices(2 * self.N + 1)
        t = np.asarray(t, dtype=float)
        weights = self.g * (2j * np.pi * j) ** derivative
        values = np.exp(2j * np.pi * t[..., None] * j) @ weights
        return values.real


def fejer_coefficients(N: int) -> FejerKernel:
    """Squared Fejer kernel of degree at most N, normalized to F(0) = 1.

    The triangular Fejer sequence M - |j|, M = N // 2 + 1, is convolved with
    itself and embedded centered into 2N + 1 coefficients.
    """
    if N < 1:
        raise DimensionError("fejer_coefficients", f"N must be >= 1, got {N}")
    M = N // 2 + 1
    j = np.arange(-(M - 1), M)
    tri = (M - np.abs(j)).astype(float)
    squared = np.convolve(tri, tri)
    squared /= squared.sum()
    g = np.zeros(2 * N + 1)
    half = (squared.size - 1) // 2
    g[N - half:N + half + 1] = squared
    return FejerKernel(g, N)


def g_vector(r, n, kernel: FejerKernel) -> np.ndarray:
    """Entries g_k g_p (i2pi k)^n1 (i2pi p)^n2 exp(-i2pi(tau k + nu p)), length L**2."""
    n1, n2 = n
    if n1 not in (0, 1) or n2 not in (0, 1):
        raise DimensionError("g_vector", f"unsupported derivative order {tuple(n)}")
    tau, nu = r
    idx = signed_indices(2 * kernel.N + 1)
    a = kernel.g * (2j * np.pi * idx) ** n1 * np.exp(-2j * np.pi * idx * tau)
    b = kernel.g * (2j * np.pi * idx) ** n2 * np.exp(-2j * np.pi * idx * nu)
    return np.outer(a, b).reshape(-1)


def mean_kernel(kernel: FejerKernel, dtau, dnu, n=(0, 0)):
    """G-bar^n(r) = F^(n1)(tau) F^(n2)(nu)."""
    return kernel.evaluate(dtau, n[0]) * kernel.evaluate(dnu, n[1])


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

class CertificateStatus(str, enum.Enum):
    OK = "ok"
    SINGULAR = "singular"


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """An interpolating polynomial Q(r) = <q, A f(r)>.

    ``x`` is None for the identity substitution A = I, in which case q has
    length L**2. For deterministic certificates ``q`` is None and Q is
    evaluated from the closed-form kernel sum instead.
    """

    alpha: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    q: np.ndarray | None
    nodes: np.ndarray
    signs: np.ndarray
    kernel: FejerKernel = field(repr=False)
    L: int
    x: ProbingSignal | None = field(default=None, repr=False)
    status: CertificateStatus = CertificateStatus.OK
    condition_number: float = 1.0

    @cached_property
    def coefficients(self) -> np.ndarray | None:
        if self.q is None:
            return None
        if self.x is None:
            return np.asarray(self.q, dtype=complex).reshape(self.L, self.L)
        return apply_atoms_adjoint(self.x, self.q).reshape(self.L, self.L)

    def _closed_form(self, tau, nu, n):
        tau = np.asarray(tau, dtype=float)
        nu = np.asarray(nu, dtype=float)
        out = np.zeros(np.broadcast(tau, nu).shape, dtype=complex)
        for j, (tj, nj) in enumerate(self.nodes):
            dt, dn = tau - tj, nu - nj
            out += (self.alpha[j] * mean_kernel(self.kernel, dt, dn, (n[0], n[1]))
                    + self.alpha1[j] * mean_kernel(self.kernel, dt, dn, (n[0] + 1, n[1]))
                    + self.alpha2[j] * mean_kernel(self.kernel, dt, dn, (n[0], n[1] + 1)))
        return out

    def _derivative(self, tau, nu, n=(0, 0)) -> np.ndarray:
        c = self.coefficients
        if c is None:
            return self._closed_form(tau, nu, n)
        tau, nu = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(nu, dtype=float))
        idx = signed_indices(self.L)
        et = np.exp(2j * np.pi * tau[..., None] * idx) * (2j * np.pi * idx) ** n[0]
        ev = np.exp(2j * np.pi * nu[..., None] * idx) * (2j * np.pi * idx) ** n[1]
        return np.einsum("...r,rq,...q->...", et, c, ev)

    def evaluate(self, tau, nu) -> np.ndarray:
        return self._derivative(tau, nu)

    def gradient(self, tau, nu) -> tuple[np.ndarray, np.ndarray]:
        return self._derivative(tau, nu, (1, 0)), self._derivative(tau, nu, (0, 1))

    def evaluate_grid(self, size: int = CERTIFICATE_GRID) -> np.ndarray:
        """Q[a, b] at tau = a/size, nu = b/size."""
        c = self.coefficients
        if c is None or size < self.L:
            grid = np.arange(size) / size
            return self._derivative(grid[:, None], grid[None, :])
        idx = signed_indices(self.L) % size
        padded = np.zeros((size, size), dtype=complex)
        padded[np.ix_(idx, idx)] = c
        return size * size * sfft.ifft2(padded)


def _node_array(nodes) -> np.ndarray:
    return np.asarray([tuple(n) for n in nodes], dtype=float).reshape(-1, 2)


def _solve_interpolation(M: np.ndarray, signs: np.ndarray):
    """Solve M c = [u; 0; 0] by QR; returns (c, condition number) or (None, cond)."""
    S = signs.size
    if S == 0:
        return np.zeros(0, dtype=complex), 1.0
    Q, R = scipy.linalg.qr(M)
    diag = np.abs(np.diag(R))
    cond = float(np.linalg.cond(R)) if diag.min() > 0 else float("inf")
    if not np.isfinite(cond) or cond > CERTIFICATE_CONDITION_LIMIT:
        return None, cond
    rhs = np.concatenate([signs, np.zeros(2 * S, dtype=complex)])
    return scipy.linalg.solve_triangular(R, Q.conj().T @ rhs), cond


def build_certificate(x: ProbingSignal | None, nodes, signs, *, identity: bool = False,
                      kernel: FejerKernel | None = None, L: int | None = None) -> DualCertificate:
    """Build Q with Q(r_j) = u_j and zero gradient at every node.

    With ``identity=True`` the measurement operator is replaced by the
    identity on C^{L**2} (``x`` may then be None and ``L`` must be given).
    """
    if x is not None:
        L = x.L
    if L is None:
        raise DimensionError("build_certificate", "L is required for the identity substitution")
    kernel = kernel or fejer_coefficients((L - 1) // 2)
    pts = _node_array(nodes)
    u = np.asarray(signs, dtype=complex).reshape(-1)
    if u.size != pts.shape[0]:
        raise DimensionError("build_certificate", f"{pts.shape[0]} nodes but {u.size} signs")
    S = u.size
    op = (lambda v: v) if identity else (lambda v: apply_atoms(x, v))
    idx = signed_indices(L)
    dt = np.repeat(-2j * np.pi * idx, L)      # tau index varies slowest
    dn = np.tile(-2j * np.pi * idx, L)

    atoms = [atom(r, L) for r in pts]
    e_cols = [op(f) for f in atoms] + [op(dt * f) for f in atoms] + [op(dn * f) for f in atoms]
    g_cols = ([op(g_vector(r, (0, 0), kernel)) for r in pts]
              + [op(g_vector(r, (1, 0), kernel)) for r in pts]
              + [op(g_vector(r, (0, 1), kernel)) for r in pts])
    size = L * L if identity else L
    E = np.array(e_cols).T.reshape(size, 3 * S)
    G = np.array(g_cols).T.reshape(size, 3 * S)

    coeffs, cond = _solve_interpolation(E.conj().T @ G, u)
    cert_x = None if identity else x
    if coeffs is None:
        logger.warning("interpolation system singular (condition %.3g)", cond)
        zero = np.zeros(S, dtype=complex)
        return DualCertificate(zero, zero, zero, np.zeros(size, dtype=complex), pts, u, kernel, L,
                               cert_x, CertificateStatus.SINGULAR, cond)
    q = G @ coeffs
    return DualCertificate(coeffs[:S], coeffs[S:2 * S], coeffs[2 * S:], q, pts, u, kernel, L,
                           cert_x, CertificateStatus.OK, cond)


def deterministic_certificate(kernel: FejerKernel, nodes, signs) -> DualCertificate:
    """The interpolant built from G-bar = F(tau) F(nu) and its partials alone."""
    pts = _node_array(nodes)
    u = np.asarray(signs, dtype=complex).reshape(-1)
    S = u.size
    dt = pts[:, None, 0] - pts[None, :, 0]
    dn = pts[:, None, 1] - pts[None, :, 1]

    def block(n):
        return mean_kernel(kernel, dt, dn, n)

    M = np.block([
        [block((0, 0)), block((1, 0)), block((0, 1))],
        [block((1, 0)), block((2, 0)), block((1, 1))],
        [block((0, 1)), block((1, 1)), block((0, 2))],
    ]).astype(complex)
    coeffs, cond = _solve_interpolation(M, u)
    L = 2 * kernel.N + 1
    if coeffs is None:
        zero = np.zeros(S, dtype=complex)
        return DualCertificate(zero, zero, zero, None, pts, u, kernel, L,
                               status=CertificateStatus.SINGULAR, condition_number=cond)
    return DualCertificate(coeffs[:S], coeffs[S:2 * S], coeffs[2 * S:], None, pts, u, kernel, L,
                           condition_number=cond)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateReport:
    interp_residual: float
    grad_residual: float
    max_offgrid_Q: float
    near_node_max: float
    min_singular_value: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "interp_residual": self.interp_residual,
            "grad_residual": self.grad_residual,
            "max_offgrid_Q": self.max_offgrid_Q,
            "near_node_max": self.near_node_max,
            "min_singular_value": self.min_singular_value,
            "pass": self.passed,
        }


NEAR_NODE_SAMPLES = 21


def verify_certificate(cert: DualCertificate, eval_grid_size: int = CERTIFICATE_GRID,
                       exclusion_radius: float | None = None) -> CertificateReport:
    """Check interpolation, stationarity and |Q| < 1 away from the nodes.

    Grid points within ``exclusion_radius`` of a node along both axes are
    skipped by the boundedness check; those boxes are sampled on a finer
    local grid instead, where |Q| must not exceed 1 + 1e-8.
    """
    N = (cert.L - 1) // 2
    radius = CERTIFICATE_EXCLUSION / N if exclusion_radius is None else exclusion_radius
    pts = cert.nodes

    if pts.shape[0]:
        values = cert.evaluate(pts[:, 0], pts[:, 1])
        interp = float(np.max(np.abs(values - cert.signs)))
        gt, gn = cert.gradient(pts[:, 0], pts[:, 1])
        grad = float(np.max(np.hypot(np.abs(gt), np.abs(gn))))
    else:
        interp = grad = 0.0

    Q = np.abs(cert.evaluate_grid(eval_grid_size))
    axis = np.arange(eval_grid_size) / eval_grid_size
    excluded = np.zeros(Q.shape, dtype=bool)
    for tj, nj in pts:
        excluded |= (wrap_distance(axis, tj)[:, None] < radius) & (wrap_distance(axis, nj)[None, :] < radius)
    max_off = float(Q[~excluded].max()) if (~excluded).any() else 0.0

    near = 0.0
    local = np.linspace(-radius, radius, NEAR_NODE_SAMPLES)
    for tj, nj in pts:
        near = max(near, float(np.max(np.abs(cert.evaluate(tj + local[:, None], nj + local[None, :])))))

    if cert.x is not None and pts.shape[0]:
        columns = shifted_copies(cert.x, pts[:, 0], pts[:, 1]).T
        min_sv = float(scipy.linalg.svdvals(columns).min())
    elif pts.shape[0]:
        columns = np.array([atom(r, cert.L) for r in pts]).T
        min_sv = float(scipy.linalg.svdvals(columns).min())
    else:
        min_sv = float("inf")

    passed = (
        cert.status is CertificateStatus.OK
        and interp < 1e-8
        and grad < 1e-6
        and max_off < 1.0
        and near <= 1.0 + 1e-8
        and min_sv > 1e-10
    )
    return CertificateReport(interp, grad, max_off, near, min_sv, bool(passed))


@dataclass(frozen=True, eq=False)
class DiscreteCertificate:
    """v = R^H q over the K x K grid, indexed [m, n] like the dictionary."""

    v: np.ndarray
    support: np.ndarray
    residual: float
    max_off_support: float
    satisfied: bool


def discrete_certificate(cert: DualCertificate, K: int) -> DiscreteCertificate:
    """Sample the certificate on the K-grid through the dictionary adjoint.

    v[m, n] = Q(n/K, m/K). Requires a probe-based certificate and nodes on
    the K-grid.
    """
    if cert.x is None or cert.q is None:
        raise GridError("discrete_certificate", "a certificate built from a probing signal is required")
    grid = FineGrid(cert.L, K)
    pts = cert.nodes
    scaled = pts * K
    if pts.shape[0] and np.max(np.abs(scaled - np.round(scaled))) > 1e-9:
        raise GridError("discrete_certificate", f"nodes are not on the {K}-grid")
    v = grid_adjoint(cert.q, cert.x, grid)
    support = (np.round(scaled[:, ::-1]).astype(int) % K).reshape(-1, 2)   # (m, n)

    axis = np.arange(K) / K
    direct = cert.evaluate(axis[None, :], axis[:, None])
    scale = max(1.0, float(np.max(np.abs(direct))))
    residual = float(np.max(np.abs(v - direct))) / scale

    off = np.ones(v.shape, dtype=bool)
    off[support[:, 0], support[:, 1]] = False
    max_off = float(np.max(np.abs(v[off]))) if off.any() else 0.0
    on_ok = np.allclose(v[support[:, 0], support[:, 1]], cert.signs, atol=1e-8) if support.size else True
    return DiscreteCertificate(v, support, residual, max_off,
                               bool(on_ok and max_off < 1.0 and residual < 1e-8))


# ---------------------------------------------------------------------------
# Isotropy
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IsotropyStats:
    mean: np.ndarray
    std_error: np.ndarray
    max_offdiag: float
    max_deviation: float
    diag_z: np.ndarray
    max_z: float
    trials: int


def isotropy_check(L: int, trials: int, seed: int, kind: str = "gaussian") -> IsotropyStats:
    """Monte-Carlo average of G_x^H G_x over random probes, compared to I."""
    if trials < 100:
        logger.warning("isotropy check with %d trials; statistics are not meaningful", trials)
    children = np.random.SeedSequence(seed).spawn(trials)
    size = L * L
    total = np.zeros((size, size), dtype=complex)
    total_sq = np.zeros((size, size))
    for child in children:
        G = gabor_matrix(random_probing(L, child, kind))
        gram = G.conj().T @ G
        total += gram
        total_sq += np.abs(gram) ** 2
    mean = total / trials
    var = np.maximum(total_sq / trials - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / trials)
    dev = np.abs(mean - np.eye(size))
    z = np.divide(dev, se, out=np.zeros_like(dev), where=se > 0)
    off = ~np.eye(size, dtype=bool)
    return IsotropyStats(mean, se, float(np.abs(mean[off]).max()), float(dev.max()),
                         np.diag(z).copy(), float(z.max()), trials)
