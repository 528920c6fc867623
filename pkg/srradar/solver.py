"""Fine-grid l1 recovery, support extraction, debiasing and resolution metrics.

Both programs are solved through the penalized form

    minimize  lam * ||b||_1 + 0.5 * ||y - R b||_2^2

with an accelerated proximal-gradient loop (monotone restart) and a
decreasing continuation in lam, warm-started, until the residual meets the
constraint ||y - R b||_2^2 <= delta. Each stage stops on the relative
fixed-point change ``tol``; a delta below tol * ||y||^2 is met to that
relative floor instead. The inequality program additionally refines lam by
bisection so the residual lands close to delta instead of far below it.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .analysis import wrap_distance
from .constants import (
    CLUSTER_RADIUS,
    EQUALITY_DELTA_FLOOR,
    EQUALITY_RELATIVE_RESIDUAL,
    POWER_ITERATIONS,
    SUPPORT_THRESHOLD,
)
from .errors import DimensionError
from .grid import (
    FineGrid,
    block_adjoint,
    block_forward,
    block_kernel,
    dictionary_adjoint,
    dictionary_forward,
)
from .signal import Measurement, ProbingSignal, centered_fft, shifted_copies

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1.01          # accept ||r||^2 <= 1.01 delta
REFINE_LOWER = 0.9                # bisection targets [0.9, 1] of the accepted residual
REFINE_STEPS = 10
LAMBDA_FLOOR = 1e-12              # relative to lam_max
MAX_STEP_DOUBLINGS = 30
RANK_TOLERANCE = 1e-8


# ---------------------------------------------------------------------------
# Data structures
# ---------------------------------------------------------------------------

class SolverStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs.

    Attributes
    ----------
    max_iters : int
        Total iteration budget across all continuation stages.
    tol : float
        Relative fixed-point tolerance ||b_{k+1} - b_k|| / ||b_{k+1}||. Also the
        floor tol * ||y||^2 on the accepted squared residual.
    delta : float
        Squared residual bound for ``solve_l1_err``.
    step_rule : str
        ``"power"`` (1/Lip from power iteration on R^H R) or
        ``"backtracking"``.
    """

    max_iters: int = 10_000
    tol: float = 1e-6
    delta: float = 0.0
    step_rule: str = "power"
    power_iterations: int = POWER_ITERATIONS
    support_threshold: float = SUPPORT_THRESHOLD
    cluster_radius: int = CLUSTER_RADIUS

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_rule not in ("power", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass(frozen=True)
class Estimate:
    """A recovered scatterer; ``beta`` is set for MIMO estimates only."""

    b: complex
    tau: float
    nu: float
    beta: float | None = None
    rank_deficient: bool = False

    def to_dict(self) -> dict:
        out = {"b_re": float(np.real(self.b)), "b_im": float(np.imag(self.b)),
               "tau": float(self.tau), "nu": float(self.nu)}
        if self.beta is not None:
            out["beta"] = float(self.beta)
        if self.rank_deficient:
            out["rank_deficient"] = True
        return out


@dataclass(frozen=True, eq=False)
class SparseSolution:
    """Solver output over the fine grid.

    ``coeffs`` has the grid's shape, ``y`` is the measurement it was fitted
    to and ``objective`` the accepted penalized objectives of the last
    continuation stage.
    """

    coeffs: np.ndarray
    estimates: tuple[Estimate, ...]
    residual_norm: float
    status: SolverStatus
    iters: int
    y: np.ndarray = field(repr=False)
    lam: float = 0.0
    objective: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def converged(self) -> bool:
        return self.status is SolverStatus.CONVERGED

    def to_dict(self, resolution_error: float | None = None) -> dict:
        """Result JSON; ``resolution_error`` is included when the truth is known."""
        out = {
            "status": self.status.value,
            "iters": int(self.iters),
            "residual": float(self.residual_norm),
            "estimates": [e.to_dict() for e in self.estimates],
        }
        if resolution_error is not None:
            out["resolution_error"] = float(resolution_error)
        return out


class LinearMap(NamedTuple):
    """A matrix-free operator acting on coefficient arrays of ``shape``."""

    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    shape: tuple[int, ...]


class PenalizedResult(NamedTuple):
    b: np.ndarray
    Rb: np.ndarray
    iters: int
    converged: bool
    lip: float
    objective: np.ndarray


# ---------------------------------------------------------------------------
# Proximal-gradient core
# ---------------------------------------------------------------------------

def soft_threshold(x: np.ndarray, thresh: float) -> np.ndarray:
    """Proximal operator of thresh * ||x||_1 for complex x."""
    return np.maximum(np.abs(x) - thresh, 0.0) * np.exp(1j * np.angle(x))


def estimate_lipschitz(op: LinearMap, n_iter: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Largest eigenvalue of R^H R by power iteration, inflated by 1%."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=op.shape) + 1j * rng.normal(size=op.shape)
    v /= np.linalg.norm(v)
    lip = 0.0
    for _ in range(n_iter):
        w = op.adjoint(op.forward(v))
        lip = float(np.linalg.norm(w))
        if lip == 0.0:
            return 1.0
        v = w / lip
    return 1.01 * lip


def solve_penalized(
    op: LinearMap,
    y: np.ndarray,
    lam: float,
    *,
    tol: float,
    max_iters: int,
    lip: float,
    b0: np.ndarray | None = None,
    Rb0: np.ndarray | None = None,
    backtracking: bool = False,
) -> PenalizedResult:
    """Minimize lam ||b||_1 + 0.5 ||y - R b||^2 by FISTA with monotone restart.

    Each iteration costs one forward and one adjoint application; R z is
    formed from R b and R b_prev by linearity. When the accelerated step
    raises the objective it is rejected, momentum is reset and a plain
    proximal step is taken from the current iterate instead, so the
    recorded objective never increases.
    """
    b = np.zeros(op.shape, dtype=complex) if b0 is None else np.asarray(b0, dtype=complex)
    Rb = op.forward(b) if Rb0 is None else Rb0

    def objective(v, Rv):
        r = y - Rv
        return lam * float(np.sum(np.abs(v))) + 0.5 * float(np.vdot(r, r).real)

    obj = objective(b, Rb)
    history = [obj]
    b_prev, Rb_prev = b, Rb
    t_prev = t = 1.0
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        beta = (t_prev - 1.0) / t
        z = b + beta * (b - b_prev)
        Rz = Rb + beta * (Rb - Rb_prev)
        grad = op.adjoint(Rz - y)
        p = soft_threshold(z - grad / lip, lam / lip)
        Rp = op.forward(p)

        if backtracking:
            fz = 0.5 * float(np.vdot(Rz - y, Rz - y).real)
            for _ in range(MAX_STEP_DOUBLINGS):
                d = p - z
                bound = fz + float(np.vdot(grad, d).real) + 0.5 * lip * float(np.vdot(d, d).real)
                if 0.5 * float(np.vdot(Rp - y, Rp - y).real) <= bound * (1 + 1e-12):
                    break
                lip *= 2.0
                p = soft_threshold(z - grad / lip, lam / lip)
                Rp = op.forward(p)

        obj_p = objective(p, Rp)
        slack = 1e-12 * max(1.0, abs(obj))
        if obj_p > obj + slack:
            grad_b = op.adjoint(Rb - y)
            for _ in range(MAX_STEP_DOUBLINGS):
                p = soft_threshold(b - grad_b / lip, lam / lip)
                Rp = op.forward(p)
                obj_p = objective(p, Rp)
                if obj_p <= obj + slack:
                    break
                lip *= 2.0
            else:
                logger.warning("no descent after %d step doublings, stopping at iteration %d",
                               MAX_STEP_DOUBLINGS, it)
                break
            t = 1.0

        change = np.linalg.norm(p - b) / max(np.linalg.norm(p), 1e-300)
        b_prev, Rb_prev = b, Rb
        b, Rb = p, Rp
        obj = obj_p
        history.append(obj)
        t_prev, t = t, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if change < tol:
            converged = True
            break

    return PenalizedResult(b, Rb, it, converged, lip, np.asarray(history))


def solve_constrained(op: LinearMap, y: np.ndarray, delta: float, config: SolverConfig,
                      *, refine: bool) -> SparseSolution:
    """Minimize ||b||_1 subject to ||y - R b||^2 <= delta by continuation in lam."""
    y = np.asarray(y, dtype=complex)
    ynorm = float(np.linalg.norm(y))
    zero = np.zeros(op.shape, dtype=complex)

    if ynorm**2 <= delta:
        return SparseSolution(zero, (), ynorm, SolverStatus.CONVERGED, 0, y)

    lam_max = float(np.max(np.abs(op.adjoint(y))))
    if lam_max == 0.0:
        logger.warning("measurement is orthogonal to the dictionary range")
        return SparseSolution(zero, (), ynorm, SolverStatus.INFEASIBLE, 0, y)

    backtracking = config.step_rule == "backtracking"
    lip = estimate_lipschitz(op, n_iter=5 if backtracking else config.power_iterations)
    target = FEASIBILITY_SLACK * max(delta, config.tol * ynorm**2)

    b, Rb = zero, np.zeros_like(y)
    res = ynorm
    lam = lam_hi = lam_max
    iters = 0
    best: PenalizedResult | None = None
    best_lam = lam
    status = SolverStatus.MAX_ITERS

    while True:
        lam *= float(np.clip(0.9 * np.sqrt(target) / res, 0.02, 0.5))
        if lam < LAMBDA_FLOOR * lam_max:
            logger.warning("lam fell below %.3g with residual %.3g above %.3g",
                           LAMBDA_FLOOR * lam_max, res, np.sqrt(target))
            status = SolverStatus.INFEASIBLE
            break
        stage = solve_penalized(op, y, lam, tol=config.tol, max_iters=config.max_iters - iters,
                                lip=lip, b0=b, Rb0=Rb, backtracking=backtracking)
        iters += stage.iters
        lip = stage.lip
        b, Rb = stage.b, stage.Rb
        res = float(np.linalg.norm(y - Rb))
        logger.debug("lam=%.3e iters=%d residual^2=%.3e delta=%.3e", lam, stage.iters, res**2, delta)
        if res**2 <= target:
            best, best_lam = stage, lam
            break
        lam_hi = lam
        if iters >= config.max_iters:
            break

    if best is not None and refine:
        lam_lo = best_lam
        for _ in range(REFINE_STEPS):
            best_res2 = float(np.linalg.norm(y - best.Rb) ** 2)
            if best_res2 >= REFINE_LOWER * target or iters >= config.max_iters:
                break
            mid = float(np.sqrt(lam_lo * lam_hi))
            stage = solve_penalized(op, y, mid, tol=config.tol, max_iters=config.max_iters - iters,
                                    lip=lip, b0=best.b, Rb0=best.Rb, backtracking=backtracking)
            iters += stage.iters
            lip = stage.lip
            if float(np.linalg.norm(y - stage.Rb) ** 2) <= target:
                best, best_lam, lam_lo = stage, mid, mid
            else:
                lam_hi = mid

    if best is not None:
        status = SolverStatus.CONVERGED if best.converged else SolverStatus.MAX_ITERS
        b, Rb = best.b, best.Rb
        history = best.objective
        lam = best_lam
    else:
        history = np.zeros(0)

    if status is not SolverStatus.CONVERGED:
        logger.warning("solver stopped with status %s after %d iterations", status.value, iters)
    else:
        logger.info("converged in %d iterations, lam=%.3e", iters, lam)
    return SparseSolution(b, (), float(np.linalg.norm(y - Rb)), status, iters, y, lam, history)


# ---------------------------------------------------------------------------
# SISO programs
# ---------------------------------------------------------------------------

def siso_map(x: ProbingSignal, grid: FineGrid) -> LinearMap:
    """R over the active columns of ``grid``.

    A restricted grid acts on its leading ``grid.active_shape`` block only;
    ``embed_coefficients`` places the result back on the full K x K grid.
    """
    if x.L != grid.L:
        raise DimensionError("siso_map", f"probe L={x.L} but grid L={grid.L}")
    xhat = centered_fft(x.samples)
    K = grid.K
    if grid.region is None:
        return LinearMap(lambda b: dictionary_forward(b, xhat, K, K),
                         lambda y: dictionary_adjoint(y, xhat, K, K),
                         grid.shape)
    kernel = block_kernel(xhat, K, grid.active_shape)
    return LinearMap(lambda b: block_forward(b, kernel),
                     lambda y: block_adjoint(y, kernel),
                     grid.active_shape)


def embed_coefficients(sol: SparseSolution, grid: FineGrid) -> SparseSolution:
    if sol.coeffs.shape == grid.shape:
        return sol
    full = np.zeros(grid.shape, dtype=complex)
    rows, cols = sol.coeffs.shape
    full[:rows, :cols] = sol.coeffs
    return replace(sol, coeffs=full)


def _measurement_vector(y, L: int) -> np.ndarray:
    yv = y.y if isinstance(y, Measurement) else np.asarray(y, dtype=complex).reshape(-1)
    if yv.size != L:
        raise DimensionError("solve", f"expected {L} samples, got {yv.size}")
    return yv


def equality_delta(y: np.ndarray) -> float:
    return max(EQUALITY_DELTA_FLOOR, (EQUALITY_RELATIVE_RESIDUAL * float(np.linalg.norm(y))) ** 2)


def solve_l1(y, x: ProbingSignal, grid: FineGrid, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """min ||b||_1 subject to y = R b, to the residual floor set by ``config.tol``."""
    yv = _measurement_vector(y, grid.L)
    sol = solve_constrained(siso_map(x, grid), yv, equality_delta(yv), config, refine=False)
    return embed_coefficients(sol, grid)


def solve_l1_err(y, x: ProbingSignal, grid: FineGrid, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """min ||b||_1 subject to ||y - R b||_2^2 <= config.delta.

    A delta below the machine-scale equality bound is raised to it.
    """
    yv = _measurement_vector(y, grid.L)
    delta = max(config.delta, equality_delta(yv))
    sol = solve_constrained(siso_map(x, grid), yv, delta, config, refine=True)
    return embed_coefficients(sol, grid)


# ---------------------------------------------------------------------------
# Extraction and debiasing
# ---------------------------------------------------------------------------

def cluster_support(coeffs: np.ndarray, radius: int = CLUSTER_RADIUS,
                    threshold: float = SUPPORT_THRESHOLD) -> list[np.ndarray]:
    """Group grid indices with |b| > threshold * max|b| into clusters.

    Two indices are linked when their wrap-around distance along every axis
    is at most ``radius``. Returns one (n_i, ndim) index array per cluster.
    """
    mag = np.abs(coeffs)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return []
    idx = np.argwhere(mag > threshold * peak)
    tree = cKDTree(idx.astype(float), boxsize=np.asarray(coeffs.shape, dtype=float))
    pairs = tree.query_pairs(r=radius, p=np.inf, output_type="ndarray")
    n = idx.shape[0]
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, labels = connected_components(adj, directed=False)
    return [idx[labels == c] for c in range(count)]


def cluster_centroid(coeffs: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Magnitude-weighted centroid in fractional grid units, wrapped per axis."""
    shape = np.asarray(coeffs.shape)
    w = np.abs(coeffs[tuple(members.T)])
    anchor = members[np.argmax(w)]
    offsets = (members - anchor + shape // 2) % shape - shape // 2
    return (anchor + (w[:, None] * offsets).sum(axis=0) / w.sum()) % shape


def debias(columns: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares gains for ``columns`` (M x S) and per-column rank flags."""
    S = columns.shape[1]
    if S == 0:
        return np.zeros(0, dtype=complex), np.zeros(0, dtype=bool)
    gains = scipy.linalg.lstsq(columns, y)[0]
    _, r, piv = scipy.linalg.qr(columns, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    flags = np.zeros(S, dtype=bool)
    weak = np.flatnonzero(diag < RANK_TOLERANCE * diag[0]) if diag[0] > 0 else np.arange(diag.size)
    flags[piv[weak]] = True
    flags[piv[diag.size:]] = True
    return gains, flags


def extract_and_debias(sol: SparseSolution, x: ProbingSignal, grid: FineGrid,
                       cluster_radius: int = CLUSTER_RADIUS,
                       threshold: float = SUPPORT_THRESHOLD) -> SparseSolution:
    """Merge nearby nonzeros into continuous estimates and refit their gains."""
    clusters = cluster_support(sol.coeffs, cluster_radius, threshold)
    if not clusters:
        return replace(sol, estimates=())
    centroids = np.array([cluster_centroid(sol.coeffs, c) for c in clusters])
    taus = centroids[:, 1] / grid.K
    nus = centroids[:, 0] / grid.K
    columns = shifted_copies(x, taus, nus).T
    gains, flags = debias(columns, sol.y)
    if flags.any():
        logger.warning("%d of %d clusters are rank deficient", int(flags.sum()), len(clusters))
    estimates = tuple(
        Estimate(complex(g), float(t), float(n), rank_deficient=bool(f))
        for g, t, n, f in zip(gains, taus, nus, flags)
    )
    return replace(sol, estimates=estimates)


# ---------------------------------------------------------------------------
# Resolution error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolutionReport:
    value: float
    matched: int
    unmatched: int


def match_pairs(dist: np.ndarray) -> list[tuple[int, int]]:
    """Greedy nearest-pair assignment on a (n_est, n_truth) distance matrix."""
    if dist.size == 0:
        return []
    order = np.argsort(dist, axis=None, kind="stable")
    used_e, used_t = set(), set()
    pairs = []
    for flat in order:
        i, j = np.unravel_index(flat, dist.shape)
        if i in used_e or j in used_t:
            continue
        pairs.append((int(i), int(j)))
        used_e.add(i)
        used_t.add(j)
        if len(pairs) == min(dist.shape):
            break
    return pairs


def report_from_distances(dist: np.ndarray) -> ResolutionReport:
    n_est, n_true = dist.shape
    pairs = match_pairs(dist)
    value = float(np.mean([dist[i, j] for i, j in pairs])) if pairs else float("nan")
    return ResolutionReport(value, len(pairs), (n_est - len(pairs)) + (n_true - len(pairs)))


def resolution_report(estimates, truth, L: int) -> ResolutionReport:
    """Average L * ||(dtau, dnu)||_2 over greedily matched pairs."""
    est = np.array([(e.tau, e.nu) for e in estimates], dtype=float).reshape(-1, 2)
    tru = np.array([(s.tau, s.nu) for s in truth], dtype=float).reshape(-1, 2)
    dt = wrap_distance(est[:, None, 0], tru[None, :, 0])
    dn = wrap_distance(est[:, None, 1], tru[None, :, 1])
    return report_from_distances(L * np.sqrt(dt**2 + dn**2))


def resolution_error(estimates, truth, L: int) -> float:
    report = resolution_report(estimates, truth, L)
    if report.unmatched:
        logger.info("%d estimates/scatterers left unmatched", report.unmatched)
    return report.value
