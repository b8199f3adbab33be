"""Alternating max-min SINR optimization of CPU weights and UE powers.

One block of variables is the set of unit-norm CPU weighting vectors, which
for fixed powers decouple per UE into rank-one generalized Rayleigh quotient
problems. The other block is the power vector: with the weights fixed and
the self-interference term dropped, every SINR constraint becomes
``p_k^-1 (sum_i A_ki p_i + c_k) <= 1/t``, a posynomial bound. The resulting
max-min problem is solved by bisection on ``t`` with a fixed-point
feasibility test, which reaches the same optimum as a GP solver would.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .combining import fixed_power_solution, interference_matrices
from .exceptions import IterationError, NonConvergence, NotPositiveDefinite, ZeroSignalDirection
from .linalg import equilibrated_solve, rank1_rayleigh_maximizer

log = logging.getLogger(__name__)

RIDGE_SCALE = 1e-12


def _with_ridge(B):
    """Add a tiny ridge to the matrices whose Cholesky factorization fails."""
    B = np.array(B, copy=True)
    ridged = []
    try:
        equilibrated_solve(B, np.ones(B.shape[:-1]))
        return B, ridged
    except NotPositiveDefinite:
        pass
    for k in range(B.shape[0]):
        try:
            equilibrated_solve(B[k], np.ones(B.shape[-1]))
        except NotPositiveDefinite:
            L = B.shape[-1]
            B[k] += RIDGE_SCALE * np.trace(B[k]).real / L * np.eye(L)
            ridged.append(k)
            log.warning("UE %d: near-singular weight matrix, added ridge", k)
    return B, ridged


def solve_weight_subproblem(stats, p, diagnostics=None):
    """Optimal unit-norm CPU weights for every UE at fixed powers, (K, L)."""
    B, ridged = _with_ridge(interference_matrices(stats, p))
    if diagnostics is not None:
        diagnostics["ridged_ues"] = ridged
    try:
        return rank1_rayleigh_maximizer(stats.g_mean, B)
    except NotPositiveDefinite as exc:
        k = exc.index[0] if exc.index else None
        raise NotPositiveDefinite(f"UE {k}: {exc}", index=k) from exc


def rayleigh_quotient(k, stats, p, a):
    """The weight-subproblem objective of UE ``k`` at weights ``a``."""
    B = interference_matrices(stats, p)[k]
    num = p[k] * abs(np.vdot(a, stats.g_mean[k])) ** 2
    return float(num / np.vdot(a, B @ a).real)


@dataclass(frozen=True)
class GpCoefficients:
    """Interference couplings ``A`` (zero diagonal) and noise terms ``c``."""

    A: np.ndarray
    c: np.ndarray

    @property
    def K(self):
        return len(self.c)


def gp_coefficients(stats, W):
    """Posynomial coefficients of the approximated SINR constraints.

    The noise power is folded into ``c`` so that the approximated SINR is
    ``p_k / (sum_{i != k} A_ki p_i + c_k)``.
    """
    W = np.asarray(W, dtype=complex)
    signal = np.abs(np.einsum("kl,kl->k", W.conj(), stats.g_mean)) ** 2
    scale = (1e-15 * np.linalg.norm(stats.g_mean, axis=-1)) ** 2
    for k in np.flatnonzero(~(signal > scale)):
        raise ZeroSignalDirection(f"UE {k}: weights orthogonal to the mean effective channel", index=int(k))
    quad = np.einsum("kl,kilm,km->ki", W.conj(), stats.G, W).real
    A = quad / signal[:, None]
    np.fill_diagonal(A, 0.0)
    noise = np.einsum("kl,kl->k", np.abs(W) ** 2, stats.Dk)
    c = stats.sigma2 * noise / signal
    return GpCoefficients(A=np.clip(A, 0.0, None), c=c)


def approx_sinr(k, coeffs, p):
    p = np.asarray(p, dtype=float)
    return float(p[k] / (coeffs.A[k] @ p + coeffs.c[k]))


def approx_sinrs(coeffs, p):
    p = np.asarray(p, dtype=float)
    return p / (coeffs.A @ p + coeffs.c)


def posynomial_sinr(k, stats, W, p):
    """Approximated SINR of UE ``k`` evaluated from the statistics directly."""
    p = np.asarray(p, dtype=float)
    a = W[k]
    g = stats.g_mean[k]
    others = np.einsum("i,ilm->lm", np.where(np.arange(stats.K) == k, 0.0, p), stats.G[k])
    den = np.vdot(a, (others + stats.sigma2 * np.diag(stats.Dk[k])) @ a).real
    return float(p[k] * abs(np.vdot(a, g)) ** 2 / den)


def _fixed_point(coeffs, pmax, t, max_iters):
    """Least solution of ``p = min(pmax, t (A p + c))`` and whether it is feasible.

    Iterates rise monotonically from zero, so the first time an unclipped
    update exceeds its cap the target ``t`` is known to be infeasible.
    Returns ``(p, feasible, iterations)``; ``feasible`` is None when the cap
    is hit first.
    """
    A, c = coeffs.A, coeffs.c
    p = np.zeros_like(c)
    for n in range(1, max_iters + 1):
        demand = t * (A @ p + c)
        if np.any(demand > pmax * (1.0 + 1e-12)):
            return p, False, n
        if np.all(np.abs(demand - p) <= 1e-13 * np.maximum(demand, 1e-300)):
            return demand, True, n
        p = demand
    return p, None, max_iters


def _linear_feasibility(coeffs, pmax, t):
    # a nonnegative solution of (I - tA) p = t c exists iff the spectral radius of tA is below one
    K = coeffs.K
    try:
        p = np.linalg.solve(np.eye(K) - t * coeffs.A, t * coeffs.c)
    except np.linalg.LinAlgError:
        return None, False
    ok = bool(np.all(p >= 0) and np.all(p <= pmax * (1.0 + 1e-12)))
    return (np.minimum(p, pmax) if ok else None), ok


def power_feasibility(coeffs, pmax, t, max_fp_iters=500):
    """Whether all approximated SINRs can reach ``t`` within the power caps.

    Returns ``(feasible, p)`` where ``p`` is the minimal power vector when
    feasible.
    """
    pmax = np.asarray(pmax, dtype=float)
    p, feasible, _ = _fixed_point(coeffs, pmax, t, max_fp_iters)
    if feasible is None:
        # slow geometric convergence close to the boundary: settle it exactly
        p, feasible = _linear_feasibility(coeffs, pmax, t)
    return feasible, p


def solve_power_subproblem(coeffs, pmax, rtol=1e-6, max_bisect=200, max_fp_iters=500):
    """Max-min approximated SINR over ``0 <= p <= pmax``.

    Returns ``(p, t_star)`` with ``t_star = min_k approx_sinr(k, coeffs, p)``.
    """
    pmax = np.asarray(pmax, dtype=float)
    lo, hi = 0.0, float(np.min(pmax / coeffs.c))
    p_lo = np.zeros_like(pmax)
    feasible, p = power_feasibility(coeffs, pmax, hi, max_fp_iters)
    if feasible:
        lo, p_lo = hi, p
    steps = 0
    while hi - lo > rtol * lo:
        steps += 1
        if steps > max_bisect:
            raise NonConvergence(f"bisection did not reach rtol={rtol:g} in {max_bisect} steps")
        mid = 0.5 * (lo + hi)
        feasible, p = power_feasibility(coeffs, pmax, mid, max_fp_iters)
        if feasible:
            lo, p_lo = mid, p
        else:
            hi = mid
    p_lo = np.clip(p_lo, 0.0, pmax)
    return p_lo, float(np.min(approx_sinrs(coeffs, p_lo)))


@dataclass
class IterationRecord:
    iteration: int
    p: np.ndarray
    sinr_exact: np.ndarray
    t_approx: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def min_sinr_exact(self):
        return float(np.min(self.sinr_exact))


@dataclass
class IterationTrace:
    """Per-iteration history; record 0 describes the initial powers."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def t_approx(self):
        return np.array([r.t_approx for r in self.records])

    @property
    def min_sinr_exact(self):
        return np.array([r.min_sinr_exact for r in self.records])


def alternating_maxmin(stats_provider, pmax, p0=None, max_iters=10, tol=1e-3, freeze_stats=False):
    """Alternate between the weight and power subproblems.

    ``stats_provider(p)`` returns the effective-channel statistics when the
    UEs transmit with powers ``p``; it is queried once per iteration unless
    ``freeze_stats`` is set, in which case the statistics at ``p0`` are used
    throughout. Stops when the relative change of the power-subproblem
    optimum drops to ``tol`` or after ``max_iters`` power updates.

    Returns ``(p, W, trace)``. The exact SINRs recorded in the trace use the
    optimal weights for that iteration's powers.
    """
    pmax = np.asarray(pmax, dtype=float)
    p = pmax.copy() if p0 is None else np.asarray(p0, dtype=float).copy()
    if np.any(p < 0) or np.any(p > pmax * (1 + 1e-12)):
        raise ValueError("initial powers must satisfy 0 <= p0 <= pmax")

    def evaluate(iteration, stats, p):
        diag = {}
        try:
            W = solve_weight_subproblem(stats, p, diagnostics=diag)
            _, sinr = fixed_power_solution(stats, p)
        except Exception as exc:
            raise IterationError(iteration, exc) from exc
        return W, sinr, diag

    stats = stats_provider(p)
    W, sinr, diag = evaluate(0, stats, p)
    t_prev = float(np.min(approx_sinrs(gp_coefficients(stats, W), p)))
    trace = IterationTrace([IterationRecord(0, p.copy(), sinr, t_prev, diag)])

    for it in range(1, max_iters + 1):
        try:
            coeffs = gp_coefficients(stats, W)
            p, t = solve_power_subproblem(coeffs, pmax)
        except Exception as exc:
            raise IterationError(it, exc) from exc
        if not freeze_stats:
            stats = stats_provider(p)
        W, sinr, diag = evaluate(it, stats, p)
        trace.records.append(IterationRecord(it, p.copy(), sinr, t, diag))
        if abs(t - t_prev) <= tol * abs(t):
            break
        t_prev = t
    return p, W, trace
