"""Local combining at the APs and the CPU-side effective channel statistics.

Combiners ``v`` share the realization layout of the channels,
``(n_real, K, L, N)``. The statistics gathered from them are what the CPU
sees: the mean effective channel of each UE, the second moments of every
effective channel, and the per-AP combiner energies.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDenominator, DimensionMismatch, InsufficientRealizations, InvalidFraction
from .linalg import cho_solve_factor, cholesky, cholesky_solve, equilibrated_solve, fix_phase, hermitian_part

log = logging.getLogger(__name__)

STATS_CHUNK = 256


def lmmse_combiners(h_hat, C, p, sigma2):
    """Local MMSE combiners for every realization, UE and AP.

    The Gram matrix at AP l is ``sum_i p_i (h_hat_il h_hat_il^H + C_il) + sigma2 I``;
    it is built and factored once per (realization, AP) and reused for all UEs.
    """
    p = np.asarray(p, dtype=float)
    n_real, K, L, N = h_hat.shape
    hp = h_hat * np.sqrt(p)[None, :, None, None]
    gram = np.einsum("rkli,rklj->rlij", hp, hp.conj())
    gram += np.einsum("k,klij->lij", p, C)[None] + sigma2 * np.eye(N)
    rhs = np.transpose(h_hat * p[None, :, None, None], (0, 2, 3, 1))  # (n, L, N, K)
    V = cho_solve_factor(cholesky(gram), rhs)
    return np.transpose(V, (0, 3, 1, 2))


def lmmse_combiner(h_hat, C, p, sigma2, r, k, l):
    """Single L-MMSE combiner ``v_kl`` for realization ``r``."""
    p = np.asarray(p, dtype=float)
    N = h_hat.shape[-1]
    Hl = h_hat[r, :, l, :]  # (K, N)
    gram = (Hl.T * p) @ Hl.conj() + np.einsum("k,kij->ij", p, C[:, l]) + sigma2 * np.eye(N)
    return cholesky_solve(hermitian_part(gram), p[k] * Hl[k])


def mr_combiners(h_hat):
    return np.array(h_hat, copy=True)


def mr_combiner(h_hat, r, k, l):
    return np.array(h_hat[r, k, l], copy=True)


@dataclass(frozen=True)
class EffectiveStats:
    """Monte Carlo statistics of the effective channels ``g_ki``.

    ``g_mean[k]`` is E{g_kk} (length L), ``G[k, i]`` is E{g_ki g_ki^H}
    (L x L), ``Dk[k, l]`` is E{||v_kl||^2}; ``sigma2`` is the receiver noise
    power in Watts.
    """

    g_mean: np.ndarray
    G: np.ndarray
    Dk: np.ndarray
    n_mc: int
    sigma2: float

    @property
    def K(self):
        return self.g_mean.shape[0]

    @property
    def L(self):
        return self.g_mean.shape[1]


def effective_channels(h, v):
    """``g[r, k, i, l] = v_kl^H h_il``."""
    vt = np.transpose(v, (0, 2, 1, 3)).conj()  # (r, L, K, N)
    ht = np.transpose(h, (0, 2, 3, 1))  # (r, L, N, K)
    return np.transpose(vt @ ht, (0, 2, 3, 1))


def estimate_effective_stats(h, v, sigma2, n_mc=None):
    """Sample means over the first ``n_mc`` realizations (all by default).

    Realizations are accumulated in fixed-size chunks in index order, so the
    result does not depend on how the chunks are scheduled.
    """
    if h.shape != v.shape:
        raise DimensionMismatch(f"channels {h.shape} vs combiners {v.shape}")
    n_mc = h.shape[0] if n_mc is None else n_mc
    if n_mc < 1 or n_mc > h.shape[0]:
        raise InsufficientRealizations(f"n_mc={n_mc} with {h.shape[0]} realizations available")
    _, K, L, _ = h.shape
    g_sum = np.zeros((K, L), dtype=complex)
    G_sum = np.zeros((K, K, L, L), dtype=complex)
    for start in range(0, n_mc, STATS_CHUNK):
        stop = min(start + STATS_CHUNK, n_mc)
        g = effective_channels(h[start:stop], v[start:stop])  # (r, K, K, L)
        g_sum += np.einsum("rkkl->kl", g)
        gt = np.transpose(g, (1, 2, 3, 0))  # (K, K, L, r)
        G_sum += gt @ np.swapaxes(gt, -1, -2).conj()
    Dk = np.mean(np.sum(np.abs(v[:n_mc]) ** 2, axis=-1), axis=0)
    return EffectiveStats(
        g_mean=g_sum / n_mc,
        G=hermitian_part(G_sum / n_mc),
        Dk=Dk,
        n_mc=n_mc,
        sigma2=float(sigma2),
    )


def interference_matrix(k, stats, p):
    """Denominator matrix of the effective SINR of UE ``k`` (L x L)."""
    p = np.asarray(p, dtype=float)
    g = stats.g_mean[k]
    B = np.einsum("i,ilm->lm", p, stats.G[k]) - p[k] * np.outer(g, g.conj())
    return hermitian_part(B + stats.sigma2 * np.diag(stats.Dk[k]))


def interference_matrices(stats, p):
    """Stack of :func:`interference_matrix` for all UEs, (K, L, L)."""
    p = np.asarray(p, dtype=float)
    g = stats.g_mean
    B = np.einsum("i,kilm->klm", p, stats.G) - p[:, None, None] * np.einsum("kl,km->klm", g, g.conj())
    idx = np.arange(stats.L)
    B[:, idx, idx] += stats.sigma2 * stats.Dk
    return hermitian_part(B)


def _clamped(den, stats, k):
    if den <= 0:
        floor = stats.sigma2 * np.min(stats.Dk[k]) * 1e-6
        log.warning("UE %d: SINR denominator %.3e <= 0 from sampling noise, clamped to %.3e", k, den, floor)
        den = floor
    if den <= 1e-300:
        raise DegenerateDenominator(f"UE {k}: SINR denominator {den:.3e} is degenerate")
    return den


def effective_sinr(k, stats, p, a):
    """Effective SINR of UE ``k`` for CPU weights ``a`` (unit norm)."""
    a = np.asarray(a, dtype=complex)
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise ValueError("weight vector must have unit norm")
    num = p[k] * abs(np.vdot(a, stats.g_mean[k])) ** 2
    den = np.vdot(a, interference_matrix(k, stats, p) @ a).real
    return float(num / _clamped(den, stats, k))


def effective_sinrs(stats, p, W):
    """Effective SINR of every UE, row ``k`` of ``W`` being its weights."""
    p = np.asarray(p, dtype=float)
    num = p * np.abs(np.einsum("kl,kl->k", W.conj(), stats.g_mean)) ** 2
    den = np.einsum("kl,klm,km->k", W.conj(), interference_matrices(stats, p), W).real
    den = np.array([_clamped(d, stats, k) for k, d in enumerate(den)])
    return num / den


def effective_sinr_from_samples(k, h, v, p, a, sigma2):
    """Effective SINR of UE ``k`` written with E{|a^H g_ki|^2} over raw samples.

    Independent of :class:`EffectiveStats`; used to cross-check it.
    """
    p = np.asarray(p, dtype=float)
    g = np.einsum("rln,riln->ril", v[:, k].conj(), h)  # g_ki per realization
    proj = np.einsum("l,ril->ri", np.asarray(a).conj(), g)
    signal = p[k] * abs(np.mean(proj[:, k])) ** 2
    second = np.mean(np.abs(proj) ** 2, axis=0)
    D = np.mean(np.sum(np.abs(v[:, k]) ** 2, axis=-1), axis=0)
    noise = sigma2 * np.sum(np.abs(a) ** 2 * D)
    return float(signal / (np.dot(p, second) - signal + noise))


def optimal_weights_fixed_power(k, stats, p):
    """Best CPU weights for UE ``k`` at fixed powers and the resulting SINR.

    Returns ``(a_k, sinr_max)`` with ``a_k`` unit-norm and phase-fixed.
    """
    p = np.asarray(p, dtype=float)
    g = stats.g_mean[k]
    B = interference_matrix(k, stats, p)
    a = equilibrated_solve(B + p[k] * np.outer(g, g.conj()), g)
    a = fix_phase(a / np.linalg.norm(a))
    sinr = p[k] * np.vdot(g, equilibrated_solve(B, g)).real
    return a, float(sinr)


def fixed_power_solution(stats, p):
    """Closed-form weights and SINRs for all UEs, ``(W, sinr)``."""
    p = np.asarray(p, dtype=float)
    g = stats.g_mean
    B = interference_matrices(stats, p)
    x = equilibrated_solve(B, g)
    W = fix_phase(x / np.linalg.norm(x, axis=-1, keepdims=True))
    sinr = p * np.einsum("kl,kl->k", g.conj(), x).real
    return W, sinr


@dataclass(frozen=True)
class SinrReport:
    sinr: np.ndarray
    se: np.ndarray
    min_se: float


def se_from_sinr(sinr, tau_p, tau_c):
    """Spectral efficiency per UE (bit/s/Hz) after the pilot overhead."""
    if not 0 < tau_p < tau_c:
        raise InvalidFraction(f"need 0 < tau_p < tau_c, got tau_p={tau_p}, tau_c={tau_c}")
    sinr = np.atleast_1d(np.asarray(sinr, dtype=float))
    if np.any(sinr < 0):
        raise ValueError("SINR must be nonnegative")
    se = (1.0 - tau_p / tau_c) * np.log2(1.0 + sinr)
    return SinrReport(sinr=sinr, se=se, min_se=float(np.min(se)))
