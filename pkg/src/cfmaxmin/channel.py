"""Pilot assignment, channel synthesis and MMSE channel estimation.

Array conventions: realizations ``h`` and estimates ``h_hat`` have shape
``(n_real, K, L, N)``; correlation and error covariance matrices have shape
``(K, L, N, N)``; pilot-signal correlations ``Psi`` have shape
``(tau_p, L, N, N)``. Pilot indices are 0-based.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidConfig
from .linalg import cho_solve_factor, cholesky, cholesky_solve, hermitian_part

MAX_PILOT_REDRAWS = 10_000


@dataclass(frozen=True)
class PilotAssignment:
    tau_p: int
    t: np.ndarray

    @property
    def K(self):
        return len(self.t)

    def sharers(self, pilot):
        """UEs using ``pilot``."""
        return np.flatnonzero(self.t == pilot)

    def co_users(self, k):
        """The set of UEs sharing UE ``k``'s pilot (includes ``k``)."""
        return self.sharers(self.t[k])

    def spreading(self, scale):
        """(tau_p, K) matrix with ``scale[i]`` where UE i uses pilot t, else 0."""
        S = np.zeros((self.tau_p, self.K))
        S[self.t, np.arange(self.K)] = scale
        return S


def assign_pilots(cfg, rng):
    """Identity assignment for f = 1, otherwise uniform random pilots.

    Random assignments are redrawn until every pilot is used whenever there
    are at least as many UEs as pilots.
    """
    K, tau_p = cfg.K, cfg.tau_p
    if tau_p < 1 or K < 1:
        raise InvalidConfig(f"invalid pilot setup K={K}, tau_p={tau_p}")
    if cfg.f == 1:
        return PilotAssignment(tau_p, np.arange(K))
    for _ in range(MAX_PILOT_REDRAWS):
        t = rng.integers(0, tau_p, size=K)
        if K < tau_p or np.unique(t).size == tau_p:
            return PilotAssignment(tau_p, t)
    raise InvalidConfig("could not draw a pilot assignment using every pilot")


def _realization_rng(entropy, key, r):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=tuple(key) + (r,))))


def standard_complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def correlation_sqrt(R):
    """Hermitian square roots of a stack of PSD matrices."""
    lam, V = np.linalg.eigh(hermitian_part(R))
    return (V * np.sqrt(np.clip(lam, 0.0, None))[..., None, :]) @ np.swapaxes(V, -1, -2).conj()


def draw_realizations(R, n_real, tau_p, entropy, key=()):
    """Channel realizations and normalized pilot-phase noise.

    Realization ``r`` is drawn from its own generator keyed by
    ``(entropy, key, r)``, so any realization is reproducible regardless of
    the order in which realizations are produced. Returns ``(h, w)`` where
    ``w`` has shape ``(n_real, tau_p, L, N)`` and unit variance.
    """
    K, L, N = R.shape[:3]
    F = correlation_sqrt(R)
    h = np.empty((n_real, K, L, N), dtype=complex)
    w = np.empty((n_real, tau_p, L, N), dtype=complex)
    for r in range(n_real):
        rng = _realization_rng(entropy, key, r)
        h[r] = np.einsum("klij,klj->kli", F, standard_complex_normal(rng, (K, L, N)))
        w[r] = standard_complex_normal(rng, (tau_p, L, N))
    return h, w


def pilot_observation(h_r, pilot, l, assignment, p_pilot, sigma2, rng=None):
    """Despread pilot signal ``z`` at AP ``l`` for one realization.

    ``h_r`` has shape (K, L, N). Noise is drawn from ``rng`` unless
    ``sigma2`` is zero.
    """
    tau_p = assignment.tau_p
    users = assignment.sharers(pilot)
    z = np.zeros(h_r.shape[-1], dtype=complex)
    z += np.sqrt(p_pilot[users] * tau_p) @ h_r[users, l]
    if sigma2 > 0:
        z = z + np.sqrt(sigma2) * standard_complex_normal(rng, h_r.shape[-1])
    return z


def pilot_observations(h, w, assignment, p_pilot, sigma2):
    """All despread pilot signals, shape (n_real, tau_p, L, N)."""
    S = assignment.spreading(np.sqrt(np.asarray(p_pilot) * assignment.tau_p))
    return np.einsum("tk,rkln->rtln", S, h) + np.sqrt(sigma2) * w


def psi_matrix(pilot, l, assignment, p_pilot, R, sigma2):
    N = R.shape[-1]
    users = assignment.sharers(pilot)
    weights = assignment.tau_p * np.asarray(p_pilot)[users]
    return np.einsum("i,ijk->jk", weights, R[users, l]) + sigma2 * np.eye(N)


def psi_matrices(assignment, p_pilot, R, sigma2):
    """Received pilot-signal correlation for every (pilot, AP), (tau_p, L, N, N)."""
    S = assignment.spreading(assignment.tau_p * np.asarray(p_pilot))
    N = R.shape[-1]
    return np.einsum("tk,klij->tlij", S, R) + sigma2 * np.eye(N)


def mmse_estimate(z, k, l, assignment, p_pilot, R, Psi):
    """MMSE estimate of the channel of UE ``k`` at AP ``l`` from its pilot signal."""
    x = cholesky_solve(Psi, z)
    return np.sqrt(p_pilot[k] * assignment.tau_p) * (R[k, l] @ x)


def error_covariance(k, l, assignment, p_pilot, R, Psi):
    Rkl = R[k, l]
    X = cholesky_solve(Psi, Rkl)
    return hermitian_part(Rkl - p_pilot[k] * assignment.tau_p * Rkl @ X)


@dataclass(frozen=True)
class ChannelEstimateSet:
    h_hat: np.ndarray
    Psi: np.ndarray
    C: np.ndarray


def estimate_channels(z, assignment, p_pilot, R, sigma2):
    """MMSE estimates for all realizations plus the error covariances."""
    p_pilot = np.asarray(p_pilot, dtype=float)
    tau_p = assignment.tau_p
    Psi = psi_matrices(assignment, p_pilot, R, sigma2)
    Lc = cholesky(Psi)
    # Psi^{-1} z for every realization at once: rhs laid out (tau_p, L, N, n_real)
    x = cho_solve_factor(Lc, np.transpose(z, (1, 2, 3, 0)))
    x_k = x[assignment.t]  # (K, L, N, n_real)
    scale = np.sqrt(p_pilot * tau_p)
    h_hat = scale[:, None, None, None] * np.einsum("klij,kljr->klir", R, x_k)
    h_hat = np.transpose(h_hat, (3, 0, 1, 2))

    Psi_inv_R = cho_solve_factor(Lc[assignment.t], R)  # (K, L, N, N)
    C = hermitian_part(R - (p_pilot * tau_p)[:, None, None, None] * R @ Psi_inv_R)
    return ChannelEstimateSet(h_hat=h_hat, Psi=Psi, C=C)
