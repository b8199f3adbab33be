import numpy as np
import pytest
from conftest import crandn, frob_rel

import cfmaxmin.combining as combining
from cfmaxmin.combining import (
    EffectiveStats,
    effective_sinr,
    effective_sinr_from_samples,
    effective_sinrs,
    estimate_effective_stats,
    fixed_power_solution,
    lmmse_combiner,
    lmmse_combiners,
    mr_combiner,
    mr_combiners,
    optimal_weights_fixed_power,
    se_from_sinr,
)
from cfmaxmin.exceptions import DegenerateDenominator, DimensionMismatch, InsufficientRealizations, InvalidFraction
from cfmaxmin.geometry import NetworkConfig
from cfmaxmin.harness import build_drop


def random_setup(rng, n=300, K=3, L=4, N=2):
    """Random channels, estimates and L-MMSE combiners with a plausible structure."""
    h = crandn(rng, n, K, L, N) * rng.uniform(0.2, 2.0, (1, K, L, 1))
    h_hat = 0.8 * h + 0.3 * crandn(rng, n, K, L, N)
    C = np.broadcast_to(0.1 * np.eye(N), (K, L, N, N)).astype(complex)
    p = rng.uniform(0.2, 1.0, K)
    v = lmmse_combiners(h_hat, C, p, 0.5)
    return h, v, p


def random_stats(rng, **kw):
    h, v, p = random_setup(rng, **kw)
    return estimate_effective_stats(h, v, 0.5), p, h, v


def unit(rng, L):
    a = crandn(rng, L)
    return a / np.linalg.norm(a)


class TestLmmseCombiner:
    def test_single_ue_shrinkage(self):
        h_hat = np.zeros((1, 1, 1, 3), dtype=complex)
        h_hat[..., 0] = 1
        C = np.zeros((1, 1, 3, 3), dtype=complex)
        v = lmmse_combiners(h_hat, C, np.ones(1), 1.0)
        np.testing.assert_allclose(v[0, 0, 0], [0.5, 0, 0])
        np.testing.assert_allclose(lmmse_combiner(h_hat, C, np.ones(1), 1.0, 0, 0, 0), [0.5, 0, 0])

    def test_zero_power(self):
        rng = np.random.default_rng(0)
        h_hat = crandn(rng, 2, 2, 1, 2)
        C = np.broadcast_to(np.eye(2), (2, 1, 2, 2))
        v = lmmse_combiners(h_hat, C, np.array([0.0, 1.0]), 0.1)
        np.testing.assert_array_equal(v[:, 0], 0)

    def test_explicit_2x2_inverse(self):
        rng = np.random.default_rng(1)
        h_hat = crandn(rng, 1, 2, 1, 2)
        X = crandn(rng, 2, 2, 2)
        C = (X @ np.swapaxes(X, -1, -2).conj() * 0.1)[:, None]
        p, s2 = np.array([0.7, 0.4]), 0.3
        M = s2 * np.eye(2) + sum(p[i] * (np.outer(h_hat[0, i, 0], h_hat[0, i, 0].conj()) + C[i, 0]) for i in range(2))
        (a, b), (c, d) = M
        inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
        v = lmmse_combiners(h_hat, C, p, s2)
        for k in range(2):
            ref = p[k] * inv @ h_hat[0, k, 0]
            assert np.linalg.norm(v[0, k, 0] - ref) <= 1e-10 * np.linalg.norm(ref)

    def test_normal_equations_and_batch(self):
        rng = np.random.default_rng(2)
        n, K, L, N = 6, 4, 3, 4
        h_hat = crandn(rng, n, K, L, N)
        X = crandn(rng, K, L, N, N)
        C = 0.2 * X @ np.swapaxes(X, -1, -2).conj()
        p, s2 = rng.uniform(0.1, 1, K), 0.05
        v = lmmse_combiners(h_hat, C, p, s2)
        for r in range(n):
            for l in range(L):
                M = s2 * np.eye(N) + sum(
                    p[i] * (np.outer(h_hat[r, i, l], h_hat[r, i, l].conj()) + C[i, l]) for i in range(K)
                )
                for k in range(K):
                    rhs = p[k] * h_hat[r, k, l]
                    assert np.linalg.norm(M @ v[r, k, l] - rhs) <= 1e-9 * np.linalg.norm(rhs)
                    np.testing.assert_allclose(lmmse_combiner(h_hat, C, p, s2, r, k, l), v[r, k, l], rtol=1e-10)

    def test_minimises_local_mse(self):
        # MSE(v) = E|x - v^H y|^2 for y = sum_i sqrt(p_i) h_i x_i + n, target sqrt(p_k) x_k
        rng = np.random.default_rng(3)
        K, N = 3, 2
        h_hat = crandn(rng, 1, K, 1, N)
        X = crandn(rng, K, 1, N, N)
        C = 0.3 * X @ np.swapaxes(X, -1, -2).conj()
        p, s2 = rng.uniform(0.2, 1, K), 0.4
        M = s2 * np.eye(N) + sum(p[i] * (np.outer(h_hat[0, i, 0], h_hat[0, i, 0].conj()) + C[i, 0]) for i in range(K))
        k = 1

        def mse(v):
            return p[k] - 2 * p[k] * np.vdot(v, h_hat[0, k, 0]).real + np.vdot(v, M @ v).real

        v = lmmse_combiners(h_hat, C, p, s2)[0, k, 0]
        base = mse(v)
        for _ in range(200):
            assert mse(v + 1e-3 * crandn(rng, N)) >= base - 1e-15


class TestMrCombiner:
    def test_identity(self):
        h_hat = np.zeros((1, 1, 1, 2), dtype=complex)
        h_hat[0, 0, 0] = [1, 1j]
        np.testing.assert_array_equal(mr_combiner(h_hat, 0, 0, 0), [1, 1j])
        np.testing.assert_array_equal(mr_combiners(np.zeros((2, 1, 1, 2))), 0)

    def test_collinear_with_lmmse_single_ue(self):
        rng = np.random.default_rng(4)
        h_hat = crandn(rng, 5, 1, 2, 3)
        C = np.zeros((1, 2, 3, 3), dtype=complex)
        v1 = lmmse_combiners(h_hat, C, np.ones(1), 1e-6)
        v2 = mr_combiners(h_hat)
        u2 = v2 / np.linalg.norm(v2, axis=-1, keepdims=True)
        along = np.einsum("rkln,rkln->rkl", u2.conj(), v1)
        perp = np.linalg.norm(v1 - along[..., None] * u2, axis=-1)
        angle = np.arctan2(perp, np.abs(along))
        assert np.all(angle < 1e-6)


class TestEffectiveStats:
    def test_zero_combiners(self):
        rng = np.random.default_rng(5)
        h = crandn(rng, 10, 2, 3, 2)
        s = estimate_effective_stats(h, np.zeros_like(h), 0.1)
        for arr in (s.g_mean, s.G, s.Dk):
            np.testing.assert_array_equal(arr, 0)

    def test_single_realization(self):
        rng = np.random.default_rng(6)
        h, v = crandn(rng, 1, 2, 3, 2), crandn(rng, 1, 2, 3, 2)
        s = estimate_effective_stats(h, v, 0.1, n_mc=1)
        for k in range(2):
            np.testing.assert_allclose(s.g_mean[k], np.einsum("ln,ln->l", v[0, k].conj(), h[0, k]))

    def test_errors(self):
        h = np.zeros((4, 1, 1, 1), dtype=complex)
        with pytest.raises(InsufficientRealizations):
            estimate_effective_stats(h, h, 1.0, n_mc=5)
        with pytest.raises(InsufficientRealizations):
            estimate_effective_stats(h, h, 1.0, n_mc=0)
        with pytest.raises(DimensionMismatch):
            estimate_effective_stats(h, h[:3], 1.0)

    def test_against_large_oracle(self):
        # L = 2, K = 2, N = 1: v = a h + b w with fixed coefficients per (k, l)
        rng = np.random.default_rng(7)
        coef_h = crandn(rng, 2, 2, 2)  # (k, i, l) weights of h_il in v_kl
        coef_w = crandn(rng, 2, 2)

        def sample(n, seed):
            g = np.random.default_rng(seed)
            h = crandn(g, n, 2, 2, 1)
            w = crandn(g, n, 2, 2, 1)
            v = np.einsum("kil,rilx->rklx", coef_h, h) + coef_w[None, :, :, None] * w
            return h, v

        h, v = sample(10_000, 1)
        s = estimate_effective_stats(h, v, 1.0)
        ref = np.zeros((2, 2, 2, 2), dtype=complex)
        n_ref = 1_000_000
        for seed in range(10):
            hb, vb = sample(n_ref // 10, 100 + seed)
            g = np.einsum("rklx,rilx->rkil", vb.conj(), hb)
            ref += np.einsum("rkil,rkim->kilm", g, g.conj())
        ref /= n_ref
        for k in range(2):
            for i in range(2):
                assert frob_rel(s.G[k, i], ref[k, i]) < 0.05

    def test_invariants(self):
        rng = np.random.default_rng(8)
        s, *_ = random_stats(rng, n=2000)
        assert np.all(s.Dk >= 0)
        for k in range(s.K):
            for i in range(s.K):
                np.testing.assert_allclose(s.G[k, i], s.G[k, i].conj().T)
                assert np.linalg.eigvalsh(s.G[k, i]).min() >= -1e-12 * np.trace(s.G[k, i]).real
            cov = s.G[k, k] - np.outer(s.g_mean[k], s.g_mean[k].conj())
            assert np.linalg.eigvalsh(cov).min() >= -1e-10 * np.trace(s.G[k, k]).real

    def test_chunking_does_not_change_results(self, monkeypatch):
        rng = np.random.default_rng(9)
        h, v, _ = random_setup(rng, n=700)
        a = estimate_effective_stats(h, v, 0.5)
        monkeypatch.setattr(combining, "STATS_CHUNK", 37)
        b = estimate_effective_stats(h, v, 0.5)
        for x, y in ((a.g_mean, b.g_mean), (a.G, b.G), (a.Dk, b.Dk)):
            assert np.max(np.abs(x - y)) <= 1e-12 * np.max(np.abs(x))


class TestEffectiveSinr:
    def test_zero_power(self):
        rng = np.random.default_rng(10)
        s, p, *_ = random_stats(rng)
        p[0] = 0.0
        assert effective_sinr(0, s, p, unit(rng, s.L)) == 0.0

    def test_scalar_reduction(self):
        s = EffectiveStats(
            g_mean=np.array([[0.8 + 0.1j]]), G=np.array([[[[1.1]]]], dtype=complex),
            Dk=np.array([[0.7]]), n_mc=10, sigma2=0.2,
        )
        p = np.array([0.5])
        g2 = abs(0.8 + 0.1j) ** 2
        expected = p[0] * g2 / (p[0] * (1.1 - g2) + 0.2 * 0.7)
        assert effective_sinr(0, s, p, np.array([1.0])) == pytest.approx(expected, rel=1e-14)

    def test_sample_form_matches_statistics_form(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            h, v, p = random_setup(rng, n=200)
            s = estimate_effective_stats(h, v, 0.5)
            for k in range(s.K):
                a = unit(rng, s.L)
                x = effective_sinr(k, s, p, a)
                y = effective_sinr_from_samples(k, h, v, p, a, 0.5)
                assert x == pytest.approx(y, rel=1e-10)

    def test_phase_invariance(self):
        rng = np.random.default_rng(12)
        s, p, *_ = random_stats(rng)
        a = unit(rng, s.L)
        for theta in (0.3, 2.0, -1.2):
            assert effective_sinr(1, s, p, np.exp(1j * theta) * a) == pytest.approx(effective_sinr(1, s, p, a), rel=1e-12)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(13)
        s, p, *_ = random_stats(rng)
        W = np.array([unit(rng, s.L) for _ in range(s.K)])
        np.testing.assert_allclose(effective_sinrs(s, p, W), [effective_sinr(k, s, p, W[k]) for k in range(s.K)])

    def test_requires_unit_norm(self):
        rng = np.random.default_rng(14)
        s, p, *_ = random_stats(rng)
        with pytest.raises(ValueError):
            effective_sinr(0, s, p, 2 * unit(rng, s.L))

    def test_degenerate_denominator(self):
        s = EffectiveStats(np.array([[1.0 + 0j]]), np.array([[[[1.0 + 0j]]]]), np.array([[0.0]]), 1, 0.1)
        with pytest.raises(DegenerateDenominator):
            effective_sinr(0, s, np.array([1.0]), np.array([1.0]))

    def test_negative_denominator_clamped(self, caplog):
        # G below g g^H (impossible in expectation, possible with noise)
        s = EffectiveStats(np.array([[1.0 + 0j]]), np.array([[[[0.9 + 0j]]]]), np.array([[0.1]]), 1, 0.1)
        sinr = effective_sinr(0, s, np.array([1.0]), np.array([1.0]))
        assert sinr == pytest.approx(1.0 / (0.1 * 0.1 * 1e-6))
        assert "clamped" in caplog.text


class TestOptimalWeights:
    def test_single_ap(self):
        rng = np.random.default_rng(15)
        s, p, *_ = random_stats(rng, L=1)
        for k in range(s.K):
            a, sinr = optimal_weights_fixed_power(k, s, p)
            np.testing.assert_allclose(a, [1.0])
            g = s.g_mean[k, 0]
            b = np.dot(p, s.G[k, :, 0, 0].real) - p[k] * abs(g) ** 2 + s.sigma2 * s.Dk[k, 0]
            assert sinr == pytest.approx(p[k] * abs(g) ** 2 / b, rel=1e-12)

    def test_interference_free_direct_inverse(self):
        rng = np.random.default_rng(16)
        L = 4
        g = crandn(rng, L)
        Dk = rng.uniform(0.5, 2.0, L)
        G = np.zeros((1, 1, L, L), dtype=complex)
        G[0, 0] = np.outer(g, g.conj())
        s = EffectiveStats(g[None], G, Dk[None], 100, 0.3)
        p = np.array([0.8])
        a, sinr = optimal_weights_fixed_power(0, s, p)
        M = p[0] * np.outer(g, g.conj()) + 0.3 * np.diag(Dk)
        ref = np.linalg.inv(M) @ g
        ref /= np.linalg.norm(ref)
        assert abs(abs(np.vdot(ref, a)) - 1) < 1e-12
        assert sinr == pytest.approx(p[0] * np.sum(np.abs(g) ** 2 / (0.3 * Dk)), rel=1e-12)

    def test_random_weights_never_win(self):
        rng = np.random.default_rng(17)
        s, p, *_ = random_stats(rng, L=5)
        for k in range(s.K):
            _, sinr = optimal_weights_fixed_power(k, s, p)
            for _ in range(1000):
                assert effective_sinr(k, s, p, unit(rng, s.L)) <= sinr * (1 + 1e-12)

    def test_closed_form_matches_effective_sinr(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            s, p, *_ = random_stats(rng, L=int(rng.integers(2, 9)))
            W, sinrs = fixed_power_solution(s, p)
            for k in range(s.K):
                a, sinr = optimal_weights_fixed_power(k, s, p)
                assert effective_sinr(k, s, p, a) == pytest.approx(sinr, rel=1e-9)
                assert sinrs[k] == pytest.approx(sinr, rel=1e-9)
                assert abs(abs(np.vdot(W[k], a)) - 1) < 1e-9

    def test_dominates_uniform_weights(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            s, p, *_ = random_stats(rng)
            u = np.full(s.L, 1 / np.sqrt(s.L))
            for k in range(s.K):
                assert optimal_weights_fixed_power(k, s, p)[1] >= effective_sinr(k, s, p, u) * (1 - 1e-12)


@pytest.mark.slow
def test_lmmse_beats_mr_on_desk_setups():
    cfg = NetworkConfig(L=16, K=8, N=2, f=2, mc_realizations=300, seed=11)
    wins = 0
    for drop in range(100):
        setup = build_drop(cfg, drop)
        est, sigma2, pmax = setup.estimates, cfg.noise_power_w, setup.pmax
        se = {}
        for name, v in (("lmmse", lmmse_combiners(est.h_hat, est.C, pmax, sigma2)), ("mr", mr_combiners(est.h_hat))):
            _, sinr = fixed_power_solution(estimate_effective_stats(setup.h, v, sigma2), pmax)
            se[name] = se_from_sinr(sinr, cfg.tau_p, cfg.tau_c).min_se
        wins += se["lmmse"] >= se["mr"]
    assert wins >= 95


class TestSeFromSinr:
    def test_examples(self):
        assert se_from_sinr(0.0, 10, 200).min_se == 0.0
        assert se_from_sinr(1.0, 10, 200).min_se == pytest.approx(0.95)
        assert se_from_sinr(3.0, 4, 200).min_se == pytest.approx(1.96)

    def test_min_over_ues(self):
        r = se_from_sinr(np.array([3.0, 1.0, 7.0]), 4, 200)
        np.testing.assert_allclose(r.se, 0.98 * np.log2(1 + np.array([3.0, 1.0, 7.0])))
        assert r.min_se == pytest.approx(0.98)

    @pytest.mark.parametrize("tau_p,tau_c", [(0, 200), (200, 200), (300, 200)])
    def test_invalid_fraction(self, tau_p, tau_c):
        with pytest.raises(InvalidFraction):
            se_from_sinr(1.0, tau_p, tau_c)

    def test_negative_sinr(self):
        with pytest.raises(ValueError):
            se_from_sinr(-0.1, 4, 200)
