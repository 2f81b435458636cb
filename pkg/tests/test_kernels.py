import numpy as np
import pytest

from newsbench import kernels
from newsbench.rng import named_rng


def make_points(n=60, d=8, seed=0):
    return named_rng(seed, "kernel-pts").normal(size=(n, d))


class TestPairwiseDists:
    def test_matches_direct_computation(self):
        x = make_points(20, 5)
        d = kernels.pairwise_sq_dists(x)
        brute = np.array([[np.sum((a - b) ** 2) for b in x] for a in x])
        np.testing.assert_allclose(d, brute, atol=1e-10)

    def test_zero_diagonal_and_symmetry(self):
        d = kernels.pairwise_sq_dists(make_points())
        assert (np.diag(d) == 0).all()
        np.testing.assert_allclose(d, d.T, atol=0)

    def test_nonnegative(self):
        d = kernels.pairwise_sq_dists(make_points(40, 3, seed=1))
        assert (d >= 0).all()


class TestConditionalProbs:
    def test_rows_are_distributions(self):
        d = kernels.pairwise_sq_dists(make_points(50, 6))
        p, _ = kernels.conditional_probs(d, perplexity=10.0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert (np.diag(p) == 0).all()

    def test_perplexity_calibration(self):
        """Independent entropy recomputation hits the target on every row."""
        d = kernels.pairwise_sq_dists(make_points(80, 10, seed=2))
        target = 15.0
        p, _ = kernels.conditional_probs(d, perplexity=target, tol=1e-4)
        for row in p:
            nz = row[row > 0]
            perp = np.exp(-np.sum(nz * np.log(nz)))
            assert abs(perp - target) <= 1e-3

    def test_betas_track_local_density(self):
        # a tight pair needs a much larger beta (smaller sigma) than spread points
        rng = named_rng(3, "density")
        close = rng.normal(0, 0.01, size=(10, 4))
        far = rng.normal(0, 5.0, size=(10, 4))
        d = kernels.pairwise_sq_dists(np.vstack([close, far]))
        _, betas = kernels.conditional_probs(d, perplexity=5.0)
        assert betas[:10].min() > betas[10:].max()


class TestTsneStep:
    def test_gradient_matches_finite_differences(self):
        rng = named_rng(4, "step")
        n = 12
        raw = rng.random((n, n))
        p = (raw + raw.T) / 2
        np.fill_diagonal(p, 0.0)
        p /= p.sum()
        y = rng.normal(size=(n, 2))
        grad, _ = kernels.tsne_step(p, y)

        def kl_at(yy):
            return kernels.tsne_step(p, yy)[1]

        h = 1e-6
        for i in range(n):
            for k in range(2):
                up = y.copy()
                up[i, k] += h
                down = y.copy()
                down[i, k] -= h
                fd = (kl_at(up) - kl_at(down)) / (2 * h)
                assert grad[i, k] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_kl_nonnegative_and_zero_at_match(self):
        rng = named_rng(5, "klz")
        y = rng.normal(size=(15, 2))
        d = kernels._pairwise_sq_dists_np(y)
        num = 1.0 / (1.0 + d)
        np.fill_diagonal(num, 0.0)
        q = num / num.sum()
        _, kl = kernels.tsne_step(q, y)  # P == Q exactly
        assert abs(kl) < 1e-12
        raw = rng.random((15, 15))
        p = (raw + raw.T) / 2
        np.fill_diagonal(p, 0.0)
        p /= p.sum()
        _, kl2 = kernels.tsne_step(p, y)
        assert kl2 > 0


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
class TestBackendAgreement:
    """The jitted and numpy paths implement the same math; they agree to
    float tolerance (summation order differs, so not bitwise)."""

    def test_env_flag_switches_backend(self, monkeypatch):
        monkeypatch.setenv("NEWSBENCH_NO_NUMBA", "1")
        assert kernels.backend_name() == "numpy"
        monkeypatch.delenv("NEWSBENCH_NO_NUMBA")
        assert kernels.backend_name() == "numba"

    def test_pairwise_agreement(self, monkeypatch):
        x = make_points(40, 7, seed=6)
        monkeypatch.setenv("NEWSBENCH_NO_NUMBA", "1")
        a = kernels.pairwise_sq_dists(x)
        monkeypatch.delenv("NEWSBENCH_NO_NUMBA")
        b = kernels.pairwise_sq_dists(x)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_conditional_probs_agreement(self, monkeypatch):
        d = kernels.pairwise_sq_dists(make_points(50, 6, seed=7))
        monkeypatch.setenv("NEWSBENCH_NO_NUMBA", "1")
        pa, ba = kernels.conditional_probs(d, 12.0)
        monkeypatch.delenv("NEWSBENCH_NO_NUMBA")
        pb, bb = kernels.conditional_probs(d, 12.0)
        np.testing.assert_allclose(pa, pb, atol=1e-8)
        np.testing.assert_allclose(ba, bb, rtol=1e-6)

    def test_tsne_step_agreement(self, monkeypatch):
        rng = named_rng(8, "agree")
        n = 30
        raw = rng.random((n, n))
        p = (raw + raw.T) / 2
        np.fill_diagonal(p, 0.0)
        p /= p.sum()
        y = rng.normal(size=(n, 2))
        monkeypatch.setenv("NEWSBENCH_NO_NUMBA", "1")
        ga, ka = kernels.tsne_step(p, y)
        monkeypatch.delenv("NEWSBENCH_NO_NUMBA")
        gb, kb = kernels.tsne_step(p, y)
        np.testing.assert_allclose(ga, gb, atol=1e-10)
        assert ka == pytest.approx(kb, rel=1e-12)
