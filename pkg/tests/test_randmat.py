import json

import numpy as np
import pytest

from freept import freecalc as fc
from freept import randmat as rm
from freept.errors import DomainError, ResourceError


def random_block(n, N, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n * N, n * N)) + 1j * rng.standard_normal((n * N, n * N))
    return rm.BlockHermitian(n, N, a + a.conj().T)


class TestSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            rm.EnsembleSpec("goe", 1, 2)
        with pytest.raises(DomainError):
            rm.EnsembleSpec("wishart", 1, 2, rate=0)
        with pytest.raises(DomainError):
            rm.EnsembleSpec("gue", 0, 2)
        with pytest.raises(DomainError):
            rm.EnsembleSpec("gue", 1, 2, seed=-1)

    def test_rows_and_realized_rate(self):
        s = rm.EnsembleSpec("wishart", 2, 333, rate=4)
        assert s.rows == round(4 * 666)
        assert s.rate_realized == s.rows / 666

    def test_dim_cap(self):
        with pytest.raises(ResourceError):
            rm.sample(rm.EnsembleSpec("gue", 2, 2049))
        with pytest.raises(ResourceError):
            rm.sample(rm.EnsembleSpec("gue", 2, 8), dim_cap=8)


class TestSample:
    def test_shifted_identity_when_jump_zero(self):
        x = rm.sample(rm.EnsembleSpec("shiftedWishart", 2, 5, rate=4, jump=0, shift=1))
        assert np.array_equal(x.entries, np.eye(10))

    def test_exactly_hermitian(self):
        for kind in rm.ENSEMBLES:
            x = rm.sample(rm.EnsembleSpec(kind, 2, 20, rate=2, jump=-0.3, seed=5))
            assert np.array_equal(x.entries, x.entries.conj().T)

    def test_reproducible(self):
        spec = rm.EnsembleSpec("shiftedWishart", 2, 30, rate=4, jump=-0.1, seed=42)
        assert np.array_equal(rm.sample(spec).entries, rm.sample(spec).entries)
        assert not np.array_equal(rm.sample(spec).entries, rm.sample(spec.with_seed(43)).entries)

    def test_trial_streams_are_order_insensitive(self):
        spec = rm.EnsembleSpec("gue", 1, 16, seed=9)
        forward = [rm.sample(spec, rng=rm.make_rng(rm.trial_seed(9, t))).entries for t in range(3)]
        backward = [rm.sample(spec, rng=rm.make_rng(rm.trial_seed(9, t))).entries for t in (2, 1, 0)]
        for a, b in zip(forward, reversed(backward)):
            assert np.array_equal(a, b)
        assert not np.array_equal(forward[0], forward[1])

    def test_complex_gaussian_variance(self):
        z = rm.complex_gaussian(rm.make_rng(1), (200_000,), 0.25)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(0.25, rel=0.01)
        assert np.var(z.real) == pytest.approx(0.125, rel=0.02)

    def test_gue_second_moment(self):
        spec = rm.EnsembleSpec("gue", 2, 500, seed=3)
        st = rm.simulate(spec, 4, order=2)["x"].moments
        assert st.mean[1] == pytest.approx(1.0, abs=0.05)

    def test_wishart_catalan_moments(self):
        spec = rm.EnsembleSpec("wishart", 1, 1000, rate=1, seed=4)
        st = rm.simulate(spec, 3, order=4)["x"].moments
        np.testing.assert_allclose(st.mean, [1, 2, 5, 14], rtol=0.05)
        expected = fc.cumulants_to_moments(rm.limit_cumulants(spec, 4))
        assert list(expected) == [1, 2, 5, 14]

    def test_wishart_mean(self):
        spec = rm.EnsembleSpec("wishart", 2, 400, rate=4, seed=5)
        s = rm.eigvalsh(rm.sample(spec))
        assert rm.empirical_moments(s, 1)[1] == pytest.approx(4.0, rel=0.02)


class TestPartialTranspose:
    def test_block_swap(self):
        x = random_block(3, 4)
        g = rm.partial_transpose(x)
        for i in range(3):
            for j in range(3):
                assert np.array_equal(g.block(i, j), x.block(j, i))

    def test_involution_and_trace(self):
        x = random_block(3, 5, seed=1)
        g = rm.partial_transpose(x)
        assert np.array_equal(rm.partial_transpose(g).entries, x.entries)
        assert np.trace(g.entries) == np.trace(x.entries)
        assert np.array_equal(g.entries, g.entries.conj().T)

    def test_n_one_identity(self):
        x = random_block(1, 6)
        assert np.array_equal(rm.partial_transpose(x).entries, x.entries)

    def test_block_diagonal_unchanged(self):
        x = random_block(3, 4).entries.copy()
        for i in range(3):
            for j in range(3):
                if i != j:
                    x[i * 4 : (i + 1) * 4, j * 4 : (j + 1) * 4] = 0
        bx = rm.BlockHermitian(3, 4, x)
        assert np.array_equal(rm.partial_transpose(bx).entries, x)

    def test_first_moment_preserved(self):
        x = rm.sample(rm.EnsembleSpec("shiftedWishart", 2, 50, rate=4, jump=-0.1, seed=2))
        m = rm.empirical_moments(rm.eigvalsh(x), 2)
        mg = rm.empirical_moments(rm.eigvalsh(rm.partial_transpose(x)), 2)
        assert m[1] == pytest.approx(mg[1], rel=1e-12)
        # second moment is Tr X^2 and is also invariant under the block swap
        assert m[2] == pytest.approx(mg[2], rel=1e-10)


class TestEigen:
    def test_small_cases(self):
        assert list(rm.eigvalsh(np.diag([3.0, 1.0, 2.0])).eigenvalues) == [1, 2, 3]
        np.testing.assert_allclose(rm.eigvalsh(np.array([[0.0, 1], [1, 0]])).eigenvalues, [-1, 1])

    def test_trace_and_residual(self):
        x = random_block(1, 50, seed=7).entries
        s = rm.eigvalsh(x)
        norm = np.linalg.norm(x)
        assert abs(s.eigenvalues.sum() - np.trace(x).real) <= 1e-10 * norm
        assert rm.eig_residual(x) <= 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(DomainError):
            rm.eigvalsh(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(DomainError):
            rm.BlockHermitian(1, 2, np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_spectrum_must_be_sorted(self):
        with pytest.raises(DomainError):
            rm.Spectrum(np.array([2.0, 1.0]))

    def test_empirical_moments(self):
        assert list(rm.empirical_moments(rm.Spectrum(np.ones(3)), 4)) == [1, 1, 1, 1]
        assert list(rm.empirical_moments(rm.Spectrum(np.array([-1.0, 1.0])), 4)) == [0, 1, 0, 1]
        with pytest.raises(DomainError):
            rm.empirical_moments(rm.Spectrum(np.ones(3)), 0)


class TestCompression:
    def test_haar_isometry(self):
        v = rm.haar_isometry(5, 3, rm.make_rng(0))
        np.testing.assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-12)

    def test_full_rank_keeps_spectrum(self):
        x = random_block(3, 4, seed=2)
        np.testing.assert_allclose(rm.project_compress(x, 3, 1).eigenvalues, rm.eigvalsh(x).eigenvalues, atol=1e-10)

    def test_scalar_matrix(self):
        x = rm.BlockHermitian(4, 3, 2.5 * np.eye(12))
        np.testing.assert_allclose(rm.project_compress(x, 2, 0).eigenvalues, 2.5, atol=1e-12)
        assert len(rm.project_compress(x, 2, 0)) == 6

    def test_matches_explicit_kron(self):
        x = random_block(3, 4, seed=3)
        v = rm.haar_isometry(3, 2, rm.make_rng(11))
        big = np.kron(v, np.eye(4))
        ref = np.linalg.eigvalsh(big.conj().T @ x.entries @ big)
        np.testing.assert_allclose(rm.project_compress(x, 2, rm.make_rng(11)).eigenvalues, ref, atol=1e-10)

    def test_rank_range(self):
        with pytest.raises(DomainError):
            rm.project_compress(random_block(2, 2), 3, 0)

    def test_compression_above_free_power_bound(self):
        from freept import certify

        n, k, lam, alpha = 4, 2, 4.0, -1 / 8.7
        x = rm.sample(rm.EnsembleSpec("shiftedWishart", n, 200, rate=lam, jump=alpha, seed=1))
        lo = rm.project_compress(x, k, 2).min
        assert lo >= (k / n) * certify.k_bound_f(n, k, lam, alpha) - 0.05


class TestExport:
    def test_dump_round_trip(self):
        x = random_block(2, 3, seed=4)
        buf = rm.dump_matrix(x)
        assert buf[:8] == b"FREEPT01"
        assert len(buf) == 16 + 36 * 16
        y = rm.load_matrix(buf)
        assert (y.n, y.N) == (2, 3)
        assert np.array_equal(y.entries, x.entries)

    def test_dump_errors(self):
        with pytest.raises(DomainError):
            rm.load_matrix(b"NOTMAGIC" + bytes(8))
        with pytest.raises(DomainError):
            rm.load_matrix(rm.dump_matrix(random_block(1, 2))[:-16])

    def test_csv_and_sidecar(self):
        s = rm.Spectrum(np.array([-0.5, 0.25]))
        assert rm.spectrum_csv(s) == "index,eigenvalue\n0,-0.5\n1,0.25\n"
        spec = rm.EnsembleSpec("wishart", 2, 3, rate=1.5)
        side = json.loads(rm.spectrum_sidecar(spec, 7))
        assert side["trial"] == 7 and side["lambdaRealized"] == spec.rate_realized
        assert side["spec"]["kind"] == "wishart"


class TestTrials:
    def test_order_preserved_with_threads(self):
        assert rm.run_trials(lambda t: t * t, 9, threads=4) == [t * t for t in range(9)]

    def test_threads_do_not_change_results(self):
        spec = rm.EnsembleSpec("shiftedWishart", 2, 20, rate=4, jump=-0.1, seed=1)
        a = rm.simulate(spec, 4, threads=1)
        b = rm.simulate(spec, 4, threads=3)
        assert a["x"].moments == b["x"].moments
        assert a["pt"].lambda_min == b["pt"].lambda_min

    def test_moment_stats(self):
        st = rm.moment_stats([fc.MomentSequence([1.0, 2.0]), fc.MomentSequence([3.0, 2.0])])
        assert st.mean == (2.0, 2.0)
        assert st.stderr == pytest.approx((1.0, 0.0))

    def test_no_trials(self):
        with pytest.raises(DomainError):
            rm.run_trials(lambda t: t, 0)

    def test_limit_cumulants(self):
        spec = rm.EnsembleSpec("shiftedWishart", 2, 10, rate=4, jump=-0.125)
        assert rm.limit_cumulants(spec, 3) == fc.CumulantSequence([0.5, 0.0625, -0.0078125])
        assert rm.limit_cumulants(spec, 3, partial=True)[3] == pytest.approx(-0.0078125 / 4)
