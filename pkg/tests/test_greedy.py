import numpy as np
import pytest

from sparsebench import (
    Dictionary,
    Lagrangian,
    ResidualBound,
    SolverConfig,
    Sparsity,
    SparseProblem,
    batch_omp,
    mp_solve,
    omp_solve,
)


def planted_instance(seed, d=16, n=32, k=3, in_ortho_block=True):
    """Orthonormal-augmented dictionary with a planted k-sparse signal."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    x = np.concatenate([q, rng.standard_normal((d, n - d))], axis=1)
    x /= np.linalg.norm(x, axis=0)
    pool = d if in_ortho_block else n
    support = rng.choice(pool, k, replace=False)
    alpha0 = np.zeros(n)
    alpha0[support] = rng.uniform(1.0, 2.0, k) * rng.choice([-1.0, 1.0], k)
    return Dictionary(x, normalized=True), alpha0, support


def exact_recovery_safe(x, support):
    """Tropp's exact recovery condition for the planted support."""
    pinv = np.linalg.pinv(x[:, support])
    off = np.setdiff1d(np.arange(x.shape[1]), support)
    return max(float(np.sum(np.abs(pinv @ x[:, j]))) for j in off) < 1.0


class TestMatchingPursuit:
    def test_orthonormal_single_atom(self):
        p = SparseProblem(Dictionary(np.eye(3), normalized=True),
                          np.array([0.0, 5.0, 0.0]), Sparsity(1))
        sol = mp_solve(p)
        assert np.allclose(sol.alpha, [0.0, 5.0, 0.0])
        assert sol.residual_norm < 1e-12

    def test_zero_probe(self):
        p = SparseProblem(Dictionary(np.eye(3), normalized=True),
                          np.zeros(3), Sparsity(2))
        sol = mp_solve(p)
        assert sol.iterations == 0
        assert np.all(sol.alpha == 0)

    def test_two_coherent_atoms_energy_conservation(self):
        x = np.array([[1.0, 0.8], [0.0, 0.6]])
        x /= np.linalg.norm(x, axis=0)
        y = x @ np.array([1.0, 1.0])
        p = SparseProblem(Dictionary(x, normalized=True), y, ResidualBound(1e-8))
        sol = mp_solve(p, SolverConfig(max_iterations=300))
        trace = np.asarray(sol.objective_trace)
        # residual decreases every step and each peel conserves energy
        assert np.all(np.diff(trace) < 0)
        residual = y.copy()
        for _ in range(50):
            corr = x.T @ residual
            j = int(np.argmax(np.abs(corr)))
            nxt = residual - corr[j] * x[:, j]
            assert np.linalg.norm(residual) ** 2 == pytest.approx(
                corr[j] ** 2 + np.linalg.norm(nxt) ** 2, rel=1e-10)
            residual = nxt

    def test_may_reselect_atoms(self):
        x = np.array([[1.0, 0.8], [0.0, 0.6]])
        x /= np.linalg.norm(x, axis=0)
        y = x @ np.array([1.0, 1.0])
        p = SparseProblem(Dictionary(x, normalized=True), y, ResidualBound(1e-10))
        sol = mp_solve(p, SolverConfig(max_iterations=500))
        assert sol.iterations > 2  # reselection happened on 2 atoms

    def test_nonconverged_flag(self):
        x = np.array([[1.0, 0.8], [0.0, 0.6]])
        x /= np.linalg.norm(x, axis=0)
        y = x @ np.array([1.0, 1.0])
        p = SparseProblem(Dictionary(x, normalized=True), y, ResidualBound(1e-12))
        sol = mp_solve(p, SolverConfig(max_iterations=2))
        assert not sol.converged

    def test_requires_normalized_dictionary(self):
        with pytest.raises(ValueError):
            mp_solve(SparseProblem(Dictionary(2 * np.eye(2)), np.ones(2), Sparsity(1)))

    def test_rejects_lagrangian(self):
        p = SparseProblem(Dictionary(np.eye(2), normalized=True),
                          np.ones(2), Lagrangian(0.1))
        with pytest.raises(ValueError):
            mp_solve(p)


class TestOrthogonalMatchingPursuit:
    def test_orthonormal_single_atom(self):
        p = SparseProblem(Dictionary(np.eye(3), normalized=True),
                          np.array([0.0, 5.0, 0.0]), Sparsity(1))
        sol = omp_solve(p)
        assert np.allclose(sol.alpha, [0.0, 5.0, 0.0])

    def test_two_orthogonal_atoms_exact(self):
        x = np.eye(4)[:, :2]
        y = 3.0 * x[:, 0] - 2.0 * x[:, 1]
        p = SparseProblem(Dictionary(x, normalized=True), y, Sparsity(2))
        sol = omp_solve(p)
        assert np.allclose(sol.alpha, [3.0, -2.0])
        assert sol.residual_norm < 1e-10

    def test_planted_recovery(self):
        d, alpha0, support = planted_instance(77)
        y = d.atoms @ alpha0
        sol = omp_solve(SparseProblem(d, y, Sparsity(3)))
        assert set(sol.support.tolist()) == set(support.tolist())
        assert np.max(np.abs(sol.alpha - alpha0)) < 1e-8

    def test_residual_orthogonal_to_selection(self, rng):
        d, alpha0, _ = planted_instance(5)
        y = d.atoms @ alpha0 + 0.05 * rng.standard_normal(16)
        sol = omp_solve(SparseProblem(d, y, Sparsity(6)))
        residual = y - d.atoms @ sol.alpha
        corr = d.atoms[:, sol.support].T @ residual
        assert np.max(np.abs(corr)) < 1e-8 * max(1.0, np.linalg.norm(y))

    def test_residual_matches_projector_oracle(self, rng):
        d, alpha0, _ = planted_instance(6)
        y = d.atoms @ alpha0 + 0.1 * rng.standard_normal(16)
        sol = omp_solve(SparseProblem(d, y, Sparsity(5)))
        sub = d.atoms[:, sol.support]
        projector = sub @ np.linalg.pinv(sub)
        oracle = y - projector @ y
        assert np.linalg.norm((y - d.atoms @ sol.alpha) - oracle) < 1e-8

    def test_indices_distinct_and_bounded(self, rng):
        d, alpha0, _ = planted_instance(9)
        y = d.atoms @ alpha0 + 0.2 * rng.standard_normal(16)
        sol = omp_solve(SparseProblem(d, y, Sparsity(4)))
        assert len(set(sol.support.tolist())) == sol.support.size
        assert sol.support.size <= 4

    def test_residual_nonincreasing(self, rng):
        d, alpha0, _ = planted_instance(10)
        y = d.atoms @ alpha0 + 0.3 * rng.standard_normal(16)
        sol = omp_solve(SparseProblem(d, y, Sparsity(8)))
        assert np.all(np.diff(sol.objective_trace) <= 1e-12)

    def test_residual_bound_constraint(self):
        d, alpha0, _ = planted_instance(12)
        y = d.atoms @ alpha0
        eps = 0.5 * np.linalg.norm(y)
        sol = omp_solve(SparseProblem(d, y, ResidualBound(eps)))
        assert sol.residual_norm <= eps
        assert sol.converged

    def test_erc_safe_instances_recover(self):
        checked = 0
        for seed in range(40):
            d, alpha0, support = planted_instance(1000 + seed)
            if not exact_recovery_safe(d.atoms, support):
                continue
            checked += 1
            sol = omp_solve(SparseProblem(d, d.atoms @ alpha0, Sparsity(3)))
            assert set(sol.support.tolist()) == set(support.tolist())
            assert np.max(np.abs(sol.alpha - alpha0)) < 1e-8
        assert checked >= 5


class TestBatchOmp:
    def test_matches_single_omp(self, rng):
        d, _, _ = planted_instance(21)
        signals = rng.standard_normal((16, 6))
        codes = batch_omp(d.atoms, signals, 4)
        for i in range(6):
            sol = omp_solve(SparseProblem(d, signals[:, i], Sparsity(4)))
            assert np.allclose(codes[:, i], sol.alpha, atol=1e-10)

    def test_error_stop(self, rng):
        d, _, _ = planted_instance(22)
        signals = rng.standard_normal((16, 5))
        eps = 0.6 * np.linalg.norm(signals, axis=0).min()
        codes = batch_omp(d.atoms, signals, 16, eps=eps)
        residuals = signals - d.atoms @ codes
        assert np.all(np.linalg.norm(residuals, axis=0) <= eps + 1e-9)
