import numpy as np
import pytest

from sparsebench import (
    Dictionary,
    SolverConfig,
    TrainingSet,
    batch_omp,
    dksvd_train,
    ksvd_train,
    lcksvd_train,
    llc_codebook_optimize,
    llc_encode,
    load_model,
    mod_update,
    save_model,
    supervised_classify,
)
from sparsebench.dictlearn import atom_class_assignment, trace_to_csv


def planted_dictionary_data(seed, d=16, m=24, n=400, k=3):
    """Planted-atom training set with geometric amplitude spread."""
    rng = np.random.default_rng(seed)
    d0 = rng.standard_normal((d, m))
    d0 /= np.linalg.norm(d0, axis=0)
    codes = np.zeros((m, n))
    base = np.array([1.0, 2.0, 4.0][:k])
    for i in range(n):
        support = rng.choice(m, k, replace=False)
        amps = base * rng.uniform(0.8, 1.2, k) * rng.choice([-1.0, 1.0], k)
        codes[support, i] = rng.permutation(amps)
    return d0, d0 @ codes


def matched_atoms(learned, truth, threshold=0.95):
    ips = np.abs(learned.T @ truth)
    used = set()
    matched = 0
    for t in range(truth.shape[1]):
        col = ips[:, t].copy()
        for u in used:
            col[u] = -1.0
        j = int(np.argmax(col))
        if col[j] > threshold:
            matched += 1
            used.add(j)
    return matched


def two_class_data(seed=0, per_class=20, d=8):
    rng = np.random.default_rng(seed)
    centers = np.zeros((d, 2))
    centers[0, 0] = 1.0
    centers[1, 1] = 1.0
    cols, labels = [], []
    for c in range(2):
        for _ in range(per_class):
            v = centers[:, c] + 0.05 * rng.standard_normal(d)
            cols.append(v / np.linalg.norm(v))
            labels.append(c)
    return TrainingSet(np.stack(cols, axis=1), np.asarray(labels))


class TestKsvd:
    def test_single_repeated_column(self):
        col = np.array([3.0, 4.0])
        y = np.tile(col[:, None], (1, 6))
        model = ksvd_train(TrainingSet(y), num_atoms=1, sparsity_k=1, sweeps=2)
        atom = model.dictionary.atoms[:, 0]
        assert np.allclose(np.abs(atom), [0.6, 0.8])
        assert model.objective_trace[-1] < 1e-10

    def test_orthonormal_columns_exact(self):
        y = np.eye(5)
        model = ksvd_train(TrainingSet(y), num_atoms=5, sparsity_k=1, sweeps=1)
        assert model.objective_trace[-1] < 1e-8

    def test_planted_dictionary_recovery(self):
        d0, y = planted_dictionary_data(102)
        model = ksvd_train(TrainingSet(y), num_atoms=24, sparsity_k=3, sweeps=30,
                           config=SolverConfig(seed=2))
        assert matched_atoms(model.dictionary.atoms, d0) >= int(0.7 * 24) + 1

    def test_objective_trace_nonincreasing(self):
        d0, y = planted_dictionary_data(103)
        model = ksvd_train(TrainingSet(y), num_atoms=24, sparsity_k=3, sweeps=15,
                           config=SolverConfig(seed=3))
        assert np.all(np.diff(model.objective_trace) <= 1e-10)

    def test_unit_atom_norms(self):
        _, y = planted_dictionary_data(104)
        model = ksvd_train(TrainingSet(y), num_atoms=20, sparsity_k=3, sweeps=3)
        norms = np.linalg.norm(model.dictionary.atoms, axis=0)
        assert np.allclose(norms, 1.0, atol=1e-10)

    def test_codes_respect_sparsity(self):
        _, y = planted_dictionary_data(105)
        model = ksvd_train(TrainingSet(y), num_atoms=20, sparsity_k=3, sweeps=3)
        codes = batch_omp(model.dictionary.atoms, y, 3)
        assert np.max(np.count_nonzero(codes, axis=0)) <= 3

    def test_rank1_update_is_eckart_young_optimal(self, rng):
        # after updating atom l, the restricted residual equals the trailing
        # singular mass of E_l^P
        from sparsebench.dictlearn import _rank1_factor

        e = rng.standard_normal((8, 12))
        u, s, v = _rank1_factor(e, v0=rng.standard_normal(12))
        svals = np.linalg.svd(e, compute_uv=False)
        resid = np.linalg.norm(e - s * np.outer(u, v)) ** 2
        assert resid == pytest.approx(float(np.sum(svals[1:] ** 2)), rel=1e-8)

    def test_too_many_atoms_rejected(self):
        with pytest.raises(ValueError):
            ksvd_train(TrainingSet(np.eye(3)), num_atoms=4, sparsity_k=1, sweeps=1)


class TestMod:
    def test_identity_codes(self):
        y = np.array([[3.0, 0.0], [0.0, 2.0]])
        d, codes = mod_update(TrainingSet(y), np.eye(2))
        assert np.allclose(d.atoms, np.eye(2))
        assert np.allclose(d.atoms @ codes, y)

    def test_recovers_consistent_dictionary(self, rng):
        d0 = rng.standard_normal((6, 4))
        codes0 = rng.standard_normal((4, 30))
        y = d0 @ codes0
        d, codes = mod_update(TrainingSet(y), codes0)
        assert np.linalg.norm(d.atoms @ codes - y) < 1e-8

    def test_normal_equation_residual(self, rng):
        y = rng.standard_normal((5, 40))
        codes = rng.standard_normal((7, 40))
        d, rescaled = mod_update(TrainingSet(y), codes)
        # undo the per-atom normalization to check the raw least-squares solve
        scale = np.linalg.norm(rescaled, axis=1) / np.linalg.norm(codes, axis=1)
        raw = d.atoms * scale[None, :]
        resid = y @ codes.T - raw @ (codes @ codes.T)
        assert np.linalg.norm(resid) < 1e-8 * np.linalg.norm(y @ codes.T)


class TestLlc:
    def test_affine_constraint(self, rng):
        d = Dictionary(rng.standard_normal((5, 8)))
        code = llc_encode(rng.standard_normal(5), d, mu=0.1)
        assert float(np.sum(code)) == pytest.approx(1.0, abs=1e-12)

    def test_single_atom(self, rng):
        d = Dictionary(rng.standard_normal((4, 1)))
        assert llc_encode(rng.standard_normal(4), d, mu=0.5)[0] == pytest.approx(1.0)

    def test_concentrates_on_matching_atom(self, rng):
        atoms = np.eye(4)
        d = Dictionary(atoms)
        code = llc_encode(atoms[:, 2], d, mu=10.0)
        assert int(np.argmax(np.abs(code))) == 2
        # direct small-system oracle
        y = atoms[:, 2]
        dist = np.linalg.norm(atoms - y[:, None], axis=0)
        b = np.exp(dist / np.mean(dist))
        centered = atoms - y[:, None]
        xh = np.linalg.solve(centered.T @ centered + 10.0 * np.diag(b * b), np.ones(4))
        assert np.allclose(code, xh / xh.sum(), atol=1e-12)


class TestLlcCodebook:
    def test_zero_learning_rate_keeps_codebook(self, rng):
        data = TrainingSet(rng.standard_normal((4, 12)))
        init = Dictionary(rng.standard_normal((4, 3)) * 0.5)
        out = llc_codebook_optimize(data, init, mu=0.1,
                                    config=SolverConfig(step_overrides={"learning_rate": 0.0}))
        base = init.atoms / np.maximum(np.linalg.norm(init.atoms, axis=0), 1.0)
        assert np.allclose(out.atoms, base)

    def test_column_norms_capped(self, rng):
        data = TrainingSet(rng.standard_normal((4, 30)))
        init = Dictionary(rng.standard_normal((4, 6)))
        out = llc_codebook_optimize(data, init, mu=0.05, config=SolverConfig())
        assert np.all(np.linalg.norm(out.atoms, axis=0) <= 1 + 1e-12)

    def test_single_cluster_error_nonincreasing(self, rng):
        center = rng.standard_normal(5)
        center /= np.linalg.norm(center) * 1.5
        data = TrainingSet(center[:, None] + 0.05 * rng.standard_normal((5, 40)))
        init = Dictionary(rng.standard_normal((5, 4)) * 0.4)

        def objective(atoms):
            total = 0.0
            for i in range(data.num_samples):
                code = llc_encode(data.samples[:, i], Dictionary(atoms), mu=0.05)
                total += float(np.sum((data.samples[:, i] - atoms @ code) ** 2))
            return total

        base = init.atoms / np.maximum(np.linalg.norm(init.atoms, axis=0), 1.0)
        before = objective(base)
        out = llc_codebook_optimize(data, init, mu=0.05,
                                    config=SolverConfig(step_overrides={"learning_rate": 1e-3}))
        assert objective(out.atoms) <= before + 1e-9


class TestSupervised:
    def test_dksvd_mu_zero_matches_plain_ksvd(self):
        data = two_class_data(1)
        plain = ksvd_train(TrainingSet(data.samples), num_atoms=6, sparsity_k=2,
                           sweeps=4, config=SolverConfig(seed=5))
        dk = dksvd_train(data, num_atoms=6, sparsity_k=2, mu=0.0,
                         config=SolverConfig(seed=5), sweeps=4)
        assert np.allclose(dk.dictionary.atoms, plain.dictionary.atoms, atol=1e-10)
        assert np.all(dk.classifier == 0)

    def test_dksvd_classifies_training_set(self):
        data = two_class_data(2)
        model = dksvd_train(data, num_atoms=8, sparsity_k=2, mu=1.0,
                            config=SolverConfig(seed=1), sweeps=8)
        correct = sum(
            supervised_classify(model, data.samples[:, i], 2) == data.labels[i]
            for i in range(data.num_samples))
        assert correct == data.num_samples

    def test_dksvd_unit_dictionary_norms(self):
        data = two_class_data(3)
        model = dksvd_train(data, num_atoms=8, sparsity_k=2, mu=0.5,
                            config=SolverConfig(seed=1), sweeps=4)
        assert np.allclose(np.linalg.norm(model.dictionary.atoms, axis=0), 1.0,
                           atol=1e-10)

    def test_lcksvd_reduces_to_ksvd(self):
        data = two_class_data(4)
        plain = ksvd_train(TrainingSet(data.samples), num_atoms=6, sparsity_k=2,
                           sweeps=4, config=SolverConfig(seed=7))
        lc = lcksvd_train(data, num_atoms=6, sparsity_k=2, mu=0.0, eta=0.0,
                          config=SolverConfig(seed=7), sweeps=4)
        assert np.allclose(lc.dictionary.atoms, plain.dictionary.atoms, atol=1e-10)

    def test_lcksvd_reduces_to_dksvd(self):
        data = two_class_data(5)
        dk = dksvd_train(data, num_atoms=6, sparsity_k=2, mu=0.7,
                         config=SolverConfig(seed=9), sweeps=4)
        lc = lcksvd_train(data, num_atoms=6, sparsity_k=2, mu=0.0, eta=0.7,
                          config=SolverConfig(seed=9), sweeps=4)
        assert np.allclose(lc.dictionary.atoms, dk.dictionary.atoms, atol=1e-10)
        assert np.allclose(lc.classifier, dk.classifier, atol=1e-10)

    def test_lcksvd_end_to_end(self):
        data = two_class_data(6)
        model = lcksvd_train(data, num_atoms=8, sparsity_k=2, mu=0.5, eta=1.0,
                             config=SolverConfig(seed=2), sweeps=8)
        correct = sum(
            supervised_classify(model, data.samples[:, i], 2) == data.labels[i]
            for i in range(data.num_samples))
        assert correct == data.num_samples

    def test_atom_class_assignment_proportional(self):
        labels = np.array([0] * 6 + [1] * 3)
        assignment = atom_class_assignment(labels, 6)
        assert assignment.tolist() == [0, 0, 0, 0, 1, 1]

    def test_classify_orthonormal_one_hot(self):
        from sparsebench import LearnedDictionary

        model = LearnedDictionary(Dictionary(np.eye(4), normalized=True),
                                  classifier=np.eye(4))
        assert supervised_classify(model, np.eye(4)[:, 2], 1) == 2

    def test_classify_tie_breaks_low(self):
        from sparsebench import LearnedDictionary

        model = LearnedDictionary(Dictionary(np.eye(2), normalized=True),
                                  classifier=np.ones((3, 2)))
        assert supervised_classify(model, np.array([1.0, 0.0]), 1) == 0

    def test_classify_matches_brute_force(self, rng):
        from sparsebench import LearnedDictionary

        atoms = rng.standard_normal((6, 10))
        atoms /= np.linalg.norm(atoms, axis=0)
        classifier = rng.standard_normal((3, 10))
        model = LearnedDictionary(Dictionary(atoms, normalized=True),
                                  classifier=classifier)
        y = rng.standard_normal(6)
        code = batch_omp(atoms, y[:, None], 3)[:, 0]
        assert supervised_classify(model, y, 3) == int(np.argmax(classifier @ code))

    def test_classify_requires_classifier(self):
        from sparsebench import LearnedDictionary

        model = LearnedDictionary(Dictionary(np.eye(2), normalized=True))
        with pytest.raises(ValueError):
            supervised_classify(model, np.ones(2), 1)


class TestPersistence:
    def test_round_trip(self, rng, tmp_path):
        data = two_class_data(8)
        model = lcksvd_train(data, num_atoms=6, sparsity_k=2, mu=0.4, eta=0.8,
                             config=SolverConfig(seed=4), sweeps=3)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.dictionary.atoms, model.dictionary.atoms)
        assert np.array_equal(loaded.classifier, model.classifier)
        assert np.array_equal(loaded.transform, model.transform)

    def test_round_trip_without_optional_blocks(self, tmp_path):
        model = ksvd_train(TrainingSet(np.eye(4)), num_atoms=3, sparsity_k=1, sweeps=1)
        path = tmp_path / "plain.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.dictionary.atoms, model.dictionary.atoms)
        assert loaded.classifier is None and loaded.transform is None

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE!" + b"\0" * 32)
        with pytest.raises(ValueError):
            load_model(path)

    def test_trace_csv(self):
        model = ksvd_train(TrainingSet(np.eye(4)), num_atoms=3, sparsity_k=1, sweeps=2)
        csv = trace_to_csv(model)
        lines = csv.strip().split("\n")
        assert lines[0] == "sweep,objective"
        assert len(lines) == 3
