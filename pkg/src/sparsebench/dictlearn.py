"""Dictionary learning: K-SVD, MOD, locality-constrained coding, and the
label-augmented K-SVD wrappers used for supervised classification.

The K-SVD sweep maintains the global residual matrix so each atom update is
O(d * nnz) instead of re-forming Y - D X from scratch; rank-1 factors come
from a warm-started power iteration on E E^T.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .greedy import batch_omp
from .linalg import SingularSystemError, as_matrix, as_vector
from .problem import Dictionary

_MAGIC = b"SPKD1"


@dataclass(frozen=True)
class TrainingSet:
    """Sample matrix (columns = samples) with optional label structures."""

    samples: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", as_matrix(self.samples))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (self.samples.shape[1],):
                raise ValueError("labels length must match the sample count")
            object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    def label_matrix(self) -> np.ndarray:
        """0/1 class-indicator matrix with exactly one 1 per column."""
        if self.labels is None:
            raise ValueError("training set has no labels")
        classes = int(self.labels.max()) + 1
        h = np.zeros((classes, self.num_samples))
        h[self.labels, np.arange(self.num_samples)] = 1.0
        return h

    def joint_label_matrix(self, atom_classes) -> np.ndarray:
        """Block indicator pairing atoms with samples of the same class."""
        if self.labels is None:
            raise ValueError("training set has no labels")
        atom_classes = np.asarray(atom_classes, dtype=int)
        return (atom_classes[:, None] == self.labels[None, :]).astype(float)


@dataclass(frozen=True)
class LearnedDictionary:
    dictionary: Dictionary
    classifier: np.ndarray | None = None
    transform: np.ndarray | None = None
    objective_trace: tuple = field(default_factory=tuple)


def _rank1_factor(e, v0=None, max_iter=80, tol=1e-13):
    """Dominant singular triple of e via power iteration on e e^T."""
    d, m = e.shape
    if v0 is not None and np.linalg.norm(v0) > 0:
        u = e @ v0
    else:
        u = e @ np.ones(m)
    nu = np.linalg.norm(u)
    if nu == 0:
        u = e[:, 0] if m else np.zeros(d)
        nu = np.linalg.norm(u)
        if nu == 0:
            return np.zeros(d), 0.0, np.zeros(m)
    u /= nu
    sigma = 0.0
    for _ in range(max_iter):
        w = e.T @ u
        u_new = e @ w
        sigma_new = np.linalg.norm(u_new)
        if sigma_new == 0:
            break
        u_new /= sigma_new
        drift = float(np.linalg.norm(u_new - u))
        u = u_new
        if abs(sigma_new - sigma) <= tol * max(sigma_new, 1.0) and drift <= 1e-10:
            sigma = sigma_new
            break
        sigma = sigma_new
    v = e.T @ u
    sigma = float(np.linalg.norm(v))
    if sigma > 0:
        v = v / sigma
    return u, sigma, v


def _init_atoms(y, num_atoms, rng):
    """Pick num_atoms distinct nonzero training columns, normalized."""
    norms = np.linalg.norm(y, axis=0)
    usable = np.flatnonzero(norms > 0)
    if usable.size < num_atoms:
        raise ValueError("not enough nonzero training columns to seed the dictionary")
    chosen = usable[rng.permutation(usable.size)[:num_atoms]]
    return y[:, chosen] / norms[chosen]


def _ksvd_sweeps(y, atoms, sparsity_k, sweeps, coder=None):
    """Alternating sparse coding / atom updates; returns (atoms, codes, trace).

    coder(atoms) -> codes lets the denoiser swap in an error-constrained
    OMP; the default codes every column at the fixed sparsity level.
    """
    if coder is None:
        coder = lambda d: batch_omp(d, y, sparsity_k)
    num_atoms = atoms.shape[1]
    trace = []
    codes = np.zeros((num_atoms, y.shape[1]))
    for sweep in range(sweeps):
        fresh = coder(atoms)
        # greedy coding rarely loses to the carried codes, but when it does
        # the carried ones feed the update stage; together with the
        # objective-neutral dead-atom rule this keeps the trace nonincreasing
        if sweep == 0 or (np.linalg.norm(y - atoms @ fresh)
                          <= np.linalg.norm(y - atoms @ codes)):
            codes = fresh
        residual = y - atoms @ codes
        for l in range(num_atoms):
            active = np.flatnonzero(codes[l])
            if active.size == 0:
                col_err = np.sum(residual * residual, axis=0)
                worst = int(np.argmax(col_err))
                norm = np.linalg.norm(y[:, worst])
                if norm > 0:
                    atoms[:, l] = y[:, worst] / norm
                continue
            row = codes[l, active]
            ep = residual[:, active] + np.outer(atoms[:, l], row)
            u, sigma, v = _rank1_factor(ep, v0=row)
            atoms[:, l] = u
            codes[l, active] = sigma * v
            residual[:, active] = ep - np.outer(u, sigma * v)
        trace.append(float(np.linalg.norm(y - atoms @ codes)))
    return atoms, codes, trace


def ksvd_train(data: TrainingSet, num_atoms: int, sparsity_k: int, sweeps: int,
               config=None) -> LearnedDictionary:
    """Plain K-SVD over the training samples."""
    if sparsity_k < 1:
        raise ValueError("sparsity_k must be >= 1")
    y = data.samples
    if num_atoms > y.shape[1]:
        raise ValueError("num_atoms cannot exceed the number of samples")
    seed = getattr(config, "seed", 0) if config is not None else 0
    rng = np.random.default_rng(seed)
    atoms = _init_atoms(y, num_atoms, rng)
    atoms, _codes, trace = _ksvd_sweeps(y, atoms, sparsity_k, sweeps)
    return LearnedDictionary(Dictionary(atoms, normalized=True), objective_trace=tuple(trace))


def mod_update(data: TrainingSet, codes):
    """Method-of-optimal-directions dictionary update.

    Returns (dictionary, rescaled_codes): the exact least-squares dictionary
    Y X^T (X X^T)^{-1} with columns renormalized and the code rows scaled to
    compensate, so dictionary.atoms @ rescaled_codes reproduces the
    unnormalized fit.
    """
    y = data.samples
    codes = as_matrix(codes)
    gram = codes @ codes.T
    rhs = y @ codes.T
    flags = []
    try:
        d = np.linalg.solve(gram.T, rhs.T).T
    except np.linalg.LinAlgError:
        flags.append("gram_ridge")
        d = np.linalg.solve((gram + 1e-10 * np.eye(gram.shape[0])).T, rhs.T).T
    norms = np.linalg.norm(d, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    d_unit = d / safe
    rescaled = codes * safe[:, None]
    return Dictionary(d_unit, normalized=bool(np.all(norms > 0))), rescaled


def _llc_weights(y, atoms, mu, b):
    """Solve the locality-regularized system and normalize to sum one."""
    centered = atoms - y[:, None]
    cov = centered.T @ centered
    reg = cov + mu * np.diag(b * b)
    ones = np.ones(atoms.shape[1])
    try:
        xh = np.linalg.solve(reg, ones)
    except np.linalg.LinAlgError:
        xh = None
    if xh is None or not np.all(np.isfinite(xh)) or abs(float(np.sum(xh))) < 1e-300:
        reg = cov + 10.0 * mu * np.diag(b * b)
        try:
            xh = np.linalg.solve(reg, ones)
        except np.linalg.LinAlgError:
            raise SingularSystemError("locality-regularized covariance is singular")
        if not np.all(np.isfinite(xh)) or abs(float(np.sum(xh))) < 1e-300:
            raise SingularSystemError("locality-regularized covariance is singular")
    return xh / float(np.sum(xh))


def llc_encode(y, dictionary: Dictionary, mu: float, sigma: float | None = None) -> np.ndarray:
    """Locality-constrained linear code with the affine sum-one constraint."""
    y = as_vector(y)
    atoms = dictionary.atoms
    if mu <= 0:
        raise ValueError("mu must be positive")
    dist = np.linalg.norm(atoms - y[:, None], axis=0)
    if sigma is None:
        sigma = float(np.mean(dist)) or 1.0
    b = np.exp(dist / sigma)
    return _llc_weights(y, atoms, mu, b)


def llc_codebook_optimize(data: TrainingSet, initial: Dictionary, mu: float,
                          config=None) -> Dictionary:
    """One incremental pass of locality-constrained codebook refinement.

    Per sample: similarity-normalized locality weights, LLC coding, active
    set restriction at 0.01, a constrained re-fit on the active atoms, then
    a projected gradient step on the codebook columns (norms capped at 1).
    """
    atoms = initial.atoms.copy()
    lr = config.override("learning_rate", 1e-2) if config is not None else 1e-2
    passes = config.override("passes", 1) if config is not None else 1
    active_eps = 0.01
    # feasibility first: problem constrains every column to the unit ball
    norms = np.linalg.norm(atoms, axis=0)
    atoms /= np.maximum(norms, 1.0)
    skipped = 0
    for _pass in range(passes):
        for i in range(data.num_samples):
            y = data.samples[:, i]
            dist = np.linalg.norm(atoms - y[:, None], axis=0)
            sigma = float(np.mean(dist)) or 1.0
            b = np.exp(-dist / sigma)
            spread = b.max() - b.min()
            b = (b - b.min()) / spread if spread > 0 else np.zeros_like(b)
            code = _llc_weights(y, atoms, mu, b)
            active = np.flatnonzero(np.abs(code) > active_eps)
            if active.size == 0:
                skipped += 1
                continue
            sub = atoms[:, active]
            # re-fit on the active atoms under the sum-one constraint (KKT system)
            m = active.size
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = 2.0 * sub.T @ sub + 1e-12 * np.eye(m)
            kkt[:m, m] = 1.0
            kkt[m, :m] = 1.0
            rhs = np.concatenate([2.0 * sub.T @ y, [1.0]])
            sol = np.linalg.solve(kkt, rhs)
            x_act = sol[:m]
            resid = y - sub @ x_act
            atoms[:, active] += 2.0 * lr * np.outer(resid, x_act)
            col_norms = np.linalg.norm(atoms[:, active], axis=0)
            atoms[:, active] /= np.maximum(col_norms, 1.0)
        lr *= 0.95
    return Dictionary(atoms, normalized=False)


def _stacked_ksvd(blocks, weights, num_atoms, sparsity_k, sweeps, seed):
    """K-SVD on vertically stacked, sqrt-weighted blocks; returns raw atoms."""
    stacked = np.vstack([np.sqrt(w) * b for b, w in zip(blocks, weights) if w > 0])
    rng = np.random.default_rng(seed)
    atoms = _init_atoms(stacked, num_atoms, rng)
    atoms, _codes, trace = _ksvd_sweeps(stacked, atoms, sparsity_k, sweeps)
    return atoms, trace


def dksvd_train(data: TrainingSet, num_atoms: int, sparsity_k: int, mu: float,
                config=None, sweeps: int = 10) -> LearnedDictionary:
    """Discriminative K-SVD: stack sqrt(mu)-weighted labels under the samples."""
    h = data.label_matrix()
    seed = getattr(config, "seed", 0) if config is not None else 0
    d_rows = data.samples.shape[0]
    atoms, trace = _stacked_ksvd([data.samples, h], [1.0, mu], num_atoms,
                                 sparsity_k, sweeps, seed)
    d_part = atoms[:d_rows]
    c_part = atoms[d_rows:] / np.sqrt(mu) if mu > 0 else np.zeros((h.shape[0], num_atoms))
    norms = np.linalg.norm(d_part, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return LearnedDictionary(
        Dictionary(d_part / safe, normalized=bool(np.all(norms > 0))),
        classifier=c_part / safe,
        objective_trace=tuple(trace),
    )


def atom_class_assignment(labels, num_atoms) -> np.ndarray:
    """Contiguous per-class atom quotas proportional to class frequencies."""
    labels = np.asarray(labels, dtype=int)
    classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=classes)
    quotas = np.floor(num_atoms * counts / counts.sum()).astype(int)
    quotas[quotas == 0] = 1
    while quotas.sum() > num_atoms:
        quotas[int(np.argmax(quotas))] -= 1
    while quotas.sum() < num_atoms:
        deficit = num_atoms * counts / counts.sum() - quotas
        quotas[int(np.argmax(deficit))] += 1
    return np.repeat(np.arange(classes), quotas)


def lcksvd_train(data: TrainingSet, num_atoms: int, sparsity_k: int, mu: float,
                 eta: float, config=None, sweeps: int = 10) -> LearnedDictionary:
    """Label-consistent K-SVD with the discriminative sparse-code block."""
    h = data.label_matrix()
    atom_classes = atom_class_assignment(data.labels, num_atoms)
    l_mat = data.joint_label_matrix(atom_classes)
    seed = getattr(config, "seed", 0) if config is not None else 0
    d_rows = data.samples.shape[0]
    atoms, trace = _stacked_ksvd([data.samples, l_mat, h], [1.0, mu, eta],
                                 num_atoms, sparsity_k, sweeps, seed)
    d_part = atoms[:d_rows]
    pos = d_rows
    if mu > 0:
        a_part = atoms[pos:pos + num_atoms] / np.sqrt(mu)
        pos += num_atoms
    else:
        a_part = np.zeros((num_atoms, num_atoms))
    if eta > 0:
        c_part = atoms[pos:pos + h.shape[0]] / np.sqrt(eta)
    else:
        c_part = np.zeros((h.shape[0], num_atoms))
    norms = np.linalg.norm(d_part, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return LearnedDictionary(
        Dictionary(d_part / safe, normalized=bool(np.all(norms > 0))),
        classifier=c_part / safe,
        transform=a_part / safe,
        objective_trace=tuple(trace),
    )


def supervised_classify(model: LearnedDictionary, y, sparsity_k: int) -> int:
    """OMP-code the probe against the learned dictionary, argmax C x."""
    if model.classifier is None:
        raise ValueError("model has no classifier matrix")
    y = as_vector(y)
    code = batch_omp(model.dictionary.atoms, y[:, None], sparsity_k)[:, 0]
    scores = model.classifier @ code
    return int(np.argmax(scores))  # argmax ties resolve to the lowest class


def save_model(model: LearnedDictionary, path):
    """Flat binary layout: magic, dims, presence flags, row-major float64."""
    atoms = model.dictionary.atoms
    d, m = atoms.shape
    has_c = model.classifier is not None
    has_a = model.transform is not None
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIBBII", d, m, int(has_c), int(has_a),
                             model.classifier.shape[0] if has_c else 0,
                             model.transform.shape[0] if has_a else 0))
        fh.write(np.ascontiguousarray(atoms, dtype="<f8").tobytes())
        if has_c:
            fh.write(np.ascontiguousarray(model.classifier, dtype="<f8").tobytes())
        if has_a:
            fh.write(np.ascontiguousarray(model.transform, dtype="<f8").tobytes())


def load_model(path) -> LearnedDictionary:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _MAGIC:
            raise ValueError(f"not a dictionary model file (magic {magic!r})")
        d, m, has_c, has_a, c_rows, a_rows = struct.unpack("<IIBBII", fh.read(18))
        atoms = np.frombuffer(fh.read(8 * d * m), dtype="<f8").reshape(d, m)
        classifier = None
        transform = None
        if has_c:
            classifier = np.frombuffer(fh.read(8 * c_rows * m), dtype="<f8").reshape(c_rows, m)
        if has_a:
            transform = np.frombuffer(fh.read(8 * a_rows * m), dtype="<f8").reshape(a_rows, m)
    return LearnedDictionary(Dictionary(atoms.copy()), classifier=classifier,
                             transform=transform)


def trace_to_csv(model: LearnedDictionary) -> str:
    lines = ["sweep,objective"]
    lines += [f"{i},{v!r}" for i, v in enumerate(model.objective_trace)]
    return "\n".join(lines) + "\n"
