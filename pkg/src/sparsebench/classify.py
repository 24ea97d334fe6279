"""Sparse-representation classifiers: minimum class-residual SRC and the
two-phase l2-regularized method (TPTSR).

SRC codes the probe over the whole normalized training matrix with any of
the suite's solvers and assigns the class whose samples reconstruct the
probe best. TPTSR is reconstructed from a one-line description: a ridge
solve over all samples picks the m_keep most useful training samples, a
second ridge solve over the keepers yields the class residuals.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, as_vector, ridge_least_squares
from .problem import (
    Dictionary,
    Interpolating,
    Lagrangian,
    ResidualBound,
    SolverConfig,
    Sparsity,
    SparseProblem,
)
from .solvers import solve_by_name, solver_mode


@dataclass(frozen=True)
class LabeledDataset:
    """Column-sample matrix with integer class labels in [0, num_classes)."""

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", as_matrix(self.samples))
        labels = np.asarray(self.labels, dtype=int)
        if labels.shape != (self.samples.shape[1],):
            raise ValueError("labels length must match the sample count")
        object.__setattr__(self, "labels", labels)
        classes = self.num_classes or int(labels.max()) + 1
        object.__setattr__(self, "num_classes", classes)
        if labels.min() < 0 or labels.max() >= classes:
            raise ValueError("labels out of range")
        present = np.unique(labels)
        if present.size != classes:
            raise ValueError("every class must have at least one sample")

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    def class_indices(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


def build_problem(dictionary: Dictionary, y, solver: str, param: float) -> SparseProblem:
    """Wrap a probe into the constraint variant the named solver expects.

    Greedy solvers get a residual bound, the Lagrangian family gets the
    penalty weight, interpolating solvers ignore the parameter, and the
    l1/2 solver reads the parameter as its target sparsity.
    """
    mode = solver_mode(solver)
    if mode == "greedy":
        constraint = ResidualBound(param)
    elif mode == "lagrangian":
        constraint = Lagrangian(param)
    elif mode == "interpolating":
        constraint = Interpolating()
    elif mode == "sparsity":
        constraint = Sparsity(max(1, int(round(param))))
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return SparseProblem(dictionary, y, constraint)


def class_residuals(train: LabeledDataset, y, alpha) -> np.ndarray:
    """Squared reconstruction error of the probe per class."""
    y = as_vector(y)
    res = np.empty(train.num_classes)
    for c in range(train.num_classes):
        idx = train.class_indices(c)
        r = y - train.samples[:, idx] @ alpha[idx]
        res[c] = float(r @ r)
    return res


def src_classify(train: LabeledDataset, y, solver: str, lambda_or_eps: float,
                 config: SolverConfig = SolverConfig(), return_solution: bool = False):
    """Sparse-representation classification over unit-norm training samples."""
    dictionary = Dictionary(train.samples, normalized=True)
    problem = build_problem(dictionary, y, solver, lambda_or_eps)
    solution = solve_by_name(solver, problem, config)
    residuals = class_residuals(train, y, solution.alpha)
    label = int(np.argmin(residuals))  # ties resolve to the lowest class index
    if return_solution:
        return label, residuals, solution
    return label, residuals


def tptsr_classify(train: LabeledDataset, y, mu: float, m_keep: int):
    """Two-phase coarse-to-fine l2 classification."""
    y = as_vector(y)
    if not 1 <= m_keep <= train.num_samples:
        raise ValueError("m_keep must be in [1, num_samples]")
    alpha = ridge_least_squares(train.samples, y, mu)
    scores = np.empty(train.num_samples)
    for i in range(train.num_samples):
        r = y - alpha[i] * train.samples[:, i]
        scores[i] = float(r @ r)
    keep = np.argsort(scores, kind="stable")[:m_keep]
    sub = train.samples[:, keep]
    beta = ridge_least_squares(sub, y, mu)
    ynorm2 = float(y @ y)
    residuals = np.full(train.num_classes, ynorm2)
    kept_labels = train.labels[keep]
    for c in range(train.num_classes):
        mask = kept_labels == c
        if np.any(mask):
            r = y - sub[:, mask] @ beta[mask]
            residuals[c] = float(r @ r)
    label = int(np.argmin(residuals))
    return label, residuals


def default_m_keep(train: LabeledDataset) -> int:
    return min(train.num_samples, max(train.num_classes, int(np.ceil(0.1 * train.num_samples))))


@dataclass(frozen=True)
class ClassifierSpec:
    """What to run per probe: a solver name plus its scalar parameter."""

    solver: str
    param: float
    m_keep: int | None = None  # TPTSR only
    config: SolverConfig = field(default_factory=SolverConfig)


def classify_one(train: LabeledDataset, y, spec: ClassifierSpec) -> int:
    if spec.solver == "tptsr":
        m_keep = spec.m_keep if spec.m_keep is not None else default_m_keep(train)
        label, _ = tptsr_classify(train, y, spec.param, m_keep)
    else:
        label, _ = src_classify(train, y, spec.solver, spec.param, spec.config)
    return label


def evaluate_split(train: LabeledDataset, test: LabeledDataset,
                   method: ClassifierSpec):
    """Accuracy on the test split plus mean wall-clock seconds per probe."""
    if test.num_samples == 0:
        raise ValueError("test set is empty")
    if train.dim != test.dim:
        raise ValueError("train/test feature dimensions differ")
    correct = 0
    start = time.perf_counter()
    for i in range(test.num_samples):
        label = classify_one(train, test.samples[:, i], method)
        correct += int(label == test.labels[i])
    elapsed = time.perf_counter() - start
    return correct / test.num_samples, elapsed / test.num_samples
