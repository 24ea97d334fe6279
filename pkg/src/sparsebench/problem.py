"""Shared problem model: dictionary, constraint variants, solution record.

Every solver in the suite consumes a SparseProblem and emits a
SparseSolution, so cross-solver tests and the benchmark harness can treat
them interchangeably. Solvers reject constraint variants they do not
implement instead of silently converting between them.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, as_vector, norm_lp


class ConstraintMismatchError(ValueError):
    """A solver was handed a constraint variant it does not support."""


@dataclass(frozen=True)
class Sparsity:
    """At most k nonzero coefficients (the k-sparse constraint)."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("sparsity level k must be >= 1")


@dataclass(frozen=True)
class Lagrangian:
    """Penalized form: min 1/2 ||y - X a||^2 + lam ||a||_1."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class ResidualBound:
    """Stop once ||y - X a||_2 <= epsilon."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class Interpolating:
    """Exact-fit form: min ||a||_1 subject to y = X a."""


Constraint = Sparsity | Lagrangian | ResidualBound | Interpolating


@dataclass(frozen=True)
class Dictionary:
    """Column matrix of atoms; `normalized` asserts unit-l2 columns."""

    atoms: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "atoms", as_matrix(self.atoms))
        if self.normalized:
            norms = np.linalg.norm(self.atoms, axis=0)
            if not np.allclose(norms, 1.0, atol=1e-10):
                raise ValueError("normalized dictionary has non-unit columns")

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[1]


def normalize_columns(dictionary: Dictionary) -> Dictionary:
    """Scale every atom to unit l2 norm; zero columns are rejected."""
    atoms = dictionary.atoms
    norms = np.linalg.norm(atoms, axis=0)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a dictionary with zero columns")
    return Dictionary(atoms=atoms / norms, normalized=True)


@dataclass(frozen=True)
class SparseProblem:
    dictionary: Dictionary
    probe: np.ndarray
    constraint: Constraint

    def __post_init__(self):
        object.__setattr__(self, "probe", as_vector(self.probe))
        if self.probe.size != self.dictionary.dim:
            raise ValueError(
                f"probe length {self.probe.size} does not match dictionary "
                f"dimension {self.dictionary.dim}"
            )
        if isinstance(self.constraint, Sparsity) and self.constraint.k > self.dictionary.num_atoms:
            raise ValueError("sparsity level exceeds the number of atoms")

    @property
    def x(self) -> np.ndarray:
        return self.dictionary.atoms

    @property
    def y(self) -> np.ndarray:
        return self.probe


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared across solvers; per-solver extras go in step_overrides."""

    max_iterations: int = 1000
    tolerance: float = 1e-6
    step_overrides: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def override(self, name: str, default):
        return self.step_overrides.get(name, default)


@dataclass(frozen=True)
class SparseSolution:
    """Coefficients plus the support/sign/residual bookkeeping of the record."""

    alpha: np.ndarray
    support: np.ndarray
    signs: np.ndarray
    residual_norm: float
    objective_trace: tuple
    iterations: int
    converged: bool
    flags: tuple = ()

    @property
    def nnz(self) -> int:
        return int(self.support.size)


def solution_from_alpha(problem: SparseProblem, alpha, objective_trace=(),
                        iterations: int = 0, converged: bool = True,
                        flags=()) -> SparseSolution:
    """Derive support, signs and residual norm from a coefficient vector."""
    alpha = as_vector(alpha)
    if alpha.size != problem.dictionary.num_atoms:
        raise ValueError("coefficient length does not match the dictionary")
    amax = float(np.max(np.abs(alpha))) if alpha.size else 0.0
    tol = 1e-8 * amax
    support = np.flatnonzero(np.abs(alpha) > tol)
    signs = np.sign(alpha[support])
    residual = problem.y - problem.x @ alpha
    return SparseSolution(
        alpha=alpha,
        support=support,
        signs=signs,
        residual_norm=float(np.linalg.norm(residual)),
        objective_trace=tuple(float(v) for v in objective_trace),
        iterations=int(iterations),
        converged=bool(converged),
        flags=tuple(flags),
    )


def lasso_objective(problem: SparseProblem, alpha) -> float:
    """1/2 ||y - X a||^2 + lam ||a||_1 for a Lagrangian problem."""
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError("lasso_objective needs a Lagrangian constraint")
    alpha = as_vector(alpha)
    r = problem.y - problem.x @ alpha
    return 0.5 * float(r @ r) + problem.constraint.lam * norm_lp(alpha, 1)


def check_optimality_l1(problem: SparseProblem, alpha, tol: float) -> bool:
    """Subgradient certificate for the Lagrangian problem.

    On the support the residual correlations must equal lam * sign(alpha_i)
    within tol (relative to lam); off the support their magnitude must stay
    below lam * (1 + tol). Used as the cross-solver optimality oracle.
    """
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError("check_optimality_l1 needs a Lagrangian constraint")
    if tol <= 0:
        raise ValueError("tol must be positive")
    alpha = as_vector(alpha)
    lam = problem.constraint.lam
    corr = problem.x.T @ (problem.y - problem.x @ alpha)
    amax = float(np.max(np.abs(alpha))) if alpha.size else 0.0
    on = np.abs(alpha) > 1e-8 * amax
    if np.any(on):
        gap = np.abs(corr[on] - lam * np.sign(alpha[on]))
        if float(np.max(gap)) > tol * lam:
            return False
    off = ~on
    if np.any(off) and float(np.max(np.abs(corr[off]))) > lam * (1.0 + tol):
        return False
    return True
