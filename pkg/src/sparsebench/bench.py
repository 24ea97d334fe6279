"""Benchmark harness: dataset ingestion, PCA preprocessing, seeded splits,
per-solver regularization sweeps, and accuracy/timing tables.

Randomness comes exclusively from numpy's PCG64 generator seeded from
(seed, trial), so a config reproduces its splits bit-for-bit on any
platform. The results CSV carries only deterministic columns; wall-clock
timings are reported separately.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

from .classify import ClassifierSpec, LabeledDataset, evaluate_split
from .linalg import pca_reduce
from .problem import SolverConfig
from .solvers import solver_mode


class DataError(ValueError):
    """Dataset missing, malformed, or inconsistent with the config."""


DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 0, 10))


@dataclass(frozen=True)
class BenchConfig:
    dataset: str
    solvers: tuple = ("omp", "fista", "tptsr")
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    train_per_class: int = 5
    trials: int = 10
    seed: int = 0
    pca_energy: float = 0.98
    output: str | None = None
    resize: tuple | None = None          # (height, width) bilinear resize
    sparsity_k: int | None = None        # used by the l1/2 solver
    m_keep: int | None = None            # TPTSR keep count
    solver_tolerance: float = 1e-4
    solver_iterations: int = 500

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.pca_energy <= 1:
            raise ValueError("pca_energy must be in (0, 1]")
        if any(l <= 0 for l in self.lambda_grid):
            raise ValueError("lambda grid values must be positive")
        for name in self.solvers:
            if name != "tptsr":
                solver_mode(name)


@dataclass(frozen=True)
class BenchResult:
    rows: tuple      # (solver, lambda, trial, accuracy)
    timings: dict    # solver -> mean per-sample seconds
    aggregates: dict  # solver -> (mean accuracy, sample std)


def bilinear_resize(img, new_h: int, new_w: int) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    r = np.linspace(0, h - 1, new_h)
    c = np.linspace(0, w - 1, new_w)
    r0 = np.floor(r).astype(int)
    c0 = np.floor(c).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (r - r0)[:, None]
    fc = (c - c0)[None, :]
    top = img[np.ix_(r0, c0)] * (1 - fc) + img[np.ix_(r0, c1)] * fc
    bot = img[np.ix_(r1, c0)] * (1 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def _load_csv_pair(path) -> LabeledDataset:
    data_path = os.path.join(path, "data.csv")
    label_path = os.path.join(path, "labels.csv")
    try:
        data = np.loadtxt(data_path, delimiter=None if _is_whitespace(data_path) else ",", ndmin=2)
        labels = np.loadtxt(label_path, dtype=int, ndmin=1)
    except (OSError, ValueError) as exc:
        raise DataError(f"failed to read CSV dataset at {path}: {exc}")
    if data.shape[0] != labels.shape[0]:
        raise DataError("data.csv rows and labels.csv lines disagree")
    try:
        return LabeledDataset(samples=data.T, labels=labels)
    except ValueError as exc:
        raise DataError(str(exc))


def _is_whitespace(path) -> bool:
    with open(path) as fh:
        first = fh.readline()
    return "," not in first


def _load_pgm_folders(path, resize) -> LabeledDataset:
    from .denoise import read_pgm

    classes = sorted(
        d for d in os.listdir(path) if os.path.isdir(os.path.join(path, d))
    )
    if not classes:
        raise DataError(f"no class subfolders under {path}")
    columns = []
    labels = []
    dim = None
    for label, cls in enumerate(classes):
        files = sorted(
            f for f in os.listdir(os.path.join(path, cls)) if f.lower().endswith(".pgm")
        )
        if not files:
            raise DataError(f"class folder {cls} holds no PGM images")
        for name in files:
            try:
                img = read_pgm(os.path.join(path, cls, name))
            except (OSError, ValueError) as exc:
                raise DataError(f"bad PGM {cls}/{name}: {exc}")
            if resize is not None:
                img = bilinear_resize(img, resize[0], resize[1])
            vec = img.reshape(-1)  # row-major vectorization
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DataError(f"inconsistent image dimensions at {cls}/{name}")
            columns.append(vec)
            labels.append(label)
    return LabeledDataset(samples=np.stack(columns, axis=1), labels=np.asarray(labels))


def load_dataset(path, resize=None) -> LabeledDataset:
    """Either data.csv + labels.csv (rows = samples) or PGM class folders."""
    if not os.path.isdir(path):
        raise DataError(f"dataset directory not found: {path}")
    if os.path.exists(os.path.join(path, "data.csv")):
        return _load_csv_pair(path)
    return _load_pgm_folders(path, resize)


def split_dataset(data: LabeledDataset, train_per_class: int, rng):
    """Seeded per-class split into train/test index arrays."""
    train_idx = []
    test_idx = []
    for c in range(data.num_classes):
        idx = data.class_indices(c)
        if idx.size <= train_per_class:
            raise DataError(
                f"class {c} has {idx.size} samples; needs more than "
                f"train_per_class={train_per_class}"
            )
        perm = rng.permutation(idx.size)
        train_idx.extend(idx[perm[:train_per_class]])
        test_idx.extend(idx[perm[train_per_class:]])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(test_idx))


def _unit_columns(m):
    norms = np.linalg.norm(m, axis=0)
    return m / np.where(norms > 0, norms, 1.0)


def prepare_features(data: LabeledDataset, train_idx, test_idx, pca_energy):
    """PCA fit on the training partition only, then unit-normalize samples."""
    train_raw = data.samples[:, train_idx]
    proj, _ = pca_reduce(train_raw, pca_energy)
    mean = train_raw.mean(axis=1, keepdims=True)
    projected_train = proj @ (train_raw - mean)
    if np.any(np.linalg.norm(projected_train, axis=0) == 0):
        raise DataError("a training sample coincides with the training mean "
                        "after projection; cannot unit-normalize")
    train = _unit_columns(projected_train)
    test = _unit_columns(proj @ (data.samples[:, test_idx] - mean))
    return (
        LabeledDataset(train, data.labels[train_idx], data.num_classes),
        LabeledDataset(test, data.labels[test_idx], data.num_classes),
    )


def _solver_spec(config: BenchConfig, solver: str, lam: float,
                 selection: bool = False) -> ClassifierSpec:
    iterations = config.solver_iterations
    tolerance = config.solver_tolerance
    if selection:
        # the held-out sweep only ranks lambdas; lighter solves suffice
        iterations = min(iterations, 200)
        tolerance = max(tolerance, 1e-3)
    solver_config = SolverConfig(max_iterations=iterations, tolerance=tolerance,
                                 seed=config.seed)
    if solver == "tptsr":
        return ClassifierSpec("tptsr", lam, m_keep=config.m_keep, config=solver_config)
    if solver_mode(solver) == "sparsity":
        k = config.sparsity_k or config.train_per_class
        return ClassifierSpec(solver, float(k), config=solver_config)
    return ClassifierSpec(solver, lam, config=solver_config)


def _lambda_sensitive(solver: str) -> bool:
    if solver == "tptsr":
        return True
    return solver_mode(solver) in ("greedy", "lagrangian")


def select_lambda(config: BenchConfig, solver: str, train: LabeledDataset, rng):
    """Held-out selection: 50/50 split of the training partition per class."""
    if not _lambda_sensitive(solver) or len(config.lambda_grid) == 1:
        return float(config.lambda_grid[0])
    counts = np.bincount(train.labels, minlength=train.num_classes)
    if counts.min() < 2:  # nothing to hold out
        return float(config.lambda_grid[0])
    fit_idx, val_idx = [], []
    for c in range(train.num_classes):
        idx = train.class_indices(c)
        perm = rng.permutation(idx.size)
        half = max(1, int(np.ceil(idx.size / 2)))
        half = min(half, idx.size - 1) if idx.size > 1 else half
        fit_idx.extend(idx[perm[:half]])
        val_idx.extend(idx[perm[half:]])
    fit_idx = np.sort(np.asarray(fit_idx))
    val_idx = np.sort(np.asarray(val_idx))
    if val_idx.size == 0:  # cannot hold out anything: fall back to the grid head
        return float(config.lambda_grid[0])
    fit = LabeledDataset(_unit_columns(train.samples[:, fit_idx]),
                         train.labels[fit_idx], train.num_classes)
    val = LabeledDataset(train.samples[:, val_idx], train.labels[val_idx],
                         train.num_classes)
    if solver == "lasso-homotopy":
        return _select_lambda_homotopy(config, fit, val)
    best_lam = float(config.lambda_grid[0])
    best_acc = -1.0
    for lam in config.lambda_grid:
        acc, _ = evaluate_split(fit, val, _solver_spec(config, solver, float(lam),
                                                       selection=True))
        if acc > best_acc:
            best_acc = acc
            best_lam = float(lam)
    return best_lam


def _select_lambda_homotopy(config: BenchConfig, fit: LabeledDataset,
                            val: LabeledDataset) -> float:
    """One path walk per probe covers the whole grid (piecewise linearity)."""
    from .classify import class_residuals
    from .homotopy import lasso_homotopy, path_solutions_at
    from .problem import Dictionary, Lagrangian, SparseProblem

    grid = sorted(float(l) for l in config.lambda_grid)
    dictionary = Dictionary(fit.samples, normalized=True)
    solver_config = SolverConfig(max_iterations=config.solver_iterations,
                                 tolerance=config.solver_tolerance,
                                 seed=config.seed)
    correct = {lam: 0 for lam in grid}
    for i in range(val.num_samples):
        y = val.samples[:, i]
        problem = SparseProblem(dictionary, y, Lagrangian(grid[0]))
        _, path = lasso_homotopy(problem, solver_config)
        for lam, alpha in path_solutions_at(path, grid, fit.num_samples).items():
            label = int(np.argmin(class_residuals(fit, y, alpha)))
            correct[lam] += int(label == val.labels[i])
    best_lam = grid[0]
    best = -1
    for lam in config.lambda_grid:  # keep the configured grid order for ties
        if correct[float(lam)] > best:
            best = correct[float(lam)]
            best_lam = float(lam)
    return best_lam


def run_benchmark(config: BenchConfig) -> BenchResult:
    data = load_dataset(config.dataset, config.resize)
    rows = []
    times = {s: [] for s in config.solvers}
    for trial in range(config.trials):
        rng = np.random.default_rng([config.seed, trial])
        train_idx, test_idx = split_dataset(data, config.train_per_class, rng)
        train, test = prepare_features(data, train_idx, test_idx, config.pca_energy)
        for solver in config.solvers:
            lam = select_lambda(config, solver, train,
                                np.random.default_rng([config.seed, trial, 1]))
            acc, per_sample = evaluate_split(train, test, _solver_spec(config, solver, lam))
            rows.append((solver, lam, trial, acc))
            times[solver].append(per_sample)
    aggregates = {}
    for solver in config.solvers:
        accs = np.asarray([r[3] for r in rows if r[0] == solver])
        std = float(np.std(accs, ddof=1)) if accs.size > 1 else 0.0
        aggregates[solver] = (float(np.mean(accs)), std)
    timings = {s: float(np.mean(v)) for s, v in times.items()}
    return BenchResult(rows=tuple(rows), timings=timings, aggregates=aggregates)


def sweep_lambda(config: BenchConfig) -> tuple:
    """Accuracy-vs-lambda rows (solver, lambda, accuracy) on a fixed split."""
    if not config.lambda_grid:
        raise ValueError("lambda grid is empty")
    data = load_dataset(config.dataset, config.resize)
    rng = np.random.default_rng([config.seed, 0])
    train_idx, test_idx = split_dataset(data, config.train_per_class, rng)
    train, test = prepare_features(data, train_idx, test_idx, config.pca_energy)
    rows = []
    for solver in config.solvers:
        for lam in config.lambda_grid:
            acc, _ = evaluate_split(train, test, _solver_spec(config, solver, float(lam)))
            rows.append((solver, float(lam), acc))
    return tuple(rows)


def result_to_csv(result: BenchResult) -> str:
    """Deterministic result table; trial rows then mean/std aggregate rows."""
    lines = ["solver,lambda,trial,accuracy"]
    for solver, lam, trial, acc in result.rows:
        lines.append(f"{solver},{lam!r},{trial},{acc!r}")
    for solver, (mean, std) in result.aggregates.items():
        lines.append(f"{solver},,mean,{mean!r}")
        lines.append(f"{solver},,std,{std!r}")
    return "\n".join(lines) + "\n"


def sweep_to_csv(rows) -> str:
    lines = ["solver,lambda,accuracy"]
    lines += [f"{solver},{lam!r},{acc!r}" for solver, lam, acc in rows]
    return "\n".join(lines) + "\n"


def timing_report(result: BenchResult) -> str:
    lines = ["solver  mean_seconds_per_test_sample"]
    for solver, secs in result.timings.items():
        lines.append(f"{solver:22s}{secs:.6f}")
    return "\n".join(lines)


_CONFIG_KEYS = {
    "dataset": str,
    "solvers": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "lambdas": None,  # parsed by parse_lambda_grid
    "train_per_class": int,
    "trials": int,
    "seed": int,
    "pca_energy": float,
    "output": str,
    "resize": None,
    "sparsity_k": int,
    "m_keep": int,
    "solver_tolerance": float,
    "solver_iterations": int,
}


def parse_lambda_grid(text: str) -> tuple:
    """Either comma-separated values or lo:hi:COUNTlog for a log-spaced grid."""
    text = text.strip()
    if text.endswith("log"):
        lo, hi, count = text[:-3].split(":")
        grid = np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(count))
        return tuple(float(v) for v in grid)
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_resize(text: str) -> tuple:
    h, w = text.lower().split("x")
    return int(h), int(w)


def read_config_file(path) -> dict:
    """Flat `key = value` file; unknown keys are rejected."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key == "lambdas":
                values["lambda_grid"] = parse_lambda_grid(val)
            elif key == "resize":
                values["resize"] = parse_resize(val)
            else:
                values[key] = _CONFIG_KEYS[key](val)
    return values


def config_from_values(values: dict) -> BenchConfig:
    if "dataset" not in values:
        raise ValueError("a dataset path is required")
    return BenchConfig(**values)


def merge_config(base: BenchConfig, **updates) -> BenchConfig:
    return replace(base, **{k: v for k, v in updates.items() if v is not None})
