"""Pydantic request/response models for the solver service."""

from pydantic import BaseModel, Field


class SolverOptions(BaseModel):
    max_iterations: int = 1000
    tolerance: float = 1e-6
    seed: int = 0
    step_overrides: dict[str, float] = Field(default_factory=dict)


class ConstraintModel(BaseModel):
    kind: str  # sparsity | lagrangian | residual | interpolating
    value: float | None = None


class SolveRequest(BaseModel):
    matrix: list[list[float]]
    probe: list[float]
    solver: str
    constraint: ConstraintModel
    normalize: bool = False
    config: SolverOptions = Field(default_factory=SolverOptions)


class SolveResponse(BaseModel):
    alpha: list[float]
    support: list[int]
    signs: list[float]
    residual_norm: float
    iterations: int
    converged: bool
    objective_trace: list[float]


class DenoiseRequest(BaseModel):
    image_pgm_b64: str
    sigma: float
    patch: int = 8
    stride: int = 1
    atoms: int = 256
    sweeps: int = 10
    delta: float | None = None
    reference_pgm_b64: str | None = None


class DenoiseResponse(BaseModel):
    image_pgm_b64: str
    psnr_noisy: float | None = None
    psnr_denoised: float | None = None


class BenchRequest(BaseModel):
    dataset: str
    solvers: list[str]
    lambdas: str | None = None       # grid expression, e.g. "1e-4:1:10log"
    train_per_class: int = 5
    trials: int = 10
    seed: int = 0
    pca_energy: float = 0.98
    resize: str | None = None        # "HxW"
    sparsity_k: int | None = None
    m_keep: int | None = None
    solver_tolerance: float | None = None
    solver_iterations: int | None = None


class BenchRunResponse(BaseModel):
    csv: str
    timing_report: str
    aggregates: dict[str, list[float]]


class BenchSweepResponse(BaseModel):
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
    solvers: list[str]
