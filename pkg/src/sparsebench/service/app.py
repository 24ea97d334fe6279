"""FastAPI service wrapping the solver suite.

Error mapping: bad solver names, constraints or parameters return 422;
dataset problems (missing directory, malformed files, class counts) return
404-style 400s with a `data_error` marker so the CLI can exit 3 instead
of 2.
"""

import base64

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bench import (
    BenchConfig,
    DataError,
    parse_lambda_grid,
    parse_resize,
    result_to_csv,
    run_benchmark,
    sweep_lambda,
    sweep_to_csv,
    timing_report,
)
from ..denoise import DenoiseSettings, denoise_image, pgm_from_bytes, pgm_to_bytes, psnr
from ..problem import (
    Dictionary,
    Interpolating,
    Lagrangian,
    ResidualBound,
    SolverConfig,
    Sparsity,
    SparseProblem,
    normalize_columns,
)
from ..solvers import SOLVER_NAMES, solve_by_name
from .schemas import (
    BenchRequest,
    BenchRunResponse,
    BenchSweepResponse,
    ConstraintModel,
    DenoiseRequest,
    DenoiseResponse,
    HealthResponse,
    SolveRequest,
    SolveResponse,
)

app = FastAPI(title="sparsebench", version=__version__)


def _constraint(model: ConstraintModel):
    kind = model.kind.lower()
    try:
        if kind == "sparsity":
            return Sparsity(int(model.value))
        if kind == "lagrangian":
            return Lagrangian(float(model.value))
        if kind == "residual":
            return ResidualBound(float(model.value))
        if kind == "interpolating":
            return Interpolating()
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    raise HTTPException(status_code=422, detail=f"unknown constraint kind {model.kind!r}")


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__, solvers=list(SOLVER_NAMES))


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest) -> SolveResponse:
    try:
        dictionary = Dictionary(np.asarray(req.matrix, dtype=float))
        if req.normalize:
            dictionary = normalize_columns(dictionary)
        elif np.allclose(np.linalg.norm(dictionary.atoms, axis=0), 1.0, atol=1e-10):
            dictionary = Dictionary(dictionary.atoms, normalized=True)
        problem = SparseProblem(dictionary, np.asarray(req.probe, dtype=float),
                                _constraint(req.constraint))
        config = SolverConfig(max_iterations=req.config.max_iterations,
                              tolerance=req.config.tolerance,
                              step_overrides=dict(req.config.step_overrides),
                              seed=req.config.seed)
        solution = solve_by_name(req.solver, problem, config)
    except HTTPException:
        raise
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return SolveResponse(
        alpha=solution.alpha.tolist(),
        support=solution.support.tolist(),
        signs=solution.signs.tolist(),
        residual_norm=solution.residual_norm,
        iterations=solution.iterations,
        converged=solution.converged,
        objective_trace=list(solution.objective_trace),
    )


def _decode_pgm(b64: str) -> np.ndarray:
    try:
        return pgm_from_bytes(base64.b64decode(b64))
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _encode_pgm(img: np.ndarray) -> str:
    return base64.b64encode(pgm_to_bytes(img)).decode("ascii")


@app.post("/denoise", response_model=DenoiseResponse)
def denoise(req: DenoiseRequest) -> DenoiseResponse:
    try:
        noisy = _decode_pgm(req.image_pgm_b64)
        settings = DenoiseSettings(sigma=req.sigma, patch=req.patch,
                                   stride=req.stride, num_atoms=req.atoms,
                                   sweeps=req.sweeps, delta=req.delta)
        cleaned = denoise_image(noisy, settings)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    psnr_noisy = psnr_denoised = None
    if req.reference_pgm_b64:
        reference = _decode_pgm(req.reference_pgm_b64)
        psnr_noisy = psnr(reference, noisy)
        psnr_denoised = psnr(reference, cleaned)
    return DenoiseResponse(image_pgm_b64=_encode_pgm(cleaned),
                           psnr_noisy=psnr_noisy, psnr_denoised=psnr_denoised)


def _bench_config(req: BenchRequest) -> BenchConfig:
    kwargs = dict(
        dataset=req.dataset,
        solvers=tuple(req.solvers),
        train_per_class=req.train_per_class,
        trials=req.trials,
        seed=req.seed,
        pca_energy=req.pca_energy,
        sparsity_k=req.sparsity_k,
        m_keep=req.m_keep,
    )
    if req.lambdas:
        kwargs["lambda_grid"] = parse_lambda_grid(req.lambdas)
    if req.resize:
        kwargs["resize"] = parse_resize(req.resize)
    if req.solver_tolerance is not None:
        kwargs["solver_tolerance"] = req.solver_tolerance
    if req.solver_iterations is not None:
        kwargs["solver_iterations"] = req.solver_iterations
    try:
        return BenchConfig(**kwargs)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.post("/bench/run", response_model=BenchRunResponse)
def bench_run(req: BenchRequest) -> BenchRunResponse:
    config = _bench_config(req)
    try:
        result = run_benchmark(config)
    except DataError as exc:
        raise HTTPException(status_code=400, detail=f"data_error: {exc}")
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return BenchRunResponse(
        csv=result_to_csv(result),
        timing_report=timing_report(result),
        aggregates={s: [m, sd] for s, (m, sd) in result.aggregates.items()},
    )


@app.post("/bench/sweep", response_model=BenchSweepResponse)
def bench_sweep(req: BenchRequest) -> BenchSweepResponse:
    config = _bench_config(req)
    try:
        rows = sweep_lambda(config)
    except DataError as exc:
        raise HTTPException(status_code=400, detail=f"data_error: {exc}")
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return BenchSweepResponse(csv=sweep_to_csv(rows))
