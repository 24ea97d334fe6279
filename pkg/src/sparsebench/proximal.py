"""Proximity-operator solvers: ISTA, FISTA, SpaRSA, l1/2 half thresholding,
and the two augmented-Lagrangian methods (primal and dual) for the
interpolating problem.

The l1 solvers all share the shrinkage step alpha <- soft(theta(alpha), t)
with theta the gradient step on the quadratic fidelity; they differ in how
the step size is chosen (fixed, Lipschitz, Barzilai-Borwein) and whether
momentum or continuation wraps the iteration.
"""

import numpy as np
from scipy.linalg import cho_solve

from .cache import gram, squared_spectral_norm, xxt_cholesky
from .linalg import SingularSystemError, as_vector
from .problem import (
    ConstraintMismatchError,
    Interpolating,
    Lagrangian,
    SolverConfig,
    SparseProblem,
    SparseSolution,
    solution_from_alpha,
)


def soft_threshold(s, lam: float) -> np.ndarray:
    """Componentwise sign(s) * max(|s| - lam, 0), the l1 proximal operator."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.maximum(np.abs(s) - lam, 0.0)


# threshold magnitude below which the l1/2 operator returns exactly zero
_HALF_COEF = 54.0 ** (1.0 / 3.0) / 4.0


def half_threshold(x, lam: float, tau: float) -> np.ndarray:
    """Closed-form thresholding operator for the l1/2 penalty.

    Entries with |x_i| above (54^(1/3)/4)(lam*tau)^(2/3) map through the
    cosine formula; the rest go to zero. Arc-cosine arguments are clipped to
    [-1, 1] so entries sitting numerically on the threshold do not emit NaN.
    """
    if lam <= 0 or tau <= 0:
        raise ValueError("lambda and tau must be positive")
    x = as_vector(x)
    lt = lam * tau
    thresh = _HALF_COEF * lt ** (2.0 / 3.0)
    out = np.zeros_like(x)
    big = np.abs(x) > thresh
    if np.any(big):
        xb = x[big]
        arg = np.clip((lt / 8.0) * (np.abs(xb) / 3.0) ** (-1.5), -1.0, 1.0)
        phi = np.arccos(arg)
        out[big] = (2.0 / 3.0) * xb * (1.0 + np.cos(2.0 * np.pi / 3.0 - 2.0 * phi / 3.0))
    return out


def _lagrangian_data(problem: SparseProblem, who: str):
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError(f"{who} needs a Lagrangian constraint")
    x, y = problem.x, problem.y
    return x, y, problem.constraint.lam, gram(x), x.T @ y


def _quad_objective(alpha, xtx_alpha, xty, yty, lam):
    """1/2||y - X a||^2 + lam||a||_1 from cached products."""
    fid = 0.5 * (float(alpha @ xtx_alpha) - 2.0 * float(alpha @ xty) + yty)
    return fid + lam * float(np.sum(np.abs(alpha)))


def ista_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Iterative shrinkage thresholding with fixed step 1/||X||^2."""
    x, y, lam, xtx, xty = _lagrangian_data(problem, "ista_solve")
    yty = float(y @ y)
    tau = 1.0 / max(squared_spectral_norm(x), np.finfo(float).tiny)
    alpha = np.zeros(x.shape[1])
    trace = [_quad_objective(alpha, xtx @ alpha, xty, yty, lam)]
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        grad = xtx @ alpha - xty
        new = soft_threshold(alpha - tau * grad, lam * tau)
        trace.append(_quad_objective(new, xtx @ new, xty, yty, lam))
        delta = float(np.linalg.norm(new - alpha))
        alpha = new
        if delta <= config.tolerance * max(1.0, float(np.linalg.norm(alpha))):
            converged = True
            break
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)


def _fista_core(xtx, xty, yty, lam, alpha0, max_iter, tol, lipschitz):
    """Shared FISTA loop; returns (alpha, trace, iterations, converged)."""
    alpha = alpha0.copy()
    point = alpha0.copy()
    mu = 1.0
    trace = [_quad_objective(alpha, xtx @ alpha, xty, yty, lam)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = xtx @ point - xty
        new = soft_threshold(point - grad / lipschitz, lam / lipschitz)
        mu_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mu * mu))
        point = new + ((mu - 1.0) / mu_next) * (new - alpha)
        trace.append(_quad_objective(new, xtx @ new, xty, yty, lam))
        delta = float(np.linalg.norm(new - alpha))
        alpha = new
        mu = mu_next
        if delta <= tol * max(1.0, float(np.linalg.norm(alpha))):
            converged = True
            break
    return alpha, trace, it, converged


def fista_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """FISTA with momentum and the conservative constant L = 2 lambda_max(X^T X)."""
    x, y, lam, xtx, xty = _lagrangian_data(problem, "fista_solve")
    yty = float(y @ y)
    lipschitz = 2.0 * max(squared_spectral_norm(x), np.finfo(float).tiny)
    alpha, trace, it, converged = _fista_core(
        xtx, xty, yty, lam, np.zeros(x.shape[1]), config.max_iterations,
        config.tolerance, lipschitz)
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)


def sparsa_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """SpaRSA: continuation on lambda plus Barzilai-Borwein spectral steps."""
    x, y, lam, xtx, xty = _lagrangian_data(problem, "sparsa_solve")
    yty = float(y @ y)
    gamma = config.override("continuation_gamma", 0.2)
    tau_min, tau_max = 1e-30, 1e30
    tau = 1.0 / max(squared_spectral_norm(x), np.finfo(float).tiny)
    alpha = np.zeros(x.shape[1])
    trace = [_quad_objective(alpha, xtx @ alpha, xty, yty, lam)]
    total_it = 0
    converged = False
    for _stage in range(100):
        resid_corr = xty - xtx @ alpha  # X^T (y - X alpha), the warm-start residual
        lam_t = max(gamma * float(np.max(np.abs(resid_corr))) if resid_corr.size else lam, lam)
        while total_it < config.max_iterations:
            total_it += 1
            grad = xtx @ alpha - xty
            new = soft_threshold(alpha - tau * grad, lam_t * tau)
            d_alpha = new - alpha
            d_grad = xtx @ d_alpha
            denom = float(d_alpha @ d_alpha)
            if denom > 0:
                bb = float(d_alpha @ d_grad) / denom  # estimate of 1/tau
                tau = 1.0 / bb if bb > 0 else tau_max
                tau = min(max(tau, tau_min), tau_max)
            trace.append(_quad_objective(new, xtx @ new, xty, yty, lam))
            moved = float(np.linalg.norm(d_alpha))
            alpha = new
            if moved <= config.tolerance * max(1.0, float(np.linalg.norm(alpha))):
                break
        if lam_t <= lam * (1.0 + 1e-12):
            converged = total_it < config.max_iterations
            break
        if total_it >= config.max_iterations:
            break
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=total_it, converged=converged)


def half_proximal_solve(problem: SparseProblem, config: SolverConfig = SolverConfig(),
                        k: int = 1) -> SparseSolution:
    """l1/2-regularized iteration with the sparsity-pinned threshold schedule.

    The per-iteration lambda is chosen from the (k+1)-st largest magnitude of
    the gradient step so the thresholding keeps exactly the k dominant
    components; the trace records ||X a - y||^2 + lam ||a||_{1/2}^{1/2}.
    """
    if k < 1:
        raise ValueError("target sparsity k must be >= 1")
    x, y = problem.x, problem.y
    eps = config.override("half_eps", 0.01)
    tau = (1.0 - eps) / max(squared_spectral_norm(x), np.finfo(float).tiny)
    n = x.shape[1]
    alpha = np.zeros(n)
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        theta = alpha + tau * (x.T @ (y - x @ alpha))
        mags = np.sort(np.abs(theta))[::-1]
        pivot = mags[k] if k < n else 0.0
        lam_t = max((np.sqrt(96.0) / (9.0 * tau)) * pivot ** 1.5, 1e-12)
        new = half_threshold(theta, lam_t, tau)
        r = x @ new - y
        trace.append(float(r @ r) + lam_t * float(np.sum(np.sqrt(np.abs(new)))))
        delta = float(np.linalg.norm(new - alpha))
        alpha = new
        if delta <= config.tolerance * max(1.0, float(np.linalg.norm(alpha))):
            converged = True
            break
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)


def _require_interpolating(problem: SparseProblem, who: str):
    if not isinstance(problem.constraint, Interpolating):
        raise ConstraintMismatchError(f"{who} needs an Interpolating constraint")


def palm_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Primal augmented Lagrangian method for min ||a||_1 s.t. y = X a.

    Each multiplier round solves the penalized subproblem with FISTA
    (warm-started, capped at 100 inner iterations), then takes the dual
    ascent step z <- z + rho (y - X a).
    """
    _require_interpolating(problem, "palm_solve")
    x, y = problem.x, problem.y
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        return solution_from_alpha(problem, np.zeros(x.shape[1]), iterations=0, converged=True)
    rho = config.override("penalty", 10.0 * x.shape[0] / float(np.sum(np.abs(y))))
    inner_iter = config.override("inner_iterations", 100)
    inner_tol = config.override("inner_tolerance", 1e-8)
    outer_iter = config.override("outer_iterations", 60)
    xtx = gram(x)
    xty = x.T @ y
    lipschitz = 2.0 * max(squared_spectral_norm(x), np.finfo(float).tiny)
    lam_inner = 1.0 / rho
    alpha = np.zeros(x.shape[1])
    z = np.zeros(x.shape[0])
    trace = []
    converged = False
    it = 0
    for it in range(1, outer_iter + 1):
        # subproblem: min ||a||_1 + rho/2 ||(y + z/rho) - X a||^2
        shift = xty + (x.T @ z) / rho
        yty = float((y + z / rho) @ (y + z / rho))
        alpha, _, _, _ = _fista_core(xtx, shift, yty, lam_inner, alpha,
                                     inner_iter, inner_tol, lipschitz)
        gap = y - x @ alpha
        z = z + rho * gap
        trace.append(float(np.sum(np.abs(alpha))))
        if float(np.linalg.norm(gap)) <= config.tolerance * ynorm:
            converged = True
            break
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)


def dalm_solve(problem: SparseProblem, config: SolverConfig = SolverConfig(),
               on_iterate=None) -> SparseSolution:
    """Dual augmented Lagrangian method for min ||a||_1 s.t. y = X a.

    Works on the dual max y^T lam s.t. ||X^T lam||_inf <= 1; the primal
    coefficients are read off the multiplier of the dual constraint. Needs
    X X^T invertible. on_iterate, when given, receives each projected z.
    """
    _require_interpolating(problem, "dalm_solve")
    x, y = problem.x, problem.y
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        return solution_from_alpha(problem, np.zeros(x.shape[1]), iterations=0, converged=True)
    eps = config.override("dalm_eps", 0.01)
    tau = (1.0 - eps) / max(squared_spectral_norm(x), np.finfo(float).tiny)
    try:
        chol = xxt_cholesky(x)
    except np.linalg.LinAlgError:
        raise SingularSystemError("X X^T is singular; DALM needs full row rank")
    mu = np.zeros(x.shape[1])
    lam_dual = np.zeros(x.shape[0])
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        u = x.T @ lam_dual + mu / tau
        z = np.sign(u) * np.minimum(np.abs(u), 1.0)  # project onto the linf ball
        if on_iterate is not None:
            on_iterate(z)
        lam_dual = cho_solve((chol, True), x @ z + (y - x @ mu) / tau)
        xt_lam = x.T @ lam_dual
        mu = mu - tau * (z - xt_lam)
        trace.append(float(np.sum(np.abs(mu))))
        primal_gap = float(np.linalg.norm(y - x @ mu))
        dual_gap = float(np.linalg.norm(z - xt_lam))
        if primal_gap <= config.tolerance * ynorm and dual_gap <= config.tolerance * max(1.0, float(np.linalg.norm(z))):
            converged = True
            break
    return solution_from_alpha(problem, mu, objective_trace=trace,
                               iterations=it, converged=converged)
