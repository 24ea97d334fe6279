"""Constrained-optimization solvers for the penalized l1 problem: gradient
projection on the positive/negative split (GPSR), a truncated-Newton
interior-point method, and the inexact alternating direction method.
"""

import numpy as np

from .cache import gram, squared_spectral_norm
from .problem import (
    ConstraintMismatchError,
    Lagrangian,
    SolverConfig,
    SparseProblem,
    SparseSolution,
    solution_from_alpha,
)
from .proximal import soft_threshold


def _lagrangian_data(problem: SparseProblem, who: str):
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError(f"{who} needs a Lagrangian constraint")
    x, y = problem.x, problem.y
    return x, y, problem.constraint.lam, gram(x), x.T @ y


def gpsr_solve(problem: SparseProblem, config: SolverConfig = SolverConfig(),
               on_iterate=None) -> SparseSolution:
    """Gradient projection over z = [a+; a-] >= 0 with backtracked exact steps.

    The step size starts from the closed-form minimizer along the projected
    gradient, is clamped into [sigma_min, sigma_max], then backtracked until
    the sufficient-decrease condition holds. Iterates stay exactly
    nonnegative because every update passes through the (.)_+ projection.
    on_iterate, when given, receives the stacked z after every update.
    """
    x, y, lam, xtx, xty = _lagrangian_data(problem, "gpsr_solve")
    beta = config.override("sufficient_decrease", 0.1)
    gamma = config.override("backtrack_factor", 0.5)
    sigma_min, sigma_max = 1e-30, 1e30
    n = x.shape[1]
    yty = float(y @ y)

    def objective(zp, zm):
        v = zp - zm
        w = xtx @ v
        return (lam * float(np.sum(zp) + np.sum(zm)) - float(xty @ v)
                + 0.5 * float(v @ w) + 0.5 * yty), w

    zp = np.zeros(n)
    zm = np.zeros(n)
    obj, w = objective(zp, zm)
    trace = [obj]
    converged = False
    it = 0
    scale = max(1.0, float(np.max(np.abs(xty))) if n else 1.0)
    for it in range(1, config.max_iterations + 1):
        grad_p = lam - xty + w
        grad_m = lam + xty - w
        # projected-gradient optimality residual for the z >= 0 QP
        kkt = max(
            float(np.max(np.abs(np.minimum(grad_p, zp)))) if n else 0.0,
            float(np.max(np.abs(np.minimum(grad_m, zm)))) if n else 0.0,
        )
        if kkt <= config.tolerance * scale:
            converged = True
            break
        gp = np.where((zp > 0) | (grad_p < 0), grad_p, 0.0)
        gm = np.where((zm > 0) | (grad_m < 0), grad_m, 0.0)
        gv = gp - gm
        curv = float(gv @ (xtx @ gv))
        gg = float(gp @ gp + gm @ gm)
        sigma = gg / curv if curv > 0 else sigma_max
        sigma = min(max(sigma, sigma_min), sigma_max)
        while True:
            np_new = np.maximum(zp - sigma * grad_p, 0.0)
            nm_new = np.maximum(zm - sigma * grad_m, 0.0)
            new_obj, new_w = objective(np_new, nm_new)
            decrease = float(grad_p @ (zp - np_new) + grad_m @ (zm - nm_new))
            if new_obj <= obj - beta * decrease or sigma <= sigma_min:
                break
            sigma *= gamma
        zp, zm, obj, w = np_new, nm_new, new_obj, new_w
        trace.append(obj)
        if on_iterate is not None:
            on_iterate(np.concatenate([zp, zm]))
    return solution_from_alpha(problem, zp - zm, objective_trace=trace,
                               iterations=it, converged=converged)


def _pcg(matvec, b, precond_diag, tol, max_iter):
    """Diagonally preconditioned conjugate gradients; returns (x, ok)."""
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, True
    z = r / precond_diag
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        ap = matvec(p)
        pap = float(p @ ap)
        if pap <= 0 or not np.isfinite(pap):
            return x, False
        step = rz / pap
        x = x + step * p
        r = r - step * ap
        if float(np.linalg.norm(r)) <= tol * bnorm:
            return x, True
        z = r / precond_diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, True


def tnipm_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Truncated-Newton interior-point method (the l1_ls scheme).

    Minimizes the log-barrier surrogate of the bound formulation
    -sig <= a <= sig, taking Newton steps whose reduced system is solved by
    preconditioned conjugate gradients. The run terminates when the duality
    gap, measured with the scaled-residual dual feasible point, drops below
    config.tolerance relative to the dual value.
    """
    x, y, lam, xtx, xty = _lagrangian_data(problem, "tnipm_solve")
    n = x.shape[1]
    rho = config.override("armijo", 0.01)
    cg_max = config.override("cg_iterations", 200)
    v = 1.0 / lam
    v_max = config.override("barrier_max", 1e18)
    alpha = np.zeros(n)
    sig = np.ones(n)
    xtx_diag = np.diag(xtx)
    flags = []
    gap_trace = []
    converged = False
    it = 0

    def barrier_value(a, s, va):
        ra = y - x @ a
        plus, minus = s + a, s - a
        if np.any(plus <= 0) or np.any(minus <= 0):
            return np.inf
        return (0.5 * va * float(ra @ ra) + va * lam * float(np.sum(s))
                - float(np.sum(np.log(plus)) + np.sum(np.log(minus))))

    best_dual = -np.inf
    for it in range(1, config.max_iterations + 1):
        plus, minus = sig + alpha, sig - alpha
        inv_p, inv_m = 1.0 / plus, 1.0 / minus
        g_alpha = v * (xtx @ alpha - xty) - (inv_p - inv_m)
        g_sigma = v * lam * np.ones(n) - (inv_p + inv_m)
        a2, b2 = inv_p**2, inv_m**2
        d1 = a2 + b2
        d2 = a2 - b2
        schur = d1 - d2 * d2 / d1  # = 4 a2 b2 / (a2 + b2)

        # duality gap via the scaled-residual dual point
        resid = y - x @ alpha
        corr = xtx @ alpha - xty
        corr_max = float(np.max(np.abs(corr))) if n else 0.0
        s_scale = min(1.0, lam / corr_max) if corr_max > 0 else 1.0
        u = s_scale * resid
        dual = float(u @ y) - 0.5 * float(u @ u)
        best_dual = max(best_dual, dual)
        primal = 0.5 * float(resid @ resid) + lam * float(np.sum(np.abs(alpha)))
        gap = primal - best_dual
        gap_trace.append(gap)
        if gap <= config.tolerance * max(abs(best_dual), 1e-12):
            converged = True
            break

        grad_norm = float(np.sqrt(g_alpha @ g_alpha + g_sigma @ g_sigma))
        cg_tol = min(0.1, 0.5 * gap / max(grad_norm, 1e-300))
        rhs = -g_alpha + (d2 / d1) * g_sigma
        matvec = lambda p: v * (xtx @ p) + schur * p
        d_alpha, ok = _pcg(matvec, rhs, v * xtx_diag + schur, max(cg_tol, 1e-14), cg_max)
        if not ok or float(d_alpha @ (-rhs)) > 0:
            # CG breakdown: fall back to the (preconditioned) steepest descent
            flags.append("cg_fallback")
            d_alpha = rhs / (v * xtx_diag + schur)
        d_sigma = (-g_sigma - d2 * d_alpha) / d1

        gd = float(g_alpha @ d_alpha + g_sigma @ d_sigma)
        base = barrier_value(alpha, sig, v)
        eta = 1.0
        for _ in range(60):
            if barrier_value(alpha + eta * d_alpha, sig + eta * d_sigma, v) <= base + rho * eta * gd:
                break
            eta *= 0.5
        alpha = alpha + eta * d_alpha
        sig = sig + eta * d_sigma
        v = min(2.0 * v, v_max)
    return solution_from_alpha(problem, alpha, objective_trace=gap_trace,
                               iterations=it, converged=converged, flags=flags)


def adm_solve(problem: SparseProblem, config: SolverConfig = SolverConfig(),
              on_iterate=None) -> SparseSolution:
    """Inexact alternating direction method on the split s = y - X a.

    The fidelity weight of the split formulation equals the Lagrangian
    lambda, the s-update is closed form, the a-update is one linearized
    shrinkage step, and the penalty grows geometrically each sweep up to a
    ceiling (unbounded growth shrinks the shrinkage steps faster than the
    multiplier converges and the iteration stalls short of optimality).
    on_iterate, when given, receives ||s + X a - y|| after every sweep.
    """
    x, y, lam, xtx, xty = _lagrangian_data(problem, "adm_solve")
    tau_fid = lam
    rho_grow = config.override("penalty_growth", 1.01)
    step = 1.0 / max(squared_spectral_norm(x), np.finfo(float).tiny)  # proximal parameter
    mu = config.override("mu0", max(x.shape[0] / max(float(np.sum(np.abs(y))), 1e-12), 1e-6))
    mu_max = config.override("mu_max", 5.0 * mu)
    ynorm = float(np.linalg.norm(y))
    n = x.shape[1]
    alpha = np.zeros(n)
    s = np.zeros(x.shape[0])
    mult = np.zeros(x.shape[0])
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        s = (tau_fid / (1.0 + mu * tau_fid)) * (mult + mu * (y - x @ alpha))
        drift = s + x @ alpha - y
        new = soft_threshold(alpha - step * (x.T @ (drift - mult / mu)), step / mu)
        mult = mult - mu * (s + x @ new - y)
        r = x @ new - y
        trace.append(0.5 * float(r @ r) + tau_fid * float(np.sum(np.abs(new))))
        feas = float(np.linalg.norm(s + x @ new - y))
        moved = float(np.linalg.norm(new - alpha))
        alpha = new
        mu = min(mu * rho_grow, mu_max)
        if on_iterate is not None:
            on_iterate(feas)
        if feas <= config.tolerance * max(ynorm, 1e-12) and moved <= config.tolerance * max(1.0, float(np.linalg.norm(alpha))):
            converged = True
            break
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)
