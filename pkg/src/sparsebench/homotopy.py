"""Homotopy path-following solvers for the l1 problems.

The LASSO homotopy walks the piecewise-linear solution path from
lambda = ||X^T y||_inf down to a target (or to numerical zero for the
interpolating problem), changing exactly one support element per
breakpoint. The BPDN variant steps lambda on a fixed grid and re-solves the
closed form on the active support. The reweighted variant morphs the l1
weights along a secondary homotopy parameter.

On-support Gram systems are re-factorized at every breakpoint; rank-one
updating would be faster but correctness wins at desk scale.
"""

from dataclasses import dataclass

import numpy as np

from .problem import (
    ConstraintMismatchError,
    Interpolating,
    Lagrangian,
    SolverConfig,
    SparseProblem,
    SparseSolution,
    solution_from_alpha,
)

_RIDGE = 1e-10


@dataclass(frozen=True)
class HomotopyPathPoint:
    lambda_value: float
    alpha: np.ndarray
    support: tuple
    signs: tuple
    event: str  # "add", "remove" or "terminal"
    index: int  # atom involved in the event; -1 for terminal


def path_to_csv(path) -> str:
    """One line per breakpoint: lambda,event,index,nnz."""
    lines = ["lambda,event,index,nnz"]
    for pt in path:
        lines.append(f"{pt.lambda_value!r},{pt.event},{pt.index},{len(pt.support)}")
    return "\n".join(lines) + "\n"


def path_solutions_at(path, lambdas, n):
    """Solutions at arbitrary lambdas read off a recorded path.

    The path is piecewise linear in lambda, so values between breakpoints
    interpolate exactly; above the first breakpoint the solution is zero and
    below the last recorded point the terminal solution is reused. One path
    walk therefore serves a whole regularization grid.
    """
    out = {}
    lams = [pt.lambda_value for pt in path]
    for lam in lambdas:
        lam = float(lam)
        if not path or lam >= lams[0]:
            out[lam] = np.zeros(n)
        elif lam <= lams[-1]:
            out[lam] = path[-1].alpha.copy()
        else:
            k = int(np.searchsorted(-np.asarray(lams), -lam)) - 1
            span = lams[k] - lams[k + 1]
            t = (lams[k] - lam) / span if span > 0 else 0.0
            out[lam] = (1.0 - t) * path[k].alpha + t * path[k + 1].alpha
    return out


def _solve_on_support(x, support, rhs, flags):
    sub = x[:, support]
    gram = sub.T @ sub
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        flags.append("gram_ridge")
        return np.linalg.solve(gram + _RIDGE * np.eye(len(support)), rhs)


def _positive_min(candidates, indices):
    """Smallest strictly positive candidate and the index it belongs to."""
    best = np.inf
    best_i = -1
    for c, i in zip(candidates, indices):
        if 1e-14 < c < best:
            best = c
            best_i = i
    return best, best_i


def lasso_homotopy(problem: SparseProblem, config: SolverConfig = SolverConfig()):
    """Trace the LASSO path; returns (solution, list of path points).

    Accepts Lagrangian (stop at the target lambda) or Interpolating (walk
    until the residual correlations fall below tolerance * lambda_0). At
    every breakpoint the on-support coefficients are re-anchored through the
    closed form so the optimality conditions hold to machine precision.
    """
    c = problem.constraint
    if isinstance(c, Lagrangian):
        lam_target = c.lam
    elif isinstance(c, Interpolating):
        lam_target = 0.0
    else:
        raise ConstraintMismatchError("lasso_homotopy needs Lagrangian or Interpolating")
    x, y = problem.x, problem.y
    n = x.shape[1]
    flags: list[str] = []
    path: list[HomotopyPathPoint] = []
    corr0 = x.T @ y
    lam0 = float(np.max(np.abs(corr0))) if n else 0.0
    lam_floor = config.tolerance * lam0
    lam_stop = max(lam_target, lam_floor)
    if lam0 == 0.0 or lam0 <= lam_stop:
        return (solution_from_alpha(problem, np.zeros(n), iterations=0, converged=True),
                path)

    j0 = int(np.argmax(np.abs(corr0)))
    support = [j0]
    signs = [float(np.sign(corr0[j0]))]
    alpha = np.zeros(n)
    lam = lam0
    path.append(HomotopyPathPoint(lam0, alpha.copy(), (j0,), tuple(signs), "add", j0))
    budget = config.override("breakpoint_budget", 4 * n)
    converged = False
    for _bp in range(budget):
        u = np.asarray(signs)
        delta_s = _solve_on_support(x, support, u, flags)
        # re-anchor the on-support coefficients at the current lambda
        xty_s = x[:, support].T @ y
        alpha_s = _solve_on_support(x, support, xty_s - lam * u, flags)
        alpha = np.zeros(n)
        alpha[support] = alpha_s

        p = x.T @ (y - x @ alpha)
        q = x.T @ (x[:, support] @ delta_s)
        off = np.setdiff1d(np.arange(n), support, assume_unique=False)
        plus_c, plus_i = [], []
        for i in off:
            plus_c.extend(((lam - p[i]) / (1.0 - q[i]) if q[i] != 1.0 else np.inf,
                           (lam + p[i]) / (1.0 + q[i]) if q[i] != -1.0 else np.inf))
            plus_i.extend((i, i))
        tau_plus, i_plus = _positive_min(plus_c, plus_i)
        minus_c = [-alpha[j] / d if d != 0 else np.inf for j, d in zip(support, delta_s)]
        tau_minus, i_minus = _positive_min(minus_c, support)

        tau_star = min(tau_plus, tau_minus)
        tau_to_target = lam - lam_stop
        if tau_to_target <= tau_star:
            alpha[support] = alpha_s + tau_to_target * delta_s
            lam = lam_stop
            path.append(HomotopyPathPoint(lam, alpha.copy(), tuple(support),
                                          tuple(signs), "terminal", -1))
            converged = True
            break
        alpha[support] = alpha_s + tau_star * delta_s
        lam -= tau_star
        if tau_minus <= tau_plus:  # simultaneous hit: removal wins
            alpha[i_minus] = 0.0
            k = support.index(i_minus)
            support.pop(k)
            signs.pop(k)
            event, idx = "remove", i_minus
            if not support:
                # path re-enters: the largest residual correlation sits at lam
                p = x.T @ (y - x @ alpha)
                j = int(np.argmax(np.abs(p)))
                support = [j]
                signs = [float(np.sign(p[j]))]
        else:
            p_new = p[i_plus] - tau_star * q[i_plus]
            support.append(i_plus)
            signs.append(float(np.sign(p_new)))
            event, idx = "add", i_plus
        path.append(HomotopyPathPoint(lam, alpha.copy(), tuple(support),
                                      tuple(signs), event, idx))
        if lam <= lam_stop:
            converged = True
            break
    sol = solution_from_alpha(problem, alpha, objective_trace=[pt.lambda_value for pt in path],
                              iterations=len(path), converged=converged, flags=flags)
    return sol, path


def bpdn_homotopy(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Fixed-decrement homotopy on lambda with closed-form support solves."""
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError("bpdn_homotopy needs a Lagrangian constraint")
    x, y = problem.x, problem.y
    n = x.shape[1]
    lam_target = problem.constraint.lam
    flags: list[str] = []
    corr0 = x.T @ y
    lam0 = float(np.max(np.abs(corr0))) if n else 0.0
    if lam0 <= lam_target:
        return solution_from_alpha(problem, np.zeros(n), iterations=0, converged=True)
    steps = config.override("lambda_steps", 500)
    tau = (lam0 - lam_target) / steps
    support: list[int] = []
    signs: list[float] = []
    alpha = np.zeros(n)
    lam = lam0
    it = 0
    for _ in range(steps):
        lam = max(lam - tau, lam_target)
        it += 1
        # refresh support/signs until the closed form is self-consistent
        for _inner in range(2 * n + 4):
            if support:
                u = np.asarray(signs)
                xty_s = x[:, support].T @ y
                alpha_s = _solve_on_support(x, support, xty_s - lam * u, flags)
                alpha = np.zeros(n)
                alpha[support] = alpha_s
            else:
                alpha = np.zeros(n)
            corr = x.T @ (y - x @ alpha)
            flipped = [k for k, j in enumerate(support)
                       if alpha[j] * signs[k] < 0
                       or (alpha[j] == 0 and len(support) > 1)]
            if flipped:
                k = flipped[0]
                alpha[support[k]] = 0.0
                support.pop(k)
                signs.pop(k)
                continue
            off = np.setdiff1d(np.arange(n), support)
            if off.size:
                viol = np.abs(corr[off]) - lam * (1.0 + 1e-10)
                worst = int(np.argmax(viol))
                if viol[worst] > 0:
                    j = int(off[worst])
                    support.append(j)
                    signs.append(float(np.sign(corr[j])))
                    continue
            break
        if lam <= lam_target:
            break
    return solution_from_alpha(problem, alpha, iterations=it, converged=True, flags=flags)


def reweighted_homotopy(problem: SparseProblem, weights,
                        config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Iteratively reweighted l1 minimization via weight-morphing homotopy.

    The first weighted problem is solved by column-scaled LASSO homotopy;
    each subsequent round updates the weights from the current solution and
    traces the homotopy parameter from 0 (old weights) to 1 (new weights),
    changing one support element per critical point.
    """
    if not isinstance(problem.constraint, Lagrangian):
        raise ConstraintMismatchError("reweighted_homotopy needs a Lagrangian constraint")
    weights = np.asarray(weights, dtype=float)
    x, y = problem.x, problem.y
    n = x.shape[1]
    if weights.shape != (n,) or np.any(weights <= 0):
        raise ValueError("weights must be positive and match the atom count")
    lam_rw = problem.constraint.lam
    sigma_w = config.override("reweight_sigma", 1e-2)
    rounds = config.override("reweight_rounds", 4)
    flags: list[str] = []

    # round 0: solve the weighted problem by rescaling the atoms
    from .problem import Dictionary, SparseProblem as _SP

    scaled = _SP(Dictionary(x / weights), y, Lagrangian(1.0))
    base, _ = lasso_homotopy(scaled, config)
    alpha = base.alpha / weights
    w = weights.copy()
    budget = config.override("breakpoint_budget", 4 * n)
    total_it = base.iterations
    converged = base.converged

    for _round in range(rounds):
        w_hat = lam_rw / (np.abs(alpha) + sigma_w)
        amax = float(np.max(np.abs(alpha))) if n else 0.0
        support = list(np.flatnonzero(np.abs(alpha) > 1e-10 * max(amax, 1.0)))
        signs = [float(np.sign(alpha[j])) for j in support]
        sigma = 0.0
        for _bp in range(budget):
            if sigma >= 1.0:
                break
            r_vec = (1.0 - sigma) * w + sigma * w_hat
            if support:
                u = np.asarray(signs)
                rhs = (w - w_hat)[support] * u
                delta_s = _solve_on_support(x, support, rhs, flags)
                # re-anchor: X_s^T(X a - y) = -r_s u  =>  gram a_s = X_s^T y - r_s u
                xty_s = x[:, support].T @ y
                alpha_s = _solve_on_support(x, support, xty_s - r_vec[support] * u, flags)
                alpha = np.zeros(n)
                alpha[support] = alpha_s
                delta_full = x[:, support] @ delta_s
            else:
                delta_s = np.zeros(0)
                delta_full = np.zeros(x.shape[0])
            p = x.T @ (x @ alpha - y)
            q = x.T @ delta_full
            s_vec = w_hat - w
            off = np.setdiff1d(np.arange(n), support)
            plus_c, plus_i = [], []
            for i in off:
                d1 = q[i] - s_vec[i]
                d2 = q[i] + s_vec[i]
                plus_c.extend(((r_vec[i] - p[i]) / d1 if d1 != 0 else np.inf,
                               (-r_vec[i] - p[i]) / d2 if d2 != 0 else np.inf))
                plus_i.extend((i, i))
            tau_plus, i_plus = _positive_min(plus_c, plus_i)
            minus_c = [-alpha[j] / d if d != 0 else np.inf for j, d in zip(support, delta_s)]
            tau_minus, i_minus = _positive_min(minus_c, support)
            tau_star = min(tau_plus, tau_minus, 1.0 - sigma)
            if support:
                alpha[support] = alpha[support] + tau_star * delta_s
            sigma += tau_star
            total_it += 1
            if sigma >= 1.0 - 1e-15:
                sigma = 1.0
                break
            if tau_minus <= tau_plus and tau_minus == tau_star:
                alpha[i_minus] = 0.0
                k = support.index(i_minus)
                support.pop(k)
                signs.pop(k)
            elif tau_plus == tau_star:
                p_new = p[i_plus] + tau_star * q[i_plus]
                support.append(i_plus)
                signs.append(float(-np.sign(p_new)))
        else:
            converged = False
        w = w_hat
    return solution_from_alpha(problem, alpha, iterations=total_it,
                               converged=converged, flags=flags)
