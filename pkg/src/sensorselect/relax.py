"""Barrier-smoothed relaxed A-optimal selection solved by Newton's method.

Boolean sensor indicators are relaxed to weights z in (0,1)^n under the
budget 1^T z = p, with a log barrier keeping the weights interior:

    Psi(z) = tr(W(z)^{-1}) - kappa * sum_i (log z_i + log(1 - z_i)),
    W(z)   = sum_i z_i u_i u_i^T = U^T diag(z) U.

Each Newton step solves the KKT system bordered by the budget constraint and
backtracks along the step while keeping z strictly interior.  After
convergence (Newton decrement below tolerance) the p largest weights are
rounded to a sensor selection.  The O(n^3) KKT solve makes this the
faithful-but-expensive baseline.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import SensorSelection
from .errors import InvalidParameterError, SingularSystemError, StalledDescentError

_INTERIOR_MARGIN = 1e-9


def default_kappa(r, p):
    """Barrier weight scaled to the trace term: 1e-4 * (r/p)^2."""
    return 1e-4 * (r / p) ** 2


@dataclass
class RelaxationProblem:
    U: np.ndarray
    p: int
    kappa: float = None
    newton_tolerance: float = 1e-4
    max_newton_steps: int = 100
    alpha: float = 0.01
    beta: float = 0.5
    keep_history: bool = False
    history: list = field(default=None, repr=False)
    wall_time: float = field(default=0.0, repr=False)

    def __post_init__(self):
        self.U = np.ascontiguousarray(self.U, dtype=float)
        n, r = self.U.shape
        if not (0 < self.p < n):
            raise InvalidParameterError("need 0 < p < n")
        if self.kappa is None:
            self.kappa = default_kappa(r, self.p)
        # kappa = 0 is allowed for evaluating the bare trace objective;
        # newton_solve itself needs the barrier and rejects it.
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be nonnegative")
        if not (0 < self.alpha < 0.5) or not (0 < self.beta < 1):
            raise InvalidParameterError("line-search parameters out of range")


def _weighted_fim(z, U):
    return U.T @ (z[:, None] * U)


def _check_interior(z):
    if np.any(z <= 0.0) or np.any(z >= 1.0):
        raise InvalidParameterError("weights must be strictly inside (0, 1)")


def objective(z, problem):
    """tr(W^{-1}) minus the scaled log barrier."""
    z = np.asarray(z, dtype=float)
    _check_interior(z)
    W = _weighted_fim(z, problem.U)
    vals = np.linalg.eigvalsh(W)
    if vals[0] <= 0.0:
        raise SingularSystemError("weighted FIM singular", condition=np.inf)
    barrier = np.sum(np.log(z) + np.log1p(-z))
    return float(np.sum(1.0 / vals) - problem.kappa * barrier)


def gradient(z, problem):
    """Entry i: -u_i^T W^{-2} u_i - kappa (1/z_i - 1/(1 - z_i))."""
    z = np.asarray(z, dtype=float)
    _check_interior(z)
    U = problem.U
    W = _weighted_fim(z, U)
    try:
        Wi = np.linalg.inv(W)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("weighted FIM singular", condition=np.inf) from exc
    P = U @ Wi  # row i = u_i^T W^{-1}
    trace_part = -np.einsum("ij,ij->i", P, P)
    barrier_part = -problem.kappa * (1.0 / z - 1.0 / (1.0 - z))
    return trace_part + barrier_part


def hessian(z, problem, out=None, block=4096):
    """2 (U W^{-2} U^T) ∘ (U W^{-1} U^T) plus the barrier diagonal.

    Assembled in row blocks so the only O(n^2) allocation is the output
    (which may be passed in, including as a view into a larger buffer).
    """
    z = np.asarray(z, dtype=float)
    _check_interior(z)
    U = problem.U
    W = _weighted_fim(z, U)
    try:
        Wi = np.linalg.inv(W)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("weighted FIM singular", condition=np.inf) from exc
    P = U @ Wi
    n = U.shape[0]
    if out is None:
        out = np.empty((n, n))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        out[lo:hi] = (P[lo:hi] @ U.T) * (P[lo:hi] @ P.T)
    out *= 2.0
    diag = problem.kappa * (1.0 / z**2 + 1.0 / (1.0 - z) ** 2)
    out[np.diag_indices(n)] += diag
    return out


def newton_solve(problem):
    """Equality-constrained Newton from the uniform feasible start z = p/n.

    Returns (z, step_count).  Stops when the Newton decrement lambda^2/2
    falls below newton_tolerance.  History records (step, objective,
    decrement, step length) when requested.
    """
    t0 = time.perf_counter()
    if problem.kappa == 0:
        raise InvalidParameterError("newton_solve needs a positive barrier weight")
    U = problem.U
    n = U.shape[0]
    z = np.full(n, problem.p / n)
    history = [] if problem.keep_history else None

    hbuf = np.empty((n, n), order="F")
    rhs = np.empty((n, 2), order="F")
    steps = 0
    for steps in range(problem.max_newton_steps + 1):
        g = gradient(z, problem)
        hessian(z, problem, out=hbuf)
        # Equality-constrained Newton step by block elimination of the KKT
        # system: dz = -H^{-1}(g + nu 1) with nu making 1^T dz = 0.  The
        # barrier diagonal makes H positive definite, so Cholesky applies.
        rhs[:, 0] = g
        rhs[:, 1] = 1.0
        try:
            factor = cho_factor(hbuf, lower=True, overwrite_a=True)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("Hessian not positive definite") from exc
        sol = cho_solve(factor, rhs)
        nu = -sol[:, 0].sum() / sol[:, 1].sum()
        dz = -(sol[:, 0] + nu * sol[:, 1])
        decrement = -0.5 * float(g @ dz)
        if history is not None:
            history.append((steps, objective(z, problem), decrement, 0.0))
        if decrement < problem.newton_tolerance:
            break
        if steps == problem.max_newton_steps:
            break

        # Fraction-to-the-boundary cap keeps z inside [margin, 1 - margin].
        t = 1.0
        neg = dz < 0
        pos = dz > 0
        if np.any(neg):
            t = min(t, np.min((z[neg] - _INTERIOR_MARGIN) / -dz[neg]))
        if np.any(pos):
            t = min(t, np.min((1.0 - _INTERIOR_MARGIN - z[pos]) / dz[pos]))

        f0 = objective(z, problem)
        slope = float(g @ dz)
        while t > 1e-14:
            z_try = z + t * dz
            try:
                f_try = objective(z_try, problem)
            except (SingularSystemError, InvalidParameterError):
                t *= problem.beta
                continue
            if f_try <= f0 + problem.alpha * t * slope:
                break
            t *= problem.beta
        else:
            raise StalledDescentError(
                "line search found no interior descent step",
                step=steps, decrement=decrement,
            )
        z = z + t * dz
        if history is not None:
            history[-1] = (steps, f0, decrement, t)

    problem.history = history
    problem.wall_time = time.perf_counter() - t0
    return z, steps


def round_to_selection(z, p):
    """Indices of the p largest weights, ties resolved to the lowest index."""
    z = np.asarray(z, dtype=float)
    if p < 1 or p > z.size:
        raise InvalidParameterError("p=%d outside [1, %d]" % (p, z.size))
    order = np.argsort(-z, kind="stable")
    return SensorSelection(tuple(int(i) for i in order[:p]))


def relax_select(U, p, kappa=None, **kwargs):
    """Convenience wrapper: Newton solve then round to p sensors."""
    problem = RelaxationProblem(U=U, p=p, kappa=kappa, **kwargs)
    z, steps = newton_solve(problem)
    return round_to_selection(z, p), z, steps
