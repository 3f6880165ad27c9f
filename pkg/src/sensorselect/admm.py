"""ADMM solver for tr(X^T X) + group-sparsity penalty subject to A X = I.

The working variable X is the transposed decoder gain (X = K^T, n x r), and
A = U^T.  The constraint stack is G = [I; A], split variables Z = [Z1; Z2]
and multipliers Y = [Y1; Y2].  Each iteration:

    X   <- {(2 + 1/g) I + (1/g) A^T A}^{-1} (1/g) {(Z1 - Y1) + A^T (Z2 - Y2)}
    Z1  <- prox applied to the row groups of (X + Y1); Z2 <- I
    Y1  <- Y1 + X - Z1;  Y2 <- Y2 + A X - Z2

The X-update inverse is never formed at size n: the matrix inversion lemma
reduces it to one r x r factorization, refreshed only when the step size g
changes.  After the loop a polishing step keeps only the support of X (rows
with norm above a small floor) and refits the decoder by least squares.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import prox
from .core import SensorSelection, a_optimality, select_rows
from .errors import (
    EmptySelectionError,
    InvalidParameterError,
    SolverBreakdownError,
)


@dataclass(frozen=True)
class SparsityPenalty:
    """Penalty choice for the solver: bst/bht carry the weight lam, l0bht
    carries the target sensor count p.  The prox threshold is gamma * lam."""

    kind: str
    lam: float = None
    p: int = None

    def __post_init__(self):
        if self.kind not in prox.KINDS:
            raise InvalidParameterError("unknown penalty kind %r" % (self.kind,))
        if self.kind in (prox.BST, prox.BHT):
            if self.lam is None or self.lam < 0:
                raise InvalidParameterError("%s requires lam >= 0" % self.kind)
        else:
            if self.p is None or self.p < 1:
                raise InvalidParameterError("l0bht requires p >= 1")

    def spec(self, gamma):
        """Effective ThresholdSpec at the current step size (None = identity)."""
        if self.kind == prox.L0BHT:
            return prox.ThresholdSpec(prox.L0BHT, p=self.p)
        if self.lam == 0.0:
            return None
        return prox.ThresholdSpec(self.kind, gamma_lambda=gamma * self.lam)


@dataclass
class AdmmProblem:
    """Problem data plus solver controls.  A = U^T must have full row rank."""

    A: np.ndarray
    penalty: SparsityPenalty
    gamma: float = 0.4
    gamma_decay_factor: float = 0.99
    gamma_decay_interval: int = 200
    max_iterations: int = 10000
    tolerance: float = 1e-6
    norm_floor: float = 1e-4
    stall_window: int = 200
    stall_rtol: float = 1e-10
    keep_history: bool = False

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=float)
        if self.gamma <= 0:
            raise InvalidParameterError("gamma must be positive")
        if not (0 < self.gamma_decay_factor <= 1):
            raise InvalidParameterError("gamma decay factor must be in (0, 1]")
        if self.max_iterations < 1 or self.gamma_decay_interval < 1:
            raise InvalidParameterError("iteration counts must be positive")
        if self.tolerance <= 0 or self.norm_floor <= 0:
            raise InvalidParameterError("tolerance and norm_floor must be positive")

    @property
    def decays(self):
        # The nonconvex penalties get the shrinking-gamma schedule; BST does not.
        return self.penalty.kind in (prox.BHT, prox.L0BHT)


@dataclass
class AdmmState:
    """One iterate bundle; Z1/Y1 pair with the identity block, Z2/Y2 with A."""

    X: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    gamma_current: float
    iteration: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf


@dataclass
class SolveReport:
    selection: SensorSelection
    raw_gain: np.ndarray  # K = X^T, r x n, pre-polish
    polished: bool
    iterations_used: int
    converged: bool
    objective_trace: float
    history: list = None
    wall_time: float = 0.0


def _inner_factor(A, gamma):
    """Cholesky factor of the r x r lemma matrix I + A A^T / (gamma c)."""
    r = A.shape[0]
    c = 2.0 + 1.0 / gamma
    S = np.eye(r) + (A @ A.T) / (gamma * c)
    try:
        return cho_factor(S, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - S is I + PSD
        raise SolverBreakdownError(
            "inner r x r system singular", gamma=gamma
        ) from exc


def _x_update(A, gamma, factor, Z1, Y1, Z2, Y2):
    c = 2.0 + 1.0 / gamma
    R = (Z1 - Y1) + A.T @ (Z2 - Y2)
    # X = (1/g) M^{-1} R with M^{-1} = I/c - A^T S^{-1} A / (g c^2)
    T = cho_solve(factor, A @ R)
    return R / (gamma * c) - A.T @ T / (gamma * gamma * c * c)


def x_update(state, problem):
    """Closed-form X minimizer via the inversion-lemma path (r x r solve)."""
    factor = _inner_factor(problem.A, state.gamma_current)
    try:
        return _x_update(
            problem.A, state.gamma_current, factor,
            state.Z1, state.Y1, state.Z2, state.Y2,
        )
    except np.linalg.LinAlgError as exc:
        raise SolverBreakdownError(
            "x-update solve failed",
            gamma=state.gamma_current,
            iteration=state.iteration,
        ) from exc


def z_update(state, problem):
    """Prox on the sensor row-groups of X + Y1; constraint block snaps to I.

    The paper's penalty acts on columns of K, which after transposition are
    rows of X, so the column-block operators run on the transposed iterate.
    """
    V = state.X + state.Y1
    spec = problem.penalty.spec(state.gamma_current)
    Z1 = V if spec is None else prox.apply_threshold(V.T, spec).T
    Z2 = np.eye(problem.A.shape[0])
    return Z1, Z2


def y_update(state, problem):
    """Dual ascent: Y += G X - Z."""
    Y1 = state.Y1 + (state.X - state.Z1)
    Y2 = state.Y2 + (problem.A @ state.X - state.Z2)
    return Y1, Y2


def initial_state(problem):
    """Feasible minimum-norm start: X0 = A^T (A A^T)^{-1}, Z0 = G X0, Y0 = 0."""
    A = problem.A
    r, n = A.shape
    try:
        gram = cho_factor(A @ A.T, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverBreakdownError("A A^T singular: A lacks full row rank") from exc
    X0 = cho_solve(gram, A).T
    return AdmmState(
        X=X0,
        Z1=X0.copy(),
        Z2=A @ X0,
        Y1=np.zeros((n, r)),
        Y2=np.zeros((r, r)),
        gamma_current=problem.gamma,
    )


def polish(raw_X, U, norm_floor=1e-4):
    """Keep rows of X with L2 norm above the floor; refit C from U.

    Returns the selection and the refitted measurement matrix.  The raw gain
    values are discarded; downstream estimation always uses the least-squares
    refit on the selected rows.
    """
    raw_X = np.asarray(raw_X, dtype=float)
    norms = np.sqrt(np.einsum("ij,ij->i", raw_X, raw_X))
    idx = np.flatnonzero(norms > norm_floor)
    if idx.size == 0:
        raise EmptySelectionError("no row of the gain exceeded the norm floor")
    selection = SensorSelection(tuple(int(i) for i in idx))
    return selection, select_rows(U, selection)


def solve(problem, U):
    """Run ADMM to (approximate) convergence, then polish.

    Stops when both the primal residual ||G X - Z||_F and the gamma-scaled
    dual residual fall below tolerance, when the combined residual stalls
    (nonconvex penalties need not converge for every gamma), or at the
    iteration cap.  The converged flag reflects the tolerance test only.
    """
    t0 = time.perf_counter()
    A = problem.A
    r, n = A.shape
    if U.shape != (n, r):
        raise InvalidParameterError("U must be the transpose of problem.A in shape")

    state = initial_state(problem)
    gamma = problem.gamma
    factor = _inner_factor(A, gamma)
    I_r = np.eye(r)
    penalty = problem.penalty
    spec = penalty.spec(gamma)

    history = [] if problem.keep_history else None
    res_log = []
    converged = False
    Z1, Z2, Y1, Y2 = state.Z1, state.Z2, state.Y1, state.Y2
    X = state.X
    it = 0
    for it in range(1, problem.max_iterations + 1):
        # gamma decay schedule (nonconvex penalties only)
        if problem.decays and it > 1 and (it - 1) % problem.gamma_decay_interval == 0:
            gamma *= problem.gamma_decay_factor
            factor = _inner_factor(A, gamma)
            spec = penalty.spec(gamma)

        try:
            X = _x_update(A, gamma, factor, Z1, Y1, Z2, Y2)
        except np.linalg.LinAlgError as exc:
            raise SolverBreakdownError(
                "x-update solve failed", gamma=gamma, iteration=it
            ) from exc

        V = X + Y1
        Z1_new = V if spec is None else prox.apply_threshold(V.T, spec).T
        Z2_new = I_r

        AX = A @ X
        R1 = X - Z1_new
        R2 = AX - Z2_new
        Y1 = Y1 + R1
        Y2 = Y2 + R2

        primal = np.sqrt(np.sum(R1 * R1) + np.sum(R2 * R2))
        dZ = Z1_new - Z1
        dual = np.sqrt(np.sum(dZ * dZ) + np.sum((Z2_new - Z2) ** 2)) / gamma
        Z1, Z2 = Z1_new, Z2_new

        if history is not None:
            nnz = int(np.count_nonzero(np.einsum("ij,ij->i", X, X) > 0))
            obj = float(np.sum(X * X))
            history.append((it, obj, primal, dual, nnz))

        if primal <= problem.tolerance and dual <= problem.tolerance:
            converged = True
            break

        combined = primal + dual
        res_log.append(combined)
        if len(res_log) > problem.stall_window:
            old = res_log[-problem.stall_window - 1]
            if old > 0 and abs(old - combined) <= problem.stall_rtol * old:
                break

    state.X, state.Z1, state.Z2, state.Y1, state.Y2 = X, Z1, Z2, Y1, Y2
    state.gamma_current = gamma
    state.iteration = it

    # Support is read off the thresholded split variable: it equals X at
    # convergence and stays group-sparse even when the nonconvex penalties
    # fail to converge (where X itself never has exactly-zero rows).
    selection, C = polish(Z1, U, problem.norm_floor)
    return SolveReport(
        selection=selection,
        raw_gain=X.T.copy(),
        polished=True,
        iterations_used=it,
        converged=converged,
        objective_trace=a_optimality(C),
        history=history,
        wall_time=time.perf_counter() - t0,
    )


def lambda_sweep(U, kind, lambdas, **problem_kwargs):
    """One solve per lambda for the lam-parameterized penalties.

    Returns a list of dicts with the lambda, post-polish sensor count (0 on
    empty selection), the polished trace, and any error message; per-lambda
    failures do not abort the sweep.
    """
    if kind not in (prox.BST, prox.BHT):
        raise InvalidParameterError("lambda sweep needs a bst or bht penalty")
    U = np.asarray(U, dtype=float)
    A = np.ascontiguousarray(U.T)
    out = []
    for lam in lambdas:
        rec = {"lam": float(lam), "p_selected": 0, "trace": np.inf, "error": None}
        try:
            problem = AdmmProblem(
                A=A, penalty=SparsityPenalty(kind, lam=float(lam)), **problem_kwargs
            )
            report = solve(problem, U)
            rec["p_selected"] = report.selection.p
            rec["trace"] = report.objective_trace
            rec["converged"] = report.converged
        except EmptySelectionError:
            rec["error"] = "empty-selection"
        except SolverBreakdownError as exc:
            rec["error"] = "breakdown: %s" % exc
        out.append(rec)
    return out


def solve_for_target_count(U, kind, p_target, lam_lo=1e-7, lam_hi=10.0,
                           max_bisect=18, count_tolerance=0, **problem_kwargs):
    """Bisection on log(lambda) to hit a target post-polish sensor count.

    For bst/bht the count cannot be fixed beforehand, so benchmark code
    searches the sparsity weight.  Returns (report, lam) for the evaluated
    lambda whose count lands within count_tolerance of the target (exact
    match preferred, then smallest deviation); raises EmptySelectionError
    when no evaluated lambda gets that close, which is the expected outcome
    for the soft penalty at small targets.
    """
    if kind not in (prox.BST, prox.BHT):
        raise InvalidParameterError("count targeting needs a bst or bht penalty")
    U = np.asarray(U, dtype=float)
    A = np.ascontiguousarray(U.T)

    evaluated = {}

    def run(lam):
        if lam in evaluated:
            return evaluated[lam]
        problem = AdmmProblem(
            A=A, penalty=SparsityPenalty(kind, lam=lam), **problem_kwargs
        )
        try:
            report = solve(problem, U)
            count = report.selection.p
        except EmptySelectionError:
            report, count = None, 0
        evaluated[lam] = (count, report)
        return evaluated[lam]

    lo, hi = float(lam_lo), float(lam_hi)
    c_lo, _ = run(lo)
    c_hi, _ = run(hi)
    for _ in range(max_bisect):
        if c_lo <= p_target or c_hi >= p_target:
            break
        mid = float(np.sqrt(lo * hi))
        c_mid, _ = run(mid)
        if c_mid >= p_target:
            lo, c_lo = mid, c_mid
        else:
            hi, c_hi = mid, c_mid
        if abs(c_mid - p_target) <= count_tolerance:
            break

    best = None
    for lam, (count, report) in evaluated.items():
        if report is None or abs(count - p_target) > count_tolerance:
            continue
        key = (abs(count - p_target), count, lam)
        if best is None or key < best[0]:
            best = (key, lam, report)
    if best is None:
        raise EmptySelectionError(
            "no lambda in [%g, %g] reached %d sensors" % (lam_lo, lam_hi, p_target)
        )
    return best[2], best[1]
