"""Greedy A-optimal sensor selection.

One sensor is added per step, always the candidate minimizing the step
objective.  While fewer than r sensors are placed the Fisher information
matrix C^T C is singular, so candidates are scored by the trace of its
rank-aware pseudo-inverse (candidates that do not raise the rank are
excluded).  Once the FIM is invertible, scoring switches to tr((C^T C)^{-1})
maintained incrementally by Sherman-Morrison rank-one updates, giving
O(n r^2) work per step.
"""

from dataclasses import dataclass

import numpy as np

from .core import SensorSelection
from .errors import InvalidParameterError

# Relative eigenvalue cutoff for the rank-aware pseudo-inverse.
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class GreedyConfig:
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise InvalidParameterError("target sensor count must be >= 1")


def _pinv_trace_scores(U, selected):
    """Scores for the underdetermined phase: tr(pinv(C'^T C')) per candidate.

    The nonzero eigenvalues of C'^T C' equal those of the (k+1) x (k+1) Gram
    matrix C' C'^T, so all n candidate Grams are eigendecomposed in one
    stacked call.  Candidates that leave the rank unchanged score +inf.
    """
    n, r = U.shape
    k = len(selected)
    C = U[selected, :] if k else np.empty((0, r))
    G = C @ C.T
    cross = C @ U.T  # k x n
    q = np.einsum("ij,ij->i", U, U)

    grams = np.empty((n, k + 1, k + 1))
    grams[:, :k, :k] = G
    grams[:, :k, k] = cross.T
    grams[:, k, :k] = cross.T
    grams[:, k, k] = q
    vals = np.linalg.eigvalsh(grams)  # ascending per row

    cutoff = np.maximum(vals[:, -1], 0.0) * _RANK_RTOL
    live = vals > np.maximum(cutoff, 0.0)[:, None]
    ranks = live.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(live, 1.0 / vals, 0.0)
    scores = inv.sum(axis=1)

    base_rank = np.linalg.matrix_rank(C) if k else 0
    scores[ranks <= base_rank] = np.inf
    scores[selected] = np.inf
    return scores


def _sm_trace_scores(U, B, selected):
    """Overdetermined phase: trace after a rank-one FIM update, vectorized.

    tr((F + u u^T)^{-1}) = tr(B) - ||B u||^2 / (1 + u^T B u) with B = F^{-1}.
    """
    P = U @ B  # n x r, row j = u_j^T B
    num = np.einsum("ij,ij->i", P, P)
    den = 1.0 + np.einsum("ij,ij->i", U, P)
    scores = np.trace(B) - num / den
    scores[selected] = np.inf
    return scores


def greedy_step_scores(current, U):
    """Step objective of current ∪ {j} for every candidate j.

    Already-selected candidates score +inf.  `current` may be a
    SensorSelection, an index list, or None/empty for the first step.
    """
    U = np.asarray(U, dtype=float)
    if current is None:
        selected = []
    elif isinstance(current, SensorSelection):
        selected = list(current.indices)
    else:
        selected = list(current)
    r = U.shape[1]
    if len(selected) >= r:
        C = U[selected, :]
        fim = C.T @ C
        vals = np.linalg.eigvalsh(fim)
        if vals[0] > vals[-1] * _RANK_RTOL and vals[0] > 0:
            return _sm_trace_scores(U, np.linalg.inv(fim), selected)
    return _pinv_trace_scores(U, selected)


def greedy_select(U, cfg):
    """A-optimal greedy selection of cfg.p sensors; ties to the lowest index."""
    U = np.asarray(U, dtype=float)
    n, r = U.shape
    p = cfg.p if isinstance(cfg, GreedyConfig) else int(cfg)
    if p > n:
        raise InvalidParameterError("cannot select %d of %d candidates" % (p, n))

    selected = []
    B = None  # (C^T C)^{-1} once available
    for _ in range(p):
        if B is not None:
            scores = _sm_trace_scores(U, B, selected)
        else:
            scores = _pinv_trace_scores(U, selected)
        j = int(np.argmin(scores))  # argmin takes the lowest index on ties
        if not np.isfinite(scores[j]):
            # No candidate adds information; fall back to any unselected index.
            remaining = sorted(set(range(n)) - set(selected))
            j = remaining[0]
        selected.append(j)

        if B is None and len(selected) >= r:
            C = U[selected, :]
            fim = C.T @ C
            vals = np.linalg.eigvalsh(fim)
            if vals[0] > 0 and vals[0] > vals[-1] * _RANK_RTOL:
                B = np.linalg.inv(fim)
        elif B is not None:
            u = U[j]
            Bu = B @ u
            B = B - np.outer(Bu, Bu) / (1.0 + u @ Bu)

    return SensorSelection(tuple(selected))
