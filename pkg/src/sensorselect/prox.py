"""Group-sparsity proximal operators applied column-blockwise.

All three operators act on the columns of an r x n matrix: each column is one
sensor group, zeroed or shrunk as a block by its L2 norm.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

BST = "bst"
BHT = "bht"
L0BHT = "l0bht"
KINDS = (BST, BHT, L0BHT)


@dataclass(frozen=True)
class ThresholdSpec:
    """Which operator to apply and its single parameter.

    gamma_lambda is required for BST/BHT, p for L0BHT.
    """

    kind: str
    gamma_lambda: float = None
    p: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError("unknown threshold kind %r" % (self.kind,))
        if self.kind in (BST, BHT):
            if self.gamma_lambda is None or self.gamma_lambda <= 0:
                raise InvalidParameterError("%s requires gamma_lambda > 0" % self.kind)
            if self.p is not None:
                raise InvalidParameterError("%s takes no column count p" % self.kind)
        else:
            if self.p is None or self.p < 1:
                raise InvalidParameterError("l0bht requires p >= 1")
            if self.gamma_lambda is not None:
                raise InvalidParameterError("l0bht takes no gamma_lambda")


def column_norms(V):
    V = np.asarray(V, dtype=float)
    return np.sqrt(np.einsum("ij,ij->j", V, V))


def block_soft_threshold(V, gamma_lambda):
    """Shrink each column toward zero by gamma_lambda in L2 norm."""
    if gamma_lambda <= 0:
        raise InvalidParameterError("gamma_lambda must be positive")
    V = np.asarray(V, dtype=float)
    norms = column_norms(V)
    safe = np.where(norms > 0, norms, 1.0)
    scale = np.where(norms >= gamma_lambda, 1.0 - gamma_lambda / safe, 0.0)
    return V * scale


def block_hard_threshold(V, gamma_lambda):
    """Zero every column whose L2 norm falls below gamma_lambda."""
    if gamma_lambda <= 0:
        raise InvalidParameterError("gamma_lambda must be positive")
    V = np.asarray(V, dtype=float)
    keep = column_norms(V) >= gamma_lambda
    return V * keep


def l0_constrained_hard_threshold(V, p):
    """Keep exactly the p largest-norm columns, ties to the lowest index.

    Rank-based selection (not a value comparison against the p-th norm) so
    that exactly p columns survive even under ties.  Zero columns that land
    inside the top-p remain zero, so the nonzero-column count is
    min(p, #nonzero columns).
    """
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    if p < 1 or p > n:
        raise InvalidParameterError("p=%d outside [1, %d]" % (p, n))
    norms = column_norms(V)
    order = np.argsort(-norms, kind="stable")
    keep = np.zeros(n, dtype=bool)
    keep[order[:p]] = True
    return V * keep


def apply_threshold(V, spec):
    """Dispatch on a ThresholdSpec."""
    if spec.kind == BST:
        return block_soft_threshold(V, spec.gamma_lambda)
    if spec.kind == BHT:
        return block_hard_threshold(V, spec.gamma_lambda)
    return l0_constrained_hard_threshold(V, spec.p)
