"""
Linear oracle module.

Exact minimal L2 perturbation, restricted to a feature set, for a linear
multiclass classifier z = Wx + b. Used to check the PGD search.
"""

import itertools
import math

import numpy as np

from services.attack import AttackGoal, FeatureSet
from services.errors import DimensionError

INFEASIBLE = math.inf

# constraint slack accepted when checking a candidate on the decision boundary
_FEASIBILITY_TOL = 1e-9


def _untargeted(W, z, S_mask, label) -> float:
    best = INFEASIBLE
    for j in range(W.shape[0]):
        if j == label:
            continue
        direction = np.linalg.norm((W[label] - W[j])[S_mask])
        if direction == 0.0:
            continue
        best = min(best, max(z[label] - z[j], 0.0) / direction)
    return best


def _targeted(W, z, S_mask, target) -> float:
    """
    min ||delta|| s.t. (w_t - w_j)_S . delta >= z_j - z_t for all j != t.

    The optimum is the least-norm point on some subset of active boundaries,
    so every subset is tried and the feasible candidates compared.
    """
    others = [j for j in range(W.shape[0]) if j != target]
    A_all = np.stack([(W[target] - W[j])[S_mask] for j in others])
    b_all = np.array([z[j] - z[target] for j in others])
    if A_all.shape[1] == 0:
        return INFEASIBLE
    best = INFEASIBLE
    max_active = min(len(others), A_all.shape[1])
    for size in range(1, max_active + 1):
        for active in itertools.combinations(range(len(others)), size):
            A = A_all[list(active)]
            b = b_all[list(active)]
            delta = np.linalg.pinv(A) @ b
            if not np.allclose(A @ delta, b, atol=_FEASIBILITY_TOL):
                continue
            if np.all(A_all @ delta >= b_all - _FEASIBILITY_TOL):
                best = min(best, float(np.linalg.norm(delta)))
    return best


def linear_min_perturbation(weight_rows, bias, x, S: FeatureSet, goal: AttackGoal) -> float:
    """
    Exact minimal perturbation norm on S for a linear classifier.

    Args:
        weight_rows: Matrix (C, d)
        bias: Vector (C,)
        x: Input (d,)
        S: Perturbable features
        goal: Untargeted(y) or Targeted(t)

    Returns:
        The minimal norm, 0 when the goal already holds, INFEASIBLE (inf)
        when no perturbation on S reaches the goal
    """
    W = np.asarray(weight_rows, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape != (W.shape[1],) or S.dim != W.shape[1]:
        raise DimensionError(
            f"inconsistent shapes: weights {W.shape}, bias {b.shape}, x {x.shape}, feature set dim {S.dim}"
        )
    goal.check(W.shape[0])
    z = W @ x + b
    if goal.achieved(int(np.argmax(z))):
        return 0.0
    mask = S.mask()
    if goal.is_targeted:
        return _targeted(W, z, mask, goal.class_index)
    return _untargeted(W, z, mask, goal.class_index)
