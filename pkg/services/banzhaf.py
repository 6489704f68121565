"""
Banzhaf module.

Banzhaf values of a cooperative game, either exactly by enumerating all
coalitions or as the coefficients of a least-squares fit of the game's value
on coalition membership vectors.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from config import RIDGE

MAX_EXACT_PLAYERS = 16


@dataclass(frozen=True, eq=False)
class SubsetSample:
    """Membership b(S) over the unchosen players and the value v(S_r ∪ S)."""

    membership: np.ndarray
    value: float


@dataclass(frozen=True, eq=False)
class RegressionSolution:
    """Per-player coefficients w and intercept c."""

    w: np.ndarray
    c: float


def fit_banzhaf(membership, values, ridge: float = RIDGE, refinement_steps: int = 2) -> RegressionSolution:
    """
    Least squares of values on [membership | 1].

    The Gram matrix is damped by ridge * I and factorised once; a few rounds
    of iterative refinement against the undamped residual then remove the
    damping bias when the design has full rank.

    Args:
        membership: Binary matrix (m, n)
        values: Vector (m,)
        ridge: Damping added to the Gram diagonal
        refinement_steps: Refinement rounds

    Returns:
        RegressionSolution
    """
    B = np.asarray(membership, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if B.ndim != 2 or v.shape != (B.shape[0],):
        raise ValueError(f"membership {B.shape} and values {v.shape} are inconsistent")
    if B.shape[0] == 0:
        raise ValueError("banzhaf regression needs at least one sample")
    # a single sample, or identical ones, carry no per-player signal
    if np.all(B == B[0]):
        return RegressionSolution(np.zeros(B.shape[1]), float(np.mean(v)))

    design = np.hstack([B, np.ones((B.shape[0], 1))])
    gram = design.T @ design
    factor = cho_factor(gram + ridge * np.eye(gram.shape[0]))
    theta = cho_solve(factor, design.T @ v)
    for _ in range(refinement_steps):
        theta = theta + cho_solve(factor, design.T @ (v - design @ theta))
    return RegressionSolution(theta[:-1], float(theta[-1]))


def banzhaf_regression(samples: Sequence[SubsetSample], ridge: float = RIDGE) -> RegressionSolution:
    """
    Fit w, c minimising sum over samples of ((w . b(S) + c) - v)^2.

    With every subset of the players as samples, w equals the Banzhaf values.
    """
    if not samples:
        raise ValueError("banzhaf regression needs at least one sample")
    lengths = {np.asarray(s.membership).size for s in samples}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent membership lengths {sorted(lengths)}")
    membership = np.stack([np.asarray(s.membership, dtype=np.float64) for s in samples])
    values = np.array([s.value for s in samples], dtype=np.float64)
    return fit_banzhaf(membership, values, ridge)


def all_subsets(n: int) -> np.ndarray:
    """Membership matrix (2^n, n) of every subset, row k encoding the bits of k."""
    codes = np.arange(2**n)[:, None]
    return ((codes >> np.arange(n)) & 1).astype(bool)


def exact_banzhaf(value_fn: Callable[[np.ndarray], float], n: int) -> np.ndarray:
    """
    phi_i = 2^-(n-1) * sum over S not containing i of [v(S ∪ {i}) - v(S)].

    Args:
        value_fn: Game value of a boolean membership vector of length n
        n: Number of players (at most 16)

    Returns:
        Banzhaf value of every player
    """
    if n > MAX_EXACT_PLAYERS:
        raise ValueError(f"exact enumeration supports at most {MAX_EXACT_PLAYERS} players, got {n}")
    subsets = all_subsets(n)
    values = np.array([float(value_fn(s)) for s in subsets])
    codes = np.arange(2**n)
    phi = np.zeros(n)
    for i in range(n):
        without = codes[(codes >> i) & 1 == 0]
        phi[i] = np.mean(values[without | (1 << i)] - values[without])
    return phi
