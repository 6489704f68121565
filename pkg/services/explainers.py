"""
Explainers module.

Feature-attribution baselines (Grad, IG, EG, LOO, Random) and the
Attribution type every explanation method returns.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from services.attack import FeatureSet
from services.classifier import Logit, Model, check_input, forward, input_gradient, predict
from services.errors import DimensionError


@dataclass(frozen=True, eq=False)
class Attribution:
    """
    Per-feature scores with their ranking.

    ranking lists features by descending score, lower index first on ties.
    """

    scores: np.ndarray
    method_name: str = ""
    ranking: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise DimensionError(f"scores must be a vector, got shape {scores.shape}")
        if not np.all(np.isfinite(scores)):
            raise ValueError("attribution scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        ranking = np.lexsort((np.arange(scores.size), -scores))
        ranking.setflags(write=False)
        object.__setattr__(self, "ranking", ranking)

    @property
    def dim(self) -> int:
        return self.scores.size

    def ranks(self) -> np.ndarray:
        """Position of every feature in the ranking (0 = most relevant)."""
        positions = np.empty(self.dim, dtype=np.int64)
        positions[self.ranking] = np.arange(self.dim)
        return positions


def _check_reference(model: Model, reference, name: str) -> np.ndarray:
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape != (model.input_dim,):
        raise DimensionError(f"{name} of shape {reference.shape} does not match input_dim {model.input_dim}")
    return reference


def grad_attr(model: Model, x) -> Attribution:
    """|d z_y / d x_i| for the predicted class y."""
    x = check_input(model, x)
    y = predict(model, x)
    return Attribution(np.abs(input_gradient(model, x, Logit(y))), "grad")


def ig_attr(model: Model, x, baseline, m_steps: int) -> Attribution:
    """
    Integrated gradients with the midpoint rule.

    scores_i = (x_i - x'_i) * mean_k dz_y/dx_i at x' + (k - 0.5)/m * (x - x').
    """
    x = check_input(model, x)
    baseline = _check_reference(model, baseline, "baseline")
    if m_steps < 1:
        raise ValueError(f"m_steps must be at least 1, got {m_steps}")
    y = predict(model, x)
    alphas = (np.arange(1, m_steps + 1) - 0.5) / m_steps
    path = baseline + alphas[:, None] * (x - baseline)
    mean_grad = input_gradient(model, path, Logit(y)).mean(axis=0)
    return Attribution((x - baseline) * mean_grad, "ig")


def eg_attr(model: Model, x, background: Sequence, num_samples: int, seed: int) -> Attribution:
    """
    Expected gradients: IG averaged over baselines drawn from background.

    Each sample draws x' uniformly from background and alpha ~ U(0, 1), and
    contributes (x - x') * dz_y/dx at x' + alpha * (x - x').
    """
    x = check_input(model, x)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise ValueError("expected gradients needs a non-empty background")
    if background.shape[1] != model.input_dim:
        raise DimensionError(f"background rows of length {background.shape[1]} do not match input_dim")
    rng = np.random.default_rng(seed)
    y = predict(model, x)
    refs = background[rng.integers(0, background.shape[0], size=num_samples)]
    alphas = rng.random(num_samples)
    points = refs + alphas[:, None] * (x - refs)
    grads = input_gradient(model, points, Logit(y))
    return Attribution(np.mean((x - refs) * grads, axis=0), "eg")


def loo_attr(model: Model, x, reference) -> Attribution:
    """scores_i = z_y(x) - z_y(x with x_i replaced by reference_i)."""
    x = check_input(model, x)
    reference = _check_reference(model, reference, "reference")
    y = predict(model, x)
    occluded = np.repeat(x[None, :], x.size + 1, axis=0)
    np.fill_diagonal(occluded[:-1], reference)
    logits = forward(model, occluded)[:, y]
    scores = logits[-1] - logits[:-1]
    # rows equal to x can still differ from the x row in the last ulp under BLAS blocking
    scores[x == reference] = 0.0
    return Attribution(scores, "loo")


def random_attr(d: int, seed: int) -> Attribution:
    """Seeded uniform shuffle of 0..d-1 used as scores."""
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    return Attribution(np.random.default_rng(seed).permutation(d).astype(np.float64), "random")


def selection_attribution(selection: Sequence[int], d: int, method_name: str) -> Attribution:
    """
    Encode a selection order as scores.

    The k-th of K selected features scores K - k; unselected features score 0
    and fall back to index order.
    """
    scores = np.zeros(d)
    K = len(selection)
    for position, feature in enumerate(selection):
        scores[feature] = K - position
    return Attribution(scores, method_name)


def attribution_to_set(attr: Attribution, k: int) -> FeatureSet:
    """The top-k features of the ranking."""
    if not 0 <= k <= attr.dim:
        raise ValueError(f"k must lie in [0, {attr.dim}], got {k}")
    return FeatureSet.of(attr.ranking[:k].tolist(), attr.dim)
