"""
Attack module.

Subset-restricted L2 adversarial attacks: fixed-radius PGD whose iterates
are zero outside the perturbable feature set, and the doubling/bisection
search for the smallest radius that reaches the attack goal.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, NonNegativeInt, PositiveFloat, PositiveInt, model_validator

from config import BINSEARCH_ITERS, PGD_NUM_STEPS, PGD_STEP_SIZE
from services.classifier import (
    Margin,
    Model,
    PairMargin,
    ScalarHead,
    TargetMargin,
    check_input,
    input_gradient,
    predict,
)
from services.errors import DimensionError

logger = logging.getLogger(__name__)

# halvings tried when the starting radius already succeeds
MAX_HALVINGS = 40


def top_count(fraction: float, dim: int) -> int:
    """ceil(fraction * dim), ignoring binary rounding noise such as 0.05 * 40."""
    return int(math.ceil(round(fraction * dim, 9)))


@dataclass(frozen=True)
class FeatureSet:
    """Strictly increasing feature indices within {0..dim-1}."""

    indices: Tuple[int, ...]
    dim: int

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"feature indices must be strictly increasing, got {indices}")
        if indices and (indices[0] < 0 or indices[-1] >= self.dim):
            raise ValueError(f"feature indices must lie in [0, {self.dim}), got {indices}")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def of(cls, indices: Iterable[int], dim: int) -> "FeatureSet":
        """Build from any iterable, sorting and dropping duplicates."""
        return cls(tuple(sorted(set(int(i) for i in indices))), dim)

    @classmethod
    def full(cls, dim: int) -> "FeatureSet":
        return cls(tuple(range(dim)), dim)

    @classmethod
    def empty(cls, dim: int) -> "FeatureSet":
        return cls((), dim)

    @classmethod
    def from_mask(cls, mask) -> "FeatureSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask).tolist()), mask.size)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=bool)
        out[list(self.indices)] = True
        return out

    def complement(self) -> "FeatureSet":
        return FeatureSet.from_mask(~self.mask())

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices


class AttackGoal(BaseModel):
    """
    Untargeted: leave class_index (the original class y).
    Targeted: reach class_index (the target t).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["untargeted", "targeted"] = "untargeted"
    class_index: int
    original_class: Optional[int] = None

    @model_validator(mode="after")
    def _target_differs(self):
        if self.kind == "targeted" and self.original_class == self.class_index:
            raise ValueError(f"target class {self.class_index} equals the original class")
        return self

    @classmethod
    def untargeted(cls, label: int) -> "AttackGoal":
        return cls(kind="untargeted", class_index=int(label))

    @classmethod
    def targeted(cls, target: int, original: Optional[int] = None) -> "AttackGoal":
        return cls(
            kind="targeted",
            class_index=int(target),
            original_class=None if original is None else int(original),
        )

    @property
    def is_targeted(self) -> bool:
        return self.kind == "targeted"

    def check(self, num_classes: int) -> None:
        for value in (self.class_index, self.original_class):
            if value is not None and not 0 <= value < num_classes:
                raise ValueError(f"class index {value} out of range for {num_classes} classes")

    def achieved(self, classes) -> np.ndarray:
        classes = np.asarray(classes)
        if self.is_targeted:
            return classes == self.class_index
        return classes != self.class_index

    def head(self) -> ScalarHead:
        """Margin head that PGD ascends."""
        if self.is_targeted:
            return TargetMargin(self.class_index)
        return Margin(self.class_index)


class AttackConfig(BaseModel):
    """PGD and radius-search parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    norm_p: Literal[2] = 2
    step_size: PositiveFloat = PGD_STEP_SIZE
    num_steps: PositiveInt = PGD_NUM_STEPS
    binsearch_iters: NonNegativeInt = BINSEARCH_ITERS
    eps_cap: Optional[PositiveFloat] = None
    clip_box: Optional[Tuple[float, float]] = None
    per_class_restarts: bool = True

    @model_validator(mode="after")
    def _ordered_box(self):
        if self.clip_box is not None and self.clip_box[0] > self.clip_box[1]:
            raise ValueError(f"clip_box lower bound exceeds upper bound: {self.clip_box}")
        return self

    def cap_for(self, dim: int) -> float:
        """eps_cap, defaulting to 2 * sqrt(d)."""
        return float(self.eps_cap) if self.eps_cap is not None else 2.0 * math.sqrt(dim)


@dataclass(frozen=True, eq=False)
class AttackResult:
    """
    Outcome of one attack.

    delta is exactly zero outside the perturbable set. For capped results
    delta is the last failed iterate and norm reports eps_cap.
    """

    delta: np.ndarray
    norm: float
    success: bool
    achieved_class: int
    capped: bool = False


def _project(delta, masks, eps, x, clip_box) -> np.ndarray:
    """Zero the frozen coordinates, shrink onto the L2 ball, then clip x + delta."""
    delta = np.where(masks, delta, 0.0)
    norms = np.linalg.norm(delta, axis=1)
    scale = np.ones_like(norms)
    over = norms > eps
    scale[over] = eps[over] / norms[over]
    delta = delta * scale[:, None]
    if clip_box is not None:
        lo, hi = clip_box
        delta = np.where(masks, np.clip(x + delta, lo, hi) - x, 0.0)
    return delta


def _ascent_direction(model, points, masks, head) -> np.ndarray:
    """Head gradient restricted to the mask and scaled to unit L2 norm (zero stays zero)."""
    grad = np.where(masks, input_gradient(model, points, head), 0.0)
    norms = np.linalg.norm(grad, axis=1, keepdims=True)
    return np.divide(grad, norms, out=np.zeros_like(grad), where=norms > 0.0)


def _pgd_rows(model, x, masks, eps, goal, head, config) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run PGD for every row (mask, radius) in lockstep.

    Rows stop at their first iterate that reaches the goal.

    Returns:
        Tuple of (deltas (n, d), success (n,), achieved classes (n,))
    """
    n, d = masks.shape
    delta = np.zeros((n, d))
    classes = np.broadcast_to(np.asarray(predict(model, x)), (n,)).copy()
    success = goal.achieved(classes)
    active = ~success & (eps > 0.0)
    for _ in range(config.num_steps):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        step = _ascent_direction(model, x + delta[rows], masks[rows], head)
        moved = _project(delta[rows] + config.step_size * step, masks[rows], eps[rows], x, config.clip_box)
        delta[rows] = moved
        reached = predict(model, x + moved)
        classes[rows] = reached
        hit = goal.achieved(reached)
        success[rows[hit]] = True
        active[rows[hit]] = False
    return delta, success, classes


def _attack_rows(model, x, masks, eps, goal, config):
    """PGD on the goal's margin head, optionally retried per competing class."""
    delta, success, classes = _pgd_rows(model, x, masks, eps, goal, goal.head(), config)
    # with two classes the pairwise head is the margin head
    if config.per_class_restarts and not goal.is_targeted and model.num_classes > 2:
        for cls in range(model.num_classes):
            failed = np.flatnonzero(~success)
            if failed.size == 0:
                break
            if cls == goal.class_index:
                continue
            head = PairMargin(cls, goal.class_index)
            d2, s2, c2 = _pgd_rows(model, x, masks[failed], eps[failed], goal, head, config)
            delta[failed[s2]] = d2[s2]
            classes[failed[s2]] = c2[s2]
            success[failed[s2]] = True
    return delta, success, classes


def _check_feature_set(model: Model, S: FeatureSet) -> None:
    if S.dim != model.input_dim:
        raise DimensionError(f"feature set dimension {S.dim} does not match model input_dim {model.input_dim}")


def pgd_fixed_eps(
    model: Model,
    x,
    S: FeatureSet,
    goal: AttackGoal,
    eps: float,
    config: AttackConfig = AttackConfig(),
) -> AttackResult:
    """
    Fixed-radius PGD restricted to the features in S.

    Args:
        model: Classifier
        x: Input (d,)
        S: Perturbable features (nonempty)
        goal: Attack goal
        eps: L2 radius (>= 0)
        config: AttackConfig

    Returns:
        First iterate reaching the goal, else the final iterate with success=False
    """
    x = check_input(model, x)
    _check_feature_set(model, S)
    if len(S) == 0:
        raise ValueError("perturbable feature set S is empty")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    goal.check(model.num_classes)
    delta, success, classes = _attack_rows(
        model, x, S.mask()[None, :], np.array([float(eps)]), goal, config
    )
    return AttackResult(
        delta=delta[0],
        norm=float(np.linalg.norm(delta[0])),
        success=bool(success[0]),
        achieved_class=int(classes[0]),
    )


def min_perturbation_masks(
    model: Model,
    x,
    masks: np.ndarray,
    goal: AttackGoal,
    config: AttackConfig = AttackConfig(),
) -> List[AttackResult]:
    """
    Smallest-radius search for many perturbable masks of one input.

    Doubling from 0.1 * sqrt(|S|) / sqrt(d) * ||x|| + 0.1 until success or the
    cap (halving instead when that radius already succeeds), then bisection
    between the last failing and first succeeding radius.
    Empty masks are reported as capped without attacking.

    Args:
        model: Classifier
        x: Input (d,)
        masks: Boolean array (n, d), one perturbable set per row
        goal: Attack goal
        config: AttackConfig

    Returns:
        One AttackResult per row
    """
    x = check_input(model, x)
    masks = np.asarray(masks, dtype=bool).reshape(-1, model.input_dim)
    goal.check(model.num_classes)
    n, d = masks.shape
    cap = config.cap_for(d)

    best_delta = np.zeros((n, d))
    best_norm = np.full(n, np.inf)
    best_class = np.full(n, int(predict(model, x)))
    found = np.zeros(n, dtype=bool)
    capped = np.zeros(n, dtype=bool)

    def record(rows, deltas, success, classes):
        norms = np.linalg.norm(deltas, axis=1)
        better = success & (norms < best_norm[rows])
        chosen = rows[better]
        best_delta[chosen] = deltas[better]
        best_norm[chosen] = norms[better]
        best_class[chosen] = classes[better]
        found[chosen] = True

    sizes = masks.sum(axis=1)
    capped[sizes == 0] = True
    rows = np.flatnonzero(sizes > 0)

    # radius zero: the goal may already hold
    deltas, success, classes = _attack_rows(model, x, masks[rows], np.zeros(rows.size), goal, config)
    record(rows, deltas, success, classes)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    eps = 0.1 * np.sqrt(sizes) / math.sqrt(d) * np.linalg.norm(x) + 0.1
    eps = np.minimum(eps, cap)
    pending = rows[~success]
    shrinking = None
    while pending.size:
        deltas, success, classes = _attack_rows(model, x, masks[pending], eps[pending], goal, config)
        record(pending, deltas, success, classes)
        hi[pending[success]] = eps[pending[success]]
        if shrinking is None:
            shrinking = pending[success]
        failed = pending[~success]
        lo[failed] = eps[failed]
        at_cap = eps[failed] >= cap
        done = failed[at_cap]
        capped[done] = True
        best_delta[done] = deltas[~success][at_cap]
        best_class[done] = classes[~success][at_cap]
        pending = failed[~at_cap]
        eps[pending] = np.minimum(2.0 * eps[pending], cap)

    # the first radius already succeeded: halve until one fails
    for _ in range(MAX_HALVINGS):
        if shrinking is None or shrinking.size == 0:
            break
        half = 0.5 * hi[shrinking]
        deltas, success, classes = _attack_rows(model, x, masks[shrinking], half, goal, config)
        record(shrinking, deltas, success, classes)
        hi[shrinking[success]] = half[success]
        lo[shrinking[~success]] = half[~success]
        shrinking = shrinking[success]

    bracketed = np.flatnonzero(np.isfinite(hi))
    for _ in range(config.binsearch_iters):
        if bracketed.size == 0:
            break
        mid = 0.5 * (lo[bracketed] + hi[bracketed])
        deltas, success, classes = _attack_rows(model, x, masks[bracketed], mid, goal, config)
        record(bracketed, deltas, success, classes)
        hi[bracketed[success]] = mid[success]
        lo[bracketed[~success]] = mid[~success]

    results = []
    for i in range(n):
        if found[i]:
            results.append(AttackResult(best_delta[i].copy(), float(best_norm[i]), True, int(best_class[i])))
        else:
            results.append(AttackResult(best_delta[i].copy(), cap, False, int(best_class[i]), capped=True))
    logger.debug(f"Radius search over {n} sets: {int(capped.sum())} capped, cap={cap:.4f}")
    return results


def min_perturbation_batch(
    model: Model,
    x,
    feature_sets: Sequence[FeatureSet],
    goal: AttackGoal,
    config: AttackConfig = AttackConfig(),
) -> List[AttackResult]:
    """min_perturbation for several feature sets of one input; empty sets come back capped."""
    for S in feature_sets:
        _check_feature_set(model, S)
    if not feature_sets:
        return []
    return min_perturbation_masks(model, x, np.stack([S.mask() for S in feature_sets]), goal, config)


def min_perturbation(
    model: Model,
    x,
    S: FeatureSet,
    goal: AttackGoal,
    config: AttackConfig = AttackConfig(),
) -> AttackResult:
    """
    Upper bound on the minimal L2 perturbation on S that reaches the goal.

    Args:
        model: Classifier
        x: Input (d,)
        S: Perturbable features (nonempty)
        goal: Attack goal
        config: AttackConfig

    Returns:
        Smallest successful AttackResult found, or a capped result
    """
    _check_feature_set(model, S)
    if len(S) == 0:
        raise ValueError("perturbable feature set S is empty")
    return min_perturbation_batch(model, x, [S], goal, config)[0]
