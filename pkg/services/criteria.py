"""
Criteria module.

Evaluation of attributions: the Robustness-S̄r / Robustness-Sr curves, the
Insertion / Deletion curves under a configurable reference value, their
trapezoidal AUC, explanation sensitivity and the last-layer randomisation
sanity check.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import rankdata, spearmanr

from config import DEFAULT_FRACTIONS, SEED
from services.attack import AttackConfig, AttackGoal, FeatureSet, min_perturbation_masks, top_count
from services.classifier import Model, check_input, forward, predict, randomize_last_layer, softmax_probs
from services.datasets import Example
from services.errors import DimensionError
from services.explainers import Attribution, attribution_to_set
from services.seeding import stream
from services.workers import map_ordered

logger = logging.getLogger(__name__)

Criterion = Literal["robustness_sbar", "robustness_s", "insertion", "deletion"]
ROBUSTNESS_CRITERIA = ("robustness_sbar", "robustness_s")
REPLACEMENT_CRITERIA = ("insertion", "deletion")
CRITERIA = ROBUSTNESS_CRITERIA + REPLACEMENT_CRITERIA


def auc(points: Sequence[Tuple[float, float]]) -> float:
    """
    Trapezoidal area under a curve.

    sum over i of (y_i + y_{i-1}) / 2 * (x_i - x_{i-1})

    Raises:
        ValueError: fewer than 2 points or x not strictly increasing
    """
    points = [(float(x), float(y)) for x, y in points]
    if len(points) < 2:
        raise ValueError(f"auc needs at least 2 points, got {len(points)}")
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if not x1 > x0:
            raise ValueError(f"curve fractions must be strictly increasing, got {x0} then {x1}")
        total += (y1 + y0) / 2.0 * (x1 - x0)
    return total


@dataclass(frozen=True, eq=False)
class EvalCurve:
    """
    Mean criterion value per fraction, with the per-example matrix behind it.

    values[e, k] is example e at fraction k; capped marks robustness attacks
    that hit eps_cap. A single-point curve has auc 0.
    """

    points: Tuple[Tuple[float, float], ...]
    criterion: str
    example_ids: Tuple[int, ...] = ()
    values: Optional[np.ndarray] = None
    capped: Optional[np.ndarray] = None
    n_skipped: int = 0
    auc: float = field(init=False)

    def __post_init__(self):
        points = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "auc", auc(points) if len(points) >= 2 else 0.0)

    @property
    def fractions(self) -> Tuple[float, ...]:
        return tuple(x for x, _ in self.points)

    @property
    def n_examples(self) -> int:
        return len(self.example_ids)

    @property
    def n_capped(self) -> int:
        return 0 if self.capped is None else int(self.capped.sum())


class ReferenceSpec(BaseModel):
    """
    Reference value x' standing in for removed features.

    scalar: every coordinate equals value.
    per_feature: the given vector.
    uniform: one U(lo, hi) draw per example, fixed across fractions.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["scalar", "per_feature", "uniform"] = "scalar"
    value: float = 0.0
    vector: Optional[Tuple[float, ...]] = None
    lo: float = 0.0
    hi: float = 1.0
    seed: int = SEED

    @model_validator(mode="after")
    def _consistent(self):
        if self.kind == "per_feature" and not self.vector:
            raise ValueError("per_feature reference needs a vector")
        if self.lo > self.hi:
            raise ValueError(f"uniform reference bounds out of order: lo={self.lo} > hi={self.hi}")
        return self

    @classmethod
    def scalar(cls, value: float) -> "ReferenceSpec":
        return cls(kind="scalar", value=value)

    @classmethod
    def per_feature(cls, vector) -> "ReferenceSpec":
        return cls(kind="per_feature", vector=tuple(float(v) for v in vector))

    @classmethod
    def uniform(cls, lo: float, hi: float, seed: int) -> "ReferenceSpec":
        return cls(kind="uniform", lo=lo, hi=hi, seed=seed)

    def resolve(self, d: int, example_id: int = 0) -> np.ndarray:
        """Reference vector of length d for one example."""
        if self.kind == "scalar":
            return np.full(d, self.value)
        if self.kind == "per_feature":
            if len(self.vector) != d:
                raise DimensionError(f"reference vector of length {len(self.vector)} does not match input_dim {d}")
            return np.array(self.vector, dtype=np.float64)
        return stream(self.seed, example_id).uniform(self.lo, self.hi, size=d)


class CriteriaConfig(BaseModel):
    """Fractions and attack settings for the robustness curves."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    target_class: Optional[int] = None
    attack_cfg: AttackConfig = AttackConfig()

    @model_validator(mode="after")
    def _valid_fractions(self):
        check_fractions(self.fractions)
        return self

    def goal_for(self, predicted: int) -> AttackGoal:
        """Untargeted away from the prediction, or toward target_class."""
        if self.target_class is None:
            return AttackGoal.untargeted(predicted)
        return AttackGoal.targeted(self.target_class, predicted)


def check_fractions(fractions: Sequence[float]) -> None:
    if not fractions:
        raise ValueError("at least one fraction is required")
    if any(not 0.0 < f < 1.0 for f in fractions):
        raise ValueError(f"fractions must lie in (0, 1), got {list(fractions)}")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError(f"fractions must be strictly increasing, got {list(fractions)}")


def _check_pairs(model: Model, examples, attributions) -> None:
    if len(examples) != len(attributions):
        raise ValueError(f"{len(attributions)} attributions for {len(examples)} examples")
    for attr in attributions:
        if attr.dim != model.input_dim:
            raise DimensionError(f"attribution of length {attr.dim} does not match input_dim {model.input_dim}")


def _top_masks(attr: Attribution, fractions: Sequence[float]) -> np.ndarray:
    return np.stack([attribution_to_set(attr, top_count(f, attr.dim)).mask() for f in fractions])


def _assemble(criterion, fractions, ids, rows, capped_rows) -> EvalCurve:
    kept = [i for i, row in enumerate(rows) if row is not None]
    n_skipped = len(rows) - len(kept)
    if not kept:
        raise ValueError(f"no correctly classified examples left to evaluate {criterion}")
    values = np.stack([rows[i] for i in kept])
    capped = np.stack([capped_rows[i] for i in kept])
    means = values.mean(axis=0)
    if n_skipped:
        logger.warning(f"{criterion}: skipped {n_skipped} misclassified example(s)")
    if capped.any():
        logger.warning(f"{criterion}: {int(capped.sum())} attack(s) reached eps_cap")
    return EvalCurve(
        points=tuple(zip(fractions, means.tolist())),
        criterion=criterion,
        example_ids=tuple(ids[i] for i in kept),
        values=values,
        capped=capped,
        n_skipped=n_skipped,
    )


def robustness_curve(
    model: Model,
    examples: Sequence[Example],
    attributions: Sequence[Attribution],
    mode: str,
    config: CriteriaConfig = CriteriaConfig(),
    jobs: int = 1,
    example_ids: Optional[Sequence[int]] = None,
) -> EvalCurve:
    """
    Robustness-S̄r (mode "robustness_sbar") or Robustness-Sr ("robustness_s").

    At every fraction the top ceil(fraction * d) features form S_r and the
    minimal perturbation is searched on its complement or on S_r itself.
    Capped attacks contribute eps_cap. Examples whose prediction differs
    from their label are skipped.

    Args:
        model: Classifier
        examples: Labelled inputs
        attributions: One Attribution per example
        mode: "robustness_sbar" or "robustness_s"
        config: CriteriaConfig
        jobs: Worker threads
        example_ids: Identifiers reported per example (default 0..n-1)

    Returns:
        EvalCurve
    """
    if mode not in ROBUSTNESS_CRITERIA:
        raise ValueError(f"unknown robustness criterion {mode!r}")
    _check_pairs(model, examples, attributions)
    ids = list(range(len(examples))) if example_ids is None else [int(i) for i in example_ids]

    def evaluate_one(position: int):
        example = examples[position]
        x = check_input(model, example.x)
        y = predict(model, x)
        if y != example.label or y == config.target_class:
            return None, None
        masks = _top_masks(attributions[position], config.fractions)
        if mode == "robustness_sbar":
            masks = ~masks
        results = min_perturbation_masks(model, x, masks, config.goal_for(y), config.attack_cfg)
        return np.array([r.norm for r in results]), np.array([r.capped for r in results])

    outcomes = map_ordered(evaluate_one, range(len(examples)), jobs, desc=mode)
    return _assemble(mode, config.fractions, ids, [o[0] for o in outcomes], [o[1] for o in outcomes])


def composite_input(x, reference, mask, mode: str) -> np.ndarray:
    """
    Deletion replaces the masked features by the reference; Insertion keeps
    them and replaces the rest.
    """
    if mode == "deletion":
        return np.where(mask, reference, x)
    return np.where(mask, x, reference)


def replacement_value(model: Model, x, reference, mask, mode: str, label: int) -> float:
    """Softmax probability of label at the composite input."""
    return float(softmax_probs(forward(model, composite_input(x, reference, mask, mode)))[label])


def insertion_deletion_curve(
    model: Model,
    examples: Sequence[Example],
    attributions: Sequence[Attribution],
    mode: str,
    reference: ReferenceSpec = ReferenceSpec(),
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    jobs: int = 1,
    example_ids: Optional[Sequence[int]] = None,
) -> EvalCurve:
    """
    Insertion or Deletion curve of the originally predicted class probability.

    Each composite input is evaluated on its own so that equal inputs give
    bitwise equal outputs.
    """
    if mode not in REPLACEMENT_CRITERIA:
        raise ValueError(f"unknown replacement criterion {mode!r}")
    fractions = tuple(float(f) for f in fractions)
    check_fractions(fractions)
    _check_pairs(model, examples, attributions)
    ids = list(range(len(examples))) if example_ids is None else [int(i) for i in example_ids]

    def evaluate_one(position: int):
        example = examples[position]
        x = check_input(model, example.x)
        y = predict(model, x)
        if y != example.label:
            return None, None
        ref = reference.resolve(model.input_dim, ids[position])
        masks = _top_masks(attributions[position], fractions)
        values = np.array([replacement_value(model, x, ref, mask, mode, y) for mask in masks])
        return values, np.zeros(len(fractions), dtype=bool)

    outcomes = map_ordered(evaluate_one, range(len(examples)), jobs, desc=mode)
    return _assemble(mode, fractions, ids, [o[0] for o in outcomes], [o[1] for o in outcomes])


def sensitivity(
    model: Model,
    explain_set: Callable[[Model, np.ndarray], FeatureSet],
    x,
    radius: float,
    num_samples: int,
    seed: int,
) -> float:
    """
    1 - min over sampled y of |Phi(y) ∩ Phi(x)| / |Phi(x)|.

    y is drawn uniformly from the L2 ball of the given radius around x: a
    normalised Gaussian direction scaled by radius * u^(1/d).
    """
    x = check_input(model, x)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be at least 1, got {num_samples}")
    base = set(explain_set(model, x).indices)
    if not base:
        raise ValueError("explanation set at x is empty")
    rng = np.random.default_rng(seed)
    d = x.size
    worst = 1.0
    for _ in range(num_samples):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        y = x + radius * rng.random() ** (1.0 / d) * direction
        overlap = len(base & set(explain_set(model, y).indices)) / len(base)
        worst = min(worst, overlap)
    return 1.0 - worst


def spearman_rank_correlation(attr_a: Attribution, attr_b: Attribution) -> float:
    """
    Spearman rho of the two score vectors, ties getting average ranks.

    A constant rank vector gives 1.0 if the other is constant too, else 0.0.
    """
    if attr_a.dim != attr_b.dim:
        raise DimensionError(f"attributions of length {attr_a.dim} and {attr_b.dim} cannot be compared")
    ranks_a = rankdata(attr_a.scores)
    ranks_b = rankdata(attr_b.scores)
    flat_a = np.all(ranks_a == ranks_a[0])
    flat_b = np.all(ranks_b == ranks_b[0])
    if flat_a or flat_b:
        return 1.0 if flat_a and flat_b else 0.0
    if np.array_equal(ranks_a, ranks_b):
        return 1.0
    rho, _ = spearmanr(attr_a.scores, attr_b.scores)
    return float(np.clip(rho, -1.0, 1.0))


@dataclass(frozen=True)
class SanityResult:
    """Rank correlation per example between the original and randomised model."""

    per_example: Tuple[float, ...]
    mean: float


def sanity_check(
    model: Model,
    examples: Sequence[Example],
    explain_fn: Callable[[Model, np.ndarray], Attribution],
    seed: int,
    jobs: int = 1,
) -> SanityResult:
    """
    Compare explanations before and after re-initialising the last layer.

    A model-independent explainer scores exactly 1.0 and fails the check.
    """
    if not examples:
        raise ValueError("sanity check needs at least one example")
    randomized = randomize_last_layer(model, seed)

    def correlate(example: Example) -> float:
        return spearman_rank_correlation(explain_fn(model, example.x), explain_fn(randomized, example.x))

    rhos: List[float] = map_ordered(correlate, examples, jobs, desc="sanity")
    return SanityResult(tuple(rhos), float(np.mean(rhos)))
