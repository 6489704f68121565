"""
Methods module.

Registry mapping explanation method names to the explainers, with the
shared explainer parameters and per-example seeding.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from config import (
    EG_BACKGROUND_SIZE,
    EG_SAMPLES,
    IG_STEPS,
    INCLUSION_PROB,
    NUM_SUBSET_SAMPLES,
    RIDGE,
    STEP_FRACTION,
    TARGET_FRACTION,
)
from services.attack import AttackConfig, AttackGoal, FeatureSet, top_count
from services.classifier import Model, check_input, predict
from services.errors import ConfigError, DimensionError
from services.explainers import Attribution, attribution_to_set, eg_attr, grad_attr, ig_attr, loo_attr, random_attr
from services.greedy import GreedyConfig, greedy_as_select, greedy_select, one_step_banzhaf_select
from services.seeding import derive_seed

METHODS = ("grad", "ig", "eg", "loo", "random", "greedy", "greedy-as", "banzhaf")
SET_METHODS = ("greedy", "greedy-as", "banzhaf")

# set methods select for the objective that matches the criterion
OBJECTIVE_FOR_CRITERION = {
    "robustness_sbar": "max_sbar",
    "insertion": "max_sbar",
    "robustness_s": "min_s",
    "deletion": "min_s",
}

_SELECTORS = {
    "greedy": greedy_select,
    "greedy-as": greedy_as_select,
    "banzhaf": one_step_banzhaf_select,
}


class ExplainerParams(BaseModel):
    """Parameters of every explanation method."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    baseline: Union[float, Tuple[float, ...]] = 0.0
    ig_steps: PositiveInt = IG_STEPS
    eg_samples: PositiveInt = EG_SAMPLES
    eg_background_size: PositiveInt = EG_BACKGROUND_SIZE
    num_subset_samples: PositiveInt = NUM_SUBSET_SAMPLES
    step_fraction: float = Field(default=STEP_FRACTION, gt=0.0, le=1.0)
    target_fraction: float = Field(default=TARGET_FRACTION, gt=0.0, le=1.0)
    subset_inclusion_prob: float = Field(default=INCLUSION_PROB, gt=0.0, lt=1.0)
    exhaustive_subsets: bool = False
    ridge: float = Field(default=RIDGE, ge=0.0)

    def baseline_vector(self, d: int) -> np.ndarray:
        """Baseline x' for IG and LOO."""
        if isinstance(self.baseline, tuple):
            if len(self.baseline) != d:
                raise DimensionError(f"baseline of length {len(self.baseline)} does not match input_dim {d}")
            return np.array(self.baseline, dtype=np.float64)
        return np.full(d, float(self.baseline))


@dataclass(frozen=True, eq=False)
class ExplainContext:
    """Run-wide inputs shared by every explanation."""

    background: np.ndarray
    attack_cfg: AttackConfig = AttackConfig()
    seed: int = 0


def check_method(method: str) -> None:
    if method not in METHODS:
        raise ConfigError(f"Unknown method {method!r}; expected one of {', '.join(METHODS)}")


def method_seed(seed: int, method: str, example_id: int) -> int:
    """Seed of one method on one example."""
    return derive_seed(seed, METHODS.index(method), example_id)


def explain(
    method: str,
    model: Model,
    x,
    params: ExplainerParams,
    context: ExplainContext,
    example_id: int = 0,
    objective: str = "max_sbar",
    target_class: Optional[int] = None,
) -> Attribution:
    """
    Run one explanation method on one input.

    Args:
        method: Name from METHODS
        model: Classifier
        x: Input (d,)
        params: ExplainerParams
        context: ExplainContext (background for EG, attack settings, seed)
        example_id: Identifier keying the method's random stream
        objective: "max_sbar" or "min_s" for the set methods
        target_class: Target class for targeted set explanations

    Returns:
        Attribution
    """
    check_method(method)
    x = check_input(model, x)
    seed = method_seed(context.seed, method, example_id)
    d = model.input_dim
    if method == "grad":
        return grad_attr(model, x)
    if method == "ig":
        return ig_attr(model, x, params.baseline_vector(d), params.ig_steps)
    if method == "eg":
        return eg_attr(model, x, context.background, params.eg_samples, seed)
    if method == "loo":
        return loo_attr(model, x, params.baseline_vector(d))
    if method == "random":
        return random_attr(d, seed)

    y = predict(model, x)
    goal = AttackGoal.untargeted(y) if target_class is None else AttackGoal.targeted(target_class, y)
    config = GreedyConfig(
        objective=objective,
        target_fraction=params.target_fraction,
        step_fraction=params.step_fraction,
        num_subset_samples=params.num_subset_samples,
        subset_inclusion_prob=params.subset_inclusion_prob,
        exhaustive_subsets=params.exhaustive_subsets,
        ridge=params.ridge,
        seed=seed,
        goal=goal,
    )
    _, attribution = _SELECTORS[method](model, x, config, context.attack_cfg)
    return attribution


def attribution_fn(
    method: str,
    params: ExplainerParams,
    context: ExplainContext,
    example_id: int = 0,
) -> Callable[[Model, np.ndarray], Attribution]:
    """Explainer of (model, x) with everything else fixed."""
    check_method(method)
    return lambda model, x: explain(method, model, x, params, context, example_id)


def top_set_fn(
    method: str,
    params: ExplainerParams,
    context: ExplainContext,
    fraction: float,
    example_id: int = 0,
) -> Callable[[Model, np.ndarray], FeatureSet]:
    """Top-ceil(fraction * d) feature set of the method's attribution."""
    explain_fn = attribution_fn(method, params, context, example_id)

    def explain_set(model: Model, x) -> FeatureSet:
        attribution = explain_fn(model, x)
        return attribution_to_set(attribution, top_count(fraction, attribution.dim))

    return explain_set
