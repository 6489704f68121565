"""
Greedy module.

Set explainers that optimise the robustness objectives directly:

- max over S_r of g(f, x, complement(S_r))  (objective "max_sbar")
- min over S_r of g(f, x, S_r)              (objective "min_s")

subject to |S_r| <= K, where g is the minimal perturbation norm. Greedy adds
the features with the best single-feature objective at each step; Greedy-AS
ranks unchosen features by their regression-estimated Banzhaf value over
random coalitions; One-Step Banzhaf runs a single regression.
"""

import logging
from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from config import INCLUSION_PROB, NUM_SUBSET_SAMPLES, RIDGE, SEED, STEP_FRACTION, TARGET_FRACTION
from services.attack import AttackConfig, AttackGoal, FeatureSet, min_perturbation_masks, top_count
from services.banzhaf import MAX_EXACT_PLAYERS, all_subsets, fit_banzhaf
from services.classifier import Model, check_input
from services.explainers import Attribution, selection_attribution

logger = logging.getLogger(__name__)

Objective = Literal["max_sbar", "min_s"]


class GreedyConfig(BaseModel):
    """Selection parameters shared by Greedy, Greedy-AS and One-Step Banzhaf."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    objective: Objective = "max_sbar"
    target_fraction: float = Field(default=TARGET_FRACTION, gt=0.0, le=1.0)
    step_fraction: float = Field(default=STEP_FRACTION, gt=0.0, le=1.0)
    num_subset_samples: PositiveInt = NUM_SUBSET_SAMPLES
    subset_inclusion_prob: float = Field(default=INCLUSION_PROB, gt=0.0, lt=1.0)
    exhaustive_subsets: bool = False
    ridge: float = Field(default=RIDGE, ge=0.0)
    seed: int = SEED
    goal: AttackGoal

    @property
    def maximize(self) -> bool:
        return self.objective == "max_sbar"


class ObjectiveEvaluator:
    """
    Memoised v(S_r) for one selection run.

    v(S_r) = g(f, x, complement(S_r)) for max_sbar and g(f, x, S_r) for min_s;
    an empty perturbable set scores eps_cap.
    """

    def __init__(self, model: Model, x, config: GreedyConfig, attack_cfg: AttackConfig):
        self.model = model
        self.x = check_input(model, x)
        self.config = config
        self.attack_cfg = attack_cfg
        self._cache: Dict[bytes, float] = {}

    def __len__(self) -> int:
        return len(self._cache)

    def values(self, relevant_masks) -> np.ndarray:
        """Objective for every row of a boolean (n, d) matrix of relevant sets."""
        relevant_masks = np.asarray(relevant_masks, dtype=bool)
        perturbable = ~relevant_masks if self.config.maximize else relevant_masks
        keys = [row.tobytes() for row in perturbable]
        missing: Dict[bytes, int] = {}
        for row, key in enumerate(keys):
            if key not in self._cache and key not in missing:
                missing[key] = row
        if missing:
            rows = list(missing.values())
            results = min_perturbation_masks(
                self.model, self.x, perturbable[rows], self.config.goal, self.attack_cfg
            )
            for key, result in zip(missing, results):
                self._cache[key] = result.norm
        return np.array([self._cache[key] for key in keys])


def objective_value(
    model: Model,
    x,
    S_r: FeatureSet,
    config: GreedyConfig,
    attack_cfg: AttackConfig = AttackConfig(),
) -> float:
    """
    v(S_r) under the configured objective.

    Capped attacks, including an empty perturbable set, return eps_cap.
    """
    return float(ObjectiveEvaluator(model, x, config, attack_cfg).values(S_r.mask()[None, :])[0])


def _best(scores: np.ndarray, count: int, maximize: bool) -> np.ndarray:
    """Positions of the count best scores; ties keep the lower position."""
    order = np.argsort(-scores if maximize else scores, kind="stable")
    return order[:count]


def _sizes(config: GreedyConfig, d: int) -> Tuple[int, int]:
    target = top_count(config.target_fraction, d)
    step = max(1, top_count(config.step_fraction, d))
    if target < 1:
        raise ValueError(f"target_fraction {config.target_fraction} selects no feature of {d}")
    return target, step


def greedy_select(
    model: Model,
    x,
    config: GreedyConfig,
    attack_cfg: AttackConfig = AttackConfig(),
) -> Tuple[List[int], Attribution]:
    """
    Greedy: at each step add the step_fraction * d features whose single
    addition to S_r gives the best objective.

    Returns:
        Tuple of (selection order, Attribution encoding that order)
    """
    evaluator = ObjectiveEvaluator(model, x, config, attack_cfg)
    d = model.input_dim
    target, step = _sizes(config, d)
    chosen: List[int] = []
    relevant = np.zeros(d, dtype=bool)
    while len(chosen) < target:
        candidates = np.flatnonzero(~relevant)
        trial = np.repeat(relevant[None, :], candidates.size, axis=0)
        trial[np.arange(candidates.size), candidates] = True
        values = evaluator.values(trial)
        picked = candidates[_best(values, min(step, target - len(chosen)), config.maximize)]
        chosen.extend(int(i) for i in picked)
        relevant[picked] = True
        best = values.max() if config.maximize else values.min()
        logger.debug(f"Greedy step: |S_r|={len(chosen)}, best objective {best:.4f}")
    return chosen, selection_attribution(chosen, d, "greedy")


def _coalitions(rng: np.random.Generator, n: int, config: GreedyConfig) -> np.ndarray:
    if config.exhaustive_subsets and n <= MAX_EXACT_PLAYERS:
        return all_subsets(n)
    return rng.random((config.num_subset_samples, n)) < config.subset_inclusion_prob


def _aggregation_scores(evaluator, rng, relevant, config) -> Tuple[np.ndarray, np.ndarray]:
    """Banzhaf regression of v(S_r ∪ S) on random coalitions S of the unchosen features."""
    unchosen = np.flatnonzero(~relevant)
    membership = _coalitions(rng, unchosen.size, config)
    trial = np.repeat(relevant[None, :], membership.shape[0], axis=0)
    trial[:, unchosen] = membership
    values = evaluator.values(trial)
    solution = fit_banzhaf(membership, values, config.ridge)
    return unchosen, solution.w


def greedy_as_select(
    model: Model,
    x,
    config: GreedyConfig,
    attack_cfg: AttackConfig = AttackConfig(),
) -> Tuple[List[int], Attribution]:
    """
    Greedy-AS: at each step move the step_fraction * d unchosen features with
    the highest (max_sbar) or lowest (min_s) aggregation score into S_r.

    Returns:
        Tuple of (selection order, Attribution encoding that order)
    """
    evaluator = ObjectiveEvaluator(model, x, config, attack_cfg)
    rng = np.random.default_rng(config.seed)
    d = model.input_dim
    target, step = _sizes(config, d)
    chosen: List[int] = []
    relevant = np.zeros(d, dtype=bool)
    while len(chosen) < target:
        unchosen, w = _aggregation_scores(evaluator, rng, relevant, config)
        picked = unchosen[_best(w, min(step, target - len(chosen)), config.maximize)]
        chosen.extend(int(i) for i in picked)
        relevant[picked] = True
        logger.debug(f"Greedy-AS step: |S_r|={len(chosen)}, {len(evaluator)} distinct sets attacked")
    return chosen, selection_attribution(chosen, d, "greedy-as")


def one_step_banzhaf_select(
    model: Model,
    x,
    config: GreedyConfig,
    attack_cfg: AttackConfig = AttackConfig(),
) -> Tuple[List[int], Attribution]:
    """Ablation of Greedy-AS: one regression at S_r = ∅, then the top K features at once."""
    evaluator = ObjectiveEvaluator(model, x, config, attack_cfg)
    rng = np.random.default_rng(config.seed)
    d = model.input_dim
    target, _ = _sizes(config, d)
    unchosen, w = _aggregation_scores(evaluator, rng, np.zeros(d, dtype=bool), config)
    chosen = [int(i) for i in unchosen[_best(w, target, config.maximize)]]
    return chosen, selection_attribution(chosen, d, "banzhaf")
