"""
Common command helpers.

Config resolution from the global flags, dataset/model loading, example
selection and the explainer options shared by several commands.
"""

import functools
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np

from services.classifier import Model, load_model, predict
from services.datasets import Dataset, Example, load_dataset, split_dataset
from services.errors import ConfigError, DataError, DimensionError
from services.explainers import Attribution
from services.methods import SET_METHODS, ExplainContext, explain
from services.run_config import RunConfig, load_run_config, require_file
from services.seeding import stream
from services.workers import map_ordered

logger = logging.getLogger(__name__)

# stream key of the EG background draw
BACKGROUND_STREAM = 1


def resolve_config(ctx: click.Context, **overrides) -> RunConfig:
    """RunConfig from --config, then command flags, then the global flags."""
    obj = ctx.find_root().obj or {}
    merged: Dict[str, Any] = dict(obj.get("overrides", {}))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return load_run_config(obj.get("config_path"), merged)


def parse_baseline(value: Optional[str]):
    """A scalar, or a file of comma or whitespace separated floats."""
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        pass
    path = Path(value)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"--baseline is neither a number nor a readable file: {value}") from e
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as e:
        raise ConfigError(f"{path}: baseline values must be numbers: {str(e)}") from e


def explainer_options(fn):
    """Explainer parameter flags mapped onto the explainer config block."""

    @click.option("--baseline", default=None, help="IG/LOO baseline: a scalar or a file of d values")
    @click.option("--ig-steps", type=click.IntRange(min=1), default=None, help="IG integration steps")
    @click.option("--samples", type=click.IntRange(min=1), default=None, help="Subsets sampled per Greedy-AS step")
    @click.option("--step-fraction", type=float, default=None, help="Features added per greedy step, as a fraction of d")
    @click.option("--target-fraction", type=float, default=None, help="Size of the selected set, as a fraction of d")
    @click.option("--inclusion-prob", type=float, default=None, help="Inclusion probability of sampled subsets")
    @functools.wraps(fn)
    def wrapper(*args, baseline, ig_steps, samples, step_fraction, target_fraction, inclusion_prob, **kwargs):
        kwargs["explainer_overrides"] = {
            "explainer.baseline": parse_baseline(baseline),
            "explainer.ig_steps": ig_steps,
            "explainer.num_subset_samples": samples,
            "explainer.step_fraction": step_fraction,
            "explainer.target_fraction": target_fraction,
            "explainer.subset_inclusion_prob": inclusion_prob,
        }
        return fn(*args, **kwargs)

    return wrapper


def attack_options(fn):
    """Attack flags mapped onto the attack config block."""

    @click.option("--steps", type=click.IntRange(min=1), default=None, help="PGD steps per radius")
    @click.option("--step-size", type=click.FloatRange(min=0.0, min_open=True), default=None, help="PGD step size")
    @click.option("--binsearch-iters", type=click.IntRange(min=0), default=None, help="Bisection steps")
    @click.option("--eps-cap", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Largest radius tried")
    @click.option("--clip", type=(float, float), default=None, help="Clip x + delta to [LO, HI]")
    @click.option("--per-class-restarts/--no-per-class-restarts", default=None, help="Retry failed radii per class")
    @functools.wraps(fn)
    def wrapper(*args, steps, step_size, binsearch_iters, eps_cap, clip, per_class_restarts, **kwargs):
        kwargs["attack_overrides"] = {
            "attack.num_steps": steps,
            "attack.step_size": step_size,
            "attack.binsearch_iters": binsearch_iters,
            "attack.eps_cap": eps_cap,
            "attack.clip_box": list(clip) if clip else None,
            "attack.per_class_restarts": per_class_restarts,
        }
        return fn(*args, **kwargs)

    return wrapper


def load_split(config: RunConfig) -> Tuple[Dataset, Dataset]:
    """Train and test split of the configured dataset."""
    dataset = load_dataset(require_file(config.dataset_path, "dataset_path"))
    if dataset.labels.min() < 0:
        raise DataError(f"{config.dataset_path}: labels must be non-negative class indices")
    if len(set(dataset.labels.tolist())) < 2:
        raise DataError(f"{config.dataset_path}: at least two classes are required")
    return split_dataset(dataset, config.train.test_fraction, config.seed)


def load_run_model(config: RunConfig, dim: int) -> Model:
    model = load_model(require_file(config.model_path, "model_path"))
    if model.input_dim != dim:
        raise DimensionError(f"model input_dim {model.input_dim} does not match dataset dimension {dim}")
    return model


def select_examples(model: Model, test: Dataset, config: RunConfig) -> Tuple[List[int], List[Example], int]:
    """
    The first num_examples correctly classified test examples.

    Examples predicted as the target class are passed over as well.

    Returns:
        Tuple of (test indices, examples, number passed over)
    """
    if config.target_class is not None and config.target_class >= model.num_classes:
        raise ConfigError(f"target_class {config.target_class} out of range for {model.num_classes} classes")
    predicted = predict(model, test.features)
    ids, chosen, passed = [], [], 0
    for index, example in enumerate(test.examples):
        if len(chosen) == config.num_examples:
            break
        if predicted[index] != example.label or predicted[index] == config.target_class:
            passed += 1
            continue
        ids.append(index)
        chosen.append(example)
    if not chosen:
        raise DataError("no correctly classified test examples to evaluate")
    if len(chosen) < config.num_examples:
        logger.warning(f"Only {len(chosen)} of {config.num_examples} requested examples are usable")
    return ids, chosen, passed


def explain_context(config: RunConfig, train: Dataset) -> ExplainContext:
    """EG background drawn from the training split, attack settings and run seed."""
    size = min(config.explainer.eg_background_size, len(train))
    rows = np.sort(stream(config.seed, BACKGROUND_STREAM).permutation(len(train))[:size])
    return ExplainContext(background=train.features[rows], attack_cfg=config.attack, seed=config.seed)


def attributions_for(
    config: RunConfig,
    model: Model,
    ids: List[int],
    examples: List[Example],
    context: ExplainContext,
    method: str,
    objective: Optional[str],
) -> List[Attribution]:
    """One attribution per selected example, computed in example order."""
    kwargs = {"target_class": config.target_class}
    if method in SET_METHODS:
        kwargs["objective"] = objective

    def run(position: int) -> Attribution:
        return explain(method, model, examples[position].x, config.explainer, context, ids[position], **kwargs)

    label = method if objective is None else f"{method}/{objective}"
    return map_ordered(run, range(len(examples)), config.jobs, desc=label)
