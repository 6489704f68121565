import numpy as np
import pytest

from services.classifier import predict
from services.errors import ConfigError, DimensionError
from services.methods import (
    METHODS,
    SET_METHODS,
    ExplainContext,
    ExplainerParams,
    attribution_fn,
    check_method,
    explain,
    method_seed,
    top_set_fn,
)


@pytest.fixture
def small_setup(make_mlp):
    rng = np.random.default_rng(31)
    model = make_mlp(rng, [5, 6, 3])
    x = rng.normal(size=5)
    context = ExplainContext(background=rng.normal(size=(8, 5)), seed=2)
    params = ExplainerParams(num_subset_samples=20, eg_samples=30, ig_steps=10)
    return model, x, context, params


def test_every_method_explains(small_setup):
    model, x, context, params = small_setup
    for method in METHODS:
        attr = explain(method, model, x, params, context, example_id=3)
        assert attr.dim == 5
        assert attr.method_name == method
        assert sorted(attr.ranking.tolist()) == list(range(5))


def test_seeded_methods_depend_on_example_id(small_setup):
    model, x, context, params = small_setup
    a = explain("random", model, x, params, context, example_id=0)
    np.testing.assert_array_equal(a.scores, explain("random", model, x, params, context, example_id=0).scores)
    assert method_seed(0, "random", 0) != method_seed(0, "random", 1)
    assert method_seed(0, "random", 0) != method_seed(0, "eg", 0)


def test_set_methods_take_objective_and_target(small_setup):
    model, x, context, params = small_setup
    y = int(predict(model, x))
    target = (y + 1) % 3
    for method in SET_METHODS:
        attr = explain(method, model, x, params, context, objective="min_s", target_class=target)
        selected = int(np.count_nonzero(attr.scores))
        assert selected == 3  # ceil(0.45 * 5)


def test_unknown_method_is_a_config_error(small_setup):
    model, x, context, params = small_setup
    with pytest.raises(ConfigError):
        check_method("shap")
    with pytest.raises(ConfigError):
        explain("shap", model, x, params, context)


def test_baseline_vector():
    assert ExplainerParams(baseline=0.5).baseline_vector(3).tolist() == [0.5, 0.5, 0.5]
    assert ExplainerParams(baseline=(1.0, 2.0)).baseline_vector(2).tolist() == [1.0, 2.0]
    with pytest.raises(DimensionError):
        ExplainerParams(baseline=(1.0, 2.0)).baseline_vector(3)


def test_bound_explainers(small_setup):
    model, x, context, params = small_setup
    explain_fn = attribution_fn("grad", params, context)
    np.testing.assert_array_equal(explain_fn(model, x).scores, explain("grad", model, x, params, context).scores)
    top = top_set_fn("grad", params, context, 0.4)(model, x)
    assert len(top) == 2
