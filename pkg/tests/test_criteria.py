import numpy as np
import pytest
from scipy.stats import rankdata

from services.attack import AttackGoal, FeatureSet, min_perturbation
from services.classifier import forward, predict, softmax_probs
from services.criteria import (
    CriteriaConfig,
    EvalCurve,
    ReferenceSpec,
    auc,
    composite_input,
    insertion_deletion_curve,
    replacement_value,
    robustness_curve,
    sanity_check,
    sensitivity,
    spearman_rank_correlation,
)
from services.datasets import Example
from services.errors import DimensionError
from services.explainers import Attribution, grad_attr, random_attr
from services.linear_oracle import linear_min_perturbation

MAGNITUDES = np.array([1.0, 16.0, 4.0, 8.0, 2.0, 0.5])
SIGNS = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])


@pytest.fixture
def six_feature_model(make_linear):
    """Binary linear model whose importance order is given by MAGNITUDES."""
    return make_linear(np.vstack([np.zeros(6), MAGNITUDES * SIGNS]))


def test_auc_simple_cases():
    assert auc([(0.0, 3.0), (1.0, 3.0)]) == 3.0
    assert auc([(0.05, 2.0), (0.10, 4.0)]) == pytest.approx(0.15, abs=1e-15)


def test_auc_matches_a_fine_grid_integral():
    rng = np.random.default_rng(0)
    xs = np.sort(rng.choice(np.arange(1, 100), size=9, replace=False) / 100.0)
    ys = rng.normal(size=9)
    grid = np.unique(np.concatenate([np.linspace(a, b, 1001) for a, b in zip(xs, xs[1:])]))
    fine = np.interp(grid, xs, ys)
    integral = float(np.sum((fine[1:] + fine[:-1]) / 2.0 * np.diff(grid)))
    assert auc(list(zip(xs, ys))) == pytest.approx(integral, abs=1e-12)


def test_auc_is_linear():
    xs = [0.1, 0.2, 0.4, 0.5]
    a, b = [1.0, 2.0, 0.5, 3.0], [0.2, -1.0, 4.0, 1.5]
    total = auc(list(zip(xs, np.add(a, b))))
    assert total == pytest.approx(auc(list(zip(xs, a))) + auc(list(zip(xs, b))), abs=1e-12)


def test_auc_errors():
    with pytest.raises(ValueError):
        auc([(0.1, 1.0)])
    with pytest.raises(ValueError):
        auc([(0.2, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        auc([(0.3, 1.0), (0.2, 2.0)])


def test_single_point_curve_has_zero_area():
    curve = EvalCurve(points=((0.5, 2.0),), criterion="robustness_s")
    assert curve.auc == 0.0
    assert curve.fractions == (0.5,)


def test_criteria_config_validates_fractions():
    with pytest.raises(ValueError):
        CriteriaConfig(fractions=(0.2, 0.1))
    with pytest.raises(ValueError):
        CriteriaConfig(fractions=(0.0, 0.5))
    assert CriteriaConfig(target_class=2).goal_for(0) == AttackGoal.targeted(2, 0)


@pytest.mark.parametrize("mode, perturbed", [("robustness_sbar", (0,)), ("robustness_s", (1,))])
def test_single_example_curve_is_the_attack_norm(binary_model, binary_point, mode, perturbed):
    example = Example(binary_point, 1)
    attr = Attribution([1.0, 2.0])
    curve = robustness_curve(binary_model, [example], [attr], mode, CriteriaConfig(fractions=(0.5,)))
    direct = min_perturbation(binary_model, binary_point, FeatureSet(perturbed, 2), AttackGoal.untargeted(1))
    assert curve.points == ((0.5, direct.norm),)
    assert curve.n_examples == 1 and curve.n_capped == 0


def test_identical_examples_give_the_same_curve(six_feature_model):
    x = 0.1 * SIGNS
    attr = Attribution(MAGNITUDES)
    config = CriteriaConfig(fractions=(0.2, 0.5, 0.8))
    one = robustness_curve(six_feature_model, [Example(x, 1)], [attr], "robustness_s", config)
    two = robustness_curve(six_feature_model, [Example(x, 1)] * 2, [attr, attr], "robustness_s", config)
    assert one.points == two.points
    assert two.example_ids == (0, 1)


def test_curve_matches_the_linear_oracle(six_feature_model):
    W = np.vstack([np.zeros(6), MAGNITUDES * SIGNS])
    x = 0.1 * SIGNS
    attr = Attribution(MAGNITUDES)
    config = CriteriaConfig(fractions=(0.2, 0.4, 0.6, 0.8))
    cap = config.attack_cfg.cap_for(6)
    for mode in ("robustness_sbar", "robustness_s"):
        curve = robustness_curve(six_feature_model, [Example(x, 1)], [attr], mode, config)
        for (fraction, value), row in zip(curve.points, curve.values[0]):
            top = attr.ranking[: int(np.ceil(round(fraction * 6, 9)))]
            S = FeatureSet.of(top, 6)
            if mode == "robustness_sbar":
                S = S.complement()
            expected = min(linear_min_perturbation(W, np.zeros(2), x, S, AttackGoal.untargeted(1)), cap)
            assert expected - 1e-6 <= value <= 1.02 * expected
            assert row == value


def test_robustness_s_decreases_along_the_true_ranking(six_feature_model):
    curve = robustness_curve(
        six_feature_model,
        [Example(0.1 * SIGNS, 1)],
        [Attribution(MAGNITUDES)],
        "robustness_s",
        CriteriaConfig(fractions=(0.2, 0.4, 0.6, 0.8)),
    )
    values = [y for _, y in curve.points]
    assert all(b <= a * 1.001 for a, b in zip(values, values[1:]))


def test_misclassified_examples_are_skipped(binary_model, binary_point):
    attr = Attribution([1.0, 2.0])
    config = CriteriaConfig(fractions=(0.5,))
    curve = robustness_curve(
        binary_model, [Example(binary_point, 0), Example(binary_point, 1)], [attr, attr], "robustness_s", config,
        example_ids=[10, 11],
    )
    assert curve.n_skipped == 1
    assert curve.example_ids == (11,)
    with pytest.raises(ValueError):
        robustness_curve(binary_model, [Example(binary_point, 0)], [attr], "robustness_s", config)


def test_capped_attacks_are_counted(make_linear):
    model = make_linear([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
    attr = Attribution([0.0, 0.0, 1.0])
    curve = robustness_curve(
        model, [Example(np.array([1.0, 1.0, 0.0]), 1)], [attr], "robustness_s", CriteriaConfig(fractions=(0.3,))
    )
    assert curve.n_capped == 1
    assert curve.points[0][1] == pytest.approx(2.0 * np.sqrt(3.0))


def test_mismatched_inputs(binary_model, binary_point):
    with pytest.raises(ValueError):
        robustness_curve(binary_model, [Example(binary_point, 1)], [], "robustness_s")
    with pytest.raises(DimensionError):
        robustness_curve(binary_model, [Example(binary_point, 1)], [Attribution([1.0, 2.0, 3.0])], "robustness_s")
    with pytest.raises(ValueError):
        robustness_curve(binary_model, [Example(binary_point, 1)], [Attribution([1.0, 2.0])], "insertion")


def test_deletion_ignores_features_equal_to_the_reference(make_mlp):
    rng = np.random.default_rng(17)
    for _ in range(100):
        model = make_mlp(rng, [6, 8, 3])
        x = rng.normal(size=6)
        reference = rng.normal(size=6)
        i = int(rng.integers(6))
        reference[i] = x[i]
        mask = rng.random(6) < 0.5
        mask[i] = False
        label = int(predict(model, x))
        with_i = mask.copy()
        with_i[i] = True
        assert replacement_value(model, x, reference, mask, "deletion", label) == \
            replacement_value(model, x, reference, with_i, "deletion", label)


def test_composite_inputs():
    x = np.array([1.0, 2.0, 3.0])
    ref = np.zeros(3)
    mask = np.array([True, False, True])
    np.testing.assert_array_equal(composite_input(x, ref, mask, "deletion"), [0.0, 2.0, 0.0])
    np.testing.assert_array_equal(composite_input(x, ref, mask, "insertion"), [1.0, 0.0, 3.0])


def test_deletion_of_nothing_keeps_the_probability(make_mlp):
    rng = np.random.default_rng(1)
    model = make_mlp(rng, [4, 5, 3])
    x = rng.normal(size=4)
    y = int(predict(model, x))
    original = softmax_probs(forward(model, x))[y]
    assert replacement_value(model, x, np.zeros(4), np.zeros(4, dtype=bool), "deletion", y) == original


def test_insertion_with_reference_x_is_flat(make_mlp):
    rng = np.random.default_rng(2)
    model = make_mlp(rng, [4, 5, 3])
    x = rng.normal(size=4)
    y = int(predict(model, x))
    curve = insertion_deletion_curve(
        model, [Example(x, y)], [random_attr(4, seed=0)], "insertion", ReferenceSpec.per_feature(x), (0.25, 0.5, 0.75)
    )
    original = float(softmax_probs(forward(model, x))[y])
    assert [v for _, v in curve.points] == [original] * 3
    assert curve.auc == pytest.approx(original * 0.5)


def test_uniform_reference_is_fixed_per_example(make_mlp):
    reference = ReferenceSpec.uniform(0.0, 1.0, seed=5)
    first = reference.resolve(4, example_id=7)
    np.testing.assert_array_equal(first, reference.resolve(4, example_id=7))
    assert not np.array_equal(first, reference.resolve(4, example_id=8))
    assert np.all((first >= 0.0) & (first <= 1.0))

    rng = np.random.default_rng(3)
    model = make_mlp(rng, [4, 5, 3])
    examples = [Example(x, int(predict(model, x))) for x in rng.normal(size=(3, 4))]
    attrs = [random_attr(4, seed=i) for i in range(3)]
    a = insertion_deletion_curve(model, examples, attrs, "deletion", reference, (0.25, 0.5))
    b = insertion_deletion_curve(model, examples, attrs, "deletion", reference, (0.25, 0.5), jobs=2)
    np.testing.assert_array_equal(a.values, b.values)


def test_reference_errors(binary_model, binary_point):
    with pytest.raises(ValueError):
        ReferenceSpec(kind="per_feature")
    with pytest.raises(ValueError):
        ReferenceSpec.uniform(1.0, 0.0, seed=0)
    with pytest.raises(DimensionError):
        insertion_deletion_curve(
            binary_model, [Example(binary_point, 1)], [Attribution([1.0, 2.0])], "deletion",
            ReferenceSpec.per_feature([0.0, 0.0, 0.0]), (0.5,),
        )


def test_sensitivity_extremes(make_linear):
    x = np.array([0.2, 0.4])

    def constant(model, y):
        return FeatureSet((0,), 2)

    def adversarial(model, y):
        return FeatureSet((0,), 2) if np.array_equal(y, x) else FeatureSet((1,), 2)

    model = make_linear(np.eye(2))
    assert sensitivity(model, adversarial, x, 0.0, 10, seed=0) == 0.0
    assert sensitivity(model, constant, x, 0.5, 10, seed=0) == 0.0
    assert sensitivity(model, adversarial, x, 0.5, 10, seed=0) == 1.0
    with pytest.raises(ValueError):
        sensitivity(model, constant, x, -1.0, 10, seed=0)


def test_spearman():
    a = Attribution([0.1, 0.5, 0.3, 0.9])
    assert spearman_rank_correlation(a, a) == 1.0
    assert spearman_rank_correlation(a, Attribution(-a.scores)) == pytest.approx(-1.0, abs=1e-12)
    assert spearman_rank_correlation(Attribution(np.zeros(4)), Attribution(np.zeros(4))) == 1.0
    assert spearman_rank_correlation(Attribution(np.zeros(4)), a) == 0.0
    rng = np.random.default_rng(4)
    for _ in range(20):
        u, v = rng.normal(size=12), rng.normal(size=12)
        u[:3] = u[0]
        expected = np.corrcoef(rankdata(u), rankdata(v))[0, 1]
        assert spearman_rank_correlation(Attribution(u), Attribution(v)) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(DimensionError):
        spearman_rank_correlation(a, Attribution([1.0, 2.0]))


def test_sanity_check_flags_model_independent_explainers(digits_model, digits_split):
    _, test = digits_split
    examples = test.examples[:10]
    result = sanity_check(digits_model, examples, lambda model, x: random_attr(64, seed=3), seed=0)
    assert result.per_example == (1.0,) * 10
    assert result.mean == 1.0


def test_sanity_check_of_gradients(digits_model, digits_split):
    _, test = digits_split
    examples = test.examples[:20]
    result = sanity_check(digits_model, examples, lambda model, x: grad_attr(model, x), seed=0)
    assert result.mean < 0.9
    again = sanity_check(digits_model, examples, lambda model, x: grad_attr(model, x), seed=0)
    assert again.per_example == result.per_example
