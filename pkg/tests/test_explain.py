import math
from fractions import Fraction

import numpy as np
import pytest

from edgehealth.data import FEATURE_NAMES, CANONICAL_SCHEMA, Dataset, FeatureSchema, generate_synthetic
from edgehealth.errors import (
    AlignmentMismatch,
    BadFeatureIndex,
    EmptyInput,
    SchemaMismatch,
    TooManyFeatures,
)
from edgehealth.explain import (
    BackgroundSet,
    Explanation,
    LeafPaths,
    beeswarm_data,
    coalition_table,
    dependence_data,
    explain_dataset,
    mean_abs_shap,
    read_shap_csv,
    shapley_exact,
    shapley_weight,
    value_function,
    weight_importance,
    write_shap_csv,
)
from edgehealth.gbdt import BoostedModel, BoostHyperparams, Leaf, Split, constant_model, predict_margin, train

from .conftest import random_dataset
from .oracles import composite_value, exact_weight, permutation_shapley, tree_value

RT = FEATURE_NAMES.index("response_time")


@pytest.fixture(scope="module")
def bg(small_split):
    return BackgroundSet.from_dataset(small_split[0], 64, seed=1)


def test_coefficient_example():
    assert shapley_weight(0, 8) == pytest.approx(1 / 8, rel=1e-15)
    assert exact_weight(0, 8) == Fraction(1, 8)


@pytest.mark.parametrize("n", range(1, 9))
def test_coefficients_sum_to_one(n):
    assert sum(math.comb(n - 1, s) * exact_weight(s, n) for s in range(n)) == 1
    total = math.fsum(math.comb(n - 1, s) * shapley_weight(s, n) for s in range(n))
    assert total == pytest.approx(1.0, abs=1e-15)


def test_value_function_extremes(small_model, bg, small_split, backend):
    x = small_split[1].X[0]
    full = value_function(small_model, x, range(8), bg)
    assert full == predict_margin(small_model, x)
    empty = value_function(small_model, x, [], bg)
    other = value_function(small_model, small_split[1].X[1], [], bg)
    assert empty == other
    assert empty == pytest.approx(np.mean([predict_margin(small_model, b) for b in bg.X]), abs=1e-12)


def test_value_function_matches_composite_oracle(small_model, bg, small_split, backend):
    x = small_split[1].X[3]
    for S in ([0], [1, 4], [2, 3, 7], [0, 1, 2, 3, 4, 5, 6]):
        ref = composite_value(small_model, x, set(S), bg.X)
        assert value_function(small_model, x, S, bg) == pytest.approx(ref, abs=1e-11)


def test_constant_model_values(bg):
    model = constant_model(0.7)
    x = bg.X[0]
    for S in ([], [2], list(range(8))):
        assert value_function(model, x, S, bg) == pytest.approx(0.7, abs=1e-15)
    e = shapley_exact(model, x, bg)
    assert (e.phi == 0).all() and e.phi0 == pytest.approx(0.7, abs=1e-15)


def test_leaf_table_equals_direct_evaluation(small_model, bg, small_split, backend):
    paths = LeafPaths(small_model, bg)
    masks = np.arange(256, dtype=np.uint64)
    from edgehealth.explain import _coalition_values

    for x in small_split[1].X[:5]:
        direct = _coalition_values(small_model, x, bg, masks)
        table = paths.values(x, masks)
        assert np.allclose(table, direct, rtol=0, atol=1e-12)


def test_backends_agree_bitwise(small_model, bg, small_split, monkeypatch):
    from edgehealth import _backend, explain

    results = []
    for mod in _backend.available_backends().values():
        monkeypatch.setattr(explain, "kernels", mod)
        results.append(coalition_table(small_model, small_split[1].X[2], bg))
    for r in results[1:]:
        assert np.array_equal(r, results[0])


def test_single_stump_hand_expansion(bg, backend):
    j = 5
    stump = Split(j, 55.0, Leaf(0.8), Leaf(-0.3))
    model = BoostedModel(CANONICAL_SCHEMA, 0.2, 0.5, (stump,), BoostHyperparams(learning_rate=0.5))
    for x in bg.X[:5]:
        e = shapley_exact(model, x, bg)
        expected = np.mean([tree_value(stump, x) - tree_value(stump, b) for b in bg.X]) * 0.5
        assert e.phi[j] == pytest.approx(expected, abs=1e-12)
        others = np.delete(e.phi, j)
        assert np.abs(others).max() < 1e-12


def test_efficiency(small_model, bg, small_split, backend):
    for e in explain_dataset(small_model, small_split[1], bg):
        x = small_split[1].X[e.sample_index]
        assert abs(e.phi0 + math.fsum(e.phi) - predict_margin(small_model, x)) < 1e-9


def test_dummy_feature(bg, small_split):
    train_set = small_split[0]
    model = train(train_set, BoostHyperparams(num_rounds=10, max_depth=3))
    used = {n.feature_index for t in model.trees for n in _walk(t) if isinstance(n, Split)}
    unused = set(range(8)) - used
    assert unused, "fixture model should leave at least one feature unused"
    for e in explain_dataset(model, small_split[1], bg, range(20)):
        for i in unused:
            assert abs(e.phi[i]) < 1e-12


def _walk(tree):
    stack = [tree]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, Split):
            stack += [n.left, n.right]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_permutation_oracle(n, backend):
    rng = np.random.default_rng(n)
    ds = random_dataset(rng, 60, n)
    model = train(ds, BoostHyperparams(num_rounds=6, max_depth=3))
    bgset = BackgroundSet(ds.X[:12], ds.schema)
    for x in ds.X[20:24]:
        got = shapley_exact(model, x, bgset).phi
        ref = permutation_shapley(model, x, bgset.X)
        assert np.allclose(got, ref, rtol=0, atol=1e-9)


def test_linearity(small_split, bg):
    tr = small_split[0]
    a = train(tr, BoostHyperparams(num_rounds=4, max_depth=2))
    b = train(tr, BoostHyperparams(num_rounds=3, max_depth=3))
    both = BoostedModel(tr.schema, a.base_score + b.base_score, a.eta, a.trees + b.trees, a.hyperparams)
    for x in small_split[1].X[:5]:
        s = shapley_exact(a, x, bg).phi + shapley_exact(b, x, bg).phi
        assert np.allclose(s, shapley_exact(both, x, bg).phi, rtol=0, atol=1e-9)


def test_too_many_features():
    schema = FeatureSchema(tuple(f"f{i}" for i in range(21)))
    model = BoostedModel(schema, 0.0, 1.0, (), BoostHyperparams())
    bgset = BackgroundSet(np.zeros((2, 21)), schema)
    with pytest.raises(TooManyFeatures):
        shapley_exact(model, np.zeros(21), bgset)


def test_schema_mismatch(small_model):
    other = BackgroundSet(np.zeros((2, 3)), FeatureSchema(("a", "b", "c")))
    with pytest.raises(SchemaMismatch):
        shapley_exact(small_model, np.zeros(8), other)
    with pytest.raises(SchemaMismatch):
        value_function(small_model, np.zeros(8), [9], BackgroundSet(np.zeros((1, 8)), CANONICAL_SCHEMA))


def test_background_sampling(small_split):
    tr = small_split[0]
    a = BackgroundSet.from_dataset(tr, 50, seed=3)
    b = BackgroundSet.from_dataset(tr, 50, seed=3)
    assert len(a) == 50 and np.array_equal(a.X, b.X)
    assert len(BackgroundSet.from_dataset(tr, 10_000)) == len(tr)
    with pytest.raises(EmptyInput):
        BackgroundSet(np.zeros((0, 8)), CANONICAL_SCHEMA)


def _exp(phi, i=0, margin=0.0):
    return Explanation(np.asarray(phi, dtype=float), 0.0, i, margin)


def test_mean_abs_shap():
    ranked = mean_abs_shap([_exp([0.1, -0.5, 0.0, 0.2, 0, 0, 0, 0])], CANONICAL_SCHEMA)
    assert ranked[0] == ("memory_usage", 0.5) and ranked[1] == ("network_latency", 0.2)
    zeros = mean_abs_shap([_exp(np.zeros(8))] * 3, CANONICAL_SCHEMA)
    assert [n for n, _ in zeros] == list(FEATURE_NAMES)
    with pytest.raises(EmptyInput):
        mean_abs_shap([], CANONICAL_SCHEMA)


def test_response_time_dominates_when_it_drives_labels():
    rng = np.random.default_rng(0)
    base = generate_synthetic(600, 0.0, 2)
    y = (base.X[:, RT] > 150).astype(int)
    ds = Dataset(base.X, y)
    model = train(ds, BoostHyperparams(num_rounds=20, max_depth=3))
    bgset = BackgroundSet.from_dataset(ds, 64, 0)
    idx = rng.choice(len(ds), 40, replace=False)
    ranked = mean_abs_shap(explain_dataset(model, ds, bgset, idx), ds.schema)
    assert ranked[0][0] == "response_time"


def test_weight_importance():
    assert [c for _, c in weight_importance(constant_model())] == [0] * 8
    stump = Split(3, 1.0, Leaf(0.1), Leaf(-0.1))
    model = BoostedModel(CANONICAL_SCHEMA, 0.0, 1.0, (stump,), BoostHyperparams())
    ranked = weight_importance(model)
    assert ranked[0] == ("network_latency", 1) and sum(c for _, c in ranked) == 1


def test_weight_importance_matches_tree_walk(small_model):
    counts = dict(weight_importance(small_model))
    recount = [0] * 8
    for tree in small_model.trees:
        for node in _walk(tree):
            if isinstance(node, Split):
                recount[node.feature_index] += 1
    assert [counts[n] for n in FEATURE_NAMES] == recount
    assert sum(recount) == sum(1 for t in small_model.trees for n in _walk(t) if isinstance(n, Split))


def test_beeswarm_single_sample():
    ds = generate_synthetic(5, 0.2, 0).subset([0])
    rows = beeswarm_data([_exp(np.arange(8))], ds)
    assert len(rows) == 8 and all(r.normalized_value == 0.5 for r in rows)


def test_beeswarm_two_samples():
    ds0 = generate_synthetic(5, 0.2, 0)
    X = np.vstack([ds0.X[0], ds0.X[0]])
    X[1, RT] += 10
    ds = Dataset(X, None)
    rows = beeswarm_data([_exp(np.zeros(8), 0), _exp(np.zeros(8), 1)], ds)
    assert len(rows) == 16
    rt = sorted(r.normalized_value for r in rows if r.feature == "response_time")
    assert rt == [0.0, 1.0]
    assert {r.normalized_value for r in rows if r.feature != "response_time"} == {0.5}


def test_beeswarm_alignment():
    ds = generate_synthetic(5, 0.2, 0)
    with pytest.raises(AlignmentMismatch):
        beeswarm_data([_exp(np.zeros(8), 7)], ds)


def test_dependence_explicit_color(small_model, bg, small_split):
    te = small_split[1]
    ex = explain_dataset(small_model, te, bg, range(30))
    cpu, lat = FEATURE_NAMES.index("cpu_usage"), FEATURE_NAMES.index("network_latency")
    table = dependence_data(ex, te, cpu, lat)
    assert table.color_feature == lat and len(table.rows) == 30
    x, phi, c = table.rows[4]
    assert x == te.X[4, cpu] and phi == ex[4].phi[cpu] and c == te.X[4, lat]


def test_dependence_auto_color():
    ds = generate_synthetic(20, 0.3, 1)
    flat = [_exp(np.ones(8), i) for i in range(20)]
    assert dependence_data(flat, ds, 0).color_feature == 1
    phi = ds.X[:, RT] * 0.01
    ex = [_exp(np.r_[phi[i], np.zeros(7)], i) for i in range(20)]
    assert dependence_data(ex, ds, 0).color_feature == RT


def test_dependence_bad_index():
    ds = generate_synthetic(5, 0.2, 0)
    with pytest.raises(BadFeatureIndex):
        dependence_data([_exp(np.zeros(8))], ds, 8)
    with pytest.raises(BadFeatureIndex):
        dependence_data([_exp(np.zeros(8))], ds, 0, -1)


def test_shap_csv_round_trip(small_model, bg, small_split, tmp_path):
    ex = explain_dataset(small_model, small_split[1], bg, range(5))
    p = tmp_path / "shap.csv"
    write_shap_csv(ex, small_model.schema, p)
    header = p.read_text().splitlines()[0].split(",")
    assert header[:3] == ["sample_index", "phi0", "phi_cpu_usage"]
    assert header[-3:] == ["phi_response_time", "margin", "efficiency_ok"]
    back = read_shap_csv(p, small_model.schema)
    for a, b in zip(ex, back):
        assert np.array_equal(a.phi, b.phi) and a.phi0 == b.phi0 and a.margin == b.margin
