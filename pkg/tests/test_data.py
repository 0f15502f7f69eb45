import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgehealth.data import (
    FEATURE_NAMES,
    FEATURE_RANGES,
    LABEL_COLUMN,
    Dataset,
    FeatureSchema,
    TelemetrySample,
    generate_synthetic,
    load_csv,
    split_indices,
    train_test_split,
    write_csv,
)
from edgehealth.errors import BadParameter, BadValue, EmptyDataset, MissingColumn, SchemaMismatch

HEADER = ",".join(FEATURE_NAMES) + "," + LABEL_COLUMN
ROW = "0.5,0.4,80,20,120,55,120,150"


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_labeled_rows(tmp_path):
    p = write(tmp_path, f"{HEADER}\n{ROW},1\n{ROW},0\n{ROW},1\n")
    ds = load_csv(p)
    assert len(ds) == 3
    assert ds.y.tolist() == [1, 0, 1]
    assert ds.X[0].tolist() == [0.5, 0.4, 80, 20, 120, 55, 120, 150]


def test_columns_matched_by_name(tmp_path):
    cols = list(reversed(FEATURE_NAMES))
    vals = list(reversed(ROW.split(",")))
    p = write(tmp_path, ",".join(cols) + "\n" + ",".join(vals) + "\n")
    ds = load_csv(p)
    assert not ds.labeled
    assert ds.X[0].tolist() == [0.5, 0.4, 80, 20, 120, 55, 120, 150]


def test_missing_column(tmp_path):
    header = ",".join(n for n in FEATURE_NAMES if n != "response_time")
    p = write(tmp_path, header + "\n0.5,0.4,80,20,120,55,120\n")
    with pytest.raises(MissingColumn) as exc:
        load_csv(p)
    assert exc.value.column == "response_time"


def test_out_of_range_is_error(tmp_path):
    p = write(tmp_path, f"{HEADER}\n{ROW},1\n1.7,0.4,80,20,120,55,120,150,1\n")
    with pytest.raises(BadValue) as exc:
        load_csv(p)
    assert (exc.value.row, exc.value.column) == (2, "cpu_usage")


@pytest.mark.parametrize(
    "row, column",
    [
        ("abc,0.4,80,20,120,55,120,150,1", "cpu_usage"),
        ("0.5,0.4,80,20,120,55,120,nan,1", "response_time"),
        ("0.5,0.4,80,20,120,-21,120,150,1", "temperature"),
        ("0.5,0.4,80,20,120,55,120,150,2", LABEL_COLUMN),
        ("0.5,0.4,-1,20,120,55,120,150,1", "disk_io"),
    ],
)
def test_bad_values(tmp_path, row, column):
    p = write(tmp_path, f"{HEADER}\n{row}\n")
    with pytest.raises(BadValue) as exc:
        load_csv(p)
    assert exc.value.column == column


def test_empty_dataset(tmp_path):
    with pytest.raises(EmptyDataset):
        load_csv(write(tmp_path, HEADER + "\n"))


def test_round_trip(tmp_path):
    ds = generate_synthetic(50, 0.3, seed=11)
    a = tmp_path / "a.csv"
    write_csv(ds, a)
    again = load_csv(a)
    assert np.allclose(again.X, ds.X, rtol=1e-11, atol=0)
    b = tmp_path / "b.csv"
    write_csv(again, b)
    assert a.read_bytes() == b.read_bytes()
    assert again.y.tolist() == ds.y.tolist()


def test_generate_deterministic(tmp_path):
    a, b = generate_synthetic(1000, 0.3, 42), generate_synthetic(1000, 0.3, 42)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    write_csv(a, tmp_path / "a.csv")
    write_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert not generate_synthetic(1000, 0.3, 43).equals(a)


def test_generate_rate_zero():
    ds = generate_synthetic(100, 0.0, 7)
    assert len(ds) == 100 and (ds.y == 1).all()


def test_generate_balance_and_ranges():
    ds = generate_synthetic(10000, 0.3, 1)
    assert int((ds.y == 0).sum()) == 3000 and int((ds.y == 1).sum()) == 7000
    for j, name in enumerate(FEATURE_NAMES):
        lo, hi = FEATURE_RANGES[name]
        assert ds.X[:, j].min() >= lo and ds.X[:, j].max() <= hi
    pc = ds.X[:, FEATURE_NAMES.index("process_count")]
    assert np.array_equal(pc, np.round(pc))


def test_anomalies_shift_signature_features():
    ds = generate_synthetic(4000, 0.5, 5)
    rt = FEATURE_NAMES.index("response_time")
    mem = FEATURE_NAMES.index("memory_usage")
    assert ds.X[ds.y == 0, rt].mean() > ds.X[ds.y == 1, rt].mean() + 20
    # memory_usage is never perturbed
    assert abs(ds.X[ds.y == 0, mem].mean() - ds.X[ds.y == 1, mem].mean()) < 0.02


@pytest.mark.parametrize("n, rate", [(1, 0.3), (10, -0.1), (10, 1.5)])
def test_generate_bad_parameters(n, rate):
    with pytest.raises(BadParameter):
        generate_synthetic(n, rate, 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200), rate=st.floats(0, 1))
def test_generated_samples_satisfy_invariants(seed, n, rate):
    ds = generate_synthetic(n, rate, seed)
    assert len(ds) == n
    assert int((ds.y == 0).sum()) == math.floor(n * rate + 0.5)
    for i in range(len(ds)):
        ds.sample(i)  # re-validates ranges and label


def test_split_stratified_example():
    X = np.tile(generate_synthetic(10, 0.5, 0).X[:1], (10, 1))
    ds = Dataset(X, [0, 1] * 5)
    train, test = train_test_split(ds, 0.2, 0)
    assert len(train) == 8 and len(test) == 2
    assert sorted(test.y.tolist()) == [0, 1]


def test_split_bad_fraction():
    ds = generate_synthetic(10, 0.5, 0)
    for frac in (0.0, 1.0, -0.5):
        with pytest.raises(BadParameter):
            train_test_split(ds, frac, 0)


def test_split_degenerate():
    ds = generate_synthetic(2, 0.5, 0)
    with pytest.raises(EmptyDataset):
        train_test_split(ds, 0.1, 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(4, 120), frac=st.floats(0.1, 0.9))
def test_split_partition_property(seed, n, frac):
    ds = generate_synthetic(n, 0.4, seed)
    try:
        tr, te = split_indices(ds, frac, seed)
    except EmptyDataset:
        return
    assert len(tr) + len(te) == n
    assert len(set(tr.tolist()) | set(te.tolist())) == n
    assert (np.diff(tr) > 0).all() and (np.diff(te) > 0).all()
    tr2, te2 = split_indices(ds, frac, seed)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)


def test_unlabeled_split():
    ds = Dataset(generate_synthetic(20, 0.3, 0).X)
    tr, te = train_test_split(ds, 0.25, 1)
    assert (len(tr), len(te)) == (15, 5) and not tr.labeled


def test_sample_validation():
    TelemetrySample((0.5, 0.4, 80, 20, 120, 55, 120, 150), 1)
    with pytest.raises(BadValue):
        TelemetrySample((0.5, 0.4, 80, 20, 120, 55, 120, 150), 3)
    with pytest.raises(BadValue):
        TelemetrySample((0.5, 0.4, 80, 20, 120, 55, 120, math.inf))
    with pytest.raises(SchemaMismatch):
        TelemetrySample((0.5, 0.4))


def test_dataset_is_read_only():
    ds = generate_synthetic(10, 0.3, 0)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 0.1


def test_schema_rejects_duplicates():
    with pytest.raises(BadParameter):
        FeatureSchema(("a", "a"))
