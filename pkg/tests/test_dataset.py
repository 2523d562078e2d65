import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssi.dataset import (
    STD_FLOOR,
    Dataset,
    DatasetError,
    Label,
    StandardizationParams,
    apply_standardizer,
    fit_standardizer,
    group_by_subject,
    load_csv,
    save_csv,
    split_by_label,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def _ds(X, y, subjects=None):
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    subjects = subjects or [f"s{i}" for i in range(len(y))]
    return Dataset(X, np.asarray(y, bool), tuple(subjects), tuple(f"f{j}" for j in range(X.shape[1])))


def test_load_two_rows(tmp_path):
    p = _write(tmp_path, "subject_id,label,a,b\ns1,1,0.5,1.0\ns2,0,-0.5,0.0\n")
    d = load_csv(p)
    assert len(d) == 2 and d.dim == 2
    assert d.feature_names == ("a", "b")
    assert d.label(0) is Label.POSITIVE and d.label(1) is Label.NEGATIVE
    np.testing.assert_array_equal(d.X, [[0.5, 1.0], [-0.5, 0.0]])


def test_scientific_notation(tmp_path):
    d = load_csv(_write(tmp_path, "subject_id,label,a\ns,1,1.5e-3\n"))
    assert d.X[0, 0] == 1.5e-3


def test_bad_label_names_row_and_column(tmp_path):
    p = _write(tmp_path, "subject_id,label,a\ns1,2,0.5\n")
    with pytest.raises(DatasetError, match=r"row 1, column 'label'"):
        load_csv(p)


@pytest.mark.parametrize("cell", ["NaN", "inf", "-Infinity"])
def test_non_finite_feature_rejected(tmp_path, cell):
    with pytest.raises(DatasetError, match="non-finite"):
        load_csv(_write(tmp_path, f"subject_id,label,a\ns1,1,{cell}\n"))


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("", "empty file"),
        ("subject_id,label\n", "header"),
        ("label,subject_id,a\n", "header"),
        ("subject_id,label,a,a\ns,1,1,2\n", "duplicate"),
        ("subject_id,label,a\ns,1,x\n", r"row 1, column 'a'"),
        ("subject_id,label,a\ns,1,1\ns,1\n", "row 2 has 2 columns"),
        ("subject_id,label,a\n", "no data rows"),
    ],
)
def test_malformed_files(tmp_path, text, pattern):
    with pytest.raises(DatasetError, match=pattern):
        load_csv(_write(tmp_path, text))


def test_load_is_deterministic_and_round_trips(tmp_path, two_subgroup_train):
    data, _ = two_subgroup_train
    p = tmp_path / "rt.csv"
    save_csv(data, p)
    a, b = load_csv(p), load_csv(p)
    assert a.equals(b)
    assert a.equals(data)


def test_dataset_is_immutable():
    d = _ds([[1.0], [2.0]], [1, 0])
    with pytest.raises(ValueError):
        d.X[0, 0] = 5.0


@pytest.mark.parametrize(
    "column, mean, std",
    [
        ([1, 3], 2.0, 1.0),
        ([5, 5, 5], 5.0, STD_FLOOR),
        ([0, 0, 6, 6], 3.0, 3.0),
    ],
)
def test_fit_standardizer_examples(column, mean, std):
    p = fit_standardizer(_ds(column, [1] * len(column)))
    assert p.mean[0] == pytest.approx(mean)
    assert p.stddev[0] == pytest.approx(std)


def test_apply_standardizer_value():
    d = _ds([[3.0]], [1])
    out = apply_standardizer(d, StandardizationParams([2.0], [1.0]))
    assert out.X[0, 0] == 1.0
    assert out.subject_ids == d.subject_ids and np.array_equal(out.y, d.y)


def test_apply_standardizer_dimension_mismatch():
    with pytest.raises(DatasetError, match="dimension"):
        apply_standardizer(_ds([[1.0, 2.0]], [1]), StandardizationParams([0.0], [1.0]))


def test_empty_standardizer_rejected():
    d = Dataset(np.zeros((0, 2)), np.zeros(0, bool), (), ("a", "b"))
    with pytest.raises(DatasetError):
        fit_standardizer(d)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 4)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_standardize_zero_mean_unit_std_and_round_trip(X):
    d = _ds(X, [1] * len(X))
    p = fit_standardizer(d)
    Z = apply_standardizer(d, p).X
    live = X.std(axis=0) > 1e-6
    assert np.all(np.abs(Z[:, live].mean(axis=0)) < 1e-9)
    assert np.allclose(Z[:, live].std(axis=0), 1.0, atol=1e-9)
    np.testing.assert_allclose(p.inverse(Z), X, atol=1e-9)


def test_split_by_label():
    P, N = split_by_label(_ds([[0], [1], [2]], [1, 0, 1]))
    assert P.tolist() == [0, 2] and N.tolist() == [1]
    P, N = split_by_label(_ds([[0], [1]], [0, 0]))
    assert P.size == 0 and N.tolist() == [0, 1]


@given(st.lists(st.booleans(), min_size=1, max_size=50))
def test_split_partitions_indices(labels):
    P, N = split_by_label(_ds(np.zeros(len(labels)), labels))
    assert len(P) + len(N) == len(labels)
    assert sorted(P.tolist() + N.tolist()) == list(range(len(labels)))


def test_group_by_subject():
    d = _ds([[0], [1], [2]], [1, 0, 1], ["s1", "s2", "s1"])
    assert group_by_subject(d) == {"s1": [0, 2], "s2": [1]}


def test_group_by_subject_mixed_labels():
    d = _ds([[0], [1]], [1, 0], ["s1", "s1"])
    with pytest.raises(DatasetError, match="both labels"):
        group_by_subject(d)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=40))
def test_groups_partition_indices(subject_nums):
    subjects = [f"s{k}" for k in subject_nums]
    labels = [k % 2 == 0 for k in subject_nums]
    groups = group_by_subject(_ds(np.zeros(len(labels)), labels, subjects))
    flat = sorted(i for idx in groups.values() for i in idx)
    assert flat == list(range(len(labels)))
    for idx in groups.values():
        assert idx == sorted(idx)
