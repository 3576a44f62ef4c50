import logging

import numpy as np
import pytest

from scripts.dataset import LabeledDataset, load_assays, replace_zeros, split, write_assays
from scripts.errors import ClassTooSmall, InvalidParameter, IoError, MissingColumn, ParseError, ZeroHandlingError
from scripts.simplex import PART_NAMES

HEADER = ",".join(PART_NAMES) + ",geozone,group\n"
ROW_99_2 = "55.0,8.0,3.0,0.1,25.0,0.5,1.0,0.6,5.0,1.0"


def write_csv(tmp_path, rows, header=HEADER):
    path = tmp_path / "assays.csv"
    path.write_text(header + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def indexed_dataset(n_classes, per_class, seed=0):
    """Dataset whose first part encodes the row number."""
    n = n_classes * per_class
    rows = np.arange(n, dtype=float)
    parts = np.column_stack([rows + 1.0, np.full(n, 1.0), np.full(n, 2.0)])
    labels = np.repeat([f"z{c:02d}" for c in range(n_classes)], per_class)
    return LabeledDataset(
        compositions=parts / parts.sum(axis=1, keepdims=True),
        labels=labels,
        groups=np.full(n, "U"),
        part_names=("a", "b", "c"),
    )


def row_ids(data):
    c = data.compositions
    return np.round(c[:, 0] / c[:, 1] - 1.0).astype(int)


def test_rows_are_closed(tmp_path):
    path = write_csv(tmp_path, [f"{ROW_99_2},GZ01,M", f"{ROW_99_2},GZ02,U"])
    data = load_assays(path)
    assert len(data) == 2
    np.testing.assert_allclose(data.compositions.sum(axis=1), 1.0, atol=1e-12)
    assert data.compositions[0, 0] == pytest.approx(55.0 / 99.2)
    assert data.labels.tolist() == ["GZ01", "GZ02"]
    assert data.group_map().group_of("GZ02") == "U"


def test_zero_assays_are_replaced(tmp_path, caplog):
    zero_row = "60.0,0,3.0,0.1,25.0,0.5,1.0,0.6,5.0,4.8"
    path = write_csv(tmp_path, [f"{zero_row},GZ01,M", f"{ROW_99_2},GZ01,M"])
    with caplog.at_level(logging.WARNING):
        data = load_assays(path)
    assert data.zero_replacements == 1
    assert data.compositions[0, 1] == pytest.approx(1e-6 / (1 + 1e-6))
    assert np.all(data.compositions > 0)
    np.testing.assert_allclose(data.compositions.sum(axis=1), 1.0, atol=1e-12)
    assert "replaced 1 zero" in caplog.text


def test_malformed_cell_names_row_and_column(tmp_path):
    bad = ROW_99_2.replace("8.0", "8.o", 1)
    path = write_csv(tmp_path, [f"{ROW_99_2},GZ01,M", f"{bad},GZ01,M"])
    with pytest.raises(ParseError) as err:
        load_assays(path)
    assert err.value.row == 3
    assert err.value.column == "SiO2"


def test_negative_and_empty_values_rejected(tmp_path):
    path = write_csv(tmp_path, [ROW_99_2.replace("3.0", "-3.0") + ",GZ01,M"])
    with pytest.raises(ParseError):
        load_assays(path)
    path = write_csv(tmp_path, [ROW_99_2.replace("3.0", "") + ",GZ01,M"])
    with pytest.raises(ParseError):
        load_assays(path)


def test_all_zero_row(tmp_path):
    path = write_csv(tmp_path, [",".join(["0"] * 10) + ",GZ01,M"])
    with pytest.raises(ZeroHandlingError):
        load_assays(path)


def test_missing_column(tmp_path):
    header = HEADER.replace(",S,", ",")
    path = write_csv(tmp_path, [ROW_99_2.rsplit(",", 1)[0] + ",GZ01,M"], header=header)
    with pytest.raises(MissingColumn):
        load_assays(path)


def test_group_checks(tmp_path):
    with pytest.raises(ParseError):
        load_assays(write_csv(tmp_path, [f"{ROW_99_2},GZ01,X"]))
    with pytest.raises(ParseError):
        load_assays(write_csv(tmp_path, [f"{ROW_99_2},GZ01,M", f"{ROW_99_2},GZ01,U"]))


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_assays(tmp_path / "nope.csv")


def test_empty_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError) as err:
        load_assays(empty)
    assert err.value.row == 1
    with pytest.raises(ParseError) as err:
        load_assays(write_csv(tmp_path, []))
    assert err.value.row == 2


def test_write_then_load(tmp_path, compositions):
    labels = np.array([f"GZ{i % 4}" for i in range(len(compositions))])
    groups = np.array(["M", "H", "U", "U"])[np.arange(len(compositions)) % 4]
    data = LabeledDataset(compositions, labels, groups)
    path = write_assays(data, tmp_path / "out" / "assays.csv")
    loaded = load_assays(path)
    np.testing.assert_allclose(loaded.compositions, compositions, rtol=1e-9)
    np.testing.assert_array_equal(loaded.labels, labels)
    np.testing.assert_array_equal(loaded.groups, groups)


def test_replace_zeros_keeps_positive_rows():
    values = np.array([[2.0, 1.0, 1.0]])
    closed, n = replace_zeros(values)
    assert n == 0
    np.testing.assert_allclose(closed, [[0.5, 0.25, 0.25]])


def test_split_sizes():
    data = indexed_dataset(50, 700)
    train, test = split(data, 0.6, stratified=True, seed=1)
    assert len(train) == 21000 and len(test) == 14000
    for zone in np.unique(data.labels):
        assert np.sum(train.labels == zone) == 420


def test_split_partitions_rows():
    data = indexed_dataset(7, 13)
    for stratified in (True, False):
        train, test = split(data, 0.6, stratified=stratified, seed=5)
        a, b = row_ids(train), row_ids(test)
        assert not set(a) & set(b)
        assert sorted(np.concatenate([a, b]).tolist()) == list(range(len(data)))


def test_stratified_shares_within_one_sample():
    data = indexed_dataset(7, 13)
    train, _ = split(data, 0.6, seed=2)
    for zone in np.unique(data.labels):
        assert abs(np.sum(train.labels == zone) - 0.6 * 13) <= 1


def test_split_is_seeded():
    data = indexed_dataset(5, 20)
    a, _ = split(data, 0.6, seed=11)
    b, _ = split(data, 0.6, seed=11)
    c, _ = split(data, 0.6, seed=12)
    np.testing.assert_array_equal(row_ids(a), row_ids(b))
    assert not np.array_equal(row_ids(a), row_ids(c))


def test_split_errors():
    data = indexed_dataset(3, 5)
    tiny = data.subset(np.arange(11))
    with pytest.raises(ClassTooSmall):
        split(tiny, 0.6)
    with pytest.raises(InvalidParameter):
        split(data, 1.0)
