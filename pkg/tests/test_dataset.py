import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tunesel.dataset import (DataError, Dataset, load_table, normalize_columns, panel_shape,
                             save_table, within_transform)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_four_rows(tmp_path):
    p = write(tmp_path / "d.csv", "y,x1\n1,2\n3,4\n5,6\n7,8\n")
    d = load_table(p, y="y")
    assert (d.n, d.p) == (4, 1)
    np.testing.assert_array_equal(d.y, [1, 3, 5, 7])
    np.testing.assert_array_equal(d.x[:, 0], [2, 4, 6, 8])
    assert d.col_names == ("x1",)


def test_blank_cell_is_reported_with_position(tmp_path):
    p = write(tmp_path / "d.csv", "y,x1\n1,2\n3,\n")
    with pytest.raises(DataError, match=r"non-numeric cell at \(2,2\)"):
        load_table(p, y="y")


def test_text_cell_rejected(tmp_path):
    p = write(tmp_path / "d.csv", "y,x1\n1,abc\n")
    with pytest.raises(DataError, match="non-numeric cell at"):
        load_table(p, y="y")


def test_cluster_labels_read_back(tmp_path):
    p = write(tmp_path / "d.csv", "y,x1,g\n1,2,a\n3,4,a\n5,6,b\n7,8,b\n")
    d = load_table(p, y="y", cluster="g")
    codes, G = d.groups()
    assert G == 2
    assert np.bincount(codes).tolist() == [2, 2]
    assert d.p == 1


@pytest.mark.parametrize("text,kw,msg", [
    ("y,x1\n1,2\n", {"y": "z"}, "unknown column"),
    ("y,x1\n", {"y": "y"}, "no data rows"),
    ("", {"y": "y"}, "empty"),
    ("y,x1\n1,2\n", {"y": "y", "x": ["q"]}, "unknown column"),
])
def test_load_errors(tmp_path, text, kw, msg):
    p = write(tmp_path / "d.csv", text)
    with pytest.raises(DataError, match=msg):
        load_table(p, **kw)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_table(tmp_path / "nope.csv", y="y")


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.ones((3, 1)), np.ones(4))
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan]]), [1.0])
    with pytest.raises(DataError):
        Dataset(np.ones((2, 1)), np.ones(2), cluster=["a"])
    with pytest.raises(DataError):
        Dataset(np.ones((2, 1)), np.ones(2), unit=["a", "b"])
    d = Dataset(np.ones((2, 1)), np.ones(2))
    with pytest.raises(ValueError):
        d.x[0, 0] = 5.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6, allow_nan=False),
                          st.floats(-1e6, 1e6, allow_nan=False)), min_size=1, max_size=20))
def test_save_load_round_trip_bit_exact(tmp_path_factory, rows):
    arr = np.array(rows)
    d = Dataset(arr[:, 1:], arr[:, 0], col_names=("a",))
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    save_table(d, path)
    back = load_table(path, y="y")
    assert back.x.tobytes() == d.x.tobytes()
    assert back.y.tobytes() == d.y.tobytes()


def test_normalize_columns():
    d = Dataset(np.array([[1.0, 0.0], [3.0, 2.0]]), [0.0, 1.0])
    out = normalize_columns(d)
    np.testing.assert_allclose(np.mean(out.x ** 2, axis=0), 1.0)
    with pytest.raises(DataError, match="all-zero"):
        normalize_columns(Dataset(np.zeros((2, 1)), [0.0, 1.0]))


def panel(N, T, seed=0, p=2):
    rng = np.random.default_rng(seed)
    unit = np.repeat([f"u{i}" for i in range(N)], T)
    time = np.tile(np.arange(T), N)
    return Dataset(rng.standard_normal((N * T, p)), rng.standard_normal(N * T),
                   unit=unit, time=time)


def test_within_two_point():
    d = Dataset(np.array([[0.0], [1.0]]), [1.0, 3.0], unit=["A", "A"], time=[1, 2])
    np.testing.assert_allclose(within_transform(d).y, [-1.0, 1.0])


def test_within_kills_unit_constants():
    d = panel(3, 4)
    x = np.column_stack([d.x[:, 0], np.repeat([5.0, -1.0, 2.0], 4)])
    out = within_transform(Dataset(x, d.y, unit=d.unit, time=d.time))
    assert np.all(out.x[:, 1] == 0)


def test_within_unit_means_zero_and_idempotent():
    d = panel(2, 3, seed=4)
    out = within_transform(d)
    codes, _, N, _ = panel_shape(out)
    for u in range(N):
        assert abs(out.y[codes == u].mean()) < 1e-12
    again = within_transform(out)
    np.testing.assert_allclose(again.x, out.x, atol=1e-12)
    np.testing.assert_allclose(again.y, out.y, atol=1e-12)
    np.testing.assert_array_equal(out.cluster, d.unit)


def test_within_errors():
    d = panel(3, 2)
    with pytest.raises(DataError, match="incomplete"):
        within_transform(d.subset(np.arange(5)))
    with pytest.raises(DataError, match="two time periods"):
        within_transform(panel(4, 1))
    with pytest.raises(DataError):
        within_transform(Dataset(np.ones((2, 1)), [1.0, 2.0]))
