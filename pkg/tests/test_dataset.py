import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psdebug.dataset import (
    Dataset,
    NoiseSpec,
    Selector,
    gen_2gauss,
    gen_concentric,
    inject_noise,
    load_csv,
    save_csv,
    split,
)
from psdebug.errors import EmptySelection, InvalidArgument, ParseError


def test_2gauss_shape_and_balance():
    ds = gen_2gauss(1000, 6.0, 42)
    assert len(ds) == 1000 and ds.dim == 2
    assert np.sum(ds.y == -1) == 500 and np.sum(ds.y == 1) == 500


def test_2gauss_class_centres():
    ds = gen_2gauss(4000, 6.0, 3)
    assert np.allclose(ds.X[ds.y == -1].mean(axis=0), [-3, 0], atol=0.1)
    assert np.allclose(ds.X[ds.y == 1].mean(axis=0), [3, 0], atol=0.1)


def test_2gauss_minimal():
    ds = gen_2gauss(2, 6.0, 7)
    assert sorted(ds.y.tolist()) == [-1, 1]


def test_2gauss_deterministic():
    a, b = gen_2gauss(1000, 6.0, 42), gen_2gauss(1000, 6.0, 42)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert gen_2gauss(1000, 6.0, 43) != a


def test_2gauss_rejects_tiny():
    with pytest.raises(InvalidArgument):
        gen_2gauss(1, 6.0, 0)


def test_concentric_sizes():
    assert len(gen_concentric(2000, 1.0, 3.0, 42)) == 2000
    assert len(gen_concentric(2, 1.0, 3.0, 1)) == 2


def test_concentric_class_radii():
    ds = gen_concentric(2000, 1.0, 3.0, 42)
    r = np.linalg.norm(ds.X, axis=1)
    assert abs(r[ds.y == -1].mean() - 1.0) <= 0.1
    assert abs(r[ds.y == 1].mean() - 3.0) <= 0.3
    # most inner points are closer to the inner ring
    assert np.mean(np.abs(r[ds.y == -1] - 1.0) < np.abs(r[ds.y == -1] - 3.0)) > 0.99


def test_concentric_rejects_bad_radii():
    with pytest.raises(InvalidArgument):
        gen_concentric(10, 3.0, 1.0, 0)
    with pytest.raises(InvalidArgument):
        gen_concentric(10, 2.0, 2.0, 0)


def test_dataset_validation():
    with pytest.raises(InvalidArgument):
        Dataset(np.zeros((2, 2)), np.array([0, 1]))
    with pytest.raises(InvalidArgument):
        Dataset(np.array([[np.nan, 0.0]]), np.array([1]))
    with pytest.raises(InvalidArgument):
        Dataset(np.zeros((2, 2)), np.array([1]))


def test_dataset_is_immutable():
    ds = gen_2gauss(10, 6.0, 0)
    with pytest.raises(ValueError):
        ds.y[0] = 5
    flipped = ds.with_flipped([0])
    assert flipped.y[0] == -ds.y[0] and ds.y[0] != flipped.y[0]
    assert np.array_equal(flipped.X, ds.X)


# ---------------------------------------------------------------- CSV


def test_csv_single_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f1,f2,label\n0.5,-1.25,1\n")
    ds = load_csv(p)
    assert len(ds) == 1 and ds.dim == 2
    assert ds.X.tolist() == [[0.5, -1.25]] and ds.y.tolist() == [1]


@pytest.mark.parametrize(
    "text, line",
    [
        ("f1,f2,label\n0.5,-1.25,0\n", 2),
        ("f1,f2,label\n0.5,-1.25,1\n0.5,abc,1\n", 3),
        ("f1,f2,label\n0.5,1\n", 2),
        ("a,b,label\n0.5,1,1\n", 1),
        ("f1,f2\n0.5,1\n", 1),
        ("", 1),
    ],
)
def test_csv_errors_name_line(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert info.value.line == line
    assert f":{line}" in str(info.value)


def test_csv_round_trip(tmp_path):
    ds = gen_2gauss(100, 6.0, 1)
    save_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    assert back.allclose(ds, atol=1e-12)
    assert back == ds  # repr() floats round-trip exactly


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False), st.sampled_from([-1, 1])),
        min_size=1,
        max_size=20,
    )
)
def test_csv_round_trip_property(tmp_path_factory, rows):
    ds = Dataset(np.array([[a, b] for a, b, _ in rows]), np.array([c for _, _, c in rows]))
    path = tmp_path_factory.mktemp("csv") / "d.csv"
    save_csv(ds, path)
    assert load_csv(path) == ds


# -------------------------------------------------------------- split


def test_split_sizes():
    ds = gen_2gauss(1250, 6.0, 0)
    tr, te, va = split(ds, 0.8, 0.1, 3)
    assert (len(tr), len(te), len(va)) == (1000, 125, 125)


def test_split_partition_and_determinism():
    ds = gen_2gauss(101, 6.0, 0)
    parts = split(ds, 0.6, 0.2, 9)
    rows = np.vstack([p.X for p in parts])
    labels = np.concatenate([p.y for p in parts])
    key = lambda X, y: sorted(map(tuple, np.column_stack([X, y]).tolist()))
    assert key(rows, labels) == key(ds.X, ds.y)
    again = split(ds, 0.6, 0.2, 9)
    assert all(a == b for a, b in zip(parts, again))


@pytest.mark.parametrize("fr", [(0.0, 0.1), (0.8, 0.2), (0.9, 0.3), (-0.1, 0.5)])
def test_split_rejects_bad_fractions(fr):
    with pytest.raises(InvalidArgument):
        split(gen_2gauss(10, 6.0, 0), *fr)


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 300), st.floats(0.1, 0.6), st.floats(0.05, 0.3), st.integers(0, 2**32 - 1))
def test_split_sizes_within_one(n, a, b, seed):
    ds = gen_2gauss(n, 6.0, 0)
    tr, te, va = split(ds, a, b, seed)
    assert abs(len(tr) - a * n) <= 1 and abs(len(te) - b * n) <= 1
    assert len(tr) + len(te) + len(va) == n


# -------------------------------------------------------------- noise


def test_random_noise_exact_count():
    ds = gen_2gauss(1000, 6.0, 0)
    noisy, rec = inject_noise(ds, NoiseSpec("random", 0.1, seed=4))
    assert len(rec.flipped_indices) == 100
    changed = np.flatnonzero(noisy.y != ds.y)
    assert changed.tolist() == list(rec.flipped_indices)
    assert all(rec.original_labels[i] == ds.y[i] != noisy.y[i] for i in changed)


def test_noise_restore_is_inverse():
    ds = gen_2gauss(300, 6.0, 0)
    noisy, rec = inject_noise(ds, NoiseSpec("random", 0.2, seed=1))
    assert rec.restore(noisy) == ds


def test_systematic_noise_skips_no_op_flips():
    ds = gen_2gauss(1000, 6.0, 0)
    # left half of feature 1 is (almost) all label -1 already
    sel = Selector(0, "<", -4.0)
    assert ds.y[sel.matches(ds.X)].tolist() == [-1] * int(sel.matches(ds.X).sum())
    noisy, rec = inject_noise(ds, NoiseSpec("systematic", 0.1, sel, -1, 0))
    assert len(rec.flipped_indices) == 0 and noisy == ds


def test_systematic_noise_forces_label():
    ds = gen_2gauss(1000, 6.0, 0)
    sel = Selector(1, ">", 1.2816)
    noisy, rec = inject_noise(ds, NoiseSpec("systematic", 0.1, sel, -1, 0))
    mask = sel.matches(ds.X)
    assert np.all(noisy.y[mask] == -1)
    assert np.array_equal(noisy.y[~mask], ds.y[~mask])
    assert set(rec.flipped_indices) == set(np.flatnonzero(mask & (ds.y == 1)).tolist())


def test_systematic_noise_empty_selection():
    ds = gen_2gauss(100, 6.0, 0)
    with pytest.raises(EmptySelection):
        inject_noise(ds, NoiseSpec("systematic", 0.1, Selector(0, ">", 1e9), 1, 0))


def test_noise_spec_validation():
    with pytest.raises(InvalidArgument):
        NoiseSpec("systematic", 0.1)
    with pytest.raises(InvalidArgument):
        NoiseSpec("random", 0.7)
    with pytest.raises(InvalidArgument):
        inject_noise(gen_2gauss(4, 6.0, 0), NoiseSpec("random", 0.1))


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 400), st.floats(0.0, 0.5), st.integers(0, 10**6))
def test_random_noise_count_property(n, rate, seed):
    ds = gen_2gauss(n, 6.0, 0)
    k = int(round(rate * n))
    if k < 1:
        return
    noisy, rec = inject_noise(ds, NoiseSpec("random", rate, seed=seed))
    assert len(rec.flipped_indices) == k
    assert set(np.unique(noisy.y)) <= {-1, 1}
