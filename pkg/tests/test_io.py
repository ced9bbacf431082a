import json
import shutil

import numpy as np
import pytest

from conftest import tiny_dataset
from mvghash.fileio import (
    InputError,
    dataset_digest,
    load_codes,
    load_dataset,
    load_features,
    load_labels,
    load_manifest,
    load_matrix_market,
    load_neighbor_sets,
    normalize_attribute_rows,
    save_codes,
    save_neighbor_sets,
    write_dataset,
    write_features,
    write_labels,
    write_matrix_market,
)
from mvghash.model import BinaryCodes, SparseAdjacency, pack_codes


# -- Matrix Market -------------------------------------------------------------


def mm(tmp_path, text, name="a.mtx"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_mm_general_real(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real general\n"
        "% comment\n"
        "3 3 2\n"
        "1 2 1.5\n"
        "2 1 1.5\n",
    )
    adj = load_matrix_market(p)
    assert adj.n == 3
    assert adj.row.tolist() == [0, 1]
    assert adj.col.tolist() == [1, 0]
    assert adj.weight.tolist() == [1.5, 1.5]


def test_mm_symmetric_mirrors_entries(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 2.0\n3 1 4.0\n",
    )
    adj = load_matrix_market(p)
    dense = np.zeros((3, 3))
    dense[adj.row, adj.col] = adj.weight
    assert np.array_equal(dense, dense.T)
    assert dense[0, 1] == 2.0 and dense[0, 2] == 4.0


def test_mm_pattern_entries_get_unit_weight(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n",
    )
    adj = load_matrix_market(p)
    assert adj.weight.tolist() == [1.0, 1.0]


def test_mm_directed_input_is_max_symmetrized(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 1.0\n2 1 5.0\n",
    )
    adj = load_matrix_market(p)
    dense = np.zeros((3, 3))
    dense[adj.row, adj.col] = adj.weight
    assert dense[0, 1] == 5.0 and dense[1, 0] == 5.0


def test_mm_duplicates_sum_before_symmetrization(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n1 2 1.0\n1 2 2.0\n2 1 1.0\n",
    )
    adj = load_matrix_market(p)
    dense = np.zeros((2, 2))
    dense[adj.row, adj.col] = adj.weight
    # (1,2) accumulates to 3.0, then max with the reverse direction's 1.0
    assert dense[0, 1] == 3.0 and dense[1, 0] == 3.0


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("", ":1: empty file"),
        ("%%MatrixMarket matrix array real general\n1 1 0\n", "coordinate"),
        ("%%MatrixMarket matrix coordinate complex general\n1 1 0\n", "field"),
        ("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n", "symmetry"),
        ("%%MatrixMarket matrix coordinate real general\n2 3 0\n", "square"),
        ("%%MatrixMarket matrix coordinate real general\n2 2\n", "size line"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 x\n", "integers"),
        (
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n",
            "outside 1..2",
        ),
        (
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2\n",
            "expected 3 tokens",
        ),
        (
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 abc\n",
            "not a number",
        ),
        (
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 -3.0\n",
            "negative weight",
        ),
        (
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 1.0\n2 1 1.0\n",
            "trailing data",
        ),
    ],
)
def test_mm_rejects_malformed_input(tmp_path, text, fragment):
    with pytest.raises(InputError) as err:
        load_matrix_market(mm(tmp_path, text))
    assert fragment in str(err.value)


def test_mm_error_messages_carry_file_and_line(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 abc\n",
        name="edges.mtx",
    )
    with pytest.raises(InputError, match=r"edges\.mtx:3: "):
        load_matrix_market(p)


def test_mm_truncated_entry_list(tmp_path):
    p = mm(
        tmp_path,
        "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 2 1.0\n2 3 1.0\n",
    )
    with pytest.raises(
        InputError, match="unexpected end of file: size line promised 3 entries, got 2"
    ):
        load_matrix_market(p)


def test_mm_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    iu, ju = np.triu_indices(8, k=1)
    keep = rng.random(iu.size) < 0.4
    iu, ju = iu[keep], ju[keep]
    w = rng.uniform(0.5, 2.0, iu.size)
    adj = SparseAdjacency.from_entries(
        8,
        np.concatenate([iu, ju]),
        np.concatenate([ju, iu]),
        np.concatenate([w, w]),
    )
    path = tmp_path / "round.mtx"
    write_matrix_market(path, adj)
    back = load_matrix_market(path)
    assert back.n == adj.n
    assert np.array_equal(back.row, adj.row)
    assert np.array_equal(back.col, adj.col)
    assert np.array_equal(back.weight, adj.weight)


# -- attribute matrices ----------------------------------------------------------


def test_features_binary_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((7, 3)).astype(np.float32).astype(np.float64)
    p = tmp_path / "x.mvgf"
    write_features(p, x)
    back = load_features(p)
    assert back.dtype == np.float64
    assert np.array_equal(back, x)


def test_features_binary_rejects_corruption(tmp_path):
    p = tmp_path / "x.mvgf"
    write_features(p, np.ones((4, 2)))
    raw = p.read_bytes()

    truncated = tmp_path / "trunc.mvgf"
    truncated.write_bytes(raw[:-5])
    with pytest.raises(InputError, match="unexpected end of file"):
        load_features(truncated)

    padded = tmp_path / "padded.mvgf"
    padded.write_bytes(raw + b"\x00")
    with pytest.raises(InputError, match="trailing bytes"):
        load_features(padded)


def test_features_csv_with_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("f0,f1,f2\n1,2,3\n4,5,6\n", encoding="utf-8")
    assert np.array_equal(load_features(p), [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])


def test_features_csv_without_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1.5,2\n\n3,4\n", encoding="utf-8")
    assert np.array_equal(load_features(p), [[1.5, 2.0], [3.0, 4.0]])


def test_features_csv_rejects_ragged_and_non_numeric(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3,4,5\n", encoding="utf-8")
    with pytest.raises(InputError, match=r"ragged\.csv:2: row has 3 columns, expected 2"):
        load_features(ragged)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,4\n", encoding="utf-8")
    with pytest.raises(InputError, match=r"bad\.csv:2"):
        load_features(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("header,only\n", encoding="utf-8")
    with pytest.raises(InputError, match="no data rows"):
        load_features(empty)


# -- labels ----------------------------------------------------------------------


def test_labels_round_trip_and_validation(tmp_path):
    p = tmp_path / "labels.txt"
    write_labels(p, np.array([0, 2, 1]))
    assert load_labels(p).tolist() == [0, 2, 1]

    blank = tmp_path / "blank.txt"
    blank.write_text("0\n\n1\n", encoding="utf-8")
    assert load_labels(blank).tolist() == [0, 1]

    frac = tmp_path / "frac.txt"
    frac.write_text("0\n1.5\n", encoding="utf-8")
    with pytest.raises(InputError, match=r"frac\.txt:2: not an integer"):
        load_labels(frac)

    neg = tmp_path / "neg.txt"
    neg.write_text("0\n-2\n", encoding="utf-8")
    with pytest.raises(InputError, match="nonnegative"):
        load_labels(neg)

    empty = tmp_path / "none.txt"
    empty.write_text("\n", encoding="utf-8")
    with pytest.raises(InputError, match="no labels"):
        load_labels(empty)


# -- manifest and dataset assembly ------------------------------------------------


def test_manifest_validation_errors(tmp_path):
    p = tmp_path / "manifest.json"

    p.write_text("{", encoding="utf-8")
    with pytest.raises(InputError, match="not valid JSON"):
        load_manifest(p)

    p.write_text(json.dumps({"name": "x"}), encoding="utf-8")
    with pytest.raises(InputError, match="missing key 'n_nodes'"):
        load_manifest(p)

    doc = {"name": "x", "n_nodes": 2, "views": [], "format_version": 1}
    p.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(InputError, match="nonempty list"):
        load_manifest(p)

    doc["views"] = [{"attributes": "a.csv"}]
    p.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(InputError, match=r"views\[0\] missing path 'adjacency'"):
        load_manifest(p)

    doc["views"] = [{"attributes": "a.csv", "adjacency": "a.mtx"}]
    doc["format_version"] = 9
    p.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(InputError, match="format_version"):
        load_manifest(p)


def test_dataset_round_trip(tmp_path):
    ds = tiny_dataset(seed=11, n=10, n_views=2)
    manifest = write_dataset(tmp_path / "data", ds, attr_format="mvgf")
    back = load_dataset(manifest)
    assert back.n_nodes == 10
    assert back.n_views == 2
    assert back.name == "tiny"
    assert np.array_equal(back.labels, ds.labels)
    for orig, loaded in zip(ds.views, back.views):
        f32 = np.asarray(orig.attributes).astype(np.float32).astype(np.float64)
        assert np.array_equal(loaded.attributes, f32)
        assert np.array_equal(loaded.adjacency.row, orig.adjacency.row)
        assert np.array_equal(loaded.adjacency.weight, orig.adjacency.weight)


def test_dataset_round_trip_csv(tmp_path):
    ds = tiny_dataset(seed=12, n=8, n_views=1)
    manifest = write_dataset(tmp_path / "data", ds, attr_format="csv")
    back = load_dataset(manifest)
    assert np.allclose(back.views[0].attributes, ds.views[0].attributes, atol=0)


def test_shared_adjacency_loads_as_one_object(tmp_path):
    ds = tiny_dataset(seed=13, n=9, n_views=2)
    ds.views[1].adjacency = ds.views[0].adjacency
    manifest = write_dataset(tmp_path / "data", ds)
    doc = json.loads(manifest.read_text())
    assert doc["views"][0]["adjacency"] == doc["views"][1]["adjacency"]
    back = load_dataset(manifest)
    assert back.views[0].adjacency is back.views[1].adjacency


def test_normalize_rows_flag(tmp_path):
    ds = tiny_dataset(seed=14, n=8, n_views=1)
    manifest = write_dataset(tmp_path / "data", ds)
    plain = load_dataset(manifest)
    normed = load_dataset(manifest, normalize_rows=True)
    assert np.array_equal(
        normed.views[0].attributes, normalize_attribute_rows(plain.views[0].attributes)
    )
    norms = np.linalg.norm(normed.views[0].attributes, axis=1)
    assert np.allclose(norms, 1.0)


def test_labels_count_mismatch_is_rejected(tmp_path):
    ds = tiny_dataset(seed=15, n=8, n_views=1)
    manifest = write_dataset(tmp_path / "data", ds)
    write_labels(tmp_path / "data" / "labels.txt", np.zeros(5, dtype=np.int64))
    with pytest.raises(InputError, match="labels count mismatch: 5 ≠ N 8"):
        load_dataset(manifest)


def test_inconsistent_dataset_is_rejected_with_details(tmp_path):
    ds = tiny_dataset(seed=16, n=8, n_views=1)
    manifest = write_dataset(tmp_path / "data", ds)
    write_features(
        tmp_path / "data" / "view0_attrs.mvgf", np.zeros((9, 3))
    )  # wrong row count
    with pytest.raises(InputError, match="invalid dataset.*attribute rows 9"):
        load_dataset(manifest)


def test_digest_is_stable_and_content_sensitive(tmp_path):
    ds = tiny_dataset(seed=17, n=8, n_views=2)
    manifest = write_dataset(tmp_path / "data", ds)
    d1 = dataset_digest(manifest)
    assert d1 == dataset_digest(manifest)
    assert len(d1) == 64

    copied = tmp_path / "elsewhere"
    shutil.copytree(tmp_path / "data", copied)
    assert dataset_digest(copied / "manifest.json") == d1

    write_labels(tmp_path / "data" / "labels.txt", (ds.labels + 1) % 3)
    assert dataset_digest(manifest) != d1


# -- codes and neighbor caches -----------------------------------------------------


def test_codes_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    signs = np.where(rng.random((6, 17)) < 0.5, -1.0, 1.0)
    codes = pack_codes(signs, metadata={"seed": 3, "note": "x"})
    p = tmp_path / "codes.mvgh"
    save_codes(codes, p)
    back = load_codes(p)
    assert back.n == 6 and back.bits == 17
    assert np.array_equal(back.words, codes.words)
    assert back.metadata == {"seed": 3, "note": "x"}


def test_codes_corruption_is_rejected(tmp_path):
    codes = pack_codes(np.ones((3, 8)))
    p = tmp_path / "codes.mvgh"
    save_codes(codes, p)
    raw = p.read_bytes()

    wrong = tmp_path / "wrong.mvgh"
    wrong.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(InputError, match="bad magic.*expected MVGH"):
        load_codes(wrong)

    short = tmp_path / "short.mvgh"
    short.write_bytes(raw[:-3])
    with pytest.raises(InputError, match="unexpected end of file"):
        load_codes(short)

    padded = tmp_path / "padded.mvgh"
    padded.write_bytes(raw + b"!")
    with pytest.raises(InputError, match="trailing bytes"):
        load_codes(padded)


def test_codes_trailing_bits_must_be_zero(tmp_path):
    dirty = BinaryCodes(
        n=1, bits=4, words=np.array([[0xF0 | 0x05]], dtype=np.uint64), metadata={}
    )
    p = tmp_path / "dirty.mvgh"
    save_codes(dirty, p)
    with pytest.raises(InputError, match="nonzero trailing bits beyond bit 4"):
        load_codes(p)


def test_neighbor_cache_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    tables = [
        rng.integers(0, 30, size=(30, 5)).astype(np.int64),
        rng.integers(0, 30, size=(30, 5)).astype(np.int64),
    ]
    p = tmp_path / "cache.mvgn"
    save_neighbor_sets(tables, p)
    back = load_neighbor_sets(p)
    assert len(back) == 2
    for a, b in zip(tables, back):
        assert np.array_equal(a, b)
        assert b.dtype == np.int64


def test_neighbor_cache_errors(tmp_path):
    with pytest.raises(ValueError, match="disagree in shape"):
        save_neighbor_sets(
            [np.zeros((4, 2), dtype=np.int64), np.zeros((4, 3), dtype=np.int64)],
            tmp_path / "bad.mvgn",
        )
    p = tmp_path / "cache.mvgn"
    save_neighbor_sets([np.zeros((4, 2), dtype=np.int64)], p)
    raw = p.read_bytes()
    wrong = tmp_path / "wrong.mvgn"
    wrong.write_bytes(b"ZZZZ" + raw[4:])
    with pytest.raises(InputError, match="expected MVGN"):
        load_neighbor_sets(wrong)
    short = tmp_path / "short.mvgn"
    short.write_bytes(raw[:-2])
    with pytest.raises(InputError, match="unexpected end of file"):
        load_neighbor_sets(short)
