"""Dataset loading and artifact persistence.

Formats:
  manifest   JSON: {"name", "n_nodes", "views": [{"attributes", "adjacency"}],
             "labels"?, "format_version": 1}; paths resolve relative to the
             manifest's directory.
  adjacency  Matrix Market coordinate (real/integer/pattern x
             general/symmetric), 1-based; duplicates summed, then
             A <- max(A, A^T).
  attributes CSV (optional header) or MVGF: magic "MVGF", version u16,
             rows u64, cols u64, f32 little-endian row-major (widened to
             f64 on load).
  labels     one nonnegative integer per line.
  codes      MVGH: magic, version u16, n u64, bits u32, per-node u64
             little-endian words, then u32-length-prefixed JSON metadata.
  neighbors  MVGN: magic, version u16, n u64, k u32, views u32, then
             views*n*k u32 little-endian ids.

All parse failures carry file (and where line-oriented, line) context.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    BinaryCodes,
    MultiViewGraphDataset,
    SparseAdjacency,
    View,
    validate_dataset,
    words_per_code,
)

FEATURE_MAGIC = b"MVGF"
CODES_MAGIC = b"MVGH"
NEIGHBOR_MAGIC = b"MVGN"
FORMAT_VERSION = 1


class InputError(ValueError):
    """Malformed manifest, data file, or artifact."""


@dataclass(frozen=True)
class ViewPaths:
    attributes: Path
    adjacency: Path


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    n_nodes: int
    views: tuple[ViewPaths, ...]
    labels_path: Optional[Path]
    format_version: int


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read manifest ({exc})") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: manifest is not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: manifest must be a JSON object")
    for key in ("name", "n_nodes", "views", "format_version"):
        if key not in doc:
            raise InputError(f"{path}: manifest missing key {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise InputError(
            f"{path}: format_version must be {FORMAT_VERSION}, got {doc['format_version']!r}"
        )
    if not isinstance(doc["name"], str):
        raise InputError(f"{path}: name must be a string")
    if not isinstance(doc["n_nodes"], int) or isinstance(doc["n_nodes"], bool):
        raise InputError(f"{path}: n_nodes must be an integer")
    views_doc = doc["views"]
    if not isinstance(views_doc, list) or not views_doc:
        raise InputError(f"{path}: views must be a nonempty list")
    base = path.parent
    views = []
    for i, entry in enumerate(views_doc):
        if not isinstance(entry, dict):
            raise InputError(f"{path}: views[{i}] must be an object")
        for key in ("attributes", "adjacency"):
            if key not in entry or not isinstance(entry[key], str):
                raise InputError(f"{path}: views[{i}] missing path {key!r}")
        views.append(
            ViewPaths(
                attributes=(base / entry["attributes"]).resolve(),
                adjacency=(base / entry["adjacency"]).resolve(),
            )
        )
    labels_path = None
    if doc.get("labels") is not None:
        if not isinstance(doc["labels"], str):
            raise InputError(f"{path}: labels must be a path string")
        labels_path = (base / doc["labels"]).resolve()
    return DatasetManifest(
        name=doc["name"],
        n_nodes=doc["n_nodes"],
        views=tuple(views),
        labels_path=labels_path,
        format_version=doc["format_version"],
    )


# -- Matrix Market -----------------------------------------------------------

_MM_FIELDS = ("real", "integer", "pattern")
_MM_KINDS = ("general", "symmetric")


def load_matrix_market(path) -> SparseAdjacency:
    """Parse a coordinate-format adjacency; symmetrize as max(A, A^T)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"{path}: cannot read adjacency ({exc})") from None
    if not lines:
        raise InputError(f"{path}:1: empty file, expected a MatrixMarket header")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        raise InputError(f"{path}:1: expected '%%MatrixMarket matrix coordinate ...'")
    _, obj, fmt, field, kind = (tok.lower() for tok in header)
    if obj != "matrix" or fmt != "coordinate":
        raise InputError(f"{path}:1: only coordinate matrices are supported")
    if field not in _MM_FIELDS:
        raise InputError(f"{path}:1: field must be one of {_MM_FIELDS}, got {field!r}")
    if kind not in _MM_KINDS:
        raise InputError(f"{path}:1: symmetry must be one of {_MM_KINDS}, got {kind!r}")

    lineno = 1
    size = None
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        size = text.split()
        break
    if size is None:
        raise InputError(f"{path}: unexpected end of file, no size line")
    if len(size) != 3:
        raise InputError(f"{path}:{lineno}: size line must be 'rows cols nnz'")
    try:
        rows, cols, nnz = (int(tok) for tok in size)
    except ValueError:
        raise InputError(f"{path}:{lineno}: size line must hold integers") from None
    if rows != cols:
        raise InputError(f"{path}:{lineno}: adjacency must be square, got {rows}x{cols}")
    if rows < 1 or nnz < 0:
        raise InputError(f"{path}:{lineno}: bad dimensions {rows}x{cols} nnz {nnz}")

    r_out, c_out, w_out = [], [], []
    seen = 0
    for lineno, line in enumerate(lines[lineno:], start=lineno + 1):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        if seen == nnz:
            raise InputError(f"{path}:{lineno}: trailing data after {nnz} entries")
        tok = text.split()
        want = 2 if field == "pattern" else 3
        if len(tok) != want:
            raise InputError(
                f"{path}:{lineno}: expected {want} tokens for a {field} entry, got {len(tok)}"
            )
        try:
            i = int(tok[0])
            j = int(tok[1])
        except ValueError:
            raise InputError(f"{path}:{lineno}: indices must be integers") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise InputError(
                f"{path}:{lineno}: entry ({i}, {j}) outside 1..{rows}"
            )
        if field == "pattern":
            w = 1.0
        else:
            try:
                w = float(tok[2])
            except ValueError:
                raise InputError(f"{path}:{lineno}: weight {tok[2]!r} is not a number") from None
            if not np.isfinite(w):
                raise InputError(f"{path}:{lineno}: weight {tok[2]!r} is not finite")
            if w < 0:
                raise InputError(f"{path}:{lineno}: negative weight {w}")
        r_out.append(i - 1)
        c_out.append(j - 1)
        w_out.append(w)
        if kind == "symmetric" and i != j:
            r_out.append(j - 1)
            c_out.append(i - 1)
            w_out.append(w)
        seen += 1
    if seen != nnz:
        raise InputError(
            f"{path}: unexpected end of file: size line promised {nnz} entries, got {seen}"
        )
    adj = SparseAdjacency.from_entries(rows, r_out, c_out, w_out)
    return adj.maximum_symmetrized()


def write_matrix_market(path, adj: SparseAdjacency) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{adj.n} {adj.n} {adj.nnz}\n")
        for i, j, w in zip(adj.row, adj.col, adj.weight):
            fh.write(f"{int(i) + 1} {int(j) + 1} {float(w):.17g}\n")


# -- attribute matrices ------------------------------------------------------


def _read_exact(fh, size: int, path, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise InputError(f"{path}: unexpected end of file reading {what}")
    return data


def write_features(path, x: np.ndarray) -> None:
    """Write a dense matrix in the MVGF binary layout (f32 on disk)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {x.shape}")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<QQ", x.shape[0], x.shape[1]))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def _load_features_binary(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != FEATURE_MAGIC:
            raise InputError(
                f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC.decode()}"
            )
        (version,) = struct.unpack("<H", _read_exact(fh, 2, path, "version"))
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported version {version}")
        rows, cols = struct.unpack("<QQ", _read_exact(fh, 16, path, "dimensions"))
        payload = _read_exact(fh, rows * cols * 4, path, "matrix payload")
        extra = fh.read(1)
        if extra:
            raise InputError(f"{path}: trailing bytes after matrix payload")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return data.reshape(rows, cols)


def _load_features_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: neither MVGF binary nor UTF-8 CSV ({exc})") from None
    rows = []
    width = None
    first_data = True
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        toks = [t for t in text.split(",") if t.strip() != ""]
        if first_data:
            # header row: any token that does not parse as a number
            try:
                [float(t) for t in toks]
            except ValueError:
                first_data = False
                continue
        first_data = False
        try:
            row = [float(t) for t in toks]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(
                f"{path}:{lineno}: row has {len(row)} columns, expected {width}"
            )
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def load_features(path) -> np.ndarray:
    """Dense attribute matrix from MVGF binary or CSV, sniffed by magic."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise InputError(f"{path}: cannot read attributes ({exc})") from None
    if head == FEATURE_MAGIC:
        return _load_features_binary(path)
    return _load_features_csv(path)


# -- labels ------------------------------------------------------------------


def load_labels(path) -> np.ndarray:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"{path}: cannot read labels ({exc})") from None
    out = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            val = int(text)
        except ValueError:
            raise InputError(f"{path}:{lineno}: not an integer: {text!r}") from None
        if val < 0:
            raise InputError(f"{path}:{lineno}: labels must be nonnegative, got {val}")
        out.append(val)
    if not out:
        raise InputError(f"{path}: no labels")
    return np.asarray(out, dtype=np.int64)


def write_labels(path, labels) -> None:
    labels = np.asarray(labels)
    with open(path, "w", encoding="utf-8") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


# -- dataset assembly --------------------------------------------------------


def normalize_attribute_rows(x: np.ndarray) -> np.ndarray:
    """Row-L2 normalization; zero rows stay zero."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms == 0.0, 1.0, norms)


def load_dataset(manifest_path, normalize_rows: bool = False) -> MultiViewGraphDataset:
    """Load and fully validate a dataset.

    Views naming the same adjacency file share one SparseAdjacency object
    (and hence one Laplacian later). Row normalization is off by default;
    the flag's setting belongs in every run record.
    """
    manifest = load_manifest(manifest_path)
    adj_cache: dict[Path, SparseAdjacency] = {}
    views = []
    for vp in manifest.views:
        adj = adj_cache.get(vp.adjacency)
        if adj is None:
            adj = load_matrix_market(vp.adjacency)
            adj_cache[vp.adjacency] = adj
        x = load_features(vp.attributes)
        if normalize_rows:
            x = normalize_attribute_rows(x)
        views.append(View(attributes=x, adjacency=adj))
    labels = None
    if manifest.labels_path is not None:
        labels = load_labels(manifest.labels_path)
        if labels.shape[0] != manifest.n_nodes:
            raise InputError(
                f"{manifest.labels_path}: labels count mismatch: "
                f"{labels.shape[0]} ≠ N {manifest.n_nodes}"
            )
    ds = MultiViewGraphDataset(
        n_nodes=manifest.n_nodes, views=views, labels=labels, name=manifest.name
    )
    problems = validate_dataset(ds)
    if problems:
        raise InputError(f"{manifest_path}: invalid dataset: " + "; ".join(problems))
    return ds


def write_dataset(out_dir, ds: MultiViewGraphDataset, attr_format: str = "mvgf") -> Path:
    """Write a dataset plus manifest into a directory; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if attr_format not in ("mvgf", "csv"):
        raise ValueError(f"attr_format must be 'mvgf' or 'csv', got {attr_format!r}")
    views_doc = []
    written_adj: dict[int, str] = {}
    for v, view in enumerate(ds.views):
        if attr_format == "mvgf":
            attr_name = f"view{v}_attrs.mvgf"
            write_features(out_dir / attr_name, np.asarray(view.attributes))
        else:
            attr_name = f"view{v}_attrs.csv"
            x = np.asarray(view.attributes, dtype=np.float64)
            with open(out_dir / attr_name, "w", encoding="utf-8") as fh:
                for row in x:
                    fh.write(",".join(f"{val:.17g}" for val in row) + "\n")
        adj_name = written_adj.get(id(view.adjacency))
        if adj_name is None:
            adj_name = f"view{v}_adj.mtx"
            write_matrix_market(out_dir / adj_name, view.adjacency)
            written_adj[id(view.adjacency)] = adj_name
        views_doc.append({"attributes": attr_name, "adjacency": adj_name})
    doc = {
        "name": ds.name or out_dir.name,
        "n_nodes": ds.n_nodes,
        "views": views_doc,
        "format_version": FORMAT_VERSION,
    }
    if ds.labels is not None:
        write_labels(out_dir / "labels.txt", ds.labels)
        doc["labels"] = "labels.txt"
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def dataset_digest(manifest_path) -> str:
    """sha256 over the manifest and every referenced file, length-prefixed,
    in manifest order. Relative manifest paths keep the digest
    location-independent."""
    manifest = load_manifest(manifest_path)
    files = [Path(manifest_path)]
    for vp in manifest.views:
        files.append(vp.attributes)
        files.append(vp.adjacency)
    if manifest.labels_path is not None:
        files.append(manifest.labels_path)
    h = hashlib.sha256()
    for f in files:
        try:
            data = f.read_bytes()
        except OSError as exc:
            raise InputError(f"{f}: cannot read for digest ({exc})") from None
        h.update(struct.pack("<Q", len(data)))
        h.update(data)
    return h.hexdigest()


# -- binary codes ------------------------------------------------------------


def save_codes(codes: BinaryCodes, path) -> None:
    words = np.asarray(codes.words, dtype=np.uint64)
    expect = (codes.n, words_per_code(codes.bits))
    if words.shape != expect:
        raise ValueError(f"words shape {words.shape} does not match {expect}")
    meta = json.dumps(codes.metadata, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CODES_MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<Q", codes.n))
        fh.write(struct.pack("<I", codes.bits))
        fh.write(np.ascontiguousarray(words, dtype="<u8").tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def load_codes(path) -> BinaryCodes:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != CODES_MAGIC:
            raise InputError(
                f"{path}: bad magic {magic!r}, expected {CODES_MAGIC.decode()}"
            )
        (version,) = struct.unpack("<H", _read_exact(fh, 2, path, "version"))
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported version {version}")
        (n,) = struct.unpack("<Q", _read_exact(fh, 8, path, "node count"))
        (bits,) = struct.unpack("<I", _read_exact(fh, 4, path, "bit width"))
        if n < 1 or bits < 1:
            raise InputError(f"{path}: bad dimensions n {n} bits {bits}")
        w = words_per_code(bits)
        payload = _read_exact(fh, n * w * 8, path, "code words")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "metadata length"))
        meta_raw = _read_exact(fh, meta_len, path, "metadata")
        extra = fh.read(1)
        if extra:
            raise InputError(f"{path}: trailing bytes after metadata")
    words = np.frombuffer(payload, dtype="<u8").astype(np.uint64).reshape(n, w)
    if bits % 64:
        mask = np.uint64((1 << (bits % 64)) - 1)
        if (words[:, -1] & ~mask).any():
            raise InputError(f"{path}: nonzero trailing bits beyond bit {bits}")
    try:
        metadata = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: metadata is not valid JSON ({exc})") from None
    return BinaryCodes(n=int(n), bits=int(bits), words=words, metadata=metadata)


# -- neighbor caches ---------------------------------------------------------


def save_neighbor_sets(neighbor_sets: list[np.ndarray], path) -> None:
    if not neighbor_sets:
        raise ValueError("no neighbor tables to save")
    shapes = {a.shape for a in map(np.asarray, neighbor_sets)}
    if len(shapes) != 1:
        raise ValueError(f"neighbor tables disagree in shape: {sorted(shapes)}")
    n, k = shapes.pop()
    with open(path, "wb") as fh:
        fh.write(NEIGHBOR_MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<Q", n))
        fh.write(struct.pack("<I", k))
        fh.write(struct.pack("<I", len(neighbor_sets)))
        for table in neighbor_sets:
            fh.write(np.ascontiguousarray(table, dtype="<u4").tobytes())


def load_neighbor_sets(path) -> list[np.ndarray]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != NEIGHBOR_MAGIC:
            raise InputError(
                f"{path}: bad magic {magic!r}, expected {NEIGHBOR_MAGIC.decode()}"
            )
        (version,) = struct.unpack("<H", _read_exact(fh, 2, path, "version"))
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported version {version}")
        (n,) = struct.unpack("<Q", _read_exact(fh, 8, path, "node count"))
        (k,) = struct.unpack("<I", _read_exact(fh, 4, path, "neighbor count"))
        (n_views,) = struct.unpack("<I", _read_exact(fh, 4, path, "view count"))
        if n < 2 or k < 1 or n_views < 1:
            raise InputError(f"{path}: bad dimensions n {n} k {k} views {n_views}")
        out = []
        for _ in range(n_views):
            payload = _read_exact(fh, n * k * 4, path, "neighbor table")
            table = np.frombuffer(payload, dtype="<u4").astype(np.int64).reshape(n, k)
            out.append(table)
        extra = fh.read(1)
        if extra:
            raise InputError(f"{path}: trailing bytes after neighbor tables")
    return out
