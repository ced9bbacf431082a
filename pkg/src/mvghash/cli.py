"""Command-line front end.

Subcommands mirror the pipeline stages: filter, knn, train, encode, eval,
retrieve, ablate, sweep. Machine-readable JSON goes to stdout, diagnostics
to stderr. Exit codes: 0 success, 1 rejected input or failed run, 2 usage.

Flag precedence for hyperparameters: command line over --config file over
built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .fileio import InputError
from .filtering import smooth_views
from .model import HyperParams, SIM_KINDS
from .neighbors import build_neighbor_sets
from .losses import GRAD_MODES
from .retrieval import evaluation_report, rank_all
from .train import ABLATION_VARIANTS, AdamConfig, DivergenceError, TrainConfig, ablate, train

_HP_FIELDS = {f.name: f.type for f in dataclasses.fields(HyperParams)}
_EXTRA_FIELDS = ("grad_mode", "init_scale", "lambda_update_every", "normalize_rows", "threads")


def _emit(doc) -> None:
    print(json.dumps(doc, sort_keys=True))


def _add_hyper_flags(p: argparse.ArgumentParser, exclude=()) -> None:
    g = p.add_argument_group("hyperparameters (default: built-ins)")
    g.add_argument("--m", type=int, help="filter order")
    g.add_argument("--s", type=float, help="filter strength")
    g.add_argument("--k", type=int, help="neighbors per node")
    g.add_argument("--tau", type=float, help="softmax temperature")
    g.add_argument("--gamma", type=float, help="view-weight exponent")
    g.add_argument("--eta", type=float, help="view-weight regularizer")
    if "alpha" not in exclude:
        g.add_argument("--alpha", type=float, help="quantization weight")
    if "beta" not in exclude:
        g.add_argument("--beta", type=float, help="bit-balance weight")
    g.add_argument("--bits", type=int, help="code length")
    g.add_argument("--sim", dest="sim_kind", choices=SIM_KINDS, help="similarity kernel")
    g.add_argument("--epochs-max", dest="epochs_max", type=int, help="epoch cap")
    g.add_argument("--tol", type=float, help="relative objective tolerance")
    g.add_argument("--lr", type=float, help="Adam step size")
    g.add_argument("--seed", type=int, help="init seed")
    g.add_argument("--grad-mode", dest="grad_mode", choices=GRAD_MODES)
    g.add_argument("--init-scale", dest="init_scale", type=float)
    g.add_argument(
        "--lambda-every",
        dest="lambda_update_every",
        type=int,
        help="epochs between view-weight updates",
    )
    g.add_argument("--threads", type=int, help="worker threads (0 = auto)")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--config", help="JSON file of hyperparameter overrides")
    p.add_argument(
        "--normalize-rows",
        dest="normalize_rows",
        action="store_true",
        default=None,
        help="L2-normalize attribute rows on load (default: off)",
    )


def _load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"{path}: cannot read config ({exc})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: config is not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a JSON object")
    allowed = set(_HP_FIELDS) | set(_EXTRA_FIELDS)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise InputError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return doc


def _resolve_settings(args) -> dict:
    """defaults <- config file <- CLI flags, for hp fields and extras."""
    merged = {f.name: getattr(HyperParams(), f.name) for f in dataclasses.fields(HyperParams)}
    merged.update(
        {
            "grad_mode": "exact",
            "init_scale": None,
            "lambda_update_every": 1,
            "normalize_rows": False,
            "threads": None,
        }
    )
    if getattr(args, "config", None):
        merged.update(_load_config(args.config))
    for key in list(_HP_FIELDS) + list(_EXTRA_FIELDS):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _split_config(merged: dict) -> tuple[HyperParams, TrainConfig, bool]:
    hp = HyperParams(**{k: merged[k] for k in _HP_FIELDS})
    cfg = TrainConfig(
        hp=hp,
        adam=AdamConfig(lr=hp.lr),
        lambda_update_every=int(merged["lambda_update_every"]),
        init_scale=merged["init_scale"],
        grad_mode=merged["grad_mode"],
        threads=merged["threads"],
    )
    return hp, cfg, bool(merged["normalize_rows"])


def _config_snapshot(merged: dict) -> dict:
    snap = dict(merged)
    if snap["init_scale"] is None:
        snap["init_scale"] = 1.0 / float(np.sqrt(snap["bits"]))
    return snap


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"{flag} expects comma-separated numbers, got {text!r}") from None


# -- subcommand bodies -------------------------------------------------------


def _cmd_filter(args) -> int:
    merged = _resolve_settings(args)
    hp, cfg, norm = _split_config(merged)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    smoothed = smooth_views(ds, hp.m, hp.s)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for v, sv in enumerate(smoothed):
        path = out_dir / f"smoothed_view{v}.mvgf"
        fileio.write_features(path, sv)
        files.append(str(path))
    _emit({"files": files, "m": hp.m, "s": hp.s, "n": ds.n_nodes})
    return 0


def _cmd_knn(args) -> int:
    merged = _resolve_settings(args)
    hp, cfg, norm = _split_config(merged)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    smoothed = smooth_views(ds, hp.m, hp.s)
    tables = build_neighbor_sets(smoothed, hp.k, cfg.threads)
    fileio.save_neighbor_sets(tables, args.out)
    _emit(
        {
            "out": str(args.out),
            "n": ds.n_nodes,
            "k": int(tables[0].shape[1]),
            "views": len(tables),
        }
    )
    return 0


def _run_training(args, write_record: bool):
    merged = _resolve_settings(args)
    hp, cfg, norm = _split_config(merged)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    neighbor_sets = None
    if getattr(args, "neighbors", None):
        neighbor_sets = fileio.load_neighbor_sets(args.neighbors)
    out = Path(args.out)
    log_path = out.with_suffix(out.suffix + ".log.jsonl") if write_record else None
    t0 = time.perf_counter()
    state, codes = train(ds, cfg, neighbor_sets=neighbor_sets, log_file=log_path)
    wall = time.perf_counter() - t0
    fileio.save_codes(codes, out)
    metrics = {"epochs": len(state.history), "final_total": state.history[-1].weighted_total}
    if ds.labels is not None:
        report = evaluation_report(codes, ds.labels, threads=cfg.threads)
        metrics["map_at_all"] = report["map_at_all"]
        metrics["skipped_queries"] = report["skipped_queries"]
    reply = {"codes": str(out), **metrics}
    if write_record:
        record = {
            "config": _config_snapshot(merged),
            "dataset_digest": fileio.dataset_digest(args.manifest),
            "codes_path": str(out),
            "metrics": metrics,
            "log_path": str(log_path),
            "wall_seconds": wall,
        }
        record_path = out.with_suffix(out.suffix + ".run.json")
        record_path.write_text(
            json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        reply["run_record"] = str(record_path)
        reply["log"] = str(log_path)
    _emit(reply)
    return 0


def _cmd_train(args) -> int:
    return _run_training(args, write_record=True)


def _cmd_encode(args) -> int:
    return _run_training(args, write_record=False)


def _cmd_eval(args) -> int:
    merged = _resolve_settings(args)
    _, cfg, norm = _split_config(merged)
    codes = fileio.load_codes(args.codes)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    if ds.labels is None:
        raise InputError(f"{args.manifest}: evaluation needs labels")
    if codes.n != ds.n_nodes:
        raise InputError(
            f"{args.codes}: codes hold {codes.n} nodes, manifest says {ds.n_nodes}"
        )
    report = evaluation_report(codes, ds.labels, threads=cfg.threads)
    out = json.dumps(report, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


def _cmd_retrieve(args) -> int:
    codes = fileio.load_codes(args.codes)
    queries = _int_list(args.query, "--query")
    if not queries:
        raise InputError("--query lists no ids")
    top = args.top
    if top < 1 or top > codes.n - 1:
        raise InputError(f"--top must be in [1, {codes.n - 1}], got {top}")
    results = []
    for q in queries:
        if not 0 <= q < codes.n:
            raise InputError(f"query id {q} out of range for {codes.n} codes")
        r = rank_all(codes, q)
        results.append(
            {
                "query": q,
                "ids": [int(i) for i in r.ids[:top]],
                "distances": [int(d) for d in r.distances[:top]],
            }
        )
    _emit({"results": results, "bits": codes.bits})
    return 0


def _cmd_ablate(args) -> int:
    merged = _resolve_settings(args)
    hp, cfg, norm = _split_config(merged)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for variant in ABLATION_VARIANTS:
        state, codes = ablate(ds, cfg, variant)
        row = {
            "variant": variant,
            "epochs": len(state.history),
            "final_total": state.history[-1].weighted_total,
        }
        if ds.labels is not None:
            row["map_at_all"] = evaluation_report(codes, ds.labels, threads=cfg.threads)[
                "map_at_all"
            ]
        if out_dir is not None:
            path = out_dir / f"codes_{variant}.mvgh"
            fileio.save_codes(codes, path)
            row["codes"] = str(path)
        rows.append(row)
    _emit({"variants": rows, "bits": hp.bits, "dataset": ds.name})
    return 0


def _cmd_sweep(args) -> int:
    merged = _resolve_settings(args)
    hp, cfg, norm = _split_config(merged)
    ds = fileio.load_dataset(args.manifest, normalize_rows=norm)
    if ds.labels is None:
        raise InputError(f"{args.manifest}: sweep needs labels to score grid points")
    grid_default = [0.005, 0.01, 0.05, 0.1, 0.5, 1.0]
    alphas = _float_list(args.alpha_list, "--alpha") if args.alpha_list else grid_default
    betas = _float_list(args.beta_list, "--beta") if args.beta_list else grid_default
    bits_list = _int_list(args.bits_list, "--bits-list") if args.bits_list else [hp.bits]
    # filtering and kNN depend only on (m, s, k): shared across the grid
    smoothed = smooth_views(ds, hp.m, hp.s)
    neighbor_sets = build_neighbor_sets(smoothed, hp.k, cfg.threads)
    out = Path(args.out)
    best = None
    n_rows = 0
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("dataset,bits,alpha,beta,seed,epochs,map_at_all\n")
        for bits in bits_list:
            for alpha in alphas:
                for beta in betas:
                    hp_point = dataclasses.replace(hp, bits=bits, alpha=alpha, beta=beta)
                    cfg_point = dataclasses.replace(
                        cfg, hp=hp_point, adam=AdamConfig(lr=hp_point.lr)
                    )
                    state, codes = train(ds, cfg_point, neighbor_sets=neighbor_sets)
                    score = evaluation_report(codes, ds.labels, threads=cfg.threads)[
                        "map_at_all"
                    ]
                    fh.write(
                        f"{ds.name},{bits},{alpha:g},{beta:g},{hp.seed},"
                        f"{len(state.history)},{score:.6f}\n"
                    )
                    n_rows += 1
                    row = {
                        "bits": bits,
                        "alpha": alpha,
                        "beta": beta,
                        "map_at_all": score,
                    }
                    if best is None or score > best["map_at_all"]:
                        best = row
    _emit({"csv": str(out), "rows": n_rows, "best": best})
    return 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvghash",
        description="Binary hash codes for multi-view graph data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="write smoothed per-view features")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--out-dir", default=".", help="directory for smoothed_view*.mvgf")
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("knn", help="write per-view neighbor tables")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="neighbor cache file (.mvgn)")
    p.set_defaults(fn=_cmd_knn)

    p = sub.add_parser("train", help="learn codes; write codes, run record, log")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="codes file (.mvgh)")
    p.add_argument("--neighbors", help="reuse a neighbor cache from `knn`")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("encode", help="learn codes; write only the codes file")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="codes file (.mvgh)")
    p.add_argument("--neighbors", help="reuse a neighbor cache from `knn`")
    p.set_defaults(fn=_cmd_encode)

    p = sub.add_parser("eval", help="mAP/precision report for saved codes")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--codes", required=True)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("retrieve", help="top-r nearest codes for query ids")
    p.add_argument("--codes", required=True)
    p.add_argument("--query", required=True, help="comma-separated node ids")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(fn=_cmd_retrieve)

    p = sub.add_parser("ablate", help="run full/no_filter/no_quant/no_balance")
    _add_input_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--out-dir", help="save per-variant codes here")
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("sweep", help="grid over alpha, beta, bits; write CSV")
    _add_input_flags(p)
    _add_hyper_flags(p, exclude=("alpha", "beta"))
    p.add_argument("--alpha", dest="alpha_list", help="comma list (default 0.005,...,1)")
    p.add_argument("--beta", dest="beta_list", help="comma list (default 0.005,...,1)")
    p.add_argument("--bits-list", dest="bits_list", help="comma list of code lengths")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (InputError, ValueError, DivergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
