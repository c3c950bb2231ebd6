"""Batch benchmark runner and report generator.

Subcommands:

* ``preprocess`` - fit a reducer and cache encoder-ready features.
* ``run``        - execute a (cell x seed) benchmark grid from an INI
  config; writes one JSON record per run to ``runs.jsonl``.
* ``report``     - aggregate a records directory into CSV/Markdown
  tables, filter-sweep series and loss-curve CSVs.
* ``gradcheck``  - parameter-shift vs finite-difference audit.
* ``census``     - parameter-count audit for every model family.

Exit codes: 0 ok, 1 audit failure, 2 config error, 3 missing data.
The dataset root comes from --data-root, the config, or the
``QCNNBENCH_DATA_ROOT`` environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import ansatz as anz
from . import cnn as cnn_mod
from . import data as data_mod
from . import model as model_mod
from . import preprocess as prep
from . import training as tr
from .encoding import default_spec

DATA_ROOT_ENV = "QCNNBENCH_DATA_ROOT"

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_NODATA = 3

VALID_REDUCTIONS = {
    "amplitude": ("bilinear",),
    "qubit": ("pca", "autoenc"),
    "dense": ("pca", "autoenc"),
    "hde": ("pca", "autoenc"),
    "hae": ("pca", "autoenc"),
}

# expected structural censuses (audited by the `census` subcommand)
QCNN_SHARED_COUNTS = {
    "c1": 12, "c2": 12, "c3": 18, "c4": 24, "c5": 24,
    "c6": 24, "c7": 36, "c8": 36, "c9a": 51, "c9b": 45,
}
HQC_EFFECTIVE_COUNTS = {
    "c1": 14, "c2": 7, "c3": 28, "c4": 42, "c5": 42,
    "c6": 35, "c7": 56, "c8": 56, "c9": 84,
}
CNN_BUDGETS = ((8, 26), (16, 34), (8, 44), (16, 56))


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


def parse_config(path) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = {
        "dataset": cp.get("data", "dataset", fallback="mnist"),
        "data_root": cp.get("data", "root", fallback=""),
        "ansatz": cp.get("model", "ansatz", fallback="c9b"),
        "encoding": cp.get("model", "encoding", fallback="amplitude"),
        "reduction": cp.get("model", "reduction", fallback=""),
        "filters": cp.getint("model", "filters", fallback=1),
        "boundary": cp.get("model", "boundary", fallback="periodic"),
        "sharing": cp.get("model", "sharing", fallback="shared"),
        "loss": cp.get("train", "loss", fallback="xent"),
        "optimizer": cp.get("train", "optimizer", fallback="nesterov"),
        "learning_rate": cp.getfloat("train", "learning_rate", fallback=0.01),
        "batch_size": cp.getint("train", "batch_size", fallback=25),
        "iterations": cp.getint("train", "iterations", fallback=200),
        "seeds": cp.get("train", "seeds", fallback="0,1,2,3,4"),
        "gradient": cp.get("train", "gradient", fallback="parameter_shift"),
        "output": cp.get("run", "output", fallback="runs"),
        "jobs": cp.getint("run", "jobs", fallback=1),
        "model_kind": cp.get("model", "kind", fallback="qcnn"),
    }
    return cfg


def _split_list(value: str):
    return [v.strip() for v in str(value).split(",") if v.strip()]


def expand_cells(cfg: dict):
    """Expand comma-separated grid axes into validated run cells."""
    datasets = _split_list(cfg["dataset"])
    ansatz_ids = _split_list(cfg["ansatz"])
    encodings = _split_list(cfg["encoding"])
    reductions = _split_list(cfg["reduction"]) if cfg["reduction"] else []
    filters = [int(f) for f in _split_list(str(cfg["filters"]))]
    kinds = _split_list(cfg.get("model_kind", "qcnn"))
    single = (
        len(datasets) == len(ansatz_ids) == len(encodings) == 1
        and len(filters) == 1
        and len(reductions) <= 1
        and len(kinds) == 1
    )
    cells = []
    skipped = []
    for kind in kinds:
        for ds in datasets:
            for enc in encodings:
                allowed = VALID_REDUCTIONS[enc] if kind != "cnn" else ("pca", "autoenc")
                wanted = reductions or list(allowed)
                for red in wanted:
                    if red not in allowed:
                        skipped.append((enc, red))
                        continue
                    for aid in ansatz_ids:
                        for L in filters:
                            cells.append(
                                {
                                    "kind": kind,
                                    "dataset": ds,
                                    "ansatz": aid,
                                    "encoding": enc,
                                    "reduction": red,
                                    "filters": L,
                                    "boundary": cfg["boundary"],
                                    "sharing": cfg["sharing"],
                                    "loss": cfg["loss"],
                                    "optimizer": cfg["optimizer"],
                                }
                            )
    if single and skipped:
        enc, red = skipped[0]
        raise ConfigError(
            f"encoding {enc!r} pairs with {VALID_REDUCTIONS[enc]}, not {red!r} "
            f"(feature capacity {prep.ENCODING_DIMS[enc]})"
        )
    if not cells:
        raise ConfigError("no valid (encoding, reduction) combinations in config")
    return cells, skipped


def _train_config(cfg: dict) -> tr.TrainConfig:
    return tr.TrainConfig(
        loss=cfg["loss"],
        optimizer=cfg["optimizer"],
        learning_rate=float(cfg["learning_rate"]),
        batch_size=int(cfg["batch_size"]),
        iterations=int(cfg["iterations"]),
        seeds=tuple(int(s) for s in _split_list(str(cfg["seeds"]))),
        gradient_method=cfg["gradient"],
    )


def cell_model_spec(cell: dict) -> model_mod.ModelSpec:
    return model_mod.ModelSpec(
        encoding=default_spec(cell["encoding"]),
        ansatz=cell["ansatz"],
        filters_per_layer=(cell["filters"],) * 3,
        boundary=cell["boundary"],
        weight_sharing=cell["sharing"],
    )


def cell_param_count(cell: dict) -> int:
    if cell["kind"] == "cnn":
        return cell["cnn_params"]
    return model_mod.count_params(cell_model_spec(cell))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def _resolve_data_root(args_root, cfg_root) -> Path:
    root = args_root or cfg_root or os.environ.get(DATA_ROOT_ENV, "")
    if not root:
        raise FileNotFoundError(
            "no dataset root: pass --data-root, set [data] root, or export "
            f"{DATA_ROOT_ENV}"
        )
    path = Path(root)
    if not path.exists():
        raise FileNotFoundError(f"dataset root {path} does not exist")
    return path


def _prepare_features(cell, data_root, cache_dir, seed=0):
    train = data_mod.load_binary_split(data_root, cell["dataset"], "train")
    test = data_mod.load_binary_split(data_root, cell["dataset"], "test")
    xtr, xte = prep.features_for_encoding(
        cell["encoding"],
        cell["reduction"],
        train.images,
        test.images,
        seed=seed,
        cache_dir=cache_dir,
        dataset_name=cell["dataset"],
    )
    return xtr, train.labels, xte, test.labels


def run_one_job(payload: dict) -> dict:
    """Train one (cell, seed) job; executed inside a worker process."""
    cell = payload["cell"]
    train_cfg = tr.TrainConfig(**payload["train_config"])
    xtr = np.load(payload["features_path"])["train"]
    xte = np.load(payload["features_path"])["test"]
    ytr = np.asarray(payload["train_labels"], dtype=np.uint8)
    yte = np.asarray(payload["test_labels"], dtype=np.uint8)
    if payload["rescale"] is not None:
        lo, hi = payload["rescale"]
        scaler = prep.fit_rescale(xtr, (lo, hi))
        xtr, xte = scaler.apply(xtr), scaler.apply(xte)
    if cell["kind"] == "cnn":
        spec = cnn_mod.CnnSpec(prep.ENCODING_DIMS[cell["encoding"]], cell["cnn_params"])
        run = cnn_mod.train_cnn(
            spec, train_cfg, payload["seed"], xtr, ytr, xte, yte
        )
    else:
        run = tr.train(
            cell_model_spec(cell), train_cfg, payload["seed"], xtr, ytr, xte, yte
        )
    record = run.to_dict()
    record["cell"] = cell
    record["config_hash"] = payload["config_hash"]
    return record


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
        if args.jobs:
            cfg["jobs"] = args.jobs
        cells, skipped = expand_cells(cfg)
        train_cfg = _train_config(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for cell in cells:
        if cell["kind"] == "cnn":
            cell["cnn_params"] = int(cell.pop("ansatz").removeprefix("p"))

    if args.dry_run:
        print(f"{len(cells)} cells x {len(train_cfg.seeds)} seeds")
        for cell in cells:
            print(
                f"  {cell['kind']:4s} {cell['dataset']:7s} "
                f"{str(cell.get('ansatz', cell.get('cnn_params'))):4s} "
                f"{cell['encoding']:9s} {cell['reduction']:8s} "
                f"L={cell['filters']} params={cell_param_count(cell)}"
            )
        if skipped:
            pairs = sorted(set(skipped))
            print(f"skipped invalid pairs: {pairs}")
        return EXIT_OK

    try:
        data_root = _resolve_data_root(args.data_root, cfg["data_root"])
    except FileNotFoundError as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return EXIT_NODATA

    out_dir = Path(args.output or cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = out_dir / "cache"
    chash = config_hash(cfg)

    # fit reducers up-front (single process) and stage per-cell payloads
    payloads = []
    for cell in cells:
        out_dim = prep.ENCODING_DIMS[cell["encoding"]]
        cache_path = cache_dir / (
            f"feat_v{prep.CACHE_VERSION}_{cell['dataset']}_{cell['reduction']}"
            f"_{out_dim}_s0.npz"
        )
        train = data_mod.load_binary_split(data_root, cell["dataset"], "train")
        test = data_mod.load_binary_split(data_root, cell["dataset"], "test")
        if not cache_path.exists():
            xtr, xte = prep.reduce_features(
                cell["reduction"], out_dim, train.images, test.images, seed=0
            )
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            np.savez_compressed(cache_path, train=xtr, test=xte,
                                version=prep.CACHE_VERSION)
        interval = prep.ENCODING_INTERVALS[cell["encoding"]]
        for seed in train_cfg.seeds:
            payloads.append(
                {
                    "cell": cell,
                    "seed": seed,
                    "train_config": {**train_cfg.__dict__, "seeds": train_cfg.seeds},
                    "features_path": str(cache_path),
                    "rescale": interval,
                    "train_labels": train.labels.tolist(),
                    "test_labels": test.labels.tolist(),
                    "config_hash": chash,
                }
            )

    records_path = out_dir / "runs.jsonl"
    jobs = int(cfg["jobs"])
    done = 0
    with open(records_path, "a") as fh:
        if jobs > 1:
            with get_context("fork").Pool(jobs) as pool:
                for record in pool.imap(run_one_job, payloads):
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
                    fh.flush()
                    done += 1
                    print(f"[{done}/{len(payloads)}] done", flush=True)
        else:
            for payload in payloads:
                record = run_one_job(payload)
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                done += 1
                print(f"[{done}/{len(payloads)}] done", flush=True)
    print(f"wrote {done} records to {records_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def _cell_key(record: dict):
    c = record["cell"]
    return (
        c["dataset"],
        str(c.get("ansatz") or f"p{c.get('cnn_params')}"),
        c["encoding"],
        c["reduction"],
        c["loss"],
        c["optimizer"],
        c["boundary"],
        c["sharing"],
        int(c["filters"]),
        record["tag"],
    )


def load_records(records_dir) -> list:
    records = []
    root = Path(records_dir)
    for path in sorted(root.glob("*.jsonl")):
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    return records


def cmd_report(args) -> int:
    records = load_records(args.records)
    if not records:
        print(f"no records found under {args.records}", file=sys.stderr)
        return EXIT_NODATA
    out_dir = Path(args.out or (Path(args.records) / "report"))
    out_dir.mkdir(parents=True, exist_ok=True)

    groups: dict = {}
    for rec in records:
        groups.setdefault(_cell_key(rec), []).append(rec)

    header = (
        "dataset,ansatz,encoding,reduction,loss,optimizer,boundary,sharing,L,"
        "mean_acc,std_acc,n_seeds,expected_seeds,incomplete,params,"
        "wall_time_s,model_hash,config_hash,tag"
    )
    lines = [header]
    for key in sorted(groups):
        recs = sorted(groups[key], key=lambda r: r["seed"])
        accs = [100.0 * r["test_accuracy"] for r in recs]
        expected = len(recs[0]["config"].get("seeds", [])) or len(recs)
        mean = float(np.mean(accs))
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        wall = float(np.sum([r["wall_time_s"] for r in recs]))
        row = key[:9] + (
            _fmt(mean),
            _fmt(std),
            len(accs),
            expected,
            int(len(accs) < expected),
            recs[0]["n_params"],
            _fmt(wall),
            recs[0]["model_hash"],
            recs[0].get("config_hash", ""),
            key[9],
        )
        lines.append(",".join(str(v) for v in row))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")

    _write_markdown_tables(groups, out_dir)
    _write_aggregate(groups, out_dir)
    _write_filter_series(groups, out_dir)
    _write_loss_curves(groups, out_dir)
    print(f"report written to {out_dir}")
    return EXIT_OK


def _write_markdown_tables(groups, out_dir):
    """Accuracy pivot tables: one per (dataset, loss, optimizer, ...)."""
    tables: dict = {}
    for key, recs in sorted(groups.items()):
        ds, aid, enc, red, loss, opt, boundary, sharing, L, tag = key
        recs = sorted(recs, key=lambda r: r["seed"])
        accs = [100.0 * r["test_accuracy"] for r in recs]
        mean = float(np.mean(accs))
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        tkey = (ds, loss, opt, boundary, sharing, L, tag)
        col = enc if enc == "amplitude" else f"{enc}/{red}"
        tables.setdefault(tkey, {}).setdefault(aid, {})[col] = (
            f"{mean:.1f} ± {std:.1f}"
        )
    out = []
    for tkey in sorted(tables):
        ds, loss, opt, boundary, sharing, L, tag = tkey
        out.append(
            f"\n## {tag} | {ds} | loss={loss} | opt={opt} | boundary={boundary}"
            f" | sharing={sharing} | L={L}\n"
        )
        cols = sorted({c for row in tables[tkey].values() for c in row})
        out.append("| ansatz | " + " | ".join(cols) + " |")
        out.append("|" + "---|" * (len(cols) + 1))
        for aid in sorted(tables[tkey]):
            cells = [tables[tkey][aid].get(c, "-") for c in cols]
            out.append(f"| {aid} | " + " | ".join(cells) + " |")
    (out_dir / "summary.md").write_text("\n".join(out) + "\n")


def _write_aggregate(groups, out_dir):
    """Average over every ansatz and seed per (dataset, encoding, reduction)."""
    buckets: dict = {}
    for key, recs in groups.items():
        ds, aid, enc, red, loss, opt, boundary, sharing, L, tag = key
        if tag != "qcnn":
            continue
        buckets.setdefault((ds, enc, red, loss, opt), []).extend(
            100.0 * r["test_accuracy"] for r in recs
        )
    lines = ["dataset,encoding,reduction,loss,optimizer,mean_acc,std_acc,n_runs"]
    for key in sorted(buckets):
        accs = buckets[key]
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        lines.append(
            ",".join(
                list(key)
                + [_fmt(float(np.mean(accs))), _fmt(std), str(len(accs))]
            )
        )
    (out_dir / "agg_by_preprocessing.csv").write_text("\n".join(lines) + "\n")


def _write_filter_series(groups, out_dir):
    lines = ["dataset,ansatz,encoding,reduction,L,mean_acc,std_acc,n_seeds"]
    for key in sorted(groups):
        ds, aid, enc, red, loss, opt, boundary, sharing, L, tag = key
        recs = groups[key]
        accs = [100.0 * r["test_accuracy"] for r in recs]
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        lines.append(
            f"{ds},{aid},{enc},{red},{L},{_fmt(float(np.mean(accs)))},"
            f"{_fmt(std)},{len(accs)}"
        )
    (out_dir / "fig_filters_series.csv").write_text("\n".join(lines) + "\n")


def _write_loss_curves(groups, out_dir):
    curve_dir = out_dir / "loss_curves"
    curve_dir.mkdir(exist_ok=True)
    for key in sorted(groups):
        recs = sorted(groups[key], key=lambda r: r["seed"])
        traces = np.asarray([r["loss_trace"] for r in recs], dtype=float)
        mean = traces.mean(axis=0)
        std = traces.std(axis=0, ddof=1) if len(recs) > 1 else np.zeros_like(mean)
        name = "_".join(str(k) for k in key) + ".csv"
        lines = ["iteration,mean_loss,std_loss"]
        for i, (m, s) in enumerate(zip(mean, std)):
            lines.append(f"{i},{_fmt(float(m))},{_fmt(float(s))}")
        (curve_dir / name).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    n = args.qubits
    layers = n.bit_length() - 1
    ok = True
    for aid in anz.ANSATZ_IDS:
        spec = model_mod.ModelSpec(
            default_spec("qubit", n), aid, filters_per_layer=(1,) * layers,
            n_qubits=n,
        )
        params = rng.uniform(0, 2 * np.pi, model_mod.count_params(spec))
        feats = rng.uniform(0, np.pi * 0.999, (args.batch, n))
        labels = rng.integers(0, 2, args.batch)
        worst = 0.0
        for loss in ("mse", "xent"):
            g_ps = tr.gradient(spec, params, feats, labels, loss, "parameter_shift")
            g_fd = tr.gradient(spec, params, feats, labels, loss, "finite_difference")
            err = np.max(
                np.abs(g_ps - g_fd)
                / np.maximum(np.abs(g_fd), args.abs_floor / args.tol)
            )
            worst = max(worst, float(err))
        status = "PASS" if worst < args.tol else "FAIL"
        if status == "FAIL":
            ok = False
        print(f"gradcheck {aid:4s} max-rel-err {worst:.3e}  {status}")
    return EXIT_OK if ok else EXIT_AUDIT


def census_rows():
    rows = []
    for aid, want in QCNN_SHARED_COUNTS.items():
        spec = model_mod.ModelSpec(default_spec("qubit"), aid)
        rows.append(("qcnn-shared", aid, model_mod.count_params(spec), want))
    for aid, want in HQC_EFFECTIVE_COUNTS.items():
        spec = model_mod.ModelSpec(
            default_spec("qubit"), aid, weight_sharing="independent"
        )
        rows.append(
            ("hqc-effective", aid, model_mod.count_effective_params(spec), want)
        )
    for length, budget in CNN_BUDGETS:
        net = cnn_mod.build_cnn(cnn_mod.CnnSpec(length, budget))
        rows.append((f"cnn-{length}in", f"p{budget}", net.n_params, budget))
    return rows


def cmd_census(args) -> int:
    ok = True
    for family, name, got, want in census_rows():
        status = "PASS" if got == want else f"FAIL (expected {want})"
        if got != want:
            ok = False
        print(f"census {family:14s} {name:4s} params={got:<4d} {status}")
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_preprocess(args) -> int:
    try:
        data_root = _resolve_data_root(args.data_root, "")
    except FileNotFoundError as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return EXIT_NODATA
    if args.encoding not in VALID_REDUCTIONS:
        print(f"config error: unknown encoding {args.encoding}", file=sys.stderr)
        return EXIT_CONFIG
    if args.method not in VALID_REDUCTIONS[args.encoding]:
        print(
            f"config error: encoding {args.encoding!r} pairs with "
            f"{VALID_REDUCTIONS[args.encoding]}, not {args.method!r}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    cell = {
        "dataset": args.dataset,
        "encoding": args.encoding,
        "reduction": args.method,
    }
    xtr, ytr, xte, yte = _prepare_features(
        cell, data_root, Path(args.out), seed=args.seed
    )
    print(
        f"cached {args.dataset}/{args.method} features for {args.encoding}: "
        f"train {xtr.shape}, test {xte.shape} under {args.out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcnnbench",
        description="quantum-convolutional classifier benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a benchmark grid")
    p_run.add_argument("config", help="INI config file")
    p_run.add_argument("--data-root", default="")
    p_run.add_argument("--output", default="")
    p_run.add_argument("--jobs", type=int, default=0)
    p_run.add_argument("--dry-run", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="aggregate run records")
    p_rep.add_argument("records", help="directory containing runs.jsonl")
    p_rep.add_argument("--out", default="")
    p_rep.set_defaults(func=cmd_report)

    p_grad = sub.add_parser("gradcheck", help="gradient audit")
    p_grad.add_argument("--qubits", type=int, default=4)
    p_grad.add_argument("--batch", type=int, default=6)
    p_grad.add_argument("--tol", type=float, default=1e-5)
    p_grad.add_argument("--abs-floor", type=float, default=1e-8)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_census = sub.add_parser("census", help="parameter-count audit")
    p_census.set_defaults(func=cmd_census)

    p_prep = sub.add_parser("preprocess", help="cache encoder features")
    p_prep.add_argument("--dataset", default="mnist")
    p_prep.add_argument("--data-root", default="")
    p_prep.add_argument("--encoding", default="qubit")
    p_prep.add_argument("--method", default="pca")
    p_prep.add_argument("--seed", type=int, default=0)
    p_prep.add_argument("--out", default="cache")
    p_prep.set_defaults(func=cmd_preprocess)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
