"""Command line entry point: ``dwlkit <command> ...``.

Reports go to stdout as JSON (CSV for ``encode mite``); progress goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .dwl import dwl_distinguish, dwl_refine
from .encodings import mite_raw
from .harness.metrics import metrics_report
from .harness.splits import chronological_split, inductive_mask
from .harness.suite import SuiteConfig, expressiveness_suite, graph_from_payload
from .neural import TrainConfig, evaluate, load_params, save_params, train
from .temporal_graph import build_dat, historical_neighbors, load_events, write_edge_list


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def _pair(text: str) -> tuple[int, int]:
    try:
        u, v = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two node ids as u,v") from None
    return u, v


def _split(g, seed: int, mask_fraction: float):
    split = chronological_split(g, seed=seed)
    if mask_fraction > 0:
        split = inductive_mask(split, g, mask_fraction, seed=seed)
    return split


def cmd_dwl(args) -> int:
    graphs = [load_events(p, args.format) for p in args.graphs]
    if len(graphs) == 1:
        col = dwl_refine(graphs[0], args.t, args.k, args.init, args.rounds)
        _emit({
            "k": args.k,
            "t": args.t,
            "rounds_run": col.rounds_run,
            "stable": col.stable,
            "class_counts": [col.num_classes(j) for j in range(col.rounds_run + 1)],
        })
        return 0
    verdict = dwl_distinguish(graphs[0], graphs[1], args.t, args.k, args.rounds, args.init)
    _emit(dict(verdict.to_dict(), k=args.k, t=args.t))
    return 0


def cmd_encode_mite(args) -> int:
    g = load_events(args.graph, args.format)
    dat = build_dat(g)
    u, v = args.pair
    candidates = sorted(
        set(historical_neighbors(g, u, args.t).neighbors.tolist())
        | set(historical_neighbors(g, v, args.t).neighbors.tolist())
    )
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["w"] + [f"u{i}" for i in range(args.k)] + [f"v{i}" for i in range(args.k)])
    for w in candidates:
        out.writerow([w] + [repr(float(x)) for x in mite_raw(dat, u, v, w, args.t, args.k)])
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig.from_file(args.config)
    g = load_events(args.graph, args.format)
    split = _split(g, cfg.seed, args.mask_fraction)
    dat = build_dat(g)

    def log(rec):
        print(json.dumps(rec), file=sys.stderr)

    params, history = train(g, dat, split, cfg, log=log)
    bin_path, manifest = save_params(params, args.out)
    report = {"params": str(manifest), "binary": str(bin_path), "history": history}
    report["test"] = evaluate(params, g, dat, split, "test").to_dict()
    if split.masked_nodes:
        report["inductive_test"] = evaluate(params, g, dat, split, "inductive-test").to_dict()
    _emit(report)
    return 0


def cmd_eval(args) -> int:
    params = load_params(args.params)
    g = load_events(args.graph, args.format)
    split = _split(g, args.seed, args.mask_fraction)
    _emit(evaluate(params, g, build_dat(g), split, args.section).to_dict())
    return 0


def cmd_split(args) -> int:
    g = load_events(args.graph, args.format)
    _emit(_split(g, args.seed, args.mask_fraction).to_dict())
    return 0


def _write_graph_files(directory: Path, stem: str, payload: dict) -> list[str]:
    written = []
    for tag, gp in zip("AB", payload["graphs"]):
        path = directory / f"{stem}_{tag}.edgelist"
        with open(path, "w") as fh:
            write_edge_list(graph_from_payload(gp), fh)
        written.append(str(path))
    meta = directory / f"{stem}.json"
    meta.write_text(json.dumps(payload, indent=1, sort_keys=True))
    written.append(str(meta))
    return written


def cmd_suite(args) -> int:
    cfg = SuiteConfig(trials=args.trials, seed=args.seed, max_nodes=args.max_nodes,
                      max_events=args.max_events, search_budget=args.search_budget)
    report = expressiveness_suite(cfg)
    out = report.to_dict()
    if args.out_dir:
        directory = Path(args.out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        files = {}
        for name, res in report.properties.items():
            if res.counterexample and "graphs" in res.counterexample:
                files[name] = _write_graph_files(directory, name, res.counterexample)
        if report.witness:
            files["mite_witness"] = _write_graph_files(directory, "mite_witness", report.witness)
        out["files"] = files
    print(f"suite finished in {report.elapsed:.1f}s", file=sys.stderr)
    _emit(out)
    return 0 if report.passed else 1


def cmd_metrics(args) -> int:
    scores = np.loadtxt(args.scores, dtype=np.float64, ndmin=1)
    labels = np.loadtxt(args.labels, dtype=np.float64, ndmin=1)
    _emit(metrics_report(scores, labels.astype(np.int64), args.setting).to_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwlkit", description="Dynamic WL tests, pair encodings, link prediction and property checks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def graph_format(p):
        p.add_argument("--format", choices=["edge_list", "jodie_csv"], default="edge_list")

    p = sub.add_parser("dwl", help="run 1-DWL or 2-DWL on one graph, or compare two")
    p.add_argument("--k", type=int, choices=[1, 2], default=1)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--init", choices=["constant", "features"], default="constant")
    p.add_argument("graphs", nargs="+")
    graph_format(p)
    p.set_defaults(func=cmd_dwl)

    enc = sub.add_parser("encode", help="print encodings as CSV")
    enc_sub = enc.add_subparsers(dest="encoding", required=True)
    p = enc_sub.add_parser("mite", help="interval encodings for each neighbour of a pair")
    p.add_argument("--pair", type=_pair, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("graph")
    graph_format(p)
    p.set_defaults(func=cmd_encode_mite)

    p = sub.add_parser("train", help="train a link predictor from a key = value config")
    p.add_argument("--config", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", default="params.bin")
    p.add_argument("--mask-fraction", type=float, default=0.0)
    graph_format(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved parameters on a split section")
    p.add_argument("--params", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--section", default="test",
                   choices=["train", "val", "test", "inductive-val", "inductive-test"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-fraction", type=float, default=0.0)
    graph_format(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="chronological split with optional node masking")
    p.add_argument("graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-fraction", type=float, default=0.0)
    graph_format(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("suite", help="randomized expressiveness property suite")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-nodes", type=int, default=6)
    p.add_argument("--max-events", type=int, default=10)
    p.add_argument("--search-budget", type=int, default=3000)
    p.add_argument("--out-dir", default=None, help="write counterexample graphs as edge lists here")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("metrics", help="AP and ROC AUC of scores against 0/1 labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--setting", default="transductive")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"dwlkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
