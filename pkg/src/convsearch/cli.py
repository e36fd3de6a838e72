"""Command-line entry points: index, run, evaluate, fuse, cache."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .evaluation import EvalCutoffs, evaluate_run, format_report, parse_qrels, read_run_file
from .fusion import ensemble_fuse, interleave
from .index import build_index, build_sparse_index, load_sparse_vectors, read_corpus, save_index
from .llm import HttpChatTransport, Transport
from .pipeline import execute_spec, load_run_spec


def _cmd_index(args: argparse.Namespace) -> int:
    if args.corpus:
        index = build_index(read_corpus(args.corpus))
    else:
        index = build_sparse_index(load_sparse_vectors(args.sparse_vectors))
    save_index(index, args.out)
    print(f"indexed {index.doc_count} docs ({index.mode} mode) -> {args.out}")
    return 0


def _build_transport(args: argparse.Namespace) -> Transport | None:
    if getattr(args, "endpoint", None):
        return HttpChatTransport(args.endpoint, api_key=getattr(args, "api_key", None))
    if getattr(args, "scripted", False):
        from .offline import ScriptedTransport

        return ScriptedTransport()
    return None


def _cmd_run(args: argparse.Namespace, llm_mode: str | None = None) -> int:
    spec = load_run_spec(args.config)
    if args.cache_dir:
        spec.paths["cache_dir"] = Path(args.cache_dir).resolve()
    if args.model_id:
        spec = dataclasses.replace(spec, model_id=args.model_id)
    mode = llm_mode or args.llm_mode
    run_path, responses_path = execute_spec(
        spec,
        out_dir=args.out_dir,
        transport=_build_transport(args),
        llm_mode=mode,
        workers=args.workers,
    )
    print(f"wrote {run_path}")
    print(f"wrote {responses_path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    qrels = parse_qrels(args.qrels)
    cutoffs = EvalCutoffs(
        ndcg_cutoff=args.ndcg_cutoff,
        precision_cutoff=args.precision_cutoff,
        recall_cutoff=args.recall_cutoff,
        threshold=args.threshold,
    )
    report = evaluate_run(args.run, qrels, cutoffs)
    print(format_report(report, per_depth=args.per_depth, per_topic=args.per_topic))
    if args.json:
        report.write_json(args.json)
        print(f"wrote {args.json}")
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    runs = [read_run_file(path) for path in args.runs]
    query_ids = sorted(set().union(*(run.keys() for run in runs)))
    fuse = ensemble_fuse if args.method == "ensemble" else interleave
    lines = []
    for query_id in query_ids:
        fused = fuse([run[query_id] for run in runs if query_id in run])
        for rank, (doc_id, score) in enumerate(fused.items, start=1):
            lines.append(f"{query_id} Q0 {doc_id} {rank} {score:.6f} {args.run_tag}")
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    print(f"fused {len(args.runs)} runs over {len(query_ids)} queries -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convsearch",
        description="Conversational passage ranking pipeline and evaluation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and save an inverted index")
    source = p_index.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus", help="passage file: <doc_id>\\t<text> per line")
    source.add_argument("--sparse-vectors", help="sparse-vector file: <doc_id>\\t<term>:<w> ...")
    p_index.add_argument("--out", required=True, help="output index file (JSON)")
    p_index.set_defaults(func=_cmd_index)

    def add_run_arguments(p: argparse.ArgumentParser, with_mode: bool) -> None:
        p.add_argument("--config", required=True, help="run spec JSON file")
        p.add_argument("--out-dir", default="out", help="directory for run outputs")
        if with_mode:
            p.add_argument(
                "--llm-mode", choices=["record", "replay", "live"], default=None,
                help="override the spec's LLM mode",
            )
        p.add_argument("--model-id", default=None, help="override the spec's model id")
        p.add_argument("--cache-dir", default=None, help="override the spec's cache directory")
        p.add_argument("--endpoint", default=None, help="chat-completion endpoint URL")
        p.add_argument("--api-key", default=None, help="bearer token for the endpoint")
        p.add_argument(
            "--scripted", action="store_true",
            help="use the deterministic offline model as transport",
        )
        p.add_argument("--workers", type=int, default=1, help="parallel turn workers")

    p_run = sub.add_parser("run", help="execute a run config end to end")
    add_run_arguments(p_run, with_mode=True)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("evaluate", help="score a TREC run file against qrels")
    p_eval.add_argument("--run", required=True, help="TREC run file")
    p_eval.add_argument("--qrels", required=True, help="qrels file")
    p_eval.add_argument("--ndcg-cutoff", type=int, default=5)
    p_eval.add_argument("--precision-cutoff", type=int, default=20)
    p_eval.add_argument("--recall-cutoff", type=int, default=100)
    p_eval.add_argument("--threshold", type=int, default=1)
    p_eval.add_argument("--per-depth", action="store_true", help="slice by turn number")
    p_eval.add_argument("--per-topic", action="store_true", help="slice by topic")
    p_eval.add_argument("--json", default=None, help="also write a JSON report")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_fuse = sub.add_parser("fuse", help="fuse several TREC run files")
    p_fuse.add_argument("runs", nargs="+", help="input run files")
    p_fuse.add_argument("--method", choices=["ensemble", "interleave"], default="ensemble")
    p_fuse.add_argument("--run-tag", default="fused")
    p_fuse.add_argument("--out", required=True, help="output run file")
    p_fuse.set_defaults(func=_cmd_fuse)

    p_cache = sub.add_parser("cache", help="execute a run with a fixed cache mode")
    cache_sub = p_cache.add_subparsers(dest="cache_mode", required=True)
    for mode in ("record", "replay"):
        p_mode = cache_sub.add_parser(mode, help=f"run with --llm-mode {mode}")
        add_run_arguments(p_mode, with_mode=False)
        p_mode.set_defaults(func=lambda args, m=mode: _cmd_run(args, llm_mode=m), llm_mode=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
