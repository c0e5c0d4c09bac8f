"""Command-line interface.

One subcommand per pipeline stage: ``ingest``, ``build-prompts``,
``translate``, ``evaluate``, ``report``, ``serve``, ``agreement``,
``export``. Exit codes: 0 success, 1 usage error, 2 data error, 3 backend
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaluation import ExternalScorer, ReportLayout, ScorerError
from .llm import ConfigurationError, STATUS_FAILED
from .mqm.agreement import AgreementError, compute_agreement
from .mqm.exports import error_count_table, errors_table_csv, quality_table_csv
from .mqm.service import serve_annotation
from .mqm.store import AnnotationStore, StoreError
from .prompts import OverrideError, prompt_digest
from .resources import ResourceBundle, ResourceError
from .runs import ConfigError, Run, RunConfig, parse_config_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; keep 1 for usage
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run config file (key = value lines)")
    parser.add_argument("--bundle", dest="bundle_dir", help="persisted bundle directory")
    parser.add_argument("--dataset", help="dataset file (id<TAB>source<TAB>reference)")
    parser.add_argument("--dictionary", help="dictionary file")
    parser.add_argument("--grammar", help="grammar file")
    parser.add_argument("--corpus", help="corpus file")
    parser.add_argument("--lexicon", help="fallback segmenter lexicon")
    parser.add_argument("--overrides", help="manual-retrieval override file")
    parser.add_argument("--backend", choices=["mock-identity", "replay", "remote"])
    parser.add_argument("--replay", help="replay fixture file")
    parser.add_argument("--model", action="append", dest="models", help="model id (repeatable)")
    parser.add_argument("--endpoint", help="chat-completion endpoint URL")
    parser.add_argument("--auth-env", dest="auth_env", help="credential environment variable name")
    parser.add_argument("--condition", action="append", dest="conditions",
                        help="condition code subset (repeatable)")
    parser.add_argument("--mode", action="append", dest="modes", help="auto/manual (repeatable)")
    parser.add_argument("--k", type=int, help="corpus examples per prompt")
    parser.add_argument("--cache", help="response cache file")
    parser.add_argument("--runs-dir", dest="runs_dir", help="where run outputs live")
    parser.add_argument("--run-id", dest="run_id", help="explicit run id")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    raw: dict = {"params": {}}
    if args.config:
        raw.update(parse_config_text(Path(args.config).read_text("utf-8")))
    for name in ("bundle_dir", "dataset", "dictionary", "grammar", "corpus", "lexicon",
                 "overrides", "backend", "replay", "endpoint", "auth_env", "cache",
                 "runs_dir", "run_id", "k"):
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    for name in ("models", "conditions", "modes"):
        value = getattr(args, name, None)
        if value:
            raw[name] = ",".join(value)
    return RunConfig.from_dict(raw)


def _build_store(args: argparse.Namespace) -> AnnotationStore:
    config = _config_from_args(args)
    run = Run(config)
    records = run.load_run_records()
    prompts = {}
    if run.paths.prompts_jsonl.exists():
        by_cell = {
            (p.item_id, p.condition.code, p.mode.value): p.full_prompt for p in run.load_prompts()
        }
        for record in records:
            text = by_cell.get((record.item_id, record.condition, record.mode))
            if text is not None:
                ref = f"{record.item_id}~{record.model_id}~{record.condition}~{record.mode}"
                prompts[ref] = text
    item_texts = {i.item_id: (i.source_text, i.reference_text) for i in run.bundle.dataset}
    log_path = Path(args.store) if getattr(args, "store", None) else run.paths.annotations_log
    return AnnotationStore.for_run(run.run_id, records, item_texts, prompts, log_path)


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="tikray", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse raw resources into a persisted bundle")
    p_ingest.add_argument("--dictionary")
    p_ingest.add_argument("--grammar")
    p_ingest.add_argument("--corpus")
    p_ingest.add_argument("--dataset", required=True)
    p_ingest.add_argument("--out", required=True, help="bundle output directory")

    p_prompts = sub.add_parser("build-prompts", help="assemble prompts for every run cell")
    _add_config_args(p_prompts)
    p_prompts.add_argument("--item", help="only this item id (prints the prompt)")
    p_prompts.add_argument("--show-hash", action="store_true", help="print prompt digests")

    p_translate = sub.add_parser("translate", help="send prompts to the backend")
    _add_config_args(p_translate)
    p_translate.add_argument("--dry-run", action="store_true",
                             help="print the request matrix without any calls")

    p_eval = sub.add_parser("evaluate", help="score the translation records")
    _add_config_args(p_eval)
    p_eval.add_argument("--scorer", help="external scorer command (shell-split)")

    p_report = sub.add_parser("report", help="render a summary table")
    _add_config_args(p_report)
    p_report.add_argument("--layout", choices=[l.value for l in ReportLayout], default="table1")
    p_report.add_argument("--metric", choices=["bleu", "external"])

    p_serve = sub.add_parser("serve", help="run the annotation service")
    _add_config_args(p_serve)
    p_serve.add_argument("--store", help="annotation log path (defaults into the run dir)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)

    p_agree = sub.add_parser("agreement", help="print inter-annotator agreement")
    _add_config_args(p_agree)
    p_agree.add_argument("--store", help="annotation log path")

    p_export = sub.add_parser("export", help="write annotation tables as CSV")
    _add_config_args(p_export)
    p_export.add_argument("--store", help="annotation log path")
    p_export.add_argument("--what", choices=["quality", "errors"], required=True)
    p_export.add_argument("--for-model", dest="for_model", help="model id (errors table)")
    p_export.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    try:
        return _dispatch(args)
    except (ResourceError, ConfigError, AgreementError, OverrideError, StoreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, ScorerError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "ingest":
        bundle = ResourceBundle.from_files(args.dictionary, args.grammar, args.corpus, args.dataset)
        bundle.save(args.out)
        print(f"bundle {bundle.bundle_hash[:12]} written to {args.out}")
        return EXIT_OK

    if args.command == "build-prompts":
        run = Run(_config_from_args(args))
        prompts = run.build_prompts()
        if args.item:
            selected = [p for p in prompts if p.item_id == args.item]
            if not selected:
                print(f"error: no prompts for item {args.item!r}", file=sys.stderr)
                return EXIT_DATA
            for p in selected:
                print(f"--- {p.item_id} {p.condition.code} {p.mode.value}")
                if args.show_hash:
                    print(f"hash: {prompt_digest(p.full_prompt)}")
                print(p.full_prompt)
        print(f"{len(prompts)} prompts written to {run.paths.prompts_dir}", file=sys.stderr)
        return EXIT_OK

    if args.command == "translate":
        run = Run(_config_from_args(args))
        if args.dry_run:
            for line in run.dry_run_matrix():
                print(line)
            return EXIT_OK
        records = run.translate()
        failures = [r for r in records if r.status == STATUS_FAILED]
        print(f"{len(records)} records written to {run.paths.records}", file=sys.stderr)
        if failures:
            print(f"{len(failures)} requests FAILED:", file=sys.stderr)
            for r in failures:
                print(f"  {r.item_id} {r.model_id} {r.condition} {r.mode}: {r.error}",
                      file=sys.stderr)
            return EXIT_BACKEND
        return EXIT_OK

    if args.command == "evaluate":
        run = Run(_config_from_args(args))
        scorer = ExternalScorer(tuple(args.scorer.split())) if args.scorer else None
        scores = run.evaluate(scorer)
        print(f"{len(scores)} scores written to {run.paths.scores}", file=sys.stderr)
        return EXIT_OK

    if args.command == "report":
        run = Run(_config_from_args(args))
        table = run.report(ReportLayout(args.layout), args.metric)
        print(table)
        return EXIT_OK

    if args.command == "serve":
        store = _build_store(args)
        handle = serve_annotation(store, host=args.host, port=args.port)
        print(f"annotation service at {handle.url} (Ctrl-C to stop)", file=sys.stderr)
        try:
            while True:
                import time

                time.sleep(3600)
        except KeyboardInterrupt:
            handle.stop()
        return EXIT_OK

    if args.command == "agreement":
        store = _build_store(args)
        run_id = store.run_ids[0]
        report = compute_agreement(*store.agreement_inputs(run_id))
        print(json.dumps({
            "kappa": report.kappa,
            "alpha": report.alpha,
            "n_items": report.n_items,
            "n_annotators": report.n_annotators,
        }, indent=2))
        return EXIT_OK

    if args.command == "export":
        store = _build_store(args)
        run_id = store.run_ids[0]
        records = store.records_for_run(run_id)
        if args.what == "quality":
            text = quality_table_csv(records, store.ratings_for_run(run_id))
        else:
            if not args.for_model:
                print("error: --for-model is required for the errors table", file=sys.stderr)
                return EXIT_USAGE
            table = error_count_table(store.annotations_for_run(run_id), records, args.for_model)
            text = errors_table_csv(table)
        Path(args.out).write_text(text, "utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
        return EXIT_OK

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
