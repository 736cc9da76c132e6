"""Command-line interface.

Subcommands: schema, disambiguate, kb build, retrieve, simplify,
bench run, bench report, mock-server.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import tempfile
from pathlib import Path

from .bench import emit_report, load_report, load_suite, run_suite
from .config import PipelineConfig, config_from_mapping, load_config
from .disambig import MatchConfig, disambiguate, match_tokens, rank_matches, tokenize
from .errors import PipelineError
from .gateway import ModelGateway, simplify_prompt
from .knowledge import (
    HashEmbedder,
    build_indexes,
    decompose_intent,
    enhance_prompt,
    load_indexes,
    load_kb,
    save_indexes,
)
from .mockserver import MockModelServer, load_reply_script
from .pipeline import Services
from .sandbox import resolve_sandbox
from .schema import dump_manifest, load_schema


def _read_prompt(value: str) -> str:
    p = Path(value)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    return value


def _embedder_for(args, gateway: ModelGateway | None):
    if getattr(args, "hash_embedder", False) or gateway is None:
        return HashEmbedder(args.hash_dim)
    return gateway.embed


def _gateway_from(args) -> ModelGateway | None:
    url = getattr(args, "server_url", None)
    if not url:
        return None
    return ModelGateway(url, model=args.model)


def cmd_schema(args) -> int:
    index = load_schema(args.data)
    text = dump_manifest(index)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_disambiguate(args) -> int:
    prompt = _read_prompt(args.prompt)
    schema = load_schema(args.schema)
    cfg = MatchConfig(
        strict=args.strict,
        relaxed=args.relaxed,
        max_context_entries=args.max_context,
    )
    matches = rank_matches(match_tokens(tokenize(prompt), schema, cfg))
    augmented = disambiguate(prompt, schema, cfg)
    if args.json:
        doc = {
            "original": augmented.original,
            "context_block": augmented.context_block,
            "rendered": augmented.render(),
            "matches_used": [dataclasses.asdict(m) for m in augmented.matches_used],
            "matches": [dataclasses.asdict(m) for m in matches],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(augmented.render())
    return 0


def cmd_kb_build(args) -> int:
    entries = load_kb(args.kb)
    embedder = _embedder_for(args, _gateway_from(args))
    indexes = build_indexes(entries, embedder)
    save_indexes(indexes, args.out)
    sizes = {kind: len(idx) for kind, idx in indexes.items()}
    print(json.dumps({"out": args.out, "sizes": sizes}))
    return 0


def cmd_retrieve(args) -> int:
    prompt = _read_prompt(args.prompt)
    indexes = load_indexes(args.kb)
    gateway = _gateway_from(args)
    embedder = _embedder_for(args, gateway)
    if gateway is not None:
        triple = decompose_intent(prompt, gateway)
    else:
        from .knowledge import IntentTriple

        triple = IntentTriple(prompt, prompt, prompt)
    out = enhance_prompt(prompt, triple, indexes, embedder, min_score=args.min_score)
    print(out.render())
    return 0


def cmd_simplify(args) -> int:
    gateway = _gateway_from(args)
    if gateway is None:
        print("simplify needs --server-url", file=sys.stderr)
        return 2
    config = PipelineConfig()
    print(simplify_prompt(_read_prompt(args.prompt), gateway, config.simplify_template))
    return 0


def _load_configs(path: str) -> list[PipelineConfig]:
    p = Path(path)
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        raw = tomllib.loads(p.read_text(encoding="utf-8"))
    else:
        raw = json.loads(p.read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "configs" in raw:
        return [config_from_mapping(c) for c in raw["configs"]]
    return [load_config(path)]


def _services_factory(args):
    def factory(config: PipelineConfig) -> Services:
        gateway = ModelGateway(
            config.server_url,
            model=config.model,
            temperature=config.temperature,
            seed=config.seed,
            system_prompt=config.system_prompt,
        )
        indexes = None
        embedder = None
        if config.retrieval:
            indexes = load_indexes(config.kb_index)
            embedder = (
                HashEmbedder(args.hash_dim)
                if args.hash_embedder
                else gateway.embed
            )
        return Services(
            gateway=gateway,
            sandbox=resolve_sandbox(config.runner_cmd),
            indexes=indexes,
            embedder=embedder,
        )

    return factory


def cmd_bench_run(args) -> int:
    tasks = load_suite(args.suite)
    configs = _load_configs(args.config)
    workdir = args.workdir or tempfile.mkdtemp(prefix="pg-bench-")
    report = run_suite(
        tasks,
        configs,
        _services_factory(args),
        workdir,
        journal_path=args.resume,
    )
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    rows = [r for r in report.aggregate]
    last = {r["config"]: r for r in rows}
    for name, row in sorted(last.items()):
        print(
            f"{name}: correct {row['correct_pct']:.2f}% "
            f"runnable {row['runnable_pct']:.2f}% failed {row['failed_pct']:.2f}%"
        )
    print(f"report written to {args.out}")
    return 0


def cmd_bench_report(args) -> int:
    report = load_report(getattr(args, "in"))
    print(emit_report(report, args.format), end="")
    return 0


def cmd_mock_server(args) -> int:
    replies, rules, default = {}, [], ""
    if args.script:
        replies, rules, default = load_reply_script(args.script)
    server = MockModelServer(
        replies=replies,
        rules=rules,
        default_reply=default,
        echo_default=args.echo,
        embed_dim=args.embed_dim,
        port=args.port,
    )
    server.start()
    print(f"mock model server listening on {server.base_url}", flush=True)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptground",
        description="Grounded prompt pipeline and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schema", help="dump a data file's structure as a manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_schema)

    p = sub.add_parser("disambiguate", help="ground a prompt in a file's hierarchy")
    p.add_argument("--prompt", required=True, help="prompt text or a file path")
    p.add_argument("--schema", required=True, help="HDF5 file or manifest JSON")
    p.add_argument("--strict", type=float, default=87.0)
    p.add_argument("--relaxed", type=float, default=80.0)
    p.add_argument("--max-context", type=int, default=5, dest="max_context")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_disambiguate)

    p = sub.add_parser("kb", help="knowledge-base utilities")
    kb_sub = p.add_subparsers(dest="kb_command", required=True)
    b = kb_sub.add_parser("build", help="embed a kb.jsonl into an index file")
    b.add_argument("--kb", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--server-url", dest="server_url")
    b.add_argument("--model", default="all-minilm")
    b.add_argument("--hash-embedder", action="store_true", dest="hash_embedder")
    b.add_argument("--hash-dim", type=int, default=384, dest="hash_dim")
    b.set_defaults(fn=cmd_kb_build)

    p = sub.add_parser("retrieve", help="append top examples from each index")
    p.add_argument("--prompt", required=True)
    p.add_argument("--kb", required=True, help="index file from `kb build`")
    p.add_argument("--min-score", type=float, default=None, dest="min_score")
    p.add_argument("--server-url", dest="server_url")
    p.add_argument("--model", default="devstral")
    p.add_argument("--hash-embedder", action="store_true", dest="hash_embedder")
    p.add_argument("--hash-dim", type=int, default=384, dest="hash_dim")
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("simplify", help="summarize a detailed prompt")
    p.add_argument("--prompt", required=True)
    p.add_argument("--server-url", dest="server_url")
    p.add_argument("--model", default="llama3")
    p.set_defaults(fn=cmd_simplify)

    p = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)
    r = bench_sub.add_parser("run", help="run a suite under one or more configs")
    r.add_argument("--suite", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--resume", help="journal file (JSONL) for crash resume")
    r.add_argument("--workdir")
    r.add_argument("--hash-embedder", action="store_true", dest="hash_embedder")
    r.add_argument("--hash-dim", type=int, default=384, dest="hash_dim")
    r.set_defaults(fn=cmd_bench_run)
    e = bench_sub.add_parser("report", help="render a report JSON")
    e.add_argument("--in", required=True)
    e.add_argument("--format", choices=("json", "csv", "markdown"), default="csv")
    e.set_defaults(fn=cmd_bench_report)

    p = sub.add_parser("mock-server", help="serve the scripted mock model")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--script", help="reply script JSON")
    p.add_argument("--echo", action="store_true")
    p.add_argument("--embed-dim", type=int, default=384, dest="embed_dim")
    p.set_defaults(fn=cmd_mock_server)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
