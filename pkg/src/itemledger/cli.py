"""Command-line surface for advanced users.

Thin client over the same core the gateway serves: every subcommand
opens the store file, performs one operation, and prints machine output
(canonical JSON, or CSV/XML for queries) on stdout with diagnostics on
stderr. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import canonical, provenance
from .broker import BrokerConfig, SimBroker
from .errors import LedgerError
from .ledger import STORE_ENV, Ledger

USAGE_EXIT = 2
DOMAIN_EXIT = 1


def _json_arg(text: str):
    """JSON literal, or @path to read it from a file."""
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as handle:
            return json.load(handle)
    return json.loads(text)


def _csv_list(text: str) -> list[str]:
    return [part for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itemledger", description="description-driven provenance engine")
    parser.add_argument("--store", help=f"log file path (or env {STORE_ENV})")
    parser.add_argument("--agent", help="acting agent id")
    parser.add_argument("--where", default="cli", help="node name recorded in events")
    parser.add_argument("--seed", type=int, default=42, help="broker seed")
    top = parser.add_subparsers(dest="group", required=True)

    desc = top.add_parser("desc", help="item descriptions").add_subparsers(dest="command", required=True)
    p = desc.add_parser("register", help="register a description (version 1)")
    p.add_argument("--name", required=True)
    p.add_argument("--payload", required=True, help="version payload JSON (or @file)")
    p = desc.add_parser("version", help="append a version")
    p.add_argument("--id", required=True)
    p.add_argument("--payload", required=True)

    item = top.add_parser("item", help="items").add_subparsers(dest="command", required=True)
    p = item.add_parser("create")
    p.add_argument("--description", required=True)
    p.add_argument("--version", type=int, required=True)
    p.add_argument("--properties", default="{}")
    p = item.add_parser("show")
    p.add_argument("--id", required=True)
    p = item.add_parser("history")
    p.add_argument("--id", required=True)
    p = item.add_parser("transition")
    p.add_argument("--id", required=True)
    p.add_argument("--activity", required=True)
    p.add_argument("--transition", required=True, choices=["Start", "Complete", "Fail", "Retry"])
    p.add_argument("--outcome")
    p = item.add_parser("migrate")
    p.add_argument("--id", required=True)
    p.add_argument("--version", type=int, required=True)

    dataset = top.add_parser("dataset", help="datasets").add_subparsers(dest="command", required=True)
    p = dataset.add_parser("register")
    p.add_argument("--metadata", default="{}")
    p.add_argument("--elements", required=True, help="JSON list of {files, metadata} (or @file)")

    pipeline = top.add_parser("pipeline", help="pipelines").add_subparsers(dest="command", required=True)
    p = pipeline.add_parser("register")
    p.add_argument("--script", required=True)
    p.add_argument("--env", default="{}")
    p.add_argument("--dirs", default="[]")
    p.add_argument("--stages", required=True, help="workflow JSON (or @file)")

    analysis = top.add_parser("analysis", help="analyses").add_subparsers(dest="command", required=True)
    analysis.add_parser("define")
    p = analysis.add_parser("dataset")
    p.add_argument("--id", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--elements", required=True, help="comma-separated element ids")
    p = analysis.add_parser("pipeline")
    p.add_argument("--id", required=True)
    p.add_argument("--pipeline", required=True)
    p.add_argument("--parameters", default="{}")
    for name in ("run", "rerun"):
        p = analysis.add_parser(name)
        p.add_argument("--id", required=True)
        p.add_argument("--nodes", default="node-1,node-2")
        p.add_argument("--base-ms", type=int, default=100)
        p.add_argument("--jitter-ms", type=int, default=50)
        p.add_argument("--failure-rate", type=float, default=0.0)
        if name == "rerun":
            p.add_argument("--parameters")
            p.add_argument("--elements")
    p = analysis.add_parser("status")
    p.add_argument("--id", required=True)
    p = analysis.add_parser("consolidate")
    p.add_argument("--id", required=True)
    p = analysis.add_parser("annotate")
    p.add_argument("--id", required=True)
    p.add_argument("--text", required=True)
    p = analysis.add_parser("share")
    p.add_argument("--id", required=True)
    p.add_argument("--target", required=True)
    analysis.add_parser("list")

    query = top.add_parser("query", help="query service").add_subparsers(dest="command", required=True)
    p = query.add_parser("items")
    p.add_argument("--kind", default="item")
    p.add_argument("--filter", action="append", default=[], help="field:op:value (repeatable)")
    p.add_argument("--format", default="json", choices=["json", "csv", "xml"])
    p = query.add_parser("events")
    p.add_argument("--filter", action="append", default=[])
    p.add_argument("--format", default="json", choices=["json", "csv", "xml"])

    prov = top.add_parser("prov", help="PROV export").add_subparsers(dest="command", required=True)
    p = prov.add_parser("export")
    p.add_argument("--analysis", required=True)

    p = top.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="directory with the built dashboard, served at /ui")

    return parser


def _require_agent(args) -> str:
    if not args.agent:
        raise LedgerError("--agent is required for this command")
    return args.agent


def _broker(args, ledger: Ledger) -> SimBroker:
    config = BrokerConfig(
        seed=args.seed,
        nodes=tuple(_csv_list(args.nodes)),
        base_duration_ms=args.base_ms,
        jitter_ms=args.jitter_ms,
        failure_rate=args.failure_rate,
    )
    return SimBroker(config, clock=ledger.clock)


def _emit(payload) -> None:
    print(canonical.dumps(payload))


def _emit_table(table: provenance.ResultTable, fmt: str) -> None:
    if fmt == "json":
        _emit(table.to_payload())
    else:
        sys.stdout.write(provenance.export_table(table, fmt))


def run(args, ledger: Ledger) -> None:
    group, command = args.group, getattr(args, "command", None)
    base = ledger.analysis

    if group == "desc":
        agent = _require_agent(args)
        if command == "register":
            description_id, version = ledger.register_description(args.name, _json_arg(args.payload), agent)
            _emit({"id": description_id, "version": version})
        else:
            version = ledger.add_description_version(args.id, _json_arg(args.payload), agent)
            _emit({"id": args.id, "version": version})

    elif group == "item":
        if command == "create":
            item = ledger.instantiate_item(
                args.description, args.version, _json_arg(args.properties), _require_agent(args)
            )
            _emit(item.to_payload())
        elif command == "show":
            _emit(ledger.item(args.id).to_payload())
        elif command == "history":
            _emit({"events": [r.to_payload() for r in ledger.item_history(args.id)]})
        elif command == "transition":
            item, record = ledger.fire_transition(
                args.id,
                args.activity,
                args.transition,
                _require_agent(args),
                outcome_fields=_json_arg(args.outcome) if args.outcome else None,
            )
            _emit({"item": item.to_payload(), "event": record.to_payload()})
        else:
            _emit(ledger.migrate_item(args.id, args.version, _require_agent(args)).to_payload())

    elif group == "dataset":
        dataset = base.register_dataset(_json_arg(args.metadata), _json_arg(args.elements), _require_agent(args))
        _emit(dataset.to_payload())

    elif group == "pipeline":
        pipeline = base.register_pipeline(
            args.script, _json_arg(args.env), _json_arg(args.dirs), _json_arg(args.stages), _require_agent(args)
        )
        _emit(pipeline.to_payload())

    elif group == "analysis":
        if command == "define":
            _emit(base.define_analysis(_require_agent(args)).to_payload())
        elif command == "dataset":
            analysis = base.set_working_dataset(
                args.id, args.dataset, _csv_list(args.elements), _require_agent(args)
            )
            _emit(analysis.to_payload())
        elif command == "pipeline":
            analysis = base.set_working_pipeline(
                args.id, args.pipeline, _json_arg(args.parameters), _require_agent(args)
            )
            _emit(analysis.to_payload())
        elif command == "run":
            elements = base.run_analysis(args.id, _require_agent(args), _broker(args, ledger))
            _emit({"elements": [e.to_payload() for e in elements]})
        elif command == "rerun":
            analysis = base.rerun_analysis(
                args.id,
                _require_agent(args),
                _broker(args, ledger),
                parameters=_json_arg(args.parameters) if args.parameters else None,
                element_ids=_csv_list(args.elements) if args.elements else None,
            )
            _emit(analysis.to_payload())
        elif command == "status":
            _emit(base.get_analysis(args.id, _require_agent(args)).to_payload())
        elif command == "consolidate":
            _emit(base.consolidate(args.id, _require_agent(args)))
        elif command == "annotate":
            _emit(base.annotate(args.id, args.text, _require_agent(args)).to_payload())
        elif command == "share":
            _emit(base.share_analysis(args.id, args.target, _require_agent(args)).to_payload())
        else:
            _emit({"analyses": base.list_analyses(_require_agent(args))})

    elif group == "query":
        predicates = [provenance.Predicate.parse(text) for text in args.filter]
        if command == "items":
            table = provenance.query_items(ledger, args.kind, predicates, agent=args.agent)
        else:
            table = provenance.query_events(ledger, predicates)
        _emit_table(table, args.format)

    else:  # prov export
        _emit(provenance.export_prov(ledger, args.analysis, _require_agent(args)).to_payload())


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.group == "serve":
        import uvicorn

        from .api.app import create_app

        uvicorn.run(create_app(store_path=args.store, where=args.where, ui_dir=args.ui), host=args.host, port=args.port)
        return 0
    try:
        ledger = Ledger.from_env(args.store, where=args.where)
    except LedgerError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN_EXIT
    try:
        run(args, ledger)
    except LedgerError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN_EXIT
    finally:
        ledger.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
