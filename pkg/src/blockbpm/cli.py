"""Batch interface over the library: validate, analyze, run, explore, export.

Thin shell by design: every command parses its input with persistence, calls
the same library operations the service calls, prints, and maps results to
stable exit codes (scripts depend on them):

    0  success / Completed
    1  malformed or invalid input, or failed check
    2  run ended Deadlocked
    3  run ended StepLimit
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine as eng
from . import explore as xpl
from .errors import BlockBpmError, PersistenceError
from .model import validate_model
from .notation import design_lints, ontological_analysis
from .persistence import (
    document_kind,
    export_dot,
    from_xml,
    model_to_json,
    notation_from_xml,
    trace_to_xml,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEADLOCKED = 2
EXIT_STEP_LIMIT = 3

_STATUS_EXIT = {
    eng.InstanceStatus.COMPLETED: EXIT_OK,
    eng.InstanceStatus.DEADLOCKED: EXIT_DEADLOCKED,
    eng.InstanceStatus.STEP_LIMIT: EXIT_STEP_LIMIT,
}


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_model(path: str):
    return from_xml(_read(path))


def cmd_validate(args) -> int:
    model, _layout = _load_model(args.file)
    violations = validate_model(model)
    for v in violations:
        print(v)
    errors = [v for v in violations if v.severity == "error"]
    return EXIT_ERROR if errors else EXIT_OK


def cmd_analyze_notation(args) -> int:
    notation = notation_from_xml(_read(args.file))
    report = ontological_analysis(notation)
    for label, items in (
        ("deficit", report.deficits),
        ("redundancy", report.redundancies),
        ("overload", report.overloads),
        ("excess", report.excesses),
    ):
        for item in items:
            print(f"{label}: {item}")
    for lint in design_lints(notation):
        print(f"lint {lint.code}: {lint.detail}")
    return EXIT_OK if report.empty else EXIT_ERROR


def cmd_run(args) -> int:
    model, _layout = _load_model(args.file)
    policy = eng.SchedulerPolicy.SEEDED_RANDOM if args.seed is not None else eng.SchedulerPolicy.ROUND_ROBIN
    config = eng.SchedulerConfig(
        policy=policy,
        seed=args.seed if args.seed is not None else 0,
        max_steps=args.max_steps,
        multiplicities=tuple(sorted(_parse_multiplicities(args.multiplicity))),
    )
    instance = eng.instantiate(model, config)
    trace, status = eng.run(instance)
    if args.trace:
        Path(args.trace).write_text(eng.trace_lines(trace), encoding="utf-8")
    elif not args.quiet:
        sys.stdout.write(eng.trace_lines(trace))
    print(f"status: {status.value} after {instance.steps_taken} steps at clock {instance.clock}")
    return _STATUS_EXIT[status]


def _parse_multiplicities(items: list[str]) -> list[tuple[str, int]]:
    out = []
    for item in items:
        subject, _, count = item.partition("=")
        if not count:
            raise BlockBpmError(f"expected SUBJECT=N, got {item!r}")
        try:
            out.append((subject, int(count)))
        except ValueError:
            raise BlockBpmError(f"multiplicity {count!r} is not an integer")
    return out


def cmd_explore(args) -> int:
    model, _layout = _load_model(args.file)
    bounds = xpl.ExplorationBounds(
        max_states=args.max_states, max_mailbox=args.max_mailbox, max_depth=args.max_depth
    )
    result = xpl.state_space(model, bounds)
    print(f"states: {result.states_visited}")
    print(f"complete: {'yes' if result.terminal_complete else 'no (bounds hit)'}")
    for subject, reached in sorted(result.end_reachability.items()):
        print(f"end-reachable {subject}: {'yes' if reached else 'no'}")
    for i, (state, witness) in enumerate(result.deadlocks):
        print(f"deadlock {i}:")
        for view in state.agents:
            queue = ", ".join(f"{m}<-{s}" for m, s in view.mailbox) or "empty"
            print(f"  {view.agent} at {view.state} (mailbox: {queue})")
        if witness:
            print("  witness:")
            for c in witness:
                detail = f" {c.outcome}" if c.outcome else ""
                print(f"    {c.agent} {c.kind}{detail}")
        else:
            print("  witness: initial state")
    ok = result.terminal_complete and not result.deadlocks
    return EXIT_OK if ok else EXIT_ERROR


def cmd_export(args) -> int:
    raw = _read(args.file)
    if args.format == "dot":
        model, _layout = from_xml(raw)
        sys.stdout.write(export_dot(model))
    else:
        kind = document_kind(raw)
        if kind == "model":
            model, layout = from_xml(raw)
            json.dump(model_to_json(model, layout), sys.stdout, indent=2, sort_keys=True)
        elif kind == "notation":
            from .persistence import notation_to_json

            json.dump(notation_to_json(notation_from_xml(raw)), sys.stdout, indent=2, sort_keys=True)
        else:
            raise PersistenceError(f"cannot export documents of kind {kind!r} to json")
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_trace_export(args) -> int:
    # convenience: replay a run and emit the structured trace document
    model, _layout = _load_model(args.file)
    config = eng.SchedulerConfig(seed=args.seed or 0, max_steps=args.max_steps)
    instance = eng.instantiate(model, config)
    trace, status = eng.run(instance)
    sys.stdout.write(
        trace_to_xml(trace, model_id=model.id, status=status.value, clock=instance.clock)
    )
    return _STATUS_EXIT[status]


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, instance_ttl=args.instance_ttl)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockbpm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model document; exit 0 iff clean")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze-notation", help="anomaly report and design lints for a notation")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze_notation)

    p = sub.add_parser("run", help="execute a model; exit encodes the final status")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=None, help="seeded-random scheduling (round-robin when omitted)")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--trace", default=None, help="write the line-delimited trace here")
    p.add_argument("--multiplicity", action="append", default=[], metavar="SUBJECT=N")
    p.add_argument("--quiet", action="store_true", help="suppress trace output on stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="bounded state-space search; exit 0 iff complete and deadlock-free")
    p.add_argument("file")
    p.add_argument("--max-states", type=int, default=10_000)
    p.add_argument("--max-mailbox", type=int, default=4)
    p.add_argument("--max-depth", type=int, default=1_000)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("export", help="convert a document to dot or json on stdout")
    p.add_argument("file")
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("trace", help="run a model and emit the structured trace document")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.set_defaults(func=cmd_trace_export)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--instance-ttl", type=float, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except BlockBpmError as exc:
        print(f"error {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
