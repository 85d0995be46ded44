"""Command-line driver: parse, validate, derive, saturate, check, export.

Exit codes: 0 pass or success, 1 fail, 2 inconclusive, 3 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import bisim, dsl, logic, model
from .semantics import StateCapExceeded, derive_open_automaton
from .weak import SaturationBudgetExceeded, saturate

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
VERDICT_EXIT = {"Pass": EXIT_OK, "Fail": EXIT_FAIL, "Inconclusive": EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list
    include: list = field(default_factory=list)
    weak_depth: int = 3
    state_cap: int = 10_000
    simplify: bool = True
    fmt: str = "text"
    smt_cmd: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.weak_depth < 0:
            raise UsageError("--weak-depth must be >= 0")
        if self.state_cap < 1:
            raise UsageError("--state-cap must be >= 1")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--include", action="append", default=[], metavar="DIR",
                        help="directory searched for imports")
    common.add_argument("--format", dest="fmt", choices=("text", "json", "dot"), default="text")
    common.add_argument("--state-cap", type=int, default=10_000, metavar="N")
    common.add_argument("--no-simplify", action="store_true", help="keep guards unsimplified")

    ap = argparse.ArgumentParser(prog="openpnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and print a .pnet file")
    p.add_argument("file")
    p = sub.add_parser("validate", parents=[common], help="structural and non-observability checks")
    p.add_argument("file")
    p = sub.add_parser("derive", parents=[common], help="derive the open automaton")
    p.add_argument("file")
    p.add_argument("--stats", action="store_true", help="print state and transition counts only")
    p = sub.add_parser("saturate", parents=[common], help="derive the weak open automaton")
    p.add_argument("file")
    p.add_argument("--weak-depth", type=int, default=3, metavar="N")
    p.add_argument("--stats", action="store_true")
    p = sub.add_parser("check", parents=[common], help="check a relation between two pNets")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--weak", dest="mode", action="store_const", const="weak")
    mode.add_argument("--strong", dest="mode", action="store_const", const="strong")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("relation")
    p.add_argument("--weak-depth", type=int, default=3, metavar="N")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.add_argument("--smt-cmd", default=None, help="external solver command (default $OPENPNET_SMT_CMD)")
    p.add_argument("--verbose", action="store_true", help="list valid obligations too")
    p.set_defaults(mode="weak")
    p = sub.add_parser("export", parents=[common], help="export the pNet or its automata")
    p.add_argument("file")
    p.add_argument("--what", choices=("pnet", "automaton", "weak"), default="automaton")
    p.add_argument("--weak-depth", type=int, default=3, metavar="N")
    return ap


def _load(path, cfg, err):
    if not os.path.isfile(path):
        raise UsageError(f"{path}: no such file")
    pnet, diags = dsl.load(path, cfg.include, strict=False)
    for d in diags:
        if d.severity != "error":
            print(f"{path}: {d}", file=err)
    errors = [d for d in diags if d.severity == "error"]
    if errors or pnet is None:
        raise dsl.ElaborationError(errors or diags)
    return pnet


def _emit(text, out):
    out.write(text if text.endswith("\n") else text + "\n")


def _dump_json(obj, out):
    _emit(json.dumps(obj, indent=2), out)


def cmd_parse(args, cfg, out, err):
    pnet = _load(args.file, cfg, err)
    if cfg.fmt == "json":
        _dump_json(model.to_json(pnet), out)
    else:
        _emit(dsl.print_source(pnet), out)
    return EXIT_OK


def cmd_validate(args, cfg, out, err):
    path = args.file
    if not os.path.isfile(path):
        raise UsageError(f"{path}: no such file")
    pnet, diags = dsl.load(path, cfg.include, strict=False)
    errors = [d for d in diags if d.severity == "error"]
    for d in diags:
        print(f"{path}: {d}", file=err if d.severity != "error" else out)
    if errors or pnet is None:
        return EXIT_USAGE
    report = model.check_non_observability(pnet)
    _emit(f"ok; {report}", out)
    return EXIT_OK if report.ok else EXIT_FAIL


def _derive(path, cfg, err):
    return derive_open_automaton(_load(path, cfg, err), simplify=cfg.simplify, state_cap=cfg.state_cap)


def cmd_derive(args, cfg, out, err):
    oa = _derive(args.file, cfg, err)
    if args.stats:
        _emit(oa.stats(), out)
        _emit(f"Total: {len(oa.transitions)} SATISFIABLE OTs", out)
        _emit(f"Total: {oa.unsatisfiable} UNSATISFIABLE OTs "
              f"({oa.satisfiable} satisfiable candidates before deduplication)", out)
    elif cfg.fmt == "json":
        _dump_json(oa.to_json(), out)
    elif cfg.fmt == "dot":
        _emit(oa.to_dot(), out)
    else:
        _emit(f"{oa.name}: {oa.stats()}; initial {oa.initial.label}", out)
        for t in oa.transitions:
            _emit(str(t), out)
    return EXIT_OK


def cmd_saturate(args, cfg, out, err):
    woa = saturate(_derive(args.file, cfg, err), cfg.weak_depth)
    if args.stats:
        _emit(f"{len(woa.states)} states, {len(woa.transitions)} weak open transitions "
              f"(depth {woa.depth})", out)
    elif cfg.fmt == "json":
        _dump_json(woa.to_json(), out)
    elif cfg.fmt == "dot":
        _emit(woa.to_dot(), out)
    else:
        _emit(woa.table(), out)
    return EXIT_OK


def cmd_check(args, cfg, out, err):
    if not os.path.isfile(args.relation):
        raise UsageError(f"{args.relation}: no such file")
    p1 = _load(args.left, cfg, err)
    p2 = _load(args.right, cfg, err)
    if args.mode == "weak":
        for path, p in ((args.left, p1), (args.right, p2)):
            rep = model.check_non_observability(p)
            if not rep.ok:
                print(f"{path}: warning: {rep}", file=err)
    a1 = derive_open_automaton(p1, simplify=cfg.simplify, state_cap=cfg.state_cap)
    a2 = derive_open_automaton(p2, simplify=cfg.simplify, state_cap=cfg.state_cap)
    a1, a2 = bisim.align(a1, a2)
    rel = bisim.load_relation_file(args.relation, a1, a2)
    if args.mode == "strong":
        report = bisim.check_strong(a1, a2, rel, jobs=cfg.jobs)
    else:
        report = bisim.check_weak(a1, a2, rel, depth=cfg.weak_depth, jobs=cfg.jobs)
    extra = _cross_check(report, cfg.smt_cmd, err)
    if cfg.fmt == "json":
        data = report.to_json()
        for rec, smt in zip(data["obligations"], extra):
            if smt:
                rec["smt"] = smt
        _dump_json(data, out)
    else:
        _emit(report.to_text(verbose=args.verbose), out)
        for o, smt in zip(report.obligations, extra):
            if smt:
                _emit(f"external solver on {o.challenge} at {o.triple}: {smt}", out)
    return VERDICT_EXIT[report.verdict]


def _cross_check(report, command, err):
    """Optionally run the external solver on every obligation that is not valid."""
    results = [""] * len(report.obligations)
    if not command:
        return results
    for k, o in enumerate(report.obligations):
        if o.status == "valid":
            continue
        try:
            results[k] = logic.run_external_solver(logic.to_smtlib(o.formula), command)
        except (OSError, RuntimeError, ValueError) as exc:
            print(f"warning: external solver: {exc}", file=err)
            return results
    return results


def cmd_export(args, cfg, out, err):
    if args.what == "pnet":
        pnet = _load(args.file, cfg, err)
        if cfg.fmt == "json":
            _dump_json(model.to_json(pnet), out)
        elif cfg.fmt == "dot":
            _emit(_pnet_dot(pnet), out)
        else:
            _emit(dsl.print_source(pnet), out)
        return EXIT_OK
    oa = _derive(args.file, cfg, err)
    target = oa if args.what == "automaton" else saturate(oa, cfg.weak_depth)
    if cfg.fmt == "json":
        _dump_json(target.to_json(), out)
    else:
        _emit(target.to_dot(), out)
    return EXIT_OK


def _pnet_dot(p) -> str:
    """The pNet tree: nodes, leaves and holes."""
    lines = [f'digraph "{p.name}" {{']

    def walk(q, ident):
        if isinstance(q, model.PLTS):
            lines.append(f'  "{ident}" [shape=box, label="{q.name}"];')
            return
        lines.append(f'  "{ident}" [shape=ellipse, label="{q.name}"];')
        for idx, child in q.children:
            walk(child, f"{ident}/{idx}")
            lines.append(f'  "{ident}" -> "{ident}/{idx}" [label="{idx}"];')
        for idx, _ in q.holes:
            lines.append(f'  "{ident}/{idx}" [shape=circle, style=dashed, label="{idx}"];')
            lines.append(f'  "{ident}" -> "{ident}/{idx}" [label="{idx}"];')

    walk(p, p.name)
    lines.append("}")
    return "\n".join(lines)


COMMANDS = {
    "parse": cmd_parse,
    "validate": cmd_validate,
    "derive": cmd_derive,
    "saturate": cmd_saturate,
    "check": cmd_check,
    "export": cmd_export,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = RunConfig(
            command=args.command,
            inputs=[getattr(args, k) for k in ("file", "left", "right", "relation") if hasattr(args, k)],
            include=args.include,
            weak_depth=getattr(args, "weak_depth", 3),
            state_cap=args.state_cap,
            simplify=not args.no_simplify,
            fmt=args.fmt,
            smt_cmd=getattr(args, "smt_cmd", None) or os.environ.get("OPENPNET_SMT_CMD"),
            jobs=getattr(args, "jobs", 1),
        )
        return COMMANDS[args.command](args, cfg, out, err)
    except UsageError as exc:
        print(f"openpnet: {exc}", file=err)
    except dsl.ParseError as exc:
        print(f"openpnet: parse error: {exc}", file=err)
    except dsl.ElaborationError as exc:
        for d in exc.diagnostics:
            print(f"openpnet: {d}", file=err)
    except bisim.RelationError as exc:
        print(f"openpnet: relation: {exc}", file=err)
    except (StateCapExceeded, SaturationBudgetExceeded, OSError) as exc:
        print(f"openpnet: {exc}", file=err)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
