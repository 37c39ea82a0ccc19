"""Command-line front end.

Results go to stdout as JSON, a short summary goes to stderr. Exit codes:
0 success, 1 validation/usage/parse error, 2 inconsistent model.
"""

from __future__ import annotations

import argparse
import json
import sys
from itertools import product
from typing import Any, Sequence

from . import __version__
from .engine import cycle_weights, cyclic_probability, markov_check
from .errors import CapExceededError, DimensionError, DocumentError, GraphError, ModelError, QcycleError
from .graph import DEFAULT_CAP, CausalGraph
from .io import ModelDocument, load, load_protocols
from .model import bell_protocol, validate_model
from .separation import SeparationQuery, conditionally_independent, d_separated, p_separated

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONSISTENT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> float:
    """Round to 12 significant digits, clamping tiny negatives to zero."""
    x = float(x)
    if -1e-12 <= x < 0:
        x = 0.0
    return float(f"{x:.12g}")


def _ids(text: str | None) -> list[str]:
    if not text:
        return []
    return [s.strip() for s in text.split(",") if s.strip()]


def _emit(doc: dict, summary: str) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    sys.stderr.write(summary.rstrip("\n") + "\n")


def _parse_tele_graph(spec: str, g: CausalGraph):
    if spec == "maximal":
        return "maximal"
    if not spec.startswith("kept="):
        raise UsageError(f"--tele-graph must be 'maximal' or 'kept=<edges>', got {spec!r}")
    body = spec[len("kept="):]
    if body == "all":
        return list(range(len(g.edges)))
    if body in ("", "none"):
        return []
    kept = []
    for item in body.split(","):
        parts = item.strip().split("->")
        if len(parts) != 2:
            raise UsageError(f"edge {item!r} is not written as source->target")
        kept.append((parts[0].strip(), parts[1].strip()))
    return kept


def _protocols(spec: str):
    if spec == "bell":
        return "bell"
    table = load_protocols(spec)
    return lambda d: table.get(d) or bell_protocol(d)


def _sets(args) -> tuple[list[str], list[str], list[str]]:
    x = _ids(args.x) or ([args.pos_x] if args.pos_x else [])
    y = _ids(args.y) or ([args.pos_y] if args.pos_y else [])
    z = _ids(args.z)
    if not x or not y:
        raise UsageError("give non-empty --x and --y sets (or two positional vertex ids)")
    if set(x) & set(y) or set(x) & set(z) or set(y) & set(z):
        raise UsageError("--x, --y and --z must be pairwise disjoint")
    return x, y, z


def _variables_json(variables) -> list[dict]:
    return [{"id": v, "outcomes": list(o)} for v, o in variables]


def _cmd_validate(args) -> int:
    doc = load(args.path)
    if doc.type == "functional":
        rep = doc.functional_model().validate()
        if rep.ok:
            rep.merge(validate_model(doc.causal_model()))
    else:
        rep = validate_model(doc.causal_model())
    out = {
        "command": "validate",
        "name": doc.name,
        "valid": rep.ok,
        "issues": [{"location": i.location, "message": i.message} for i in rep.issues],
    }
    lines = [f"{doc.name or args.path}: {'valid' if rep.ok else 'INVALID'}"]
    lines += [f"  {i.location}: {i.message}" for i in rep.issues]
    _emit(out, "\n".join(lines))
    return EXIT_OK if rep.ok else EXIT_ERROR


def _model(doc: ModelDocument):
    m = doc.causal_model()
    rep = validate_model(m)
    if not rep.ok:
        raise ModelError("; ".join(f"{i.location}: {i.message}" for i in rep.issues))
    return m


def _cmd_prob(args) -> int:
    doc = load(args.path)
    m = _model(doc)
    tg = _parse_tele_graph(args.tele_graph, m.graph)
    r = cyclic_probability(m, tg=tg, protocols=_protocols(args.protocol), route=args.route, threads=args.threads)
    out: dict[str, Any] = {
        "command": "prob",
        "name": doc.name,
        "status": "ok" if r.consistent else "inconsistent",
        "variables": _variables_json(r.variables),
        "success_prob": fmt(r.success_prob),
        "cycle_total": fmt(r.cycle_total),
        "markov": r.markov,
        "table": None,
    }
    if r.distribution is not None:
        out["table"] = [{"outcome": list(k), "p": fmt(p)} for k, p in r.distribution.items()]
        _emit(out, f"{doc.name or args.path}: consistent, success probability {r.success_prob:.6g}, markov={r.markov}")
        return EXIT_OK
    _emit(out, f"{doc.name or args.path}: inconsistent model (success probability {r.success_prob:.3g})")
    return EXIT_INCONSISTENT


def _cmd_sep(args) -> int:
    doc = load(args.path)
    g = doc.graph()
    x, y, z = _sets(args)
    q = SeparationQuery.of(x, y, z)
    try:
        q.validate(g)
    except GraphError as exc:
        raise UsageError(str(exc)) from None
    out: dict[str, Any] = {"command": args.command, "x": x, "y": y, "z": z}
    if args.command == "dsep":
        sep = d_separated(g, q)
    else:
        sep = p_separated(g, q, variant=args.variant, cap=args.cap)
        out["variant"] = args.variant
    out["separated"] = sep
    sym = "_||_" if sep else "not _||_"
    _emit(out, f"{','.join(x)} {sym} {','.join(y)} | {','.join(z) or '{}'} ({args.command})")
    return EXIT_OK


def _cmd_ci(args) -> int:
    doc = load(args.path)
    m = _model(doc)
    x, y, z = _sets(args)
    for v in x + y + z:
        if v not in m.observed:
            raise UsageError(f"{v!r} is not an observed vertex")
    r = cyclic_probability(m, threads=args.threads)
    out: dict[str, Any] = {"command": "ci", "x": x, "y": y, "z": z, "tol": args.tol}
    if r.distribution is None:
        out.update(status="inconsistent", independent=None, max_violation=None)
        _emit(out, "inconsistent model: no distribution to test")
        return EXIT_INCONSISTENT
    res = conditionally_independent(r.distribution, x, y, z, tol=args.tol)
    out.update(status="ok", independent=res.independent, max_violation=fmt(res.max_violation))
    _emit(out, f"independent={res.independent} (max violation {res.max_violation:.3g})")
    return EXIT_OK


def _cmd_markov(args) -> int:
    doc = load(args.path)
    m = _model(doc)
    ok, total = markov_check(m, threads=args.threads)
    _emit({"command": "markov", "name": doc.name, "markov": ok, "cycle_total": fmt(total)},
          f"markov={ok} (sum of cycle weights {total:.12g})")
    return EXIT_OK


def _cmd_selfcycle(args) -> int:
    doc = load(args.path)
    m = _model(doc)
    variables, w = cycle_weights(m, threads=args.threads)
    rows = []
    for idx in product(*(range(len(o)) for _, o in variables)):
        rows.append({"outcome": [o[k] for (_, o), k in zip(variables, idx)], "cycle": fmt(w[idx])})
    _emit({"command": "selfcycle", "name": doc.name, "variables": _variables_json(variables), "weights": rows},
          f"{len(rows)} outcome tuples, total {float(w.sum()):.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcycle", description="Causal models on cyclic graphs: probabilities and graph separation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model document")
    v.add_argument("path")

    pr = sub.add_parser("prob", help="observed distribution")
    pr.add_argument("path")
    pr.add_argument("--tele-graph", default="maximal", help="maximal | kept=all | kept=none | kept=u->v,...")
    pr.add_argument("--protocol", default="bell", help="bell or a protocol JSON file")
    pr.add_argument("--route", default="network", choices=("network", "direct", "composed"))
    pr.add_argument("--threads", type=int, default=1)

    for name, help_ in (("dsep", "d-separation query"), ("psep", "p-separation query")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("path")
        s.add_argument("pos_x", nargs="?", metavar="X")
        s.add_argument("pos_y", nargs="?", metavar="Y")
        s.add_argument("--x")
        s.add_argument("--y")
        s.add_argument("--z")
        if name == "psep":
            s.add_argument("--variant", default="edge", choices=("edge", "vertex"))
            s.add_argument("--cap", type=int, default=DEFAULT_CAP)

    c = sub.add_parser("ci", help="conditional-independence test on the computed distribution")
    c.add_argument("path")
    c.add_argument("pos_x", nargs="?", metavar="X")
    c.add_argument("pos_y", nargs="?", metavar="Y")
    c.add_argument("--x")
    c.add_argument("--y")
    c.add_argument("--z")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--threads", type=int, default=1)

    mk = sub.add_parser("markov", help="Markov property check")
    mk.add_argument("path")
    mk.add_argument("--threads", type=int, default=1)

    sc = sub.add_parser("selfcycle", help="cycle weight of every outcome tuple")
    sc.add_argument("path")
    sc.add_argument("--threads", type=int, default=1)
    return p


_COMMANDS = {
    "validate": _cmd_validate,
    "prob": _cmd_prob,
    "dsep": _cmd_sep,
    "psep": _cmd_sep,
    "ci": _cmd_ci,
    "markov": _cmd_markov,
    "selfcycle": _cmd_selfcycle,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        sys.stderr.write("qcycle: error: --threads must be at least 1\n")
        return EXIT_ERROR
    try:
        return _COMMANDS[args.command](args)
    except DocumentError as exc:
        sys.stderr.write(f"qcycle: parse error at {exc}\n")
    except UsageError as exc:
        sys.stderr.write(f"qcycle: usage error: {exc}\n")
    except (ModelError, GraphError, DimensionError, CapExceededError, QcycleError, ValueError) as exc:
        sys.stderr.write(f"qcycle: error: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
