"""``bangbox``: batch front end.

Exit status is 0 on success, 1 on a semantic failure (ill-formed term,
unproved lemma, counterexample, inapplicable operation) and 2 on usage or
parse errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from .boxops import OpError, apply_ops, enumerate_instances, normalize_ops
from .canon import canonical_string, equiv
from .syntax import ParseError, export_dot, export_json, parse_tensor, print_tensor
from .terms import DirEdge, IllFormed, validate, violations

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _text(arg: str) -> str:
    """Inline text, or the contents of ``arg`` if it names a file."""
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as fh:
            return fh.read()
    return arg


def _term(arg: str):
    return validate(parse_tensor(_text(arg).strip()))


def _emit(args, obj: dict, text: str) -> None:
    print(json.dumps(obj, sort_keys=True) if args.json else text)


def cmd_check(args) -> int:
    pre = parse_tensor(_text(args.term).strip())
    sig = None
    if args.theory:
        from .calculus import load_theory
        sig = load_theory(_text(args.theory))[0].signature
    vs = violations(pre, sig)
    if vs:
        _emit(args, {"valid": False, "violations": [
            {"code": v.code, "subject": v.subject, "message": v.message} for v in vs]},
            "invalid\n" + "\n".join(str(v) for v in vs))
        return FAIL
    t = validate(pre)
    _emit(args, {"valid": True, "free": [str(e) for e in sorted(t.free_edges)]},
          "valid; free edges: " + (" ".join(str(e) for e in sorted(t.free_edges)) or "none"))
    return OK


def cmd_canon(args) -> int:
    s = canonical_string(_term(args.term))
    _emit(args, {"canonical": s}, s)
    return OK


def cmd_eq(args) -> int:
    same = equiv(_term(args.left), _term(args.right))
    _emit(args, {"equivalent": same}, "equivalent" if same else "not equivalent")
    return OK if same else FAIL


def cmd_instances(args) -> int:
    if args.max < 0:
        raise UsageError("--max must be non-negative")
    insts = enumerate_instances(_term(args.term), args.max)
    lines = [print_tensor(i.factors) for i in insts]
    _emit(args, {"instances": lines}, "\n".join(lines))
    return OK


def cmd_op(args) -> int:
    from .proofs import parse_op_seq
    t = _term(args.term)
    ops = parse_op_seq(_text(args.ops))
    try:
        if args.normalize:
            seq = normalize_ops(t, ops)
            _emit(args, {"ops": [str(s) for s in seq]}, "\n".join(str(s) for s in seq))
            return OK
        cur = apply_ops(t, ops)
    except OpError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAIL
    _emit(args, {"result": str(cur)}, str(cur))
    return OK


def _prove_one(theory_text, path, args):
    from .proofs import run_proof_script
    return path, run_proof_script(theory_text, _text(path), max_ops=args.max_ops)


def cmd_prove(args) -> int:
    theory_text = _text(args.theory)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda p: _prove_one(theory_text, p, args), args.scripts))
    model = None
    if args.require_model:
        from .model import load_model
        model = load_model(args.require_model)
    status, out = OK, []
    for path, report in results:
        for v in report.verdicts:
            entry = {"file": path, "lemma": v.lemma, "status": v.status, "message": v.message,
                     "step": v.step_index, "block": v.block,
                     "line": v.span.line if v.span else None, "column": v.span.col if v.span else None}
            line = f"{path}: {v}"
            if v.ok and model is not None:
                from .model import check_rule_in_model
                mv = check_rule_in_model(report.theory.rules[v.lemma], model, args.max_exp)
                entry["model"] = str(mv)
                line += f"; model: {mv}"
                if not mv.ok:
                    status = FAIL
            if not v.ok:
                status = FAIL
            out.append((entry, line))
    if args.json:
        print(json.dumps([e for e, _ in out], sort_keys=True))
    else:
        print("\n".join(l for _, l in out))
    return status


def _parse_order(text: Optional[str]) -> Optional[List[DirEdge]]:
    if text is None:
        return None
    out = []
    for tok in text.replace(",", " ").split():
        if tok[0] not in "+-" or len(tok) < 2:
            raise UsageError(f"bad edge {tok!r} in --order (use +name or -name)")
        out.append(DirEdge(tok[1:], tok[0] == "+"))
    return out


def cmd_eval(args) -> int:
    from .model import ModelError, evaluate, load_model
    t = _term(args.term)
    m = load_model(args.model)
    try:
        r = evaluate(t, m, _parse_order(args.order))
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAIL
    order = [str(e) for e in r.order]
    _emit(args, {"order": order, "array": r.array.tolist(), "p": m.p},
          f"order: {' '.join(order) or '(scalar)'}\n{r.array}")
    return OK


def cmd_export(args) -> int:
    t = _term(args.term)
    text = export_json(t) if args.format == "json" else export_dot(t)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bangbox", description="Work with !-tensor expressions.")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("check", help="validate a term")
    s.add_argument("term")
    s.add_argument("--theory", help="check symbol arities against a theory file")
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("canon", help="print the canonical form")
    s.add_argument("term")
    s.set_defaults(fn=cmd_canon)

    s = sub.add_parser("eq", help="decide equivalence of two terms")
    s.add_argument("left")
    s.add_argument("right")
    s.set_defaults(fn=cmd_eq)

    s = sub.add_parser("instances", help="list concrete instances")
    s.add_argument("term")
    s.add_argument("--max", type=int, default=2, help="expansions per !-box")
    s.set_defaults(fn=cmd_instances)

    s = sub.add_parser("op", help="apply !-box operations")
    s.add_argument("term")
    s.add_argument("ops", help="e.g. 'exp B (a->a1); kill B'")
    s.add_argument("--normalize", action="store_true", help="print the normal-form sequence instead")
    s.set_defaults(fn=cmd_op)

    s = sub.add_parser("prove", help="check proof scripts against a theory")
    s.add_argument("theory")
    s.add_argument("scripts", nargs="+")
    s.add_argument("--require-model", help="also test each proved lemma in this model")
    s.add_argument("--max-exp", type=int, default=2)
    s.add_argument("--max-ops", type=int, default=2, help="bound on preparatory operations when matching")
    s.set_defaults(fn=cmd_prove)

    s = sub.add_parser("eval", help="evaluate a box-free term in a model")
    s.add_argument("term")
    s.add_argument("--model", required=True)
    s.add_argument("--order", help="free edges in output axis order, e.g. '+c -b'")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("export", help="export as JSON or DOT")
    s.add_argument("term")
    s.add_argument("--format", choices=("json", "dot"), default="json")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_export)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return USAGE
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return USAGE
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except IllFormed as e:
        print(f"ill-formed: {e}", file=sys.stderr)
        return FAIL
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
