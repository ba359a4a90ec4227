"""Proof scripts (``.btp``): parsing and checking.

A script proves lemmas of a theory, either by a chain of rewrites from the
left side to the right side, or by !-box induction with a base and a step
block. Each ``-> rule`` line names a rule (or ``ih`` inside a step block)
plus optional hints::

    prove merge {
      by induction B {
        base {
          -> Tbase
          -> unitR
          qed
        }
        step {
          -> Tstep
          -> assoc rev
          -> ih
          -> Tstep rev ops { copy A (A->A.1, y->y.2) }
          qed
        }
      }
    }
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .boxops import OpError, OpStep
from .calculus import (
    BoundaryMismatch, DerivationError, Equation, MatchError, Theory, check_equation,
    eq_op, find_matches, rewrite,
)
from .canon import equiv
from .syntax import ParseError, SourceSpan, parse_tensor
from .terms import IllFormed, Tensor, validate

IH = "ih"
PROVED = "proved"
FAILURE = "failure"
BASE_FAILURE = "base-failure"
STEP_FAILURE = "step-failure"
FIXED_BOX = "fixed-box-violation"


# ---------------------------------------------------------------------------
# syntax tree


@dataclass
class StepLine:
    rule: str
    span: SourceSpan
    reverse: bool = False
    path: Optional[Tuple[str, ...]] = None
    pick: int = 1
    ops: Optional[List[OpStep]] = None
    rename: Dict[str, str] = field(default_factory=dict)


@dataclass
class Chain:
    steps: List[StepLine]
    span: SourceSpan
    start: str = "lhs"
    qed: Optional[SourceSpan] = None


@dataclass
class Induction:
    box: str
    span: SourceSpan
    base: "Body"
    step: "Body"
    fresh: Optional[Dict[str, str]] = None


Body = Union[Chain, Induction]


@dataclass
class Proof:
    lemma: str
    span: SourceSpan
    body: Body
    statement: Optional[Tuple[tuple, tuple]] = None


@dataclass
class ProofScript:
    proofs: List[Proof]
    theory: Optional[str] = None


# ---------------------------------------------------------------------------
# parsing

_NAME = r"[A-Za-z0-9_'.]+"


class _Lines:
    def __init__(self, text: str):
        self.items = []
        offset = 0
        for no, raw in enumerate(text.split("\n"), start=1):
            start = offset
            offset += len(raw.encode()) + 1
            # '#' opens a comment unless it is glued to a path (``at A#2``)
            m = re.search(r"(^|\s)#", raw)
            line = raw if m is None else raw[:m.start()]
            if line.strip():
                lead = len(line) - len(line.lstrip())
                body = line.strip()
                s = start + len(line[:lead].encode())
                self.items.append((body, SourceSpan(s, s + len(body.encode()), no, lead + 1)))
        self.pos = 0
        self.end_span = SourceSpan(len(text.encode()), len(text.encode()), text.count("\n") + 1, 1)

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, self.end_span)

    def next(self):
        item = self.peek()
        if item[0] is None:
            raise ParseError("unexpected end of script", self.end_span)
        self.pos += 1
        return item


def parse_fresh_map(text: str, span: SourceSpan) -> Dict[str, str]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(rf"({_NAME})\s*->\s*({_NAME})", part)
        if not m:
            raise ParseError(f"bad name pair {part!r}", span)
        out[m.group(1)] = m.group(2)
    return out


def parse_op_step(text: str, span: SourceSpan) -> OpStep:
    text = text.strip()
    m = re.fullmatch(rf"(kill|drop|exp|copy)\s+({_NAME})\s*(?:\((.*)\))?", text)
    if m:
        kind, box, fr = m.groups()
        if fr is not None and kind in ("kill", "drop"):
            raise ParseError(f"{kind} takes no freshness map", span)
        return OpStep(kind, box, parse_fresh_map(fr, span) if fr is not None else None)
    m = re.fullmatch(rf"weaken\s+({_NAME})\s*\{{(.*)\}}", text)
    if m:
        return OpStep("weaken", m.group(1), payload=parse_tensor(m.group(2), span))
    raise ParseError(f"bad operation {text!r}", span)


def _split_ops(text: str) -> List[str]:
    """Split an operation list on ';' or newlines outside braces."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch in ";\n" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def parse_op_seq(text: str, span: Optional[SourceSpan] = None) -> List[OpStep]:
    span = span or SourceSpan(0, len(text.encode()), 1, 1)
    return [parse_op_step(p, span) for p in _split_ops(text)]


def _braced(text: str, i: int, span: SourceSpan) -> Tuple[str, int]:
    """Content of the brace group opening at ``text[i]`` and the index after it."""
    depth = 0
    for j in range(i, len(text)):
        if text[j] == "{":
            depth += 1
        elif text[j] == "}":
            depth -= 1
            if depth == 0:
                return text[i + 1:j], j + 1
    raise ParseError("unbalanced braces", span)


def parse_step_line(text: str, span: SourceSpan) -> StepLine:
    m = re.match(rf"->\s*({_NAME})", text)
    if not m:
        raise ParseError("expected '-> <rule>'", span)
    st = StepLine(m.group(1), span)
    i = m.end()
    while True:
        while i < len(text) and text[i].isspace():
            i += 1
        if i >= len(text):
            return st
        rest = text[i:]
        if re.match(r"rev\b", rest):
            st.reverse = True
            i += 3
            continue
        m = re.match(rf"at\s+(\.|{_NAME}(?:/{_NAME})*)(?:#(\d+))?", rest)
        if m:
            st.path = () if m.group(1) == "." else tuple(m.group(1).split("/"))
            st.pick = int(m.group(2) or 1)
            i += m.end()
            continue
        m = re.match(r"(ops|rename)\s*\{", rest)
        if m:
            body, j = _braced(text, i + m.end() - 1, span)
            if m.group(1) == "ops":
                st.ops = (st.ops or []) + parse_op_seq(body, span)
            else:
                st.rename.update(parse_fresh_map(body, span))
            i = j
            continue
        m = re.match(rf"weaken\s+({_NAME})\s*\{{", rest)
        if m:
            body, j = _braced(text, i + m.end() - 1, span)
            st.ops = (st.ops or []) + [OpStep("weaken", m.group(1), payload=parse_tensor(body, span))]
            i = j
            continue
        raise ParseError(f"unexpected {rest.split()[0]!r} in step", span)


def _parse_body(lines: _Lines, span: SourceSpan) -> Body:
    text, sp = lines.peek()
    if text is not None and text.startswith("by induction"):
        return _parse_induction(lines)
    chain = Chain([], span)
    while True:
        text, sp = lines.next()
        if text == "}":
            return chain
        if text in ("lhs", "rhs"):
            if chain.steps:
                raise ParseError(f"'{text}' must come first", sp)
            chain.start = text
        elif text == "qed":
            chain.qed = sp
        elif text.startswith("->"):
            if chain.qed is not None:
                raise ParseError("step after qed", sp)
            chain.steps.append(parse_step_line(text, sp))
        else:
            raise ParseError(f"unexpected line {text!r}", sp)


def _expect_close(lines: _Lines) -> None:
    text, sp = lines.next()
    if text != "}":
        raise ParseError("expected '}'", sp)


def _parse_induction(lines: _Lines) -> Induction:
    text, sp = lines.next()
    m = re.fullmatch(rf"by induction\s+({_NAME})\s*(?:\((.*)\))?\s*\{{", text)
    if not m:
        raise ParseError("expected: by induction <box> [(fresh map)] {", sp)
    fresh = parse_fresh_map(m.group(2), sp) if m.group(2) is not None else None
    blocks = {}
    for _ in range(2):
        t2, sp2 = lines.next()
        m2 = re.fullmatch(r"(base|step)\s*\{", t2)
        if not m2 or m2.group(1) in blocks:
            raise ParseError("expected 'base {' or 'step {'", sp2)
        blocks[m2.group(1)] = _parse_body(lines, sp2)
    _expect_close(lines)
    return Induction(m.group(1), sp, blocks["base"], blocks["step"], fresh)


def parse_proof_script(text: str) -> ProofScript:
    lines = _Lines(text)
    script = ProofScript([])
    while lines.peek()[0] is not None:
        t, sp = lines.next()
        m = re.fullmatch(rf"theory\s+({_NAME})", t)
        if m:
            script.theory = m.group(1)
            continue
        m = re.fullmatch(rf"prove\s+({_NAME})\s*(?::(.*))?\{{", t)
        if not m:
            raise ParseError("expected 'prove <lemma> {'", sp)
        stmt = None
        if m.group(2) and m.group(2).strip():
            from .syntax import parse_equation_text
            stmt = parse_equation_text(m.group(2), sp)
        body = _parse_body(lines, sp)
        if isinstance(body, Induction):
            _expect_close(lines)
        script.proofs.append(Proof(m.group(1), sp, body, stmt))
    return script


# ---------------------------------------------------------------------------
# checking


@dataclass
class Verdict:
    lemma: str
    status: str
    message: str = ""
    span: Optional[SourceSpan] = None
    step_index: Optional[int] = None
    block: str = ""

    @property
    def ok(self) -> bool:
        return self.status == PROVED

    def __str__(self) -> str:
        s = f"{self.lemma}: {self.status}"
        if self.block:
            s += f" [{self.block}]"
        if self.step_index is not None:
            s += f" at step {self.step_index}"
        if self.span is not None:
            s += f" ({self.span})"
        if self.message:
            s += f": {self.message}"
        return s


class _Fail(Exception):
    def __init__(self, status, message, span=None, index=None, block=""):
        super().__init__(message)
        self.status, self.message, self.span, self.index, self.block = status, message, span, index, block


@dataclass
class _Ctx:
    rules: Dict[str, Equation]
    ih: Optional[Equation] = None
    fixed: Optional[str] = None
    max_ops: int = 2


def _touches(ops, box) -> bool:
    return any(s.box == box and s.kind != "weaken" for s in ops)


def apply_step_line(t: Tensor, line: StepLine, ctx: _Ctx) -> Tensor:
    """One rewrite; raises _Fail with status FAILURE or FIXED_BOX."""
    is_ih = line.rule == IH
    if is_ih:
        if ctx.ih is None:
            raise _Fail(FAILURE, "ih is only available in a step block", line.span)
        eq = ctx.ih
    elif line.rule in ctx.rules:
        eq = ctx.rules[line.rule]
    else:
        raise _Fail(FAILURE, f"unknown rule {line.rule}", line.span)
    if is_ih and line.ops is not None and _touches(line.ops, ctx.fixed):
        raise _Fail(FIXED_BOX, f"ih instantiates the fixed !-box {ctx.fixed}", line.span)
    kw = dict(reverse=line.reverse, path=line.path, rename=line.rename or None,
              max_ops=ctx.max_ops, ops=line.ops)
    fixed = ctx.fixed if is_ih else None
    try:
        if line.pick == 1:
            certs = find_matches(t, eq, line.rule, fixed=fixed, first_only=True, **kw)
        else:
            certs = find_matches(t, eq, line.rule, fixed=fixed, **kw)[line.pick - 1:line.pick]
    except (OpError, DerivationError, BoundaryMismatch, IllFormed) as e:
        raise _Fail(FAILURE, f"cannot prepare {line.rule}: {e}", line.span)
    if not certs:
        if is_ih and line.ops is None and find_matches(t, eq, line.rule, first_only=True, **kw):
            raise _Fail(FIXED_BOX, f"ih only applies by instantiating the fixed !-box {ctx.fixed}", line.span)
        raise _Fail(FAILURE, f"{line.rule} does not apply to {t}", line.span)
    return rewrite(t, certs[0], eq)


def _run_chain(goal: Equation, chain: Chain, ctx: _Ctx, block: str) -> None:
    t = goal.lhs if chain.start == "lhs" else goal.rhs
    target = goal.rhs if chain.start == "lhs" else goal.lhs
    for i, line in enumerate(chain.steps, start=1):
        try:
            t = apply_step_line(t, line, ctx)
        except _Fail as f:
            f.index, f.block = i, block
            raise
        except (MatchError, IllFormed) as e:
            raise _Fail(FAILURE, str(e), line.span, i, block)
    if not equiv(t, target):
        span = chain.qed or chain.span
        raise _Fail(FAILURE, f"chain ends at {t}, expected {target}", span, len(chain.steps) + 1, block)


def _run_body(goal: Equation, body: Body, ctx: _Ctx, block: str = "") -> None:
    if isinstance(body, Chain):
        _run_chain(goal, body, ctx, block)
        return
    box = body.box
    if box not in goal.boxes:
        raise _Fail(FAILURE, f"no !-box {box} in the goal", body.span, None, block)
    base_goal = eq_op(goal, OpStep("kill", box))
    step_goal = eq_op(goal, OpStep("exp", box, body.fresh))
    inner = block + "/" if block else ""
    try:
        _run_body(base_goal, body.base, _Ctx(ctx.rules, None, None, ctx.max_ops), inner + "base")
    except _Fail as f:
        if f.status == FAILURE:
            f.status = BASE_FAILURE
        raise
    try:
        _run_body(step_goal, body.step, _Ctx(ctx.rules, goal, box, ctx.max_ops), inner + "step")
    except _Fail as f:
        if f.status == FAILURE:
            f.status = STEP_FAILURE
        raise


def check_proof(goal: Equation, body: Body, rules: Dict[str, Equation], name: str = "goal",
                max_ops: int = 2) -> Verdict:
    try:
        _run_body(goal, body, _Ctx(dict(rules), max_ops=max_ops))
    except _Fail as f:
        return Verdict(name, f.status, f.message, f.span, f.index, f.block)
    except (OpError, BoundaryMismatch, IllFormed) as e:
        return Verdict(name, FAILURE, str(e))
    return Verdict(name, PROVED)


def check_induction(th: Theory, goal: Equation, box: str, base: Body, step: Body,
                    fresh: Optional[Dict[str, str]] = None) -> Verdict:
    """Verdict for an induction on ``box``: proved, base-failure, step-failure or fixed-box-violation."""
    span = SourceSpan(0, 0, 1, 1)
    return check_proof(goal, Induction(box, span, base, step, fresh), th.rules)


@dataclass
class Report:
    verdicts: List[Verdict]
    theory: Theory

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)


def run_proof_script(theory_text: str, script_text: str, max_ops: int = 2) -> Report:
    """Check every proof in order; proved lemmas become rules for later ones."""
    from .calculus import load_theory
    th, lemmas = load_theory(theory_text)
    script = parse_proof_script(script_text)
    verdicts = []
    for p in script.proofs:
        if p.statement is not None:
            try:
                goal = check_equation(validate(p.statement[0]), validate(p.statement[1]))
            except (IllFormed, BoundaryMismatch) as e:
                verdicts.append(Verdict(p.lemma, FAILURE, str(e), p.span))
                continue
        elif p.lemma in lemmas:
            goal = lemmas[p.lemma]
        else:
            verdicts.append(Verdict(p.lemma, FAILURE, f"unknown lemma {p.lemma}", p.span))
            continue
        v = check_proof(goal, p.body, th.rules, p.lemma, max_ops)
        verdicts.append(v)
        if v.ok:
            th = th.with_rule(p.lemma, goal)
    return Report(verdicts, th)
