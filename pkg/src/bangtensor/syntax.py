"""Concrete syntax: parser, printer, theory files, JSON and DOT export.

Grammar (whitespace is insignificant between tokens)::

    tensor   := "1" | factor+
    factor   := "id" "(" "+"name "-"name ")" | "circle" "(" ")"
              | symbol "(" edgeterm ")" | "[" tensor? "]" boxname
    edgeterm := item*
    item     := "+"name | "-"name | "[" edgeterm ">" boxname | "<" edgeterm "]" boxname
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .terms import (
    Atom, BangBox, Circle, DirEdge, Group, IdWire, PreTensor, Tensor,
    edgeterm, flatten_factors,
)

NAME_RE = re.compile(r"[A-Za-z0-9_'.]+")
PUNCT = set("()[]<>+-")
RESERVED = {"id", "circle"}


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan):
        self.span = span
        self.message = message
        super().__init__(f"{span}: {message}")


def _span(text: str, start: int, end: int, base: Optional[SourceSpan] = None) -> SourceSpan:
    """Span for character range [start, end) of ``text``, shifted by ``base``."""
    start = max(0, min(start, len(text)))
    end = max(start, min(end, len(text)))
    line = text.count("\n", 0, start)
    col = start - (text.rfind("\n", 0, start) + 1)
    bstart = len(text[:start].encode())
    bend = bstart + len(text[start:end].encode())
    if base is None:
        return SourceSpan(bstart, bend, line + 1, col + 1)
    return SourceSpan(base.start + bstart, base.start + bend, base.line + line,
                      (base.col + col) if line == 0 else col + 1)


@dataclass
class _Tok:
    kind: str  # "name", a punctuation char, or "eof"
    text: str
    start: int
    end: int


def _lex(text: str) -> List[_Tok]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in PUNCT:
            toks.append(_Tok(c, c, i, i + 1))
            i += 1
        else:
            m = NAME_RE.match(text, i)
            if not m:
                raise ParseError(f"unexpected character {c!r}", _span(text, i, i + 1))
            toks.append(_Tok("name", m.group(), i, m.end()))
            i = m.end()
    toks.append(_Tok("eof", "", n, n))
    return toks


class _Parser:
    def __init__(self, text: str, base: Optional[SourceSpan] = None):
        self.text = text
        self.base = base
        self.toks = _lex(text) if base is None else self._lex_based(text, base)
        self.i = 0

    @staticmethod
    def _lex_based(text, base):
        try:
            return _lex(text)
        except ParseError as e:
            raise ParseError(e.message, _span(text, e.span.start, e.span.end, base)) from None

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, _span(self.text, tok.start, max(tok.end, tok.start + 1), self.base))

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, kind: str) -> _Tok:
        t = self.peek()
        if t.kind != kind:
            want = "a name" if kind == "name" else repr(kind)
            got = "end of input" if t.kind == "eof" else repr(t.text)
            raise self.error(f"expected {want}, found {got}")
        self.i += 1
        return t

    def tensor(self, closer: str) -> PreTensor:
        t = self.peek()
        if t.kind == "name" and t.text == "1" and self.peek(1).kind == closer:
            self.i += 1
            return ()
        factors = []
        while self.peek().kind != closer:
            factors.append(self.factor())
        if closer == "eof" and not factors:
            raise self.error("empty tensor (write 1 for the unit)")
        return tuple(factors)

    def factor(self):
        t = self.peek()
        if t.kind == "[":
            self.i += 1
            body = self.tensor("]")
            self.take("]")
            return BangBox(self.take("name").text, body)
        if t.kind != "name":
            raise self.error(f"expected a factor, found {t.text or 'end of input'!r}")
        if t.text == "1":
            raise self.error("the unit 1 cannot be juxtaposed with other factors")
        self.i += 1
        self.take("(")
        if t.text == "id":
            self.take("+")
            out = self.take("name").text
            self.take("-")
            inp = self.take("name").text
            self.take(")")
            return IdWire(out, inp)
        if t.text == "circle":
            self.take(")")
            return Circle()
        items = self.edgeterm((")",))
        self.take(")")
        return Atom(t.text, items)

    def edgeterm(self, closers) -> Tuple:
        items = []
        while self.peek().kind not in closers:
            t = self.peek()
            if t.kind in ("+", "-"):
                self.i += 1
                items.append(DirEdge(self.take("name").text, t.kind == "+"))
            elif t.kind == "[":
                self.i += 1
                body = self.edgeterm((">",))
                self.take(">")
                items.append(Group(self.take("name").text, body, True))
            elif t.kind == "<":
                self.i += 1
                body = self.edgeterm(("]",))
                self.take("]")
                items.append(Group(self.take("name").text, body, False))
            else:
                got = "end of input" if t.kind == "eof" else repr(t.text)
                raise self.error(f"expected an edge or edge group, found {got}")
        return edgeterm(items)


def parse_tensor(text: str, base: Optional[SourceSpan] = None) -> PreTensor:
    """Parse a !-pretensor expression (not validated)."""
    p = _Parser(text, base)
    out = p.tensor("eof")
    p.take("eof")
    return out


def parse(text: str) -> Tensor:
    """Parse and validate."""
    from .terms import validate
    return validate(parse_tensor(text))


# ---------------------------------------------------------------------------
# printing


def print_items(items) -> str:
    parts = []
    for it in items:
        if isinstance(it, Group):
            body = print_items(it.body)
            parts.append(f"[{body}>{it.box}" if it.cw else f"<{body}]{it.box}")
        else:
            parts.append(str(it))
    return " ".join(parts)


def print_factor(f) -> str:
    if isinstance(f, Atom):
        return f"{f.symbol}({print_items(f.edges)})"
    if isinstance(f, IdWire):
        return f"id(+{f.out} -{f.inp})"
    if isinstance(f, Circle):
        return "circle()"
    return f"[{' '.join(print_factor(g) for g in f.body)}]{f.box}"


def print_tensor(t) -> str:
    factors = t.factors if isinstance(t, Tensor) else flatten_factors(t)
    if not factors:
        return "1"
    return " ".join(print_factor(f) for f in factors)


# ---------------------------------------------------------------------------
# theory files (.bt)


@dataclass
class EquationSource:
    name: str
    lhs: PreTensor
    rhs: PreTensor
    span: SourceSpan
    text: str = ""


@dataclass
class TheoryFile:
    name: str = ""
    symbols: Dict[str, Optional[str]] = field(default_factory=dict)
    rules: Dict[str, EquationSource] = field(default_factory=dict)
    lemmas: Dict[str, EquationSource] = field(default_factory=dict)


_HEAD_RE = re.compile(r"\s*(rule|lemma)\s+([A-Za-z0-9_'.]+)\s*:")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_equation_text(text: str, base: SourceSpan) -> Tuple[PreTensor, PreTensor]:
    if text.count("=") != 1:
        raise ParseError("expected exactly one '=' in equation", base)
    k = text.index("=")
    lhs = parse_tensor(text[:k], base)
    rbase = SourceSpan(base.start + len(text[:k + 1].encode()), base.end, base.line, base.col + k + 1)
    rhs = parse_tensor(text[k + 1:], rbase)
    return lhs, rhs


def parse_word(word: str) -> Optional[str]:
    w = "".join(word.split())
    if w == "var":
        return None
    if not w or set(w) - {"^", "v"}:
        raise ValueError(f"bad arrangement word {word!r}")
    return w


def parse_theory(text: str) -> TheoryFile:
    th = TheoryFile()
    offset = 0
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line_start = offset
        offset += len(raw.encode()) + 1
        line = _strip_comment(raw)
        if not line.strip():
            continue
        lead = len(line) - len(line.lstrip())
        lspan = SourceSpan(line_start + lead, line_start + len(line.rstrip().encode()), lineno, lead + 1)
        words = line.split()
        if words[0] == "theory":
            if len(words) != 2:
                raise ParseError("expected: theory <name>", lspan)
            th.name = words[1]
        elif words[0] == "sym":
            m = re.match(r"\s*sym\s+([A-Za-z0-9_'.]+)\s*:(.*)$", line)
            if not m:
                raise ParseError("expected: sym <name> : var | <word>", lspan)
            name = m.group(1)
            if name in th.symbols:
                raise ParseError(f"duplicate symbol {name}", lspan)
            try:
                th.symbols[name] = parse_word(m.group(2))
            except ValueError as e:
                raise ParseError(str(e), lspan) from None
        elif words[0] in ("rule", "lemma"):
            m = _HEAD_RE.match(line)
            if not m:
                raise ParseError(f"expected: {words[0]} <name>: <tensor> = <tensor>", lspan)
            name = m.group(2)
            if name in th.rules or name in th.lemmas:
                raise ParseError(f"duplicate rule name {name}", lspan)
            body = line[m.end():]
            bspan = SourceSpan(line_start + len(line[:m.end()].encode()), lspan.end, lineno, m.end() + 1)
            lhs, rhs = parse_equation_text(body, bspan)
            src = EquationSource(name, lhs, rhs, lspan, body.strip())
            (th.rules if words[0] == "rule" else th.lemmas)[name] = src
        else:
            raise ParseError(f"unknown declaration {words[0]!r}", lspan)
    return th


# ---------------------------------------------------------------------------
# JSON (lossless) and DOT (lossy) export

JSON_FORMAT = "bangtensor/v1"


def _item_json(it):
    if isinstance(it, Group):
        return {"kind": "group", "dir": "cw" if it.cw else "acw", "box": it.box,
                "body": [_item_json(x) for x in it.body]}
    return {"kind": "edge", "dir": "out" if it.out else "in", "name": it.name}


def _factor_json(f):
    if isinstance(f, Atom):
        return {"kind": "atom", "symbol": f.symbol, "edges": [_item_json(x) for x in f.edges]}
    if isinstance(f, IdWire):
        return {"kind": "id", "out": f.out, "in": f.inp}
    if isinstance(f, Circle):
        return {"kind": "circle"}
    return {"kind": "box", "name": f.box, "body": [_factor_json(g) for g in f.body]}


def to_json_obj(t) -> dict:
    factors = t.factors if isinstance(t, Tensor) else t
    obj = {"format": JSON_FORMAT, "factors": [_factor_json(f) for f in factors]}
    if isinstance(t, Tensor):
        obj["free_edges"] = [{"dir": "out" if e.out else "in", "name": e.name}
                             for e in sorted(t.free_edges)]
    return obj


def export_json(t, indent: Optional[int] = 2) -> str:
    return json.dumps(to_json_obj(t), indent=indent, sort_keys=True)


def _item_from(obj):
    if obj["kind"] == "group":
        return Group(obj["box"], tuple(_item_from(x) for x in obj["body"]), obj["dir"] == "cw")
    if obj["kind"] == "edge":
        return DirEdge(obj["name"], obj["dir"] == "out")
    raise ValueError(f"unknown edge item kind {obj['kind']!r}")


def _factor_from(obj):
    kind = obj["kind"]
    if kind == "atom":
        return Atom(obj["symbol"], edgeterm([_item_from(x) for x in obj["edges"]]))
    if kind == "id":
        return IdWire(obj["out"], obj["in"])
    if kind == "circle":
        return Circle()
    if kind == "box":
        return BangBox(obj["name"], tuple(_factor_from(x) for x in obj["body"]))
    raise ValueError(f"unknown factor kind {kind!r}")


def import_json(text: str) -> PreTensor:
    obj = json.loads(text)
    if obj.get("format") != JSON_FORMAT:
        raise ValueError(f"unsupported format {obj.get('format')!r}")
    return tuple(_factor_from(x) for x in obj["factors"])


def export_dot(t: Tensor, name: str = "G") -> str:
    """Atoms as nodes, bound pairs as edges, !-boxes as clusters."""
    lines = [f"digraph {name} {{", "  compound=true;"]
    ends: Dict[DirEdge, Tuple[str, Optional[Group]]] = {}
    counter = [0]

    def items(node, its, group=None):
        for it in its:
            if isinstance(it, Group):
                items(node, it.body, group or it)
            else:
                ends[it] = (node, group)

    def emit(factors, indent):
        pad = "  " * indent
        for f in factors:
            if isinstance(f, BangBox):
                lines.append(f'{pad}subgraph "cluster_{f.box}" {{')
                lines.append(f'{pad}  label="{f.box}"; style=filled; fillcolor=lightblue;')
                emit(f.body, indent + 1)
                lines.append(f"{pad}}}")
                continue
            node = f"n{counter[0]}"
            counter[0] += 1
            if isinstance(f, Atom):
                lines.append(f'{pad}{node} [label="{f.symbol}", shape=circle];')
                items(node, f.edges)
            elif isinstance(f, IdWire):
                lines.append(f'{pad}{node} [label="id", shape=point];')
                ends[DirEdge(f.out, True)] = (node, None)
                ends[DirEdge(f.inp, False)] = (node, None)
            else:
                lines.append(f'{pad}{node} [label="circle", shape=doublecircle];')

    emit(t.factors, 1)
    for e in sorted(ends):
        if not e.out:
            continue
        src, g_out = ends[e]
        if DirEdge(e.name, False) in ends:
            dst, g_in = ends[DirEdge(e.name, False)]
            attrs = [f'label="{e.name}"']
            g = g_out or g_in
            if g is not None:
                attrs.append(f'group_dir="{"cw" if g.cw else "acw"}"')
                attrs.append(f'group_box="{g.box}"')
            lines.append(f"  {src} -> {dst} [{', '.join(attrs)}];")
    for e in sorted(t.free_edges):
        node, g = ends[e]
        fid = f'"free_{"out" if e.out else "in"}_{e.name}"'
        lines.append(f'  {fid} [label="{e.name}", shape=plaintext];')
        attrs = f' [group_dir="{"cw" if g.cw else "acw"}", group_box="{g.box}"]' if g else ""
        lines.append(f"  {node} -> {fid}{attrs};" if e.out else f"  {fid} -> {node}{attrs};")
    lines.append("}")
    return "\n".join(lines) + "\n"
