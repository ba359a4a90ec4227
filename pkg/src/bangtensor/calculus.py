"""Equations between !-tensors and the rules for deriving new ones.

An :class:`Equation` is a pair of tensors with compatible boundaries. New
equations arise from old ones by the structural rules (product, boxing,
renaming, weakening) and by applying a !-box operation to both sides with a
shared freshness map. Rewriting a term with an equation is certificate
based: a :class:`MatchCert` records exactly how the rule was prepared and
where its side was found, and :func:`rewrite` replays it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .boxops import (
    OpError, OpStep, apply_step, default_fresh, needed_names,
)
from .canon import equiv, equiv_upto_renaming, full_canonical
from .terms import (
    Atom, BangBox, IdWire, IllFormed, PreTensor, RenameError, Signature,
    Tensor, flatten_factors, fresh_name, rename_factors, rename_free, validate,
    violations,
)


class BoundaryMismatch(ValueError):
    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class DerivationError(ValueError):
    pass


def boundary_problems(lhs: Tensor, rhs: Tensor) -> List[str]:
    out = []
    fl, fr = lhs.free_edges, rhs.free_edges
    for e in sorted(fl - fr):
        out.append(f"free edge {e} only on the left")
    for e in sorted(fr - fl):
        out.append(f"free edge {e} only on the right")
    for b in sorted(lhs.boxes - rhs.boxes):
        out.append(f"!-box {b} only on the left")
    for b in sorted(rhs.boxes - lhs.boxes):
        out.append(f"!-box {b} only on the right")
    for b in sorted(lhs.boxes & rhs.boxes):
        if lhs.parent[b] != rhs.parent[b]:
            out.append(f"!-box {b} nested differently ({lhs.parent[b]} vs {rhs.parent[b]})")
    for e in sorted(fl & fr):
        if lhs.ctx(e) != rhs.ctx(e):
            out.append(f"context of {e} differs: {list(lhs.ctx(e))} vs {list(rhs.ctx(e))}")
    return out


@dataclass(frozen=True)
class Equation:
    lhs: Tensor
    rhs: Tensor

    def __post_init__(self):
        problems = boundary_problems(self.lhs, self.rhs)
        if problems:
            raise BoundaryMismatch(problems)

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"

    def flipped(self) -> "Equation":
        return Equation(self.rhs, self.lhs)

    @property
    def boxes(self):
        return self.lhs.boxes

    @property
    def names(self):
        return self.lhs.names | self.rhs.names


def check_equation(lhs, rhs) -> Equation:
    """Validate both sides and their boundaries; raises IllFormed or BoundaryMismatch."""
    if not isinstance(lhs, Tensor):
        lhs = validate(lhs)
    if not isinstance(rhs, Tensor):
        rhs = validate(rhs)
    return Equation(lhs, rhs)


def parse_equation(text: str) -> Equation:
    from .syntax import parse
    left, right = text.split("=")
    return check_equation(parse(left), parse(right))


@dataclass
class Theory:
    name: str = ""
    signature: Signature = field(default_factory=Signature)
    rules: Dict[str, Equation] = field(default_factory=dict)

    def with_rule(self, name: str, eq: Equation) -> "Theory":
        rules = dict(self.rules)
        rules[name] = eq
        return Theory(self.name, self.signature, rules)

    @classmethod
    def from_file(cls, tf) -> "Theory":
        sig = Signature(dict(tf.symbols))
        th = cls(tf.name, sig)
        for name, src in tf.rules.items():
            th.rules[name] = check_equation(validate(src.lhs, sig), validate(src.rhs, sig))
        return th


def load_theory(text: str) -> Tuple[Theory, Dict[str, Equation]]:
    """A theory and its lemma statements from ``.bt`` source."""
    from .syntax import parse_theory
    tf = parse_theory(text)
    th = Theory.from_file(tf)
    lemmas = {n: check_equation(validate(s.lhs, th.signature), validate(s.rhs, th.signature))
              for n, s in tf.lemmas.items()}
    return th, lemmas


# ---------------------------------------------------------------------------
# derived equations


def shared_fresh(e: Equation, box: str, kind: str, avoid=()) -> Dict[str, str]:
    names = needed_names(e.lhs, box) | needed_names(e.rhs, box)
    if kind == "copy":
        names.add(box)
    return default_fresh(names, set(e.names) | set(avoid))


def eq_op(e: Equation, step: OpStep, avoid=()) -> Equation:
    """Apply one !-box operation to both sides with the same freshness map."""
    if step.box not in e.boxes:
        raise OpError(f"unknown !-box {step.box}")
    if step.kind in ("exp", "copy") and step.fresh is None:
        step = OpStep(step.kind, step.box, shared_fresh(e, step.box, step.kind, avoid))
    try:
        return Equation(apply_step(e.lhs, step), apply_step(e.rhs, step))
    except IllFormed as err:
        raise OpError(str(err)) from None


def derive_prod(e: Equation, k, flip: bool = False) -> Equation:
    k = flatten_factors(k)
    if flip:
        return check_equation(validate(k + e.lhs.factors), validate(k + e.rhs.factors))
    return check_equation(validate(e.lhs.factors + k), validate(e.rhs.factors + k))


def derive_box(e: Equation, box: str) -> Equation:
    if box in e.names:
        raise DerivationError(f"{box} already occurs in the equation")
    return check_equation(validate((BangBox(box, e.lhs.factors),)),
                          validate((BangBox(box, e.rhs.factors),)))


def _rename_bound_apart(t: Tensor, avoid) -> Tensor:
    clash = sorted(t.bound_names & set(avoid))
    if not clash:
        return t
    used = set(t.names) | set(avoid)
    m = {}
    for n in clash:
        m[n] = fresh_name(n, used)
        used.add(m[n])
    return Tensor(rename_factors(t.factors, m), _checked=True)


def derive_rename(e: Equation, mapping: Mapping[str, str]) -> Equation:
    """Rename free edge names and !-box names on both sides."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return e
    targets = set(mapping.values())
    try:
        lhs = rename_free(_rename_bound_apart(e.lhs, targets), mapping)
        rhs = rename_free(_rename_bound_apart(e.rhs, targets), mapping)
    except (RenameError, IllFormed) as err:
        raise DerivationError(str(err)) from None
    return check_equation(lhs, rhs)


def _weaken(t: Tensor, box: str, k: PreTensor) -> Tensor:
    from .boxops import weaken
    return weaken(t, box, k)


def derive_weaken(e: Equation, box: str, k, k_rhs=None, proof: Optional[Equation] = None) -> Equation:
    """Add ``k`` inside ``box`` on both sides.

    With ``k_rhs`` the right side receives a different payload; this needs
    ``proof``, an equation between the two payloads.
    """
    if box not in e.boxes:
        raise DerivationError(f"unknown !-box {box}")
    k = flatten_factors(k)
    if k_rhs is None:
        k_rhs = k
    else:
        k_rhs = flatten_factors(k_rhs)
        if proof is None:
            raise DerivationError("different payloads need an equation between them")
        if not (equiv(proof.lhs, validate(k)) and equiv(proof.rhs, validate(k_rhs))):
            raise DerivationError("the supplied equation does not relate the payloads")
    try:
        return check_equation(_weaken(e.lhs, box, k), _weaken(e.rhs, box, k_rhs))
    except (OpError, IllFormed) as err:
        raise DerivationError(str(err)) from None


# ---------------------------------------------------------------------------
# matching


@dataclass(frozen=True)
class MatchCert:
    rule: str
    reverse: bool
    ops: Tuple[OpStep, ...]
    renaming: Tuple[Tuple[str, str], ...]
    weakenings: Tuple[Tuple[str, PreTensor], ...]
    path: Tuple[str, ...]
    factors: Tuple[int, ...]

    def describe(self) -> str:
        parts = [self.rule + (" rev" if self.reverse else "")]
        if self.path:
            parts.append("at " + "/".join(self.path))
        if self.ops:
            parts.append("ops { " + "; ".join(str(s) for s in self.ops) + " }")
        if self.renaming:
            parts.append("rename {" + ", ".join(f"{a}->{b}" for a, b in self.renaming) + "}")
        from .syntax import print_tensor
        for b, k in self.weakenings:
            parts.append(f"weaken {b} {{ {print_tensor(k)} }}")
        return " ".join(parts)


def level_factors(t: Tensor, path: Sequence[str]) -> PreTensor:
    fs = t.factors
    for b in path:
        fs = next(f.body for f in fs if isinstance(f, BangBox) and f.box == b)
    return fs


def _replace_level(factors: PreTensor, path, fn) -> PreTensor:
    if not path:
        return fn(factors)
    out = []
    for f in factors:
        if isinstance(f, BangBox) and f.box == path[0]:
            f = BangBox(f.box, _replace_level(f.body, path[1:], fn))
        out.append(f)
    return tuple(out)


def prepare(eq: Equation, cert: MatchCert, avoid=()) -> Equation:
    """The rule instance a certificate describes, oriented left to right."""
    e = eq.flipped() if cert.reverse else eq
    for s in cert.ops:
        e = eq_op(e, s, avoid)
    ren = dict(cert.renaming)
    # keep the rule's bound names away from the target
    away = set(avoid) | set(ren.values())
    e = Equation(_rename_bound_apart(e.lhs, away), _rename_bound_apart(e.rhs, away))
    e = derive_rename(e, ren)
    for b, k in cert.weakenings:
        e = derive_weaken(e, b, k)
    return e


class MatchError(ValueError):
    pass


def rewrite(t: Tensor, cert: MatchCert, eq: Equation) -> Tensor:
    """Replace the certified occurrence by the other side of the prepared rule."""
    e = prepare(eq, cert, t.names)
    level = level_factors(t, cert.path)
    chosen = [level[i] for i in cert.factors]
    try:
        occ = validate(tuple(chosen))
    except IllFormed as err:
        raise MatchError(f"occurrence is not a tensor: {err}") from None
    if not equiv(occ, e.lhs):
        raise MatchError("occurrence does not match the prepared rule")
    rhs = _rename_bound_apart(e.rhs, t.names)
    idx = set(cert.factors)

    def fn(fs):
        first = min(idx) if idx else len(fs)
        rest = [f for i, f in enumerate(fs) if i not in idx and i < first]
        tail = [f for i, f in enumerate(fs) if i not in idx and i > first]
        return tuple(rest) + rhs.factors + tuple(tail)

    try:
        return validate(_replace_level(t.factors, cert.path, fn))
    except IllFormed as err:
        raise MatchError(f"rewrite result is ill-formed: {err}") from None


def _shape(f) -> tuple:
    if isinstance(f, Atom):
        return ("a", f.symbol, _erase(f.edges))
    if isinstance(f, BangBox):
        return ("b",)
    if isinstance(f, IdWire):
        return ("i",)
    return ("c",)


def _erase(items) -> str:
    from .terms import Group
    out = []
    for it in items:
        if isinstance(it, Group):
            out.append(("[" if it.cw else "<") + _erase(it.body) + (">" if it.cw else "]"))
        else:
            out.append("+" if it.out else "-")
    return "".join(out)


def _levels(t: Tensor) -> Iterator[Tuple[Tuple[str, ...], PreTensor]]:
    def walk(fs, path):
        yield path, fs
        for f in fs:
            if isinstance(f, BangBox):
                yield from walk(f.body, path + (f.box,))
    yield from walk(t.factors, ())


def _op_sequences(e: Equation, max_ops: int, fixed: Optional[str], avoid) -> Iterator[Tuple[Tuple[OpStep, ...], Equation, bool]]:
    """Prepared rule instances reachable by at most ``max_ops`` operations.

    The flag tells whether the sequence touches the fixed box.
    """
    seen = set()
    frontier = [((), e, False)]
    for depth in range(max_ops + 1):
        nxt = []
        for ops, eq, touched in frontier:
            key = (full_canonical(eq.lhs)[0], full_canonical(eq.rhs)[0])
            if key in seen:
                continue
            seen.add(key)
            yield ops, eq, touched
            if depth == max_ops:
                continue
            for b in sorted(eq.boxes):
                for kind in ("kill", "exp", "copy", "drop"):
                    try:
                        step = OpStep(kind, b, shared_fresh(eq, b, kind, avoid)) if kind in ("exp", "copy") else OpStep(kind, b)
                        e2 = eq_op(eq, step, avoid)
                    except (OpError, BoundaryMismatch, IllFormed):
                        continue
                    nxt.append((ops + (step,), e2, touched or b == fixed))
        frontier = nxt


def _trim_variants(sub: PreTensor, sizes) -> Iterator[Tuple[PreTensor, Tuple[Tuple[str, PreTensor], ...]]]:
    """``sub`` with some top-level box contents reduced; removed parts are weakenings."""
    boxes = [i for i, f in enumerate(sub) if isinstance(f, BangBox)]

    def rec(k, cur, weak):
        if k == len(boxes):
            yield tuple(cur), tuple(weak)
            return
        i = boxes[k]
        f = sub[i]
        n = len(f.body)
        for size in sorted(set(s for s in sizes if s <= n), reverse=True):
            for keep in combinations(range(n), size):
                kept = tuple(f.body[j] for j in keep)
                gone = tuple(f.body[j] for j in range(n) if j not in keep)
                cur2 = list(cur)
                cur2[i] = BangBox(f.box, kept)
                yield from rec(k + 1, cur2, weak + ([(f.box, gone)] if gone else []))

    yield from rec(0, list(sub), [])


def find_matches(t: Tensor, eq: Equation, rule: str = "rule", reverse: bool = False,
                 max_ops: int = 2, fixed: Optional[str] = None, ops: Optional[Sequence[OpStep]] = None,
                 path: Optional[Sequence[str]] = None, rename: Optional[Mapping[str, str]] = None,
                 first_only: bool = False) -> List[MatchCert]:
    """Certificates for occurrences of the (prepared) rule side in ``t``.

    Preparation tries every sequence of at most ``max_ops`` Kill/Exp/Copy/Drop
    steps on the rule, unless ``ops`` fixes it. Sequences touching ``fixed``
    are skipped. Results are ordered by number of preparatory steps, then by
    position; with ``first_only`` the search stops at the first hit.
    """
    base = eq.flipped() if reverse else eq
    avoid = t.names
    if ops is not None:
        prepared = [(tuple(ops), _apply_ops_eq(base, ops, avoid), False)]
    else:
        prepared = _op_sequences(base, max_ops, fixed, avoid)
    out: List[MatchCert] = []
    for steps, e, touched in prepared:
        if touched:
            continue
        found = _match_side(t, e.lhs, path)
        for lvl, idx, weak, ren in found:
            if rename and any(ren.get(k, k) != v for k, v in rename.items()):
                continue
            ren = {a: b for a, b in ren.items() if a != b}
            cert = MatchCert(rule, reverse, steps, tuple(sorted(ren.items())), weak, lvl, idx)
            try:
                rewrite(t, cert, eq)
            except (MatchError, DerivationError, BoundaryMismatch, IllFormed, OpError):
                continue
            out.append(cert)
            if first_only:
                return out
    return out


def _apply_ops_eq(e: Equation, ops, avoid) -> Equation:
    for s in ops:
        e = eq_op(e, s, avoid)
    return e


def _match_side(t: Tensor, pat: Tensor, only_path=None):
    pshape = sorted(_shape(f) for f in pat.factors)
    k = len(pat.factors)
    sizes = [len(f.body) for f in pat.factors if isinstance(f, BangBox)]
    for lvl, fs in _levels(t):
        if only_path is not None and tuple(only_path) != lvl:
            continue
        for idx in combinations(range(len(fs)), k):
            sub = tuple(fs[i] for i in idx)
            if sorted(_shape(f) for f in sub) != pshape:
                continue
            for trimmed, weak in _trim_variants(sub, sizes):
                if violations(trimmed):
                    continue
                ren = equiv_upto_renaming(pat, Tensor(trimmed, _checked=True))
                if ren is None:
                    continue
                yield lvl, idx, weak, ren
