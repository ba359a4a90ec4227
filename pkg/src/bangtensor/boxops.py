"""!-box operations: Kill, Drop, Exp, Copy and Weaken, plus instantiation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .terms import (
    Atom, BangBox, Group, IllFormed, PreTensor, Tensor,
    edge_names, edgeterm, flatten_factors, fresh_name, item_names, all_names,
    rename_factors, _rename_items, validate,
)

KINDS = ("kill", "drop", "exp", "copy", "weaken")


class OpError(ValueError):
    """A !-box operation could not be applied.

    ``index`` is the 1-based position of the failing step when raised by
    :func:`apply_ops`.
    """

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message if index is None else f"step {index}: {message}")


@dataclass(frozen=True)
class OpStep:
    kind: str
    box: str
    fresh: Optional[Mapping[str, str]] = None
    payload: Optional[PreTensor] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operation {self.kind!r}")
        if self.payload is not None:
            object.__setattr__(self, "payload", flatten_factors(self.payload))

    def __str__(self) -> str:
        if self.kind == "weaken":
            from .syntax import print_tensor
            return f"weaken {self.box} {{ {print_tensor(self.payload or ())} }}"
        if self.fresh:
            pairs = ", ".join(f"{k}->{v}" for k, v in sorted(self.fresh.items()))
            return f"{self.kind} {self.box} ({pairs})"
        return f"{self.kind} {self.box}"


OpSeq = List[OpStep]


# ---------------------------------------------------------------------------
# freshness


def _scope(factors: PreTensor, box: str) -> Tuple[Optional[PreTensor], List[Tuple]]:
    """Contents of ``box`` and the bodies of all ``box``-groups."""
    content = None
    groups: List[Tuple] = []

    def items(its):
        for it in its:
            if isinstance(it, Group):
                if it.box == box:
                    groups.append(it.body)
                else:
                    items(it.body)

    def walk(fs):
        nonlocal content
        for f in fs:
            if isinstance(f, BangBox):
                if f.box == box:
                    content = f.body
                else:
                    walk(f.body)
            elif isinstance(f, Atom):
                items(f.edges)

    walk(factors)
    return content, groups


def needed_names(t: Tensor, box: str) -> set:
    """Names a freshness function must cover to expand or copy ``box``.

    These are the edges in the box or its groups and the boxes nested in it.
    Groups inside the box may also point at boxes elsewhere; those names
    are left alone, since renaming them would leave dangling references.
    """
    content, groups = _scope(t.factors, box)
    out = edge_names(content or ())
    for body in groups:
        out |= item_names(body)
    return out | {b for b in t.boxes if t.nested_in(b, box)}


def default_fresh(names: Iterable[str], used: Iterable[str]) -> Dict[str, str]:
    """Map each name to the first ``name.k`` avoiding ``used`` and earlier images."""
    taken = set(used)
    out = {}
    for n in sorted(names):
        m = fresh_name(n, taken)
        taken.add(m)
        out[n] = m
    return out


def fresh_for(t: Tensor, box: str, kind: str = "exp", avoid: Iterable[str] = ()) -> Dict[str, str]:
    names = needed_names(t, box)
    if kind == "copy":
        names.add(box)
    return default_fresh(names, set(t.names) | set(avoid))


def _check_fresh(t: Tensor, box: str, fr: Mapping[str, str], kind: str) -> Dict[str, str]:
    need = needed_names(t, box)
    if kind == "copy":
        need.add(box)
    missing = sorted(need - set(fr))
    if missing:
        raise OpError(f"freshness map does not cover {', '.join(missing)}")
    used = {n: fr[n] for n in need}
    images = list(used.values())
    if len(set(images)) != len(images):
        raise OpError("freshness map is not injective")
    stale = sorted(set(images) & set(t.names))
    if stale:
        raise OpError(f"stale freshness map: {', '.join(stale)} already occur")
    return used


# ---------------------------------------------------------------------------
# the operations


def _transform(factors: PreTensor, box: str, on_box, on_group) -> PreTensor:
    def items(its):
        out = []
        for it in its:
            if isinstance(it, Group):
                if it.box == box:
                    out.extend(on_group(it))
                else:
                    out.append(Group(it.box, items(it.body), it.cw))
            else:
                out.append(it)
        return edgeterm(out)

    def walk(fs):
        out = []
        for f in fs:
            if isinstance(f, BangBox):
                if f.box == box:
                    out.extend(on_box(f))
                else:
                    out.append(BangBox(f.box, walk(f.body)))
            elif isinstance(f, Atom):
                out.append(Atom(f.symbol, items(f.edges)))
            else:
                out.append(f)
        return tuple(out)

    return walk(factors)


def _require_box(t: Tensor, box: str) -> None:
    if box not in t.boxes:
        raise OpError(f"unknown !-box {box}")


def _result(factors: PreTensor) -> Tensor:
    return validate(factors)


def _split(t: Tensor, box: str, fr: Mapping[str, str]) -> Tuple[Dict[str, str], Dict[str, str]]:
    """Separate edge and box renamings so a name used in both spaces is not confused."""
    inner = {b for b in t.boxes if t.nested_in(b, box)} | {box}
    content, groups = _scope(t.factors, box)
    edges = edge_names(content or ())
    for body in groups:
        edges |= {n for n in item_names(body) if n not in inner}
    return ({k: v for k, v in fr.items() if k in edges},
            {k: v for k, v in fr.items() if k in inner})


def kill(t: Tensor, box: str) -> Tensor:
    """Delete the box, its contents and every edge group into it."""
    _require_box(t, box)
    return _result(_transform(t.factors, box, lambda f: (), lambda g: ()))


def drop(t: Tensor, box: str) -> Tensor:
    """Remove the box walls and dissolve its edge groups."""
    _require_box(t, box)
    return _result(_transform(t.factors, box, lambda f: f.body, lambda g: g.body))


def expand(t: Tensor, box: str, fresh: Optional[Mapping[str, str]] = None) -> Tensor:
    """Add one concrete copy of the box: after clockwise groups, before anticlockwise ones."""
    _require_box(t, box)
    fr = fresh_for(t, box) if fresh is None else _check_fresh(t, box, fresh, "exp")

    emap, bmap = _split(t, box, fr)

    def on_box(f):
        return (f,) + rename_factors(f.body, emap, bmap)

    def on_group(g):
        copy = _rename_items(g.body, emap, bmap)
        return (g,) + copy if g.cw else copy + (g,)

    return _result(_transform(t.factors, box, on_box, on_group))


def copy(t: Tensor, box: str, fresh: Optional[Mapping[str, str]] = None) -> Tensor:
    """Add one fresh boxed copy of the box next to it."""
    _require_box(t, box)
    fr = fresh_for(t, box, "copy") if fresh is None else _check_fresh(t, box, fresh, "copy")
    new = fr[box]

    emap, bmap = _split(t, box, fr)

    def on_box(f):
        return (f, BangBox(new, rename_factors(f.body, emap, bmap)))

    def on_group(g):
        c = Group(new, _rename_items(g.body, emap, bmap), g.cw)
        return (g, c) if g.cw else (c, g)

    return _result(_transform(t.factors, box, on_box, on_group))


def weaken(t: Tensor, box: str, payload) -> Tensor:
    """Append ``payload`` inside the box; rejects ill-formed results."""
    _require_box(t, box)
    k = flatten_factors(payload)
    return _result(_transform(t.factors, box, lambda f: (BangBox(f.box, f.body + k),), lambda g: (g,)))


def apply_step(t: Tensor, step: OpStep) -> Tensor:
    if step.kind == "kill":
        return kill(t, step.box)
    if step.kind == "drop":
        return drop(t, step.box)
    if step.kind == "exp":
        return expand(t, step.box, step.fresh)
    if step.kind == "copy":
        return copy(t, step.box, step.fresh)
    return weaken(t, step.box, step.payload or ())


def resolve_step(t: Tensor, step: OpStep, avoid: Iterable[str] = ()) -> OpStep:
    """Fill in a default freshness map for an Exp/Copy step lacking one."""
    if step.kind in ("exp", "copy") and step.fresh is None:
        return OpStep(step.kind, step.box, fresh_for(t, step.box, step.kind, avoid))
    return step


def apply_ops(t: Tensor, ops: Sequence[OpStep]) -> Tensor:
    """Apply the steps left to right; errors carry the 1-based failing index."""
    for i, step in enumerate(ops, start=1):
        try:
            t = apply_step(t, step)
        except (OpError, IllFormed) as e:
            raise OpError(str(e), index=i) from None
    return t


# ---------------------------------------------------------------------------
# instances


def top_boxes(t: Tensor) -> List[str]:
    return sorted(b for b, p in t.parent.items() if p is None)


def instantiations(sides: Tuple[Tensor, ...], max_exp: int) -> Iterator[Tuple[List[OpStep], Tuple[Tensor, ...]]]:
    """Every Exp/Kill instantiation of ``sides`` (shared boxes) with at most
    ``max_exp`` expansions per box.

    Boxes are processed top-level first in name order. A fresh copy of a
    nested box starts with the full budget.
    """
    if max_exp < 0:
        raise ValueError("max_exp must be non-negative")

    def rec(sides, ops):
        tops = top_boxes(sides[0])
        if not tops:
            yield ops, sides
            return
        b = tops[0]
        cur, cur_ops = sides, list(ops)
        for k in range(max_exp + 1):
            killed = tuple(kill(s, b) for s in cur)
            yield from rec(killed, cur_ops + [OpStep("kill", b)])
            if k < max_exp:
                used = set().union(*(s.names for s in cur))
                names = set().union(*(needed_names(s, b) for s in cur))
                fr = default_fresh(names, used)
                cur = tuple(expand(s, b, fr) for s in cur)
                cur_ops = cur_ops + [OpStep("exp", b, fr)]

    yield from rec(tuple(sides), [])


def enumerate_instances(t: Tensor, max_exp: int) -> List[Tensor]:
    """Concrete instances, deduplicated up to renaming, in canonical order."""
    from .canon import canonical_form, full_canonical
    seen = {}
    for _, (inst,) in instantiations((t,), max_exp):
        key, _ = full_canonical(inst)
        if key not in seen:
            seen[key] = canonical_form(inst)
    return [seen[k] for k in sorted(seen)]


# ---------------------------------------------------------------------------
# normal form of operation sequences


def _swap_past(t: Tensor, q: OpStep, p: OpStep, used: set) -> List[OpStep]:
    """Rewrite ``[q, p]`` (q first) into an equivalent sequence starting with ``p``.

    ``t`` is the term before ``q``; ``p.box`` exists in ``t`` and is not
    nested inside ``q.box``.
    """
    if p.kind == "weaken" or q.kind == "weaken":
        raise OpError("weakening steps are not reordered")
    a, x = p.box, q.box
    if not t.nested_in(x, a):
        return _complete_all(t, [p, q], used)
    if p.kind == "kill":
        return [p]
    if p.kind == "drop":
        return [p, q]
    # Exp_A or Copy_A after an operation on X inside A: do A first, then the
    # operation on X and on its fresh image
    fr_a = dict(p.fresh or {})
    for n in sorted(set(q.fresh.values()) if q.fresh else ()):
        if n not in fr_a:
            fr_a[n] = fresh_name(n, used)
            used.add(fr_a[n])
    p2 = _complete(t, OpStep(p.kind, a, fr_a), used)
    fr_a = dict(p2.fresh)
    fr_prime = None
    if q.fresh:
        fr_prime = {fr_a[k]: fr_a[v] for k, v in q.fresh.items() if k in fr_a}
    return _complete_all(t, [p2, q, OpStep(q.kind, fr_a[x], fr_prime)], used)


def _complete_all(t: Tensor, steps: List[OpStep], used: set) -> List[OpStep]:
    out = []
    for s in steps:
        s = _complete(t, s, used)
        t = apply_step(t, s)
        used |= t.names
        out.append(s)
    return out


def _complete(t: Tensor, p: OpStep, used: set) -> OpStep:
    """Extend ``p``'s freshness map so that it covers what ``t`` requires."""
    if p.kind not in ("exp", "copy"):
        return p
    need = needed_names(t, p.box)
    if p.kind == "copy":
        need.add(p.box)
    fr = dict(p.fresh or {})
    for n in sorted(need - set(fr)):
        fr[n] = fresh_name(n, used)
        used.add(fr[n])
    return OpStep(p.kind, p.box, fr)


def _names_along(t: Tensor, ops: Sequence[OpStep]) -> set:
    used = set(t.names)
    for s in ops:
        if s.fresh:
            used |= set(s.fresh) | set(s.fresh.values())
        if s.payload:
            used |= all_names(s.payload)
    try:
        cur = t
        for s in ops:
            cur = apply_step(cur, s)
            used |= cur.names
    except (OpError, IllFormed):
        pass
    return used


def normalize_ops(t: Tensor, ops: Sequence[OpStep]) -> List[OpStep]:
    """Reorder so that operations on shallower boxes come first, by box name.

    At each stage the shallowest targeted box of the current term (ties by
    name) has all its operations moved to the front, using the commutation
    rules for unrelated boxes and the nested-box identities. The result
    applies to the same term up to renaming of fresh names.
    """
    ops = [resolve_step(t, s) if i == 0 else s for i, s in enumerate(ops)]
    # give every step an explicit map by replaying once
    cur, resolved = t, []
    for i, s in enumerate(ops, start=1):
        try:
            s = resolve_step(cur, s)
            cur = apply_step(cur, s)
        except (OpError, IllFormed) as e:
            raise OpError(str(e), index=i) from None
        resolved.append(s)
    resolved = _unshadow(t, resolved)
    used = _names_along(t, resolved)
    return _normalize(t, resolved, used)


def _unshadow(t: Tensor, ops: List[OpStep]) -> List[OpStep]:
    """Rename fresh images that reuse a name seen earlier in the sequence.

    A name freed by a kill may be handed out again later; once steps are
    reordered the two would meet, so every image is made globally new.
    """
    seen = set(t.names)
    subst: Dict[str, str] = {}
    out = []
    for s in ops:
        fresh = None
        if s.fresh is not None:
            fresh = {}
            for k, v in s.fresh.items():
                if v in seen:
                    w = fresh_name(v, seen | set(subst.values()))
                    subst[v] = w
                    v = w
                fresh[subst.get(k, k)] = v
                seen.add(v)
        s = OpStep(s.kind, subst.get(s.box, s.box), fresh, s.payload)
        t = apply_step(t, s)
        seen |= t.names
        out.append(s)
    return out


def _normalize(t: Tensor, ops: List[OpStep], used: set) -> List[OpStep]:
    out: List[OpStep] = []
    while ops:
        targeted = {s.box for s in ops} & set(t.boxes)
        a = min(targeted, key=lambda b: (t.depth(b), b))
        ops = _extract(t, ops, a, used)
        n = 0
        while n < len(ops) and ops[n].box == a:
            n += 1
        for s in ops[:n]:
            t = apply_step(t, s)
        out.extend(ops[:n])
        ops = ops[n:]
    return out


def _extract(t: Tensor, ops: List[OpStep], a: str, used: set) -> List[OpStep]:
    """Move every operation on ``a`` to the front, preserving their order."""
    ops = list(ops)
    front = 0
    while True:
        # skip the block already in front
        while front < len(ops) and ops[front].box == a:
            front += 1
        j = next((k for k in range(front, len(ops)) if ops[k].box == a), None)
        if j is None:
            return ops
        # bubble ops[j] left to position front
        while j > front:
            state = t
            for s in ops[:j - 1]:
                state = apply_step(state, s)
            repl = _swap_past(state, ops[j - 1], ops[j], used)
            ops[j - 1:j + 1] = repl
            # repl starts with the moved step
            j -= 1
        front += 1
