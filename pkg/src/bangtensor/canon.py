"""Deciding equivalence of !-tensors by canonical forms.

The canonical representative is the lexicographically least print over all
factor orderings and systematic bound-name assignments, after identity wires
have been contracted. The search emits one factor at a time; since factor
prints are prefix-free, only the choices whose print is minimal at each step
can lead to the optimum, so the search branches only on ties.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .terms import (
    Atom, BangBox, Circle, Group, IdWire, In, Out, PreTensor, Tensor,
    occurrences, rename_directed, validate, violations,
)


class _Naming:
    __slots__ = ("emap", "bmap", "ne", "nb", "full", "free", "reserved")

    def __init__(self, full: bool, free=frozenset(), reserved=frozenset()):
        self.emap: Dict[str, str] = {}
        self.bmap: Dict[str, str] = {}
        self.ne = 0
        self.nb = 0
        self.full = full
        self.free = free
        self.reserved = reserved

    def copy(self) -> "_Naming":
        n = _Naming.__new__(_Naming)
        n.emap = dict(self.emap)
        n.bmap = dict(self.bmap)
        n.ne, n.nb, n.full, n.free, n.reserved = self.ne, self.nb, self.full, self.free, self.reserved
        return n

    def edge(self, name: str) -> str:
        c = self.emap.get(name)
        if c is not None:
            return c
        if not self.full and name in self.free:
            return name
        prefix = "x" if self.full else "b"
        while True:
            self.ne += 1
            c = f"{prefix}{self.ne}"
            if c not in self.reserved:
                break
        self.emap[name] = c
        return c

    def box(self, name: str) -> str:
        if not self.full:
            return name
        c = self.bmap.get(name)
        if c is None:
            self.nb += 1
            c = self.bmap[name] = f"X{self.nb}"
        return c


def _print_items(items, nm: _Naming) -> str:
    parts = []
    for it in items:
        if isinstance(it, Group):
            # the box name is printed after the body, but in full mode it is
            # assigned where it is first read: after the body
            body = _print_items(it.body, nm)
            box = nm.box(it.box)
            parts.append(f"[{body}>{box}" if it.cw else f"<{body}]{box}")
        else:
            parts.append(("+" if it.out else "-") + nm.edge(it.name))
    return " ".join(parts)


def _print_leaf(f, nm: _Naming) -> str:
    if isinstance(f, Atom):
        return f"{f.symbol}({_print_items(f.edges, nm)})"
    if isinstance(f, IdWire):
        o = nm.edge(f.out)
        i = nm.edge(f.inp)
        return f"id(+{o} -{i})"
    return "circle()"


def _search(factors: PreTensor, nm: _Naming) -> Tuple[str, _Naming]:
    best: List = [None, None]

    def rec(stack, prefix: str, nm: _Naming):
        if best[0] is not None and prefix > best[0][:len(prefix)]:
            return
        rem, box, count = stack[-1]
        if not rem:
            if len(stack) == 1:
                s = prefix or "1"
                if best[0] is None or s < best[0]:
                    best[0], best[1] = s, nm
                return
            nm2 = nm.copy()
            name = nm2.box(box)
            rec(stack[:-1], prefix + "]" + name, nm2)
            return
        sep = " " if count else ""
        cands = []
        seen = set()
        for i, f in enumerate(rem):
            if f in seen:
                continue
            seen.add(f)
            if isinstance(f, BangBox):
                cands.append(("[", i, f, nm))
            else:
                nm2 = nm.copy()
                cands.append((_print_leaf(f, nm2), i, f, nm2))
        least = min(c[0] for c in cands)
        for s, i, f, nm2 in cands:
            if s != least:
                continue
            rest = rem[:i] + rem[i + 1:]
            if isinstance(f, BangBox):
                new_stack = stack[:-1] + [(rest, box, count + 1), (f.body, f.box, 0)]
            else:
                new_stack = stack[:-1] + [(rest, box, count + 1)]
            rec(new_stack, prefix + sep + s, nm2)

    rec([(tuple(factors), None, 0)], "", nm)
    return best[0], best[1]


# ---------------------------------------------------------------------------
# identity wires


def _wires(factors: PreTensor, path=()):
    for i, f in enumerate(factors):
        if isinstance(f, IdWire):
            yield path, i, f
        elif isinstance(f, BangBox):
            yield from _wires(f.body, path + (i,))


def _replace(factors: PreTensor, path, index, new) -> PreTensor:
    if not path:
        return factors[:index] + tuple(new) + factors[index + 1:]
    j = path[0]
    box = factors[j]
    inner = _replace(box.body, path[1:], index, new)
    return factors[:j] + (BangBox(box.box, inner),) + factors[j + 1:]


def contract_wires(factors: PreTensor) -> PreTensor:
    """Contract identity wires with a bound end; closed wire loops become ``circle()``."""
    changed = True
    while changed:
        changed = False
        present = {o.edge for o in occurrences(factors)}
        for path, i, w in _wires(factors):
            if w.out == w.inp:
                factors = _replace(factors, path, i, [Circle()])
                changed = True
                break
            removed = _replace(factors, path, i, [])
            options = []
            if In(w.out) in present:
                options.append(rename_directed(removed, In(w.out), w.inp))
            if Out(w.inp) in present:
                options.append(rename_directed(removed, Out(w.inp), w.out))
            for cand in options:
                if not violations(cand):
                    factors = cand
                    changed = True
                    break
            if changed:
                break
    return factors


# ---------------------------------------------------------------------------
# public operations


def _reserved(t: Tensor):
    return frozenset(t.free_names) | frozenset(t.names - t.bound_names)


def canonical_string(t: Tensor) -> str:
    factors = contract_wires(t.factors)
    c = Tensor(factors, _checked=True)
    nm = _Naming(False, free=frozenset(c.free_names), reserved=_reserved(c))
    s, _ = _search(factors, nm)
    return s


def canonical_form(t: Tensor) -> Tensor:
    from .syntax import parse_tensor
    return validate(parse_tensor(canonical_string(t)))


def equiv(g: Tensor, h: Tensor) -> bool:
    """Syntactic equivalence of !-tensors."""
    return canonical_string(g) == canonical_string(h)


def full_canonical(t: Tensor) -> Tuple[str, Dict[str, str]]:
    """Canonical print with every name abstracted, and the renaming used."""
    factors = contract_wires(t.factors)
    s, nm = _search(factors, _Naming(True))
    mapping = dict(nm.emap) if nm is not None else {}
    if nm is not None:
        mapping.update(nm.bmap)
    return s, mapping


def equiv_upto_renaming(g: Tensor, h: Tensor) -> Optional[Dict[str, str]]:
    """A bijection on free edge names and box names making ``g`` equivalent to ``h``."""
    sg, mg = full_canonical(g)
    sh, mh = full_canonical(h)
    if sg != sh:
        return None
    inv = {v: k for k, v in mh.items()}
    out = {}
    for n in sorted(g.free_names | g.boxes):
        if n in mg:
            out[n] = inv[mg[n]]
    return out
