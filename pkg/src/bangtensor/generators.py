"""Random terms for property tests and fuzzing.

``random_tensor`` builds well-formed !-tensors directly: a random box forest,
atoms placed in it, and bound pairs whose edge contexts are read off from
where the two endpoints sit. ``random_pretensor`` produces arbitrary syntax
with no well-formedness guarantee. ``violating`` breaks exactly one
condition of a valid term.
"""

from __future__ import annotations

import os
import random
from typing import Dict, List, Optional, Tuple

from .terms import (
    Atom, BangBox, Circle, DirEdge, Group, IdWire, PreTensor, Tensor, validate,
)

SEED_ENV = "BANGBOX_SEED"


def make_rng(seed: Optional[int] = None) -> random.Random:
    if seed is None:
        seed = int(os.environ.get(SEED_ENV, "0"))
    return random.Random(seed)


SYMBOLS = ("f", "g", "h", "phi", "psi")


def _chain(parent: Dict[str, Optional[str]], box: Optional[str]) -> List[str]:
    out = []
    while box is not None:
        out.append(box)
        box = parent[box]
    return out


def _descendants(parent, root) -> List[str]:
    return sorted(b for b in parent if root in _chain(parent, parent[b]) or (root is None))


def _hanging_chain(rng, parent, root, exclude) -> List[str]:
    """An inside-out chain of boxes ending in a child of ``root``, avoiding ``exclude``."""
    cands = [b for b in sorted(parent) if b not in exclude and (
        (root is None) or root in _chain(parent, parent[b]))]
    rng.shuffle(cands)
    for z in cands:
        ch = []
        b = z
        while b is not None and b != root:
            ch.append(b)
            b = parent[b]
        if b == root and not set(ch) & set(exclude):
            return ch
    return []


def _wrap(rng, edge: DirEdge, ectx: List[str]):
    item = edge
    for b in ectx:
        item = Group(b, (item,), rng.random() < 0.5)
    return item


def _merge(items: List) -> Tuple:
    out: List = []
    for it in items:
        if (out and isinstance(it, Group) and isinstance(out[-1], Group)
                and out[-1].box == it.box and out[-1].cw == it.cw):
            prev = out.pop()
            out.append(Group(it.box, _merge(list(prev.body) + list(it.body)), it.cw))
        else:
            out.append(it)
    return tuple(out)


def random_tensor(rng: random.Random, n_boxes: Optional[int] = None, n_atoms: Optional[int] = None,
                  n_pairs: Optional[int] = None, n_free: Optional[int] = None,
                  wires: bool = True, circles: bool = True, symbols=SYMBOLS) -> Tensor:
    """A random well-formed !-tensor."""
    nb = rng.randint(0, 3) if n_boxes is None else n_boxes
    na = rng.randint(1, 5) if n_atoms is None else n_atoms
    boxes = [f"B{i}" for i in range(nb)]
    parent: Dict[str, Optional[str]] = {}
    for i, b in enumerate(boxes):
        parent[b] = rng.choice([None] + boxes[:i]) if i else None
    # nodes: atoms and wires; each with a node context
    nodes = []  # (kind, home box, slots)
    for i in range(na):
        nodes.append(["atom", rng.choice([None] + boxes), []])
    if wires and rng.random() < 0.3:
        nodes.append(["wire", rng.choice([None] + boxes), [None, None]])
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"e{counter[0]}"

    def nctx(node):
        return _chain(parent, node[1])

    atoms = [n for n in nodes if n[0] == "atom"]
    np_ = rng.randint(0, 4) if n_pairs is None else n_pairs
    for _ in range(np_):
        x, y = rng.choice(atoms), rng.choice(atoms)
        nx, ny = nctx(x), nctx(y)
        k = 0
        while k < min(len(nx), len(ny)) and nx[-1 - k] == ny[-1 - k]:
            k += 1
        common = nx[len(nx) - k:]
        px, py = nx[:len(nx) - k], ny[:len(ny) - k]
        e = []
        if (not px or not py) and rng.random() < 0.3:
            root = py[0] if py else (px[0] if px else (common[0] if common else None))
            e = _hanging_chain(rng, parent, root, set(nx) | set(ny))
        name = fresh()
        x[2].append((DirEdge(name, True), e + py))
        y[2].append((DirEdge(name, False), e + px))
    nf = rng.randint(0, 2) if n_free is None else n_free
    for _ in range(nf):
        x = rng.choice(atoms)
        ch = _hanging_chain(rng, parent, x[1], set(nctx(x))) if rng.random() < 0.4 else []
        x[2].append((DirEdge(fresh(), rng.random() < 0.5), ch))
    # wires: each end is free or bound to an atom edge with empty edge context there
    for w in nodes:
        if w[0] != "wire":
            continue
        nw = nctx(w)
        for slot, out in ((0, True), (1, False)):
            partners = [a for a in atoms if nctx(a) == nw[len(nw) - len(nctx(a)):]]
            name = fresh()
            if partners and rng.random() < 0.6:
                a = rng.choice(partners)
                na_ = nctx(a)
                extra = nw[:len(nw) - len(na_)]
                a[2].append((DirEdge(name, not out), extra))
            w[2][slot] = name
    # assemble factors per box
    content: Dict[Optional[str], List] = {b: [] for b in [None] + boxes}
    for n in nodes:
        if n[0] == "atom":
            items = [_wrap(rng, e, list(ctx)) for e, ctx in n[2]]
            rng.shuffle(items)
            content[n[1]].append(Atom(rng.choice(symbols), _merge(items)))
        else:
            content[n[1]].append(IdWire(n[2][0], n[2][1]))
    if circles and rng.random() < 0.1:
        content[None].append(Circle())

    def build(b):
        fs = list(content[b])
        for c in boxes:
            if parent[c] == b:
                fs.append(BangBox(c, tuple(build(c))))
        rng.shuffle(fs)
        return fs

    return validate(tuple(build(None)))


def random_pretensor(rng: random.Random, depth: int = 3) -> PreTensor:
    """Arbitrary syntax: names, groups and boxes with no well-formedness guarantee."""
    names = ["a", "b", "c", "x1", "y'", "z_2", "A", "B", "C.1"]

    def items(d):
        out = []
        for _ in range(rng.randint(0, 3)):
            r = rng.random()
            if d > 0 and r < 0.25:
                body = items(d - 1)
                if body:
                    out.append(Group(rng.choice(names), body, rng.random() < 0.5))
            else:
                out.append(DirEdge(rng.choice(names), rng.random() < 0.5))
        return _merge_free(out)

    def factors(d):
        out = []
        for _ in range(rng.randint(0, 3)):
            r = rng.random()
            if d > 0 and r < 0.25:
                out.append(BangBox(rng.choice(names), tuple(factors(d - 1))))
            elif r < 0.35:
                out.append(IdWire(rng.choice(names), rng.choice(names)))
            elif r < 0.4:
                out.append(Circle())
            else:
                out.append(Atom(rng.choice(SYMBOLS), items(d)))
        return out

    return tuple(factors(depth))


def _merge_free(items):
    return tuple(items)


# ---------------------------------------------------------------------------
# single-condition violations


def violating(rng: random.Random, t: Tensor, code: str) -> Optional[PreTensor]:
    """Extend a valid term so that exactly condition ``code`` fails.

    Returns None when the term lacks what the construction needs.
    """
    used = set(t.names)
    k = 0

    def fresh(base):
        nonlocal k
        while True:
            k += 1
            n = f"{base}{k}"
            if n not in used:
                used.add(n)
                return n

    fs = t.factors
    boxes = sorted(t.boxes)
    if code == "F1":
        outs = sorted(e for e in t.free_edges if e.out)
        if not outs:
            return None
        e = rng.choice(outs)
        return fs + (Atom("dup", (DirEdge(e.name, True),)),)
    if code == "F2":
        if not boxes:
            return None
        return fs + (BangBox(rng.choice(boxes), ()),)
    if code == "C1":
        if not boxes:
            return None
        b = rng.choice(boxes)
        bad = Atom("bad", (Group(b, (DirEdge(fresh("z"), True),), True),))

        def put(factors):
            out = []
            for f in factors:
                if isinstance(f, BangBox):
                    body = put(f.body)
                    if f.box == b:
                        body = body + (bad,)
                    f = BangBox(f.box, body)
                out.append(f)
            return tuple(out)
        return put(fs)
    if code == "C2":
        ghost = fresh("Q")
        return fs + (Atom("bad", (Group(ghost, (DirEdge(fresh("z"), True),), True),)),)
    if code == "C3":
        z, q = fresh("z"), fresh("Q")
        return fs + (Atom("g", (DirEdge(z, True),)), BangBox(q, (Atom("h", (DirEdge(z, False),)),)))
    raise ValueError(code)
