"""Abstract syntax of !-tensor expressions, contexts and well-formedness."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union


@dataclass(frozen=True, order=True)
class DirEdge:
    """A directed edge: ``out=True`` is an output (``+a``), otherwise an input (``-a``)."""

    name: str
    out: bool

    def __str__(self) -> str:
        return ("+" if self.out else "-") + self.name


def Out(name: str) -> DirEdge:
    return DirEdge(name, True)


def In(name: str) -> DirEdge:
    return DirEdge(name, False)


@dataclass(frozen=True)
class Group:
    """A clockwise (``[e>A``) or anticlockwise (``<e]A``) edge group."""

    box: str
    body: Tuple["EdgeItem", ...]
    cw: bool = True


EdgeItem = Union[DirEdge, Group]


@dataclass(frozen=True)
class Atom:
    symbol: str
    edges: Tuple[EdgeItem, ...] = ()


@dataclass(frozen=True)
class IdWire:
    """The identity tensor ``id(+out -inp)``."""

    out: str
    inp: str


@dataclass(frozen=True)
class Circle:
    """A closed loop of identity wires."""


@dataclass(frozen=True)
class BangBox:
    box: str
    body: Tuple["Factor", ...] = ()


Factor = Union[Atom, IdWire, Circle, BangBox]
PreTensor = Tuple[Factor, ...]
Context = Tuple[str, ...]

UNIT: PreTensor = ()


# ---------------------------------------------------------------------------
# edgeterm normalisation


def edgeterm(*parts) -> Tuple[EdgeItem, ...]:
    """Flatten nested sequences of items and drop empty groups."""
    out: List[EdgeItem] = []
    for p in parts:
        if isinstance(p, (list, tuple)):
            out.extend(edgeterm(*p))
        elif isinstance(p, Group):
            body = edgeterm(p.body)
            if body:
                out.append(Group(p.box, body, p.cw))
        else:
            out.append(p)
    return tuple(out)


def cw(box: str, *items) -> Tuple[EdgeItem, ...]:
    body = edgeterm(items)
    return (Group(box, body, True),) if body else ()


def acw(box: str, *items) -> Tuple[EdgeItem, ...]:
    body = edgeterm(items)
    return (Group(box, body, False),) if body else ()


def flatten_factors(*parts) -> PreTensor:
    out: List[Factor] = []
    for p in parts:
        if isinstance(p, (list, tuple)):
            out.extend(flatten_factors(*p))
        elif isinstance(p, Tensor):
            out.extend(p.factors)
        else:
            out.append(p)
    return tuple(out)


# ---------------------------------------------------------------------------
# traversal


@dataclass(frozen=True)
class Occurrence:
    edge: DirEdge
    ectx: Context
    nctx: Context


def _item_occurrences(items: Iterable[EdgeItem], ectx: Context, nctx: Context) -> Iterator[Occurrence]:
    for it in items:
        if isinstance(it, Group):
            # inside-out: the inner group comes first
            yield from _item_occurrences(it.body, (it.box,) + ectx, nctx)
        else:
            yield Occurrence(it, ectx, nctx)


def occurrences(factors: PreTensor, nctx: Context = ()) -> Iterator[Occurrence]:
    for f in factors:
        if isinstance(f, Atom):
            yield from _item_occurrences(f.edges, (), nctx)
        elif isinstance(f, IdWire):
            yield Occurrence(Out(f.out), (), nctx)
            yield Occurrence(In(f.inp), (), nctx)
        elif isinstance(f, BangBox):
            yield from occurrences(f.body, (f.box,) + nctx)


def iter_boxes(factors: PreTensor, parent: Optional[str] = None) -> Iterator[Tuple[str, Optional[str]]]:
    """Yield ``(box, parent)`` for every !-box, outermost first."""
    for f in factors:
        if isinstance(f, BangBox):
            yield f.box, parent
            yield from iter_boxes(f.body, f.box)


def _group_boxes(items: Iterable[EdgeItem]) -> Iterator[str]:
    for it in items:
        if isinstance(it, Group):
            yield it.box
            yield from _group_boxes(it.body)


def group_box_names(factors: PreTensor) -> set:
    out = set()
    for f in factors:
        if isinstance(f, Atom):
            out.update(_group_boxes(f.edges))
        elif isinstance(f, BangBox):
            out |= group_box_names(f.body)
    return out


def item_names(items: Iterable[EdgeItem]) -> set:
    """Edge and box names mentioned in an edgeterm."""
    out = set()
    for it in items:
        if isinstance(it, Group):
            out.add(it.box)
            out |= item_names(it.body)
        else:
            out.add(it.name)
    return out


def all_names(factors: PreTensor) -> set:
    """Every edge and box name occurring in the expression."""
    out = set()
    for f in factors:
        if isinstance(f, Atom):
            out |= item_names(f.edges)
        elif isinstance(f, IdWire):
            out.update((f.out, f.inp))
        elif isinstance(f, BangBox):
            out.add(f.box)
            out |= all_names(f.body)
    return out


def edge_names(factors: PreTensor) -> set:
    return {o.edge.name for o in occurrences(factors)}


# ---------------------------------------------------------------------------
# renaming


def _rename_items(items, emap: Mapping[str, str], bmap: Mapping[str, str]) -> Tuple[EdgeItem, ...]:
    out = []
    for it in items:
        if isinstance(it, Group):
            out.append(Group(bmap.get(it.box, it.box), _rename_items(it.body, emap, bmap), it.cw))
        else:
            out.append(DirEdge(emap.get(it.name, it.name), it.out))
    return tuple(out)


def rename_factors(factors: PreTensor, emap: Mapping[str, str], bmap: Optional[Mapping[str, str]] = None) -> PreTensor:
    """Simultaneously rename edge names by ``emap`` and box names by ``bmap``.

    With ``bmap`` omitted, ``emap`` is used for both namespaces.
    """
    if bmap is None:
        bmap = emap
    out: List[Factor] = []
    for f in factors:
        if isinstance(f, Atom):
            out.append(Atom(f.symbol, _rename_items(f.edges, emap, bmap)))
        elif isinstance(f, IdWire):
            out.append(IdWire(emap.get(f.out, f.out), emap.get(f.inp, f.inp)))
        elif isinstance(f, BangBox):
            out.append(BangBox(bmap.get(f.box, f.box), rename_factors(f.body, emap, bmap)))
        else:
            out.append(f)
    return tuple(out)


def rename_items(items, mapping: Mapping[str, str]) -> Tuple[EdgeItem, ...]:
    return _rename_items(items, mapping, mapping)


def _rename_dir_items(items, old: DirEdge, new: str):
    out = []
    for it in items:
        if isinstance(it, Group):
            out.append(Group(it.box, _rename_dir_items(it.body, old, new), it.cw))
        elif it == old:
            out.append(DirEdge(new, it.out))
        else:
            out.append(it)
    return tuple(out)


def rename_directed(factors: PreTensor, old: DirEdge, new: str) -> PreTensor:
    """Rename only the occurrences of one directed edge."""
    out: List[Factor] = []
    for f in factors:
        if isinstance(f, Atom):
            out.append(Atom(f.symbol, _rename_dir_items(f.edges, old, new)))
        elif isinstance(f, IdWire):
            o = new if old == Out(f.out) else f.out
            i = new if old == In(f.inp) else f.inp
            out.append(IdWire(o, i))
        elif isinstance(f, BangBox):
            out.append(BangBox(f.box, rename_directed(f.body, old, new)))
        else:
            out.append(f)
    return tuple(out)


def fresh_name(base: str, used) -> str:
    """Smallest ``base.k`` (k >= 1) not in ``used``."""
    k = 1
    while f"{base}.{k}" in used:
        k += 1
    return f"{base}.{k}"


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class Signature:
    """Map from symbol to arity: ``None`` for variable arity, else a word over ``^``/``v``."""

    symbols: Mapping[str, Optional[str]] = field(default_factory=dict)

    def declare(self, name: str, word: Optional[str]) -> "Signature":
        d = dict(self.symbols)
        d[name] = word
        return Signature(d)


def arrangement(atom: Atom) -> str:
    """Arrangement word of a box-free atom (``^`` output, ``v`` input)."""
    return "".join("^" if o.edge.out else "v" for o in _item_occurrences(atom.edges, (), ()))


# ---------------------------------------------------------------------------
# well-formedness


@dataclass(frozen=True)
class Violation:
    code: str  # F1, F2, C1, C2, C3, NS (name clash between namespaces), SIG
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} [{self.subject}]: {self.message}"


class IllFormed(ValueError):
    def __init__(self, violations: List[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class EdgeNotFound(KeyError):
    pass


def solve_c3(ectx_out: Context, nctx_out: Context, ectx_in: Context, nctx_in: Context) -> Optional[Tuple[Context, Context]]:
    """Smallest ``(es, bs)`` with es.nctx(in) = ectx(out).bs and es.nctx(out) = ectx(in).bs."""
    offset = len(ectx_out) - len(nctx_in)
    if offset != len(ectx_in) - len(nctx_out):
        return None
    bound = len(ectx_out) + len(nctx_out) + len(ectx_in) + len(nctx_in) + 1
    for k in range(max(0, -offset), bound + 1):
        n_es = k + offset
        parent: Dict = {}

        def find(x):
            while parent.get(x, x) != x:
                x = parent[x]
            return x

        # variables are ("es", i) / ("bs", i); constants are ("c", name)
        consts: Dict = {}
        ok = True

        def unify(a, b):
            nonlocal ok
            ra, rb = find(a), find(b)
            if ra == rb:
                return
            ca, cb = consts.get(ra), consts.get(rb)
            if ca is not None and cb is not None and ca != cb:
                ok = False
                return
            parent[ra] = rb
            if cb is None and ca is not None:
                consts[rb] = ca

        for left_const, right_prefix in ((nctx_in, ectx_out), (nctx_out, ectx_in)):
            total = n_es + len(left_const)
            if total != len(right_prefix) + k:
                ok = False
                break
            for i in range(total):
                lhs = ("es", i) if i < n_es else ("c", left_const[i - n_es])
                rhs = ("c", right_prefix[i]) if i < len(right_prefix) else ("bs", i - len(right_prefix))
                for node in (lhs, rhs):
                    if node[0] == "c":
                        consts.setdefault(node, node[1])
                unify(lhs, rhs)
                if not ok:
                    break
            if not ok:
                break
        if not ok:
            continue
        es = tuple(consts.get(find(("es", i)), "_") for i in range(n_es))
        bs = tuple(consts.get(find(("bs", i)), "_") for i in range(k))
        return es, bs
    return None


def violations(factors: PreTensor, sig: Optional[Signature] = None) -> List[Violation]:
    """All F1/F2/C1/C2/C3 violations of a !-pretensor expression."""
    found: List[Violation] = []
    occs = list(occurrences(factors))
    by_edge: Dict[DirEdge, List[Occurrence]] = {}
    for o in occs:
        by_edge.setdefault(o.edge, []).append(o)

    dup_edges = set()
    for e, lst in sorted(by_edge.items()):
        if len(lst) > 1:
            dup_edges.add(e.name)
            found.append(Violation("F1", e.name, f"{e} occurs {len(lst)} times"))

    parent: Dict[str, Optional[str]] = {}
    dup_boxes = set()
    for b, p in iter_boxes(factors):
        if b in parent:
            dup_boxes.add(b)
        else:
            parent[b] = p
    for b in sorted(dup_boxes):
        found.append(Violation("F2", b, f"!-box {b} occurs more than once"))

    ebox = set(parent) | group_box_names(factors)
    enames = {o.edge.name for o in occs}
    for n in sorted(ebox & enames):
        found.append(Violation("NS", n, f"{n} is used both as an edge name and a !-box name"))

    for o in occs:
        clash = set(o.ectx) & set(o.nctx)
        if clash:
            found.append(Violation("C1", o.edge.name, f"{o.edge}: {sorted(clash)} in both edge and node context"))
        if any(b in dup_boxes for b in o.ectx):
            continue
        for b in o.ectx:
            if b not in parent:
                found.append(Violation("C2", b, f"{o.edge}: edge context names missing !-box {b}"))
        for inner, outer in zip(o.ectx, o.ectx[1:]):
            if inner in parent and outer in parent and parent[inner] != outer:
                found.append(Violation("C2", o.edge.name, f"{o.edge}: edge context requires {inner} directly inside {outer}"))

    for name in sorted({e.name for e in by_edge}):
        if name in dup_edges:
            continue
        o_out = by_edge.get(Out(name))
        o_in = by_edge.get(In(name))
        if not o_out or not o_in:
            continue
        a, b = o_out[0], o_in[0]
        if solve_c3(a.ectx, a.nctx, b.ectx, b.nctx) is None:
            found.append(Violation("C3", name, f"bound pair {name} has incompatible contexts"))

    if sig is not None:
        found.extend(_signature_violations(factors, sig, box_free=not parent))
    return found


def _signature_violations(factors: PreTensor, sig: Signature, box_free: bool) -> List[Violation]:
    found = []

    def walk(fs):
        for f in fs:
            if isinstance(f, Atom):
                if f.symbol not in sig.symbols:
                    found.append(Violation("SIG", f.symbol, f"undeclared symbol {f.symbol}"))
                else:
                    word = sig.symbols[f.symbol]
                    if word is not None and box_free and arrangement(f) != word:
                        found.append(Violation("SIG", f.symbol, f"arrangement {arrangement(f)!r} does not match declared {word!r}"))
            elif isinstance(f, BangBox):
                walk(f.body)

    walk(factors)
    return found


def validate(factors, sig: Optional[Signature] = None) -> "Tensor":
    """Return a validated Tensor or raise IllFormed listing every violation."""
    factors = flatten_factors(factors)
    v = violations(factors, sig)
    if v:
        raise IllFormed(v)
    return Tensor(factors, _checked=True)


# ---------------------------------------------------------------------------
# validated tensors


@dataclass(frozen=True)
class Tensor:
    """A well-formed !-tensor expression. Construction validates."""

    factors: PreTensor
    _checked: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", flatten_factors(self.factors))
        if not self._checked:
            v = violations(self.factors)
            if v:
                raise IllFormed(v)

    def __str__(self) -> str:
        from .syntax import print_tensor
        return print_tensor(self.factors)

    @cached_property
    def occurrence_map(self) -> Dict[DirEdge, Occurrence]:
        return {o.edge: o for o in occurrences(self.factors)}

    @cached_property
    def parent(self) -> Dict[str, Optional[str]]:
        return dict(iter_boxes(self.factors))

    @property
    def boxes(self) -> FrozenSet[str]:
        return frozenset(self.parent)

    @cached_property
    def edge_names(self) -> FrozenSet[str]:
        return frozenset(e.name for e in self.occurrence_map)

    @cached_property
    def names(self) -> FrozenSet[str]:
        return frozenset(all_names(self.factors))

    @cached_property
    def free_edges(self) -> FrozenSet[DirEdge]:
        occ = self.occurrence_map
        return frozenset(e for e in occ if DirEdge(e.name, not e.out) not in occ)

    @cached_property
    def bound_names(self) -> FrozenSet[str]:
        return frozenset(e.name for e in self.occurrence_map if e.out and In(e.name) in self.occurrence_map)

    @property
    def free_names(self) -> FrozenSet[str]:
        return frozenset(e.name for e in self.free_edges)

    def contexts(self, e: DirEdge) -> Tuple[Context, Context]:
        try:
            o = self.occurrence_map[e]
        except KeyError:
            raise EdgeNotFound(str(e)) from None
        return o.ectx, o.nctx

    def ctx(self, e: DirEdge) -> Context:
        ectx, nctx = self.contexts(e)
        return ectx + nctx

    def depth(self, box: str) -> int:
        d = 0
        p = self.parent[box]
        while p is not None:
            d += 1
            p = self.parent[p]
        return d

    def ancestors(self, box: str) -> List[str]:
        out = []
        p = self.parent.get(box)
        while p is not None:
            out.append(p)
            p = self.parent[p]
        return out

    def nested_in(self, inner: str, outer: str) -> bool:
        """True if ``inner`` lies (possibly indirectly) inside ``outer``."""
        return outer in self.ancestors(inner)

    def is_box_free(self) -> bool:
        return not self.parent and not group_box_names(self.factors)


def free_edges(t: Tensor) -> FrozenSet[DirEdge]:
    return t.free_edges


def contexts(t: Tensor, e: DirEdge) -> Tuple[Context, Context]:
    return t.contexts(e)


def c3_witness(t: Tensor, name: str) -> Tuple[Context, Context]:
    """Minimal (es, bs) witnessing C3 for the bound pair ``name``."""
    if name not in t.bound_names:
        raise EdgeNotFound(f"{name} is not bound")
    eo, no = t.contexts(Out(name))
    ei, ni = t.contexts(In(name))
    w = solve_c3(eo, no, ei, ni)
    if w is None:  # unreachable for validated tensors
        raise IllFormed([Violation("C3", name, "no witness")])
    return w


class RenameError(ValueError):
    pass


def rename_free(t: Tensor, mapping: Mapping[str, str]) -> Tensor:
    """Rename free edge names and !-box names simultaneously."""
    renamable = t.free_names | t.boxes
    for k in mapping:
        if k not in renamable:
            raise RenameError(f"{k} is not a free edge or !-box name")
    images = list(mapping.values())
    if len(set(images)) != len(images):
        raise RenameError("renaming is not injective")
    moved = set(mapping)
    for v in images:
        if v in t.names and v not in moved:
            raise RenameError(f"renaming onto existing name {v}")
    return validate(rename_factors(t.factors, mapping))


def product(*parts) -> Tensor:
    """Juxtapose tensors, contracting repeated names; raises IllFormed."""
    return validate(flatten_factors(*parts))


def nesting_forest(t: Tensor) -> Dict[str, Optional[str]]:
    return dict(t.parent)
