"""Concrete semantics: box-free tensors as contractions of arrays over Z_p."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .terms import Atom, Circle, DirEdge, IdWire, Tensor, arrangement

MODEL_FORMAT = "bangtensor-model/v1"


class ModelError(ValueError):
    pass


@dataclass
class Model:
    d: int
    p: int = 5
    arrays: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ModelError("dimension must be at least 1")
        if self.p < 2 or any(self.p % k == 0 for k in range(2, int(self.p ** 0.5) + 1)):
            raise ModelError(f"modulus {self.p} is not prime")
        for (sym, word), a in list(self.arrays.items()):
            self.arrays[(sym, word)] = self._check(sym, word, a)

    def _check(self, sym: str, word: str, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        shape = (self.d,) * len(word)
        if a.shape != shape:
            raise ModelError(f"{sym} {word or '(nullary)'}: expected shape {shape}, got {a.shape}")
        return np.mod(a, self.p)

    def assign(self, sym: str, word: str, a) -> "Model":
        self.arrays[(sym, word)] = self._check(sym, word, a)
        return self

    def lookup(self, atom: Atom) -> np.ndarray:
        key = (atom.symbol, arrangement(atom))
        if key not in self.arrays:
            raise ModelError(f"no assignment for {atom.symbol} with arrangement {key[1] or '(none)'}")
        return self.arrays[key]


def load_model(source) -> Model:
    """Read a model from a JSON string, a path, or an already decoded dict.

    Schema: ``{"format": "bangtensor-model/v1", "d": int, "p": int,
    "symbols": {name: {word: nested array}}}``; words use ``^`` for an
    output and ``v`` for an input, in edge order; arrays are row-major.
    """
    if isinstance(source, dict):
        obj = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        obj = json.loads(text)
    fmt = obj.get("format", MODEL_FORMAT)
    if fmt != MODEL_FORMAT:
        raise ModelError(f"unsupported model format {fmt!r}")
    try:
        m = Model(int(obj["d"]), int(obj.get("p", 5)))
    except KeyError:
        raise ModelError("model needs a dimension 'd'") from None
    for sym, words in obj.get("symbols", {}).items():
        for word, arr in words.items():
            if set(word) - {"^", "v"}:
                raise ModelError(f"{sym}: bad arrangement word {word!r}")
            m.assign(sym, word, arr)
    return m


def dump_model(m: Model) -> str:
    syms: Dict[str, Dict[str, list]] = {}
    for (sym, word), a in sorted(m.arrays.items()):
        syms.setdefault(sym, {})[word] = a.tolist()
    return json.dumps({"format": MODEL_FORMAT, "d": m.d, "p": m.p, "symbols": syms}, indent=1)


@dataclass
class EvalResult:
    order: List[DirEdge]
    array: np.ndarray
    circles: int = 0

    def __eq__(self, other) -> bool:
        return (isinstance(other, EvalResult) and self.order == other.order
                and np.array_equal(self.array, other.array))


def _labelled(t: Tensor, m: Model):
    """Index-labelled arrays for every factor; circles counted separately."""
    if not t.is_box_free():
        raise ModelError("cannot evaluate a term with !-boxes")
    parts, circles = [], 0
    for f in t.factors:
        if isinstance(f, Atom):
            parts.append(([e.name for e in f.edges], m.lookup(f)))
        elif isinstance(f, IdWire):
            if f.out == f.inp:
                circles += 1
            else:
                parts.append(([f.out, f.inp], np.eye(m.d, dtype=np.int64)))
        elif isinstance(f, Circle):
            circles += 1
    return parts, circles


def _check_order(t: Tensor, order) -> List[DirEdge]:
    order = list(order) if order is not None else sorted(t.free_edges)
    if sorted(order) != sorted(t.free_edges) or len(set(order)) != len(order):
        raise ModelError("order must list each free edge exactly once")
    return order


_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _einsum(parts, out_labels, p):
    letters = {}
    for labels, _ in parts:
        for n in labels:
            if n not in letters:
                letters[n] = _LETTERS[len(letters)]
    subscripts = ",".join("".join(letters[n] for n in labels) for labels, _ in parts)
    subscripts += "->" + "".join(letters[n] for n in out_labels)
    return np.mod(np.einsum(subscripts, *[a for _, a in parts]), p)


def evaluate(t: Tensor, m: Model, order: Optional[Sequence[DirEdge]] = None) -> EvalResult:
    """Contract the term, eliminating bound names one at a time in name order."""
    order = _check_order(t, order)
    parts, circles = _labelled(t, m)
    for name in sorted(t.bound_names):
        touching = [x for x in parts if name in x[0]]
        rest = [x for x in parts if name not in x[0]]
        out = []
        for labels, _ in touching:
            for n in labels:
                if n != name and n not in out:
                    out.append(n)
        parts = rest + [(out, _einsum(touching, out, m.p))]
    free = [e.name for e in order]
    if parts:
        arr = _einsum(parts, free, m.p)
    else:
        arr = np.ones((), dtype=np.int64)
    arr = np.mod(arr * pow(m.d, circles, m.p), m.p)
    return EvalResult(order, arr, circles)


def naive_contract(t: Tensor, m: Model, order: Optional[Sequence[DirEdge]] = None) -> EvalResult:
    """Reference evaluation by summing over every assignment of every index."""
    order = _check_order(t, order)
    parts, circles = _labelled(t, m)
    bound = sorted(t.bound_names)
    free = [e.name for e in order]
    out = np.zeros((m.d,) * len(free), dtype=np.int64)
    for fv in itertools.product(range(m.d), repeat=len(free)):
        total = 0
        for bv in itertools.product(range(m.d), repeat=len(bound)):
            env = dict(zip(free, fv))
            env.update(zip(bound, bv))
            prod = 1
            for labels, a in parts:
                prod = prod * int(a[tuple(env[n] for n in labels)]) % m.p
                if prod == 0:
                    break
            total = (total + prod) % m.p
        out[fv] = total * pow(m.d, circles, m.p) % m.p
    return EvalResult(order, out, circles)


@dataclass
class ModelVerdict:
    ok: bool
    instances: int
    lhs: Optional[Tensor] = None
    rhs: Optional[Tensor] = None
    index: Optional[Tuple[int, ...]] = None
    order: Optional[List[DirEdge]] = None

    def __str__(self) -> str:
        if self.ok:
            return f"holds on {self.instances} instances"
        idx = ", ".join(f"{e}={i}" for e, i in zip(self.order, self.index))
        return f"counterexample: {self.lhs} = {self.rhs} differs at [{idx}]"


def equation_instances(e, max_exp: int):
    """Concrete instances of an equation: both sides instantiated together."""
    from .boxops import instantiations
    for _, (lhs, rhs) in instantiations((e.lhs, e.rhs), max_exp):
        yield lhs, rhs


def check_rule_in_model(e, m: Model, max_exp: int = 2, cross_check: bool = False) -> ModelVerdict:
    """Evaluate both sides of every instance up to ``max_exp`` and compare."""
    n = 0
    for lhs, rhs in equation_instances(e, max_exp):
        n += 1
        order = sorted(lhs.free_edges)
        a, b = evaluate(lhs, m, order), evaluate(rhs, m, order)
        if cross_check:
            for t, r in ((lhs, a), (rhs, b)):
                if naive_contract(t, m, order) != r:
                    raise AssertionError(f"contraction mismatch on {t}")
        if not np.array_equal(a.array, b.array):
            diff = np.argwhere(a.array != b.array)
            idx = tuple(int(i) for i in diff[0]) if diff.size else ()
            return ModelVerdict(False, n, lhs, rhs, idx, order)
    return ModelVerdict(True, n)
