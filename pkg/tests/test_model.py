import json

import numpy as np
import pytest

from bangtensor.calculus import parse_equation
from bangtensor.generators import random_tensor
from bangtensor.model import (
    Model, ModelError, check_rule_in_model, dump_model, evaluate, load_model, naive_contract,
)
from bangtensor.syntax import parse
from bangtensor.terms import In, Out, arrangement, rename_factors, validate
from props import mutate


def random_model(rng, terms, d=2, p=5):
    """A model with random arrays for every atom occurring in ``terms``."""
    m = Model(d, p)
    nrng = np.random.default_rng(rng.randrange(2 ** 32))
    for t in terms:
        for atom in _atoms(t.factors):
            word = arrangement(atom)
            if (atom.symbol, word) not in m.arrays:
                m.assign(atom.symbol, word, nrng.integers(0, p, size=(d,) * len(word)))
    return m


def _atoms(factors):
    from bangtensor.terms import Atom, BangBox
    for f in factors:
        if isinstance(f, Atom):
            yield f
        elif isinstance(f, BangBox):
            yield from _atoms(f.body)


def box_free(rng, **kw):
    return random_tensor(rng, n_boxes=0, **kw)


class TestExamples:
    def test_identity_wire(self, z2):
        r = evaluate(parse("id(+c -b)"), z2, [Out("c"), In("b")])
        assert np.array_equal(r.array, np.eye(2, dtype=np.int64))

    def test_circle(self, z2):
        r = evaluate(parse("circle()"), z2)
        assert r.order == [] and int(r.array) == 2

    def test_unit_law(self, z2):
        r = evaluate(parse("eta(+a) m(-a -b +c)"), z2, [Out("c"), In("b")])
        assert np.array_equal(r.array, np.eye(2, dtype=np.int64))

    def test_wire_loop(self, z2):
        assert int(evaluate(parse("id(+a -b) id(+b -a)"), z2).array) == 2

    def test_default_order_sorted(self, z2):
        r = evaluate(parse("m(-x -y +z)"), z2)
        assert r.order == sorted([In("x"), In("y"), Out("z")])

    def test_boxes_rejected(self, z2):
        with pytest.raises(ModelError):
            evaluate(parse("[eta(+a)]A"), z2)

    def test_missing_symbol(self, z2):
        with pytest.raises(ModelError, match="no assignment"):
            evaluate(parse("q(+a)"), z2)

    def test_bad_order(self, z2):
        with pytest.raises(ModelError):
            evaluate(parse("eta(+a)"), z2, [Out("b")])


class TestAgainstNaive:
    def test_random_terms(self, rng):
        for _ in range(200):
            t = box_free(rng, n_atoms=5)
            m = random_model(rng, [t])
            assert evaluate(t, m) == naive_contract(t, m)

    def test_larger_modulus(self, rng):
        for _ in range(30):
            t = box_free(rng, n_atoms=3)
            m = random_model(rng, [t], d=3, p=7)
            assert evaluate(t, m) == naive_contract(t, m)


class TestInvariance:
    def test_equivalent_terms_agree(self, rng):
        for _ in range(500):
            t = box_free(rng)
            u = mutate(rng, t)
            m = random_model(rng, [t])
            order = sorted(t.free_edges)
            assert np.array_equal(evaluate(t, m, order).array, evaluate(u, m, order).array)

    def test_product_is_outer_product(self, rng):
        for _ in range(100):
            g = box_free(rng, n_atoms=2, circles=False)
            h = box_free(rng, n_atoms=2)
            h = validate(rename_factors(h.factors, {n: "k" + n for n in h.names}))
            m = random_model(rng, [g, h])
            og, oh = sorted(g.free_edges), sorted(h.free_edges)
            whole = evaluate(validate(g.factors + h.factors), m, og + oh).array
            outer = np.multiply.outer(evaluate(g, m, og).array, evaluate(h, m, oh).array) % m.p
            assert np.array_equal(whole, outer)

    def test_order_is_transpose(self, rng):
        for _ in range(100):
            t = box_free(rng)
            m = random_model(rng, [t])
            order = sorted(t.free_edges)
            perm = list(range(len(order)))
            rng.shuffle(perm)
            a = evaluate(t, m, order).array
            b = evaluate(t, m, [order[i] for i in perm]).array
            assert np.array_equal(np.transpose(a, perm), b)


class TestLoading:
    def test_corpus(self, z2):
        assert z2.d == 2 and z2.p == 5 and ("m", "vv^") in z2.arrays

    def test_round_trip(self, z2):
        back = load_model(dump_model(z2))
        assert back.d == z2.d and set(back.arrays) == set(z2.arrays)
        assert all(np.array_equal(back.arrays[k], z2.arrays[k]) for k in z2.arrays)

    def test_dimension_one(self):
        m = load_model({"d": 1, "p": 3, "symbols": {"eta": {"^": [2]}, "m": {"vv^": [[[1]]]}}})
        assert int(evaluate(parse("eta(+a) m(-a -b +c) eta(+b)"), m, [Out("c")]).array[0]) == 1

    def test_values_reduced(self):
        m = load_model({"d": 1, "p": 3, "symbols": {"eta": {"^": [7]}}})
        assert m.arrays[("eta", "^")][0] == 1

    @pytest.mark.parametrize("obj, msg", [
        ({"d": 2, "p": 4}, "not prime"),
        ({"d": 0}, "dimension"),
        ({"p": 5}, "dimension"),
        ({"d": 2, "format": "other"}, "format"),
        ({"d": 2, "symbols": {"eta": {"^": [1, 0, 0]}}}, "shape"),
        ({"d": 2, "symbols": {"eta": {"x": [1, 0]}}}, "word"),
    ])
    def test_errors(self, obj, msg):
        with pytest.raises(ModelError, match=msg):
            load_model(obj)

    def test_from_json_text(self):
        assert load_model(json.dumps({"d": 2})).d == 2


class TestRulesInModel:
    def test_monoid_holds(self, monoid, z2):
        th, lemmas = monoid
        for e in list(th.rules.values()) + list(lemmas.values()):
            v = check_rule_in_model(e, z2, 2, cross_check=True)
            assert v.ok and v.instances >= 1

    def test_corrupted_unit(self, monoid, z2):
        th, _ = monoid
        z2.assign("eta", "^", [0, 1])
        v = check_rule_in_model(th.rules["unitL"], z2, 0)
        assert not v.ok and "counterexample" in str(v)

    def test_false_equation(self, z2):
        v = check_rule_in_model(parse_equation("m(-x -y +a) = m(-y -x +a)"), z2)
        assert v.ok  # XOR is commutative
        z2.assign("m", "vv^", [[[1, 0], [1, 0]], [[0, 1], [0, 1]]])
        assert not check_rule_in_model(parse_equation("m(-x -y +a) = m(-y -x +a)"), z2).ok
