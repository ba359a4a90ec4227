import pytest

from bangtensor.generators import random_tensor, violating
from bangtensor.syntax import parse, parse_tensor
from bangtensor.terms import (
    EdgeNotFound, IllFormed, In, Out, RenameError, c3_witness, contexts, free_edges,
    product, rename_free, validate, violations,
)
from oracles import c3_brute

SEC4 = "[phi(+a -c +b) psi(+c -d)]B xi([-a>B) zeta(<-b +d]B -e)"
NESTED = "phi(+a [<-b]B>A) [[phi(+b -c)]B]A"


def codes(text):
    return {v.code for v in violations(parse_tensor(text))}


class TestFreeEdges:
    def test_bound_name_is_not_free(self):
        assert free_edges(parse("phi(+a -b) psi(+b)")) == {Out("a")}

    def test_unit(self):
        assert free_edges(parse("1")) == frozenset()

    def test_worked_example(self):
        assert free_edges(parse(SEC4)) == {In("e")}


class TestContexts:
    def test_edge_inside_groups(self):
        assert contexts(parse(NESTED), In("b")) == (("B", "A"), ())

    def test_node_inside_boxes(self):
        assert contexts(parse(NESTED), Out("b")) == ((), ("B", "A"))

    def test_no_boxes(self):
        assert contexts(parse("phi(+a)"), Out("a")) == ((), ())

    def test_missing_edge(self):
        with pytest.raises(EdgeNotFound):
            contexts(parse("phi(+a)"), In("a"))


class TestValidate:
    def test_group_reaching_into_box(self):
        assert codes("psi([+a>A) [phi(-a)]A") == set()

    def test_pair_across_box_wall(self):
        vs = violations(parse_tensor("psi(+a) [phi(-a)]A"))
        assert [(v.code, v.subject) for v in vs] == [("C3", "a")]

    def test_nesting_order_reversed(self):
        assert "C2" in codes("phi([[-a>A>B) [[psi(-b)]B xi(<+b]B)]A")

    def test_duplicate_output(self):
        assert codes("phi(+a) psi(+a)") == {"F1"}

    def test_duplicate_box(self):
        assert codes("[]A [f()]A") == {"F2"}

    def test_box_in_both_contexts(self):
        assert codes("[f([+a>A)]A") == {"C1"}

    def test_unknown_group_box(self):
        assert codes("f([+a>Q)") == {"C2"}

    def test_validate_raises_with_all_violations(self):
        with pytest.raises(IllFormed) as e:
            validate(parse_tensor("phi(+a) psi(+a) f([+b>Q)"))
        assert {v.code for v in e.value.violations} == {"F1", "C2"}

    @pytest.mark.parametrize("code", ["F1", "F2", "C1", "C2", "C3"])
    def test_targeted_violations(self, rng, code):
        hits = 0
        for _ in range(150):
            p = violating(rng, random_tensor(rng), code)
            if p is None:
                continue
            hits += 1
            assert {v.code for v in violations(p)} == {code}
        assert hits > 30

    def test_random_terms_validate(self, rng):
        for _ in range(300):
            t = random_tensor(rng)
            assert violations(t.factors) == []


class TestC3Witness:
    def test_shared_node_context(self):
        assert c3_witness(parse("[psi(+a) phi(-a)]A"), "a") == ((), ("A",))

    def test_group_into_box(self):
        assert c3_witness(parse("psi([+a>A) [phi(-a)]A"), "a") == ((), ())

    def test_empty_box_appended(self):
        assert c3_witness(parse("psi([+a>A) phi(<-a]A) []A"), "a") == (("A",), ())

    def test_minimal_against_exhaustive_search(self, rng):
        for _ in range(200):
            t = random_tensor(rng)
            for n in sorted(t.bound_names):
                eo, no = t.contexts(Out(n))
                ei, ni = t.contexts(In(n))
                sols = c3_brute(eo, no, ei, ni, sorted(t.boxes) or ["_"], max_len=3)
                got = c3_witness(t, n)
                assert got in sols
                assert len(got[0]) == min(len(s[0]) for s in sols)

    def test_fails_on_rejected_pair(self, rng):
        for _ in range(100):
            t = random_tensor(rng)
            p = violating(rng, t, "C3")
            subject = [v.subject for v in violations(p)][0]
            from bangtensor.terms import Tensor, solve_c3
            raw = Tensor(p, _checked=True)
            eo, no = raw.contexts(Out(subject))
            ei, ni = raw.contexts(In(subject))
            assert solve_c3(eo, no, ei, ni) is None
            assert c3_brute(eo, no, ei, ni, sorted(raw.boxes)) == []

    def test_not_bound(self):
        with pytest.raises(EdgeNotFound):
            c3_witness(parse("phi(+a)"), "a")


class TestRenameAndProduct:
    def test_rename_edge(self):
        assert str(rename_free(parse("phi(+a)"), {"a": "x"})) == "phi(+x)"

    def test_rename_box(self):
        assert str(rename_free(parse("[phi(+a)]A"), {"A": "C"})) == "[phi(+a)]C"

    def test_rename_clash(self):
        with pytest.raises(RenameError):
            rename_free(parse("phi(+a -b)"), {"a": "b"})

    def test_rename_bound_rejected(self):
        with pytest.raises(RenameError):
            rename_free(parse("phi(+a) psi(-a)"), {"a": "z"})

    def test_rename_swap(self):
        assert str(rename_free(parse("phi(+a -b)"), {"a": "b", "b": "a"})) == "phi(+b -a)"

    def test_product_contracts(self):
        t = product(parse("psi(+f -a -b)"), parse("phi(+a +b -c -d -e)"))
        assert t.bound_names == {"a", "b"}

    def test_product_unit(self):
        g = parse("phi(+a)")
        assert product(parse("1"), g).factors == g.factors

    def test_product_nesting_clash(self):
        with pytest.raises(IllFormed) as e:
            product(parse_tensor("phi([[-a>A>B)"), parse_tensor("[[psi(-b)]B xi(<+b]B)]A"))
        assert "C2" in {v.code for v in e.value.violations}
