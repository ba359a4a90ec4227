import pytest

from bangtensor.boxops import (
    OpError, OpStep, apply_ops, copy, drop, enumerate_instances, expand, fresh_for, kill,
    needed_names, normalize_ops, weaken,
)
from bangtensor.canon import equiv, full_canonical
from bangtensor.generators import random_tensor
from bangtensor.syntax import parse
from bangtensor.terms import DirEdge, IllFormed, Out
import props
from oracles import replay_instances, spider_instance

SEC4 = "[phi(+a -c +b) psi(+c -d)]B xi([-a>B) zeta(<-b +d]B -e)"
SPIDER = "s([-a>A [+b>B) [phi(+a)]A [psi(-b)]B"


class TestExamples:
    def test_kill(self):
        assert str(kill(parse(SEC4), "B")) == "xi() zeta(-e)"

    def test_expand(self):
        assert str(expand(parse(SEC4), "B")) == (
            "[phi(+a -c +b) psi(+c -d)]B phi(+a.1 -c.1 +b.1) psi(+c.1 -d.1) "
            "xi([-a>B -a.1) zeta(-b.1 +d.1 <-b +d]B -e)")

    def test_expand_explicit_fresh(self):
        fr = {"a": "p", "b": "q", "c": "r", "d": "s"}
        r = expand(parse(SEC4), "B", fr)
        assert equiv(r, parse("[phi(+a -c +b) psi(+c -d)]B phi(+p -r +q) psi(+r -s) "
                              "xi([-a>B -p) zeta(-q +s <-b +d]B -e)"))

    def test_drop(self):
        assert str(drop(parse(SEC4), "B")) == "phi(+a -c +b) psi(+c -d) xi(-a) zeta(-b +d -e)"

    def test_copy(self):
        r = copy(parse(SEC4), "B")
        assert r.boxes == {"B", "B.1"}
        assert r.contexts(DirEdge("a.1", False)) == (("B.1",), ())

    def test_kill_group_into_nested(self):
        t = parse("phi(+a [<-b]B>A) [[phi(+b -c)]B]A")
        assert str(kill(t, "A")) == "phi(+a)"

    def test_expand_renames_nested_box(self):
        r = expand(parse("[[f(+x)]B]A"), "A")
        assert r.boxes == {"A", "B", "B.1"} and r.parent["B.1"] is None

    def test_group_to_outside_box_kept(self):
        t = parse("psi(<[+e1>B2]B0) [g([<+e2]B2>B0)]B1 [[g(-e3) f([-e2>B1 -e1)]B2]B0")
        assert needed_names(t, "B1") == {"e2"}
        r = expand(t, "B1")
        assert r.contexts(Out("e2.1")) == (("B2", "B0"), ())

    def test_weaken(self):
        r = weaken(parse("[f(+a)]A"), "A", parse("g(+k)").factors)
        assert r.contexts(Out("k")) == ((), ("A",))

    def test_weaken_rejects_clash(self):
        with pytest.raises(IllFormed):
            weaken(parse("[f(+a)]A"), "A", parse("g(+a)").factors)

    def test_unknown_box(self):
        with pytest.raises(OpError):
            kill(parse("f()"), "A")


class TestFreshness:
    def test_default_scheme(self):
        assert fresh_for(parse(SEC4), "B", "copy") == {
            "B": "B.1", "a": "a.1", "b": "b.1", "c": "c.1", "d": "d.1"}

    def test_missing_name(self):
        with pytest.raises(OpError, match="does not cover"):
            expand(parse(SEC4), "B", {"a": "p"})

    def test_not_injective(self):
        with pytest.raises(OpError, match="injective"):
            expand(parse(SEC4), "B", {"a": "p", "b": "p", "c": "r", "d": "s"})

    def test_stale(self):
        with pytest.raises(OpError, match="stale"):
            expand(parse(SEC4), "B", {"a": "e", "b": "q", "c": "r", "d": "s"})


class TestApplyOps:
    def test_sequence(self):
        t = apply_ops(parse(SEC4), [OpStep("exp", "B"), OpStep("kill", "B")])
        assert equiv(t, parse("phi(+a -c +b) psi(+c -d) xi(-a) zeta(-b +d -e)"))

    def test_error_index(self):
        with pytest.raises(OpError) as e:
            apply_ops(parse(SEC4), [OpStep("kill", "B"), OpStep("kill", "B")])
        assert e.value.index == 2 and str(e.value).startswith("step 2:")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            OpStep("explode", "B")

    def test_str(self):
        assert str(OpStep("exp", "B", {"a": "a1"})) == "exp B (a->a1)"
        assert str(OpStep("kill", "B")) == "kill B"


class TestPreservation:
    def test_random_steps_stay_well_formed(self, rng):
        assert sum(props.check_random_steps(rng) for _ in range(300)) > 500

    def test_context_table(self, rng):
        rows = {}
        for _ in range(600):
            for row, expected, actual in props.context_rows(rng):
                assert actual == expected, row
                rows[row] = rows.get(row, 0) + 1
        assert {r for r in rows if not r.endswith("_orig")} == {
            f"{k}_{s}" for k in ("drop", "exp", "copy") for s in "EN"}


class TestIdentities:
    @pytest.mark.parametrize("name", sorted(props.IDENTITIES))
    def test_identity(self, rng, name):
        assert sum(props.IDENTITIES[name](rng) for _ in range(150)) > 50

    def test_nested_kill_example(self):
        t = parse("[[f(+x)]B g(+y)]A")
        assert equiv(apply_ops(t, [OpStep("exp", "B"), OpStep("kill", "A")]), kill(t, "A"))

    def test_normalize_orders_by_depth(self):
        # expanding A lifts the copy B.1 to the top level, so it precedes B
        t = parse("[[f(+x)]B]A")
        seq = normalize_ops(t, [OpStep("exp", "B"), OpStep("exp", "A")])
        assert [s.kind + " " + s.box for s in seq] == ["exp A", "exp B.1", "exp B"]

    def test_normalize_reused_names(self):
        t = parse("psi([-e4>B0) [phi(+e4)]B0")
        ops = [OpStep("copy", "B0"), OpStep("kill", "B0.1"), OpStep("exp", "B0")]
        seq = normalize_ops(t, ops)
        assert props.same_mod_fresh(apply_ops(t, seq), apply_ops(t, ops))

    def test_normalize_error_index(self):
        with pytest.raises(OpError) as e:
            normalize_ops(parse("[f()]A"), [OpStep("kill", "A"), OpStep("drop", "A")])
        assert e.value.index == 2


class TestInstances:
    @pytest.mark.parametrize("n", range(4))
    def test_spider(self, n):
        got = {full_canonical(x)[0] for x in enumerate_instances(parse(SPIDER), n)}
        expected = {full_canonical(spider_instance(i, j))[0] for i in range(n + 1) for j in range(n + 1)}
        assert len(got) == (n + 1) ** 2 and got == expected

    def test_nested_counts(self):
        assert [len(enumerate_instances(parse("[[phi(+a)]B]A"), n)) for n in range(3)] == [1, 2, 5]

    def test_box_free_is_own_instance(self):
        assert [str(x) for x in enumerate_instances(parse("phi(+a)"), 3)] == ["phi(+a)"]

    def test_instances_box_free(self, rng):
        for _ in range(50):
            for inst in enumerate_instances(random_tensor(rng, n_boxes=2), 1):
                assert inst.is_box_free()

    def test_against_all_interleavings(self, rng):
        for _ in range(40):
            t = random_tensor(rng, n_boxes=rng.randint(1, 2), n_atoms=rng.randint(1, 3), wires=False)
            n = rng.randint(0, 2)
            got = {full_canonical(x)[0] for x in enumerate_instances(t, n)}
            assert got == replay_instances(t, n)

    def test_negative_budget(self):
        with pytest.raises(ValueError):
            enumerate_instances(parse("[f()]A"), -1)
