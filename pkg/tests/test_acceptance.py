"""End-to-end acceptance criteria, each with a wall-clock budget.

Every test records a one-line PASS/FAIL verdict in ``RESULTS``; the
conftest prints them at the end of the run.
"""

import time
from contextlib import contextmanager

from bangtensor.boxops import enumerate_instances, expand, kill
from bangtensor.canon import canonical_string, equiv, equiv_upto_renaming, full_canonical
from bangtensor.calculus import load_theory
from bangtensor.generators import random_pretensor
from bangtensor.model import check_rule_in_model, load_model
from bangtensor.proofs import FIXED_BOX, run_proof_script
from bangtensor.syntax import parse, parse_tensor, print_tensor
from bangtensor.terms import violations
import props
from oracles import clause_replay, replay_instances, spider_instance

RESULTS = []

SEC4 = "[phi(+a -c +b) psi(+c -d)]B xi([-a>B) zeta(<-b +d]B -e)"
SPIDER = "s([-a>A [+b>B) [phi(+a)]A [psi(-b)]B"


@contextmanager
def criterion(number, title, budget):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < budget
        verdict = "PASS" if ok and within else "FAIL"
        RESULTS.append(f"{verdict} [{number}] {title}: {elapsed:.2f}s (budget {budget}s)")
    assert within, f"took {elapsed:.2f}s, budget {budget}s"


def codes(text):
    return {v.code for v in violations(parse_tensor(text))}


def test_1_well_formedness_classification():
    with criterion(1, "well-formedness classification", 1):
        assert codes("psi([+a>A) [phi(-a)]A") == set()
        assert codes("[psi(+a) phi(-a)]A") == set()
        assert codes("psi([+a>A) phi(<-a]A) []A") == set()
        assert codes("psi(+a) [phi(-a)]A") == {"C3"}
        composite = "phi([[-a>A>B) [[psi(-b)]B xi(<+b]B)]A"
        assert codes("phi([[-a>A>B) [[]A]B") == set()
        assert "C2" in codes(composite)


def test_2_worked_example():
    with criterion(2, "worked example Kill/Exp", 1):
        t = parse(SEC4)
        assert equiv(kill(t, "B"), parse("xi() zeta(-e)"))
        assert equiv(kill(t, "B"), parse(print_tensor(clause_replay(t.factors, "kill", "B"))))
        fr = {"a": "a'", "b": "b'", "c": "c'", "d": "d'"}
        by_hand = parse("[phi(+a -c +b) psi(+c -d)]B phi(+a' -c' +b') psi(+c' -d') "
                        "xi([-a>B -a') zeta(-b' +d' <-b +d]B -e)")
        replay = parse(print_tensor(clause_replay(t.factors, "exp", "B", fr)))
        assert equiv(expand(t, "B", fr), by_hand) and equiv(replay, by_hand)


def test_3_operations_preserve_well_formedness(rng):
    with criterion(3, "operation preservation (10^3 terms)", 30):
        steps = sum(props.check_random_steps(rng) for _ in range(1000))
        assert steps >= 1000


def test_4_context_table(rng):
    with criterion(4, "context table, six rows", 30):
        counts = {}
        rounds = 0
        rows = {f"{k}_{s}" for k in ("drop", "exp", "copy") for s in "EN"}
        while any(counts.get(r, 0) < 100 for r in rows):
            rounds += 1
            assert rounds < 20000
            for row, expected, actual in props.context_rows(rng):
                assert actual == expected, row
                counts[row] = counts.get(row, 0) + 1


def test_5_algebraic_identities(rng):
    with criterion(5, "algebraic identities", 60):
        checks = {name: f for name, f in props.IDENTITIES.items() if name != "nested"}
        for kind in props.OPS:
            checks[f"nested-{kind}"] = lambda r, k=kind: props.check_nested(r, k)
        for name, check in checks.items():
            n = tries = 0
            while n < 200:
                tries += 1
                assert tries < 5000, name
                n += check(rng)


def test_6_instance_counting():
    with criterion(6, "spider instance counting", 10):
        spider = parse(SPIDER)
        for n in range(4):
            insts = enumerate_instances(spider, n)
            assert len(insts) == (n + 1) ** 2
            for i, g in enumerate(insts):
                assert all(equiv_upto_renaming(g, h) is None for h in insts[i + 1:])
            keys = {full_canonical(x)[0] for x in insts}
            assert keys == replay_instances(spider, n)
            assert keys == {full_canonical(spider_instance(i, j))[0]
                            for i in range(n + 1) for j in range(n + 1)}


def test_7_proof_corpus(corpus):
    with criterion(7, "proof corpus and fixed-box rejection", 5):
        theory = (corpus / "monoid.bt").read_text()
        good = run_proof_script(theory, (corpus / "monoid_merge.btp").read_text())
        assert [v.status for v in good.verdicts] == ["proved"]
        bad = run_proof_script(theory, (corpus / "adversarial_fixed_box.btp").read_text())
        assert [v.status for v in bad.verdicts] == [FIXED_BOX]


def test_8_model_soundness(corpus):
    with criterion(8, "model soundness up to maxExp 2", 60):
        theory = (corpus / "monoid.bt").read_text()
        report = run_proof_script(theory, (corpus / "monoid_merge.btp").read_text())
        assert report.ok
        model = load_model(str(corpus / "z2_group_algebra.json"))
        for name, e in report.theory.rules.items():
            v = check_rule_in_model(e, model, 2, cross_check=True)
            assert v.ok, f"{name}: {v}"


def test_9_syntax_round_trip(rng, corpus):
    with criterion(9, "syntax round trip (10^4 ASTs)", 30):
        for _ in range(10_000):
            ast = random_pretensor(rng)
            assert parse_tensor(print_tensor(ast)) == ast
        th, lemmas = load_theory((corpus / "monoid.bt").read_text())
        sides = [s for e in list(th.rules.values()) + list(lemmas.values()) for s in (e.lhs, e.rhs)]
        sides += [parse(SEC4), parse(SPIDER),
                  parse("phi(+a [<-e]B>A <-d]C) [psi(+d -c)]C [[psi(+e -b)]B]A")]
        for t in sides:
            s = canonical_string(t)
            assert print_tensor(parse_tensor(s)) == s
