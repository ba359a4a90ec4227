import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


@pytest.fixture
def rng():
    from bangtensor.generators import make_rng
    return make_rng(int(os.environ.get("BANGBOX_SEED", "1234")))


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


@pytest.fixture(scope="session")
def monoid():
    from bangtensor.calculus import load_theory
    return load_theory((CORPUS / "monoid.bt").read_text())


@pytest.fixture
def z2():
    # fresh per test: some tests corrupt an assignment
    from bangtensor.model import load_model
    return load_model(str(CORPUS / "z2_group_algebra.json"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
