import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from openpnet import bisim, dsl, semantics  # noqa: E402

CORPUS = HERE.parent / "src" / "openpnet" / "corpus"


def load_corpus(name):
    pnet, _ = dsl.load(CORPUS / name, strict=False)
    return pnet


@pytest.fixture(scope="session")
def corpus_dir():
    return CORPUS


@pytest.fixture(scope="session")
def spec_pnet():
    return load_corpus("spec.pnet")


@pytest.fixture(scope="session")
def impl_pnet():
    return load_corpus("impl.pnet")


@pytest.fixture(scope="session")
def spec_oa(spec_pnet):
    return semantics.derive_open_automaton(spec_pnet)


@pytest.fixture(scope="session")
def impl_oa(impl_pnet):
    return semantics.derive_open_automaton(impl_pnet)


@pytest.fixture(scope="session")
def relation_text():
    return (CORPUS / "relation.rel").read_text()


@pytest.fixture(scope="session")
def aligned(spec_oa, impl_oa, relation_text):
    a1, a2 = bisim.align(spec_oa, impl_oa)
    return a1, a2, bisim.parse_relation(relation_text, a1, a2)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        terminalreporter.write_line(results[key])
