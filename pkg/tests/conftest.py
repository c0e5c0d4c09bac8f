from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles import

from tikray.morphology import FallbackLexicon
from tikray.resources import ResourceBundle

DATA_DIR = Path(__file__).parent / "data"
BUNDLE_SRC = DATA_DIR / "bundle_src"
GOLDEN_DIR = DATA_DIR / "golden"


@pytest.fixture(scope="session")
def bundle() -> ResourceBundle:
    return ResourceBundle.from_files(
        BUNDLE_SRC / "dictionary.tsv",
        BUNDLE_SRC / "grammar.txt",
        BUNDLE_SRC / "corpus.tsv",
        BUNDLE_SRC / "dataset.tsv",
    )


@pytest.fixture(scope="session")
def lexicon() -> FallbackLexicon:
    return FallbackLexicon.from_tsv((DATA_DIR / "lexicon.tsv").read_bytes())


@pytest.fixture(scope="session")
def items_by_id(bundle):
    return {item.item_id: item for item in bundle.dataset}


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text("utf-8")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        status = "PASS" if report.passed else "FAIL"
        criterion = item.name.replace("test_", "", 1)
        print(f"\n[ACCEPTANCE] {criterion}: {status}", file=sys.stderr)
