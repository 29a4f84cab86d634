import sys
from pathlib import Path

import pytest

from picosum.corpus import CleaningRules, load_reviews
from picosum.spans import load_lexicon, load_span_annotations
from picosum.tokenizer import WordTokenizer

FIXTURES = Path(__file__).parent / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def rules():
    return CleaningRules.default()


@pytest.fixture(scope="session")
def reviews():
    return load_reviews(FIXTURES / "reviews.jsonl")


@pytest.fixture(scope="session")
def span_index():
    return load_span_annotations(FIXTURES / "spans.jsonl")


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(FIXTURES / "lexicon.tsv")


@pytest.fixture()
def tokenizer():
    return WordTokenizer()


ACCEPTANCE_LINES: dict[int, str] = {}


class AcceptanceRecorder:
    """Records the PASS/FAIL/SKIP line of one criterion-marked test."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def check(self, ok: bool, detail: str = "") -> None:
        record(self.number, self.title, "PASS" if ok else "FAIL", detail)
        assert ok, f"criterion {self.number} failed: {detail}"

    def skip(self, reason: str) -> None:
        record(self.number, self.title, "SKIP", reason)
        pytest.skip(reason)


def record(number: int, title: str, status: str, detail: str = "") -> None:
    line = f"[{status}] criterion {number}: {title}"
    ACCEPTANCE_LINES[number] = f"{line} ({detail})" if detail else line


@pytest.fixture()
def acceptance(request):
    marker = request.node.get_closest_marker("criterion")
    return AcceptanceRecorder(*marker.args)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    # a criterion test that errored before its check still gets a FAIL line
    if marker and report.failed and marker.args[0] not in ACCEPTANCE_LINES:
        record(*marker.args, "FAIL", f"error during {report.when}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
