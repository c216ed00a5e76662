from __future__ import annotations

from pathlib import Path

import pytest

from apiaugment.tokenizer import Tokenizer

FIXTURES = Path(__file__).parent / "fixtures"


def make_tokenizer(*texts: str) -> Tokenizer:
    return Tokenizer.from_texts(texts)


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
