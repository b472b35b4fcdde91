import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def plugin_command(mode: str, arg: str | None = None) -> list[str]:
    cmd = [sys.executable, str(FIXTURES / "scripted_plugin.py"), mode]
    if arg is not None:
        cmd.append(arg)
    return cmd


@pytest.fixture
def tiny_corpus():
    from tar_bench.corpus import Corpus, Document

    texts = {
        "d1": "apple banana cherry",
        "d2": "banana cherry date",
        "d3": "cherry date elderberry",
        "d4": "apple apple banana",
        "d5": "fig grape honeydew",
        "d6": "grape honeydew kiwi",
    }
    return Corpus(Document.make(d, t) for d, t in texts.items())
