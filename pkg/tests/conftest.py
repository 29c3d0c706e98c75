from __future__ import annotations

import json

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "hjreg", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("hjreg")


def cosine_doc(q=2.0, box=(-2.0, 2.0), **extra):
    doc = {
        "dimension": 1,
        "q": q,
        "T": 1.0,
        "b": "1",
        "f": ["0"],
        "g": "cos(x1)",
        "M": 1.0,
        "delta": 1.0,
        "box": [list(box)],
    }
    doc.update(extra)
    return doc


@pytest.fixture
def cosine_json(tmp_path):
    path = tmp_path / "cosine.json"
    path.write_text(json.dumps(cosine_doc()))
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
