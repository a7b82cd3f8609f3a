import contextlib
import time

import pytest

# (number, status, title, detail, seconds) for each acceptance criterion run
ACCEPTANCE_LINES: list[tuple[int, str, str, str, float]] = []


@pytest.fixture
def header():
    return {"video_id": "v0", "label": 1, "width": 100, "height": 100, "num_frames": 2,
            "embedding_dim": 2, "fakeness_channels": 1}


@pytest.fixture
def body():
    return {"frame": 0, "x": 10, "y": 10, "w": 20, "h": 30, "embedding": [0.1, 0.2], "fakeness": [0.7]}


@pytest.fixture
def criterion():
    """Context manager recording one PASS/FAIL line per acceptance criterion.

    The body fills ``detail["text"]`` with the measured numbers.
    """

    @contextlib.contextmanager
    def record(number: int, title: str):
        detail = {"text": ""}
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield detail
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            ACCEPTANCE_LINES.append((number, status, title, detail["text"], elapsed))
            print(f"[{status}] criterion {number}: {title} -- {detail['text']} ({elapsed:.1f}s)")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, text, elapsed in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} -- {text} ({elapsed:.1f}s)")
