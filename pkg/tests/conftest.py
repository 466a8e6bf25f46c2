import os

import pytest

os.environ.setdefault("CCR_LAB_THREADS", "1")


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line to the terminal, bypassing capture."""

    def emit(label: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok

    return emit
