"""The twelve acceptance criteria at their stated tolerances.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary so the full table is visible even under output capture.
"""
import inspect
import os

import pytest

from gibbsrare import acceptance

LINES: dict[int, str] = {}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, capsys):
    fn = acceptance.CRITERIA[number]
    kwargs = {"workers": os.cpu_count() or 1} if "workers" in inspect.signature(fn).parameters else {}
    res = fn(**kwargs)
    LINES[number] = res.line()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
