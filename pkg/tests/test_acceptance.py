"""Acceptance criteria 1-10 at their stated tolerances; one PASS/FAIL line each."""

import pytest

from locality_lab.acceptance import CRITERIA, DEFAULT_SEED

from conftest import ACCEPTANCE_LINES

RUNTIME_LIMITS = {1: 10.0, 2: 120.0, 7: 300.0}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = CRITERIA[number](DEFAULT_SEED)
    line = f"{result.line()}  ({result.elapsed:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
    if number in RUNTIME_LIMITS:
        assert result.elapsed < RUNTIME_LIMITS[number], f"criterion {number} took {result.elapsed:.1f}s"
