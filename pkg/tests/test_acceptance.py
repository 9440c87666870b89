"""End-to-end acceptance criteria at their stated tolerances.

Each criterion prints one ``[PASS]`` / ``[FAIL]`` line to the terminal.
Deselect with ``-m "not acceptance"`` for a fast run.
"""

import pytest

from bidirmmse.validation import CRITERIA

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line(), flush=True)
    assert result.passed, result.detail
    assert result.within_budget, f"took {result.elapsed:.1f}s, budget {result.budget:.0f}s"
