"""The twelve acceptance criteria at their stated tolerances.

Each test prints one [PASS]/[FAIL] line (run with ``-s`` to see them live;
they are also repeated in the terminal summary).
"""

import pytest

from aztec2p.acceptance import CRITERIA

LINES: list[str] = []


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    r = CRITERIA[number]()
    line = r.line()
    LINES.append(line)
    print(line)
    assert r.passed, line
