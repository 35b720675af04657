"""Exit criteria; prints one PASS/FAIL line per criterion (run with ``-s`` to see them live)."""

import pytest

from fronthaul_mux.acceptance import CRITERIA, run_criterion
from fronthaul_mux.dist import ModelParams


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: f"c{c.number:02d}-{c.name.replace(' ', '-')}")
def test_criterion(criterion, capsys):
    result = run_criterion(criterion, ModelParams())
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
