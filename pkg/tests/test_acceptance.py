"""Acceptance suite: every contract criterion at its pinned tolerance.

Each test prints a single PASS/FAIL line; ``roughgg accept`` runs the
same checks outside pytest.
"""

import pytest

from roughgg.accept import CRITERIA


@pytest.mark.parametrize("number,name,fn", CRITERIA,
                         ids=[f"{n:02d}-{name.replace(' ', '-')}"
                              for n, name, _ in CRITERIA])
def test_criterion(number, name, fn, capsys):
    passed, detail = fn()
    line = f"criterion {number:02d} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    with capsys.disabled():
        print(line)
    assert passed, line
