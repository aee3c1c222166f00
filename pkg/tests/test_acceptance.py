"""Acceptance criteria, one test per criterion.

Each test writes a ``[PASS]``/``[FAIL]`` line straight to the terminal
before asserting, so a run doubles as a criterion-by-criterion report.
"""

import filecmp
import time

import pytest

from oht import cli, suite

# wall-clock budgets in seconds, where a criterion states one
RUNTIME_LIMITS = {1: 10, 5: 300, 7: 120, 9: 600}

FULL_CHECKS = [c for c in suite.CHECKS if c is not suite.check_determinism]


@pytest.mark.slow
@pytest.mark.parametrize("check", FULL_CHECKS, ids=lambda c: c.__name__.removeprefix("check_"))
def test_criterion(check, capsys):
    res = suite.run_check(check, quick=False)
    limit = RUNTIME_LIMITS.get(res.number)
    within = limit is None or res.seconds < limit
    budget = f" [{res.seconds:.1f}s of {limit}s]" if limit else f" [{res.seconds:.1f}s]"
    with capsys.disabled():
        print("\n" + ("" if within else "[FAIL] runtime ") + res.line() + budget)
    assert res.passed, res.detail
    assert within, f"took {res.seconds:.1f}s, limit {limit}s"


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path, capsys):
    start = time.perf_counter()
    for d in ("a", "b"):
        assert cli.main(["paper-suite", "--quick", "--out-dir", str(tmp_path / d)]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    csv_files = [n for n in names if n.endswith(".csv") and n != "summary.csv"]
    # summary.csv carries no timings, so it must match byte for byte too
    same = [n for n in names if filecmp.cmp(tmp_path / "a" / n, tmp_path / "b" / n, shallow=False)]
    passed = same == names and len(csv_files) == len(suite.CHECKS)
    with capsys.disabled():
        print(f"\n[{'PASS' if passed else 'FAIL'}] 10 determinism: {len(same)}/{len(names)} files byte-identical "
              f"across two quick suite runs [{time.perf_counter() - start:.1f}s]")
    assert passed
