"""Exit criteria at their stated tolerances; each test prints one PASS/FAIL line."""

import pytest

from multibump.acceptance import CRITERIA, Context


@pytest.fixture(scope="module")
def ctx(cache_dir):
    return Context(cache_dir=cache_dir, seed=0)


@pytest.mark.slow
@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, capsys):
    res = CRITERIA[number](ctx)
    with capsys.disabled():
        print(f"\n{res.line}")
    assert res.passed, res.line
