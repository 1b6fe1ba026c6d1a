import pytest

from rw import rules as R
from rw import matcher as M


@pytest.fixture(scope="session")
def prelude():
    return R.prelude()


@pytest.fixture(scope="session")
def prelude_compiled(prelude):
    return M.compile_ruleset(prelude)


@pytest.fixture(scope="session")
def two_rules():
    return R.parse_rules(
        "rule plus_zero: forall (n : Z), n + 0 => n\n"
        "rule fst_pair: forall (x : Z) (y : Z), fst (x, y) => x\n")


@pytest.fixture(scope="session")
def two_rules_compiled(two_rules):
    return M.compile_ruleset(two_rules)
