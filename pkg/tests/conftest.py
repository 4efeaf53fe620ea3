import numpy as np
import pytest

from markovbandit import build_family, iid_family, two_state_family


def random_family(seed=0, n=5):
    rng = np.random.default_rng(seed)
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    f = rng.normal(size=n)
    return build_family(P, f)


@pytest.fixture(scope="session")
def fam2():
    return two_state_family(0.49, 0.45)


@pytest.fixture(scope="session")
def fam5():
    return random_family(0)


@pytest.fixture(scope="session")
def bern():
    return iid_family([0.5, 0.5], [0.0, 1.0])


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per criterion; printed again in the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def report(tag, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
