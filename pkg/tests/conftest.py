import pytest

from onebitlink.process import make_pattern
from onebitlink.waveforms import build_full_set, normalize_energy, standard_set, windowed


@pytest.fixture(scope="session")
def uniform43():
    return standard_set("uniform", 4, 3)


@pytest.fixture(scope="session")
def nonuniform43():
    return standard_set("nonuniform", 4, 3)


@pytest.fixture(scope="session")
def nonuniform33_pool():
    pattern = make_pattern("nonuniform", 3, 0.25)
    return normalize_energy(build_full_set(pattern, 3, 1.0, windowed(0.1), drop_duplicates=False))


@pytest.fixture(scope="session")
def small_set():
    """kappa=1, n=2 uniform: four waveforms, four output words."""
    return standard_set("uniform", 2, 1)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance summary and print it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def _report(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
