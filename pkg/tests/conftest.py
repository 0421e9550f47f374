import numpy as np
import pytest

from gofd import cloud_quasi_uniform, cloud_rings, unit_disk

# criterion id -> list of (label, passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


def record(criterion, label, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
    print("%s %s: %s %s" % (criterion, label, "PASS" if passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        rows = ACCEPTANCE[key]
        ok = all(r[1] for r in rows)
        tr.write_line("%-4s %s" % (key, "PASS" if ok else "FAIL"))
        for label, passed, detail in rows:
            tr.write_line("       %-28s %s  %s" % (label, "pass" if passed else "FAIL", detail))


@pytest.fixture(scope="session")
def stencil_cache(pytestconfig):
    return str(pytestconfig.cache.mkdir("gofd-stencils"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def disk():
    return unit_disk()


@pytest.fixture(scope="session")
def rings10():
    return cloud_rings(10)


@pytest.fixture(scope="session")
def disk_cloud_300(disk):
    return cloud_quasi_uniform(disk, 300, seed=3)
