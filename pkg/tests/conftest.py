import numpy as np
import pytest

from psdebug import LRHyper, build_lr_surrogate, gen_2gauss, lr_classify, train_lr


def make_n12_task():
    """12 training points, a few LR steps, and a test point just across the boundary.

    The test point sits at distance 0.08 on the wrong side of the decision
    boundary, so restoring individual labels can move it back and the PS
    values spread over (0, 1).
    """
    ds = gen_2gauss(12, 2.0, 5)
    model, profile = train_lr(ds, LRHyper(5, 0.05))
    theta = model.theta
    unit = theta / np.linalg.norm(theta)
    perp = np.array([-unit[1], unit[0]])
    x = 1.5 * perp - 0.08 * unit
    expected = -lr_classify(model, x)
    return ds, build_lr_surrogate(profile, x, 0, expected)


@pytest.fixture(scope="session")
def n12_task():
    return make_n12_task()


@pytest.fixture(scope="session")
def gauss200():
    return gen_2gauss(200, 6.0, 1)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the summary prints every recorded line."""
    results = request.config.stash.setdefault(_CRITERIA, {})

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        results[number] = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
