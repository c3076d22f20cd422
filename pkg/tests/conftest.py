import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "pkd",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("pkd")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def multiset(points):
    from collections import Counter

    return Counter(map(tuple, np.asarray(points).tolist()))


# ---------------------------------------------------------------- acceptance
# Tests marked ``criterion(n, title)`` get one PASS/FAIL/SKIP line in the
# terminal summary; ``record_detail`` attaches the measured numbers.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.fixture
def record_detail(request):
    def record(text):
        request.node.user_properties.append(("detail", text))
        print(f"criterion {request.node.get_closest_marker('criterion').args[0]}: {text}")

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        details = [v for k, v in item.user_properties if k == "detail"]
        if rep.outcome == "skipped" and isinstance(rep.longrepr, tuple):
            details.append(rep.longrepr[2])
        _CRITERIA[num] = (status, title, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[num]
        line = f"[{status}] criterion {num:>2}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
