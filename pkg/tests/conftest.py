import numpy as np
import pytest

from cs_emg.dataset import N_MOVEMENTS, N_MUSCLES, Recording, SubjectBundle


def make_bundle(trials=(3,) * 7, length=256, label=0, subject_id="s0", seed=0):
    """Bundle of white-noise recordings with ``trials[j]`` repetitions of movement j."""
    rng = np.random.default_rng(seed)
    recs = {}
    for j, nt in enumerate(trials):
        for k in range(nt):
            for i in range(N_MUSCLES):
                recs[(i, j, k)] = Recording(subject_id, i, j, k, rng.standard_normal(length))
    return SubjectBundle(subject_id, label, recs)


@pytest.fixture
def bundle():
    return make_bundle()


# -- acceptance summary: one PASS/FAIL line per criterion ------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test decides")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n, title = marker
        _criteria[n] = (title, report.outcome, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcome, duration = _criteria[n]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title}  ({duration:.1f}s)")
