import pytest
from hypothesis import HealthCheck, settings

from spacescore.core import Dataset, ParamDomain, SearchSpace, evaluate, uniform_sample
from spacescore.bench.objectives import BASE_SPACES, make_objective

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def branin_space():
    return BASE_SPACES["branin"]


@pytest.fixture
def branin_data(branin_space):
    x = uniform_sample(branin_space, 15, seed=11)
    return Dataset(branin_space, x, evaluate(make_objective("branin"), x))


@pytest.fixture
def eta_space():
    return SearchSpace((ParamDomain("eta", 1e-5, 10.0, "log10"),))


ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (number, title, detail) before asserting."""
    record = {}

    def note(number: int, title: str, detail: str = ""):
        record.update(number=number, title=title, detail=detail)

    yield note
    if record:
        rep = getattr(request.node, "rep_call", None)
        status = "PASS" if rep is not None and rep.passed else "FAIL"
        ACCEPTANCE[record["number"]] = (record["title"], status, record["detail"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[number]
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
