import pytest

from repulsive_nbody import integrate, scenarios
from repulsive_nbody.integrate import StepperConfig

ACCEPTANCE_LINES = []

T_END = 1000.0
EXTRA_TIMES = (50.0, 100.0, 250.0, 500.0)


def _run(spec, t_end=T_END, per_decade=16, extra=EXTRA_TIMES, config=None):
    state = scenarios.build(spec)
    times = integrate.geometric_output_times(t_end, factor=10 ** (1 / per_decade), extra=extra)
    return integrate.integrate_adaptive(state, t_end, config or StepperConfig(), times)


@pytest.fixture(scope="session")
def cloud_run():
    """Seeded n=5 random cloud, default stepper, t in [0, 1000]."""
    return _run(scenarios.ScenarioSpec(kind="random-cloud", n=5, seed=0))


@pytest.fixture(scope="session")
def head_on_run():
    return _run(scenarios.ScenarioSpec(kind="two-body-head-on", head_on_separation=1.0))


@pytest.fixture(scope="session")
def cloud_runs_by_spacing():
    spec = scenarios.ScenarioSpec(kind="random-cloud", n=5, seed=0)
    return {k: _run(spec, per_decade=k, extra=()) for k in (16, 32)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
