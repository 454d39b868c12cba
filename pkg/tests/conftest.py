import os

import pytest

from behavnav.worldsim import DescriptorLibrary


@pytest.fixture(scope="session")
def library():
    return DescriptorLibrary()


@pytest.fixture(scope="session")
def base_memory(library):
    # trained once per machine and cached on disk (see BEHAVNAV_CACHE)
    from behavnav.bench import pretrained_memory
    return pretrained_memory(library)


@pytest.fixture(scope="session")
def reference():
    from behavnav.floorplan import reference_floorplan
    from behavnav.semgraph import extract_graph
    plan = reference_floorplan()
    return plan, extract_graph(plan)


def pytest_report_header(config):
    return f"behavnav cache: {os.environ.get('BEHAVNAV_CACHE', '~/.cache/behavnav')}"


# acceptance criteria register a one-line verdict here; printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
