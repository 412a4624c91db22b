import numpy as np
import pytest

from netdiffusion.graph import (
    generate_configuration_model,
    largest_component,
    path_graph,
    star_graph,
)


@pytest.fixture
def star():
    return star_graph(4)


@pytest.fixture
def p3_hub():
    """Path 0-1-2 with only the hub (node 1) infected."""
    return path_graph(3, labels=[0, 1, 0])


@pytest.fixture(scope="session")
def powerlaw_2000():
    return generate_configuration_model(2000, 2.4, d_min=1, seed=11)


@pytest.fixture(scope="session")
def powerlaw_lcc():
    """Connected, non-bipartite power-law graph."""
    g = largest_component(generate_configuration_model(3000, 2.1, d_min=2, seed=5))
    assert g.is_connected and not g.is_bipartite()
    return g


def tv_distance(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# ---------------------------------------------------------------- acceptance reporting

def pytest_configure(config):
    config.acceptance_lines = []


class Criterion:
    """Collects sub-checks of one acceptance criterion and prints a PASS/FAIL line."""

    def __init__(self, lines):
        self.lines = lines
        self.num = None
        self.title = ""
        self.failures = []
        self.notes = []
        self.finished = False

    def start(self, num, title):
        self.num, self.title = num, title
        return self

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)
        return bool(ok)

    def note(self, text):
        self.notes.append(text)

    def _emit(self, status, extra):
        line = f"criterion {self.num} {status}: {self.title}"
        if extra:
            line += " | " + "; ".join(extra)
        self.lines.append(line)
        print(line)

    def finish(self):
        self.finished = True
        self._emit("PASS" if not self.failures else "FAIL", self.notes + self.failures)
        assert not self.failures, "; ".join(self.failures)


@pytest.fixture
def criterion(request):
    c = Criterion(request.config.acceptance_lines)
    yield c
    if c.num is not None and not c.finished:
        c._emit("FAIL", ["error before completion"] + c.notes + c.failures)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
