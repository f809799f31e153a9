import pytest

from qillum.protocol import ProtocolParams

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig2():
    """Published operating point: N_S = 1e-3, kappa = 0.01, N_B = 20."""
    return ProtocolParams(n_s=1e-3, kappa=0.01, n_b=20.0)


@pytest.fixture
def fig2_m5(fig2):
    return fig2.with_m(100_000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
