import pytest

from rachgeo import NetworkParams


@pytest.fixture
def ref_params():
    """Reference operating point: lambda=3, u_tilde=12, eta=4, rho=sigma2=-90 dBm, theta=-10 dB."""
    return NetworkParams(lam=3.0, u_tilde=12.0, eta=4.0, rho_dbm=-90.0, sigma2_dbm=-90.0, theta_db=-10.0)


DEFAULT_LADDER = (-90.0, -86.0, -82.0, -78.0, -74.0, -70.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split('criterion ')[1].split(':')[0])):
        terminalreporter.write_line(line)
