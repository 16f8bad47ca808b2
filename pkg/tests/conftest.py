import math

import pytest

from risinvest.model import SystemParams
from risinvest.quadrature import QuadratureConfig


@pytest.fixture
def fast_cfg():
    """Looser tolerances for tests that only need a few digits."""
    return QuadratureConfig(rel_tol=1e-6, abs_tol=1e-8)


@pytest.fixture
def base_params():
    return SystemParams()


@pytest.fixture
def bare_params():
    """Single serving link: no interferers and no RISs."""
    return SystemParams(lambda_bs=0.0, lambda_ris=0.0)


def ris_density(n_per_ring, r_in=20.0, r_out=30.0):
    return n_per_ring / (math.pi * (r_out ** 2 - r_in ** 2))


def pytest_terminal_summary(terminalreporter):
    """One verdict line per acceptance criterion, if that module ran."""
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    ran = {int(rep.nodeid.split("::test_")[1][:2]) for stage in ("passed", "failed", "error")
           for rep in terminalreporter.stats.get(stage, []) if "test_acceptance.py::" in rep.nodeid}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ran):
        line = module.VERDICTS.get(number, f"criterion {number:2d}: FAIL  (raised before a verdict)")
        terminalreporter.write_line(line)
