from pathlib import Path

import pytest

from cpsloss.io import read_geometry
from cpsloss.regrowth import ShiftSolver

DATA = Path(__file__).resolve().parents[1] / "src" / "cpsloss" / "data"
DEVICES = ("CPS1", "CPS2", "CPS3", "CPS4")

# tabulated p-tilde (ppm/nm): ma, ms, sa, c
QUOTED_P_TILDE = {
    "CPS1": (29.7, 196, 192, 41.5),
    "CPS2": (21.7, 142, 138, 30.4),
    "CPS3": (17.4, 106, 103, 24.0),
    "CPS4": (14.4, 77.5, 74.8, 19.7),
}
# (Q_int, Q_extr) and the quoted Q_intr
QUOTED_Q = {
    "CPS1": (1.5e6, 250e6, 1.5e6),
    "CPS2": (1.7e6, 340e6, 1.7e6),
    "CPS3": (2.0e6, 97e6, 2.0e6),
    "CPS4": (2.0e6, 12e6, 2.5e6),
}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def geometries():
    return {d: read_geometry(DATA / "geometries" / f"{d.lower()}.json")[0] for d in DEVICES}


@pytest.fixture(scope="session")
def shift_solver():
    return ShiftSolver()


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail, seconds in sorted(ACCEPTANCE):
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}  {title}: {detail}  [{seconds:.2f} s]")
