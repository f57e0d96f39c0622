import numpy as np
import pytest

from flexramp import grid
from flexramp.grid import Generator, GridModel
from flexramp.parametric import feasible_bounds
from flexramp.surface import build_surface

MODELS = ("threebus", "garver6")


@pytest.fixture(scope="session")
def threebus():
    return grid.bundled_model("threebus")


@pytest.fixture(scope="session")
def garver6():
    return grid.bundled_model("garver6")


@pytest.fixture(scope="session")
def models(threebus, garver6):
    return {"threebus": threebus, "garver6": garver6}


@pytest.fixture(scope="session")
def surfaces(models):
    return {name: build_surface(m) for name, m in models.items()}


@pytest.fixture(scope="session")
def bounds(models):
    return {name: feasible_bounds(m) for name, m in models.items()}


def frozen_model():
    """One generator without ramping ability: the region is the origin only."""
    gen = Generator("G", 1, 10.0, 0.0, 50.0, 50.0)
    return GridModel((1,), (), (gen,), 1, [[50.0], [50.0]], name="frozen")


def three_period_model():
    """The 3-bus system over three periods with a rising load."""
    base = grid.bundled_model("threebus")
    return GridModel(base.buses, base.lines, base.generators, base.slack_bus,
                     [[0, 0, 110], [0, 0, 120], [0, 0, 125]], name="threebus-t3")


def interior_points(surface, n, rng, margin=1e-6):
    """Uniform random points strictly inside the surface's region."""
    lo = surface.region.min(axis=0)
    hi = surface.region.max(axis=0)
    out = []
    while len(out) < n:
        p = rng.uniform(lo, hi)
        if surface.in_region(*p) and surface.in_region(*(p * (1 + margin))):
            out.append(p)
    return np.array(out)


def scale_of(surface):
    return max(1.0, abs(surface.theta_max))


# acceptance reporting: one line per criterion in the terminal summary

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[1])):
        outcome = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{outcome}  {name}")
