"""Shared fixtures and the acceptance summary hook."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from epcyl.background import GasParams

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SAMPLE = dict(gamma=2.0, J0=1.0, S0=1.0, b0=0.6, rho0=0.4)

# filled by pytest_runtest_logreport for tests carrying the `criterion` marker
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            _CRITERIA.setdefault(n, {"title": title, "outcomes": []})
            item.user_properties.append(("criterion", n))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[crit]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        c = _CRITERIA[n]
        outs = c["outcomes"]
        if not outs:
            status = "NOT RUN"
        elif all(o == "passed" for o in outs):
            status = "PASS"
        else:
            status = "FAIL"
        tr.write_line(f"criterion {n:2d}: {status:7s} {c['title']}")


# ------------------------------------------------------------------ fixtures

@pytest.fixture(scope="session")
def sample_params() -> GasParams:
    return GasParams(**SAMPLE)


@pytest.fixture(scope="session")
def swirl_scenario():
    from epcyl.config import load_config
    return load_config(CONFIGS / "swirl.yaml")


@lru_cache(maxsize=None)
def swirl_run(nx1: int = 32, nr: int = 128, K: int = 16, scale: float = 1.0,
              initial: str = "entrance", L: float = 0.2):
    """Solve the standard swirl scenario (optionally rescaled) once per argument set."""
    from epcyl import spectral_basis as sb
    from epcyl.axisym_solver import AxisymGrid, AxisymOptions, AxisymSolver
    from epcyl.config import load_config
    from epcyl.potential_solver import background_grid
    scn = load_config(CONFIGS / "swirl.yaml")
    p = scn.params
    bgg = background_grid(p, L, nx1, min_steps=4096)
    bd = scn.boundary_data(float(bgg.E[-1]))
    if scale != 1.0:
        bd = bd.scaled(scale)
    solver = AxisymSolver(p, AxisymGrid(L, nx1, nr), bd, sb.build("disk", K),
                          AxisymOptions(), background=bgg.solution)
    state, flow = solver.solve(initial)
    return state, flow, solver


@pytest.fixture(scope="session")
def swirl():
    return swirl_run




@lru_cache(maxsize=None)
def potential_run(nx1: int = 32, K: int = 16, scale: float = 1.0, shape: str = "disk",
                  L: float = 0.2):
    """Solve the shipped potential scenario once per argument set.

    Returns (state, problem, basis).
    """
    from epcyl import spectral_basis as sb
    from epcyl.boundary_data import BoundaryData, sigma
    from epcyl.config import load_config
    from epcyl.potential_solver import PicardOptions, background_grid, solve_potential
    scn = load_config(CONFIGS / "potential_disk.yaml")
    p = scn.params
    bgg = background_grid(p, L, nx1)
    bd = scn.boundary_data(float(bgg.E[-1]))
    if shape != "disk":
        bd = BoundaryData(shape, bd.eps_bar, bd.profiles, bd.reference)
    bd = bd.scaled(scale)
    basis = sb.build(shape, K)
    opts = PicardOptions(tol=1e-11, inner_tol=1e-12)
    state, problem = solve_potential(p, L, nx1, bd, basis, opts,
                                     sigma=sigma(bd, p, bgg.solution), background=bgg.solution)
    return state, problem, basis
