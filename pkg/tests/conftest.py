import numpy as np
import pytest

from bpsplan.catalog import load_reference_catalog
from bpsplan.model import PolicyConfig
from bpsplan.problems import PlanningProblem, constant_outage_scenarios
from bpsplan.solver import SolveOptions


@pytest.fixture(scope="session")
def catalog():
    return load_reference_catalog()


@pytest.fixture(scope="session")
def diesel_only(catalog):
    return catalog.subset(fuel_names=["diesel"], battery_names=[],
                          include_pv=False)


@pytest.fixture(scope="session")
def diesel_battery(catalog):
    return catalog.subset(fuel_names=["diesel"], battery_names=["ironair"],
                          include_pv=False)


@pytest.fixture()
def tiny_problem(diesel_only):
    """One flat 1-hour outage in an 8-step window; solvable in milliseconds."""
    scen = constant_outage_scenarios(100.0, hours=1.0, n_steps=8)
    return PlanningProblem(scen, diesel_only, PolicyConfig(),
                           solve_options=SolveOptions(backend="reference"))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
