"""Shared fixtures: default physics objects and one cached 43S synthesis.

The synthesized default trace is expensive enough (tenths of a second to a
few seconds depending on backend) that every consumer shares one
session-scoped copy.
"""

import numpy as np
import pytest

from rydeit import atomdata, cli, doppler, ladder, velocitymap
from rydeit.config import RunConfig
from rydeit.spectrum import synthesize_trace


@pytest.fixture(scope="session")
def atom():
    return atomdata.load_constants()


@pytest.fixture(scope="session")
def system():
    return ladder.LadderSystem()


@pytest.fixture(scope="session")
def ensemble():
    return doppler.ThermalEnsemble()


@pytest.fixture(scope="session")
def default_config():
    return RunConfig()


@pytest.fixture(scope="session")
def pathways43(atom, system, ensemble):
    return velocitymap.build_pathway_set(43, ("S1/2",), atom, system, ensemble)


@pytest.fixture(scope="session")
def grid43(default_config, pathways43):
    return cli.build_grid(default_config, pathways43)


@pytest.fixture(scope="session")
def trace43(default_config, pathways43, grid43, system, ensemble):
    """Default-configuration 43S coupling scan, shared across the suite."""
    return synthesize_trace(
        grid43,
        pathways43,
        system,
        ensemble,
        default_config.quadrature(),
        default_config.cell_length_mm,
    )


@pytest.fixture(scope="session")
def single_pathway_trace(default_config, atom, system, ensemble):
    """Only the reference F'=5 pathway, for wing-dip and sideband shape tests."""
    pathway = velocitymap.build_pathway_set(
        43, ("S1/2",), atom, system, ensemble, f_levels=(5,)
    )
    grid = np.linspace(-120.0, 120.0, 961)
    return synthesize_trace(
        grid,
        pathway,
        system,
        ensemble,
        default_config.quadrature(),
        default_config.cell_length_mm,
    )
