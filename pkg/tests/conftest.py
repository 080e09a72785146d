import numpy as np
import pytest

from conefrac.cones import ConeProfile, cap_of_cone
from conefrac.extension import build_halfball_grid, solve_extension
from conefrac.expressions import parse_expression
from conefrac.params import ProblemParams
from conefrac.spectral import solve_eigs
from conefrac.sphercap import assemble, build_mesh

HALF_S = 0.5
HALF_LAM = 0.1


@pytest.fixture(scope="session")
def half_params():
    return ProblemParams(s=HALF_S, lam=HALF_LAM)


@pytest.fixture(scope="session")
def half_cap():
    return cap_of_cone(ConeProfile.half_plane())


@pytest.fixture(scope="session")
def half_forms(half_params, half_cap):
    mesh = build_mesh(24, 48, HALF_S, half_cap, grading=2.0)
    return assemble(mesh, half_params)


@pytest.fixture(scope="session")
def half_es(half_forms, half_params):
    return solve_eigs(half_forms, half_params, k=8)


@pytest.fixture(scope="session")
def solver_field(half_es, half_params, half_cap):
    """Extension solve with a constant perturbation, shared by the
    Green-identity / mode-profile diagnostics."""
    grid = build_halfball_grid(32, 1e-3, half_es.mesh)
    h = parse_expression("0.1")
    fld = solve_extension(grid, half_params, half_cap, h,
                          half_es.vectors[0], es=half_es)
    return fld, h


@pytest.fixture(scope="session")
def solver_field_h0(half_es, half_params, half_cap):
    """Extension solve without perturbation (inner boundary pinned to the
    dominant homogeneous mode)."""
    grid = build_halfball_grid(24, 1e-3, half_es.mesh)
    fld = solve_extension(grid, half_params, half_cap, None,
                          half_es.vectors[0], es=half_es)
    return fld
