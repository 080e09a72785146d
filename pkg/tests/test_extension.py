"""The half-ball solver: exactness oracles (constants, homogeneous
profiles), linearity, convergence, and the field container behaviour."""

import math

import numpy as np
import pytest

from conefrac.cones import ConeProfile, SphericalCap, cap_of_cone
from conefrac.errors import DomainError
from conefrac.extension import (build_halfball_grid, load_field,
                                manufactured_field, save_field,
                                solve_extension)
from conefrac.expressions import parse_expression
from conefrac.params import ProblemParams
from conefrac.spectral import solve_eigs
from conefrac.sphercap import assemble, build_mesh


def _weighted_l2_error(fld, es, mode, grid, forms, s):
    g = es.gamma[mode]
    num = den = 0.0
    for k, r in enumerate(grid.r_nodes):
        exact = r ** g * es.vectors[mode]
        diff = fld.values[k] - exact
        w = r ** (3.0 - 2.0 * s)
        num += w * float(diff @ (forms.M @ diff))
        den += w * float(exact @ (forms.M @ exact))
    return math.sqrt(num / den)


def test_constant_solution_full_circle():
    s = 0.5
    p = ProblemParams(s=s, lam=0.0)
    cap = SphericalCap.full_circle()
    mesh = build_mesh(12, 24, s, cap)
    grid = build_halfball_grid(10, 1e-3, mesh)
    fld = solve_extension(grid, p, cap, None, np.ones(mesh.n_nodes))
    assert np.abs(fld.values - 1.0).max() < 1e-9


def test_homogeneous_profile_reproduction(half_es, half_params, half_cap,
                                          half_forms):
    grid = build_halfball_grid(16, 1e-3, half_es.mesh)
    fld = solve_extension(grid, half_params, half_cap, None,
                          half_es.vectors[0], es=half_es)
    err = _weighted_l2_error(fld, half_es, 0, grid, half_forms,
                             half_params.s)
    assert err < 0.03
    assert fld.meta["inner_mode"] == 0


def test_trace_vanishes_off_cap(half_es, half_params, half_cap):
    grid = build_halfball_grid(8, 1e-2, half_es.mesh)
    fld = solve_extension(grid, half_params, half_cap, None,
                          half_es.vectors[0], es=half_es)
    mesh = half_es.mesh
    assert np.abs(fld.values[:, mesh.dirichlet_ids]).max() == 0.0


def test_linearity_in_boundary_data(half_es, half_params, half_cap):
    grid = build_halfball_grid(8, 1e-2, half_es.mesh)
    lid = half_es.vectors[0]
    f1 = solve_extension(grid, half_params, half_cap, None, lid, es=half_es)
    f3 = solve_extension(grid, half_params, half_cap, None, 3.0 * lid,
                         es=half_es)
    np.testing.assert_allclose(f3.values, 3.0 * f1.values,
                               rtol=1e-8, atol=1e-12)


def test_perturbation_linear_response(half_es, half_params, half_cap):
    # deviation from the homogeneous profile scales like the size of h
    grid = build_halfball_grid(10, 1e-2, half_es.mesh)
    lid = half_es.vectors[0]
    base = solve_extension(grid, half_params, half_cap, None, lid,
                           es=half_es)
    devs = []
    for c in (0.1, 0.05):
        fld = solve_extension(grid, half_params, half_cap,
                              parse_expression(str(c)), lid, es=half_es)
        # compare on the outer shells (the h-run uses a natural inner
        # boundary, the base run pins the inner shell)
        sel = slice(3, grid.n_surfaces)
        devs.append(np.linalg.norm(fld.values[sel] - base.values[sel]))
    assert devs[0] / devs[1] == pytest.approx(2.0, rel=0.15)


def test_refinement_convergence(half_params, half_cap):
    s = half_params.s
    errors = []
    for nt, ntheta, nr in ((12, 24, 8), (24, 48, 16)):
        mesh = build_mesh(nt, ntheta, s, half_cap)
        forms = assemble(mesh, half_params)
        es = solve_eigs(forms, half_params, k=3)
        grid = build_halfball_grid(nr, 1e-3, mesh)
        fld = solve_extension(grid, half_params, half_cap, None,
                              es.vectors[0], es=es)
        errors.append(_weighted_l2_error(fld, es, 0, grid, forms, s))
    assert errors[0] / errors[1] >= 1.5


def test_manufactured_field_basics(half_es):
    fld = manufactured_field(half_es, [(0, 1.0), (3, 0.25)])
    mesh = half_es.mesh
    # trace vanishes off the cap
    tr = fld.trace_values(0.5)
    eq_mask = np.zeros(mesh.ntheta, dtype=bool)
    eq_mask[np.flatnonzero(mesh.robin_mask)] = True
    assert np.abs(tr[~eq_mask]).max() == 0.0
    # mode-wise scaling under dilation
    v1 = fld.sphere_values(1.0)
    tau = 0.5
    expected = (fld.betas * tau ** fld.gammas) @ fld.psi_matrix
    np.testing.assert_allclose(fld.sphere_values(tau), expected,
                               rtol=1e-13, atol=1e-15)
    assert v1.shape == (mesh.n_nodes,)


def test_manufactured_field_single_mode_is_profile(half_es):
    from conefrac.spectral import homogeneous_profile
    fld = manufactured_field(half_es, [(1, 1.0)])
    ev = homogeneous_profile(half_es, 1)
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((40, 3)) * 0.4
    pts[:, 2] = np.abs(pts[:, 2])
    np.testing.assert_allclose(fld.evaluate(pts), ev(pts),
                               rtol=1e-12, atol=1e-14)


def test_manufactured_field_validation(half_es):
    with pytest.raises(DomainError):
        manufactured_field(half_es, [])
    with pytest.raises(DomainError):
        manufactured_field(half_es, [(99, 1.0)])


def test_field_save_load_round_trip(tmp_path, solver_field):
    fld, _ = solver_field
    path = tmp_path / "field.bin"
    save_field(path, fld)
    back = load_field(path)
    np.testing.assert_allclose(back.values, fld.values, atol=0.0)
    np.testing.assert_allclose(back.grid.r_nodes, fld.grid.r_nodes)
    assert back.cap.a == pytest.approx(fld.cap.a)
    assert back.mesh.nt == fld.mesh.nt
    # header is little-endian with the documented magic
    raw = path.read_bytes()
    assert raw[:4] == b"CFXF"


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(DomainError):
        load_field(path)


def test_grid_field_interpolation_consistency(solver_field_h0):
    fld = solver_field_h0
    # at shell radii the interpolant reproduces the stored values
    for k in (0, 5, 12):
        r = fld.grid.r_nodes[k]
        np.testing.assert_allclose(fld.sphere_values(r), fld.values[k],
                                   rtol=1e-10, atol=1e-12)


def test_grid_field_power_continuation(solver_field_h0, half_es):
    fld = solver_field_h0
    # below r_min the field continues as the local power; the h = 0 solve
    # pins the inner shell to the first eigenmode, so the local exponent is
    # close to gamma_1
    g = fld.local_power()
    assert g == pytest.approx(half_es.gamma[0], abs=0.05)
    r = 0.5 * fld.grid.r_min
    inner = fld.values[0]
    live = np.abs(inner) > 1e-12 * np.abs(inner).max()
    ratio = fld.sphere_values(r)[live] / inner[live]
    assert np.allclose(ratio, (r / fld.grid.r_min) ** g, rtol=1e-10)


def test_grid_validation(half_es):
    with pytest.raises(DomainError):
        build_halfball_grid(2, 1e-3, half_es.mesh)
    with pytest.raises(DomainError):
        build_halfball_grid(8, 2.0, half_es.mesh)


def test_solver_rejects_bad_lid(half_es, half_params, half_cap):
    grid = build_halfball_grid(8, 1e-2, half_es.mesh)
    with pytest.raises(DomainError):
        solve_extension(grid, half_params, half_cap, None, np.ones(5))
