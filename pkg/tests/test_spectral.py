"""Eigenpairs of the weighted spherical pencil: closed-form anchors, the
separated 1-D oracle, and the qualitative monotonicity structure."""

import math
import warnings

import numpy as np
import pytest

from conefrac.cones import ConeProfile, SphericalCap, cap_of_cone
from conefrac.errors import DomainError
from conefrac.params import ProblemParams
from conefrac.spectral import (homogeneous_profile, oracle_full_circle_1d,
                               solve_eigs)
from conefrac.sphercap import assemble, build_mesh


def _eigs(nt, ntheta, s, cap, lam=0.0, k=8, grading=2.0, **kw):
    p = ProblemParams(s=s, lam=lam)
    mesh = build_mesh(nt, ntheta, s, cap, grading)
    return solve_eigs(assemble(mesh, p), p, k=k, **kw), p


def _distinct(mu, rtol=0.02):
    groups = [[mu[0]]]
    for v in mu[1:]:
        if abs(v - groups[-1][-1]) <= rtol * (1.0 + abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return [float(np.mean(g)) for g in groups], [len(g) for g in groups]


# ---------------------------------------------------------------------------
# closed-form anchors
# ---------------------------------------------------------------------------

def test_full_circle_lambda0_anchors_s_half():
    es, _ = _eigs(48, 96, 0.5, SphericalCap.full_circle(), k=12)
    reps, _ = _distinct(es.mu)
    exact = [k * (k + 1.0) for k in range(4)]
    assert abs(reps[0]) < 1e-8
    for r, e in zip(reps[1:4], exact[1:4]):
        assert r == pytest.approx(e, rel=0.01)


def test_full_circle_constant_mode_any_s():
    for s in (0.3, 0.8):
        es, _ = _eigs(16, 32, s, SphericalCap.full_circle(), k=3)
        assert abs(es.mu[0]) < 1e-9
        psi = es.vectors[0]
        assert psi.std() / abs(psi.mean()) < 1e-6


def test_half_circle_anchors():
    cap = cap_of_cone(ConeProfile.half_plane())
    es, _ = _eigs(48, 96, 0.5, cap, k=4)
    assert es.mu[0] == pytest.approx(0.75, rel=0.02)
    assert es.mu[1] == pytest.approx(3.75, rel=0.02)
    np.testing.assert_allclose(es.gamma[:2], [0.5, 1.5], rtol=0.02)


def test_spectrum_floor_for_admissible_lambda():
    cap = cap_of_cone(ConeProfile.half_plane())
    for s, lam in ((0.5, 0.1), (0.75, 0.02), (0.25, 0.2)):
        es, p = _eigs(20, 40, s, cap, lam=lam, k=8)
        assert np.all(es.mu > p.spectrum_floor)


def test_m_orthonormality(half_es, half_forms):
    G = half_es.vectors @ (half_forms.M @ half_es.vectors.T)
    assert np.abs(G - np.eye(half_es.k)).max() < 1e-10


def test_first_eigenfunction_fixed_sign(half_es):
    psi = half_es.vectors[0]
    interior = psi[np.abs(psi) > 1e-10 * np.abs(psi).max()]
    assert np.all(interior > 0.0) or np.all(interior < 0.0)
    # sign convention: weighted integral positive
    assert interior.sum() > 0.0


def test_dense_and_sparse_paths_agree():
    cap = SphericalCap.full_circle()
    p = ProblemParams(s=0.5)
    mesh = build_mesh(20, 40, 0.5, cap)      # 800 dofs: dense path
    es_dense = solve_eigs(assemble(mesh, p), p, k=6)
    import conefrac.spectral as spectral
    old = spectral.DENSE_CUTOFF
    spectral.DENSE_CUTOFF = 10
    try:
        es_sparse = solve_eigs(assemble(mesh, p), p, k=6)
    finally:
        spectral.DENSE_CUTOFF = old
    np.testing.assert_allclose(es_dense.mu, es_sparse.mu,
                               rtol=1e-9, atol=1e-9)


def test_eigenvector_dirichlet_zeros(half_es):
    mesh = half_es.mesh
    assert np.abs(half_es.vectors[:, mesh.dirichlet_ids]).max() == 0.0


def test_gamma_matches_mu(half_es, half_params):
    from conefrac.params import mu_from_gamma
    for mu, g in zip(half_es.mu, half_es.gamma):
        assert mu_from_gamma(g, half_params) == pytest.approx(
            mu, rel=1e-12, abs=1e-12)


def test_inadmissible_lambda_raises_without_flag():
    cap = cap_of_cone(ConeProfile.half_plane())
    p = ProblemParams(s=0.5, lam=10.0)
    mesh = build_mesh(12, 24, 0.5, cap)
    forms = assemble(mesh, p)
    with pytest.raises(DomainError):
        solve_eigs(forms, p, k=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        es = solve_eigs(forms, p, k=3, allow_inadmissible=True)
    assert es.k == 3


# ---------------------------------------------------------------------------
# 1-D separated oracle
# ---------------------------------------------------------------------------

def test_oracle_k0_constant_mode():
    p = ProblemParams(s=0.5, lam=0.0)
    mu = oracle_full_circle_1d(p, 0, 400)
    assert abs(mu[0]) < 5e-9


def test_oracle_k1_s_half():
    p = ProblemParams(s=0.5, lam=0.0)
    mu = oracle_full_circle_1d(p, 1, 800)
    assert mu[0] == pytest.approx(2.0, rel=1e-4)


def test_oracle_rejects_negative_index():
    with pytest.raises(DomainError):
        oracle_full_circle_1d(ProblemParams(s=0.5), -1, 100)


def test_oracle_family_containing_order_one_s_quarter():
    # for s = 1/4 the order gamma = 1 (mu = 1 (1 + 2 - 1/2) = 5/2) lives in
    # the azimuthal family k = 1 and nowhere near the k = 0 family, whose
    # first nonzero value is the gamma = 2 mode mu = 2 (2 + 3/2) = 7
    p = ProblemParams(s=0.25, lam=0.0)
    mu0 = oracle_full_circle_1d(p, 0, 800)
    mu1 = oracle_full_circle_1d(p, 1, 800)
    assert mu1[0] == pytest.approx(2.5, rel=1e-3)
    assert abs(mu0[0]) < 1e-9
    assert mu0[1] == pytest.approx(7.0, rel=1e-3)
    assert np.abs(mu0 - 2.5).min() > 0.5


def test_oracle_2d_cross_validation():
    # five smallest 2-D eigenvalues vs the union over k in {0,1,2} of the
    # 1-D families, within 0.5 percent.  The pair (s = 0.75, lam = 0.1)
    # exceeds the full-space Hardy constant (about 0.0592), so the
    # exploration override is used: the two discretizations of the same
    # pencil must still agree.
    cap = SphericalCap.full_circle()
    for s in (0.25, 0.5, 0.75):
        for lam in (0.0, 0.1):
            p = ProblemParams(s=s, lam=lam)
            mesh = build_mesh(96, 192, s, cap)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                es = solve_eigs(assemble(mesh, p), p, k=8,
                                allow_inadmissible=True)
            union = []
            for k_az in (0, 1, 2):
                fam = oracle_full_circle_1d(p, k_az, 1000)
                take = fam[:4]
                union.extend(take if k_az == 0
                             else np.repeat(take, 2))
            union = np.sort(union)[:5]
            two_d = es.mu[:5]
            rel = np.abs(two_d - union) / (1.0 + np.abs(union))
            assert rel.max() < 0.005, (s, lam, two_d, union)


# ---------------------------------------------------------------------------
# monotonicity structure
# ---------------------------------------------------------------------------

def test_domain_monotonicity_of_mu1():
    # nested caps (aligned with the mesh) never increase mu_1
    s = 0.5
    p = ProblemParams(s=s)
    ntheta = 48
    center = 1.5 * math.pi
    lengths = [2 * math.pi * frac for frac in (0.25, 0.375, 0.5, 0.75, 1.0)]
    mus = []
    for L in lengths:
        cap = SphericalCap.full_circle() if L >= 2 * math.pi - 1e-12 \
            else SphericalCap.centered(center, L)
        mesh = build_mesh(16, ntheta, s, cap)
        mus.append(solve_eigs(assemble(mesh, p), p, k=1).mu[0])
    assert np.all(np.diff(mus) <= 1e-12)


def test_lambda_monotonicity_of_mu1(half_forms):
    from conefrac.hardy import hardy_constant
    s = 0.5
    lam_star = hardy_constant(half_forms,
                              ProblemParams(s=s)).lambda_star
    mus = []
    for frac in (0.0, 0.25, 0.5, 0.75):
        p = ProblemParams(s=s, lam=frac * lam_star)
        mus.append(solve_eigs(half_forms, p, k=1).mu[0])
    assert np.all(np.diff(mus) < -1e-10)


def test_eigenvalue_convergence_under_refinement():
    # error of mu_2 against the closed form decreases across three levels
    exact = 2.0    # k = 1 anchor at s = 0.5
    errors = []
    for nt, ntheta in ((16, 32), (32, 64), (64, 128)):
        es, _ = _eigs(nt, ntheta, 0.5, SphericalCap.full_circle(), k=3)
        errors.append(abs(es.mu[1] - exact))
    assert errors[0] > errors[1] > errors[2]


# ---------------------------------------------------------------------------
# homogeneous profiles
# ---------------------------------------------------------------------------

def test_profile_on_unit_sphere(half_es):
    ev = homogeneous_profile(half_es, 1)
    mesh = half_es.mesh
    pos = mesh.node_positions()
    vals = ev(pos)
    np.testing.assert_allclose(vals, half_es.vectors[1],
                               rtol=1e-10, atol=1e-12)


def test_profile_homogeneity(half_es):
    ev = homogeneous_profile(half_es, 0)
    g = half_es.gamma[0]
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((50, 3))
    pts[:, 2] = np.abs(pts[:, 2])
    base = ev(pts)
    for tau in (0.5, 0.25):
        np.testing.assert_allclose(ev(tau * pts), tau ** g * base,
                                   rtol=1e-10, atol=1e-13)


def test_profile_constant_mode():
    es, _ = _eigs(12, 24, 0.5, SphericalCap.full_circle(), k=1)
    ev = homogeneous_profile(es, 0)
    pts = np.array([[0.3, 0.1, 0.2], [0.0, 0.0, 0.9], [0.5, -0.4, 0.1]])
    vals = ev(pts)
    assert np.ptp(vals) < 1e-10 * abs(vals[0])


def test_profile_index_validation(half_es):
    with pytest.raises(DomainError):
        homogeneous_profile(half_es, 99)
