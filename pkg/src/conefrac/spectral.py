"""Eigenpairs of the weighted spherical problem with mixed boundary
conditions, plus a separated 1-D oracle for the full-circle cap.

The generalized pencil is (K - lam kappa B, M) on the retained dofs.  Small
problems go through a dense symmetric-definite solve; larger ones use
shift-invert Lanczos with the shift parked just below the guaranteed
spectrum bottom -((N-2s)/2)^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import SphericalCap
from .errors import DomainError, NumericalError
from .params import ProblemParams, gamma_from_mu
from .sphercap import AssembledForms, HemisphereMesh, build_mesh, polar_cell_blocks

__all__ = [
    "EigenSystem",
    "solve_eigs",
    "oracle_full_circle_1d",
    "homogeneous_profile",
    "hemisphere_interpolate",
]

DENSE_CUTOFF = 3000
MULTIPLICITY_RTOL = 1e-6


# ---------------------------------------------------------------------------
# hemisphere interpolation (shared by profiles and fields)
# ---------------------------------------------------------------------------

def hemisphere_interpolate(mesh: HemisphereMesh, values: np.ndarray,
                           t, theta) -> np.ndarray:
    """Bilinear interpolation of a node function at polar height(s) t and
    azimuth(s) theta.  Beyond the last ring the value is extended constant in
    t (matching the pole-cell treatment of the assembly); theta wraps."""
    vals = np.asarray(values, dtype=float).reshape(mesh.nt, mesh.ntheta)
    t = np.asarray(t, dtype=float)
    theta = np.mod(np.asarray(theta, dtype=float), 2.0 * math.pi)
    t, theta = np.broadcast_arrays(t, theta)

    dtheta = 2.0 * math.pi / mesh.ntheta
    j0 = np.floor(theta / dtheta).astype(int) % mesh.ntheta
    j1 = (j0 + 1) % mesh.ntheta
    fj = theta / dtheta - np.floor(theta / dtheta)

    i0 = np.clip(np.searchsorted(mesh.t_nodes, t, side="right") - 1,
                 0, mesh.nt - 1)
    i1 = np.minimum(i0 + 1, mesh.nt - 1)
    width = mesh.t_nodes[i1] - mesh.t_nodes[i0]
    with np.errstate(invalid="ignore", divide="ignore"):
        fi = np.where(width > 0.0, (t - mesh.t_nodes[i0]) / width, 0.0)
    fi = np.clip(fi, 0.0, 1.0)

    v00 = vals[i0, j0]
    v01 = vals[i0, j1]
    v10 = vals[i1, j0]
    v11 = vals[i1, j1]
    return ((1 - fi) * ((1 - fj) * v00 + fj * v01)
            + fi * ((1 - fj) * v10 + fj * v11))


# ---------------------------------------------------------------------------
# eigen system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenSystem:
    """Ordered eigenpairs (mu_j, psi_j) of the weighted spherical pencil.

    Eigenvectors are stored on the full node set (zeros on Dirichlet nodes),
    M-orthonormal, with a deterministic sign.  ``group`` assigns a
    multiplicity-group id to every mode (eigenvalues within
    1e-6 (1 + |mu|) of each other share a group).
    """

    mu: np.ndarray
    vectors: np.ndarray          # (k, n_nodes)
    gamma: np.ndarray
    group: np.ndarray
    lam: float
    params: ProblemParams
    forms: AssembledForms
    _quad_cache: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return len(self.mu)

    @property
    def mesh(self) -> HemisphereMesh:
        return self.forms.mesh

    @property
    def cap(self) -> SphericalCap:
        return self.forms.mesh.cap

    def group_members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.group == self.group[j])

    def quad_forms(self):
        """Cross quadratic forms of the stored modes: (psi_i^T K psi_j,
        psi_i^T M psi_j, psi_i^T B psi_j).  Cached."""
        if "k0" not in self._quad_cache:
            V = self.vectors
            self._quad_cache["k0"] = V @ (self.forms.K @ V.T)
            self._quad_cache["m"] = V @ (self.forms.M @ V.T)
            self._quad_cache["b"] = V @ (self.forms.B @ V.T)
        return (self._quad_cache["k0"], self._quad_cache["m"],
                self._quad_cache["b"])

    def trace_values(self, j: int) -> np.ndarray:
        """Equator trace of mode j, one value per azimuthal node."""
        return self.vectors[j][self.mesh.equator_ids]


def _fix_signs(V: np.ndarray, M: sp.csr_matrix) -> np.ndarray:
    """Deterministic sign: weighted integral positive, falling back to the
    largest-magnitude nodal value when the integral nearly vanishes."""
    out = V.copy()
    ones = np.ones(V.shape[1])
    Mw = M @ ones
    for row in out:
        w = float(row @ Mw)
        if abs(w) > 1e-8:
            if w < 0.0:
                row *= -1.0
        else:
            lead = row[np.argmax(np.abs(row))]
            if lead < 0.0:
                row *= -1.0
    return out


def _m_orthonormalize(V: np.ndarray, M: sp.csr_matrix) -> np.ndarray:
    """Modified Gram-Schmidt in the M inner product (vectors are already
    near-orthonormal; this tightens them to ~1e-14)."""
    out = V.copy()
    for i in range(out.shape[0]):
        Mv = M @ out[i]
        for j in range(i):
            out[i] -= (out[j] @ Mv) * out[j]
            Mv = M @ out[i]
        nrm = math.sqrt(out[i] @ Mv)
        if nrm <= 0.0:
            raise NumericalError("eigenvector collapsed during cleanup")
        out[i] /= nrm
    return out


def solve_eigs(forms: AssembledForms, params: ProblemParams, k: int,
               allow_inadmissible: bool = False) -> EigenSystem:
    """k smallest eigenpairs of (K - lam kappa B, M) on the retained dofs.

    When lam > 0 the cap's Hardy constant is computed on the same forms and
    lam >= Lambda is rejected unless ``allow_inadmissible`` is set, in which
    case a warning is emitted (the spectrum may dip below the floor).
    """
    lam = params.lam
    if lam > 0.0:
        from .hardy import hardy_constant
        lam_star = hardy_constant(forms, params).lambda_star
        if lam >= lam_star:
            if not allow_inadmissible:
                raise DomainError(
                    f"lam = {lam} is not admissible: the cap's Hardy "
                    f"constant on this mesh is {lam_star:.6g}")
            warnings.warn(
                f"lam = {lam} >= Lambda = {lam_star:.6g}: eigenvalues may "
                "fall below the spectrum floor", RuntimeWarning)

    Kr, Mr = forms.pencil(lam, params.kappa)
    n = Kr.shape[0]
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= {n}, got {k}")

    if n <= DENSE_CUTOFF:
        w, V = sla.eigh(Kr.toarray(), Mr.toarray(),
                        subset_by_index=[0, k - 1])
        V = V.T
    else:
        w, V = _sparse_smallest(Kr, Mr, k, params)
        V = V.T

    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[order]
    V = _m_orthonormalize(V, Mr)
    V = _fix_signs(V, Mr)

    full = np.zeros((k, forms.mesh.n_nodes))
    full[:, forms.mesh.free_nodes] = V

    floor = params.spectrum_floor
    gamma = np.empty(k)
    for i, mu in enumerate(w):
        if mu < floor - 1e-6 * (1.0 + abs(mu)):
            gamma[i] = math.nan
        else:
            gamma[i] = gamma_from_mu(max(mu, floor), params)

    group = np.zeros(k, dtype=int)
    gid = 0
    for i in range(1, k):
        if abs(w[i] - w[i - 1]) > MULTIPLICITY_RTOL * (1.0 + abs(w[i])):
            gid += 1
        group[i] = gid

    return EigenSystem(mu=w, vectors=full, gamma=gamma, group=group,
                       lam=lam, params=params, forms=forms)


def _sparse_smallest(Kr, Mr, k, params):
    """Shift-invert Lanczos with the shift just below the spectrum floor,
    retried with a lower shift if eigenvalues show up beneath it."""
    n = Kr.shape[0]
    c2 = -params.spectrum_floor
    sigma = -1.01 * c2 - 0.05 * (1.0 + c2)
    v0 = np.ones(n) + 0.01 * np.sin(np.arange(n))
    Kc, Mc = Kr.tocsc(), Mr.tocsc()
    last_exc = None
    for _ in range(4):
        try:
            w, V = spla.eigsh(Kc, k=k, M=Mc, sigma=sigma, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(
                f"eigensolver failed to converge: {exc}") from exc
        except RuntimeError as exc:
            # factorization of (K - sigma M) hit a singular pivot: sigma is
            # an eigenvalue or the problem dipped below it; lower and retry
            last_exc = exc
            sigma = 2.0 * sigma - 1.0
            continue
        if w.min() > sigma + 1e-12 * (1.0 + abs(sigma)):
            return w, V
        sigma = float(w.min()) - 1.0
    if last_exc is not None:
        raise NumericalError(f"eigensolver shift selection failed: {last_exc}")
    return w, V


# ---------------------------------------------------------------------------
# separated 1-D oracle for the full circle
# ---------------------------------------------------------------------------

def oracle_full_circle_1d(params: ProblemParams, azimuthal_index: int,
                          n_t: int, grading: float = 2.0) -> np.ndarray:
    """Eigenvalues of the 1-D weighted Sturm-Liouville family obtained by
    separating variables on the full circle.

    For azimuthal index k the radial profile f solves

        -((sin t)^(1-2s) cos t f')' + k^2 (sin t)^(1-2s) (cos t)^(-1) f
            = mu (sin t)^(1-2s) cos t f   on (0, pi/2),

    with the flux condition -lim_{t->0} (sin t)^(1-2s) f'(t)
    = kappa_s lam f(0) at the equator and nothing imposed at the pole.
    Discretized with the same per-cell weighted integrals as the 2-D
    assembly, solved densely.  Returns all discrete eigenvalues, sorted.
    """
    if azimuthal_index < 0:
        raise DomainError("azimuthal index must be >= 0")
    if n_t < 4:
        raise DomainError("need n_t >= 4")
    if params.N != 2:
        raise DomainError("the separated oracle is for N = 2")

    i = np.arange(n_t, dtype=float)
    t_nodes = 0.5 * math.pi * (i / n_t) ** grading
    W0, W1, W2, (w0_pole, w2_pole) = polar_cell_blocks(t_nodes, params.s)

    K = np.zeros((n_t, n_t))
    M = np.zeros((n_t, n_t))
    ksq = float(azimuthal_index) ** 2
    for c in range(n_t - 1):
        sl = slice(c, c + 2)
        K[sl, sl] += W1[c] + ksq * W2[c]
        M[sl, sl] += W0[c]
    K[-1, -1] += ksq * w2_pole
    M[-1, -1] += w0_pole
    K[0, 0] -= params.kappa * params.lam

    w = sla.eigh(K, M, eigvals_only=True)
    return np.sort(w)


# ---------------------------------------------------------------------------
# homogeneous profiles
# ---------------------------------------------------------------------------

def homogeneous_profile(es: EigenSystem, j: int):
    """Evaluator of the homogeneous field |z|^gamma_j psi_j(z/|z|) on the
    upper half-space, using bilinear interpolation of psi_j on the mesh and
    the exact radial power.  Accepts points of shape (..., 3)."""
    if not 0 <= j < es.k:
        raise DomainError(f"mode index {j} out of range (k = {es.k})")
    gamma = float(es.gamma[j])
    values = es.vectors[j]
    mesh = es.mesh

    def evaluate(points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=-1)
        out = np.zeros(r.shape)
        ok = r > 0.0
        tpol = np.zeros_like(r)
        theta = np.zeros_like(r)
        with np.errstate(invalid="ignore"):
            tpol[ok] = np.arcsin(np.clip(pts[ok, 2] / r[ok], -1.0, 1.0))
            theta[ok] = np.arctan2(pts[ok, 1], pts[ok, 0])
        psi = hemisphere_interpolate(mesh, values, tpol, theta)
        out[ok] = r[ok] ** gamma * psi[ok]
        if gamma == 0.0:
            out[~ok] = psi[~ok]
        return float(out[0]) if single else out

    return evaluate
