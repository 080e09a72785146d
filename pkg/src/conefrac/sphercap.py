"""Weighted finite elements on the upper half-sphere (N = 2).

The hemisphere is parametrized by polar height t in [0, pi/2) and azimuth
theta in [0, 2 pi), with surface element cos t dt dtheta and degenerate
weight (sin t)^(1-2s).  Bilinear elements on the tensor grid give symmetric
stiffness/mass/boundary forms; all metric and weight factors are folded into
per-cell 1-D integrals computed either in closed form (substitution
u = sin t) or by Gauss/Gauss-Jacobi quadrature so the degenerate factor at
the equator is integrated to near machine precision.

The polar axis t = pi/2 carries no node: the last cell extends the ring
values as constants in t and is integrated one-sidedly, which imposes
nothing there (natural condition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .cones import SphericalCap
from .errors import DomainError, GeometryError, NumericalError
from .params import ProblemParams

__all__ = [
    "HemisphereMesh",
    "AssembledForms",
    "build_mesh",
    "assemble",
    "weighted_surface_integral",
    "boundary_integral",
]

_GAUSS_PTS = 12
_POLE_GAUSS_PTS = 16


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HemisphereMesh:
    """Tensor grid on the hemisphere with equator classification.

    Nodes are indexed by ``i * ntheta + j`` with ``i`` the polar row
    (``i = 0`` on the equator) and ``j`` the azimuthal column.  Row ``nt - 1``
    is the last ring before the pole; the pole itself is covered by the
    one-sided pole cell.
    """

    nt: int
    ntheta: int
    s: float
    grading: float
    cap: SphericalCap
    t_nodes: np.ndarray
    theta_nodes: np.ndarray
    robin_mask: np.ndarray       # (ntheta,) equator nodes inside the cap
    free_nodes: np.ndarray       # retained dof -> node id
    dof_of_node: np.ndarray      # node id -> retained dof or -1

    @property
    def n_nodes(self) -> int:
        return self.nt * self.ntheta

    @property
    def n_free(self) -> int:
        return len(self.free_nodes)

    def node_id(self, i, j):
        return i * self.ntheta + j

    @property
    def equator_ids(self) -> np.ndarray:
        return np.arange(self.ntheta)

    @property
    def robin_ids(self) -> np.ndarray:
        return np.flatnonzero(self.robin_mask)

    @property
    def dirichlet_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.robin_mask)

    def node_positions(self) -> np.ndarray:
        """Cartesian coordinates of mesh nodes on the unit hemisphere."""
        t = self.t_nodes[:, None]
        th = self.theta_nodes[None, :]
        x = np.cos(t) * np.cos(th)
        y = np.cos(t) * np.sin(th)
        z = np.sin(t) * np.ones_like(th)
        return np.stack([x, y, z], axis=-1).reshape(-1, 3)

    def grid(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.nt, self.ntheta)


def build_mesh(n_t: int, n_theta: int, s: float, cap: SphericalCap,
               grading: float = 2.0) -> HemisphereMesh:
    """Graded tensor mesh; refinement accumulates at the equator t = 0.

    Polar rows sit at t_i = (pi/2) (i / n_t)^grading for i = 0 .. n_t - 1,
    so no node lands on the pole.  Equator nodes are classified against the
    cap with the half-open convention [a, b).
    """
    if n_t < 4 or n_theta < 4:
        raise DomainError("need n_t >= 4 and n_theta >= 4")
    if grading < 1.0:
        raise DomainError(f"grading must be >= 1, got {grading}")
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    if cap.length <= 0.0:
        raise GeometryError("cap arc has zero length")

    i = np.arange(n_t, dtype=float)
    t_nodes = 0.5 * math.pi * (i / n_t) ** grading
    theta_nodes = 2.0 * math.pi * np.arange(n_theta) / n_theta
    robin_mask = np.asarray(cap.contains(theta_nodes), dtype=bool)

    dirichlet = np.zeros(n_t * n_theta, dtype=bool)
    dirichlet[:n_theta] = ~robin_mask
    free_nodes = np.flatnonzero(~dirichlet)
    dof_of_node = np.full(n_t * n_theta, -1, dtype=np.int64)
    dof_of_node[free_nodes] = np.arange(len(free_nodes))

    return HemisphereMesh(nt=n_t, ntheta=n_theta, s=s, grading=grading,
                          cap=cap, t_nodes=t_nodes, theta_nodes=theta_nodes,
                          robin_mask=robin_mask, free_nodes=free_nodes,
                          dof_of_node=dof_of_node)


# ---------------------------------------------------------------------------
# per-cell weight integrals
# ---------------------------------------------------------------------------

def _hat_pair(t0, t1, t):
    dt = t1 - t0
    return (t1 - t) / dt, (t - t0) / dt


def polar_cell_blocks(t_nodes: np.ndarray, s: float):
    """1-D polar integrals per cell.

    Returns (W0, W1, W2, pole) where for each interior cell
      W0[c] = int N_a N_b (sin t)^(1-2s) cos t dt          (2 x 2)
      W1[c] = int N_a' N_b' (sin t)^(1-2s) cos t dt        (2 x 2, closed form)
      W2[c] = int N_a N_b (sin t)^(1-2s) / cos t dt        (2 x 2)
    and pole = (w0_pole, w2_pole) are the one-sided scalars of the last cell
    with constant-in-t extension of the last ring.
    """
    beta = 1.0 - 2.0 * s
    pow_exp = 2.0 - 2.0 * s
    nt = len(t_nodes)
    ncell = nt - 1
    W0 = np.zeros((ncell, 2, 2))
    W1 = np.zeros((ncell, 2, 2))
    W2 = np.zeros((ncell, 2, 2))

    xg, wg = np.polynomial.legendre.leggauss(_GAUSS_PTS)
    xj, wj = roots_jacobi(_GAUSS_PTS, 0.0, beta)

    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for c in range(ncell):
        t0, t1 = t_nodes[c], t_nodes[c + 1]
        u0, u1 = math.sin(t0), math.sin(t1)
        dt = t1 - t0
        # t-stiffness weight: exact power integral of u^(1-2s)
        W1[c] = sign * (u1 ** pow_exp - u0 ** pow_exp) / (pow_exp * dt * dt)
        if c == 0:
            # equator cell: Gauss-Jacobi in u = sin t absorbs u^(1-2s)
            u = 0.5 * u1 * (xj + 1.0)
            t = np.arcsin(u)
            na, nb = _hat_pair(t0, t1, t)
            scale = (0.5 * u1) ** (beta + 1.0)
            hats = (na, nb)
            for a in range(2):
                for b in range(2):
                    W0[c, a, b] = scale * np.sum(wj * hats[a] * hats[b])
                    W2[c, a, b] = scale * np.sum(
                        wj * hats[a] * hats[b] / (1.0 - u * u))
        else:
            t = t0 + 0.5 * dt * (xg + 1.0)
            w = 0.5 * dt * wg
            na, nb = _hat_pair(t0, t1, t)
            weight = np.sin(t) ** beta
            hats = (na, nb)
            for a in range(2):
                for b in range(2):
                    W0[c, a, b] = np.sum(
                        w * hats[a] * hats[b] * weight * np.cos(t))
                    W2[c, a, b] = np.sum(
                        w * hats[a] * hats[b] * weight / np.cos(t))

    # pole cell [t_{nt-1}, pi/2]: mass in closed form, azimuthal weight by
    # one-sided Gauss (finite because the points stay interior)
    t_last = t_nodes[-1]
    u_last = math.sin(t_last)
    w0_pole = (1.0 - u_last ** pow_exp) / pow_exp
    xg2, wg2 = np.polynomial.legendre.leggauss(_POLE_GAUSS_PTS)
    tp = t_last + 0.5 * (0.5 * math.pi - t_last) * (xg2 + 1.0)
    wp = 0.5 * (0.5 * math.pi - t_last) * wg2
    w2_pole = float(np.sum(wp * np.sin(tp) ** beta / np.cos(tp)))
    return W0, W1, W2, (w0_pole, w2_pole)


# ---------------------------------------------------------------------------
# assembled forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssembledForms:
    """Symmetric forms of the weighted spherical problem on the full node set.

    K  : stiffness (no Robin term), positive semi-definite
    M  : weighted mass, positive definite
    B  : equator boundary mass supported on cap dofs
    """

    mesh: HemisphereMesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix

    def reduced(self, mat: sp.csr_matrix) -> sp.csr_matrix:
        f = self.mesh.free_nodes
        return mat[f][:, f].tocsr()

    def pencil(self, lam: float, kappa: float):
        """Reduced (K - lam kappa B, M) pair for the eigenproblem."""
        A = self.K - (lam * kappa) * self.B
        return self.reduced(A), self.reduced(self.M)

    def extend(self, reduced_vec: np.ndarray) -> np.ndarray:
        """Zero-pad a reduced dof vector back to the full node set."""
        out = np.zeros(self.mesh.n_nodes)
        out[self.mesh.free_nodes] = reduced_vec
        return out


def _theta_blocks(ntheta: int):
    dtheta = 2.0 * math.pi / ntheta
    mass = dtheta / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    stiff = (1.0 / dtheta) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return mass, stiff


def assemble(mesh: HemisphereMesh, params: ProblemParams) -> AssembledForms:
    """Assemble stiffness, weighted mass and equator boundary mass.

    The tensor structure keeps assembly cheap: each polar cell contributes
    (polar block) x (azimuthal block) to every azimuthal cell at once.
    """
    if abs(params.s - mesh.s) > 1e-14:
        raise DomainError("mesh was built for a different s")
    nt, ntheta = mesh.nt, mesh.ntheta
    n = mesh.n_nodes
    W0, W1, W2, (w0_pole, w2_pole) = polar_cell_blocks(mesh.t_nodes, params.s)
    Mth, Kth = _theta_blocks(ntheta)

    j = np.arange(ntheta)
    jn = (j + 1) % ntheta

    rows, cols, kvals, mvals = [], [], [], []

    def add_tensor(i_lo, tmat_k, tmat_m):
        # tmat_*: 2x2 polar blocks paired with azimuthal 2x2 blocks
        node = [[mesh.node_id(i_lo + a, col) for col in (j, jn)]
                for a in range(2)]
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        rows.append(node[a][c])
                        cols.append(node[b][d])
                        kvals.append(np.full(ntheta, tmat_k[0][a, b] * Mth[c, d]
                                             + tmat_k[1][a, b] * Kth[c, d]))
                        mvals.append(np.full(ntheta, tmat_m[a, b] * Mth[c, d]))

    for cell in range(nt - 1):
        add_tensor(cell, (W1[cell], W2[cell]), W0[cell])

    # pole cell: last ring only, constant-in-t extension
    ring = mesh.node_id(nt - 1, j)
    ring_n = mesh.node_id(nt - 1, jn)
    pole_scalar_k = np.array([[w2_pole]])
    pole_scalar_m = np.array([[w0_pole]])
    for c, rid in enumerate((ring, ring_n)):
        for d, cid in enumerate((ring, ring_n)):
            rows.append(rid)
            cols.append(cid)
            kvals.append(np.full(ntheta, pole_scalar_k[0, 0] * Kth[c, d]))
            mvals.append(np.full(ntheta, pole_scalar_m[0, 0] * Mth[c, d]))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    K = sp.coo_matrix((np.concatenate(kvals), (rows, cols)),
                      shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate(mvals), (rows, cols)),
                      shape=(n, n)).tocsr()

    if np.any(M.diagonal() <= 0.0):
        raise NumericalError("degenerate cell produced a singular mass")

    # equator boundary mass over azimuthal segments whose midpoint is inside
    # the cap arc
    mid = mesh.theta_nodes + math.pi / ntheta
    seg_in = np.asarray(mesh.cap.contains(mid), dtype=bool)
    segs = np.flatnonzero(seg_in)
    brows, bcols, bvals = [], [], []
    for c in range(2):
        for d in range(2):
            a = (segs + c) % ntheta
            b = (segs + d) % ntheta
            brows.append(a)
            bcols.append(b)
            bvals.append(np.full(len(segs), Mth[c, d]))
    B = sp.coo_matrix((np.concatenate(bvals),
                       (np.concatenate(brows), np.concatenate(bcols))),
                      shape=(n, n)).tocsr()

    return AssembledForms(mesh=mesh, K=K, M=M, B=B)


def weighted_surface_integral(forms: AssembledForms, f, g=None) -> float:
    """Quadrature of f (or f g) against the hemisphere weight, consistent
    with the assembled mass: returns f^T M g (g = 1 when omitted)."""
    f = np.asarray(f, dtype=float).ravel()
    if f.shape != (forms.mesh.n_nodes,):
        raise DomainError("grid function has the wrong length")
    if g is None:
        g = np.ones(forms.mesh.n_nodes)
    else:
        g = np.asarray(g, dtype=float).ravel()
        if g.shape != (forms.mesh.n_nodes,):
            raise DomainError("grid function has the wrong length")
    return float(f @ (forms.M @ g))


def boundary_integral(forms: AssembledForms, f, g=None) -> float:
    """Quadrature of f (or f g) over the cap arc, consistent with the
    boundary mass: f^T B g (g = 1 when omitted)."""
    f = np.asarray(f, dtype=float).ravel()
    if f.shape != (forms.mesh.n_nodes,):
        raise DomainError("grid function has the wrong length")
    if g is None:
        g = np.ones(forms.mesh.n_nodes)
    else:
        g = np.asarray(g, dtype=float).ravel()
        if g.shape != (forms.mesh.n_nodes,):
            raise DomainError("grid function has the wrong length")
    return float(f @ (forms.B @ g))
