"""Coarse solver for the localized extension problem on the 3-D half-ball
(N = 2) and the scalar-field containers the frequency analyzer consumes.

Spherical coordinates (r, t, theta) make every radial integral of the
Almgren machinery a closed form or a 1-D quadrature: the grid is the tensor
product of geometrically graded shells with the hemisphere mesh.  The
assembled operator is

    kron(S_r, M_h) + kron(M_r, K_h) - kappa_s * (trace terms on the equator),

whose Kronecker part is inverted exactly by fast diagonalization in the
radial direction; that exact inverse preconditions a conjugate-gradient
solve of the full operator.

Fields come in two flavours: ``ManufacturedField`` (exact superpositions of
homogeneous eigenprofiles, used as oracles) and ``GridField`` (solver
output, radially interpolated with 4-point stencils on the uniform-in-log
shell grid).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import SphericalCap
from .errors import DomainError, NumericalError
from .expressions import Expression
from .params import ProblemParams
from .spectral import EigenSystem, hemisphere_interpolate, solve_eigs
from .sphercap import AssembledForms, HemisphereMesh, assemble

__all__ = [
    "HalfBallGrid",
    "build_halfball_grid",
    "ScalarField",
    "ManufacturedField",
    "GridField",
    "manufactured_field",
    "solve_extension",
    "save_field",
    "load_field",
]


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfBallGrid:
    """Geometric shells times a hemisphere mesh; no node at r = 0."""

    r_nodes: np.ndarray          # (n_r + 1,) from r_min to 1, constant ratio
    mesh: HemisphereMesh

    @property
    def n_surfaces(self) -> int:
        return len(self.r_nodes)

    @property
    def r_min(self) -> float:
        return float(self.r_nodes[0])

    @property
    def x_nodes(self) -> np.ndarray:
        return np.log(self.r_nodes)

    @property
    def n_nodes(self) -> int:
        return self.n_surfaces * self.mesh.n_nodes


def build_halfball_grid(n_r: int, r_min: float,
                        mesh: HemisphereMesh) -> HalfBallGrid:
    if n_r < 4:
        raise DomainError("need at least 4 radial shells")
    if not 0.0 < r_min < 1.0:
        raise DomainError(f"r_min must lie in (0, 1), got {r_min}")
    r = r_min ** (1.0 - np.arange(n_r + 1) / n_r)
    return HalfBallGrid(r_nodes=r, mesh=mesh)


# ---------------------------------------------------------------------------
# radial 1-D matrices (closed-form power integrals)
# ---------------------------------------------------------------------------

def _power_primitive(a, b, w):
    return (b ** (w + 1.0) - a ** (w + 1.0)) / (w + 1.0)


def radial_mass(r_nodes: np.ndarray, weight_exp: float) -> sp.csr_matrix:
    """int r^w N_i N_j dr assembled over the shells, exact (power rule)."""
    n = len(r_nodes)
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    for c in range(n - 1):
        a, b = r_nodes[c], r_nodes[c + 1]
        d = b - a
        p0 = _power_primitive(a, b, weight_exp)
        p1 = _power_primitive(a, b, weight_exp + 1.0)
        p2 = _power_primitive(a, b, weight_exp + 2.0)
        m00 = (b * b * p0 - 2.0 * b * p1 + p2) / (d * d)
        m01 = (-a * b * p0 + (a + b) * p1 - p2) / (d * d)
        m11 = (a * a * p0 - 2.0 * a * p1 + p2) / (d * d)
        diag[c] += m00
        diag[c + 1] += m11
        off[c] += m01
    return sp.diags([off, diag, off], [-1, 0, 1]).tocsr()


def radial_stiffness(r_nodes: np.ndarray, weight_exp: float) -> sp.csr_matrix:
    """int r^w N_i' N_j' dr, exact."""
    n = len(r_nodes)
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    for c in range(n - 1):
        a, b = r_nodes[c], r_nodes[c + 1]
        d = b - a
        p0 = _power_primitive(a, b, weight_exp)
        diag[c] += p0 / (d * d)
        diag[c + 1] += p0 / (d * d)
        off[c] -= p0 / (d * d)
    return sp.diags([off, diag, off], [-1, 0, 1]).tocsr()


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Common surface for fields on the half-ball.

    Subclasses provide values and radial derivatives sampled on spheres
    (parametrized by the hemisphere mesh) and the equator trace.
    """

    mesh: HemisphereMesh

    def sphere_values(self, r: float) -> np.ndarray:
        raise NotImplementedError

    def sphere_radial_derivative(self, r: float) -> np.ndarray:
        raise NotImplementedError

    def trace_values(self, rho: float) -> np.ndarray:
        return self.sphere_values(rho)[self.mesh.equator_ids]

    @property
    def is_analytic(self) -> bool:
        return False


@dataclass(frozen=True)
class ManufacturedField(ScalarField):
    """Exact superposition sum_j beta_j |z|^gamma_j psi_j(z/|z|).

    An exact solution of the h = 0 problem at the eigen system's lambda; all
    frequency-analyzer integrals against it reduce to closed forms in r.
    """

    es: EigenSystem
    modes: tuple[int, ...]
    betas: np.ndarray

    def __post_init__(self):
        if len(self.modes) == 0:
            raise DomainError("empty coefficient list")
        for j in self.modes:
            if not 0 <= j < self.es.k:
                raise DomainError(f"mode index {j} out of range")

    @property
    def mesh(self) -> HemisphereMesh:
        return self.es.mesh

    @property
    def gammas(self) -> np.ndarray:
        return self.es.gamma[list(self.modes)]

    @property
    def psi_matrix(self) -> np.ndarray:
        return self.es.vectors[list(self.modes)]

    @property
    def is_analytic(self) -> bool:
        return True

    def sphere_values(self, r: float) -> np.ndarray:
        coef = self.betas * r ** self.gammas
        return coef @ self.psi_matrix

    def sphere_radial_derivative(self, r: float) -> np.ndarray:
        coef = self.betas * self.gammas * r ** (self.gammas - 1.0)
        return coef @ self.psi_matrix

    def evaluate(self, points) -> np.ndarray:
        """Pointwise values at (..., 3) upper half-space points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=-1)
        ok = r > 0.0
        tpol = np.zeros_like(r)
        theta = np.zeros_like(r)
        tpol[ok] = np.arcsin(np.clip(pts[ok, 2] / r[ok], -1.0, 1.0))
        theta[ok] = np.arctan2(pts[ok, 1], pts[ok, 0])
        out = np.zeros_like(r)
        for j, beta, gamma in zip(self.modes, self.betas, self.gammas):
            psi = hemisphere_interpolate(self.mesh, self.es.vectors[j],
                                         tpol, theta)
            contrib = np.zeros_like(r)
            contrib[ok] = beta * r[ok] ** gamma * psi[ok]
            if gamma == 0.0:
                contrib[~ok] = beta * psi[~ok]
            out += contrib
        return out if np.asarray(points).ndim > 1 else float(out[0])


def manufactured_field(es: EigenSystem, coefficients) -> ManufacturedField:
    """Build the exact superposed solution from (mode, amplitude) pairs."""
    coefficients = list(coefficients)
    if not coefficients:
        raise DomainError("empty coefficient list")
    modes = tuple(int(j) for j, _ in coefficients)
    betas = np.array([float(b) for _, b in coefficients])
    return ManufacturedField(es=es, modes=modes, betas=betas)


_FD4_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


class GridField(ScalarField):
    """Solver output on a HalfBallGrid.

    Radial interpolation is 4-point Lagrange on the uniform log-radius grid;
    radial derivatives use fourth-order central stencils at the shells.
    Below the innermost shell the field continues as the local power
    r^gamma_loc fitted to the boundary-mass slope there.
    """

    def __init__(self, grid: HalfBallGrid, values: np.ndarray,
                 params: ProblemParams, cap: SphericalCap,
                 h: Expression | None = None, meta: dict | None = None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_surfaces, grid.mesh.n_nodes):
            raise DomainError("values have the wrong shape for the grid")
        self.grid = grid
        self.values = values
        self.params = params
        self.cap = cap
        self.h = h
        self.meta = dict(meta or {})
        self._dvdx = None
        self._gamma_loc = None

    @property
    def mesh(self) -> HemisphereMesh:
        return self.grid.mesh

    def _radial_slopes(self) -> np.ndarray:
        if self._dvdx is None:
            v = self.values
            n = v.shape[0]
            dx = self.grid.x_nodes[1] - self.grid.x_nodes[0]
            d = np.zeros_like(v)
            if n >= 5:
                for k in range(2, n - 2):
                    d[k] = (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1]
                            - v[k + 2]) / (12.0 * dx)
                # one-sided fourth order at the edges
                c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
                d[0] = sum(ci * v[i] for i, ci in enumerate(c)) / dx
                d[1] = sum(ci * v[1 + i] for i, ci in enumerate(c)) / dx
                d[-1] = -sum(ci * v[-1 - i] for i, ci in enumerate(c)) / dx
                d[-2] = -sum(ci * v[-2 - i] for i, ci in enumerate(c)) / dx
            else:
                d[:] = np.gradient(v, dx, axis=0)
            self._dvdx = d
        return self._dvdx

    def local_power(self) -> float:
        """Homogeneity exponent near the inner shell, from the boundary-mass
        slope; used to continue the field below r_min."""
        if self._gamma_loc is None:
            # plain node sums are enough for a slope estimate
            v0 = self.values[0]
            v2 = self.values[2]
            h0 = float(v0 @ v0) + 1e-300
            h2 = float(v2 @ v2) + 1e-300
            dx = self.grid.x_nodes[2] - self.grid.x_nodes[0]
            self._gamma_loc = 0.5 * (math.log(h2) - math.log(h0)) / dx
        return self._gamma_loc

    def _lagrange_weights(self, x: float):
        xs = self.grid.x_nodes
        n = len(xs)
        i = int(np.searchsorted(xs, x, side="right") - 1)
        lo = min(max(i - 1, 0), n - 4)
        stencil = np.arange(lo, lo + 4)
        w = np.ones(4)
        for a in range(4):
            for b in range(4):
                if a != b:
                    w[a] *= (x - xs[stencil[b]]) / (xs[stencil[a]]
                                                    - xs[stencil[b]])
        return stencil, w

    def sphere_values(self, r: float) -> np.ndarray:
        if r <= 0.0:
            raise DomainError("radius must be positive")
        if r < self.grid.r_min:
            g = self.local_power()
            return self.values[0] * (r / self.grid.r_min) ** g
        if r > self.grid.r_nodes[-1] * (1.0 + 1e-12):
            raise DomainError(f"radius {r} beyond the grid")
        stencil, w = self._lagrange_weights(math.log(r))
        return w @ self.values[stencil]

    def sphere_radial_derivative(self, r: float) -> np.ndarray:
        if r < self.grid.r_min:
            g = self.local_power()
            return self.values[0] * (g / r) * (r / self.grid.r_min) ** g
        stencil, w = self._lagrange_weights(math.log(r))
        return (w @ self._radial_slopes()[stencil]) / r


# ---------------------------------------------------------------------------
# the solver
# ---------------------------------------------------------------------------

def _trace_h_matrix(grid: HalfBallGrid, h: Expression,
                    theta_segments: np.ndarray) -> sp.csr_matrix:
    """Equator integral int h(x) Tr U Tr V dx over the cap segments, 4x4
    Gauss per equatorial cell; entries on the full 3-D node set."""
    mesh = grid.mesh
    n_h = mesh.n_nodes
    nseg = len(theta_segments)
    if nseg == 0:
        return sp.csr_matrix((grid.n_nodes, grid.n_nodes))
    xg, wg = np.polynomial.legendre.leggauss(4)
    dtheta = 2.0 * math.pi / mesh.ntheta
    th0 = mesh.theta_nodes[theta_segments]
    thq = th0[:, None] + 0.5 * dtheta * (xg[None, :] + 1.0)   # (nseg, 4)
    wth = 0.5 * dtheta * wg
    Nt = np.stack([(th0[:, None] + dtheta - thq) / dtheta,
                   (thq - th0[:, None]) / dtheta])            # (2, nseg, 4)

    r_nodes = grid.r_nodes
    ncell = len(r_nodes) - 1
    a = r_nodes[:-1]
    b = r_nodes[1:]
    rq = a[:, None] + 0.5 * (b - a)[:, None] * (xg[None, :] + 1.0)
    wr = 0.5 * (b - a)[:, None] * wg[None, :]                 # (ncell, 4)
    Nr = np.stack([(b[:, None] - rq) / (b - a)[:, None],
                   (rq - a[:, None]) / (b - a)[:, None]])     # (2, ncell, 4)

    x1 = rq[:, :, None, None] * np.cos(thq[None, None, :, :])
    x2 = rq[:, :, None, None] * np.sin(thq[None, None, :, :])
    hv = h.eval({"x1": x1, "x2": x2}) * np.ones_like(x1)
    # weight: h * r * wr * wtheta, laid out (ncell, qr, nseg, qth)
    W = hv * (rq * wr)[:, :, None, None] * wth[None, None, None, :]

    rows, cols, vals = [], [], []
    jseg = theta_segments
    jnext = (theta_segments + 1) % mesh.ntheta
    theta_ids = (jseg, jnext)
    for ar in range(2):
        for br in range(2):
            G = np.einsum("cp,cp,cpsq->csq", Nr[ar], Nr[br], W)
            for at in range(2):
                for bt in range(2):
                    v = np.einsum("sq,sq,csq->cs",
                                  Nt[at], Nt[bt], G)
                    shells_lo = np.arange(ncell)
                    gi = ((shells_lo + ar)[:, None] * n_h
                          + theta_ids[at][None, :])
                    gj = ((shells_lo + br)[:, None] * n_h
                          + theta_ids[bt][None, :])
                    rows.append(gi.ravel())
                    cols.append(gj.ravel())
                    vals.append(v.ravel())
    n = grid.n_nodes
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


class _FastDiagPreconditioner:
    """Exact inverse of kron(S_r, M_h) + kron(M_r, K_h) on the free dofs via
    a generalized radial eigendecomposition; SPD by construction."""

    def __init__(self, Sr, Mr, Kh, Mh):
        lam, W = sla.eigh(Sr.toarray(), Mr.toarray())
        self.W = W
        self.lus = [spla.splu((Kh + lam_i * Mh).tocsc()) for lam_i in lam]
        self.n_h = Kh.shape[0]
        self.m = len(lam)

    def apply(self, x: np.ndarray) -> np.ndarray:
        X = x.reshape(self.m, self.n_h)
        Y = self.W.T @ X
        for i, lu in enumerate(self.lus):
            Y[i] = lu.solve(Y[i])
        return (self.W @ Y).ravel()


def solve_extension(grid: HalfBallGrid, params: ProblemParams,
                    cap: SphericalCap, h: Expression | None,
                    lid_data: np.ndarray, es: EigenSystem | None = None,
                    cg_tol: float = 1e-10, maxiter: int = 20000) -> GridField:
    """Discrete weak solution of the localized extension problem.

    Dirichlet data: ``lid_data`` on the unit sphere (full hemisphere node
    vector; its values on Dirichlet equator nodes are forced to zero) and
    zero trace outside the cap on every shell.  The inner sphere r = r_min
    carries the scaled trace of the dominant homogeneous mode of the lid
    data when h is absent, else a natural (zero-flux) condition; frequency
    analysis of the output should then stay above ~10 r_min.

    The admissibility lam < Lambda(cap) is enforced through the eigen system
    used for the modal bookkeeping (computed on the same mesh when not
    supplied).
    """
    mesh = grid.mesh
    if abs(mesh.s - params.s) > 1e-14:
        raise DomainError("grid mesh was built for a different s")
    lid = np.asarray(lid_data, dtype=float).copy()
    if lid.shape != (mesh.n_nodes,):
        raise DomainError("lid data must be a full hemisphere node vector")
    lid[mesh.dirichlet_ids] = 0.0

    forms = assemble(mesh, params)
    h_is_zero = h is None or (isinstance(h, Expression) and h.is_zero())
    if es is None:
        es = solve_eigs(forms, params, k=min(10, mesh.n_free - 1))

    n_h = mesh.n_nodes
    n_surf = grid.n_surfaces
    n = grid.n_nodes
    s = params.s

    Sr = radial_stiffness(grid.r_nodes, 3.0 - 2.0 * s)
    Mr = radial_mass(grid.r_nodes, 1.0 - 2.0 * s)
    A = sp.kron(Sr, forms.M, format="csr") + sp.kron(Mr, forms.K,
                                                     format="csr")

    # equator trace terms: lambda part is radially exact, h part by Gauss
    trace = (params.lam * params.kappa) * sp.kron(Mr, forms.B, format="csr")
    dtheta_mid = mesh.theta_nodes + math.pi / mesh.ntheta
    segs = np.flatnonzero(np.asarray(cap.contains(dtheta_mid), dtype=bool))
    if not h_is_zero:
        trace = trace + params.kappa * _trace_h_matrix(grid, h, segs)
    A = (A - trace).tocsr()

    # Dirichlet bookkeeping (tensor structure: whole shells x hemi dofs)
    shell_dirichlet = np.zeros(n_surf, dtype=bool)
    shell_dirichlet[-1] = True
    inner_mode = None
    if h_is_zero:
        shell_dirichlet[0] = True
        coeffs = es.vectors @ (forms.M @ lid)
        weights = np.abs(coeffs) * grid.r_min ** es.gamma
        j0 = int(np.argmax(weights))
        inner_mode = j0
    hemi_free = np.zeros(n_h, dtype=bool)
    hemi_free[mesh.free_nodes] = True

    node_free = (~shell_dirichlet[:, None] & hemi_free[None, :]).ravel()
    u = np.zeros(n)
    u[(n_surf - 1) * n_h:] = lid
    if inner_mode is not None:
        c0 = float(coeffs[j0])
        u[:n_h] = c0 * grid.r_min ** es.gamma[j0] * es.vectors[j0]

    free = np.flatnonzero(node_free)
    fixed = np.flatnonzero(~node_free)
    A_ff = A[free][:, free].tocsr()
    b = -(A[free][:, fixed] @ u[fixed])

    shell_sel = np.flatnonzero(~shell_dirichlet)
    Sr_f = Sr[shell_sel][:, shell_sel]
    Mr_f = Mr[shell_sel][:, shell_sel]
    Kh_f = forms.reduced(forms.K)
    Mh_f = forms.reduced(forms.M)
    precond = _FastDiagPreconditioner(Sr_f, Mr_f, Kh_f, Mh_f)
    Mop = spla.LinearOperator(A_ff.shape, matvec=precond.apply)

    sol, info = spla.cg(A_ff, b, rtol=cg_tol, atol=0.0, maxiter=maxiter,
                        M=Mop)
    if info != 0:
        res = float(np.linalg.norm(A_ff @ sol - b)
                    / max(np.linalg.norm(b), 1e-300))
        raise NumericalError(
            f"conjugate gradients did not converge (info={info}, relative "
            f"residual {res:.3e}); check admissibility of lam = {params.lam}")

    u[free] = sol
    meta = {"inner_mode": inner_mode, "cg_tol": cg_tol,
            "h_is_zero": h_is_zero}
    return GridField(grid, u.reshape(n_surf, n_h), params, cap, h=h,
                     meta=meta)


# ---------------------------------------------------------------------------
# flat binary serialization
# ---------------------------------------------------------------------------

_MAGIC = b"CFXF"
_VERSION = 1


def save_field(path, fld: GridField) -> None:
    """Flat little-endian layout: magic, version, dims, scalar header, the
    shell radii, then node values in (r, t, theta) lexicographic order."""
    mesh = fld.mesh
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<III", fld.grid.n_surfaces, mesh.nt,
                             mesh.ntheta))
        fh.write(struct.pack("<6d", fld.params.s, fld.params.lam,
                             fld.cap.a, fld.cap.b, fld.grid.r_min,
                             mesh.grading))
        fld.grid.r_nodes.astype("<f8").tofile(fh)
        fld.values.astype("<f8").tofile(fh)


def load_field(path, params: ProblemParams | None = None) -> GridField:
    from .sphercap import build_mesh
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise DomainError(f"{path} is not a conefrac field file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise DomainError(f"unsupported field version {version}")
        n_surf, nt, ntheta = struct.unpack("<III", fh.read(12))
        s, lam, cap_a, cap_b, r_min, grading = struct.unpack("<6d",
                                                             fh.read(48))
        r_nodes = np.fromfile(fh, dtype="<f8", count=n_surf)
        values = np.fromfile(fh, dtype="<f8",
                             count=n_surf * nt * ntheta)
    if params is None:
        params = ProblemParams(s=s, lam=lam)
    cap = SphericalCap(cap_a, cap_b)
    mesh = build_mesh(nt, ntheta, s, cap, grading)
    grid = HalfBallGrid(r_nodes=r_nodes, mesh=mesh)
    return GridField(grid, values.reshape(n_surf, nt * ntheta), params, cap)
