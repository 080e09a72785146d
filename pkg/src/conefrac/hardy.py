"""Best trace-Hardy constants on cones via the spherical Rayleigh quotient.

The constant is the smallest eigenvalue of the pencil
(K + ((N-2s)/2)^2 M, kappa_s B) on the space with Dirichlet equator nodes
removed.  Since B is supported on the cap dofs only, the pencil is reduced by
a Schur complement of A = K + ((N-2s)/2)^2 M onto those dofs, which turns the
singular pencil into a small dense symmetric-definite one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .cones import SphericalCap
from .errors import DomainError, GeometryError, NumericalError
from .params import ProblemParams
from .sphercap import AssembledForms, assemble, build_mesh

__all__ = [
    "HardyResult",
    "hardy_constant",
    "hardy_constant_richardson",
    "hardy_scan",
    "radial_hardy_quotient",
]


@dataclass(frozen=True)
class HardyResult:
    """Best constant with its minimizer and provenance.

    ``richardson`` is an extrapolated estimate from a second, coarser level
    when one was computed, else None.  ``mesh_level`` records (nt, ntheta).
    """

    lambda_star: float
    minimizer: np.ndarray
    cap: SphericalCap
    s: float
    mesh_level: tuple[int, int]
    richardson: float | None = None


def _schur_smallest(forms: AssembledForms, params: ProblemParams):
    mesh = forms.mesh
    c2 = params.half_order ** 2
    A = forms.K + c2 * forms.M
    f = mesh.free_nodes
    A = A[f][:, f].tocsr()
    B = forms.B[f][:, f].tocsr()

    bsel = np.flatnonzero(B.diagonal() > 0.0)
    if len(bsel) == 0:
        raise GeometryError("empty cap: no boundary dofs to minimize over")
    isel = np.setdiff1d(np.arange(A.shape[0]), bsel)

    Abb = A[bsel][:, bsel].toarray()
    Abi = A[bsel][:, isel]
    Aii = A[isel][:, isel].tocsc()
    try:
        lu = spla.splu(Aii)
    except RuntimeError as exc:  # pragma: no cover - A is PD by construction
        raise NumericalError(f"interior block is singular: {exc}") from exc
    X = lu.solve(Abi.T.toarray())
    S = Abb - Abi @ X
    S = 0.5 * (S + S.T)
    Bbb = B[bsel][:, bsel].toarray()

    w, V = sla.eigh(S, params.kappa * Bbb)
    lam_star = float(w[0])
    vb = V[:, 0]

    # back-substitute the interior part of the minimizer
    reduced = np.zeros(A.shape[0])
    reduced[bsel] = vb
    reduced[isel] = -X @ vb
    minimizer = forms.extend(reduced)
    # fixed sign on the cap, unit boundary mass
    tr = minimizer[mesh.equator_ids]
    lead = tr[np.argmax(np.abs(tr))]
    if lead < 0.0:
        minimizer = -minimizer
    bn = math.sqrt(params.kappa * float(minimizer @ (forms.B @ minimizer)))
    minimizer /= bn
    return lam_star, minimizer


def hardy_constant(forms: AssembledForms, params: ProblemParams) -> HardyResult:
    """Discrete best constant of the trace-Hardy inequality on the cap.

    Minimizes psi^T (K + ((N-2s)/2)^2 M) psi / (kappa_s psi^T B psi) over the
    retained dofs; the reported minimizer attains the constant exactly in the
    discrete arithmetic.
    """
    lam_star, minimizer = _schur_smallest(forms, params)
    mesh = forms.mesh
    return HardyResult(lambda_star=lam_star, minimizer=minimizer,
                       cap=mesh.cap, s=params.s,
                       mesh_level=(mesh.nt, mesh.ntheta))


def hardy_constant_richardson(params: ProblemParams, cap: SphericalCap,
                              nt: int, ntheta: int,
                              grading: float = 2.0) -> HardyResult:
    """Hardy constant on an (nt, ntheta) mesh with a Richardson estimate
    extrapolated from the half-resolution level (second-order assumption)."""
    fine = assemble(build_mesh(nt, ntheta, params.s, cap, grading), params)
    coarse = assemble(build_mesh(max(nt // 2, 4), max(ntheta // 2, 4),
                                 params.s, cap, grading), params)
    res_f = hardy_constant(fine, params)
    res_c = hardy_constant(coarse, params)
    rich = res_f.lambda_star + (res_f.lambda_star - res_c.lambda_star) / 3.0
    return HardyResult(lambda_star=res_f.lambda_star,
                       minimizer=res_f.minimizer, cap=cap, s=params.s,
                       mesh_level=(nt, ntheta), richardson=rich)


def hardy_scan(arc_lengths, params: ProblemParams, nt: int, ntheta: int,
               grading: float = 2.0, center: float = 1.5 * math.pi,
               threads: int = 1) -> list[HardyResult]:
    """Hardy constants over a strictly increasing list of arc lengths.

    Caps are centered at ``center`` so successive cones are strictly nested;
    the resulting constants must be strictly decreasing and the scan raises
    NumericalError if the computed sequence violates that by more than 1e-6.
    """
    arcs = [float(a) for a in arc_lengths]
    if any(b - a <= 0.0 for a, b in zip(arcs, arcs[1:])):
        raise DomainError("arc lengths must be strictly increasing")
    if arcs[0] <= 0.0 or arcs[-1] > 2.0 * math.pi + 1e-12:
        raise DomainError("arc lengths must lie in (0, 2 pi]")

    def one(length: float) -> HardyResult:
        cap = (SphericalCap.full_circle()
               if length >= 2.0 * math.pi - 1e-12
               else SphericalCap.centered(center, length))
        return hardy_constant_richardson(params, cap, nt, ntheta, grading)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, arcs))
    else:
        results = [one(a) for a in arcs]

    values = [r.lambda_star for r in results]
    for a, b in zip(values, values[1:]):
        if not b < a - 1e-6:
            raise NumericalError(
                f"Hardy scan is not strictly decreasing: {values}")
    return results


def radial_hardy_quotient(f_values, params: ProblemParams,
                          r_nodes=None) -> float:
    """Rayleigh quotient int r^(N+1-2s) |f'|^2 dr / int r^(N-1-2s) f^2 dr for
    a grid function compactly supported in (0, 1).

    The numerator integrates the piecewise-linear interpolant exactly (power
    rule per interval); the denominator uses the trapezoidal rule.  Property
    tests check the quotient against the closed-form infimum ((N-2s)/2)^2.
    """
    f = np.asarray(f_values, dtype=float)
    if r_nodes is None:
        r_nodes = np.linspace(0.0, 1.0, len(f))
    r = np.asarray(r_nodes, dtype=float)
    if len(r) != len(f) or len(f) < 3:
        raise DomainError("need matching r and f arrays with >= 3 points")
    fmax = np.abs(f).max()
    if abs(f[0]) > 1e-12 * fmax or abs(f[-1]) > 1e-12 * fmax:
        raise DomainError("f must vanish at both endpoints (compact support)")

    a = params.N + 1.0 - 2.0 * params.s
    b = params.N - 1.0 - 2.0 * params.s
    dr = np.diff(r)
    slopes = np.diff(f) / dr
    num = float(np.sum(slopes ** 2
                       * (r[1:] ** (a + 1.0) - r[:-1] ** (a + 1.0))
                       / (a + 1.0)))
    wgt = np.zeros_like(f)
    pos = r > 0.0
    wgt[pos] = r[pos] ** b * f[pos] ** 2
    den = float(np.trapezoid(wgt, r))
    if den <= 0.0:
        raise DomainError("denominator vanishes: f is trivial")
    return num / den
