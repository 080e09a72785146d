"""Frequency machinery: boundary mass H(r), scaled energy D(r), the
frequency N(r) = D/H with its H' = 2D/r identity, blow-up rescalings,
Fourier mode profiles, the amplitude formula for the limit profile, and the
Pohozaev balance used as a numerical diagnostic.

All sphere integrals are hemisphere quadratures consistent with the
assembled mass/stiffness forms; radial integrals are closed forms for
manufactured (exactly homogeneous) fields and composite Gauss panels in
log-radius for grid fields, with a local-power continuation below the
innermost shell.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .cones import SphericalCap
from .errors import DomainError, NumericalError
from .expressions import Expression
from .extension import GridField, ManufacturedField, ScalarField
from .params import ProblemParams
from .spectral import EigenSystem
from .sphercap import AssembledForms, assemble

__all__ = [
    "FrequencyTrace",
    "FourierTrace",
    "BlowupSnapshot",
    "PohozaevReport",
    "compute_H",
    "compute_D",
    "frequency_trace",
    "check_H_prime_identity",
    "blowup",
    "fourier_coeffs",
    "beta_coefficients",
    "pohozaev_check",
    "default_radii",
]


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

_FORMS_CACHE: dict[int, AssembledForms] = {}


def _forms_of(fld: ScalarField, params: ProblemParams) -> AssembledForms:
    if isinstance(fld, ManufacturedField):
        return fld.es.forms
    key = id(fld)
    if key not in _FORMS_CACHE:
        _FORMS_CACHE[key] = assemble(fld.mesh, params)
        if len(_FORMS_CACHE) > 8:
            _FORMS_CACHE.pop(next(iter(_FORMS_CACHE)))
    return _FORMS_CACHE[key]


def _equator_block(forms: AssembledForms):
    eq = forms.mesh.equator_ids
    return forms.B[eq][:, eq].tocsr()


def _h_at_equator(h: Expression, rho: float, mesh) -> np.ndarray:
    th = mesh.theta_nodes
    return np.asarray(h.eval({"x1": rho * np.cos(th), "x2": rho * np.sin(th),
                              "r": rho, "theta": th, "t": 0.0})
                      * np.ones_like(th))


def _log_gauss_panels(r_lo: float, r_hi: float, per_decade: int = 24):
    """Composite 4-point Gauss nodes/weights for integrals dr written in
    x = log r; returns (rho, weights) with weights including the Jacobian."""
    x_lo, x_hi = math.log(r_lo), math.log(r_hi)
    n_panels = max(4, int(math.ceil((x_hi - x_lo) * per_decade / math.log(10.0))))
    edges = np.linspace(x_lo, x_hi, n_panels + 1)
    xg, wg = np.polynomial.legendre.leggauss(4)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    rho = np.exp(x)
    return rho, w * rho


def _is_zero_h(h) -> bool:
    return h is None or (isinstance(h, Expression) and h.is_zero())


# ---------------------------------------------------------------------------
# H and D
# ---------------------------------------------------------------------------

def compute_H(fld: ScalarField, r: float, params: ProblemParams) -> float:
    """Scaled boundary mass r^(2s-N-1) int_{sphere r} t^(1-2s) U^2 dS,
    evaluated as a hemisphere quadrature of the sphere samples.  Positive for
    any non-trivial field; H <= 0 raises."""
    if not 0.0 < r <= 1.0 + 1e-12:
        raise DomainError(f"radius must lie in (0, 1], got {r}")
    forms = _forms_of(fld, params)
    v = fld.sphere_values(r)
    H = float(v @ (forms.M @ v))
    if H <= 0.0:
        raise NumericalError(
            f"H({r}) = {H} is not positive: the field is trivial there")
    return H


def _d_components_manufactured(fld: ManufacturedField, r: float,
                               params: ProblemParams, h, cap):
    es = fld.es
    k0, m, b = es.quad_forms()
    idx = list(fld.modes)
    k0 = k0[np.ix_(idx, idx)]
    m = m[np.ix_(idx, idx)]
    b = b[np.ix_(idx, idx)]
    g = fld.gammas
    beta = fld.betas
    N, s = params.N, params.s
    powsum = N - 2.0 * s + g[:, None] + g[None, :]
    radial = r ** powsum / powsum
    vol = float(np.sum(beta[:, None] * beta[None, :] * radial
                       * (g[:, None] * g[None, :] * m + k0)))
    hardy = float(np.sum(beta[:, None] * beta[None, :] * radial * b))
    if _is_zero_h(h):
        return vol, hardy, 0.0
    trace_h = _trace_h_integral(fld, r, params, h)
    return vol, hardy, trace_h


def _trace_h_integral(fld: ScalarField, r: float, params: ProblemParams,
                      h: Expression, r_lo: float | None = None,
                      core_power: float | None = None) -> float:
    """int over the cap disc of radius r of h |Tr U|^2 dx, via log-radius
    Gauss panels; optional power-continuation core below r_lo."""
    forms = _forms_of(fld, params)
    Bee = _equator_block(forms)
    mesh = fld.mesh
    N = params.N

    def integrand(rho):
        tr = fld.trace_values(rho)
        hv = _h_at_equator(h, rho, mesh)
        return rho ** (N - 1) * float((hv * tr) @ (Bee @ tr))

    lo = r_lo if r_lo is not None else r * 1e-8
    lo = min(lo, 0.999 * r)
    rho, w = _log_gauss_panels(lo, r)
    total = float(np.dot(w, [integrand(p) for p in rho]))
    if core_power is not None:
        denom = N + 2.0 * core_power
        if denom > 1e-2:
            total += integrand(lo) * lo / denom
    return total


def _d_components_grid(fld: GridField, r: float, params: ProblemParams,
                       h, cap):
    forms = _forms_of(fld, params)
    Bee = _equator_block(forms)
    mesh = fld.mesh
    N, s = params.N, params.s
    r_lo = fld.grid.r_min
    gloc = fld.local_power()

    def e_vol(rho):
        g = fld.sphere_radial_derivative(rho)
        v = fld.sphere_values(rho)
        return (rho ** (N + 1 - 2 * s) * float(g @ (forms.M @ g))
                + rho ** (N - 1 - 2 * s) * float(v @ (forms.K @ v)))

    def e_hardy(rho):
        tr = fld.trace_values(rho)
        return rho ** (N - 1 - 2 * s) * float(tr @ (Bee @ tr))

    denom = N - 2.0 * s + 2.0 * gloc
    if denom <= 1e-2:
        # the trace fails to vanish fast enough at the vertex: the Hardy
        # term int |Tr U|^2 / |x|^2s is not integrable against the
        # continuation power
        tr0 = fld.trace_values(r_lo)
        if params.lam != 0.0 and float(tr0 @ (Bee @ tr0)) > 1e-14:
            raise NumericalError(
                f"non-integrable trace singularity: local power {gloc:.4f} "
                f"is at or below (2s - N)/2 = {(2 * s - N) / 2:.4f}")
        denom = math.inf

    if r <= r_lo:
        # fully inside the continuation region: pure power closed form
        scale = (r / r_lo) ** (N - 2.0 * s + 2.0 * gloc)
        vol = e_vol(r_lo) * r_lo / denom * scale
        hardy = e_hardy(r_lo) * r_lo / denom * scale
    else:
        rho, w = _log_gauss_panels(r_lo, r)
        vol = float(np.dot(w, [e_vol(p) for p in rho]))
        hardy = float(np.dot(w, [e_hardy(p) for p in rho]))
        vol += e_vol(r_lo) * r_lo / denom
        hardy += e_hardy(r_lo) * r_lo / denom

    if _is_zero_h(h):
        trace_h = 0.0
    else:
        trace_h = _trace_h_integral(fld, r, params, h, r_lo=r_lo,
                                    core_power=gloc)
    return vol, hardy, trace_h


def compute_D(fld: ScalarField, r: float, params: ProblemParams,
              h: Expression | None = None,
              cap: SphericalCap | None = None) -> float:
    """Scaled energy r^(2s-N) (volume gradient energy minus the kappa_s
    (h + lam |x|^(-2s)) trace term).  Manufactured fields evaluate the
    radial integrals in closed form; grid fields by panel quadrature with a
    power-law core below the innermost shell."""
    if isinstance(fld, ManufacturedField):
        vol, hardy, trace_h = _d_components_manufactured(fld, r, params, h, cap)
        lam = fld.es.lam
    else:
        vol, hardy, trace_h = _d_components_grid(fld, r, params, h, cap)
        lam = params.lam
    N, s = params.N, params.s
    return r ** (2.0 * s - N) * (
        vol - params.kappa * (lam * hardy + trace_h))


# ---------------------------------------------------------------------------
# frequency traces
# ---------------------------------------------------------------------------

def default_radii(R0: float = 0.8, n: int = 40,
                  r_min: float = 1e-2) -> np.ndarray:
    """Geometric radii grid used by the analyzer, 40 points by default."""
    return np.geomspace(r_min, R0, n)


@dataclass(frozen=True)
class FrequencyTrace:
    """Radial profiles H, D, N = D/H with the extrapolated order estimate."""

    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    Ncal: np.ndarray
    gamma_hat: float
    R0: float
    fit_exponent: float | None
    fit_coefficient: float | None
    fit_fallback: bool


def _fit_gamma(radii, ncal, delta_fixed=None):
    """Fit N(r) ~ gamma + c r^delta on the smallest half of the radii."""
    m = max(4, len(radii) // 2)
    r = np.asarray(radii[:m])
    y = np.asarray(ncal[:m])
    if delta_fixed is not None:
        A = np.column_stack([np.ones_like(r), r ** delta_fixed])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e12:
            return float(y[0]), None, None, True
        return float(sol[0]), delta_fixed, float(sol[1]), False

    spread = float(np.max(y) - np.min(y))
    if spread < 1e-12:
        return float(y[0]), None, 0.0, False

    def resid(p):
        g, c, d = p
        return g + c * r ** d - y

    try:
        out = least_squares(resid, x0=[y[0], y[-1] - y[0], 1.0],
                            bounds=([-np.inf, -np.inf, 0.05],
                                    [np.inf, np.inf, 8.0]))
        if not out.success:
            raise RuntimeError(out.message)
        g, c, d = out.x
        return float(g), float(d), float(c), False
    except Exception:
        return float(y[0]), None, None, True


def frequency_trace(fld: ScalarField, params: ProblemParams,
                    h: Expression | None = None,
                    cap: SphericalCap | None = None,
                    radii=None, R0: float = 0.8) -> FrequencyTrace:
    """Pointwise frequency on the radii grid plus the r -> 0 extrapolation.

    With a perturbation present the remainder exponent is pinned to
    2s - N/p; without one the exponent is free.  An ill-conditioned fit
    falls back to the smallest-radius frequency value.
    """
    if radii is None:
        radii = default_radii(R0)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0.0) or np.any(radii > R0 + 1e-12):
        raise DomainError("radii must lie in (0, R0]")
    Hs = np.array([compute_H(fld, r, params) for r in radii])
    Ds = np.array([compute_D(fld, r, params, h, cap) for r in radii])
    ncal = Ds / Hs

    floor = -params.half_order
    if np.any(ncal <= floor - 1e-9):
        warnings.warn("frequency dipped below -(N-2s)/2: "
                      "lam is likely inadmissible", RuntimeWarning)

    if _is_zero_h(h):
        g, d, c, fb = _fit_gamma(radii, ncal, None)
    else:
        delta = 2.0 * params.s - params.N / params.p
        g, d, c, fb = _fit_gamma(radii, ncal, delta)
    return FrequencyTrace(radii=radii, H=Hs, D=Ds, Ncal=ncal, gamma_hat=g,
                          R0=R0, fit_exponent=d, fit_coefficient=c,
                          fit_fallback=fb)


def check_H_prime_identity(fld: ScalarField, params: ProblemParams,
                           h: Expression | None = None,
                           cap: SphericalCap | None = None,
                           r: float = 0.5,
                           delta: float | None = None) -> float:
    """Relative residual of H'(r) = 2 D(r) / r with fourth-order central
    differences of H in log radius."""
    if delta is None:
        delta = 1e-3 if fld.is_analytic else 0.04
    xs = math.log(r) + delta * np.array([-2.0, -1.0, 1.0, 2.0])
    Hvals = [compute_H(fld, math.exp(x), params) for x in xs]
    dHdx = (Hvals[0] - 8.0 * Hvals[1] + 8.0 * Hvals[2] - Hvals[3]) / (12.0 * delta)
    Hp = dHdx / r
    rhs = 2.0 * compute_D(fld, r, params, h, cap) / r
    scale = max(abs(Hp), abs(rhs))
    # both sides at the finite-difference noise floor: the identity holds
    # trivially (constant fields)
    if scale < 1e-9 * max(1.0, compute_H(fld, r, params) / r):
        return 0.0
    return abs(Hp - rhs) / scale


# ---------------------------------------------------------------------------
# blow-up family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupSnapshot:
    """Rescaled field w(z) = U(tau z) / sqrt(H(tau)) on the unit half-ball."""

    fld: ScalarField
    tau: float
    scale: float
    params: ProblemParams

    def sphere_values(self, rho: float) -> np.ndarray:
        return self.fld.sphere_values(self.tau * rho) / self.scale

    def boundary_norm(self) -> float:
        """Weighted boundary mass on the unit sphere; 1 by construction."""
        forms = _forms_of(self.fld, self.params)
        v = self.sphere_values(1.0)
        return float(v @ (forms.M @ v))

    def projection(self, es: EigenSystem, j: int) -> float:
        """Boundary-mass projection of the snapshot onto mode j."""
        forms = _forms_of(self.fld, self.params)
        v = self.sphere_values(1.0)
        return float(v @ (forms.M @ es.vectors[j]))

    def off_group_norm(self, es: EigenSystem, group_of: int) -> float:
        """l2 size of projections onto every stored mode outside the
        multiplicity group of ``group_of``."""
        members = set(es.group_members(group_of).tolist())
        total = 0.0
        for j in range(es.k):
            if j in members:
                continue
            total += self.projection(es, j) ** 2
        return math.sqrt(total)

    def h1_distance(self, other: ScalarField, r_lo: float = 1e-4) -> float:
        """Weighted H1 distance on the unit half-ball between the snapshot
        and another field, by shell quadrature."""
        forms = _forms_of(self.fld, self.params)
        N, s = self.params.N, self.params.s
        rho, w = _log_gauss_panels(r_lo, 1.0)
        total = 0.0
        for p, wp in zip(rho, w):
            dv = self.sphere_values(p) - other.sphere_values(p)
            dg = (self.fld.sphere_radial_derivative(self.tau * p) * self.tau
                  / self.scale) - other.sphere_radial_derivative(p)
            total += wp * (p ** (N + 1 - 2 * s)
                           * (float(dg @ (forms.M @ dg))
                              + float(dv @ (forms.M @ dv)))
                           + p ** (N - 1 - 2 * s)
                           * float(dv @ (forms.K @ dv)))
        return math.sqrt(max(total, 0.0))


def blowup(fld: ScalarField, tau: float, params: ProblemParams) -> BlowupSnapshot:
    """Normalized rescaling at scale tau; requires H(tau) > 0."""
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"tau must lie in (0, 1], got {tau}")
    H = compute_H(fld, tau, params)
    return BlowupSnapshot(fld=fld, tau=tau, scale=math.sqrt(H),
                          params=params)


# ---------------------------------------------------------------------------
# Fourier mode profiles and the amplitude formula
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierTrace:
    """Mode profiles phi_j(tau) and the perturbation integrals Upsilon_j."""

    taus: np.ndarray
    modes: np.ndarray
    phi: np.ndarray          # (n_modes, n_tau)
    ups: np.ndarray          # (n_modes, n_tau)
    es: EigenSystem

    def zeta(self, j_pos: int) -> np.ndarray:
        """Forcing profile tau^(2s-N-1) Upsilon' of the j_pos-th mode, by
        finite differences on the log-spaced tau grid."""
        params = self.es.params
        x = np.log(self.taus)
        dups = np.gradient(self.ups[j_pos], x)
        return self.taus ** (2.0 * params.s - params.N - 1.0) \
            * dups / self.taus

    def phi_at(self, j_pos: int, R: float) -> float:
        """phi of the j_pos-th stored mode at radius R.

        Between samples the profile is interpolated as a local power of tau
        (exact for homogeneous modes), falling back to linear interpolation
        in log tau where the sign changes."""
        y = self.phi[j_pos]
        x = np.log(self.taus)
        xr = math.log(R)
        if xr <= x[0]:
            return float(y[0])
        if xr >= x[-1]:
            return float(y[-1])
        i = int(np.searchsorted(x, xr, side="right") - 1)
        y0, y1 = y[i], y[i + 1]
        if y0 * y1 > 0.0:
            q = (math.log(abs(y1)) - math.log(abs(y0))) / (x[i + 1] - x[i])
            return float(y0 * math.exp(q * (xr - x[i])))
        frac = (xr - x[i]) / (x[i + 1] - x[i])
        return float((1.0 - frac) * y0 + frac * y1)


def fourier_coeffs(fld: ScalarField, es: EigenSystem, taus,
                   params: ProblemParams, h: Expression | None = None,
                   cap: SphericalCap | None = None) -> FourierTrace:
    """Mode coefficients phi_j(tau) by hemisphere quadrature and the
    cumulative perturbation integrals Upsilon_j(tau) by log-spaced radial
    quadrature of the cap-arc integrand."""
    if cap is not None and (abs(cap.a - es.cap.a) > 1e-12
                            or abs(cap.b - es.cap.b) > 1e-12):
        raise DomainError("cap does not match the eigen system's cap")
    if abs(params.lam - es.lam) > 1e-14:
        raise DomainError("lam does not match the eigen system's lam")

    taus = np.sort(np.asarray(taus, dtype=float))
    if taus[0] <= 0.0 or taus[-1] > 1.0:
        raise DomainError("taus must lie in (0, 1]")
    forms = es.forms
    M = forms.M
    k = es.k
    phi = np.zeros((k, len(taus)))
    for i, tau in enumerate(taus):
        v = fld.sphere_values(tau)
        phi[:, i] = es.vectors @ (M @ v)

    ups = np.zeros((k, len(taus)))
    if not _is_zero_h(h):
        Bee = _equator_block(forms)
        mesh = es.mesh
        traces = es.vectors[:, mesh.equator_ids]
        N = params.N
        r_lo = taus[0] * 1e-3
        if isinstance(fld, GridField):
            r_lo = max(r_lo, 1e-3 * fld.grid.r_min)
        rho_all, w_all = _log_gauss_panels(r_lo, taus[-1], per_decade=32)
        q = np.zeros((k, len(rho_all)))
        for m_i, rho in enumerate(rho_all):
            tr = fld.trace_values(rho)
            hv = _h_at_equator(h, rho, mesh)
            q[:, m_i] = rho ** (N - 1) * (traces @ (Bee @ (hv * tr)))
        cumulative = np.cumsum(q * w_all[None, :], axis=1)
        for i, tau in enumerate(taus):
            pos = np.searchsorted(rho_all, tau, side="right") - 1
            pos = max(pos, 0)
            ups[:, i] = params.kappa * cumulative[:, pos]
    return FourierTrace(taus=taus, modes=np.arange(k), phi=phi, ups=ups,
                        es=es)


def _power_weighted_integral(taus: np.ndarray, vals: np.ndarray,
                             alpha: float, R: float) -> float:
    """int_0^R t^alpha vals(t) dt with vals sampled on the tau grid: linear
    interpolation between samples integrated against the exact power, plus a
    fitted power tail below the first sample."""
    x = taus
    y = vals
    sel = x <= R * (1.0 + 1e-12)
    x = x[sel]
    y = y[sel]
    if len(x) < 2:
        raise DomainError("need at least two samples below R")
    if x[-1] < R * (1.0 - 1e-12):
        # extend to R by linear extrapolation of the last interval
        slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        y = np.append(y, y[-1] + slope * (R - x[-1]))
        x = np.append(x, R)

    total = 0.0
    for a, b, ya, yb in zip(x[:-1], x[1:], y[:-1], y[1:]):
        # linear y on [a, b] against t^alpha, power rule per piece
        slope = (yb - ya) / (b - a)
        c0 = ya - slope * a
        p1 = alpha + 1.0
        p2 = alpha + 2.0
        if abs(p1) < 1e-12 or abs(p2) < 1e-12:
            rho = np.linspace(a, b, 33)
            total += float(np.trapezoid(rho ** alpha
                                        * (c0 + slope * rho), rho))
            continue
        total += c0 * (b ** p1 - a ** p1) / p1 \
            + slope * (b ** p2 - a ** p2) / p2

    # power tail below the first sample
    t0, t1 = x[0], x[1]
    y0, y1 = y[0], y[1]
    if abs(y0) > 0.0 and abs(y1) > 0.0 and y0 * y1 > 0.0:
        q = math.log(abs(y1) / abs(y0)) / math.log(t1 / t0)
    else:
        q = 1.0
    decay = q + alpha + 1.0
    if abs(y0) > 1e-300:
        if decay <= 1e-3:
            raise NumericalError(
                "Upsilon tail decays too slowly against the order weight: "
                f"local power {q:.3f} with exponent {alpha:.3f} makes the "
                "amplitude integral divergent")
        total += y0 * t0 / decay
    return total


def beta_coefficients(ft: FourierTrace, gamma: float, R: float,
                      params: ProblemParams) -> np.ndarray:
    """Limit-profile amplitudes

        beta_j = phi_j(R)/R^gamma
                 + (N+gamma-2s)/(N+2gamma-2s) int_0^R t^(-N-1+2s-gamma) Ups_j
                 + gamma R^(-N+2s-2gamma)/(N+2gamma-2s) int_0^R t^(gamma-1) Ups_j

    for every stored mode, quadrature on the trace grid with power-law
    endpoint treatment.  The value is R-independent for exact solutions."""
    if not 0.0 < R < 1.0:
        raise DomainError(f"R must lie in (0, 1), got {R}")
    N, s = params.N, params.s
    denom = N + 2.0 * gamma - 2.0 * s
    out = np.zeros(len(ft.modes))
    for pos in range(len(ft.modes)):
        beta = ft.phi_at(pos, R) / R ** gamma
        if np.any(ft.ups[pos] != 0.0):
            i1 = _power_weighted_integral(ft.taus, ft.ups[pos],
                                          -N - 1.0 + 2.0 * s - gamma, R)
            i2 = _power_weighted_integral(ft.taus, ft.ups[pos],
                                          gamma - 1.0, R)
            beta += (N + gamma - 2.0 * s) / denom * i1
            beta += gamma * R ** (-N + 2.0 * s - 2.0 * gamma) / denom * i2
        out[pos] = beta
    return out


# ---------------------------------------------------------------------------
# Pohozaev diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PohozaevReport:
    lhs: float
    rhs: float
    satisfied: bool
    green_residual: float
    scale: float


def pohozaev_check(fld: ScalarField, params: ProblemParams,
                   h: Expression | None, cap: SphericalCap | None,
                   r: float, tol: float = 1e-2) -> PohozaevReport:
    """Evaluates both sides of the Pohozaev balance at radius r and the
    residual of the Green identity tying energy to the boundary flux.

    lhs >= rhs - tol * scale is reported as ``satisfied``; homogeneous
    fields saturate the balance (equality).
    """
    forms = _forms_of(fld, params)
    Bee = _equator_block(forms)
    mesh = fld.mesh
    N, s = params.N, params.s
    lam = fld.es.lam if isinstance(fld, ManufacturedField) else params.lam
    kappa = params.kappa

    v = fld.sphere_values(r)
    g = fld.sphere_radial_derivative(r)
    shell_norm_der = r ** (N + 1 - 2 * s) * float(g @ (forms.M @ g))
    shell_grad = shell_norm_der + r ** (N - 1 - 2 * s) * float(
        v @ (forms.K @ v))
    tr = fld.trace_values(r)
    circ_hardy = r ** (N - 1 - 2 * s) * float(tr @ (Bee @ tr))

    if isinstance(fld, ManufacturedField):
        vol, hardy, trace_h = _d_components_manufactured(fld, r, params,
                                                         h, cap)
    else:
        vol, hardy, trace_h = _d_components_grid(fld, r, params, h, cap)

    lhs = 0.5 * r * (shell_grad - kappa * lam * circ_hardy) \
        - r * shell_norm_der
    if not _is_zero_h(h):
        hv = _h_at_equator(h, r, mesh)
        circ_h = r ** (N - 1) * float((hv * tr) @ (Bee @ tr))
        hx = h.diff("x1")
        hy = h.diff("x2")
        th = mesh.theta_nodes

        def euler_term(rho):
            trr = fld.trace_values(rho)
            x1 = rho * np.cos(th)
            x2 = rho * np.sin(th)
            base = {"x1": x1, "x2": x2, "r": rho, "theta": th, "t": 0.0}
            graddot = (np.asarray(hx.eval(base) * np.ones_like(th)) * x1
                       + np.asarray(hy.eval(base) * np.ones_like(th)) * x2)
            hval = _h_at_equator(h, rho, mesh)
            mix = graddot + N * hval
            return rho ** (N - 1) * float((mix * trr) @ (Bee @ trr))

        r_lo_q = fld.grid.r_min if isinstance(fld, GridField) else r * 1e-8
        rho_q, w_q = _log_gauss_panels(min(r_lo_q, 0.999 * r), r)
        euler = float(np.dot(w_q, [euler_term(p) for p in rho_q]))
        lhs += 0.5 * kappa * euler - 0.5 * r * kappa * circ_h

    rhs = 0.5 * (N - 2.0 * s) * (vol - kappa * lam * hardy)

    flux = r ** (N + 1 - 2 * s) * float(v @ (forms.M @ g))
    energy = vol - kappa * (lam * hardy + trace_h)
    scale = max(abs(energy), abs(flux), abs(lhs), abs(rhs), 1e-300)
    green_residual = abs(energy - flux) / scale
    satisfied = lhs >= rhs - tol * scale
    return PohozaevReport(lhs=lhs, rhs=rhs, satisfied=satisfied,
                          green_residual=green_residual, scale=scale)
