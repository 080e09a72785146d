"""Scalar parameters and the closed-form maps between eigenvalues, vanishing
orders and Hardy constants.

Everything here is a pure function of a handful of reals; the heavier mesh and
solver machinery lives in the other modules.  The gamma function is provided
in-repo (Lanczos approximation) so that the closed-form constants can be
cross-checked against an independent implementation in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

__all__ = [
    "ProblemParams",
    "OrderEigenPairing",
    "lanczos_gamma",
    "kappa_s",
    "gamma_from_mu",
    "mu_from_gamma",
    "hardy_constant_full_space",
]


# Lanczos coefficients, g = 7, 9 terms.  Relative error < 1e-14 on (0, 10]
# once combined with the reflection formula for arguments below 1/2.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lanczos_gamma(x: float) -> float:
    """Gamma function via the Lanczos approximation.

    Valid for every real ``x`` that is not a non-positive integer; the
    reflection formula handles ``x < 1/2``.
    """
    if x <= 0.0 and x == math.floor(x):
        raise DomainError(f"gamma undefined at non-positive integer {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * lanczos_gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def kappa_s(s: float) -> float:
    """Normalization constant Gamma(1-s) / (2^(2s-1) Gamma(s)) of the
    weighted Neumann trace condition.

    Raises
    ------
    DomainError
        If ``s`` is outside (0, 1).
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return lanczos_gamma(1.0 - s) / (2.0 ** (2.0 * s - 1.0) * lanczos_gamma(s))


@dataclass(frozen=True)
class ProblemParams:
    """Immutable scalar parameters of a run.

    Attributes
    ----------
    N : int
        Thin-space dimension (>= 2).  The PDE modules require N == 2; the
        closed-form maps below are generic in N.
    s : float
        Fractional order in (0, 1).
    lam : float
        Coefficient of the singular potential.  Admissibility against the
        cone's Hardy constant is checked downstream, not here.
    p : float
        Integrability exponent of the bounded perturbation, > N / (2s).
        Defaults to 10 N / (2s).
    kappa : float
        Derived trace-condition constant; filled in automatically.
    """

    N: int = 2
    s: float = 0.5
    lam: float = 0.0
    p: float | None = None
    kappa: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.N < 2:
            raise DomainError(f"dimension N must be >= 2, got {self.N}")
        if not 0.0 < self.s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {self.s}")
        p_min = self.N / (2.0 * self.s)
        if self.p is None:
            object.__setattr__(self, "p", 10.0 * p_min)
        elif self.p <= p_min:
            raise DomainError(
                f"p must exceed N/(2s) = {p_min:.6g}, got {self.p}")
        object.__setattr__(self, "kappa", kappa_s(self.s))

    @property
    def half_order(self) -> float:
        """(N - 2s) / 2, the pivot of the mu <-> gamma map."""
        return 0.5 * (self.N - 2.0 * self.s)

    @property
    def spectrum_floor(self) -> float:
        """-((N - 2s)/2)^2, strict lower bound of the admissible spectrum."""
        return -self.half_order ** 2


def gamma_from_mu(mu: float, params: ProblemParams) -> float:
    """Vanishing order gamma = sqrt(((N-2s)/2)^2 + mu) - (N-2s)/2.

    Raises
    ------
    DomainError
        If the radicand is negative beyond a 1e-12 tolerance.
    """
    c = params.half_order
    radicand = c * c + mu
    if radicand < -1e-12:
        raise DomainError(
            f"mu = {mu} lies below the spectrum floor {-c * c:.12g}")
    return math.sqrt(max(radicand, 0.0)) - c


def mu_from_gamma(gamma: float, params: ProblemParams) -> float:
    """Inverse map mu = gamma (gamma + N - 2s); total for gamma >= -(N-2s)/2."""
    return gamma * (gamma + params.N - 2.0 * params.s)


@dataclass(frozen=True)
class OrderEigenPairing:
    """An eigenvalue together with its vanishing order, both ways consistent."""

    mu: float
    gamma: float
    N: int
    s: float

    @classmethod
    def from_mu(cls, mu: float, params: ProblemParams) -> "OrderEigenPairing":
        return cls(mu=mu, gamma=gamma_from_mu(mu, params),
                   N=params.N, s=params.s)

    @classmethod
    def from_gamma(cls, gamma: float, params: ProblemParams) -> "OrderEigenPairing":
        c = params.half_order
        if gamma < -c:
            raise DomainError(f"gamma = {gamma} below -{c:.12g}")
        return cls(mu=mu_from_gamma(gamma, params), gamma=gamma,
                   N=params.N, s=params.s)

    def residual(self) -> float:
        """Defect of the simultaneous identities tying mu and gamma."""
        return abs(self.mu - self.gamma * (self.gamma + self.N - 2.0 * self.s))


def hardy_constant_full_space(params: ProblemParams) -> float:
    """Best trace-Hardy constant when the cone is the whole space:
    2^(2s) Gamma^2((N+2s)/4) / Gamma^2((N-2s)/4)."""
    N, s = params.N, params.s
    return (2.0 ** (2.0 * s)
            * lanczos_gamma((N + 2.0 * s) / 4.0) ** 2
            / lanczos_gamma((N - 2.0 * s) / 4.0) ** 2)
