"""
CES and VES production functions in closed form.

The VES technology is

    V = A [delta K^-rho + (1 - delta) (K/L)^(-mu (1 + rho)) L^-rho]^(-1/rho)

which is homogeneous of degree one, so everything is evaluated through the
intensive form Y = f(X) with X = K/L and Y = V/L.  With t = ln X and
s = rho - mu (1 + rho) the log output is

    ln Y = ln A + t - ln(delta + (1 - delta) e^(s t)) / rho

and the capital share e = X f'(X) / f(X) = 1 - s q / rho, where
q = (1 - delta) e^(s t) / (delta + (1 - delta) e^(s t)).  All derivatives
below are written in terms of these shares, which keeps them finite for
extreme capital intensities.

The Hildebrand-Liu form (a, b, c, beta) is the parameterisation in which the
model was originally derived: ln Y = ln a + b ln W + c ln X with W the
marginal product of labour.  When mu > rho / (1 + rho) that marginal product
is negative; the wage relation then holds for its magnitude, and the
conversions below follow that convention.
"""

from dataclasses import dataclass
import math
import warnings
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateCurvatureError,
    DomainError,
    NonEconomicRegionError,
    SingularDenominatorError,
    SingularityError,
)

RHO_TOL = 1e-6
EXP_LIMIT = 709.0
# |1 - b - c| below this is treated as the singular denominator of alpha.
HL_DENOM_TOL = 1e-12


class NegativeMuWarning(UserWarning):
    """mu < 0 lies outside the region the model was built for."""


class NonCompetitiveWageWarning(UserWarning):
    """The marginal product of labour is not positive at some capital intensity."""


def _check_rho(rho):
    if not math.isfinite(rho):
        raise DomainError(f"rho must be finite, got {rho!r}")
    if rho <= -1:
        raise DomainError(f"rho must exceed -1, got {rho!r}")
    if abs(rho) < RHO_TOL:
        raise SingularityError(
            f"|rho| = {abs(rho):.3g} < {RHO_TOL:g}: Cobb-Douglas limit, "
            "the SMAC form divides by rho"
        )


def _check_scale_delta(A, delta):
    if not (math.isfinite(A) and A > 0):
        raise DomainError(f"A must be positive, got {A!r}")
    if not (0 < delta < 1):
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")


@dataclass(frozen=True)
class VesParams:
    """SMAC-form VES parameters (A, delta, rho, mu); mu = 0 is the CES case."""

    A: float
    delta: float
    rho: float
    mu: float

    def __post_init__(self):
        _check_scale_delta(self.A, self.delta)
        _check_rho(self.rho)
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        if self.mu < 0:
            warnings.warn(
                f"mu = {self.mu} < 0 indicates labour-intensive production",
                NegativeMuWarning,
                stacklevel=3,
            )

    @property
    def s(self):
        """Exponent gap rho - mu (1 + rho) driving the curvature in ln X."""
        return self.rho - self.mu * (1.0 + self.rho)

    @property
    def is_ces(self):
        return self.mu == 0

    def as_tuple(self):
        return (self.A, self.delta, self.rho, self.mu)


@dataclass(frozen=True)
class CesParams:
    A: float
    delta: float
    rho: float

    def __post_init__(self):
        _check_scale_delta(self.A, self.delta)
        _check_rho(self.rho)

    @property
    def sigma(self):
        return 1.0 / (1.0 + self.rho)

    def to_ves(self):
        return VesParams(self.A, self.delta, self.rho, 0.0)


@dataclass(frozen=True)
class HlForm:
    """
    Hildebrand-Liu coefficients of ln(V/L) = ln a + b ln W + c ln(K/L).

    ``beta`` is the integration constant of the closed-form solution; every
    positive value solves the same differential equation.
    """

    a: float
    b: float
    c: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be positive, got {self.a!r}")
        if not (math.isfinite(self.b) and self.b > 0):
            raise DomainError(f"b must be positive, got {self.b!r}")
        if self.b == 1:
            raise SingularityError("b = 1 makes rho = 1/b - 1 vanish")
        if not math.isfinite(self.c):
            raise DomainError(f"c must be finite, got {self.c!r}")
        if abs(1.0 - self.b - self.c) < HL_DENOM_TOL:
            raise SingularDenominatorError(
                f"1 - b - c = {1.0 - self.b - self.c:.3g}: alpha is undefined"
            )
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise NonEconomicRegionError(f"beta must be positive, got {self.beta!r}")

    @property
    def wage_sign(self):
        """Sign of the marginal product of labour implied by (b, c)."""
        return 1.0 if (1.0 - self.b - self.c) / (1.0 - self.b) > 0 else -1.0

    @property
    def alpha(self):
        return self.a ** (-1.0 / self.b) * abs((1.0 - self.b) / (1.0 - self.b - self.c))


@dataclass(frozen=True)
class FactorPoint:
    """One (K, L, V) observation with optional factor prices."""

    K: float
    L: float
    V: float
    W: float = None
    r: float = None

    @property
    def X(self):
        return self.K / self.L

    @property
    def Y(self):
        return self.V / self.L


class FactorPrices(NamedTuple):
    W: object
    r: object

    @property
    def competitive(self):
        return bool(np.all(np.asarray(self.W) > 0))


class Derivatives(NamedTuple):
    f: object
    f1: object
    f2: object


def _as_positive(X, name="X"):
    arr = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return arr


def _unwrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _check_exponent(value, label):
    worst = float(np.max(np.abs(value))) if np.size(value) else 0.0
    if worst > EXP_LIMIT:
        raise DomainError(f"exponent {label} reaches {worst:.4g}, beyond +/-{EXP_LIMIT:g}")


def _intensive_terms(p, X):
    """Return ln Y, the capital share e and the bracket weights (w1, w2)."""
    t = np.log(_as_positive(X))
    m = p.mu * (1.0 + p.rho)
    lead = -p.rho * t
    tail = -m * t
    _check_exponent(lead, "-rho*ln(X)")
    _check_exponent(tail, "-mu*(1+rho)*ln(X)")
    u1 = math.log(p.delta) + lead
    u2 = math.log1p(-p.delta) + tail
    log_bracket = np.logaddexp(u1, u2)
    log_y = math.log(p.A) - log_bracket / p.rho
    _check_exponent(log_y, "ln(Y)")
    w1 = np.exp(u1 - log_bracket)
    w2 = np.exp(u2 - log_bracket)
    e = (p.rho * w1 + m * w2) / p.rho
    return log_y, e, w1, w2


def eval_ves_intensive(p: VesParams, X):
    """Output per worker Y = f(X) at capital intensity X."""
    log_y, _, _, _ = _intensive_terms(p, X)
    return _unwrap(np.exp(log_y), X)


def eval_ves(p: VesParams, K, L):
    """Value added V = L f(K/L)."""
    K = _as_positive(K, "K")
    L = _as_positive(L, "L")
    out = L * np.asarray(eval_ves_intensive(p, K / L))
    return _unwrap(out, out)


def eval_ces(p: CesParams, K, L):
    """CES value added A [delta K^-rho + (1 - delta) L^-rho]^(-1/rho)."""
    K = _as_positive(K, "K")
    L = _as_positive(L, "L")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = p.A * (p.delta * K ** (-p.rho) + (1.0 - p.delta) * L ** (-p.rho)) ** (-1.0 / p.rho)
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise DomainError("CES evaluation overflowed: exponent -rho*ln(K) or -rho*ln(L) too large")
    return _unwrap(out, out)


def derivatives(p: VesParams, X):
    """Analytic f, f' and f'' of the intensive form."""
    Xa = _as_positive(X)
    log_y, e, w1, w2 = _intensive_terms(p, Xa)
    y = np.exp(log_y)
    s = p.s
    f1 = y * e / Xa
    f2 = y * (e * e - e - s * s * w1 * w2 / p.rho) / (Xa * Xa)
    return Derivatives(_unwrap(y, X), _unwrap(f1, X), _unwrap(f2, X))


def factor_prices(p: VesParams, X):
    """
    Competitive wage W = f - X f' and return to capital r = f'.

    A non-positive W is flagged with :class:`NonCompetitiveWageWarning`
    rather than rejected.
    """
    Xa = _as_positive(X)
    log_y, e, _, _ = _intensive_terms(p, Xa)
    y = np.exp(log_y)
    W = y * (1.0 - e)
    r = y * e / Xa
    if np.any(W <= 0):
        warnings.warn(
            "marginal product of labour is not positive "
            f"(mu = {p.mu} vs rho/(1+rho) = {p.rho / (1 + p.rho):.4g})",
            NonCompetitiveWageWarning,
            stacklevel=2,
        )
    return FactorPrices(_unwrap(W, X), _unwrap(r, X))


def elasticity_of_substitution(p: VesParams, X):
    """
    sigma = -f' (f - X f') / (X f f'') for a degree-one technology.

    In share form this is e(1-e) / (e(1-e) + s^2 w1 w2 / rho), which equals
    1/(1+rho) identically when mu = 0.
    """
    Xa = _as_positive(X)
    _, e, w1, w2 = _intensive_terms(p, Xa)
    num = e * (1.0 - e)
    curv = p.s ** 2 * w1 * w2 / p.rho
    den = num + curv
    scale = np.abs(num) + np.abs(curv)
    if np.any(np.abs(den) <= 1e-14 * np.maximum(scale, np.finfo(float).tiny)):
        raise DegenerateCurvatureError("f'' vanishes: elasticity of substitution undefined")
    return _unwrap(num / den, X)


def hl_to_ves(h: HlForm) -> VesParams:
    """Map Hildebrand-Liu coefficients to SMAC parameters."""
    rho = 1.0 / h.b - 1.0
    _check_rho(rho)
    alpha = h.alpha
    beta = h.beta
    if not (math.isfinite(alpha) and alpha > 0):
        raise NonEconomicRegionError(f"alpha = {alpha!r} is not positive")
    total = alpha + beta
    A = total ** (-1.0 / rho)
    if not (math.isfinite(A) and A > 0):
        raise NonEconomicRegionError(f"scale A = {A!r} not representable")
    return VesParams(A=A, delta=beta / total, rho=rho, mu=h.c)


def ves_to_hl(p: VesParams) -> HlForm:
    """Inverse of :func:`hl_to_ves`."""
    b = 1.0 / (1.0 + p.rho)
    c = p.mu
    denom = 1.0 - b - c
    if abs(denom) < HL_DENOM_TOL:
        raise SingularDenominatorError(
            f"1 - b - c = {denom:.3g} (mu = rho/(1+rho)): marginal product of labour is zero"
        )
    scale = p.A ** (-p.rho)
    alpha = (1.0 - p.delta) * scale
    beta = p.delta * scale
    kappa = alpha * denom / (1.0 - b)
    return HlForm(a=abs(kappa) ** (-b), b=b, c=c, beta=beta)


def hl_curve(h: HlForm, X):
    """Closed-form Y and dY/dX of the Bernoulli solution for ``h``."""
    Xa = _as_positive(X)
    b, c = h.b, h.c
    e1 = -c / b
    e2 = (b - 1.0) / b
    t = np.log(Xa)
    _check_exponent(e1 * t, "-c/b*ln(X)")
    _check_exponent(e2 * t, "(b-1)/b*ln(X)")
    z = h.alpha * np.exp(e1 * t) + h.beta * np.exp(e2 * t)
    xdz = h.alpha * e1 * np.exp(e1 * t) + h.beta * e2 * np.exp(e2 * t)
    power = b / (b - 1.0)
    y = z ** power
    dy = power * y * xdz / (z * Xa)
    return _unwrap(y, X), _unwrap(dy, X)


def bernoulli_residual(Y, dY, X, a, b, c):
    """ln Y - ln a - b ln|Y - X dY/dX| - c ln X for a candidate curve."""
    Y = np.asarray(Y, dtype=float)
    Xa = _as_positive(X)
    wage = np.abs(Y - Xa * np.asarray(dY, dtype=float))
    if np.any(wage <= 0) or np.any(Y <= 0):
        raise DomainError("log-domain error: Y - X dY/dX vanishes (non-competitive region)")
    out = np.log(Y) - math.log(a) - b * np.log(wage) - c * np.log(Xa)
    return _unwrap(out, X)


def ode_residual(h: HlForm, X):
    """Residual of ln Y = ln a + b ln(Y - X Y') + c ln X on the closed form."""
    y, dy = hl_curve(h, X)
    return bernoulli_residual(y, dy, X, h.a, h.b, h.c)
