"""
Taylor expansion of ln Y in ln(K/L) about K/L = 1, and its inversion.

With t = ln X and q = 1 - delta,

    ln Y = ln A + t - G(s t) / rho,   G(u) = ln(1 - q + q e^u)

G is the cumulant generating function of a Bernoulli(q) variable, so its
k-th Taylor coefficient is kappa_k(q) / k!, where the Bernoulli cumulants
obey kappa_1 = q and kappa_{k+1} = q (1 - q) d kappa_k / dq.  Hence

    phi_1 = 1 - s kappa_1 / rho,   phi_k = -s^k kappa_k / (rho k!)  (k >= 2)

For mu = 0 this is the Kmenta approximation: phi_1 = delta,
phi_2 = -rho delta (1 - delta) / 2.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np
from numpy.polynomial import Polynomial

from .errors import AmbiguousRootsError, DomainError, NonInvertibleError
from .production import RHO_TOL, VesParams

MAX_DEGREE = 6

DAMPING = 0.5
MAX_ITER = 100
RESIDUAL_TOL = 1e-10
DEDUP_TOL = 1e-8
DEGENERATE_TOL = 1e-12
START_DELTAS = np.linspace(0.05, 0.95, 7)
START_RHOS = np.geomspace(0.1, 3.0, 7)
# Admissible roots must keep mu >= 0 up to this slack.
MU_SLACK = 1e-9


def _bernoulli_cumulants(degree):
    polys = [Polynomial([0.0, 1.0])]
    spread = Polynomial([0.0, 1.0, -1.0])
    while len(polys) < degree:
        polys.append(spread * polys[-1].deriv())
    return polys


_CUMULANTS = _bernoulli_cumulants(MAX_DEGREE)


@dataclass(frozen=True)
class LinearizationCoefficients:
    """Intercept ``beta0`` and coefficients ``phi`` on (ln X)^1 .. (ln X)^d."""

    beta0: float
    phi: tuple

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        if not self.phi:
            raise ValueError("at least one polynomial coefficient is required")
        if not all(math.isfinite(v) for v in (self.beta0, *self.phi)):
            raise ValueError("coefficients must be finite")

    @property
    def degree(self):
        return len(self.phi)

    def __call__(self, t):
        """Evaluate the polynomial at t = ln X."""
        return Polynomial([self.beta0, *self.phi])(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class DegenerateFamily:
    """
    Result of inverting coefficients with phi_2 = phi_3 = 0.

    The data then pin down only A: ln Y = ln A + ln X holds for every
    (delta, rho) with mu = rho / (1 + rho).
    """

    A: float

    @staticmethod
    def mu_for(rho):
        return rho / (1.0 + rho)

    def member(self, delta, rho):
        return VesParams(self.A, delta, rho, self.mu_for(rho))


def linearize_ves(p: VesParams, degree: int = 3) -> LinearizationCoefficients:
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie in 1..{MAX_DEGREE}, got {degree}")
    if abs(p.rho) < RHO_TOL:
        raise DomainError("rho inside the Cobb-Douglas tolerance")
    q = 1.0 - p.delta
    s = p.s
    phi = []
    for k in range(1, degree + 1):
        kappa = _CUMULANTS[k - 1](q)
        term = -(s ** k) * kappa / (p.rho * math.factorial(k))
        phi.append(1.0 + term if k == 1 else term)
    return LinearizationCoefficients(math.log(p.A), tuple(phi))


def _forward(delta, rho, mu):
    q = 1.0 - delta
    s = rho - mu * (1.0 + rho)
    h = delta * q * (2.0 * delta - 1.0)
    return np.array([
        1.0 - q * s / rho,
        -delta * q * s ** 2 / (2.0 * rho),
        -h * s ** 3 / (6.0 * rho),
    ])


def _jacobian(delta, rho, mu):
    q = 1.0 - delta
    s = rho - mu * (1.0 + rho)
    h = delta * q * (2.0 * delta - 1.0)
    dh = -6.0 * delta ** 2 + 6.0 * delta - 1.0
    # rows: phi1, phi2, phi3; partials wrt (delta, explicit rho, s)
    d_delta = np.array([s / rho, -(1.0 - 2.0 * delta) * s ** 2 / (2.0 * rho), -dh * s ** 3 / (6.0 * rho)])
    d_rho = np.array([q * s / rho ** 2, delta * q * s ** 2 / (2.0 * rho ** 2), h * s ** 3 / (6.0 * rho ** 2)])
    d_s = np.array([-q / rho, -delta * q * s / rho, -h * s ** 2 / (2.0 * rho)])
    return np.column_stack([d_delta, d_rho + d_s * (1.0 - mu), d_s * -(1.0 + rho)])


def _admissible(x):
    delta, rho, mu = x
    return 0 < delta < 1 and rho > RHO_TOL and mu >= -MU_SLACK and np.all(np.isfinite(x))


def _newton(target, x0):
    x = np.array(x0, dtype=float)
    res = _forward(*x) - target
    norm = np.linalg.norm(res)
    for _ in range(MAX_ITER):
        if norm <= RESIDUAL_TOL:
            break
        try:
            step = np.linalg.solve(_jacobian(*x), -res)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-10:
            trial = x + lam * step
            if trial[1] > 0 and 0 < trial[0] < 1:
                trial_res = _forward(*trial) - target
                trial_norm = np.linalg.norm(trial_res)
                if np.isfinite(trial_norm) and trial_norm < norm:
                    x, res, norm = trial, trial_res, trial_norm
                    break
            lam *= DAMPING
        else:
            break
    return x, norm


def _start_mu(delta, rho, phi1):
    s = rho * (1.0 - phi1) / (1.0 - delta)
    return (rho - s) / (1.0 + rho)


def invert_linearization(c: LinearizationCoefficients):
    """
    Recover (A, delta, rho, mu) from at least four expansion coefficients.

    Damped Newton is run from every point of a (delta, rho) start grid; the
    admissible roots are de-duplicated and must be unique.  Coefficients
    with phi_2 = phi_3 = 0 return a :class:`DegenerateFamily`.
    """
    if c.degree < 3:
        raise ValueError("inversion needs beta0 and phi_1..phi_3 (degree >= 3)")
    A = math.exp(c.beta0)
    phi1, phi2, phi3 = c.phi[:3]
    if abs(phi2) < DEGENERATE_TOL and abs(phi3) < DEGENERATE_TOL:
        if abs(phi1 - 1.0) > 1e-8:
            raise NonInvertibleError(
                f"phi_2 = phi_3 = 0 requires phi_1 = 1, got {phi1!r}", abs(phi1 - 1.0)
            )
        return DegenerateFamily(A)

    target = np.array([phi1, phi2, phi3])
    best = math.inf
    roots = []
    for delta0, rho0 in itertools.product(START_DELTAS, START_RHOS):
        x, norm = _newton(target, (delta0, rho0, _start_mu(delta0, rho0, phi1)))
        best = min(best, norm)
        if norm > RESIDUAL_TOL or not _admissible(x):
            continue
        if x[2] < 0:
            x[2] = 0.0
        if not any(np.max(np.abs(x - r)) < DEDUP_TOL for r, _ in roots):
            roots.append((x, norm))

    if not roots:
        raise NonInvertibleError(
            f"no admissible root; best residual {best:.3g}", best
        )
    roots.sort(key=lambda item: (item[1], *item[0]))
    found = [VesParams(A, *(float(v) for v in r)) for r, _ in roots]
    if len(found) > 1:
        raise AmbiguousRootsError(f"{len(found)} admissible roots", found)
    return found[0]
