"""
Per-group estimation, CES/VES comparison and capital aggregation.

A group is every observation sharing one grouping key (by default the
industry code).  For each group the three log-output shapes are fitted and
ranked by AIC; when wages are present the Hildebrand-Liu regressions give
mu directly as the ln(K/L) coefficient, and sigma_CES as the wage
coefficient of the two-variable regression.  A second mu estimate comes
from inverting the selected polynomial when its degree is at least three.
"""

from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import AmbiguousRootsError, InsufficientDataError, VesError
from .linearization import DegenerateFamily, LinearizationCoefficients, invert_linearization
from .production import HlForm
from .regression import (
    EXPONENTIAL,
    POWER,
    WAGE_THREE_VAR,
    WAGE_TWO_VAR,
    FitResult,
    ModelSpec,
    build_design,
    fit_model,
    select_model,
    select_polynomial_degree,
)

log = logging.getLogger(__name__)

MU_TOL = 1e-6
STATE_NAMES = {
    "TN": "Tamil Nadu",
    "KA": "Karnataka",
    "GJ": "Gujarat",
    "MH": "Maharashtra",
    "HR": "Haryana",
    "WB": "West Bengal",
}
KNOWN_STATES = frozenset(STATE_NAMES) | frozenset(STATE_NAMES.values())


@dataclass(frozen=True)
class PipelineConfig:
    models: tuple = ("polynomial", "exponential", "power")
    max_degree: int = 4
    sigma_threshold: float = 0.5
    sigma_max: float = 1.0
    mu_route: str = "wage"

    def __post_init__(self):
        bad = set(self.models) - {"polynomial", "exponential", "power"}
        if bad or not self.models:
            raise ValueError(f"models must be drawn from polynomial/exponential/power, got {self.models}")
        if self.max_degree < 1:
            raise ValueError("max_degree must be at least 1")
        if self.mu_route not in ("wage", "inversion"):
            raise ValueError("mu_route must be 'wage' or 'inversion'")
        if not (self.sigma_threshold > 0 and self.sigma_max > 0):
            raise ValueError("sigma thresholds must be positive")


@dataclass
class GroupEstimate:
    industry_code: str
    n_used: int
    n_excluded: int
    fits: dict
    best: ModelSpec
    wage_fits: dict = field(default_factory=dict)
    mu_wage_route: float = None
    mu_inversion_route: float = None
    sigma_ces: float = None
    hl: HlForm = None
    diagnostics: list = field(default_factory=list)
    exclusions: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "industry_code": self.industry_code,
            "n_used": self.n_used,
            "n_excluded": self.n_excluded,
            "exclusions": dict(sorted(self.exclusions.items())),
            "best": str(self.best),
            "fits": {str(k): v.to_dict() for k, v in sorted(self.fits.items())},
            "wage_fits": {str(k): v.to_dict() for k, v in sorted(self.wage_fits.items())},
            "mu_wage_route": self.mu_wage_route,
            "mu_inversion_route": self.mu_inversion_route,
            "sigma_ces": self.sigma_ces,
            "hl": None if self.hl is None else {
                "a": self.hl.a, "b": self.hl.b, "c": self.hl.c, "beta": self.hl.beta,
            },
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d):
        hl = d.get("hl")
        return cls(
            industry_code=d["industry_code"],
            n_used=d["n_used"],
            n_excluded=d["n_excluded"],
            fits={ModelSpec.parse(k): FitResult.from_dict(v) for k, v in d["fits"].items()},
            best=ModelSpec.parse(d["best"]),
            wage_fits={ModelSpec.parse(k): FitResult.from_dict(v) for k, v in d.get("wage_fits", {}).items()},
            mu_wage_route=d.get("mu_wage_route"),
            mu_inversion_route=d.get("mu_inversion_route"),
            sigma_ces=d.get("sigma_ces"),
            hl=None if hl is None else HlForm(hl["a"], hl["b"], hl["c"], hl["beta"]),
            diagnostics=list(d.get("diagnostics", [])),
            exclusions=dict(d.get("exclusions", {})),
        )


def _recover_beta(a, b, c, rows):
    """Integration constant matching the closed form to the geometric-mean point."""
    X = np.array([r.X for r in rows])
    Y = np.array([r.Y for r in rows])
    x_bar = math.exp(float(np.mean(np.log(X))))
    y_bar = math.exp(float(np.mean(np.log(Y))))
    alpha = a ** (-1.0 / b) * abs((1.0 - b) / (1.0 - b - c))
    e2 = (b - 1.0) / b
    return (y_bar ** e2 - alpha * x_bar ** (-c / b)) / x_bar ** e2


def _wage_route(rows, est):
    if not any(getattr(r, "W", None) is not None for r in rows):
        est.diagnostics.append("wage-route skipped: no wage data")
        return
    try:
        three = fit_model(WAGE_THREE_VAR, rows)
        est.wage_fits[WAGE_THREE_VAR] = three
        ln_a, b, c = three.estimates()
        est.mu_wage_route = float(c)
        beta = _recover_beta(math.exp(ln_a), b, c, rows)
        est.hl = HlForm(math.exp(ln_a), float(b), float(c), float(beta))
    except VesError as exc:
        est.diagnostics.append(f"wage_three_var: {exc}")
    try:
        two = fit_model(WAGE_TWO_VAR, rows)
        est.wage_fits[WAGE_TWO_VAR] = two
        est.sigma_ces = float(two.estimates()[1])
    except VesError as exc:
        est.diagnostics.append(f"wage_two_var: {exc}")


def _inversion_route(fit, est):
    if fit.model.degree < 3:
        est.diagnostics.append(f"inversion skipped: selected {fit.model} has degree < 3")
        return
    b = fit.estimates()
    try:
        out = invert_linearization(LinearizationCoefficients(b[0], tuple(b[1:])))
    except AmbiguousRootsError as exc:
        est.diagnostics.append(f"inversion ambiguous: {len(exc.roots)} admissible roots")
        return
    except (VesError, ValueError) as exc:
        est.diagnostics.append(f"inversion failed: {exc}")
        return
    if isinstance(out, DegenerateFamily):
        est.diagnostics.append("inversion degenerate: mu = rho/(1+rho) family, mu not identified")
        return
    est.mu_inversion_route = out.mu


def estimate_group(rows, config=PipelineConfig(), key=None):
    """Fit every configured shape for one group and extract mu and sigma_CES."""
    rows = list(rows)
    key = key if key is not None else (rows[0].industry_code if rows else "")
    if not rows:
        raise InsufficientDataError(f"group {key}: no observations")
    base = build_design(POWER, rows)
    usable = [rows[i] for i in base.kept]
    fits, notes = {}, []
    for kind in config.models:
        try:
            if kind == "polynomial":
                f = select_polynomial_degree(usable, config.max_degree)
            else:
                f = fit_model(EXPONENTIAL if kind == "exponential" else POWER, usable)
        except VesError as exc:
            notes.append(f"{kind}: {exc}")
            continue
        fits[f.model] = f
        notes.extend(f.notes)
    if not fits:
        raise InsufficientDataError(f"group {key}: no model could be fitted ({'; '.join(notes)})")
    best = select_model(list(fits.values()))
    est = GroupEstimate(
        industry_code=key,
        n_used=len(usable),
        n_excluded=len(rows) - len(usable),
        fits=fits,
        best=best.model,
        diagnostics=notes,
        exclusions=dict(base.excluded),
    )
    _wage_route(usable, est)
    poly = next((f for m, f in fits.items() if m.kind == "polynomial"), None)
    if poly is not None:
        _inversion_route(poly, est)
    log.info("group %s: n=%d best=%s mu_wage=%s sigma=%s", key, est.n_used, est.best,
             est.mu_wage_route, est.sigma_ces)
    return est


def group_rows(rows, by="industry_code"):
    groups = defaultdict(list)
    for r in rows:
        groups[str(getattr(r, by))].append(r)
    return dict(sorted(groups.items()))


@dataclass
class BatchResult:
    estimates: list
    failures: list

    @property
    def ok(self):
        return not self.failures


def estimate_all(rows, config=PipelineConfig(), by="industry_code", jobs=1):
    """
    Estimate every group; failures are collected rather than raised.

    Results are ordered by group key regardless of ``jobs``.
    """
    groups = group_rows(rows, by)

    def work(item):
        key, grp = item
        try:
            return key, estimate_group(grp, config, key=key), None
        except VesError as exc:
            log.warning("group %s failed: %s", key, exc)
            return key, None, {"group": key, "code": exc.code, "error": str(exc)}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, groups.items()))
    else:
        results = [work(item) for item in groups.items()]
    results.sort(key=lambda r: r[0])
    return BatchResult([e for _, e, _ in results if e], [f for _, _, f in results if f])


@dataclass(frozen=True)
class IndustryComparison:
    industry_code: str
    sigma_ces: float
    mu_ves: float
    theoretically_reasonable: bool
    priority: bool

    def to_dict(self):
        return {
            "industry_code": self.industry_code,
            "sigma_ces": self.sigma_ces,
            "mu_ves": self.mu_ves,
            "reasonable": self.theoretically_reasonable,
            "priority": self.priority,
        }


def _pick_mu(est, route):
    order = ("mu_wage_route", "mu_inversion_route")
    if route == "inversion":
        order = order[::-1]
    for name in order:
        value = getattr(est, name)
        if value is not None and math.isfinite(value):
            return value
    return None


def compare_groups(estimates, config=PipelineConfig()):
    """
    Place each group on the sigma_CES / mu plane and flag priority groups.

    A group is theoretically reasonable when 0 < sigma <= sigma_max, and a
    priority group when it is also right of sigma_threshold with mu > 0.
    """
    out = []
    for est in estimates:
        sigma = est.sigma_ces
        mu = _pick_mu(est, config.mu_route)
        if sigma is not None and not math.isfinite(sigma):
            sigma = None
        reasonable = sigma is not None and 0 < sigma <= config.sigma_max
        priority = (reasonable and mu is not None and sigma > config.sigma_threshold and mu > 0)
        out.append(IndustryComparison(est.industry_code, sigma, mu, reasonable, priority))
    out.sort(key=lambda c: (c.sigma_ces is None, -(c.sigma_ces or 0.0), c.industry_code))
    return out


@dataclass(frozen=True)
class CapitalCell:
    state: str
    industry_code: str
    invested_capital: float


@dataclass
class CapitalReport:
    cells: list
    excluded_years: int = 0
    unknown_states: Counter = field(default_factory=Counter)


def capital_by_state(rows, year=None):
    """Total capital per (state, industry code), optionally for one year."""
    totals = defaultdict(float)
    report = CapitalReport([])
    for r in rows:
        if year is not None and r.year != year:
            report.excluded_years += 1
            continue
        if r.state not in KNOWN_STATES:
            report.unknown_states[r.state] += 1
        totals[(r.state, r.industry_code)] += r.capital
    if report.unknown_states:
        log.warning("%d rows with unrecognised state codes: %s",
                    sum(report.unknown_states.values()), ", ".join(sorted(report.unknown_states)))
    report.cells = [CapitalCell(s, i, v) for (s, i), v in sorted(totals.items())]
    return report


def mu_interpretation(mu, tol=MU_TOL):
    if not math.isfinite(mu):
        raise ValueError(f"mu must be finite, got {mu!r}")
    if mu > tol:
        return "capital-intensive-production-indicated"
    if mu < -tol:
        return "labor-intensive-indicated"
    return "ces-equivalent"
