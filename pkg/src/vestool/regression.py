"""
Gaussian least squares for the log-output models and their fit statistics.

Every model regresses ln(V/L) on an intercept plus model-specific columns:

==============  =====================================
polynomial(d)   (ln X)^1 .. (ln X)^d
exponential     X
power           ln X
wage_three_var  ln W, ln X
wage_two_var    ln W
==============  =====================================

Information criteria count the error variance as a parameter, so with p
coefficients AIC = 2 (p + 1) - 2 logLik.
"""

from collections import Counter
from dataclasses import dataclass, field
import math
import re
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from .errors import (
    IncomparableFitsError,
    InsufficientDataError,
    RankDeficiencyError,
    UndefinedSRMSEError,
)

MAX_POLY_DEGREE = 6
RANK_TOL = 1e-10
AIC_TIE_TOL = 1e-9
# RMS residual below this fraction of the response scale counts as a perfect fit.
PERFECT_FIT_TOL = 1e-12

KINDS = ("polynomial", "exponential", "power", "wage_three_var", "wage_two_var")
WAGE_KINDS = ("wage_three_var", "wage_two_var")


@dataclass(frozen=True, order=True)
class ModelSpec:
    kind: str
    degree: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "polynomial":
            if not 1 <= self.degree <= MAX_POLY_DEGREE:
                raise ValueError(f"polynomial degree must lie in 1..{MAX_POLY_DEGREE}")
        elif self.degree:
            raise ValueError(f"{self.kind} takes no degree")

    def __str__(self):
        return f"polynomial({self.degree})" if self.kind == "polynomial" else self.kind

    @classmethod
    def parse(cls, text):
        m = re.fullmatch(r"\s*polynomial\s*\(\s*(\d+)\s*\)\s*", text)
        if m:
            return cls("polynomial", int(m.group(1)))
        return cls(text.strip())

    @property
    def uses_wages(self):
        return self.kind in WAGE_KINDS

    @property
    def n_coefficients(self):
        return {
            "polynomial": self.degree + 1,
            "wage_three_var": 3,
        }.get(self.kind, 2)

    def column_names(self):
        if self.kind == "polynomial":
            return ["(Intercept)"] + [f"(log X1)^{k}" for k in range(1, self.degree + 1)]
        return ["(Intercept)"] + {
            "exponential": ["(X1)"],
            "power": ["log(X1)"],
            "wage_three_var": ["log(W)", "log(X1)"],
            "wage_two_var": ["log(W)"],
        }[self.kind]


def polynomial(degree):
    return ModelSpec("polynomial", degree)


EXPONENTIAL = ModelSpec("exponential")
POWER = ModelSpec("power")
WAGE_THREE_VAR = ModelSpec("wage_three_var")
WAGE_TWO_VAR = ModelSpec("wage_two_var")


class Design(NamedTuple):
    matrix: np.ndarray
    response: np.ndarray
    names: list
    excluded: Counter
    kept: np.ndarray


def _positive(value):
    return value is not None and math.isfinite(value) and value > 0


def build_design(spec: ModelSpec, rows) -> Design:
    """
    Assemble the design matrix and the ln(V/L) response for ``spec``.

    ``rows`` are objects exposing ``X`` (K/L), ``Y`` (V/L) and, for the wage
    models, ``W``.  Rows that would put a non-positive value under a log are
    dropped and counted per rule in ``excluded``.
    """
    excluded = Counter()
    cols, resp, kept = [], [], []
    for i, row in enumerate(rows):
        X, Y = row.X, row.Y
        if not _positive(Y):
            excluded["nonpositive-output"] += 1
            continue
        if not _positive(X):
            excluded["nonpositive-capital-intensity"] += 1
            continue
        if spec.uses_wages:
            W = getattr(row, "W", None)
            if W is None:
                excluded["missing-wage"] += 1
                continue
            if not _positive(W):
                excluded["nonpositive-wage"] += 1
                continue
        t = math.log(X)
        if spec.kind == "polynomial":
            regs = [t ** k for k in range(1, spec.degree + 1)]
        elif spec.kind == "exponential":
            regs = [X]
        elif spec.kind == "power":
            regs = [t]
        elif spec.kind == "wage_three_var":
            regs = [math.log(W), t]
        else:
            regs = [math.log(W)]
        cols.append([1.0, *regs])
        resp.append(math.log(Y))
        kept.append(i)
    p = spec.n_coefficients
    if len(resp) <= p:
        raise InsufficientDataError(
            f"{spec}: {len(resp)} usable rows for {p} coefficients"
        )
    return Design(np.array(cols), np.array(resp), spec.column_names(), excluded, np.array(kept))


def t_pvalue(t, df):
    """Two-sided Student-t p-value via the regularised incomplete beta function."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = df / (df + t * t)
    return betainc(0.5 * df, 0.5, x)


def stars(p_value):
    if not p_value < 0.05:
        return ""
    if p_value < 0.001:
        return "***"
    return "**" if p_value < 0.01 else "*"


@dataclass(frozen=True)
class OlsResult:
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    rss: float
    df_resid: int


def fit_ols(design, response, names=None) -> OlsResult:
    """Least squares through a QR decomposition, with exact-t inference."""
    Xm = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    n, p = Xm.shape
    names = names or [f"x{j}" for j in range(p)]
    if n <= p:
        raise InsufficientDataError(f"{n} observations for {p} coefficients")
    Q, R = np.linalg.qr(Xm)
    diag = np.abs(np.diag(R))
    floor = RANK_TOL * max(diag.max(), np.finfo(float).tiny)
    for j in range(p):
        if diag[j] <= floor:
            raise RankDeficiencyError(
                f"design column {names[j]!r} is linearly dependent on earlier columns",
                names[j],
            )
    beta = solve_triangular(R, Q.T @ y)
    fitted = Xm @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    df = n - p
    r_inv = solve_triangular(R, np.eye(p))
    cov_unscaled = r_inv @ r_inv.T
    se = np.sqrt(rss / df * np.diag(cov_unscaled))
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = beta / se
    pv = t_pvalue(tv, df)
    return OlsResult(beta, se, tv, pv, resid, fitted, rss, df)


class Criteria(NamedTuple):
    log_likelihood: float
    aic: float
    bic: float


def information_criteria(rss, n, p) -> Criteria:
    """
    Gaussian log-likelihood, AIC and BIC with the variance counted as a parameter.

    ``rss == 0`` is a perfect fit: the criteria are returned as infinities
    rather than as finite numbers.
    """
    if not n > p >= 1:
        raise ValueError(f"need n > p >= 1, got n={n}, p={p}")
    if rss < 0:
        raise ValueError("rss must be non-negative")
    if rss == 0:
        return Criteria(math.inf, -math.inf, -math.inf)
    ll = -0.5 * n * (math.log(2 * math.pi) + math.log(rss / n) + 1.0)
    k = p + 1
    return Criteria(ll, 2 * k - 2 * ll, k * math.log(n) - 2 * ll)


def srmse_band(value):
    if value < 0.5:
        return "good"
    return "decent" if value <= 1.0 else "bad"


def srmse(residuals, response):
    """RMSE scaled by the sample standard deviation of the response."""
    residuals = np.asarray(residuals, dtype=float)
    response = np.asarray(response, dtype=float)
    if response.size < 2:
        raise UndefinedSRMSEError("SRMSE needs at least two observations")
    sd = float(np.std(response, ddof=1))
    if sd == 0:
        raise UndefinedSRMSEError("response has zero variance")
    value = math.sqrt(float(np.mean(residuals ** 2))) / sd
    return value, srmse_band(value)


@dataclass(frozen=True)
class Coefficient:
    name: str
    estimate: float
    std_error: float
    p_value: float

    @property
    def stars(self):
        return stars(self.p_value)

    def to_dict(self):
        return {
            "name": self.name,
            "estimate": _num(self.estimate),
            "std_error": _num(self.std_error),
            "p_value": _num(self.p_value),
            "stars": self.stars,
        }


def _num(x):
    """JSON-safe float: infinities and NaN become explicit strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _from_num(x):
    return float(x) if x is not None else math.nan


@dataclass(frozen=True)
class FitResult:
    model: ModelSpec
    coefficients: tuple
    n: int
    deviance: float
    log_likelihood: float
    aic: float
    bic: float
    r2: float
    adj_r2: float
    srmse: float
    srmse_band: str
    perfect_fit: bool = False
    notes: tuple = field(default=())

    @property
    def p(self):
        return len(self.coefficients)

    def estimates(self):
        return np.array([c.estimate for c in self.coefficients])

    def __getitem__(self, name):
        for c in self.coefficients:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "model": str(self.model),
            "coefficients": [c.to_dict() for c in self.coefficients],
            "n": self.n,
            "p": self.p,
            "deviance": _num(self.deviance),
            "log_likelihood": _num(self.log_likelihood),
            "aic": _num(self.aic),
            "bic": _num(self.bic),
            "r2": _num(self.r2),
            "adj_r2": _num(self.adj_r2),
            "srmse": _num(self.srmse),
            "srmse_band": self.srmse_band,
            "perfect_fit": self.perfect_fit,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            model=ModelSpec.parse(d["model"]),
            coefficients=tuple(
                Coefficient(c["name"], _from_num(c["estimate"]), _from_num(c["std_error"]),
                            _from_num(c["p_value"]))
                for c in d["coefficients"]
            ),
            n=int(d["n"]),
            deviance=_from_num(d["deviance"]),
            log_likelihood=_from_num(d["log_likelihood"]),
            aic=_from_num(d["aic"]),
            bic=_from_num(d["bic"]),
            r2=_from_num(d["r2"]),
            adj_r2=_from_num(d["adj_r2"]),
            srmse=_from_num(d["srmse"]),
            srmse_band=d["srmse_band"],
            perfect_fit=bool(d.get("perfect_fit", False)),
            notes=tuple(d.get("notes", ())),
        )


def is_perfect_fit(rss, response):
    n = len(response)
    scale = max(1.0, float(np.max(np.abs(response))))
    return rss <= n * (PERFECT_FIT_TOL * scale) ** 2


def fit_model(spec: ModelSpec, rows, notes=()) -> FitResult:
    """Build the design for ``spec``, fit it and compute the full statistics battery."""
    design = build_design(spec, rows)
    ols = fit_ols(design.matrix, design.response, design.names)
    y = design.response
    n, p = design.matrix.shape
    perfect = is_perfect_fit(ols.rss, y)
    crit = information_criteria(0.0 if perfect else ols.rss, n, p)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ols.rss / tss if tss > 0 else math.nan
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p)
    value, band = srmse(ols.residuals, y)
    coefs = tuple(
        Coefficient(name, float(b), float(se), float(pv))
        for name, b, se, pv in zip(design.names, ols.coefficients, ols.std_errors, ols.p_values)
    )
    return FitResult(
        model=spec,
        coefficients=coefs,
        n=n,
        deviance=ols.rss,
        log_likelihood=crit.log_likelihood,
        aic=crit.aic,
        bic=crit.bic,
        r2=r2,
        adj_r2=adj,
        srmse=value,
        srmse_band=band,
        perfect_fit=perfect,
        notes=tuple(notes),
    )


def _aic_tied(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) < AIC_TIE_TOL


def _better(cand, best):
    if _aic_tied(cand.aic, best.aic):
        return cand.p < best.p
    return cand.aic < best.aic


def select_model(fits):
    """Minimum-AIC fit; ties go to fewer coefficients, then to declaration order."""
    fits = list(fits)
    if not fits:
        raise ValueError("no fits to select from")
    if len({f.n for f in fits}) > 1:
        raise IncomparableFitsError(
            "fits use different observation counts: " + ", ".join(f"{f.model}={f.n}" for f in fits)
        )
    best = fits[0]
    for f in fits[1:]:
        if _better(f, best):
            best = f
    return best


def select_polynomial_degree(rows, max_degree):
    """
    Fit polynomial degrees 1..max_degree and keep the minimum-AIC one.

    Degrees the data cannot support (too few rows, rank deficiency) are
    skipped; the skips are recorded in the returned fit's ``notes``.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    rows = list(rows)
    fits, notes = [], []
    for d in range(1, min(max_degree, MAX_POLY_DEGREE) + 1):
        try:
            fits.append(fit_model(polynomial(d), rows))
        except (InsufficientDataError, RankDeficiencyError) as exc:
            notes.append(f"polynomial({d}) skipped: {exc}")
    if not fits:
        raise InsufficientDataError("; ".join(notes) or "no polynomial degree could be fitted")
    best = select_model(fits)
    if notes:
        best = FitResult(**{**best.__dict__, "notes": best.notes + tuple(notes)})
    return best
