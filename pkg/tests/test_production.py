import itertools
import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vestool.errors import (
    DegenerateCurvatureError,
    DomainError,
    SingularDenominatorError,
    SingularityError,
)
from vestool.production import (
    CesParams,
    HlForm,
    NegativeMuWarning,
    NonCompetitiveWageWarning,
    VesParams,
    bernoulli_residual,
    derivatives,
    elasticity_of_substitution,
    eval_ces,
    eval_ves,
    eval_ves_intensive,
    factor_prices,
    hl_curve,
    hl_to_ves,
    ode_residual,
    ves_to_hl,
)

GRID = list(itertools.product([0.3, 0.5, 0.7], [0.5, 1.0, 2.0], [0.0, 0.5, 1.0, 3.17]))
XS = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
# mu = rho/(1+rho) collapses the technology to Y = A X (zero wage, zero curvature)
NONDEGENERATE = [g for g in GRID if abs(g[2] - g[1] / (1 + g[1])) > 1e-12]


@pytest.fixture(autouse=True)
def _quiet_wage_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonCompetitiveWageWarning)
        yield


def mp_intensive(p, X):
    """Direct high-precision evaluation of A [d X^-rho + (1-d) X^-mu(1+rho)]^(-1/rho)."""
    A, d, rho, mu = (mp.mpf(v) for v in p.as_tuple())
    X = mp.mpf(X)
    return A * (d * X ** -rho + (1 - d) * X ** (-mu * (1 + rho))) ** (-1 / rho)


params = st.builds(
    VesParams,
    A=st.floats(0.1, 10),
    delta=st.floats(0.05, 0.95),
    rho=st.floats(0.05, 4),
    mu=st.floats(0, 4),
)


class TestEvaluation:
    def test_unit_intensity_gives_A_times_L(self):
        assert eval_ves(VesParams(1, 0.5, 1, 0.7), 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
        assert eval_ves_intensive(VesParams(2.5, 0.3, 0.4, 1.2), 1.0) == pytest.approx(2.5, rel=1e-15)

    def test_direct_substitution(self):
        # bracket = 0.5 * 4**-1 + 0.5 * 4**-2 = 0.15625
        p = VesParams(1, 0.5, 1, 1)
        assert eval_ves(p, 4.0, 1.0) == pytest.approx(6.4, rel=1e-14)
        assert eval_ves_intensive(p, 4.0) == pytest.approx(6.4, rel=1e-14)

    def test_intensive_is_ves_at_unit_labor(self):
        p = VesParams(1.7, 0.4, 0.8, 0.6)
        for X in XS:
            assert eval_ves(p, X, 1.0) == eval_ves_intensive(p, X)

    def test_mu_zero_matches_ces(self):
        assert eval_ves(VesParams(2, 0.3, 0.5, 0), 8.0, 2.0) == pytest.approx(
            eval_ces(CesParams(2, 0.3, 0.5), 8.0, 2.0), rel=1e-14
        )

    def test_ces_examples(self):
        p = CesParams(1, 0.5, 1)
        for c in (0.1, 1.0, 7.5):
            assert eval_ces(p, c, c) == pytest.approx(c, rel=1e-14)
        assert eval_ces(p, 4.0, 1.0) == pytest.approx(1.6, rel=1e-14)

    def test_against_mpmath(self):
        for d, rho, mu in GRID:
            p = VesParams(1.3, d, rho, mu)
            for X in XS:
                assert eval_ves_intensive(p, X) == pytest.approx(float(mp_intensive(p, X)), rel=1e-13)

    def test_vectorised(self):
        p = VesParams(1, 0.5, 1, 1)
        out = eval_ves_intensive(p, np.array([1.0, 4.0]))
        np.testing.assert_allclose(out, [1.0, 6.4], rtol=1e-14)

    @given(params, st.floats(0.01, 100), st.floats(0.01, 100), st.sampled_from([0.5, 2.0, 10.0]))
    @settings(max_examples=200, deadline=None)
    def test_homogeneity(self, p, K, L, lam):
        assert eval_ves(p, lam * K, lam * L) == pytest.approx(lam * eval_ves(p, K, L), rel=1e-12)

    @given(st.floats(0.1, 10), st.floats(0.05, 0.95), st.floats(0.05, 4))
    @settings(max_examples=100, deadline=None)
    def test_ces_reduction(self, A, delta, rho):
        ves = VesParams(A, delta, rho, 0.0)
        ces = CesParams(A, delta, rho)
        K, L = np.meshgrid(np.geomspace(0.2, 20, 6), np.geomspace(0.5, 50, 6))
        np.testing.assert_allclose(eval_ves(ves, K, L), eval_ces(ces, K, L), rtol=1e-12)


class TestValidation:
    @pytest.mark.parametrize("rho", [0.0, 1e-9, -5e-7])
    def test_cobb_douglas_limit(self, rho):
        with pytest.raises(SingularityError):
            VesParams(1, 0.5, rho, 0.2)
        with pytest.raises(SingularityError):
            CesParams(1, 0.5, rho)

    @pytest.mark.parametrize("kw", [
        dict(A=0.0), dict(A=-1.0), dict(delta=0.0), dict(delta=1.0), dict(rho=-1.0), dict(rho=-2.0),
    ])
    def test_bounds(self, kw):
        base = dict(A=1.0, delta=0.5, rho=1.0, mu=0.0)
        with pytest.raises(DomainError):
            VesParams(**{**base, **kw})

    def test_negative_mu_warns_but_constructs(self):
        with pytest.warns(NegativeMuWarning):
            p = VesParams(1, 0.5, 1, -0.2)
        assert p.mu == -0.2

    def test_overflow_names_exponent(self):
        with pytest.raises(DomainError, match="rho"):
            eval_ves_intensive(VesParams(1, 0.5, 300, 0), 1e-10)

    @pytest.mark.parametrize("X", [0.0, -1.0, math.inf, math.nan])
    def test_bad_intensity(self, X):
        with pytest.raises(DomainError):
            eval_ves_intensive(VesParams(1, 0.5, 1, 0), X)


class TestFactorPrices:
    def test_ces_hand_values(self):
        # Y = (0.5/X + 0.5)^-1, Y' = 0.5 X^-2 Y^2 -> at X = 1: Y = 1, r = 0.5, W = 0.5
        W, r = factor_prices(VesParams(1, 0.5, 1, 0), 1.0)
        assert W == pytest.approx(0.5, rel=1e-15)
        assert r == pytest.approx(0.5, rel=1e-15)

    @given(params, st.floats(0.05, 20))
    @settings(max_examples=200, deadline=None)
    def test_euler(self, p, X):
        W, r = factor_prices(p, X)
        Y = eval_ves_intensive(p, X)
        assert abs(W + r * X - Y) <= 1e-10 * Y

    @pytest.mark.parametrize("d,rho,mu", GRID)
    def test_gradient_against_central_differences(self, d, rho, mu):
        p = VesParams(1.3, d, rho, mu)
        for X in XS:
            h = 1e-5 * X
            fd = (eval_ves_intensive(p, X + h) - eval_ves_intensive(p, X - h)) / (2 * h)
            _, r = factor_prices(p, X)
            assert r == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("d,rho,mu", NONDEGENERATE)
    def test_second_derivative(self, d, rho, mu):
        # five-point central stencil; the three-point one is roundoff-limited where f'' << f/X^2
        p = VesParams(1.3, d, rho, mu)
        f = lambda x: eval_ves_intensive(p, x)
        for X in XS:
            h = 1e-2 * X
            fd = (-f(X + 2 * h) + 16 * f(X + h) - 30 * f(X) + 16 * f(X - h) - f(X - 2 * h)) / (12 * h * h)
            assert derivatives(p, X).f2 == pytest.approx(fd, rel=1e-4)

    @pytest.mark.parametrize("d,rho,mu", NONDEGENERATE)
    def test_second_derivative_mpmath(self, d, rho, mu):
        p = VesParams(1.3, d, rho, mu)
        mp.mp.dps = 40
        for X in XS:
            oracle = float(mp.diff(lambda x: mp_intensive(p, x), mp.mpf(X), 2))
            assert derivatives(p, X).f2 == pytest.approx(oracle, rel=1e-8)

    def test_negative_wage_is_flagged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", NonCompetitiveWageWarning)
            with pytest.raises(NonCompetitiveWageWarning):
                factor_prices(VesParams(1, 0.5, 1, 3.17), 2.0)

    def test_wage_sign_follows_mu_threshold(self):
        # labour share is s q / rho, positive iff mu < rho / (1 + rho)
        assert factor_prices(VesParams(1, 0.5, 1, 0.4), 2.0).competitive
        assert not factor_prices(VesParams(1, 0.5, 1, 0.6), 2.0).competitive


class TestElasticity:
    def test_ces_constant(self):
        for X in (0.1, 1.0, 10.0):
            assert elasticity_of_substitution(VesParams(3, 0.2, 1, 0), X) == pytest.approx(0.5, rel=1e-14)
        s1 = elasticity_of_substitution(VesParams(1, 0.4, 0.25, 0), 1.0)
        s10 = elasticity_of_substitution(VesParams(1, 0.4, 0.25, 0), 10.0)
        assert s1 == pytest.approx(0.8, rel=1e-14)
        assert s10 == pytest.approx(0.8, rel=1e-14)

    def test_against_mpmath_differentiation(self):
        # Hand value: at X = 2, q = 1/3, capital share 4/3 -> sigma = 2 exactly.
        p = VesParams(1, 0.5, 1, 1)
        mp.mp.dps = 40
        f = lambda x: mp_intensive(p, x)
        X = mp.mpf(2)
        f0, f1, f2 = f(X), mp.diff(f, X, 1), mp.diff(f, X, 2)
        oracle = float(-f1 * (f0 - X * f1) / (X * f0 * f2))
        assert oracle == pytest.approx(2.0, rel=1e-20)
        assert elasticity_of_substitution(p, 2.0) == pytest.approx(oracle, rel=1e-12)

    def test_varies_when_mu_positive(self):
        p = VesParams(1, 0.5, 1, 1)
        assert abs(elasticity_of_substitution(p, 0.5) - elasticity_of_substitution(p, 2.0)) > 1e-6

    def test_degenerate_curvature(self):
        # mu = rho/(1+rho) makes Y = A X, so f'' = 0
        with pytest.raises(DegenerateCurvatureError):
            elasticity_of_substitution(VesParams(1, 0.5, 1, 0.5), 2.0)


class TestConversions:
    def test_ces_case(self):
        p = hl_to_ves(HlForm(a=1.0, b=0.5, c=0.0, beta=0.5))
        assert p.rho == pytest.approx(1.0, rel=1e-15)
        assert p.mu == 0.0

    def test_industry_274_mu(self):
        # the mu reported for industry group 274
        assert hl_to_ves(HlForm(a=1.0, b=0.5, c=3.17, beta=0.5)).mu == 3.17

    def test_ves_to_hl_hand_algebra(self):
        h = ves_to_hl(VesParams(1, 0.5, 1, 0))
        assert (h.b, h.c, h.beta) == (0.5, 0.0, 0.5)
        # alpha = 0.5, kappa = alpha * (1-b-c)/(1-b) = 0.5, a = 0.5^-0.5
        assert h.a == pytest.approx(math.sqrt(2.0), rel=1e-15)

    @given(params)
    @settings(max_examples=300, deadline=None)
    def test_round_trip(self, p):
        try:
            h = ves_to_hl(p)
        except SingularDenominatorError:
            return
        assert h.c == p.mu
        back = hl_to_ves(h)
        for x, y in zip(back.as_tuple(), p.as_tuple()):
            assert x == pytest.approx(y, rel=1e-12, abs=1e-12)
        again = ves_to_hl(back)
        for x, y in zip((again.a, again.b, again.c, again.beta), (h.a, h.b, h.c, h.beta)):
            assert x == pytest.approx(y, rel=1e-12, abs=1e-12)

    def test_singular_denominator(self):
        with pytest.raises(SingularDenominatorError):
            ves_to_hl(VesParams(1, 0.5, 1, 0.5))
        with pytest.raises(SingularDenominatorError):
            HlForm(a=1.0, b=0.5, c=0.5, beta=0.5)

    def test_non_economic_beta(self):
        with pytest.raises(DomainError):
            HlForm(a=1.0, b=0.5, c=0.2, beta=0.0)

    @pytest.mark.parametrize("d,rho,mu", NONDEGENERATE)
    def test_exact_regression_identity(self, d, rho, mu):
        p = VesParams(1.3, d, rho, mu)
        h = ves_to_hl(p)
        X = np.array(XS)
        W, _ = factor_prices(p, X)
        Y = eval_ves_intensive(p, X)
        lhs = np.log(Y) - math.log(h.a) - h.b * np.log(np.abs(W)) - h.c * np.log(X)
        assert np.max(np.abs(lhs)) <= 1e-8
        assert h.wage_sign == np.sign(W[0])


class TestOdeResidual:
    @pytest.mark.parametrize("d,rho,mu", NONDEGENERATE)
    def test_closed_form_solves_ode(self, d, rho, mu):
        h = ves_to_hl(VesParams(1.3, d, rho, mu))
        assert np.max(np.abs(ode_residual(h, np.array([0.5, 1, 2, 5])))) <= 1e-8

    def test_curve_matches_smac_form(self):
        p = VesParams(1.3, 0.3, 2.0, 0.5)
        y, _ = hl_curve(ves_to_hl(p), np.array(XS))
        np.testing.assert_allclose(y, eval_ves_intensive(p, np.array(XS)), rtol=1e-12)

    def test_any_integration_constant_solves(self):
        h = ves_to_hl(VesParams(1, 0.4, 1.5, 0.2))
        bumped = HlForm(h.a, h.b, h.c, 1.1 * h.beta)
        assert np.max(np.abs(ode_residual(bumped, np.array([0.5, 1, 2, 5])))) <= 1e-8

    def test_perturbed_exponent_is_detected(self):
        h = HlForm(a=1.2, b=0.5, c=0.2, beta=0.6)
        alpha, b, c = h.alpha, h.b, h.c
        mp.mp.dps = 30
        curve = lambda x: (alpha * x ** (-c / b + 0.1) + h.beta * x ** ((b - 1) / b)) ** (b / (b - 1))
        X = mp.mpf(2)
        y, dy = float(curve(X)), float(mp.diff(curve, X))
        assert abs(bernoulli_residual(y, dy, 2.0, h.a, h.b, h.c)) > 1e-3
        # the unperturbed curve run through the same residual formula is exact
        exact = lambda x: (alpha * x ** (-c / b) + h.beta * x ** ((b - 1) / b)) ** (b / (b - 1))
        y0, dy0 = float(exact(X)), float(mp.diff(exact, X))
        assert abs(bernoulli_residual(y0, dy0, 2.0, h.a, h.b, h.c)) <= 1e-12

    def test_log_domain_error(self):
        with pytest.raises(DomainError):
            bernoulli_residual(2.0, 1.0, 2.0, 1.0, 0.5, 0.1)
