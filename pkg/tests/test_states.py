import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from vanhove import (GaussianBump, LogCounterexample, QuasiFreeState, ShellIndicator, SourceModel,
                     TestFunction, ThermalParams)
from vanhove.errors import InvalidArgument, UndefinedHatAtZero
from vanhove.states import (condensate_form, cov_form, cov_polar, field_law, positivity_check,
                            resolvent_one_point, resolvent_one_point_mc, resolvent_two_point,
                            resolvent_two_point_mc, two_point_data, weyl_one_point, weyl_one_point_mc,
                            weyl_two_point)

FOUR_PI = 4 * math.pi
GROUND = QuasiFreeState()
GROUND_SRC = QuasiFreeState(SourceModel.unit_point())
THERMAL = QuasiFreeState(SourceModel.unit_point(), ThermalParams(beta=1.0, mu=-1.0))


# --- thermal parameters --------------------------------------------------------

def test_thermal_validation():
    with pytest.raises(InvalidArgument):
        ThermalParams(beta=0.0)
    with pytest.raises(InvalidArgument):
        ThermalParams(mu=0.5)
    with pytest.raises(InvalidArgument):
        ThermalParams(beta=1.0, mu=-1.0, n0=1.0)
    assert ThermalParams().is_ground


@given(st.floats(0.05, 20), st.floats(-3, 0), st.floats(0.01, 10))
def test_thermal_kernel_is_coth(beta, mu, w):
    k = ThermalParams(beta, mu).kernel(w)
    assert k == pytest.approx(1 / math.tanh(beta * (w - mu) / 2), rel=1e-12)
    assert k >= 1.0


def test_ground_kernel_is_one():
    assert np.all(ThermalParams().kernel(np.array([0.1, 1.0, 10.0])) == 1.0)


def test_state_round_trip():
    st_ = QuasiFreeState(SourceModel.unit_point(0.5, 2.0), ThermalParams(2.0, 0.0, 0.3))
    assert QuasiFreeState.from_dict(st_.to_dict()) == st_
    assert QuasiFreeState.from_dict({}) == QuasiFreeState()


# --- covariance ----------------------------------------------------------------

def test_ground_covariance(shell12, bump1):
    assert cov_form(GROUND, shell12) == pytest.approx(FOUR_PI * 7 / 3, rel=1e-12)
    assert cov_form(GROUND, bump1) == pytest.approx(math.pi ** 1.5, rel=1e-12)


def test_thermal_covariance_against_mpmath(shell12):
    beta, mu = 1.0, -1.0
    oracle = FOUR_PI * mpmath.quad(lambda k: mpmath.coth(beta * (k - mu) / 2) * k * k, [1, 2])
    assert cov_form(THERMAL, shell12) == pytest.approx(float(oracle), rel=1e-12)


def test_massless_thermal_covariance_ir_weight(bump1):
    # coth(beta k/2) ~ 2/(beta k) near 0: k^2 * 1/k is integrable
    state = QuasiFreeState(thermal=ThermalParams(beta=2.0))
    oracle = FOUR_PI * mpmath.quad(lambda k: mpmath.coth(k) * mpmath.exp(-k * k) * k * k, [0, 1, mpmath.inf])
    assert cov_form(state, bump1) == pytest.approx(float(oracle), rel=1e-11)


def test_condensate_form(bump1, shell12):
    state = QuasiFreeState(thermal=ThermalParams(beta=2.0, mu=0.0, n0=0.25))
    assert condensate_form(state, bump1) == pytest.approx(2 * (2 * math.pi) ** 3 * 0.25, rel=1e-15)
    assert condensate_form(state, shell12) == 0.0
    with pytest.raises(UndefinedHatAtZero):
        condensate_form(state, TestFunction.single(LogCounterexample()))
    base = cov_form(QuasiFreeState(thermal=ThermalParams(beta=2.0)), bump1)
    assert cov_form(state, bump1) == pytest.approx(base + 2 * (2 * math.pi) ** 3 * 0.25, rel=1e-12)


@given(st.complex_numbers(max_magnitude=2, allow_nan=False), st.floats(-2, 2),
       st.sampled_from([GROUND, THERMAL]))
def test_covariance_psd(c, t, state):
    f = TestFunction.single(GaussianBump(1.0)) + TestFunction.single(ShellIndicator(0.5, 2.0), c, t)
    g = TestFunction.single(ShellIndicator(1.0, 3.0), 1.0, -t)
    rep = positivity_check(state, f, g)
    assert rep.psd
    # the thermal form dominates the ground one
    assert cov_form(THERMAL, f) >= cov_form(GROUND, f) * (1 - 1e-12)


def test_cov_polar_hermitian(bump1, shell12):
    f = bump1 + shell12.evolve(0.8) * 1j
    a, b = cov_polar(THERMAL, f, shell12), cov_polar(THERMAL, shell12, f)
    assert abs(a - b.conjugate()) <= 1e-12 * abs(a)


# --- Weyl expectations ---------------------------------------------------------

def test_weyl_one_point_example(shell12):
    m = 8 * math.pi / 3 * (2 ** 1.5 - 1)
    q = FOUR_PI * 7 / 3
    expected = np.exp(-1j * m - q / 4)
    assert abs(weyl_one_point(GROUND_SRC, shell12) - expected) <= 1e-13
    assert abs(weyl_one_point(GROUND, shell12) - math.exp(-q / 4)) <= 1e-13
    assert weyl_one_point(GROUND, TestFunction.zero()) == 1


@given(st.complex_numbers(max_magnitude=2, allow_nan=False), st.floats(-2, 2))
def test_weyl_bounded_and_hermitian(c, t):
    f = TestFunction.single(GaussianBump(1.0), c, t)
    w = weyl_one_point(THERMAL, f)
    assert abs(w) <= 1.0 + 1e-15
    # W(f)* = W(-f)
    assert abs(weyl_one_point(THERMAL, -f) - w.conjugate()) <= 1e-12


def test_weyl_two_point_relations(shell12, bump1):
    f, g = bump1, shell12.evolve(0.7)
    # W(f) W(-f) = 1
    assert abs(weyl_two_point(THERMAL, f, -f) - 1) <= 1e-13
    # psi(W(f)W(g)) and psi(W(g)W(f)) differ by the commutator phase exp(-i Im<f,g>)
    im = two_point_data(THERMAL, f, g).im_fg
    ratio = weyl_two_point(THERMAL, f, g) / weyl_two_point(THERMAL, g, f)
    assert abs(ratio - np.exp(-1j * im)) <= 1e-12
    assert abs(im) > 0.1


def test_weyl_one_point_mc(bump1):
    est = weyl_one_point_mc(THERMAL, bump1, seed=101, n=1_000_000)
    assert est.sigmas(weyl_one_point(THERMAL, bump1)) <= 4


# --- resolvent expectations ----------------------------------------------------

def test_resolvent_one_point_no_field():
    # q = m = 0: psi(R(lam, 0)) = 1/(i lam)
    assert resolvent_one_point(GROUND, 2.0, TestFunction.zero()) == pytest.approx(-0.5j)


@given(st.floats(0.1, 10), st.sampled_from([-1, 1]), st.floats(-2, 2))
def test_resolvent_norm_bound(lam, sign, t):
    f = TestFunction.single(GaussianBump(1.0), 1.0, t)
    val = resolvent_one_point(THERMAL, sign * lam, f)
    assert abs(val) <= 1 / lam * (1 + 1e-12)


def test_resolvent_paths_agree(shell12, bump1):
    for f in (shell12, bump1, bump1 + shell12.evolve(1.0)):
        for lam in (0.3, -1.0, 4.0, 1.5 + 2j):
            a = resolvent_one_point(GROUND_SRC, lam, f)
            b = resolvent_one_point(GROUND_SRC, lam, f, method="quad")
            assert abs(a - b) <= 1e-10 * abs(a)


def test_resolvent_adjoint(bump1):
    # R(lam, f)* = R(-lam, f), so psi(R(-lam, f)) = conj(psi(R(lam, f)))
    a = resolvent_one_point(THERMAL, 1.3, bump1)
    assert abs(resolvent_one_point(THERMAL, -1.3, bump1) - a.conjugate()) <= 1e-14


def test_resolvent_one_point_mc(shell12):
    lam = 0.7
    est = resolvent_one_point_mc(GROUND_SRC, lam, shell12, seed=202, n=1_000_000)
    assert est.sigmas(resolvent_one_point(GROUND_SRC, lam, shell12)) <= 4


def test_field_law(shell12):
    law = field_law(GROUND_SRC, shell12)
    assert law.mean == pytest.approx(-8 * math.pi / 3 * (2 ** 1.5 - 1))
    assert law.variance == pytest.approx(FOUR_PI * 7 / 6)


# --- two-point resolvent -------------------------------------------------------

def test_two_point_factorizes_on_disjoint_supports():
    # disjoint shells: the fields are independent and the product is exact
    f = TestFunction.single(ShellIndicator(0.5, 1.0))
    g = TestFunction.single(ShellIndicator(1.5, 2.0))
    for lam, mu in ((1.0, 1.0), (0.5, -2.0)):
        two = resolvent_two_point(THERMAL, lam, mu, f, g)
        prod = resolvent_one_point(THERMAL, lam, f) * resolvent_one_point(THERMAL, mu, g)
        assert abs(two - prod) <= 1e-10 * abs(prod)


@pytest.mark.parametrize("lam,mu", [(1.0, 2.0), (0.5, 3.0), (-1.0, 2.0), (2.0, -0.7)])
def test_first_resolvent_identity(lam, mu, bump1):
    # R(lam,f) - R(mu,f) = i (mu - lam) R(lam,f) R(mu,f)
    lhs = resolvent_one_point(GROUND_SRC, lam, bump1) - resolvent_one_point(GROUND_SRC, mu, bump1)
    rhs = 1j * (mu - lam) * resolvent_two_point(GROUND_SRC, lam, mu, bump1, bump1)
    assert abs(lhs - rhs) <= 1e-9


def test_two_point_mc(bump1, shell12):
    f, g = bump1, shell12
    assert two_point_data(THERMAL, f, g).im_fg == 0
    est = resolvent_two_point_mc(THERMAL, 1.0, -1.5, f, g, seed=303, n=1_000_000)
    assert est.sigmas(resolvent_two_point(THERMAL, 1.0, -1.5, f, g)) <= 4


def test_two_point_mc_rejects_noncommuting(bump1, shell12):
    with pytest.raises(InvalidArgument):
        resolvent_two_point_mc(THERMAL, 1.0, 1.0, bump1, shell12.evolve(0.7), seed=1, n=10)


def test_two_point_noncommuting_adjoint(bump1, shell12):
    # psi((R(lam,f) R(mu,g))*) = psi(R(-mu,g) R(-lam,f))
    f, g = bump1, shell12.evolve(0.7)
    a = resolvent_two_point(THERMAL, 1.0, 2.0, f, g)
    b = resolvent_two_point(THERMAL, -2.0, -1.0, g, f)
    assert abs(a.conjugate() - b) <= 1e-10 * abs(a)
