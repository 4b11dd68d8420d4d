import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from vanhove import QuasiFreeState, ShellIndicator, SourceModel, TestFunction, ThermalParams
from vanhove.errors import InvalidArgument
from vanhove.euclid import (LatticeSpec, condensate_chi_mc, double_exp_integral, double_exp_integral_quad,
                            energy_estimate, gamma1_and_e0, gamma1_limit_closed, gibbs_char_functional,
                            gibbs_two_time_form, ir_witness, lattice_ground_energy, lattice_momenta,
                            lattice_partition, lattice_tail_bound, log_gamma1, mean_norm_sq,
                            ou_covariance_check, ou_paths, pair_potential_variance, periodic_kernel,
                            wick_identity_check)
from vanhove.numerics import rng
from vanhove.states import weyl_one_point

SHELL = SourceModel.unit_point(0.5, 2.0)


def r3_counts(nmax_sq):
    """Number of representations of n as a sum of three squares, n <= nmax_sq, by convolution."""
    m = int(math.isqrt(nmax_sq))
    one = np.zeros(nmax_sq + 1, dtype=np.int64)
    for j in range(-m, m + 1):
        one[j * j] += 1
    two = np.convolve(one, one)[: nmax_sq + 1]
    return np.convolve(two, one)[: nmax_sq + 1]


# --- double exponential integrals ---------------------------------------------

@given(st.floats(0.05, 5), st.floats(0.0, 8), st.sampled_from(["half", "sym"]))
def test_double_exp_closed_vs_dblquad(omega, T, variant):
    closed = double_exp_integral(omega, T, variant)
    assert double_exp_integral_quad(omega, T, variant) == pytest.approx(closed, rel=1e-9, abs=1e-12)


def test_double_exp_small_argument():
    # x - 1 + e^{-x} ~ x^2/2 for tiny x, no cancellation
    assert double_exp_integral(1e-9, 1.0) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(InvalidArgument):
        double_exp_integral(0.0, 1.0)


# --- pair potential ------------------------------------------------------------

def test_pair_potential_variance_against_mpmath():
    T = 3.0
    oracle = 4 * mpmath.pi * mpmath.quad(lambda k: (T - (1 - mpmath.exp(-T * k)) / k) / k ** 2 * k ** 2,
                                         [0.5, 2])
    assert pair_potential_variance(SHELL, T) == pytest.approx(float(oracle), rel=1e-12)


def test_pair_potential_is_half_double_exp():
    # Var W = 1/2 int |rho|^2/omega int int e^{-omega|t-s|} over [0,T]^2
    T = 5.0
    oracle = 0.5 * 4 * math.pi * float(mpmath.quad(
        lambda k: k * double_exp_integral(float(k), T), [0.5, 2]))
    assert pair_potential_variance(SHELL, T) == pytest.approx(oracle, rel=1e-10)


def test_energy_estimate_tends_to_e0():
    e0 = -3 * math.pi
    devs = [abs(energy_estimate(SHELL, T) - e0) for T in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    # the 1/T coefficient is 1/2 int |rho|^2/omega^3 = 2 pi log 4
    assert devs[-1] * 64 == pytest.approx(2 * math.pi * math.log(4), rel=1e-3)


def test_gamma1_and_e0_report():
    rep = gamma1_and_e0(SHELL)
    assert rep.E0closed == pytest.approx(-3 * math.pi, rel=1e-15)
    assert abs(rep.E0extracted - rep.E0closed) <= 1e-4 * abs(rep.E0closed)
    assert rep.gamma1_limit == pytest.approx(0.25 ** math.pi, rel=1e-10)
    assert rep.richardson_order == pytest.approx(1.0, abs=0.05)
    assert 0 < rep.gamma1 < 1


def test_gamma1_limit_closed():
    assert gamma1_limit_closed(0.5, 2.0) == pytest.approx(0.0128402285554866, rel=1e-14)
    assert mean_norm_sq(SHELL) == pytest.approx(4 * math.pi * math.log(4), rel=1e-12)
    assert math.exp(log_gamma1(SHELL, math.inf)) == pytest.approx(gamma1_limit_closed(0.5, 2.0), rel=1e-10)


def test_gamma1_monotone_in_T():
    vals = [log_gamma1(SHELL, T) for T in (0.5, 1, 2, 4, 8, 16)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > log_gamma1(SHELL, math.inf)


def test_ir_witness():
    rows = ir_witness()
    assert [k for k, _ in rows] == [10.0 ** -j for j in range(1, 7)]
    vals = [g for _, g in rows]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-8


def test_pair_potential_needs_cutoffs():
    with pytest.raises(InvalidArgument):
        pair_potential_variance(SourceModel.unit_point(0.0, 2.0), 1.0)
    with pytest.raises(InvalidArgument):
        pair_potential_variance(SourceModel.unit_point(0.5), 1.0)


# --- lattice -------------------------------------------------------------------

def test_single_mode_partition():
    res = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=0.0, beta=1.0, mu=-1.0))
    assert res.n_modes == 1
    assert math.exp(res.log_z_free) == pytest.approx(1 / (1 - math.exp(-1)), rel=1e-12)


def test_lattice_momenta_count_matches_r3():
    L, radius = 2 * math.pi, 6.0
    k = lattice_momenta(L, 3, radius)
    assert len(k) == int(r3_counts(36).sum())


def test_lattice_energy_independent_route():
    spec = LatticeSpec(L=4 * math.pi, k_max=8.0)
    h = spec.spacing
    e0 = lattice_ground_energy(spec, SHELL)
    # |k|^2 = h^2 n, kappa <= |k| <= Lambda
    counts = r3_counts(int((2.0 / h) ** 2) + 1)
    n = np.arange(len(counts))
    kn = h * np.sqrt(n)
    keep = (n > 0) & (kn >= 0.5) & (kn <= 2.0 * (1 + 1e-14))
    oracle = -0.5 * h ** 3 * math.fsum(counts[keep] / (kn[keep] ** 2))
    assert e0 == pytest.approx(oracle, rel=1e-12)


def test_lattice_energy_continuum_limit():
    devs = [abs(lattice_ground_energy(LatticeSpec(L=L), SHELL) + 3 * math.pi) for L in (20.0, 80.0)]
    assert devs[1] < devs[0] < 1.0


def test_lattice_vh_identity():
    spec = LatticeSpec(L=2 * math.pi, k_max=4.0, beta=0.7, mu=-0.5)
    res = lattice_partition(spec, SHELL)
    assert res.log_z_vh == -spec.beta * res.e0 + res.log_z_free


def test_lattice_truncation_within_tail_bound():
    lo = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=8.0))
    hi = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=12.0))
    assert 0 < hi.log_z_free - lo.log_z_free <= lo.tail_bound
    cold_lo = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=8.0, beta=5.0))
    cold_hi = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=12.0, beta=5.0))
    assert abs(cold_hi.log_z_free - cold_lo.log_z_free) <= 1e-10


def test_lattice_tail_bound_dominates_brute_force():
    spec = LatticeSpec(L=2 * math.pi, k_max=3.0, beta=2.0)
    far = lattice_partition(LatticeSpec(L=2 * math.pi, k_max=20.0, beta=2.0))
    near = lattice_partition(spec)
    assert far.log_z_free - near.log_z_free <= lattice_tail_bound(spec)


def test_lattice_rejects_massless():
    with pytest.raises(InvalidArgument):
        LatticeSpec(L=1.0, mu=0.0)


# --- periodic kernel and Gibbs functional --------------------------------------

@given(st.floats(0.1, 10), st.floats(0.05, 5), st.floats(0, 1))
def test_periodic_kernel_kms(beta, omega, frac):
    tau = frac * beta
    c = periodic_kernel(beta, omega, tau)
    assert periodic_kernel(beta, omega, beta - tau) == pytest.approx(c, rel=1e-12)
    assert periodic_kernel(beta, omega, 0.0) == pytest.approx(1 / math.tanh(beta * omega / 2), rel=1e-12)


def test_periodic_kernel_integral():
    beta, omega = 1.3, 0.8
    val = float(mpmath.quad(lambda t: float(periodic_kernel(beta, omega, float(t))), [0, beta]))
    assert val == pytest.approx(2 / omega, rel=1e-12)


def test_periodic_kernel_zero_temperature_limit():
    assert periodic_kernel(200.0, 1.0, 0.7) == pytest.approx(math.exp(-0.7), rel=1e-12)


def test_gibbs_sharp_time_matches_state_covariance(bump1):
    th = ThermalParams(beta=1.5, mu=-0.5)
    q = gibbs_two_time_form(th, bump1, bump1, 0.3, 0.3).real
    from vanhove.states import cov_form
    assert q == pytest.approx(cov_form(QuasiFreeState(thermal=th), bump1), rel=1e-12)


def test_gibbs_char_functional(bump1):
    th = ThermalParams(beta=1.5, mu=0.0, n0=0.05)
    src = SourceModel.unit_point()
    val = gibbs_char_functional(th, src, bump1)
    state = QuasiFreeState(None, th)
    from vanhove.model import mean_functional
    from vanhove.states import cov_form
    expected = np.exp(-0.25 * cov_form(state, bump1) - 0.5j * mean_functional(src, bump1).real)
    assert abs(val - expected) <= 1e-13
    assert gibbs_char_functional(th, src, TestFunction.zero()) == 1
    with pytest.raises(InvalidArgument):
        gibbs_char_functional(th, src, bump1, t=2.0)


def test_gibbs_two_time_is_beta_periodic(bump1):
    th = ThermalParams(beta=2.0, mu=-1.0)
    g = TestFunction.single(ShellIndicator(0.5, 2.0))
    a = gibbs_two_time_form(th, bump1, g, 0.4, 0.0)
    b = gibbs_two_time_form(th, bump1, g, 2.4, 0.0)
    c = gibbs_two_time_form(th, bump1, g, 1.6, 0.0)
    assert abs(a - b) <= 1e-13 * abs(a)
    assert abs(a - c) <= 1e-13 * abs(a)


def test_ground_limit_of_weyl_expectation(bump1):
    src = SourceModel.unit_point()
    ground = weyl_one_point(QuasiFreeState(src), bump1)
    devs = [abs(weyl_one_point(QuasiFreeState(src, ThermalParams(beta=2.0 ** j)), bump1) - ground)
            for j in range(11)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-5


# --- Monte Carlo identities ----------------------------------------------------

def test_wick_identity_mc():
    chk = wick_identity_check(0.7, -0.4, 1.2, 0.8, 0.5, seed=41, n=1_000_000)
    assert chk.closed == pytest.approx(math.exp(0.5 * 0.7 * -0.4 * 0.5))
    assert chk.sigmas <= 4


def test_chi_measure_mc():
    chk = condensate_chi_mc(0.002, 3, 1.0 + 0.5j, seed=43, n=1_000_000)
    assert chk.sigmas <= 4
    assert chk.closed.real == pytest.approx(math.exp(-0.5 * (2 * math.pi) ** 3 * 0.002 * 1.25))


def test_chi_measure_matches_condensate_form(bump1):
    th = ThermalParams(beta=1.0, mu=0.0, n0=0.002)
    from vanhove.states import condensate_form
    q0 = condensate_form(QuasiFreeState(thermal=th), bump1)
    assert condensate_chi_mc(0.002, 3, 1.0, n=10).closed.real == pytest.approx(math.exp(-q0 / 4))


def test_ou_covariance_mc():
    rep = ou_covariance_check(1.3, [0.0, 0.4, 1.5], seed=47, n=1_000_000)
    assert rep.sigmas <= 4
    assert rep.closed[0, 1] == pytest.approx(0.5 * math.exp(-1.3 * 0.4))


def test_ou_paths_stationary():
    x = ou_paths(2.0, [0.0, 10.0], rng(5), 200_000)
    assert np.var(x[:, 1]) == pytest.approx(0.5, abs=5 * 0.5 * math.sqrt(2 / 200_000))
