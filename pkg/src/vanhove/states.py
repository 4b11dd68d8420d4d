"""Quasi-free states: covariance forms, Weyl and resolvent expectations.

All expectations are Gaussian. Under a state with mean functional ``m`` and
covariance form ``q`` the field phi(f) is distributed as N(-Re m(f), q(f)/2),
so Weyl expectations are characteristic functions and resolvent
expectations are Cauchy transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import InvalidArgument, NonPsdCovariance, UndefinedHatAtZero
from .model import (Dispersion, SourceModel, TestFunction, inner_product, mean_functional,
                    weighted_inner_product)
from .numerics import Gaussian1D, QuadratureConfig

PSD_TOL = 1e-12


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature, chemical potential and condensate density.

    ``beta = inf`` is the ground state; a condensate (``n0 > 0``) needs ``mu = 0``.
    """

    beta: float = math.inf
    mu: float = 0.0
    n0: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidArgument("beta must be positive (inf for the ground state)")
        if self.mu > 0:
            raise InvalidArgument("chemical potential must be <= 0")
        if self.n0 < 0:
            raise InvalidArgument("condensate density must be >= 0")
        if self.mu < 0 and self.n0 != 0:
            raise InvalidArgument("a condensate requires mu = 0")

    @property
    def is_ground(self) -> bool:
        return math.isinf(self.beta)

    def kernel(self, omega):
        """K(omega) = coth(beta (omega - mu) / 2); identically 1 at beta = inf."""
        omega = np.asarray(omega, dtype=float)
        if self.is_ground:
            return np.ones_like(omega)
        x = self.beta * (omega - self.mu)
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 + 2.0 / np.expm1(x)

    def to_dict(self) -> dict:
        return {"beta": None if self.is_ground else self.beta, "mu": self.mu, "n0": self.n0}

    @classmethod
    def from_dict(cls, data: dict) -> "ThermalParams":
        beta = data.get("beta")
        beta = math.inf if beta is None or beta == "inf" else float(beta)
        return cls(beta, float(data.get("mu", 0.0)), float(data.get("n0", 0.0)))


@dataclass(frozen=True)
class QuasiFreeState:
    source: SourceModel | None = None
    thermal: ThermalParams = field(default_factory=ThermalParams)
    dispersion: Dispersion = field(default_factory=Dispersion)
    cfg: QuadratureConfig | None = None

    def _check(self, f: TestFunction):
        if f.dispersion != self.dispersion:
            raise InvalidArgument("test function dispersion does not match the state")

    def to_dict(self) -> dict:
        return {"source": None if self.source is None else self.source.to_dict(),
                "thermal": self.thermal.to_dict(), "dispersion": self.dispersion.to_dict()}

    @classmethod
    def from_dict(cls, data: dict, cfg: QuadratureConfig | None = None) -> "QuasiFreeState":
        src = data.get("source")
        return cls(None if src is None else SourceModel.from_dict(src),
                   ThermalParams.from_dict(data.get("thermal", {})),
                   Dispersion.from_dict(data.get("dispersion", {})), cfg)


# ---------------------------------------------------------------------------
# forms


def condensate_polar(state: QuasiFreeState, f: TestFunction, g: TestFunction) -> complex:
    """2 (2 pi)^d n0 conj(f^(0)) g^(0)."""
    n0 = state.thermal.n0
    if n0 == 0:
        return 0j
    f0, g0 = f.hat_at_zero(), g.hat_at_zero()
    if f0 is None or g0 is None:
        raise UndefinedHatAtZero("condensate form needs f^(0), which is undefined here")
    return 2.0 * (2 * math.pi) ** state.dispersion.d * n0 * f0.conjugate() * g0


def condensate_form(state: QuasiFreeState, f: TestFunction) -> float:
    return condensate_polar(state, f, f).real


def _kernel_pair(state: QuasiFreeState, f: TestFunction, g: TestFunction):
    th = state.thermal
    disp = state.dispersion
    if th.is_ground:
        return inner_product(f, g, state.cfg, full_output=True)
    ir_power = -disp.s if th.mu == 0 else 0.0
    return weighted_inner_product(f, g, weight=lambda k: th.kernel(disp.omega(k)),
                                  weight_ir_power=ir_power, cfg=state.cfg, full_output=True)


def cov_polar(state: QuasiFreeState, f: TestFunction, g: TestFunction, full_output: bool = False):
    """Q(f, g) = <f, K g> + 2 (2 pi)^d n0 conj(f^(0)) g^(0), one radial quadrature."""
    state._check(f)
    state._check(g)
    val, err = _kernel_pair(state, f, g)
    val = val + condensate_polar(state, f, g)
    return (val, err) if full_output else val


def cov_form(state: QuasiFreeState, f: TestFunction, full_output: bool = False):
    """q(f) = <f, coth(beta (omega - mu)/2) f> + q0(f)."""
    val, err = cov_polar(state, f, f, full_output=True)
    return (val.real, err) if full_output else val.real


def mean_real(state: QuasiFreeState, f: TestFunction, full_output: bool = False):
    """Re m(f) for the state's source (0 without a source)."""
    val, err = mean_functional(state.source, f, state.cfg, full_output=True)
    return (val.real, err) if full_output else val.real


def field_law(state: QuasiFreeState, f: TestFunction) -> Gaussian1D:
    """Distribution of phi(f): N(-Re m(f), q(f)/2)."""
    return Gaussian1D(-mean_real(state, f), 0.5 * cov_form(state, f))


# ---------------------------------------------------------------------------
# Weyl generators


def weyl_one_point(state: QuasiFreeState, f: TestFunction, full_output: bool = False):
    """psi(W(f)) = exp(-i Re m(f) - q(f)/4)."""
    if f.is_zero:
        return (1 + 0j, 0.0) if full_output else 1 + 0j
    m, em = mean_real(state, f, full_output=True)
    q, eq = cov_form(state, f, full_output=True)
    val = complex(np.exp(-1j * m - 0.25 * q))
    return (val, abs(val) * (em + 0.25 * eq)) if full_output else val


def weyl_two_point(state: QuasiFreeState, f: TestFunction, g: TestFunction,
                   full_output: bool = False):
    """psi(W(f) W(g)) = exp(-(i/2) Im<f,g>) psi(W(f+g))."""
    sym, es = inner_product(f, g, state.cfg, full_output=True)
    one, e1 = weyl_one_point(state, f + g, full_output=True)
    val = complex(np.exp(-0.5j * sym.imag)) * one
    return (val, e1 + 0.5 * abs(one) * es) if full_output else val


# ---------------------------------------------------------------------------
# resolvent generators


def resolvent_one_point(state: QuasiFreeState, lam, f: TestFunction, *, method: str = "closed",
                        full_output: bool = False):
    """psi(R(lam, f)) with R(lam, f) = (i lam - phi(f))^-1.

    ``lam`` may be complex with nonzero real part.  The value is the Cauchy
    transform of N(-Re m(f), q(f)/2), i.e. the Laplace integral
    -i int_0^{sgn(lam) inf} exp(-(lam - i Re m(f)) t - q(f) t^2/4) dt.
    """
    m, em = mean_real(state, f, full_output=True)
    q, eq = cov_form(state, f, full_output=True)
    val, err = numerics.laplace_gauss_1d(lam, max(q, 0.0), m, method=method, cfg=state.cfg,
                                         full_output=True)
    # first-order propagation of the form errors: d/db and d/da of the transform are bounded
    # by 1/|lam|^2 and 1/|lam|^3 respectively
    re = abs(complex(lam).real)
    err += em / re ** 2 + 0.5 * eq / re ** 3
    return (val, err) if full_output else val


@dataclass(frozen=True)
class TwoPointData:
    """Ingredients of the two-point kernel T(s, t)."""

    qf: float
    qg: float
    re_q: float
    im_fg: float
    mf: float
    mg: float
    err: float

    @property
    def form(self) -> np.ndarray:
        return np.array([[self.qf, self.re_q], [self.re_q, self.qg]])

    @property
    def covariance(self) -> np.ndarray:
        """Covariance of (phi(f), phi(g))."""
        return 0.5 * self.form

    def kernel(self, s, t):
        quad = s * s * self.qf + t * t * self.qg + 2.0 * s * t * self.re_q
        return np.exp(-0.25 * quad + 1j * (s * self.mf + t * self.mg) - 0.5j * s * t * self.im_fg)


def two_point_data(state: QuasiFreeState, f: TestFunction, g: TestFunction) -> TwoPointData:
    qf, e1 = cov_form(state, f, full_output=True)
    qg, e2 = cov_form(state, g, full_output=True)
    qfg, e3 = cov_polar(state, f, g, full_output=True)
    sym, e4 = inner_product(f, g, state.cfg, full_output=True)
    mf, e5 = mean_real(state, f, full_output=True)
    mg, e6 = mean_real(state, g, full_output=True)
    return TwoPointData(qf, qg, qfg.real, sym.imag, mf, mg, e1 + e2 + e3 + e4 + e5 + e6)


def gaussian_horizon(form: np.ndarray):
    evals = np.linalg.eigvalsh(form)
    if evals.min() < -PSD_TOL * max(1.0, abs(evals).max()):
        raise NonPsdCovariance(f"two-point covariance has eigenvalue {evals.min():.3g}")
    if evals.min() <= 1e-8:
        return None
    h = math.sqrt(4 * numerics.LAPLACE_HORIZON / evals.min())
    return (h, h)


# Overall sign of the two-point double integral: (-i)^2 from the two Laplace representations.
TWO_POINT_SIGN = -1.0


def resolvent_two_point(state: QuasiFreeState, lam: float, mu: float, f: TestFunction,
                        g: TestFunction, full_output: bool = False):
    """psi(R(lam, f) R(mu, g)) = -int int exp(-lam s - mu t) T(s, t) ds dt."""
    if lam == 0 or mu == 0:
        raise InvalidArgument("lambda and mu must be nonzero")
    data = two_point_data(state, f, g)
    horizon = gaussian_horizon(data.form)
    val, err = numerics.double_laplace_t(lam, mu, data.kernel, horizon=horizon, cfg=state.cfg,
                                         full_output=True)
    # every ingredient enters the exponent multiplied by at most s^2 ~ 1/lam^2
    scale = 1.0 / (abs(lam) * abs(mu))
    err += data.err * scale * max(1.0 / lam ** 2, 1.0 / mu ** 2)
    val = TWO_POINT_SIGN * val
    return (val, err) if full_output else val


# ---------------------------------------------------------------------------
# positivity


@dataclass(frozen=True)
class PsdReport:
    covariance: np.ndarray
    eigenvalues: np.ndarray
    det: float
    psd: bool


def positivity_check(state: QuasiFreeState, f: TestFunction, g: TestFunction) -> PsdReport:
    """Assemble the covariance of (phi(f), phi(g)) and test it for positivity."""
    qf = cov_form(state, f)
    qg = cov_form(state, g)
    c = 0.5 * cov_polar(state, f, g).real
    cov = np.array([[0.5 * qf, c], [c, 0.5 * qg]])
    evals = np.linalg.eigvalsh(cov)
    return PsdReport(cov, evals, float(np.linalg.det(cov)), bool(evals.min() >= -PSD_TOL))


# ---------------------------------------------------------------------------
# Monte Carlo oracles: sample phi(f) (and phi(g)) from their Gaussian law


def _gaussian_draw(mean: float, var: float):
    sd = math.sqrt(max(var, 0.0))
    return lambda gen, n: mean + sd * gen.standard_normal(n)


def weyl_one_point_mc(state: QuasiFreeState, f: TestFunction, seed: int, n: int,
                      streams: int = 4) -> numerics.McEstimate:
    """Sample mean of exp(i X) with X ~ N(-Re m(f), q(f)/2)."""
    law = field_law(state, f)
    draw = _gaussian_draw(law.mean, law.variance)
    return numerics.mc_mean(numerics.run_streams(lambda g, k: np.exp(1j * draw(g, k)), seed, n, streams))


def resolvent_one_point_mc(state: QuasiFreeState, lam: float, f: TestFunction, seed: int, n: int,
                           streams: int = 4) -> numerics.McEstimate:
    """Sample mean of 1/(i lam - X)."""
    law = field_law(state, f)
    draw = _gaussian_draw(law.mean, law.variance)
    return numerics.mc_mean(numerics.run_streams(lambda g, k: 1.0 / (1j * lam - draw(g, k)),
                                                 seed, n, streams))


def resolvent_two_point_mc(state: QuasiFreeState, lam: float, mu: float, f: TestFunction,
                           g: TestFunction, seed: int, n: int, streams: int = 4) -> numerics.McEstimate:
    """Sample mean of 1/((i lam - X)(i mu - Y)) for the joint law of (phi(f), phi(g)).

    Only meaningful when Im<f, g> = 0, where the two fields commute.
    """
    data = two_point_data(state, f, g)
    if abs(data.im_fg) > 1e-10 * max(1.0, abs(data.qf), abs(data.qg)):
        raise InvalidArgument("two-point sampling needs Im<f, g> = 0")
    factor = numerics.psd_factor(data.covariance)
    mean = np.array([-data.mf, -data.mg])

    def draw(gen, k):
        xy = mean[None, :] + gen.standard_normal((k, 2)) @ factor.T
        return 1.0 / ((1j * lam - xy[:, 0]) * (1j * mu - xy[:, 1]))

    return numerics.mc_mean(numerics.run_streams(draw, seed, n, streams))
