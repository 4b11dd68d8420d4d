"""Euclidean side: pair potential, overlap criterion, lattice partition functions,
Gibbs characteristic functionals and Monte Carlo checks of Gaussian identities.

Every functional integral here is reduced to a one- or two-dimensional
Gaussian; the only path simulation is the exact-transition OU sampler.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import numerics
from .errors import InvalidArgument
from .model import Dispersion, SourceModel, TestFunction, mean_functional, weighted_inner_product
from .numerics import Gaussian2D, McEstimate, QuadratureConfig, radial_quad
from .renorm import ground_state_energy_unit_point
from .states import QuasiFreeState, ThermalParams, condensate_form


# ---------------------------------------------------------------------------
# double exponential integrals


def double_exp_integral(omega: float, T: float, variant: str = "half") -> float:
    """Integral of exp(-omega |t - s|) over [0, T]^2 ('half') or [-T, T]^2 ('sym').

    half: 2T/omega - 2(1 - e^{-T omega})/omega^2
    sym:  4T/omega - 2(1 - e^{-2T omega})/omega^2
    """
    if not omega > 0:
        raise InvalidArgument("omega must be positive")
    if T < 0:
        raise InvalidArgument("T must be non-negative")
    if variant == "half":
        x = T * omega
    elif variant == "sym":
        x = 2 * T * omega
    else:
        raise InvalidArgument(f"unknown variant {variant!r}")
    return 2.0 * _x_minus_one_plus_exp(x) / omega ** 2


def _x_minus_one_plus_exp(x: float) -> float:
    """x - 1 + e^{-x}, by its Taylor series where the direct form cancels."""
    if x < 1e-2:
        return x * x * (0.5 - x * (1 / 6 - x * (1 / 24 - x * (1 / 120 - x / 720))))
    return x + math.expm1(-x)


def double_exp_integral_quad(omega: float, T: float, variant: str = "half") -> float:
    """Two-dimensional quadrature of the same integral (oracle path).

    The integrand is symmetric with a kink on the diagonal, so twice the
    lower triangle is integrated.
    """
    lo = 0.0 if variant == "half" else -T
    val, _ = integrate.dblquad(lambda s, t: math.exp(-omega * (t - s)), lo, T,
                               lo, lambda t: t, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * val


# ---------------------------------------------------------------------------
# pair potential and overlap criterion


def _require_shell(src: SourceModel):
    if src.convention != "unit_point":
        raise InvalidArgument("pair potential is implemented for the unit point source")
    if not (src.kappa > 0 and math.isfinite(src.lambda_uv)):
        raise InvalidArgument("pair potential needs 0 < kappa and a finite lambda_uv")


def _shell_integral(src: SourceModel, disp: Dispersion, weight, cfg=None, full_output=False):
    """Omega int_kappa^Lambda k^{d-1} |rho^|^2 weight(omega(k)) dk."""
    area = disp.sphere_area
    dm1 = disp.d - 1
    return radial_quad(lambda k: area * k ** dm1 * weight(k ** disp.s), src.kappa, src.lambda_uv,
                       cfg=cfg, is_complex=False, full_output=full_output)


def pair_potential_variance(src: SourceModel, T: float, dispersion: Dispersion | None = None,
                            cfg: QuadratureConfig | None = None, full_output: bool = False):
    """Var W(T) = int |rho^|^2 / omega^2 (T - (1 - e^{-T omega})/omega) dk over the cutoff shell."""
    _require_shell(src)
    if T < 0:
        raise InvalidArgument("T must be non-negative")
    disp = dispersion or Dispersion()
    if T == 0:
        return (0.0, 0.0) if full_output else 0.0
    weight = lambda w: _x_minus_one_plus_exp(T * w) / w ** 3
    return _shell_integral(src, disp, weight, cfg, full_output)


def log_gamma1(src: SourceModel, T: float, dispersion: Dispersion | None = None,
               cfg: QuadratureConfig | None = None) -> float:
    """log gamma_1(T) = -1/4 <m, (1 - e^{-T omega})^2 m> with m = omega^{-3/2} rho."""
    _require_shell(src)
    disp = dispersion or Dispersion()
    if math.isinf(T):
        return -0.25 * mean_norm_sq(src, disp, cfg)
    return -0.25 * _shell_integral(src, disp, lambda w: math.expm1(-T * w) ** 2 / w ** 3, cfg)


def mean_norm_sq(src: SourceModel, dispersion: Dispersion | None = None,
                 cfg: QuadratureConfig | None = None) -> float:
    """||m||^2 = int |rho^|^2 / omega^3 dk; equals 4 pi ln(Lambda/kappa) for s = 1, d = 3."""
    _require_shell(src)
    disp = dispersion or Dispersion()
    return _shell_integral(src, disp, lambda w: w ** -3.0, cfg)


def gamma1_limit_closed(kappa: float, lambda_uv: float) -> float:
    """exp(-||m||^2 / 4) = (kappa/Lambda)^pi for the unit point source, s = 1, d = 3."""
    return (kappa / lambda_uv) ** math.pi


@dataclass(frozen=True)
class PairPotentialReport:
    T: float
    varW: float
    logL: float
    gamma1: float
    E0closed: float
    E0extracted: float
    gamma1_limit: float
    gamma1_consistency: float
    richardson_order: float
    richardson_spread: float
    quad_err: float

    def to_dict(self) -> dict:
        return asdict(self)


def energy_estimate(src: SourceModel, T: float, dispersion: Dispersion | None = None,
                    cfg: QuadratureConfig | None = None) -> float:
    """-log L(T) / T with log L = Var W / 2."""
    return -0.5 * pair_potential_variance(src, T, dispersion, cfg) / T


def gamma1_and_e0(src: SourceModel, t_grid=(16.0, 32.0, 64.0), dispersion: Dispersion | None = None,
                  cfg: QuadratureConfig | None = None) -> PairPotentialReport:
    """Overlap criterion and ground-state energy for horizons T, 2T, 4T.

    E(T) = -log L(T)/T = E0 + c/T + O(e^{-kappa T}/T), so one Richardson step
    on the last two nodes removes the 1/T term.
    """
    disp = dispersion or Dispersion()
    t_grid = sorted(float(t) for t in t_grid)
    if len(t_grid) != 3 or not all(t > 0 for t in t_grid):
        raise InvalidArgument("t_grid needs three positive horizons")
    T = t_grid[0]
    var, err = pair_potential_variance(src, T, disp, cfg, full_output=True)
    log_l = 0.5 * var
    lg1 = log_gamma1(src, T, disp, cfg)
    consistency = abs(lg1 - (log_l - 0.5 * 0.5 * pair_potential_variance(src, 2 * T, disp, cfg)))
    energies = [energy_estimate(src, t, disp, cfg) for t in t_grid]
    r1 = (t_grid[1] * energies[1] - t_grid[0] * energies[0]) / (t_grid[1] - t_grid[0])
    r2 = (t_grid[2] * energies[2] - t_grid[1] * energies[1]) / (t_grid[2] - t_grid[1])
    e0 = ground_state_energy_unit_point(src.kappa, src.lambda_uv, disp, cfg)
    d0, d1 = abs(energies[0] - e0), abs(energies[1] - e0)
    order = math.log2(d0 / d1) if d0 > 0 and d1 > 0 else math.inf
    return PairPotentialReport(
        T=T, varW=var, logL=log_l, gamma1=math.exp(lg1), E0closed=e0, E0extracted=r2,
        gamma1_limit=math.exp(log_gamma1(src, math.inf, disp, cfg)),
        gamma1_consistency=consistency, richardson_order=order,
        richardson_spread=abs(r2 - r1), quad_err=err)


def ir_witness(lambda_uv: float = 2.0, exponents=range(1, 7)) -> list[tuple[float, float]]:
    """gamma_1(inf) = (kappa/Lambda)^pi along kappa = 10^-j."""
    return [(10.0 ** -j, gamma1_limit_closed(10.0 ** -j, lambda_uv)) for j in exponents]


# ---------------------------------------------------------------------------
# Wick exponentials


@dataclass(frozen=True)
class McCheck:
    name: str
    estimate: McEstimate
    closed: complex

    @property
    def sigmas(self) -> float:
        return self.estimate.sigmas(self.closed)

    def to_dict(self) -> dict:
        v = complex(self.estimate.value)
        c = complex(self.closed)
        return {"name": self.name, "mc_re": v.real, "mc_im": v.imag, "closed_re": c.real,
                "closed_im": c.imag, "stderr_re": self.estimate.stderr_re,
                "stderr_im": self.estimate.stderr_im, "n": self.estimate.n, "sigmas": self.sigmas}


def wick_identity_check(alpha: float, beta: float, var_f: float, var_g: float, cross: float,
                        seed: int = 0, n: int = 1_000_000, streams: int = 4) -> McCheck:
    """E[:e^{alpha X}: :e^{beta Y}:] = e^{alpha beta cross / 2}.

    (X, Y) is centred Gaussian with covariance 1/2 [[var_f, cross], [cross, var_g]]
    and :e^{aX}: = e^{aX - a^2 Var X / 2}.
    """
    cov = 0.5 * np.array([[var_f, cross], [cross, var_g]], dtype=float)
    g = Gaussian2D((0.0, 0.0), tuple(map(tuple, cov)))
    factor = numerics.psd_factor(g.cov_matrix())

    def draw(gen, k):
        xy = gen.standard_normal((k, 2)) @ factor.T
        return np.exp(alpha * xy[:, 0] - 0.5 * alpha ** 2 * cov[0, 0]
                      + beta * xy[:, 1] - 0.5 * beta ** 2 * cov[1, 1])

    est = numerics.mc_mean(numerics.run_streams(draw, seed, n, streams))
    return McCheck("wick", est, complex(math.exp(0.5 * alpha * beta * cross)))


# ---------------------------------------------------------------------------
# lattice partition functions


@dataclass(frozen=True)
class LatticeSpec:
    L: float
    d: int = 3
    k_max: float = 8.0
    beta: float = 1.0
    mu: float = -1.0
    s: float = 1.0

    def __post_init__(self):
        if not (self.L > 0 and self.k_max >= 0 and self.beta > 0 and self.s > 0 and self.d >= 1):
            raise InvalidArgument("lattice needs L, beta, s > 0, k_max >= 0 and d >= 1")
        if not self.mu < 0:
            raise InvalidArgument("lattice partition function needs mu < 0")

    @property
    def spacing(self) -> float:
        return 2 * math.pi / self.L


def lattice_momenta(L: float, d: int, radius: float) -> np.ndarray:
    """All k in (2 pi / L) Z^d with |k| <= radius, shape (N, d), in lexicographic order."""
    h = 2 * math.pi / L
    nmax = int(math.floor(radius / h + 1e-12))
    axis = np.arange(-nmax, nmax + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    k = grid * h
    return k[np.linalg.norm(k, axis=1) <= radius * (1 + 1e-14)]


def _log_factor(spec: LatticeSpec, kn):
    x = spec.beta * (np.power(kn, spec.s) - spec.mu)
    return -np.log1p(-np.exp(-x))


def lattice_tail_bound(spec: LatticeSpec, rel: float = 1e-17) -> float:
    """Upper bound on the omitted modes of log Z_free beyond k_max.

    Lattice points n with m <= |n| < m+1 have unit cells inside the annulus of
    radii m - sqrt(d)/2 and m + 1 + sqrt(d)/2, which bounds their number by
    volume; each contributes at most the term at radius max(m, R) with R the
    truncation radius in lattice units.
    """
    d = spec.d
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    half = math.sqrt(d) / 2
    R = spec.k_max / spec.spacing
    m = int(math.floor(R))
    total = 0.0
    while True:
        count = ball * ((m + 1 + half) ** d - max(m - half, 0.0) ** d)
        term = float(_log_factor(spec, max(m, R) * spec.spacing))
        piece = count * term
        total += piece
        if piece <= rel * total or piece == 0.0:
            break
        m += 1
    return total


@dataclass(frozen=True)
class LatticeResult:
    log_z_free: float
    tail_bound: float
    e0: float
    log_z_vh: float
    n_modes: int

    def to_dict(self) -> dict:
        return asdict(self)


def lattice_ground_energy(spec: LatticeSpec, src: SourceModel | None) -> float:
    """-1/2 (2 pi / L)^d sum over lattice k != 0 in the source shell of |rho^(k)|^2 / omega^2."""
    if src is None:
        return 0.0
    if math.isinf(src.lambda_uv):
        raise InvalidArgument("lattice energy needs a finite lambda_uv")
    k = lattice_momenta(spec.L, spec.d, src.lambda_uv)
    kn = np.linalg.norm(k, axis=1)
    keep = (kn > 0) & (kn >= src.kappa)
    k, kn = k[keep], kn[keep]
    rho = src.rho_hat(k)
    vals = np.abs(rho) ** 2 / np.power(kn, 2 * spec.s)
    return -0.5 * spec.spacing ** spec.d * math.fsum(vals)


def lattice_partition(spec: LatticeSpec, src: SourceModel | None = None) -> LatticeResult:
    """log Z_free = -sum log(1 - e^{-beta(omega - mu)}) and log Z_vH = -beta E0 + log Z_free."""
    k = lattice_momenta(spec.L, spec.d, spec.k_max)
    kn = np.linalg.norm(k, axis=1)
    log_free = math.fsum(_log_factor(spec, kn))
    e0 = lattice_ground_energy(spec, src)
    return LatticeResult(log_free, lattice_tail_bound(spec), e0, -spec.beta * e0 + log_free, len(kn))


# ---------------------------------------------------------------------------
# finite-temperature Euclidean kernel and Gibbs characteristic functional


def periodic_kernel(beta: float, omega, tau):
    """C_beta(tau) = (e^{-|tau| omega} + e^{-(beta - |tau|) omega}) / (1 - e^{-beta omega})."""
    omega = np.asarray(omega, dtype=float)
    a = np.abs(tau)
    return (np.exp(-a * omega) + np.exp(-(beta - a) * omega)) / -np.expm1(-beta * omega)


def gibbs_two_time_form(thermal: ThermalParams, f: TestFunction, g: TestFunction, t1: float, t2: float,
                        cfg: QuadratureConfig | None = None, full_output: bool = False):
    """<f, C_beta(t1 - t2) g> with omega - mu in place of omega."""
    if thermal.is_ground:
        raise InvalidArgument("Gibbs functionals need a finite beta")
    beta, mu = thermal.beta, thermal.mu
    tau = math.remainder(t1 - t2, beta)
    disp = f.dispersion
    w = lambda k: periodic_kernel(beta, disp.omega(k) - mu, tau)
    ir_power = -disp.s if mu == 0 else 0.0
    return weighted_inner_product(f, g, weight=w, weight_ir_power=ir_power, cfg=cfg,
                                  full_output=full_output)


def gibbs_char_functional(thermal: ThermalParams, src: SourceModel | None, f: TestFunction, t: float = 0.0,
                          cfg: QuadratureConfig | None = None, full_output: bool = False):
    """E[exp(i phi(j_t f))] = exp(-q_C(j_t f)/4 - (i/2) Re m(f)).

    The sharp-time form is <f, C_beta(0) f> plus the condensate form; the
    mean carries the Euclidean factor 1/2, unlike the Segal-field one-point
    function of the states module.
    """
    if not 0 <= t < thermal.beta:
        raise InvalidArgument("t must lie in [0, beta)")
    if f.is_zero:
        return (1 + 0j, 0.0) if full_output else 1 + 0j
    q, eq = gibbs_two_time_form(thermal, f, f, t, t, cfg, full_output=True)
    q = q.real
    if thermal.n0:
        q += condensate_form(QuasiFreeState(None, thermal, f.dispersion), f)
    m, em = mean_functional(src, f, cfg, full_output=True)
    val = complex(np.exp(-0.25 * q - 0.5j * m.real))
    return (val, abs(val) * (0.25 * eq + 0.5 * em)) if full_output else val


# ---------------------------------------------------------------------------
# condensate chi-measure


def condensate_chi_mc(n0: float, d: int, f_hat0: complex, seed: int = 0, n: int = 1_000_000,
                      streams: int = 4) -> McCheck:
    """Mixture of coherent shifts realising exp(-q0/4).

    l = sqrt(2 (2 pi)^d n0 r) Re(e^{i theta} f^(0)) with r ~ Exp(1) and
    theta ~ U[0, 2 pi); E[e^{il}] = exp(-(2 pi)^d n0 |f^(0)|^2 / 2).
    """
    if n0 < 0:
        raise InvalidArgument("n0 must be non-negative")
    c = 2 * (2 * math.pi) ** d * n0
    f0 = complex(f_hat0)

    def draw(gen, k):
        r = gen.exponential(1.0, k)
        theta = gen.uniform(0.0, 2 * math.pi, k)
        ell = np.sqrt(c * r) * np.real(np.exp(1j * theta) * f0)
        return np.exp(1j * ell)

    est = numerics.mc_mean(numerics.run_streams(draw, seed, n, streams))
    return McCheck("chi", est, complex(math.exp(-0.5 * (2 * math.pi) ** d * n0 * abs(f0) ** 2)))


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck covariance


@dataclass(frozen=True)
class OuReport:
    times: tuple
    empirical: np.ndarray
    closed: np.ndarray
    stderr: np.ndarray
    sigmas: float
    n: int

    def to_dict(self) -> dict:
        return {"times": list(self.times), "empirical": self.empirical.tolist(),
                "closed": self.closed.tolist(), "stderr": self.stderr.tolist(),
                "sigmas": self.sigmas, "n": self.n}


def ou_paths(omega: float, times, gen: np.random.Generator, n: int) -> np.ndarray:
    """Stationary OU paths (variance 1/2, rate omega) at sorted ``times`` by exact transitions."""
    times = np.asarray(times, dtype=float)
    x = np.empty((n, len(times)))
    x[:, 0] = math.sqrt(0.5) * gen.standard_normal(n)
    for j in range(1, len(times)):
        a = math.exp(-omega * (times[j] - times[j - 1]))
        x[:, j] = a * x[:, j - 1] + math.sqrt(0.5 * (1 - a * a)) * gen.standard_normal(n)
    return x


def ou_covariance_check(omega: float, times, seed: int = 0, n: int = 1_000_000,
                        streams: int = 4) -> OuReport:
    """Empirical E[X_s X_t] against 1/2 e^{-|s-t| omega}."""
    if not omega > 0:
        raise InvalidArgument("omega must be positive")
    times = tuple(sorted(float(t) for t in times))
    if len(times) < 1:
        raise InvalidArgument("need at least one time")
    m = len(times)
    idx = list(itertools.combinations_with_replacement(range(m), 2))

    def draw(gen, k):
        x = ou_paths(omega, times, gen, k)
        return np.stack([x[:, i] * x[:, j] for i, j in idx], axis=1)

    prods = np.concatenate(numerics.run_streams(draw, seed, n, streams))
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(prods.shape[0])
    emp = np.zeros((m, m))
    err = np.zeros((m, m))
    for (i, j), v, e in zip(idx, mean, se):
        emp[i, j] = emp[j, i] = v
        err[i, j] = err[j, i] = e
    t = np.asarray(times)
    closed = 0.5 * np.exp(-omega * np.abs(t[:, None] - t[None, :]))
    sig = float(np.max(np.abs(emp - closed) / err))
    return OuReport(times, emp, closed, err, sig, prods.shape[0])
