"""Dispersion relations, radial test functions, point sources and the mean functional.

Every test function is a finite sum ``sum_j c_j exp(i t_j omega(k)) p_j(|k|)``
of closed-form radial profiles, so all inner products and mean functionals
reduce to one-dimensional radial integrals.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument, IrDivergent, Unsupported, UvDivergent
from .numerics import QuadratureConfig, radial_quad

# Profiles below this magnitude are treated as zero when truncating the radial axis.
_NEGLIGIBLE = 1e-40


# ---------------------------------------------------------------------------
# dispersion


@dataclass(frozen=True)
class Dispersion:
    """omega(k) = |k|**s on R^d.

    ``mean_exponent`` is the power in m = omega**(-mean_exponent) * rho.
    """

    s: float = 1.0
    d: int = 3
    mean_exponent: float = 1.5

    def __post_init__(self):
        if not self.s > 0:
            raise InvalidArgument("dispersion exponent s must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgument("dimension d must be a positive integer")
        if self.d != 3:
            warnings.warn("d != 3 is experimental: the source conventions are three-dimensional",
                          stacklevel=3)

    def omega(self, k):
        return np.power(k, self.s)

    @property
    def sphere_area(self) -> float:
        return 2.0 * math.pi ** (self.d / 2) / math.gamma(self.d / 2)

    def to_dict(self) -> dict:
        out = {"s": self.s, "d": self.d}
        if self.mean_exponent != 1.5:
            out["mean_exponent"] = self.mean_exponent
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Dispersion":
        return cls(s=float(data.get("s", 1.0)), d=int(data.get("d", 3)),
                   mean_exponent=float(data.get("mean_exponent", 1.5)))


# ---------------------------------------------------------------------------
# radial profiles
#
# ``ir_order``/``uv_order`` give (alpha, beta) with p(k) ~ k**alpha |log k|**beta
# near 0 / infinity; ``None`` means the profile vanishes identically near that
# end (or decays faster than any power at infinity).


def integrable_order(alpha: float, beta: float, end: str) -> bool:
    if end == "ir":
        if alpha > -1 + 1e-12:
            return True
        return abs(alpha + 1) <= 1e-12 and beta < -1
    if alpha < -1 - 1e-12:
        return True
    return abs(alpha + 1) <= 1e-12 and beta < -1


class RadialProfile:
    kind: str = ""

    def value(self, k):
        raise NotImplementedError

    def at_zero(self) -> float | None:
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def ir_order(self) -> tuple[float, float] | None:
        raise NotImplementedError

    @property
    def uv_order(self) -> tuple[float, float] | None:
        raise NotImplementedError

    def extent(self) -> float:
        """Radius beyond which the profile is negligible (may be inf)."""
        return self.support[1]

    @property
    def params(self) -> list[float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    @staticmethod
    def from_dict(data: dict) -> "RadialProfile":
        kind = data.get("kind")
        params = [float(p) for p in data.get("params", [])]
        try:
            cls = PROFILE_KINDS[kind]
        except KeyError:
            raise InvalidArgument(f"unknown profile kind {kind!r}") from None
        return cls(*params)


@dataclass(frozen=True)
class ShellIndicator(RadialProfile):
    a: float = 0.0
    b: float = math.inf
    kind = "shell_indicator"

    def __post_init__(self):
        if not (0 <= self.a < self.b):
            raise InvalidArgument("ShellIndicator needs 0 <= a < b")

    def value(self, k):
        k = np.asarray(k, dtype=float)
        return np.where((k >= self.a) & (k <= self.b), 1.0, 0.0)

    def at_zero(self):
        return 1.0 if self.a == 0 else 0.0

    @property
    def support(self):
        return (self.a, self.b)

    @property
    def ir_order(self):
        return (0.0, 0.0) if self.a == 0 else None

    @property
    def uv_order(self):
        return (0.0, 0.0) if math.isinf(self.b) else None

    @property
    def params(self):
        return [self.a, self.b]


@dataclass(frozen=True)
class GaussianBump(RadialProfile):
    sigma: float = 1.0
    kind = "gaussian_bump"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgument("GaussianBump needs sigma > 0")

    def value(self, k):
        k = np.asarray(k, dtype=float)
        return np.exp(-k * k / (2.0 * self.sigma ** 2))

    def at_zero(self):
        return 1.0

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def ir_order(self):
        return (0.0, 0.0)

    @property
    def uv_order(self):
        return None

    def extent(self):
        return self.sigma * math.sqrt(2.0 * math.log(1.0 / _NEGLIGIBLE))

    @property
    def params(self):
        return [self.sigma]


@dataclass(frozen=True)
class PolynomialWindow(RadialProfile):
    """|k|**p on a <= |k| <= b."""

    p: float = 1.0
    a: float = 0.0
    b: float = 1.0
    kind = "polynomial_window"

    def __post_init__(self):
        if self.p < 0 or not (0 <= self.a < self.b):
            raise InvalidArgument("PolynomialWindow needs p >= 0 and 0 <= a < b")

    def value(self, k):
        k = np.asarray(k, dtype=float)
        return np.where((k >= self.a) & (k <= self.b), np.power(k, self.p), 0.0)

    def at_zero(self):
        if self.a > 0 or self.p > 0:
            return 0.0
        return 1.0

    @property
    def support(self):
        return (self.a, self.b)

    @property
    def ir_order(self):
        return (self.p, 0.0) if self.a == 0 else None

    @property
    def uv_order(self):
        return (self.p, 0.0) if math.isinf(self.b) else None

    @property
    def params(self):
        return [self.p, self.a, self.b]


@dataclass(frozen=True)
class LogCounterexample(RadialProfile):
    """-1/(|k|**1.5 log|k|) for |k| < radius.

    The default radius 1/e is where the squared norm in three dimensions is
    exactly 4*pi; any radius up to 1 keeps the value positive, but at radius 1
    the norm diverges at the outer edge.
    """

    radius: float = math.exp(-1.0)
    kind = "log_counterexample"

    def __post_init__(self):
        if not (0 < self.radius <= 1):
            raise InvalidArgument("LogCounterexample radius must lie in (0, 1]")

    def value(self, k):
        k = np.asarray(k, dtype=float)
        inside = (k > 0) & (k < self.radius)
        kk = np.where(inside, k, 0.5)
        return np.where(inside, -1.0 / (kk ** 1.5 * np.log(kk)), 0.0)

    def at_zero(self):
        return None

    @property
    def support(self):
        return (0.0, self.radius)

    @property
    def ir_order(self):
        return (-1.5, -1.0)

    @property
    def uv_order(self):
        return None

    @property
    def params(self):
        return [self.radius]


PROFILE_KINDS = {cls.kind: cls for cls in (ShellIndicator, GaussianBump, PolynomialWindow,
                                           LogCounterexample)}


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class Term:
    c: complex
    profile: RadialProfile
    t: float = 0.0


@dataclass(frozen=True)
class TestFunction:
    """f^(k) = sum_j c_j exp(i t_j omega(k)) p_j(|k|)."""

    __test__ = False  # keep pytest from collecting this class

    terms: tuple = ()
    dispersion: Dispersion = field(default_factory=Dispersion)

    @classmethod
    def single(cls, profile: RadialProfile, c: complex = 1.0, t: float = 0.0,
               dispersion: Dispersion | None = None) -> "TestFunction":
        return cls((Term(complex(c), profile, float(t)),), dispersion or Dispersion())

    @classmethod
    def zero(cls, dispersion: Dispersion | None = None) -> "TestFunction":
        return cls((), dispersion or Dispersion())

    @property
    def is_zero(self) -> bool:
        return all(term.c == 0 for term in self.terms)

    def hat(self, k):
        k = np.asarray(k, dtype=float)
        w = self.dispersion.omega(k)
        out = np.zeros(np.shape(k), dtype=complex)
        for term in self.terms:
            out = out + term.c * np.exp(1j * term.t * w) * term.profile.value(k)
        return out

    def hat_at_zero(self) -> complex | None:
        total = 0j
        for term in self.terms:
            if term.c == 0:
                continue
            p0 = term.profile.at_zero()
            if p0 is None:
                return None
            total += term.c * p0
        return total

    def evolve(self, t: float) -> "TestFunction":
        """exp(i t omega) f."""
        return TestFunction(tuple(Term(x.c, x.profile, x.t + t) for x in self.terms), self.dispersion)

    def _check(self, other: "TestFunction"):
        if other.dispersion != self.dispersion:
            raise InvalidArgument("test functions carry different dispersions")

    def __add__(self, other: "TestFunction") -> "TestFunction":
        self._check(other)
        return TestFunction(self.terms + other.terms, self.dispersion)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + (-other)

    def __neg__(self) -> "TestFunction":
        return self * -1.0

    def __mul__(self, scalar) -> "TestFunction":
        scalar = complex(scalar)
        return TestFunction(tuple(Term(x.c * scalar, x.profile, x.t) for x in self.terms), self.dispersion)

    __rmul__ = __mul__

    @property
    def max_phase(self) -> float:
        return max((abs(x.t) for x in self.terms), default=0.0)

    def to_dict(self) -> dict:
        return {
            "dispersion": self.dispersion.to_dict(),
            "terms": [{"re": x.c.real, "im": x.c.imag, "profile": x.profile.to_dict(), "t": x.t}
                      for x in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestFunction":
        disp = Dispersion.from_dict(data.get("dispersion", {}))
        terms = []
        for item in data.get("terms", []):
            c = complex(float(item.get("re", 0.0)), float(item.get("im", 0.0)))
            terms.append(Term(c, RadialProfile.from_dict(item["profile"]), float(item.get("t", 0.0))))
        return cls(tuple(terms), disp)


# ---------------------------------------------------------------------------
# sources


def _parse_cutoff(value) -> float:
    if value is None or value == "inf" or value == "Infinity":
        return math.inf
    return float(value)


@dataclass(frozen=True)
class SourceModel:
    """Point source (rho^ = 1) or point-source cluster with shell cutoff [kappa, lambda_uv]."""

    convention: str = "unit_point"
    points: tuple = ((1.0, (0.0, 0.0, 0.0)),)
    kappa: float = 0.0
    lambda_uv: float = math.inf

    def __post_init__(self):
        if self.convention not in ("unit_point", "cluster"):
            raise InvalidArgument(f"unknown source convention {self.convention!r}")
        if not (0 <= self.kappa < self.lambda_uv):
            raise InvalidArgument("source cutoffs need 0 <= kappa < lambda_uv")
        if self.convention == "cluster":
            xs = self.positions
            for i in range(len(xs)):
                for j in range(i):
                    if np.linalg.norm(xs[i] - xs[j]) == 0:
                        raise InvalidArgument("cluster positions must be pairwise distinct")

    @classmethod
    def unit_point(cls, kappa: float = 0.0, lambda_uv: float = math.inf) -> "SourceModel":
        return cls("unit_point", ((1.0, (0.0, 0.0, 0.0)),), kappa, lambda_uv)

    @classmethod
    def cluster(cls, points, kappa: float = 0.0, lambda_uv: float = math.inf) -> "SourceModel":
        pts = tuple((float(lam), tuple(float(c) for c in x)) for lam, x in points)
        return cls("cluster", pts, kappa, lambda_uv)

    def with_cutoffs(self, kappa: float, lambda_uv: float) -> "SourceModel":
        return SourceModel(self.convention, self.points, kappa, lambda_uv)

    @property
    def strengths(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    @property
    def r0(self) -> float:
        """Nearest-neighbour distance (inf for a single point)."""
        xs = self.positions
        best = math.inf
        for i in range(len(xs)):
            for j in range(i):
                best = min(best, float(np.linalg.norm(xs[i] - xs[j])))
        return best

    def rho_hat(self, kvec):
        """rho^(k) including the cutoff indicator; ``kvec`` has shape (..., d)."""
        kvec = np.asarray(kvec, dtype=float)
        kn = np.linalg.norm(kvec, axis=-1)
        inside = (kn >= self.kappa) & (kn <= self.lambda_uv)
        if self.convention == "unit_point":
            return np.where(inside, 1.0 + 0j, 0j)
        phases = np.exp(-1j * kvec @ self.positions.T)
        val = (2 * math.pi) ** -1.5 * (phases @ self.strengths)
        return np.where(inside, val, 0j)

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "points": [{"lambda": lam, "x": list(x)} for lam, x in self.points],
            "kappa": self.kappa,
            "lambda_uv": None if math.isinf(self.lambda_uv) else self.lambda_uv,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        conv = data.get("convention", "unit_point")
        pts = data.get("points") or [{"lambda": 1.0, "x": [0.0, 0.0, 0.0]}]
        points = tuple((float(p["lambda"]), tuple(float(c) for c in p["x"])) for p in pts)
        return cls(conv, points, float(data.get("kappa", 0.0)), _parse_cutoff(data.get("lambda_uv")))


# ---------------------------------------------------------------------------
# radial integrals


def _pair_orders(p: RadialProfile, q: RadialProfile):
    ir = uv = None
    if p.ir_order is not None and q.ir_order is not None:
        ir = (p.ir_order[0] + q.ir_order[0], p.ir_order[1] + q.ir_order[1])
    if p.uv_order is not None and q.uv_order is not None:
        uv = (p.uv_order[0] + q.uv_order[0], p.uv_order[1] + q.uv_order[1])
    return ir, uv


def _edges(profiles) -> list[float]:
    out = []
    for p in profiles:
        lo, hi = p.support
        out.append(lo)
        if math.isfinite(hi):
            out.append(hi)
    return out


def weighted_inner_product(f: TestFunction, g: TestFunction,
                           weight: Callable | None = None, weight_ir_power: float = 0.0,
                           cfg: QuadratureConfig | None = None, full_output: bool = False):
    """int conj(f^) w(|k|) g^ dk for a radial weight bounded at infinity.

    ``weight_ir_power`` is the power of k with which ``w`` blows up (negative)
    or vanishes near the origin; it enters the analytic integrability test.
    """
    f._check(g)
    disp = f.dispersion
    pairs = [(x, y) for x in f.terms if x.c != 0 for y in g.terms if y.c != 0]
    if not pairs:
        return (0j, 0.0) if full_output else 0j

    lo, hi, phase, log_ir = math.inf, 0.0, 0.0, False
    for x, y in pairs:
        a = max(x.profile.support[0], y.profile.support[0])
        b = min(x.profile.extent(), y.profile.extent())
        if a >= b:
            continue
        ir, uv = _pair_orders(x.profile, y.profile)
        if ir is not None:
            alpha = ir[0] + disp.d - 1 + weight_ir_power
            if not integrable_order(alpha, ir[1], "ir"):
                raise IrDivergent(f"<{x.profile}, {y.profile}> diverges at k -> 0")
            log_ir = log_ir or ir[1] != 0
        if uv is not None and math.isinf(b):
            if not integrable_order(uv[0] + disp.d - 1, uv[1], "uv"):
                raise UvDivergent(f"<{x.profile}, {y.profile}> diverges at k -> inf")
        lo, hi = min(lo, a), max(hi, b)
        phase = max(phase, abs(y.t - x.t))
    if lo >= hi:
        return (0j, 0.0) if full_output else 0j

    area = disp.sphere_area
    dm1 = disp.d - 1

    def integrand(k):
        val = np.conj(f.hat(k)) * g.hat(k) * k ** dm1
        if weight is not None:
            val = val * weight(k)
        return complex(area * val)

    breaks = _edges([x.profile for x in f.terms] + [y.profile for y in g.terms])
    return radial_quad(integrand, lo, hi, breaks=breaks, cfg=cfg, phase_rate=phase,
                       s=disp.s, ir_mode="log" if log_ir else "sqrt", is_complex=True,
                       full_output=full_output)


def inner_product(f: TestFunction, g: TestFunction, cfg: QuadratureConfig | None = None,
                  full_output: bool = False):
    """<f, g> = int conj(f^) g^ dk (antilinear in the first slot)."""
    return weighted_inner_product(f, g, cfg=cfg, full_output=full_output)


def l2_norm_sq(f: TestFunction, cfg: QuadratureConfig | None = None, full_output: bool = False):
    val, err = inner_product(f, f, cfg=cfg, full_output=True)
    return (val.real, err) if full_output else val.real


def symplectic_form(f: TestFunction, g: TestFunction, cfg: QuadratureConfig | None = None) -> float:
    return inner_product(f, g, cfg=cfg).imag


# ---------------------------------------------------------------------------
# domain of the mean functional


class DomClass(str, enum.Enum):
    IN_DOM_M = "InDomM"
    NOT_IN_DOM_M = "NotInDomM"
    INCONCLUSIVE = "Inconclusive"


DIVERGENT_RATIO = 0.98
DIVERGENT_RUN = 8
CONVERGENT_RATIO = 0.7
TAIL_FRACTION = 1e-12
MAX_SHELLS = 90
_SHELL_CFG = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-9, max_subdivisions=100,
                              oscillation_split=True)


def analytic_end_status(f: TestFunction, end: str, power_shift: float) -> str:
    """'conv', 'div' or 'unknown' for int |f^| k**(d-1+power_shift) near ``end``."""
    disp = f.dispersion
    failing = 0
    for x in f.terms:
        if x.c == 0:
            continue
        if end == "uv" and math.isfinite(x.profile.extent()):
            continue
        order = x.profile.ir_order if end == "ir" else x.profile.uv_order
        if order is None:
            continue
        if not integrable_order(order[0] + disp.d - 1 + power_shift, order[1], end):
            failing += 1
    if failing == 0:
        return "conv"
    return "div" if failing == 1 else "unknown"


def shell_sums(f: TestFunction, end: str, power_shift: float, count: int = MAX_SHELLS) -> list[float]:
    """Dyadic shell integrals of |f^| k**(d-1+power_shift) towards ``end``."""
    disp = f.dispersion
    area = disp.sphere_area
    pw = disp.d - 1 + power_shift
    if end == "ir":
        shells = [(2.0 ** (-j - 1), 2.0 ** (-j)) for j in range(count)]
    else:
        shells = [(2.0 ** j, 2.0 ** (j + 1)) for j in range(count)]
    breaks = _edges([x.profile for x in f.terms])
    out = []
    for lo, hi in shells:
        integrand = lambda k: area * abs(complex(f.hat(k))) * k ** pw
        out.append(radial_quad(integrand, lo, hi, breaks=breaks, cfg=_SHELL_CFG,
                               phase_rate=f.max_phase, s=disp.s, is_complex=False))
    return out


def classify_shells(sums: list[float]) -> str:
    """Apply the ratio test to a shell sequence: 'conv', 'div' or 'unknown'."""
    total = 0.0
    run_div = 0
    small = []
    zeros = 0
    for j, cur in enumerate(sums):
        total += cur
        if cur == 0.0:
            zeros += 1
            if zeros >= 3:
                return "conv"
            continue
        zeros = 0
        if j == 0 or sums[j - 1] == 0.0:
            continue
        r = cur / sums[j - 1]
        run_div = run_div + 1 if r >= DIVERGENT_RATIO else 0
        if run_div >= DIVERGENT_RUN:
            return "div"
        small = small + [r] if r <= CONVERGENT_RATIO else []
        if len(small) >= 3:
            rmax = max(small[-3:])
            if cur * rmax / (1.0 - rmax) <= TAIL_FRACTION * total:
                return "conv"
    return "unknown"


def _end_status(f: TestFunction, end: str, power_shift: float, method: str) -> str:
    if method == "analytic" or method == "auto":
        status = analytic_end_status(f, end, power_shift)
        if status != "unknown" or method == "analytic":
            return status
    return classify_shells(shell_sums(f, end, power_shift), )


def dom_check(f: TestFunction, method: str = "auto") -> DomClass:
    """Is int |f^| / omega**mean_exponent dk finite at both ends?

    ``method`` is 'auto' (analytic flags, numeric fallback), 'analytic' or
    'numeric' (dyadic shell sums only).
    """
    disp = f.dispersion
    shift = -disp.mean_exponent * disp.s
    ir = _end_status(f, "ir", shift, method)
    uv = _end_status(f, "uv", shift, method)
    if "div" in (ir, uv):
        return DomClass.NOT_IN_DOM_M
    if ir == uv == "conv":
        return DomClass.IN_DOM_M
    return DomClass.INCONCLUSIVE


# ---------------------------------------------------------------------------
# mean functional and cocycle


def mean_functional(src: SourceModel | None, f: TestFunction, cfg: QuadratureConfig | None = None,
                    *, extra_power: float = 0.0, full_output: bool = False):
    """m_{kappa,Lambda}(f) = int_{kappa<=|k|<=Lambda} conj(rho^) f^ / omega**(3/2) dk.

    ``extra_power`` multiplies the integrand by omega**extra_power.
    """
    if src is None or f.is_zero:
        return (0j, 0.0) if full_output else 0j
    if src.convention != "unit_point":
        raise Unsupported("mean functional is only available for the unit point source")
    disp = f.dispersion
    shift = (extra_power - disp.mean_exponent) * disp.s
    if src.kappa == 0:
        status = _end_status(f, "ir", shift, "auto")
        if status != "conv":
            raise IrDivergent(f"f is not integrable against omega^-{disp.mean_exponent} at k -> 0 ({status})")
    if math.isinf(src.lambda_uv):
        status = _end_status(f, "uv", shift, "auto")
        if status != "conv":
            raise UvDivergent(f"f is not integrable against omega^-{disp.mean_exponent} at k -> inf ({status})")

    live = [x for x in f.terms if x.c != 0]
    lo = max(src.kappa, min(x.profile.support[0] for x in live))
    hi = min(src.lambda_uv, max(x.profile.extent() for x in live))
    if lo >= hi:
        return (0j, 0.0) if full_output else 0j
    area = disp.sphere_area
    pw = disp.d - 1 + shift
    log_ir = lo == 0 and any(x.profile.ir_order is not None and x.profile.ir_order[1] != 0 for x in live)

    def integrand(k):
        return complex(area * f.hat(k) * k ** pw)

    breaks = _edges([x.profile for x in live]) + [src.kappa]
    if math.isfinite(src.lambda_uv):
        breaks.append(src.lambda_uv)
    return radial_quad(integrand, lo, hi, breaks=breaks, cfg=cfg, phase_rate=f.max_phase,
                       s=disp.s, ir_mode="log" if log_ir else "sqrt", is_complex=True,
                       full_output=full_output)


def mean_functional_real(src: SourceModel | None, f: TestFunction,
                         cfg: QuadratureConfig | None = None) -> float:
    return mean_functional(src, f, cfg).real


def cocycle_m(src: SourceModel | None, f: TestFunction, t: float,
              cfg: QuadratureConfig | None = None, full_output: bool = False):
    """M_t(f) = Re m((exp(i t omega) - 1) f), one quadrature of the combined integrand."""
    if t == 0 or src is None:
        return (0.0, 0.0) if full_output else 0.0
    val, err = mean_functional(src, f.evolve(t) - f, cfg, full_output=True)
    return (val.real, err) if full_output else val.real


def cocycle_derivative(src: SourceModel | None, f: TestFunction,
                       cfg: QuadratureConfig | None = None) -> float:
    """d/dt M_t(f) at t = 0, i.e. Re m(i omega f)."""
    if src is None:
        return 0.0
    return (1j * mean_functional(src, f, cfg, extra_power=1.0)).real
