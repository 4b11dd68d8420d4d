"""Shared numerical kernels.

Radial (possibly oscillatory) quadrature, the sine integral, Laplace
transforms of Gaussian-damped exponentials with two independent evaluation
routes, Cauchy transforms of Gaussian measures, a tensorised double Laplace
transform and a reproducible Gaussian sampler.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DivergentIntegral, InvalidArgument, NonPsdCovariance

# Truncation horizon of every Laplace integral, in units of 1/|lambda|.
LAPLACE_HORIZON = 40.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_MAX_OSC_BREAKS = 4000
# Cut-off of the logarithmic variable u = -log k (k ~ 1e-87).
_LOG_U_MAX = 200.0


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    max_subdivisions: int = 200
    oscillation_split: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidArgument("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 16:
            raise InvalidArgument("max_subdivisions must be >= 16")

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureConfig":
        known = {"abs_tol", "rel_tol", "max_subdivisions", "oscillation_split"}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown quadrature keys: {sorted(unknown)}")
        return cls(**data)


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class Gaussian1D:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidArgument("variance must be non-negative")


@dataclass(frozen=True)
class Gaussian2D:
    mean: tuple
    cov: tuple

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (2, 2) or not np.allclose(c, c.T, rtol=0, atol=1e-14):
            raise InvalidArgument("cov must be a symmetric 2x2 matrix")

    def cov_matrix(self) -> np.ndarray:
        return np.asarray(self.cov, dtype=float)


# ---------------------------------------------------------------------------
# special functions


def sine_integral(x):
    """Si(x) = int_0^x sin(t)/t dt, odd in x, Si(+-inf) = +-pi/2."""
    si, _ = special.sici(x)
    return si


# ---------------------------------------------------------------------------
# radial quadrature


def _quad_real(func, a, b, cfg: QuadratureConfig):
    out = integrate.quad(func, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                         limit=cfg.max_subdivisions, full_output=1)
    val, err = out[0], out[1]
    message = str(out[3]) if len(out) > 3 else ""
    # QUADPACK's "roundoff detected" (ier=2) still leaves a meaningful error estimate.
    clean = not message or message.startswith("The occurrence of roundoff error")
    if not math.isfinite(val) or not math.isfinite(err):
        raise DivergentIntegral(f"non-finite quadrature on [{a}, {b}]")
    if not clean:
        if err > 1e3 * max(cfg.abs_tol, cfg.rel_tol * abs(val)):
            raise DivergentIntegral(
                f"quadrature on [{a}, {b}] failed to converge (err={err:.3g}, val={val:.6g})")
    return val, err


def _quad_segment(func, a, b, cfg, is_complex):
    if not is_complex:
        return _quad_real(lambda x: float(np.real(func(x))), a, b, cfg)
    re, ere = _quad_real(lambda x: float(np.real(func(x))), a, b, cfg)
    im, eim = _quad_real(lambda x: float(np.imag(func(x))), a, b, cfg)
    return complex(re, im), ere + eim


def oscillation_breaks(rate: float, s: float, lo: float, hi: float) -> list[float]:
    """Radii in (lo, hi) where rate * k**s crosses a multiple of pi/2."""
    rate = abs(rate)
    if rate == 0 or not math.isfinite(hi):
        return []
    step = math.pi / 2 / rate
    n_lo = math.floor(lo ** s / step) + 1 if lo > 0 else 1
    n_hi = math.ceil(hi ** s / step)
    n_hi = min(n_hi, n_lo + _MAX_OSC_BREAKS)
    return [(n * step) ** (1.0 / s) for n in range(n_lo, n_hi)]


def _log_ir_segment(func, hi, cfg, is_complex):
    """int_0^hi func(k) dk via k = exp(-u) for integrands with logarithmic decay at 0.

    Profiles like k**-1.5 / log k overflow long before k underflows, so the u
    axis is cut at _LOG_U_MAX and the remaining tail, which behaves like
    C * u**p, is added in closed form with p fitted from g(U/2) and g(U).
    """
    g = lambda u: func(math.exp(-u)) * math.exp(-u)
    u0 = -math.log(hi)
    if u0 >= _LOG_U_MAX / 2:
        return _quad_segment(g, u0, math.inf, cfg, is_complex)
    v, e = _quad_segment(g, u0, _LOG_U_MAX, cfg, is_complex)
    g_hi, g_mid = complex(g(_LOG_U_MAX)), complex(g(_LOG_U_MAX / 2))
    if g_hi == 0:
        return v, e
    if g_mid == 0:
        raise DivergentIntegral("log-tail integrand does not decay")
    p = math.log(abs(g_hi) / abs(g_mid)) / math.log(2.0)
    if p >= -1.0 - 1e-6:
        raise DivergentIntegral(f"log-tail integrand decays like u**{p:.3g}; not integrable")
    tail = g_hi * _LOG_U_MAX / -(p + 1.0)
    tail = tail if is_complex else tail.real
    # the fit is exact for a pure power; otherwise the error is of order the tail itself
    return v + tail, e + abs(tail) * 1e-6


def radial_quad(func: Callable, a: float, b: float, *, breaks: Iterable[float] = (),
                cfg: QuadratureConfig | None = None, phase_rate: float = 0.0,
                s: float = 1.0, ir_mode: str = "sqrt", is_complex: bool | None = None,
                full_output: bool = False):
    """Adaptive Gauss-Kronrod integral of ``func`` over ``[a, b]``.

    The axis is split at ``breaks``, at ``k = 1`` and, when the config asks
    for it, at every quarter period of the phase ``phase_rate * k**s``.  A
    segment starting at ``k = 0`` is mapped by ``k = u**2`` (``ir_mode='sqrt'``)
    or ``k = exp(-u)`` (``ir_mode='log'``) to tame endpoint singularities.
    Geometrically wide intervals get log-spaced breakpoints.

    Returns the integral, or ``(value, abserr)`` with ``full_output``.
    """
    cfg = cfg or DEFAULT_QUAD
    if b < a:
        raise InvalidArgument("radial_quad needs a <= b")
    if a == b:
        return (0.0, 0.0) if full_output else 0.0
    if is_complex is None:
        probe = a + 0.37 * ((b - a) if math.isfinite(b) else 1.0)
        is_complex = np.iscomplexobj(func(probe))

    pts = {a, 1.0, *breaks}
    if math.isfinite(b):
        pts.add(b)
    if a > 0 and math.isfinite(b) and b / a > 16:
        pts.update(a * 4.0 ** np.arange(1, int(math.log(b / a, 4)) + 1))
    if cfg.oscillation_split and phase_rate:
        hi = b if math.isfinite(b) else max(p for p in pts if math.isfinite(p))
        pts.update(oscillation_breaks(phase_rate, s, a, hi))
    knots = sorted(p for p in pts if a <= p and (p <= b) and math.isfinite(p))

    total, err = 0.0, 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        if lo == 0.0 and ir_mode == "sqrt":
            v, e = _quad_segment(lambda u: func(u * u) * 2.0 * u, 0.0, math.sqrt(hi), cfg, is_complex)
        elif lo == 0.0 and ir_mode == "log":
            v, e = _log_ir_segment(func, hi, cfg, is_complex)
        else:
            v, e = _quad_segment(func, lo, hi, cfg, is_complex)
        total += v
        err += e
    if not math.isfinite(b):
        v, e = _quad_segment(func, knots[-1], math.inf, cfg, is_complex)
        total += v
        err += e
    return (total, err) if full_output else total


# ---------------------------------------------------------------------------
# Laplace transforms with Gaussian damping


def _sgn(lam) -> float:
    re = complex(lam).real
    if re == 0:
        raise InvalidArgument("lambda must have nonzero real part")
    return 1.0 if re > 0 else -1.0


def laplace_gauss_1d(lam, a: float, b: float = 0.0, *, method: str = "closed",
                     cfg: QuadratureConfig | None = None, full_output: bool = False):
    """-i * int_0^{sgn(lam) inf} exp(-(lam - i b) t - a t^2 / 4) dt.

    ``lam`` may be complex with nonzero real part (analytic extension of the
    resolvent); the integration direction follows the sign of its real part.
    ``method='closed'`` uses the scaled complementary error function of
    complex argument, ``method='quad'`` a truncated adaptive quadrature.
    """
    if a < 0:
        raise InvalidArgument("a must be non-negative")
    sgn = _sgn(lam)
    z = complex(lam) - 1j * b
    if method == "closed":
        if a == 0:
            val = -1j / z
        else:
            ra = math.sqrt(a)
            val = -1j * sgn * math.sqrt(math.pi) / ra * special.erfcx(sgn * z / ra)
        return (complex(val), 0.0) if full_output else complex(val)
    if method != "quad":
        raise InvalidArgument(f"unknown method {method!r}")
    horizon = LAPLACE_HORIZON / abs(z.real)
    if a > 0:
        horizon = min(horizon, math.sqrt(4 * LAPLACE_HORIZON / a))
    zz = sgn * z
    val, err = radial_quad(lambda u: np.exp(-zz * u - 0.25 * a * u * u), 0.0, horizon,
                           cfg=cfg, phase_rate=zz.imag, s=1.0, is_complex=True,
                           full_output=True)
    val = -1j * sgn * val
    err += math.exp(-LAPLACE_HORIZON) / abs(z.real)
    return (complex(val), err) if full_output else complex(val)


def cauchy_transform(g: Gaussian1D, lam, *, method: str = "closed",
                     cfg: QuadratureConfig | None = None, full_output: bool = False):
    """int 1/(i lam - x) dN(mean, variance)(x)."""
    return laplace_gauss_1d(lam, 2.0 * g.variance, -g.mean, method=method, cfg=cfg,
                            full_output=full_output)


def _gl_grid(horizon: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    h = horizon / panels
    starts = np.arange(panels) * h
    x = (starts[:, None] + (0.5 * (_GL_NODES + 1.0) * h)[None, :]).ravel()
    w = np.tile(0.5 * h * _GL_WEIGHTS, panels)
    return x, w


def double_laplace_t(lam: float, mu: float, kernel: Callable, *,
                     horizon: tuple[float, float] | None = None,
                     cfg: QuadratureConfig | None = None, full_output: bool = False):
    """int_0^{sgn(lam) inf} int_0^{sgn(mu) inf} exp(-lam s - mu t) T(s, t) ds dt.

    ``kernel`` must accept broadcasting numpy arrays and satisfy |T| <= 1.
    Tensorised composite Gauss-Legendre on the truncated quadrant, with panel
    doubling until two successive resolutions agree.  ``horizon`` may shrink
    the truncation box when the caller knows a Gaussian bound on ``T``.
    """
    cfg = cfg or DEFAULT_QUAD
    if lam == 0 or mu == 0:
        raise InvalidArgument("lambda and mu must be nonzero")
    sl, sm = math.copysign(1.0, lam), math.copysign(1.0, mu)
    hs, ht = LAPLACE_HORIZON / abs(lam), LAPLACE_HORIZON / abs(mu)
    if horizon is not None:
        hs, ht = min(hs, horizon[0]), min(ht, horizon[1])
    tail = 2.0 * math.exp(-LAPLACE_HORIZON) / (abs(lam) * abs(mu))

    def evaluate(panels):
        us, ws = _gl_grid(hs, panels)
        ut, wt = _gl_grid(ht, panels)
        ss, tt = sl * us, sm * ut
        vals = np.exp(-lam * ss)[:, None] * np.exp(-mu * tt)[None, :] * kernel(ss[:, None], tt[None, :])
        return sl * sm * (ws @ vals @ wt)

    prev = evaluate(4)
    panels = 8
    while True:
        cur = evaluate(panels)
        diff = abs(cur - prev)
        if diff <= max(cfg.abs_tol, cfg.rel_tol * abs(cur)) or panels >= 256:
            break
        prev = cur
        panels *= 2
    if diff > 1e-8 * max(1.0, abs(cur)):
        raise DivergentIntegral(f"double Laplace integral did not converge (diff={diff:.3g})")
    err = diff + tail
    return (complex(cur), err) if full_output else complex(cur)


# ---------------------------------------------------------------------------
# sampling


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    key = np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def psd_factor(cov: np.ndarray, clamp: float = 1e-12, fail: float = 1e-8) -> np.ndarray:
    """Square-root factor ``L`` with ``L @ L.T == cov`` after clamping tiny negative modes."""
    cov = np.asarray(cov, dtype=float)
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -fail:
        raise NonPsdCovariance(f"covariance has eigenvalue {evals.min():.3g}")
    evals = np.where(evals < clamp, np.maximum(evals, 0.0), evals)
    return evecs * np.sqrt(evals)[None, :]


def gaussian_sampler(seed: int, g: Gaussian1D | Gaussian2D, n: int, stream: int = 0) -> np.ndarray:
    """Draw ``n`` samples, shape (n,) for 1-D and (n, 2) for 2-D."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    gen = rng(seed, stream)
    if isinstance(g, Gaussian1D):
        if g.variance == 0:
            return np.full(n, float(g.mean))
        return g.mean + math.sqrt(g.variance) * gen.standard_normal(n)
    factor = psd_factor(g.cov_matrix())
    z = gen.standard_normal((n, 2))
    return np.asarray(g.mean, dtype=float)[None, :] + z @ factor.T


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: np.ndarray
    cov: np.ndarray
    mean_stderr: np.ndarray
    var_stderr: np.ndarray


def summarize(samples: np.ndarray) -> SampleSummary:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    var = np.diag(cov)
    return SampleSummary(n=n, mean=mean, cov=cov, mean_stderr=np.sqrt(var / n),
                         var_stderr=var * math.sqrt(2.0 / max(n - 1, 1)))


@dataclass(frozen=True)
class McEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    n: int

    def sigmas(self, target: complex) -> float:
        """Largest componentwise deviation from ``target`` in standard errors."""
        d = complex(self.value) - complex(target)
        out = 0.0
        for diff, se in ((d.real, self.stderr_re), (d.imag, self.stderr_im)):
            if se > 0:
                out = max(out, abs(diff) / se)
            elif abs(diff) > 1e-12 * max(1.0, abs(target)):
                out = math.inf
        return out


def mc_mean(values: Sequence[np.ndarray]) -> McEstimate:
    """Combine per-stream sample arrays into one mean with standard errors."""
    v = np.concatenate([np.asarray(a) for a in values])
    n = v.size
    re, im = np.real(v), np.imag(v)
    se = lambda a: float(np.std(a, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(value=complex(re.mean(), im.mean()), stderr_re=se(re), stderr_im=se(im), n=n)


def split_counts(n: int, streams: int) -> list[int]:
    if n < 1 or streams < 1:
        raise InvalidArgument("n and streams must be >= 1")
    streams = min(streams, n)
    base, extra = divmod(n, streams)
    return [base + (1 if i < extra else 0) for i in range(streams)]


def run_streams(draw: Callable[[np.random.Generator, int], np.ndarray], seed: int, n: int,
                streams: int = 4, workers: int | None = None) -> list[np.ndarray]:
    """Evaluate ``draw(gen, count)`` on independent (seed, stream) generators.

    The split of ``n`` over streams and each stream's generator depend only on
    the arguments, so results are reproducible whatever the thread schedule.
    """
    counts = split_counts(n, streams)
    jobs = [(rng(seed, i), c) for i, c in enumerate(counts)]
    with ThreadPoolExecutor(max_workers=workers or len(jobs)) as pool:
        return list(pool.map(lambda job: np.asarray(draw(*job)), jobs))
