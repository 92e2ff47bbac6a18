"""Band-limited superoscillatory function and the box state built from it."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq

from .precision import ExactSineSeries, exact, working_bits

# Upper bound on n_order * ln((1 + alpha) / 2); keeps every binomial term and
# |f| finite in double while admitting N = 400 at alpha = 4.
DYNAMIC_RANGE_LIMIT = 400.0


class ParameterRangeError(ValueError):
    """Parameters outside the supported range."""


class DomainError(ValueError):
    """Evaluation point outside the box."""


@dataclass(frozen=True)
class SuperoscSpec:
    """Order N, target wavenumber alpha and unit length a of the family."""

    n_order: int
    alpha: float
    unit_length: float = 1.0

    def __post_init__(self):
        if int(self.n_order) != self.n_order or self.n_order < 1:
            raise ParameterRangeError(f"n_order must be a positive integer, got {self.n_order}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ParameterRangeError(f"alpha must be positive, got {self.alpha}")
        if not (self.unit_length > 0 and math.isfinite(self.unit_length)):
            raise ParameterRangeError(f"unit_length must be positive, got {self.unit_length}")
        if self.dynamic_range > DYNAMIC_RANGE_LIMIT:
            raise ParameterRangeError(
                f"n_order*ln((1+alpha)/2) = {self.dynamic_range:.1f} exceeds {DYNAMIC_RANGE_LIMIT}; "
                "lower n_order or alpha")

    @property
    def dynamic_range(self) -> float:
        return self.n_order * math.log((1.0 + self.alpha) / 2.0)

    @property
    def half_length(self) -> float:
        """Box half-length pi*N*a; f and psi are evaluated on [-half_length, half_length]."""
        return math.pi * self.n_order * self.unit_length

    @property
    def superosc_radius(self) -> float:
        return math.sqrt(self.n_order) * self.unit_length

    @property
    def honest_radius(self) -> float:
        """Radius where the quadratic log term reaches 1/2."""
        if self.alpha <= 1.0:
            return math.inf
        return math.sqrt(2.0 * self.n_order / (self.alpha ** 2 - 1.0)) * self.unit_length

    @property
    def log_peak(self) -> float:
        """ln max|f|; the maximum sits at x = +-pi*N*a/2 when alpha > 1."""
        return self.n_order * math.log(max(self.alpha, 1.0))

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lim = self.half_length * (1 + 1e-12)
        if np.any(np.abs(x) > lim):
            raise DomainError(f"|x| must not exceed {self.half_length:.6g}")
        return x


@dataclass(frozen=True)
class FourierMode:
    index: int
    wavenumber: float
    coefficient: float
    log_abs: float
    sign: int


def exact_coefficients(spec: SuperoscSpec) -> list[mpq]:
    """c_n = C(N,n) (1+alpha)^n (1-alpha)^(N-n) / 2^N as exact rationals."""
    n_ord = spec.n_order
    a = exact(spec.alpha)
    up, down = 1 + a, 1 - a
    denom = mpq(2) ** n_ord
    return [gmpy2.comb(n_ord, n) * up ** n * down ** (n_ord - n) / denom for n in range(n_ord + 1)]


def binomial_coefficients(spec: SuperoscSpec) -> list[FourierMode]:
    n_ord, alpha = spec.n_order, spec.alpha
    log_up = math.log1p(alpha)
    diff = 1.0 - alpha
    log_down = math.log(abs(diff)) if diff != 0 else -math.inf
    modes = []
    for n in range(n_ord + 1):
        m = n_ord - n
        if diff == 0 and m > 0:
            log_abs, sign = -math.inf, 0
        else:
            log_abs = (math.lgamma(n_ord + 1) - math.lgamma(n + 1) - math.lgamma(m + 1)
                       + n * log_up + (m * log_down if m else 0.0) - n_ord * math.log(2.0))
            sign = -1 if (diff < 0 and m % 2) else 1
        try:
            coeff = sign * math.exp(log_abs)
        except OverflowError:
            coeff = math.copysign(math.inf, sign)
        modes.append(FourierMode(n, 2.0 * n / n_ord - 1.0, coeff, log_abs, sign))
    return modes


def log_f(spec: SuperoscSpec, x) -> np.ndarray:
    """Continuous complex logarithm of f from the product form."""
    x = spec.check_domain(x)
    u = x / (spec.n_order * spec.unit_length)
    re = 0.5 * np.log(np.cos(u) ** 2 + spec.alpha ** 2 * np.sin(u) ** 2)
    im = np.arctan2(spec.alpha * np.sin(u), np.cos(u))
    return spec.n_order * (re + 1j * im)


def eval_f(spec: SuperoscSpec, x):
    lf = log_f(spec, x)
    out = np.exp(lf.real) * np.exp(1j * lf.imag)
    return out[()] if np.ndim(out) == 0 else out


def eval_f_sum(spec: SuperoscSpec, x, coeffs: Sequence[mpq] | None = None) -> np.ndarray:
    """f from the Fourier sum, evaluated in extended precision."""
    x = spec.check_domain(x)
    coeffs = exact_coefficients(spec) if coeffs is None else coeffs
    n_ord = spec.n_order
    unit = mpq(n_ord) * exact(spec.unit_length)
    ks = [mpq(2 * n - n_ord) / unit for n in range(n_ord + 1)]
    bits = working_bits(coeffs) + 32
    out = np.empty(x.shape, dtype=complex)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        cf = [mpfr(c) for c in coeffs]
        for idx, xv in np.ndenumerate(x):
            xm = mpfr(float(xv))
            re = im = mpfr(0)
            for c, k in zip(cf, ks):
                arg = mpfr(k) * xm
                re += c * gmpy2.cos(arg)
                im += c * gmpy2.sin(arg)
            out[idx] = complex(float(re), float(im))
    return out


@dataclass(frozen=True)
class BoxStateSpec:
    """Normalized odd box state psi = (i/norm)(f - conj f) as a sine series.

    ``raw`` holds exact amplitudes r_j of sin(j x / (N a)), j > 0, so that
    psi(x) = sum_j r_j sin(j x / (N a)) / norm_constant.
    """

    spec: SuperoscSpec
    harmonics: tuple[int, ...]
    raw: tuple = field(repr=False)
    log_norm: float = 0.0

    @property
    def norm_constant(self) -> float:
        return math.exp(self.log_norm)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.asarray(self.harmonics, dtype=float) / (self.spec.n_order * self.spec.unit_length)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        """Normalized amplitudes r_j / norm_constant."""
        with gmpy2.context(gmpy2.get_context(), precision=80):
            scale = gmpy2.exp(mpfr(-self.log_norm))
            return np.array([float(mpfr(r) * scale) for r in self.raw])

    @property
    def sine_modes(self) -> list[tuple[float, float]]:
        return list(zip(self.wavenumbers.tolist(), self.amplitudes.tolist()))

    def norm_residual(self) -> float:
        return abs(float(np.sum(self.amplitudes ** 2)) * self.spec.half_length - 1.0)

    @cached_property
    def series(self) -> ExactSineSeries:
        unit = mpq(self.spec.n_order) * exact(self.spec.unit_length)
        ks = [mpq(j) / unit for j in self.harmonics]
        return ExactSineSeries(ks, [0] * len(ks), self.raw)


def build_box_state(spec: SuperoscSpec) -> BoxStateSpec:
    coeffs = exact_coefficients(spec)
    n_ord = spec.n_order
    harmonics, raw = [], []
    for n in range(n_ord + 1):
        j = 2 * n - n_ord
        if j <= 0:
            continue
        r = -2 * (coeffs[n] - coeffs[n_ord - n])
        if r != 0:
            harmonics.append(j)
            raw.append(r)
    if not raw:
        raise ParameterRangeError("psi vanishes identically for these parameters")
    sq = sum(r * r for r in raw)
    with gmpy2.context(gmpy2.get_context(), precision=80):
        log_norm = 0.5 * (math.log(spec.half_length) + float(gmpy2.log(mpfr(sq))))
    return BoxStateSpec(spec, tuple(harmonics), tuple(raw), log_norm)


def eval_psi(state: BoxStateSpec, x) -> np.ndarray:
    """psi(x) from the sine-mode sum in extended precision."""
    x = state.spec.check_domain(x)
    flat = np.atleast_1d(x).ravel()
    vals = state.series.sample(flat, [0.0])[0].real
    out = vals * math.exp(-state.log_norm)
    return out.reshape(np.shape(x)) if np.ndim(x) else out[0]


def psi_product_form(state: BoxStateSpec, x) -> np.ndarray:
    """psi(x) = -2 Im f / norm in double precision via the product form."""
    lf = log_f(state.spec, x)
    return -2.0 * np.exp(lf.real - state.log_norm) * np.sin(lf.imag)


@dataclass
class RegionReport:
    radius: float
    max_deviation: float
    wavenumber_min: float
    wavenumber_max: float
    alpha: float
    quadratic_bound: float

    @property
    def wavenumber_error(self) -> float:
        return max(abs(self.wavenumber_min - self.alpha), abs(self.wavenumber_max - self.alpha)) / self.alpha


def local_wavenumber(spec: SuperoscSpec, x) -> np.ndarray:
    """Analytic d(arg f)/dx = alpha / (cos^2 u + alpha^2 sin^2 u)."""
    u = np.asarray(x, dtype=float) / (spec.n_order * spec.unit_length)
    return spec.alpha / (np.cos(u) ** 2 + spec.alpha ** 2 * np.sin(u) ** 2)


def superosc_region_report(spec: SuperoscSpec, radius: float, n_points: int = 2001) -> RegionReport:
    """Deviation of f from exp(i alpha x) and its local wavenumber on |x| <= radius."""
    spec.check_domain(radius)
    beta = (spec.alpha ** 2 - 1.0) / (2.0 * spec.n_order * spec.unit_length ** 2)
    bound = 1.5 * abs(beta) * radius ** 2
    if radius == 0:
        return RegionReport(0.0, abs(eval_f(spec, 0.0) - 1.0), spec.alpha, spec.alpha, spec.alpha, 0.0)
    x = np.linspace(-radius, radius, n_points)
    lf = log_f(spec, x)
    dev = np.abs(np.expm1(lf - 1j * spec.alpha * x / spec.unit_length))
    # finite-difference estimate from the unwrapped phase
    k_est = np.gradient(np.unwrap(lf.imag), x)
    return RegionReport(radius, float(dev.max()), float(k_est.min()), float(k_est.max()),
                        spec.alpha / spec.unit_length, bound)


def growth_report(spec: SuperoscSpec, n_points: int = 4001) -> dict:
    """Peak of |f| over the box relative to f(0), in log form."""
    x = np.linspace(-spec.half_length, spec.half_length, n_points)
    lre = log_f(spec, x).real
    i = int(np.argmax(lre))
    return {"log_ratio": float(lre[i]), "x_peak": float(x[i]),
            "log_ratio_exact": spec.log_peak, "log10_ratio": float(lre[i] / math.log(10))}


def write_mode_table(path, modes: Sequence[FourierMode]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "k_n", "c_n", "log_abs_c_n", "sign"])
        for m in modes:
            w.writerow([m.index, repr(m.wavenumber), repr(m.coefficient), repr(m.log_abs), m.sign])
