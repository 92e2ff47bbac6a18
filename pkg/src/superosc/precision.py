"""Arbitrary-precision helpers for cancellation-heavy mode sums.

The superoscillatory states are sums of a few hundred sine modes whose
amplitudes exceed the value of the sum near the origin by up to ~10^240.
Double precision cannot resolve such sums, so window quantities are
evaluated here with exact rational coefficients and fixed-point big-integer
dot products (gmpy2).  Everything returned to callers is float64 in "raw"
units; physical values carry a separate natural-log scale.
"""
from __future__ import annotations

import math
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq, mpz

GUARD_BITS = 96


def exact(value) -> mpq:
    """Exact rational image of a float, int or rational."""
    if isinstance(value, mpq):
        return value
    if isinstance(value, (int, mpz)):
        return mpq(value)
    return mpq(float(value))


def log2_abs_sum(coeffs: Sequence) -> float:
    total = sum(abs(mpq(c)) for c in coeffs)
    if total == 0:
        return 0.0
    return float(gmpy2.log2(mpfr(total, 64)))


def working_bits(coeffs: Sequence, quadratic: bool = False) -> int:
    """Precision needed so a coefficient sum of O(1) survives cancellation."""
    span = max(log2_abs_sum(coeffs), 0.0)
    if quadratic:
        span *= 2.0
    return int(math.ceil(span)) + GUARD_BITS


def _quarter_sin(angle: mpfr, quarter: int) -> mpfr:
    """sin(angle + quarter*pi/2) without rounding pi/2 into the argument."""
    q = quarter % 4
    if q == 0:
        return gmpy2.sin(angle)
    if q == 1:
        return gmpy2.cos(angle)
    if q == 2:
        return -gmpy2.sin(angle)
    return -gmpy2.cos(angle)


def _to_fixed(values, shift: int) -> np.ndarray:
    return np.array([mpz(gmpy2.rint(gmpy2.mul_2exp(v, shift))) for v in values], dtype=object)


def _fixed_to_float(ints, shift: int) -> np.ndarray:
    denom = 1 << shift
    return np.array([int(v) / denom for v in np.ravel(ints)], dtype=float).reshape(np.shape(ints))


class ExactSineSeries:
    """Real-coefficient sine series evolved with per-mode phases.

    Represents s(x, t) = sum_j c_j exp(-i E_j t) sin(k_j x + q_j pi/2) with
    exact rational wavenumbers k_j, energies E_j = k_j^2 / 2 and rational
    coefficients c_j.  Sampling is exact to ~2^-64 relative to the largest
    of |s| and 1 regardless of how large the individual c_j are.
    """

    def __init__(self, wavenumbers: Sequence, quarters: Sequence[int], coeffs: Sequence,
                 bits: int | None = None):
        if not (len(wavenumbers) == len(quarters) == len(coeffs)):
            raise ValueError("wavenumbers, quarters and coeffs must have equal length")
        self.k = [exact(k) for k in wavenumbers]
        self.quarters = [int(q) for q in quarters]
        self.coeffs = [exact(c) for c in coeffs]
        self.energies = [k * k / 2 for k in self.k]
        self.bits = bits if bits is not None else working_bits(self.coeffs)

    def __len__(self) -> int:
        return len(self.k)

    def _context(self, extra: int = 32):
        return gmpy2.context(gmpy2.get_context(), precision=self.bits + extra)

    def basis_matrix(self, x: np.ndarray) -> np.ndarray:
        """Fixed-point matrix sin(k_j x_i + q_j pi/2) * 2^bits (object ints)."""
        x = np.asarray(x, dtype=float)
        with self._context():
            xs = [mpfr(float(v)) for v in x]
            rows = []
            for xv in xs:
                rows.append([_quarter_sin(mpfr(k) * xv, q) for k, q in zip(self.k, self.quarters)])
            flat = _to_fixed([v for row in rows for v in row], self.bits)
        return flat.reshape(len(x), len(self.k))

    def phase_vectors(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Fixed-point (Re, Im) of c_j exp(-i E_j t), shape (n_modes, n_times)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        with self._context():
            re, im = [], []
            for c, e in zip(self.coeffs, self.energies):
                cf = mpfr(c)
                ef = mpfr(e)
                for t in times:
                    arg = ef * mpfr(float(t))
                    re.append(cf * gmpy2.cos(arg))
                    im.append(-cf * gmpy2.sin(arg))
            shape = (len(self.coeffs), len(times))
            return (_to_fixed(re, self.bits).reshape(shape),
                    _to_fixed(im, self.bits).reshape(shape))

    def sample(self, x: np.ndarray, times: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
        """Complex samples, shape (n_times, n_x)."""
        if basis is None:
            basis = self.basis_matrix(x)
        re_v, im_v = self.phase_vectors(times)
        re = basis.dot(re_v)
        im = basis.dot(im_v)
        shift = 2 * self.bits
        return (_fixed_to_float(re, shift) + 1j * _fixed_to_float(im, shift)).T

    # --- window Gram forms -------------------------------------------------

    def window_gram(self, half_width: float) -> list[list[mpfr]]:
        """W_jl = int_{-w}^{w} sin(k_j x + q_j pi/2) sin(k_l x + q_l pi/2) dx."""
        n = len(self.k)
        w = mpfr(float(half_width))
        gram = [[mpfr(0)] * n for _ in range(n)]
        for j in range(n):
            for l in range(j, n):
                val = _window_product_integral(self.k[j], self.quarters[j],
                                               self.k[l], self.quarters[l], w)
                gram[j][l] = val
                gram[l][j] = val
        return gram

    def window_mass(self, half_width: float, times) -> np.ndarray:
        """int_{-w}^{w} |s(x, t)|^2 dx from the closed-form Gram matrix (raw units)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        bits = 2 * self.bits
        out = np.empty(times.size)
        with gmpy2.context(gmpy2.get_context(), precision=bits + 32):
            gram = self.window_gram(half_width)
            cf = [mpfr(c) for c in self.coeffs]
            ef = [mpfr(e) for e in self.energies]
            n = len(cf)
            for i, t in enumerate(times):
                tm = mpfr(float(t))
                total = mpfr(0)
                for j in range(n):
                    row = mpfr(0)
                    for l in range(n):
                        row += cf[l] * gram[j][l] * gmpy2.cos((ef[j] - ef[l]) * tm)
                    total += cf[j] * row
                out[i] = float(total)
        return out


def _cos_quarter(quarter: int) -> int:
    return (1, 0, -1, 0)[quarter % 4]


def _int_cos(kappa: mpq, quarter: int, w: mpfr) -> mpfr:
    """int_{-w}^{w} cos(kappa x + quarter pi/2) dx; the sine part is odd."""
    c = _cos_quarter(quarter)
    if c == 0:
        return mpfr(0)
    if kappa == 0:
        return 2 * w * c
    kf = mpfr(kappa)
    return 2 * c * gmpy2.sin(kf * w) / kf


def _window_product_integral(k1: mpq, q1: int, k2: mpq, q2: int, w: mpfr) -> mpfr:
    # sin(a)sin(b) = [cos(a-b) - cos(a+b)]/2
    return (_int_cos(k1 - k2, q1 - q2, w) - _int_cos(k1 + k2, q1 + q2, w)) / 2


def weighted_phase_sum(weights: np.ndarray, times: np.ndarray, omegas: Sequence, bits: int) -> dict:
    """Phi(omega) = sum_i w_i exp(i omega t_i) in high precision, keyed by omega."""
    out = {}
    with gmpy2.context(gmpy2.get_context(), precision=bits + 32):
        wts = [mpfr(float(w)) for w in weights]
        ts = [mpfr(float(t)) for t in times]
        for om in omegas:
            if om in out:
                continue
            of = mpfr(om)
            re = mpfr(0)
            im = mpfr(0)
            for w, t in zip(wts, ts):
                arg = of * t
                re += w * gmpy2.cos(arg)
                im += w * gmpy2.sin(arg)
            out[om] = (re, im)
    return out
