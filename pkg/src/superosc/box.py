"""Infinite-square-well eigenbasis, exact evolution and free-line propagation."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from gmpy2 import mpq
from numpy.polynomial.legendre import leggauss

from .core import BoxStateSpec, SuperoscSpec
from .precision import ExactSineSeries, exact


class RepresentationError(ValueError):
    """Wavenumber not commensurate with the box."""


class ResolutionError(ValueError):
    """Sampling too coarse for the content of the state."""


class ExtentError(ValueError):
    """Grid too small for the requested propagation."""


@dataclass(frozen=True)
class BoxEigenbasis:
    """Modes sin(k_m (x + l)) / sqrt(l), k_m = m / (2 N a), m = 1..n_modes, on [-l, l]."""

    n_order: int
    unit_length: float = 1.0
    n_modes: int = 0

    @classmethod
    def for_spec(cls, spec: SuperoscSpec, n_modes: int | None = None) -> "BoxEigenbasis":
        return cls(spec.n_order, spec.unit_length, n_modes or 2 * spec.n_order)

    @property
    def half_length(self) -> float:
        return math.pi * self.n_order * self.unit_length

    @property
    def exact_unit(self) -> mpq:
        return 1 / (2 * mpq(self.n_order) * exact(self.unit_length))

    @property
    def unit(self) -> float:
        return 1.0 / (2.0 * self.n_order * self.unit_length)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1)

    @property
    def mode_wavenumbers(self) -> np.ndarray:
        return self.indices * self.unit

    @property
    def mode_energies(self) -> np.ndarray:
        return 0.5 * self.mode_wavenumbers ** 2

    def with_modes(self, n_modes: int) -> "BoxEigenbasis":
        return replace(self, n_modes=int(n_modes))

    def mode_index(self, wavenumber: float, tol: float = 1e-9) -> int:
        m = wavenumber / self.unit
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > tol * max(1.0, abs(m)):
            raise RepresentationError(
                f"wavenumber {wavenumber} is not a positive multiple of {self.unit:.6g}")
        return mi

    def eigenfunctions(self, x, modes=None) -> np.ndarray:
        """Matrix phi_m(x_i), shape (len(x), len(modes)); zero outside the box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        m = self.indices if modes is None else np.asarray(modes)
        ell = self.half_length
        # sin(k_m x + m pi / 2) keeps the wall phase exact
        vals = _quarter_sin(np.outer(x, m * self.unit), m) / math.sqrt(ell)
        vals[np.abs(x) > ell * (1 + 1e-13)] = 0.0
        return vals


def _quarter_sin(angle: np.ndarray, m) -> np.ndarray:
    q = np.asarray(m) % 4
    out = np.where(q == 0, np.sin(angle), 0.0)
    out = np.where(q == 1, np.cos(angle), out)
    out = np.where(q == 2, -np.sin(angle), out)
    out = np.where(q == 3, -np.cos(angle), out)
    return out


@dataclass(frozen=True)
class ExactModes:
    """Rational amplitudes C_m of sin(k_m (x + l)) with an overall exp(log_scale).

    Physical amplitude on the normalized eigenfunction is
    exp(log_scale) * sqrt(l) * C_m.
    """

    modes: tuple[int, ...]
    coeffs: tuple = field(repr=False)
    log_scale: float = 0.0

    def series(self, basis: BoxEigenbasis) -> ExactSineSeries:
        unit = basis.exact_unit
        return ExactSineSeries([m * unit for m in self.modes], list(self.modes), self.coeffs)


@dataclass
class BoxState:
    """Complex amplitudes over box eigenmodes at evolution time ``time``."""

    basis: BoxEigenbasis
    amplitudes: np.ndarray
    exact: ExactModes | None = None
    time: float = 0.0
    label: str = ""
    target_wavenumber: float | None = None

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.n_modes,):
            raise ValueError("amplitude count must equal basis.n_modes")

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def occupied(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.amplitudes) > 0) + 1

    @property
    def top_wavenumber(self) -> float:
        occ = self.occupied
        return float(occ.max() * self.basis.unit) if occ.size else 0.0

    @cached_property
    def _series(self) -> ExactSineSeries | None:
        return None if self.exact is None else self.exact.series(self.basis)

    def values(self, x, times=None, high_precision: bool | None = None) -> np.ndarray:
        """Wavefunction at x for extra evolution times (shape (n_times, n_x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        times = np.atleast_1d(np.asarray([0.0] if times is None else times, dtype=float))
        hp = self.exact is not None if high_precision is None else high_precision
        if hp:
            if self.exact is None:
                raise ValueError("state has no exact representation")
            raw = self._series.sample(x, self.time + times)
            out = raw * math.exp(self.exact.log_scale)
            out[:, np.abs(x) > self.basis.half_length * (1 + 1e-13)] = 0.0
            return out
        occ = self.occupied
        phi = self.basis.eigenfunctions(x, occ)
        e = self.basis.mode_energies[occ - 1]
        amps = self.amplitudes[occ - 1][None, :] * np.exp(-1j * np.outer(times, e))
        return amps @ phi.T

    def raw_values(self, x, times) -> np.ndarray:
        """Exact-representation samples without the exp(log_scale) factor."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._series.sample(x, self.time + np.atleast_1d(times))


def embed_sine_modes(basis: BoxEigenbasis, wavenumbers, amplitudes) -> np.ndarray:
    """Amplitudes on the eigenbasis of sum_j A_j sin(k_j x)."""
    amps = np.zeros(basis.n_modes, dtype=complex)
    for k, a in zip(wavenumbers, amplitudes):
        m = basis.mode_index(k)
        if m % 2:
            raise RepresentationError(f"sin({k} x) is not a box eigenmode (odd index {m})")
        if m > basis.n_modes:
            raise RepresentationError(f"mode {m} exceeds basis size {basis.n_modes}")
        # sin(k_{2j} x) = (-1)^j sqrt(l) phi_{2j}
        amps[m - 1] += (-1) ** (m // 2) * math.sqrt(basis.half_length) * a
    return amps


def embed_box_state(state: BoxStateSpec, n_modes: int | None = None) -> BoxState:
    spec = state.spec
    basis = BoxEigenbasis.for_spec(spec, n_modes)
    amps = embed_sine_modes(basis, state.wavenumbers, state.amplitudes)
    modes = tuple(2 * j for j in state.harmonics)
    coeffs = tuple((-1) ** j * r for j, r in zip(state.harmonics, state.raw))
    ex = ExactModes(modes, coeffs, -state.log_norm)
    return BoxState(basis, amps, ex, 0.0, label="psi", target_wavenumber=spec.alpha / spec.unit_length)


def sine_state(spec: SuperoscSpec, wavenumber: float | None = None, n_modes: int | None = None) -> BoxState:
    """Normalized sin(k x) eigenstate; k defaults to alpha."""
    k = spec.alpha / spec.unit_length if wavenumber is None else wavenumber
    basis = BoxEigenbasis.for_spec(spec)
    m = basis.mode_index(k)
    if m % 2:
        raise RepresentationError(f"sin({k} x) has odd box index {m}")
    basis = basis.with_modes(max(n_modes or 0, basis.n_modes, m))
    amps = np.zeros(basis.n_modes, dtype=complex)
    sign = (-1) ** (m // 2)
    amps[m - 1] = sign
    ex = ExactModes((m,), (mpq(sign),), -0.5 * math.log(basis.half_length))
    return BoxState(basis, amps, ex, 0.0, label="sine", target_wavenumber=k)


def evolve_box(state: BoxState, t: float) -> BoxState:
    if t < 0:
        raise ValueError("t must be non-negative")
    phase = np.exp(-1j * state.basis.mode_energies * t)
    return replace(state, amplitudes=state.amplitudes * phase, time=state.time + t)


def gauss_legendre(half_width: float, n: int, center: float = 0.0):
    nodes, weights = leggauss(int(n))
    return center + half_width * nodes, half_width * weights


def window_nodes(half_width: float, max_wavenumber: float) -> int:
    """Gauss-Legendre node count for integrands oscillating up to max_wavenumber."""
    return int(math.ceil(0.75 * max_wavenumber * half_width)) + 40


def central_overlap(state: BoxState, t: float, window_halfwidth: float,
                    wavenumber: float | None = None, n_nodes: int | None = None) -> complex:
    """Normalized window overlap of the state at t with sin(k x) exp(-i k^2 t / 2)."""
    n_ord = state.basis.n_order
    if window_halfwidth > math.sqrt(n_ord) * state.basis.unit_length * (1 + 1e-12):
        warnings.warn("window exceeds the superoscillation radius sqrt(N)", stacklevel=2)
    k = wavenumber if wavenumber is not None else state.target_wavenumber
    if k is None:
        raise ValueError("target wavenumber required")
    ktop = max(state.top_wavenumber, k)
    n = n_nodes or window_nodes(window_halfwidth, 2 * ktop + 2 * k)
    x, w = gauss_legendre(window_halfwidth, n)
    if state.exact is not None:
        vals = state.raw_values(x, [t])[0]
    else:
        vals = state.values(x, [t])[0]
    target = np.sin(k * x) * np.exp(-0.5j * k * k * t)
    ov = np.sum(w * np.conj(target) * vals)
    na = np.sum(w * np.abs(target) ** 2)
    nb = np.sum(w * np.abs(vals) ** 2)
    if nb == 0:
        return 0j
    return complex(ov / math.sqrt(na * nb))


def central_fidelity(state: BoxState, t: float, window_halfwidth: float, **kw) -> float:
    return abs(central_overlap(state, t, window_halfwidth, **kw)) ** 2


@dataclass
class GridWavefunction:
    """Complex samples on a uniform grid x_i = x_min + i dx."""

    x_min: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.dx <= 0:
            raise ValueError("dx must be positive")

    @classmethod
    def on(cls, x: np.ndarray, values) -> "GridWavefunction":
        x = np.asarray(x, dtype=float)
        dx = float(x[1] - x[0]) if x.size > 1 else 1.0
        return cls(float(x[0]), dx, values)

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.count)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.count - 1)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dx)

    def inner(self, other: "GridWavefunction") -> complex:
        return complex(np.sum(np.conj(self.values) * other.values) * self.dx)

    def save(self, path) -> None:
        """Plain-text header line followed by little-endian interleaved complex128."""
        header = (f"GRIDWF 1 min={float(self.x_min)!r} max={float(self.x_max)!r} dx={float(self.dx)!r} "
                  f"count={self.count} layout=complex128-le-interleaved\n")
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(self.values.astype("<c16").tobytes())

    @classmethod
    def load(cls, path) -> "GridWavefunction":
        with open(path, "rb") as fh:
            header = fh.readline().decode("ascii").split()
            if header[:2] != ["GRIDWF", "1"]:
                raise ValueError(f"{path}: not a grid wavefunction file")
            meta = dict(item.split("=", 1) for item in header[2:])
            data = np.frombuffer(fh.read(), dtype="<c16")
        if data.size != int(meta["count"]):
            raise ValueError(f"{path}: expected {meta['count']} samples, found {data.size}")
        return cls(float(meta["min"]), float(meta["dx"]), data.astype(complex))

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.x, self.values.real, self.values.imag])
        np.savetxt(path, arr, delimiter=",", header="x,re,im", comments="", fmt="%.17g")


def box_grid(basis: BoxEigenbasis, dx: float) -> np.ndarray:
    """Uniform grid from wall to wall with spacing at most dx."""
    n = int(math.ceil(2 * basis.half_length / dx))
    return np.linspace(-basis.half_length, basis.half_length, n + 1)


def sample_on_grid(state: BoxState, grid, high_precision: bool = False) -> GridWavefunction:
    x = np.asarray(grid, dtype=float)
    if x.size > 1:
        dx = float(x[1] - x[0])
        if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")
        ktop = state.top_wavenumber
        if ktop > 0 and dx > 2 * math.pi / (8 * ktop) * (1 + 1e-12):
            raise ResolutionError(f"dx={dx:.4g} exceeds 2*pi/(8*{ktop:.4g})")
    vals = state.values(x, [0.0], high_precision=high_precision)[0]
    return GridWavefunction.on(x, vals)


def project_onto_box(wf: GridWavefunction, basis: BoxEigenbasis) -> BoxState:
    """Trapezoidal projection onto the eigenbasis."""
    x = wf.x
    w = np.full(x.size, wf.dx)
    w[0] = w[-1] = 0.5 * wf.dx
    inside = np.abs(x) <= basis.half_length * (1 + 1e-13)
    phi = basis.eigenfunctions(x[inside])
    amps = phi.T @ (w[inside] * wf.values[inside])
    return BoxState(basis, amps)


def free_evolve(wf: GridWavefunction, t: float, check_extent: bool = True,
                mass_tol: float = 1e-10) -> GridWavefunction:
    """Spectral free propagation exp(-i k^2 t / 2) on the (periodic) grid."""
    if t == 0:
        return GridWavefunction(wf.x_min, wf.dx, wf.values.copy())
    n = wf.count
    spec = np.fft.fft(wf.values)
    k = 2 * math.pi * np.fft.fftfreq(n, d=wf.dx)
    if check_extent:
        _check_extent(wf, spec, k, abs(t), mass_tol)
    out = np.fft.ifft(spec * np.exp(-0.5j * k * k * t))
    return GridWavefunction(wf.x_min, wf.dx, out)


def _check_extent(wf, spec, k, t, mass_tol):
    p = np.abs(spec) ** 2
    total = p.sum()
    if total == 0:
        return
    order = np.argsort(np.abs(k))
    cum = np.cumsum(p[order]) / total
    idx = min(int(np.searchsorted(cum, 1 - mass_tol)), k.size - 1)
    vmax = abs(k[order][idx])
    dens = np.abs(wf.values) ** 2
    occupied = np.flatnonzero(dens > 1e-14 * dens.max())
    lo, hi = wf.x[occupied[0]], wf.x[occupied[-1]]
    spread = vmax * t + 5 * math.sqrt(t)
    if lo - spread < wf.x_min or hi + spread > wf.x_max:
        raise ExtentError(
            f"support [{lo:.3g}, {hi:.3g}] plus spread {spread:.3g} leaves the grid "
            f"[{wf.x_min:.3g}, {wf.x_max:.3g}]; pad the grid")


def spectral_mass_above(wf: GridWavefunction, k_cut: float, rel_tol: float = 1e-9) -> float:
    """Fraction of DFT weight with |k| > k_cut for samples spanning one period.

    The last sample is dropped when it repeats the first period point (wall to
    wall grids include both walls).
    """
    scale = np.max(np.abs(wf.values)) if wf.count else 0.0
    closes = wf.count > 1 and abs(wf.values[-1] - wf.values[0]) <= 1e-12 * scale
    vals = wf.values[:-1] if closes else wf.values
    p = np.abs(np.fft.fft(vals)) ** 2
    k = 2 * math.pi * np.fft.fftfreq(vals.size, d=wf.dx)
    total = p.sum()
    return float(p[np.abs(k) > k_cut * (1 + rel_tol)].sum() / total) if total else 0.0
