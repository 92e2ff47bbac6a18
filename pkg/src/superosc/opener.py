"""Clock-triggered release window: exact tau-folded evolution and its analytic approximation.

The opener coordinate q moves rigidly at unit speed and fires the spin flip
exp(-i pi/2 g(x) sigma_x) when it crosses q = 0.  A packet component at
q = -tau therefore kicks the particle at time tau.  The packet is sampled at
cell midpoints, which makes the folded evolution an exact lattice model: each
sample carries amplitude phi(q_i) sqrt(dq), and the opener energy lives on one
Nyquist band of width 2 pi / dq.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .box import (BoxEigenbasis, BoxState, GridWavefunction, ResolutionError,
                  gauss_legendre, window_nodes)

TWO_PI = 2.0 * math.pi


def max_tau_step(alpha: float) -> float:
    """Largest clock step with alpha^2 dtau / 2 <= pi/8."""
    return math.pi / (4.0 * alpha * alpha)


@dataclass
class OpenerPacket:
    """Opener wavefunction phi(q) on cell midpoints inside [-T, 0]."""

    duration: float
    q: np.ndarray
    values: np.ndarray
    dq: float
    shape: str = "top_hat"

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.q.shape != self.values.shape:
            raise ValueError("q and values must have equal shape")
        if self.duration < 0 or self.dq <= 0:
            raise ValueError("duration must be non-negative and dq positive")

    @staticmethod
    def _cells(duration: float, dq: float | None, n: int | None):
        if n is None:
            if dq is None:
                raise ValueError("give dq or n")
            n = max(1, int(math.ceil(duration / dq - 1e-9)))
        dq = duration / n
        q = -duration + (np.arange(n) + 0.5) * dq
        return q, dq

    @classmethod
    def top_hat(cls, duration: float, dq: float | None = None, n: int | None = None) -> "OpenerPacket":
        q, dq = cls._cells(duration, dq, n)
        return cls(duration, q, np.full(q.size, 1.0 / math.sqrt(duration)), dq, "top_hat")

    @classmethod
    def smooth_bump(cls, duration: float, dq: float | None = None, n: int | None = None) -> "OpenerPacket":
        """sin^2 bump; normalized in the lattice sense (sum |phi|^2 dq = 1)."""
        q, dq = cls._cells(duration, dq, n)
        v = np.sin(math.pi * q / duration) ** 2
        v /= math.sqrt(np.sum(v ** 2) * dq)
        return cls(duration, q, v, dq, "smooth_bump")

    @classmethod
    def empty(cls, duration: float, dq: float | None = None, n: int | None = None) -> "OpenerPacket":
        q, dq = cls._cells(duration, dq, n)
        return cls(duration, q, np.zeros(q.size), dq, "none")

    @classmethod
    def single(cls, tau: float, duration: float | None = None) -> "OpenerPacket":
        """Sharply localized opener that fires once, at time tau."""
        duration = tau if duration is None else duration
        dq = max(duration, 1.0)
        return cls(duration, np.array([-tau]), np.array([1.0 / math.sqrt(dq)]), dq, "single")

    @classmethod
    def build(cls, shape: str, duration: float, dq: float) -> "OpenerPacket":
        makers = {"top_hat": cls.top_hat, "smooth_bump": cls.smooth_bump, "none": cls.empty}
        if shape not in makers:
            raise ValueError(f"unknown opener shape {shape!r}")
        return makers[shape](duration, dq=dq)

    @property
    def taus(self) -> np.ndarray:
        return -self.q

    @property
    def weights(self) -> np.ndarray:
        """Lattice amplitudes phi(q_i) sqrt(dq)."""
        return self.values * math.sqrt(self.dq)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dq)

    def translated(self, shift: float) -> "OpenerPacket":
        return OpenerPacket(self.duration, self.q + shift, self.values.copy(), self.dq, self.shape)

    def value_at(self, q) -> np.ndarray:
        """Cell-interpolated phi: constant on each sampling cell, zero elsewhere."""
        q = np.asarray(q, dtype=float)
        idx = np.floor((q - (self.q[0] - 0.5 * self.dq)) / self.dq).astype(int)
        ok = (idx >= 0) & (idx < self.q.size)
        out = np.zeros(q.shape, dtype=complex)
        out[ok] = self.values[idx[ok]]
        return out


@dataclass(frozen=True)
class ReleaseWindow:
    """g(x) = 1 on |x| <= half_width, 0 outside."""

    half_width: float

    def __post_init__(self):
        if not self.half_width >= 0:
            raise ValueError("window half-width must be non-negative")

    def g(self, x) -> np.ndarray:
        return (np.abs(np.asarray(x, dtype=float)) <= self.half_width).astype(float)


def spin_flip_window(wf: GridWavefunction, window: ReleaseWindow):
    """Apply exp(-i pi/2 g sigma_x) to a spin-up packet: (released, trapped)."""
    g = window.g(wf.x)
    return (GridWavefunction(wf.x_min, wf.dx, -1j * g * wf.values),
            GridWavefunction(wf.x_min, wf.dx, (1.0 - g) * wf.values))


def truncated_spectrum(alpha: float, L: float, k):
    """h(k) = int_{-L}^{L} sin(alpha x) exp(-i k x) dx in closed form."""
    k = np.asarray(k, dtype=float)
    # 2 sin(uL)/u = 2L sinc(uL/pi); np.sinc handles the removable point
    out = -1j * L * (np.sinc((alpha - k) * L / math.pi) - np.sinc((alpha + k) * L / math.pi))
    return complex(out) if k.ndim == 0 else out


def momentum_grid(k_max: float, dk: float) -> np.ndarray:
    n = int(math.ceil(k_max / dk))
    return dk * np.arange(-n, n + 1)


@dataclass
class JointBranches:
    """Post-interaction state at time T, tau-resolved.

    ``window_samples`` and ``released_k`` are in raw units: physical values
    are exp(log_scale) times them.  ``trapped`` is physical and holds the box
    amplitudes right after the kick; the remaining evolution to T is the
    diagonal phase exp(-i E_m (T - tau)).
    """

    T: float
    window: ReleaseWindow
    tau: np.ndarray
    weights: np.ndarray
    dq: float
    k: np.ndarray
    nodes: np.ndarray
    node_weights: np.ndarray
    window_samples: np.ndarray = field(repr=False)
    released_k: np.ndarray = field(repr=False)
    window_mass: np.ndarray = field(repr=False)
    basis: BoxEigenbasis = None
    trapped: np.ndarray = field(default=None, repr=False)
    trapped_cut: np.ndarray = field(default=None, repr=False)
    log_scale: float = 0.0
    state_norm: float = 1.0
    label: str = ""
    alpha: float = 0.0

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0]) if self.k.size > 1 else 1.0

    @property
    def q_final(self) -> np.ndarray:
        return self.T - self.tau

    @property
    def probs(self) -> np.ndarray:
        return np.abs(self.weights) ** 2

    @property
    def released_raw_mass(self) -> float:
        return float(self.probs @ self.window_mass)

    @property
    def log_p_down(self) -> float:
        m = self.released_raw_mass
        return math.log(m) + 2 * self.log_scale if m > 0 else -math.inf

    @property
    def log10_p_down(self) -> float:
        return self.log_p_down / math.log(10)

    @property
    def p_down(self) -> float:
        return math.exp(self.log_p_down) if self.log_p_down > -745 else 0.0

    @property
    def p_up(self) -> float:
        """Branch norm from the pointwise identity |(1-g) psi|^2 = |psi|^2 - |g psi|^2."""
        per_tau = self.state_norm - np.exp(2 * self.log_scale) * self.window_mass
        return float(self.probs @ per_tau)

    @property
    def k_mass(self) -> np.ndarray:
        """Per-tau released norm captured on the momentum grid (raw units)."""
        return np.sum(np.abs(self.released_k) ** 2, axis=1) * self.dk

    @property
    def outside_mass(self) -> np.ndarray:
        return self.window_mass - self.k_mass

    @property
    def trapped_mode_mass(self) -> np.ndarray:
        return np.sum(np.abs(self.trapped) ** 2, axis=1)

    @property
    def trapped_energies(self) -> np.ndarray:
        return self.basis.mode_energies

    def released_amplitude(self) -> np.ndarray:
        """Released amplitude at time T over (opener sample, k), raw units."""
        lag = (self.T - self.tau)[:, None]
        return (-1j * self.weights[:, None] * np.exp(-0.5j * self.k[None, :] ** 2 * lag)
                * self.released_k)

    def trapped_final(self) -> np.ndarray:
        lag = (self.T - self.tau)[:, None]
        return self.weights[:, None] * np.exp(-1j * self.trapped_energies[None, :] * lag) * self.trapped

    def released_momentum_density(self) -> np.ndarray:
        """Conditional released density over k (normalized on the grid)."""
        rho = self.probs @ (np.abs(self.released_k) ** 2)
        total = rho.sum() * self.dk
        return rho / total if total > 0 else rho


def exact_joint_evolution(state: BoxState, opener: OpenerPacket, T: float, window: ReleaseWindow,
                          alpha: float | None = None, k_max: float | None = None,
                          k_step: float | None = None, n_nodes: int | None = None,
                          n_trapped: int | None = None) -> JointBranches:
    """Box-evolve to tau, kick, then free (released) or box (trapped) evolve to T, folded over tau."""
    basis = state.basis
    taus = opener.taus
    if np.any(taus < -1e-12) or np.any(taus > T + 1e-12):
        raise ValueError("opener support must lie within [-T, 0]")
    ref = alpha if alpha is not None else (state.target_wavenumber or state.top_wavenumber)
    if taus.size > 1 and 0.5 * ref * ref * opener.dq > math.pi / 8 * (1 + 1e-9):
        raise ResolutionError(
            f"clock step {opener.dq:.4g} too coarse: need <= {max_tau_step(ref):.4g}")
    L = window.half_width
    if L > basis.half_length * (1 + 1e-12):
        raise ValueError("window must lie inside the box")
    if L > math.sqrt(basis.n_order) * basis.unit_length * (1 + 1e-12) and L < basis.half_length:
        warnings.warn("window exceeds the superoscillation radius sqrt(N)", stacklevel=2)
    ktop = max(ref, state.top_wavenumber)
    if L > 0:
        K = k_max if k_max is not None else ktop + 20 * math.pi / L
        dk = k_step if k_step is not None else math.pi / (8 * L)
    else:
        K, dk = ktop, 1.0
    k = momentum_grid(K, dk) if L > 0 else np.zeros(1)
    M = max(n_trapped or int(math.ceil(K / basis.unit)), basis.n_modes)
    tbasis = basis.with_modes(M)
    c = opener.weights

    if L > 0:
        x, w = gauss_legendre(L, n_nodes or window_nodes(L, K + ktop))
        if state.exact is not None:
            samples = state.raw_values(x, taus)
            log_scale = state.exact.log_scale
        else:
            samples = state.values(x, taus, high_precision=False)
            log_scale = 0.0
    else:
        x, w = np.zeros(0), np.zeros(0)
        samples = np.zeros((taus.size, 0), dtype=complex)
        log_scale = state.exact.log_scale if state.exact is not None else 0.0
    sw = samples * w[None, :]
    window_mass = np.real(np.sum(sw * np.conj(samples), axis=1))
    released = sw @ np.exp(-1j * np.outer(x, k)) / math.sqrt(TWO_PI)
    cut = sw @ tbasis.eigenfunctions(x) if L > 0 else np.zeros((taus.size, M), dtype=complex)
    amps = np.zeros(M, dtype=complex)
    amps[:basis.n_modes] = state.amplitudes
    base = amps[None, :] * np.exp(-1j * np.outer(taus, tbasis.mode_energies))
    trapped = base - math.exp(log_scale) * cut
    return JointBranches(T=T, window=window, tau=taus, weights=c, dq=opener.dq, k=k, nodes=x,
                         node_weights=w, window_samples=samples, released_k=released,
                         window_mass=window_mass, basis=tbasis, trapped=trapped, trapped_cut=cut,
                         log_scale=log_scale, state_norm=state.norm, label=state.label, alpha=ref)


@dataclass
class ApproxReleased:
    """Analytic released branch phi(q-T) e^{-i a^2 T/2} e^{-i (k^2-a^2) q/2} h(k) on the lattice."""

    tau: np.ndarray
    weights: np.ndarray
    k: np.ndarray
    amplitude: np.ndarray = field(repr=False)
    T: float = 0.0

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0]) if self.k.size > 1 else 1.0

    def released_amplitude(self) -> np.ndarray:
        return self.amplitude

    def released_momentum_density(self) -> np.ndarray:
        rho = np.sum(np.abs(self.amplitude) ** 2, axis=0)
        total = rho.sum() * self.dk
        return rho / total if total > 0 else rho


def approx_released_state(alpha: float, opener: OpenerPacket, T: float, window: ReleaseWindow,
                          k: np.ndarray) -> ApproxReleased:
    taus = opener.taus
    q = T - taus
    h = truncated_spectrum(alpha, window.half_width, k)
    phase = np.exp(-0.5j * alpha * alpha * T) * np.exp(-0.5j * np.outer(q, k * k - alpha * alpha))
    amp = opener.weights[:, None] * phase * h[None, :]
    return ApproxReleased(taus, opener.weights, np.asarray(k), amp, T)


def release_probability(branches: JointBranches) -> float:
    return branches.p_down


def released_overlap(a, b, route: str = "k") -> complex:
    """Normalized overlap of two released branches on the same clock grid.

    route "k" uses the momentum amplitudes at time T; route "x" uses the
    window samples at the kick (free evolution is unitary and the same for
    both, so the two agree up to momentum truncation).
    """
    if route == "k":
        ra, rb = a.released_amplitude(), b.released_amplitude()
        if ra.shape != rb.shape:
            raise ValueError("branches live on different grids")
        ov = np.sum(np.conj(ra) * rb)
        na, nb = np.sum(np.abs(ra) ** 2), np.sum(np.abs(rb) ** 2)
    elif route == "x":
        if not (np.array_equal(a.nodes, b.nodes) and np.array_equal(a.tau, b.tau)):
            raise ValueError("branches use different window nodes or clock grids")
        sa = a.weights[:, None] * a.window_samples
        sb = b.weights[:, None] * b.window_samples
        w = a.node_weights[None, :]
        ov = np.sum(w * np.conj(sa) * sb)
        na, nb = np.sum(w * np.abs(sa) ** 2), np.sum(w * np.abs(sb) ** 2)
    else:
        raise ValueError(f"unknown route {route!r}")
    if na == 0 or nb == 0:
        return 0j
    return complex(ov / math.sqrt(na * nb))


def released_fidelity(a, b, route: str = "k") -> float:
    return abs(released_overlap(a, b, route)) ** 2
