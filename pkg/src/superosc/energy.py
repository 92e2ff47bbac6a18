"""Energy distributions, characteristic functions and conservation checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .box import BoxState, box_grid, sample_on_grid
from .opener import JointBranches, OpenerPacket

TWO_PI = 2.0 * math.pi


class HeavyTailWarning(RuntimeWarning):
    """Highest moment dominated by the top of the represented energy range."""


@dataclass
class EnergyDistribution:
    """Discrete levels plus an optional binned density.

    Density bins are centred at e0 + i*de.  When ``period`` is set the density
    describes energy modulo that period (lattice opener) and ``evaluator``
    gives its exact pointwise value.
    """

    label: str
    levels: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e0: float = 0.0
    de: float = 1.0
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    period: float | None = None
    evaluator: Callable | None = field(default=None, repr=False)
    tail_mass: float = 0.0
    resampled: bool = False

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.density = np.asarray(self.density, dtype=float)

    @property
    def kind(self) -> str:
        if self.density.size and self.levels.size:
            return "mixed"
        return "density" if self.density.size else "discrete"

    @property
    def energies(self) -> np.ndarray:
        return self.e0 + self.de * np.arange(self.density.size)

    @property
    def discrete_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def density_mass(self) -> float:
        return float(self.density.sum() * self.de)

    @property
    def mass(self) -> float:
        return self.discrete_mass + self.density_mass

    def scaled(self, factor: float, label: str | None = None) -> "EnergyDistribution":
        ev = self.evaluator
        return replace(self, label=label or self.label, weights=self.weights * factor,
                       density=self.density * factor, tail_mass=self.tail_mass * factor,
                       evaluator=None if ev is None else (lambda e, ev=ev: factor * ev(e)))

    def normalized(self, label: str | None = None) -> "EnergyDistribution":
        m = self.mass
        return self.scaled(1.0 / m, label) if m > 0 else self

    def plus(self, other: "EnergyDistribution", label: str | None = None) -> "EnergyDistribution":
        """Mixture (sum) of two distributions on the same density grid."""
        if self.density.size and other.density.size:
            if (self.density.size != other.density.size or abs(self.e0 - other.e0) > 1e-12
                    or abs(self.de - other.de) > 1e-15):
                raise ValueError("density grids differ")
            dens = self.density + other.density
        else:
            dens = self.density if self.density.size else other.density
        src = self if self.density.size else other
        return EnergyDistribution(label or self.label,
                                  np.concatenate([self.levels, other.levels]),
                                  np.concatenate([self.weights, other.weights]),
                                  src.e0, src.de, dens, src.period, None,
                                  self.tail_mass + other.tail_mass,
                                  self.resampled or other.resampled)

    def density_at(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(e)
        if self.period:
            e = self.e0 + np.mod(e - self.e0, self.period)
            grid = np.append(self.energies, self.e0 + self.period)
            vals = np.append(self.density, self.density[0])
            return np.interp(e, grid, vals)
        return np.interp(e, self.energies, self.density, left=0.0, right=0.0)

    def binned(self, e0: float, de: float, n: int) -> np.ndarray:
        """Total mass per bin (levels included) on the grid e0 + i de."""
        out = np.zeros(n)
        if self.levels.size:
            pos = self.levels - e0 + 0.5 * de
            if self.period:
                pos = np.mod(pos, self.period)
            idx = np.floor(pos / de).astype(int)
            ok = (idx >= 0) & (idx < n)
            np.add.at(out, idx[ok], self.weights[ok])
        if self.density.size:
            if (self.density.size == n and abs(self.e0 - e0) < 1e-12 and abs(self.de - de) < 1e-15):
                out += self.density * de
            else:
                out += self.density_at(e0 + de * np.arange(n)) * de
        return out

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("part,energy,value\n")
            for e, w in zip(self.levels.tolist(), self.weights.tolist()):
                fh.write(f"level,{e!r},{w!r}\n")
            for e, d in zip(self.energies.tolist(), self.density.tolist()):
                fh.write(f"density,{e!r},{d!r}\n")


@dataclass
class CharacteristicSeries:
    tau: np.ndarray
    values: np.ndarray
    label: str = ""

    def check_axioms(self, tol: float = 1e-8, mass: float = 1.0) -> dict:
        out = {"max_modulus": float(np.max(np.abs(self.values))) if self.values.size else 0.0}
        out["modulus_ok"] = out["max_modulus"] <= mass + tol
        zero = np.flatnonzero(np.abs(self.tau) < 1e-15)
        if zero.size:
            out["at_zero"] = complex(self.values[zero[0]])
            out["at_zero_ok"] = abs(self.values[zero[0]] - mass) <= tol
        # Hermitian symmetry on mirrored samples
        pos = {round(t, 12): v for t, v in zip(self.tau, self.values)}
        err = 0.0
        for t, v in zip(self.tau, self.values):
            m = pos.get(round(-t, 12))
            if m is not None:
                err = max(err, abs(m - np.conj(v)))
        out["hermitian_error"] = err
        out["hermitian_ok"] = err <= tol
        return out

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.tau, self.values.real, self.values.imag, np.abs(self.values)])
        np.savetxt(path, arr, delimiter=",", header="tau,re,im,abs", comments="", fmt="%.17g")


# --- distributions --------------------------------------------------------

def momentum_to_energy(k: np.ndarray, rho_k: np.ndarray, de: float, e_max: float | None = None):
    """Bin a momentum density (piecewise constant on grid cells) into E = k^2/2 bins.

    Exact for the piecewise-constant representation; returns (e0, density).
    """
    k = np.asarray(k, dtype=float)
    dk = float(k[1] - k[0])
    n = int(round(-k[0] / dk))
    if k.size != 2 * n + 1 or abs(k[n]) > 1e-9 * dk:
        raise ValueError("momentum grid must be symmetric about k = 0")
    mass = rho_k * dk
    folded = np.concatenate([[mass[n]], mass[n + 1:] + mass[n - 1::-1]])
    edges = np.concatenate([[0.0], (np.arange(n + 1) + 0.5) * dk])
    cdf = np.concatenate([[0.0], np.cumsum(folded)])
    e_max = e_max if e_max is not None else 0.5 * edges[-1] ** 2
    nb = int(math.ceil(e_max / de))
    e_edges = de * np.arange(nb + 1)
    c = np.interp(np.sqrt(2 * e_edges), edges, cdf)
    return 0.5 * de, np.diff(c) / de


def jacobian_density(k: np.ndarray, rho_k: np.ndarray, energies) -> np.ndarray:
    """Pointwise change of variables rho_E = [rho(+s) + rho(-s)] / s with s = sqrt(2E)."""
    s = np.sqrt(2 * np.asarray(energies, dtype=float))
    both = np.interp(s, k, rho_k, left=0, right=0) + np.interp(-s, k, rho_k, left=0, right=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, both / s, np.inf)


def default_energy_step(T: float, L: float) -> float:
    spans = [1.0 / T if T > 0 else math.inf, TWO_PI / L if L > 0 else math.inf]
    step = min(spans) / 4
    return step if math.isfinite(step) else 0.05


def photon_energy_distribution(obj, part: str = "all", de: float | None = None,
                               label: str | None = None) -> EnergyDistribution:
    """Photon energy distribution of a box state or of the branches at time T.

    part: "all" (physical, both branches), "trapped" or "released"
    (released is returned conditional, i.e. normalized).
    """
    if isinstance(obj, BoxState):
        occ = obj.occupied
        return EnergyDistribution(label or "photon_initial", obj.basis.mode_energies[occ - 1],
                                  np.abs(obj.amplitudes[occ - 1]) ** 2)
    if not isinstance(obj, JointBranches):
        raise TypeError("expected BoxState or JointBranches")
    b = obj
    de = de or default_energy_step(b.T, b.window.half_width)
    probs = b.probs
    scale = math.exp(2 * b.log_scale) if b.log_scale > -370 else 0.0
    trapped = EnergyDistribution("trapped", b.trapped_energies, probs @ (np.abs(b.trapped) ** 2),
                                 tail_mass=float(probs @ (b.state_norm - scale * b.window_mass
                                                          - b.trapped_mode_mass)))
    rho_k = probs @ (np.abs(b.released_k) ** 2)
    if b.k.size > 1:
        e0, dens = momentum_to_energy(b.k, rho_k, de)
    else:
        e0, dens = 0.5 * de, np.zeros(1)
    released = EnergyDistribution("released", e0=e0, de=de, density=dens,
                                  tail_mass=float(probs @ b.outside_mass))
    if part == "released":
        total = released.mass + released.tail_mass
        out = released.scaled(1.0 / total) if total > 0 else released
        out.label = label or "photon_released"
        return out
    if part == "trapped":
        trapped.label = label or "photon_trapped"
        return trapped
    out = trapped.plus(released.scaled(scale), label or "photon_final")
    return out


def lattice_transform(packet: OpenerPacket, p) -> np.ndarray:
    """phi_d(p) = (dq/2pi)^(1/2) sum_i c_i exp(-i p q_i), periodic in p with period 2pi/dq."""
    p = np.asarray(p, dtype=float)
    ph = np.exp(-1j * np.multiply.outer(p, packet.q))
    return math.sqrt(packet.dq / TWO_PI) * (ph @ packet.weights)


def opener_band(dq: float, de: float, center: float = 0.0):
    """Grid covering one Nyquist band with an integer number of bins."""
    period = TWO_PI / dq
    n = int(math.ceil(period / de))
    step = period / n
    return center - 0.5 * period + step * np.arange(n), step, period


def opener_energy_distribution(obj, de: float | None = None, part: str = "released",
                               label: str | None = None) -> EnergyDistribution:
    """Opener energy (= momentum) density over one Nyquist band.

    For branches, part selects "released" (conditional), "trapped" or "all".
    """
    if isinstance(obj, OpenerPacket):
        pk = obj
        de = de or (1.0 / max(pk.duration, 1e-12)) / 4
        p, step, period = opener_band(pk.dq, de)
        ev = lambda e, pk=pk: np.abs(lattice_transform(pk, e)) ** 2
        return EnergyDistribution(label or "opener_initial", e0=float(p[0]), de=step,
                                  density=ev(p), period=period, evaluator=ev)
    b = obj
    de = de or default_energy_step(b.T, b.window.half_width)
    p, step, period = opener_band(b.dq, de)
    ph = np.exp(-1j * np.outer(p, b.q_final)) * math.sqrt(b.dq / TWO_PI)
    released = ph @ b.released_amplitude()
    rel = np.sum(np.abs(released) ** 2, axis=1) * b.dk
    if part == "released":
        m = rel.sum() * step
        return EnergyDistribution(label or "opener_released", e0=float(p[0]), de=step,
                                  density=rel / m if m > 0 else rel, period=period)
    trapped = ph @ b.trapped_final()
    trp = np.sum(np.abs(trapped) ** 2, axis=1)
    if part == "trapped":
        return EnergyDistribution(label or "opener_trapped", e0=float(p[0]), de=step,
                                  density=trp, period=period)
    scale = math.exp(2 * b.log_scale) if b.log_scale > -370 else 0.0
    return EnergyDistribution(label or "opener_final", e0=float(p[0]), de=step,
                              density=trp + scale * rel, period=period)


def total_variation(a: EnergyDistribution, b: EnergyDistribution) -> float:
    """Half the L1 distance between two distributions, evaluated on a's grid."""
    if a.density.size == 0:
        raise ValueError("first distribution needs a density grid")
    ma = a.binned(a.e0, a.de, a.density.size)
    mb = b.binned(a.e0, a.de, a.density.size)
    return 0.5 * float(np.sum(np.abs(ma - mb)))


def l1_distance(a: EnergyDistribution, b: EnergyDistribution) -> float:
    return 2.0 * total_variation(a, b)


def convolve(pa: EnergyDistribution, pb: EnergyDistribution, label: str = "total") -> EnergyDistribution:
    """Distribution of the sum of two independent energies."""
    if pa.kind == "discrete" and pb.kind != "discrete":
        pa, pb = pb, pa
    if pb.kind == "discrete":
        if pa.kind == "discrete":
            lv = np.add.outer(pa.levels, pb.levels).ravel()
            wt = np.multiply.outer(pa.weights, pb.weights).ravel()
            lv_r = np.round(lv, 12)
            uniq, inv = np.unique(lv_r, return_inverse=True)
            acc = np.zeros(uniq.size)
            np.add.at(acc, inv, wt)
            return EnergyDistribution(label, uniq, acc)
        return _shift_sum(pa, pb, label)
    # density (or mixed) with density (or mixed)
    out = None
    for part_a in _parts(pa):
        for part_b in _parts(pb):
            piece = convolve(part_a, part_b, label) if (part_a.kind == "discrete" or part_b.kind == "discrete") \
                else _density_convolve(part_a, part_b, label)
            out = piece if out is None else _add_on_grid(out, piece, label)
    return out


def _parts(p: EnergyDistribution):
    if p.kind != "mixed":
        return [p]
    disc = EnergyDistribution(p.label, p.levels, p.weights)
    dens = EnergyDistribution(p.label, e0=p.e0, de=p.de, density=p.density, period=p.period,
                              evaluator=p.evaluator)
    return [disc, dens]


def _shift_sum(dens: EnergyDistribution, disc: EnergyDistribution, label: str) -> EnergyDistribution:
    """sum_j w_j rho(E - E_j) on the density grid (extended when not periodic)."""
    if dens.period:
        e = dens.energies
        n = dens.density.size
        e0 = dens.e0
    else:
        lo = dens.e0 + disc.levels.min()
        hi = dens.energies[-1] + disc.levels.max()
        n = int(round((hi - lo) / dens.de)) + 1
        e0 = lo
        e = lo + dens.de * np.arange(n)
    vals = np.zeros(n)
    resampled = False
    for lv, w in zip(disc.levels, disc.weights):
        if dens.evaluator is None:
            off = lv / dens.de
            resampled |= abs(off - round(off)) > 1e-9
        vals += w * dens.density_at(e - lv)
    ev = None
    if dens.evaluator is not None:
        levels, weights, f = disc.levels.copy(), disc.weights.copy(), dens.evaluator
        ev = lambda x: sum(w * f(np.asarray(x) - lv) for lv, w in zip(levels, weights))
    return EnergyDistribution(label, e0=e0, de=dens.de, density=vals, period=dens.period,
                              evaluator=ev, resampled=resampled)


def _density_convolve(a: EnergyDistribution, b: EnergyDistribution, label: str) -> EnergyDistribution:
    resampled = False
    if abs(a.de - b.de) > 1e-12 * a.de:
        n = int(math.ceil((b.energies[-1] - b.e0) / a.de)) + 1
        grid = b.e0 + a.de * np.arange(n)
        b = EnergyDistribution(b.label, e0=b.e0, de=a.de, density=b.density_at(grid), period=b.period)
        resampled = True
    if a.period or b.period:
        period = a.period or b.period
        n = int(round(period / a.de))
        fa = np.zeros(n)
        fb = np.zeros(n)
        fa[:] = a.binned(a.e0, a.de, n) / a.de
        fb[:] = b.binned(b.e0, a.de, n) / a.de
        conv = np.real(np.fft.ifft(np.fft.fft(fa) * np.fft.fft(fb))) * a.de
        return EnergyDistribution(label, e0=a.e0 + b.e0, de=a.de, density=conv, period=period,
                                  resampled=resampled)
    conv = np.convolve(a.density, b.density) * a.de
    return EnergyDistribution(label, e0=a.e0 + b.e0, de=a.de, density=conv, resampled=resampled)


def _add_on_grid(x: EnergyDistribution, y: EnergyDistribution, label: str) -> EnergyDistribution:
    if x.kind == "discrete" and y.kind == "discrete":
        return convolve(x, EnergyDistribution("zero", [0.0], [1.0]), label).plus(y, label)
    base = x if x.density.size else y
    other = y if base is x else x
    dens = base.density + (other.binned(base.e0, base.de, base.density.size) / base.de
                           if other.mass else 0.0)
    return EnergyDistribution(label, e0=base.e0, de=base.de, density=dens, period=base.period,
                              resampled=x.resampled or y.resampled)


def total_energy_direct(branches: JointBranches, energies, initial: bool = False,
                        released_scale: float | None = None) -> np.ndarray:
    """Total-energy density from the joint state on the clock lattice.

    P(E) = (dq/2pi) [sum_m |sum_i c_i e^{iE tau_i} a_m(tau_i)|^2
                     + int dk |sum_i c_i e^{iE tau_i} S_i(k)|^2],
    with a_m(tau_i) the trapped amplitudes after the kick (or, for
    initial=True, the unkicked amplitudes).  The free/box phases to time T
    cancel against the opener translation, which is what makes the sum a
    direct total-energy amplitude.
    """
    b = branches
    e = np.asarray(energies, dtype=float)
    ph = np.exp(1j * np.outer(e, b.tau)) * b.weights[None, :]
    pref = b.dq / TWO_PI
    if initial:
        trapped = b.trapped + (math.exp(b.log_scale) * b.trapped_cut if b.log_scale > -700 else 0.0)
    else:
        trapped = b.trapped
    out = np.sum(np.abs(ph @ trapped) ** 2, axis=1)
    if not initial and b.k.size > 1:
        scale = released_scale if released_scale is not None else (
            math.exp(2 * b.log_scale) if b.log_scale > -370 else 0.0)
        if scale:
            out = out + scale * np.sum(np.abs(ph @ b.released_k) ** 2, axis=1) * b.dk
    return pref * out


def total_energy_final(branches: JointBranches, grid_like: EnergyDistribution,
                       initial: bool = False, label: str | None = None) -> EnergyDistribution:
    dens = total_energy_direct(branches, grid_like.energies, initial=initial)
    return EnergyDistribution(label or ("total_initial_direct" if initial else "total_final"),
                              e0=grid_like.e0, de=grid_like.de, density=dens, period=grid_like.period)


# --- characteristic functions -----------------------------------------------

def characteristic_function(dist: EnergyDistribution, taus) -> CharacteristicSeries:
    """P~(tau) = int exp(i E tau) P(E) dE; density bins integrated exactly."""
    taus = np.asarray(taus, dtype=float)
    vals = np.exp(1j * np.outer(taus, dist.levels)) @ dist.weights if dist.levels.size else \
        np.zeros(taus.size, dtype=complex)
    if dist.density.size:
        sinc = np.sinc(taus * dist.de / TWO_PI)
        vals = vals + sinc * (np.exp(1j * np.outer(taus, dist.energies)) @ dist.density) * dist.de
    return CharacteristicSeries(taus, vals, dist.label)


def characteristic_overlap(state: BoxState, taus, t: float = 0.0, dx: float | None = None) -> CharacteristicSeries:
    """Survival amplitude <Psi(t+tau)|Psi(t)> from grid quadrature over the box."""
    from .box import evolve_box
    taus = np.asarray(taus, dtype=float)
    ktop = max(state.top_wavenumber, 1e-12)
    dx = dx or TWO_PI / (8 * ktop)
    grid = box_grid(state.basis, dx)
    w = np.full(grid.size, grid[1] - grid[0])
    w[0] = w[-1] = 0.5 * w[0]
    ref = sample_on_grid(evolve_box(state, t), grid).values
    base = evolve_box(state, t)
    vals = np.empty(taus.size, dtype=complex)
    for i, tau in enumerate(taus):
        moved = base.values(grid, [tau], high_precision=False)[0]
        vals[i] = np.sum(w * np.conj(moved) * ref)
    return CharacteristicSeries(taus, vals, state.label)


def branch_photon_characteristic(b: JointBranches, taus, part: str = "all") -> CharacteristicSeries:
    """Photon characteristic function at time T from branch overlaps."""
    taus = np.asarray(taus, dtype=float)
    probs = b.probs
    tr = probs @ (np.abs(b.trapped) ** 2)
    trapped = np.exp(1j * np.outer(taus, b.trapped_energies)) @ tr
    rel = (probs @ (np.abs(b.released_k) ** 2)) * b.dk
    released = np.exp(0.5j * np.outer(taus, b.k ** 2)) @ rel
    if part == "trapped":
        return CharacteristicSeries(taus, trapped, "photon_trapped")
    if part == "released":
        total = rel.sum()
        return CharacteristicSeries(taus, released / total if total else released, "photon_released")
    scale = math.exp(2 * b.log_scale) if b.log_scale > -370 else 0.0
    return CharacteristicSeries(taus, trapped + scale * released, "photon_final")


def opener_autocorrelation(packet: OpenerPacket, tau) -> np.ndarray:
    """int conj(phi(q)) phi(q - tau) dq for the cell-interpolated packet."""
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    v = packet.values
    n = v.size
    dq = packet.dq
    out = np.zeros(tau.size, dtype=complex)
    for j, t in enumerate(tau):
        s = t / dq
        base = math.floor(s)
        frac = s - base
        acc = 0j
        for shift, wt in ((base, 1.0 - frac), (base + 1, frac)):
            if wt == 0 or abs(shift) >= n:
                continue
            # phi(q - shift*dq) at sample i is v[i - shift]
            lo, hi = max(0, shift), min(n, n + shift)
            acc += wt * np.sum(np.conj(v[lo:hi]) * v[lo - shift:hi - shift])
        out[j] = acc * dq
    return out[0] if scalar else out


def opener_characteristic(packet: OpenerPacket, taus) -> CharacteristicSeries:
    """P~_Omega(tau) = <phi| e^{i p tau} |phi> = int conj(phi(q)) phi(q + tau) dq."""
    taus = np.asarray(taus, dtype=float)
    return CharacteristicSeries(taus, opener_autocorrelation(packet, -taus), "opener")


def modular_energy_average(obj, tau) -> np.ndarray:
    """<exp(i H tau)> for a distribution, box state or opener packet."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if isinstance(obj, OpenerPacket):
        return opener_characteristic(obj, taus).values
    if isinstance(obj, BoxState):
        return characteristic_function(photon_energy_distribution(obj), taus).values
    if isinstance(obj, JointBranches):
        return branch_photon_characteristic(obj, taus).values
    return characteristic_function(obj, taus).values


# --- moments ----------------------------------------------------------------

def moments(dist: EnergyDistribution, max_order: int, warn: bool = True) -> np.ndarray:
    """<E^n>, n = 1..max_order; density bins integrated exactly."""
    orders = np.arange(1, max_order + 1)
    out = np.array([np.sum(dist.weights * dist.levels ** n) for n in orders], dtype=float)
    if dist.density.size:
        lo = dist.energies - 0.5 * dist.de
        hi = dist.energies + 0.5 * dist.de
        for i, n in enumerate(orders):
            out[i] += np.sum(dist.density * (hi ** (n + 1) - lo ** (n + 1)) / (n + 1))
    # only a binned density has a represented range that truncation can bias
    if warn and dist.density.size > 1 and out[-1]:
        e = dist.energies
        cut = e[0] + 0.9 * (e[-1] - e[0])
        sel = e >= cut
        top = np.sum(dist.density[sel] * e[sel] ** max_order) * dist.de
        if top / out[-1] > 0.1:
            warnings.warn(f"top decile of the energy range carries {top / out[-1]:.0%} of "
                          f"<E^{max_order}>", HeavyTailWarning, stacklevel=2)
    return out


# --- verification report ----------------------------------------------------

@dataclass
class ConservationReport:
    entries: list = field(default_factory=list)

    def add(self, key: str, value, passed: bool | None = None) -> None:
        self.entries.append((key, value, passed))

    @property
    def passed(self) -> bool:
        return all(p for _, _, p in self.entries if p is not None)

    def failures(self) -> list[str]:
        return [k for k, _, p in self.entries if p is False]

    def to_text(self) -> str:
        lines = []
        for key, value, passed in self.entries:
            if isinstance(value, float):
                value = f"{value:.6e}"
            lines.append(f"{key}: {value}")
            if passed is not None:
                lines.append(f"{key}.pass: {'true' if passed else 'false'}")
        lines.append(f"all.pass: {'true' if self.passed else 'false'}")
        return "\n".join(lines) + "\n"


def verify_conservation(total_initial: EnergyDistribution, total_final: EnergyDistribution,
                        photon_cf_initial: CharacteristicSeries, photon_cf_final: CharacteristicSeries,
                        opener_cf: CharacteristicSeries, delta: float = 1e-3,
                        delta_prime: float = 1e-2, l1_tol: float = 1e-6,
                        residual_tol: float = 1e-6) -> ConservationReport:
    rep = ConservationReport()
    l1 = l1_distance(total_initial, total_final)
    rep.add("total_energy_l1", l1, l1 <= l1_tol)
    rep.add("total_energy_bin_width", total_initial.de)
    diff = photon_cf_initial.values - photon_cf_final.values
    residual = float(np.max(np.abs(diff * opener_cf.values))) if diff.size else 0.0
    rep.add("fourier_residual", residual, residual <= residual_tol)
    changed = np.abs(diff) > delta
    worst = float(np.max(np.abs(opener_cf.values[changed]))) if changed.any() else 0.0
    rep.add("photon_cf_max_change", float(np.max(np.abs(diff))) if diff.size else 0.0)
    rep.add("photon_cf_changed_samples", int(changed.sum()))
    rep.add("catalyst_window_max_opener_cf", worst, worst < delta_prime)
    for name, cf in (("photon_cf_initial", photon_cf_initial), ("photon_cf_final", photon_cf_final),
                     ("opener_cf", opener_cf)):
        ax = cf.check_axioms(tol=1e-8)
        rep.add(f"{name}.max_modulus", ax["max_modulus"], ax["modulus_ok"])
        if "at_zero" in ax:
            rep.add(f"{name}.at_zero_error", abs(ax["at_zero"] - 1.0), ax["at_zero_ok"])
        rep.add(f"{name}.hermitian_error", ax["hermitian_error"], ax["hermitian_ok"])
    return rep
