"""One-dimensional quantum mechanics of the soft-mode potential.

``V(x) = a x^2 / 2 + b x^4 / 4 + cubic x^3`` in SI units (x in m, V in J).
Internally every calculation is done in scaled units with ``hbar = m = 1``
and a length ``L`` adapted to the potential, which keeps the numbers of
order one whatever the physical parameters.

Eigenstates use the Colbert-Miller sinc discrete-variable representation
on a uniform grid.  Static evolution is exact in that eigenbasis; driven
and swept evolution use a second-order split-operator FFT propagator.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants as const
from scipy import linalg, optimize

from .wavefunction import Axis, RadialWavefunction, SpectralResult

EXTENT_WIDTHS = 3.0
DECAY_ACTION = 32.0  # auto grids extend until the WKB amplitude is ~exp(-32)
MAX_POINTS = 6001


class GridError(ValueError):
    pass


class NoDoubletError(ValueError):
    pass


@dataclass(frozen=True)
class Potential1D:
    a: float
    b: float
    mass: float
    cubic: float = 0.0
    hbar: float = const.hbar

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    @classmethod
    def from_landau(cls, lp, cubic: float | None = None) -> "Potential1D":
        return cls(a=lp.a, b=lp.b, mass=lp.mass, cubic=lp.cubic if cubic is None else cubic, hbar=lp.hbar)

    def with_a(self, a: float) -> "Potential1D":
        return replace(self, a=a)

    def with_cubic(self, cubic: float) -> "Potential1D":
        return replace(self, cubic=cubic)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a * x**2 + 0.25 * self.b * x**4 + self.cubic * x**3

    @property
    def quartic_coefficient(self) -> float:
        return self.b / 4

    # scaled units --------------------------------------------------------
    @property
    def length_unit(self) -> float:
        h2m = self.hbar**2 / self.mass
        lq = (h2m / self.b) ** (1 / 6)
        if self.a == 0:
            return lq
        return min((h2m / abs(self.a)) ** 0.25, lq)

    @property
    def energy_unit(self) -> float:
        return self.hbar**2 / (self.mass * self.length_unit**2)

    @property
    def time_unit(self) -> float:
        return self.hbar / self.energy_unit

    def scaled(self) -> tuple[float, float, float]:
        L, E = self.length_unit, self.energy_unit
        return self.a * L**2 / E, self.b * L**4 / E, self.cubic * L**3 / E

    def scaled_values(self, xi):
        a, b, c = self.scaled()
        return 0.5 * a * xi**2 + 0.25 * b * xi**4 + c * xi**3

    def stationary_points(self) -> np.ndarray:
        """Real roots of V'(x), ascending (SI)."""
        roots = np.roots([self.b, 3 * self.cubic, self.a, 0.0])
        real = np.sort(roots[np.abs(roots.imag) <= 1e-9 * max(1.0, np.abs(roots).max())].real)
        return real

    def minima(self) -> np.ndarray:
        pts = self.stationary_points()
        curv = self.a + 3 * self.b * pts**2 + 6 * self.cubic * pts
        return pts[curv > 0]

    @property
    def is_double_well(self) -> bool:
        return len(self.minima()) == 2

    @property
    def barrier(self) -> float:
        """Barrier top energy (J); raises for a single well."""
        pts = self.stationary_points()
        curv = self.a + 3 * self.b * pts**2 + 6 * self.cubic * pts
        tops = pts[curv < 0]
        if len(tops) == 0:
            raise NoDoubletError("potential has a single well")
        return float(self(tops[0]))


# grids -------------------------------------------------------------------


def _turning_points(pot: Potential1D, energy: float) -> tuple[float, float]:
    """Outermost classical turning points (scaled) for a scaled energy."""
    a, b, c = pot.scaled()
    roots = np.roots([0.25 * b, c, 0.5 * a, 0.0, -energy])
    real = roots[np.abs(roots.imag) <= 1e-7 * max(1.0, np.abs(roots).max())].real
    if len(real) == 0:
        return 0.0, 0.0
    return float(real.min()), float(real.max())


def _decay_length(pot: Potential1D, xi: float) -> float:
    a, b, c = pot.scaled()
    slope = abs(a * xi + b * xi**3 + 3 * c * xi**2)
    return (0.5 / max(slope, 1e-300)) ** (1 / 3)


def _decay_edge(pot: Potential1D, energy: float, xt: float, direction: int) -> float:
    """Point beyond ``xt`` where the WKB decay action reaches DECAY_ACTION."""
    span = max(4 * _decay_length(pot, xt), 1.0)
    for _ in range(60):
        xs = xt + direction * np.linspace(0, span, 4001)
        kappa = np.sqrt(np.maximum(2 * (pot.scaled_values(xs) - energy), 0.0))
        action = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * np.diff(np.abs(xs)))])
        hit = np.flatnonzero(action >= DECAY_ACTION)
        if hit.size:
            return float(xs[hit[0]])
        span *= 2
    raise GridError("could not bound the classically forbidden region")


def _scaled_spectrum_estimate(pot: Potential1D, k: int) -> np.ndarray:
    """Rough lowest-k energies (scaled), growing a coarse box until it is not felt."""
    mins = pot.minima() / pot.length_unit
    X = (float(np.max(np.abs(mins))) if len(mins) else 0.0) + 3.0
    for _ in range(40):
        xi = np.linspace(-X, X, 241)
        E = linalg.eigh(_dvr_matrix(pot, xi), eigvals_only=True, subset_by_index=[0, k - 1])
        lo, hi = _turning_points(pot, float(E[-1]))
        edge = float(pot.scaled_values(np.array([-X, X])).min())
        if max(abs(lo), abs(hi)) + 2.0 < X and edge > E[-1] + 8.0:
            return E
        X *= 1.4
    raise GridError("could not bracket the requested levels")


def auto_grid(pot: Potential1D, k: int = 2) -> Axis:
    """Uniform grid (m) resolving the lowest ``k`` states with margin."""
    E = _scaled_spectrum_estimate(pot, k)
    Ek = float(E[-1]) + 0.5 * abs(float(E[-1] - E[0])) + 1.0
    lo, hi = _turning_points(pot, Ek)
    left = _decay_edge(pot, Ek, lo, -1)
    right = _decay_edge(pot, Ek, hi, +1)
    X = max(abs(left), abs(right))
    vmin = float(pot.scaled_values(np.linspace(-X, X, 20001)).min())
    pmax = math.sqrt(2 * max(Ek - vmin, 1.0))
    h = min(math.pi / (4 * pmax), 0.25)
    n = int(2 * math.ceil(X / h)) + 1
    if n > MAX_POINTS:
        raise GridError(f"required grid of {n} points exceeds {MAX_POINTS}")
    n = max(n, 129)
    L = pot.length_unit
    return Axis(-X * L, X * L, n)


def check_extent(pot: Potential1D, axis: Axis, energies_scaled) -> None:
    """Require the grid to reach 3 decay lengths past every turning point."""
    L = pot.length_unit
    Ek = float(np.max(energies_scaled))
    lo, hi = _turning_points(pot, Ek)
    need_lo = lo - EXTENT_WIDTHS * max(_decay_length(pot, lo), 0.0)
    need_hi = hi + EXTENT_WIDTHS * max(_decay_length(pot, hi), 0.0)
    if axis.start / L > need_lo or axis.stop / L < need_hi:
        raise GridError(
            f"grid [{axis.start:.3e}, {axis.stop:.3e}] m does not cover the turning points of the highest "
            f"requested level by {EXTENT_WIDTHS} widths (need [{need_lo * L:.3e}, {need_hi * L:.3e}] m)"
        )


def _dvr_matrix(pot: Potential1D, xi: np.ndarray) -> np.ndarray:
    h = xi[1] - xi[0]
    idx = np.arange(len(xi))
    d = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore"):
        T = np.where(d == 0, math.pi**2 / 6, (-1.0) ** np.abs(d) / np.where(d == 0, 1, d) ** 2)
    T = T / h**2
    T[np.diag_indices_from(T)] += pot.scaled_values(xi)
    return T


def _scaled_axis(pot: Potential1D, axis: Axis) -> np.ndarray:
    return axis.values / pot.length_unit


# eigenstates -------------------------------------------------------------


def _parity_eigh(H: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs of a reflection-symmetric matrix, solved per parity sector.

    Keeps even and odd states apart even when a deep doublet is degenerate
    to machine precision; ties are ordered even first.
    """
    n = H.shape[0]
    half = n // 2
    eye = np.eye(n)
    cols_e = [(eye[:, i] + eye[:, n - 1 - i]) / math.sqrt(2) for i in range(half)]
    if n % 2:
        cols_e.append(eye[:, half])
    cols_o = [(eye[:, i] - eye[:, n - 1 - i]) / math.sqrt(2) for i in range(half)]
    out = []
    for sign, cols in ((0, cols_e), (1, cols_o)):
        B = np.column_stack(cols)
        m = min(k, B.shape[1])
        w, U = linalg.eigh(B.T @ H @ B, subset_by_index=[0, m - 1])
        out += [(float(w[j]), sign, B @ U[:, j]) for j in range(m)]
    out.sort(key=lambda t: (t[0], t[1]))
    tol = 1e-12 * max(1.0, max(abs(t[0]) for t in out))
    for i in range(len(out) - 1):
        if out[i][1] > out[i + 1][1] and out[i + 1][0] - out[i][0] < tol:
            out[i], out[i + 1] = out[i + 1], out[i]
    out = out[:k]
    return np.array([t[0] for t in out]), np.column_stack([t[2] for t in out])


def eigenstates_1d(pot: Potential1D, grid: Axis | None = None, k: int = 2) -> SpectralResult:
    """Lowest ``k`` eigenpairs; energies in J, states in m^(-1/2)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    grid = auto_grid(pot, k) if grid is None else grid
    xi = _scaled_axis(pot, grid)
    H = _dvr_matrix(pot, xi)
    if pot.cubic == 0 and abs(grid.start + grid.stop) <= 1e-12 * grid.stop:
        E, V = _parity_eigh(H, k)
    else:
        E, V = linalg.eigh(H, subset_by_index=[0, k - 1])
    check_extent(pot, grid, E)
    res = np.linalg.norm(H @ V - V * E, axis=0) / np.maximum(np.abs(E), 1.0)
    h = xi[1] - xi[0]
    L = pot.length_unit
    states = []
    for j in range(k):
        v = V[:, j]
        # deterministic phase: even states positive in the middle, odd ones positive on the right
        weight = np.sum(v * np.sign(xi)) if abs(np.sum(v)) < 1e-6 * np.sum(np.abs(v)) else np.sum(v)
        if weight < 0:
            v = -v
        states.append(RadialWavefunction((grid,), (v / math.sqrt(h * L)).astype(complex), "m"))
    return SpectralResult(
        energies=E * pot.energy_unit,
        states=states,
        energy_unit="J",
        residuals=res,
        metadata={"grid": (grid.start, grid.stop, grid.points), "length_unit_m": L},
    )


def parity(state: RadialWavefunction) -> int:
    """+1 or -1 for a reflection-symmetric state on a symmetric grid."""
    psi = state.amplitudes
    s = np.vdot(psi, psi[::-1]).real / np.vdot(psi, psi).real
    return 1 if s > 0 else -1


@dataclass(frozen=True)
class Splitting:
    delta_E: float  # J
    rate_Hz: float  # delta_E / h
    angular: float  # delta_E / hbar, rad/s


def tunneling_splitting(pot: Potential1D, grid: Axis | None = None) -> Splitting:
    if pot.a >= 0:
        raise ValueError("tunnelling splitting needs a double well (a < 0)")
    res = eigenstates_1d(pot, grid, 2)
    dE = res.gap
    return Splitting(dE, dE / (2 * math.pi * pot.hbar), dE / pot.hbar)


@dataclass
class LocalizedPair:
    L: RadialWavefunction
    R: RadialWavefunction
    below_barrier: bool
    warning: str | None = None


def localized_states(res: SpectralResult, pot: Potential1D | None = None) -> LocalizedPair:
    """``(|0> -/+ |1>)/sqrt 2`` with the sign chosen so that <L|x|L> < 0."""
    if len(res.states) < 2:
        raise NoDoubletError("need the two lowest states")
    s0, s1 = res.states[0], res.states[1]
    A = (s0.amplitudes - s1.amplitudes) / math.sqrt(2)
    B = (s0.amplitudes + s1.amplitudes) / math.sqrt(2)
    x = s0.axes[0].values
    if np.sum(np.abs(A) ** 2 * x) > 0:
        A, B = B, A
    L = RadialWavefunction(s0.axes, A, s0.length_unit)
    R = RadialWavefunction(s0.axes, B, s0.length_unit)
    below, warn = True, None
    if pot is not None:
        try:
            below = bool(res.energies[1] < pot.barrier)
        except NoDoubletError:
            below = False
        if not below:
            warn = "doublet is not below the barrier; |L> and |R> are only weakly localised"
            warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return LocalizedPair(L, R, below, warn)


def expectation_x(state: RadialWavefunction) -> float:
    x = state.axes[0].values
    return float(np.sum(np.abs(state.amplitudes) ** 2 * x) * state.cell)


def cubic_bias_gap(pot: Potential1D, grid: Axis | None = None) -> float:
    """<L|H|L> - <R|H|R> (J) with |L>, |R> from the unbiased doublet."""
    if pot.a >= 0:
        raise ValueError("asymmetry needs a double well (a < 0)")
    if not pot.is_double_well:
        raise NoDoubletError("cubic term is too strong; the potential no longer has two wells")
    top = pot.barrier
    for xm in pot.minima():
        curv = pot.a + 3 * pot.b * xm**2 + 6 * pot.cubic * xm
        if top - pot(xm) < 0.5 * pot.hbar * math.sqrt(curv / pot.mass):
            raise NoDoubletError("cubic term is too strong; one well no longer holds a level")
    sym = pot.with_cubic(0.0)
    grid = auto_grid(sym, 2) if grid is None else grid
    pair = localized_states(eigenstates_1d(sym, grid, 2))
    x = grid.values
    h = grid.step
    dv = pot.cubic * x**3  # the only difference from the symmetric Hamiltonian
    eL = float(np.sum(np.abs(pair.L.amplitudes) ** 2 * dv) * h)
    eR = float(np.sum(np.abs(pair.R.amplitudes) ** 2 * dv) * h)
    return eL - eR


def quartic_gaussian_energies(b: float, mass: float, hbar: float = const.hbar) -> tuple[float, float]:
    """Gaussian-approximation ground energy and gap of ``V = b x^4 / 4``.

    With ``lam = b / 4`` the coefficient of ``x^4``:
    ``E0 = 3^(4/3) / 2^(8/3) (hbar^4 lam / m^2)^(1/3)`` and
    ``gap = (3/2)^(4/3) (hbar^4 lam / m^2)^(1/3)``.
    """
    scale = (hbar**4 * (b / 4) / mass**2) ** (1 / 3)
    return 3 ** (4 / 3) / 2 ** (8 / 3) * scale, 1.5 ** (4 / 3) * scale


# time evolution ----------------------------------------------------------


@dataclass(frozen=True)
class EvolutionSchedule:
    """Time grid and protocol.

    ``kind`` is ``"static"``, ``"sweep"`` (``a`` goes from ``a_start`` to
    ``a_end`` linearly in time) or ``"drive"`` (adds
    ``V0 (x / x_scale) cos(omega t + phase)``).  Times are in s.
    """

    kind: str
    duration: float
    dt: float
    samples: int = 201
    a_start: float | None = None
    a_end: float | None = None
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = -math.pi / 2
    x_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("static", "sweep", "drive"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kind == "sweep" and (self.a_start is None or self.a_end is None):
            raise ValueError("a sweep needs a_start and a_end")
        if self.kind == "drive" and not self.omega > 0:
            raise ValueError("a drive needs omega > 0")

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.duration / self.dt - 1e-9))

    @property
    def rate(self) -> float:
        return abs(self.a_end - self.a_start) / self.duration

    def a_at(self, pot: Potential1D, t: float) -> float:
        if self.kind != "sweep":
            return pot.a
        s = min(max(t / self.duration, 0.0), 1.0)
        return self.a_start + (self.a_end - self.a_start) * s


def step_bound(pot: Potential1D, schedule: EvolutionSchedule, grid: Axis | None = None) -> float:
    """Largest admissible dt: 20 samples per hbar/gap and per drive period."""
    if schedule.kind == "sweep":
        path = np.linspace(schedule.a_start, schedule.a_end, 5)
        pots = [pot.with_a(a) for a in path]
    else:
        pots = [pot]
    gap = 0.0
    for p in pots:
        E = eigenstates_1d(p, grid, 3).energies
        gap = max(gap, float(E[2] - E[0]))
    bound = pot.hbar / gap / 20
    if schedule.kind == "drive":
        bound = min(bound, 2 * math.pi / schedule.omega / 20)
    return bound


@dataclass
class Trajectory:
    times: np.ndarray
    x_mean: np.ndarray
    norm: np.ndarray
    final: RadialWavefunction
    P_L: np.ndarray | None = None
    P_R: np.ndarray | None = None
    energy: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "P_L", "P_R", "x_mean_m", "norm"])
            for i, t in enumerate(self.times):
                pl = "" if self.P_L is None else f"{self.P_L[i]:.12e}"
                pr = "" if self.P_R is None else f"{self.P_R[i]:.12e}"
                w.writerow([f"{t:.12e}", pl, pr, f"{self.x_mean[i]:.12e}", f"{self.norm[i]:.12e}"])


def _record_indices(steps: int, samples: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, steps, max(2, samples))).astype(int))


def evolve(
    psi0: RadialWavefunction,
    pot: Potential1D,
    schedule: EvolutionSchedule,
    *,
    localized: LocalizedPair | None = None,
    frame: str = "lab",
    static_spectrum: SpectralResult | None = None,
) -> Trajectory:
    """Propagate ``psi0`` under ``pot`` and ``schedule``.

    With ``localized`` the populations ``|<L|psi>|^2`` and ``|<R|psi>|^2``
    are recorded.  ``frame="interaction"`` measures them in the frame of
    the static Hamiltonian: since |L>, |R> lie in the span of the two
    lowest eigenstates, ``e^{-i H0 t}|L>`` is formed from the doublet alone.
    """
    if frame not in ("lab", "interaction"):
        raise ValueError("frame must be 'lab' or 'interaction'")
    psi0.check_normalized(1e-6)
    grid = psi0.axes[0]
    bound = step_bound(pot, schedule, grid)
    if schedule.dt > bound * (1 + 1e-12):
        raise ValueError(f"time step {schedule.dt:.3e} s exceeds the stability/accuracy bound {bound:.3e} s")
    if frame == "interaction" and localized is None:
        raise ValueError("interaction-frame populations need localized states")

    L = pot.length_unit
    tu = pot.time_unit
    xi = _scaled_axis(pot, grid)
    h = xi[1] - xi[0]
    x = grid.values
    psi = psi0.amplitudes.astype(complex) * math.sqrt(L)
    steps = schedule.steps
    dt = schedule.duration / steps / tu
    rec = _record_indices(steps, schedule.samples)

    spec = static_spectrum
    if frame == "interaction" and spec is None:
        spec = eigenstates_1d(pot, grid, 2)
    refs = None
    if localized is not None:
        refs = (localized.L.amplitudes * math.sqrt(L), localized.R.amplitudes * math.sqrt(L))
        if frame == "interaction":
            d0 = spec.states[0].amplitudes * math.sqrt(L)
            d1 = spec.states[1].amplitudes * math.sqrt(L)
            cL = (np.vdot(d0, refs[0]) * h, np.vdot(d1, refs[0]) * h)
            cR = (np.vdot(d0, refs[1]) * h, np.vdot(d1, refs[1]) * h)
            e0, e1 = spec.energies / pot.energy_unit

    out_t, out_x, out_n, out_pl, out_pr, out_e = [], [], [], [], [], []

    def record(k, state):
        t = k * dt
        p = np.abs(state) ** 2 * h
        out_t.append(t * tu)
        out_x.append(float(np.sum(p * xi)) * L)
        out_n.append(float(np.sqrt(p.sum())))
        if refs is not None:
            if frame == "interaction":
                ph0, ph1 = np.exp(-1j * e0 * t), np.exp(-1j * e1 * t)
                rl = cL[0] * ph0 * d0 + cL[1] * ph1 * d1
                rr = cR[0] * ph0 * d0 + cR[1] * ph1 * d1
            else:
                rl, rr = refs
            out_pl.append(abs(np.vdot(rl, state) * h) ** 2)
            out_pr.append(abs(np.vdot(rr, state) * h) ** 2)

    if schedule.kind == "static":
        H = _dvr_matrix(pot, xi)
        E, V = linalg.eigh(H)
        c = V.T @ psi
        for k in rec:
            state = V @ (np.exp(-1j * E * k * dt) * c)
            record(k, state)
            out_e.append(float(np.sum(E * np.abs(c) ** 2) / np.sum(np.abs(c) ** 2)) * pot.energy_unit)
        psi = state
    else:
        kgrid = 2 * np.pi * np.fft.fftfreq(len(xi), d=h)
        kin = np.exp(-0.5j * kgrid**2 * dt)
        a0, b0, c0 = pot.scaled()
        Eu = pot.energy_unit
        drive_shape = (x / schedule.x_scale) / Eu if schedule.kind == "drive" else None

        def vhalf(t):
            if schedule.kind == "sweep":
                a = schedule.a_at(pot, t * tu) * L**2 / Eu
                v = 0.5 * a * xi**2 + 0.25 * b0 * xi**4 + c0 * xi**3
            else:
                v = 0.5 * a0 * xi**2 + 0.25 * b0 * xi**4 + c0 * xi**3
                v = v + schedule.amplitude * drive_shape * math.cos(schedule.omega * t * tu + schedule.phase)
            return np.exp(-0.5j * v * dt)

        rec_set = set(int(r) for r in rec)
        if 0 in rec_set:
            record(0, psi)
        prev = vhalf(0.0)
        for k in range(1, steps + 1):
            psi = prev * psi
            psi = np.fft.ifft(kin * np.fft.fft(psi))
            prev = vhalf(k * dt)
            psi = prev * psi
            if k in rec_set:
                record(k, psi)

    final = RadialWavefunction((grid,), psi / math.sqrt(L), "m")
    return Trajectory(
        times=np.array(out_t),
        x_mean=np.array(out_x),
        norm=np.array(out_n),
        final=final,
        P_L=np.array(out_pl) if refs is not None else None,
        P_R=np.array(out_pr) if refs is not None else None,
        energy=np.array(out_e) if out_e else None,
        metadata={"dt_s": schedule.duration / steps, "steps": steps, "frame": frame},
    )


def union_grid(pots, k: int = 3) -> Axis:
    """One grid fine and wide enough for every potential in ``pots``."""
    grids = [auto_grid(p, k) for p in pots]
    X = max(max(abs(g.start), abs(g.stop)) for g in grids)
    h = min(g.step for g in grids)
    n = int(2 * math.ceil(X / h)) + 1
    if n > MAX_POINTS:
        raise GridError(f"required grid of {n} points exceeds {MAX_POINTS}")
    return Axis(-X, X, n)


# protocols ---------------------------------------------------------------


@dataclass
class SweepResult:
    rate: float  # J m^-2 s^-1
    duration: float
    fidelity: float
    trajectory: Trajectory


def sweep(pot: Potential1D, a_start: float, a_end: float, rate: float, *, grid: Axis | None = None, samples: int = 101) -> SweepResult:
    """Start in the ground state at ``a_start`` and ramp ``a`` linearly to ``a_end``.

    The fidelity is the final overlap with the instantaneous ground state.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    p0, p1 = pot.with_a(a_start), pot.with_a(a_end)
    grid = union_grid([p0, p1]) if grid is None else grid
    start = eigenstates_1d(p0, grid, 1).states[0]
    target = eigenstates_1d(p1, grid, 1).states[0]
    duration = abs(a_end - a_start) / rate
    probe = EvolutionSchedule("sweep", duration, duration, a_start=a_start, a_end=a_end)
    dt = step_bound(p0, probe, grid)
    sched = replace(probe, dt=duration / math.ceil(duration / dt), samples=samples)
    traj = evolve(start, p0, sched)
    fid = abs(target.overlap(traj.final)) ** 2
    return SweepResult(rate, duration, float(fid), traj)


def sweep_study(pot: Potential1D, a_start: float, a_end: float, rates) -> list[SweepResult]:
    p0, p1 = pot.with_a(a_start), pot.with_a(a_end)
    grid = union_grid([p0, p1])
    return [sweep(pot, a_start, a_end, r, grid=grid) for r in rates]


def sweep_csv(results: list[SweepResult], path) -> None:
    rows = sorted(results, key=lambda r: r.rate)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rate_J_per_m2_s", "duration_s", "fidelity"])
        for r in rows:
            w.writerow([f"{r.rate:.12e}", f"{r.duration:.12e}", f"{r.fidelity:.12e}"])


@dataclass
class RabiResult:
    times: np.ndarray
    P_L: np.ndarray
    P_R: np.ndarray
    contrast: float
    rabi_frequency: float  # fitted, rad/s
    predicted_frequency: float  # V0 |<0|x|1>| / (hbar x_scale), rad/s
    resonance: float  # Delta E / hbar, rad/s
    low_contrast: bool
    trajectory: Trajectory


def rabi_scan(
    pot: Potential1D,
    amplitude: float,
    omega: float | None = None,
    *,
    duration: float | None = None,
    cycles: float = 2.0,
    phase: float = -math.pi / 2,
    x_scale: float | None = None,
    samples: int = 401,
    grid: Axis | None = None,
) -> RabiResult:
    """Drive ``V0 (x / x_scale) cos(omega t + phase)`` starting from |L>.

    Populations are measured in the frame of the undriven Hamiltonian so
    that free tunnelling does not mask the driven transfer.  The default
    phase makes the drive a sine, which rotates |L> into |R> on resonance.
    """
    if pot.a >= 0:
        raise ValueError("Rabi flipping needs a double well (a < 0)")
    grid = auto_grid(pot, 3) if grid is None else grid
    spec = eigenstates_1d(pot, grid, 2)
    pair = localized_states(spec)
    resonance = spec.gap / pot.hbar
    omega = resonance if omega is None else omega
    if x_scale is None:
        x_scale = float(np.max(np.abs(pot.minima())))
    x = grid.values
    x01 = abs(np.vdot(spec.states[0].amplitudes, x * spec.states[1].amplitudes) * grid.step)
    predicted = amplitude * x01 / (pot.hbar * x_scale)
    if duration is None:
        duration = cycles * 2 * math.pi / predicted
    probe = EvolutionSchedule("drive", duration, duration, amplitude=amplitude, omega=omega, phase=phase, x_scale=x_scale)
    dt = step_bound(pot, probe, grid)
    sched = replace(probe, dt=duration / math.ceil(duration / dt), samples=samples)
    traj = evolve(pair.L, pot, sched, localized=pair, frame="interaction", static_spectrum=spec)

    t, PR = traj.times, traj.P_R

    def model(tt, A, W, c):
        return A * 0.5 * (1 - np.cos(W * tt)) + c

    try:
        popt, _ = optimize.curve_fit(model, t, PR, p0=[PR.max(), predicted, 0.0], maxfev=20000)
        fitted = abs(float(popt[1]))
    except RuntimeError:
        fitted = float("nan")
    contrast = float(PR.max())
    return RabiResult(t, traj.P_L, PR, contrast, fitted, predicted, resonance, contrast < 0.5, traj)


def rabi_csv(result: RabiResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "P_L", "P_R"])
        for t, pl, pr in zip(result.times, result.P_L, result.P_R):
            w.writerow([f"{t:.12e}", f"{pl:.12e}", f"{pr:.12e}"])
