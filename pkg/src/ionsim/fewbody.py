"""Full quantum solver for the transverse motion of three ions.

The Hamiltonian is the fourth-order transverse expansion in oscillator
units of the axial trap (energies in ``hbar omega_z``, lengths in
``sqrt(hbar / (m omega_z))``).  In these units a quartic coefficient given
in Coulomb units is multiplied by the effective Planck constant
``epsilon = ctx.nonlinearity``.

A grid lives in an orthonormal frame ``y = R q`` of the normal-mode
coordinates ``q``.  The solver works in the normal-mode frame itself
(``R = 1``), where only the soft coordinate needs a wide box and the
Hamiltonian is nearly separable.  Site observables are evaluated after
resampling the state onto a frame whose first axis is the site coordinate,
so that the single-site Schmidt decomposition is a reshape of the
amplitude array.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import interpolate, optimize
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import LinearOperator, lobpcg

from . import crystal, doublewell
from .modes import NormalModes, TaylorCoefficients, chain_taylor, normal_modes, projected_quartic
from .units import PhysicalContext
from .wavefunction import Axis, RadialWavefunction, SpectralResult

RESIDUAL_TOL = 1e-6
DENSITY_CUTOFF = 1e-14  # relative density below which a region counts as empty
EXTENT_STDS = 6.0
STIFF_WIDTHS = 8.0
MAX_GRID_POINTS = 3_000_000
MAX_RESAMPLE_POINTS = 16_000_000
SPLINE_ORDER = 5


class GridError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


# one-dimensional soft mode ---------------------------------------------------


def soft_potential(coeffs: TaylorCoefficients, modes: NormalModes, ctx: PhysicalContext) -> doublewell.Potential1D:
    """Soft-mode potential in oscillator units (``hbar = m = 1``)."""
    lam = projected_quartic(coeffs, modes.soft_vector)
    return doublewell.Potential1D(a=float(modes.omega2[modes.soft_index]), b=4 * lam * ctx.nonlinearity, mass=1.0, hbar=1.0)


@dataclass
class Soft1D:
    """Two lowest soft-mode states with a smooth evaluator."""

    spectrum: SpectralResult
    splines: list
    extent: float
    kmax: float
    std: float

    def __call__(self, j: int, q):
        return self.splines[j](q)


def _sinc_upsample(values: np.ndarray, x: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Band-limited interpolation of grid values onto a grid ``factor`` times finer."""
    h = x[1] - x[0]
    fine = np.linspace(x[0], x[-1], (len(x) - 1) * factor + 1)
    out = np.empty_like(fine)
    for s in range(0, len(fine), 2048):
        chunk = fine[s : s + 2048]
        out[s : s + 2048] = np.sinc((chunk[:, None] - x[None, :]) / h) @ values
    return fine, out


def solve_soft_mode(pot: doublewell.Potential1D) -> Soft1D:
    res = doublewell.eigenstates_1d(pot, k=2)
    ax = res.states[0].axes[0]
    x = ax.values
    splines, dens = [], np.zeros_like(x)
    kmax = 0.0
    for st in res.states:
        psi = st.amplitudes.real
        fine, vals = _sinc_upsample(psi, x, 8)
        spl = interpolate.make_interp_spline(fine, vals, k=5)
        lo, hi = fine[0], fine[-1]
        splines.append(lambda q, spl=spl, lo=lo, hi=hi: np.where((q >= lo) & (q <= hi), spl(np.clip(q, lo, hi)), 0.0))
        p = np.abs(psi) ** 2
        dens = np.maximum(dens, p / p.max())
        spec = np.abs(np.fft.fft(psi)) ** 2
        k = 2 * np.pi * np.fft.fftfreq(len(x), d=ax.step)
        kmax = max(kmax, float(np.abs(k[spec > DENSITY_CUTOFF * spec.max()]).max()))
    extent = float(np.max(np.abs(x[dens > DENSITY_CUTOFF])))
    p0 = np.abs(res.states[0].amplitudes) ** 2
    std = float(np.sqrt(np.sum(p0 * x**2) * ax.step))
    return Soft1D(res, splines, extent, kmax, std)


# frames and grids ------------------------------------------------------------


@dataclass
class Frame:
    """Rows of ``R`` are the frame axes expressed in normal-mode coordinates."""

    R: np.ndarray
    axes: tuple[Axis, ...]
    site: int | None = None
    required_step: np.ndarray | None = None
    predicted_std: np.ndarray | None = None
    scales: tuple | None = None  # per-mode (extent, kmax, std) used to size the grid

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.points for a in self.axes)

    @property
    def steps(self) -> np.ndarray:
        return np.array([a.step for a in self.axes])

    @property
    def cell(self) -> float:
        return float(np.prod(self.steps))

    def mesh(self):
        return np.meshgrid(*[a.values for a in self.axes], indexing="ij", sparse=True)


def site_frame(modes: NormalModes, site: int | None) -> np.ndarray:
    """Orthonormal frame whose first axis is the site coordinate (identity for ``None``).

    The second axis carries the rest of the soft mode, so the third one is
    free of it.
    """
    n = modes.vectors.shape[0]
    if site is None:
        return np.eye(n)
    u = modes.vectors[site, :].copy()
    e0 = np.zeros(n)
    e0[modes.soft_index] = 1.0
    w = e0 - (u @ e0) * u
    if np.linalg.norm(w) < 1e-8:
        alt = np.roll(e0, 1)
        w = alt - (u @ alt) * u
    w /= np.linalg.norm(w)
    third = np.cross(u, w)
    return np.vstack([u, w, third / np.linalg.norm(third)])


def mode_scales(modes: NormalModes, soft: Soft1D | None):
    """Per-mode half-extent, momentum cutoff and standard deviation."""
    ext, kmax, std = [], [], []
    for n, w2 in enumerate(modes.omega2):
        if n == modes.soft_index and soft is not None:
            ext.append(max(soft.extent, 3 * soft.std))
            kmax.append(soft.kmax)
            std.append(soft.std)
        else:
            if w2 <= 0:
                raise ValueError("an unstable mode needs the quartic terms to be bounded")
            sigma = 1 / math.sqrt(2 * math.sqrt(w2))
            ext.append(STIFF_WIDTHS * sigma)
            kmax.append(5.0 / sigma)
            std.append(sigma)
    return np.array(ext), np.array(kmax), np.array(std)


def frame_for(R: np.ndarray, scales, points: int, site: int | None = None, limit: int = MAX_GRID_POINTS) -> Frame:
    """Size a grid for the frame ``R`` from per-mode extents and momentum cutoffs."""
    ext, kmax, std = scales
    axes, req, pstd = [], [], []
    for row in R:
        X = 1.05 * math.sqrt(float(np.sum(row**2 * ext**2)))
        k = math.sqrt(float(np.sum(row**2 * kmax**2)))
        sd = math.sqrt(float(np.sum(row**2 * std**2)))
        X = max(X, EXTENT_STDS / 2 * sd * 1.01)
        need = math.pi / k
        n = max(points, math.ceil(2 * X / need) + 1)
        n = sfft.next_fast_len(n, real=True)
        axes.append(Axis.symmetric(X, n))
        req.append(need)
        pstd.append(sd)
    frame = Frame(R, tuple(axes), site, np.array(req), np.array(pstd), scales)
    if np.prod(frame.shape) > limit:
        raise GridError(f"grid {frame.shape} exceeds {limit} points")
    return frame


def default_grid(
    coeffs: TaylorCoefficients,
    ctx: PhysicalContext,
    *,
    site: int | None = None,
    points: int = 64,
    modes: NormalModes | None = None,
    soft: Soft1D | None = None,
    quartic: bool = True,
) -> Frame:
    """At least ``points`` per axis, extent from the mode widths, spacing from the momentum cutoff.

    ``site=None`` gives the normal-mode frame used by the solver.
    """
    modes = normal_modes(coeffs) if modes is None else modes
    if soft is None and quartic:
        soft = solve_soft_mode(soft_potential(coeffs, modes, ctx))
    return frame_for(site_frame(modes, site), mode_scales(modes, soft if quartic else None), points, site)


def custom_frame(modes: NormalModes, site: int | None, half_extents, points) -> Frame:
    """Frame with explicit half-extents and point counts (no Nyquist or extent bookkeeping)."""
    R = site_frame(modes, site)
    if np.isscalar(points):
        points = [int(points)] * R.shape[0]
    return Frame(R, tuple(Axis.symmetric(X, n) for X, n in zip(half_extents, points)), site)


# Hamiltonian -----------------------------------------------------------------


class Hamiltonian3Ion:
    """Grid Hamiltonian in a frame of the normal-mode coordinates (oscillator units)."""

    def __init__(
        self,
        coeffs: TaylorCoefficients,
        ctx: PhysicalContext,
        frame: Frame,
        *,
        modes: NormalModes | None = None,
        quartic: bool = True,
    ):
        if coeffs.N != 3:
            raise ValueError("the full solver handles exactly three ions")
        self.coeffs = coeffs
        self.ctx = ctx
        self.modes = normal_modes(coeffs) if modes is None else modes
        self.frame = frame
        self.quartic = quartic
        if not quartic and np.any(self.modes.omega2 <= 0):
            raise ValueError("without the quartic terms every mode must be stable")
        self._check_grid()
        self.shape = frame.shape
        self.site_map = self.modes.vectors @ frame.R.T  # site coordinates from frame coordinates
        self.potential = np.broadcast_to(self.potential_at(frame.mesh()), self.shape).copy()
        ks = [2 * np.pi * np.fft.fftfreq(a.points, d=a.step) for a in frame.axes]
        ks[-1] = 2 * np.pi * np.fft.rfftfreq(frame.axes[-1].points, d=frame.axes[-1].step)
        kk = np.meshgrid(*ks, indexing="ij", sparse=True)
        self.kinetic = 0.5 * sum(k**2 for k in kk)
        self.kinetic_max = float(0.5 * sum((np.pi / a.step) ** 2 for a in frame.axes))
        self.matvecs = 0

    def potential_at(self, y) -> np.ndarray:
        """Potential at frame coordinates ``y`` (three broadcastable arrays)."""
        R = self.frame.R
        q = [sum(R[k, n] * y[k] for k in range(3)) for n in range(3)]
        V = sum(0.5 * self.modes.omega2[n] * q[n] ** 2 for n in range(3))
        if self.quartic:
            M = self.site_map
            shape = np.broadcast_shapes(*[np.shape(c) for c in y])
            x = np.stack([np.broadcast_to(sum(M[i, k] * y[k] for k in range(3)), shape) for i in range(3)])
            V = V + self.ctx.nonlinearity * self.coeffs.quartic_energy(x)
        return V

    def _check_grid(self):
        f = self.frame
        if f.required_step is not None:
            bad = f.steps > f.required_step * (1 + 1e-9)
            if np.any(bad):
                raise GridError(
                    f"grid spacing {f.steps[bad]} exceeds the Nyquist bound {f.required_step[bad]} of the predicted state"
                )
        if f.predicted_std is not None:
            widths = np.array([a.stop - a.start for a in f.axes])
            if np.any(widths < EXTENT_STDS * f.predicted_std):
                raise GridError("grid extent is below six predicted standard deviations")

    @property
    def cell(self) -> float:
        return self.frame.cell

    def apply(self, u: np.ndarray) -> np.ndarray:
        self.matvecs += 1
        u = u.reshape(self.shape)
        kin = sfft.irfftn(self.kinetic * sfft.rfftn(u), s=self.shape)
        return kin + self.potential * u

    @staticmethod
    def reflect(u: np.ndarray) -> np.ndarray:
        return u[::-1, ::-1, ::-1]

    def energy(self, u: np.ndarray) -> float:
        u = u.reshape(self.shape)
        return float(np.vdot(u, self.apply(u)).real / np.vdot(u, u).real)

    def residual(self, u: np.ndarray, E: float) -> float:
        """L2 residual of the normalised state, in hbar omega_z."""
        u = u.reshape(self.shape)
        u = u / math.sqrt(np.vdot(u, u).real * self.cell)
        r = self.apply(u) - E * u
        return float(math.sqrt(np.vdot(r, r).real * self.cell))

    def wavefunction(self, u: np.ndarray) -> RadialWavefunction:
        u = u.reshape(self.shape)
        return RadialWavefunction(self.frame.axes, u / math.sqrt(np.vdot(u, u).real * self.cell), "oscillator")


def build_hamiltonian_3ion(
    coeffs: TaylorCoefficients,
    ctx: PhysicalContext,
    grid: Frame | None = None,
    *,
    points: int = 64,
    quartic: bool = True,
) -> Hamiltonian3Ion:
    modes = normal_modes(coeffs)
    if grid is None:
        grid = default_grid(coeffs, ctx, points=points, modes=modes, quartic=quartic)
    return Hamiltonian3Ion(coeffs, ctx, grid, modes=modes, quartic=quartic)


# product (decoupled) states ------------------------------------------------------


def product_state(frame: Frame, modes: NormalModes, soft: Soft1D | None, soft_level: int = 0) -> np.ndarray:
    """Soft-mode state times harmonic ground states, sampled on a frame grid."""
    grids = frame.mesh()
    out = np.ones(frame.shape)
    for n, w2 in enumerate(modes.omega2):
        q = np.broadcast_to(sum(frame.R[k, n] * grids[k] for k in range(3)), frame.shape)
        if n == modes.soft_index and soft is not None:
            out = out * soft(soft_level, q)
        else:
            g = np.exp(-0.5 * math.sqrt(w2) * q**2)
            if n == modes.soft_index and soft_level == 1:
                g = g * q
            out = out * g
    return out


# solvers -------------------------------------------------------------------------


class SeparablePreconditioner:
    """Inverse of the Kronecker sum of one-dimensional cuts through the potential.

    In the normal-mode frame the cuts are the mode Hamiltonians (harmonic
    plus projected quartic), so the inverse is close to the exact resolvent
    and LOBPCG needs only a few dozen iterations.
    """

    def __init__(self, H: Hamiltonian3Ion):
        self.H = H
        self.U, self.E = [], []
        for k, ax in enumerate(H.frame.axes):
            y = [ax.values if j == k else np.zeros(1) for j in range(3)]
            v = np.asarray(H.potential_at(y)).ravel()
            n = ax.points
            kk = 2 * np.pi * np.fft.fftfreq(n, d=ax.step)
            F = np.fft.fft(np.eye(n), axis=0)
            T = (np.conj(F.T) @ (0.5 * kk[:, None] ** 2 * F)).real / n
            w, U = np.linalg.eigh(0.5 * (T + T.T) + np.diag(v))
            self.U.append(U)
            self.E.append(w)
        D = self.E[0][:, None, None] + self.E[1][None, :, None] + self.E[2][None, None, :]
        low = np.sort(D.ravel())[:2]
        self.sigma = float(low[0] - max(0.05, 0.5 * (low[1] - low[0])))
        self.inv = 1.0 / (D - self.sigma)

    def _rotate(self, u, transpose: bool):
        for k in range(3):
            U = self.U[k].T if transpose else self.U[k]
            u = np.moveaxis(np.tensordot(U, u, axes=([1], [k])), 0, k)
        return u

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim == 2:
            return np.column_stack([self(v[:, i]) for i in range(v.shape[1])])
        u = self._rotate(v.reshape(self.H.shape), True)
        return self._rotate(u * self.inv, False).ravel()


def _lobpcg_sector(H: Hamiltonian3Ion, parity: int, guess: np.ndarray, tol: float, maxiter: int, pre=None):
    n = int(np.prod(H.shape))

    def mv(v):
        v = np.asarray(v)
        if v.ndim == 2:
            return np.column_stack([mv(v[:, i]) for i in range(v.shape[1])])
        u = v.reshape(H.shape)
        u = 0.5 * (u + parity * H.reflect(u))
        return H.apply(u).ravel()

    pre = SeparablePreconditioner(H) if pre is None else pre
    A = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=float)
    M = LinearOperator((n, n), matvec=pre, matmat=pre, dtype=float)
    X = (guess.ravel() / np.linalg.norm(guess))[:, None]
    w, V, hist = lobpcg(A, X, M=M, tol=tol, maxiter=maxiter, largest=False, retResidualNormsHistory=True)
    u = V[:, 0].reshape(H.shape)
    u = 0.5 * (u + parity * H.reflect(u))
    return float(w[0]), u, [float(np.max(h)) for h in hist], pre


def _guess(H: Hamiltonian3Ion, soft: Soft1D | None, parity: int) -> np.ndarray:
    g = product_state(H.frame, H.modes, soft, 0 if parity > 0 else 1)
    return 0.5 * (g + parity * H.reflect(g))


def ground_state(
    H: Hamiltonian3Ion,
    method: str = "iterative-eigensolver",
    *,
    soft: Soft1D | None = None,
    tol: float = 1e-8,
    with_gap: bool = True,
    imaginary_step: float | None = None,
    max_steps: int = 200_000,
    maxiter: int = 400,
) -> SpectralResult:
    """Lowest even state, plus the lowest odd state when ``with_gap``.

    ``energies`` holds ``E0`` (and ``E1``) in units of ``hbar omega_z``.
    Every single-quantum excitation is odd under the global inversion and
    the softest of them is the soft-mode quantum (or, past the transition,
    the tunnelling partner), so the lowest odd state is the first excited
    state.  The starting vectors are the decoupled product states.
    """
    if soft is None and H.quartic:
        soft = solve_soft_mode(soft_potential(H.coeffs, H.modes, H.ctx))
    soft = soft if H.quartic else None
    meta = {"grid": [(a.start, a.stop, a.points) for a in H.frame.axes], "frame": H.frame.R.tolist(), "method": method}
    if method == "imaginary-time":
        E0, u0, hist = _imaginary_time(H, _guess(H, soft, +1), imaginary_step, max_steps, tol)
        meta["energy_history"] = hist
        energies, states = [E0], [u0]
        if with_gap:
            E1, u1, _ = _imaginary_time(H, _guess(H, soft, -1), imaginary_step, max_steps, tol, parity=-1)
            energies.append(E1)
            states.append(u1)
    elif method == "iterative-eigensolver":
        E0, u0, h0, pre = _lobpcg_sector(H, +1, _guess(H, soft, +1), tol, maxiter)
        energies, states, hists = [E0], [u0], [h0]
        if with_gap:
            E1, u1, h1, _ = _lobpcg_sector(H, -1, _guess(H, soft, -1), tol, maxiter, pre)
            energies.append(E1)
            states.append(u1)
            hists.append(h1)
        meta["residual_history"] = hists
    else:
        raise ValueError("method must be 'imaginary-time' or 'iterative-eigensolver'")
    res = np.array([H.residual(s, E) for s, E in zip(states, energies)])
    meta["matvecs"] = H.matvecs
    if np.any(res > RESIDUAL_TOL):
        raise ConvergenceError(f"eigen-residuals {res} exceed {RESIDUAL_TOL}", meta.get("residual_history"))
    return SpectralResult(np.array(energies), [H.wavefunction(s) for s in states], "hbar*omega_z", res, meta)


def _imaginary_time(H: Hamiltonian3Ion, u: np.ndarray, dtau, max_steps: int, tol: float, parity: int = 1):
    """Split-operator imaginary-time relaxation within one parity sector.

    The state is checked once per unit of imaginary time.  The Trotter
    splitting leaves a residual of order ``dtau**2``, so the step is quartered
    once the residual plateaus between checks.  A block that would raise
    the energy is rejected and retried with a quarter of the step, which keeps
    the recorded energies monotone.
    """
    if dtau is None:
        dtau = min(0.05, 4.0 / H.kinetic_max)
    u = u / math.sqrt(np.vdot(u, u).real)
    E_prev = H.energy(u)
    hist = [E_prev]
    r_prev = np.inf
    step = 0
    while step < max_steps:
        expT = np.exp(-H.kinetic * dtau)
        expV = np.exp(-0.5 * H.potential * dtau)
        n = max(10, round(1.0 / dtau))
        v = u
        for _ in range(n):
            v = expV * sfft.irfftn(expT * sfft.rfftn(expV * v), s=H.shape)
            v = 0.5 * (v + parity * H.reflect(v))
            v /= math.sqrt(np.vdot(v, v).real)
        step += n
        E = H.energy(v)
        if E > E_prev + 1e-14 * abs(E_prev):
            dtau /= 4
            continue
        u = v
        hist.append(E)
        r = H.residual(u, E)
        if r < RESIDUAL_TOL and abs(E_prev - E) < tol * max(1.0, abs(E)):
            return E, u, hist
        if r > 0.99 * r_prev:
            dtau /= 4
        E_prev, r_prev = E, r
    raise ConvergenceError("imaginary-time propagation did not converge", hist)


# observables -------------------------------------------------------------------


def _site_target(H: Hamiltonian3Ion, site: int, points: int) -> Frame:
    scales = H.frame.scales
    if scales is None:
        ext = np.full(3, max(max(abs(a.start), a.stop) for a in H.frame.axes))
        kmax = np.full(3, float(np.max(np.pi / H.frame.steps)))
        scales = (ext, kmax, ext / 8)
    return frame_for(site_frame(H.modes, site), scales, points, site, MAX_RESAMPLE_POINTS)


def resample(H: Hamiltonian3Ion, wf: RadialWavefunction, target: Frame) -> np.ndarray:
    """State on another frame grid by quintic spline interpolation, renormalised."""
    src = H.frame
    T = src.R @ target.R.T  # source coordinates of the target axes
    g = target.mesh()
    coords = []
    for k, ax in enumerate(src.axes):
        yk = sum(T[k, j] * g[j] for j in range(3))
        coords.append(np.broadcast_to((yk - ax.start) / ax.step, target.shape))
    psi = map_coordinates(wf.amplitudes.real, coords, order=SPLINE_ORDER, mode="constant", cval=0.0)
    return psi / math.sqrt(np.sum(psi**2) * target.cell)


def site_amplitudes(H: Hamiltonian3Ion, wf: RadialWavefunction, site: int, points: int = 32) -> tuple[np.ndarray, Frame]:
    """Amplitudes with the site coordinate on axis 0."""
    if abs(H.frame.R[0] @ H.modes.vectors[site, :] - 1) < 1e-12:
        return wf.amplitudes.real, H.frame
    target = _site_target(H, site, points)
    return resample(H, wf, target), target


def schmidt_entropy(psi: np.ndarray) -> float:
    """Entanglement entropy (bits) between axis 0 and the remaining axes."""
    A = psi.reshape(psi.shape[0], -1)
    p = np.linalg.eigvalsh(A @ A.T)
    p = p[p > 1e-300] / p.sum()
    return float(-np.sum(p * np.log2(p)))


def reduced_entropy_site(H: Hamiltonian3Ion, wf: RadialWavefunction, site: int) -> float:
    wf.check_normalized(1e-6)
    psi, _ = site_amplitudes(H, wf, site)
    return schmidt_entropy(psi)


@dataclass
class PositionStats:
    mean: float  # oscillator lengths
    second_moment: float
    x: np.ndarray
    density: np.ndarray  # per oscillator length, integrates to 1

    def in_si(self, ctx: PhysicalContext) -> "PositionStats":
        L = ctx.oscillator_length
        return PositionStats(self.mean * L, self.second_moment * L**2, self.x * L, self.density / L)


def position_statistics(H: Hamiltonian3Ion, wf: RadialWavefunction, site: int) -> PositionStats:
    """Moments by quadrature on the solver grid; marginal from the site-frame resampling."""
    g = H.frame.mesh()
    x = sum(H.site_map[site, k] * g[k] for k in range(3))
    p = np.abs(wf.amplitudes) ** 2 * wf.cell
    mean = float(np.sum(p * x))
    second = float(np.sum(p * x**2))
    psi, target = site_amplitudes(H, wf, site)
    ax = target.axes[0]
    dens = np.sum(psi.reshape(psi.shape[0], -1) ** 2, axis=1)
    dens = dens / (np.sum(dens) * ax.step)
    return PositionStats(mean, second, ax.values, dens)


def mode_second_moments(H: Hamiltonian3Ion, wf: RadialWavefunction) -> np.ndarray:
    """<q_n^2> for each normal mode."""
    g = H.frame.mesh()
    p = np.abs(wf.amplitudes) ** 2 * wf.cell
    return np.array([float(np.sum(p * sum(H.frame.R[k, n] * g[k] for k in range(3)) ** 2)) for n in range(3)])


def gaussian_variational_energy(coeffs: TaylorCoefficients, ctx: PhysicalContext) -> float:
    """Best centred product-Gaussian energy in the normal modes (an upper bound on E0)."""
    modes = normal_modes(coeffs)
    B = modes.vectors
    eps = ctx.nonlinearity

    def energy(logs):
        s = np.exp(logs)  # <q_n^2>
        e = float(np.sum(1 / (8 * s) + 0.5 * modes.omega2 * s))
        cov = (B * s) @ B.T
        for i in range(3):
            for j in range(i + 1, 3):
                var = cov[i, i] + cov[j, j] - 2 * cov[i, j]
                e += eps * coeffs.pair[i, j] * 3 * var**2
        return e

    lam = projected_quartic(coeffs, modes.soft_vector) * eps
    start = [
        math.log(1 / (2 * math.sqrt(w2))) if w2 > (4 * lam) ** (2 / 3) else math.log(max(-w2, 0.0) / (4 * lam) + (4 * lam) ** (-1 / 3))
        for w2 in modes.omega2
    ]
    best = optimize.minimize(energy, np.array(start), method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 40000})
    return float(best.fun)


# decoupled soft-mode model -------------------------------------------------------


@dataclass
class DecoupledModel:
    """Soft mode solved in its own quartic potential, other modes harmonic."""

    modes: NormalModes
    soft: Soft1D
    mode_variances: np.ndarray  # <q_n^2>, oscillator units
    weights: np.ndarray  # weights[i, n] = (b_n^i)^2

    def site_variance(self, site: int) -> float:
        return float(self.weights[site] @ self.mode_variances)

    def marginal(self, site: int, x: np.ndarray) -> np.ndarray:
        """Site density: scaled soft density convolved with the harmonic remainder."""
        n0 = self.modes.soft_index
        c = self.modes.vectors[site, n0]
        rest = float(sum(self.weights[site, n] * self.mode_variances[n] for n in range(len(self.mode_variances)) if n != n0))
        ax = self.soft.spectrum.states[0].axes[0]
        p = np.abs(self.soft.spectrum.states[0].amplitudes) ** 2 * ax.step
        d = np.asarray(x)[:, None] - c * ax.values[None, :]
        return (np.exp(-0.5 * d**2 / rest) / math.sqrt(2 * math.pi * rest)) @ p

    def state_on(self, frame: Frame) -> np.ndarray:
        psi = product_state(frame, self.modes, self.soft, 0)
        return psi / math.sqrt(np.sum(psi**2) * frame.cell)

    def entropy(self, site: int, frame: Frame) -> float:
        """Site entropy of the product state on a frame whose first axis is the site."""
        return schmidt_entropy(self.state_on(frame))


def decoupled_mode_model(coeffs: TaylorCoefficients, modes: NormalModes, ctx: PhysicalContext, soft: Soft1D | None = None) -> DecoupledModel:
    if coeffs.N != 3:
        raise ValueError("the decoupled model is defined here for three ions")
    soft = solve_soft_mode(soft_potential(coeffs, modes, ctx)) if soft is None else soft
    var = []
    for n, w2 in enumerate(modes.omega2):
        if n == modes.soft_index:
            ax = soft.spectrum.states[0].axes[0]
            p = np.abs(soft.spectrum.states[0].amplitudes) ** 2
            var.append(float(np.sum(p * ax.values**2) * ax.step))
        else:
            var.append(1 / (2 * math.sqrt(w2)))
    return DecoupledModel(modes, soft, np.array(var), modes.vectors**2)


# scans -------------------------------------------------------------------------


@dataclass
class ScanRecord:
    rx: float
    S_bits: float
    x2: float  # <x_site^2>, oscillator units
    sqrt_x2_m: float
    gap: float  # hbar omega_z
    gap_rad_s: float
    gap_Hz: float
    energy: float
    S_decoupled: float
    sqrt_x2_decoupled_m: float
    S_gaussian: float | None
    grid: tuple
    residuals: list = field(default_factory=list)


@dataclass
class PointSolution:
    coeffs: TaylorCoefficients
    modes: NormalModes
    soft: Soft1D
    H: Hamiltonian3Ion
    spectrum: SpectralResult


def solve_point(rx: float, ctx: PhysicalContext, points: int = 64) -> PointSolution:
    """Even ground state and lowest odd state at one transverse ratio."""
    coeffs = chain_taylor(3, rx)
    modes = normal_modes(coeffs)
    soft = solve_soft_mode(soft_potential(coeffs, modes, ctx))
    frame = default_grid(coeffs, ctx, points=points, modes=modes, soft=soft)
    H = Hamiltonian3Ion(coeffs, ctx, frame, modes=modes)
    return PointSolution(coeffs, modes, soft, H, ground_state(H, soft=soft))


def scan_point(rx: float, ctx: PhysicalContext, site: int = 0, points: int = 64) -> ScanRecord:
    sol = solve_point(rx, ctx, points)
    coeffs, modes, soft, H, res = sol.coeffs, sol.modes, sol.soft, sol.H, sol.spectrum
    frame = H.frame
    wf = res.states[0]
    psi, target = site_amplitudes(H, wf, site)
    S = schmidt_entropy(psi)
    g = frame.mesh()
    x = sum(H.site_map[site, k] * g[k] for k in range(3))
    x2 = float(np.sum(np.abs(wf.amplitudes) ** 2 * x**2) * wf.cell)
    dec = decoupled_mode_model(coeffs, modes, ctx, soft)
    Sg = None
    if np.all(modes.omega2 > 0):
        from .gaussian import ground_state_covariance, single_site_entropy

        Sg = single_site_entropy(ground_state_covariance(modes), site)
    L = ctx.oscillator_length
    gap = float(res.energies[1] - res.energies[0])
    return ScanRecord(
        rx=rx,
        S_bits=S,
        x2=x2,
        sqrt_x2_m=math.sqrt(x2) * L,
        gap=gap,
        gap_rad_s=gap * ctx.omega_z,
        gap_Hz=gap * ctx.omega_z / (2 * math.pi),
        energy=float(res.energies[0]),
        S_decoupled=dec.entropy(site, target),
        sqrt_x2_decoupled_m=math.sqrt(dec.site_variance(site)) * L,
        S_gaussian=Sg,
        grid=frame.shape,
        residuals=[float(r) for r in res.residuals],
    )


def _scan_job(args):
    return scan_point(*args)


def entropy_scan(rx_values, ctx: PhysicalContext, *, site: int = 0, points: int = 64, jobs: int = 1) -> list[ScanRecord]:
    rx_values = [float(r) for r in rx_values]
    if any(b < a for a, b in zip(rx_values, rx_values[1:])):
        raise ValueError("r_x values must be sorted ascending")
    args = [(rx, ctx, site, points) for rx in rx_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_scan_job, args))
    return [scan_point(*a) for a in args]


SCAN_COLUMNS = [
    "r_x_over_omega_z",
    "S_bits",
    "sqrt_x2_m",
    "gap_Hz",
    "gap_rad_per_s",
    "E0_hbar_omega_z",
    "S_decoupled_bits",
    "sqrt_x2_decoupled_m",
    "S_gaussian_bits",
]


def scan_row(r: ScanRecord) -> list[str]:
    return [
        f"{r.rx:.10f}",
        f"{r.S_bits:.10e}",
        f"{r.sqrt_x2_m:.10e}",
        f"{r.gap_Hz:.10e}",
        f"{r.gap_rad_s:.10e}",
        f"{r.energy:.12e}",
        f"{r.S_decoupled:.10e}",
        f"{r.sqrt_x2_decoupled_m:.10e}",
        "" if r.S_gaussian is None else f"{r.S_gaussian:.10e}",
    ]


def scan_csv(records: list[ScanRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_COLUMNS)
        for r in records:
            w.writerow(scan_row(r))


def marginal_csv(stats: PositionStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_m", "density_per_m"])
        for x, d in zip(stats.x, stats.density):
            w.writerow([f"{x:.10e}", f"{d:.10e}"])


# deep zig-zag through the transition to the linear regime, denser near r_c
DEFAULT_SCAN_RX = (
    1.49, 1.50, 1.51, 1.52, 1.53, 1.54, 1.545, 1.547, 1.548, 1.5485, 1.549, 1.54919, 1.5495,
    1.55, 1.552, 1.555, 1.56, 1.57, 1.58, 1.6, 1.65, 1.7, 1.8, 1.9, 2.0,
)


def critical_rx() -> float:
    return crystal.critical_frequency(3)
