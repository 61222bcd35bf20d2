"""Classical equilibria and stability of ion crystals.

Positions are in units of the Coulomb length ``ell`` and energies in
``m omega_z^2 ell^2``.  The potential is

    U = 1/2 sum_i (r_x^2 x_i^2 + r_y^2 y_i^2 + z_i^2) + sum_{i<j} 1 / |p_i - p_j|

with ``r_x = omega_x / omega_z`` and ``r_y = omega_y / omega_z``.  A crystal of
dimension ``D`` only carries the coordinates listed in ``AXES[D]``; the
remaining directions are frozen at zero (``r = inf``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import optimize

from .units import PhysicalContext

AXES = {1: ("z",), 2: ("x", "z"), 3: ("x", "y", "z")}

GRAD_TOL = 1e-10
STABILITY_TOL = 1e-9
LINEAR_TOL = 1e-6


class SingularityError(ValueError):
    """Two ions occupy the same point."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass
class CrystalConfig:
    positions: np.ndarray
    rx: float = math.inf
    ry: float = math.inf
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[1] not in AXES:
            raise ValueError("positions must have 1, 2 or 3 columns")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        for ax in self.axes:
            if ax != "z" and not math.isfinite(self.stiffness_of(ax)):
                raise ValueError(f"axis {ax} is active but its confinement ratio is infinite")

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def axes(self) -> tuple[str, ...]:
        return AXES[self.dim]

    def stiffness_of(self, axis: str) -> float:
        return {"x": self.rx**2, "y": self.ry**2, "z": 1.0}[axis]

    @property
    def stiffness(self) -> np.ndarray:
        return np.array([self.stiffness_of(a) for a in self.axes])

    def column(self, axis: str) -> np.ndarray:
        if axis in self.axes:
            return self.positions[:, self.axes.index(axis)]
        return np.zeros(self.N)

    def xyz(self) -> np.ndarray:
        return np.stack([self.column(a) for a in "xyz"], axis=1)

    def with_positions(self, positions) -> "CrystalConfig":
        return CrystalConfig(np.asarray(positions, dtype=float).reshape(self.positions.shape), self.rx, self.ry)

    def reflected(self, axis: str = "x") -> "CrystalConfig":
        p = self.positions.copy()
        p[:, self.axes.index(axis)] *= -1
        return self.with_positions(p)


@dataclass
class StabilityReport:
    lowest_eigenvalue: float
    eigenvector: np.ndarray
    label: str
    geometry: str
    stable: bool


def _pair_data(p: np.ndarray):
    d = p[:, None, :] - p[None, :, :]
    r = np.sqrt(np.einsum("ija,ija->ij", d, d))
    n = len(p)
    if n > 1:
        off = r[~np.eye(n, dtype=bool)]
        if off.min() <= 1e-12:
            raise SingularityError("coincident ions: pairwise distance below 1e-12")
    np.fill_diagonal(r, np.inf)
    return d, r


def potential_energy(config: CrystalConfig) -> float:
    p = config.positions
    _, r = _pair_data(p)
    trap = 0.5 * np.sum(config.stiffness * p**2)
    iu = np.triu_indices(config.N, 1)
    return float(trap + np.sum(1.0 / r[iu]))


def gradient(config: CrystalConfig) -> np.ndarray:
    p = config.positions
    d, r = _pair_data(p)
    return config.stiffness * p - np.einsum("ija,ij->ia", d, 1.0 / r**3)


def hessian(config: CrystalConfig) -> np.ndarray:
    """(N*D) x (N*D) Hessian, ion-major ordering."""
    p = config.positions
    n, dim = p.shape
    d, r = _pair_data(p)
    inv3 = 1.0 / r**3
    inv5 = 1.0 / r**5
    T = 3.0 * d[:, :, :, None] * d[:, :, None, :] * inv5[:, :, None, None]
    T -= np.eye(dim)[None, None] * inv3[:, :, None, None]
    H = -T
    diag = np.diag(config.stiffness)[None] + T.sum(axis=1)
    H[np.arange(n), np.arange(n)] = diag
    H = H.transpose(0, 2, 1, 3).reshape(n * dim, n * dim)
    return 0.5 * (H + H.T)


def linear_chain_positions(N: int) -> np.ndarray:
    """Sorted axial equilibrium positions of an N-ion string."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return find_equilibrium(N, dim=1).positions[:, 0]


def _default_seed(N: int, dim: int) -> np.ndarray:
    half = 0.0 if N == 1 else 0.5 * N ** 0.6 * 1.2
    z = np.linspace(-half, half, N)
    seed = np.zeros((N, dim))
    seed[:, -1] = z
    if dim >= 2:
        seed[:, 0] = 1e-3 * (-1.0) ** np.arange(N)
    if dim == 3:
        seed[:, 1] = 1e-3 * (-1.0) ** (np.arange(N) // 2)
    return seed


def find_equilibrium(
    N: int,
    rx: float = math.inf,
    ry: float = math.inf,
    dim: int = 1,
    seed=None,
    *,
    freeze_axial: bool = False,
    tol: float = GRAD_TOL,
    max_iter: int = 500,
) -> CrystalConfig:
    """Local minimum of the crystal potential by modified Newton iteration.

    The Hessian is made positive definite by flooring the magnitude of its
    eigenvalues, which also steps away from saddle points.  Steps are
    accepted by an Armijo backtracking line search, so the energy never
    increases beyond round-off.  ``seed`` may be a :class:`CrystalConfig` or
    an ``(N, dim)`` array; the default seeds zig-zag patterns of amplitude
    ``1e-3`` in the transverse directions.  With ``freeze_axial`` the axial
    coordinates of the seed are held fixed.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if dim not in AXES:
        raise ValueError("dim must be 1, 2 or 3")
    if seed is None:
        p0 = _default_seed(N, dim)
    else:
        p0 = np.array(seed.positions if isinstance(seed, CrystalConfig) else seed, dtype=float)
        if p0.shape != (N, dim):
            raise ValueError(f"seed has shape {p0.shape}, expected {(N, dim)}")
    cfg = CrystalConfig(p0, rx, ry)
    free = np.ones((N, dim), dtype=bool)
    if freeze_axial:
        free[:, -1] = False
    free = free.ravel()

    p = cfg.positions.ravel().copy()
    energy = potential_energy(cfg)
    history = [energy]
    g = gradient(cfg).ravel()
    for _ in range(max_iter):
        gf = g[free]
        if np.linalg.norm(gf) < tol:
            break
        H = hessian(cfg.with_positions(p))[np.ix_(free, free)]
        w, V = np.linalg.eigh(H)
        floor = 1e-8 * max(1.0, np.abs(w).max())
        w = np.maximum(np.abs(w), floor)
        step = np.zeros_like(p)
        step[free] = -V @ ((V.T @ gf) / w)
        accepted = False
        for direction in (step, _descent(g, free)):
            slope = float(g @ direction)
            alpha = 1.0
            while alpha > 1e-12:
                trial = p + alpha * direction
                try:
                    e_trial = potential_energy(cfg.with_positions(trial))
                except SingularityError:
                    alpha *= 0.5
                    continue
                if e_trial <= energy + 1e-4 * alpha * slope + 4e-16 * abs(energy):
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted:
            break
        p = trial
        energy = e_trial
        history.append(energy)
        g = gradient(cfg.with_positions(p)).ravel()
    residual = float(np.linalg.norm(g[free]))
    out = cfg.with_positions(p)
    out.history = history
    if residual >= tol:
        raise ConvergenceError(
            f"equilibrium search stopped with gradient norm {residual:.3e}", best=out, residual=residual
        )
    return out


def _descent(g, free):
    d = np.zeros_like(g)
    d[free] = -g[free]
    return d


def _rotation_generators(config: CrystalConfig) -> list[np.ndarray]:
    """Infinitesimal rotations about z, present only for an axially symmetric trap."""
    if config.dim != 3 or config.rx != config.ry:
        return []
    p = config.positions
    t = np.zeros_like(p)
    t[:, 0] = -p[:, 1]
    t[:, 1] = p[:, 0]
    if np.linalg.norm(t) < 1e-9:
        return []
    return [t.ravel() / np.linalg.norm(t)]


def lowest_mode(config: CrystalConfig, H: np.ndarray | None = None, *, exclude_rotations: bool = False):
    """Lowest Hessian eigenpair, optionally on the complement of rotational zero modes."""
    if H is None:
        H = hessian(config)
    gens = _rotation_generators(config) if exclude_rotations else []
    if gens:
        T = np.array(gens).T
        Q = np.linalg.svd(np.eye(H.shape[0]) - T @ T.T)[0][:, : H.shape[0] - T.shape[1]]
        w, V = np.linalg.eigh(Q.T @ H @ Q)
        return float(w[0]), Q @ V[:, 0]
    w, V = np.linalg.eigh(H)
    return float(w[0]), V[:, 0]


def _geometry(config: CrystalConfig) -> str:
    xyz = config.xyz()
    transverse = xyz[:, :2]
    if np.abs(transverse).max(initial=0.0) < LINEAR_TOL:
        return "linear"
    centred = xyz - xyz.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    rank = int(np.sum(sv > LINEAR_TOL * max(1.0, sv[0])))
    if rank >= 3:
        return "three-dimensional"
    # zig-zag: planar, plane contains the trap axis, transverse signs alternate along z
    direction = transverse[np.argmax(np.linalg.norm(transverse, axis=1))]
    direction = direction / np.linalg.norm(direction)
    along = transverse @ direction
    perp = transverse - np.outer(along, direction)
    if np.abs(perp).max() < LINEAR_TOL:
        order = np.argsort(xyz[:, 2])
        signs = np.sign(np.where(np.abs(along) < LINEAR_TOL, 0.0, along[order]))
        if np.all(signs != 0) and np.all(signs[1:] * signs[:-1] < 0):
            return "zigzag"
    return "planar"


def classify(config: CrystalConfig, H: np.ndarray | None = None) -> StabilityReport:
    """Geometry label and stability of an equilibrium.

    Saddle points (an eigenvalue below ``-1e-9``) are labelled ``"unstable"``;
    the geometric label is kept in ``geometry``.
    """
    value, vector = lowest_mode(config, H)
    geometry = _geometry(config)
    stable = value >= -STABILITY_TOL
    return StabilityReport(value, vector, geometry if stable else "unstable", geometry, stable)


def transverse_coulomb_matrix(z: np.ndarray) -> np.ndarray:
    """Coulomb part of the transverse Hessian of a string: K = r_x^2 I + C."""
    z = np.asarray(z, dtype=float)
    dz = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dz, np.inf)
    c = 1.0 / dz**3
    C = c.copy()
    np.fill_diagonal(C, -c.sum(axis=1))
    return C


def critical_frequency(N: int, *, xtol: float = 1e-13) -> float:
    """omega_c / omega_z for the linear to zig-zag transition of N ions.

    Bisection on ``r_x`` of the lowest transverse Hessian eigenvalue of the
    linear string.
    """
    if N < 2:
        raise ValueError("critical frequency is undefined for fewer than two ions")
    C = transverse_coulomb_matrix(linear_chain_positions(N))

    def lowest(r):
        return np.linalg.eigvalsh(C)[0] + r * r

    hi = math.sqrt(np.abs(C).sum(axis=1).max()) + 1.0
    if not (lowest(0.0) < 0 < lowest(hi)):
        raise ValueError("could not bracket the critical frequency")
    return float(optimize.bisect(lowest, 0.0, hi, xtol=xtol, maxiter=500))


def ring_positions(N: int, radius: float) -> np.ndarray:
    phi = 2 * math.pi * np.arange(N) / N
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(N)], axis=1)


def _planar_seeds_xz(N: int, r: float) -> list[np.ndarray]:
    z = linear_chain_positions(N)
    amp = 0.3
    zig = np.stack([amp * (-1.0) ** np.arange(N), 0.8 * z], axis=1)
    diamond = np.stack([np.zeros(N), 0.8 * z], axis=1)
    diamond[1:-1, 0] = amp * (-1.0) ** np.arange(N - 2)
    return [zig, diamond]


def planar_stability(N: int, r: float, plane: str, *, permutation=None) -> tuple[float, CrystalConfig]:
    """Lowest non-rotational Hessian eigenvalue of the lowest planar equilibrium.

    ``plane="xy"`` relaxes a ring perpendicular to the trap axis,
    ``plane="xz"`` the best planar crystal containing the axis; both are then
    probed in full 3D with ``r_x = r_y = r``.
    """
    perm = np.arange(N) if permutation is None else np.asarray(permutation)
    if plane == "xy":
        ring_sum = sum(1 / (2 * math.sin(math.pi * k / N)) ** 2 * math.sin(math.pi * k / N) for k in range(1, N))
        radius = (ring_sum / r**2) ** (1 / 3)
        seeds = [ring_positions(N, radius)]
    elif plane == "xz":
        seeds = []
        for s in _planar_seeds_xz(N, r):
            try:
                eq = find_equilibrium(N, r, math.inf, dim=2, seed=s)
            except ConvergenceError:
                continue
            seeds.append(np.stack([eq.positions[:, 0], np.zeros(N), eq.positions[:, 1]], axis=1))
        if not seeds:
            raise ConvergenceError("no planar equilibrium found")
    else:
        raise ValueError("plane must be 'xy' or 'xz'")
    best = None
    for s in seeds:
        eq = find_equilibrium(N, r, r, dim=3, seed=s[perm])
        e = potential_energy(eq)
        if best is None or e < best[0] - 1e-12:
            best = (e, eq)
    eq = best[1]
    value, _ = lowest_mode(eq, exclude_rotations=True)
    return value, eq


def threshold_scan_3d(
    N: int = 4,
    *,
    lower_bracket=(0.5, 1.0),
    upper_bracket=(1.0, 1.6),
    xtol: float = 1e-9,
    permutation=None,
) -> tuple[float, float]:
    """Radial confinement ratios bounding the three-dimensional phase.

    Below ``lower`` a crystal in the plane perpendicular to the axis is
    stable; above ``upper`` the planar crystal containing the axis is stable.
    Both are located by bisection on the sign of the planar crystal's
    lowest non-rotational Hessian eigenvalue.
    """

    def lower_f(r):
        return planar_stability(N, r, "xy", permutation=permutation)[0]

    def upper_f(r):
        return planar_stability(N, r, "xz", permutation=permutation)[0]

    lower = optimize.bisect(lower_f, *lower_bracket, xtol=xtol)
    upper = optimize.bisect(upper_f, *upper_bracket, xtol=xtol)
    return float(lower), float(upper)


def directional_taylor(config: CrystalConfig, direction, order: int = 4) -> np.ndarray:
    """Coefficients ``c_k`` of ``U(p + q v) = sum_k c_k q^k`` up to ``order``.

    Exact: the Coulomb terms use the Legendre generating function
    ``1/|d + q w| = sum_n (-q |w|)^n P_n(cos theta) / |d|^(n+1)``.
    """
    p = config.positions
    v = np.asarray(direction, dtype=float).reshape(p.shape)
    k = config.stiffness
    c = np.zeros(order + 1)
    c[0] += 0.5 * np.sum(k * p**2)
    if order >= 1:
        c[1] += np.sum(k * p * v)
    if order >= 2:
        c[2] += 0.5 * np.sum(k * v**2)
    for i in range(config.N):
        for j in range(i + 1, config.N):
            d = p[i] - p[j]
            w = v[i] - v[j]
            rd = np.linalg.norm(d)
            rw = np.linalg.norm(w)
            cos = 0.0 if rw == 0 else float(d @ w) / (rd * rw)
            for n in range(order + 1):
                if n > 0 and rw == 0:
                    break
                Pn = legendre.legval(cos, [0] * n + [1])
                c[n] += (-rw) ** n * Pn / rd ** (n + 1)
    return c


def to_csv(config: CrystalConfig, path, ctx: PhysicalContext | None = None) -> None:
    xyz = config.xyz()
    header = ["index", "x_ell", "y_ell", "z_ell"]
    if ctx is not None:
        header += ["x_m", "y_m", "z_m"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, row in enumerate(xyz):
            vals = [i] + [f"{v:.12e}" for v in row]
            if ctx is not None:
                vals += [f"{v * ctx.length_scale:.12e}" for v in row]
            w.writerow(vals)
