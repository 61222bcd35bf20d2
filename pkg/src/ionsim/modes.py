"""Transverse Taylor expansion, normal modes and the soft-mode Landau potential.

Around a linear string with axial positions ``z_i`` the transverse potential
is expanded to fourth order,

    V = 1/2 sum_ij gamma_ij x_i x_j + sum_i b_i x_i^4
        + sum_{i != j} alpha_ij x_i^2 x_j^2 + sum_{i != j} kappa_ij x_i^3 x_j,

with both double sums over ordered pairs.  Every coefficient follows from
the pair term ``C_ij (x_i - x_j)^4`` with ``C_ij = 3 / (8 |z_i - z_j|^5)``:
``b_i = sum_j C_ij``, ``alpha_ij = 3 C_ij`` and ``kappa_ij = -4 C_ij``.
Coefficients are stored dimensionless: ``gamma`` in ``omega_z^2`` and the
quartic ones in ``m omega_z^2 ell^2 / ell^4``.

The Landau potential of the soft mode is ``V(q) = a q^2 / 2 + b q^4 / 4``
(SI: ``a`` in J/m^2, ``b`` in J/m^4).  Formulas quoted with a bare quartic
coefficient (``V = lambda q^4``) use ``quartic_coefficient = b / 4``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import crystal
from .units import FREQ_CONVENTIONS, SPECIES, PhysicalContext, make_context


@dataclass
class TaylorCoefficients:
    z: np.ndarray
    rx: float
    gamma: np.ndarray
    onsite: np.ndarray
    cross: np.ndarray
    cubic: np.ndarray
    pair: np.ndarray

    @property
    def N(self) -> int:
        return len(self.z)

    def to_si(self, ctx: PhysicalContext) -> dict:
        """gamma in rad^2/s^2, quartic coefficients in J/m^4."""
        q = ctx.quartic_to_si(1.0)
        return {
            "gamma": self.gamma * ctx.omega_z**2,
            "onsite": self.onsite * q,
            "cross": self.cross * q,
            "cubic": self.cubic * q,
        }

    def quartic_energy(self, x) -> np.ndarray:
        """Quartic part of the potential; ``x`` has the site index first."""
        x = np.asarray(x)
        x2 = x * x
        out = np.zeros(x.shape[1:])
        for i in range(self.N):
            out = out + self.onsite[i] * x2[i] * x2[i]
            for j in range(self.N):
                if i == j:
                    continue
                out = out + self.cross[i, j] * x2[i] * x2[j] + self.cubic[i, j] * x2[i] * x[i] * x[j]
        return out

    def potential(self, x) -> np.ndarray:
        x = np.asarray(x)
        quad = 0.5 * np.einsum("i...,ij,j...->...", x, self.gamma, x)
        return quad + self.quartic_energy(x)


def taylor_expand(equilibrium, rx: float | None = None) -> TaylorCoefficients:
    """Fourth-order transverse expansion about a linear string.

    ``equilibrium`` is a :class:`~ionsim.crystal.CrystalConfig` (which must
    be linear) or an array of axial positions.
    """
    if isinstance(equilibrium, crystal.CrystalConfig):
        xyz = equilibrium.xyz()
        if np.abs(xyz[:, :2]).max(initial=0.0) > crystal.LINEAR_TOL:
            raise ValueError("expansion point must be a linear string (all transverse displacements zero)")
        z = xyz[:, 2]
        if rx is None:
            rx = equilibrium.rx
    else:
        z = np.asarray(equilibrium, dtype=float)
    if rx is None or not math.isfinite(rx):
        raise ValueError("a finite r_x is required")
    n = len(z)
    dz = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dz, np.inf)
    pair = 3.0 / (8.0 * dz**5)
    gamma = crystal.transverse_coulomb_matrix(z) + rx**2 * np.eye(n)
    return TaylorCoefficients(
        z=z,
        rx=float(rx),
        gamma=gamma,
        onsite=pair.sum(axis=1),
        cross=3.0 * pair,
        cubic=-4.0 * pair,
        pair=pair,
    )


def chain_taylor(N: int, rx: float) -> TaylorCoefficients:
    return taylor_expand(crystal.linear_chain_positions(N), rx)


@dataclass
class NormalModes:
    """``omega2[n]`` in omega_z^2 (ascending); ``vectors[i, n]`` is b_n^i."""

    omega2: np.ndarray
    vectors: np.ndarray
    soft_index: int = 0

    @property
    def imaginary(self) -> np.ndarray:
        return self.omega2 < 0

    @property
    def frequencies(self) -> np.ndarray:
        """|omega_n| / omega_z; check :attr:`imaginary` for unstable modes."""
        return np.sqrt(np.abs(self.omega2))

    @property
    def soft_vector(self) -> np.ndarray:
        return self.vectors[:, self.soft_index]

    def to_csv(self, path) -> None:
        n = len(self.omega2)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "omega2_over_omegaz2", "omega_over_omegaz", "imaginary"] + [f"b_site{i}" for i in range(n)])
            for k in range(n):
                w.writerow(
                    [k, f"{self.omega2[k]:.12e}", f"{self.frequencies[k]:.12e}", int(self.imaginary[k])]
                    + [f"{v:.12e}" for v in self.vectors[:, k]]
                )


def normal_modes(coeffs: TaylorCoefficients) -> NormalModes:
    """Eigen-decomposition of gamma; each vector's first non-zero entry is positive."""
    g = coeffs.gamma
    if not np.allclose(g, g.T, rtol=0, atol=1e-12):
        raise ValueError("gamma is not symmetric")
    w, V = np.linalg.eigh(0.5 * (g + g.T))
    for k in range(V.shape[1]):
        lead = V[np.argmax(np.abs(V[:, k]) > 1e-9), k]
        if lead < 0:
            V[:, k] *= -1
    return NormalModes(omega2=w, vectors=V, soft_index=0)


def projected_quartic(coeffs: TaylorCoefficients, vector) -> float:
    """Coefficient of q^4 after substituting x_i = v_i q (dimensionless)."""
    v = np.asarray(vector, dtype=float)
    total = float(np.sum(coeffs.onsite * v**4))
    off = ~np.eye(coeffs.N, dtype=bool)
    v2 = v**2
    total += float(np.sum((coeffs.cross * np.outer(v2, v2))[off]))
    total += float(np.sum((coeffs.cubic * np.outer(v2 * v, v))[off]))
    return total


@dataclass(frozen=True)
class LandauPotential:
    """``V(q) = a q^2/2 + b q^4/4 + cubic q^3`` for the soft-mode coordinate (SI)."""

    a: float
    b: float
    mass: float
    hbar: float
    cubic: float = 0.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("quartic coefficient b must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    @property
    def quartic_coefficient(self) -> float:
        return self.b / 4

    def _require_double_well(self):
        if self.a >= 0:
            raise ValueError("double-well quantities need a < 0")

    @property
    def minima_position(self) -> float:
        self._require_double_well()
        return math.sqrt(-self.a / self.b)

    @property
    def minima_separation(self) -> float:
        return 2 * self.minima_position

    @property
    def gaussian_width(self) -> float:
        """(hbar / (2 sqrt(-m a)))^(1/2)."""
        self._require_double_well()
        return math.sqrt(self.hbar / (2 * math.sqrt(-self.mass * self.a)))

    @property
    def depth(self) -> float:
        self._require_double_well()
        return self.a**2 / (4 * self.b)

    @property
    def one_level_flag(self) -> bool:
        return one_level_criterion(self)[0]


def landau_coefficients(coeffs: TaylorCoefficients, modes: NormalModes) -> tuple[float, float]:
    """Dimensionless ``(a, b)``: a in m omega_z^2, b in m omega_z^2 / ell^2."""
    b = 4.0 * projected_quartic(coeffs, modes.soft_vector)
    return float(modes.omega2[modes.soft_index]), b


def landau_reduce(coeffs: TaylorCoefficients, modes: NormalModes, ctx: PhysicalContext) -> LandauPotential:
    a, b = landau_coefficients(coeffs, modes)
    if b <= 0:
        raise ValueError("projected quartic coefficient is not positive; a sextic term would be required")
    return LandauPotential(
        a=a * ctx.mass * ctx.omega_z**2,
        b=ctx.quartic_to_si(b),
        mass=ctx.mass,
        hbar=ctx.hbar,
    )


def one_level_threshold(b: float, mass: float, hbar: float) -> float:
    """|a| at which each well holds about one level: 2^(5/3) (hbar^2 b^2 / m)^(1/3)."""
    return 2 ** (5 / 3) * (hbar**2 * b**2 / mass) ** (1 / 3)


def one_level_criterion(lp: LandauPotential) -> tuple[bool, float]:
    """(flag, margin) with margin = |a| / threshold."""
    if lp.a >= 0:
        raise ValueError("one-level criterion needs a double well (a < 0)")
    margin = abs(lp.a) / one_level_threshold(lp.b, lp.mass, lp.hbar)
    return margin >= 1.0, margin


@dataclass(frozen=True)
class OptimalPoint:
    rx: float
    rc: float
    potential: LandauPotential
    soft_frequency: float  # sqrt(omega_c^2 - omega_x^2), rad/s
    detuning: float  # omega_c - omega_x, rad/s


def optimal_point(N: int, ctx: PhysicalContext) -> OptimalPoint:
    """Zig-zag double well whose one-level margin is exactly 1."""
    rc = crystal.critical_frequency(N)
    coeffs = chain_taylor(N, rc)
    modes = normal_modes(coeffs)
    _, b_dimless = landau_coefficients(coeffs, modes)
    b = ctx.quartic_to_si(b_dimless)
    a = -one_level_threshold(b, ctx.mass, ctx.hbar)
    w2 = -a / (ctx.mass * ctx.omega_z**2)
    rx = math.sqrt(rc**2 - w2)
    lp = LandauPotential(a=a, b=b, mass=ctx.mass, hbar=ctx.hbar)
    return OptimalPoint(rx, rc, lp, math.sqrt(w2) * ctx.omega_z, (rc - rx) * ctx.omega_z)


def landau_from_equilibrium(config: crystal.CrystalConfig) -> tuple[float, float, float, np.ndarray]:
    """Dimensionless ``(a, b, cubic, direction)`` along the softest Hessian mode of any equilibrium.

    No relaxation of the other modes is included.
    """
    value, vec = crystal.lowest_mode(config, exclude_rotations=True)
    c = crystal.directional_taylor(config, vec, order=4)
    return value, 4.0 * c[4], c[3], vec


def fit_context(b_target: float = 3e-4, N: int = 3, omega_z: float = 1e6) -> list[dict]:
    """Rank species and frequency conventions by how well the soft-mode q^4 coefficient matches."""
    rc = crystal.critical_frequency(N)
    coeffs = chain_taylor(N, rc)
    modes = normal_modes(coeffs)
    lam = projected_quartic(coeffs, modes.soft_vector)
    rows = []
    for species in SPECIES:
        for conv in FREQ_CONVENTIONS:
            ctx = make_context(species, omega_z, freq_convention=conv)
            value = ctx.quartic_to_si(lam)
            rows.append(
                {
                    "species": species,
                    "freq_convention": conv,
                    "quartic_J_m4": value,
                    "log_error": abs(math.log(value / b_target)),
                }
            )
    rows.sort(key=lambda r: r["log_error"])
    return rows
