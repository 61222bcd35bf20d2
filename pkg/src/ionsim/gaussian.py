"""Ground-state covariances of the linearised chain and Gaussian site entropies.

All entropies are in bits.  Covariances can be dimensionless (``hbar = m =
omega_z = 1``, i.e. oscillator units) or SI when a context is supplied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import crystal
from .modes import NormalModes, chain_taylor, normal_modes
from .units import PhysicalContext

HEISENBERG_TOL = 1e-9


class InvariantViolation(ValueError):
    pass


@dataclass
class CovarianceData:
    """``X = <x_i x_j>``, ``P = <p_i p_j>`` and the symmetrised cross block."""

    X: np.ndarray
    P: np.ndarray
    cross: np.ndarray
    hbar: float = 1.0

    def symplectic_eigenvalue(self, site: int) -> float:
        s = site
        return math.sqrt(max(self.X[s, s] * self.P[s, s] - self.cross[s, s] ** 2, 0.0)) / self.hbar


def ground_state_covariance(modes: NormalModes, ctx: PhysicalContext | None = None) -> CovarianceData:
    """Harmonic ground-state covariances from the transverse normal modes.

    Without ``ctx`` the result is in oscillator units of the axial trap.
    """
    if np.any(modes.omega2 <= 0):
        raise ValueError("all mode frequencies must be real and positive; the linear chain is unstable or critical")
    w = np.sqrt(modes.omega2)
    B = modes.vectors
    if ctx is None:
        hbar, m, wz = 1.0, 1.0, 1.0
    else:
        hbar, m, wz = ctx.hbar, ctx.mass, ctx.omega_z
    omega = w * wz
    X = 0.5 * (B * (hbar / (m * omega))) @ B.T
    P = 0.5 * (B * (hbar * m * omega)) @ B.T
    n = len(w)
    return CovarianceData(X=X, P=P, cross=np.zeros((n, n)), hbar=hbar)


def entropy_from_nu(nu: float) -> float:
    if nu < 0.5 - HEISENBERG_TOL:
        raise InvariantViolation(f"symplectic eigenvalue {nu!r} below 1/2")
    if nu <= 0.5:
        return 0.0
    hi, lo = nu + 0.5, nu - 0.5
    return float(hi * math.log2(hi) - (lo * math.log2(lo) if lo > 0 else 0.0))


def single_site_entropy(cov: CovarianceData, site: int) -> float:
    """Von Neumann entropy (bits) of one site's reduced Gaussian state."""
    return entropy_from_nu(cov.symplectic_eigenvalue(site))


def chain_entropies(N: int, rx: float) -> np.ndarray:
    """Entropy of every site of an N-ion linear chain at transverse ratio ``rx``."""
    cov = ground_state_covariance(normal_modes(chain_taylor(N, rx)))
    return np.array([single_site_entropy(cov, s) for s in range(N)])


def _closed_form(rx: float, rc2: float, const: float) -> float:
    d = rx * rx - rc2
    if not d > 0:
        raise ValueError("closed-form entropy needs r_x above the critical value")
    return (-0.25 * math.log(d) + const + 1.0) / math.log(2)


def closed_form_S2(rx: float) -> float:
    """Leading near-critical asymptote for either ion of a pair, in bits.

    The natural-log expression ``-log(d)/4 + log(1/(4 sqrt 2)) + 1`` is
    divided by ``ln 2``; ``d = r_x^2 - 1``.
    """
    return _closed_form(rx, 1.0, math.log(1 / (4 * math.sqrt(2))))


def closed_form_S3(rx: float) -> float:
    """Leading near-critical asymptote for the middle of three ions, in bits (``d = r_x^2 - 12/5``)."""
    return _closed_form(rx, 12 / 5, math.log(math.sqrt(2 / 5) / 3))


def soft_site(N: int) -> int:
    """Site with the largest soft-mode amplitude (lowest index on ties)."""
    rc = crystal.critical_frequency(N)
    v = normal_modes(chain_taylor(N, rc * 1.01)).soft_vector
    amp = np.abs(v)
    return int(np.flatnonzero(amp >= amp.max() - 1e-9)[0])


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    distances: np.ndarray
    entropies: np.ndarray
    site: int
    sqrt_coefficient: float | None = None


def entropy_vs_distance(N: int, distances, site: int | None = None) -> tuple[np.ndarray, int]:
    """Site entropy at ``r_x^2 = r_c^2 + d`` for each distance ``d``."""
    rc = crystal.critical_frequency(N)
    site = soft_site(N) if site is None else site
    S = np.array([chain_entropies(N, math.sqrt(rc * rc + d))[site] for d in distances])
    return S, site


def fit_log_slope(
    N: int,
    d_min: float = 1e-4,
    d_max: float = 1e-2,
    points: int = 21,
    site: int | None = None,
    correct_sqrt: bool = False,
) -> SlopeFit:
    """Least-squares slope of S (bits) against log2 of the distance to criticality.

    With ``correct_sqrt`` a ``c sqrt(d)`` column is fitted as well, removing
    the leading finite-distance correction.
    """
    d = np.geomspace(d_min, d_max, points)
    S, site = entropy_vs_distance(N, d, site)
    cols = [np.log2(d), np.ones_like(d)]
    if correct_sqrt:
        cols.append(np.sqrt(d))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), S, rcond=None)
    return SlopeFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        distances=d,
        entropies=S,
        site=site,
        sqrt_coefficient=float(coef[2]) if correct_sqrt else None,
    )


def closed_form_offsets(N: int, distances) -> np.ndarray:
    """Numeric site entropy minus closed form for N = 2 (site 0) or N = 3 (middle)."""
    if N == 2:
        f, site, rc2 = closed_form_S2, 0, 1.0
    elif N == 3:
        f, site, rc2 = closed_form_S3, 1, 12 / 5
    else:
        raise ValueError("closed forms exist only for N = 2 and N = 3")
    out = []
    for dist in distances:
        rx = math.sqrt(rc2 + dist)
        out.append(chain_entropies(N, rx)[site] - f(rx))
    return np.array(out)


def entropy_scan_csv(N: int, rx_values, path) -> None:
    rx_values = np.asarray(rx_values, dtype=float)
    if np.any(np.diff(rx_values) < 0):
        raise ValueError("r_x values must be sorted ascending")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_x_over_omega_z"] + [f"S_bits_site{i}" for i in range(N)])
        for rx in rx_values:
            w.writerow([f"{rx:.12g}"] + [f"{s:.12g}" for s in chain_entropies(N, rx)])
