"""Grid wavefunctions and eigen-solver results shared by the quantum solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Axis:
    """Uniform grid ``x_k = start + k * step`` with ``points`` samples."""

    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.points < 2 or not self.stop > self.start:
            raise ValueError("axis needs at least two points and stop > start")

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.points - 1)

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @classmethod
    def symmetric(cls, half_extent: float, points: int) -> "Axis":
        return cls(-half_extent, half_extent, points)


@dataclass
class RadialWavefunction:
    """Amplitudes on a product grid; ``length_unit`` names the coordinate unit."""

    axes: tuple[Axis, ...]
    amplitudes: np.ndarray
    length_unit: str = "m"

    def __post_init__(self):
        shape = tuple(a.points for a in self.axes)
        if self.amplitudes.shape != shape:
            raise ValueError(f"amplitude shape {self.amplitudes.shape} does not match grid {shape}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def cell(self) -> float:
        return float(np.prod([a.step for a in self.axes]))

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.cell))

    def normalized(self) -> "RadialWavefunction":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalise a zero state")
        return RadialWavefunction(self.axes, self.amplitudes / n, self.length_unit)

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm - 1) > tol:
            raise ValueError(f"state norm {self.norm!r} differs from 1 by more than {tol}")

    def overlap(self, other: "RadialWavefunction") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.cell)


@dataclass
class SpectralResult:
    """Lowest eigenpairs, ascending, with convergence metadata."""

    energies: np.ndarray
    states: list[RadialWavefunction]
    energy_unit: str
    residuals: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.energies) < -1e-12 * float(np.max(np.abs(self.energies), initial=0.0))):
            raise ValueError("energies must be ascending")

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])
