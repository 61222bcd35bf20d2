"""Physical constants, ion species and the dimensionless unit system.

Classical quantities (positions, potential energies) are measured in the
Coulomb length ``ell = (e^2 / (4 pi eps0 m omega_z^2))**(1/3)`` and the
Coulomb energy ``m omega_z^2 ell^2``.  Quantum quantities are measured in
``hbar omega_z`` and the oscillator length ``sqrt(hbar / (m omega_z))``.
The ratio of the two energy units is the effective Planck constant
``epsilon = hbar omega_z / (m omega_z^2 ell^2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from scipy import constants as const

# isotope masses in u (AME2020)
SPECIES: dict[str, float] = {
    "Be-9": 9.0121831,
    "Mg-24": 23.985041697,
    "Mg-25": 24.985836976,
    "Ca-40": 39.962590863,
    "Ca-43": 42.958766438,
    "Sr-88": 87.9056125,
    "Ba-137": 136.90582714,
    "Ba-138": 137.905247,
    "Yb-171": 170.9363315,
    "Yb-174": 173.9388664,
}

DEFAULT_SPECIES = "Ca-40"
FREQ_CONVENTIONS = ("angular", "cyclic")


class UnknownSpeciesError(KeyError):
    pass


@dataclass(frozen=True)
class PhysicalContext:
    """Ion mass, axial trap frequency and derived scales.

    ``omega_z`` is always stored as an angular frequency (rad/s).
    ``freq_convention`` only records how the user-supplied number was
    interpreted and how quoted frequencies are read by :func:`as_angular`.
    """

    mass: float
    omega_z: float
    charge: float = const.e
    epsilon0: float = const.epsilon_0
    hbar: float = const.hbar
    species: str | None = DEFAULT_SPECIES
    freq_convention: str = "angular"
    omega_z_input: float | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("mass", "omega_z", "charge", "epsilon0", "hbar"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.freq_convention not in FREQ_CONVENTIONS:
            raise ValueError(f"freq_convention must be one of {FREQ_CONVENTIONS}")

    @property
    def coulomb_constant(self) -> float:
        return self.charge**2 / (4 * math.pi * self.epsilon0)

    @property
    def length_scale(self) -> float:
        return (self.coulomb_constant / (self.mass * self.omega_z**2)) ** (1 / 3)

    @property
    def energy_scale(self) -> float:
        """hbar * omega_z in J."""
        return self.hbar * self.omega_z

    @property
    def coulomb_energy(self) -> float:
        """m omega_z^2 ell^2 = e^2 / (4 pi eps0 ell), in J."""
        return self.mass * self.omega_z**2 * self.length_scale**2

    @property
    def ground_width(self) -> float:
        """sqrt(hbar / (2 m omega_z)) in m."""
        return math.sqrt(self.hbar / (2 * self.mass * self.omega_z))

    @property
    def oscillator_length(self) -> float:
        return math.sqrt(self.hbar / (self.mass * self.omega_z))

    @property
    def nonlinearity(self) -> float:
        """Effective Planck constant hbar omega_z / (m omega_z^2 ell^2)."""
        return self.energy_scale / self.coulomb_energy

    def quartic_to_si(self, value: float) -> float:
        """Convert a quartic coefficient from Coulomb units (E_c / ell^4) to J/m^4."""
        return value * self.coulomb_energy / self.length_scale**4

    def to_dict(self) -> dict:
        return {
            "species": self.species,
            "mass_amu": self.mass / const.atomic_mass,
            "omega_z": self.omega_z if self.omega_z_input is None else self.omega_z_input,
            "freq_convention": self.freq_convention,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalContext":
        allowed = {"species", "mass_amu", "omega_z", "freq_convention", "charge"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown context keys: {sorted(unknown)}")
        return make_context(
            data.get("species", DEFAULT_SPECIES),
            data.get("omega_z", 1e6),
            mass_amu=data.get("mass_amu"),
            freq_convention=data.get("freq_convention", "angular"),
            charge=data.get("charge", 1),
        )

    @classmethod
    def from_json(cls, text: str) -> "PhysicalContext":
        return cls.from_dict(json.loads(text))


def species_mass(name: str) -> float:
    """Mass in kg of a named isotope."""
    try:
        return SPECIES[name] * const.atomic_mass
    except KeyError:
        known = ", ".join(sorted(SPECIES))
        raise UnknownSpeciesError(f"unknown species {name!r}; known species: {known}") from None


def make_context(
    species: str | float | None = DEFAULT_SPECIES,
    omega_z: float = 1e6,
    *,
    mass_amu: float | None = None,
    freq_convention: str = "angular",
    charge: float = 1,
) -> PhysicalContext:
    """Build a :class:`PhysicalContext`.

    Parameters
    ----------
    species : str or float
        Isotope name (see :data:`SPECIES`) or a mass in kg.
    omega_z : float
        Axial trap frequency, rad/s for ``freq_convention="angular"`` and
        Hz for ``"cyclic"``.
    mass_amu : float, optional
        Overrides the species mass.
    charge : float
        Ion charge in units of the elementary charge.
    """
    if freq_convention not in FREQ_CONVENTIONS:
        raise ValueError(f"freq_convention must be one of {FREQ_CONVENTIONS}, got {freq_convention!r}")
    if mass_amu is not None:
        mass = mass_amu * const.atomic_mass
        name = species if isinstance(species, str) else None
    elif isinstance(species, str):
        mass = species_mass(species)
        name = species
    elif species is None:
        raise ValueError("either species or mass_amu is required")
    else:
        mass = float(species)
        name = None
    if not mass > 0:
        raise ValueError("mass must be positive")
    if not omega_z > 0:
        raise ValueError("omega_z must be positive")
    omega = omega_z if freq_convention == "angular" else 2 * math.pi * omega_z
    return PhysicalContext(
        mass=mass,
        omega_z=omega,
        charge=charge * const.e,
        species=name,
        freq_convention=freq_convention,
        omega_z_input=omega_z,
    )


def as_angular(value: float, ctx: PhysicalContext) -> float:
    """Read a quoted frequency ("kHz") as rad/s under the context's convention."""
    return value if ctx.freq_convention == "angular" else 2 * math.pi * value


_KINDS = ("length", "energy", "frequency", "time", "coulomb_energy", "oscillator_length")


def _unit(kind: str, ctx: PhysicalContext) -> float:
    if kind == "length":
        return ctx.length_scale
    if kind == "energy":
        return ctx.energy_scale
    if kind == "frequency":
        return ctx.omega_z
    if kind == "time":
        return 1 / ctx.omega_z
    if kind == "coulomb_energy":
        return ctx.coulomb_energy
    if kind == "oscillator_length":
        return ctx.oscillator_length
    raise ValueError(f"unknown kind {kind!r}; expected one of {_KINDS}")


def to_si(value, kind: str, ctx: PhysicalContext):
    """Dimensionless -> SI.  Lengths in ell, energies in hbar omega_z, frequencies in omega_z."""
    return value * _unit(kind, ctx)


def from_si(value, kind: str, ctx: PhysicalContext):
    return value / _unit(kind, ctx)


# Context whose three-ion quartic coefficient best matches the quoted 3e-4 J/m^4;
# see ionsim.modes.fit_context.
MATCHED_SPECIES = "Ca-40"
MATCHED_OMEGA_Z = 1e6


def matched_context() -> PhysicalContext:
    return make_context(MATCHED_SPECIES, MATCHED_OMEGA_Z, freq_convention="angular")
