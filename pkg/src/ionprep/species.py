"""Ion species data: levels, hyperfine constants, transitions.

Species are described by structured key-value files (one per species, INI
syntax) with sections ``[species]``, ``[level.<name>]`` and
``[transition.<name>]``. Units inside the files: frequencies in MHz,
wavelengths in nm, lifetimes in seconds, magnetic field in tesla.

Conventions (also documented in each data file header):
  * Zeeman term is mu_B * B * (g_J * m_J + g_I * m_I); g_I therefore carries
    the electron-to-nuclear magneton ratio and the sign flip, Steck style
    (|g_I| ~ 1e-4).
  * A is the magnetic dipole hyperfine constant, B_hfs the electric
    quadrupole constant; both as ordinary frequencies in the files and
    converted to angular frequencies internally.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .angular import is_half_integer

TWO_PI = 2.0 * math.pi

# Branching consistency and sum tolerances from the data contract.
BRANCHING_SUM_TOL = 1e-10
GAMMA_CONSISTENCY_REL_TOL = 1e-6


class SpeciesError(ValueError):
    """Raised for inconsistent or malformed species data."""


@dataclass(frozen=True)
class LevelSpec:
    """One electronic level with its hyperfine and Zeeman parameters."""

    name: str
    n: int
    L: int
    J: float
    hyperfine_A: float        # angular frequency, rad/s
    hyperfine_B: float        # angular frequency, rad/s (quadrupole)
    g_J: float
    lifetime: float           # seconds; inf for a ground level

    def __post_init__(self):
        if self.J < 0.5 - 1e-12 or not is_half_integer(self.J):
            raise SpeciesError(f"level {self.name}: J={self.J} must be a half-integer >= 1/2")
        if not self.lifetime > 0:
            raise SpeciesError(f"level {self.name}: lifetime must be positive")

    def dimension(self, nuclear_spin: float) -> int:
        return int(round((2 * nuclear_spin + 1) * (2 * self.J + 1)))


@dataclass(frozen=True)
class TransitionSpec:
    """Electric-dipole transition between two levels of one species."""

    name: str
    lower: str
    upper: str
    wavelength_nm: float
    linewidth: float          # partial decay rate Gamma of this branch, rad/s (angular)
    saturation_intensity: str  # free-text label for the I0 reference
    branching_fraction: float

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise SpeciesError(f"transition {self.name}: wavelength must be positive")
        if not 0 < self.branching_fraction <= 1:
            raise SpeciesError(f"transition {self.name}: branching fraction outside (0, 1]")


@dataclass(frozen=True)
class FieldConfig:
    """Static quantisation field."""

    B_tesla: float

    def __post_init__(self):
        if self.B_tesla < 0:
            raise SpeciesError("magnetic field must be >= 0")


@dataclass(frozen=True)
class SpeciesData:
    name: str
    nuclear_spin: float
    nuclear_g_factor: float   # in Bohr magnetons, Steck sign convention
    levels: dict[str, LevelSpec] = field(default_factory=dict)
    optical_transitions: dict[str, TransitionSpec] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.nuclear_spin > 0.5 and is_half_integer(self.nuclear_spin)):
            raise SpeciesError(
                f"{self.name}: nuclear spin must be a half-integer > 1/2, got {self.nuclear_spin}"
            )
        self._validate()

    def _validate(self):
        for tr in self.optical_transitions.values():
            if tr.lower not in self.levels or tr.upper not in self.levels:
                raise SpeciesError(f"transition {tr.name} references unknown level")
            if tr.lower == tr.upper:
                raise SpeciesError(f"transition {tr.name} must join two distinct levels")
        # Branching fractions out of each decaying level sum to 1.
        for name, level in self.levels.items():
            if math.isinf(level.lifetime):
                continue
            total = sum(
                tr.branching_fraction
                for tr in self.optical_transitions.values()
                if tr.upper == name
            )
            if abs(total - 1.0) > BRANCHING_SUM_TOL:
                raise SpeciesError(
                    f"{self.name}: branching fractions out of {name} sum to {total!r}, not 1"
                )
        # Gamma = branching / tau_upper consistency.
        for tr in self.optical_transitions.values():
            tau = self.levels[tr.upper].lifetime
            expected = tr.branching_fraction / tau
            if abs(tr.linewidth - expected) > GAMMA_CONSISTENCY_REL_TOL * expected:
                raise SpeciesError(
                    f"transition {tr.name}: linewidth {tr.linewidth:.6e} inconsistent with "
                    f"branching/tau = {expected:.6e}"
                )

    def level(self, name: str) -> LevelSpec:
        try:
            return self.levels[name]
        except KeyError:
            raise SpeciesError(f"{self.name}: no level named {name!r}") from None

    def transition(self, name: str) -> TransitionSpec:
        try:
            return self.optical_transitions[name]
        except KeyError:
            raise SpeciesError(f"{self.name}: no transition named {name!r}") from None

    def transition_between(self, lower: str, upper: str) -> TransitionSpec:
        for tr in self.optical_transitions.values():
            if tr.lower == lower and tr.upper == upper:
                return tr
        raise SpeciesError(f"{self.name}: no transition {lower} -> {upper}")

    def decay_channels(self, upper: str) -> list[TransitionSpec]:
        return [tr for tr in self.optical_transitions.values() if tr.upper == upper]


_L_LETTERS = {"S": 0, "P": 1, "D": 2, "F": 3}


def _parse_level_name(name: str) -> tuple[int, int, float]:
    """Decode names like '4S1/2' or '3D5/2' into (n, L, J)."""
    i = 0
    while i < len(name) and name[i].isdigit():
        i += 1
    n = int(name[:i])
    letter = name[i].upper()
    if letter not in _L_LETTERS:
        raise SpeciesError(f"unknown orbital letter in level name {name!r}")
    jtxt = name[i + 1:]
    if "/" in jtxt:
        num, den = jtxt.split("/")
        J = float(num) / float(den)
    else:
        J = float(jtxt)
    return n, _L_LETTERS[letter], J


def load_species(path: str | os.PathLike) -> SpeciesData:
    """Parse one species data file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise SpeciesError(f"species file not found: {path}")
    parser.read(path)
    if "species" not in parser:
        raise SpeciesError(f"{path}: missing [species] section")
    sp = parser["species"]

    levels: dict[str, LevelSpec] = {}
    transitions: dict[str, TransitionSpec] = {}
    for section in parser.sections():
        if section.startswith("level."):
            name = section.split(".", 1)[1]
            body = parser[section]
            n, L, J = _parse_level_name(name)
            tau = body.get("lifetime_s", "inf")
            A_mhz = body.getfloat("hyperfine_A_MHz")
            B_mhz = body.getfloat("hyperfine_B_MHz", 0.0)
            if B_mhz != 0.0 and (J < 1.0 or eval_fraction(sp["nuclear_spin"]) < 1.0):
                raise SpeciesError(
                    f"{name}: quadrupole constant requires J >= 1 and I >= 1"
                )
            levels[name] = LevelSpec(
                name=name, n=n, L=L, J=J,
                hyperfine_A=TWO_PI * A_mhz * 1e6,
                hyperfine_B=TWO_PI * B_mhz * 1e6,
                g_J=body.getfloat("g_J"),
                lifetime=float(tau),
            )
        elif section.startswith("transition."):
            name = section.split(".", 1)[1]
            body = parser[section]
            upper = body["upper"]
            branching = body.getfloat("branching_fraction")
            transitions[name] = TransitionSpec(
                name=name,
                lower=body["lower"],
                upper=upper,
                wavelength_nm=body.getfloat("wavelength_nm"),
                linewidth=branching / float(parser[f"level.{upper}"].get("lifetime_s")),
                saturation_intensity=body.get("saturation_intensity", "two-level I0"),
                branching_fraction=branching,
            )

    return SpeciesData(
        name=sp["name"],
        nuclear_spin=float(eval_fraction(sp["nuclear_spin"])),
        nuclear_g_factor=sp.getfloat("g_I"),
        levels=levels,
        optical_transitions=transitions,
    )


def eval_fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def default_species_dir() -> Path:
    env = os.environ.get("IONPREP_SPECIES_DIR")
    if env:
        return Path(env)
    return Path(__file__).parent / "data"


def load_named_species(name: str, species_dir: str | os.PathLike | None = None) -> SpeciesData:
    base = Path(species_dir) if species_dir else default_species_dir()
    path = base / f"{name.lower()}.ion"
    return load_species(path)
