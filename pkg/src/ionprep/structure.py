"""Hyperfine + Zeeman structure of one electronic level, and dressed states.

The Hamiltonian per level, in the |m_I, m_J> product basis and in angular
frequency units, is

    H = A (I.J) + B_hfs * Q(I.J) + mu_B B (g_J J_z + g_I I_z)

with Q the standard electric-quadrupole form, defined for J >= 1 and I >= 1.
Total M = m_I + m_J is conserved, so H is block diagonal in M; dressed states
are labelled (F, M) by adiabatic continuation of each M block from B = 0.

All public interfaces report ordinary frequencies in Hz; internal energies
are angular frequencies (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from .angular import angular_momentum_matrices, clebsch_gordan, ladder_factor, projections
from .species import FieldConfig, LevelSpec, SpeciesData

TWO_PI = 2.0 * math.pi
MU_B_HZ_PER_T = constants.physical_constants["Bohr magneton in Hz/T"][0]

# Continuation step for adiabatic (F, M) labelling.
LABEL_STEP_TESLA = 1e-4

DEGENERACY_OVERLAP_MIN = 0.6


class StructureError(ValueError):
    pass


def product_basis(I: float, J: float) -> tuple[np.ndarray, np.ndarray]:
    """(m_I, m_J) value arrays for the product basis, m_I outer, descending."""
    mis = np.repeat(projections(I), int(round(2 * J + 1)))
    mjs = np.tile(projections(J), int(round(2 * I + 1)))
    return mis, mjs


def _idotj(I: float, J: float) -> np.ndarray:
    iz, ip, im = angular_momentum_matrices(I)
    jz, jp, jm = angular_momentum_matrices(J)
    return np.kron(iz, jz) + 0.5 * (np.kron(ip, jm) + np.kron(im, jp))


def build_hamiltonian(level: LevelSpec, species: SpeciesData, field: FieldConfig) -> np.ndarray:
    """Level Hamiltonian over |m_I, m_J>, angular frequency units (rad/s)."""
    if species.levels.get(level.name) is not level:
        raise StructureError(f"level {level.name} does not belong to species {species.name}")
    I, J = species.nuclear_spin, level.J
    idj = _idotj(I, J)
    H = level.hyperfine_A * idj

    if level.hyperfine_B != 0.0:
        if J < 1.0 or I < 1.0:
            raise StructureError(
                f"{level.name}: quadrupole term undefined for J={J}, I={I}"
            )
        denom = 2 * I * (2 * I - 1) * J * (2 * J - 1)
        ii_jj = I * (I + 1) * J * (J + 1)
        dim = idj.shape[0]
        H += level.hyperfine_B * (
            3 * idj @ idj + 1.5 * idj - ii_jj * np.eye(dim)
        ) / denom

    iz, _, _ = angular_momentum_matrices(I)
    jz, _, _ = angular_momentum_matrices(J)
    dimI, dimJ = iz.shape[0], jz.shape[0]
    zeeman = TWO_PI * MU_B_HZ_PER_T * field.B_tesla * (
        level.g_J * np.kron(np.eye(dimI), jz)
        + species.nuclear_g_factor * np.kron(iz, np.eye(dimJ))
    )
    return H + zeeman


@dataclass(frozen=True)
class DressedState:
    """Field-dressed eigenstate with its adiabatic (F, M) label.

    ``amplitudes`` are real coefficients over the level's |m_I, m_J> basis
    (the Hamiltonian is real symmetric there). g-factors are carried along
    so magnetic dipole elements can be computed from states alone.
    """

    level: str
    F: int
    M: float
    energy: float             # angular frequency, rad/s, relative to level centroid
    amplitudes: np.ndarray
    m_i: np.ndarray
    m_j: np.ndarray
    g_J: float
    g_I: float

    @property
    def frequency_hz(self) -> float:
        return self.energy / TWO_PI

    @property
    def J(self) -> float:
        return float(np.max(self.m_j))

    @property
    def I(self) -> float:
        return float(np.max(self.m_i))

    def key(self) -> tuple[str, int, float]:
        return (self.level, self.F, self.M)

    def label(self) -> str:
        return f"{self.level}|F={self.F},M={self.M:+g}>"


def _m_blocks(mis: np.ndarray, mjs: np.ndarray) -> dict[float, np.ndarray]:
    total = np.round(2 * (mis + mjs)).astype(int)
    return {m2 / 2.0: np.flatnonzero(total == m2) for m2 in np.unique(total)}


class _LabelledLevel(dict):
    """dict[(F, M)] -> (energy trace over grid, final eigenvector)."""

    basis: tuple[np.ndarray, np.ndarray]
    grid: np.ndarray


def _continue_level(level: LevelSpec, species: SpeciesData, grid: np.ndarray) -> _LabelledLevel:
    I, J = species.nuclear_spin, level.J
    mis, mjs = product_basis(I, J)
    dim = len(mis)

    H0 = build_hamiltonian(level, species, FieldConfig(0.0))
    HZ = build_hamiltonian(level, species, FieldConfig(1.0)) - H0  # linear in B

    f2 = 2 * _idotj(I, J) + (I * (I + 1) + J * (J + 1)) * np.eye(dim)

    result = _LabelledLevel()
    result.basis = (mis, mjs)
    result.grid = grid

    for M, idx in _m_blocks(mis, mjs).items():
        h0 = H0[np.ix_(idx, idx)]
        hz = HZ[np.ix_(idx, idx)]
        stack = h0[None, :, :] + grid[:, None, None] * hz[None, :, :]
        evals, evecs = np.linalg.eigh(stack)  # batched over the grid

        # F labels at B = 0 from <F^2>, sharp by symmetry.
        f2_block = f2[np.ix_(idx, idx)]
        v0 = evecs[0]
        f2_exp = np.einsum("ik,ij,jk->k", v0, f2_block, v0)
        Fs = np.round((-1 + np.sqrt(1 + 4 * f2_exp)) / 2).astype(int)

        # Adiabatic tracking: permute each step's eigenvectors to follow the
        # previous step by maximum overlap.
        prev = v0
        for k in range(1, len(grid)):
            overlap = np.abs(prev.T @ evecs[k])
            perm = np.full(len(idx), -1)
            used: set[int] = set()
            for row in np.argsort(-overlap.max(axis=1)):
                for c in np.argsort(-overlap[row]):
                    if c not in used:
                        if overlap[row, c] < DEGENERACY_OVERLAP_MIN:
                            raise StructureError(
                                f"{level.name}, M={M}: adiabatic label tracking is "
                                f"ambiguous near B={grid[k]:.6f} T "
                                f"(best overlap {overlap[row, c]:.3f}); refusing to guess"
                            )
                        perm[row] = c
                        used.add(c)
                        break
            evals[k:] = evals[k:][:, perm]
            evecs[k:] = evecs[k:][:, :, perm]
            prev = evecs[k]

        for n, F in enumerate(Fs):
            vec = np.zeros(dim)
            v = evecs[-1][:, n]
            if v[np.argmax(np.abs(v))] < 0:  # fix the global sign
                v = -v
            vec[idx] = v
            if (F, M) in result:
                raise StructureError(f"{level.name}: duplicate label F={F}, M={M}")
            result[(F, M)] = (evals[:, n], vec)

    return result


def _continuation_grid(B: float, step: float) -> np.ndarray:
    if B == 0.0:
        return np.array([0.0])
    n = max(2, int(math.ceil(B / step)) + 1)
    return np.linspace(0.0, B, n)


def dressed_states(
    level: LevelSpec,
    species: SpeciesData,
    field: FieldConfig,
    step_tesla: float = LABEL_STEP_TESLA,
) -> list[DressedState]:
    """All dressed states of a level, labelled by continuation from B = 0."""
    grid = _continuation_grid(field.B_tesla, step_tesla)
    labelled = _continue_level(level, species, grid)
    mis, mjs = labelled.basis
    out = [
        DressedState(
            level=level.name, F=F, M=M, energy=float(trace[-1]),
            amplitudes=vec, m_i=mis, m_j=mjs,
            g_J=level.g_J, g_I=species.nuclear_g_factor,
        )
        for (F, M), (trace, vec) in labelled.items()
    ]
    out.sort(key=lambda s: (-s.F, -s.M))
    return out


def breit_rabi(level: LevelSpec, species: SpeciesData, B: float, F: int, M: float) -> float:
    """Closed-form J = 1/2 eigenvalue (rad/s); the independent oracle."""
    if abs(level.J - 0.5) > 1e-12:
        raise StructureError("Breit-Rabi formula requires J = 1/2")
    I = species.nuclear_spin
    dW = level.hyperfine_A * (I + 0.5)
    muB = TWO_PI * MU_B_HZ_PER_T * B
    x = (level.g_J - species.nuclear_g_factor) * muB / dW
    base = -dW / (2 * (2 * I + 1)) + species.nuclear_g_factor * muB * M
    if abs(abs(M) - (I + 0.5)) < 1e-9:
        # Stretch states exist only in F = I + 1/2; sqrt((1 +- x)^2) = |1 +- x|.
        sign = 1.0 if M > 0 else -1.0
        return base + (dW / 2) * (1 + sign * x)
    root = math.sqrt(1 + 4 * M * x / (2 * I + 1) + x * x)
    if F == round(I + 0.5):
        return base + (dW / 2) * root
    if F == round(I - 0.5):
        return base - (dW / 2) * root
    raise StructureError(f"invalid F={F} for I={I}")


@dataclass(frozen=True)
class ClockPoint:
    B_tesla: float
    frequency_hz: float


def clock_field(
    level: LevelSpec,
    species: SpeciesData,
    lower: tuple[int, float],
    upper: tuple[int, float],
    search_range: tuple[float, float] = (1e-4, 0.05),
    grid_points: int = 600,
) -> ClockPoint | None:
    """Field B* where d(nu)/dB = 0 for the given transition, else None.

    The frequency is evaluated on one adiabatic continuation sweep over the
    search range; a derivative sign change is bracketed on that grid and
    refined with Brent's method on the numerically differentiated frequency.
    """
    B_lo, B_hi = search_range
    grid = np.linspace(0.0, B_hi, max(grid_points, 64))
    labelled = _continue_level(level, species, grid)
    for key in (tuple(lower), tuple(upper)):
        if key not in labelled:
            raise StructureError(f"{level.name}: no dressed state with (F, M) = {key}")
    nu = np.abs(labelled[tuple(upper)][0] - labelled[tuple(lower)][0]) / TWO_PI

    dnu = np.gradient(nu, grid)
    idx = np.flatnonzero((grid >= B_lo) & (grid <= B_hi))
    sign = np.sign(dnu[idx])
    crossings = np.flatnonzero(np.diff(sign) != 0)
    if len(crossings) == 0:
        return None

    k = idx[crossings[0]]
    h = grid[1] - grid[0]

    def deriv(B: float) -> float:
        return (np.interp(B + h, grid, nu) - np.interp(B - h, grid, nu)) / (2 * h)

    B_star = brentq(deriv, grid[max(k - 1, 0)], grid[min(k + 2, len(grid) - 1)], xtol=1e-9)
    return ClockPoint(B_tesla=float(B_star), frequency_hz=float(np.interp(B_star, grid, nu)))


def electric_dipole_amplitude(lower: DressedState, upper: DressedState, q: int) -> float:
    """Relative E1 amplitude between dressed states for polarization q.

    Normalised so that sum over lower states and q of |amp|^2 equals 1 for
    every upper state (completeness of decay channels within one transition).
    Zero for forbidden combinations.
    """
    if q not in (-1, 0, 1):
        raise ValueError("q must be -1, 0 or +1")
    if abs((upper.M - lower.M) - q) > 1e-9:
        return 0.0
    Jg, Je = lower.J, upper.J
    index_e = {(mi, mj): k for k, (mi, mj) in enumerate(zip(upper.m_i, upper.m_j))}
    amp = 0.0
    for k, (mi, mj) in enumerate(zip(lower.m_i, lower.m_j)):
        if lower.amplitudes[k] == 0.0:
            continue
        ke = index_e.get((mi, mj + q))
        if ke is None:
            continue
        cg = clebsch_gordan(Jg, mj, 1, q, Je, mj + q)
        amp += lower.amplitudes[k] * upper.amplitudes[ke] * cg
    return float(amp)


def magnetic_dipole_element(a: DressedState, b: DressedState) -> float:
    """Relative M1 element <a| g_J J_q + g_I I_q |b>, q = M_a - M_b.

    Dimensionless (units of mu_B); zero unless |Delta M| <= 1. Spherical
    components O_0 = O_z and O_{+-1} = -+ O_{+-} / sqrt(2).
    """
    if a.level != b.level:
        raise ValueError("magnetic dipole element is defined within one level")
    q = round(a.M - b.M)
    if abs(a.M - b.M - q) > 1e-9 or abs(q) > 1:
        return 0.0
    index_a = {(mi, mj): k for k, (mi, mj) in enumerate(zip(a.m_i, a.m_j))}
    I, J = b.I, b.J
    total = 0.0
    for k, (mi, mj) in enumerate(zip(b.m_i, b.m_j)):
        cb = b.amplitudes[k]
        if cb == 0.0:
            continue
        if q == 0:
            ka = index_a.get((mi, mj))
            if ka is not None:
                total += a.amplitudes[ka] * cb * (a.g_J * mj + a.g_I * mi)
        else:
            ka = index_a.get((mi, mj + q))
            if ka is not None:
                total += a.amplitudes[ka] * cb * a.g_J * ladder_factor(J, mj, q)
            ka = index_a.get((mi + q, mj))
            if ka is not None:
                total += a.amplitudes[ka] * cb * a.g_I * ladder_factor(I, mi, q)
    if q != 0:
        total *= -q / math.sqrt(2.0)
    return float(total)


class StateRegistry:
    """Dressed states of selected levels of one species at one field.

    Provides global indexing for rate matrices and lookups by (level, F, M).
    Immutable after construction; safe to share across workers.
    """

    def __init__(
        self,
        species: SpeciesData,
        field: FieldConfig,
        level_names: list[str] | None = None,
    ):
        self.species = species
        self.field = field
        self.level_names = list(level_names or species.levels.keys())
        self.states: list[DressedState] = []
        for name in self.level_names:
            self.states.extend(dressed_states(species.level(name), species, field))
        self._index = {s.key(): i for i, s in enumerate(self.states)}
        self.energies = np.array([s.energy for s in self.states])

    def __len__(self) -> int:
        return len(self.states)

    def index(self, level: str, F: int, M: float) -> int:
        try:
            return self._index[(level, F, M)]
        except KeyError:
            raise StructureError(
                f"unknown state {level}|F={F},M={M}> in registry over {self.level_names}"
            ) from None

    def state(self, level: str, F: int, M: float) -> DressedState:
        return self.states[self.index(level, F, M)]

    def indices_of_level(self, level: str) -> list[int]:
        return [i for i, s in enumerate(self.states) if s.level == level]

    def ground_level(self) -> str:
        for name in self.level_names:
            if math.isinf(self.species.level(name).lifetime):
                return name
        raise StructureError("registry contains no ground level")

    def dipole_matrix(self, transition_name: str, q: int) -> np.ndarray:
        """E1 amplitudes d[i, j] between registry states i (lower level) and
        j (upper level) of the named transition, cached per (transition, q)."""
        cache = self.__dict__.setdefault("_dipole_cache", {})
        key = (transition_name, q)
        if key not in cache:
            tr = self.species.transition(transition_name)
            lo = self.indices_of_level(tr.lower)
            up = self.indices_of_level(tr.upper)
            mat = np.zeros((len(self.states), len(self.states)))
            for i in lo:
                for j in up:
                    mat[i, j] = electric_dipole_amplitude(self.states[i], self.states[j], q)
            cache[key] = mat
        return cache[key]
