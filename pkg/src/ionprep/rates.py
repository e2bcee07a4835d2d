"""Classical rate equations for laser-driven population transfer plus decay.

The generator R acts on a vector p of state occupations, dp/dt = R p.
Stimulated rates between a lower dressed state g and an upper dressed state e
under a beam of saturation s are

    W_ge = (Gamma/2) * s * sum_q |a_q|^2 |d_ge,q|^2 * L(delta_ge)

with L(delta) = 1 / (1 + (2 delta / Gamma)^2) and delta_ge the beam detuning
from that specific dressed transition. W is applied in both directions
(classical model). Spontaneous decay adds Gamma * |d_ge,q|^2 from e to g.

The saturation convention is s = I/I0 with I0 such that a closed two-level
resonant system scatters at (Gamma/2) * s / (1 + s + (2 delta/Gamma)^2); the
(1 + s) self-saturation denominator is NOT applied inside the multi-level
matrix (weak-drive regime, s <= 0.15 at all nominal operating points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .structure import StateRegistry

TWO_PI = 2.0 * math.pi

COLUMN_SUM_TOL = 1e-10
OCCUPATION_SUM_TOL = 1e-9

# A stimulated coupling counts as "coherently significant" for the Lambda
# guard when its Lorentzian factor is at least this large (|delta| within
# about 0.87 linewidths of resonance).
GUARD_LORENTZIAN_MIN = 0.25


class LambdaSystemError(RuntimeError):
    """Two distinct coherent drives link three or more states; the classical
    rate model is invalid there (coherent dark states would form)."""


class RateModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class Polarization:
    """Complex amplitudes (a_minus, a_zero, a_plus) over (sigma-, pi, sigma+)."""

    a_minus: complex
    a_zero: complex
    a_plus: complex

    def __post_init__(self):
        norm = self.weight(-1) + self.weight(0) + self.weight(+1)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"polarization amplitudes have norm {norm}, expected 1")

    def weight(self, q: int) -> float:
        a = {-1: self.a_minus, 0: self.a_zero, +1: self.a_plus}[q]
        return abs(a) ** 2


def linear_polarization(theta_deg: float) -> Polarization:
    """Linear polarization at angle theta to the quantisation axis.

    Intensity weights: |a_0|^2 = cos^2(theta), |a_+|^2 = |a_-|^2 = sin^2/2.
    """
    if not 0.0 <= theta_deg <= 90.0:
        raise ValueError("theta must lie in [0, 90] degrees")
    th = math.radians(theta_deg)
    return Polarization(
        a_minus=math.sin(th) / math.sqrt(2.0),
        a_zero=math.cos(th),
        a_plus=-math.sin(th) / math.sqrt(2.0),
    )


def circular_polarization(q: int) -> Polarization:
    if q == +1:
        return Polarization(0.0, 0.0, 1.0)
    if q == -1:
        return Polarization(1.0, 0.0, 0.0)
    raise ValueError("q must be +1 or -1")


def polarization_from_weights(w_minus: float, w_zero: float, w_plus: float) -> Polarization:
    total = w_minus + w_zero + w_plus
    if abs(total - 1.0) > 1e-9:
        raise ValueError("polarization weights must sum to 1")
    return Polarization(math.sqrt(w_minus), math.sqrt(w_zero), math.sqrt(w_plus))


@dataclass(frozen=True)
class LaserBeam:
    """One laser drive, anchored on a specific dressed transition.

    ``anchor_lower``/``anchor_upper`` are (F, M) labels in the transition's
    lower/upper level; ``detuning_hz`` is the beam offset from that anchor.
    Beams sharing a non-empty ``family`` are treated as mutually incoherent
    tones of one source and exempted from the pairwise Lambda guard.
    """

    transition: str
    anchor_lower: tuple[int, float]
    anchor_upper: tuple[int, float]
    s: float
    polarization: Polarization
    detuning_hz: float = 0.0
    family: str = ""

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("saturation parameter s must be >= 0")


@dataclass
class RateMatrix:
    matrix: np.ndarray
    registry: StateRegistry
    beams: tuple[LaserBeam, ...] = field(default_factory=tuple)

    def validate(self):
        R = self.matrix
        col = np.abs(R.sum(axis=0))
        if col.max() > COLUMN_SUM_TOL * max(1.0, np.abs(R).max()):
            raise RateModelError(f"rate matrix columns sum to {col.max():.2e}, not 0")
        off = R - np.diag(np.diag(R))
        if off.min() < -1e-12 * max(1.0, np.abs(R).max()):
            raise RateModelError("negative off-diagonal rate")
        if np.diag(R).max() > 1e-12 * max(1.0, np.abs(R).max()):
            raise RateModelError("positive diagonal entry")


def validate_occupations(p: np.ndarray, tol: float = OCCUPATION_SUM_TOL):
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise RateModelError("occupations outside [0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise RateModelError(f"occupations sum to {p.sum()!r}, not 1")


def lorentzian(delta: np.ndarray | float, gamma: float) -> np.ndarray | float:
    """L(delta) = 1 / (1 + (2 delta / gamma)^2), both arguments angular."""
    x = 2.0 * np.asarray(delta) / gamma
    return 1.0 / (1.0 + x * x)


def _beam_rates(beam: LaserBeam, registry: StateRegistry) -> np.ndarray:
    """Symmetric stimulated-rate matrix W (only lower-upper entries filled)."""
    tr = registry.species.transition(beam.transition)
    lo = registry.indices_of_level(tr.lower)
    up = registry.indices_of_level(tr.upper)
    gamma = tr.linewidth

    i0 = registry.index(tr.lower, *beam.anchor_lower)
    j0 = registry.index(tr.upper, *beam.anchor_upper)
    omega_laser = (registry.energies[j0] - registry.energies[i0]) + TWO_PI * beam.detuning_hz

    W = np.zeros((len(registry), len(registry)))
    for q in (-1, 0, +1):
        wq = beam.polarization.weight(q)
        if wq == 0.0:
            continue
        d = registry.dipole_matrix(beam.transition, q)
        for i in lo:
            for j in up:
                d2 = d[i, j] ** 2
                if d2 == 0.0:
                    continue
                delta = omega_laser - (registry.energies[j] - registry.energies[i])
                W[i, j] += 0.5 * gamma * beam.s * wq * d2 * lorentzian(delta, gamma)
    return W


def _significant_pairs(beam: LaserBeam, registry: StateRegistry, lmin: float) -> set[tuple[int, int]]:
    tr = registry.species.transition(beam.transition)
    gamma = tr.linewidth
    i0 = registry.index(tr.lower, *beam.anchor_lower)
    j0 = registry.index(tr.upper, *beam.anchor_upper)
    omega_laser = (registry.energies[j0] - registry.energies[i0]) + TWO_PI * beam.detuning_hz
    pairs = set()
    for q in (-1, 0, +1):
        if beam.polarization.weight(q) == 0.0:
            continue
        d = registry.dipole_matrix(beam.transition, q)
        for i in registry.indices_of_level(tr.lower):
            for j in registry.indices_of_level(tr.upper):
                if d[i, j] == 0.0:
                    continue
                delta = omega_laser - (registry.energies[j] - registry.energies[i])
                if lorentzian(delta, gamma) >= lmin:
                    pairs.add((i, j))
    return pairs


def _lambda_guard(beams: list[LaserBeam], registry: StateRegistry, lmin: float):
    sigs = [_significant_pairs(b, registry, lmin) for b in beams]
    for a in range(len(beams)):
        for b in range(a + 1, len(beams)):
            fam_a, fam_b = beams[a].family, beams[b].family
            if fam_a and fam_a == fam_b:
                continue  # declared mutually incoherent
            edges = [(p, "a") for p in sigs[a]] + [(p, "b") for p in sigs[b]]
            if not edges:
                continue
            parent: dict[int, int] = {}

            def find(x: int) -> int:
                while parent.setdefault(x, x) != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for (i, j), _ in edges:
                parent[find(i)] = find(j)
            comp_states: dict[int, set[int]] = {}
            comp_drives: dict[int, set[str]] = {}
            for (i, j), tag in edges:
                root = find(i)
                comp_states.setdefault(root, set()).update((i, j))
                comp_drives.setdefault(root, set()).add(tag)
            for root, statemembers in comp_states.items():
                if len(statemembers) >= 3 and len(comp_drives[root]) >= 2:
                    labels = sorted(registry.states[i].label() for i in statemembers)
                    raise LambdaSystemError(
                        "beams "
                        f"{beams[a].transition}@{beams[a].anchor_lower}->{beams[a].anchor_upper} and "
                        f"{beams[b].transition}@{beams[b].anchor_lower}->{beams[b].anchor_upper} "
                        f"couple {len(statemembers)} states with distinct coherent drives: "
                        + ", ".join(labels)
                    )


def build_rate_matrix(
    beams: list[LaserBeam],
    registry: StateRegistry,
    guard_lorentzian_min: float = GUARD_LORENTZIAN_MIN,
) -> RateMatrix:
    """Generator of the classical population dynamics for a set of beams.

    Contains spontaneous decay for every registered transition whether or
    not a beam drives it. Raises LambdaSystemError if two coherent drives
    link three or more states near-resonantly.
    """
    _lambda_guard(list(beams), registry, guard_lorentzian_min)

    n = len(registry)
    R = np.zeros((n, n))

    # Spontaneous decay on all registered transitions.
    for tr in registry.species.optical_transitions.values():
        if tr.lower not in registry.level_names or tr.upper not in registry.level_names:
            continue
        for q in (-1, 0, +1):
            d = registry.dipole_matrix(tr.name, q)  # indexed [lower, upper]
            R += tr.linewidth * d ** 2  # e -> g population flow: R[g, e]

    # Stimulated rates, symmetric.
    for beam in beams:
        W = _beam_rates(beam, registry)
        R += W + W.T

    np.fill_diagonal(R, 0.0)
    R -= np.diag(R.sum(axis=0))
    rm = RateMatrix(matrix=R, registry=registry, beams=tuple(beams))
    rm.validate()
    return rm


def evolve(p0: np.ndarray, R: RateMatrix | np.ndarray, t: float, method: str = "expm") -> np.ndarray:
    """p(t) = exp(R t) p0, by scaling-and-squaring or an adaptive ODE solver."""
    M = R.matrix if isinstance(R, RateMatrix) else R
    validate_occupations(np.asarray(p0))
    if t == 0.0:
        return np.array(p0, dtype=float)
    if method == "expm":
        p = expm(M * t) @ p0
    elif method == "ode":
        sol = solve_ivp(
            lambda _, y: M @ y, (0.0, t), np.asarray(p0, dtype=float),
            method="DOP853", rtol=1e-10, atol=1e-12,
        )
        p = sol.y[:, -1]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(p)):
        worst = np.unravel_index(np.nanargmax(np.abs(M)), M.shape)
        raise RateModelError(
            f"non-finite occupations after evolve(t={t}); largest rate "
            f"{M[worst]:.3e} at {worst}"
        )
    # Clip float dust; conservation itself is checked by validate_occupations.
    p = np.clip(p, 0.0, None)
    validate_occupations(p)
    return p


def propagator(R: RateMatrix | np.ndarray, t: float) -> np.ndarray:
    M = R.matrix if isinstance(R, RateMatrix) else R
    return expm(M * t)


@dataclass
class SteadyState:
    """Kernel vectors of a rate matrix, one per closed component."""

    vectors: list[np.ndarray]
    components: list[list[int]]
    singular_value_gap: float

    @property
    def unique(self) -> np.ndarray:
        if len(self.vectors) != 1:
            raise RateModelError(
                f"steady state is not unique: {len(self.vectors)} closed components"
            )
        return self.vectors[0]


def steady_state(R: RateMatrix | np.ndarray) -> SteadyState:
    """Normalized kernel vector(s) of R, one per recurrent (closed) class.

    The kernel dimension of a rate generator equals its number of closed
    recurrent classes; each class carries a unique stationary distribution.
    Rank ambiguity within a class is reported with the singular-value gap.
    """
    from scipy.sparse import csgraph, csr_matrix

    M = R.matrix if isinstance(R, RateMatrix) else R
    n = M.shape[0]

    # Directed flow graph: i -> j when R[j, i] > 0. Entries are sums of
    # non-negative terms, so exact zeros are meaningful.
    flow = (M.T > 0.0).astype(int)
    np.fill_diagonal(flow, 0)
    n_scc, labels = csgraph.connected_components(csr_matrix(flow), connection="strong")

    outgoing = np.zeros(n_scc, dtype=bool)
    for i in range(n):
        for j in np.flatnonzero(flow[i]):
            if labels[i] != labels[j]:
                outgoing[labels[i]] = True

    vectors: list[np.ndarray] = []
    components: list[list[int]] = []
    gaps: list[float] = []
    for c in range(n_scc):
        if outgoing[c]:
            continue  # transient class
        comp = sorted(np.flatnonzero(labels == c))
        vec = np.zeros(n)
        if len(comp) == 1:
            vec[comp[0]] = 1.0
            gaps.append(np.inf)
        else:
            sub = M[np.ix_(comp, comp)]
            _, s, vt = np.linalg.svd(sub)
            if s[-1] > 1e-10 * s[0]:
                raise RateModelError(
                    f"recurrent class {comp} has no numerical kernel; "
                    f"smallest singular values {s[-2:]}"
                )
            local = vt[-1]
            if local.sum() < 0:
                local = -local
            if local.min() < -1e-9:
                raise RateModelError(
                    f"steady-state vector not sign-definite on class {comp}; "
                    f"singular-value gap {s[-2] / max(s[-1], 1e-300):.2e}"
                )
            local = np.clip(local, 0.0, None)
            vec[comp] = local / local.sum()
            gaps.append(float(s[-2] / max(s[-1], 1e-300)))
        vectors.append(vec)
        components.append(list(comp))

    return SteadyState(
        vectors=vectors,
        components=components,
        singular_value_gap=float(min(gaps)) if gaps else np.inf,
    )
