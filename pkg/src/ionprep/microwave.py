"""Microwave population transfer within the ground manifold.

Tones drive hyperfine transitions between dressed ground states. A tone
resonant on its target also drives the near-degenerate partner transition
(the M -> M+1 / M+1 -> M pair, split by twice the nuclear Zeeman shift) with
its own detuning and matrix-element ratio. Coherences are dropped between
operations: each microwave step becomes a stochastic transfer matrix acting
on occupation probabilities.

Off-resonant action on every untouched state is kept as a per-state leakage
probability computed from the two-level Rabi formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .structure import StateRegistry, magnetic_dipole_element

TWO_PI = 2.0 * math.pi

# A tone coupling with peak transfer (Omega/W)^2 at least this large is a
# driven two-state block; anything weaker is accumulated as leakage.
BLOCK_PEAK_MIN = 0.02

DEFAULT_RABI = TWO_PI * 1.0e6       # rad/s, on the target transition
DEFAULT_WEAK_FACTOR = 4.0           # weak tones: duration x4, amplitude /4
DEFAULT_BRIDGE_FACTOR = 16.0        # the Delta-M=0 bridge sits closest to the
                                    # stretch transitions and is driven softest
DEFAULT_PUMP_PAIR_FACTOR = 8.0      # the pump-adjacent pair is calibrated on
                                    # its weaker member (the transition that
                                    # hands population to the pump state), at
                                    # low amplitude to bound off-resonant
                                    # driving of the stretch transition


class MicrowaveError(RuntimeError):
    pass


class CoverageError(MicrowaveError):
    """Some ground state has no microwave path to the pump state."""


def rabi_transfer_probability(omega: float, delta: float, t: float) -> float:
    """Two-level transfer probability (Omega^2/W^2) sin^2(W t / 2)."""
    if omega < 0:
        raise ValueError("Rabi frequency must be >= 0")
    w2 = omega * omega + delta * delta
    if w2 == 0.0:
        return 0.0
    w = math.sqrt(w2)
    return (omega * omega / w2) * math.sin(0.5 * w * t) ** 2


@dataclass(frozen=True)
class MicrowaveTone:
    """One frequency tone, calibrated on a target ground-manifold transition."""

    state_a: tuple[int, float]     # (F, M)
    state_b: tuple[int, float]
    rabi: float                    # angular Rabi frequency on the target
    duration: float                # seconds
    detuning_hz: float = 0.0       # tone offset from the target transition

    def __post_init__(self):
        if self.rabi < 0 or self.duration < 0:
            raise ValueError("tone Rabi frequency and duration must be >= 0")


@dataclass
class MwOperation:
    """Stochastic transfer matrix for one or more sequential tone sets."""

    tone_sets: tuple[tuple[MicrowaveTone, ...], ...]
    matrix: np.ndarray             # full registry dimension, identity off the ground level
    duration: float

    def then(self, other: "MwOperation") -> "MwOperation":
        return MwOperation(
            tone_sets=self.tone_sets + other.tone_sets,
            matrix=other.matrix @ self.matrix,
            duration=self.duration + other.duration,
        )

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p


def _ground_m1(registry: StateRegistry) -> np.ndarray:
    """Cached |M1| matrix over registry indices, ground level only."""
    cache = registry.__dict__.setdefault("_mw_cache", {})
    if "m1" not in cache:
        ground = registry.ground_level()
        idx = registry.indices_of_level(ground)
        m1 = np.zeros((len(registry), len(registry)))
        for a in idx:
            for b in idx:
                if a >= b:
                    continue
                el = magnetic_dipole_element(registry.states[a], registry.states[b])
                m1[a, b] = m1[b, a] = abs(el)
        cache["m1"] = m1
    return cache["m1"]


def build_mw_operation(
    tones: list[MicrowaveTone],
    registry: StateRegistry,
    ideal: bool = False,
    block_peak_min: float = BLOCK_PEAK_MIN,
) -> MwOperation:
    """Transfer matrix for a set of simultaneously driven tones.

    Every tone is expanded into the two-state blocks it drives appreciably
    (its target plus any near-degenerate partner); blocks must be pairwise
    disjoint or the step is refused (a simultaneous chain of couplings is
    not representable by classical rates). ``ideal`` replaces all block
    transfer probabilities by exact swaps; leakage on untouched states is
    applied in either mode.
    """
    ground = registry.ground_level()
    gidx = registry.indices_of_level(ground)
    m1 = _ground_m1(registry)
    energies = registry.energies

    n = len(registry)
    blocks: dict[tuple[int, int], float] = {}
    block_owner: dict[tuple[int, int], str] = {}
    leakage: dict[tuple[int, int], float] = {}

    for tone in tones:
        ia = registry.index(ground, *tone.state_a)
        ib = registry.index(ground, *tone.state_b)
        mu_t = m1[ia, ib]
        if mu_t == 0.0:
            raise MicrowaveError(
                f"tone target {tone.state_a} <-> {tone.state_b} is M1-forbidden"
            )
        omega_target = abs(energies[ib] - energies[ia])
        omega_tone = omega_target + TWO_PI * tone.detuning_hz

        for u in gidx:
            for v in gidx:
                if u >= v or m1[u, v] == 0.0:
                    continue
                omega_uv = tone.rabi * m1[u, v] / mu_t
                delta = omega_tone - abs(energies[v] - energies[u])
                peak = omega_uv ** 2 / (omega_uv ** 2 + delta ** 2) if omega_uv else 0.0
                p = rabi_transfer_probability(omega_uv, delta, tone.duration)
                if peak >= block_peak_min:
                    key = (u, v)
                    if key in blocks:
                        raise MicrowaveError(
                            f"transition {registry.states[u].label()} <-> "
                            f"{registry.states[v].label()} is driven by two tones at once"
                        )
                    blocks[key] = 1.0 if ideal else p
                    block_owner[key] = f"{tone.state_a}->{tone.state_b}"
                else:
                    leakage[(u, v)] = leakage.get((u, v), 0.0) + p

    # Lambda guard: blocks must not share states.
    seen: dict[int, tuple[int, int]] = {}
    for (u, v) in blocks:
        for x in (u, v):
            if x in seen:
                raise MicrowaveError(
                    f"state {registry.states[x].label()} belongs to two simultaneous "
                    f"blocks {seen[x]} and {(u, v)}; three or more states would be "
                    "coupled by distinct drives"
                )
            seen[x] = (u, v)

    T = np.eye(n)
    for (u, v), p in blocks.items():
        T[u, u] = 1.0 - p
        T[v, v] = 1.0 - p
        T[u, v] = p
        T[v, u] = p

    # Leakage between states not inside any block, applied multiplicatively.
    blocked = set(seen)
    L = np.eye(n)
    for (u, v), p in leakage.items():
        if u in blocked or v in blocked or p == 0.0:
            continue
        p = min(p, 1.0)
        L[u, u] -= p
        L[v, v] -= p
        L[u, v] += p
        L[v, u] += p

    duration = max((t.duration for t in tones), default=0.0)
    return MwOperation(tone_sets=(tuple(tones),), matrix=L @ T, duration=duration)


def identity_operation(registry: StateRegistry) -> MwOperation:
    return MwOperation(tone_sets=(), matrix=np.eye(len(registry)), duration=0.0)


# ---------------------------------------------------------------------------
# Default frequency-selective tone plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TonePlan:
    """Reconstructed tone plan funnelling every ground state to the pump state.

    ``groups`` maps group name ('A', 'BRIDGE', 'B') to an ordered list of
    simultaneous tone sets. The scheduler runs A, a pumping phase, the
    bridge, another pumping phase, then B; B ends with the conveyor rungs
    that hand population to the pump state so the following A group (which
    never touches the pump state) leaves deliveries in place.

    This is one consistent reconstruction of the published driving scheme:
    the near-degenerate pair set is forced by the no-Lambda rule, while the
    bridge tone (the single Delta-M = 0 transition joining the two
    Delta-M = +-1 conveyor chains), its scheduling slot, and the weak-tone
    membership are design choices recorded here, not measurements.
    """

    target: tuple[int, float]
    pump: tuple[int, float]
    groups: dict[str, list[list[MicrowaveTone]]]
    transitions: list[tuple[tuple[int, float], tuple[int, float]]]

    def all_tones(self):
        for sets in self.groups.values():
            for toneset in sets:
                yield from toneset


def fssp_tone_plan(
    registry: StateRegistry,
    target: tuple[int, float],
    rabi: float = DEFAULT_RABI,
    weak_factor: float = DEFAULT_WEAK_FACTOR,
    bridge_factor: float = DEFAULT_BRIDGE_FACTOR,
    pump_pair_factor: float = DEFAULT_PUMP_PAIR_FACTOR,
    rabi_overrides: dict[tuple[tuple[int, float], tuple[int, float]], float] | None = None,
) -> TonePlan:
    """Build the default two-group tone plan for a stretch-state target.

    Pair tones sit on the near-degenerate transition pairs; their amplitude
    is calibrated so the stronger pair member performs a pi pulse. The edge
    tone drains the opposite stretch state. The bridge is the single
    Delta-M = 0 tone next to the pump state; it joins the conveyor chain
    that has no direct transition into the pump state. It is the driven
    tone closest in frequency to the forbidden stretch transition, so it is
    driven softest (``bridge_factor``). Weak tones run proportionally
    longer at lower amplitude, keeping every tone a pi pulse on its target.
    """
    species = registry.species
    ground = registry.ground_level()
    I = species.nuclear_spin
    F_t = round(I + 0.5)
    F_p = round(I - 0.5)
    if abs(abs(target[1]) - F_t) > 1e-9 or target[0] != F_t:
        raise MicrowaveError(f"target {target} is not a stretch state of F={F_t}")
    sgn = 1 if target[1] > 0 else -1
    pump = (F_p, float(sgn * F_p))

    m1 = _ground_m1(registry)

    def mu(a: tuple[int, float], b: tuple[int, float]) -> float:
        return m1[registry.index(ground, *a), registry.index(ground, *b)]

    ground_name = registry.ground_level()

    def freq(a, b) -> float:
        return abs(
            registry.energies[registry.index(ground_name, *b)]
            - registry.energies[registry.index(ground_name, *a)]
        )

    def make_tone(a, b, factor: float, partner=None) -> list[MicrowaveTone]:
        """One tone for a transition; for a near-degenerate pair, a tone
        centred between the members when its Rabi frequency covers the pair
        splitting, otherwise a resonant tone plus (if the partner would be
        left essentially undriven) a separate tone for the partner."""
        omega = rabi / factor
        if rabi_overrides:
            omega = rabi_overrides.get((a, b), rabi_overrides.get((b, a), omega))
        tones = []
        detuning = 0.0
        promote = False
        if partner is not None:
            split = freq(*partner) - freq(a, b)
            ratio = abs(mu(*partner) / mu(a, b))
            if omega >= 0.5 * abs(split):
                detuning = 0.5 * split / TWO_PI
            else:
                # Resonant on the target; if the tone leaves the partner
                # essentially undriven, the partner gets its own slot.
                peak = (omega * ratio) ** 2 / ((omega * ratio) ** 2 + split ** 2)
                promote = peak < BLOCK_PEAK_MIN
        tones.append(MicrowaveTone(
            state_a=a, state_b=b, rabi=omega, duration=math.pi / omega,
            detuning_hz=detuning,
        ))
        if promote:
            # Soft enough that it cannot drive the sibling transition back
            # (its coupling there stays below the block threshold).
            x_max = math.sqrt(BLOCK_PEAK_MIN / (1 - BLOCK_PEAK_MIN))
            omega_p = min(rabi, 0.9 * x_max * abs(split) / max(1.0 / ratio, 1e-6))
            tones.append(MicrowaveTone(
                state_a=partner[0], state_b=partner[1],
                rabi=omega_p, duration=math.pi / omega_p,
            ))
        return tones

    # Near-degenerate pairs, ordered from the pump-adjacent rung downwards.
    pair_Ms = [sgn * (F_p - 1 - k) for k in range(2 * F_p)]
    pairs = []
    for M in pair_Ms:
        t1 = ((F_p, float(M)), (F_t, float(M + sgn)))
        t2 = ((F_t, float(M)), (F_p, float(M + sgn)))
        # The tone is calibrated (resonant, pi) on the stronger member.
        strong_first = abs(mu(*t1)) >= abs(mu(*t2))
        pairs.append((t1, t2) if strong_first else (t2, t1))

    edge = ((F_t, float(-sgn * F_t)), (F_p, float(-sgn * F_p)))
    bridge = ((F_t, float(sgn * F_p)), (F_p, float(sgn * F_p)))

    # The single-transition tones (edge, bridge) run weak; they have no
    # near-degenerate partner whose transfer would be crippled by a lower
    # Rabi frequency. The pump-adjacent pair is special: its weaker member
    # is the transition that delivers population into the pump state, so it
    # is calibrated on that member (long, soft pulse); the stronger member
    # tolerates the resulting over-rotation.
    def pair_tones(k: int) -> list[MicrowaveTone]:
        if k == 0:
            member = pairs[0][0] if pump in pairs[0][0] else pairs[0][1]
            other = pairs[0][1] if member is pairs[0][0] else pairs[0][0]
            return make_tone(*member, factor=pump_pair_factor, partner=other)
        return make_tone(*pairs[k][0], factor=1.0, partner=pairs[k][1])

    def emit(tone_lists: list[list[MicrowaveTone]]) -> list[list[MicrowaveTone]]:
        """First tones run simultaneously; promoted partners get their own
        sequential slots (their frequencies sit within the primary tone's
        linewidth, so they cannot share a slot with it)."""
        sets = [[tl[0] for tl in tone_lists]]
        sets += [[extra] for tl in tone_lists for extra in tl[1:]]
        return sets

    # Group A: even rungs below the top pair, plus the edge tone.
    # Group B: the pump-adjacent pair first (its own slot; it shares states
    # with the odd rungs), then all odd rungs at once.
    groups: dict[str, list[list[MicrowaveTone]]] = {
        "A": emit([pair_tones(k) for k in range(2, len(pairs), 2)]
                  + [make_tone(*edge, factor=weak_factor)]),
        "BRIDGE": [[make_tone(*bridge, factor=bridge_factor)[0]]],
        "B": emit([pair_tones(0)]) + emit(
            [pair_tones(k) for k in range(1, len(pairs), 2)]
        ),
    }
    groups["B"] = [ts for ts in groups["B"] if ts]

    transitions = [t for pair in pairs for t in pair] + [edge, bridge]
    plan = TonePlan(target=target, pump=pump, groups=groups, transitions=transitions)
    _check_coverage(plan, registry)
    _check_disjoint_sets(plan)
    return plan


def _check_disjoint_sets(plan: TonePlan):
    for name, sets in plan.groups.items():
        for toneset in sets:
            seen: set[tuple[int, float]] = set()
            for tone in toneset:
                for st in (tone.state_a, tone.state_b):
                    if st in seen:
                        raise MicrowaveError(
                            f"group {name}: state {st} shared by simultaneous tones"
                        )
                    seen.add(st)


def _check_coverage(plan: TonePlan, registry: StateRegistry):
    """Every ground state except the target must reach the pump state."""
    ground = registry.ground_level()
    states = {(s.F, s.M) for s in registry.states if s.level == ground}
    adj: dict[tuple, set] = {s: set() for s in states}
    for a, b in plan.transitions:
        adj[a].add(b)
        adj[b].add(a)
    reached = {plan.pump}
    stack = [plan.pump]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in reached:
                reached.add(v)
                stack.append(v)
    missing = states - reached - {plan.target}
    if missing:
        raise CoverageError(
            f"states with no microwave path to the pump state {plan.pump}: "
            + ", ".join(str(m) for m in sorted(missing))
        )
    if any(plan.target in (a, b) for a, b in plan.transitions):
        raise MicrowaveError("tone plan touches the target state")


def default_fssp_mw_groups(
    registry: StateRegistry,
    target: tuple[int, float],
    ideal: bool = True,
    rabi: float = DEFAULT_RABI,
    weak_factor: float = DEFAULT_WEAK_FACTOR,
    bridge_factor: float = DEFAULT_BRIDGE_FACTOR,
    rabi_overrides: dict | None = None,
) -> tuple[MwOperation, MwOperation]:
    """The two alternating transfer groups of the default pulse scheme.

    The bridge tone, scheduled between the pumping phases, is returned as
    part of group B (its leading operation); build from ``fssp_tone_plan``
    directly when the full three-slot schedule is needed.
    """
    ops = mw_operations_from_plan(
        fssp_tone_plan(registry, target, rabi, weak_factor, bridge_factor, rabi_overrides),
        registry, ideal=ideal,
    )
    return ops["A"], ops["BRIDGE"].then(ops["B"])


def mw_operations_from_plan(
    plan: TonePlan, registry: StateRegistry, ideal: bool = True
) -> dict[str, MwOperation]:
    ops = {}
    for name, sets in plan.groups.items():
        op = identity_operation(registry)
        for toneset in sets:
            op = op.then(build_mw_operation(toneset, registry, ideal=ideal))
        ops[name] = op
    return ops
