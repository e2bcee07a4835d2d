"""Full state-preparation schemes: pulse sequences, cycles, convergence studies.

A preparation cycle alternates microwave transfer groups with optical pumping
phases; each pumping phase is a train of short pump pulses interleaved with
repump pulses (lasers strictly sequential, so no two coherent drives ever act
at once). The cycle is compiled once into a single column-stochastic matrix,
making long convergence runs cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import microwave as mw
from . import rates
from .rates import LaserBeam, Polarization, linear_polarization, polarization_from_weights
from .species import FieldConfig, SpeciesData, load_named_species
from .structure import ClockPoint, StateRegistry, clock_field, electric_dipole_amplitude

TWO_PI = 2.0 * math.pi

CONVERGENCE_THRESHOLD = 1e-7
MAX_CYCLES = 100_000


class SchemeError(RuntimeError):
    pass


@dataclass(frozen=True)
class PulseStep:
    """One sequential step of a cycle: a laser pulse or a microwave operation."""

    kind: str                          # "laser" or "microwave"
    duration: float
    beams: tuple[LaserBeam, ...] = ()
    mw_operation: mw.MwOperation | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind == "laser" and self.duration <= 0:
            raise SchemeError("laser steps need a positive duration")
        if self.kind not in ("laser", "microwave"):
            raise SchemeError(f"unknown step kind {self.kind!r}")


@dataclass
class PulseSequence:
    """Ordered steps composing one cycle; steps are strictly sequential."""

    steps: list[PulseStep]
    dead_time: float = 0.0

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.steps) + self.dead_time

    def compile(self, registry: StateRegistry) -> np.ndarray:
        """One cycle as a single stochastic matrix over the registry."""
        C = np.eye(len(registry))
        cache: dict[tuple, np.ndarray] = {}
        for step in self.steps:
            if step.kind == "microwave":
                M = step.mw_operation.matrix
            else:
                key = (step.beams, step.duration)
                if key not in cache:
                    R = rates.build_rate_matrix(list(step.beams), registry)
                    cache[key] = rates.propagator(R, step.duration)
                M = cache[key]
            C = M @ C
        return C


@dataclass
class SimulationTrace:
    errors: np.ndarray          # target-state error after each cycle
    times: np.ndarray           # cumulative experiment time after each cycle
    converged: bool
    occupations: np.ndarray     # final occupation vector

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise SchemeError("cumulative time must be strictly increasing")


@dataclass
class SchemeResult:
    steady_state_error: float
    cycles: int
    total_duration: float
    trace: SimulationTrace


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class SchemeConfig:
    """Everything needed to assemble a frequency-selective preparation run.

    Field defaults follow the nominal operating point: pump at s = 0.05 in
    150 ns pulses, power-broadened repump, 1 MHz microwave Rabi frequency
    with pi pulses, two pump trains per cycle (one after each microwave
    group).
    """

    species: SpeciesData
    target: tuple[int, float]
    field_tesla: float | None = None      # None: use the species clock field
    pump_transition: str | None = None    # None: lowest-wavelength S -> P line
    pump_s: float = 0.05
    pump_pulse: float = 150e-9
    pump_theta_deg: float | None = 90.0   # linear polarization angle
    pump_weights: tuple[float, float, float] | None = None
    pulses_per_train: int = 36
    repump_s: float = 10.0
    repump_pulse: float = 0.6e-6
    final_repump_pulse: float = 2.0e-6
    mw_rabi: float = mw.DEFAULT_RABI
    mw_weak_factor: float = mw.DEFAULT_WEAK_FACTOR
    mw_bridge_factor: float = mw.DEFAULT_BRIDGE_FACTOR
    mw_ideal: bool = True
    dead_time: float = 0.0
    convergence_threshold: float = CONVERGENCE_THRESHOLD
    max_cycles: int = MAX_CYCLES

    def polarization(self) -> Polarization:
        if self.pump_weights is not None:
            return polarization_from_weights(*self.pump_weights)
        return linear_polarization(self.pump_theta_deg)


def default_config(species_name: str = "ca43", target=(4, 4.0), **kw) -> SchemeConfig:
    species = load_named_species(species_name)
    return SchemeConfig(species=species, target=target, **kw)


def _pump_transition_name(config: SchemeConfig) -> str:
    if config.pump_transition:
        return config.pump_transition
    ground = next(
        name for name, lv in config.species.levels.items() if math.isinf(lv.lifetime)
    )
    candidates = [
        tr for tr in config.species.optical_transitions.values()
        if tr.lower == ground and config.species.levels[tr.upper].J == 0.5
        and not math.isinf(config.species.levels[tr.upper].lifetime)
    ]
    if not candidates:
        raise SchemeError(f"{config.species.name}: no ground -> P1/2 pump transition")
    return min(candidates, key=lambda tr: tr.wavelength_nm).name


_CLOCK_MEMO: dict[str, ClockPoint | None] = {}


def resolve_field(config: SchemeConfig) -> float:
    if config.field_tesla is not None:
        return config.field_tesla
    if config.species.name not in _CLOCK_MEMO:
        _CLOCK_MEMO[config.species.name] = species_clock_point(config.species)
    cp = _CLOCK_MEMO[config.species.name]
    if cp is None:
        raise SchemeError(f"{config.species.name}: no clock point found")
    return cp.B_tesla


def species_clock_point(
    species: SpeciesData, B_max: float = 0.2
) -> ClockPoint | None:
    """Lowest-field Delta-M = 0 clock transition away from M=0 <-> M=0.

    Pairs with Delta-M = +-1 also develop low-field clock points, but the
    operating points of interest are the first field-insensitive hyperfine
    qubit transitions with M != 0, which are Delta-M = 0.
    """
    ground_name = next(n for n, lv in species.levels.items() if math.isinf(lv.lifetime))
    level = species.level(ground_name)
    I = species.nuclear_spin
    F_hi, F_lo = round(I + 0.5), round(I - 0.5)
    best: ClockPoint | None = None
    for M in np.arange(-F_lo, F_lo + 1):
        if M == 0:
            continue
        cp = clock_field(
            level, species, (F_lo, float(M)), (F_hi, float(M)),
            search_range=(1e-4, B_max), grid_points=800,
        )
        if cp and (best is None or cp.B_tesla < best.B_tesla):
            best = cp
    return best


# ---------------------------------------------------------------------------
# Scheme assembly
# ---------------------------------------------------------------------------

@dataclass
class CompiledScheme:
    registry: StateRegistry
    sequence: PulseSequence
    cycle_matrix: np.ndarray
    target_index: int
    pump_index: int
    field_tesla: float

    def uniform_ground(self) -> np.ndarray:
        p = np.zeros(len(self.registry))
        idx = self.registry.indices_of_level(self.registry.ground_level())
        p[idx] = 1.0 / len(idx)
        return p

    def state_vector(self, F: int, M: float) -> np.ndarray:
        p = np.zeros(len(self.registry))
        p[self.registry.index(self.registry.ground_level(), F, M)] = 1.0
        return p


def _fssp_registry(config: SchemeConfig, field: float) -> tuple[StateRegistry, str, list]:
    species = config.species
    pump_name = _pump_transition_name(config)
    pump_tr = species.transition(pump_name)
    levels = [pump_tr.lower, pump_tr.upper]
    repumps = [
        tr for tr in species.optical_transitions.values()
        if tr.upper == pump_tr.upper and tr.lower != pump_tr.lower
    ]
    levels += [tr.lower for tr in repumps]
    registry = StateRegistry(species, FieldConfig(field), levels)
    return registry, pump_name, repumps


def _pump_beam(config: SchemeConfig, registry: StateRegistry, pump_name: str) -> LaserBeam:
    species = config.species
    tr = species.transition(pump_name)
    I = species.nuclear_spin
    F_t, F_p = round(I + 0.5), round(I - 0.5)
    sgn = 1 if config.target[1] > 0 else -1
    anchor_lower = (F_p, float(sgn * F_p))
    anchor_upper = (F_t, float(sgn * F_t))  # P-level stretch
    return LaserBeam(
        transition=pump_name,
        anchor_lower=anchor_lower,
        anchor_upper=anchor_upper,
        s=config.pump_s,
        polarization=config.polarization(),
    )


def _repump_beams(config: SchemeConfig, registry: StateRegistry, repumps: list) -> list[LaserBeam]:
    """Power-broadened repump, modeled as a comb of mutually incoherent tones.

    At intermediate field the metastable manifold spans around a GHz of
    Zeeman structure, far beyond the natural linewidth; a physically
    power-broadened beam covers it, but this model's lineshape carries no
    saturation broadening. The repump's role is only to clear the manifold
    within a pulse, so each dressed state gets one resonant tone at the
    configured intensity, anchored on its strongest partner transition.
    """
    pol = polarization_from_weights(1 / 3, 1 / 3, 1 / 3)
    beams = []
    for tr in repumps:
        lower_states = [registry.states[i] for i in registry.indices_of_level(tr.lower)]
        upper_states = [registry.states[i] for i in registry.indices_of_level(tr.upper)]
        for low in lower_states:
            best, best_d2 = None, 0.0
            for up in upper_states:
                for q in (-1, 0, 1):
                    d2 = electric_dipole_amplitude(low, up, q) ** 2
                    if d2 > best_d2:
                        best, best_d2 = up, d2
            if best is None:
                continue
            beams.append(LaserBeam(
                transition=tr.name,
                anchor_lower=(low.F, low.M),
                anchor_upper=(best.F, best.M),
                s=config.repump_s,
                polarization=pol,
                family=f"repump-comb-{tr.name}",
            ))
    return beams


def _pump_train_steps(
    config: SchemeConfig, pump: LaserBeam, repumps: list[LaserBeam], final: bool
) -> list[PulseStep]:
    """N short pump pulses, each followed by a repump pulse (sequential)."""
    steps = []
    for k in range(config.pulses_per_train):
        steps.append(PulseStep("laser", config.pump_pulse, (pump,), label="pump"))
        if repumps:
            last = final and k == config.pulses_per_train - 1
            steps.append(PulseStep(
                "laser",
                config.final_repump_pulse if last else config.repump_pulse,
                tuple(repumps), label="repump",
            ))
    if not repumps and final:
        pass  # species without metastable D levels need no repump
    return steps


def build_fssp(config: SchemeConfig) -> CompiledScheme:
    """Compile the frequency-selective scheme into one cycle matrix.

    One cycle runs [MW group A, pump train, bridge tone, pump train,
    MW group B]: group A never touches the pump state, so deliveries from
    the preceding group B survive into the first pump train; the bridge
    empties the Delta-M = 0 doorway between the trains.
    """
    field = resolve_field(config)
    registry, pump_name, repump_trs = _fssp_registry(config, field)
    ground = registry.ground_level()

    plan = mw.fssp_tone_plan(
        registry, config.target, config.mw_rabi,
        config.mw_weak_factor, config.mw_bridge_factor,
    )
    ops = mw.mw_operations_from_plan(plan, registry, ideal=config.mw_ideal)
    pump = _pump_beam(config, registry, pump_name)
    repumps = _repump_beams(config, registry, repump_trs)

    steps: list[PulseStep] = [
        PulseStep("microwave", ops["A"].duration, mw_operation=ops["A"], label="mw A"),
        *_pump_train_steps(config, pump, repumps, final=False),
        PulseStep("microwave", ops["BRIDGE"].duration, mw_operation=ops["BRIDGE"], label="mw bridge"),
        *_pump_train_steps(config, pump, repumps, final=True),
        PulseStep("microwave", ops["B"].duration, mw_operation=ops["B"], label="mw B"),
    ]
    seq = PulseSequence(steps, dead_time=config.dead_time)
    return CompiledScheme(
        registry=registry,
        sequence=seq,
        cycle_matrix=seq.compile(registry),
        target_index=registry.index(ground, *config.target),
        pump_index=registry.index(ground, *plan.pump),
        field_tesla=field,
    )


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _iterate(
    scheme: CompiledScheme,
    p0: np.ndarray,
    max_cycles: int,
    threshold: float | None,
    error_floor: float = 0.0,
) -> SimulationTrace:
    C = scheme.cycle_matrix
    dt = scheme.sequence.duration
    p = np.array(p0, dtype=float)
    errors, times = [], []
    converged = False
    prev = 1.0 - p[scheme.target_index]
    for k in range(1, max_cycles + 1):
        p = C @ p
        err = 1.0 - p[scheme.target_index]
        errors.append(err)
        times.append(k * dt)
        if threshold is not None and k > 2 and abs(prev - err) < threshold:
            converged = True
            break
        if err <= error_floor:
            converged = True
            break
        prev = err
    return SimulationTrace(
        errors=np.array(errors), times=np.array(times),
        converged=converged, occupations=p,
    )


def run_fssp(
    config: SchemeConfig,
    initial: np.ndarray | tuple[int, float] | None = None,
    max_cycles: int = 2000,
    scheme: CompiledScheme | None = None,
) -> SchemeResult:
    """Run a fixed number of cycles (or to convergence if it happens sooner)."""
    scheme = scheme or build_fssp(config)
    p0 = _initial_vector(scheme, initial)
    trace = _iterate(scheme, p0, max_cycles, config.convergence_threshold)
    return _result(trace)


def run_to_convergence(
    config: SchemeConfig,
    initial: np.ndarray | tuple[int, float] | None = None,
    scheme: CompiledScheme | None = None,
) -> SchemeResult:
    """Iterate until the error reduction per cycle drops below the threshold."""
    scheme = scheme or build_fssp(config)
    p0 = _initial_vector(scheme, initial)
    trace = _iterate(scheme, p0, config.max_cycles, config.convergence_threshold)
    if not trace.converged:
        raise SchemeError(
            f"no convergence within {config.max_cycles} cycles "
            f"(last error {trace.errors[-1]:.3e})"
        )
    return _result(trace)


def _result(trace: SimulationTrace) -> SchemeResult:
    return SchemeResult(
        steady_state_error=float(trace.errors[-1]),
        cycles=len(trace.errors),
        total_duration=float(trace.times[-1]),
        trace=trace,
    )


def _initial_vector(scheme: CompiledScheme, initial) -> np.ndarray:
    if initial is None:
        return scheme.uniform_ground()
    if isinstance(initial, np.ndarray):
        rates.validate_occupations(initial)
        return initial
    return scheme.state_vector(*initial)


def prepare_from_all_states(
    config: SchemeConfig, scheme: CompiledScheme | None = None, cap: int = 500
) -> dict[tuple[int, float], int | None]:
    """First cycle at which the target error drops below 1/e, per initial state."""
    scheme = scheme or build_fssp(config)
    ground = scheme.registry.ground_level()
    table: dict[tuple[int, float], int | None] = {}
    threshold = 1.0 / math.e
    for s in scheme.registry.states:
        if s.level != ground:
            continue
        p = scheme.state_vector(s.F, s.M)
        if 1.0 - p[scheme.target_index] < threshold:
            table[(s.F, s.M)] = 0
            continue
        count = None
        for k in range(1, cap + 1):
            p = scheme.cycle_matrix @ p
            if 1.0 - p[scheme.target_index] < threshold:
                count = k
                break
        table[(s.F, s.M)] = count
    return table


def sweep_intensity(
    config: SchemeConfig, s_values: list[float]
) -> list[dict]:
    """Convergence error and duration for each pump intensity."""
    rows = []
    for s in s_values:
        cfg = replace(config, pump_s=s)
        try:
            res = run_to_convergence(cfg)
            rows.append({
                "s": s,
                "steady_state_error": res.steady_state_error,
                "cycles": res.cycles,
                "duration_s": res.total_duration,
                "error": "",
            })
        except Exception as exc:  # per-point failures recorded, sweep continues
            rows.append({
                "s": s, "steady_state_error": math.nan, "cycles": 0,
                "duration_s": math.nan, "error": str(exc),
            })
    return rows


# Stretch-state targets whose Zeeman shift reduces the pump detuning (the
# side the published per-species errors correspond to; the published labels
# for Mg and Ba carry the opposite M-sign convention).
DEFAULT_SPECIES_TARGETS = {
    "Ca43": (4, 4.0),
    "Mg25": (3, 3.0),
    "Ba137": (2, -2.0),
}


def cross_species_errors(
    species_names: list[str],
    targets: dict[str, tuple[int, float]] | None = None,
    species_dir=None,
    **config_overrides,
) -> list[dict]:
    """Steady-state preparation error per species at its own clock field."""
    rows = []
    for name in species_names:
        try:
            species = load_named_species(name, species_dir)
            target = (targets or {}).get(species.name) or DEFAULT_SPECIES_TARGETS[species.name]
            cfg = SchemeConfig(species=species, target=target, **config_overrides)
            field = resolve_field(cfg)
            res = run_to_convergence(cfg)
            ground = next(n for n, lv in species.levels.items() if math.isinf(lv.lifetime))
            splitting = abs(species.level(ground).hyperfine_A) * (species.nuclear_spin + 0.5) / TWO_PI
            rows.append({
                "species": species.name,
                "field_mT": field * 1e3,
                "target_F": target[0], "target_M": target[1],
                "hyperfine_splitting_Hz": splitting,
                "steady_state_error": res.steady_state_error,
                "cycles": res.cycles,
                "duration_s": res.total_duration,
                "error": "",
            })
        except Exception as exc:
            rows.append({
                "species": name, "field_mT": math.nan, "target_F": 0, "target_M": 0,
                "hyperfine_splitting_Hz": math.nan, "steady_state_error": math.nan,
                "cycles": 0, "duration_s": math.nan, "error": str(exc),
            })
    return rows


# ---------------------------------------------------------------------------
# Polarisation-selective scheme
# ---------------------------------------------------------------------------

def _impurity_polarization(epsilon: float, sgn: int) -> Polarization:
    """sigma^+ light with intensity fraction epsilon in the wrong components,
    split evenly between the opposite circular and the pi component."""
    if not 0.0 <= epsilon <= 1.0:
        raise SchemeError("polarization impurity must lie in [0, 1]")
    good = 1.0 - epsilon
    w = (epsilon / 2, epsilon / 2, good) if sgn > 0 else (good, epsilon / 2, epsilon / 2)
    return polarization_from_weights(*w)


def _sigma_comb(
    config: SchemeConfig,
    registry: StateRegistry,
    pump_name: str,
    lower_labels: list[tuple[int, float]],
    pol: Polarization,
    sgn: int,
    family: str,
) -> list[LaserBeam]:
    """One tone per listed ground state, resonant with its strongest
    sigma^(sign) transition. Models modulated pump light whose tones cover
    the Zeeman-spread manifold; tones of one source are mutually incoherent
    on rate-equation timescales."""
    species = config.species
    tr = species.transition(pump_name)
    uppers = [registry.states[i] for i in registry.indices_of_level(tr.upper)]
    ground = registry.ground_level()
    beams = []
    for label in lower_labels:
        low = registry.state(ground, *label)
        best, best_d2 = None, 0.0
        for up in uppers:
            d2 = electric_dipole_amplitude(low, up, sgn) ** 2
            if d2 > best_d2:
                best, best_d2 = up, d2
        if best is None:
            continue
        beams.append(LaserBeam(
            transition=pump_name, anchor_lower=label,
            anchor_upper=(best.F, best.M), s=config.pump_s,
            polarization=pol, family=family,
        ))
    return beams


def build_pssp(config: SchemeConfig, epsilon: float) -> CompiledScheme:
    """Polarisation-selective pumping: carrier and sideband pulses, sequential.

    The carrier comb empties the pump manifold (F = I - 1/2), the modulation
    sideband comb empties the stretch manifold except the target; the target
    is exactly dark only for pure circular polarization.
    """
    field = resolve_field(config)
    registry, pump_name, repump_trs = _fssp_registry(config, field)
    species = config.species
    I = species.nuclear_spin
    F_t, F_p = round(I + 0.5), round(I - 0.5)
    sgn = 1 if config.target[1] > 0 else -1
    pol = _impurity_polarization(epsilon, sgn)

    carrier = _sigma_comb(
        config, registry, pump_name,
        [(F_p, float(M)) for M in np.arange(-F_p, F_p + 1)],
        pol, sgn, "carrier-comb",
    )
    sideband = _sigma_comb(
        config, registry, pump_name,
        [(F_t, float(M)) for M in np.arange(-F_t, F_t + 1)
         if (F_t, float(M)) != config.target],
        pol, sgn, "sideband-comb",
    )
    repumps = _repump_beams(config, registry, repump_trs)

    pulse = max(config.pump_pulse, 1e-6)  # continuous-style pumping segments
    steps = [
        PulseStep("laser", pulse, tuple(carrier), label="carrier"),
        *( [PulseStep("laser", config.repump_pulse, tuple(repumps), label="repump")] if repumps else [] ),
        PulseStep("laser", pulse, tuple(sideband), label="sideband"),
        *( [PulseStep("laser", config.repump_pulse, tuple(repumps), label="repump")] if repumps else [] ),
    ]
    seq = PulseSequence(steps, dead_time=config.dead_time)
    return CompiledScheme(
        registry=registry, sequence=seq, cycle_matrix=seq.compile(registry),
        target_index=registry.index(registry.ground_level(), *config.target),
        pump_index=registry.index(registry.ground_level(), F_p, float(sgn * F_p)),
        field_tesla=field,
    )


def build_pssp_correction(config: SchemeConfig, epsilon: float) -> CompiledScheme:
    """Correction stage: carrier only (sideband off) plus transfer pulses out
    of the two stretch-manifold states closest to the target."""
    field = resolve_field(config)
    registry, pump_name, repump_trs = _fssp_registry(config, field)
    species = config.species
    I = species.nuclear_spin
    F_t, F_p = round(I + 0.5), round(I - 0.5)
    sgn = 1 if config.target[1] > 0 else -1
    pol = _impurity_polarization(epsilon, sgn)

    carrier = _sigma_comb(
        config, registry, pump_name,
        [(F_p, float(M)) for M in np.arange(-F_p, F_p + 1)],
        pol, sgn, "carrier-comb",
    )
    repumps = _repump_beams(config, registry, repump_trs)

    tones = []
    for k in (1, 2):
        M = float(sgn * (F_t - k))
        tones.append(mw.MicrowaveTone(
            state_a=(F_t, M), state_b=(F_p, M),
            rabi=config.mw_rabi, duration=math.pi / config.mw_rabi,
        ))
    transfer = mw.build_mw_operation([tones[0]], registry, ideal=config.mw_ideal).then(
        mw.build_mw_operation([tones[1]], registry, ideal=config.mw_ideal)
    )

    pulse = max(config.pump_pulse, 1e-6)
    steps = [
        PulseStep("microwave", transfer.duration, mw_operation=transfer, label="transfer"),
        PulseStep("laser", pulse, tuple(carrier), label="carrier"),
        *( [PulseStep("laser", config.repump_pulse, tuple(repumps), label="repump")] if repumps else [] ),
    ]
    seq = PulseSequence(steps, dead_time=config.dead_time)
    return CompiledScheme(
        registry=registry, sequence=seq, cycle_matrix=seq.compile(registry),
        target_index=registry.index(registry.ground_level(), *config.target),
        pump_index=registry.index(registry.ground_level(), F_p, float(sgn * F_p)),
        field_tesla=field,
    )


def run_pssp(
    config: SchemeConfig,
    epsilon: float,
    initial: np.ndarray | tuple[int, float] | None = None,
    max_cycles: int = 3000,
    correction_cycles: int = 50,
) -> SchemeResult:
    """Pump to convergence with the two-tone stage, then apply the correction
    stage; the reported trace concatenates both."""
    main = build_pssp(config, epsilon)
    p0 = _initial_vector(main, initial)
    t1 = _iterate(main, p0, max_cycles, config.convergence_threshold, error_floor=1e-9)

    corr = build_pssp_correction(config, epsilon)
    t2 = _iterate(corr, t1.occupations, correction_cycles, None)

    errors = np.concatenate([t1.errors, t2.errors])
    times = np.concatenate([t1.times, t1.times[-1] + t2.times])
    trace = SimulationTrace(
        errors=errors, times=times, converged=t1.converged,
        occupations=t2.occupations,
    )
    return _result(trace)


# ---------------------------------------------------------------------------
# Alternative (manifold-pumping) scheme at low and high field
# ---------------------------------------------------------------------------

@dataclass
class AlternativeConfig:
    """Reconstruction of the manifold-pumping scheme: multi-tone pumping of
    the lower-F manifold plus pi pulses returning every stretch-manifold
    state except the target. Tones of the pump laser are mutually incoherent
    comb lines re-anchored on each pumped state at the configured field."""

    pump_s: float = 0.05
    pump_pulse: float = 3e-6
    mw_rabi_low: float = TWO_PI * 15e3
    mw_rabi_high: float = mw.DEFAULT_RABI
    low_field_tesla: float = 0.5e-3
    max_cycles: int = 3000


def build_alternative(
    config: SchemeConfig, regime: str, alt: AlternativeConfig | None = None
) -> CompiledScheme:
    alt = alt or AlternativeConfig()
    if regime == "low":
        field = alt.low_field_tesla
        rabi = alt.mw_rabi_low
    elif regime == "high":
        field = resolve_field(config)
        rabi = alt.mw_rabi_high
    else:
        raise SchemeError("regime must be 'low' or 'high'")

    registry, pump_name, repump_trs = _fssp_registry(config, field)
    species = config.species
    I = species.nuclear_spin
    F_t, F_p = round(I + 0.5), round(I - 0.5)
    sgn = 1 if config.target[1] > 0 else -1

    pol = linear_polarization(90.0)
    beams = []
    for M in np.arange(-F_p, F_p + 1):
        beams.append(LaserBeam(
            transition=pump_name,
            anchor_lower=(F_p, float(M)),
            anchor_upper=(F_t, float(M + sgn)),
            s=alt.pump_s, polarization=pol, family="pump-comb",
        ))
    repumps = _repump_beams(config, registry, repump_trs)

    # Return pulses: every stretch-manifold state except the target.
    tonesets: list[list[mw.MicrowaveTone]] = [[], []]
    for M in np.arange(-F_t, F_t + 1):
        if (F_t, float(M)) == config.target:
            continue
        if abs(M) <= F_p:
            tonesets[0].append(mw.MicrowaveTone(
                state_a=(F_t, float(M)), state_b=(F_p, float(M)),
                rabi=rabi, duration=math.pi / rabi,
            ))
        else:
            tonesets[1].append(mw.MicrowaveTone(  # opposite stretch state
                state_a=(F_t, float(M)), state_b=(F_p, float(M + sgn)),
                rabi=rabi, duration=math.pi / rabi,
            ))
    returns = mw.build_mw_operation(tonesets[0], registry, ideal=config.mw_ideal)
    if tonesets[1]:
        returns = returns.then(
            mw.build_mw_operation(tonesets[1], registry, ideal=config.mw_ideal)
        )

    steps = [
        PulseStep("laser", alt.pump_pulse, tuple(beams), label="pump comb"),
        *( [PulseStep("laser", config.repump_pulse, tuple(repumps), label="repump")] if repumps else [] ),
        PulseStep("microwave", returns.duration, mw_operation=returns, label="return"),
        PulseStep("laser", alt.pump_pulse, tuple(beams), label="pump comb"),
        *( [PulseStep("laser", config.final_repump_pulse, tuple(repumps), label="repump")] if repumps else [] ),
    ]
    seq = PulseSequence(steps, dead_time=config.dead_time)
    return CompiledScheme(
        registry=registry, sequence=seq, cycle_matrix=seq.compile(registry),
        target_index=registry.index(registry.ground_level(), *config.target),
        pump_index=registry.index(registry.ground_level(), F_p, float(sgn * F_p)),
        field_tesla=field,
    )


def run_alternative(
    config: SchemeConfig,
    regime: str,
    alt: AlternativeConfig | None = None,
    initial: np.ndarray | tuple[int, float] | None = None,
) -> SchemeResult:
    alt = alt or AlternativeConfig()
    scheme = build_alternative(config, regime, alt)
    p0 = _initial_vector(scheme, initial)
    trace = _iterate(scheme, p0, alt.max_cycles, config.convergence_threshold)
    return _result(trace)
