"""
Combinability analysis of periodic time-sensitive flows

Decides whether a set of TS flows can share one egress port without
collisions and enumerates which packet index tuples collide, either as
conflicts of the first kind (CFK, equal start times) or of the second kind
(CSK, partially overlapping windows). A brute-force sweep over the
hyperperiod is kept alongside as an independent oracle.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from src.models.combinability.diophantine import (
    chain_solve,
    extended_bezout,
    gcd_periods,
    hyperperiod,
)
from src.models.flow.flow_model import Flow
from src.utils.exceptions import InvalidSpecError, NoSolutionError, PreconditionError
from src.utils.utils import checked_add, checked_mul, nonneg_mod, write_csv, write_json

logger = logging.getLogger(__name__)

CONFLICT_CSV_HEADER = ["time_start", "time_end", "kind", "flow_ids", "packet_indices"]


class ConflictKind(str, Enum):
    NONE = "None"
    CFK = "CFK"
    CSK = "CSK"


@dataclass(frozen=True)
class ConflictWitness:
    n: int
    m: int
    time: int


@dataclass(frozen=True)
class ConflictClass:
    """Pairwise verdict; the witness is the earliest colliding packet pair"""
    kind: ConflictKind
    witness: Optional[ConflictWitness] = None

    @property
    def conflicting(self) -> bool:
        return self.kind != ConflictKind.NONE


@dataclass(frozen=True)
class ConflictPrediction:
    cfk_certain: bool
    csk_certain: bool
    gcd: int


@dataclass(frozen=True)
class ConflictSolutionSpace:
    """Packet index tuples base + k*step (k >= 0) that collide

    Tuple k satisfies n_i T_i + o_i - (n_{i+1} T_{i+1} + o_{i+1}) = v_i for
    every adjacent pair; v is all zeros for CFK.
    """
    flow_ids: Tuple[int, ...]
    periods: Tuple[int, ...]
    offsets: Tuple[int, ...]
    overlaps: Tuple[int, ...]
    base: Tuple[int, ...]
    step: Tuple[int, ...]

    @property
    def kind(self) -> ConflictKind:
        return ConflictKind.CSK if any(self.overlaps) else ConflictKind.CFK

    def indices(self, k: int = 0) -> Tuple[int, ...]:
        if k < 0:
            raise ValueError("k must be non-negative")
        return tuple(b + k * s for b, s in zip(self.base, self.step))

    def start_times(self, k: int = 0) -> Tuple[int, ...]:
        return tuple(
            checked_add(checked_mul(n, t, "window start"), o, "window start")
            for n, t, o in zip(self.indices(k), self.periods, self.offsets)
        )

    def coefficient_matrix(self) -> List[List[int]]:
        """Bidiagonal matrix A of the system A X = b"""
        size = len(self.periods)
        rows = []
        for i in range(size - 1):
            row = [0] * size
            row[i] = self.periods[i]
            row[i + 1] = -self.periods[i + 1]
            rows.append(row)
        return rows

    def rhs(self) -> List[int]:
        return [
            self.offsets[i + 1] - self.offsets[i] + self.overlaps[i]
            for i in range(len(self.periods) - 1)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "flow_ids": list(self.flow_ids),
            "overlaps": list(self.overlaps),
            "base": list(self.base),
            "step": list(self.step),
            "collision_time": self.start_times(0)[0] if self.kind == ConflictKind.CFK else min(self.start_times(0)),
        }


@dataclass(frozen=True, order=True)
class ConflictEntry:
    time_start: int
    time_end: int
    flow_ids: Tuple[int, ...]
    packet_indices: Tuple[int, ...]
    kind: ConflictKind = field(compare=False)

    def to_row(self) -> List[Any]:
        return [
            self.time_start,
            self.time_end,
            self.kind.value,
            ";".join(str(i) for i in self.flow_ids),
            ";".join(str(n) for n in self.packet_indices),
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time_start": self.time_start,
            "time_end": self.time_end,
            "kind": self.kind.value,
            "flow_ids": list(self.flow_ids),
            "packet_indices": list(self.packet_indices),
        }


@dataclass
class ConflictList:
    """Conflicts sorted by time, without duplicates"""
    entries: List[ConflictEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries = sorted(set(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ConflictEntry]:
        return iter(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def of_kind(self, kind: ConflictKind) -> List[ConflictEntry]:
        return [e for e in self.entries if e.kind == kind]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "count": len(self.entries),
            "cfk": len(self.of_kind(ConflictKind.CFK)),
            "csk": len(self.of_kind(ConflictKind.CSK)),
            "entries": [e.to_dict() for e in self.entries],
        }

    def write_json(self, path: str) -> None:
        write_json(path, self.to_dict())

    def write_csv(self, path: str) -> int:
        return write_csv(path, CONFLICT_CSV_HEADER, (e.to_row() for e in self.entries))


@dataclass(frozen=True)
class Window:
    """One transmission window [start, end) of a packet"""
    start: int
    end: int
    flow_id: int
    packet_index: int


def _require_ts(flows: Sequence[Flow], offsets: Sequence[int], minimum: int = 1) -> None:
    if len(flows) < minimum:
        raise PreconditionError(f"need at least {minimum} TS flows, got {len(flows)}")
    if len(offsets) != len(flows):
        raise InvalidSpecError(f"{len(flows)} flows but {len(offsets)} offsets")
    for f in flows:
        if not f.is_ts:
            raise InvalidSpecError(f"flow {f.id} is best-effort; combinability needs TS flows")


def _earliest_pair(t1: int, o1: int, t2: int, o2: int, delta: int) -> Optional[ConflictWitness]:
    """Earliest (n, m >= 0) with (m T2 + o2) - (n T1 + o1) = delta"""
    solution = extended_bezout(t1, t2, o2 - o1 - delta)
    if not solution.exists:
        return None
    _, n, m = solution.first_nonnegative()
    start1 = n * t1 + o1
    start2 = m * t2 + o2
    return ConflictWitness(n=n, m=m, time=max(start1, start2))


def _overlap_residues(residue: int, g: int, low: int, high: int) -> Iterator[int]:
    """Values v in (low, high), v != 0, with v = residue (mod g)"""
    first = low + 1 + nonneg_mod(residue - (low + 1), g)
    for v in range(first, high, g):
        if v != 0:
            yield v


def pairwise_conflict_class(f1: Flow, f2: Flow, o1: int, o2: int) -> ConflictClass:
    """Classify the pair by the modular spacing of its offsets

    With g = gcd(T1, T2) and d = (o2 - o1) mod g the pair never collides iff
    tau1 <= d <= g - tau2. Equal starts are possible only when d == 0.
    """
    _require_ts([f1, f2], [o1, o2], minimum=2)
    t1, t2 = f1.period, f2.period
    tau1, tau2 = f1.tau, f2.tau
    g = math.gcd(t1, t2)
    d = nonneg_mod(o2 - o1, g)

    if tau1 <= d <= g - tau2:
        return ConflictClass(kind=ConflictKind.NONE)

    if d == 0:
        witness = _earliest_pair(t1, o1, t2, o2, 0)
        return ConflictClass(kind=ConflictKind.CFK, witness=witness)

    best = None
    for delta in _overlap_residues(o2 - o1, g, -tau2, tau1):
        candidate = _earliest_pair(t1, o1, t2, o2, delta)
        if candidate is not None and (best is None or candidate.time < best.time):
            best = candidate
    return ConflictClass(kind=ConflictKind.CSK, witness=best)


def pairwise_conflict_classes(flows: Sequence[Flow], offsets: Sequence[int]) -> Dict[Tuple[int, int], ConflictClass]:
    """Verdict for every unordered pair, keyed by (flow_id_a, flow_id_b)"""
    _require_ts(flows, offsets)
    verdicts = {}
    for (i, fi), (j, fj) in itertools.combinations(enumerate(flows), 2):
        verdicts[(fi.id, fj.id)] = pairwise_conflict_class(fi, fj, offsets[i], offsets[j])
    return verdicts


def predict_existence(flows: Sequence[Flow]) -> ConflictPrediction:
    _require_ts(flows, [0] * len(flows), minimum=2)
    g = gcd_periods(f.period for f in flows)
    cfk = g == 1
    csk = cfk and any(f.tau > 1 for f in flows)
    return ConflictPrediction(cfk_certain=cfk, csk_certain=csk, gcd=g)


def _solve_space(flows: Sequence[Flow], offsets: Sequence[int], overlaps: Sequence[int]) -> ConflictSolutionSpace:
    periods = [f.period for f in flows]
    rhs = [offsets[i + 1] - offsets[i] + overlaps[i] for i in range(len(flows) - 1)]
    base, step = chain_solve(periods, rhs)
    return ConflictSolutionSpace(
        flow_ids=tuple(f.id for f in flows),
        periods=tuple(periods),
        offsets=tuple(offsets),
        overlaps=tuple(overlaps),
        base=tuple(base),
        step=tuple(step),
    )


def cfk_solution_space(flows: Sequence[Flow], offsets: Sequence[int]) -> ConflictSolutionSpace:
    """All index tuples at which every flow starts a packet at the same instant

    Raises NoSolutionError when the periods share factors that make the
    system unsolvable; pairwise-coprime periods always have a solution.
    """
    _require_ts(flows, offsets, minimum=2)
    space = _solve_space(flows, offsets, [0] * (len(flows) - 1))
    logger.debug(f"CFK space for flows {space.flow_ids}: base {space.base}, step {space.step}")
    return space


def _component_solvable(flows: Sequence[Flow], offsets: Sequence[int], i: int, v: int) -> bool:
    """Equation i of the chain has integer solutions only if gcd(T_i, T_i+1) divides its rhs"""
    g = math.gcd(flows[i].period, flows[i + 1].period)
    return (offsets[i + 1] - offsets[i] + v) % g == 0


def iter_csk_solution_spaces(
    flows: Sequence[Flow],
    offsets: Sequence[int],
    overlaps: Optional[Sequence[Sequence[int]]] = None,
    max_attempts: Optional[int] = None,
) -> Iterator[ConflictSolutionSpace]:
    """Lazily yield one CSK space per solvable overlap vector

    Without explicit overlaps every v with v_i in [-(tau_i - 1), tau_{i+1} - 1],
    v_i != 0, is tried, except components whose own equation has no integer
    solution. max_attempts bounds the number of vectors handed to the solver.
    """
    _require_ts(flows, offsets, minimum=2)
    size = len(flows) - 1
    if overlaps is None:
        ranges = [
            [
                v for v in range(-(flows[i].tau - 1), flows[i + 1].tau)
                if v != 0 and _component_solvable(flows, offsets, i, v)
            ]
            for i in range(size)
        ]
        candidates = itertools.product(*ranges)
    else:
        candidates = overlaps

    attempts = 0
    for v in candidates:
        v = tuple(v)
        if len(v) != size:
            raise InvalidSpecError(f"overlap vector needs {size} components, got {len(v)}")
        if any(component == 0 for component in v):
            raise PreconditionError("overlap components must be non-zero; use cfk_solution_space for v = 0")
        if not all(_component_solvable(flows, offsets, i, v[i]) for i in range(size)):
            continue
        if max_attempts is not None and attempts >= max_attempts:
            logger.warning(f"CSK enumeration stopped after {max_attempts} overlap vectors")
            return
        attempts += 1
        try:
            yield _solve_space(flows, offsets, v)
        except NoSolutionError:
            continue


def csk_solution_spaces(
    flows: Sequence[Flow],
    offsets: Sequence[int],
    overlaps: Optional[Sequence[Sequence[int]]] = None,
    limit: Optional[int] = None,
    max_attempts: Optional[int] = None,
) -> List[ConflictSolutionSpace]:
    spaces = []
    for space in iter_csk_solution_spaces(flows, offsets, overlaps, max_attempts):
        if limit is not None and len(spaces) >= limit:
            logger.warning(f"CSK enumeration truncated at {limit} solution spaces")
            break
        spaces.append(space)
    return spaces


def verify_noncollision_k(flows: Sequence[Flow], offsets: Sequence[int]) -> bool:
    """Sufficient test that K flows never collide

    Holds when g = gcd of all periods exceeds 1, the service times fit in g,
    and every pair keeps its modular spacing.
    """
    _require_ts(flows, offsets)
    g = gcd_periods(f.period for f in flows)
    if g <= 1:
        return False
    if sum(f.tau for f in flows) >= g:
        return False
    for (i, fi), (j, fj) in itertools.combinations(enumerate(flows), 2):
        d = nonneg_mod(offsets[j] - offsets[i], g)
        if not fi.tau <= d <= g - fj.tau:
            return False
    return True


def find_window_conflicts(windows: Sequence[Window], cycle: Optional[int] = None) -> ConflictList:
    """Sweep windows and report every overlapping pair of distinct packets

    With a cycle the timeline is circular: windows that run past the cycle end
    are compared with the starts of the next cycle.
    """
    ordered = sorted(windows, key=lambda w: (w.start, w.flow_id, w.packet_index))
    extended = list(ordered)
    if cycle:
        longest = max((w.end - w.start for w in ordered), default=0)
        extended += [
            Window(w.start + cycle, w.end + cycle, w.flow_id, w.packet_index)
            for w in ordered
            if w.start < longest
        ]

    entries = []
    for i, w in enumerate(ordered):
        j = i + 1
        while j < len(extended) and extended[j].start < w.end:
            other = extended[j]
            j += 1
            if (other.flow_id, other.packet_index) == (w.flow_id, w.packet_index):
                continue
            start = other.start
            end = min(w.end, other.end)
            if cycle:
                shift = (start // cycle) * cycle
                start, end = start - shift, end - shift
            kind = ConflictKind.CFK if other.start == w.start else ConflictKind.CSK
            pair = sorted([(w.flow_id, w.packet_index), (other.flow_id, other.packet_index)])
            entries.append(ConflictEntry(
                time_start=start,
                time_end=end,
                flow_ids=tuple(p[0] for p in pair),
                packet_indices=tuple(p[1] for p in pair),
                kind=kind,
            ))
    return ConflictList(entries=entries)


def periodic_windows(flows: Sequence[Flow], offsets: Sequence[int], horizon: int) -> List[Window]:
    """Windows of the periodic pattern whose start falls in [0, horizon)

    Packet indices are counted from the packet at the offset and reduced
    modulo the number of packets per hyperperiod.
    """
    cycle = hyperperiod(f.period for f in flows)
    windows = []
    for f, o in zip(flows, offsets):
        t = f.period
        per_cycle = cycle // t
        phase = nonneg_mod(o, t)
        shift = (o - phase) // t
        for k, start in enumerate(range(phase, horizon, t)):
            windows.append(Window(start, start + f.tau, f.id, nonneg_mod(k - shift, per_cycle)))
    return windows


def brute_force_conflicts(flows: Sequence[Flow], offsets: Sequence[int], horizon: Optional[int] = None) -> ConflictList:
    """Enumerate every transmission window and report all collisions

    When the horizon is a multiple of the hyperperiod the windows are compared
    circularly, otherwise on the plain interval [0, horizon).
    """
    _require_ts(flows, offsets)
    if len(flows) < 2:
        return ConflictList()
    cycle = hyperperiod(f.period for f in flows)
    if horizon is None:
        horizon = cycle
    if horizon <= 0:
        raise InvalidSpecError(f"horizon must be positive, got {horizon}")
    checked_add(horizon, max(f.tau for f in flows), "horizon")

    windows = periodic_windows(flows, offsets, horizon)
    circular = cycle if horizon % cycle == 0 else None
    conflicts = find_window_conflicts(windows, cycle=circular)
    logger.debug(f"Brute force over {horizon} ns: {len(conflicts)} conflicting pairs")
    return conflicts


def predict_conflicting_packets(
    flows: Sequence[Flow],
    offsets: Sequence[int],
    cycle: Optional[int] = None,
) -> Set[Tuple[int, int]]:
    """(flow_id, packet index) of every packet involved in a pairwise conflict

    Indices are taken modulo the packets per hyperperiod. Each admissible
    overlap residue gives one arithmetic progression of colliding pairs.
    """
    _require_ts(flows, offsets)
    if cycle is None:
        cycle = hyperperiod(f.period for f in flows)
    marked = set()
    for (i, fi), (j, fj) in itertools.combinations(enumerate(flows), 2):
        ti, tj = fi.period, fj.period
        g = math.gcd(ti, tj)
        diff = offsets[j] - offsets[i]
        d = nonneg_mod(diff, g)
        if fi.tau <= d <= g - fj.tau:
            continue
        deltas = [0] if d == 0 else []
        deltas += list(_overlap_residues(diff, g, -fj.tau, fi.tau))
        per_i, per_j = cycle // ti, cycle // tj
        for delta in deltas:
            solution = extended_bezout(ti, tj, diff - delta)
            if not solution.exists:
                continue
            n0, m0 = solution.particular
            step_n, step_m = solution.homogeneous_step
            marked.update((fi.id, n) for n in range(nonneg_mod(n0, step_n), per_i, step_n))
            marked.update((fj.id, m) for m in range(nonneg_mod(m0, step_m), per_j, step_m))
    return marked
