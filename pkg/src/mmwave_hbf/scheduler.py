"""Subframe allocation on the (OFDM symbol, SDMA layer) grid.

Two round-robin schedulers are provided. ``tmrs_schedule`` is the
single-layer TDMA baseline. ``pmrs_schedule`` groups requests into SDMA
bundles whose allocations all start on the same symbol; symbols between the
end of a shorter allocation and the next bundle are left blank as padding,
so that every co-scheduled transmission sees the others' front-loaded
reference signal.

Allocations are addressed by their first grid symbol and the number of data
symbols they occupy; control symbols in between are skipped.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .phy import bits_per_symbol


class Direction(str, Enum):
    DL = "DL"
    UL = "UL"

    def __str__(self):
        return self.value

    def other(self):
        return Direction.UL if self is Direction.DL else Direction.DL


@dataclass(frozen=True)
class FrameConfig:
    symbols_per_slot: int = 14
    slots_per_subframe: int = 4
    control_symbols: tuple = (0, 13)
    symbol_duration_us: float = 17.85
    n_layers: int = 1

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if any(not 0 <= c < self.symbols_per_slot for c in self.control_symbols):
            raise ValueError("control symbol index outside the slot")
        if self.data_symbols_per_slot < 1:
            raise ValueError("a slot needs at least one data symbol")

    @property
    def data_symbols_per_slot(self):
        return self.symbols_per_slot - len(set(self.control_symbols))

    @property
    def n_data_symbols(self):
        return self.data_symbols_per_slot * self.slots_per_subframe

    @property
    def n_grid_symbols(self):
        return self.symbols_per_slot * self.slots_per_subframe

    @property
    def slot_duration_us(self):
        return self.symbols_per_slot * self.symbol_duration_us

    @property
    def data_grid_indices(self):
        data = [s for s in range(self.symbols_per_slot) if s not in self.control_symbols]
        return np.array([slot * self.symbols_per_slot + s
                         for slot in range(self.slots_per_subframe) for s in data])

    def to_grid(self, data_index):
        return int(self.data_grid_indices[data_index])

    def to_data(self, grid_index):
        """Data-symbol index of a grid symbol, or ``None`` for control symbols."""
        hits = np.flatnonzero(self.data_grid_indices == grid_index)
        return int(hits[0]) if hits.size else None

    def is_control(self, grid_index):
        return grid_index % self.symbols_per_slot in self.control_symbols


@dataclass(frozen=True)
class Allocation:
    ue_id: int
    layer: int
    direction: Direction
    start_symbol: int
    n_symbols: int
    mcs: int = -1
    bundle: int = -1


@dataclass
class SubframeSchedule:
    allocations: list = field(default_factory=list)
    padding_symbols: list = field(default_factory=list)
    idle_symbols: list = field(default_factory=list)
    bundle_boundaries: list = field(default_factory=list)
    bundle_length: int = 0

    @property
    def scheduled_symbols(self):
        return sum(a.n_symbols for a in self.allocations)

    def bundles(self):
        """Allocations grouped by start symbol, each group ordered by layer."""
        groups = {}
        for a in self.allocations:
            groups.setdefault(a.start_symbol, []).append(a)
        return [sorted(g, key=lambda a: a.layer) for _, g in sorted(groups.items())]


@dataclass
class SchedulerState:
    """Round-robin order and per-direction byte queues of the attached UEs."""

    rr_queue: list
    queues: dict = field(default_factory=dict)
    next_direction: dict = field(default_factory=dict)

    @classmethod
    def for_ues(cls, ue_ids):
        ue_ids = list(ue_ids)
        return cls(rr_queue=ue_ids,
                   queues={(u, d): 0 for u in ue_ids for d in Direction},
                   next_direction={u: Direction.DL for u in ue_ids})

    def rotate(self, demands, granted):
        """Move UEs left without any allocation to the head, then partly served UEs."""
        def rank(u):
            want = sum(demands.get((u, d), 0) for d in Direction)
            got = sum(granted.get((u, d), 0) for d in Direction)
            if want == 0:
                return 2
            if got == 0:
                return 0
            return 1 if got < want else 2
        self.rr_queue = sorted(self.rr_queue, key=rank)


def symbols_for_bits(bits, spectral_eff, n_subcarriers):
    if bits <= 0:
        return 0
    per_symbol = bits_per_symbol(spectral_eff, n_subcarriers)
    if per_symbol <= 0:
        raise ValueError("MCS carries no bits on this bandwidth")
    return -(-int(bits) // per_symbol)


def demand_symbols(queue_bytes, mcs, n_subcarriers):
    """Data symbols needed to empty a queue of ``queue_bytes`` at ``mcs``."""
    if queue_bytes < 0:
        raise ValueError("queue size must be non-negative")
    se = getattr(mcs, "spectral_eff", mcs)
    return symbols_for_bits(8 * queue_bytes, se, n_subcarriers)


def bundle_dimensions(n_requests, n_layers, n_data_symbols):
    """``(N_b, N_a)``: bundle count and bundle length in data symbols."""
    if n_requests <= 0:
        return 0, 0
    n_b = min(math.ceil(n_requests / n_layers), n_data_symbols)
    return n_b, n_data_symbols // n_b


def _requests(state, demands, direction):
    return [(u, direction) for u in state.rr_queue if demands.get((u, direction), 0) > 0]


def _chunk(reqs, n_layers, beams):
    """Split requests into bundles of at most ``n_layers``.

    Without ``beams`` this is plain round-robin order. With ``beams`` (UE id
    to analog beam index) each bundle takes the earliest waiting requests
    whose beams differ from those already in it, so no two layers of a
    bundle ride the same analog beam.
    """
    if beams is None:
        return [reqs[i:i + n_layers] for i in range(0, len(reqs), n_layers)]
    waiting = list(reqs)
    chunks = []
    while waiting:
        chunk, used, rest = [], set(), []
        for r in waiting:
            b = beams.get(r[0])
            if len(chunk) < n_layers and (b is None or b not in used):
                chunk.append(r)
                used.add(b)
            else:
                rest.append(r)
        chunks.append(chunk)
        waiting = rest
    return chunks


def pmrs_schedule(state: SchedulerState, demands, frame: FrameConfig,
                  beams=None) -> SubframeSchedule:
    """Padded multi-user round robin.

    ``demands`` maps ``(ue_id, Direction)`` to a symbol count. Each bundle
    carries a single direction; DL and UL bundles alternate. Requests beyond
    ``N_s`` bundles stay unserved and their UEs move to the head of the
    round-robin list. ``beams`` optionally maps UE ids to their analog beam
    so that UEs sharing a beam are put in different bundles.
    """
    n_layers, n_s = frame.n_layers, frame.n_data_symbols
    chunks = {d: _chunk(_requests(state, demands, d), n_layers, beams) for d in Direction}
    bundles = []
    for i in range(max(len(chunks[Direction.DL]), len(chunks[Direction.UL]))):
        for d in Direction:
            if i < len(chunks[d]):
                bundles.append(chunks[d][i])
    bundles = bundles[:n_s]

    sched = SubframeSchedule(padding_symbols=[0] * n_layers, idle_symbols=[0] * n_layers)
    granted = {}
    if bundles:
        n_a = n_s // len(bundles)
        sched.bundle_length = n_a
        for b, members in enumerate(bundles):
            start = frame.to_grid(b * n_a)
            sched.bundle_boundaries.append(start)
            for layer in range(n_layers):
                if layer >= len(members):
                    sched.idle_symbols[layer] += n_a
                    continue
                u, d = members[layer]
                n = min(demands[(u, d)], n_a)
                sched.allocations.append(Allocation(u, layer, d, start, n, bundle=b))
                sched.padding_symbols[layer] += n_a - n
                granted[(u, d)] = n
        tail = n_s - len(bundles) * n_a
    else:
        tail = n_s
    for layer in range(n_layers):
        sched.idle_symbols[layer] += tail
    state.rotate(demands, granted)
    return sched


def tmrs_schedule(state: SchedulerState, demands, frame: FrameConfig) -> SubframeSchedule:
    """Single-layer sequential round robin without padding.

    Each UE in list order receives ``min(demand, remaining)`` symbols per
    direction. The direction a UE is served first alternates between its
    successive turns.
    """
    if frame.n_layers != 1:
        raise ValueError("TMRS schedules a single layer")
    n_s = frame.n_data_symbols
    sched = SubframeSchedule(padding_symbols=[0], idle_symbols=[0])
    granted = {}
    cursor = 0
    for u in state.rr_queue:
        if cursor >= n_s:
            break
        first = state.next_direction.get(u, Direction.DL)
        served = False
        for d in (first, first.other()):
            want = demands.get((u, d), 0)
            n = min(want, n_s - cursor)
            if n <= 0:
                continue
            sched.allocations.append(Allocation(u, 0, d, frame.to_grid(cursor), n,
                                                bundle=len(sched.allocations)))
            granted[(u, d)] = n
            cursor += n
            served = True
        if served:
            state.next_direction[u] = first.other()
    sched.idle_symbols[0] = n_s - cursor
    state.rotate(demands, granted)
    return sched


def validate_schedule(sched: SubframeSchedule, frame: FrameConfig):
    """List every broken schedule invariant; an empty list means valid."""
    problems = []
    spans = []
    for a in sched.allocations:
        tag = f"UE {a.ue_id} layer {a.layer} @ {a.start_symbol}"
        if a.n_symbols < 1:
            problems.append(f"{tag}: allocation shorter than one symbol")
            continue
        if not 0 <= a.layer < frame.n_layers:
            problems.append(f"{tag}: layer outside [0, {frame.n_layers})")
        if not 0 <= a.start_symbol < frame.n_grid_symbols:
            problems.append(f"{tag}: start outside the subframe")
            continue
        first = frame.to_data(a.start_symbol)
        if first is None:
            problems.append(f"{tag}: starts on a control symbol")
            continue
        if first + a.n_symbols > frame.n_data_symbols:
            problems.append(f"{tag}: runs past the last data symbol")
        spans.append((a, first, first + a.n_symbols))

    for i, (a, s0, e0) in enumerate(spans):
        for b, s1, e1 in spans[i + 1:]:
            if s0 >= e1 or s1 >= e0:
                continue
            if a.layer == b.layer:
                problems.append(f"layer {a.layer}: UE {a.ue_id} and UE {b.ue_id} overlap")
            if s0 != s1:
                problems.append(
                    f"UE {a.ue_id} and UE {b.ue_id} overlap with different start symbols")
            if a.ue_id == b.ue_id:
                problems.append(f"UE {a.ue_id} holds two layers at once")

    if sched.bundle_boundaries:
        bounds = set(sched.bundle_boundaries)
        for a in sched.allocations:
            if a.start_symbol not in bounds:
                problems.append(f"UE {a.ue_id}: allocation does not start on a bundle boundary")
    if sched.padding_symbols or sched.idle_symbols:
        total = (sched.scheduled_symbols + sum(sched.padding_symbols)
                 + sum(sched.idle_symbols))
        if total != frame.n_data_symbols * frame.n_layers:
            problems.append(f"symbol accounting {total} != {frame.n_data_symbols * frame.n_layers}")
    return problems
