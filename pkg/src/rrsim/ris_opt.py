"""RIS phase-configuration algorithms: element-wise iterative sweep, grouped
sweep, location-indexed codebooks, plus an exhaustive oracle and multi-user
panel partitioning."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelParams, RisPanel, cascaded_gain, received_power_dbm

Evaluator = Callable[[Sequence[int]], float]

EXHAUSTIVE_GUARD = 2**20
CODEBOOK_FORMAT_VERSION = 1


class RisOptError(Exception):
    pass


class TooLarge(RisOptError):
    pass


class EmptyCodebook(RisOptError):
    pass


class EvaluatorFailure(RisOptError):
    pass


class UncoveredElement(RisOptError):
    pass


class Overlap(RisOptError):
    pass


@dataclass
class OptimizationTrace:
    """Every evaluator call made during a search, in order."""

    evaluations: list[tuple[int, tuple[int, ...], float]] = field(default_factory=list)
    evaluations_used: int = 0
    feedback_messages: int = 0

    def record(self, config: Sequence[int], power_dbm: float) -> None:
        self.evaluations.append((self.evaluations_used, tuple(config), power_dbm))
        self.evaluations_used += 1
        self.feedback_messages += 1

    def best_so_far(self) -> list[float]:
        best: list[float] = []
        current = -math.inf
        for _, _, power in self.evaluations:
            current = max(current, power)
            best.append(current)
        return best


def _evaluate(evaluator: Evaluator, config: Sequence[int], trace: OptimizationTrace, context: str) -> float:
    try:
        power = float(evaluator(tuple(config)))
    except Exception as exc:
        raise EvaluatorFailure(f"evaluator failed at {context}: {exc}") from exc
    trace.record(config, power)
    return power


def iterative_optimize(
    evaluator: Evaluator,
    n_elements: int,
    n_states: int,
    passes: int = 1,
    initial: Sequence[int] | None = None,
) -> tuple[list[int], OptimizationTrace]:
    """Element-by-element sweep: try every state per element with the others
    fixed and keep the best (ties to the lowest state index).

    Uses exactly passes * n_elements * n_states evaluator calls.
    """
    if n_elements < 1 or n_states < 2 or passes < 1:
        raise ValueError("need n_elements >= 1, n_states >= 2, passes >= 1")
    config = list(initial) if initial is not None else [0] * n_elements
    trace = OptimizationTrace()
    for _ in range(passes):
        for k in range(n_elements):
            powers = []
            for s in range(n_states):
                config[k] = s
                powers.append(_evaluate(evaluator, config, trace, f"element {k} state {s}"))
            config[k] = int(np.argmax(powers))
    return config, trace


def iterative_fixed_point(
    evaluator: Evaluator,
    n_elements: int,
    n_states: int,
    max_passes: int = 20,
) -> tuple[list[int], OptimizationTrace]:
    """Repeat full sweeps until the configuration stops changing."""
    config = [0] * n_elements
    trace = OptimizationTrace()
    for _ in range(max_passes):
        previous = list(config)
        for k in range(n_elements):
            powers = []
            for s in range(n_states):
                config[k] = s
                powers.append(_evaluate(evaluator, config, trace, f"element {k} state {s}"))
            config[k] = int(np.argmax(powers))
        if config == previous:
            break
    return config, trace


def contiguous_groups(n_elements: int, group_count: int) -> list[np.ndarray]:
    """Split element indices into contiguous groups with sizes differing by <= 1."""
    if not 1 <= group_count <= n_elements:
        raise ValueError("group_count must be in [1, n_elements]")
    return [np.asarray(g) for g in np.array_split(np.arange(n_elements), group_count)]


def grouping_optimize(
    evaluator: Evaluator,
    n_elements: int,
    n_states: int,
    group_count: int,
) -> tuple[list[int], OptimizationTrace]:
    """Grouped sweep: all elements of a group share one state; each group is
    swept over the state set once. Uses group_count * n_states calls."""
    groups = contiguous_groups(n_elements, group_count)
    config = [0] * n_elements
    trace = OptimizationTrace()
    for g_idx, members in enumerate(groups):
        powers = []
        for s in range(n_states):
            for k in members:
                config[k] = s
            powers.append(_evaluate(evaluator, config, trace, f"group {g_idx} state {s}"))
        best = int(np.argmax(powers))
        for k in members:
            config[k] = best
    return config, trace


def exhaustive_optimize(
    evaluator: Evaluator,
    n_elements: int,
    n_states: int,
) -> tuple[list[int], float]:
    """True argmax over every configuration; ties go to the lexicographically
    smallest config. Guarded against search spaces over 2**20."""
    if n_states**n_elements > EXHAUSTIVE_GUARD:
        raise TooLarge(f"{n_states}^{n_elements} configurations exceed the guard")
    best_config: tuple[int, ...] | None = None
    best_power = -math.inf
    for config in itertools.product(range(n_states), repeat=n_elements):
        power = float(evaluator(config))
        if power > best_power:
            best_power = power
            best_config = config
    assert best_config is not None
    return list(best_config), best_power


@dataclass
class Codebook:
    """Stored per-location configurations for one panel part."""

    part_id: int
    reference_points: list[tuple[float, float, float]]
    codewords: list[list[int]]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        points = [tuple(p) for p in self.reference_points]
        if len(points) != len(set(points)):
            raise ValueError("reference points must be distinct")
        sizes = {len(cw) for cw in self.codewords}
        if len(sizes) > 1:
            raise ValueError("all codewords must have the same length")

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": CODEBOOK_FORMAT_VERSION,
                "part_id": self.part_id,
                "reference_points": [list(p) for p in self.reference_points],
                "codewords": self.codewords,
                "metadata": self.metadata,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        data = json.loads(text)
        if data.get("version") != CODEBOOK_FORMAT_VERSION:
            raise ValueError(f"unsupported codebook version {data.get('version')}")
        return cls(
            part_id=data["part_id"],
            reference_points=[tuple(p) for p in data["reference_points"]],
            codewords=[list(map(int, cw)) for cw in data["codewords"]],
            metadata=data.get("metadata", {}),
        )


def evaluator_hash(panel: RisPanel, tx_pos, freq_ghz: float, params: ChannelParams) -> str:
    """Fingerprint of the model an offline codebook was built against."""
    h = hashlib.sha256()
    h.update(np.asarray(panel.element_positions, float).tobytes())
    h.update(repr(panel.states).encode())
    h.update(np.asarray(tx_pos, float).tobytes())
    h.update(f"{freq_ghz}:{params.exponent}:{params.d0_m}".encode())
    return h.hexdigest()[:16]


def model_evaluator(
    panel: RisPanel,
    tx_pos,
    tx_power_dbm: float,
    rx_pos,
    freq_ghz: float,
    params: ChannelParams,
    obstacles=(),
    part_elements: np.ndarray | None = None,
    base_config: Sequence[int] | None = None,
) -> Evaluator:
    """Received power (dBm) at rx_pos as a function of a configuration.

    When part_elements is given, the evaluator takes a part-sized config and
    splices it over base_config; otherwise it takes a full-panel config.
    """
    base = np.zeros(panel.n_elements, dtype=int) if base_config is None else np.asarray(base_config, int).copy()

    def evaluate(config: Sequence[int]) -> float:
        if part_elements is None:
            full = np.asarray(config, int)
        else:
            full = base.copy()
            full[part_elements] = np.asarray(config, int)
        gain = cascaded_gain(tx_pos, panel, full, rx_pos, freq_ghz, params, obstacles)
        return received_power_dbm(tx_power_dbm, gain)

    return evaluate


def build_codebook(
    panel: RisPanel,
    part_id: int,
    reference_points: Sequence[Sequence[float]],
    evaluator_at: Callable[[Sequence[float]], Evaluator],
    n_states: int | None = None,
    metadata: dict | None = None,
) -> Codebook:
    """Run the iterative sweep once per reference point and store the result."""
    if not len(reference_points):
        raise ValueError("reference point grid must be non-empty")
    members = panel.part_elements(part_id)
    if members.size == 0:
        raise ValueError(f"panel has no elements in part {part_id}")
    n_states = n_states if n_states is not None else panel.n_states
    codewords = []
    for point in reference_points:
        config, _ = iterative_optimize(evaluator_at(point), members.size, n_states)
        codewords.append(config)
    return Codebook(
        part_id=part_id,
        reference_points=[tuple(float(c) for c in p) for p in reference_points],
        codewords=codewords,
        metadata=metadata or {},
    )


def select_codeword(codebook: Codebook, location) -> list[int]:
    """Codeword of the Euclidean-nearest reference point; no evaluator calls.

    Distance ties resolve to the lowest entry index.
    """
    if not codebook.reference_points:
        raise EmptyCodebook("codebook has no entries")
    loc = np.asarray(location, float)
    best_idx = 0
    best_d2 = math.inf
    for idx, point in enumerate(codebook.reference_points):
        d2 = float(np.sum((np.asarray(point) - loc) ** 2))
        if d2 < best_d2 - 1e-15:
            best_d2 = d2
            best_idx = idx
    return list(codebook.codewords[best_idx])


class PanelState:
    """Mutable full-panel configuration shared by per-part optimizers."""

    def __init__(self, panel: RisPanel) -> None:
        self.panel = panel
        self.config = np.zeros(panel.n_elements, dtype=int)

    def apply_part(self, part_id: int, codeword: Sequence[int]) -> None:
        members = self.panel.part_elements(part_id)
        if len(codeword) != members.size:
            raise ValueError(f"codeword length {len(codeword)} != part size {members.size}")
        self.config[members] = np.asarray(codeword, int)


def partition_panel(
    state: PanelState,
    assignments: dict[int, str],
    power_at: Callable[[Sequence[int], str], float],
) -> dict[int, Evaluator]:
    """Per-part evaluators: each measures power at its assigned UE with the
    other parts' element states frozen at their current values."""
    panel = state.panel
    parts_present = set(int(p) for p in np.unique(panel.partition))
    assigned = set(assignments)
    missing = parts_present - assigned
    if missing:
        raise UncoveredElement(f"parts without an assigned UE: {sorted(missing)}")
    extra = assigned - parts_present
    if extra:
        raise Overlap(f"assignments reference unknown parts: {sorted(extra)}")

    evaluators: dict[int, Evaluator] = {}
    for part_id, ue_id in assignments.items():
        members = panel.part_elements(part_id)

        def evaluate(config: Sequence[int], members=members, ue_id=ue_id) -> float:
            full = state.config.copy()
            full[members] = np.asarray(config, int)
            return power_at(full, ue_id)

        evaluators[part_id] = evaluate
    return evaluators
