"""Scenes, target sequences, sub-epoch sets and per-condition wiring.

Every sequence is described by integer *gesture labels*: ``0..19`` for the
pointing postures, :data:`BASE` for the rest posture and :data:`REST` for
the all-zero signal used before counting starts under the "stay at the last
one" convention. The real-valued gesture stream is looked up from the labels,
so inputs, targets and scoring can never drift apart.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .gestures import BASE, N_COMPONENTS, N_POSITIONS, GestureTable
from .network import BlockConfig, SequenceBatch

SEQ_LEN = 12
N_WORDS = 10
MAX_OBJECTS = 10
NUMEROSITIES = tuple(range(MAX_OBJECTS + 1))
REST = BASE + 1


class Convention(str, Enum):
    STAY_AT_LAST = "stay_at_last"
    GO_TO_BASE = "go_to_base"

    @property
    def short(self) -> str:
        return "S" if self is Convention.STAY_AT_LAST else "B"

    @classmethod
    def parse(cls, value) -> "Convention":
        if isinstance(value, cls):
            return value
        aliases = {"s": cls.STAY_AT_LAST, "b": cls.GO_TO_BASE}
        v = str(value).strip().lower().replace("-", "_")
        return aliases.get(v) or cls(v)


def gesture_vocabulary(table: GestureTable) -> np.ndarray:
    """Table rows plus a trailing zero row, indexable by gesture label."""
    return np.vstack([table.vectors, np.zeros(N_COMPONENTS)])


def rest_label(convention: Convention) -> int:
    """Label of the signal shown while the network is not counting."""
    return REST if Convention.parse(convention) is Convention.STAY_AT_LAST else BASE


@dataclass(frozen=True)
class Scene:
    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (N_POSITIONS,):
            raise ValueError(f"occupancy must have {N_POSITIONS} entries")
        if occ.sum() > MAX_OBJECTS:
            raise ValueError(f"at most {MAX_OBJECTS} objects per scene")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @classmethod
    def from_positions(cls, positions) -> "Scene":
        occ = np.zeros(N_POSITIONS, dtype=bool)
        occ[list(positions)] = True
        if occ.sum() != len(positions):
            raise ValueError("object positions must be distinct")
        return cls(occ)

    @property
    def n_objects(self) -> int:
        return int(self.occupancy.sum())

    @property
    def object_positions(self) -> list[int]:
        return np.flatnonzero(self.occupancy).tolist()

    @property
    def visual(self) -> np.ndarray:
        n = self.n_objects
        return self.occupancy / n if n else np.zeros(N_POSITIONS)


def gen_scene(n_objects: int, rng: np.random.Generator) -> Scene:
    if not 0 <= n_objects <= MAX_OBJECTS:
        raise ValueError(f"n_objects must lie in 0..{MAX_OBJECTS}, got {n_objects}")
    return Scene.from_positions(rng.choice(N_POSITIONS, size=n_objects, replace=False))


@dataclass
class SequenceArrays:
    """A stack of ``B`` sequences of length ``T``.

    ``trigger`` (B, T); ``visual`` (B, T, 20); ``gesture_labels`` (B, T);
    ``gestures`` (B, T, 3); ``numbers`` (B, T, 10) one-hot number-word targets;
    ``numerosity`` (B,); ``rest`` (3,) the convention's not-counting signal.
    """

    trigger: np.ndarray
    visual: np.ndarray
    gesture_labels: np.ndarray
    gestures: np.ndarray
    numbers: np.ndarray
    numerosity: np.ndarray
    convention: Convention
    rest: np.ndarray

    def __len__(self) -> int:
        return len(self.trigger)

    @property
    def words(self) -> np.ndarray:
        """Target words per step, 0 meaning silence."""
        return np.where(self.numbers.max(axis=-1) > 0.5, self.numbers.argmax(axis=-1) + 1, 0)

    def select(self, mask) -> "SequenceArrays":
        return SequenceArrays(self.trigger[mask], self.visual[mask], self.gesture_labels[mask],
                              self.gestures[mask], self.numbers[mask], self.numerosity[mask], self.convention,
                              self.rest)

    @property
    def on(self) -> "SequenceArrays":
        return self.select(self.trigger[:, 0] > 0.5)

    @property
    def off(self) -> "SequenceArrays":
        return self.select(self.trigger[:, 0] <= 0.5)

    @staticmethod
    def concat(parts) -> "SequenceArrays":
        parts = list(parts)
        conv = {p.convention for p in parts}
        if len(conv) != 1:
            raise ValueError("cannot mix gesture conventions in one batch")
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
        return SequenceArrays(cat("trigger"), cat("visual"), cat("gesture_labels"), cat("gestures"),
                              cat("numbers"), cat("numerosity"), conv.pop(), parts[0].rest)


def _pair_arrays(occupancy: np.ndarray, convention: Convention, table: GestureTable) -> SequenceArrays:
    """Build off/on sequences for each scene row; output rows alternate off, on."""
    occupancy = np.asarray(occupancy, dtype=bool)
    k = len(occupancy)
    n = occupancy.sum(axis=1)
    t = np.arange(SEQ_LEN)
    # Left-to-right object positions, padded with -1.
    order = np.argsort(~occupancy, axis=1, kind="stable")[:, :MAX_OBJECTS]
    ordered = np.where(np.arange(MAX_OBJECTS) < n[:, None], order, -1)

    after = rest_label(convention)
    counting = t[None, :] < n[:, None]
    padded = np.full((k, SEQ_LEN), -1, dtype=np.int64)
    padded[:, :MAX_OBJECTS] = ordered
    on_labels = np.where(counting, padded, after)
    if convention is Convention.STAY_AT_LAST:
        last = ordered[np.arange(k), np.maximum(n - 1, 0)]
        on_labels = np.where(~counting & (n[:, None] > 0), last[:, None], on_labels)
    off_labels = np.full((k, SEQ_LEN), after, dtype=np.int64)

    on_numbers = np.zeros((k, SEQ_LEN, N_WORDS))
    rows, steps = np.nonzero(counting)
    on_numbers[rows, steps, steps] = 1.0

    visual = np.where(n[:, None] > 0, occupancy / np.maximum(n, 1)[:, None], 0.0)
    visual = np.repeat(np.repeat(visual[:, None, :], SEQ_LEN, axis=1), 2, axis=0)
    labels = np.stack([off_labels, on_labels], axis=1).reshape(2 * k, SEQ_LEN)
    numbers = np.stack([np.zeros_like(on_numbers), on_numbers], axis=1).reshape(2 * k, SEQ_LEN, N_WORDS)
    trigger = np.tile(np.array([[0.0], [1.0]]), (k, SEQ_LEN))
    vocab = gesture_vocabulary(table)
    return SequenceArrays(trigger=trigger, visual=visual, gesture_labels=labels,
                          gestures=vocab[labels], numbers=numbers,
                          numerosity=np.repeat(n, 2), convention=convention, rest=vocab[after].copy())


@dataclass
class SequencePair:
    """Trigger-off and trigger-on sequences sharing one scene."""

    scene: Scene
    convention: Convention
    arrays: SequenceArrays

    @property
    def off_sequence(self) -> SequenceArrays:
        return self.arrays.select(slice(0, 1))

    @property
    def on_sequence(self) -> SequenceArrays:
        return self.arrays.select(slice(1, 2))


def build_sequence_pair(scene: Scene, convention, gesture_table: GestureTable) -> SequencePair:
    convention = Convention.parse(convention)
    return SequencePair(scene, convention, _pair_arrays(scene.occupancy[None, :], convention, gesture_table))


@dataclass
class SubEpochSet:
    """One scene per numerosity 0..10, in shuffled order: 22 sequences."""

    occupancy: np.ndarray
    convention: Convention
    arrays: SequenceArrays

    @property
    def numerosities(self) -> list[int]:
        return self.occupancy.sum(axis=1).tolist()

    @property
    def pairs(self) -> list[SequencePair]:
        return [SequencePair(Scene(occ), self.convention, self.arrays.select(slice(2 * i, 2 * i + 2)))
                for i, occ in enumerate(self.occupancy)]

    def to_dict(self) -> dict:
        return {
            "format": "pointcount.sub_epoch",
            "version": 1,
            "convention": self.convention.value,
            "scenes": [np.flatnonzero(o).tolist() for o in self.occupancy],
            "trigger": self.arrays.trigger[:, 0].tolist(),
            "words": self.arrays.words.tolist(),
            "gesture_labels": self.arrays.gesture_labels.tolist(),
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def _random_occupancy(numerosities, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random distinct positions for each requested object count."""
    numerosities = np.asarray(numerosities)
    keys = rng.random((len(numerosities), N_POSITIONS))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    return ranks < numerosities[:, None]


def gen_sub_epoch(convention, gesture_table: GestureTable, rng: np.random.Generator) -> SubEpochSet:
    convention = Convention.parse(convention)
    numerosities = rng.permutation(len(NUMEROSITIES))
    occupancy = _random_occupancy(numerosities, rng)
    return SubEpochSet(occupancy, convention, _pair_arrays(occupancy, convention, gesture_table))


def gen_sub_epochs(count: int, convention, gesture_table: GestureTable, rng: np.random.Generator) -> SequenceArrays:
    """Concatenate ``count`` independent sub-epoch sets (used for test data)."""
    return SequenceArrays.concat(gen_sub_epoch(convention, gesture_table, rng).arrays for _ in range(count))


def recitation_arrays() -> SequenceArrays:
    """The fixed two-sequence set for number recitation: silence, then words 1..10 and two silent steps."""
    occupancy = np.zeros((1, N_POSITIONS), dtype=bool)
    trigger = np.array([[0.0] * SEQ_LEN, [1.0] * SEQ_LEN])
    numbers = np.zeros((2, SEQ_LEN, N_WORDS))
    numbers[1, np.arange(N_WORDS), np.arange(N_WORDS)] = 1.0
    labels = np.full((2, SEQ_LEN), REST, dtype=np.int64)
    return SequenceArrays(trigger=trigger, visual=np.zeros((2, SEQ_LEN, N_POSITIONS)), gesture_labels=labels,
                          gestures=np.zeros((2, SEQ_LEN, N_COMPONENTS)), numbers=numbers,
                          numerosity=np.array([0, N_WORDS]), convention=Convention.STAY_AT_LAST,
                          rest=np.zeros(N_COMPONENTS))


# Experimental conditions: (visual in, gesture in, Jordan loop, numbers out, gestures out).
CONDITIONS = {
    1: (True, False, False, True, False),
    2: (True, False, False, False, True),
    3: (True, False, False, True, True),
    4: (True, False, True, True, True),
    5: (False, True, False, True, False),
    6: (False, True, False, True, True),
    7: (True, True, False, True, False),
    8: (True, True, False, True, True),
}

CONDITION_LABELS = {
    1: ("V", "N"), 2: ("V", "G"), 3: ("V", "N, G"), 4: ("V (+ G loop)", "N, G"),
    5: ("G", "N"), 6: ("G", "N, G"), 7: ("V, G", "N"), 8: ("V, G", "N, G"),
}


@dataclass(frozen=True)
class ConditionSpec:
    condition_id: int
    convention: Convention = Convention.STAY_AT_LAST

    def __post_init__(self):
        if self.condition_id not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition_id}; expected 1..8")
        object.__setattr__(self, "convention", Convention.parse(self.convention))

    @property
    def use_visual_input(self) -> bool:
        return CONDITIONS[self.condition_id][0]

    @property
    def use_gesture_input(self) -> bool:
        return CONDITIONS[self.condition_id][1]

    @property
    def use_jordan_loop(self) -> bool:
        return CONDITIONS[self.condition_id][2]

    @property
    def use_number_output(self) -> bool:
        return CONDITIONS[self.condition_id][3]

    @property
    def use_gesture_output(self) -> bool:
        return CONDITIONS[self.condition_id][4]

    def block_config(self, hidden_size: int) -> BlockConfig:
        v, g, j, n, go = CONDITIONS[self.condition_id]
        return BlockConfig(use_visual_input=v, use_gesture_input=g, use_number_output=n,
                           use_gesture_output=go, use_jordan_loop=j, hidden_size=hidden_size)


def wire_arrays(cfg, data: SequenceArrays) -> SequenceBatch:
    """Route the streams of ``data`` into network inputs and targets.

    ``cfg`` is a :class:`BlockConfig` or a :class:`ConditionSpec`.
    """
    start = np.tile(data.rest, (len(data), 1)) if cfg.use_jordan_loop else None
    return SequenceBatch(
        trigger=data.trigger,
        visual=data.visual if cfg.use_visual_input else None,
        gesture_in=data.gestures if cfg.use_gesture_input else None,
        gesture_start=start,
        number_target=data.numbers if cfg.use_number_output else None,
        gesture_target=data.gestures if cfg.use_gesture_output else None,
    )


def wire_condition(spec: ConditionSpec, pair) -> SequenceBatch:
    """Inputs and targets of ``pair`` (a SequencePair, SubEpochSet or SequenceArrays) under ``spec``."""
    data = pair.arrays if hasattr(pair, "arrays") else pair
    if data.convention is not spec.convention:
        raise ValueError(f"condition expects {spec.convention.value} data, got {data.convention.value}")
    return wire_arrays(spec, data)
