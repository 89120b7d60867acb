"""Training protocols: one-stage training and the staged pre-training pipeline.

Every optimiser step uses the gradient summed over one full sub-epoch set
(22 sequences) and a constant Adam learning rate. Each repetition ``r`` of an
experiment is seeded with ``base_seed + r`` and splits that seed into
independent streams for the main network, the two pre-training stages and
the test data.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from .datagen import (ConditionSpec, Convention, SequenceArrays, gen_sub_epoch, gen_sub_epochs,
                      recitation_arrays, wire_arrays)
from .evaluation import AccuracyReport, accuracy_report, aggregate, decode_numbers
from .gestures import GestureTable
from .network import (FREE_RUNNING, TEACHER_FORCED, BlockConfig, NetworkState, SequenceBatch, bptt_gradients,
                      forward_sequence, init_network, stitch_pretrained)
from .numerics import AdamState, adam_step, make_rng

PRETRAINING_OPTIONS = ("none", "stage1a", "stage1b", "both")
STUDY2_CONDITIONS = (3, 4)  # 3: no gesture loop, 4: with the loop

# Sub-streams of a repetition seed.
STREAM_MAIN, STREAM_STAGE1A, STREAM_STAGE1B, STREAM_TEST = 0, 1, 2, 3


@dataclass(frozen=True)
class TrainSpec:
    """Everything needed to reproduce one experiment row.

    Defaults are the published settings. ``learning_rate=None`` selects the
    published rate for the study and condition (see :attr:`main_learning_rate`).
    """

    study: int = 1
    condition: int = 1
    convention: Convention = Convention.STAY_AT_LAST
    pretraining: str = "none"
    feedback: str = FREE_RUNNING
    sub_epochs: int = 20000
    learning_rate: float | None = None
    hidden_size: int = 68
    repetitions: int = 15
    test_sets: int = 50
    base_seed: int = 0
    stage1a_epochs: int = 7000
    stage1a_lr: float = 0.01
    stage1a_hidden: int = 20
    stage1b_sub_epochs: int = 20000
    stage1b_lr: float = 0.02
    stage1b_hidden: int = 48
    stage2_lr: float = 0.001

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention.parse(self.convention))
        if self.study not in (1, 2):
            raise ValueError("study must be 1 or 2")
        ConditionSpec(self.condition)
        if self.pretraining not in PRETRAINING_OPTIONS:
            raise ValueError(f"pretraining must be one of {PRETRAINING_OPTIONS}")
        if self.feedback not in (FREE_RUNNING, TEACHER_FORCED):
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.study == 1 and self.pretraining != "none":
            raise ValueError("pre-training belongs to study 2")
        if self.study == 2:
            if self.condition not in STUDY2_CONDITIONS:
                raise ValueError("study 2 trains condition 3 (no loop) or 4 (gesture loop)")
            if self.pretraining != "none" and self.hidden_size != self.stage1a_hidden + self.stage1b_hidden:
                raise ValueError(f"stage-2 hidden size {self.hidden_size} must equal "
                                 f"{self.stage1a_hidden} + {self.stage1b_hidden}")
        for name in ("sub_epochs", "hidden_size", "repetitions", "test_sets",
                     "stage1a_epochs", "stage1a_hidden", "stage1b_sub_epochs", "stage1b_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.base_seed < 0:
            raise ValueError("base_seed must be non-negative")

    @property
    def condition_spec(self) -> ConditionSpec:
        return ConditionSpec(self.condition, self.convention)

    @property
    def block_config(self) -> BlockConfig:
        return self.condition_spec.block_config(self.hidden_size)

    @property
    def uses_stage1a(self) -> bool:
        return self.pretraining in ("stage1a", "both")

    @property
    def uses_stage1b(self) -> bool:
        return self.pretraining in ("stage1b", "both")

    @property
    def main_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        if self.study == 2 and self.pretraining != "none":
            return self.stage2_lr
        return 0.02 if self.condition == 2 else 0.005

    def to_dict(self) -> dict:
        d = asdict(self)
        d["convention"] = self.convention.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSpec":
        return cls(**d)


@dataclass
class TrainTrace:
    """Per-update losses: columns are total, counting and gesture components."""

    losses: np.ndarray
    wall_time: float = 0.0

    @property
    def total(self) -> np.ndarray:
        return self.losses[:, 0]

    @property
    def counting(self) -> np.ndarray:
        return self.losses[:, 1]

    @property
    def gesture(self) -> np.ndarray:
        return self.losses[:, 2]

    def to_text(self) -> str:
        lines = ["# sub_epoch\ttotal\tcounting\tgesture"]
        lines += [f"{i + 1}\t{t!r}\t{c!r}\t{g!r}" for i, (t, c, g) in enumerate(self.losses.tolist())]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def fit(net: NetworkState, batches: Callable[[int], SequenceBatch], n_updates: int, learning_rate: float,
        feedback: str = FREE_RUNNING) -> tuple[NetworkState, TrainTrace]:
    """Run ``n_updates`` Adam steps; ``batches(i)`` supplies the batch for step ``i``."""
    net = net.copy()
    params = net.params()
    states = {k: AdamState.zeros_like(v, learning_rate) for k, v in params.items()}
    losses = np.empty((n_updates, 3))
    start = time.perf_counter()
    for i in range(n_updates):
        g = bptt_gradients(net, batches(i), feedback)
        losses[i] = g.loss, g.number_loss, g.gesture_loss
        for k, p in params.items():
            p[...] = adam_step(p, g.grads[k], states[k])
    return net, TrainTrace(losses, time.perf_counter() - start)


def _sub_epoch_batches(cfg, convention, table: GestureTable, rng: np.random.Generator):
    return lambda _: wire_arrays(cfg, gen_sub_epoch(convention, table, rng).arrays)


def stage1a_config(spec: TrainSpec) -> BlockConfig:
    return BlockConfig(use_visual_input=False, use_number_output=True, hidden_size=spec.stage1a_hidden)


def stage1b_config(spec: TrainSpec) -> BlockConfig:
    return BlockConfig(use_visual_input=True, use_number_output=False, use_gesture_output=True,
                       hidden_size=spec.stage1b_hidden)


def train_stage1a(spec: TrainSpec, rng: np.random.Generator) -> tuple[NetworkState, TrainTrace]:
    """Number recitation from the trigger alone, on the fixed two-sequence set."""
    cfg = stage1a_config(spec)
    net = init_network(cfg, rng)
    batch = wire_arrays(cfg, recitation_arrays())
    return fit(net, lambda _: batch, spec.stage1a_epochs, spec.stage1a_lr)


def train_stage1b(spec: TrainSpec, gesture_table: GestureTable,
                  rng: np.random.Generator) -> tuple[NetworkState, TrainTrace]:
    """Pointing pre-training: trigger and vision to gestures (condition 2 set-up)."""
    cfg = stage1b_config(spec)
    net = init_network(cfg, rng)
    return fit(net, _sub_epoch_batches(cfg, spec.convention, gesture_table, rng),
               spec.stage1b_sub_epochs, spec.stage1b_lr)


def train_stage2(spec: TrainSpec, pre_a: NetworkState | None, pre_b: NetworkState | None,
                 gesture_table: GestureTable, rng: np.random.Generator) -> tuple[NetworkState, TrainTrace]:
    """Learning to count on a network assembled from whichever pre-trained parts exist."""
    cfg = spec.block_config
    net = stitch_pretrained(pre_a, pre_b, cfg, rng)
    return fit(net, _sub_epoch_batches(cfg, spec.convention, gesture_table, rng),
               spec.sub_epochs, spec.main_learning_rate, spec.feedback)


def train_one_stage(spec: TrainSpec, gesture_table: GestureTable,
                    rng: np.random.Generator) -> tuple[NetworkState, TrainTrace]:
    cfg = spec.block_config
    net = init_network(cfg, rng)
    return fit(net, _sub_epoch_batches(cfg, spec.convention, gesture_table, rng),
               spec.sub_epochs, spec.main_learning_rate, spec.feedback)


def evaluate(net: NetworkState, data: SequenceArrays, gesture_table: GestureTable | None) -> AccuracyReport:
    out = forward_sequence(net, wire_arrays(net.cfg, data), FREE_RUNNING)
    return accuracy_report(out.numbers, out.gestures, data, gesture_table)


def recites_correctly(net: NetworkState) -> bool:
    """Trigger on gives words 1..10 then silence; trigger off gives silence throughout."""
    data = recitation_arrays()
    out = forward_sequence(net, wire_arrays(net.cfg, data))
    return bool(np.array_equal(decode_numbers(out.numbers), data.words))


@dataclass
class RepetitionResult:
    repetition: int
    seed: int
    report: AccuracyReport
    net: NetworkState = field(repr=False)
    trace: TrainTrace = field(repr=False)
    stage1a_recites: bool | None = None
    stage1b_report: AccuracyReport | None = None
    stage1a_trace: TrainTrace | None = field(default=None, repr=False)
    stage1b_trace: TrainTrace | None = field(default=None, repr=False)


def _pretrain_key(kind: str, spec: TrainSpec, seed: int, table: GestureTable | None):
    if kind == "1a":
        return kind, seed, spec.stage1a_hidden, spec.stage1a_epochs, spec.stage1a_lr
    return (kind, seed, spec.convention.value, spec.stage1b_hidden, spec.stage1b_sub_epochs, spec.stage1b_lr,
            table.vectors.tobytes())


def run_repetition(spec: TrainSpec, gesture_table: GestureTable, repetition: int,
                   cache: dict | None = None) -> RepetitionResult:
    """Train and test one repetition.

    ``cache`` may hold pre-trained networks from earlier calls; a stage is
    reused only when its seed and settings match exactly, so results do not
    depend on whether the cache is used.
    """
    seed = spec.base_seed + repetition
    with threadpool_limits(limits=1):
        pre_a = pre_b = trace_a = trace_b = None
        if spec.uses_stage1a:
            key = _pretrain_key("1a", spec, seed, gesture_table)
            if cache is None or key not in cache:
                res = train_stage1a(spec, make_rng(seed, STREAM_STAGE1A))
                if cache is not None:
                    cache[key] = res
            else:
                res = cache[key]
            pre_a, trace_a = res
        if spec.uses_stage1b:
            key = _pretrain_key("1b", spec, seed, gesture_table)
            if cache is None or key not in cache:
                res = train_stage1b(spec, gesture_table, make_rng(seed, STREAM_STAGE1B))
                if cache is not None:
                    cache[key] = res
            else:
                res = cache[key]
            pre_b, trace_b = res

        main_rng = make_rng(seed, STREAM_MAIN)
        if spec.study == 1:
            net, trace = train_one_stage(spec, gesture_table, main_rng)
        else:
            net, trace = train_stage2(spec, pre_a, pre_b, gesture_table, main_rng)

        test = gen_sub_epochs(spec.test_sets, spec.convention, gesture_table, make_rng(seed, STREAM_TEST))
        report = evaluate(net, test, gesture_table)
        return RepetitionResult(
            repetition=repetition, seed=seed, report=report, net=net, trace=trace,
            stage1a_recites=recites_correctly(pre_a) if pre_a is not None else None,
            stage1b_report=evaluate(pre_b, test, gesture_table) if pre_b is not None else None,
            stage1a_trace=trace_a, stage1b_trace=trace_b,
        )


@dataclass
class RunReport:
    spec: TrainSpec
    repetitions: list[RepetitionResult]

    def values(self, metric: str) -> list[float]:
        """Per-repetition values of ``counting``, ``gesture`` or ``stage1b_gesture``."""
        if metric == "counting":
            return [r.report.counting_accuracy for r in self.repetitions]
        if metric == "gesture":
            return [r.report.gesture_accuracy for r in self.repetitions]
        if metric == "stage1b_gesture":
            return [r.stage1b_report.gesture_accuracy for r in self.repetitions if r.stage1b_report is not None]
        raise KeyError(metric)

    def summary(self, metric: str) -> tuple[float, float] | None:
        v = self.values(metric)
        if not v or any(x is None for x in v):
            return None
        if len(v) == 1:
            return float(v[0]), float("nan")
        return aggregate(v)


def _run_one(args):
    spec, table, r = args
    return run_repetition(spec, table, r)


def run_experiment(spec: TrainSpec, gesture_table: GestureTable, workers: int = 1,
                   cache: dict | None = None) -> RunReport:
    """All repetitions of ``spec``; results are ordered by repetition index.

    With ``workers > 1`` repetitions run in separate processes. Every
    repetition pins BLAS to one thread, so serial and parallel runs give
    bit-identical results.
    """
    reps = range(spec.repetitions)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [(spec, gesture_table, r) for r in reps]))
    else:
        results = [run_repetition(spec, gesture_table, r, cache) for r in reps]
    return RunReport(spec, results)


def desk_scale(spec: TrainSpec, factor: float) -> TrainSpec:
    """Uniformly shrink repetitions, sub-epochs, pre-training epochs and test sets by ``factor``."""
    if not 0.0 < factor <= 1.0:
        raise ValueError("desk-scale factor must lie in (0, 1]")
    shrink = lambda n: max(2, int(round(n * factor)))  # noqa: E731
    return replace(spec, repetitions=shrink(spec.repetitions), sub_epochs=shrink(spec.sub_epochs),
                   test_sets=shrink(spec.test_sets), stage1a_epochs=shrink(spec.stage1a_epochs),
                   stage1b_sub_epochs=shrink(spec.stage1b_sub_epochs))
