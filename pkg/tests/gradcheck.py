"""Central finite-difference oracle for the BPTT gradients."""
import numpy as np

from pointcount.datagen import ConditionSpec, SequenceArrays, gen_sub_epoch, wire_arrays
from pointcount.network import FREE_RUNNING, bptt_gradients, init_network, sequence_loss
from pointcount.numerics import make_rng

STEP = 1e-6
# Denominator floor for the relative error. Round-off in the differenced loss
# (loss ~ 40, step 1e-6) is ~1e-8 in absolute terms whatever the entry size,
# so entries below the floor are effectively compared with 1e-7 absolute slack.
FLOOR = 1e-2


def truncate(data: SequenceArrays, steps: int, rows) -> SequenceArrays:
    return SequenceArrays(data.trigger[rows, :steps], data.visual[rows, :steps], data.gesture_labels[rows, :steps],
                          data.gestures[rows, :steps], data.numbers[rows, :steps], data.numerosity[rows],
                          data.convention, data.rest)


def random_instance(condition: int, convention: str, seed: int, hidden: int = 8, steps: int = 5, table=None):
    rng = make_rng(seed)
    spec = ConditionSpec(condition, convention)
    net = init_network(spec.block_config(hidden), rng)
    net = net.replace(**{k: v + (rng.normal(0.0, 0.5, v.shape) if k.startswith("b") else 0.0)
                         for k, v in net.params().items()})
    data = gen_sub_epoch(convention, table, rng).arrays
    pair = 2 * int(rng.integers(11))
    return net, wire_arrays(spec, truncate(data, steps, slice(pair, pair + 2)))


def max_relative_error(net, batch, feedback=FREE_RUNNING) -> float:
    analytic = bptt_gradients(net, batch, feedback).grads
    worst = 0.0
    for name, value in net.params().items():
        for idx in np.ndindex(value.shape):
            plus, minus = value.copy(), value.copy()
            plus[idx] += STEP
            minus[idx] -= STEP
            numeric = (sequence_loss(net.replace(**{name: plus}), batch, feedback)
                       - sequence_loss(net.replace(**{name: minus}), batch, feedback)) / (2 * STEP)
            a = analytic[name][idx]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), FLOOR))
    return worst
