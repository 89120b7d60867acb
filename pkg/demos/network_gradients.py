#!/usr/bin/env python3
"""Forward pass, BPTT gradients and a finite-difference check on a small network."""
import numpy as np

from pointcount.datagen import ConditionSpec, gen_sub_epoch, wire_arrays
from pointcount.gestures import build_gesture_table
from pointcount.network import forward_sequence, bptt_gradients, init_network, sequence_loss
from pointcount.numerics import make_rng

rng = make_rng(3)
table = build_gesture_table()

## Condition 4: visual input, gesture output fed back as input, number output
spec = ConditionSpec(4, "stay_at_last")
net = init_network(spec.block_config(12), rng)
print({k: v.shape for k, v in net.params().items()})

batch = wire_arrays(spec, gen_sub_epoch(spec.convention, table, rng).arrays)
out = forward_sequence(net, batch)
print("hidden", out.hidden.shape, "numbers", out.numbers.shape, "gestures", out.gestures.shape)

## Exact gradients by backpropagation through time
g = bptt_gradients(net, batch)
print(f"loss {g.loss:.3f} = counting {g.number_loss:.3f} + gesture {g.gesture_loss:.3f}")

## Compare a few entries with central differences
h = 1e-6
for name, idx in [("w_in", (0, 0)), ("w_in", (5, 30)), ("w_num", (3, 7)), ("b_ges", (1,))]:
    p = net.params()[name]
    plus, minus = p.copy(), p.copy()
    plus[idx] += h
    minus[idx] -= h
    fd = (sequence_loss(net.replace(**{name: plus}), batch) - sequence_loss(net.replace(**{name: minus}), batch)) / (2 * h)
    print(f"{name}{idx}: bptt {g.grads[name][idx]: .6e}  finite difference {fd: .6e}")
