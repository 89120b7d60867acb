#!/usr/bin/env python3
"""What one training sub-epoch looks like."""
import numpy as np

from pointcount.datagen import Convention, Scene, build_sequence_pair, gen_sub_epoch, recitation_arrays
from pointcount.gestures import build_gesture_table
from pointcount.numerics import make_rng

table = build_gesture_table()

## A scene with three objects at positions 2, 9 and 15
scene = Scene.from_positions([15, 2, 9])
print("visual input:", np.round(scene.visual, 3))

## Each scene gives a silent trigger-off sequence and a counting trigger-on sequence
for conv in Convention:
    pair = build_sequence_pair(scene, conv, table)
    on, off = pair.on_sequence, pair.off_sequence
    print(f"\n{conv.value}")
    print("  words (on): ", on.words[0])
    print("  words (off):", off.words[0])
    print("  gesture labels (on): ", on.gesture_labels[0])
    print("  gesture labels (off):", off.gesture_labels[0])

## A sub-epoch holds one pair for every numerosity 0..10 in shuffled order
sub = gen_sub_epoch("go_to_base", table, make_rng(0))
print("\nnumerosities in this sub-epoch:", sub.numerosities)
print("array shapes:", sub.arrays.visual.shape, sub.arrays.gestures.shape, sub.arrays.numbers.shape)

## The recitation task used for number-word pre-training has no visual input
rec = recitation_arrays()
print("recitation words:", rec.words)
