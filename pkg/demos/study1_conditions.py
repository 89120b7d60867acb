#!/usr/bin/env python3
"""Counting with and without gestures (conditions 1, 5 and 7).

Full-length runs take about 25 s per repetition. Lower SUB_EPOCHS for a
quicker look; the ordering usually shows from about 5000 sub-epochs.
"""
from pointcount.datagen import CONDITION_LABELS
from pointcount.evaluation import one_way_anova
from pointcount.gestures import build_gesture_table
from pointcount.training import TrainSpec, run_experiment

SUB_EPOCHS = 20000
REPETITIONS = 3

table = build_gesture_table()
results = {}
for condition in (1, 5, 7):
    spec = TrainSpec(condition=condition, sub_epochs=SUB_EPOCHS, repetitions=REPETITIONS, test_sets=20)
    results[condition] = report = run_experiment(spec, table)
    mean, sd = report.summary("counting")
    inputs, outputs = CONDITION_LABELS[condition]
    print(f"condition {condition} ({inputs} -> {outputs}): counting {100 * mean:.1f}% ({100 * sd:.1f})")

## Gestures as input help counting
res = one_way_anova(results[1].values("counting"), results[7].values("counting"))
print(f"1 vs 7: F({res.df_between}, {res.df_within}) = {res.F:.2f}, p = {res.p:.3g}")

## Per-numerosity accuracy of the first repetition of condition 1
by_n = results[1].repetitions[0].report.counting_by_numerosity
print({n: round(a, 2) for n, a in by_n.items()})
