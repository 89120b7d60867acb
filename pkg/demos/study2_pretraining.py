#!/usr/bin/env python3
"""Staged training: recitation, pointing, then counting with the stitched network."""
from pointcount.gestures import build_gesture_table
from pointcount.training import TrainSpec, run_experiment

SUB_EPOCHS = 20000
REPETITIONS = 2

table = build_gesture_table()
cache = {}  # pre-trained networks, shared between options with matching seeds

for convention in ("go_to_base", "stay_at_last"):
    for pretraining in ("none", "stage1a", "stage1b", "both"):
        spec = TrainSpec(study=2, condition=3, convention=convention, pretraining=pretraining,
                         sub_epochs=SUB_EPOCHS, stage1b_sub_epochs=SUB_EPOCHS, repetitions=REPETITIONS,
                         test_sets=20)
        report = run_experiment(spec, table, cache=cache)
        c, g = report.summary("counting"), report.summary("gesture")
        line = f"{convention:13s} {pretraining:8s} counting {100 * c[0]:5.1f}  gesture {100 * g[0]:5.1f}"
        if report.spec.uses_stage1a:
            line += f"  recitation ok {sum(r.stage1a_recites for r in report.repetitions)}/{REPETITIONS}"
        if report.spec.uses_stage1b:
            line += f"  pointing-only net gesture {100 * report.summary('stage1b_gesture')[0]:5.1f}"
        print(line)

## Early learning: counting loss over the first 1000 sub-epochs
for pretraining in ("none", "both"):
    spec = TrainSpec(study=2, condition=3, convention="go_to_base", pretraining=pretraining,
                     sub_epochs=SUB_EPOCHS, stage1b_sub_epochs=SUB_EPOCHS, repetitions=REPETITIONS, test_sets=20)
    trace = run_experiment(spec, table, cache=cache).repetitions[0].trace
    print(pretraining, "mean counting loss, first 1000 sub-epochs:", round(float(trace.counting[:1000].mean()), 3))
