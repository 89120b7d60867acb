#!/usr/bin/env python3
"""One-way ANOVA as used to compare repetitions of two or more runs."""
from scipy import stats

from pointcount.evaluation import aggregate, one_way_anova

## A hand-checkable case: group means 2 and 5, within-group variance 1
res = one_way_anova([1, 2, 3], [4, 5, 6])
print(f"F({res.df_between}, {res.df_within}) = {res.F}, p = {res.p:.6f}")

## Same numbers from scipy for comparison
print(stats.f_oneway([1, 2, 3], [4, 5, 6]))

## Three groups of per-repetition accuracies
groups = [[0.84, 0.88, 0.91, 0.79], [0.97, 0.99, 0.98, 0.99], [0.99, 1.0, 0.99, 0.98]]
for g in groups:
    print("mean %.3f  sd %.3f" % aggregate(g))
print(one_way_anova(*groups))
