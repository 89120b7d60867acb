#!/usr/bin/env python3
"""Pointing postures of the synthetic arm and their 3-component gesture code."""
import numpy as np

from pointcount.gestures import BASE, ArmModel, build_gesture_table, forward_kinematics, solve_pointing

np.set_printoptions(precision=3, suppress=True)

## The arm points at 20 targets spread along a line in front of it
arm = ArmModel()
print("first and last target (m):", arm.target(0), arm.target(19))

## Inverse kinematics: six joint angles per target
q = solve_pointing(arm, 7)
print("joints for target 7:", q)
print("fingertip error (mm):", 1000 * np.linalg.norm(forward_kinematics(arm, q) - arm.target(7)))

## PCA over the 20 pointing postures plus the base posture
table = build_gesture_table(arm)
print("variance kept by 3 components:", round(table.variance_fraction, 5))
print("per-component fractions:", table.component_fractions)

## The scaled gesture vectors, one row per position, base last
print(table.vectors)
print("base row:", table.vectors[BASE])
print("closest pair of entries:", round(table.min_pairwise_distance(), 4))

## Save and reload
table.save("gestures.json")
print("reloaded equal:", np.array_equal(type(table).load("gestures.json").vectors, table.vectors))
