"""
Shifted sigma schedules
=======================

A shift factor s bends a uniform sigma grid towards the noisy end, so more
of the step budget is spent at high noise. Partial-strength stages then
start part-way down the shifted grid.
"""

import numpy as np

from bnsl.schedule import build_base_sigmas, export_schedule_csv, shift_schedule, stage_schedule

base = build_base_sigmas(10)
print("uniform grid:", np.round(base.sigmas, 3))

# larger shifts hold sigma near 1 for longer
for s in (3.0, 9.0):
    print(f"s={s:g}:        ", np.round(shift_schedule(base, s).sigmas, 3))

# shifting twice is the same as shifting once by the product
twice = shift_schedule(shift_schedule(base, 2.0), 3.0)
print("max |shift(2) then shift(3) - shift(6)|:", np.abs(twice.sigmas - shift_schedule(base, 6.0).sigmas).max())

# a stage with 20 steps at strength 0.8 skips the first 4 and runs 16
sch = stage_schedule(20, 6.0, 0.8)
print(f"start index {sch.start_index}, start sigma {sch.start_sigma:.4f}, steps run {sch.steps_to_run}")

# the CSV export used for plotting schedule curves
print(export_schedule_csv([shift_schedule(build_base_sigmas(5), s) for s in (1, 3, 5, 7)]))
