"""Noise-level schedules.

Sigmas run from 1.0 (pure noise) down to 0.0 (clean data). A stage of the
sampler uses a uniform grid, warped by the shift map
``s * sigma / (1 + (s - 1) * sigma)``, and then truncated at the index where
re-noising enters the schedule.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SigmaSchedule:
    sigmas: np.ndarray
    shift_factor: float = 1.0

    def __post_init__(self):
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if sig.ndim != 1 or sig.size < 2:
            raise ValueError("a schedule needs at least two sigmas")
        if sig[0] != 1.0 or sig[-1] != 0.0:
            raise ValueError("schedules must start at 1.0 and end at 0.0")
        if not np.all(np.diff(sig) < 0):
            raise ValueError("sigmas must be strictly decreasing")
        sig.setflags(write=False)
        object.__setattr__(self, "sigmas", sig)

    @property
    def num_steps(self) -> int:
        return self.sigmas.size - 1


@dataclass(frozen=True)
class StageSchedule:
    schedule: SigmaSchedule
    start_index: int
    strength: float

    @property
    def start_sigma(self) -> float:
        return float(self.schedule.sigmas[self.start_index])

    @property
    def steps_to_run(self) -> int:
        return self.schedule.num_steps - self.start_index

    @property
    def active_sigmas(self) -> np.ndarray:
        return self.schedule.sigmas[self.start_index :]


def build_base_sigmas(num_steps: int) -> SigmaSchedule:
    if int(num_steps) != num_steps or num_steps < 1:
        raise ValueError(f"need at least one step, got {num_steps}")
    n = int(num_steps)
    sig = 1.0 - np.arange(n + 1) / n
    sig[-1] = 0.0
    return SigmaSchedule(sig, 1.0)


def _check_shift(s: float) -> float:
    s = float(s)
    if not (s > 0.0 and math.isfinite(s)):
        raise ValueError(f"shift factor must be positive, got {s}")
    return s


def shift_sigma(sigma, s: float):
    """Apply the shift map to a scalar or array of sigmas in [0, 1]."""
    s = _check_shift(s)
    sig = np.asarray(sigma, dtype=np.float64)
    if np.any((sig < 0.0) | (sig > 1.0)):
        raise ValueError("sigma must lie in [0, 1]")
    if s == 1.0:
        out = sig.copy()
    else:
        out = s * sig / (1.0 + (s - 1.0) * sig)
        # pin the fixed points exactly
        out = np.where(sig == 1.0, 1.0, np.where(sig == 0.0, 0.0, out))
    return float(out) if out.ndim == 0 else out


def shift_schedule(base: SigmaSchedule, s: float) -> SigmaSchedule:
    shifted = shift_sigma(base.sigmas, s)
    return SigmaSchedule(shifted, base.shift_factor * _check_shift(s))


def stage_schedule(num_steps: int, shift: float, strength: float) -> StageSchedule:
    """Shifted schedule for one stage, entered at ``floor(N * (1 - strength))``.

    A stage of strength ``w`` runs ``N - floor(N * (1 - w))`` Euler steps,
    i.e. roughly ``N * w`` of them, rounding in favour of more denoising.
    """
    strength = float(strength)
    if not 0.0 < strength <= 1.0:
        raise ValueError(f"strength must lie in (0, 1], got {strength}")
    sched = shift_schedule(build_base_sigmas(num_steps), shift)
    n = sched.num_steps
    # the small guard stops e.g. 20 * (1 - 0.8) = 3.9999999999999996 flooring to 3
    start = int(math.floor(n * (1.0 - strength) + 1e-9))
    start = min(max(start, 0), n - 1)
    return StageSchedule(sched, start, strength)


def export_schedule_csv(schedules) -> str:
    """CSV with a ``step`` column and one sigma column per schedule."""
    schedules = list(schedules)
    if not schedules:
        raise ValueError("need at least one schedule")
    lengths = {s.sigmas.size for s in schedules}
    if len(lengths) != 1:
        raise ValueError("all schedules must have the same number of steps")
    buf = io.StringIO(newline="")
    buf.write(",".join(["step"] + [f"s={s.shift_factor:g}" for s in schedules]) + "\n")
    for j in range(lengths.pop()):
        row = [str(j)] + [f"{s.sigmas[j]:.9g}" for s in schedules]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
