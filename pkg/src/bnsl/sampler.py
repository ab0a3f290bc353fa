"""Euler flow sampling across a sequence of resolution stages.

A run starts from Gaussian noise at the first stage's resolution. Every later
stage resizes the previous stage's clean output, re-noises it to the sigma at
which that stage's (re-shifted) schedule is entered, and integrates the
remaining steps. One stage at full strength is plain flow-matching sampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .latent import RngStream, lerp, sample_noise
from .resample import ResampleKernel, resize
from .schedule import StageSchedule, stage_schedule

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StageConfig:
    height: int
    width: int
    steps: int
    strength: float = 1.0
    shift: float = 1.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError(f"stage dims must be >= 1, got {self.height}x{self.width}")
        if self.steps < 1:
            raise ConfigError(f"stage steps must be >= 1, got {self.steps}")
        if not 0.0 < self.strength <= 1.0:
            raise ConfigError(f"strength must lie in (0, 1], got {self.strength}")
        if not self.shift > 0.0:
            raise ConfigError(f"shift must be positive, got {self.shift}")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple
    model: object = None
    kernel: ResampleKernel = ResampleKernel("lanczos")
    seed: int = 0
    batch: int = 1
    channels: int = 1
    frames: int | None = None
    disable_reshift: bool = False
    disable_noise_reintroduction: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ConfigError("a pipeline needs at least one stage")
        if self.stages[0].strength != 1.0:
            raise ConfigError(
                f"the first stage must start from pure noise (strength 1), got {self.stages[0].strength}"
            )
        if self.batch < 1 or self.channels < 1 or (self.frames is not None and self.frames < 1):
            raise ConfigError("batch, channels and frames must be >= 1")

    @property
    def total_steps(self) -> int:
        return sum(s.steps for s in self.stages)

    def latent_shape(self, height: int, width: int) -> tuple[int, ...]:
        lead = (self.batch, self.channels) if self.frames is None else (self.batch, self.channels, self.frames)
        return lead + (height, width)

    def stage_schedules(self) -> list[StageSchedule]:
        first_shift = self.stages[0].shift
        return [
            stage_schedule(s.steps, first_shift if self.disable_reshift else s.shift, s.strength)
            for s in self.stages
        ]


def lint_config(config: PipelineConfig) -> list[str]:
    """Warnings for configs that are valid but not high-low-high shaped."""
    areas = [s.height * s.width for s in config.stages]
    if len(areas) < 2:
        return []
    pairs = list(zip(areas, areas[1:]))
    if all(a <= b for a, b in pairs) or all(a >= b for a, b in pairs):
        msg = "stage resolutions are monotone; this is not a high-low-high schedule"
        log.warning(msg)
        return [msg]
    return []


@dataclass
class RunResult:
    final: np.ndarray
    stage_latents: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)  # (height, width, count) per stage
    manifest: dict = field(default_factory=dict)

    @property
    def eval_counts(self) -> list[int]:
        return [count for _, _, count in self.evaluations]


def euler_step(x: np.ndarray, u: np.ndarray, sigma_from: float, sigma_to: float) -> np.ndarray:
    if not (0.0 <= sigma_to < sigma_from <= 1.0):
        raise ValueError(f"Euler steps must decrease sigma within [0, 1], got {sigma_from} -> {sigma_to}")
    return x + u * (sigma_to - sigma_from)


def reintroduce_noise(x: np.ndarray, tau: float, rng: RngStream) -> np.ndarray:
    """Re-noise a latent to level `tau`: ``(1 - tau) x + tau * eta``."""
    eta = sample_noise(np.shape(x), rng)
    return lerp(x, eta, tau)


def denoise_stage(x: np.ndarray, field, sched: StageSchedule) -> tuple[np.ndarray, int]:
    """Integrate from the stage's start sigma down to zero.

    Returns the clean latent and the number of velocity evaluations.
    """
    sig = sched.active_sigmas
    for s_from, s_to in zip(sig[:-1], sig[1:]):
        x = euler_step(x, field.velocity(x, s_from), s_from, s_to)
    return x, sig.size - 1


def _model(config: PipelineConfig):
    if config.model is None:
        raise ConfigError("pipeline config has no target model")
    for s in config.stages:
        config.model.prepare(s.height, s.width)
    return config.model


def bottleneck_sample(config: PipelineConfig, field=None) -> RunResult:
    """Run every stage of `config`; `field` overrides the velocity source."""
    model = _model(config)
    field = field or model
    run = RngStream(config.seed)
    schedules = config.stage_schedules()
    first = config.stages[0]
    x = sample_noise(config.latent_shape(first.height, first.width), run.spawn(0, "init"))

    result = RunResult(final=x)
    taus = []
    for i, (stage, sched) in enumerate(zip(config.stages, schedules)):
        if i > 0:
            x = resize(x, stage.height, stage.width, config.kernel)
            if not config.disable_noise_reintroduction:
                x = reintroduce_noise(x, sched.start_sigma, run.spawn(i, "eta"))
        taus.append(sched.start_sigma)
        x, count = denoise_stage(x, field, sched)
        result.stage_latents.append(x)
        result.evaluations.append((stage.height, stage.width, count))
    result.final = x
    result.manifest = {
        "seed": config.seed,
        "stages": [
            {
                "height": s.height,
                "width": s.width,
                "steps": s.steps,
                "strength": s.strength,
                "shift": sch.schedule.shift_factor,
                "start_index": sch.start_index,
                "start_sigma": tau,
                "evaluations": count,
            }
            for s, sch, tau, (_, _, count) in zip(config.stages, schedules, taus, result.evaluations)
        ],
        "disable_reshift": config.disable_reshift,
        "disable_noise_reintroduction": config.disable_noise_reintroduction,
    }
    return result


def standard_sample(config: PipelineConfig, field=None) -> RunResult:
    if len(config.stages) != 1:
        raise ConfigError("standard sampling takes exactly one stage")
    return bottleneck_sample(config, field)


def cascaded_sample(config: PipelineConfig, field=None) -> RunResult:
    areas = [s.height * s.width for s in config.stages]
    if any(a > b for a, b in zip(areas, areas[1:])):
        raise ConfigError("cascaded sampling needs stage resolutions that never decrease")
    return bottleneck_sample(config, field)


def single_stage(config: PipelineConfig, height: int, width: int, steps: int, shift: float) -> PipelineConfig:
    """Copy of `config` reduced to one full-strength stage."""
    return replace(config, stages=(StageConfig(height, width, steps, 1.0, shift),))


class ScaledField:
    """Wrap a velocity source and multiply its output; used to perturb checks."""

    def __init__(self, field, scale: float):
        self.field = field
        self.scale = scale

    def prepare(self, h, w):
        self.field.prepare(h, w)
        return self

    def velocity(self, x, sigma):
        return self.scale * self.field.velocity(x, sigma)
