"""JSON experiment configs and the built-in presets."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema

from .cost import ARCHS, ArchSpec
from .fields import field_from_spec
from .resample import KERNELS, ResampleKernel
from .sampler import ConfigError, PipelineConfig, StageConfig

STAGE_FIELDS = ("heights", "widths", "steps", "strengths", "shifts")

_STAGES_SCHEMA = {
    "type": "object",
    "required": list(STAGE_FIELDS),
    "additionalProperties": False,
    "properties": {
        "heights": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "widths": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "steps": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "strengths": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        },
        "shifts": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
    },
}

_GAUSSIAN_SCHEMA = {
    "type": "object",
    "properties": {
        "mean": {"type": "number"},
        "amplitude": {"type": "number", "exclusiveMinimum": 0},
        "length_scale": {"type": "number", "exclusiveMinimum": 0},
        "weight": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bnsl experiment config",
    "type": "object",
    "required": ["stages"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "stages": _STAGES_SCHEMA,
        "baseline": _STAGES_SCHEMA,
        "frames": {"type": ["integer", "null"], "minimum": 1},
        "kernel": {"enum": list(KERNELS)},
        "model": {
            "type": "object",
            "properties": dict(
                _GAUSSIAN_SCHEMA["properties"],
                mixture={"type": "array", "minItems": 1, "items": _GAUSSIAN_SCHEMA},
            ),
            "additionalProperties": False,
        },
        "arch": {
            "oneOf": [
                {"enum": sorted(ARCHS)},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        k: {"type": "integer", "minimum": 0}
                        for k in ArchSpec.__dataclass_fields__
                    },
                },
            ]
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "runs": {"type": "integer", "minimum": 1},
        "batch": {"type": "integer", "minimum": 1},
        "channels": {"type": "integer", "minimum": 1},
        "disable_reshift": {"type": "boolean"},
        "disable_noise_reintroduction": {"type": "boolean"},
        "psnr_range": {"type": "number", "exclusiveMinimum": 0},
        "previews": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "frames": None,
    "kernel": "lanczos",
    "model": {"mean": 0.0, "amplitude": 1.0, "length_scale": 0.35},
    "arch": "flux",
    "seed": 0,
    "runs": 1,
    "batch": 1,
    "channels": 1,
    "disable_reshift": False,
    "disable_noise_reintroduction": False,
    "psnr_range": 6.0,
    "previews": 2,
}


def _stages(heights, widths, steps, strengths, shifts):
    return dict(heights=heights, widths=widths, steps=steps, strengths=strengths, shifts=shifts)


PRESETS = {
    "flux-baseline": {
        "name": "flux-baseline",
        "stages": _stages([1024], [1024], [50], [1.0], [3.0]),
        "arch": "flux",
    },
    "flux-x3": {
        "name": "flux-x3",
        "stages": _stages([1024, 512, 1024], [1024, 512, 1024], [6, 20, 8], [1.0, 0.8, 0.6], [9.0, 6.0, 9.0]),
        "baseline": _stages([1024], [1024], [50], [1.0], [3.0]),
        "arch": "flux",
    },
    "hunyuan-baseline": {
        "name": "hunyuan-baseline",
        "stages": _stages([720], [1280], [50], [1.0], [7.0]),
        "frames": 129,
        "arch": "hunyuan",
    },
    "hunyuan-x2.5": {
        "name": "hunyuan-x2.5",
        "stages": _stages([720, 544, 720], [1280, 960, 1280], [4, 24, 16], [1.0, 0.8, 0.7], [7.0, 9.0, 9.0]),
        "baseline": _stages([720], [1280], [50], [1.0], [7.0]),
        "frames": 129,
        "arch": "hunyuan",
    },
    # the image preset with every resolution divided by 32
    "paper-x3-desk": {
        "name": "paper-x3-desk",
        "stages": _stages([32, 16, 32], [32, 16, 32], [6, 20, 8], [1.0, 0.8, 0.6], [9.0, 6.0, 9.0]),
        "baseline": _stages([32], [32], [27], [1.0], [3.0]),
        "model": {"mean": 0.0, "amplitude": 1.0, "length_scale": 0.35},
        "arch": "desk",
        "batch": 256,
    },
    "desk-baseline": {
        "name": "desk-baseline",
        "stages": _stages([32], [32], [27], [1.0], [3.0]),
        "model": {"mean": 0.0, "amplitude": 1.0, "length_scale": 0.35},
        "arch": "desk",
        "batch": 256,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    pipeline: PipelineConfig
    arch: ArchSpec
    runs: int = 1
    baseline: PipelineConfig | None = None
    psnr_range: float = 6.0
    previews: int = 2
    raw: dict | None = None

    def with_seed(self, seed: int) -> "ExperimentConfig":
        base = replace(self.baseline, seed=seed) if self.baseline else None
        return replace(self, pipeline=replace(self.pipeline, seed=seed), baseline=base)


def _stage_list(block: dict, where: str) -> list[StageConfig]:
    k = len(block["heights"])
    for name in STAGE_FIELDS:
        if len(block[name]) != k:
            raise ConfigError(
                f"{where}.{name} has {len(block[name])} entries but {where}.heights has {k}; "
                "all stage arrays must have the same length"
            )
    return [
        StageConfig(int(h), int(w), int(n), float(s), float(f))
        for h, w, n, s, f in zip(*(block[name] for name in STAGE_FIELDS))
    ]


def validate(doc: dict) -> dict:
    """Schema-check `doc` and fill defaults; errors name the offending field path."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}")
    full = copy.deepcopy(DEFAULTS)
    full.update(copy.deepcopy(doc))
    full.setdefault("name", "custom")
    return full


def parse_config(doc: dict) -> ExperimentConfig:
    full = validate(doc)
    arch = ARCHS[full["arch"]] if isinstance(full["arch"], str) else ArchSpec(**full["arch"])
    try:
        common = dict(
            model=field_from_spec(full["model"]),
            kernel=ResampleKernel(full["kernel"]),
            seed=full["seed"],
            batch=full["batch"],
            channels=full["channels"],
            frames=full["frames"],
        )
        pipeline = PipelineConfig(
            stages=_stage_list(full["stages"], "stages"),
            disable_reshift=full["disable_reshift"],
            disable_noise_reintroduction=full["disable_noise_reintroduction"],
            **common,
        )
        baseline = None
        if "baseline" in full:
            baseline = PipelineConfig(stages=_stage_list(full["baseline"], "baseline"), **common)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        name=full["name"],
        pipeline=pipeline,
        arch=arch,
        runs=full["runs"],
        baseline=baseline,
        psnr_range=full["psnr_range"],
        previews=full["previews"],
        raw=full,
    )


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Inverse of :func:`parse_config` (defaults are written out explicitly)."""
    p = cfg.pipeline

    def stages(pc):
        return _stages(
            [s.height for s in pc.stages],
            [s.width for s in pc.stages],
            [s.steps for s in pc.stages],
            [s.strength for s in pc.stages],
            [s.shift for s in pc.stages],
        )

    arch_name = next((k for k, v in ARCHS.items() if v == cfg.arch), None)
    doc = {
        "name": cfg.name,
        "stages": stages(p),
        "frames": p.frames,
        "kernel": p.kernel.kind,
        "model": p.model.to_spec(),
        "arch": arch_name or dict(vars(cfg.arch)),
        "seed": p.seed,
        "runs": cfg.runs,
        "batch": p.batch,
        "channels": p.channels,
        "disable_reshift": p.disable_reshift,
        "disable_noise_reintroduction": p.disable_noise_reintroduction,
        "psnr_range": cfg.psnr_range,
        "previews": cfg.previews,
    }
    if cfg.baseline is not None:
        doc["baseline"] = stages(cfg.baseline)
    return doc


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<root>: config must be a JSON object")
    return parse_config(doc)


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return parse_config(PRESETS[name])
