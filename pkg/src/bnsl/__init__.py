"""Multi-resolution (high-low-high) flow-matching sampling on analytic Gaussian fields.

Submodules:

- :mod:`bnsl.latent` -- noise streams, interpolation
- :mod:`bnsl.schedule` -- shifted sigma schedules and stage truncation
- :mod:`bnsl.resample` -- nearest/bilinear/bicubic/Lanczos resizing
- :mod:`bnsl.fields` -- Gaussian-field targets, closed-form and Monte Carlo velocities
- :mod:`bnsl.sampler` -- Euler stages and pipeline orchestration
- :mod:`bnsl.cost` -- attention FLOPs accounting
- :mod:`bnsl.metrics` -- moment errors, PSNR, spectra, convergence order
"""

from .cost import ArchSpec, pipeline_flops
from .fields import GaussianFieldModel, MixtureModel
from .latent import RngStream, sample_noise
from .resample import ResampleKernel, resize
from .sampler import PipelineConfig, StageConfig, bottleneck_sample, cascaded_sample, standard_sample

__version__ = "0.1.0"

__all__ = [
    "ArchSpec",
    "GaussianFieldModel",
    "MixtureModel",
    "PipelineConfig",
    "ResampleKernel",
    "RngStream",
    "StageConfig",
    "bottleneck_sample",
    "cascaded_sample",
    "pipeline_flops",
    "resize",
    "sample_noise",
    "standard_sample",
]
