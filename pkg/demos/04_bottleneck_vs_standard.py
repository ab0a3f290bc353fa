"""
High-low-high sampling at desk scale
====================================

Sample a 32x32 Gaussian field two ways: 27 full-resolution steps, and a
three-stage 32 -> 16 -> 32 pipeline that spends its middle stage at a
quarter of the tokens. Covariance error is measured against the known
target; attention FLOPs come from the cost model.
"""

from dataclasses import replace

from bnsl.config import preset
from bnsl.cost import pipeline_flops
from bnsl.experiments import mode_config, run_pipeline
from bnsl.metrics import moment_errors

cfg = preset("paper-x3-desk")
cfg = replace(cfg, pipeline=replace(cfg.pipeline, batch=1000), baseline=replace(cfg.baseline, batch=1000))

for mode in ("standard", "bottleneck", "no-noise-reintro"):
    pc = mode_config(cfg, mode)
    res = run_pipeline(pc)
    _, cov = moment_errors(res.final, cfg.pipeline.model)
    tflops = pipeline_flops(pc, cfg.arch).total_tflops
    print(f"{mode:>17}: evaluations {res.eval_counts}, cov error {cov:.3f}, attention {tflops:.4f} TFLOPs")

rep = pipeline_flops(cfg.pipeline, cfg.arch, baseline=cfg.baseline)
print(f"attention FLOPs reduction: {rep.speedup:.2f}x")
