"""
Attention cost of full-size presets
===================================

Per-layer attention FLOPs grow with both S*D^2 and S^2*D, so halving the
side length cuts the cost of a step by more than 4x when text tokens are
negligible, and by less when they are not.
"""

from dataclasses import replace

from bnsl.config import preset
from bnsl.cost import FLUX_ARCH, pipeline_flops, resolution_speedup

for name in ("flux-x3", "hunyuan-x2.5"):
    cfg = preset(name)
    base = pipeline_flops(cfg.baseline, cfg.arch)
    ours = pipeline_flops(cfg.pipeline, cfg.arch, baseline=base)
    print(f"{name:>13}: baseline {base.total_tflops:10.2f} T, bottleneck {ours.total_tflops:10.2f} T, "
          f"speedup {ours.speedup:.2f}x")
    for e in ours.entries:
        print(f"{'':>15}{e.height}x{e.width}: {e.evaluations:2d} evals, {e.flops / 1e12:9.2f} T")

print("1024 -> 512 per-step ratio, no text tokens:",
      round(resolution_speedup(1024, 1024, 512, 512, replace(FLUX_ARCH, text_tokens=0)), 3))
print("1024 -> 512 per-step ratio, 512 text tokens:", round(resolution_speedup(1024, 1024, 512, 512), 3))
