"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary."""

import csv
import io
import json
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from bnsl.config import PRESETS, parse_config, preset, serialize_config
from bnsl.cost import FLUX_ARCH, attention_flops_per_layer, pipeline_flops, sequence_length
from bnsl.experiments import check_endpoint, check_order, mc_velocity_zscores, mode_config, run_pipeline
from bnsl.fields import GaussianFieldModel
from bnsl.io import decode_tensor, encode_tensor, load_tensor, save_tensor
from bnsl.latent import RngStream, sample_noise
from bnsl.metrics import moment_errors
from bnsl.sampler import PipelineConfig, StageConfig, bottleneck_sample, standard_sample
from bnsl.schedule import build_base_sigmas, export_schedule_csv, shift_schedule, shift_sigma

SEEDS = (0, 1, 2)
DESK_MODES = ("standard", "bottleneck", "no-reshift", "no-noise-reintro", "cascaded")


@pytest.fixture(scope="module")
def desk():
    """Covariance errors of every desk-scale mode, 2000 samples per seed."""
    t0 = time.perf_counter()
    cfg = preset("paper-x3-desk")
    cfg = replace(cfg, pipeline=replace(cfg.pipeline, batch=2000), baseline=replace(cfg.baseline, batch=2000))
    errs = {}
    for mode in DESK_MODES:
        pc = mode_config(cfg, mode)
        errs[mode] = [moment_errors(run_pipeline(replace(pc, seed=s)).final, cfg.pipeline.model)[1] for s in SEEDS]
    return cfg, errs, time.perf_counter() - t0


def fmt(values):
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


def test_01_schedule_algebra(record_criterion):
    t0 = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 1000)
    pairs = [(2.0, 3.0), (0.5, 4.0), (9.0, 6.0), (1.7, 0.3)]
    comp = max(
        np.max(np.abs(shift_sigma(shift_sigma(grid, b), a) - shift_sigma(grid, a * b))) for a, b in pairs
    )
    fixed = all(shift_sigma(0.0, s) == 0.0 and shift_sigma(1.0, s) == 1.0 for s in (0.5, 1.0, 3.0, 9.0))
    ident = float(np.max(np.abs(shift_sigma(grid, 1.0) - grid)))
    secs = time.perf_counter() - t0
    ok = fixed and ident <= 1e-12 and comp <= 1e-12 and secs < 1.0
    record_criterion(1, ok, f"composition err {comp:.1e}, identity err {ident:.1e}, {secs:.3f}s")
    assert ok


def test_02_shift_point_values(record_criterion):
    a, b = shift_sigma(0.5, 3.0), shift_sigma(0.5, 9.0)
    ok = abs(a - 0.75) <= 1e-12 and abs(b - 0.9) <= 1e-12
    record_criterion(2, ok, f"s=3 -> {a!r}, s=9 -> {b!r}")
    assert ok


def test_03_velocity_oracle_1d(record_criterion):
    t0 = time.perf_counter()
    z = np.abs(mc_velocity_zscores(dims=1, seed=0)).ravel()
    secs = time.perf_counter() - t0
    ok = z.size == 20 and bool(np.all(z <= 2.0)) and secs < 60
    record_criterion(3, ok, f"20 probes, max |z| = {z.max():.3f} (<= 2), {secs:.1f}s")
    assert ok


def test_04_integrator_oracle(record_criterion):
    check = check_endpoint()
    ok = check.passed and check.seconds < 60
    record_criterion(4, ok, f"{check.measured}, {check.seconds:.1f}s")
    assert ok


def test_05_euler_order(record_criterion):
    check = check_order()
    record_criterion(5, check.passed, check.measured)
    assert check.passed


def test_06_single_stage_degeneracy(record_criterion):
    model = GaussianFieldModel(length_scale=0.35).prepare(16, 16).prepare(32, 32)
    same = []
    for size in (16, 32):
        for seed in SEEDS:
            cfg = PipelineConfig([StageConfig(size, size, 20, 1.0, 3.0)], model=model, seed=seed, batch=4)
            same.append(np.array_equal(bottleneck_sample(cfg).final, standard_sample(cfg).final))
    ok = all(same)
    record_criterion(6, ok, f"{sum(same)}/6 bit-identical")
    assert ok


def test_07_desk_core_claim(desk, record_criterion):
    cfg, errs, secs = desk
    rep = pipeline_flops(cfg.pipeline, cfg.arch, baseline=cfg.baseline)
    ratios = [b / s for b, s in zip(errs["bottleneck"], errs["standard"])]
    ok = rep.speedup >= 2.0 and max(ratios) <= 1.5 and secs < 300
    record_criterion(
        7, ok,
        f"FLOPs reduction {rep.speedup:.3f}x (>= 2); cov err ratio per seed {fmt(ratios)} (<= 1.5); "
        f"desk runs {secs:.0f}s",
    )
    assert ok


def test_08_ablation_directions(desk, record_criterion):
    _, errs, _ = desk
    full = np.array(errs["bottleneck"])
    noise_up = bool(np.all(np.array(errs["no-noise-reintro"]) > full))
    shift_up = bool(np.all(np.array(errs["no-reshift"]) > full))
    ok = noise_up and shift_up
    record_criterion(
        8, ok,
        f"full {fmt(full)}; w/o noise reintroduction {fmt(errs['no-noise-reintro'])} "
        f"({'higher' if noise_up else 'NOT higher'}); w/o re-shifting {fmt(errs['no-reshift'])} "
        f"({'higher' if shift_up else 'NOT higher'})",
    )
    assert noise_up, "disabling noise reintroduction should raise covariance error"
    assert shift_up, "disabling re-shifting should raise covariance error"


@pytest.mark.xfail(strict=True, reason="a FLOPs-matched low-to-high run beats the bottleneck on a stationary Gaussian field")
def test_cascaded_not_better_than_bottleneck(desk):
    _, errs, _ = desk
    assert np.all(np.array(errs["cascaded"]) >= np.array(errs["bottleneck"]))


def test_09_cost_model(record_criterion):
    no_text = replace(FLUX_ARCH, text_tokens=0)
    s = sequence_length(1024, 1024, no_text)
    d = 3072
    per_layer = attention_flops_per_layer(4608)
    formula_ok = (
        s == 4096
        and per_layer.simplified == 24 * 4608 * d * d + 4 * 4608**2 * d
        and per_layer.exact == 24 * 4608 * d * d + 4 * 4608**2 * d + 2 * 4608**2 * 24
    )
    x3 = preset("flux-x3")
    base = pipeline_flops(x3.baseline, FLUX_ARCH).total_tflops
    ours = pipeline_flops(x3.pipeline, FLUX_ARCH).total_tflops
    base_dev = (base - 3719.50) / 3719.50
    ours_dev = (ours - 1234.39) / 1234.39
    ok = formula_ok and abs(base_dev) <= 0.01 and abs(ours_dev) <= 0.10
    record_criterion(
        9, ok,
        f"S(1024^2) = {s}; baseline {base:.2f} T ({base_dev:+.2%} vs 3719.50); "
        f"x3 {ours:.2f} T ({ours_dev:+.2%} vs 1234.39)",
    )
    assert ok


def test_10_schedule_export(record_criterion):
    shifts = (1.0, 3.0, 5.0, 7.0)
    text = export_schedule_csv([shift_schedule(build_base_sigmas(50), s) for s in shifts])
    data = np.array(list(csv.reader(io.StringIO(text)))[1:], dtype=float)[:, 1:]
    decreasing = bool(np.all(np.diff(data, axis=0) < 0))
    ordered = all(
        np.all(data[:, j] >= data[:, i]) and np.all(data[1:-1, j] > data[1:-1, i])
        for i in range(len(shifts)) for j in range(i + 1, len(shifts))
    )
    ok = decreasing and ordered
    record_criterion(10, ok, f"{data.shape[0]} rows x {data.shape[1]} shifts; decreasing={decreasing}, ordered={ordered}")
    assert ok


def test_11_formats_and_exit_codes(tmp_path, record_criterion):
    x = sample_noise((3, 2, 4, 16, 8), RngStream(5)).astype(np.float32)
    save_tensor(tmp_path / "x.bnt", x)
    tensor_ok = load_tensor(tmp_path / "x.bnt").tobytes() == x.tobytes()
    tensor_ok &= decode_tensor(encode_tensor(x), squeeze_frames=False).tobytes() == x.tobytes()

    config_ok = all(
        serialize_config(parse_config(json.loads(json.dumps(serialize_config(preset(n)))))) == serialize_config(preset(n))
        for n in PRESETS
    )

    def cli(*args):
        return subprocess.run([sys.executable, "-m", "bnsl", *args], capture_output=True, text=True).returncode

    codes = {
        "verify": cli("verify"),
        "verify --perturb-velocity 1.1": cli("verify", "--perturb-velocity", "1.1"),
        "cost --preset nope": cli("cost", "--preset", "nope"),
        "bogus": cli("bogus"),
    }
    exit_ok = list(codes.values()) == [0, 1, 2, 2]
    ok = tensor_ok and config_ok and exit_ok
    record_criterion(11, ok, f"tensor bit-exact={tensor_ok}, config round-trip={config_ok}, exit codes {codes}")
    assert ok
