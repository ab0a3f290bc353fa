"""Population and pairwise metrics against analytic targets."""

from __future__ import annotations

import math

import numpy as np


def _as_population(pop) -> np.ndarray:
    pop = np.asarray(pop, dtype=np.float64)
    if pop.ndim < 2 or pop.shape[0] < 2:
        raise ValueError("a sample population needs at least two samples")
    if not np.all(np.isfinite(pop)):
        raise ValueError("population contains non-finite values")
    return pop


def target_moments(model, sample_shape) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance of one flattened sample of `model`.

    Channels and frames are independent copies of the spatial field, so the
    covariance is block diagonal.
    """
    h, w = sample_shape[-2:]
    copies = int(np.prod(sample_shape[:-2], dtype=np.int64))
    cov = model.cache(h, w).cov
    full = np.kron(np.eye(copies), cov) if copies > 1 else np.array(cov)
    return np.full(full.shape[0], float(model.mean)), full


def moment_errors(pop, model) -> tuple[float, float]:
    """Relative mean error and relative Frobenius covariance error.

    The mean error is absolute when the target mean is zero. The covariance
    uses the unbiased ``n - 1`` estimator.
    """
    pop = _as_population(pop)
    flat = pop.reshape(pop.shape[0], -1)
    mu, sigma = target_moments(model, pop.shape[1:])
    m_hat = flat.mean(axis=0)
    c_hat = np.cov(flat, rowvar=False, ddof=1)
    mu_norm = np.linalg.norm(mu)
    mean_err = np.linalg.norm(m_hat - mu) / (mu_norm if mu_norm > 0 else 1.0)
    cov_err = np.linalg.norm(c_hat - sigma) / np.linalg.norm(sigma)
    return float(mean_err), float(cov_err)


def psnr(a, b, data_range: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not data_range > 0:
        raise ValueError("data_range must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def radial_power_spectrum(x) -> tuple[np.ndarray, np.ndarray]:
    """Radially averaged power of a 2-D slice, DC bin first.

    Power is ``|FFT|^2 / (h * w)`` so that ``(profile * counts).sum()`` equals
    the squared l2 norm of `x`. Frequencies are measured in cycles per image
    along each axis and binned by rounding the radius.

    Returns ``(profile, counts)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a single-channel 2-D slice, got {x.shape}")
    h, w = x.shape
    power = np.abs(np.fft.fft2(x)) ** 2 / (h * w)
    ky = np.fft.fftfreq(h) * h
    kx = np.fft.fftfreq(w) * w
    radius = np.rint(np.hypot(ky[:, None], kx[None, :])).astype(int)
    counts = np.bincount(radius.ravel())
    sums = np.bincount(radius.ravel(), weights=power.ravel())
    with np.errstate(invalid="ignore"):
        profile = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return profile, counts


def convergence_order(errors) -> float:
    """Mean observed order ``log2(err_N / err_2N)`` over successive doublings."""
    pairs = sorted((int(n), float(e)) for n, e in errors)
    if len(pairs) < 2:
        raise ValueError("need at least two (N, error) pairs")
    orders = []
    for (n1, e1), (n2, e2) in zip(pairs, pairs[1:]):
        if n2 != 2 * n1:
            raise ValueError(f"step counts must double, got {n1} then {n2}")
        if e1 <= 0 or e2 <= 0:
            raise ValueError("errors must be positive to estimate an order")
        orders.append(math.log2(e1 / e2))
    return float(np.mean(orders))
