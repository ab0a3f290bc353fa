"""Gaussian random-field targets with closed-form flow-matching velocities.

The target distribution at a resolution ``(h, w)`` is ``N(mu, Sigma)`` where
``Sigma`` is a squared-exponential kernel evaluated on the half-pixel grid of
the unit square. The same continuous field is therefore seen at every
resolution, which lets a single "model" serve all stages of a multi-resolution
sampler.

With ``X_sigma = (1 - sigma) X_1 + sigma X_0`` (``X_1`` data, ``X_0`` noise)
the velocity ``E[X_0 - X_1 | X_sigma = x]`` is linear in ``x``::

    A = (1 - sigma)^2 Sigma + sigma^2 I
    u = (sigma I - (1 - sigma) Sigma) A^-1 (x - (1 - sigma) mu) - mu

All matrices share the eigenvectors of ``Sigma``, so once the
eigendecomposition is cached a velocity evaluation is two matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .latent import RngStream

MAX_PIXELS = 4096


class ResolutionNotCached(KeyError):
    pass


@dataclass(frozen=True)
class _Cache:
    cov: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    sqrt_cov: np.ndarray


def grid_coords(h: int, w: int) -> np.ndarray:
    """Half-pixel centres of an ``h x w`` grid in the unit square, row-major.

    Coordinates are ``(2j + 1) / (2n)``: equal rationals on nested grids
    round to identical doubles.
    """
    ys = (2 * np.arange(h) + 1) / (2 * h)
    xs = (2 * np.arange(w) + 1) / (2 * w)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


@dataclass(eq=False)
class GaussianFieldModel:
    mean: float = 0.0
    amplitude: float = 1.0
    length_scale: float = 0.35
    jitter: float | None = None
    _caches: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.amplitude <= 0 or self.length_scale <= 0:
            raise ValueError("amplitude and length_scale must be positive")
        if self.jitter is None:
            self.jitter = 1e-6 * self.amplitude**2

    @property
    def variance(self) -> float:
        return self.amplitude**2

    def covariance_at(self, h: int, w: int) -> np.ndarray:
        if h < 1 or w < 1:
            raise ValueError("resolution must be positive")
        if h * w > MAX_PIXELS:
            raise ValueError(
                f"{h}x{w} exceeds the dense covariance budget of {MAX_PIXELS} pixels; "
                "use a smaller resolution (at most 64x64)"
            )
        pts = grid_coords(h, w)
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        cov = self.variance * np.exp(-d2 / (2.0 * self.length_scale**2))
        cov[np.diag_indices_from(cov)] += self.jitter
        return cov

    def prepare(self, h: int, w: int) -> "GaussianFieldModel":
        """Build and cache the eigendecomposition for ``(h, w)``."""
        if (h, w) not in self._caches:
            cov = self.covariance_at(h, w)
            evals, evecs = np.linalg.eigh(cov)
            # eigh can return tiny negatives for near-singular kernels
            evals = np.maximum(evals, self.jitter)
            sqrt_cov = (evecs * np.sqrt(evals)) @ evecs.T
            for arr in (cov, evals, evecs, sqrt_cov):
                arr.setflags(write=False)
            self._caches[(h, w)] = _Cache(cov, evals, evecs, sqrt_cov)
        return self

    def cache(self, h: int, w: int) -> _Cache:
        try:
            return self._caches[(h, w)]
        except KeyError:
            raise ResolutionNotCached(
                f"resolution {h}x{w} not prepared; call prepare({h}, {w}) first"
            ) from None

    def velocity(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return analytic_velocity(self, x, sigma)

    def sample(self, shape, rng: RngStream) -> np.ndarray:
        """Exact draws from the target, ``mu + Sigma^1/2 z``."""
        z = rng.generator().standard_normal(shape)
        return exact_flow_endpoint(self, z)

    def to_spec(self) -> dict:
        return {"mean": self.mean, "amplitude": self.amplitude, "length_scale": self.length_scale}


@dataclass(eq=False)
class MixtureModel:
    components: list
    weights: list

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if len(self.components) != w.size or w.size == 0:
            raise ValueError("need one weight per component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to 1")
        self.weights = w / w.sum()

    def prepare(self, h: int, w: int) -> "MixtureModel":
        for comp in self.components:
            comp.prepare(h, w)
        return self

    def velocity(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return mixture_velocity(self, x, sigma)

    def sample(self, shape, rng: RngStream) -> np.ndarray:
        gen = rng.generator()
        lead = int(np.prod(shape[:-2]))
        labels = gen.choice(len(self.components), size=lead, p=self.weights)
        z = gen.standard_normal(shape)
        out = np.empty(shape).reshape(lead, *shape[-2:])
        zf = z.reshape(lead, *shape[-2:])
        for k, comp in enumerate(self.components):
            sel = labels == k
            if np.any(sel):
                out[sel] = exact_flow_endpoint(comp, zf[sel])
        return out.reshape(shape)

    def to_spec(self) -> dict:
        return {
            "mixture": [dict(c.to_spec(), weight=float(p)) for c, p in zip(self.components, self.weights)]
        }


def field_from_spec(spec: dict):
    """Build a model from ``{"mean", "amplitude", "length_scale", "mixture"}``.

    Mixture weights are relative and get normalized to sum to one.
    """
    if spec.get("mixture"):
        comps, weights = [], []
        for item in spec["mixture"]:
            item = dict(item)
            weights.append(float(item.pop("weight", 1.0)))
            comps.append(GaussianFieldModel(**item))
        total = sum(weights)
        return MixtureModel(comps, [w / total for w in weights])
    return GaussianFieldModel(
        mean=float(spec.get("mean", 0.0)),
        amplitude=float(spec.get("amplitude", 1.0)),
        length_scale=float(spec.get("length_scale", 0.35)),
    )


def _flatten(model, x):
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    return model.cache(h, w), x.reshape(-1, h * w)


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")
    return sigma


def analytic_velocity(model: GaussianFieldModel, x: np.ndarray, sigma: float) -> np.ndarray:
    """Closed-form ``E[X_0 - X_1 | X_sigma = x]`` (velocity along increasing sigma)."""
    sigma = _check_sigma(sigma)
    c, flat = _flatten(model, x)
    lam = c.evals
    a = (1.0 - sigma) ** 2 * lam + sigma**2
    gain = (sigma - (1.0 - sigma) * lam) / a
    centred = flat - (1.0 - sigma) * model.mean
    u = ((centred @ c.evecs) * gain) @ c.evecs.T - model.mean
    return u.reshape(np.shape(x))


def mixture_velocity(mix: MixtureModel, x: np.ndarray, sigma: float) -> np.ndarray:
    """Posterior-weighted combination of the component velocities."""
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    flat = x.reshape(-1, h * w)
    logw, vels = [], []
    for comp, pi in zip(mix.components, mix.weights):
        c = comp.cache(h, w)
        a = (1.0 - sigma) ** 2 * c.evals + sigma**2
        proj = (flat - (1.0 - sigma) * comp.mean) @ c.evecs
        loglik = -0.5 * np.sum(proj**2 / a, axis=1) - 0.5 * np.sum(np.log(a))
        logw.append(np.log(pi) + loglik)
        gain = (sigma - (1.0 - sigma) * c.evals) / a
        vels.append((proj * gain) @ c.evecs.T - comp.mean)
    logw = np.stack(logw)
    post = np.exp(logw - logsumexp(logw, axis=0))
    u = np.einsum("kn,knd->nd", post, np.stack(vels))
    return u.reshape(x.shape)


def exact_flow_endpoint(model: GaussianFieldModel, z: np.ndarray) -> np.ndarray:
    """Where the probability-flow ODE started at ``z`` (sigma = 1) lands at sigma = 0."""
    if isinstance(model, MixtureModel):
        raise TypeError("exact flow endpoints are only available for a single Gaussian field")
    c, flat = _flatten(model, z)
    return (flat @ c.sqrt_cov + model.mean).reshape(np.shape(z))


def exact_flow_state(model: GaussianFieldModel, z: np.ndarray, sigma: float) -> np.ndarray:
    """Exact ODE state at `sigma` for the trajectory that starts at ``z``."""
    sigma = _check_sigma(sigma)
    c, flat = _flatten(model, z)
    scale = np.sqrt((1.0 - sigma) ** 2 * c.evals + sigma**2)
    out = ((flat @ c.evecs) * scale) @ c.evecs.T + (1.0 - sigma) * model.mean
    return out.reshape(np.shape(z))


@dataclass(frozen=True)
class MCEstimate:
    value: np.ndarray
    stderr: np.ndarray
    n_effective: float


def mc_velocity_oracle(
    model,
    x_probe,
    sigma: float,
    n_samples: int = 1_000_000,
    bandwidth: float | None = None,
    rng: RngStream | None = None,
) -> MCEstimate:
    """Brute-force velocity estimate by local-linear kernel regression.

    Draws ``(X_0, X_1)`` pairs, forms ``X_sigma`` and regresses the target
    ``X_0 - X_1`` on ``X_sigma`` with Gaussian weights centred at the probe.
    The local-linear fit is exact for linear conditional means, so for
    Gaussian targets only sampling noise remains; `stderr` is the sandwich
    standard error of the fit's intercept.

    `x_probe` is a 1-D array of one or two pixel values laid out as a
    ``1 x d`` image.
    """
    sigma = _check_sigma(sigma)
    if sigma == 0.0:
        raise ValueError("sigma = 0 makes X_sigma = X_1; the conditional noise mean is undefined")
    if n_samples < 100_000:
        raise ValueError("the Monte Carlo oracle needs at least 1e5 samples")
    probe = np.atleast_1d(np.asarray(x_probe, dtype=np.float64))
    d = probe.size
    if d > 2:
        raise ValueError(f"kernel regression is only supported up to 2 dimensions, got {d}")
    rng = rng or RngStream(0)
    model.prepare(1, d)
    data = model.sample((n_samples, 1, d), rng.spawn("data")).reshape(n_samples, d)
    noise = rng.spawn("noise").generator().standard_normal((n_samples, d))
    xs = (1.0 - sigma) * data + sigma * noise
    ys = noise - data
    if bandwidth is None:
        bandwidth = 0.1 * float(np.mean(np.std(xs, axis=0)))
    diff = xs - probe
    k = np.exp(-0.5 * np.sum(diff**2, axis=1) / bandwidth**2)
    design = np.hstack([np.ones((n_samples, 1)), diff])
    gram = design.T @ (design * k[:, None])
    coef = np.linalg.solve(gram, design.T @ (ys * k[:, None]))
    resid = ys - design @ coef
    # equivalent-kernel weights of the intercept
    ell = k * (design @ np.linalg.solve(gram, np.eye(d + 1)[:, 0]))
    stderr = np.sqrt(np.sum((ell[:, None] * resid) ** 2, axis=0))
    n_eff = float(k.sum() ** 2 / np.sum(k**2))
    return MCEstimate(coef[0], stderr, n_eff)
