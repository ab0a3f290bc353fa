"""
Checking the analytic velocity
==============================

For a Gaussian target the flow velocity has a closed form. Here it is
compared against a Monte Carlo regression estimate, then integrated with
Euler steps and compared with the exact flow map.
"""

import numpy as np

from bnsl.experiments import euler_endpoint_error
from bnsl.fields import GaussianFieldModel, analytic_velocity, mc_velocity_oracle
from bnsl.latent import RngStream
from bnsl.metrics import convergence_order

# one pixel, N(2, 0.25): at sigma 0.5 and x = 1 the velocity is -2
one = GaussianFieldModel(mean=2.0, amplitude=0.5).prepare(1, 1)
u = analytic_velocity(one, np.ones((1, 1, 1, 1)), 0.5).item()
est = mc_velocity_oracle(one, [1.0], 0.5, 1_000_000, rng=RngStream(0))
print(f"analytic {u:.4f}   monte carlo {est.value[0]:.4f} +/- {est.stderr[0]:.4f}")

# 16x16 field: Euler endpoints converge to the exact transport at first order
field = GaussianFieldModel(length_scale=0.35).prepare(16, 16)
errs = [(n, euler_endpoint_error(field, n, seeds=range(5), reduce=np.mean)) for n in (64, 128, 256)]
for n, e in errs:
    print(f"{n:4d} steps: relative endpoint error {e:.2e}")
print(f"observed order {convergence_order(errs):.3f}")
