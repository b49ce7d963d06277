"""
Identifying the baseband model of the cubic-delay chain
=======================================================

Simulate a training and a validation record, fit the FIR bank over the 164
monomials of degree up to 3 with memory 4, and look at which monomials carry
the most energy.
"""

import sys

import numpy as np

from adtmodel.experiments import ExperimentConfig, fit_point, simulate_point, validate_point

delta = float(sys.argv[1]) if len(sys.argv) > 1 else 0.052
# a smaller training record than the full protocol keeps this under a minute
cfg = ExperimentConfig().override(**{"data.n_train": 16384, "data.n_val": 4096})
data = simulate_point(cfg, delta)
model, rep = fit_point(cfg, data)
print(f"delta={delta}: {len(model.basis)} monomials x {model.L_f} taps, condition {rep.condition_estimate:.2e}")
print(f"train {rep.train_nmse_db:.2f} dB, validation {validate_point(model, data):.2f} dB")

energy = np.sum(np.abs(model.taps) ** 2, axis=1)
order = np.argsort(energy)[::-1]
print("largest monomials:")
for k in order[:8]:
    print(f"  {str(model.basis.specs[k]):28s} {10 * np.log10(energy[k] / energy.max()):7.1f} dB")
