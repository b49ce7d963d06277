"""
The chain is exactly monomials, LTI filters and a downsampler
=============================================================

With circular records and full-length taps nothing is truncated, so a
least-squares fit over enough records reproduces the simulated chain to
rounding error on a record it has never seen.
"""

from adtmodel import CtKernelSpec, EncoderConfig, FitConfig, RateConfig, enumerate_monomials, gen_stimulus
from adtmodel import fit_model, simulate_reference, validate
from adtmodel.identification import polyphase_classes

rates = RateConfig(n_bb=256, K=4, R=10)
enc = EncoderConfig(oversample=4)
kernel = CtKernelSpec("cubic_delay", 0.1)
basis = enumerate_monomials(3, 4, 4)

# every DFT bin gives one equation per record, and the distinct polyphase
# regressors are the unknowns of each bin
D = len(polyphase_classes(basis, rates.K))
n_rec = D + 20
print(f"{D} distinct regressors per bin, using {n_rec} records")

recs = [simulate_reference(gen_stimulus(rates.n_bb, 1000 + r), enc, kernel, rates) for r in range(n_rec)]
xds, ys = zip(*recs)
model, rep = fit_model(list(xds), list(ys), basis, rates.K, FitConfig(L_f=rates.n_d, ridge=0.0))
xv, yv = simulate_reference(gen_stimulus(rates.n_bb, 7), enc, kernel, rates)
print(f"fit residual {rep.train_nmse_db:.1f} dB, fresh record {validate(model, xv, yv):.1f} dB")

# the same basis with short taps is limited by the brick-wall filter tails
short, srep = fit_model(list(xds[:12]), list(ys[:12]), basis, rates.K, FitConfig(L_f=16))
print(f"L_f=16 for comparison: {validate(short, xv, yv):.1f} dB")
