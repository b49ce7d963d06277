"""
First-order predistortion
=========================

The compensator subtracts a fitted estimate of the chain's deviation from
identity. Part of that deviation is linear (hold and interleave skew), so
the gain does not vanish when the nonlinearity is switched off.
"""

from adtmodel import CtKernelSpec, EncoderConfig, FitConfig, RateConfig, enumerate_monomials, gen_stimulus
from adtmodel.dpd import eval_compensated, fit_compensator, make_chain

rates = RateConfig(n_bb=2048, K=32, R=10)
enc = EncoderConfig(oversample=rates.K)
basis = enumerate_monomials(3, 2, 2)
print(f"{len(basis)} monomials, square X with {len(basis) ** 2} coefficients")

for delta in (0.0, 0.0125, 0.025, 0.05, 0.2):
    chain = make_chain(enc, CtKernelSpec("cubic_delay", delta), rates)
    comp = fit_compensator(gen_stimulus(rates.n_bb, 11), chain, basis, None, FitConfig(L_f=16),
                           enc=enc, rates=rates)
    plain, dpd = eval_compensated(gen_stimulus(rates.n_bb, 12), comp, chain)
    print(f"delta={delta:<7} plain {plain:7.2f} dB  compensated {dpd:7.2f} dB  gain {plain - dpd:5.2f} dB  "
          f"clipped {comp.stats.get('clipped', 0)}")
