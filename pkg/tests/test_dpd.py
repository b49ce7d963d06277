import numpy as np
import pytest

from adtmodel.chain import CtKernelSpec
from adtmodel.dpd import (Compensator, eval_compensated, fit_compensator, load_compensator, make_chain,
                          save_compensator)
from adtmodel.encoders import EncoderConfig
from adtmodel.identification import FitConfig
from adtmodel.model import enumerate_monomials
from adtmodel.signals import RateConfig, SampledSignal, gen_stimulus, nmse_db

N_BB, K = 1024, 8
RATES = RateConfig(N_BB, K, 10)
BASIS = enumerate_monomials(3, 2, 2)


def setup(delta, kind="dsm1", L0=None):
    enc = EncoderConfig(kind, oversample=K)
    chain = make_chain(enc, CtKernelSpec("cubic_delay", delta), RATES)
    comp = fit_compensator(gen_stimulus(N_BB, 11), chain, BASIS, L0, FitConfig(L_f=16), enc=enc, rates=RATES)
    return comp, chain


@pytest.fixture(scope="module")
def fitted():
    return setup(0.05)


def test_zero_X_is_identity(fitted):
    comp, chain = fitted
    ident = comp.with_X(np.zeros_like(comp.X))
    x = gen_stimulus(N_BB, 12)
    assert ident.apply(x) is x or np.array_equal(ident.apply(x).samples, x.samples)
    plain, dpd = eval_compensated(x, ident, chain)
    assert plain == dpd


def test_dimensions_checked(fitted):
    comp, _ = fitted
    with pytest.raises(ValueError):
        comp.with_X(np.zeros((comp.X.shape[0], comp.X.shape[1] + 1)))


def test_square_X_by_default(fitted):
    comp, _ = fitted
    assert comp.X.shape == (len(BASIS), len(BASIS)) == (comp.L0.shape[0], len(BASIS))


def test_correction_reduces_error(fitted):
    comp, chain = fitted
    assert np.any(comp.X != 0)
    plain, dpd = eval_compensated(gen_stimulus(N_BB, 12), comp, chain)
    assert dpd < plain


def test_fitted_correction_energy_below_residue():
    comp, chain = setup(0.0)
    x = gen_stimulus(N_BB, 11)
    _, xhat = chain(x)
    al = comp.alignment
    residue = np.roll(xhat.samples, -al.delay) / al.gain - x.samples
    corr = comp.correction(x)
    assert np.sum(np.abs(corr) ** 2) <= np.sum(np.abs(residue) ** 2)


def test_improvement_positive_over_trend():
    for d in (0.0125, 0.025, 0.05):
        comp, chain = setup(d)
        plain, dpd = eval_compensated(gen_stimulus(N_BB, 12), comp, chain)
        assert plain - dpd > 0, d


def test_lowpass_prototype_option():
    comp, chain = setup(0.05, L0="lowpass")
    assert comp.L0.shape == (1, 16) and comp.X.shape == (1, len(BASIS))
    assert abs(np.sum(comp.L0) - 1) < 1e-12
    plain, dpd = eval_compensated(gen_stimulus(N_BB, 12), comp, chain)
    assert np.isfinite(dpd)


def test_limiter_counts(fitted):
    comp, _ = fitted
    loud = comp.with_X(comp.X * 500)
    y = loud.apply(gen_stimulus(N_BB, 12))
    assert loud.stats["clipped"] > 0
    assert np.abs(y.samples.real).max() <= 1 and np.abs(y.samples.imag).max() <= 1


def test_rejects_non_identity_chain():
    enc = EncoderConfig(oversample=K)

    def dead(x):
        return SampledSignal(np.zeros(RATES.n_d, complex), float(K)), SampledSignal(1e-9 * x.samples)

    with pytest.raises(ValueError, match="gain"):
        fit_compensator(gen_stimulus(N_BB, 1), dead, BASIS, None, enc=enc, rates=RATES)


def test_serialization_roundtrip(fitted, tmp_path):
    comp, _ = fitted
    p = tmp_path / "c.txt"
    save_compensator(comp, p)
    c2 = load_compensator(p)
    assert np.array_equal(c2.X, comp.X) and np.array_equal(c2.L0, comp.L0)
    assert c2.alignment.delay == comp.alignment.delay and c2.alignment.gain == comp.alignment.gain
    x = gen_stimulus(N_BB, 13)
    assert np.array_equal(c2.apply(x).samples, comp.apply(x).samples)


@pytest.mark.xfail(strict=True, reason="the delta=0 chain is not identity after integer alignment: "
                                       "i/q interleave skew and ZOH leave a linear residue near -30 dB")
def test_passthrough_linear_chain_is_transparent():
    comp, chain = setup(0.0, kind="passthrough")
    x = gen_stimulus(N_BB, 11)
    assert nmse_db(x, SampledSignal(x.samples - comp.correction(x))) <= -60
    plain, dpd = eval_compensated(gen_stimulus(N_BB, 12), comp, chain)
    assert plain <= -60 and dpd <= -60 and abs(plain - dpd) <= 1
