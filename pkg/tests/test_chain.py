import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from adtmodel.chain import (CtKernelSpec, apply_nonlinearity, chain_from_xd, h1_default, h2_default,
                            memory_in_samples, simulate_reference, upconvert_interleave, zoh_to_fine)
from adtmodel.encoders import EncoderConfig
from adtmodel.signals import RateConfig, SampledSignal, gen_stimulus, nmse_db


def S(a, rate=1.0):
    return SampledSignal(np.asarray(a), rate)


@pytest.mark.parametrize("z, want", [(1 + 2j, [1, -2, -1, 2]), (1 + 0j, [1, 0, -1, 0]), (1j, [0, -1, 0, 1])])
def test_interleave(z, want):
    assert upconvert_interleave(S([z])).samples.tolist() == want


def test_interleave_is_real_part_of_mixing(rng):
    z = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    m = np.arange(64)
    want = np.real(np.repeat(z, 4) * np.exp(1j * np.pi * m / 2))
    assert np.allclose(upconvert_interleave(S(z)).samples, want, atol=1e-15)


def test_zoh():
    assert zoh_to_fine(S([2.0, 5.0]), 3).samples.tolist() == [2, 2, 2, 5, 5, 5]
    x = S([1.0, -3.0])
    assert np.array_equal(zoh_to_fine(x, 1).samples, x.samples)


def test_zoh_piecewise_constant():
    cfg = RateConfig(32, K=4, R=10)
    xd = gen_stimulus(32 * 4, 3)
    xc = zoh_to_fine(upconvert_interleave(xd), cfg.R).samples.reshape(-1, cfg.R)
    assert np.all(xc == xc[:, :1])
    alphabet = {v for z in EncoderConfig().levels for v in (z, -z)}
    xd_enc = SampledSignal(np.array([0.5, -1, 0, 1]) + 1j * np.array([0, 0.5, -0.5, 1]), 4.0)
    assert set(zoh_to_fine(upconvert_interleave(xd_enc), 5).samples.tolist()) <= alphabet


class TestNonlinearity:
    cfg = RateConfig(4, K=4, R=10)

    def test_cubic_constant(self):
        y = apply_nonlinearity(S(np.full(self.cfg.n_fine, 0.5)), CtKernelSpec("cubic_delay", 0.1), self.cfg)
        assert np.allclose(y.samples, 0.4875, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("kind", ["cubic_delay", "separable_quad"])
    def test_zero_delta_identity(self, kind, rng):
        x = rng.uniform(-1, 1, self.cfg.n_fine)
        assert np.array_equal(apply_nonlinearity(S(x), CtKernelSpec(kind, 0.0), self.cfg).samples, x)

    @pytest.mark.parametrize("R", [20, 40, 80])
    def test_separable_constant_quadrature(self, R):
        cfg = RateConfig(2, K=4, R=R)
        c, d = 0.6, 0.01
        I1 = quad(h1_default, 0, 4)[0]
        I2 = quad(h2_default, 0, 4)[0]
        want = c - d * c * c * I1 * I2
        y = apply_nonlinearity(S(np.full(cfg.n_fine, c)), CtKernelSpec("separable_quad", d), cfg).samples
        assert np.allclose(y, y[0], rtol=0, atol=1e-14)
        # left-endpoint Riemann sums: first-order error in 1/R
        err = abs(y[0] - want)
        assert err <= d * c * c * 2.0 / R
        assert err >= d * c * c * 0.01 / R

    def test_separable_direct_double_sum(self, rng):
        cfg = RateConfig(1, K=1, R=16)  # 64 fine samples
        x = rng.uniform(-1, 1, cfg.n_fine)
        d, dt = 0.3, 1 / 16
        h1 = h1_default(np.arange(64) * dt)
        h2 = h2_default(np.arange(64) * dt)
        want = np.empty(64)
        for f in range(64):
            acc = 0.0
            for j in range(64):
                for k in range(64):
                    acc += h1[j] * h2[k] * x[(f - j) % 64] * x[(f - k) % 64]
            want[f] = x[f] - d * acc * dt * dt
        y = apply_nonlinearity(S(x), CtKernelSpec("separable_quad", d), cfg).samples
        assert np.max(np.abs(y - want)) <= 1e-12 * np.max(np.abs(want))

    def test_general_matches_separable(self, rng):
        cfg = RateConfig(1, K=1, R=8)
        h1 = h1_default(np.arange(32) / 8)
        h2 = h2_default(np.arange(32) / 8)
        k_gen = CtKernelSpec("general", 0.2, table=np.outer(h1, h2), table_R=8)
        x = S(rng.uniform(-1, 1, cfg.n_fine))
        a = apply_nonlinearity(x, k_gen, cfg).samples
        b = apply_nonlinearity(x, CtKernelSpec("separable_quad", 0.2), cfg).samples
        assert np.allclose(a, b, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 159), st.sampled_from(["cubic_delay", "separable_quad"]), st.integers(0, 99))
    def test_time_invariant(self, s, kind, seed):
        x = np.random.default_rng(seed).uniform(-1, 1, self.cfg.n_fine)
        k = CtKernelSpec(kind, 0.2)
        a = apply_nonlinearity(S(np.roll(x, s)), k, self.cfg).samples
        b = np.roll(apply_nonlinearity(S(x), k, self.cfg).samples, s)
        assert np.allclose(a, b, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.01, 1), st.floats(0, 0.5), st.integers(0, 99))
    def test_cubic_bound(self, B, d, seed):
        x = np.random.default_rng(seed).uniform(-B, B, self.cfg.n_fine)
        y = apply_nonlinearity(S(x), CtKernelSpec("cubic_delay", d), self.cfg).samples
        assert np.max(np.abs(y)) <= B + d * B ** 3 + 1e-15

    @pytest.mark.parametrize("kw", [dict(kind="cubic_delay", taus=(1, 2)), dict(kind="cubic_delay", taus=(1, 2, 5)),
                                    dict(kind="separable_quad", h1="nope"), dict(kind="separable_quad", memory=6.0),
                                    dict(kind="general"), dict(kind="sigmoid")])
    def test_spec_rejects(self, kw):
        with pytest.raises(ValueError):
            CtKernelSpec(**kw)

    def test_general_cost_bound(self):
        cfg = RateConfig(4, K=4, R=8)
        k = CtKernelSpec("general", 0.1, table=np.ones((32, 32, 32)), table_R=8)
        with pytest.raises(ValueError, match="cost"):
            apply_nonlinearity(S(np.zeros(cfg.n_fine)), k, cfg, max_general_cost=1e6)


def fine_waveform_oracle(xd, R):
    """Explicit loops: interleave by mixing with j^m, then hold."""
    out = []
    for m, z in enumerate(np.repeat(xd, 4)):
        out += [np.real(z * 1j ** m)] * R
    return np.array(out)


def test_tone_through_linear_chain():
    cfg = RateConfig(64, K=4, R=10)
    b = 5
    x = S(0.5 * np.exp(2j * np.pi * b * np.arange(64) / 64))
    enc = EncoderConfig("passthrough", oversample=4)
    xd, xh = simulate_reference(x, enc, CtKernelSpec(delta=0.0), cfg)
    Y = np.fft.fft(xh.samples) / 64
    xc = fine_waveform_oracle(xd.samples, cfg.R)
    t = np.arange(cfg.n_fine)
    # single-bin DFTs of the fine waveform at carrier +/- b
    want = {k: 2 * np.sum(xc * np.exp(-2j * np.pi * (cfg.carrier_bin + k) * t / cfg.n_fine)) / cfg.n_fine
            for k in (b, -b)}
    assert Y[b] == pytest.approx(want[b], abs=1e-12)
    assert Y[-b] == pytest.approx(want[-b], abs=1e-12)
    others = np.delete(np.abs(Y), [b, 64 - b])
    assert others.max() <= 1e-10 * abs(Y[b])
    # i/q interleave skew leaves a small conjugate image, about pi f0 / (4 K)
    assert abs(Y[-b]) / abs(Y[b]) == pytest.approx(np.pi * b / 64 / 16, rel=0.05)


def test_linear_downstream_of_encoder(rng):
    cfg = RateConfig(32, K=4, R=10)
    xd = S(rng.standard_normal(128) + 1j * rng.standard_normal(128), 4.0)
    k = CtKernelSpec(delta=0.0)
    a = chain_from_xd(S(2.5 * xd.samples, 4.0), k, cfg).samples
    assert np.allclose(a, 2.5 * chain_from_xd(xd, k, cfg).samples, atol=1e-13)


def test_constant_xd_gives_fixed_phase():
    vals = []
    for n in (16, 64):
        cfg = RateConfig(n, K=4, R=10)
        xh = chain_from_xd(S(np.full(n * 4, 0.3 - 0.4j), 4.0), CtKernelSpec(delta=0.0), cfg).samples
        assert np.allclose(xh, xh[0], atol=1e-13)
        vals.append(xh[0])
    assert vals[0] == pytest.approx(vals[1], abs=1e-13)


def test_distortion_is_in_band():
    cfg = RateConfig(512, K=4, R=10)
    enc = EncoderConfig(oversample=4)
    x = gen_stimulus(512, 4)
    _, y0 = simulate_reference(x, enc, CtKernelSpec(delta=0.0), cfg)
    _, y1 = simulate_reference(x, enc, CtKernelSpec(delta=0.2), cfg)
    assert nmse_db(y0, y1) > -40


def test_rate_closure():
    cfg = RateConfig(16, K=4, R=10)
    xd = gen_stimulus(64, 1)
    xc = zoh_to_fine(upconvert_interleave(xd), cfg.R)
    assert len(xc) == cfg.n_fine == 16 * 4 * 4 * 10
    assert len(chain_from_xd(S(xd.samples, 4.0), CtKernelSpec(), cfg)) == 16


def test_memory_in_samples():
    assert [memory_in_samples(t) for t in (0.4, 1.0, 2.3, 4.0)] == [1, 1, 3, 4]
