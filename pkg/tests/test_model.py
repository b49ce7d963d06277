import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adtmodel.model import (FirBankModel, MonomialSpec, basis_size, enumerate_monomials, eval_monomials,
                            filter_bank_downsample, load_model, model_forward, save_model)
from adtmodel.signals import SampledSignal, gen_stimulus


def S(a, rate=1.0):
    return SampledSignal(np.asarray(a), rate)


def exhaustive_count(M, n_vars):
    """Count exponent vectors with total degree 1..M by brute force."""
    return sum(1 for e in itertools.product(range(M + 1), repeat=n_vars) if 1 <= sum(e) <= M)


class TestEnumeration:
    def test_degree_one(self):
        b = enumerate_monomials(1, 1, 1)
        assert [str(s) for s in b] == ["i[n]", "q[n]"]

    def test_degree3_memory4_size(self):
        b = enumerate_monomials(3, 4, 4)
        assert len(b) == 164 == 8 + 36 + 120 == exhaustive_count(3, 8) == basis_size(3, 4, 4)

    def test_single_variable(self):
        assert [str(s) for s in enumerate_monomials(2, 1, 0)] == ["i[n]", "i[n]^2"]

    @settings(max_examples=30)
    @given(st.integers(1, 3), st.integers(0, 3), st.integers(0, 3))
    def test_counts_and_uniqueness(self, M, mi, mq):
        if mi + mq == 0:
            return
        b = enumerate_monomials(M, mi, mq)
        assert len(set(b.specs)) == len(b) == exhaustive_count(M, mi + mq) == basis_size(M, mi, mq)
        degs = [s.degree for s in b]
        assert degs == sorted(degs)

    def test_rejects(self):
        with pytest.raises(ValueError):
            enumerate_monomials(0, 1, 1)
        with pytest.raises(ValueError):
            enumerate_monomials(2, 0, 0)

    @pytest.mark.parametrize("text", ["i[n]", "q[n-3]^2", "i[n]*i[n-1]*q[n]^2"])
    def test_parse_roundtrip(self, text):
        assert str(MonomialSpec.parse(text)) == text

    def test_parse_rejects(self):
        with pytest.raises(ValueError):
            MonomialSpec.parse("x[n]")


class TestEvalMonomials:
    xd = S([1 + 2j, 3 + 4j])

    def test_projection(self):
        V = eval_monomials(self.xd, [MonomialSpec.parse("i[n]")])
        assert V[:, 0].tolist() == [1, 3]

    def test_cross_term(self):
        V = eval_monomials(self.xd, [MonomialSpec.parse("i[n]*q[n-1]")])
        assert V[:, 0].tolist() == [4, 6]

    def test_streaming_zero_history(self):
        V = eval_monomials(self.xd, [MonomialSpec.parse("i[n]*q[n-1]")], periodic=False)
        assert V[:, 0].tolist() == [0, 6]

    def test_constant(self):
        V = eval_monomials(S(np.full(10, 0.5 - 0.25j)), enumerate_monomials(3, 2, 2))
        assert np.all(V == V[:1])

    def test_against_loop(self):
        xd = gen_stimulus(40, 2)
        b = enumerate_monomials(3, 3, 2)
        V = eval_monomials(xd, b)
        z = xd.samples
        for k, spec in enumerate(b):
            for n in (0, 7, 39):
                want = 1.0
                for comp, d in spec.variables:
                    v = z[(n - d) % 40]
                    want *= v.real if comp == "i" else v.imag
                assert V[n, k] == pytest.approx(want, abs=1e-15)


def bank_oracle(V, taps, K, lead):
    n_d, N = V.shape
    out = np.zeros(n_d // K, dtype=complex)
    for n in range(n_d // K):
        for k in range(N):
            for l in range(taps.shape[1]):
                out[n] += taps[k, l] * V[(n * K + lead - l) % n_d, k]
    return out


class TestFilterBank:
    spec_i = (MonomialSpec.parse("i[n]"),)

    def model(self, taps, K, **kw):
        from adtmodel.model import MonomialBasis
        return FirBankModel(MonomialBasis(self.spec_i, 1, 1, 0), np.array([taps]), K, **kw)

    def test_identity(self):
        xd = S([1 + 5j, -2 + 1j, 3 + 0j])
        y = model_forward(xd, self.model([1.0], 1)).samples
        assert np.array_equal(y, [1, -2, 3])

    def test_zero(self):
        y = model_forward(gen_stimulus(32, 1), self.model([0.0, 0.0], 2)).samples
        assert np.all(y == 0)

    def test_index_arithmetic(self):
        y = model_forward(S([1.0, 2.0, 3.0, 4.0]), self.model([0.0, 1.0], 2)).samples
        assert y.tolist() == [4, 2]

    @pytest.mark.parametrize("L, lead", [(3, 0), (5, 2), (24, 0), (24, 7)])
    def test_against_oracle(self, rng, L, lead):
        V = rng.standard_normal((24, 3))
        taps = rng.standard_normal((3, L)) + 1j * rng.standard_normal((3, L))
        got = filter_bank_downsample(V, taps, 4, True, lead)
        assert np.allclose(got, bank_oracle(V, taps, 4, lead), atol=1e-12)

    def test_streaming_matches_periodic_where_history_in_range(self, rng):
        b = enumerate_monomials(2, 2, 2)
        taps = rng.standard_normal((len(b), 6)) + 1j * rng.standard_normal((len(b), 6))
        xd = gen_stimulus(64, 5)
        per = model_forward(xd, FirBankModel(b, taps, 4, "periodic", 1)).samples
        stream = model_forward(xd, FirBankModel(b, taps, 4, "streaming", 1)).samples
        # first output needing no history: n*K + 1 - 5 - 1 >= 0
        ok = np.arange(16) * 4 + 1 - 5 - 1 >= 0
        assert np.allclose(per[ok], stream[ok], atol=1e-13)
        assert not np.allclose(per[~ok], stream[~ok])

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 100))
    def test_linear_in_taps(self, a, c, seed):
        r = np.random.default_rng(seed)
        b = enumerate_monomials(2, 2, 1)
        A = r.standard_normal((len(b), 4)) + 1j * r.standard_normal((len(b), 4))
        B = r.standard_normal((len(b), 4))
        xd = gen_stimulus(32, seed)
        f = lambda T: model_forward(xd, FirBankModel(b, T, 4, lead=2)).samples
        assert np.allclose(f(a * A + c * B), a * f(A) + c * f(B), atol=1e-12)

    def test_permutation_invariance(self, rng):
        b = enumerate_monomials(2, 2, 2)
        taps = rng.standard_normal((len(b), 3)) + 1j * rng.standard_normal((len(b), 3))
        perm = rng.permutation(len(b))
        from adtmodel.model import MonomialBasis
        b2 = MonomialBasis(tuple(b.specs[p] for p in perm), b.M, b.m_i, b.m_q)
        xd = gen_stimulus(32, 3)
        a = model_forward(xd, FirBankModel(b, taps, 4)).samples
        c = model_forward(xd, FirBankModel(b2, taps[perm], 4)).samples
        assert np.allclose(a, c, atol=1e-13)

    @pytest.mark.parametrize("kw", [dict(lead=3), dict(lead=-1), dict(mode="online")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            self.model([1.0, 2.0], 2, **kw)


def test_save_load_bit_identical(tmp_path, rng):
    b = enumerate_monomials(3, 2, 2)
    taps = rng.standard_normal((len(b), 5)) + 1j * rng.standard_normal((len(b), 5))
    m = FirBankModel(b, taps, 4, lead=2)
    p = tmp_path / "m.txt"
    save_model(m, p)
    m2 = load_model(p)
    assert m2.basis == m.basis and m2.K == 4 and m2.lead == 2
    assert np.array_equal(m2.taps, m.taps)
