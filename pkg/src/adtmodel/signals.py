"""
Signal containers, the rate lattice and ideal periodic rate conversion.

Everything downstream of the pulse encoder is processed as one period of a
periodic record, so ideal filters become exact DFT bin selections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NMSE_FLOOR_DB = -400.0


@dataclass(frozen=True)
class SampledSignal:
    """A finite record of real or complex samples together with its rate.

    Attributes:
        samples: 1-D array, real dtype for real signals, complex otherwise.
        rate: samples per unit time (baseband rate is 1).
    """

    samples: np.ndarray
    rate: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if not np.iscomplexobj(s):
            s = s.astype(float, copy=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples)

    def with_samples(self, samples, rate=None) -> "SampledSignal":
        return SampledSignal(samples, self.rate if rate is None else rate)


@dataclass(frozen=True)
class RateConfig:
    """Integer rate lattice of the transmitter simulation.

    ``n_bb`` baseband samples at rate 1, encoder output at ``K``, the
    interleaved carrier signal at ``4K`` (carrier frequency ``K``), and the
    fine quasi-continuous grid at ``4KR``. Time is measured in baseband
    samples; the interleaved sampling period is ``T = 1 / (4K)``.
    """

    n_bb: int
    K: int = 4
    R: int = 20

    def __post_init__(self):
        for name in ("n_bb", "K", "R"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def f_bb(self) -> int:
        return 1

    @property
    def f_d(self) -> int:
        return self.K

    @property
    def f_r(self) -> int:
        return 4 * self.K

    @property
    def f_c(self) -> int:
        return self.K

    @property
    def f_fine(self) -> int:
        return 4 * self.K * self.R

    @property
    def T(self) -> float:
        return 1.0 / self.f_r

    @property
    def n_d(self) -> int:
        return self.n_bb * self.K

    @property
    def n_r(self) -> int:
        return self.n_bb * 4 * self.K

    @property
    def n_fine(self) -> int:
        return self.n_bb * 4 * self.K * self.R

    @property
    def carrier_bin(self) -> int:
        """DFT bin of the carrier in the fine-grid record."""
        return self.K * self.n_bb


@dataclass(frozen=True)
class AlignmentResult:
    delay: int
    gain: complex
    aligned: SampledSignal


def gen_stimulus(n_bb: int, seed: int, peak: float = 0.9) -> SampledSignal:
    """Seeded white complex Gaussian record scaled to a component-wise peak.

    The largest of ``|Re x[n]|`` and ``|Im x[n]|`` over the record equals
    ``peak`` exactly.
    """
    if n_bb < 16:
        raise ValueError(f"n_bb must be >= 16, got {n_bb}")
    if not 0.0 < peak <= 1.0:
        raise ValueError(f"peak must lie in (0, 1], got {peak}")
    rng = np.random.default_rng(seed)
    iq = rng.standard_normal((2, n_bb))
    iq *= peak / np.max(np.abs(iq))
    # pin the extreme sample so the peak is exact despite rounding
    r, c = np.unravel_index(np.argmax(np.abs(iq)), iq.shape)
    iq[r, c] = np.copysign(peak, iq[r, c])
    np.clip(iq, -peak, peak, out=iq)
    return SampledSignal(iq[0] + 1j * iq[1], 1.0)


def upsample_hold(x: SampledSignal, factor: int) -> SampledSignal:
    """Repeat every sample ``factor`` times."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    return SampledSignal(np.repeat(x.samples, factor), x.rate * factor)


def _band_bins(n: int) -> np.ndarray:
    """Signed DFT indices covering [-1/2, 1/2) cycles/sample for an n-record."""
    return np.arange(-(n // 2), n - n // 2)


def upsample_ideal(x: SampledSignal, factor: int) -> SampledSignal:
    """Periodic band-limited interpolation by an integer factor.

    Zero-stuffing followed by a circular brick-wall low-pass that keeps the
    original band. For even lengths the Nyquist bin is split evenly between
    the two band edges, so real input stays real and interpolation commutes
    with taking real and imaginary parts.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    n = len(x)
    X = np.fft.fft(x.samples)
    Y = np.zeros(n * factor, dtype=complex)
    half = n // 2
    Y[: n - half] = X[: n - half]
    Y[n * factor - half:] = X[n - half:]
    if n % 2 == 0:
        nyq = X[half]
        Y[n * factor - half] = 0.5 * nyq
        Y[half] = 0.5 * nyq
    y = np.fft.ifft(Y) * factor
    if x.is_real:
        y = y.real
    return SampledSignal(y, x.rate * factor)


def downsample(x: SampledSignal, factor: int, phase: int = 0) -> SampledSignal:
    """Keep every ``factor``-th sample starting at ``phase``."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if not 0 <= phase < factor:
        raise ValueError(f"phase must lie in [0, {factor}), got {phase}")
    if len(x) % factor:
        raise ValueError(f"length {len(x)} is not divisible by {factor}")
    return SampledSignal(x.samples[phase::factor], x.rate / factor)


def band_extract_demod(xc: SampledSignal, cfg: RateConfig) -> SampledSignal:
    """Ideal bandpass around the carrier followed by an ideal demodulator.

    Bins in ``[f_c - 1/2, f_c + 1/2)`` of the fine-grid DFT are doubled and
    re-indexed as the spectrum of an ``n_bb``-point baseband record, so that
    ``A cos(2 pi (f_c + f0) t + phi)`` demodulates to ``A exp(j (2 pi f0 n + phi))``.
    """
    if len(xc) != cfg.n_fine:
        raise ValueError(f"expected {cfg.n_fine} fine samples, got {len(xc)}")
    n_bb = cfg.n_bb
    b = _band_bins(n_bb)
    if xc.is_real:
        X = np.fft.rfft(xc.samples)
    else:
        X = np.fft.fft(xc.samples)
    band = X[cfg.carrier_bin + b]
    Y = np.zeros(n_bb, dtype=complex)
    Y[b % n_bb] = band * (2.0 * n_bb / cfg.n_fine)
    return SampledSignal(np.fft.ifft(Y), 1.0)


def nmse_db(ref: SampledSignal, est: SampledSignal) -> float:
    """Error energy over reference energy in dB; exact match gives -400 dB."""
    if len(ref) != len(est):
        raise ValueError(f"length mismatch: {len(ref)} vs {len(est)}")
    if ref.rate != est.rate:
        raise ValueError(f"rate mismatch: {ref.rate} vs {est.rate}")
    p_ref = np.sum(np.abs(ref.samples) ** 2)
    if p_ref == 0:
        raise ValueError("reference has zero energy")
    p_err = np.sum(np.abs(est.samples - ref.samples) ** 2)
    if p_err == 0:
        return NMSE_FLOOR_DB
    return max(float(10 * np.log10(p_err / p_ref)), NMSE_FLOOR_DB)


def align_gain_delay(ref: SampledSignal, meas: SampledSignal, max_delay: int) -> AlignmentResult:
    """Find the circular delay and complex gain that best map ``ref`` onto ``meas``.

    ``meas ~ gain * roll(ref, delay)``. Ties on the correlation magnitude go to
    the smaller ``|delay|``, then to the negative delay. ``aligned`` is
    ``meas`` with the delay and gain removed, comparable to ``ref``.
    """
    if ref.rate != meas.rate:
        raise ValueError(f"rate mismatch: {ref.rate} vs {meas.rate}")
    n = len(ref)
    if len(meas) != n:
        raise ValueError(f"length mismatch: {n} vs {len(meas)}")
    if not 0 <= max_delay < n / 2:
        raise ValueError(f"max_delay must lie in [0, {n / 2}), got {max_delay}")
    r = np.asarray(ref.samples, dtype=complex)
    energy = np.vdot(r, r).real
    if energy == 0:
        raise ValueError("reference has zero energy")
    m = np.asarray(meas.samples, dtype=complex)
    # corr[d] = sum_n conj(ref[n - d]) * meas[n]
    corr = np.fft.ifft(np.conj(np.fft.fft(r)) * np.fft.fft(m))
    candidates = [0]
    for d in range(1, max_delay + 1):
        candidates += [-d, d]
    mags = np.abs(corr[np.array(candidates) % n])
    best = candidates[int(np.argmax(mags >= mags.max() * (1 - 1e-12)))]
    gain = corr[best % n] / energy
    if gain == 0:
        raise ValueError("measurement is orthogonal to the reference")
    aligned = np.roll(m, -best) / gain
    return AlignmentResult(best, complex(gain), SampledSignal(aligned, meas.rate))


def apply_alignment(meas: SampledSignal, delay: int, gain: complex) -> SampledSignal:
    """Remove a known delay and gain from ``meas``."""
    return meas.with_samples(np.roll(meas.samples, -delay) / gain)
