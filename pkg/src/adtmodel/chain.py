"""
Reference transmitter chain from the encoded signal to the demodulated output.

x_d --interleave--> x~_d --ZOH--> x_c --G--> y --bandpass+demod--> x^

The continuous-time part lives on a fine grid of ``R`` points per
interleaved sample. Kernel times are given in units of ``T``, the interleaved
sampling period.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .encoders import EncoderConfig, encode
from .signals import RateConfig, SampledSignal, band_extract_demod

log = logging.getLogger(__name__)

KERNEL_KINDS = ("cubic_delay", "separable_quad", "general")
MAX_MEMORY_T = 4.0


def h1_default(t):
    return np.exp(-0.95 * t)


def h2_default(t):
    return np.exp(-0.91 * t) * np.cos(np.pi * t / 5)


KERNEL_GENERATORS: dict[str, Callable] = {
    "exp095": h1_default,
    "exp091cos": h2_default,
}


@dataclass(frozen=True)
class CtKernelSpec:
    """Continuous-time Volterra nonlinearity ``G``.

    cubic_delay:    y(t) = x(t) - delta * x(t - tau1) x(t - tau2) x(t - tau3)
    separable_quad: y(t) = x(t) - delta * (h1 * x)(t) (h2 * x)(t), both
                    convolutions over a memory of ``memory`` T-units
    general:        y(t) = x(t) - delta * sum over the tabulated kernel
                    ``table`` (shape (L,)*degree, fine-grid resolution)

    All times are in units of T.
    """

    kind: str = "cubic_delay"
    delta: float = 0.0
    taus: tuple = (1.2, 2.3, 0.4)
    h1: str = "exp095"
    h2: str = "exp091cos"
    memory: float = 4.0
    table: np.ndarray | None = field(default=None, compare=False, repr=False)
    table_R: int | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "cubic_delay":
            taus = tuple(float(t) for t in self.taus)
            if len(taus) != 3 or min(taus) < 0:
                raise ValueError("cubic_delay needs three non-negative delays")
            if max(taus) > MAX_MEMORY_T:
                raise ValueError(f"delays exceed the {MAX_MEMORY_T}T memory bound")
            object.__setattr__(self, "taus", taus)
        elif self.kind == "separable_quad":
            for name in (self.h1, self.h2):
                if name not in KERNEL_GENERATORS:
                    raise ValueError(f"unknown kernel generator {name!r}")
            if not 0 < self.memory <= MAX_MEMORY_T:
                raise ValueError(f"memory must lie in (0, {MAX_MEMORY_T}]")
        else:
            if self.table is None or self.table_R is None:
                raise ValueError("general kernel needs table and table_R")
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim < 1 or len(set(tab.shape)) != 1:
                raise ValueError("general kernel table must be a hypercube")
            if tab.shape[0] > MAX_MEMORY_T * self.table_R:
                raise ValueError(f"general kernel memory exceeds {MAX_MEMORY_T}T")

    @property
    def max_memory(self) -> float:
        """Largest delay reached by the kernel, in T units."""
        if self.kind == "cubic_delay":
            return max(self.taus)
        if self.kind == "separable_quad":
            return self.memory
        return self.table.shape[0] / self.table_R

    def with_delta(self, delta: float) -> "CtKernelSpec":
        from dataclasses import replace

        return replace(self, delta=float(delta))


def upconvert_interleave(xd: SampledSignal) -> SampledSignal:
    """Digital upconversion at four times the carrier.

    Mixing with exp(j pi m / 2) and keeping the real part reduces to the
    block ``(i, -q, -i, q)`` for each encoder sample.
    """
    z = np.asarray(xd.samples, dtype=complex)
    out = np.stack([z.real, -z.imag, -z.real, z.imag], axis=1).reshape(-1)
    return SampledSignal(out, xd.rate * 4)


def zoh_to_fine(xt: SampledSignal, R: int) -> SampledSignal:
    """Zero-order hold onto a grid of ``R`` points per sample."""
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    return SampledSignal(np.repeat(xt.samples, R), xt.rate * R)


def _fine_delay(tau: float, R: int) -> int:
    d = tau * R
    di = int(round(d))
    if abs(d - di) > 1e-9:
        log.warning("delay %.6gT is not on the fine grid (R=%d); rounded to %d samples", tau, R, di)
    return di


def fine_kernel(gen: Callable, memory: float, R: int) -> np.ndarray:
    """Left-endpoint samples of a kernel on [0, memory) at step 1/R."""
    n = int(round(memory * R))
    return gen(np.arange(n) / R)


def circular_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """(x * h)[f] = sum_j h[j] x[f - j] with circular indexing."""
    n = x.size
    if h.size > n:
        raise ValueError("kernel longer than the record")
    H = np.fft.rfft(h, n)
    return np.fft.irfft(np.fft.rfft(x) * H, n)


def general_cost(n_fine: int, table: np.ndarray) -> int:
    return int(n_fine * table.size)


def apply_nonlinearity(xc: SampledSignal, k: CtKernelSpec, cfg: RateConfig,
                       max_general_cost: float = 2e8) -> SampledSignal:
    """Evaluate ``G`` on a periodic fine-grid record."""
    if len(xc) != cfg.n_fine:
        raise ValueError(f"expected {cfg.n_fine} fine samples, got {len(xc)}")
    x = np.asarray(xc.samples, dtype=float)
    if k.delta == 0:
        return SampledSignal(x.copy(), xc.rate)
    R = cfg.R
    if k.kind == "cubic_delay":
        d1, d2, d3 = (_fine_delay(t, R) for t in k.taus)
        prod = np.roll(x, d1) * np.roll(x, d2) * np.roll(x, d3)
        return SampledSignal(x - k.delta * prod, xc.rate)
    if k.kind == "separable_quad":
        dt = 1.0 / R
        h1 = fine_kernel(KERNEL_GENERATORS[k.h1], k.memory, R) * dt
        h2 = fine_kernel(KERNEL_GENERATORS[k.h2], k.memory, R) * dt
        return SampledSignal(x - k.delta * circular_convolve(x, h1) * circular_convolve(x, h2), xc.rate)
    if k.table_R != R:
        raise ValueError(f"general kernel tabulated at R={k.table_R}, chain uses R={R}")
    tab = np.asarray(k.table, dtype=float)
    cost = general_cost(x.size, tab)
    if cost > max_general_cost:
        raise ValueError(f"general kernel cost {cost:.3g} multiply-adds exceeds bound {max_general_cost:.3g}")
    return SampledSignal(x - k.delta * general_volterra(x, tab, 1.0 / R), xc.rate)


def general_volterra(x: np.ndarray, table: np.ndarray, dt: float) -> np.ndarray:
    """Direct Riemann sum of a homogeneous Volterra term with circular indexing."""
    L, d = table.shape[0], table.ndim
    shifted = np.stack([np.roll(x, j) for j in range(L)])  # shifted[j, f] = x[f - j]
    out = np.zeros_like(x)
    for idx in np.ndindex(*table.shape):
        c = table[idx]
        if c == 0:
            continue
        term = shifted[idx[0]].copy()
        for j in idx[1:]:
            term *= shifted[j]
        out += c * term
    return out * dt ** d


def chain_from_xd(xd: SampledSignal, k: CtKernelSpec, cfg: RateConfig) -> SampledSignal:
    """Everything after the encoder: x_d -> x^."""
    if len(xd) != cfg.n_d:
        raise ValueError(f"expected {cfg.n_d} encoder samples, got {len(xd)}")
    xc = zoh_to_fine(upconvert_interleave(xd), cfg.R)
    return band_extract_demod(apply_nonlinearity(xc, k, cfg), cfg)


def simulate_reference(x: SampledSignal, enc: EncoderConfig, k: CtKernelSpec,
                       cfg: RateConfig) -> tuple[SampledSignal, SampledSignal]:
    """Run the full transmitter plus demodulator; returns ``(x_d, x_hat)``."""
    xd = encode(x, enc, cfg)
    return xd, chain_from_xd(xd, k, cfg)


def memory_in_samples(tau: float) -> int:
    """Digital memory, in interleaved samples, implied by a kernel memory of ``tau`` T."""
    return int(math.ceil(tau - 1e-12))
