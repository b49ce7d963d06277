"""Pulse encoders acting separately on the in-phase and quadrature rails."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .signals import RateConfig, SampledSignal, upsample_hold, upsample_ideal

log = logging.getLogger(__name__)

ENCODER_KINDS = ("dsm1", "quantizer", "passthrough")
DEFAULT_LEVELS = (-1.0, -0.5, 0.0, 0.5, 1.0)


@dataclass(frozen=True)
class EncoderConfig:
    """Pulse encoder settings.

    ``kind`` is one of ``dsm1`` (first-order error-feedback delta-sigma),
    ``quantizer`` (memoryless nearest level) or ``passthrough``. ``oversample``
    must equal the rate configuration's ``K``.
    """

    kind: str = "dsm1"
    levels: tuple = DEFAULT_LEVELS
    oversample: int = 4
    interpolation: str = "ideal"

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}; expected one of {ENCODER_KINDS}")
        if self.interpolation not in ("ideal", "hold"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        levels = tuple(float(v) for v in self.levels)
        arr = np.array(levels)
        if len(set(levels)) < 2 or np.any(np.diff(arr) <= 0):
            raise ValueError("levels must be at least two strictly increasing values")
        if not np.allclose(arr, -arr[::-1], atol=1e-12):
            raise ValueError("levels must be symmetric about zero")
        if not (np.isclose(arr[0], -1.0) and np.isclose(arr[-1], 1.0)):
            raise ValueError("levels must span [-1, 1]")
        object.__setattr__(self, "levels", levels)
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise ValueError(f"oversample must be a positive integer, got {self.oversample}")


@dataclass
class EncodeResult:
    signal: SampledSignal
    overload: int = 0
    error_state: np.ndarray = field(default=None, repr=False)


def quantize_nearest(u: float, levels: Sequence[float]) -> float:
    """Nearest level to ``u``; an exact midpoint goes to the larger level."""
    lv = np.asarray(levels, dtype=float)
    k = int(np.searchsorted(lv, u, side="left"))
    if k == 0:
        return float(lv[0])
    if k == lv.size:
        return float(lv[-1])
    lo, hi = lv[k - 1], lv[k]
    return float(hi if (hi - u) <= (u - lo) else lo)


def _quantize_array(u: np.ndarray, lv: np.ndarray) -> np.ndarray:
    k = np.clip(np.searchsorted(lv, u, side="left"), 1, lv.size - 1)
    lo, hi = lv[k - 1], lv[k]
    return np.where(hi - u <= u - lo, hi, lo)


def dsm1(x: np.ndarray, levels: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """First-order error-feedback delta-sigma modulator from zero state.

    u[n] = x[n] + e[n-1], y[n] = Q(u[n]), e[n] = u[n] - y[n].
    Returns the output and the error state sequence.
    """
    lv = [float(v) for v in levels]
    mids = [(a + b) / 2 for a, b in zip(lv[:-1], lv[1:])]
    nlev = len(lv)
    out = np.empty(len(x))
    err = np.empty(len(x))
    e = 0.0
    # plain loop: the recursion is sequential and the ladder is short
    for n, xn in enumerate(x.tolist()):
        u = xn + e
        k = 0
        while k < nlev - 1 and u >= mids[k]:
            k += 1
        y = lv[k]
        e = u - y
        out[n] = y
        err[n] = e
    return out, err


def _encode_rail(r: np.ndarray, cfg: EncoderConfig) -> tuple[np.ndarray, np.ndarray | None]:
    if cfg.kind == "passthrough":
        return r.copy(), None
    lv = np.asarray(cfg.levels)
    if cfg.kind == "quantizer":
        y = _quantize_array(r, lv)
        return y, r - y
    return dsm1(r, lv)


def encode_detailed(x: SampledSignal, cfg: EncoderConfig, rates: RateConfig) -> EncodeResult:
    """Like :func:`encode` but also reports overload count and error states."""
    if cfg.oversample != rates.K:
        raise ValueError(f"encoder oversample {cfg.oversample} != rate K {rates.K}")
    if len(x) != rates.n_bb:
        raise ValueError(f"expected {rates.n_bb} baseband samples, got {len(x)}")
    up = upsample_ideal if cfg.interpolation == "ideal" else upsample_hold
    z = np.asarray(x.samples, dtype=complex)
    i_up = up(SampledSignal(z.real, x.rate), cfg.oversample).samples
    q_up = up(SampledSignal(z.imag, x.rate), cfg.oversample).samples
    lv = np.asarray(cfg.levels)
    gap = lv[-1] - lv[-2]
    overload = 0
    if cfg.kind != "passthrough":
        overload = int(np.sum(np.abs(i_up) > lv[-1] + gap) + np.sum(np.abs(q_up) > lv[-1] + gap))
        if overload:
            log.warning("encoder overload on %d samples", overload)
    i_d, e_i = _encode_rail(i_up, cfg)
    q_d, e_q = _encode_rail(q_up, cfg)
    state = None if e_i is None else np.stack([e_i, e_q])
    return EncodeResult(SampledSignal(i_d + 1j * q_d, x.rate * cfg.oversample), overload, state)


def encode(x: SampledSignal, cfg: EncoderConfig, rates: RateConfig) -> SampledSignal:
    """Interpolate ``x`` by ``K`` and encode each rail independently.

    Returns ``x_d = P i + j P q`` at the encoder rate.
    """
    return encode_detailed(x, cfg, rates).signal
