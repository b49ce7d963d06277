"""
Digital predistortion of the form ``C = I - K L0 X V P``.

The compensator encodes its input, forms the monomial streams, mixes them
with the coefficient matrix ``X`` into the inputs of a fixed filter bank
``L0``, downsamples and subtracts the result from the input. ``X`` is fitted
so that the correction reproduces the first-order deviation of the aligned
chain from identity, ``S x - x``; the compensator is then ``x - (S x - x)``,
the first Neumann approximation of the inverse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .chain import CtKernelSpec, simulate_reference
from .encoders import EncoderConfig, encode
from .identification import FitConfig, fit_model, regressor_block
from .model import MonomialBasis, MonomialSpec, eval_monomials, parse_header
from .signals import (AlignmentResult, RateConfig, SampledSignal, align_gain_delay,
                      apply_alignment, nmse_db)

log = logging.getLogger(__name__)

Chain = Callable[[SampledSignal], "tuple[SampledSignal, SampledSignal]"]


def make_chain(enc: EncoderConfig, kernel: CtKernelSpec, rates: RateConfig) -> Chain:
    """Closure ``x -> (x_d, x_hat)`` over fixed encoder, kernel and rates."""
    def run(x: SampledSignal):
        return simulate_reference(x, enc, kernel, rates)
    return run


@dataclass
class Compensator:
    """``C x = limit(x - K L0 X V P x)``.

    ``L0`` holds one FIR prototype per row (encoder rate, tap window offset
    ``lead`` as in :class:`FirBankModel`); ``X`` maps the monomial streams
    to the prototype inputs, shape ``(len(L0), len(basis))``.
    """

    basis: MonomialBasis
    L0: np.ndarray
    X: np.ndarray
    K: int
    encoder: EncoderConfig
    rates: RateConfig
    alignment: AlignmentResult | None = None
    lead: int = 0
    limit: float = 1.0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.L0 = np.atleast_2d(np.asarray(self.L0, dtype=complex))
        self.X = np.atleast_2d(np.asarray(self.X, dtype=complex))
        if self.X.shape != (self.L0.shape[0], len(self.basis)):
            raise ValueError(f"X has shape {self.X.shape}, expected {(self.L0.shape[0], len(self.basis))}")

    def regressors(self, x: SampledSignal) -> np.ndarray:
        """``W[n, j, k]``: monomial ``k`` through prototype ``j``, downsampled."""
        return dpd_regressors(x, self.basis, self.L0, self.K, self.lead, self.encoder, self.rates)

    def correction(self, x: SampledSignal) -> np.ndarray:
        if not np.any(self.X):
            return np.zeros(len(x), dtype=complex)
        W = self.regressors(x)
        return np.einsum("njk,jk->n", W, self.X)

    def apply(self, x: SampledSignal) -> SampledSignal:
        if not np.any(self.X):
            return x
        z = np.asarray(x.samples, dtype=complex) - self.correction(x)
        re, im = z.real, z.imag
        clipped = int(np.sum(np.abs(re) > self.limit) + np.sum(np.abs(im) > self.limit))
        if clipped:
            log.info("compensator output limited on %d components", clipped)
        self.stats["clipped"] = self.stats.get("clipped", 0) + clipped
        z = np.clip(re, -self.limit, self.limit) + 1j * np.clip(im, -self.limit, self.limit)
        return SampledSignal(z, x.rate)

    def __call__(self, x: SampledSignal) -> SampledSignal:
        return self.apply(x)

    def with_X(self, X) -> "Compensator":
        return Compensator(self.basis, self.L0, X, self.K, self.encoder, self.rates,
                           self.alignment, self.lead, self.limit)


def dpd_regressors(x, basis, L0, K, lead, enc, rates) -> np.ndarray:
    xd = encode(x, enc, rates)
    V = eval_monomials(xd, basis)
    n_bb = len(xd) // K
    L = L0.shape[1]
    A = regressor_block(V, K, L, np.arange(n_bb), lead).reshape(n_bb, len(basis), L)
    return np.einsum("nkl,jl->njk", A, L0)


def lowpass_prototype(L: int, K: int) -> np.ndarray:
    """Windowed-sinc low-pass with cutoff at the baseband edge, unit DC gain, centred."""
    n = np.arange(L) - L // 2
    h = np.sinc(n / K) * np.hanning(L + 2)[1:-1]
    return h / h.sum()


def fit_compensator(x: SampledSignal, chain: Chain, basis: MonomialBasis, L0=None,
                    cfg: FitConfig = FitConfig(), *, enc: EncoderConfig, rates: RateConfig,
                    max_delay: int = 8, min_gain: float = 0.1) -> Compensator:
    """Fit ``X`` so that ``K L0 X V P x`` matches the aligned deviation ``S x - x``.

    ``L0`` is either an array of FIR prototypes (rows), ``"lowpass"`` for a
    single windowed-sinc prototype, or ``None`` to use the per-monomial
    filters of a forward model fitted on the same record (``X`` square).
    """
    xd, xhat = chain(x)
    al = align_gain_delay(x, xhat, max_delay)
    if abs(al.gain) < min_gain:
        raise ValueError(f"alignment gain {abs(al.gain):.3g} too small: chain is not a perturbation of identity")
    target = np.asarray(al.aligned.samples - x.samples, dtype=complex)
    lead = cfg.L_f // 2 if cfg.lead is None else cfg.lead
    if L0 is None:
        fwd, _ = fit_model(xd, al.aligned, basis, rates.K, cfg)
        L0 = fwd.taps
        lead = fwd.lead
    elif isinstance(L0, str):
        if L0 != "lowpass":
            raise ValueError(f"unknown L0 prototype {L0!r}")
        L0 = lowpass_prototype(cfg.L_f, rates.K)[None, :]
    L0 = np.atleast_2d(np.asarray(L0, dtype=complex))
    comp = Compensator(basis, L0, np.zeros((L0.shape[0], len(basis))), rates.K, enc, rates, al, lead)
    W = comp.regressors(x).reshape(len(x), -1)
    Xv, deficient = _complex_ridge(W, target, cfg.ridge)
    comp.X = Xv.reshape(L0.shape[0], len(basis))
    fitted = W @ Xv
    comp.stats.update(
        fit_residual_db=nmse_db(SampledSignal(target), SampledSignal(fitted)) if np.any(target) else -400.0,
        correction_db=nmse_db(x, SampledSignal(x.samples + fitted)),
        rank_deficient=deficient,
    )
    return comp


def _complex_ridge(W: np.ndarray, y: np.ndarray, lam: float):
    G = W.conj().T @ W
    b = W.conj().T @ y
    lam_abs = lam * float(np.mean(np.diag(G).real))
    try:
        c = sla.cho_factor(G + lam_abs * np.eye(G.shape[0]), check_finite=False)
        return sla.cho_solve(c, b, check_finite=False), False
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(W, y, rcond=None)[0], True


def eval_compensated(x: SampledSignal, comp: Compensator, chain: Chain) -> tuple[float, float]:
    """NMSE of the plain and the compensated chain against ``x`` (dB).

    Both outputs are aligned with the delay and gain stored in the
    compensator.
    """
    al = comp.alignment
    if al is None:
        raise ValueError("compensator carries no alignment")
    _, y_plain = chain(x)
    _, y_dpd = chain(comp.apply(x))
    plain = nmse_db(x, apply_alignment(y_plain, al.delay, al.gain))
    dpd = nmse_db(x, apply_alignment(y_dpd, al.delay, al.gain))
    return plain, dpd


# --- serialization ---------------------------------------------------------

COMP_TAG = "adtmodel-compensator-v1"


def save_compensator(comp: Compensator, path) -> None:
    b = comp.basis
    al = comp.alignment
    lines = [
        f"# format={COMP_TAG}",
        f"# M={b.M}", f"# m_i={b.m_i}", f"# m_q={b.m_q}",
        f"# K={comp.K}", f"# L0_len={comp.L0.shape[1]}", f"# L0_count={comp.L0.shape[0]}",
        f"# lead={comp.lead}", f"# limit={float(comp.limit)!r}",
        f"# n_bb={comp.rates.n_bb}", f"# R={comp.rates.R}",
        f"# encoder={comp.encoder.kind}", f"# levels={' '.join(repr(v) for v in comp.encoder.levels)}",
        f"# interpolation={comp.encoder.interpolation}",
        f"# align_delay={al.delay if al else 0}",
        f"# align_gain={complex(al.gain if al else 1)!r}",
        "# section=L0",
        "prototype,tap,real,imag",
    ]
    for j, row in enumerate(comp.L0):
        lines += [f"{j},{l},{float(c.real)!r},{float(c.imag)!r}" for l, c in enumerate(row)]
    lines += ["# section=X", "row,monomial,real,imag"]
    for j, row in enumerate(comp.X):
        lines += [f"{j},{spec},{float(c.real)!r},{float(c.imag)!r}" for spec, c in zip(b.specs, row)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_compensator(path) -> Compensator:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    head = parse_header(lines)
    if head.get("format") != COMP_TAG:
        raise ValueError(f"{path}: not a {COMP_TAG} file")
    i_l0 = lines.index("# section=L0")
    i_x = lines.index("# section=X")
    l0_rows = lines[i_l0 + 2:i_x]
    x_rows = lines[i_x + 2:]
    n_j, n_l = int(head["L0_count"]), int(head["L0_len"])
    L0 = np.zeros((n_j, n_l), dtype=complex)
    for r in l0_rows:
        j, l, re_, im_ = r.split(",")
        L0[int(j), int(l)] = complex(float(re_), float(im_))
    names = list(dict.fromkeys(r.split(",")[1] for r in x_rows))
    specs = tuple(MonomialSpec.parse(n) for n in names)
    basis = MonomialBasis(specs, int(head["M"]), int(head["m_i"]), int(head["m_q"]))
    index = {n: k for k, n in enumerate(names)}
    X = np.zeros((n_j, len(specs)), dtype=complex)
    for r in x_rows:
        j, name, re_, im_ = r.split(",")
        X[int(j), index[name]] = complex(float(re_), float(im_))
    K = int(head["K"])
    levels = tuple(float(v) for v in head["levels"].split())
    enc = EncoderConfig(head["encoder"], levels, K, head["interpolation"])
    rates = RateConfig(int(head["n_bb"]), K, int(head["R"]))
    gain = complex(head["align_gain"])
    al = AlignmentResult(int(head["align_delay"]), gain, None)
    return Compensator(basis, L0, X, K, enc, rates, al, int(head["lead"]), float(head["limit"]))
