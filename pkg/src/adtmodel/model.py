"""
Baseband equivalent structure: Volterra monomials of the encoded rails, a
bank of complex FIR filters (one per monomial) and a downsampler.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .signals import SampledSignal

COMPONENTS = ("i", "q")
_VAR_RE = re.compile(r"([iq])\[n(?:-(\d+))?\](?:\^(\d+))?")


@dataclass(frozen=True, order=True)
class MonomialSpec:
    """A product of delayed rail samples, e.g. i[n] i[n-1] q[n]^2.

    ``factors`` is a sorted tuple of ``((component, delay), exponent)`` with
    components ``"i"``/``"q"`` and positive exponents.
    """

    factors: tuple

    def __post_init__(self):
        merged: dict = {}
        for (comp, delay), e in self.factors:
            if comp not in COMPONENTS or delay < 0 or e < 1:
                raise ValueError(f"bad monomial factor {(comp, delay)}^{e}")
            merged[(comp, int(delay))] = merged.get((comp, int(delay)), 0) + int(e)
        object.__setattr__(self, "factors", tuple(sorted(merged.items())))

    @classmethod
    def from_variables(cls, variables: Iterable[tuple]) -> "MonomialSpec":
        """Build from a multiset of ``(component, delay)`` variables."""
        return cls(tuple((v, 1) for v in variables))

    @classmethod
    def parse(cls, text: str) -> "MonomialSpec":
        factors = []
        for tok in text.split("*"):
            m = _VAR_RE.fullmatch(tok.strip())
            if not m:
                raise ValueError(f"cannot parse monomial factor {tok!r}")
            comp, delay, exp = m.groups()
            factors.append(((comp, int(delay or 0)), int(exp or 1)))
        return cls(tuple(factors))

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.factors)

    @property
    def variables(self) -> tuple:
        """Sorted multiset of variables, one entry per unit of exponent."""
        return tuple(v for v, e in self.factors for _ in range(e))

    def __str__(self):
        parts = []
        for (comp, d), e in self.factors:
            s = f"{comp}[n]" if d == 0 else f"{comp}[n-{d}]"
            parts.append(s if e == 1 else f"{s}^{e}")
        return "*".join(parts)


def _sort_key(spec: MonomialSpec):
    return (spec.degree, spec.variables)


@dataclass(frozen=True)
class MonomialBasis:
    specs: tuple
    M: int
    m_i: int
    m_q: int

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    @property
    def count(self) -> int:
        return len(self.specs)

    def index(self, spec: MonomialSpec) -> int:
        return self.specs.index(spec)

    @property
    def max_delay(self) -> int:
        return max((d for s in self.specs for (_, d), _ in s.factors), default=0)


def basis_variables(m_i: int, m_q: int) -> list:
    return [("i", d) for d in range(m_i)] + [("q", d) for d in range(m_q)]


def enumerate_monomials(M: int, m_i: int, m_q: int) -> MonomialBasis:
    """All monomials of degree 1..M over i[n..n-m_i+1] and q[n..n-m_q+1].

    Ordered by degree, then lexicographically by the sorted variable list.
    """
    if M < 1 or m_i < 0 or m_q < 0 or m_i + m_q < 1:
        raise ValueError(f"invalid basis parameters M={M}, m_i={m_i}, m_q={m_q}")
    variables = basis_variables(m_i, m_q)
    specs = [
        MonomialSpec.from_variables(combo)
        for d in range(1, M + 1)
        for combo in itertools.combinations_with_replacement(variables, d)
    ]
    specs.sort(key=_sort_key)
    return MonomialBasis(tuple(specs), M, m_i, m_q)


def basis_size(M: int, m_i: int, m_q: int) -> int:
    n = m_i + m_q
    return sum(math.comb(n + d - 1, d) for d in range(1, M + 1))


def eval_monomials(xd: SampledSignal, basis: MonomialBasis | Sequence[MonomialSpec],
                   periodic: bool = True) -> np.ndarray:
    """Monomial streams as an ``(n_d, N)`` real matrix.

    Delays wrap around the record when ``periodic``; otherwise samples before
    the start of the record are taken as zero.
    """
    z = np.asarray(xd.samples, dtype=complex)
    rails = {"i": z.real, "q": z.imag}
    n = z.size
    cache: dict = {}

    def delayed(comp, d):
        key = (comp, d)
        if key not in cache:
            r = rails[comp]
            if periodic:
                cache[key] = np.roll(r, d)
            else:
                s = np.zeros(n)
                s[d:] = r[: n - d] if d < n else 0.0
                cache[key] = s
        return cache[key]

    specs = basis.specs if isinstance(basis, MonomialBasis) else tuple(basis)
    out = np.empty((n, len(specs)))
    for k, spec in enumerate(specs):
        col = np.ones(n)
        for (comp, d), e in spec.factors:
            v = delayed(comp, d)
            col *= v if e == 1 else v ** e
        out[:, k] = col
    return out


@dataclass
class FirBankModel:
    """Identified model: basis, one complex FIR (rows of ``taps``) per monomial, downsampling K.

    Tap ``l`` weights the monomial stream ``l - lead`` encoder samples in the
    past, so ``lead > 0`` lets a short filter straddle the zero-phase
    response of the ideal bandpass.
    """

    basis: MonomialBasis
    taps: np.ndarray
    K: int
    mode: str = "periodic"
    lead: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taps = np.atleast_2d(np.asarray(self.taps, dtype=complex))
        if self.taps.shape[0] != len(self.basis):
            raise ValueError(f"{self.taps.shape[0]} tap rows for {len(self.basis)} monomials")
        if self.taps.shape[1] < 1:
            raise ValueError("taps must have at least one coefficient")
        if self.mode not in ("periodic", "streaming"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 <= self.lead < self.taps.shape[1] or self.lead != int(self.lead):
            raise ValueError(f"lead must be an integer in [0, L_f), got {self.lead}")

    @property
    def L_f(self) -> int:
        return self.taps.shape[1]


def filter_bank_downsample(V: np.ndarray, taps: np.ndarray, K: int, periodic: bool = True,
                           lead: int = 0) -> np.ndarray:
    """out[n] = sum_k sum_l taps[k, l] V[n K + lead - l, k] (circular or zero-history)."""
    n_d, N = V.shape
    L = taps.shape[1]
    if periodic:
        if L > n_d:
            raise ValueError(f"periodic mode needs L_f <= n_d ({L} > {n_d})")
        if n_d % K:
            raise ValueError(f"n_d={n_d} is not divisible by K={K}")
        n_out = n_d // K
        if L == n_d:
            # full-length circular taps: multiply spectra, then decimate
            Y = np.fft.fft(V, axis=0) * np.fft.fft(taps, axis=1).T
            return np.roll(np.fft.ifft(Y.sum(axis=1)), -lead)[::K]
    else:
        n_out = -(-n_d // K)
    rows = np.arange(n_out) * K + lead
    out = np.zeros(n_out, dtype=complex)
    for l in range(L):
        idx = rows - l
        if periodic:
            block = V[idx % n_d]
        else:
            block = np.zeros((n_out, N))
            ok = (idx >= 0) & (idx < n_d)
            block[ok] = V[idx[ok]]
        out += block @ taps[:, l]
    return out


def model_forward(xd: SampledSignal, model: FirBankModel) -> SampledSignal:
    """Run the encoded signal through monomials, the FIR bank and the downsampler."""
    periodic = model.mode == "periodic"
    if periodic and len(xd) % model.K:
        raise ValueError(f"record length {len(xd)} is not divisible by K={model.K}")
    V = eval_monomials(xd, model.basis, periodic=periodic)
    y = filter_bank_downsample(V, model.taps, model.K, periodic, model.lead)
    return SampledSignal(y, xd.rate / model.K)


# --- serialization ---------------------------------------------------------

FORMAT_TAG = "adtmodel-firbank-v1"


def _header_lines(model: FirBankModel) -> list:
    b = model.basis
    return [
        f"# format={FORMAT_TAG}",
        f"# M={b.M}",
        f"# m_i={b.m_i}",
        f"# m_q={b.m_q}",
        f"# K={model.K}",
        f"# L_f={model.L_f}",
        f"# mode={model.mode}",
        f"# lead={model.lead}",
        f"# count={len(b)}",
    ]


def model_rows(model: FirBankModel) -> list:
    rows = ["monomial,tap,real,imag"]
    for spec, taps in zip(model.basis.specs, model.taps):
        name = str(spec)
        for l, c in enumerate(taps):
            rows.append(f"{name},{l},{float(c.real)!r},{float(c.imag)!r}")
    return rows


def save_model(model: FirBankModel, path, extra_header: Sequence[str] = ()) -> None:
    """Write a text artifact that reloads bit-identically (floats via repr)."""
    lines = _header_lines(model) + [f"# {h}" for h in extra_header] + model_rows(model)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_header(lines: Iterable[str]) -> dict:
    head = {}
    for line in lines:
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition("=")
        head[key.strip()] = val.strip()
    return head


def read_tap_rows(lines: Sequence[str], names: Sequence[str], L_f: int) -> np.ndarray:
    index = {n: k for k, n in enumerate(names)}
    taps = np.zeros((len(names), L_f), dtype=complex)
    seen = np.zeros((len(names), L_f), dtype=bool)
    for line in lines:
        name, l, re_, im_ = line.split(",")
        k, l = index[name], int(l)
        taps[k, l] = complex(float(re_), float(im_))
        seen[k, l] = True
    if not seen.all():
        raise ValueError("model file is missing tap rows")
    return taps


def load_model(path) -> FirBankModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    head = parse_header(lines)
    if head.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")
    body = [ln for ln in lines if not ln.startswith("#")]
    if body[0] != "monomial,tap,real,imag":
        raise ValueError(f"{path}: unexpected column header {body[0]!r}")
    rows = body[1:]
    names = list(dict.fromkeys(r.split(",", 1)[0] for r in rows))
    specs = tuple(MonomialSpec.parse(n) for n in names)
    basis = MonomialBasis(specs, int(head["M"]), int(head["m_i"]), int(head["m_q"]))
    taps = read_tap_rows(rows, names, int(head["L_f"]))
    return FirBankModel(basis, taps, int(head["K"]), head["mode"], int(head.get("lead", 0)))
