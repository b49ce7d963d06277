"""
Least-squares identification of the FIR bank.

Two solver families share one contract (minimise the squared baseband error
plus a relative ridge penalty over complex taps):

* short filters (``L_f < n_d``): the real regressor matrix with columns
  ``v_k[(nK - l) mod n_d]`` is accumulated into a Gram matrix block by block
  (``normal_cholesky``) or factored directly (``qr``). Real and imaginary
  parts of the target are two right-hand sides of the same factorisation.
* full-length circular filters (``L_f == n_d``): the problem decouples into
  one small complex least-squares problem per baseband DFT bin, with one
  equation per training record.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .model import FirBankModel, MonomialBasis, eval_monomials, model_forward
from .signals import SampledSignal, nmse_db

log = logging.getLogger(__name__)

SOLVERS = ("normal_cholesky", "qr")


@dataclass(frozen=True)
class FitConfig:
    """Identification settings.

    ``ridge`` is relative to the mean diagonal of the Gram matrix.
    ``n_train`` is the number of baseband samples per training record.
    ``lead`` offsets the tap window (see :class:`FirBankModel`); ``None``
    centres short filters and uses 0 for full-length circular filters.
    """

    L_f: int = 16
    ridge: float = 1e-10
    n_train: int = 40960
    solver: str = "normal_cholesky"
    block_rows: int = 4096
    lead: int | None = None

    def __post_init__(self):
        if self.L_f < 1:
            raise ValueError(f"L_f must be >= 1, got {self.L_f}")
        if not self.ridge >= 0:
            raise ValueError(f"ridge must be non-negative, got {self.ridge}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")


@dataclass
class FitReport:
    train_nmse_db: float
    val_nmse_db: float = float("nan")
    condition_estimate: float = float("nan")
    unknowns: int = 0
    rank_deficient: bool = False
    solver: str = ""
    extra: dict = field(default_factory=dict)


def _as_records(x) -> list:
    if isinstance(x, SampledSignal):
        return [x]
    return list(x)


def regressor_block(V: np.ndarray, K: int, L: int, rows: np.ndarray, lead: int = 0) -> np.ndarray:
    """Rows ``n`` of the real design matrix; column ``k*L + l`` is ``V[(nK + lead - l) mod n_d, k]``."""
    n_d, N = V.shape
    idx = (rows[:, None] * K + lead - np.arange(L)[None, :]) % n_d  # (rows, L)
    return V[idx].transpose(0, 2, 1).reshape(rows.size, N * L)


def _chol_condition(c, gram_norm1: float) -> float:
    rcond, info = sla.lapack.dpocon(c, gram_norm1)
    if info != 0 or rcond <= 0:
        return float("inf")
    return 1.0 / rcond


def _solve_normal(G: np.ndarray, B: np.ndarray, lam: float):
    """Solve (G + lam I) X = B; fall back to a minimum-norm solution when singular."""
    n = G.shape[0]
    mean_diag = float(np.mean(np.diag(G))) if n else 0.0
    lam_abs = lam * mean_diag
    Gr = G + lam_abs * np.eye(n)
    norm1 = float(np.max(np.sum(np.abs(Gr), axis=0))) if n else 0.0
    if mean_diag == 0:
        return np.zeros_like(B), float("inf"), True
    singular = 1.0 / (n * np.finfo(float).eps)
    try:
        c, low = sla.cho_factor(Gr, lower=False, check_finite=False)
        cond = _chol_condition(c, norm1)
        # with a ridge the regularised system is the intended one even when G is singular
        if cond < singular or lam_abs > 0:
            return sla.cho_solve((c, low), B, check_finite=False), cond, cond >= singular
    except np.linalg.LinAlgError:
        cond = float("inf")
    w, Q = np.linalg.eigh(Gr)
    tol = w.max() * n * np.finfo(float).eps
    keep = w > tol
    X = Q[:, keep] @ ((Q[:, keep].T @ B) / w[keep, None])
    cond = float(w.max() / w[keep].min()) if keep.any() else float("inf")
    return X, max(cond, singular), True


def _fit_time_domain(xds, y_list, K: int, cfg: FitConfig, lead: int, basis: MonomialBasis):
    N = len(basis)
    L = cfg.L_f
    P = N * L
    if cfg.solver == "normal_cholesky":
        G = np.zeros((P, P))
        B = np.zeros((P, 2))
        for x, y in zip(xds, y_list):
            V = eval_monomials(x, basis)
            n_out = V.shape[0] // K
            for start in range(0, n_out, cfg.block_rows):
                rows = np.arange(start, min(start + cfg.block_rows, n_out))
                A = regressor_block(V, K, L, rows, lead)
                G += A.T @ A
                B += A.T @ np.stack([y[rows].real, y[rows].imag], axis=1)
        X, cond, deficient = _solve_normal(G, B, cfg.ridge)
        return X[:, 0] + 1j * X[:, 1], cond, deficient
    A = np.vstack([regressor_block(eval_monomials(x, basis), K, L, np.arange(len(x) // K), lead)
                   for x in xds])
    Y = np.concatenate([np.stack([y.real, y.imag], axis=1) for y in y_list])
    lam_abs = cfg.ridge * float(np.mean(np.sum(A * A, axis=0)))
    if lam_abs > 0:
        A = np.vstack([A, math.sqrt(lam_abs) * np.eye(P)])
        Y = np.vstack([Y, np.zeros((P, 2))])
    Q, Rm = np.linalg.qr(A)
    d = np.abs(np.diag(Rm))
    cond = float(d.max() / d.min()) ** 2 if d.min() > 0 else float("inf")
    deficient = not d.min() > d.max() * P * np.finfo(float).eps
    if deficient:
        X = np.linalg.lstsq(A, Y, rcond=None)[0]
    else:
        X = sla.solve_triangular(Rm, Q.T @ Y, check_finite=False)
    return X[:, 0] + 1j * X[:, 1], cond, deficient


# --- full-length circular taps ---------------------------------------------

def polyphase_classes(basis: MonomialBasis, K: int) -> list:
    """Distinct baseband regressors ``v_k[nK - p]`` as ``(key, (k, p))`` pairs.

    ``v_k[nK - p]`` is the product of rail samples at offsets ``delay + p``
    behind ``nK``; two pairs with the same offset multiset (the key) are the
    same signal, and the first pair seen represents the class.
    """
    seen = {}
    for k, spec in enumerate(basis.specs):
        for p in range(K):
            key = tuple(sorted(((c, d + p), e) for (c, d), e in spec.factors))
            seen.setdefault(key, (k, p))
    return list(seen.items())


def polyphase_regressors(xd: SampledSignal, keys: Sequence, K: int) -> np.ndarray:
    """Real ``(n_bb, D)`` matrix of the distinct regressors of one record."""
    z = np.asarray(xd.samples, dtype=complex)
    n_d = z.size
    base = np.arange(n_d // K) * K
    rails = {"i": z.real, "q": z.imag}
    cache = {}
    out = np.empty((n_d // K, len(keys)))
    for j, key in enumerate(keys):
        col = np.ones(n_d // K)
        for (c, off), e in key:
            if (c, off) not in cache:
                cache[(c, off)] = rails[c][(base - off) % n_d]
            v = cache[(c, off)]
            col *= v if e == 1 else v ** e
        out[:, j] = col
    return out


def _fit_spectral(xds, y_list, K: int, cfg: FitConfig, basis: MonomialBasis,
                  mem_budget: float = 8.0e8):
    n_d = len(xds[0])
    n_bb = n_d // K
    classes = polyphase_classes(basis, K)
    keys = [key for key, _ in classes]
    reps = [rep for _, rep in classes]
    D = len(reps)
    n_rec = len(xds)
    if n_rec < D:
        log.warning("%d records for %d distinct regressors per bin: underdetermined", n_rec, D)
    Yspec = np.stack([np.fft.fft(y) for y in y_list])  # (records, n_bb)
    half = n_bb // 2 + 1
    chunk = max(1, int(mem_budget // (16 * n_rec * D)))
    G = np.zeros((n_bb, D), dtype=complex)
    lam = cfg.ridge
    rcond = 1e-12
    deficient = False
    err = 0.0
    for start in range(0, half, chunk):
        bins = np.arange(start, min(start + chunk, half))
        A = np.empty((n_rec, bins.size, D), dtype=complex)
        # regressors are recomputed per chunk; holding every record's spectra costs GBs
        for r, x in enumerate(xds):
            A[r] = np.fft.rfft(polyphase_regressors(x, keys, K), axis=0)[bins]
        for j, b in enumerate(bins):
            Ab = np.ascontiguousarray(A[:, j, :])
            nb = (-b) % n_bb
            # real regressors: the bin -b system is the conjugate of the bin b system
            rhs = np.stack([Yspec[:, b], np.conj(Yspec[:, nb])], axis=1)
            An, rn = Ab, rhs
            if lam > 0:
                scale = lam * float(np.mean(np.sum(np.abs(Ab) ** 2, axis=0)))
                An = np.vstack([Ab, math.sqrt(scale) * np.eye(D)])
                rn = np.vstack([rhs, np.zeros((D, 2))])
            sol, _, rank, _ = sla.lstsq(An, rn, cond=rcond, lapack_driver="gelsy", check_finite=False)
            if rank < D:
                deficient = True
            res = np.abs(Ab @ sol - rhs) ** 2
            G[b] = sol[:, 0]
            err += res[:, 0].sum()
            if nb != b:
                G[nb] = np.conj(sol[:, 1])
                err += res[:, 1].sum()
    g = np.fft.ifft(G, axis=0)  # (n_bb, D) circular polyphase filters
    taps = np.zeros((len(basis), n_d), dtype=complex)
    for j, (k, p) in enumerate(reps):
        taps[k, p::K] = g[:, j]
    return taps, deficient, D, err / n_bb


def fit_model(xd, xhat_ref, basis: MonomialBasis, K: int, cfg: FitConfig,
              val: tuple | None = None) -> tuple[FirBankModel, FitReport]:
    """Least-squares fit of the periodic FIR-bank model.

    ``xd`` and ``xhat_ref`` are a single record or matching sequences of
    records (encoder-rate inputs, baseband targets). ``val`` optionally
    holds a held-out ``(xd, xhat)`` pair whose NMSE goes into the report.
    """
    xds, ys = _as_records(xd), _as_records(xhat_ref)
    if len(xds) != len(ys) or not xds:
        raise ValueError("need matching, non-empty lists of input and target records")
    n_d = len(xds[0])
    for a, b in zip(xds, ys):
        if len(a) != n_d or len(b) * K != n_d:
            raise ValueError(f"record lengths inconsistent: n_d={len(a)}, n_bb={len(b)}, K={K}")
        if not math.isclose(a.rate, b.rate * K):
            raise ValueError("input rate must be K times the target rate")
    if cfg.L_f > n_d:
        raise ValueError(f"L_f={cfg.L_f} exceeds n_d={n_d}")
    y_list = [np.asarray(y.samples, dtype=complex) for y in ys]
    n_eq = sum(y.size for y in y_list)
    full = cfg.L_f == n_d and n_d > 1
    lead = (0 if full else cfg.L_f // 2) if cfg.lead is None else cfg.lead
    ref = float(sum(np.sum(np.abs(y) ** 2) for y in y_list))
    if full:
        taps, deficient, D, err = _fit_spectral(xds, y_list, K, cfg, basis)
        taps = np.roll(taps, lead, axis=1)
        unknowns = D * (n_d // K)
        cond = float("nan")
    else:
        unknowns = len(basis) * cfg.L_f
        if unknowns > n_eq:
            warnings.warn(f"{unknowns} unknowns exceed {n_eq} equations", stacklevel=2)
        theta, cond, deficient = _fit_time_domain(xds, y_list, K, cfg, lead, basis)
        taps = theta.reshape(len(basis), cfg.L_f)
    model = FirBankModel(basis, taps, K, "periodic", lead)
    if not full:
        err = 0.0
        for x, y in zip(xds, y_list):
            err += float(np.sum(np.abs(model_forward(x, model).samples - y) ** 2))
    if ref == 0:
        train_db = 0.0 if err == 0 else float("inf")
    else:
        train_db = -400.0 if err == 0 else max(10 * math.log10(err / ref), -400.0)
    report = FitReport(train_db, condition_estimate=cond, unknowns=unknowns,
                       rank_deficient=deficient, solver="spectral" if cfg.L_f == n_d else cfg.solver)
    if val is not None:
        report.val_nmse_db = validate(model, *val)
    return model, report


def validate(model: FirBankModel, xd_val, xhat_val) -> float:
    """NMSE (dB) of the model against held-out reference output (records pooled)."""
    xds, ys = _as_records(xd_val), _as_records(xhat_val)
    err = ref = 0.0
    for x, y in zip(xds, ys):
        if not math.isclose(x.rate, y.rate * model.K):
            raise ValueError(f"rate mismatch: input {x.rate}, target {y.rate}, K={model.K}")
        est = model_forward(x, model)
        if len(xds) == 1:
            return nmse_db(y, est)
        err += float(np.sum(np.abs(est.samples - y.samples) ** 2))
        ref += float(np.sum(np.abs(y.samples) ** 2))
    if ref == 0:
        raise ValueError("reference has zero energy")
    return -400.0 if err == 0 else max(10 * math.log10(err / ref), -400.0)


def design_matrix(xd: SampledSignal, basis: MonomialBasis, K: int, L_f: int, lead: int = 0) -> np.ndarray:
    """Full real regressor matrix of one record (small problems and tests)."""
    V = eval_monomials(xd, basis)
    return regressor_block(V, K, L_f, np.arange(V.shape[0] // K), lead)
