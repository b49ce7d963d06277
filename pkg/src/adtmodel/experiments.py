"""Config-driven experiment pipeline: simulate, fit, validate, sweep over delta."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import CtKernelSpec, simulate_reference
from .encoders import EncoderConfig
from .identification import FitConfig, fit_model, validate
from .model import FirBankModel, enumerate_monomials
from .signals import RateConfig, SampledSignal, gen_stimulus

log = logging.getLogger(__name__)

CSV_VERSION = "adtmodel-sweep-v1"
CSV_COLUMNS = (
    "example_id", "delta", "n_train", "n_val", "M", "m_i", "m_q", "L_f", "lambda",
    "train_nmse_db", "val_nmse_db", "condition_estimate", "seed_train", "seed_val",
    "wall_seconds", "error",
)


EXAMPLE1_DELTAS = (0.001, 0.0022, 0.005, 0.011, 0.024, 0.052, 0.11, 0.2)


def log_grid(lo: float, hi: float, n: int = 8) -> list[float]:
    """``n`` log-spaced points from ``lo`` to ``hi`` rounded to 2 significant digits."""
    return [float(f"{v:.2g}") for v in np.geomspace(lo, hi, n)]


# key -> (type, default). Types: int, float, str, floats (space or comma list)
DEFAULTS: dict[str, tuple] = {
    "example_id": (str, "example1"),
    "rates.K": (int, 8),
    "rates.R": (int, 10),
    "encoder.kind": (str, "dsm1"),
    "encoder.levels": ("floats", (-1.0, -0.5, 0.0, 0.5, 1.0)),
    "encoder.interpolation": (str, "ideal"),
    "kernel.kind": (str, "cubic_delay"),
    "kernel.taus": ("floats", (1.2, 2.3, 0.4)),
    "kernel.h1": (str, "exp095"),
    "kernel.h2": (str, "exp091cos"),
    "kernel.memory": (float, 4.0),
    "kernel.deltas": ("floats", EXAMPLE1_DELTAS),
    "model.M": (int, 3),
    "model.m_i": (int, 4),
    "model.m_q": (int, 4),
    "model.L_f": (int, 16),
    "model.lambda": (float, 1e-10),
    "model.solver": (str, "normal_cholesky"),
    "data.n_train": (int, 40960),
    "data.n_val": (int, 8192),
    "data.seed_train": (int, 1),
    "data.seed_val": (int, 2),
    "dpd.M": (int, 3),
    "dpd.m": (int, 2),
    "dpd.L_f": (int, 16),
    "dpd.L0": (str, "forward"),
    "dpd.n_bb": (int, 4096),
    "dpd.seed_fit": (int, 11),
    "dpd.seed_eval": (int, 12),
    "outputs.csv": (str, "sweep.csv"),
}


def _parse_value(kind, text: str):
    if kind == "floats":
        return tuple(float(t) for t in text.replace(",", " ").split())
    return kind(text)


def _format_value(kind, value) -> str:
    if kind == "floats":
        return " ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (_, v) in DEFAULTS.items()})

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        cfg = cls()
        unknown = []
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep:
                raise ValueError(f"{source}:{n}: expected key = value, got {raw!r}")
            if key not in DEFAULTS:
                unknown.append(key)
                continue
            try:
                cfg.values[key] = _parse_value(DEFAULTS[key][0], val.strip())
            except ValueError as exc:
                raise ValueError(f"{source}:{n}: bad value for {key}: {exc}") from None
        if unknown:
            raise ValueError(f"{source}: unknown config keys: {', '.join(unknown)}")
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read(), str(path))

    def override(self, **kv) -> "ExperimentConfig":
        vals = dict(self.values)
        for k, v in kv.items():
            if k not in DEFAULTS:
                raise ValueError(f"unknown config key {k}")
            vals[k] = v
        out = ExperimentConfig(vals)
        out.check()
        return out

    def check(self):
        if not self["kernel.deltas"]:
            raise ValueError("kernel.deltas must be non-empty")
        if self["data.seed_train"] == self["data.seed_val"]:
            raise ValueError("train and validation seeds must differ")
        if self["dpd.seed_fit"] == self["dpd.seed_eval"]:
            raise ValueError("DPD fit and evaluation seeds must differ")

    def to_text(self) -> str:
        return "".join(f"{k} = {_format_value(DEFAULTS[k][0], self.values[k])}\n" for k in DEFAULTS)

    # builders
    def rates(self, n_bb: int) -> RateConfig:
        return RateConfig(n_bb, self["rates.K"], self["rates.R"])

    def encoder(self) -> EncoderConfig:
        return EncoderConfig(self["encoder.kind"], self["encoder.levels"], self["rates.K"],
                             self["encoder.interpolation"])

    def kernel(self, delta: float) -> CtKernelSpec:
        return CtKernelSpec(self["kernel.kind"], float(delta), self["kernel.taus"], self["kernel.h1"],
                            self["kernel.h2"], self["kernel.memory"])

    def basis(self):
        return enumerate_monomials(self["model.M"], self["model.m_i"], self["model.m_q"])

    def fit_config(self) -> FitConfig:
        return FitConfig(L_f=self["model.L_f"], ridge=self["model.lambda"], n_train=self["data.n_train"],
                         solver=self["model.solver"])


@dataclass
class SimData:
    """Train and validation records for one delta."""

    delta: float
    x_train: SampledSignal
    xd_train: SampledSignal
    xhat_train: SampledSignal
    x_val: SampledSignal
    xd_val: SampledSignal
    xhat_val: SampledSignal

    def save(self, path):
        np.savez(path, delta=self.delta,
                 **{k: getattr(self, k).samples for k in
                    ("x_train", "xd_train", "xhat_train", "x_val", "xd_val", "xhat_val")},
                 **{k + "_rate": getattr(self, k).rate for k in
                    ("x_train", "xd_train", "xhat_train", "x_val", "xd_val", "xhat_val")})

    @classmethod
    def load(cls, path) -> "SimData":
        with np.load(path) as z:
            sig = {k: SampledSignal(z[k], float(z[k + "_rate"])) for k in
                   ("x_train", "xd_train", "xhat_train", "x_val", "xd_val", "xhat_val")}
            return cls(float(z["delta"]), **sig)


def simulate_point(cfg: ExperimentConfig, delta: float) -> SimData:
    enc, k = cfg.encoder(), cfg.kernel(delta)
    n_tr, n_va = cfg["data.n_train"], cfg["data.n_val"]
    x_tr = gen_stimulus(n_tr, cfg["data.seed_train"])
    x_va = gen_stimulus(n_va, cfg["data.seed_val"])
    xd_tr, xh_tr = simulate_reference(x_tr, enc, k, cfg.rates(n_tr))
    xd_va, xh_va = simulate_reference(x_va, enc, k, cfg.rates(n_va))
    return SimData(float(delta), x_tr, xd_tr, xh_tr, x_va, xd_va, xh_va)


def fit_point(cfg: ExperimentConfig, data: SimData):
    return fit_model(data.xd_train, data.xhat_train, cfg.basis(), cfg["rates.K"], cfg.fit_config())


def validate_point(model: FirBankModel, data: SimData) -> float:
    return validate(model, data.xd_val, data.xhat_val)


def sweep_row(cfg: ExperimentConfig, delta: float) -> dict:
    row = {
        "example_id": cfg["example_id"], "delta": repr(float(delta)),
        "n_train": cfg["data.n_train"], "n_val": cfg["data.n_val"],
        "M": cfg["model.M"], "m_i": cfg["model.m_i"], "m_q": cfg["model.m_q"],
        "L_f": cfg["model.L_f"], "lambda": repr(cfg["model.lambda"]),
        "train_nmse_db": "", "val_nmse_db": "", "condition_estimate": "",
        "seed_train": cfg["data.seed_train"], "seed_val": cfg["data.seed_val"],
        "wall_seconds": "", "error": "",
    }
    t0 = time.perf_counter()
    try:
        data = simulate_point(cfg, delta)
        model, rep = fit_point(cfg, data)
        val = validate_point(model, data)
        row.update(train_nmse_db=repr(float(rep.train_nmse_db)), val_nmse_db=repr(float(val)),
                   condition_estimate=repr(float(rep.condition_estimate)))
    except Exception as exc:  # a failed point is recorded, the sweep goes on
        log.exception("sweep point delta=%s failed", delta)
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    row["wall_seconds"] = f"{time.perf_counter() - t0:.3f}"
    return row


def _row_job(args):
    text, delta = args
    return sweep_row(ExperimentConfig.from_text(text), delta)


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """One row per delta, in config order, whatever the completion order."""
    deltas = list(cfg["kernel.deltas"])
    if jobs <= 1 or len(deltas) == 1:
        return [sweep_row(cfg, d) for d in deltas]
    text = cfg.to_text()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_row_job, [(text, d) for d in deltas]))


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def read_sweep_csv(path) -> list[dict]:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_VERSION}":
            raise ValueError(f"{path}: expected header '# {CSV_VERSION}', got {first!r}")
        return list(csv.DictReader(fh))
