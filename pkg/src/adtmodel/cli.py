"""Command-line front end: ``adtmodel <subcommand> --config FILE ...``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import dpd as dpdmod
from .experiments import (ExperimentConfig, SimData, fit_point, rows_to_csv, run_sweep,
                          simulate_point, validate_point)
from .identification import FitConfig
from .model import enumerate_monomials, load_model, model_rows, save_model
from .signals import RateConfig, gen_stimulus


def _cfg(args) -> ExperimentConfig:
    if getattr(args, "config", None) is None:
        return ExperimentConfig()
    return ExperimentConfig.load(args.config)


def _delta(cfg, args) -> float:
    if args.delta is not None:
        return args.delta
    return cfg["kernel.deltas"][0]


def cmd_gen_stimulus(cfg, args):
    n = args.n or cfg["data.n_train"]
    seed = cfg["data.seed_train"] if args.seed is None else args.seed
    x = gen_stimulus(n, seed)
    np.save(args.out, x.samples)
    print(f"wrote {n} samples (seed {seed}) to {args.out}")


def cmd_simulate(cfg, args):
    data = simulate_point(cfg, _delta(cfg, args))
    data.save(args.out)
    print(f"wrote train/val records for delta={data.delta!r} to {args.out}")


def cmd_fit(cfg, args):
    data = SimData.load(args.data)
    model, rep = fit_point(cfg, data)
    save_model(model, args.out, extra_header=[f"delta={data.delta!r}",
                                              f"train_nmse_db={rep.train_nmse_db!r}"])
    print(f"train_nmse_db={rep.train_nmse_db!r} condition={rep.condition_estimate:.3g} -> {args.out}")


def cmd_validate(cfg, args):
    data = SimData.load(args.data)
    val = validate_point(load_model(args.model), data)
    print(f"val_nmse_db={val!r}")


def cmd_sweep(cfg, args):
    rows = run_sweep(cfg, jobs=args.jobs)
    out = args.out or cfg["outputs.csv"]
    with open(out, "w") as fh:
        fh.write(rows_to_csv(rows))
    failed = [r for r in rows if r["error"]]
    for r in rows:
        print(f"delta={r['delta']} val_nmse_db={r['val_nmse_db'] or 'n/a'} {r['error']}")
    print(f"wrote {len(rows)} rows to {out}")
    return 1 if failed else 0


def _dpd_setup(cfg, delta):
    n = cfg["dpd.n_bb"]
    rates = RateConfig(n, cfg["rates.K"], cfg["rates.R"])
    enc = cfg.encoder()
    chain = dpdmod.make_chain(enc, cfg.kernel(delta), rates)
    return rates, enc, chain


def cmd_dpd_fit(cfg, args):
    delta = _delta(cfg, args)
    rates, enc, chain = _dpd_setup(cfg, delta)
    basis = enumerate_monomials(cfg["dpd.M"], cfg["dpd.m"], cfg["dpd.m"])
    L0 = None if cfg["dpd.L0"] == "forward" else cfg["dpd.L0"]
    fc = FitConfig(L_f=cfg["dpd.L_f"], ridge=cfg["model.lambda"])
    comp = dpdmod.fit_compensator(gen_stimulus(rates.n_bb, cfg["dpd.seed_fit"]), chain, basis, L0, fc,
                                  enc=enc, rates=rates)
    dpdmod.save_compensator(comp, args.out)
    print(f"fit_residual_db={comp.stats['fit_residual_db']:.2f} -> {args.out}")


def cmd_dpd_eval(cfg, args):
    comp = dpdmod.load_compensator(args.comp)
    delta = _delta(cfg, args)
    _, _, chain = _dpd_setup(cfg, delta)
    plain, comp_db = dpdmod.eval_compensated(gen_stimulus(comp.rates.n_bb, cfg["dpd.seed_eval"]), comp, chain)
    print(f"nmse_plain_db={plain!r} nmse_dpd_db={comp_db!r} improvement_db={plain - comp_db!r} "
          f"clipped={comp.stats.get('clipped', 0)}")


def cmd_export_model(cfg, args):
    text = "\n".join(model_rows(load_model(args.model))) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "gen-stimulus": cmd_gen_stimulus,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
    "dpd-fit": cmd_dpd_fit,
    "dpd-eval": cmd_dpd_eval,
    "export-model": cmd_export_model,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adtmodel", description=__doc__)
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    def add(name, *extra, **kw):
        sp = sub.add_parser(name, **kw)
        sp.add_argument("--config", required=name not in ("export-model",))
        sp.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS)
        for flag, opts in extra:
            sp.add_argument(flag, **opts)
        return sp

    delta = ("--delta", dict(type=float, help="nonlinearity strength (default: first sweep value)"))
    add("gen-stimulus", ("--out", dict(required=True)), ("--seed", dict(type=int)), ("--n", dict(type=int)))
    add("simulate", delta, ("--out", dict(required=True)))
    add("fit", ("--data", dict(required=True)), ("--out", dict(required=True)))
    add("validate", ("--data", dict(required=True)), ("--model", dict(required=True)))
    add("sweep", ("--out", dict()), ("--jobs", dict(type=int, default=1)))
    add("dpd-fit", delta, ("--out", dict(required=True)))
    add("dpd-eval", delta, ("--comp", dict(required=True)))
    add("export-model", ("--model", dict(required=True)), ("--out", dict()))
    return p


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _cfg(args) if getattr(args, "config", None) or args.print_config else None
        if args.print_config:
            sys.stdout.write((cfg or ExperimentConfig()).to_text())
            return 0
        if args.command is None:
            p.print_usage(sys.stderr)
            return 2
        return COMMANDS[args.command](cfg or ExperimentConfig(), args) or 0
    except FileNotFoundError as exc:
        print(f"adtmodel: error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"adtmodel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
