"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every subcommand accepts ``--config FILE`` with ``key = value`` lines whose
keys are long option names; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import difflib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bench import SAMPLERS, ExperimentConfig, run_bound_overlay, run_experiment
from .diagnostics import (
    fpca_bound,
    linear_term_bound,
    residual_term_bound,
    pilot_beta,
    spectrum_stats,
    perturbation_report,
)
from .errors import DataError, FunssError, NumericalError
from .fda import center
from .io import (
    ResultTable,
    read_dataset,
    read_response,
    summarize,
    write_dataset,
    write_gnuplot,
    write_response,
    write_summary,
    preprocess_spectra,
)
from .rfpca import fpca_full, fpca_sketch, cov_subsampled, fve
from .rflr import ResponseVector, flr_full, flr_randomized, norm_N
from .rng import derive_seed
from .sampling import (
    draw_with_replacement,
    estimate_funprinss,
    prob_funprinss_exact,
    prob_impo,
    prob_mixture,
    prob_uniform,
)
from .simgen import EigenKind, ScoreKind, SimDesign, synth_dataset, synth_regression

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
PROB_SAMPLERS = ("unif", "impo", "mixture", "funprinss", "funprinss-exact")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _design_args(p):
    p.add_argument("--eigen", choices=[e.value for e in EigenKind], default="ed")
    p.add_argument("--score", choices=[s.value for s in ScoreKind], default="nu")
    p.add_argument("--n", type=int, default=2000, help="number of functions")
    p.add_argument("--l", type=int, default=128, help="grid size")
    p.add_argument("--k", type=int, default=None, help="number of Fourier components")


def _sampler_args(p, choices):
    p.add_argument("--sampler", choices=choices, default="funprinss")
    p.add_argument("--alpha", type=float, default=0.5, help="pilot mixture weight")
    p.add_argument("--c-pilot", type=int, default=None, help="pilot size (default: C)")


def build_parser() -> _Parser:
    parser = _Parser(prog="funss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"funss {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", default=None, help="key = value defaults file")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("simulate", "generate a synthetic functional dataset")
    _design_args(p)
    p.add_argument("--response", default=None, help="also write a regression response CSV here")
    p.add_argument("--out", required=True)

    p = add("probs", "compute a sampling distribution")
    p.add_argument("--data", required=True)
    _sampler_args(p, PROB_SAMPLERS)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--out", required=True)

    p = add("fpca", "full or randomized FPCA")
    p.add_argument("--data", required=True)
    _sampler_args(p, ("full",) + SAMPLERS)
    p.add_argument("--c", type=int, default=None, help="subsample size")
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--out", required=True)

    p = add("flr", "full or randomized functional linear regression")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    _sampler_args(p, ("full",) + SAMPLERS)
    p.add_argument("--c", type=int, default=None)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--out", required=True)

    p = add("bench", "Monte Carlo comparison of samplers")
    p.add_argument("--task", choices=("fpca", "flr"), default="fpca")
    _design_args(p)
    p.add_argument("--data", default=None, help="dataset file instead of a synthetic design")
    p.add_argument("--response", default=None)
    p.add_argument("--samplers", type=_str_list, default=["unif", "impo", "funprinss"])
    p.add_argument("--c-list", type=_int_list, default=[100, 300, 1000])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--c-pilot", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--identity-draw", action="store_true", help="C = N, every row once")
    p.add_argument("--overlay", action="store_true", help="also write theory bound rows")
    p.add_argument("--eps-grid", type=_float_list, default=[])
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = add("diag", "perturbation diagnostics and bound formulas")
    p.add_argument("--data", required=True)
    _sampler_args(p, SAMPLERS)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--out", required=True)

    p = add("preprocess", "unit-norm scaling and mean-centering")
    p.add_argument("--data", required=True)
    p.add_argument("--no-unit-norm", action="store_true")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--out", required=True)
    return parser


def _subparsers(parser) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _options(p) -> list[str]:
    return [s for a in p._actions for s in a.option_strings if s.startswith("--")]


def _suggest(word: str, options) -> str:
    m = difflib.get_close_matches(word.split("=")[0], options, n=1)
    return f" (did you mean {m[0]}?)" if m else ""


def _read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    for i, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{i}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    return out


def _apply_config(p, cfg: dict, path):
    dests = {a.dest: a for a in p._actions}
    for key, val in cfg.items():
        if key not in dests or key in {"help", "config"}:
            raise UsageError(f"{path}: unknown key {key!r}"
                             + _suggest("--" + key.replace("_", "-"), _options(p)))
        action = dests[key]
        if isinstance(action, argparse._StoreTrueAction):
            p.set_defaults(**{key: val.lower() in {"1", "true", "yes", "on"}})
        else:
            if action.required:
                action.required = False
            p.set_defaults(**{key: val})


def parse(argv):
    parser = build_parser()
    subs = _subparsers(parser)
    command = next((a for a in argv if not a.startswith("-")), None)
    config = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif a.startswith("--config="):
            config = a.split("=", 1)[1]
    if config and command in subs:
        _apply_config(subs[command], _read_config(config), config)
    args, extra = parser.parse_known_args(argv)
    sp = subs[args.command]
    if extra:
        hints = "; ".join(f"{e}{_suggest(e, _options(sp))}" for e in extra)
        raise UsageError(f"funss {args.command}: unrecognized arguments: {hints}")
    return args


# ---------------------------------------------------------------------------
# commands


def _load(path, centered=True):
    data = read_dataset(path)
    if centered and not data.is_centered():
        data = center(data)
    return data


def _distribution(args, data, C, seed):
    s = args.sampler
    if s == "unif":
        return prob_uniform(data.N)
    if s == "impo":
        return prob_impo(data)
    if s == "mixture":
        return prob_mixture(data, args.alpha)
    if s == "funprinss-exact":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = fpca_full(data, min(args.rank, data.N, data.L))
        return prob_funprinss_exact(data, model, args.rank)
    cp = args.c_pilot or C
    if cp is None:
        raise DataError("the pilot sampler needs --c-pilot (or --c)")
    return estimate_funprinss(data, cp, args.rank, args.alpha, derive_seed(seed, "pilot"))


def cmd_simulate(args):
    design = SimDesign(args.eigen, args.score, args.k, args.n, args.l, args.seed)
    if args.response:
        data, y, _ = synth_regression(design)
        write_response(args.response, y.values)
    else:
        data = synth_dataset(design)
    write_dataset(args.out, data)
    print(f"wrote {data.N} x {data.L} dataset to {args.out}")


def cmd_probs(args):
    data = _load(args.data)
    dist = _distribution(args, data, args.c_pilot, args.seed)
    with open(args.out, "w") as fh:
        fh.write("n,p\n")
        for n, p in enumerate(dist.probs):
            fh.write(f"{n},{float(p)!r}\n")
    print(f"wrote {dist.kind.value} probabilities for {data.N} rows to {args.out}")


def _write_model(path, data, model, meta):
    R = model.rank
    L = data.L
    with open(path, "w") as fh:
        fh.write("r,eigenvalue,fve," + ",".join(f"t_{i}" for i in range(L)) + "\n")
        for r in range(R):
            f = fve(data, model, r + 1)
            fh.write(f"{r + 1},{float(model.eigenvalues[r])!r},{float(f)!r},"
                     + ",".join(repr(float(v)) for v in model.eigenfunctions[r]) + "\n")
    meta = {**meta, "rank": R, "truncated": bool(model.truncated),
            "fve": fve(data, model, R) if R else 0.0}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def cmd_fpca(args):
    data = _load(args.data, centered=not args.no_center)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        if args.sampler == "full" or args.c is None:
            model = fpca_full(data, min(args.rank, data.N, data.L))
            meta = {"sampler": "full"}
        else:
            dist = _distribution(args, data, args.c, args.seed)
            draw = draw_with_replacement(dist, args.c, derive_seed(args.seed, "draw"))
            model = fpca_sketch(cov_subsampled(data, draw), args.rank)
            meta = {"sampler": args.sampler, "C": args.c, "seed": args.seed}
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    meta = _write_model(args.out, data, model, meta)
    print(f"wrote {meta['rank']} eigenpairs (FVE {meta['fve']:.6f}) to {args.out}")


def cmd_flr(args):
    data = _load(args.data)
    y = ResponseVector(read_response(args.response))
    if y.N != data.N:
        raise DataError(f"response has {y.N} values, dataset has {data.N} rows")
    if not y.is_centered():
        y = y.centered_copy()
    full = flr_full(data, y, args.rank)
    meta = {"rank": args.rank, "sampler": args.sampler}
    if args.sampler == "full" or args.c is None:
        fit = full
    else:
        dist = _distribution(args, data, args.c, args.seed)
        draw = draw_with_replacement(dist, args.c, derive_seed(args.seed, "draw"))
        fit = flr_randomized(data, y, dist, args.c, args.rank, 0, draw=draw)
        d = fit.psi - full.psi
        meta.update(C=args.c, seed=args.seed,
                    pred_err=norm_N(fit.fitted - full.fitted) ** 2,
                    est_err=float(np.sum(data.grid.weights * d * d)))
    meta["conditioning"] = fit.conditioning
    with open(args.out, "w") as fh:
        fh.write("t,psi\n")
        for t, v in zip(data.grid.points, fit.psi):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote rank-{args.rank} regression function to {args.out}")


def cmd_bench(args):
    design = None
    if args.data is None:
        design = SimDesign(args.eigen, args.score, args.k, args.n, args.l, args.seed)
    cfg = ExperimentConfig(design=design, data_path=args.data, response_path=args.response,
                           samplers=tuple(args.samplers), C_list=tuple(args.c_list), R=args.rank,
                           replicates=args.reps, seed=args.seed, task=args.task,
                           alpha=args.alpha, C_pilot=args.c_pilot, output=args.out,
                           threads=args.threads, identity_draw=args.identity_draw,
                           beta=args.beta)
    table = run_experiment(cfg)
    out = Path(args.out)
    summary = summarize(table)
    stem = out.with_suffix("")
    write_summary(f"{stem}.summary.csv", summary)
    write_gnuplot(f"{stem}.dat", summary)
    failed = sum(1 for r in table.rows if r[5])
    print(f"wrote {len(table)} rows ({failed} failed) to {out}")
    if args.overlay:
        cfg.output = f"{stem}.theory.csv"
        run_bound_overlay(cfg, args.eps_grid)
        print(f"wrote bound overlay to {cfg.output}")


def cmd_diag(args):
    data = _load(args.data)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fpca_full(data)
    stats = spectrum_stats(model, args.rank)
    table = ResultTable(metadata={"data": args.data, "seed": args.seed, "version": __version__,
                                  "stats": stats.__dict__})
    for rep in range(args.reps):
        seed = derive_seed(args.seed, rep)
        dist = _distribution(args, data, args.c, seed)
        draw = draw_with_replacement(dist, args.c, derive_seed(seed, "draw"))
        rpt = perturbation_report(data, model, draw, args.rank)
        for k, v in rpt.__dict__.items():
            table.add(args.sampler, args.c, rep, k, v)
        table.add(args.sampler, args.c, rep, "linear_term_bound",
                  linear_term_bound(stats, rpt.E_op))
        table.add(args.sampler, args.c, rep, "residual_term_bound",
                  residual_term_bound(stats, rpt.E_op))
    pb = pilot_beta(stats, args.c)
    table.add("theory", args.c, 0, "pilot_beta", pb.beta)
    table.write(args.out)
    print(f"wrote {args.reps} perturbation reports to {args.out}")


def cmd_preprocess(args):
    data = read_dataset(args.data)
    out = preprocess_spectra(data, unit_norm=not args.no_unit_norm, center_rows=not args.no_center)
    write_dataset(args.out, out)
    print(f"wrote preprocessed dataset to {args.out}")


COMMANDS = {
    "simulate": cmd_simulate, "probs": cmd_probs, "fpca": cmd_fpca, "flr": cmd_flr,
    "bench": cmd_bench, "diag": cmd_diag, "preprocess": cmd_preprocess,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FunssError as exc:  # pragma: no cover - every error has a family
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
