"""Monte Carlo comparison of sampling laws for randomized FPCA and FLR.

Each (sampler, C, replicate) cell owns an RNG stream derived from the
experiment seed, so cells can run in any order on a worker pool and the
merged table is identical run to run.
"""
from __future__ import annotations

import datetime as _dt
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .diagnostics import (
    covariance_error,
    eigfun_error,
    first_order_magnitude,
    flr_bound,
    flr_vl,
    fpca_bound,
    fpca_vl,
    spectrum_stats,
    subspace_error,
)
from .errors import FunssError, ParameterError, RankDeficiencyError
from .fda import FunctionalDataset, center
from .io import ResultTable, read_dataset, read_response
from .rfpca import cov_subsampled, fpca_full, fpca_sketch, full_sketch
from .rflr import ResponseVector, flr_full, flr_randomized, norm_N
from .rng import derive_seed
from .sampling import (
    SubsampleDraw,
    draw_with_replacement,
    estimate_funprinss,
    prob_funprinss_exact,
    prob_impo,
    prob_uniform,
)
from .simgen import SimDesign, synth_dataset, synth_regression

SAMPLERS = ("unif", "impo", "funprinss", "funprinss-exact")
TASKS = ("fpca", "flr")


@dataclass
class ExperimentConfig:
    design: SimDesign | None = None
    data_path: str | None = None
    response_path: str | None = None
    samplers: tuple = ("unif", "impo", "funprinss")
    C_list: tuple = (100, 300, 1000)
    R: int = 5
    replicates: int = 200
    seed: int = 0
    task: str = "fpca"
    alpha: float = 0.5
    C_pilot: int | None = None
    output: str | None = None
    threads: int | None = None
    identity_draw: bool = False
    beta: float = 1.0

    def __post_init__(self):
        self.samplers = tuple(self.samplers)
        self.C_list = tuple(int(c) for c in self.C_list)
        if self.replicates < 1:
            raise ParameterError("replicates must be >= 1")
        if not self.C_list or min(self.C_list) < 1:
            raise ParameterError("C_list must hold positive sizes")
        if self.R < 1:
            raise ParameterError("R must be >= 1")
        if self.task not in TASKS:
            raise ParameterError(f"task must be one of {TASKS}, got {self.task!r}")
        bad = [s for s in self.samplers if s not in SAMPLERS]
        if bad or not self.samplers:
            raise ParameterError(f"unknown samplers {bad}; choose from {SAMPLERS}")
        if self.design is None and self.data_path is None:
            self.design = SimDesign(N=2000, L=128, seed=self.seed)
        if self.task == "flr" and self.design is None and self.response_path is None:
            raise ParameterError("an FLR run on a dataset file needs a response file")

    def describe(self) -> dict:
        d = asdict(self)
        d["design"] = None if self.design is None else self.design.describe()
        return d


def metric_names(task: str, R: int) -> list[str]:
    if task == "fpca":
        return ["cov_hs", "cov_op", "proj_hs", "proj_op"] + [f"eigfun_{r}" for r in range(1, R + 1)]
    return ["pred_err", "est_err"]


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("FUNSS_THREADS", "").strip()
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(int(cap), 1))
        except ValueError:
            raise ParameterError(f"FUNSS_THREADS must be an integer, got {cap!r}") from None
    return max(n, 1)


class _Reference:
    """Full-sample quantities computed once and shared by every cell."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        data, y = _load(config)
        self.data = data
        self.y = y
        self.sketch = full_sketch(data)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            self.model = fpca_full(data)
        if self.model.rank < config.R:
            raise RankDeficiencyError(
                f"full-sample covariance has rank {self.model.rank} < R={config.R}")
        self.fit = flr_full(data, y, config.R, self.model) if y is not None else None
        self._fixed = {}

    def fixed_distribution(self, sampler: str):
        if sampler not in self._fixed:
            if sampler == "unif":
                d = prob_uniform(self.data.N)
            elif sampler == "impo":
                d = prob_impo(self.data)
            else:
                d = prob_funprinss_exact(self.data, self.model, self.config.R)
            self._fixed[sampler] = d
        return self._fixed[sampler]


def _load(config: ExperimentConfig):
    if config.design is not None:
        if config.task == "flr":
            data, y, _ = synth_regression(config.design)
        else:
            data, y = synth_dataset(config.design), None
    else:
        data = read_dataset(config.data_path)
        y = None
        if config.task == "flr":
            y = ResponseVector(read_response(config.response_path))
    if not data.is_centered():
        data = center(data)
    if y is not None and not y.is_centered():
        y = y.centered_copy()
    return data, y


def _cell(ref: _Reference, sampler: str, C: int, rep: int) -> list[tuple]:
    cfg = ref.config
    names = metric_names(cfg.task, cfg.R)
    seed = derive_seed(cfg.seed, sampler, C, rep)
    try:
        if cfg.identity_draw:
            draw = SubsampleDraw.exhaustive(ref.data.N)
        else:
            if sampler == "funprinss":
                cp = cfg.C_pilot or C
                dist = estimate_funprinss(ref.data, cp, cfg.R, cfg.alpha, derive_seed(seed, "pilot"))
            else:
                dist = ref.fixed_distribution(sampler)
            draw = draw_with_replacement(dist, C, derive_seed(seed, "draw"))
        values = _fpca_metrics(ref, draw) if cfg.task == "fpca" else _flr_metrics(ref, draw)
        return [(sampler, C, rep, m, v, "") for m, v in zip(names, values)]
    except FunssError as exc:
        reason = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return [(sampler, C, rep, m, math.nan, reason) for m in names]


def _fpca_metrics(ref: _Reference, draw: SubsampleDraw) -> list[float]:
    R = ref.config.R
    sketch = cov_subsampled(ref.data, draw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fpca_sketch(sketch, R)
    if model.rank < R:
        raise RankDeficiencyError(f"subsampled covariance has rank {model.rank} < R={R}")
    cov_op, cov_hs = covariance_error(ref.sketch, sketch)
    proj_op, proj_hs = subspace_error(ref.model, model, R)
    eig = [eigfun_error(ref.model.eigenfunctions[r], model.eigenfunctions[r], ref.data.grid)
           for r in range(R)]
    return [cov_hs, cov_op, proj_hs, proj_op] + eig


def _flr_metrics(ref: _Reference, draw: SubsampleDraw) -> list[float]:
    fit = flr_randomized(ref.data, ref.y, None, draw.C, ref.config.R, 0, draw=draw)
    pred = norm_N(fit.fitted - ref.fit.fitted) ** 2
    d = fit.psi - ref.fit.psi
    est = float(np.sum(ref.data.grid.weights * d * d))
    return [pred, est]


def _metadata(config: ExperimentConfig, kind: str) -> dict:
    return {
        "kind": kind,
        "seed": int(config.seed),
        "design": None if config.design is None else config.design.describe(),
        "data_path": config.data_path,
        "config": config.describe(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
    }


def run_experiment(config: ExperimentConfig, reference: _Reference | None = None) -> ResultTable:
    """Every (sampler, C, replicate) cell of the experiment, sorted by that key."""
    ref = reference or _Reference(config)
    jobs = [(s, C, rep) for s in config.samplers for C in config.C_list
            for rep in range(config.replicates)]
    n = worker_count(config.threads)
    if n == 1:
        chunks = [_cell(ref, *j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(lambda j: _cell(ref, *j), jobs))
    table = ResultTable(metadata=_metadata(config, "experiment"))
    for rows in chunks:
        for r in rows:
            table.add(*r)
    table.sort()
    if config.output:
        table.write(config.output)
    return table


def eps_rule(V: float, L: float, C: int) -> float:
    """Default precision ``sqrt(V/C) + L/C``, three times the side condition's L term."""
    return math.sqrt(V / C) + L / C


def run_bound_overlay(config: ExperimentConfig, eps_grid=(), monte_carlo: bool = True,
                      reference: _Reference | None = None) -> ResultTable:
    """Theory rows for each C (and each eps) plus the Monte Carlo stability ratio.

    Replicate 0 of every theory group uses ``eps_rule``; replicates 1.. use
    ``eps_grid`` in order.  With ``monte_carlo`` the FunPrinSS median of
    ``||P_tilde - P_hat||`` is divided by the first-order magnitude
    ``(R + Delta_R) sqrt(log(120 (R + Delta_R))) / sqrt(C)``; the
    coefficient of variation of that ratio across C is row ``ratio_cv``.
    """
    ref = reference or _Reference(config)
    R, beta = config.R, config.beta
    stats = spectrum_stats(ref.model, R, beta)
    vf, lf = fpca_vl(stats, beta)
    vr, lr = flr_vl(stats, beta)
    y_norm = yperp = None
    if ref.fit is not None:
        y_norm, yperp = norm_N(ref.y.values), norm_N(ref.fit.residual)
    table = ResultTable(metadata=_metadata(config, "bound_overlay"))
    table.metadata["stats"] = asdict(stats)
    for C in config.C_list:
        table.add("theory", C, 0, "theory_first_order", first_order_magnitude(stats, C))
        eps_f = [eps_rule(vf, lf, C), *eps_grid]
        eps_r = [eps_rule(vr, lr, C), *eps_grid]
        for i, (ef, er) in enumerate(zip(eps_f, eps_r)):
            b = fpca_bound(stats, R, beta, C, ef)
            table.add("theory", C, i, "theory_fpca_eps", ef)
            table.add("theory", C, i, "theory_fpca_bound", b.error_bound)
            table.add("theory", C, i, "theory_fpca_prob", b.success_prob)
            table.add("theory", C, i, "theory_fpca_feasible", float(b.eps_feasible))
            if y_norm is not None:
                f = flr_bound(stats, R, beta, C, er, y_norm, yperp)
                table.add("theory", C, i, "theory_flr_eps", er)
                table.add("theory", C, i, "theory_flr_bound", f.error_bound)
                table.add("theory", C, i, "theory_flr_prob", f.success_prob)
                table.add("theory", C, i, "theory_flr_feasible", float(f.eps_feasible))
    if monte_carlo:
        mc_cfg = ExperimentConfig(**{**config.__dict__, "samplers": ("funprinss",),
                                     "task": "fpca", "output": None})
        mc = run_experiment(mc_cfg, ref if config.task == "fpca" else None)
        ratios = []
        for C in config.C_list:
            med = float(np.nanmedian(mc.values("funprinss", C, "proj_op")))
            ratio = med / first_order_magnitude(stats, C)
            ratios.append(ratio)
            table.add("funprinss", C, 0, "mc_median_proj_op", med)
            table.add("funprinss", C, 0, "mc_ratio", ratio)
        r = np.asarray(ratios)
        cv = float(r.std(ddof=1) / r.mean()) if r.size > 1 else 0.0
        table.add("funprinss", 0, 0, "ratio_cv", cv)
    table.sort()
    if config.output:
        table.write(config.output)
    return table
