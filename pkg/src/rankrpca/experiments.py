"""Reproduction harness for the synthetic and image experiments.

An :class:`ExperimentConfig` is built from per-kind defaults, optionally
overridden by an INI-style file (``[section]`` headers, ``key = value``
lines).  Unknown sections or keys are rejected.  Each experiment expands into
independent jobs (one solver run on one regenerated problem instance); jobs
may run in a process pool and results come back in submission order, so the
CSV output does not depend on scheduling.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .imageio import load_image, write_pgm
from .metrics import image_metrics, relative_error_to_truth
from .prng import Prng
from .prox import GnSettings
from .solvers import PROX_MODES, SolveReport, SolverConfig, solve_admm, solve_apg, solve_fb, solve_shen_baseline
from .synth import SyntheticSpec, corrupt_image, make_problem

KINDS = ("table1", "table2", "rank_sweep", "contour", "image")
ALGORITHMS = ("shen", "fb", "apg", "admm")
OUT_ENV = "RPCA_OUT_DIR"

_ALGO_KEYS = {"lam": float, "mu": float, "t": float, "alpha": float}
_SOLVER_KEYS = {
    "eps": float, "max_iters": int, "eta": float, "delta": float, "alpha": float,
    "inner_tol": float, "max_inner_iters": int, "t": float,
}
_EXPERIMENT_KEYS = {
    "kind": str, "algorithms": str, "repetitions": int, "seed_base": int,
    "out": str, "threads": int, "prox": str,
}
_DATA_KEYS = {"m": int, "n": int, "r": int, "s_pct": float, "sigma": float, "missing_ratio": float}
_KIND_KEYS = {
    "table1": {"cases": str, "p_offset": int},
    "table2": {"rows": str, "r": int, "p": int, "sanity_row": bool},
    "rank_sweep": {"p_values": str},
    "contour": {"mu_values": str, "lam_values": str, "p": int},
    "image": {"source": str, "rank_truncate": int, "p": int, "s_pct": float,
              "sigma": float, "compare_full_svd": bool, "peak": float},
}

# Per-algorithm weights used throughout the synthetic experiments.
_SYNTH_ALGOS = {
    "shen": {"lam": 0.02},
    "fb": {"lam": 0.04, "mu": 0.6},
    "apg": {"lam": 0.04, "mu": 0.6},
    "admm": {"mu": 0.01, "alpha": 1.0},
}

DEFAULTS: Dict[str, dict] = {
    "table1": {
        "algorithms": ("shen", "fb", "apg"),
        "algo": _SYNTH_ALGOS,
        "solver": {"eps": 1e-4, "max_iters": 5000, "t": 1.7},
        "data": {"m": 500, "n": 500, "sigma": 0.05},
        "params": {"cases": "25:20, 50:20, 25:40", "p_offset": 5},
    },
    "table2": {
        "algorithms": ("apg",),
        "algo": _SYNTH_ALGOS,
        # t left unset: masked problems use 0.99 / ||A||^2
        "solver": {"eps": 1e-4, "max_iters": 5000},
        "data": {"m": 500, "n": 500},
        # s_pct:sigma:missing_ratio:mu:lam
        "params": {
            "rows": "20:0.05:0.1:0.5:0.04, 20:0.05:0.2:0.5:0.04, 20:0.05:0.5:0.5:0.04, 5:0.01:0.5:0.1:0.01",
            "r": 25, "p": 30, "sanity_row": False,
        },
    },
    "rank_sweep": {
        "algorithms": ("shen", "apg"),
        "algo": _SYNTH_ALGOS,
        "solver": {"eps": 1e-4, "max_iters": 5000, "t": 1.7},
        "data": {"m": 500, "n": 500, "r": 25, "s_pct": 20.0, "sigma": 0.05},
        "params": {"p_values": "15-35"},
        "repetitions": 1,
    },
    "contour": {
        "algorithms": ("apg",),
        "algo": _SYNTH_ALGOS,
        "solver": {"eps": 1e-4, "max_iters": 5000, "t": 1.7},
        "data": {"m": 500, "n": 500, "r": 25, "s_pct": 20.0, "sigma": 0.05},
        "params": {"mu_values": "0, 0.2, 0.4, 0.6, 0.8, 1.0",
                   "lam_values": "0.02, 0.04, 0.06, 0.08", "p": 30},
        "repetitions": 1,
    },
    "image": {
        "algorithms": ("shen", "fb", "apg"),
        "algo": {"shen": {"lam": 0.03}, "fb": {"lam": 0.06, "mu": 0.5},
                 "apg": {"lam": 0.06, "mu": 0.5}, "admm": {"mu": 0.5, "alpha": 0.01}},
        "solver": {"eps": 1e-4, "max_iters": 5000, "t": 1.7},
        "data": {},
        "params": {"source": "cameraman", "rank_truncate": 37, "p": 42, "s_pct": 20.0,
                   "sigma": 4.0, "compare_full_svd": True, "peak": 255.0},
        "repetitions": 1,
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    algorithms: Tuple[str, ...]
    repetitions: int = 5
    seed_base: int = 0
    out_dir: Path = Path("results")
    threads: int = 1
    prox: str = "gauss-newton"
    algo: Dict[str, dict] = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.prox not in PROX_MODES:
            raise ConfigError(f"prox must be one of {PROX_MODES}")
        self.out_dir = Path(self.out_dir)

    def solver_config(self, algorithm: str, p: int, prox: Optional[str] = None, **overrides) -> SolverConfig:
        opts = dict(self.solver)
        opts.update(self.algo.get(algorithm, {}))
        opts.update(overrides)
        gn = GnSettings(
            inner_tol=opts.pop("inner_tol", GnSettings.inner_tol),
            max_inner_iters=opts.pop("max_inner_iters", GnSettings.max_inner_iters),
        )
        if algorithm in ("shen", "admm"):
            opts.pop("t", None)
        if algorithm == "shen":
            opts["mu"] = 0.0
        opts.setdefault("lam", 1.0)
        try:
            return SolverConfig(p=p, gn=gn, prox=prox or self.prox, **opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver settings for {algorithm}: {exc}") from exc


def default_config(kind: str, out_dir=None) -> ExperimentConfig:
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {KINDS}")
    d = DEFAULTS[kind]
    out = out_dir or os.environ.get(OUT_ENV) or "results"
    return ExperimentConfig(
        kind=kind,
        algorithms=tuple(d["algorithms"]),
        repetitions=d.get("repetitions", 5),
        out_dir=Path(out),
        algo={k: dict(v) for k, v in d["algo"].items()},
        solver=dict(d["solver"]),
        data=dict(d["data"]),
        params=dict(d["params"]),
    )


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}") from None


def load_config(path, kind: Optional[str] = None, out_dir=None) -> ExperimentConfig:
    """Parse an experiment file on top of the defaults for its kind.

    `kind` (from the command line) wins over ``[experiment] kind``; the two
    must agree when both are present.
    """
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    file_kind = parser.get("experiment", "kind", fallback=None)
    if kind and file_kind and kind != file_kind.strip():
        raise ConfigError(f"config declares kind {file_kind!r} but {kind!r} was requested")
    kind = kind or (file_kind.strip() if file_kind else None)
    if kind is None:
        raise ConfigError("experiment kind missing")
    cfg = default_config(kind, out_dir)

    schemas = {"experiment": _EXPERIMENT_KEYS, "data": _DATA_KEYS, "solver": _SOLVER_KEYS,
               kind: _KIND_KEYS.get(kind, {})}
    schemas.update({a: _ALGO_KEYS for a in ALGORITHMS})
    for section in parser.sections():
        if section not in schemas:
            raise ConfigError(f"unknown section [{section}]")
        schema = schemas[section]
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            value = _convert(section, key, raw, schema[key])
            if section == "experiment":
                if key == "algorithms":
                    cfg.algorithms = tuple(a.strip() for a in value.split(",") if a.strip())
                elif key == "out":
                    if out_dir is None:
                        cfg.out_dir = Path(value)
                elif key != "kind":
                    setattr(cfg, key, value)
            elif section == "data":
                cfg.data[key] = value
            elif section == "solver":
                cfg.solver[key] = value
            elif section == kind:
                cfg.params[key] = value
            else:
                cfg.algo.setdefault(section, {})[key] = value
    cfg.__post_init__()
    return cfg


@dataclass
class ResultRow:
    experiment: str
    algorithm: str
    r: int
    s_pct: float
    sigma: float
    p: int
    mu: float
    lam: float
    t: float
    missing_ratio: float
    seed: int
    re_to_truth: float
    iterations: int
    wall_time: float
    converged: bool
    psnr_db: Optional[float] = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def write_csv(path, rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def run_solver(algorithm: str, D, op, cfg: SolverConfig) -> SolveReport:
    if algorithm == "shen":
        return solve_shen_baseline(D, cfg, op)
    if algorithm == "fb":
        return solve_fb(D, op, cfg)
    if algorithm == "apg":
        return solve_apg(D, op, cfg)
    if algorithm == "admm":
        return solve_admm(D, cfg, op)
    raise ConfigError(f"unknown algorithm {algorithm!r}")


@dataclass(frozen=True)
class SyntheticJob:
    experiment: str
    algorithm: str
    spec: SyntheticSpec
    solver: SolverConfig


def run_synthetic_job(job: SyntheticJob) -> ResultRow:
    """Regenerate the instance from its seed, solve it, score it."""
    problem = make_problem(job.spec)
    report = run_solver(job.algorithm, problem.D, problem.op, job.solver)
    cfg = job.solver
    t_used = 1.0 if job.algorithm == "shen" else (cfg.t if cfg.t is not None else cfg.stepsize(problem.op))
    return ResultRow(
        experiment=job.experiment, algorithm=job.algorithm, r=job.spec.r,
        s_pct=job.spec.s_pct, sigma=job.spec.sigma, p=cfg.p, mu=cfg.mu, lam=cfg.lam,
        t=t_used, missing_ratio=job.spec.missing_ratio, seed=job.spec.seed,
        re_to_truth=relative_error_to_truth(report.L, problem.L_star),
        iterations=report.iterations, wall_time=report.wall_time, converged=report.converged,
    )


def run_jobs(jobs: Sequence[SyntheticJob], threads: int = 1) -> List[ResultRow]:
    if threads <= 1 or len(jobs) <= 1:
        return [run_synthetic_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_synthetic_job, jobs))


def _float_list(text: str, what: str) -> List[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what}: {text!r}") from None


def _int_range(text: str) -> List[int]:
    """``"15-35"`` or ``"20, 25, 30"``."""
    out: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse integer list {text!r}") from None
    return out


def _tuples(text: str, arity: int, what: str) -> List[Tuple[float, ...]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != arity:
            raise ConfigError(f"{what}: expected {arity} ':'-separated fields in {item!r}")
        try:
            out.append(tuple(float(x) for x in parts))
        except ValueError:
            raise ConfigError(f"{what}: cannot parse {item!r}") from None
    return out


def _spec(cfg: ExperimentConfig, seed: int, **kw) -> SyntheticSpec:
    fields_ = dict(cfg.data)
    fields_.update(kw)
    try:
        return SyntheticSpec(seed=seed, **fields_)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid data settings: {exc}") from exc


def _seeds(cfg: ExperimentConfig) -> List[int]:
    return [cfg.seed_base + i for i in range(cfg.repetitions)]


def summarize(rows: Sequence[ResultRow], keys: Sequence[str]) -> List[dict]:
    """Mean/std of RE, iterations and time over repetitions, grouped by `keys`."""
    groups: Dict[tuple, List[ResultRow]] = {}
    for row in rows:
        groups.setdefault(tuple(getattr(row, k) for k in keys), []).append(row)
    out = []
    for key, members in groups.items():
        res = [m.re_to_truth for m in members]
        its = [m.iterations for m in members]
        entry = dict(zip(keys, key))
        entry.update(
            n_runs=len(members),
            re_mean=statistics.fmean(res),
            re_std=statistics.stdev(res) if len(res) > 1 else 0.0,
            iter_mean=statistics.fmean(its),
            iter_std=statistics.stdev(its) if len(its) > 1 else 0.0,
            time_mean=statistics.fmean(m.wall_time for m in members),
        )
        out.append(entry)
    return out


_ROW_COLUMNS = [f.name for f in fields(ResultRow)]


def _write_rows(cfg: ExperimentConfig, name: str, rows: List[ResultRow], summary_keys) -> Dict[str, Path]:
    paths = {"runs": write_csv(cfg.out_dir / f"{name}_runs.csv", [asdict(r) for r in rows], _ROW_COLUMNS)}
    if summary_keys:
        summary = summarize(rows, summary_keys)
        paths["summary"] = write_csv(cfg.out_dir / f"{name}_summary.csv", summary)
    return paths


def run_table1(cfg: ExperimentConfig):
    """Shen / forward-backward / APG comparison over the (r, s) cases."""
    cases = _tuples(str(cfg.params["cases"]), 2, "cases")
    p_offset = int(cfg.params["p_offset"])
    jobs = []
    for r, s in cases:
        p = int(r) + p_offset
        for algorithm in cfg.algorithms:
            solver = cfg.solver_config(algorithm, p)
            for seed in _seeds(cfg):
                jobs.append(SyntheticJob("table1", algorithm, _spec(cfg, seed, r=int(r), s_pct=s), solver))
    rows = run_jobs(jobs, cfg.threads)
    return rows, _write_rows(cfg, "table1", rows, ("algorithm", "r", "s_pct"))


def run_table2(cfg: ExperimentConfig):
    """Recovery with missing entries; one row per (s, sigma, missing, mu, lam)."""
    rows_spec = _tuples(str(cfg.params["rows"]), 5, "rows")
    if cfg.params.get("sanity_row"):
        first = rows_spec[0]
        rows_spec = rows_spec + [(first[0], first[1], 0.0, first[3], first[4])]
    r, p = int(cfg.params["r"]), int(cfg.params["p"])
    jobs = []
    for s, sigma, missing, mu, lam in rows_spec:
        for algorithm in cfg.algorithms:
            solver = cfg.solver_config(algorithm, p, mu=mu, lam=lam)
            for seed in _seeds(cfg):
                spec = _spec(cfg, seed, r=r, s_pct=s, sigma=sigma, missing_ratio=missing)
                jobs.append(SyntheticJob("table2", algorithm, spec, solver))
    rows = run_jobs(jobs, cfg.threads)
    return rows, _write_rows(cfg, "table2", rows, ("algorithm", "s_pct", "sigma", "missing_ratio"))


def run_rank_sweep(cfg: ExperimentConfig):
    """RE to the truth as a function of the rank bound p."""
    jobs = []
    for p in _int_range(str(cfg.params["p_values"])):
        for algorithm in cfg.algorithms:
            solver = cfg.solver_config(algorithm, p)
            for seed in _seeds(cfg):
                jobs.append(SyntheticJob("rank_sweep", algorithm, _spec(cfg, seed), solver))
    rows = run_jobs(jobs, cfg.threads)
    return rows, _write_rows(cfg, "rank_sweep", rows, ("algorithm", "p"))


def run_contour(cfg: ExperimentConfig):
    """RE over a (mu, lam) grid; every cell sees the same instance per seed."""
    mus = _float_list(str(cfg.params["mu_values"]), "mu_values")
    lams = _float_list(str(cfg.params["lam_values"]), "lam_values")
    p = int(cfg.params["p"])
    jobs = []
    for algorithm in cfg.algorithms:
        for mu in mus:
            for lam in lams:
                solver = cfg.solver_config(algorithm, p, mu=mu, lam=lam)
                for seed in _seeds(cfg):
                    jobs.append(SyntheticJob("contour", algorithm, _spec(cfg, seed), solver))
    rows = run_jobs(jobs, cfg.threads)
    paths = _write_rows(cfg, "contour", rows, ("algorithm", "mu", "lam"))
    grid = [{"mu": e["mu"], "lam": e["lam"], "re": e["re_mean"], "algorithm": e["algorithm"]}
            for e in summarize(rows, ("algorithm", "mu", "lam"))]
    paths["grid"] = write_csv(cfg.out_dir / "contour_grid.csv", grid, ["algorithm", "mu", "lam", "re"])
    return rows, paths


def _image_name(source: str) -> str:
    return Path(source).stem if source not in ("cameraman",) else source


def run_image(cfg: ExperimentConfig):
    """Corrupt an image, recover it with each algorithm, write PGMs and metrics.

    Besides the metric table this writes ``trace.csv`` (objective vs time per
    run) and, with ``compare_full_svd``, an extra forward-backward run using
    the dense-SVD prox for the timing comparison.
    """
    prm = cfg.params
    source = str(prm["source"])
    try:
        img = load_image(source)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load image {source!r}: {exc}") from exc
    peak = float(prm.get("peak", 255.0))
    k = prm.get("rank_truncate")
    k = int(k) if k is not None and int(k) > 0 else None
    p = int(prm["p"])
    name = _image_name(source)
    out = cfg.out_dir / f"image_{name}"

    runs = [(a, cfg.prox) for a in cfg.algorithms]
    if prm.get("compare_full_svd") and "fb" in cfg.algorithms and cfg.prox != "full-svd":
        runs.append(("fb", "full-svd"))

    metric_rows, trace_rows, results = [], [], []
    for seed in _seeds(cfg):
        truth, corrupted = corrupt_image(img, k, float(prm["s_pct"]), float(prm["sigma"]), Prng(seed), peak)
        write_pgm(out / f"truth_seed{seed}.pgm", truth)
        write_pgm(out / f"corrupted_seed{seed}.pgm", corrupted)
        base = image_metrics(corrupted, truth, peak)
        metric_rows.append({"image": name, "algorithm": "corrupted", "prox": "", "seed": seed,
                            "re_to_truth": base.re_to_truth, "psnr_db": base.psnr_db,
                            "psnr_unclamped_db": base.psnr_unclamped_db})
        for algorithm, prox in runs:
            solver = cfg.solver_config(algorithm, p, prox=prox)
            report = run_solver(algorithm, corrupted, None, solver)
            m = image_metrics(report.L, truth, peak, report.re_change_final)
            label = algorithm if prox == "gauss-newton" else f"{algorithm}-{prox}"
            write_pgm(out / f"recovered_{label}_seed{seed}.pgm", report.L)
            metric_rows.append({
                "image": name, "algorithm": algorithm, "prox": prox, "seed": seed,
                "re_to_truth": m.re_to_truth, "psnr_db": m.psnr_db,
                "psnr_unclamped_db": m.psnr_unclamped_db, "iterations": report.iterations,
                "wall_time": report.wall_time, "converged": report.converged,
                "p": p, "mu": solver.mu, "lam": solver.lam,
            })
            for (it, val), tm in zip(report.objective_trace, report.time_trace):
                trace_rows.append({"algorithm": label, "seed": seed, "iteration": it,
                                   "time": tm, "objective": val})
            results.append((label, seed, report, m))
    columns = ["image", "algorithm", "prox", "seed", "p", "mu", "lam", "re_to_truth", "psnr_db",
               "psnr_unclamped_db", "iterations", "wall_time", "converged"]
    paths = {
        "metrics": write_csv(out / "metrics.csv", metric_rows, columns),
        "trace": write_csv(out / "trace.csv", trace_rows,
                           ["algorithm", "seed", "iteration", "time", "objective"]),
    }
    return results, paths


RUNNERS = {
    "table1": run_table1,
    "table2": run_table2,
    "rank_sweep": run_rank_sweep,
    "contour": run_contour,
    "image": run_image,
}


def run_experiment(cfg: ExperimentConfig):
    return RUNNERS[cfg.kind](cfg)
