"""Experiment orchestration: SNR sweeps, timing sweeps, Gram diagonal
diagnostics, classification runs and merging of external baseline numbers.

Configs are flat JSON documents (see :class:`ExperimentConfig`); results are
written as CSV plus a JSON-lines metadata stream.
"""

import csv
import json
import logging
import math
import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, ParseError, RankDeficientWarning
from .graph import (build_knn_graph_from_points, gen_signal, laplacian, make_graph, read_edge_list,
                    read_points_csv)
from .reconstruction import ReconstructionSpec, classify_one_vs_all, reconstruct, snr_db, wrs_weights
from .samplers import (
    KernelSpec,
    avm_kernel_sample,
    avm_sample,
    dc_sample,
    exact_greedy_sample,
    sp_finite_k_sample,
    sp_ideal_sample,
    wrs_sample,
)
from .spectral import eigen_oracle, estimate_coherence

__all__ = [
    "METHODS",
    "REPORT_COLUMNS",
    "ExperimentConfig",
    "ExperimentReport",
    "run_method",
    "run_snr_sweep",
    "run_timing_sweep",
    "diag_energy_fraction",
    "run_diag_energy",
    "ingest_external_baseline",
    "run_classification",
    "loglog_slope",
]

log = logging.getLogger(__name__)

METHODS = ("wrs", "dc", "avm", "sp_ideal", "sp_k", "exact_greedy", "avm_kernel")
NEEDS_ORACLE = {"sp_ideal", "exact_greedy"}

REPORT_COLUMNS = ["model", "n", "s", "method", "trial", "snr_db", "snr_clean_db",
                  "sample_time_s", "recon_time_s", "error", "provenance"]
TIMING_COLUMNS = ("sample_time_s", "recon_time_s")


@dataclass
class ExperimentConfig:
    graph_model: list = field(default_factory=lambda: ["sensor_knn"])
    graph_params: dict = field(default_factory=dict)
    n_list: list = field(default_factory=lambda: [500])
    s_list: list = field(default_factory=lambda: [150])
    f: int = 50
    methods: list = field(default_factory=lambda: ["wrs", "avm"])
    trials: int = 1
    seed_base: int = 0
    output_dir: str = "results"
    laplacian: str = "combinatorial"
    c: float = 10.0
    eps: float = 0.1
    degree: int = 30
    delta: float = 0.9
    sp_k: int = 4
    kernel_shift: float = 1.0
    with_snr: bool = True
    graph_path: str = None
    # classification
    subset_size: int = 1000
    n_resamples: int = 10
    knn: int = 10

    def __post_init__(self):
        if isinstance(self.graph_model, str):
            self.graph_model = [self.graph_model]
        self.n_list = [int(n) for n in self.n_list]
        self.s_list = [int(s) for s in self.s_list]
        self.methods = list(self.methods)
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if not self.s_list:
            raise InvalidParameterError("s_list must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidParameterError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.f > min(self.s_list):
            log.warning("bandwidth f=%d exceeds the smallest sample count %d", self.f, min(self.s_list))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidParameterError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None

    def params_for(self, model):
        p = self.graph_params.get(model, None)
        if p is None and len(self.graph_model) == 1 and not any(
            isinstance(v, dict) for v in self.graph_params.values()
        ):
            p = self.graph_params
        return dict(p or {})


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    external: list = field(default_factory=list)

    def merge_external(self, rows):
        self.external.extend(rows)

    def all_rows(self, include_external=False):
        return self.rows + (self.external if include_external else [])

    def aggregates(self, include_external=False):
        """Per ``(model, n, s, method)``: mean/median SNR and times plus
        overhead relative to WRS on the same ``(model, n, s)``."""
        groups = {}
        for r in self.all_rows(include_external):
            if r.get("error"):
                continue
            groups.setdefault((r["model"], r["n"], r["s"], r["method"]), []).append(r)
        out = []
        for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], str(k[3]))):
            rs = groups[key]
            times = [r["sample_time_s"] for r in rs]
            snrs = [r["snr_db"] for r in rs if r["snr_db"] is not None and not math.isnan(r["snr_db"])]
            out.append({
                "model": key[0], "n": key[1], "s": key[2], "method": key[3], "count": len(rs),
                "mean_snr_db": statistics.fmean(snrs) if snrs else float("nan"),
                "mean_time_s": statistics.fmean(times),
                "median_time_s": statistics.median(times),
            })
        base = {(a["model"], a["n"], a["s"]): a["mean_time_s"] for a in out if a["method"] == "wrs"}
        for a in out:
            b = base.get((a["model"], a["n"], a["s"]))
            a["overhead_vs_wrs"] = a["mean_time_s"] / b if b else float("nan")
        return out

    def overhead_table(self):
        return [{k: a[k] for k in ("model", "n", "s", "method", "overhead_vs_wrs")} for a in self.aggregates()]

    def write(self, out_dir, name):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / f"{name}.csv", self.rows, REPORT_COLUMNS)
        aggs = self.aggregates()
        if aggs:
            _write_csv(out / f"{name}_summary.csv", aggs, list(aggs[0]))
        with open(out / f"{name}_meta.jsonl", "a") as fh:
            fh.write(json.dumps(_plain(self.metadata), sort_keys=True) + "\n")
        return out / f"{name}.csv"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return "" if v is None else str(v)


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


# --------------------------------------------------------------------------
# method dispatch
# --------------------------------------------------------------------------


@dataclass
class _Instance:
    model: str
    n: int
    trial: int
    graph: object
    lap: object
    oracle: object = None
    signal: object = None


def run_method(method, inst, s, cfg, seed):
    """Run one sampler on an instance; returns ``(result, weights_or_None)``.

    Coherence estimation is part of the timed call for WRS/DC/AVM.
    """
    if method == "wrs":
        t0 = time.perf_counter()
        prof = estimate_coherence(inst.lap, min(cfg.f, inst.n), cfg.c, cfg.eps, cfg.degree, seed=(*seed, 0))
        res = wrs_sample(prof, s, seed=(*seed, 1))
        res.elapsed = time.perf_counter() - t0
        return res, wrs_weights(res.probabilities)
    if method == "dc":
        t0 = time.perf_counter()
        prof = estimate_coherence(inst.lap, min(cfg.f, inst.n), cfg.c, cfg.eps, cfg.degree, seed=seed)
        res = dc_sample(inst.graph, prof, s, cfg.delta)
        res.elapsed = time.perf_counter() - t0
        return res, None
    if method == "avm":
        return avm_sample(inst.lap, s, cfg.c, cfg.eps, cfg.degree, seed=seed), None
    if method == "sp_k":
        return sp_finite_k_sample(inst.lap, s, cfg.sp_k), None
    if method == "sp_ideal":
        return sp_ideal_sample(inst.oracle, s), None
    if method == "exact_greedy":
        return exact_greedy_sample(inst.oracle, s), None
    if method == "avm_kernel":
        shift = cfg.kernel_shift
        kern = KernelSpec(lambda lam: 1.0 / (lam + shift), name=f"inverse(shift={shift})")
        return avm_kernel_sample(inst.lap, s, kern, cfg.c, cfg.degree, seed=seed), None
    raise InvalidParameterError(f"unknown method {method!r}")


def _make_instance(cfg, mi, model, n, trial, need_oracle):
    if cfg.graph_path:
        g = read_edge_list(cfg.graph_path)
        n = g.n
    else:
        g = make_graph(model, n, seed=(cfg.seed_base, mi, n, trial, 0), **cfg.params_for(model))
    lap = laplacian(g, cfg.laplacian)
    inst = _Instance(model, n, trial, g, lap)
    if need_oracle:
        inst.oracle = eigen_oracle(lap)
        inst.signal = gen_signal(lap, min(cfg.f, n), seed=(cfg.seed_base, mi, n, trial, 1), oracle=inst.oracle)
    return inst


def _evaluate(method, inst, s, cfg, seed, with_snr):
    row = {"model": inst.model, "n": inst.n, "s": s, "method": method, "trial": inst.trial,
           "snr_db": None, "snr_clean_db": None, "sample_time_s": None, "recon_time_s": None,
           "error": "", "provenance": "local"}
    try:
        res, weights = run_method(method, inst, s, cfg, seed)
        row["sample_time_s"] = res.elapsed
        if with_snr:
            t0 = time.perf_counter()
            spec = ReconstructionSpec(min(cfg.f, inst.n))
            if weights is not None:
                spec = spec.with_weights(weights)
            S = res.vertices
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                xh = reconstruct(inst.oracle, spec, S, inst.signal.values[S])
            row["recon_time_s"] = time.perf_counter() - t0
            row["snr_db"] = snr_db(inst.signal.values, xh)
            row["snr_clean_db"] = snr_db(inst.signal.clean, xh)
    except Exception as exc:  # a failing method must not abort the sweep
        log.exception("method %s failed on %s n=%d s=%d", method, inst.model, inst.n, s)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _method_seed(cfg, mi, n, trial, s, method):
    return (cfg.seed_base, mi, n, trial, s, 2 + METHODS.index(method))


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def run_snr_sweep(cfg, threads=1):
    """Fresh graph and signal per ``(model, n, trial)``; every method and
    sample count is reconstructed with bandwidth ``f`` and scored by SNR
    against the noisy signal (``snr_clean_db`` scores against the clean one)."""
    need_oracle = True
    jobs = [(mi, model, n, t) for mi, model in enumerate(cfg.graph_model) for n in cfg.n_list
            for t in range(cfg.trials)]

    def one(job):
        mi, model, n, t = job
        inst = _make_instance(cfg, mi, model, n, t, need_oracle)
        return [_evaluate(m, inst, s, cfg, _method_seed(cfg, mi, n, t, s, m), True)
                for s in cfg.s_list for m in cfg.methods]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(one, jobs))
    else:
        chunks = [one(j) for j in jobs]
    rows = [r for c in chunks for r in c]
    meta = {"experiment": "snr_sweep", "config": asdict(cfg)}
    return ExperimentReport(rows, meta)


def run_timing_sweep(cfg):
    """Round-robin timing: in iteration ``t`` every method runs once, in the
    method list rotated by ``t``, before iteration ``t + 1`` starts. WRS is
    always included as the overhead baseline. Runs serially."""
    methods = list(cfg.methods)
    if "wrs" not in methods:
        methods = ["wrs"] + methods
    need_oracle = cfg.with_snr or any(m in NEEDS_ORACLE for m in methods)
    rows, orders = [], []
    for t in range(cfg.trials):
        k = t % len(methods)
        order = methods[k:] + methods[:k]
        orders.append(order)
        log.info("timing iteration %d order %s", t, ",".join(order))
        for mi, model in enumerate(cfg.graph_model):
            for n in cfg.n_list:
                inst = _make_instance(cfg, mi, model, n, t, need_oracle)
                for s in cfg.s_list:
                    for m in order:
                        rows.append(_evaluate(m, inst, s, cfg, _method_seed(cfg, mi, n, t, s, m),
                                              cfg.with_snr))
    meta = {"experiment": "timing_sweep", "config": asdict(cfg), "round_robin": orders}
    return ExperimentReport(rows, meta)


def loglog_slope(sizes, times):
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)[0])


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def diag_energy_fraction(oracle, S, R):
    """For each prefix of ``S``, share of the Gram matrix energy on its diagonal,
    ``sum_i G_ii^2 / sum_ij G_ij^2`` with ``G = D_m^T D_m`` for band ``R``."""
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0:
        raise InvalidParameterError("need at least one sample")
    B = oracle.band(R)[S]
    G = B @ B.T
    diag_e, total, out = 0.0, 0.0, np.empty(len(S))
    for m in range(len(S)):
        diag_e += G[m, m] ** 2
        total += G[m, m] ** 2 + 2.0 * float(G[m, :m] @ G[m, :m])
        out[m] = diag_e / total if total > 0 else 1.0
    return out


def run_diag_energy(cfg):
    """AVM with ``s = max(s_list)`` on every model and trial; prefix diagonal
    energy fractions for the band of the first ``f`` frequencies."""
    s = max(cfg.s_list)
    rows = []
    for mi, model in enumerate(cfg.graph_model):
        for n in cfg.n_list:
            for t in range(cfg.trials):
                inst = _make_instance(cfg, mi, model, n, t, False)
                oracle = eigen_oracle(inst.lap)
                res = avm_sample(inst.lap, s, cfg.c, cfg.eps, cfg.degree,
                                 seed=_method_seed(cfg, mi, n, t, s, "avm"))
                frac = diag_energy_fraction(oracle, res.vertices, min(cfg.f, n))
                rows += [{"model": model, "n": n, "trial": t, "m": m + 1, "fraction": float(v)}
                         for m, v in enumerate(frac)]
    return rows


def mean_fraction_by_model(rows):
    """Average fraction per ``(model, m)`` over trials."""
    acc = {}
    for r in rows:
        acc.setdefault((r["model"], r["m"]), []).append(r["fraction"])
    return {k: statistics.fmean(v) for k, v in acc.items()}


# --------------------------------------------------------------------------
# external baselines
# --------------------------------------------------------------------------

_REQUIRED = {"model": str, "n": int, "s": int, "method": str, "trial": int,
             "snr_db": float, "sample_time_s": float}
_OPTIONAL = {"snr_clean_db": float, "recon_time_s": float}


def ingest_external_baseline(csv_path):
    """Read third-party results in report schema; rows are tagged ``external``.

    An empty file yields no rows. Errors name the offending file line.
    """
    with open(csv_path, newline="") as fh:
        lines = list(csv.reader(fh))
    if not lines or not any(lines):
        return []
    header = [h.strip() for h in lines[0]]
    missing = set(_REQUIRED) - set(header)
    if missing:
        raise ParseError(f"{csv_path}: missing columns {sorted(missing)}", line=1)
    rows = []
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw:
            continue
        if len(raw) != len(header):
            raise ParseError(f"{csv_path}: expected {len(header)} fields, got {len(raw)} (row {ln})", line=ln)
        rec = dict(zip(header, raw))
        row = {c: None for c in REPORT_COLUMNS}
        try:
            for col, typ in {**_REQUIRED, **_OPTIONAL}.items():
                if col in rec and rec[col].strip() != "":
                    row[col] = typ(rec[col])
                elif col in _REQUIRED:
                    raise ValueError(f"empty {col}")
        except ValueError as exc:
            raise ParseError(f"{csv_path}: bad value in row {ln} ({exc})", line=ln) from None
        row["error"] = ""
        row["provenance"] = "external"
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------


def _stratified_subset(rng, labels, size):
    classes = np.unique(labels)
    if size >= len(labels):
        return np.arange(len(labels))
    per = size // len(classes)
    picks = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        picks.append(rng.choice(members, size=min(per, len(members)), replace=False))
    idx = np.concatenate(picks)
    short = size - len(idx)
    if short > 0:
        rest = np.setdiff1d(np.arange(len(labels)), idx)
        idx = np.concatenate([idx, rng.choice(rest, size=short, replace=False)])
    return np.sort(idx)


def run_classification(cfg, points=None, labels=None, points_csv=None, dataset="points"):
    """Transductive one-vs-all classification on knn graphs of labeled points.

    ``n_resamples`` class-balanced subsets of ``subset_size`` points are drawn;
    each gets a ``knn`` graph with the configured Laplacian (normalized by
    default for this experiment) and every method/sample count is scored by
    accuracy over all subset vertices.
    """
    from ._rng import make_rng

    if points_csv is not None:
        points, labels = read_points_csv(points_csv, has_labels=True)
        dataset = Path(points_csv).stem
    if points is None or labels is None:
        raise InvalidInputError("classification needs labeled points")
    points = np.asarray(points, float)
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise InvalidInputError("need at least two classes")
    rng = make_rng((cfg.seed_base, 7))
    rows = []
    for r in range(cfg.n_resamples):
        idx = _stratified_subset(rng, y, cfg.subset_size)
        g = build_knn_graph_from_points(points[idx], cfg.knn)
        lap = laplacian(g, cfg.laplacian)
        inst = _Instance(dataset, g.n, r, g, lap, eigen_oracle(lap))
        yy = y[idx]
        Y = np.eye(len(classes))[yy]
        for s in cfg.s_list:
            for m in cfg.methods:
                row = {"dataset": dataset, "resample": r, "n": g.n, "s": s, "method": m,
                       "accuracy": None, "sample_time_s": None, "error": ""}
                try:
                    res, weights = run_method(m, inst, min(s, g.n), cfg, (cfg.seed_base, 8, r, s, METHODS.index(m)))
                    spec = ReconstructionSpec(min(cfg.f, g.n))
                    if weights is not None:
                        spec = spec.with_weights(weights)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RankDeficientWarning)
                        pred = classify_one_vs_all(inst.oracle, spec, res.vertices, Y)
                    row["accuracy"] = float(np.mean(pred == yy))
                    row["sample_time_s"] = res.elapsed
                except Exception as exc:
                    log.exception("classification with %s failed", m)
                    row["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(row)
    return rows


CLASSIFICATION_COLUMNS = ["dataset", "resample", "n", "s", "method", "accuracy", "sample_time_s", "error"]
DIAG_COLUMNS = ["model", "n", "trial", "m", "fraction"]


def write_rows(path, rows, columns):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    _write_csv(path, rows, columns)
