"""Phase-transition harnesses and their CSV/JSON reports.

Every (cell, trial) draws its measurement matrix from its own substream of
the root seed, so any cell can be rerun alone and results do not depend on
the order in which a worker pool finishes tasks.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .operators import AnalysisOperator, build_random_tight, gram_info
from .rate import krz_for_profile, sampling_rate_M
from .rng import stream
from .signals import InfeasibleSignal, dense_jumps, random_cosparse, random_piecewise
from .solver import SolverOptions, gaussian_instance, recovery_success, solve_abp

__all__ = [
    "CSV_COLUMNS",
    "CellRecord",
    "ExperimentGrid",
    "run_fixed_signal",
    "run_pw_const",
    "run_random_frames",
    "crossing_50",
    "emit_report",
    "load_report",
]

CSV_COLUMNS = ("axis_value", "m", "trials", "successes", "mean_error", "M_mean",
               "krz_mean", "seed_base")


@dataclass
class CellRecord:
    """Aggregated outcome of all trials at one ``(axis_value, m)``."""

    axis_value: object
    m: int
    trials: int
    successes: int
    mean_error: float
    M_mean: float
    krz_mean: float
    seed_base: int
    solver_failures: int = 0

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")


@dataclass
class ExperimentGrid:
    """Records of a sweep over ``axis`` x ``m_values``.

    ``skipped`` lists axis values whose configuration was infeasible.
    """

    name: str
    axis_name: str
    axis: list
    m_values: list
    trials: int
    records: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def cell(self, axis_value, m) -> CellRecord:
        for r in self.records:
            if r.axis_value == axis_value and r.m == m:
                return r
        raise KeyError((axis_value, m))

    def rates(self, axis_value) -> tuple[np.ndarray, np.ndarray]:
        recs = sorted((r for r in self.records if r.axis_value == axis_value),
                      key=lambda r: r.m)
        return np.array([r.m for r in recs]), np.array([r.rate for r in recs])

    def crossing(self, axis_value) -> float | None:
        ms, rates = self.rates(axis_value)
        return crossing_50(ms, rates)

    def M_mean(self, axis_value) -> float:
        return next(r.M_mean for r in self.records if r.axis_value == axis_value)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["records"] = [_record_dict(r) for r in self.records]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentGrid":
        d = dict(d)
        d["axis"] = [_untuple(a) for a in d["axis"]]
        d["skipped"] = [_untuple(a) for a in d.get("skipped", [])]
        recs = []
        for r in d.pop("records"):
            r = dict(r)
            r["axis_value"] = _untuple(r["axis_value"])
            recs.append(CellRecord(**r))
        return cls(records=recs, **d)


def _untuple(v):
    return tuple(v) if isinstance(v, list) else v


def _record_dict(r: CellRecord) -> dict:
    d = asdict(r)
    if isinstance(d["axis_value"], tuple):
        d["axis_value"] = list(d["axis_value"])
    return d


def crossing_50(m_values, rates) -> float | None:
    """First ``m`` where the success rate reaches 0.5, linearly interpolated
    between neighbouring grid points. ``None`` if the rate never gets there;
    the first grid point if it already starts at or above 0.5."""
    m_values = np.asarray(m_values, dtype=float)
    rates = np.asarray(rates, dtype=float)
    idx = np.nonzero(rates >= 0.5)[0]
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        return float(m_values[0])
    m0, m1 = m_values[i - 1], m_values[i]
    r0, r1 = rates[i - 1], rates[i]
    return float(m0 + (0.5 - r0) * (m1 - m0) / (r1 - r0))


# ----------------------------------------------------------------------------
# task execution


def _trial(args):
    matrix, kind, x, m, seed, keys, opts, early_stop = args
    op = AnalysisOperator(matrix, kind)
    inst = gaussian_instance(x, m, seed=seed, keys=keys)
    res = solve_abp(op, inst, opts, reference=x if early_stop else None)
    return (keys, recovery_success(res.x, x), float(np.linalg.norm(res.x - x)),
            res.solver_failure)


def _run_tasks(tasks, workers: int):
    if workers <= 1:
        out = [_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_trial, tasks, chunksize=4))
    return {o[0]: o[1:] for o in out}


def _aggregate(results, keys, axis_value, m, seed, M_mean, krz_mean) -> CellRecord:
    succ = [results[k][0] for k in keys]
    errs = [results[k][1] for k in keys]
    fails = [results[k][2] for k in keys]
    return CellRecord(axis_value, int(m), len(keys), int(sum(succ)),
                      math.fsum(errs) / len(errs) if errs else float("nan"),
                      float(M_mean), float(krz_mean), int(seed), int(sum(fails)))


def _predictions(op: AnalysisOperator, x: np.ndarray, gram=None) -> tuple[float, float]:
    rep = sampling_rate_M(op, gram, x)
    try:
        krz = float(krz_for_profile(op, gram, rep.profile))
    except ValueError:
        krz = float("nan")
    return rep.M, krz


def run_fixed_signal(op: AnalysisOperator, x: np.ndarray, m_values, trials: int = 20,
                     seed: int = 0, opts: SolverOptions | None = None,
                     workers: int = 1, label: str = "fixed",
                     early_stop: bool = True) -> ExperimentGrid:
    """Recovery rate of one fixed signal for every ``m`` in ``m_values``.

    ``early_stop`` passes the ground truth to the solver as a reference, which
    only shortens runs whose outcome is already a certified failure.
    """
    x = np.asarray(x, dtype=float)
    opts = opts or SolverOptions()
    M, krz = _predictions(op, x, gram_info(op))
    tasks = [(op.matrix, op.kind, x, int(m), seed, ("fixed", int(m), t), opts, early_stop)
             for m in m_values for t in range(trials)]
    results = _run_tasks(tasks, workers)
    grid = ExperimentGrid("fixed_signal", "signal", [label], [int(m) for m in m_values], trials)
    for m in m_values:
        keys = [("fixed", int(m), t) for t in range(trials)]
        grid.records.append(_aggregate(results, keys, label, m, seed, M, krz))
    return grid


def run_pw_const(op: AnalysisOperator, n: int, s_tv_values, m_values,
                 outer_trials: int = 50, inner_trials: int = 10, seed: int = 0,
                 generator: str = "random_piecewise", literal: bool = False,
                 opts: SolverOptions | None = None, workers: int = 1,
                 early_stop: bool = True) -> ExperimentGrid:
    """Phase transition over the number of jumps ``S_TV`` of piecewise-constant
    signals. Each outer trial draws a new signal (``random_piecewise``) or
    reuses the deterministic one (``dense_jumps``); each inner trial a new
    measurement matrix. ``M_mean``/``krz_mean`` average over outer trials."""
    if op.n != n:
        raise ValueError("operator dimension does not match n")
    opts = opts or SolverOptions()
    gram = gram_info(op)
    grid = ExperimentGrid(f"pw_const_{generator}", "s_tv", [int(s) for s in s_tv_values],
                          [int(m) for m in m_values], outer_trials * inner_trials)
    tasks, cells = [], []
    for s_tv in s_tv_values:
        preds, signals = [], []
        for o in range(outer_trials):
            if generator == "dense_jumps":
                x = dense_jumps(n, s_tv)
            elif generator == "random_piecewise":
                x = random_piecewise(n, s_tv, seed=_subseed(seed, "pw", s_tv, o), literal=literal)
            else:
                raise ValueError(f"unknown generator {generator!r}")
            if not np.any(op.matrix @ x):
                # constant signal: not covered by the sampling-rate formula
                preds.append((float("nan"), float("nan")))
            else:
                preds.append(_predictions(op, x, gram))
            signals.append(x)
        M_mean = float(np.nanmean([p[0] for p in preds])) if preds else float("nan")
        k_mean = float(np.nanmean([p[1] for p in preds])) if preds else float("nan")
        for m in m_values:
            keys = []
            for o, x in enumerate(signals):
                for i in range(inner_trials):
                    key = ("pw", int(s_tv), int(m), o, i)
                    tasks.append((op.matrix, op.kind, x, int(m), seed, key, opts, early_stop))
                    keys.append(key)
            cells.append((s_tv, m, keys, M_mean, k_mean))
    results = _run_tasks(tasks, workers)
    for s_tv, m, keys, M_mean, k_mean in cells:
        grid.records.append(_aggregate(results, keys, int(s_tv), m, seed, M_mean, k_mean))
    return grid


def _subseed(seed: int, *keys) -> int:
    return int(stream(seed, *keys).integers(0, 2**63 - 1))


def run_random_frames(n: int, sl_pairs, m_values, outer_trials: int = 5,
                      inner_trials: int = 10, seed: int = 0,
                      opts: SolverOptions | None = None, workers: int = 1,
                      early_stop: bool = True) -> ExperimentGrid:
    """Phase transitions for random tight frames with ``N = S + L`` rows and
    signals supported on a random set of ``S`` coefficients."""
    opts = opts or SolverOptions()
    pairs = [(int(S), int(L)) for S, L in sl_pairs]
    grid = ExperimentGrid("random_frames", "S_L", pairs, [int(m) for m in m_values],
                          outer_trials * inner_trials)
    tasks, cells = [], []
    for S, L in pairs:
        N = S + L
        instances = []
        try:
            for o in range(outer_trials):
                op = build_random_tight(N, n, _subseed(seed, "frame", S, L, o))
                x = random_cosparse(op, S, _subseed(seed, "cosparse", S, L, o))
                instances.append((op, x, _predictions(op, x, gram_info(op))))
        except InfeasibleSignal:
            grid.skipped.append((S, L))
            continue
        M_mean = float(np.mean([p[2][0] for p in instances]))
        k_mean = float(np.mean([p[2][1] for p in instances]))
        for m in m_values:
            keys = []
            for o, (op, x, _) in enumerate(instances):
                for i in range(inner_trials):
                    key = ("frames", S, L, int(m), o, i)
                    tasks.append((op.matrix, op.kind, x, int(m), seed, key, opts, early_stop))
                    keys.append(key)
            cells.append(((S, L), m, keys, M_mean, k_mean))
    results = _run_tasks(tasks, workers)
    for pair, m, keys, M_mean, k_mean in cells:
        grid.records.append(_aggregate(results, keys, pair, m, seed, M_mean, k_mean))
    return grid


# ----------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ":".join(str(a) for a in v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def emit_report(grid: ExperimentGrid, fmt: str = "csv", path: str | Path | None = None) -> str:
    """Serialize ``grid`` as CSV (one row per cell) or JSON; writes to
    ``path`` when given and returns the text. Output is byte-stable."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in grid.records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(grid.to_dict(), sort_keys=True, indent=1, allow_nan=True) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_report(path: str | Path) -> ExperimentGrid:
    """Read back a JSON report written by :func:`emit_report`."""
    return ExperimentGrid.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
