"""Multi-seed experiment harness and trace aggregation.

``run`` executes every seed of a config, writing one trace CSV per seed plus
a manifest recording the config hash, code version, and per-seed RNG roots.
Seeds are isolated: one seed's failure is recorded in the manifest and the
remaining seeds still complete.  ``summarize`` aggregates traces onto a
common cumulative-cost grid with right-continuous step interpolation
(regret only changes at completion events) and reports medians/quartiles.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .benchmarks import make_objective
from .config import canonical_dict, config_hash
from .engine import run_async_loop, run_sequential_loop
from .errors import InputError
from .trace import RegretTrace

__all__ = ["run", "summarize", "SummaryTable", "manifest_path", "trace_filename"]

OUTPUT_DIR_ENV = "MFMES_OUTPUT_DIR"


def trace_filename(seed):
    return f"trace_seed{int(seed)}.csv"


def manifest_path(output_dir):
    return os.path.join(output_dir, "manifest.json")


def resolve_output_dir(config, override=None):
    """Explicit argument beats the environment variable beats the config."""
    if override is not None:
        return override
    return os.environ.get(OUTPUT_DIR_ENV) or config.output_dir


def _write_json_atomic(path, payload):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(config, output_dir=None):
    """Execute every seed; returns the list of written trace paths.

    A manifest.json lands next to the traces.  Per-seed exceptions are
    caught, recorded under that seed's manifest entry, and do not stop the
    other seeds.
    """
    out = resolve_output_dir(config, output_dir)
    objective = make_objective(config.benchmark, seed=config.benchmark_seed)
    os.makedirs(out, exist_ok=True)
    loop = run_async_loop if config.mode == "async" else run_sequential_loop
    paths = []
    per_seed = {}
    for seed in config.seeds:
        entry = {"rng_root": int(seed)}
        try:
            trace = loop(objective, config, seed=seed)
            path = os.path.join(out, trace_filename(seed))
            trace.to_csv(path)
            paths.append(path)
            entry["trace"] = trace_filename(seed)
            entry["rows"] = len(trace)
        except Exception as err:  # seed isolation: record and move on
            entry["error"] = f"{type(err).__name__}: {err}"
        per_seed[str(int(seed))] = entry
    _write_json_atomic(
        manifest_path(out),
        {
            "config_hash": config_hash(config),
            "code_version": __version__,
            "benchmark": config.benchmark,
            "mode": config.mode,
            "q": config.q,
            "per_seed": per_seed,
            "config": canonical_dict(config),
        },
    )
    return paths


_SUMMARY_HEADER = (
    "cost,n_traces,sr_q25,sr_median,sr_q75,ir_q25,ir_median,ir_q75"
)


@dataclass(frozen=True)
class SummaryTable:
    """Quartiles of simple and inference regret on a shared cost grid."""

    grid: np.ndarray      # (G,)
    sr: np.ndarray        # (3, G) rows q25, median, q75
    ir: np.ndarray        # (3, G)
    n_traces: int

    def lines(self):
        """CSV text lines (no newline), header first."""
        yield _SUMMARY_HEADER
        for j, c in enumerate(self.grid):
            cells = [
                "%.17g" % c,
                str(self.n_traces),
                "%.17g" % self.sr[0, j],
                "%.17g" % self.sr[1, j],
                "%.17g" % self.sr[2, j],
                "%.17g" % self.ir[0, j],
                "%.17g" % self.ir[1, j],
                "%.17g" % self.ir[2, j],
            ]
            yield ",".join(cells)

    def to_csv(self, path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                for line in self.lines():
                    fh.write(line)
                    fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path


def step_values(costs, values, grid):
    """Right-continuous step lookup: the last event at cost <= grid point.

    Grid points before the first event error out; points past the last event
    hold its value (the best-so-far semantics of regret).
    """
    costs = np.asarray(costs, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(costs, np.asarray(grid, dtype=float), side="right") - 1
    if np.any(idx < 0):
        raise InputError("grid starts before the first trace event")
    return values[idx]


def summarize(trace_paths, grid_step):
    """Aggregate traces onto a cost grid; returns a SummaryTable."""
    if not trace_paths:
        raise InputError("no trace files to summarize")
    step = float(grid_step)
    if not step > 0:
        raise InputError("grid step must be positive")
    traces = [RegretTrace.read(p) for p in trace_paths]
    d = traces[0].d
    for path, tr in zip(trace_paths, traces):
        if len(tr) == 0:
            raise InputError(f"trace has no rows: {path}")
        if tr.d != d:
            raise InputError(
                f"trace {path} has {tr.d} input columns, expected {d}; "
                "traces from different benchmarks cannot be summarized together"
            )
    max_cost = max(float(tr.cumulative_cost[-1]) for tr in traces)
    grid = step * np.arange(int(np.floor(max_cost / step + 1e-9)) + 1)
    sr_rows = np.vstack(
        [step_values(tr.cumulative_cost, tr.simple_regret, grid) for tr in traces]
    )
    ir_rows = np.vstack(
        [step_values(tr.cumulative_cost, tr.inference_regret, grid) for tr in traces]
    )
    q = [25, 50, 75]
    return SummaryTable(
        grid=grid,
        sr=np.percentile(sr_rows, q, axis=0),
        ir=np.percentile(ir_rows, q, axis=0),
        n_traces=len(traces),
    )
