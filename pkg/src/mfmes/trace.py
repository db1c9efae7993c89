"""Regret traces and their exact-text CSV serialization.

A trace is one seed's event log: initialization rows at simulated time zero,
then one row per completed query.  Numeric fields are written with 17
significant digits so files round-trip float64 exactly and byte-identical
runs produce byte-identical files; writes go through a temp file and rename.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .errors import InputError

__all__ = ["RegretTrace", "FLAG_INIT", "FLAG_ERROR", "trace_header"]

FLAG_INIT = "init"
FLAG_ERROR = "error"

_BASE_HEAD = ["seed", "event_index", "sim_time", "cumulative_cost", "fidelity"]
_BASE_TAIL = [
    "y",
    "simple_regret",
    "inference_regret",
    "acq_value",
    "wall_ms",
    "flags",
]
_INT_COLUMNS = {"seed", "event_index", "fidelity"}


def trace_header(d):
    """Column names for a d-dimensional input space."""
    return _BASE_HEAD + [f"x{i}" for i in range(d)] + _BASE_TAIL


def _fmt(value):
    return "%.17g" % float(value)


class RegretTrace:
    """Mutable event log for one (config, seed) run."""

    def __init__(self, seed, d):
        if int(d) < 1:
            raise InputError("d must be >= 1")
        self.seed = int(seed)
        self.d = int(d)
        self.event_index = []
        self.sim_time = []
        self.cumulative_cost = []
        self.fidelity = []
        self.x = []
        self.y = []
        self.simple_regret = []
        self.inference_regret = []
        self.acq_value = []
        self.wall_ms = []
        self.flags = []

    def __len__(self):
        return len(self.event_index)

    def append(
        self,
        event_index,
        sim_time,
        cumulative_cost,
        fidelity,
        x,
        y,
        simple_regret,
        inference_regret,
        acq_value,
        wall_ms=0.0,
        flags="",
    ):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.d:
            raise InputError(f"x has {x.size} components, trace expects {self.d}")
        if "," in flags or "\n" in flags:
            raise InputError("flags must not contain separators")
        self.event_index.append(int(event_index))
        self.sim_time.append(float(sim_time))
        self.cumulative_cost.append(float(cumulative_cost))
        self.fidelity.append(int(fidelity))
        self.x.append(x.copy())
        self.y.append(float(y))
        self.simple_regret.append(float(simple_regret))
        self.inference_regret.append(float(inference_regret))
        self.acq_value.append(float(acq_value))
        self.wall_ms.append(float(wall_ms))
        self.flags.append(str(flags))

    def to_arrays(self):
        """Columns as numpy arrays keyed by header name."""
        out = {
            "seed": np.full(len(self), self.seed, dtype=int),
            "event_index": np.asarray(self.event_index, dtype=int),
            "sim_time": np.asarray(self.sim_time, dtype=float),
            "cumulative_cost": np.asarray(self.cumulative_cost, dtype=float),
            "fidelity": np.asarray(self.fidelity, dtype=int),
            "y": np.asarray(self.y, dtype=float),
            "simple_regret": np.asarray(self.simple_regret, dtype=float),
            "inference_regret": np.asarray(self.inference_regret, dtype=float),
            "acq_value": np.asarray(self.acq_value, dtype=float),
            "wall_ms": np.asarray(self.wall_ms, dtype=float),
            "flags": np.asarray(self.flags, dtype=object),
        }
        X = (
            np.vstack(self.x)
            if self.x
            else np.zeros((0, self.d))
        )
        for i in range(self.d):
            out[f"x{i}"] = X[:, i]
        return out

    def lines(self):
        """CSV text lines (no newline), header first."""
        yield ",".join(trace_header(self.d))
        for r in range(len(self)):
            cells = [
                str(self.seed),
                str(self.event_index[r]),
                _fmt(self.sim_time[r]),
                _fmt(self.cumulative_cost[r]),
                str(self.fidelity[r]),
            ]
            cells.extend(_fmt(v) for v in self.x[r])
            cells.extend(
                [
                    _fmt(self.y[r]),
                    _fmt(self.simple_regret[r]),
                    _fmt(self.inference_regret[r]),
                    _fmt(self.acq_value[r]),
                    _fmt(self.wall_ms[r]),
                    self.flags[r],
                ]
            )
            yield ",".join(cells)

    def to_csv(self, path):
        """Write atomically (temp + rename), UTF-8, LF line endings."""
        path = os.fspath(path)
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

    @classmethod
    def read(cls, path):
        """Parse a trace CSV written by to_csv."""
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise InputError(f"empty trace file: {path}")
        header = lines[0].split(",")
        if header[: len(_BASE_HEAD)] != _BASE_HEAD or header[-len(_BASE_TAIL):] != _BASE_TAIL:
            raise InputError(f"unrecognized trace header in {path}")
        d = len(header) - len(_BASE_HEAD) - len(_BASE_TAIL)
        if d < 1 or header != trace_header(d):
            raise InputError(f"unrecognized trace header in {path}")
        rows = [line.split(",") for line in lines[1:] if line]
        seed = int(rows[0][0]) if rows else 0
        trace = cls(seed=seed, d=d)
        for cells in rows:
            if len(cells) != len(header):
                raise InputError(f"ragged row in {path}")
            if int(cells[0]) != seed:
                raise InputError(f"mixed seeds within one trace file: {path}")
            trace.append(
                event_index=int(cells[1]),
                sim_time=float(cells[2]),
                cumulative_cost=float(cells[3]),
                fidelity=int(cells[4]),
                x=[float(v) for v in cells[5 : 5 + d]],
                y=float(cells[5 + d]),
                simple_regret=float(cells[6 + d]),
                inference_regret=float(cells[7 + d]),
                acq_value=float(cells[8 + d]),
                wall_ms=float(cells[9 + d]),
                flags=cells[10 + d],
            )
        return trace
