"""Parameter sweeps over the anisotropy ratio and bulk duality cross-checks."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import __version__
from .core import ReducedModel, StencilSpec, ratio_set
from .feasibility import dual_window, rho_max
from .lp import farkas_cross_check

RNG_NAME = "numpy.random.PCG64"


@dataclass
class SweepTable:
    columns: Dict[str, np.ndarray]
    metadata: Dict[str, object]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: {lengths}")

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        w.writerow(names)
        for row in zip(*(self.columns[n] for n in names)):
            w.writerow(["" if math.isnan(x) else repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepTable":
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif line:
                body.append(line)
        rows = list(csv.reader(body))
        names, data = rows[0], rows[1:]
        cols = {n: np.array([float(r[i]) if r[i] != "" else math.nan for r in data]) for i, n in enumerate(names)}
        return cls(cols, meta)

    def to_json(self) -> str:
        cols = {k: [None if math.isnan(x) else float(x) for x in v] for k, v in self.columns.items()}
        return json.dumps({"metadata": self.metadata, "columns": cols}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SweepTable":
        data = json.loads(text)
        cols = {k: np.array([math.nan if x is None else x for x in v], dtype=float)
                for k, v in data["columns"].items()}
        return cls(cols, data["metadata"])


def r_grid(R_min: float, R_max: float, steps: int, log: bool = False) -> np.ndarray:
    if not (0 < R_min < R_max):
        raise ValueError("need 0 < R_min < R_max")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if log:
        return np.geomspace(R_min, R_max, steps)
    return np.linspace(R_min, R_max, steps)


def _pmap(fn: Callable, items: Sequence, workers: int) -> List:
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def spikes(R_min: float, R_max: float, spec: StencilSpec) -> List[Fraction]:
    """Ratios in ``[R_min, R_max]`` where every correlation admits a kernel."""
    return [x for x in spec.values if R_min <= x <= R_max]


class _RhoMax:
    def __init__(self, spec, tol):
        self.spec, self.tol = spec, tol

    def __call__(self, R):
        return rho_max(float(R), self.spec, self.tol)


def rho_max_curve(R_min: float, R_max: float, steps: int, spec: StencilSpec, tol: float = 1e-10,
                  log: bool = False, workers: int = 1) -> SweepTable:
    """Columns ``R``, ``rho_max`` and the necessary bound ``min(1, s / max(R, 1/R))``."""
    R = r_grid(R_min, R_max, steps, log)
    rm = np.array(_pmap(_RhoMax(spec, tol), list(R), workers))
    bound = np.minimum(1.0, spec.s / np.maximum(R, 1 / R))
    meta = {"quantity": "rho_max", "s": spec.s, "R_min": R_min, "R_max": R_max, "steps": steps,
            "spacing": "log" if log else "linear", "tol": tol, "version": __version__}
    return SweepTable({"R": R, "rho_max": rm, "corollary_bound": bound}, meta)


class _Window:
    def __init__(self, spec, rho):
        self.spec, self.rho = spec, rho

    def __call__(self, R):
        w = dual_window(ReducedModel(float(R), self.rho), self.spec)
        return (math.nan, math.nan, 1.0) if w.empty else (w.z_minus, w.z_plus, 0.0)


def dual_window_curve(R_min: float, R_max: float, steps: int, rho: float, spec: StencilSpec,
                      log: bool = False, workers: int = 1) -> SweepTable:
    """Columns ``R``, ``z_minus``, ``z_plus``, ``empty``; empty rows carry blanks."""
    R = r_grid(R_min, R_max, steps, log)
    out = np.array(_pmap(_Window(spec, rho), list(R), workers)).reshape(-1, 3)
    meta = {"quantity": "dual_window", "s": spec.s, "rho": rho, "R_min": R_min, "R_max": R_max,
            "steps": steps, "spacing": "log" if log else "linear", "version": __version__}
    return SweepTable({"R": R, "z_minus": out[:, 0], "z_plus": out[:, 1], "empty": out[:, 2]}, meta)


OUTCOMES = ("agree-feasible", "agree-infeasible", "inconclusive", "disagree")


@dataclass
class ConsistencySummary:
    trials: int
    seed: int
    s_max: int
    counts: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in OUTCOMES})
    disagreements: List[tuple] = field(default_factory=list)
    rng: str = RNG_NAME

    @property
    def agree(self) -> int:
        return self.counts["agree-feasible"] + self.counts["agree-infeasible"]

    @property
    def inconclusive(self) -> int:
        return self.counts["inconclusive"]

    @property
    def disagree(self) -> int:
        return self.counts["disagree"]

    def merge(self, other: "ConsistencySummary") -> "ConsistencySummary":
        counts = {k: self.counts[k] + other.counts[k] for k in OUTCOMES}
        return ConsistencySummary(self.trials + other.trials, self.seed, self.s_max, counts,
                                  self.disagreements + other.disagreements, self.rng)

    def as_dict(self) -> dict:
        return {"trials": self.trials, "seed": self.seed, "s_max": self.s_max, "rng": self.rng,
                "counts": dict(self.counts), "disagreements": [list(d) for d in self.disagreements]}


def random_triples(trials: int, seed: int, s_max: int) -> List[tuple]:
    """``(R, rho, s)`` with log-uniform ``R`` in ``[0.05, 20]``, uniform ``rho`` and ``s``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    R = np.exp(rng.uniform(math.log(0.05), math.log(20.0), trials))
    rho = rng.uniform(-1.0, 1.0, trials)
    s = rng.integers(1, s_max + 1, trials)
    return [(float(a), float(b), int(c)) for a, b, c in zip(R, rho, s)]


def _check(triple) -> str:
    R, rho, s = triple
    return farkas_cross_check(ReducedModel(R, rho), ratio_set(s)).outcome


def cross_check_sweep(trials: int, seed: int, s_max: int = 6, workers: int = 1) -> ConsistencySummary:
    """Run the primal/dual cross-check on pseudo-random triples."""
    if trials < 0:
        raise ValueError("trials must be non-negative")
    summary = ConsistencySummary(0, seed, s_max)
    triples = random_triples(trials, seed, s_max) if trials else []
    for triple, outcome in zip(triples, _pmap(_check, triples, workers)):
        part = ConsistencySummary(1, seed, s_max)
        part.counts[outcome] += 1
        if outcome == "disagree":
            part.disagreements.append(triple)
        summary = summary.merge(part)
    return summary
