"""Generator assembly on rectangular grids and the Black-Scholes audit.

Rows are generator rows in physical units: off-diagonal coefficients are
non-negative and each row sums to zero.  A node gets a row only if its full
``(2 s_max + 1)^2`` footprint lies inside the rectangle, so every emitted
coefficient refers to an actual grid node.
"""
from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .core import LatticeConfig, MonokernelError, ReducedModel, TransitionKernel, ratio_set
from .feasibility import min_stencil, necessary_min_s
from .lp import solve_kernel
from .stencils import DriftSpec, upwind_drift

Node = Tuple[int, int]
Fn = Callable[[float, float], float]

QUANTUM = 1e-6


def _zero(x1, x2):
    return 0.0


@dataclass(frozen=True)
class CoefficientField:
    sigma1: Fn
    sigma2: Fn
    rho: Fn
    mu1: Fn = _zero
    mu2: Fn = _zero


def constant_field(sigma1: float, sigma2: float, rho: float, mu1: float = 0.0, mu2: float = 0.0) -> CoefficientField:
    return CoefficientField(lambda x, y: sigma1, lambda x, y: sigma2, lambda x, y: rho,
                            lambda x, y: mu1, lambda x, y: mu2)


def black_scholes_field(sigma1: float, sigma2: float, rho: float) -> CoefficientField:
    """Local volatilities ``sigma_i S_i`` of the two-asset Black-Scholes model at zero rates."""
    return CoefficientField(lambda s1, s2: sigma1 * s1, lambda s1, s2: sigma2 * s2, lambda s1, s2: rho)


def local_reduce(sigma1: float, sigma2: float, rho: float, config: LatticeConfig) -> ReducedModel:
    """Local anisotropy ``R = sigma1 H / (sigma2 h)``."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("volatilities must be positive")
    return ReducedModel(sigma1 * config.H / (sigma2 * config.h), rho)


class KernelCache:
    """Lambda-max kernels keyed by quantised ``(R, rho, s)``; safe across threads.

    The first model seen under a key is solved and reused for its neighbours.
    """

    def __init__(self, quantum: float = QUANTUM):
        self.quantum = quantum
        self._store: Dict[tuple, Optional[TransitionKernel]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, model: ReducedModel, s: int) -> Optional[TransitionKernel]:
        q = self.quantum
        key = (round(float(model.R) / q), round(float(model.rho) / q), s)
        with self._lock:
            if key in self._store:
                self.hits += 1
                return self._store[key]
        kernel = solve_kernel(model, ratio_set(s)).kernel
        with self._lock:
            self.misses += 1
            self._store.setdefault(key, kernel)
            return self._store[key]


@dataclass
class NodeReport:
    node: Node
    x1: float
    x2: float
    kind: str  # regular | one-dimensional | trivial
    local_R: float
    chosen_s: Optional[int]
    feasible: bool
    lam: float
    necessary_s: int


@dataclass
class GridOperator:
    x1: np.ndarray
    x2: np.ndarray
    margin: int
    rows: Dict[Node, Dict[Tuple[int, int], float]] = field(default_factory=dict)
    node_report: List[NodeReport] = field(default_factory=list)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.x1), len(self.x2)

    def index(self, node: Node) -> int:
        return node[0] * len(self.x2) + node[1]

    @property
    def infeasible_nodes(self) -> List[Node]:
        return [r.node for r in self.node_report if not r.feasible]

    def to_coo(self):
        rows, cols, vals = [], [], []
        for node in sorted(self.rows):
            r = self.index(node)
            for (i, j), v in sorted(self.rows[node].items()):
                rows.append(r)
                cols.append(self.index((node[0] + i, node[1] + j)))
                vals.append(v)
        return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for r, c, v in zip(*self.to_coo()):
            w.writerow([int(r), int(c), repr(float(v))])
        return buf.getvalue()

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``L u`` on nodes carrying a row; zero elsewhere."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for (n, m), row in self.rows.items():
            out[n, m] = sum(v * u[n + i, m + j] for (i, j), v in row.items())
        return out

    def max_step(self) -> float:
        """Largest ``k`` for which ``u + k L u`` is a convex combination at every row."""
        diag = [-row.get((0, 0), 0.0) for row in self.rows.values()]
        worst = max(diag, default=0.0)
        return math.inf if worst <= 0 else 1.0 / worst


def _drift_row(mu1: float, mu2: float, h: float, H: float) -> Dict[Tuple[int, int], float]:
    row: Dict[Tuple[int, int], float] = {}
    if mu1:
        row[(1, 0) if mu1 > 0 else (-1, 0)] = abs(mu1) / h
    if mu2:
        row[(0, 1) if mu2 > 0 else (0, -1)] = abs(mu2) / H
    return row


def _close_row(row: Dict[Tuple[int, int], float]) -> Dict[Tuple[int, int], float]:
    row = {o: v for o, v in row.items() if o != (0, 0) and v != 0.0}
    row[(0, 0)] = -sum(row.values())
    return row


def _kernel_row(kernel: TransitionKernel, s1: float, mu1: float, mu2: float, h: float, H: float):
    """Generator row from a normalised kernel plus upwind drift.

    Space is rescaled by ``1/s1`` so the first volatility is one.  The kernel is
    shrunk towards the stay-put state until ``p00`` can fund the drift
    donation; the resulting row does not depend on that shrink factor.
    """
    hn, Hn = h / s1, H / s1
    m1, m2 = mu1 / s1, mu2 / s1
    rate = abs(m1) / hn + abs(m2) / Hn
    off = sum(p for o, p in kernel.entries.items() if o != (0, 0))
    c = min(1.0, 1.0 / (off + kernel.lam * hn * hn * rate)) if rate else 1.0
    if c < 1.0:
        entries = {o: c * p for o, p in kernel.entries.items() if o != (0, 0)}
        entries[(0, 0)] = 1.0 - sum(entries.values())
        kernel = TransitionKernel(kernel.R, kernel.rho, kernel.s, c * kernel.lam, entries)
    k = kernel.lam * hn * hn
    kernel = upwind_drift(kernel, DriftSpec(m1, m2), LatticeConfig(hn, Hn, k))
    row = {o: p / k for o, p in kernel.entries.items() if o != (0, 0)}
    return _close_row(row), kernel.lam


def assemble_operator(field: CoefficientField, config: LatticeConfig,
                      bounds: Tuple[Tuple[float, float], Tuple[float, float]],
                      s_max: int, cache: Optional[KernelCache] = None) -> GridOperator:
    """Assemble generator rows on ``bounds = ((x1_lo, x1_hi), (x2_lo, x2_hi))``.

    Nodes within ``s_max`` of the rectangle edge are excluded.  Infeasible
    nodes are reported and get no row.
    """
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    (a1, b1), (a2, b2) = bounds
    h, H = config.h, config.H
    n1 = int(math.floor((b1 - a1) / h + 1e-9)) + 1
    n2 = int(math.floor((b2 - a2) / H + 1e-9)) + 1
    x1 = a1 + h * np.arange(n1)
    x2 = a2 + H * np.arange(n2)
    if n1 - 2 * s_max < 3 or n2 - 2 * s_max < 3:
        raise ValueError(f"grid {n1}x{n2} leaves less than a 3x3 interior for s_max={s_max}")
    cache = cache or KernelCache()
    op = GridOperator(x1, x2, s_max)
    for n in range(s_max, n1 - s_max):
        for m in range(s_max, n2 - s_max):
            X, Y = float(x1[n]), float(x2[m])
            try:
                s1, s2 = float(field.sigma1(X, Y)), float(field.sigma2(X, Y))
                rho = float(field.rho(X, Y))
                mu1, mu2 = float(field.mu1(X, Y)), float(field.mu2(X, Y))
            except Exception as exc:
                raise MonokernelError(f"coefficient evaluation failed at node {(n, m)}") from exc
            if not all(math.isfinite(v) for v in (s1, s2, rho, mu1, mu2)) or s1 < 0 or s2 < 0:
                raise MonokernelError(f"invalid coefficients at node {(n, m)}")
            if s1 == 0 and s2 == 0:
                op.rows[(n, m)] = _close_row(_drift_row(mu1, mu2, h, H))
                op.node_report.append(NodeReport((n, m), X, Y, "trivial", math.nan, 1, True, 0.0, 1))
                continue
            if s1 == 0 or s2 == 0:
                row = _drift_row(mu1, mu2, h, H)
                if s1 > 0:
                    for o in ((1, 0), (-1, 0)):
                        row[o] = row.get(o, 0.0) + 0.5 * s1 * s1 / (h * h)
                else:
                    for o in ((0, 1), (0, -1)):
                        row[o] = row.get(o, 0.0) + 0.5 * s2 * s2 / (H * H)
                op.rows[(n, m)] = _close_row(row)
                op.node_report.append(NodeReport((n, m), X, Y, "one-dimensional", math.nan, 1, True, 1.0, 1))
                continue
            model = local_reduce(s1, s2, rho, config)
            s = min_stencil(model, s_max)
            need = necessary_min_s(model)
            if s is None:
                op.node_report.append(NodeReport((n, m), X, Y, "regular", float(model.R), None, False,
                                                 math.nan, need))
                continue
            kernel = cache.get(model, s)
            if kernel is None:
                raise MonokernelError(f"LP found no kernel at node {(n, m)} despite feasible verdict")
            op.rows[(n, m)], lam = _kernel_row(kernel, s1, mu1, mu2, h, H)
            op.node_report.append(NodeReport((n, m), X, Y, "regular", float(model.R), s, True, lam, need))
    return op


def explicit_step(op: Union[GridOperator, TransitionKernel], u: np.ndarray, k: Optional[float] = None) -> np.ndarray:
    """One explicit chain step ``u+(x) = sum p_ij u(x + (i, j))``.

    With a single kernel the step length is the kernel's own ``lam h**2`` and
    ``k`` is ignored; nodes whose footprint leaves the array are copied.  With
    a :class:`GridOperator` the step is ``u + k L u`` and ``k`` defaults to
    :meth:`GridOperator.max_step`.
    """
    u = np.asarray(u, dtype=float)
    if isinstance(op, TransitionKernel):
        s = op.s
        out = u.copy()
        n1, n2 = u.shape
        if n1 <= 2 * s or n2 <= 2 * s:
            return out
        # difference form u + sum p (u_nb - u): constants are reproduced bit for bit
        centre = u[s:n1 - s, s:n2 - s]
        acc = centre.copy()
        for (i, j), p in sorted(op.entries.items()):
            if p and (i, j) != (0, 0):
                acc += p * (u[s + i:n1 - s + i, s + j:n2 - s + j] - centre)
        out[s:n1 - s, s:n2 - s] = acc
        return out
    if op.infeasible_nodes:
        raise MonokernelError(f"{len(op.infeasible_nodes)} infeasible nodes in operator")
    if u.shape != op.shape:
        raise ValueError(f"u has shape {u.shape}, expected {op.shape}")
    kmax = op.max_step()
    if k is None:
        k = kmax
    elif k > kmax * (1 + 1e-12):
        raise ValueError(f"k={k:g} exceeds the monotone step bound {kmax:g}")
    out = u.copy()
    for (n, m), row in op.rows.items():
        c = u[n, m]
        acc = 0.0
        for (i, j), v in row.items():
            if (i, j) != (0, 0):
                acc += v * (u[n + i, m + j] - c)
        out[n, m] = c + k * acc
    return out


@dataclass
class AuditReport:
    rho: float
    sigma1: float
    sigma2: float
    n: int
    s_max: int
    S1: np.ndarray
    S2: np.ndarray
    local_R: np.ndarray
    min_s: np.ndarray  # 0 where no stencil up to s_max works
    feasible: np.ndarray
    necessary_s: np.ndarray

    @property
    def n_infeasible(self) -> int:
        return int((~self.feasible).sum())

    @property
    def feasible_fraction(self) -> float:
        return float(self.feasible.mean())

    @property
    def R_range(self) -> Tuple[float, float]:
        return float(self.local_R.min()), float(self.local_R.max())

    @property
    def max_necessary_s(self) -> int:
        return int(self.necessary_s.max())

    @property
    def claim_expected(self) -> bool:
        """Corner ratio already exceeds the necessary bound s >= |rho| max(R, 1/R) for ``s_max``."""
        return self.rho != 0 and self.n > self.s_max / abs(self.rho)

    @property
    def claim_holds(self) -> bool:
        return (not self.claim_expected) or self.n_infeasible > 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["S1", "S2", "localR", "min_s", "feasible"])
        for a, b, r, s, f in zip(self.S1.ravel(), self.S2.ravel(), self.local_R.ravel(),
                                 self.min_s.ravel(), self.feasible.ravel()):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(r)), int(s) if s else "", int(bool(f))])
        return buf.getvalue()


def bs_audit(rho: float, sigma1: float, sigma2: float, n: int, s_max: int, S_max: float = 1.0) -> AuditReport:
    """Per-node stencil audit of the two-asset Black-Scholes operator on a uniform mesh.

    Nodes are ``S1, S2 in {h, 2h, ..., n h}`` with ``h = S_max / n``; the
    local ratio is ``sigma1 S1 / (sigma2 S2)``.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    h = S_max / n
    idx = np.arange(1, n + 1)
    A, B = np.meshgrid(idx, idx, indexing="ij")
    R = (sigma1 * A) / (sigma2 * B)
    min_s = np.zeros(A.shape, dtype=int)
    need = np.zeros(A.shape, dtype=int)
    memo: Dict[float, Tuple[int, int]] = {}
    for (a, b), r in np.ndenumerate(R):
        key = round(float(r) / QUANTUM)
        if key not in memo:
            model = ReducedModel(float(r), rho)
            memo[key] = (min_stencil(model, s_max) or 0, necessary_min_s(model))
        min_s[a, b], need[a, b] = memo[key]
    return AuditReport(rho, sigma1, sigma2, n, s_max, A * h, B * h, R, min_s, min_s > 0, need)
