"""Closed-form dual feasibility test for non-negative lattice kernels.

The test function is

    g(z) = R**2 * z + max_{xi in S} (2 xi - xi**2 z),   0 <= z <= 2|rho|/R,

and a kernel exists iff ``min g >= 2 R |rho|``.  ``g`` is convex and piecewise
linear, so its minimum sits at an endpoint or at a breakpoint of the upper
envelope; the envelope breakpoint between consecutive ratios ``a < b`` is
``2 / (a + b)``.  Every ratio in ``S`` contributes a piece (the lines are the
tangents of ``1/z`` at ``z = 1/xi``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .core import (
    MARGIN_TOL,
    ConsistencyError,
    DualCertificate,
    FeasibilityVerdict,
    MonotonicityCheckError,
    ReducedModel,
    StencilSpec,
    canonicalize,
    match_ratio,
    ratio_set,
)

RHO_MAX_ITER = 60
PRESCAN_POINTS = 64


@dataclass(frozen=True)
class DualWindow:
    """Open interval of ``z1`` admitting a dual certificate; empty iff feasible."""

    z_minus: float
    z_plus: float
    empty: bool

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.z_minus + self.z_plus)


@lru_cache(maxsize=None)
def _float_tables(s: int):
    spec = ratio_set(s)
    xs = spec.floats()
    breaks = tuple(2.0 / (a + b) for a, b in zip(xs, xs[1:]))
    return xs, breaks


def _tables(spec: StencilSpec, exact: bool):
    if exact:
        xs = spec.values
        return xs, tuple(Fraction(2) / (a + b) for a, b in zip(xs, xs[1:]))
    return _float_tables(spec.s)


def envelope_max(z1, spec: StencilSpec) -> Tuple[float, Fraction]:
    """Maximum of ``2 xi - xi**2 z1`` over the ratio set, with the smallest maximiser."""
    if z1 < 0:
        raise ValueError("z1 must be non-negative")
    exact = isinstance(z1, (int, Fraction))
    best, arg = None, None
    for xi in spec.values:
        x = xi if exact else float(xi)
        v = 2 * x - x * x * z1
        if best is None or v > best:
            best, arg = v, xi
    return best, arg


def _g(z, R2, xs):
    return R2 * z + max(2 * x - x * x * z for x in xs)


def dual_infimum(model: ReducedModel, spec: StencilSpec):
    """Minimum of ``g`` over ``[0, 2|rho|/R]``; ``inf`` when ``rho == 0``.

    Works for any ``R > 0``; callers normally pass a canonical model.
    """
    a = abs(model.rho)
    if a == 0:
        return math.inf
    exact = model.exact
    xs, breaks = _tables(spec, exact)
    R = model.R
    D = 2 * a / R
    R2 = R * R
    best = min(_g(0, R2, xs), _g(D, R2, xs))
    for b in breaks:
        if b < D:
            best = min(best, _g(b, R2, xs))
    return best


def _band(threshold, exact: bool, tol: float):
    if exact:
        return 0
    return tol * max(1.0, float(threshold))


def is_feasible(model: ReducedModel, spec: StencilSpec, tol: float = MARGIN_TOL) -> FeasibilityVerdict:
    """Decide whether a non-negative kernel of radius ``spec.s`` exists.

    The model is canonicalised first, so the verdict is exactly symmetric in
    ``rho -> -rho`` and ``R -> 1/R``.
    """
    cmodel, _, _ = canonicalize(model)
    if cmodel.rho == 0:
        return FeasibilityVerdict(True, math.inf, 0.0, math.inf, False)
    inf = dual_infimum(cmodel, spec)
    threshold = 2 * cmodel.R * cmodel.rho
    margin = inf - threshold
    band = _band(threshold, cmodel.exact, tol)
    if match_ratio(cmodel.R, spec) is not None:
        # R in S: the rational seven-point stencil works for every rho
        return FeasibilityVerdict(True, float(inf), float(threshold), float(margin), False)
    return FeasibilityVerdict(
        feasible=bool(margin >= -band),
        dual_infimum=float(inf),
        threshold=float(threshold),
        margin=float(margin),
        boundary=bool(abs(margin) <= band),
    )


def necessary_min_s(model: ReducedModel) -> int:
    """Smallest radius not ruled out by ``s >= |rho| max(R, 1/R)``."""
    R, a = model.R, abs(model.rho)
    x = a * max(R, 1 / R)
    if model.exact:
        return max(1, math.ceil(Fraction(x)))
    return max(1, math.ceil(x * (1 - 1e-12)))


def rho_max(R, spec: StencilSpec, tol: float = 1e-10) -> float:
    """Largest ``rho`` in ``[0, 1]`` admitting a kernel, by bisection.

    Exactly ``1.0`` when ``R`` is in the ratio set.  The margin is pre-scanned
    on a coarse grid and must be non-increasing in ``rho``; otherwise
    :class:`MonotonicityCheckError` is raised instead of bisecting.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if match_ratio(R, spec) is not None:
        return 1.0
    grid = np.linspace(0.0, 1.0, PRESCAN_POINTS)
    verdicts = [is_feasible(ReducedModel(R, float(r)), spec) for r in grid]
    margins = np.array([v.margin for v in verdicts])
    for k in range(1, len(grid)):
        slack = _band(verdicts[k].threshold, False, MARGIN_TOL)
        if margins[k] > margins[k - 1] + slack:
            raise MonotonicityCheckError(
                f"feasibility margin increases in rho near rho={grid[k]:.6g} for R={R!r}",
                grid=grid, margins=margins)
    if verdicts[-1].feasible:
        return 1.0
    feasible_idx = [k for k, v in enumerate(verdicts) if v.feasible]
    k = feasible_idx[-1]
    lo, hi = float(grid[k]), float(grid[k + 1])
    for _ in range(RHO_MAX_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if is_feasible(ReducedModel(R, mid), spec).feasible:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _window_interval(R: float, a: float, xs, breaks):
    """Raw sublevel interval ``{z in (0, D): g(z) < 2 R a}`` or ``None``."""
    D = 2 * a / R
    T = 2 * R * a
    R2 = R * R
    n = len(xs)
    lo_all, hi_all = math.inf, -math.inf
    for k, x in enumerate(xs):
        # piece where xs[k] is the active maximiser
        lo = breaks[k] if k < n - 1 else 0.0
        hi = breaks[k - 1] if k > 0 else math.inf
        lo, hi = max(lo, 0.0), min(hi, D)
        if lo >= hi:
            continue
        c = R2 - x * x
        d = T - 2 * x
        if c == 0:
            if d <= 0:
                continue
            plo, phi = lo, hi
        elif c > 0:
            plo, phi = lo, min(hi, d / c)
        else:
            plo, phi = max(lo, d / c), hi
        if plo < phi:
            lo_all, hi_all = min(lo_all, plo), max(hi_all, phi)
    if lo_all >= hi_all:
        return None
    return lo_all, hi_all


def dual_window(model: ReducedModel, spec: StencilSpec) -> DualWindow:
    """Interval ``(z_-, z_+)`` of ``z1`` values where a dual certificate exists."""
    verdict = is_feasible(model, spec)
    if verdict.feasible:
        return DualWindow(math.nan, math.nan, True)
    xs, breaks = _float_tables(spec.s)
    iv = _window_interval(float(model.R), abs(float(model.rho)), xs, breaks)
    if iv is None:
        raise ConsistencyError("infeasible verdict but empty dual window",
                               model=model, verdict=verdict)
    return DualWindow(iv[0], iv[1], False)


def dual_certificate(model: ReducedModel, spec: StencilSpec) -> Optional[DualCertificate]:
    """Farkas certificate ``(z1, z2)`` for an infeasible model, else ``None``."""
    window = dual_window(model, spec)
    if window.empty:
        return None
    R, a = float(model.R), abs(float(model.rho))
    z1 = window.midpoint
    lower = max(0.0, max(2 * x - x * x * z1 for x in spec.floats()))
    upper = 2 * R * a - R * R * z1
    cert = DualCertificate(z1, 0.5 * (lower + upper), -1 if model.rho < 0 else 1)
    if not cert.holds(model, spec):
        raise ConsistencyError("constructed dual certificate fails verification",
                               model=model, certificate=cert, window=window)
    return cert


def min_stencil(model: ReducedModel, s_max: int) -> Optional[int]:
    """Smallest radius ``s <= s_max`` with a kernel, scanning from the necessary bound."""
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    for s in range(necessary_min_s(model), s_max + 1):
        if is_feasible(model, ratio_set(s)).feasible:
            return s
    return None
