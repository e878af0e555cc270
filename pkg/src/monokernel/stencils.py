"""Closed-form kernels and the upwind drift correction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DriftStepError,
    LatticeConfig,
    ReducedModel,
    StencilError,
    TransitionKernel,
)

SEVEN_POINT_TOL = 1e-12


@dataclass(frozen=True)
class DriftSpec:
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mu1) and math.isfinite(self.mu2)):
            raise ValueError("drift must be finite")


def _clip(x: float) -> float:
    # clears rounding noise at the monotonicity boundary
    return 0.0 if -SEVEN_POINT_TOL < x < 0 else x


def seven_point(model: ReducedModel, lam: Optional[float] = None) -> TransitionKernel:
    """Seven-point kernel: central second differences plus one diagonal pair.

    The diagonal pair is ``(1, 1), (-1, -1)`` for ``rho >= 0`` and the
    anti-diagonal otherwise.  Default ``lam`` saturates the mass (``p00 = 0``).
    """
    R, rho = float(model.R), float(model.rho)
    a = abs(rho)
    if a > min(R, 1 / R) + SEVEN_POINT_TOL:
        raise StencilError(f"seven-point stencil not monotone: |rho|={a:g} > min(R, 1/R)={min(R, 1 / R):g}")
    mass_coef = 1 + 1 / R ** 2 - a / R
    lam_max = 1 / mass_coef
    if lam is None:
        lam = lam_max
    elif not (0 < lam <= lam_max * (1 + 1e-12)):
        raise StencilError(f"lam={lam:g} exceeds the mass bound {lam_max:g}")
    px = _clip(lam * (1 - a / R) / 2)
    py = _clip(lam * (1 / R ** 2 - a / R) / 2)
    pd = lam * a / (2 * R)
    sgn = -1 if rho < 0 else 1
    entries = {(1, 0): px, (-1, 0): px, (0, 1): py, (0, -1): py,
               (1, sgn): pd, (-1, -sgn): pd}
    entries[(0, 0)] = max(0.0, 1 - sum(entries.values()))
    return TransitionKernel(R, rho, 1, lam, entries)


def rational_stencil(i: int, j: int, rho: float, lam: Optional[float] = None) -> TransitionKernel:
    """Seven-point pattern on the scaled axes ``(i, 0), (0, j), (i, j)`` for ``R = i/j``.

    Non-negative for every ``rho`` in ``[-1, 1]``.
    """
    if i < 1 or j < 1:
        raise ValueError("i and j must be positive")
    if math.gcd(i, j) != 1:
        raise ValueError(f"i={i} and j={j} must be coprime")
    if not -1 <= rho <= 1:
        raise ValueError("rho must lie in [-1, 1]")
    a = abs(rho)
    lam_max = i * i / (2 - a)
    lam = lam_max if lam is None else min(lam, lam_max)
    if lam <= 0:
        raise ValueError("lam must be positive")
    pa = lam * (1 - a) / (2 * i * i)
    pd = lam * a / (2 * i * i)
    sgn = -1 if rho < 0 else 1
    entries = {}
    for off, p in (((i, 0), pa), ((-i, 0), pa), ((0, j), pa), ((0, -j), pa),
                   ((i, sgn * j), pd), ((-i, -sgn * j), pd)):
        if p:
            entries[off] = entries.get(off, 0.0) + p
    entries[(0, 0)] = max(0.0, 1 - sum(entries.values()))
    return TransitionKernel(i / j, float(rho), max(i, j), float(lam), entries)


def upwind_drift(kernel: TransitionKernel, drift: DriftSpec, config: LatticeConfig,
                 rtol: float = 1e-9) -> TransitionKernel:
    """Add upwind drift mass ``|mu| k / h`` taken from the stay-put probability.

    ``config.k`` must equal ``kernel.lam * config.h**2``.  Raises
    :class:`DriftStepError` with the largest admissible ``k`` for the given
    kernel when ``p00`` would turn negative.
    """
    if abs(config.k - kernel.lam * config.h ** 2) > rtol * config.k:
        raise ValueError(f"k={config.k:g} inconsistent with lam*h^2={kernel.lam * config.h ** 2:g}")
    d1 = abs(drift.mu1) * config.k / config.h
    d2 = abs(drift.mu2) * config.k / config.H
    if d1 == 0 and d2 == 0:
        return kernel
    p00 = kernel.p00 - d1 - d2
    if p00 < -1e-15:
        rate = abs(drift.mu1) / config.h + abs(drift.mu2) / config.H
        raise DriftStepError("time step too large for drift", admissible_k=max(0.0, kernel.p00) / rate)
    entries = dict(kernel.entries)
    if d1:
        off = (1, 0) if drift.mu1 > 0 else (-1, 0)
        entries[off] = entries.get(off, 0.0) + d1
    if d2:
        off = (0, 1) if drift.mu2 > 0 else (0, -1)
        entries[off] = entries.get(off, 0.0) + d2
    entries[(0, 0)] = max(0.0, p00)
    return TransitionKernel(kernel.R, kernel.rho, kernel.s, kernel.lam, entries)


def apply_generator(kernel: TransitionKernel, phi, h: float, H: float) -> float:
    """Discrete generator ``(sum p_ij phi_ij - phi_00 sum p_ij) / (lam h**2)``.

    ``phi`` is a ``(2s+1, 2s+1)`` array sampled at ``(i h, j H)`` and indexed
    ``[i + s, j + s]``.
    """
    phi = np.asarray(phi, dtype=float)
    n = 2 * kernel.s + 1
    if phi.shape != (n, n):
        raise ValueError(f"phi has shape {phi.shape}, expected {(n, n)}")
    P = kernel.as_array()
    centre = phi[kernel.s, kernel.s]
    return float(((P * (phi - centre)).sum()) / (kernel.lam * h * h))


def sample_footprint(f, s: int, h: float, H: float) -> np.ndarray:
    """Evaluate ``f(x, y)`` on the ``(2s+1)^2`` footprint around the origin."""
    idx = np.arange(-s, s + 1)
    X, Y = np.meshgrid(idx * h, idx * H, indexing="ij")
    return np.asarray(f(X, Y), dtype=float) * np.ones_like(X)
