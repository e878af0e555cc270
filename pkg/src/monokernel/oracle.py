"""Slow, independent verifiers for the analytic feasibility machinery.

Nothing here calls into ``feasibility``, ``lp`` or ``simplex``: the dual
oracle scans ``z1`` on a grid and checks the untransformed inequalities over
every lattice offset, and the primal oracle enumerates basic solutions.
"""
from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from .core import DualCertificate, ReducedModel, StencilSpec


def _dual_ok(z1: float, z2: float, sign: int, R: float, a: float, s: int) -> bool:
    for i in range(-s, s + 1):
        for j in range(-s, s + 1):
            if i * i * z1 + j * j * z2 - 2 * sign * i * j < -1e-12:
                return False
    return R * R * z1 - 2 * a * R + z2 < 0


def brute_force_dual(model: ReducedModel, spec: StencilSpec, resolution: float = 1e-3) -> Optional[DualCertificate]:
    """First certificate on the ``z1`` grid ``resolution, 2 resolution, ... < 2|rho|/R``."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    R, a, s = float(model.R), abs(float(model.rho)), spec.s
    sign = -1 if model.rho < 0 else 1
    D = 2 * a / R
    pairs = [(i, j) for i in range(1, s + 1) for j in range(1, s + 1)]
    z1 = resolution
    while z1 < D:
        lower = max(0.0, max(2 * i / j - (i / j) ** 2 * z1 for i, j in pairs))
        upper = 2 * R * a - R * R * z1
        if lower < upper:
            z2 = 0.5 * (lower + upper)
            if _dual_ok(z1, z2, sign, R, a, s):
                return DualCertificate(z1, z2, sign)
        z1 += resolution
    return None


def exhaustive_small_lp(model: ReducedModel, spec: StencilSpec, tol: float = 1e-9) -> bool:
    """Decide kernel existence by enumerating every basic solution.

    Uses the homogeneous normalisation ``sum i^2 p = 1`` (any kernel with
    ``lam > 0`` rescales to it, and the stay-put entry absorbs the mass).
    """
    s = spec.s
    if s > 2:
        raise ValueError("exhaustive enumeration is limited to s <= 2")
    R, rho = float(model.R), float(model.rho)
    offs = [(i, j) for i in range(-s, s + 1) for j in range(-s, s + 1) if (i, j) != (0, 0)]
    A = np.array([[i * i, j * j, i * j, i, j] for i, j in offs], dtype=float).T
    b = np.array([1.0, 1.0 / R ** 2, rho / R, 0.0, 0.0])
    combos = np.array(list(itertools.combinations(range(len(offs)), 5)))
    B = np.transpose(A[:, combos], (1, 0, 2))  # (ncombos, 5, 5)
    det = np.linalg.det(B)
    ok = np.abs(det) > 1e-10
    x = np.linalg.solve(B[ok], np.broadcast_to(b, (int(ok.sum()), 5))[..., None])[..., 0]
    resid = np.abs(np.einsum("nij,nj->ni", B[ok], x) - b).max(axis=1)
    good = (x >= -tol).all(axis=1) & (resid <= tol * max(1.0, np.abs(b).max()))
    return bool(good.any())
