"""Moment-matching linear program for non-negative transition kernels.

Decision variables are the off-centre probabilities ``p_ij`` together with the
time-step scale ``lam = k/h**2``.  The moment rows are homogeneous in
``(p, lam)``, so ``max lam`` is positive exactly when a kernel exists; the
stay-put probability absorbs the remaining mass, ``p00 = 1 - sum(p)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import simplex
from .core import (
    DualCertificate,
    FeasibilityVerdict,
    ReducedModel,
    StencilSpec,
    TransitionKernel,
)
from .feasibility import dual_certificate, is_feasible

LAMBDA_TOL = 1e-9
CLIP_TOL = 1e-12

MOMENT_NAMES = ("i2", "j2", "ij", "i", "j", "mass")


def offsets(s: int) -> List[tuple]:
    """Off-centre lattice offsets of ``[-s, s]^2`` in lexicographic order."""
    return [(i, j) for i in range(-s, s + 1) for j in range(-s, s + 1) if (i, j) != (0, 0)]


@dataclass
class MomentLP:
    """Equality form ``A x = b, x >= 0`` with ``x = (p..., lam, slack)``."""

    model: ReducedModel
    s: int
    offsets: List[tuple]
    A: np.ndarray
    b: np.ndarray

    @property
    def lam_col(self) -> int:
        return len(self.offsets)

    @property
    def slack_col(self) -> int:
        return len(self.offsets) + 1


def build_moment_lp(model: ReducedModel, spec: StencilSpec) -> MomentLP:
    R, rho = float(model.R), float(model.rho)
    offs = offsets(spec.s)
    ij = np.array(offs, dtype=float)
    i, j = ij[:, 0], ij[:, 1]
    n = len(offs)
    A = np.zeros((6, n + 2))
    A[0, :n], A[0, n] = i * i, -1.0
    A[1, :n], A[1, n] = j * j, -1.0 / R ** 2
    A[2, :n], A[2, n] = i * j, -rho / R
    A[3, :n] = i
    A[4, :n] = j
    A[5, :n], A[5, n + 1] = 1.0, 1.0
    b = np.array([0, 0, 0, 0, 0, 1.0])
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite constraint coefficients")
    return MomentLP(model, spec.s, offs, A, b)


@dataclass
class KernelSolution:
    kernel: Optional[TransitionKernel]
    objective_value: float
    iterations: int
    status: str  # "optimal" | "infeasible"


def _kernel_from_vector(model, s, offs, p, lam) -> TransitionKernel:
    p = np.where((p < 0) & (p > -CLIP_TOL), 0.0, p)
    entries = {o: float(v) for o, v in zip(offs, p) if v != 0.0}
    entries[(0, 0)] = float(1.0 - p.sum())
    return TransitionKernel(float(model.R), float(model.rho), s, float(lam), entries)


def solve_kernel(model: ReducedModel, spec: StencilSpec, objective: str = "lambda-max") -> KernelSolution:
    """Solve the moment LP with the in-house simplex.

    ``lambda-max`` maximises the time-step scale.  ``compactness`` fixes
    ``lam`` at half the optimum and minimises ``sum((i**2 + j**2)**2 p_ij)``,
    pushing mass towards the centre of the stencil.
    """
    if objective not in ("lambda-max", "compactness"):
        raise ValueError(f"unknown objective {objective!r}")
    lp = build_moment_lp(model, spec)
    n = len(lp.offsets)
    c = np.zeros(n + 2)
    c[lp.lam_col] = 1.0
    res = simplex.solve(c, lp.A, lp.b)
    lam = res.x[lp.lam_col]
    if res.status != "optimal" or lam <= LAMBDA_TOL * min(1.0, float(model.R) ** 2):
        return KernelSolution(None, float(max(lam, 0.0)), res.iterations, "infeasible")
    if objective == "lambda-max":
        kernel = _kernel_from_vector(model, spec.s, lp.offsets, res.x[:n], lam)
        return KernelSolution(kernel, float(lam), res.iterations, "optimal")

    lam_fix = 0.5 * lam
    keep = [k for k in range(n + 2) if k != lp.lam_col]
    A = lp.A[:, keep]
    b = lp.b - lp.A[:, lp.lam_col] * lam_fix
    ij = np.array(lp.offsets, dtype=float)
    weights = (ij[:, 0] ** 2 + ij[:, 1] ** 2) ** 2
    c2 = np.concatenate([-weights, [0.0]])
    res2 = simplex.solve(c2, A, b)
    iters = res.iterations + res2.iterations
    if res2.status != "optimal":
        return KernelSolution(None, float(lam), iters, "infeasible")
    kernel = _kernel_from_vector(model, spec.s, lp.offsets, res2.x[:n], lam_fix)
    return KernelSolution(kernel, float(lam), iters, "optimal")


@dataclass
class MomentReport:
    sums: np.ndarray
    targets: np.ndarray
    residuals: np.ndarray
    min_entry: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "moments": {name: {"sum": float(s), "target": float(t), "residual": float(r)}
                        for name, s, t, r in zip(MOMENT_NAMES, self.sums, self.targets, self.residuals)},
            "min_entry": self.min_entry,
            "passed": self.passed,
        }


def moment_sums(kernel: TransitionKernel) -> np.ndarray:
    out = np.zeros(6)
    for (i, j), p in kernel.entries.items():
        out += p * np.array([i * i, j * j, i * j, i, j, 1.0])
    return out


def verify_kernel(kernel: TransitionKernel, model: ReducedModel, tol: float = 1e-9) -> MomentReport:
    """Compare the six moment sums of ``kernel`` with the targets of ``model``."""
    R, rho, lam = float(model.R), float(model.rho), kernel.lam
    sums = moment_sums(kernel)
    targets = np.array([lam, lam / R ** 2, lam * rho / R, 0.0, 0.0, 1.0])
    residuals = np.abs(sums - targets)
    min_entry = min(kernel.entries.values()) if kernel.entries else 0.0
    passed = bool(np.all(residuals <= tol) and min_entry >= -tol)
    return MomentReport(sums, targets, residuals, float(min_entry), passed)


@dataclass
class ConsistencyReport:
    model: ReducedModel
    s: int
    outcome: str  # agree-feasible | agree-infeasible | inconclusive | disagree
    verdict: FeasibilityVerdict
    solution: KernelSolution
    certificate: Optional[DualCertificate] = None
    notes: List[str] = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.outcome.startswith("agree")


def farkas_cross_check(model: ReducedModel, spec: StencilSpec) -> ConsistencyReport:
    """Check that exactly one of (kernel with ``lam > 0``, dual certificate) exists."""
    verdict = is_feasible(model, spec)
    sol = solve_kernel(model, spec)
    primal = sol.status == "optimal"
    if verdict.boundary:
        return ConsistencyReport(model, spec.s, "inconclusive", verdict, sol,
                                 notes=["margin inside classification band"])
    if verdict.feasible:
        if primal and verify_kernel(sol.kernel, model).passed:
            return ConsistencyReport(model, spec.s, "agree-feasible", verdict, sol)
        return ConsistencyReport(model, spec.s, "disagree", verdict, sol,
                                 notes=["dual test feasible, LP found no kernel"])
    cert = dual_certificate(model, spec)
    if primal:
        return ConsistencyReport(model, spec.s, "disagree", verdict, sol, cert,
                                 notes=["LP found a kernel despite a dual certificate"])
    return ConsistencyReport(model, spec.s, "agree-infeasible", verdict, sol, cert)


def kernel_to_json(kernel: TransitionKernel) -> str:
    """Serialise with lexicographically sorted entries, 17 significant digits."""
    entries = ",\n    ".join(
        f'{{"i": {i}, "j": {j}, "p": {p:.17g}}}' for (i, j), p in sorted(kernel.entries.items()))
    return (
        "{\n"
        f'  "R": {float(kernel.R):.17g},\n'
        f'  "rho": {float(kernel.rho):.17g},\n'
        f'  "s": {kernel.s},\n'
        f'  "lambda": {float(kernel.lam):.17g},\n'
        f'  "entries": [\n    {entries}\n  ]\n'
        "}\n"
    )


def kernel_from_json(text: str) -> TransitionKernel:
    data = json.loads(text)
    entries = {(int(e["i"]), int(e["j"])): float(e["p"]) for e in data["entries"]}
    return TransitionKernel(float(data["R"]), float(data["rho"]), int(data["s"]),
                            float(data["lambda"]), entries)
