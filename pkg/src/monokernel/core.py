"""Domain types, validation and symmetry reductions shared by all modules.

Lattice offsets are integer pairs ``(i, j)``; the first index moves along the
direction normalised to unit volatility, the second along the direction with
anisotropy ratio ``R``.  Ratios in the stencil set are kept as exact
:class:`fractions.Fraction` values so membership tests against a rational
``R`` are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational, Real
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

RATIO_RTOL = 1e-12
MARGIN_TOL = 1e-10

Offset = Tuple[int, int]


class MonokernelError(Exception):
    """Base class for errors raised by this package."""


class StencilError(MonokernelError, ValueError):
    """A closed-form stencil was requested outside its monotonicity range."""


class ConsistencyError(MonokernelError):
    """Two independent routes produced contradicting answers."""

    def __init__(self, message: str, **artifacts):
        super().__init__(message)
        self.artifacts = artifacts


class NumericDegeneracyError(MonokernelError):
    """Simplex pivot too small to be trusted."""


class DriftStepError(MonokernelError):
    """Drift donation would make the stay-put probability negative."""

    def __init__(self, message: str, admissible_k: float):
        super().__init__(message)
        self.admissible_k = admissible_k


class MonotonicityCheckError(MonokernelError):
    """The feasibility margin is not monotone in rho on the pre-scan grid."""

    def __init__(self, message: str, grid, margins):
        super().__init__(message)
        self.grid = grid
        self.margins = margins


def _is_exact(x) -> bool:
    return isinstance(x, Rational)


@dataclass(frozen=True)
class ReducedModel:
    """Local diffusion data after normalising the first volatility to one.

    ``R`` and ``rho`` may be floats or exact rationals (``int``/``Fraction``);
    when both are exact, the feasibility test runs in exact arithmetic.
    """

    R: Real
    rho: Real

    def __post_init__(self):
        if not isinstance(self.R, Real) or not isinstance(self.rho, Real):
            raise TypeError("R and rho must be real numbers")
        if not (self.R > 0) or (isinstance(self.R, float) and not math.isfinite(self.R)):
            raise ValueError(f"R must be positive and finite, got {self.R!r}")
        if not (-1 <= self.rho <= 1):
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho!r}")

    @property
    def exact(self) -> bool:
        return _is_exact(self.R) and _is_exact(self.rho)


def canonicalize(model: ReducedModel) -> Tuple[ReducedModel, bool, bool]:
    """Map ``model`` to ``R >= 1, rho >= 0``.

    Returns the canonical model with the axis-swap flag (``R < 1``) and the
    reflection flag (``rho < 0``).
    """
    swap = model.R < 1
    reflect = model.rho < 0
    R = (1 / model.R if not _is_exact(model.R) else Fraction(1) / model.R) if swap else model.R
    rho = -model.rho if reflect else model.rho
    return ReducedModel(R, rho), swap, reflect


@dataclass(frozen=True)
class StencilSpec:
    s: int
    ratios: Tuple[Tuple[int, int], ...]

    @property
    def values(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(n, d) for n, d in self.ratios)

    def floats(self) -> Tuple[float, ...]:
        return tuple(n / d for n, d in self.ratios)

    def __len__(self) -> int:
        return len(self.ratios)


@lru_cache(maxsize=None)
def ratio_set(s: int) -> StencilSpec:
    """All distinct reduced fractions ``i/j`` with ``1 <= i, j <= s``, ascending."""
    if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 1:
        raise ValueError(f"stencil radius must be a positive integer, got {s!r}")
    s = int(s)
    fracs = sorted({Fraction(i, j) for i in range(1, s + 1) for j in range(1, s + 1)})
    return StencilSpec(s, tuple((f.numerator, f.denominator) for f in fracs))


def match_ratio(R: Real, spec: StencilSpec, rtol: float = RATIO_RTOL) -> Optional[Fraction]:
    """Element of the ratio set equal to ``R``, or ``None``.

    Exact rationals are compared exactly; floats within relative ``rtol``.
    """
    if _is_exact(R):
        R = Fraction(R)
        return R if (R.numerator, R.denominator) in set(spec.ratios) else None
    for n, d in spec.ratios:
        if abs(R - n / d) <= rtol * (n / d):
            return Fraction(n, d)
    return None


@dataclass(frozen=True)
class LatticeConfig:
    h: float
    H: float
    k: float

    def __post_init__(self):
        for name in ("h", "H", "k"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def lam(self) -> float:
        return self.k / self.h ** 2


@dataclass(frozen=True)
class TransitionKernel:
    """One-step transition probabilities on ``[-s, s]^2``.

    ``entries`` maps offsets to probabilities and always includes ``(0, 0)``.
    ``R`` and ``rho`` record the model the kernel was built for.
    """

    R: float
    rho: float
    s: int
    lam: float
    entries: Dict[Offset, float] = field(default_factory=dict)

    def __post_init__(self):
        for (i, j) in self.entries:
            if max(abs(i), abs(j)) > self.s:
                raise ValueError(f"offset {(i, j)} outside radius {self.s}")

    def __getitem__(self, offset: Offset) -> float:
        return self.entries.get(offset, 0.0)

    def __iter__(self) -> Iterator[Tuple[Offset, float]]:
        return iter(sorted(self.entries.items()))

    @property
    def p00(self) -> float:
        return self.entries.get((0, 0), 0.0)

    @property
    def model(self) -> ReducedModel:
        return ReducedModel(self.R, self.rho)

    def as_array(self) -> np.ndarray:
        """Dense ``(2s+1, 2s+1)`` array indexed ``[i + s, j + s]``."""
        out = np.zeros((2 * self.s + 1, 2 * self.s + 1))
        for (i, j), p in self.entries.items():
            out[i + self.s, j + self.s] = p
        return out

    def support(self):
        return sorted(o for o, p in self.entries.items() if p != 0.0)


def reflect_kernel(kernel: TransitionKernel) -> TransitionKernel:
    """Kernel for ``-rho``: mirror the second lattice direction."""
    return TransitionKernel(kernel.R, -kernel.rho, kernel.s, kernel.lam,
                            {(i, -j): p for (i, j), p in kernel.entries.items()})


def transpose_kernel(kernel: TransitionKernel) -> TransitionKernel:
    """Kernel for ``1/R``: swap lattice axes and rescale ``lam`` by ``1/R**2``.

    Off-centre weights are unchanged, so the moments of the transposed kernel
    match the reciprocal model with ``lam' = lam / R**2``.
    """
    return TransitionKernel(1 / kernel.R, kernel.rho, kernel.s, kernel.lam / kernel.R ** 2,
                            {(j, i): p for (i, j), p in kernel.entries.items()})


@dataclass(frozen=True)
class DualCertificate:
    """Pair ``(z1, z2)`` witnessing that no non-negative kernel exists.

    With ``sign`` the sign of rho, ``y = (z1/2, z2/2, -sign, 0, 0)`` is a
    Farkas vector for the moment system.
    """

    z1: float
    z2: float
    sign: int

    def farkas_vector(self) -> np.ndarray:
        return np.array([self.z1 / 2, self.z2 / 2, -self.sign, 0.0, 0.0])

    def residuals(self, model: ReducedModel, spec: StencilSpec) -> Tuple[float, float]:
        """(min over ratios of ``xi^2 z1 - 2 xi + z2``, ``R^2 z1 - 2|rho|R + z2``)."""
        R = float(model.R)
        lower = min(x * x * self.z1 - 2 * x + self.z2 for x in spec.floats())
        strict = R * R * self.z1 - 2 * abs(float(model.rho)) * R + self.z2
        return lower, strict

    def holds(self, model: ReducedModel, spec: StencilSpec, tol: float = 1e-12) -> bool:
        lower, strict = self.residuals(model, spec)
        return self.z1 >= 0 and self.z2 >= 0 and lower >= -tol and strict < 0


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    dual_infimum: float
    threshold: float
    margin: float
    boundary: bool
