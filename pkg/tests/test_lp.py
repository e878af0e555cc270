import json

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from monokernel import simplex
from monokernel.core import NumericDegeneracyError, ReducedModel, TransitionKernel, ratio_set
from monokernel.feasibility import is_feasible
from monokernel.lp import (
    build_moment_lp,
    farkas_cross_check,
    kernel_from_json,
    kernel_to_json,
    solve_kernel,
    verify_kernel,
)
from monokernel.oracle import exhaustive_small_lp
from monokernel.stencils import seven_point

from conftest import models


class TestSimplex:
    def test_textbook_max(self):
        # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        A = [[1, 0, 1, 0, 0], [0, 2, 0, 1, 0], [3, 2, 0, 0, 1]]
        res = simplex.solve([3, 5, 0, 0, 0], A, [4, 12, 18])
        assert res.status == "optimal"
        assert res.objective == pytest.approx(36)
        assert res.x[:2] == pytest.approx([2, 6])

    def test_phase_one_with_negative_rhs(self):
        # min x + y s.t. x + 2y >= 4, 3x + y >= 6 -> (8/5, 6/5)
        A = [[1, 2, -1, 0], [3, 1, 0, -1]]
        res = simplex.solve([-1, -1, 0, 0], A, [4, 6])
        assert res.status == "optimal"
        assert res.x[:2] == pytest.approx([1.6, 1.2])

    def test_infeasible(self):
        res = simplex.solve([1, 0], [[1, 1]], [-1])
        assert res.status == "infeasible"

    def test_unbounded(self):
        res = simplex.solve([1, 0], [[1, -1]], [0])
        assert res.status == "unbounded"

    def test_redundant_rows(self):
        A = [[1, 1, 0], [2, 2, 0], [0, 1, 1]]
        res = simplex.solve([1, 0, 0], A, [1, 2, 1])
        assert res.status == "optimal" and res.objective == pytest.approx(1)

    def test_cycling_example_terminates(self):
        # Chvatal's cycling LP (cycles under the largest-coefficient rule); optimum 1 at x1 = x3 = 1
        A = [[0.5, -5.5, -2.5, 9, 1, 0, 0],
             [0.5, -1.5, -0.5, 1, 0, 1, 0],
             [1, 0, 0, 0, 0, 0, 1]]
        res = simplex.solve([10, -57, -9, -24, 0, 0, 0], A, [0, 0, 1])
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0)
        assert res.x[:4] == pytest.approx([1, 0, 1, 0])

    def test_tiny_pivot_raises(self):
        T = np.array([[1e-13, 1.0, 1.0], [0.0, 0.0, 0.0]])
        with pytest.raises(NumericDegeneracyError):
            simplex._pivot(T, [1], 0, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31))
    def test_random_lps_match_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        m, n = 2, 5
        A = rng.integers(-3, 4, (m, n)).astype(float)
        b = rng.integers(0, 4, m).astype(float)
        c = rng.integers(-3, 4, n).astype(float)
        # bound the feasible set: sum x <= 10 via a slack
        A = np.vstack([np.hstack([A, np.zeros((m, 1))]), np.hstack([np.ones(n), [1.0]])])
        b = np.append(b, 10.0)
        c = np.append(c, 0.0)
        res = simplex.solve(c, A, b)
        # brute force over all bases
        import itertools
        best = None
        for cols in itertools.combinations(range(n + 1), m + 1):
            B = A[:, cols]
            if abs(np.linalg.det(B)) < 1e-9:
                continue
            x = np.linalg.solve(B, b)
            if (x >= -1e-9).all():
                val = c[list(cols)] @ x
                best = val if best is None else max(best, val)
        if best is None:
            assert res.status == "infeasible"
        else:
            assert res.status == "optimal"
            assert res.objective == pytest.approx(best, abs=1e-8)


def test_moment_lp_shape():
    lp = build_moment_lp(ReducedModel(2.0, 0.3), ratio_set(3))
    assert lp.A.shape == (6, 48 + 2)
    assert np.isfinite(lp.A).all()
    assert lp.b.tolist() == [0, 0, 0, 0, 0, 1]


def test_solve_diagonal_walk():
    sol = solve_kernel(ReducedModel(1.0, 1.0), ratio_set(1))
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-12)
    k = sol.kernel
    assert k[(1, 1)] == pytest.approx(0.5) and k[(-1, -1)] == pytest.approx(0.5)
    assert sum(p for o, p in k.entries.items() if o not in {(1, 1), (-1, -1)}) == pytest.approx(0, abs=1e-12)


def test_solve_uncorrelated():
    sol = solve_kernel(ReducedModel(1.0, 0.0), ratio_set(1))
    assert sol.objective_value == pytest.approx(1.0, abs=1e-12)
    # the four-diagonal kernel attains lam = 1 too
    diag = TransitionKernel(1.0, 0.0, 1, 1.0, {(1, 1): .25, (1, -1): .25, (-1, 1): .25, (-1, -1): .25, (0, 0): 0.0})
    assert verify_kernel(diag, ReducedModel(1.0, 0.0)).passed


def test_solve_infeasible_and_wide():
    assert solve_kernel(ReducedModel(2.0, 0.6), ratio_set(1)).status == "infeasible"
    sol = solve_kernel(ReducedModel(2.0, 0.99), ratio_set(2))
    assert sol.status == "optimal" and sol.objective_value > 0
    assert verify_kernel(sol.kernel, ReducedModel(2.0, 0.99)).residuals.max() <= 1e-9


@pytest.mark.parametrize("R, rho, s", [(2.0, 0.5, 3), (0.3, -0.2, 2), (1.7, 0.95, 4)])
def test_compactness_objective(R, rho, s):
    model, spec = ReducedModel(R, rho), ratio_set(s)
    best = solve_kernel(model, spec)
    sol = solve_kernel(model, spec, "compactness")
    assert sol.status == "optimal"
    assert sol.kernel.lam == pytest.approx(best.objective_value / 2)
    assert verify_kernel(sol.kernel, model).passed
    w = lambda k: sum((i * i + j * j) ** 2 * p for (i, j), p in k.entries.items())
    assert w(sol.kernel) <= w(best.kernel) / 2 + 1e-9


def test_unknown_objective():
    with pytest.raises(ValueError):
        solve_kernel(ReducedModel(1.0, 0.0), ratio_set(1), "fastest")


@settings(max_examples=60, deadline=None)
@given(models, st.integers(1, 6))
def test_lp_agrees_with_dual(model, s):
    spec = ratio_set(s)
    v = is_feasible(model, spec)
    assume(not v.boundary)
    sol = solve_kernel(model, spec)
    assert (sol.status == "optimal") == v.feasible
    if sol.kernel is not None:
        rep = verify_kernel(sol.kernel, model)
        assert rep.passed, rep.as_dict()
        # scaling homogeneity: the halved kernel is also admissible
        half = TransitionKernel(sol.kernel.R, sol.kernel.rho, s, sol.kernel.lam / 2,
                                {o: (p / 2 if o != (0, 0) else 0.5 + p / 2) for o, p in sol.kernel.entries.items()})
        assert verify_kernel(half, model).passed


def test_verify_kernel_reports():
    k = seven_point(ReducedModel(1.0, 0.5))
    rep = verify_kernel(k, ReducedModel(1.0, 0.5))
    assert rep.passed and rep.residuals.max() <= 1e-15
    bad = TransitionKernel(k.R, k.rho, k.s, k.lam, {**k.entries, (1, 0): k[(1, 0)] + 1e-3})
    rep = verify_kernel(bad, ReducedModel(1.0, 0.5))
    assert not rep.passed
    assert rep.residuals[0] == pytest.approx(1e-3) and rep.residuals[3] == pytest.approx(1e-3)
    d = rep.as_dict()
    assert set(d["moments"]) == {"i2", "j2", "ij", "i", "j", "mass"}


@pytest.mark.parametrize("R, rho, s, outcome", [
    (2.0, 0.4, 1, "agree-feasible"),
    (2.0, 0.6, 1, "agree-infeasible"),
    (5.0, 1.0, 5, "agree-feasible"),
    (2.0, 0.5 + 1e-13, 1, "inconclusive"),
])
def test_farkas_cross_check(R, rho, s, outcome):
    rep = farkas_cross_check(ReducedModel(R, rho), ratio_set(s))
    assert rep.outcome == outcome
    if outcome == "agree-infeasible":
        assert rep.certificate is not None


@pytest.mark.parametrize("R, rho, s", [(1, 1, 1), (2, 0.6, 1), (2, 0.9, 2), (2, 0.4, 1), (0.7, -0.65, 2),
                                       (3.1, 0.2, 2)])
def test_lp_vs_exhaustive(R, rho, s):
    model, spec = ReducedModel(R, rho), ratio_set(s)
    assert exhaustive_small_lp(model, spec) == (solve_kernel(model, spec).status == "optimal")


def test_kernel_json_roundtrip():
    k = solve_kernel(ReducedModel(2.0, 0.99), ratio_set(2)).kernel
    text = kernel_to_json(k)
    data = json.loads(text)
    assert set(data) == {"R", "rho", "s", "lambda", "entries"}
    keys = [(e["i"], e["j"]) for e in data["entries"]]
    assert keys == sorted(keys) and (0, 0) in keys
    back = kernel_from_json(text)
    assert back.entries == k.entries and back.lam == k.lam and back.s == k.s
    assert '"p": 0.' in text or '"p": 1' in text
