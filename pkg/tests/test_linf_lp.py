import numpy as np
import pytest
from conftest import gaussian_instance
from oracles import enumerate_vertices_lp, linf_min_value_bruteforce

from satquant.errors import DegenerateTieBreaker, DimensionMismatch
from satquant import linf_lp
from satquant.linf_lp import (
    build_linf_lp,
    build_tie_break_lp,
    layer_linf_preprocess,
    linf_minimize,
    lp_solve_standard_form,
    recover_z,
    tie_break_minimize,
)


class TestStandardForm:
    def test_block_structure(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        lp = build_linf_lp(A, [1.0, 1.0])
        m, n = A.shape
        assert lp.constraints.shape == (m + n, 2 * n + 1)
        np.testing.assert_array_equal(lp.constraints[:m, :n], -A)
        np.testing.assert_array_equal(lp.constraints[:m, n : 2 * n], A)
        np.testing.assert_array_equal(lp.constraints[:m, 2 * n], np.zeros(m))
        assert lp.cost[2 * n] == 1.0 and np.all(lp.cost[: 2 * n] == 0.0)

    def test_single_variable(self):
        # min u subject to z = 1 and |z| <= u has optimum u = 1
        lp = build_linf_lp(np.array([[1.0]]), [1.0])
        sol = lp_solve_standard_form(lp)
        assert sol.objective == pytest.approx(1.0, abs=1e-10)
        assert recover_z(lp, sol.x)[0] == pytest.approx(1.0, abs=1e-10)

    def test_two_variable_average(self):
        lp = build_linf_lp(np.array([[1.0, 1.0]]), [1.0])
        sol = lp_solve_standard_form(lp)
        assert sol.objective == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(recover_z(lp, sol.x), [0.5, 0.5], atol=1e-10)

    def test_weighted_row(self):
        lp = build_linf_lp(np.array([[1.0, 2.0]]), [3.0])
        sol = lp_solve_standard_form(lp)
        assert sol.objective == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(recover_z(lp, sol.x), [1.0, 1.0], atol=1e-10)

    def test_matches_vertex_enumeration(self):
        for seed in range(30):
            g = np.random.default_rng(seed)
            m = int(g.integers(1, 4))
            n = int(g.integers(m + 1, 7))
            A = g.standard_normal((m, n))
            z0 = g.uniform(-1, 1, n)
            lp = build_linf_lp(A, A @ z0)
            sol = lp_solve_standard_form(lp)
            best, _ = enumerate_vertices_lp(lp.constraints, lp.rhs, lp.cost)
            assert sol.objective == pytest.approx(best, abs=1e-8)


class TestLinfMinimize:
    def test_spec_example(self):
        sol = linf_minimize(np.array([[1.0, 1.0]]), [0.2, 0.8])
        np.testing.assert_allclose(sol.z_star, [0.5, 0.5], atol=1e-10)
        assert sol.value == pytest.approx(0.5, abs=1e-10)
        assert sol.saturated_count == 2  # n - m + 1 = 2

    def test_already_minimal(self):
        sol = linf_minimize(np.array([[1.0, 1.0]]), [0.5, 0.5])
        assert sol.value == pytest.approx(0.5, abs=1e-10)

    def test_dominance_and_consistency(self):
        for seed in range(25):
            Xt, w = gaussian_instance(seed, 2, 8)
            sol = linf_minimize(Xt, w)
            assert sol.value <= np.max(np.abs(w)) + 1e-9
            ref = Xt @ w
            resid = np.linalg.norm(Xt @ sol.z_star - ref)
            assert resid <= 1e-8 * (1.0 + np.linalg.norm(ref))
            assert np.max(np.abs(sol.z_star)) == sol.value

    def test_saturation_count_general_position(self):
        for seed in range(30):
            Xt, w = gaussian_instance(1000 + seed, 2, 6)
            sol = linf_minimize(Xt, w)
            assert sol.saturated_count >= 5  # n - m + 1

    def test_value_against_scipy_oracle(self):
        for seed in range(20):
            g = np.random.default_rng(seed)
            m, n = 2, int(g.integers(4, 8))
            Xt = g.standard_normal((m, n))
            w = g.uniform(-1, 1, n)
            sol = linf_minimize(Xt, w)
            ref = linf_min_value_bruteforce(Xt, Xt @ w)
            assert sol.value == pytest.approx(ref, abs=1e-8)

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            linf_minimize(np.eye(3), [1.0, 2.0, 3.0])  # n == m
        with pytest.raises(DimensionMismatch):
            linf_minimize(np.ones((1, 3)), [1.0, 2.0])


class TestTieBreak:
    def test_respects_cap_and_data(self, rng):
        Xt = rng.standard_normal((2, 7))
        w = rng.uniform(-1, 1, 7)
        base = linf_minimize(Xt, w)
        cap = base.value * 1.5
        a = rng.standard_normal(7)
        sol = tie_break_minimize(Xt, w, cap, a)
        assert np.max(np.abs(sol.z_star)) <= cap
        ref = Xt @ w
        assert np.linalg.norm(Xt @ sol.z_star - ref) <= 1e-8 * (1 + np.linalg.norm(ref))

    def test_objective_optimal_against_enumeration(self, rng):
        for seed in range(10):
            g = np.random.default_rng(seed)
            Xt = g.standard_normal((2, 5))
            w = g.uniform(-1, 1, 5)
            cap = float(np.max(np.abs(w))) * 1.2
            a = g.standard_normal(5)
            lp = build_tie_break_lp(Xt, Xt @ w, cap, a)
            sol = lp_solve_standard_form(lp)
            best, _ = enumerate_vertices_lp(lp.constraints, lp.rhs, lp.cost)
            assert sol.objective == pytest.approx(best, abs=1e-8)


def replay_accepted_tie_break(Xt, w, c_hat, seed, neuron, expect_col):
    """Re-run the seeded tie-break draws to recover the accepted direction."""
    from satquant.seeding import derive_rng

    n, m = Xt.shape[1], Xt.shape[0]
    for attempt in range(8):
        a = derive_rng(seed, neuron, attempt).standard_normal(n)
        cand = tie_break_minimize(Xt, w, c_hat, a)
        if cand.value == c_hat and cand.saturated_count >= n - m:
            np.testing.assert_array_equal(cand.z_star, expect_col)
            return a
    raise AssertionError("no accepted tie-break direction found")


class TestLayerLinfPreprocess:
    def test_single_neuron_reduction(self):
        Xt, w = gaussian_instance(7, 3, 12)
        c_hat, w_hat, sols = layer_linf_preprocess(Xt, w.reshape(-1, 1), seed=1)
        base = linf_minimize(Xt, w)
        assert c_hat == pytest.approx(base.value, abs=1e-10)
        assert sols[0].saturated_count >= 12 - 3
        ref = Xt @ w
        assert np.linalg.norm(Xt @ w_hat[:, 0] - ref) <= 1e-8 * (1 + np.linalg.norm(ref))

    def test_identical_columns(self):
        Xt, w = gaussian_instance(8, 2, 9)
        W = np.column_stack([w, w])
        c_hat, w_hat, sols = layer_linf_preprocess(Xt, W, seed=2)
        for i in range(2):
            assert np.max(np.abs(w_hat[:, i])) == c_hat
            assert sols[i].saturated_count >= 9 - 2

    def test_layer_postconditions(self):
        Xt, W = gaussian_instance(9, 3, 12, n1=4)
        c_hat, w_hat, sols = layer_linf_preprocess(Xt, W, seed=3)
        assert c_hat == pytest.approx(max(linf_minimize(Xt, W[:, i]).value for i in range(4)), abs=1e-12)
        for i in range(4):
            col = w_hat[:, i]
            assert np.max(np.abs(col)) == c_hat
            assert np.count_nonzero(np.abs(col) == c_hat) >= 12 - 3
            ref = Xt @ W[:, i]
            assert np.linalg.norm(Xt @ col - ref) <= 1e-8 * (1 + np.linalg.norm(ref))

    def test_stage2_matches_auxiliary_cap_program(self):
        # the auxiliary program min ||z||_inf s.t. Xt z = Xt w*, a.z = a.w*
        # must have optimal value exactly c_hat on in-general-position data
        for seed in range(6):
            Xt, W = gaussian_instance(40 + seed, 2, 6, n1=2)
            c_hat, w_hat, sols = layer_linf_preprocess(Xt, W, seed=seed)
            for i in range(2):
                a = replay_accepted_tie_break(Xt, W[:, i], c_hat, seed, i, w_hat[:, i])
                aug = np.vstack([Xt, a])
                rhs_w = np.concatenate([Xt @ w_hat[:, i], [a @ w_hat[:, i]]])
                lp = build_linf_lp(aug, rhs_w)
                sol = lp_solve_standard_form(lp)
                assert sol.objective == pytest.approx(c_hat, abs=1e-8)

    def test_degenerate_tie_breaker_raises(self, monkeypatch):
        Xt, W = gaussian_instance(11, 2, 8, n1=1)

        def fake_tie_break(Xt_, w_, cap_, a_):
            from satquant.linf_lp import LinfSolution

            return LinfSolution(np.zeros(8), 0.0, 0, 1)

        monkeypatch.setattr(linf_lp, "tie_break_minimize", fake_tie_break)
        with pytest.raises(DegenerateTieBreaker):
            layer_linf_preprocess(Xt, W, seed=0)
