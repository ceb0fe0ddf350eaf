import numpy as np
import pytest
from conftest import gaussian_instance
from oracles import svd_nullspace

from satquant.errors import CapTooSmall, DimensionMismatch, NoCrossing, NoKernelVector
from satquant.preprocess import (
    PreprocessResult,
    preprocess_accelerated,
    preprocess_baseline,
    restricted_kernel_vector,
    saturation_step,
    verify_preprocess_contract,
)

ENGINES = ["numpy", "fast"]
METHODS = {"baseline": preprocess_baseline, "accelerated": preprocess_accelerated}


class TestRestrictedKernelVector:
    def test_row_vector(self):
        b = restricted_kernel_vector(np.array([[1.0, 1.0, 1.0]]), [0, 1])
        assert b[2] == 0.0
        np.testing.assert_allclose(b / b[0], [1.0, -1.0, 0.0], atol=1e-14)

    def test_zero_column(self):
        A0 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        b = restricted_kernel_vector(A0, [0, 1, 2])
        np.testing.assert_allclose(np.abs(b), [0.0, 0.0, 1.0], atol=1e-14)

    def test_random_residual_and_span(self, rng):
        for _ in range(25):
            A0 = rng.standard_normal((3, 5))
            b = restricted_kernel_vector(A0, [0, 1, 2, 3, 4])
            assert np.max(np.abs(b)) == pytest.approx(1.0)
            assert np.linalg.norm(A0 @ b) <= 1e-10 * np.linalg.norm(A0) * np.linalg.norm(b)
            # the oracle nullspace basis must reproduce b
            N = svd_nullspace(A0)
            proj = N @ (N.T @ b)
            np.testing.assert_allclose(proj, b, atol=1e-10)

    def test_support_restriction(self, rng):
        A0 = rng.standard_normal((2, 6))
        free = [1, 3, 5]
        b = restricted_kernel_vector(A0, free)
        assert np.all(b[[0, 2, 4]] == 0.0)
        assert np.linalg.norm(A0 @ b) <= 1e-10 * np.linalg.norm(A0) * np.linalg.norm(b)

    def test_too_few_free(self):
        with pytest.raises(NoKernelVector):
            restricted_kernel_vector(np.ones((2, 4)), [0, 1])

    def test_duplicated_columns_still_work(self):
        # duplicate columns break the invertible-block fast path but a kernel
        # vector still exists in the window
        col = np.array([[1.0], [2.0]])
        A0 = np.hstack([col, col, col, col])
        b = restricted_kernelvector = restricted_kernel_vector(A0, [0, 1, 2, 3])
        assert np.linalg.norm(A0 @ b) <= 1e-12
        assert np.max(np.abs(b)) == 1.0


class TestSaturationStep:
    def test_hand_trace(self):
        step = saturation_step(
            [0.1, 0.2, 0.3], [1.0, -1.0, 0.0], 0.3, saturated=[2]
        )
        assert step.alpha == pytest.approx(0.2, abs=1e-15)
        np.testing.assert_array_equal(step.newly_saturated, [0])
        z_new = np.array([0.1, 0.2, 0.3]) + step.alpha * step.direction
        np.testing.assert_allclose(z_new, [0.3, 0.0, 0.3], atol=1e-15)

    def test_unit_step(self):
        step = saturation_step([0.0, 0.0], [1.0, 0.0], 1.0, saturated=[])
        assert step.alpha == 1.0
        np.testing.assert_array_equal(step.newly_saturated, [0])

    def test_min_over_crossings(self):
        step = saturation_step([0.5, -0.2], [1.0, 1.0], 1.0, saturated=[])
        assert step.alpha == pytest.approx(0.5, abs=1e-15)
        z_new = np.array([0.5, -0.2]) + step.alpha * np.array([1.0, 1.0])
        np.testing.assert_allclose(z_new, [1.0, 0.3], atol=1e-15)

    def test_no_crossing(self):
        with pytest.raises(NoCrossing):
            saturation_step([0.1, 0.2], [0.0, 1.0], 1.0, saturated=[1])

    def test_never_exceeds_cap(self, rng):
        for _ in range(50):
            n = 8
            z = rng.uniform(-0.9, 0.9, n)
            b = rng.standard_normal(n)
            step = saturation_step(z, b, 1.0, saturated=np.zeros(n, bool))
            z_new = z + step.alpha * b
            assert np.max(np.abs(z_new)) <= 1.0 + 1e-12
            assert step.newly_saturated.size >= 1


@pytest.mark.parametrize("engine", ENGINES)
class TestPreprocessBaseline:
    def test_hand_trace(self, engine):
        res = preprocess_baseline([[1.0, 1.0, 1.0]], [0.1, 0.2, 0.3], 0.3, engine=engine)
        np.testing.assert_allclose(res.w_hat, [0.3, 0.0, 0.3], atol=1e-12)
        assert res.unsaturated_count() <= 1
        assert np.dot([1.0, 1.0, 1.0], res.w_hat) == pytest.approx(0.6, abs=1e-12)
        assert res.method == "baseline"

    def test_already_saturated(self, engine, rng):
        A0 = rng.standard_normal((2, 5))
        w = np.array([0.5, -0.5, 0.5, 0.5, -0.5])
        res = preprocess_baseline(A0, w, 0.5, engine=engine)
        np.testing.assert_array_equal(res.w_hat, w)
        assert res.iterations == 0

    def test_zero_column_init(self, engine):
        res = preprocess_baseline([[1.0, 0.0]], [0.2, -0.1], 0.2, engine=engine)
        np.testing.assert_array_equal(res.w_hat, [0.2, 0.2])

    def test_contract_on_random_instances(self, engine):
        for seed in range(12):
            m, n = [(2, 16), (3, 24), (8, 64)][seed % 3]
            Xt, w = gaussian_instance(seed, m, n)
            c = float(np.max(np.abs(w)))
            res = preprocess_baseline(Xt, w, c, engine=engine)
            rep = verify_preprocess_contract(Xt, w, res, c, m)
            assert rep.passed, rep
            assert res.iterations <= n - m

    def test_cap_above_weights(self, engine):
        Xt, w = gaussian_instance(5, 3, 20)
        res = preprocess_baseline(Xt, w, 2.0, engine=engine)
        rep = verify_preprocess_contract(Xt, w, res, 2.0, 3)
        assert rep.passed, rep


@pytest.mark.parametrize("engine", ENGINES)
class TestPreprocessAccelerated:
    def test_contract_matches_baseline_contract(self, engine):
        Xt, w = gaussian_instance(11, 4, 64)
        c = float(np.max(np.abs(w)))
        res = preprocess_accelerated(Xt, w, c, engine=engine)
        rep = verify_preprocess_contract(Xt, w, res, c, 4)
        assert rep.passed, rep
        assert res.iterations <= 60
        assert res.method == "accelerated"

    def test_contract_on_random_instances(self, engine):
        for seed in range(12):
            m, n = [(2, 16), (4, 32), (8, 64)][seed % 3]
            Xt, w = gaussian_instance(100 + seed, m, n)
            c = float(np.max(np.abs(w)))
            res = preprocess_accelerated(Xt, w, c, engine=engine)
            rep = verify_preprocess_contract(Xt, w, res, c, m)
            assert rep.passed, rep
            assert res.iterations <= n - m

    def test_duplicated_columns_fallback(self, engine, rng):
        # general position violated: every column duplicated
        base = rng.standard_normal((3, 8))
        A0 = np.repeat(base, 2, axis=1)
        w = rng.uniform(-1, 1, 16)
        c = float(np.max(np.abs(w)))
        res = preprocess_accelerated(A0, w, c, engine=engine)
        rep = verify_preprocess_contract(A0, w, res, c, 3)
        assert rep.passed, rep


class TestValidation:
    def test_cap_too_small(self):
        with pytest.raises(CapTooSmall):
            preprocess_baseline([[1.0, 1.0]], [0.5, 1.5], 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            preprocess_baseline([[1.0, 1.0], [1.0, 0.0]], [1.0, 1.0], 2.0)
        with pytest.raises(DimensionMismatch):
            preprocess_baseline([[1.0, 1.0, 0.0]], [1.0, 1.0], 2.0)


class TestVerifyContract:
    def test_passes_on_valid_output(self):
        Xt, w = gaussian_instance(3, 2, 12)
        c = float(np.max(np.abs(w)))
        res = preprocess_baseline(Xt, w, c)
        rep = verify_preprocess_contract(Xt, w, res, c, 2)
        assert rep.passed and rep.data_ok and rep.cap_ok and rep.sparsity_ok

    def test_perturbed_entry_fails_data_clause(self):
        Xt, w = gaussian_instance(4, 2, 12)
        c = float(np.max(np.abs(w)))
        res = preprocess_baseline(Xt, w, c)
        bad = res.w_hat.copy()
        free = np.setdiff1d(np.arange(12), res.saturated)
        bad[free[0]] += 1e-3
        fake = PreprocessResult(bad, res.saturated, res.iterations, 0.0, "baseline")
        rep = verify_preprocess_contract(Xt, w, fake, c, 2)
        assert not rep.data_ok
        assert not rep.passed

    def test_extra_unsaturated_fails_sparsity_clause(self):
        c = 1.0
        w_hat = np.array([1.0, -1.0, 0.3, 0.2, -0.1])  # 3 unsaturated, m = 2
        fake = PreprocessResult(w_hat, np.array([0, 1]), 1, 0.0, "baseline")
        rep = verify_preprocess_contract(
            np.zeros((2, 5)), w_hat, fake, c, 2
        )
        assert not rep.sparsity_ok
