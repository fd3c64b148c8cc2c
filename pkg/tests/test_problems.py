import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorpd.linops import DimensionMismatchError, SparseOperator
from anchorpd.problems import (
    FeasibilityError,
    game_gap,
    game_residual,
    gen_lasso,
    gen_matrix_game,
    lasso_objective,
    load_instance,
    project_simplex,
    prox_gstar_lasso,
    save_instance,
    soft_threshold,
)
from oracles import enumerate_saddle, fsum_dot, project_simplex_enum, soft_threshold_grid_1d

finite_floats = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


class TestProjectSimplex:
    def test_already_feasible(self):
        np.testing.assert_allclose(project_simplex([0.5, 0.5]), [0.5, 0.5], atol=0)

    def test_two_dim_kkt_by_hand(self):
        # unconstrained shift of (2, 0) gives (1.5, -0.5); clipping forces (1, 0)
        np.testing.assert_allclose(project_simplex([2.0, 0.0]), [1.0, 0.0], atol=1e-15)

    def test_against_active_set_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            dim = int(rng.integers(1, 7))
            y = rng.uniform(-3.0, 3.0, dim)
            np.testing.assert_allclose(project_simplex(y), project_simplex_enum(y),
                                       atol=1e-10)

    @given(st.lists(finite_floats, min_size=1, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_feasibility_and_idempotence(self, entries):
        x = project_simplex(entries)
        assert np.all(x >= 0)
        assert abs(x.sum() - 1.0) <= 1e-10
        np.testing.assert_allclose(project_simplex(x), x, atol=1e-12)

    def test_firmly_nonexpansive(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            dim = int(rng.integers(1, 10))
            x = rng.normal(size=dim) * 3
            y = rng.normal(size=dim) * 3
            px, py = project_simplex(x), project_simplex(y)
            lhs = np.sum((px - py) ** 2) + np.sum(((x - px) - (y - py)) ** 2)
            assert lhs <= np.sum((x - y) ** 2) + 1e-10

    def test_tie_handling_does_not_change_value(self):
        y = np.array([1.0, 1.0, 1.0, -2.0])
        np.testing.assert_allclose(project_simplex(y), project_simplex_enum(y), atol=1e-12)

    def test_empty_vector(self):
        with pytest.raises(DimensionMismatchError):
            project_simplex(np.zeros(0))


class TestGameMetrics:
    def test_zero_matrix_gap(self):
        inst = gen_matrix_game("uniform_pm1", 1, dims=(3, 3))
        zero = type(inst.K)(np.zeros((3, 3)))
        u = np.full(3, 1 / 3)
        assert game_gap(u, u, zero) == 0.0
        assert game_residual(u, u, zero) == 0.0

    def test_symmetric_two_by_two_saddle(self):
        from anchorpd.linops import DenseOperator
        K = DenseOperator([[1.0, -1.0], [-1.0, 1.0]])
        u = v = np.array([0.5, 0.5])
        assert game_gap(u, v, K) == pytest.approx(0.0, abs=1e-12)
        assert game_residual(u, v, K) == pytest.approx(0.0, abs=1e-12)

    def test_gap_nonnegative_against_lp_enumeration(self):
        from anchorpd.linops import DenseOperator
        rng = np.random.default_rng(44)
        for _ in range(10):
            kd = rng.uniform(-1.0, 1.0, (3, 3))
            K = DenseOperator(kd)
            _, _, value = enumerate_saddle(kd)
            for _ in range(10):
                u = project_simplex(rng.normal(size=3))
                v = project_simplex(rng.normal(size=3))
                gap = game_gap(u, v, K)
                assert gap >= -1e-9
                # weak duality against the enumerated value
                assert np.max(kd @ u) >= value - 1e-9
                assert np.min(kd.T @ v) <= value + 1e-9

    def test_residual_and_gap_vanish_together_at_saddle(self):
        from anchorpd.linops import DenseOperator
        rng = np.random.default_rng(45)
        for dim in (2, 3):
            kd = rng.uniform(-1.0, 1.0, (dim, dim))
            u, v, _ = enumerate_saddle(kd)
            K = DenseOperator(kd)
            assert game_gap(u, v, K) <= 1e-8
            assert game_residual(u, v, K) <= 1e-8

    def test_residual_recomputation(self):
        from anchorpd.linops import DenseOperator
        rng = np.random.default_rng(46)
        kd = rng.normal(size=(4, 5))
        K = DenseOperator(kd)
        u = rng.normal(size=5)
        v = rng.normal(size=4)
        # separate code path composing the two projections
        ru = u - project_simplex(u - kd.T @ v)
        rv = v - project_simplex(v + kd @ u)
        expected = math.sqrt(fsum_dot(ru, ru) + fsum_dot(rv, rv))
        assert game_residual(u, v, K) == pytest.approx(expected, rel=1e-12)

    def test_infeasible_inputs_rejected(self):
        from anchorpd.linops import DenseOperator
        K = DenseOperator(np.eye(2))
        with pytest.raises(FeasibilityError):
            game_gap(np.array([0.7, 0.7]), np.array([0.5, 0.5]), K)


class TestGameGenerators:
    def test_determinism(self):
        for variant in ("uniform_pm1", "sparse_uniform"):
            a = gen_matrix_game(variant, 50)
            b = gen_matrix_game(variant, 50)
            np.testing.assert_array_equal(a.K.to_dense(), b.K.to_dense())

    def test_default_dims(self):
        assert gen_matrix_game("uniform_pm1", 1, dims=(5, 4)).K.to_dense().shape == (5, 4)
        inst = gen_matrix_game("normal0_10", 2, dims=(50, 50))
        assert (inst.p, inst.q) == (50, 50)

    def test_sparse_nonzero_count_exact(self):
        inst = gen_matrix_game("sparse_uniform", 50, dims=(100, 50))
        assert isinstance(inst.K, SparseOperator)
        assert inst.K.nnz == round(0.10 * 100 * 50)
        dense = inst.K.to_dense()
        assert np.count_nonzero(dense) == inst.K.nnz
        values = dense[dense != 0]
        assert np.all((values >= 0) & (values <= 1))

    def test_uniform_entries_distribution(self):
        inst = gen_matrix_game("uniform_pm1", 50)
        entries = inst.K.to_dense().ravel()
        assert entries.size == 10_000
        assert np.all((entries >= -1.0) & (entries <= 1.0))
        assert abs(entries.mean()) < 0.05

    def test_normal_variants_scale(self):
        narrow = gen_matrix_game("normal01", 9, dims=(60, 60)).K.to_dense()
        wide = gen_matrix_game("normal0_10", 9, dims=(60, 60)).K.to_dense()
        # second parameter is the standard deviation
        assert 0.9 < narrow.std() < 1.1
        assert 9.0 < wide.std() < 11.0

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            gen_matrix_game("bogus", 1)


class TestSoftThreshold:
    def test_closed_form(self):
        np.testing.assert_allclose(soft_threshold([3.0], 1.0), [2.0], atol=0)

    def test_zero_threshold_is_identity(self):
        y = np.array([0.3, -2.0, 0.0])
        np.testing.assert_array_equal(soft_threshold(y, 0.0), y)

    def test_against_grid_oracle(self):
        rng = np.random.default_rng(47)
        for _ in range(20):
            y = float(rng.uniform(-5, 5))
            theta = float(rng.uniform(0, 3))
            ours = soft_threshold(np.array([y]), theta)[0]
            assert abs(ours - soft_threshold_grid_1d(y, theta)) <= 1e-6

    @given(finite_floats, st.floats(min_value=0.0, max_value=20.0, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_prox_inequality(self, y, theta):
        # prox optimality: the output beats every competitor on the prox objective
        x = float(soft_threshold(np.array([y]), theta)[0])
        obj = theta * abs(x) + 0.5 * (x - y) ** 2
        for competitor in (0.0, y, y - theta, y + theta, x + 1e-3, x - 1e-3):
            alt = theta * abs(competitor) + 0.5 * (competitor - y) ** 2
            assert obj <= alt + 1e-12

    def test_firmly_nonexpansive(self):
        rng = np.random.default_rng(48)
        for _ in range(100):
            x = rng.normal(size=6) * 4
            y = rng.normal(size=6) * 4
            theta = float(rng.uniform(0, 2))
            px, py = soft_threshold(x, theta), soft_threshold(y, theta)
            lhs = np.sum((px - py) ** 2) + np.sum(((x - px) - (y - py)) ** 2)
            assert lhs <= np.sum((x - y) ** 2) + 1e-10


class TestProxGstar:
    def test_pure_quadratic(self):
        np.testing.assert_allclose(
            prox_gstar_lasso(np.array([2.0]), 1.0, np.array([0.0])), [1.0], atol=0)

    def test_vanishing_numerator(self):
        b = np.array([1.5, -2.0])
        np.testing.assert_allclose(prox_gstar_lasso(2.0 * b, 2.0, b), [0.0, 0.0], atol=0)

    def test_resolvent_identity(self):
        rng = np.random.default_rng(49)
        for _ in range(50):
            dim = int(rng.integers(1, 8))
            y = rng.normal(size=dim)
            b = rng.normal(size=dim)
            sigma = float(rng.uniform(0.1, 5.0))
            x = prox_gstar_lasso(y, sigma, b)
            # y - x must equal sigma * (x + b), the gradient of sigma*g* at x
            np.testing.assert_allclose(y - x, sigma * (x + b), atol=1e-12)

    def test_firmly_nonexpansive(self):
        rng = np.random.default_rng(50)
        b = rng.normal(size=5)
        for _ in range(100):
            x = rng.normal(size=5) * 3
            y = rng.normal(size=5) * 3
            sigma = float(rng.uniform(0.1, 4.0))
            px = prox_gstar_lasso(x, sigma, b)
            py = prox_gstar_lasso(y, sigma, b)
            lhs = np.sum((px - py) ** 2) + np.sum(((x - px) - (y - py)) ** 2)
            assert lhs <= np.sum((x - y) ** 2) + 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            prox_gstar_lasso(np.zeros(3), 1.0, np.zeros(2))


class TestLassoObjective:
    def test_zero_point(self):
        inst = gen_lasso("gaussian", dims=(10, 5, 2), seed=3)
        assert lasso_objective(np.zeros(10), inst) == pytest.approx(
            0.5 * float(inst.b @ inst.b))

    def test_identity_design_by_hand(self):
        from anchorpd.linops import DenseOperator
        from anchorpd.problems import LassoInstance
        inst = LassoInstance(K=DenseOperator(np.eye(3)), b=np.zeros(3), mu=1.0,
                             u_star=np.array([1.0, 0.0, 0.0]), s=1,
                             variant="gaussian", corr_v=None, seed=0)
        u = np.array([1.0, 0.0, 0.0])
        assert lasso_objective(u, inst) == pytest.approx(1.5)

    def test_against_compensated_recomputation(self):
        inst = gen_lasso("gaussian", dims=(30, 12, 4), seed=5)
        rng = np.random.default_rng(51)
        u = rng.normal(size=30)
        r = inst.K.to_dense() @ u - inst.b
        expected = 0.5 * fsum_dot(r, r) + inst.mu * math.fsum(abs(x) for x in u)
        assert lasso_objective(u, inst) == pytest.approx(expected, rel=1e-10)


class TestLassoGenerator:
    def test_support_size_exact(self):
        inst = gen_lasso("gaussian", dims=(200, 100, 10), seed=100)
        assert np.count_nonzero(inst.u_star) == 10

    def test_planted_objective_consistency(self):
        inst = gen_lasso("gaussian", dims=(200, 100, 10), seed=100)
        noise = inst.b - inst.K.apply(inst.u_star)
        expected = 0.5 * float(noise @ noise) + inst.mu * float(np.abs(inst.u_star).sum())
        assert lasso_objective(inst.u_star, inst) == pytest.approx(expected, rel=1e-10)
        # noise scale matches the N(0, 0.1) draw
        assert noise.std() < 0.2

    def test_correlated_with_zero_v_reduces_to_gaussian(self):
        base = gen_lasso("gaussian", dims=(20, 10, 3), seed=6)
        chained = gen_lasso("correlated", dims=(20, 10, 3), corr_v=0.0, seed=6)
        np.testing.assert_allclose(chained.K.to_dense(), base.K.to_dense(), atol=0)

    def test_column_correlation_matches_recursion_parameter(self):
        v = 0.5
        inst = gen_lasso("correlated", dims=(8, 10_000, 2), corr_v=v, seed=7)
        kd = inst.K.to_dense()
        corrs = [np.corrcoef(kd[:, j], kd[:, j - 1])[0, 1] for j in range(1, 8)]
        # independently generated reference chain, same law
        rng = np.random.default_rng(123456)
        a = rng.normal(size=(10_000, 8))
        ref = np.empty_like(a)
        ref[:, 0] = a[:, 0] / math.sqrt(1 - v**2)
        for j in range(1, 8):
            ref[:, j] = v * ref[:, j - 1] + a[:, j]
        ref_corrs = [np.corrcoef(ref[:, j], ref[:, j - 1])[0, 1] for j in range(1, 8)]
        assert abs(np.mean(corrs) - v) < 0.05
        assert abs(np.mean(corrs) - np.mean(ref_corrs)) < 0.05

    def test_determinism(self):
        a = gen_lasso("gaussian", dims=(50, 20, 5), seed=8)
        b = gen_lasso("gaussian", dims=(50, 20, 5), seed=8)
        np.testing.assert_array_equal(a.K.to_dense(), b.K.to_dense())
        np.testing.assert_array_equal(a.b, b.b)
        np.testing.assert_array_equal(a.u_star, b.u_star)

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_lasso("gaussian", dims=(10, 5, 11), seed=1)
        with pytest.raises(ValueError):
            gen_lasso("gaussian", dims=(10, 5, 2), mu=0.0, seed=1)
        with pytest.raises(ValueError):
            gen_lasso("gaussian", dims=(10, 5, 2), corr_v=0.5, seed=1)


class TestInstanceSerialization:
    def test_game_round_trip(self, tmp_path):
        inst = gen_matrix_game("uniform_pm1", 50, dims=(6, 4))
        path = tmp_path / "game.txt"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert (loaded.variant, loaded.seed) == ("uniform_pm1", 50)
        np.testing.assert_array_equal(loaded.K.to_dense(), inst.K.to_dense())

    def test_sparse_game_round_trip(self, tmp_path):
        inst = gen_matrix_game("sparse_uniform", 50, dims=(20, 10))
        path = tmp_path / "sparse.txt"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert isinstance(loaded.K, SparseOperator)
        np.testing.assert_array_equal(loaded.K.to_dense(), inst.K.to_dense())

    def test_lasso_round_trip(self, tmp_path):
        inst = gen_lasso("correlated", dims=(12, 8, 3), corr_v=0.25, seed=9)
        path = tmp_path / "lasso.txt"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert loaded.mu == inst.mu
        assert loaded.corr_v == inst.corr_v
        assert loaded.s == inst.s
        np.testing.assert_array_equal(loaded.K.to_dense(), inst.K.to_dense())
        np.testing.assert_array_equal(loaded.b, inst.b)
        np.testing.assert_array_equal(loaded.u_star, inst.u_star)
