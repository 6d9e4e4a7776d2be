import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_task, seeds
from gainsched import (
    ContractViolation,
    NotPositiveDefinite,
    TaskSpec,
    contraction_factor,
    exact_gain,
    exact_gradient,
    exact_objective,
    max_stepsize,
)


class TestTaskSpec:
    def test_default_noise_variance(self):
        task = TaskSpec([1.0], [[2.0]])
        assert task.noise_variance == 1.0
        assert task.noise_floor == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            TaskSpec([1.0, 2.0], [[1.0]])

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(ContractViolation, match="symmetric"):
            TaskSpec([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]])

    def test_tiny_asymmetry_is_symmetrised(self):
        task = TaskSpec([0.0, 0.0], [[2.0, 0.5], [0.5 + 1e-14, 1.0]])
        np.testing.assert_array_equal(task.input_second_moment, task.input_second_moment.T)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite) as err:
            TaskSpec([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
        assert err.value.pivot == 1

    def test_negative_noise_rejected(self):
        with pytest.raises(ContractViolation):
            TaskSpec([0.0], [[1.0]], -0.1)


class TestExactObjective:
    def test_setup_a_at_origin(self, setup_a):
        # 0.5 + 1.5 * 9 + 0.5 * 25
        assert exact_objective(setup_a, [0.0, 0.0]) == pytest.approx(26.5, rel=1e-15)

    def test_setup_a_monte_carlo_crosscheck(self, setup_a):
        gen = np.random.default_rng(2024)
        n = 1_000_000
        x = gen.standard_normal((n, 2)) * np.sqrt([3.0, 1.0])
        y = x @ setup_a.true_weights + gen.standard_normal(n)
        sq = 0.5 * y**2
        se = sq.std() / np.sqrt(n)
        assert abs(sq.mean() - 26.5) < 4 * se

    def test_minimum_is_noise_floor(self, setup_a):
        assert exact_objective(setup_a, setup_a.true_weights) == 0.5

    def test_identity_noise_free(self):
        task = TaskSpec([0.0, 0.0], np.eye(2), 0.0)
        assert exact_objective(task, [1.0, 1.0]) == 1.0

    def test_dimension_mismatch(self, setup_a):
        with pytest.raises(ContractViolation):
            exact_objective(setup_a, [1.0, 2.0, 3.0])

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_noise_floor_is_minimum(self, seed):
        gen = np.random.default_rng(seed)
        task = random_task(gen)
        w = gen.normal(0, 3, size=task.dim)
        assert exact_objective(task, w) - task.noise_floor >= 0
        assert exact_objective(task, task.true_weights) == task.noise_floor


class TestExactGradient:
    def test_setup_a_at_origin(self, setup_a):
        np.testing.assert_array_equal(exact_gradient(setup_a, [0.0, 0.0]), [-9.0, -5.0])

    def test_zero_at_optimum(self, setup_a):
        np.testing.assert_array_equal(exact_gradient(setup_a, setup_a.true_weights), [0.0, 0.0])

    def test_identity(self):
        task = TaskSpec([1.0, 0.0], np.eye(2))
        np.testing.assert_array_equal(exact_gradient(task, [2.0, 0.0]), [1.0, 0.0])

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_matches_central_differences(self, seed):
        gen = np.random.default_rng(seed)
        task = random_task(gen)
        w = gen.normal(0, 3, size=task.dim)
        h = 1e-5
        fd = np.array(
            [
                (exact_objective(task, w + h * e) - exact_objective(task, w - h * e)) / (2 * h)
                for e in np.eye(task.dim)
            ]
        )
        g = exact_gradient(task, w)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(g).max()))


class TestExactGain:
    def test_setup_a_example(self, setup_a):
        gain = exact_gain(setup_a, [0.0, 0.0], [-9.0, -5.0], 0.1)
        assert gain == pytest.approx(-9.26, rel=1e-12)
        # independent route: difference of objectives, 17.24 - 26.5
        direct = exact_objective(setup_a, [0.9, 0.5]) - exact_objective(setup_a, [0.0, 0.0])
        assert direct == pytest.approx(17.24 - 26.5, rel=1e-12)
        assert gain == pytest.approx(direct, rel=1e-12)

    def test_zero_update(self, setup_a):
        assert exact_gain(setup_a, [1.0, -1.0], [0.0, 0.0], 0.3) == 0.0

    def test_moving_away_from_optimum_costs(self, setup_a):
        g = np.array([1.0, -2.0])
        expected = 0.5 * 0.2**2 * g @ setup_a.input_second_moment @ g
        assert exact_gain(setup_a, setup_a.true_weights, g, 0.2) == pytest.approx(expected, rel=1e-14)
        assert expected > 0

    def test_rejects_nonpositive_stepsize(self, setup_a):
        with pytest.raises(ContractViolation):
            exact_gain(setup_a, [0.0, 0.0], [1.0, 1.0], 0.0)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_quadratic_exactness(self, seed):
        gen = np.random.default_rng(seed)
        task = random_task(gen)
        w = gen.normal(0, 3, size=task.dim)
        g = gen.normal(0, 3, size=task.dim)
        eps = float(gen.uniform(0.01, 1.0))
        direct = exact_objective(task, w - eps * g) - exact_objective(task, w)
        scale = max(abs(direct), exact_objective(task, w))
        assert abs(exact_gain(task, w, g, eps) - direct) <= 1e-9 * scale


class TestContraction:
    def test_setup_a(self, setup_a):
        info = contraction_factor(setup_a, 0.1)
        np.testing.assert_allclose(info.eigenvalues, [1.0, 3.0])
        assert info.contraction == pytest.approx(0.81, rel=1e-14)
        np.testing.assert_array_equal(info.half_moment, np.diag([1.5, 0.5]))

    def test_boundary(self, setup_a):
        assert contraction_factor(setup_a, 2.0 / 3.0).contraction == pytest.approx(1.0, rel=1e-14)

    def test_identity_one_step(self):
        assert contraction_factor(TaskSpec([0.0, 0.0, 0.0], np.eye(3)), 1.0).contraction == 0.0

    @pytest.mark.parametrize(
        "h, expected",
        [(np.diag([3.0, 1.0]), 2.0 / 3.0), (np.eye(2), 2.0), (np.diag([10.0, 1.0]), 0.2)],
    )
    def test_max_stepsize(self, h, expected):
        assert max_stepsize(TaskSpec([0.0, 0.0], h)) == pytest.approx(expected, rel=1e-14)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_admissible_stepsizes_contract(self, seed):
        gen = np.random.default_rng(seed)
        task = random_task(gen)
        eps = float(gen.uniform(0.001, 0.999)) * max_stepsize(task)
        assert contraction_factor(task, eps).contraction < 1

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_gradient_descent_contracts(self, seed):
        gen = np.random.default_rng(seed)
        task = random_task(gen)
        eps = float(gen.uniform(0.05, 0.95)) * max_stepsize(task)
        rho = contraction_factor(task, eps).contraction
        w = gen.normal(0, 3, size=task.dim)

        def gap(w):
            # direct quadratic form; J(w) - J(w*) by subtraction cancels badly near w*
            e = w - task.true_weights
            return 0.5 * e @ task.input_second_moment @ e

        gap0 = gap(w)
        k = 0
        # stop before the iterate error reaches float resolution of w
        while rho ** (k + 1) > 1e-8 and k < 60:
            k += 1
            w = w - eps * exact_gradient(task, w)
            assert gap(w) <= rho**k * gap0 * (1 + 1e-9)
