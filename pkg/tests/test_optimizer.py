import numpy as np
import pytest

from convadl.model import Hyperparams, one_hot_encode
from convadl.optimizer import TrainState, objective, project_atoms, \
    soft_threshold, step_code_classifier, step_code_fidelity, train, \
    update_classifier, update_dictionary
from convadl.patching import ConvGeometry, from_bar, view_bar, view_hat, \
    view_tilde

from reference_impl import ref_init, ref_iteration, ref_objective

# Tiny instance shared by the oracle tests: m=2, n=3, p=2, atom_len=4, C=2.
TINY_GEOM = ConvGeometry(4, 2, 2, 2, 2, 2)


def tiny_instance(seed=0):
    rng = np.random.default_rng(seed)
    n = 3
    xbar = rng.standard_normal((TINY_GEOM.atom_len, n * TINY_GEOM.patch_count))
    y = one_hot_encode(["a", "b", "a"], ["a", "b"])
    return xbar, y, n


class TestSoftThreshold:
    def test_shrinkage(self):
        assert soft_threshold(np.array([[1.2]]), 0.5)[0, 0] == pytest.approx(0.7)
        assert soft_threshold(np.array([[-0.3]]), 0.5)[0, 0] == 0.0

    def test_zero_threshold_is_identity(self):
        x = np.random.default_rng(0).standard_normal((3, 4))
        assert np.array_equal(soft_threshold(x, 0.0), x)

    def test_zero_stays_zero_and_magnitude_shrinks(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((5, 5))
        x[0, 0] = 0.0
        out = soft_threshold(x, 0.3)
        assert out[0, 0] == 0.0
        assert np.all(np.abs(out) <= np.abs(x))

    def test_magnitude_reduced_by_exactly_min_abs_theta(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((6, 6))
        theta = 0.4
        out = soft_threshold(x, theta)
        reduction = np.abs(x) - np.abs(out)
        assert np.allclose(reduction, np.minimum(np.abs(x), theta), atol=1e-15)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            soft_threshold(np.zeros((1, 1)), -0.1)

    def test_matches_grid_search_prox(self):
        # tau_theta(v) minimizes 0.5*(z - v)^2 + theta*|z|.
        rng = np.random.default_rng(2)
        for _ in range(25):
            v = float(rng.uniform(-3, 3))
            theta = float(rng.uniform(0, 1.5))
            span = abs(v) + theta + 0.5
            grid = np.arange(-span, span, 1e-4)
            values = 0.5 * (grid - v) ** 2 + theta * np.abs(grid)
            best = grid[np.argmin(values)]
            out = soft_threshold(np.array([[v]]), theta)[0, 0]
            assert abs(out - best) <= 2e-4


class TestObjective:
    def test_zero_model_counts_one_per_sample(self):
        xbar, y, n = tiny_instance()
        hp = Hyperparams(lambda2=0.8)
        code = np.zeros((TINY_GEOM.patch_count, n, 2))
        omega = np.zeros((2, TINY_GEOM.atom_len))
        w = np.zeros((2, 2 * TINY_GEOM.patch_count))
        # only the label term survives; each one-hot column contributes 1
        assert objective(xbar, omega, code, w, y, hp) == pytest.approx(0.5 * 0.8 * n)

    def test_warm_codes_leave_only_dictionary_ridge(self):
        xbar, y, n = tiny_instance(3)
        rng = np.random.default_rng(5)
        omega = rng.standard_normal((2, TINY_GEOM.atom_len))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        code = from_bar(omega @ xbar, TINY_GEOM.patch_count, n, 2)
        w = np.zeros((2, 2 * TINY_GEOM.patch_count))
        hp = Hyperparams(lambda1=0.0, lambda2=0.0, lambda4=0.3)
        expected = 0.5 * 0.3 * np.sum(omega ** 2)
        assert objective(xbar, omega, code, w, y, hp) == pytest.approx(expected)

    def test_matches_term_by_term_script(self):
        xbar, y, n = tiny_instance(7)
        rng = np.random.default_rng(8)
        p, m = TINY_GEOM.patch_count, 2
        omega = 0.5 * rng.standard_normal((m, TINY_GEOM.atom_len))
        code = rng.standard_normal((p, n, m))
        w = rng.standard_normal((2, m * p))
        hp = Hyperparams(lambda1=0.02, lambda2=0.3, lambda3=0.15, lambda4=0.25)
        expected = ref_objective(xbar, omega, code, w, y,
                                 hp.lambda1, hp.lambda2, hp.lambda3, hp.lambda4)
        got = objective(xbar, omega, code, w, y, hp)
        assert abs(got - expected) <= 1e-10 * max(1.0, abs(expected))


class TestCodeSteps:
    def test_fidelity_zero_step(self):
        xbar, _, n = tiny_instance()
        rng = np.random.default_rng(1)
        omega = rng.standard_normal((2, TINY_GEOM.atom_len))
        ubar = rng.standard_normal((2, n * TINY_GEOM.patch_count))
        assert np.array_equal(step_code_fidelity(ubar, omega, xbar, 0.0), ubar)

    def test_fidelity_full_step_lands_on_responses(self):
        xbar, _, n = tiny_instance()
        rng = np.random.default_rng(2)
        omega = rng.standard_normal((2, TINY_GEOM.atom_len))
        ubar = rng.standard_normal((2, n * TINY_GEOM.patch_count))
        assert np.allclose(step_code_fidelity(ubar, omega, xbar, 1.0),
                           omega @ xbar, atol=1e-15)

    def test_fidelity_midpoint(self):
        out = step_code_fidelity(np.array([[2.0]]), np.array([[0.0]]),
                                 np.array([[1.0]]), 0.5)
        assert out[0, 0] == 1.0

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(ValueError):
            step_code_fidelity(np.ones((2, 3)), np.ones((2, 4)),
                               np.ones((4, 5)), 0.1)

    def test_classifier_step_zero_w_is_identity(self):
        rng = np.random.default_rng(3)
        utilde = rng.standard_normal((6, 4))
        y = rng.standard_normal((2, 4))
        out = step_code_classifier(utilde, np.zeros((2, 6)), y, 0.5, 0.7)
        assert np.array_equal(out, utilde)

    def test_classifier_step_scalar_exact(self):
        out = step_code_classifier(np.array([[0.0]]), np.array([[1.0]]),
                                   np.array([[1.0]]), 1.0, 1.0)
        assert out[0, 0] == 1.0

    def test_classifier_step_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        mp, n, c = 5, 7, 3
        utilde = rng.standard_normal((mp, n))
        w = rng.standard_normal((c, mp))
        y = rng.standard_normal((c, n))
        lam2, rho = 0.4, 0.2

        def loss(u):
            return 0.5 * lam2 * np.sum((y - w @ u) ** 2)

        step = step_code_classifier(utilde, w, y, rho, lam2) - utilde
        grad = -step / rho  # implied gradient of the classification term
        h = 1e-6
        for _ in range(5):
            d = rng.standard_normal((mp, n))
            fd = (loss(utilde + h * d) - loss(utilde - h * d)) / (2 * h)
            analytic = float(np.sum(grad * d))
            assert abs(fd - analytic) <= 1e-6 * max(1.0, abs(analytic))


class TestClosedFormUpdates:
    def test_classifier_zero_codes_give_zero_w(self):
        w = update_classifier(np.eye(2), np.zeros((4, 2)), 0.5, 0.3)
        assert np.array_equal(w, np.zeros((2, 4)))

    def test_classifier_scalar(self):
        w = update_classifier(np.array([[2.0]]), np.array([[1.0]]), 1.0, 1.0)
        assert w[0, 0] == pytest.approx(1.0)  # 2*1 / (1+1)

    def test_classifier_gradient_vanishes_at_solution(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((2, 8))
        utilde = rng.standard_normal((6, 8))
        lam2, lam3 = 0.7, 0.2
        w = update_classifier(y, utilde, lam2, lam3)
        grad = lam2 * (w @ utilde - y) @ utilde.T + lam3 * w
        assert np.linalg.norm(grad) <= 1e-8

    def test_dictionary_zero_codes_give_zero_omega(self):
        omega = update_dictionary(np.zeros((3, 8)), np.ones((2, 8)), 0.5)
        assert np.array_equal(omega, np.zeros((3, 2)))

    def test_dictionary_identity_data_small_ridge(self):
        rng = np.random.default_rng(6)
        ubar = rng.standard_normal((3, 5))
        omega = update_dictionary(ubar, np.eye(5), 1e-12)
        assert np.allclose(omega, ubar, atol=1e-6)

    def test_dictionary_gradient_vanishes_at_solution(self):
        rng = np.random.default_rng(7)
        ubar = rng.standard_normal((4, 12))
        xbar = rng.standard_normal((6, 12))
        lam4 = 0.3
        omega = update_dictionary(ubar, xbar, lam4)
        grad = (omega @ xbar - ubar) @ xbar.T + lam4 * omega
        assert np.linalg.norm(grad) <= 1e-8

    def test_nonpositive_ridge_rejected(self):
        with pytest.raises(ValueError):
            update_classifier(np.eye(2), np.zeros((4, 2)), 0.5, 0.0)
        with pytest.raises(ValueError):
            update_dictionary(np.zeros((3, 8)), np.ones((2, 8)), 0.0)


class TestProjectAtoms:
    def test_long_row_rescaled(self):
        out = project_atoms(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]])

    def test_inside_ball_unchanged(self):
        row = np.array([[0.3, 0.4]])
        assert np.array_equal(project_atoms(row), row)

    def test_zero_row_unchanged(self):
        row = np.zeros((1, 3))
        assert np.array_equal(project_atoms(row), row)

    def test_mixed_rows(self):
        omega = np.array([[3.0, 4.0], [0.1, 0.2], [0.0, 0.0]])
        out = project_atoms(omega)
        assert np.allclose(out[0], [0.6, 0.8])
        assert np.array_equal(out[1:], omega[1:])


class TestTrain:
    def test_one_iteration_matches_scripted_reference(self):
        xbar, y, n = tiny_instance(11)
        p, m = TINY_GEOM.patch_count, 2
        hp = Hyperparams(lambda1=0.05, lambda2=0.4, lambda3=0.2, lambda4=0.3,
                         rho=0.1, max_iter=1, tol=1e-30)
        state = train(xbar, y, TINY_GEOM, m, hp, seed=11)

        omega, w = ref_init(TINY_GEOM.atom_len, p, m, 2, seed=11)
        u = np.zeros((p, n, m))
        resp = omega @ xbar
        for k in range(p):
            for j in range(n):
                for i in range(m):
                    u[k, j, i] = resp[i, j * p + k]
        u, omega, w = ref_iteration(xbar, y, u, omega, w, p, n, m,
                                    hp.lambda1, hp.lambda2, hp.lambda3,
                                    hp.lambda4, hp.rho)
        assert np.allclose(state.code, u, rtol=0, atol=1e-10)
        assert np.allclose(state.classifier.w, w, rtol=0, atol=1e-10)
        assert np.allclose(state.dictionary.omega, omega, rtol=0, atol=1e-10)

    def test_decoupled_first_iteration(self):
        # With lambda1 = lambda2 = 0 the code steps are no-ops from the warm
        # start, so after one iteration the dictionary is exactly the
        # projected ridge fit of the initial responses.
        xbar, y, n = tiny_instance(12)
        hp = Hyperparams(lambda1=0.0, lambda2=0.0, lambda3=0.1, lambda4=0.2,
                         rho=0.1, max_iter=1, tol=1e-30)
        state = train(xbar, y, TINY_GEOM, 2, hp, seed=12)
        omega0, _ = ref_init(TINY_GEOM.atom_len, TINY_GEOM.patch_count, 2, 2, 12)
        ubar0 = omega0 @ xbar
        expected = project_atoms(update_dictionary(ubar0, xbar, hp.lambda4))
        assert np.allclose(state.dictionary.omega, expected, atol=1e-12)
        assert np.allclose(view_bar(state.code), ubar0, atol=1e-12)

    def test_zero_iterations_returns_initial_state(self):
        xbar, y, _ = tiny_instance(13)
        hp = Hyperparams(max_iter=0)
        state = train(xbar, y, TINY_GEOM, 2, hp, seed=13)
        assert state.iteration == 0
        assert len(state.objective_trace) == 1
        assert not state.converged

    def test_trace_length_is_iterations_plus_one(self):
        xbar, y, _ = tiny_instance(14)
        hp = Hyperparams(max_iter=7, tol=1e-30)
        state = train(xbar, y, TINY_GEOM, 2, hp, seed=14)
        assert state.iteration == 7
        assert len(state.objective_trace) == 8

    def test_objective_monotone_on_random_instances(self):
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            geom = ConvGeometry(6, 6, 2, 2, 2, 2)
            n = 20
            xbar = rng.standard_normal((geom.atom_len, n * geom.patch_count))
            labels = [f"c{v}" for v in rng.integers(0, 3, size=n)]
            y = one_hot_encode(labels, sorted(set(labels)))
            hp = Hyperparams(lambda1=0.01, lambda2=0.2, lambda3=0.1,
                             lambda4=0.1, max_iter=15, tol=1e-30)
            state = train(xbar, y, geom, 4, hp, seed=seed)
            trace = np.array(state.objective_trace)
            assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1]))

    def test_constraint_holds_after_every_iteration(self):
        xbar, y, _ = tiny_instance(15)
        hp = Hyperparams(max_iter=10, tol=1e-30)
        seen = []

        def check(state):
            norms_sq = np.sum(state.dictionary.omega ** 2, axis=1)
            seen.append(float(np.max(norms_sq)))

        train(xbar, y, TINY_GEOM, 3, hp, seed=15, callback=check)
        assert len(seen) == 10
        assert all(v <= 1.0 + 1e-12 for v in seen)

    def test_huge_l1_weight_zeroes_the_code(self):
        xbar, y, _ = tiny_instance(16)
        hp = Hyperparams(lambda1=1e6, lambda2=0.1, max_iter=1, tol=1e-30)
        state = train(xbar, y, TINY_GEOM, 2, hp, seed=16)
        assert np.all(state.code == 0.0)
        assert np.all(state.classifier.w == 0.0)
        assert np.all(state.dictionary.omega == 0.0)

    def test_zero_fixed_point_is_stationary(self):
        # With lambda1 = lambda2 = 0 the only state satisfying both
        # closed-form stationarity conditions is the zero model; one more
        # iteration must leave the objective unchanged.
        xbar, y, n = tiny_instance(17)
        p, m = TINY_GEOM.patch_count, 2
        from convadl.model import AnalysisDictionary, LinearClassifier
        zero_state = TrainState(
            dictionary=AnalysisDictionary(np.zeros((m, TINY_GEOM.atom_len)), TINY_GEOM),
            code=np.zeros((p, n, m)),
            classifier=LinearClassifier(np.zeros((2, m * p)), ("a", "b")),
            iteration=0, objective_trace=[],
        )
        hp = Hyperparams(lambda1=0.0, lambda2=0.0, lambda3=0.1, lambda4=0.1,
                         max_iter=1, tol=1e-30)
        state = train(xbar, y, TINY_GEOM, m, hp, warm_start=zero_state)
        before, after = state.objective_trace
        assert abs(after - before) <= 1e-10 * max(1.0, abs(before))

    def test_convergence_stops_early(self):
        xbar, y, _ = tiny_instance(18)
        hp = Hyperparams(max_iter=500, tol=1e-3)
        state = train(xbar, y, TINY_GEOM, 2, hp, seed=18)
        assert state.converged
        assert state.iteration < 500
        # trace still includes the initial value plus one per iteration run
        assert len(state.objective_trace) == state.iteration + 1

    def test_face_preset_values_run(self):
        rng = np.random.default_rng(19)
        geom = ConvGeometry(48, 42, 12, 12, 6, 6)
        n = 4
        samples = rng.random((n, 48, 42))
        from convadl.patching import build_patch_matrix
        xbar = build_patch_matrix(list(samples), geom)
        y = one_hot_encode(["a", "a", "b", "b"], ["a", "b"])
        hp = Hyperparams(lambda1=0.001, lambda2=0.2, lambda3=0.1, lambda4=0.1,
                         max_iter=23, tol=1e-30)
        state = train(xbar, y, geom, 50, hp, seed=19)
        assert state.iteration == 23
        assert state.dictionary.omega.shape == (50, 144)

    def test_rejects_inconsistent_inputs(self):
        xbar, y, _ = tiny_instance(20)
        with pytest.raises(ValueError, match="columns"):
            train(xbar[:, :5], y, TINY_GEOM, 2)  # not a multiple of p
        with pytest.raises(ValueError, match="samples"):
            train(xbar, y[:, :2], TINY_GEOM, 2)
        with pytest.raises(ValueError, match="atoms have length"):
            train(xbar[:3], y, TINY_GEOM, 2)

    def test_code_views_stay_consistent_through_training(self):
        # The tensor reaching the next iteration equals the tensor produced
        # by the previous one bit-exactly; its views must agree with the
        # canonical tensor.
        xbar, y, _ = tiny_instance(21)
        hp = Hyperparams(max_iter=3, tol=1e-30)
        tensors = []
        train(xbar, y, TINY_GEOM, 2, hp, seed=21,
              callback=lambda s: tensors.append(s.code.copy()))
        for u in tensors:
            p, n, m = u.shape
            assert np.array_equal(from_bar(view_bar(u), p, n, m), u)
            assert np.array_equal(view_hat(u).reshape(p, n, m), u)
            assert np.array_equal(view_tilde(u),
                                  u.transpose(2, 0, 1).reshape(m * p, n))
