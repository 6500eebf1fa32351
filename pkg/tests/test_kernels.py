"""Kernel families against frozen values, independent formulas, and finite
differences; composite trees; backend agreement; spec validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgp.errors import ArgumentError, ConfigError
from fedgp.kernels import (
    ENV_VAR,
    active_backend,
    arc_cosine,
    ard_se,
    available_backends,
    eval_arc_cosine,
    eval_ard_se,
    eval_neural_net,
    eval_periodic,
    from_dict,
    kernel_matrix,
    kernel_matrix_grad,
    kernel_pairs,
    kproduct,
    ksum,
    leaves,
    neural_net,
    param_count,
    param_names,
    param_slices,
    periodic,
)

from oracles import (
    fd_grad,
    kernel_matrix_from_scalar,
    ref_arc_cosine,
    ref_ard_se,
    ref_neural_net,
    ref_periodic,
    rel_err,
)


def fd_check(spec, params, X, rtol=2e-6):
    """Analytic kernel gradients against central differences on sum(K)."""
    K, grads = kernel_matrix_grad(spec, params, X)
    assert len(grads) == param_count(spec)
    analytic = np.array([np.sum(g) for g in grads])
    numeric = fd_grad(lambda th: np.sum(kernel_matrix(spec, th, X)), params)
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=1e-9)


class TestArdSe:
    def test_frozen_unit_distance(self):
        # s2 = ell = 1: k(0, 1) = exp(-1)
        k = eval_ard_se([0.0], [1.0], np.log([1.0, 1.0]))
        np.testing.assert_allclose(k, np.exp(-1.0), rtol=1e-15)

    def test_frozen_two_dim(self):
        # ell = (1, 2): k((0,0), (1,1)) = exp(-(1 + 1/2))
        k = eval_ard_se([0.0, 0.0], [1.0, 1.0], np.log([1.0, 1.0, 2.0]))
        np.testing.assert_allclose(k, np.exp(-1.5), rtol=1e-15)

    def test_signal_variance_scales(self):
        k1 = eval_ard_se([0.3], [0.8], np.log([1.0, 1.0]))
        k9 = eval_ard_se([0.3], [0.8], np.log([9.0, 1.0]))
        np.testing.assert_allclose(k9, 9.0 * k1, rtol=1e-14)

    def test_matches_reference(self):
        rng = np.random.default_rng(0)
        spec = ard_se(3)
        for _ in range(10):
            params = rng.normal(0, 0.7, size=4)
            X = rng.normal(size=(7, 3))
            Y = rng.normal(size=(5, 3))
            s2 = np.exp(params[0])
            ell = np.exp(params[1:])
            ref = kernel_matrix_from_scalar(
                lambda a, b: ref_ard_se(a, b, s2, ell), X, Y)
            np.testing.assert_allclose(kernel_matrix(spec, params, X, Y), ref,
                                       rtol=1e-12)

    def test_diag_equals_signal_variance(self):
        rng = np.random.default_rng(1)
        params = np.array([np.log(2.5), 0.3, -0.2])
        K = kernel_matrix(ard_se(2), params, rng.normal(size=(6, 2)))
        np.testing.assert_allclose(np.diag(K), 2.5, rtol=1e-14)

    def test_gradients(self):
        rng = np.random.default_rng(2)
        fd_check(ard_se(2), rng.normal(0, 0.5, size=3), rng.normal(size=(6, 2)))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_psd_and_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        params = rng.normal(0, 1.0, size=3)
        X = rng.normal(size=(8, 2))
        K = kernel_matrix(ard_se(2), params, X)
        np.testing.assert_allclose(K, K.T, rtol=0, atol=1e-14)
        assert np.min(np.linalg.eigvalsh(K)) >= -1e-9 * np.max(np.diag(K))


class TestPeriodic:
    def test_exact_period(self):
        params = np.array([np.log(3.0), np.log(0.7), np.log(5.0)])
        k = eval_periodic(1.3, 1.3 + 5.0, params)
        np.testing.assert_allclose(k, 3.0, rtol=1e-12)

    def test_frozen_quarter_period(self):
        # sin^2(pi/4) = 1/2, ell = 1: k = exp(-1)
        params = np.array([0.0, 0.0, np.log(4.0)])
        np.testing.assert_allclose(eval_periodic(0.0, 1.0, params),
                                   np.exp(-1.0), rtol=1e-14)

    def test_matches_reference(self):
        rng = np.random.default_rng(3)
        spec = periodic(1)
        for _ in range(10):
            params = rng.normal(0, 0.5, size=3)
            t = rng.uniform(0, 10, size=(6, 1))
            s2, ell, p = np.exp(params)
            ref = kernel_matrix_from_scalar(
                lambda a, b: ref_periodic(a, b, s2, ell, p), t)
            np.testing.assert_allclose(kernel_matrix(spec, params, t), ref,
                                       rtol=1e-12)

    def test_gradients(self):
        rng = np.random.default_rng(4)
        t = np.sort(rng.uniform(0, 8, size=7)).reshape(-1, 1)
        fd_check(periodic(1), np.array([0.2, -0.3, np.log(3.0)]), t)

    def test_multidim_uses_euclidean_distance(self):
        params = np.array([0.0, 0.0, np.log(2.0)])
        a = np.array([[0.0, 0.0]])
        b = np.array([[3.0, 4.0]])  # r = 5
        k = kernel_matrix(periodic(2), params, a, b)[0, 0]
        np.testing.assert_allclose(k, ref_periodic([0, 0], [3, 4], 1, 1, 2),
                                   rtol=1e-14)


class TestNeuralNet:
    def test_frozen_origin(self):
        # x = x' = 0, sigma0^2 = 1: k = (2/pi) asin(2/3)
        k = eval_neural_net([0.0], [0.0], np.log([1.0, 1.0]))
        np.testing.assert_allclose(k, 0.46455905439753997, rtol=1e-15)

    def test_matches_reference(self):
        rng = np.random.default_rng(5)
        spec = neural_net(2)
        for _ in range(10):
            params = rng.normal(0, 0.6, size=3)
            X = rng.normal(size=(6, 2))
            sig = np.exp(params)
            ref = kernel_matrix_from_scalar(
                lambda a, b: ref_neural_net(a, b, sig), X)
            np.testing.assert_allclose(kernel_matrix(spec, params, X), ref,
                                       rtol=1e-12)

    def test_bounded_by_one(self):
        # asin argument is clamped, so |k| <= 1 even with huge variances
        params = np.log([1e8, 1e8])
        X = np.array([[1.0], [1.0 + 1e-12], [-5.0]])
        K = kernel_matrix(neural_net(1), params, X)
        assert np.all(np.abs(K) <= 1.0 + 1e-15)

    def test_gradients_finite_near_clamp(self):
        params = np.log([1e8, 1e8])
        X = np.array([[1.0], [1.0 + 1e-9]])
        _, grads = kernel_matrix_grad(neural_net(1), params, X)
        assert all(np.all(np.isfinite(g)) for g in grads)

    def test_gradients(self):
        rng = np.random.default_rng(6)
        fd_check(neural_net(2), rng.normal(0, 0.5, size=3),
                 rng.normal(size=(6, 2)))


class TestArcCosine:
    def test_q0_orthogonal_half(self):
        np.testing.assert_allclose(
            eval_arc_cosine([1.0, 0.0], [0.0, 1.0], q=0), 0.5, rtol=1e-15)

    def test_q0_parallel_one(self):
        np.testing.assert_allclose(
            eval_arc_cosine([2.0, 1.0], [2.0, 1.0], q=0), 1.0, rtol=1e-15)

    def test_q1_orthogonal(self):
        # J_1(pi/2) = 1: k = ||x|| ||y|| / pi
        k = eval_arc_cosine([3.0, 0.0], [0.0, 2.0], q=1)
        np.testing.assert_allclose(k, 6.0 / np.pi, rtol=1e-14)

    def test_q2_diagonal(self):
        # J_2(0) = 3 pi: k(x, x) = 3 ||x||^4
        k = eval_arc_cosine([1.0, 2.0], [1.0, 2.0], q=2)
        np.testing.assert_allclose(k, 3.0 * 25.0, rtol=1e-13)

    def test_two_layer_orthogonal(self):
        # layer 1 gives 1/2 with unit diagonal, layer 2: (1/pi)(pi - pi/3) = 2/3
        k = eval_arc_cosine([1.0, 0.0], [0.0, 1.0], q=0, layers=2)
        np.testing.assert_allclose(k, 2.0 / 3.0, rtol=1e-14)

    def test_zero_norm_q0_rejected(self):
        with pytest.raises(ArgumentError):
            kernel_matrix(arc_cosine(2, q=0), np.zeros(0),
                          np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_zero_norm_q1_is_zero(self):
        K = kernel_matrix(arc_cosine(2, q=1), np.zeros(0),
                          np.array([[0.0, 0.0]]), np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(K, 0.0, atol=0.0)

    def test_matches_reference(self):
        # arccos is ill-conditioned near parallel pairs (infinite slope at
        # ratio 1), so identical math can differ ~1e-8 from dot-product
        # ordering alone; the tolerance reflects that, not a formula gap.
        rng = np.random.default_rng(7)
        for q in (0, 1, 2):
            for layers in (1, 2, 3):
                spec = arc_cosine(3, q=q, layers=layers)
                X = rng.normal(size=(5, 3))
                ref = kernel_matrix_from_scalar(
                    lambda a, b: ref_arc_cosine(a, b, q, layers), X)
                np.testing.assert_allclose(kernel_matrix(spec, np.zeros(0), X),
                                           ref, rtol=1e-7, atol=1e-9,
                                           err_msg=f"q={q} layers={layers}")

    def test_has_no_parameters(self):
        assert param_count(arc_cosine(4, q=1, layers=2)) == 0
        K, grads = kernel_matrix_grad(arc_cosine(2, q=1),
                                      np.zeros(0), np.eye(2))
        assert grads == []

    def test_q3_rejected(self):
        with pytest.raises(ArgumentError):
            arc_cosine(2, q=3)


class TestComposites:
    def test_sum_is_sum(self):
        rng = np.random.default_rng(8)
        spec = ksum(ard_se(2), neural_net(2))
        params = rng.normal(0, 0.5, size=6)
        X = rng.normal(size=(5, 2))
        expected = (kernel_matrix(ard_se(2), params[:3], X)
                    + kernel_matrix(neural_net(2), params[3:], X))
        np.testing.assert_allclose(kernel_matrix(spec, params, X), expected,
                                   rtol=1e-14)

    def test_product_is_product(self):
        rng = np.random.default_rng(9)
        spec = kproduct(ard_se(1), periodic(1))
        params = rng.normal(0, 0.5, size=5)
        t = rng.uniform(0, 5, size=(6, 1))
        expected = (kernel_matrix(ard_se(1), params[:2], t)
                    * kernel_matrix(periodic(1), params[2:], t))
        np.testing.assert_allclose(kernel_matrix(spec, params, t), expected,
                                   rtol=1e-14)

    def test_depth_first_param_layout(self):
        spec = ksum(periodic(2), kproduct(ard_se(2), neural_net(2)))
        fams = [leaf.family for leaf, _ in param_slices(spec)]
        assert fams == ["PERIODIC", "ARD_SE", "NEURAL_NET"]
        slices = [sl for _, sl in param_slices(spec)]
        assert [sl.start for sl in slices] == [0, 3, 6]
        assert param_count(spec) == 9
        assert len(param_names(spec)) == 9

    def test_sum_gradients(self):
        rng = np.random.default_rng(10)
        t = rng.uniform(0, 6, size=(6, 1))
        fd_check(ksum(ard_se(1), periodic(1)), rng.normal(0, 0.4, size=5), t)

    def test_product_gradients(self):
        rng = np.random.default_rng(11)
        fd_check(kproduct(ard_se(2), neural_net(2)),
                 rng.normal(0, 0.4, size=6), rng.normal(size=(5, 2)))

    def test_product_with_parameterless_factor(self):
        rng = np.random.default_rng(12)
        spec = kproduct(ard_se(2), arc_cosine(2, q=1))
        params = rng.normal(0, 0.4, size=3)
        X = rng.normal(size=(5, 2)) + 2.0
        fd_check(spec, params, X)

    def test_dict_round_trip(self):
        spec = ksum(periodic(1), kproduct(ard_se(1), arc_cosine(1, q=2, layers=2)))
        again = from_dict(spec.to_dict())
        assert again == spec
        rng = np.random.default_rng(13)
        params = rng.normal(size=param_count(spec))
        t = rng.uniform(0, 4, size=(5, 1)) + 1.0
        np.testing.assert_allclose(kernel_matrix(again, params, t),
                                   kernel_matrix(spec, params, t), rtol=0)

    def test_pairs_matches_matrix_diag(self):
        rng = np.random.default_rng(14)
        spec = ksum(ard_se(2), kproduct(periodic(2), neural_net(2)))
        params = rng.normal(0, 0.4, size=param_count(spec))
        A = rng.normal(size=(6, 2))
        B = rng.normal(size=(6, 2))
        full = kernel_matrix(spec, params, A, B)
        np.testing.assert_allclose(kernel_pairs(spec, params, A, B),
                                   np.diag(full), rtol=1e-13)


class TestBackends:
    def test_backends_agree(self, monkeypatch):
        if "numba" not in available_backends():
            pytest.skip("numba backend unavailable")
        rng = np.random.default_rng(15)
        cases = [
            (ard_se(3), rng.normal(size=4), rng.normal(size=(7, 3))),
            (periodic(1), rng.normal(size=3), rng.uniform(0, 9, size=(7, 1))),
            (neural_net(2), rng.normal(size=3), rng.normal(size=(7, 2))),
        ]
        for spec, params, X in cases:
            results = {}
            for backend in ("numpy", "numba"):
                monkeypatch.setenv(ENV_VAR, backend)
                K, grads = kernel_matrix_grad(spec, params, X)
                results[backend] = (K, grads)
            np.testing.assert_allclose(results["numba"][0], results["numpy"][0],
                                       rtol=1e-13)
            for g_nb, g_np in zip(results["numba"][1], results["numpy"][1]):
                np.testing.assert_allclose(g_nb, g_np, rtol=1e-12, atol=1e-14)

    def test_env_selects_backend(self, monkeypatch):
        monkeypatch.setenv(ENV_VAR, "numpy")
        assert active_backend() == "numpy"

    def test_bad_backend_rejected(self, monkeypatch):
        monkeypatch.setenv(ENV_VAR, "fortran")
        with pytest.raises(ConfigError):
            active_backend()


class TestValidation:
    def test_wrong_param_count(self):
        with pytest.raises(ArgumentError):
            kernel_matrix(ard_se(2), np.zeros(5), np.zeros((3, 2)))

    def test_non_finite_params(self):
        with pytest.raises(ArgumentError):
            kernel_matrix(ard_se(1), np.array([np.nan, 0.0]), np.zeros((2, 1)))

    def test_non_finite_inputs(self):
        with pytest.raises(ArgumentError):
            kernel_matrix(ard_se(1), np.zeros(2), np.array([[np.inf]]))

    def test_input_dim_mismatch(self):
        with pytest.raises(ArgumentError):
            kernel_matrix(ard_se(2), np.zeros(3), np.zeros((4, 3)))

    def test_sum_children_must_share_dim(self):
        with pytest.raises(ArgumentError):
            ksum(ard_se(2), ard_se(3))

    def test_q_on_non_arccos_rejected(self):
        from fedgp.kernels import KernelSpec
        with pytest.raises(ArgumentError):
            KernelSpec(family="ARD_SE", input_dim=2, q=1)

    def test_pairs_row_mismatch(self):
        with pytest.raises(ArgumentError):
            kernel_pairs(ard_se(1), np.zeros(2), np.zeros((3, 1)), np.zeros((4, 1)))
