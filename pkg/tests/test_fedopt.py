"""Federated optimization: objective wrappers, the four consensus methods on
the analytic quadratic problem, stopping rules, secure-aggregation parity,
dataset splitting, and failure reporting."""

import numpy as np
import pytest

from fedgp import Dataset
from fedgp.errors import ArgumentError, ConfigError, FederationError
from fedgp.fedopt import (
    ClientState,
    CountingObjective,
    FederationConfig,
    FrozenParamsObjective,
    GPNllObjective,
    QuadraticObjective,
    SumObjective,
    estimate_lipschitz,
    fedavg_round,
    local_nll,
    local_nll_grad,
    make_client,
    make_gp_clients,
    make_quadratic_clients,
    minimize_objective,
    run_federation,
    split_dataset,
)
from fedgp.gpcore import GPModel, nll, nll_value_and_grad
from fedgp.kernels import ard_se

QUAD_CFG = dict(rho=2.0, lipschitz_L=4.0, learning_rate=0.2, local_iters=25,
                tolerance=1e-9, max_rounds=3000, inner_tol=1e-8)


def quad_targets(k, dim=3, seed=0):
    return list(np.random.default_rng(seed).uniform(-2.0, 2.0, (k, dim)))


def run_quadratic(method, targets, **overrides):
    clients = make_quadratic_clients(targets, c=1.0, rho=2.0, lipschitz_L=4.0)
    cfg = FederationConfig(method=method, **{**QUAD_CFG, **overrides})
    return run_federation(cfg, clients), clients


class TestObjectives:
    def test_quadratic_value_and_grad(self):
        obj = QuadraticObjective([1.0, -1.0], c=2.0)
        theta = np.array([2.0, 1.0])
        np.testing.assert_allclose(obj.value(theta), 2.0 * (1.0 + 4.0))
        np.testing.assert_allclose(obj.grad(theta), [4.0, 8.0])
        v, g = obj.value_and_grad(theta)
        assert v == obj.value(theta)
        np.testing.assert_allclose(g, obj.grad(theta))

    def test_gp_objective_wraps_nll(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.standard_normal((8, 1)), rng.standard_normal(8))
        spec = ard_se(1)
        obj = GPNllObjective(spec, data)
        assert obj.dim == 3
        theta = np.array([0.1, -0.2, np.log(0.3)])
        model = GPModel(spec, theta)
        np.testing.assert_allclose(obj.value(theta), nll(model, data), rtol=1e-14)
        v, g = obj.value_and_grad(theta)
        vv, gg = nll_value_and_grad(model, data)
        assert v == vv
        np.testing.assert_allclose(g, gg, rtol=1e-14)

    def test_gp_objective_dim_mismatch(self):
        data = Dataset(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ArgumentError):
            GPNllObjective(ard_se(1), data)

    def test_sum_objective(self):
        parts = [QuadraticObjective([0.0], c=1.0), QuadraticObjective([2.0], c=3.0)]
        total = SumObjective(parts)
        theta = np.array([1.0])
        np.testing.assert_allclose(total.value(theta), 1.0 + 3.0)
        np.testing.assert_allclose(total.grad(theta), [2.0 - 6.0])
        with pytest.raises(ArgumentError):
            SumObjective([])
        with pytest.raises(ArgumentError):
            SumObjective([QuadraticObjective([0.0]), QuadraticObjective([0.0, 1.0])])

    def test_counting_objective(self):
        obj = CountingObjective(QuadraticObjective([0.0, 0.0]))
        theta = np.zeros(2)
        obj.value(theta)
        obj.grad(theta)
        obj.value_and_grad(theta)
        assert (obj.value_evals, obj.grad_evals) == (2, 2)
        obj.reset()
        assert (obj.value_evals, obj.grad_evals) == (0, 0)


class TestFrozenParams:
    def test_pins_value_and_zeroes_grad(self):
        inner = QuadraticObjective([1.0, 2.0, 3.0], c=1.0)
        obj = FrozenParamsObjective(inner, [1], [5.0])
        theta = np.array([0.0, -9.0, 0.0])
        pinned = np.array([0.0, 5.0, 0.0])
        assert obj.value(theta) == inner.value(pinned)
        g = obj.grad(theta)
        assert g[1] == 0.0
        np.testing.assert_allclose(g[[0, 2]], inner.grad(pinned)[[0, 2]])
        v, g2 = obj.value_and_grad(theta)
        assert v == obj.value(theta)
        np.testing.assert_allclose(g2, g)

    def test_validation(self):
        inner = QuadraticObjective([0.0, 0.0])
        with pytest.raises(ArgumentError):
            FrozenParamsObjective(inner, [0, 0], [1.0, 2.0])
        with pytest.raises(ArgumentError):
            FrozenParamsObjective(inner, [0], [1.0, 2.0])
        with pytest.raises(ArgumentError):
            FrozenParamsObjective(inner, [2], [1.0])

    def test_frozen_coordinate_is_stationary_in_every_method(self):
        # pinned coordinates must come out of federation bit-identical to the
        # initial value: zero gradient means no update rule can move them
        targets = quad_targets(4, seed=3)
        for method in ("cadmm", "pxadmm", "fedavg", "fedprox"):
            clients = [
                make_client(i, FrozenParamsObjective(QuadraticObjective(a), [0], [0.7]),
                            rho=2.0, lipschitz_L=4.0)
                for i, a in enumerate(targets)
            ]
            cfg = FederationConfig(method=method, prox_mu=0.1,
                                   init_theta=(0.7, 0.0, 0.0), **QUAD_CFG)
            z, _ = run_federation(cfg, clients)
            assert z[0] == 0.7, method
            np.testing.assert_allclose(
                z[1:], np.mean([a[1:] for a in targets], axis=0), atol=1e-5)


class TestClients:
    def test_make_client_wraps_counting(self):
        client = make_client(0, QuadraticObjective([0.0]))
        assert isinstance(client.objective, CountingObjective)
        np.testing.assert_allclose(client.theta, [0.0])
        np.testing.assert_allclose(client.dual_u, [0.0])

    def test_client_validation(self):
        with pytest.raises(ArgumentError):
            ClientState(id=0, objective=QuadraticObjective([0.0]), theta=np.zeros(2),
                        dual_u=np.zeros(1))
        with pytest.raises(ArgumentError):
            make_client(0, QuadraticObjective([0.0]), rho=0.0)

    def test_quadratic_clients_default_lipschitz(self):
        clients = make_quadratic_clients([[0.0], [1.0]], c=2.5)
        assert all(c.lipschitz_L == 10.0 for c in clients)

    def test_local_nll_passthrough(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.standard_normal((6, 1)), rng.standard_normal(6))
        client = make_gp_clients(ard_se(1), [data])[0]
        theta = np.array([0.0, 0.0, np.log(0.1)])
        model = GPModel(ard_se(1), theta)
        np.testing.assert_allclose(local_nll(client, theta), nll(model, data), rtol=1e-14)
        np.testing.assert_allclose(local_nll_grad(client, theta),
                                   nll_value_and_grad(model, data)[1], rtol=1e-14)
        assert client.objective.value_evals == 1
        assert client.objective.grad_evals == 1


class TestQuadraticConsensus:
    @pytest.mark.parametrize("method", ["cadmm", "pxadmm", "fedavg", "fedprox"])
    @pytest.mark.parametrize("k", [2, 3])
    def test_all_methods_reach_the_mean(self, method, k):
        targets = quad_targets(k, seed=k)
        (z, state), _ = run_quadratic(method, targets,
                                      prox_mu=0.1 if method == "fedprox" else 0.0)
        np.testing.assert_allclose(z, np.mean(targets, axis=0), atol=1e-5)
        assert state.converged

    def test_pxadmm_costs_one_gradient_per_client_per_round(self):
        targets = quad_targets(3, seed=9)
        (z, state), clients = run_quadratic("pxadmm", targets)
        total = sum(c.objective.grad_evals for c in clients)
        assert total == state.round * len(clients)

    def test_fedprox_mu_zero_is_fedavg_bitwise(self):
        targets = quad_targets(3, seed=11)
        (z_avg, s_avg), _ = run_quadratic("fedavg", targets, max_rounds=40,
                                          tolerance=1e-12)
        (z_prox, s_prox), _ = run_quadratic("fedprox", targets, max_rounds=40,
                                            tolerance=1e-12, prox_mu=0.0)
        assert s_avg.round == s_prox.round
        np.testing.assert_array_equal(z_avg, z_prox)

    def test_fedprox_mu_changes_the_path(self):
        targets = quad_targets(3, seed=11)
        (z_avg, _), _ = run_quadratic("fedavg", targets, max_rounds=3)
        (z_prox, _), _ = run_quadratic("fedprox", targets, max_rounds=3, prox_mu=1.0)
        assert np.max(np.abs(z_avg - z_prox)) > 1e-6

    def test_fedavg_weights_by_observation_count(self):
        # two clients, 1 vs 3 observations: one exact local fit pulls z to the
        # weighted mean of the targets
        a, b = np.array([0.0]), np.array([4.0])
        clients = [make_client(0, QuadraticObjective(a), n_obs=1),
                   make_client(1, QuadraticObjective(b), n_obs=3)]
        cfg = FederationConfig(method="fedavg", init_theta=(2.0,), max_rounds=1,
                               learning_rate=0.25, local_iters=400, tolerance=1e-12)
        z, _ = run_federation(cfg, clients)
        np.testing.assert_allclose(z, [0.25 * 0.0 + 0.75 * 4.0], atol=1e-8)


class TestConsensusGap:
    def test_gap_within_ten_tolerances_at_stop(self):
        for method in ("cadmm", "pxadmm"):
            targets = quad_targets(3, seed=21)
            (z, state), clients = run_quadratic(method, targets, tolerance=1e-6)
            assert state.converged
            gap = max(np.max(np.abs(c.theta - z)) for c in clients)
            assert gap <= 10.0 * 1e-6
            assert state.history[-1].consensus_gap <= 10.0 * 1e-6


class TestRunFederation:
    def test_init_theta_used(self):
        targets = quad_targets(2, seed=1)
        clients = make_quadratic_clients(targets)
        cfg = FederationConfig(method="fedavg", max_rounds=1, init_theta=(1.0, 2.0, 3.0),
                               **{k: v for k, v in QUAD_CFG.items() if k != "max_rounds"})
        z, state = run_federation(cfg, clients)
        assert state.history[0].participants == (0, 1)

    def test_seeded_default_init_is_deterministic(self):
        targets = quad_targets(2, seed=2)
        cfg = FederationConfig(method="pxadmm", max_rounds=4, seed=5,
                               **{k: v for k, v in QUAD_CFG.items() if k != "max_rounds"})
        z1, _ = run_federation(cfg, make_quadratic_clients(targets))
        z2, _ = run_federation(cfg, make_quadratic_clients(targets))
        np.testing.assert_array_equal(z1, z2)

    def test_duplicate_ids_rejected(self):
        clients = [make_client(0, QuadraticObjective([0.0])),
                   make_client(0, QuadraticObjective([1.0]))]
        with pytest.raises(ArgumentError):
            run_federation(FederationConfig(method="fedavg"), clients)

    def test_dim_disagreement_rejected(self):
        clients = [make_client(0, QuadraticObjective([0.0])),
                   make_client(1, QuadraticObjective([0.0, 1.0]))]
        with pytest.raises(ArgumentError):
            run_federation(FederationConfig(method="cadmm"), clients)

    def test_empty_clients_rejected(self):
        with pytest.raises(ArgumentError):
            run_federation(FederationConfig(), [])

    def test_partial_participation_records_subsets(self):
        targets = quad_targets(5, seed=6)
        (z, state), _ = run_quadratic("fedavg", targets, participation_prob=0.5,
                                      max_rounds=20, tolerance=1e-12, seed=3)
        sizes = {len(r.participants) for r in state.history}
        assert all(1 <= len(r.participants) <= 5 for r in state.history)
        assert len(sizes) > 1  # seed 3 actually varies the drawn subsets

    def test_empty_round_is_skipped_with_warning(self):
        clients = make_quadratic_clients(quad_targets(2, seed=7))
        from fedgp.fedopt import ConsensusState
        state = ConsensusState(z=np.zeros(3))
        fedavg_round(clients, state, FederationConfig(method="fedavg"), participating=[])
        assert state.history[0].warning
        np.testing.assert_array_equal(state.z, np.zeros(3))

    def test_unknown_participant_rejected(self):
        clients = make_quadratic_clients(quad_targets(2, seed=8))
        from fedgp.fedopt import ConsensusState
        state = ConsensusState(z=np.zeros(3))
        with pytest.raises(ArgumentError):
            fedavg_round(clients, state, FederationConfig(method="fedavg"),
                         participating=[0, 9])

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            FederationConfig(method="gossip")
        with pytest.raises(ConfigError):
            FederationConfig(participation_prob=0.0)
        with pytest.raises(ConfigError):
            FederationConfig(tolerance=0.0)
        with pytest.raises(ConfigError):
            FederationConfig(rho=-1.0)


class _NonFiniteValue:
    """Objective that cannot be evaluated anywhere (value is NaN)."""

    dim = 2

    def value(self, theta):
        return float("nan")

    def grad(self, theta):
        return np.zeros(2)

    def value_and_grad(self, theta):
        return float("nan"), np.zeros(2)


class _NonFiniteGrad:
    """Finite values, non-finite gradients: trips the pxADMM guard."""

    dim = 2

    def value(self, theta):
        return 0.0

    def grad(self, theta):
        return np.full(2, np.inf)

    def value_and_grad(self, theta):
        return 0.0, np.full(2, np.inf)


class TestFailureReporting:
    def test_cadmm_failure_attaches_state_and_client(self):
        clients = [make_client(0, QuadraticObjective([0.0, 0.0])),
                   make_client(1, _NonFiniteValue())]
        cfg = FederationConfig(method="cadmm", max_rounds=5, init_theta=(0.0, 0.0))
        with pytest.raises(FederationError) as err:
            run_federation(cfg, clients)
        assert err.value.client_id == 1
        assert err.value.state is not None

    def test_pxadmm_failure_reports_round(self):
        clients = [make_client(0, _NonFiniteGrad())]
        cfg = FederationConfig(method="pxadmm", max_rounds=5, init_theta=(0.0, 0.0))
        with pytest.raises(FederationError) as err:
            run_federation(cfg, clients)
        assert err.value.client_id == 0
        assert err.value.round_index == 0

    def test_fedavg_failure_reports_client(self):
        clients = [make_client(0, QuadraticObjective([0.0, 0.0])),
                   make_client(1, _NonFiniteGrad())]
        cfg = FederationConfig(method="fedavg", max_rounds=5, init_theta=(0.0, 0.0))
        with pytest.raises(FederationError) as err:
            run_federation(cfg, clients)
        assert err.value.client_id == 1


class TestSecureToggle:
    @pytest.mark.parametrize("method", ["cadmm", "fedavg"])
    def test_secure_matches_plain_within_quantization(self, method):
        targets = quad_targets(4, seed=31)
        rounds = 6
        (z_plain, s_plain), _ = run_quadratic(method, targets, max_rounds=rounds,
                                              tolerance=1e-15)
        (z_sec, s_sec), _ = run_quadratic(method, targets, max_rounds=rounds,
                                          tolerance=1e-15, secure_agg=True)
        # each secure average adds at most K * 2^-16 per coordinate, once per
        # z-average; allow the compounded budget over all rounds
        budget = rounds * len(targets) * 2.0 ** -16 * 4.0
        assert np.max(np.abs(z_sec - z_plain)) <= budget
        assert all(np.isnan(r.secure_err) for r in s_plain.history)
        assert all(np.isfinite(r.secure_err) for r in s_sec.history)
        assert max(r.secure_err for r in s_sec.history) <= len(targets) * 2.0 ** -16


class TestMinimizeObjective:
    def test_quadratic_minimum(self):
        obj = QuadraticObjective([1.0, -2.0, 0.5], c=3.0)
        theta, iters = minimize_objective(obj, np.zeros(3), grad_tol=1e-10)
        np.testing.assert_allclose(theta, [1.0, -2.0, 0.5], atol=1e-9)
        assert iters >= 1

    def test_already_converged_returns_start(self):
        obj = QuadraticObjective([1.0], c=1.0)
        theta, iters = minimize_objective(obj, np.array([1.0]), grad_tol=1e-6)
        assert iters == 0
        np.testing.assert_array_equal(theta, [1.0])

    def test_non_finite_start_raises(self):
        with pytest.raises(FederationError) as err:
            minimize_objective(_NonFiniteValue(), np.zeros(2), client_id=7)
        assert err.value.client_id == 7


class TestEstimateLipschitz:
    def test_quadratic_returns_four_c(self):
        obj = QuadraticObjective([0.0, 1.0], c=1.7)
        np.testing.assert_allclose(estimate_lipschitz(obj, np.zeros(2)), 4.0 * 1.7,
                                   rtol=1e-12)

    def test_deterministic_per_seed(self):
        obj = QuadraticObjective([0.5, 0.5], c=2.0)
        a = estimate_lipschitz(obj, np.ones(2), seed=4)
        b = estimate_lipschitz(obj, np.ones(2), seed=4)
        assert a == b

    def test_accepts_client_wrapper(self):
        client = make_client(0, QuadraticObjective([0.0], c=1.0))
        np.testing.assert_allclose(estimate_lipschitz(client, np.zeros(1)), 4.0)

    def test_validation(self):
        obj = QuadraticObjective([0.0])
        with pytest.raises(ArgumentError):
            estimate_lipschitz(obj, np.zeros(1), n_probes=1)
        with pytest.raises(ArgumentError):
            estimate_lipschitz(obj, np.zeros(1), radius=0.0)


class TestSplitDataset:
    def setup_method(self):
        rng = np.random.default_rng(13)
        self.data = Dataset(rng.standard_normal((20, 2)), rng.standard_normal(20))

    def test_equal_sizes_and_disjoint_cover(self):
        parts = split_dataset(self.data, 3, "equal", seed=0)
        sizes = sorted(len(p) for p in parts)
        assert sizes == [6, 7, 7]
        rows = np.vstack([p.inputs for p in parts])
        assert rows.shape == self.data.inputs.shape
        got = {tuple(r) for r in rows}
        want = {tuple(r) for r in self.data.inputs}
        assert got == want

    def test_equal_is_seeded(self):
        a = split_dataset(self.data, 4, "equal", seed=5)
        b = split_dataset(self.data, 4, "equal", seed=5)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.inputs, pb.inputs)

    def test_by_trajectory_keeps_groups_whole(self):
        groups = np.repeat(np.arange(5), 4)
        parts = split_dataset(self.data, 2, "by_trajectory", group_ids=groups)
        # groups 0,2,4 -> client 0; 1,3 -> client 1
        assert [len(p) for p in parts] == [12, 8]
        with pytest.raises(ArgumentError):
            split_dataset(self.data, 2, "by_trajectory")

    def test_dirichlet_frozen_sizes(self):
        parts = split_dataset(self.data, 3, "dirichlet", seed=0, alpha=0.5)
        assert [len(p) for p in parts] == [3, 1, 16]
        assert sum(len(p) for p in parts) == 20

    def test_dirichlet_minimum_one_row(self):
        for seed in range(8):
            parts = split_dataset(self.data, 5, "dirichlet", seed=seed, alpha=0.1)
            assert all(len(p) >= 1 for p in parts)
            assert sum(len(p) for p in parts) == 20

    def test_validation(self):
        with pytest.raises(ArgumentError):
            split_dataset(self.data, 0)
        with pytest.raises(ArgumentError):
            split_dataset(self.data, 21)
        with pytest.raises(ArgumentError):
            split_dataset(self.data, 2, "striped")
        with pytest.raises(ArgumentError):
            split_dataset(self.data, 2, "dirichlet", alpha=0.0)
