import math

import numpy as np
import pytest

from vqht.exceptions import UsageError
from vqht.fock import (
    BosonicGate,
    apply_circuit,
    coherent_state,
    fock_vacuum,
    thermal_state,
)
from vqht.oracles import (
    chernoff_bound,
    diamond_phase_flip,
    diamond_unitary,
    epsilon_neighborhood_check,
    helstrom,
    measurement_error_rates,
    multi_hypothesis_opt,
    optimal_povm,
    qfi,
    schmidt_values,
    smallest_enclosing_circle,
    trace_distance,
    uhlmann_fidelity,
    von_neumann_entropy,
)
from vqht.qsim import (
    DensityMatrix,
    KrausChannel,
    basis_state,
    haar_random_unitary,
    pure_state,
)

KET0 = basis_state((2,), (0,))
KETP = pure_state((2,), np.array([1.0, 1.0]) / math.sqrt(2))


def random_mixed(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


class TestTraceDistance:
    def test_zero_vs_plus(self):
        assert abs(trace_distance(KET0, KETP) - 1 / math.sqrt(2)) < 1e-12

    def test_pure_state_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            u = rng.normal(size=3) + 1j * rng.normal(size=3)
            v = rng.normal(size=3) + 1j * rng.normal(size=3)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            t = trace_distance(np.outer(u, u.conj()), np.outer(v, v.conj()))
            assert abs(t - math.sqrt(1 - abs(u.conj() @ v) ** 2)) < 1e-10

    def test_bounds_and_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b = random_mixed(4, rng), random_mixed(4, rng)
            t = trace_distance(a, b)
            assert 0 <= t <= 1 + 1e-12
            assert abs(t - trace_distance(b, a)) < 1e-12
        assert trace_distance(a, a) < 1e-12

    def test_fock_states(self):
        nb = 0.5
        t = trace_distance(thermal_state(nb, 40), fock_vacuum(1, 40))
        assert abs(t - nb / (1 + nb)) < 1e-9


class TestHelstrom:
    def test_zero_vs_plus(self):
        res = helstrom(KET0, KETP)
        assert abs(res.error_prob - 0.5 * (1 - 1 / math.sqrt(2))) < 1e-12
        g = res.effect
        np.testing.assert_allclose(g @ g, g, atol=1e-10)

    def test_error_equals_half_one_minus_t(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            a, b = random_mixed(3, rng), random_mixed(3, rng)
            res = helstrom(a, b)
            assert abs(res.error_prob
                       - 0.5 * (1 - trace_distance(a, b))) < 1e-10
            rates = measurement_error_rates(a, b, res.effect)
            assert abs(rates.average() - res.error_prob) < 1e-10
            assert abs(res.success_prob + res.error_prob - 1.0) < 1e-12

    def test_orthogonal_states(self):
        assert helstrom(KET0, basis_state((2,), (1,))).error_prob < 1e-12

    def test_identical_states_with_priors(self):
        res = helstrom(KET0, KET0, priors=(0.7, 0.3))
        assert abs(res.error_prob - 0.3) < 1e-12

    def test_bad_priors(self):
        with pytest.raises(UsageError):
            helstrom(KET0, KETP, priors=(0.8, 0.8))


class TestDiamondUnitary:
    def test_identity(self):
        assert diamond_unitary(np.eye(4)) < 1e-9

    def test_pauli_z(self):
        assert abs(diamond_unitary(np.diag([1.0, -1.0])) - 2.0) < 1e-12

    def test_phase_gate(self):
        for theta in (0.2, 1.0, 2.0, math.pi):
            d = diamond_unitary(np.diag([1.0, np.exp(1j * theta)]))
            assert abs(d - 2 * math.sin(theta / 2)) < 1e-9

    def test_qubit_hull_oracle(self):
        for seed in range(12):
            u = haar_random_unitary(2, seed=100 + seed)
            ang = np.angle(np.linalg.eigvals(u))
            q = np.linspace(0.0, 1.0, 20001)
            hull = np.abs(q * np.exp(1j * ang[0])
                          + (1 - q) * np.exp(1j * ang[1]))
            ref = 2 * math.sqrt(max(0.0, 1 - hull.min() ** 2))
            assert abs(diamond_unitary(u) - ref) < 1e-6

    def test_spread_beyond_half_circle(self):
        w = np.exp(2j * math.pi / 3)
        assert abs(diamond_unitary(np.diag([1.0, w, w ** 2])) - 2.0) < 1e-9
        wide = np.diag(np.exp(1j * np.array([0.0, 0.9 * math.pi,
                                             1.1 * math.pi])))
        assert abs(diamond_unitary(wide) - 2.0) < 1e-9

    def test_invariances(self):
        u = haar_random_unitary(3, seed=7)
        d = diamond_unitary(u)
        v = haar_random_unitary(3, seed=9)
        assert abs(diamond_unitary(v @ u @ v.conj().T) - d) < 1e-9
        assert abs(diamond_unitary(np.exp(0.3j) * u) - d) < 1e-9

    def test_rejects_nonunitary(self):
        with pytest.raises(UsageError):
            diamond_unitary(np.diag([1.0, 2.0]))

    def test_enclosing_circle_plain_points(self):
        c, r = smallest_enclosing_circle([0.0, 2.0])
        assert abs(c - 1.0) < 1e-12 and abs(r - 1.0) < 1e-12
        c, r = smallest_enclosing_circle([0.0, 2.0, 1.0 + 0.2j])
        assert abs(r - 1.0) < 1e-12

    def test_phase_flip_value(self):
        assert diamond_phase_flip(0.3) == 0.6
        with pytest.raises(UsageError):
            diamond_phase_flip(1.2)


class TestChernoff:
    def test_pure_states(self):
        res = chernoff_bound(KET0, KETP)
        assert abs(res.bound - 0.5) < 1e-7

    def test_diagonal_grid_oracle(self):
        p = np.diag([0.8, 0.2])
        q = np.diag([0.35, 0.65])
        res = chernoff_bound(p, q)
        s = np.linspace(0.0, 1.0, 200001)
        vals = (0.8 ** s * 0.35 ** (1 - s)) + (0.2 ** s * 0.65 ** (1 - s))
        assert abs(res.bound - vals.min()) < 1e-9

    def test_symmetric_pair(self):
        res = chernoff_bound(np.diag([0.9, 0.1]), np.diag([0.1, 0.9]))
        assert abs(res.bound - 0.6) < 1e-7
        assert abs(res.s_opt - 0.5) < 1e-4

    def test_identical_states(self):
        rng = np.random.default_rng(11)
        a = random_mixed(3, rng)
        assert abs(chernoff_bound(a, a).bound - 1.0) < 1e-9

    def test_bound_sandwich(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            a, b = random_mixed(3, rng), random_mixed(3, rng)
            res = chernoff_bound(a, b)
            t = trace_distance(a, b)
            assert res.bound >= 1 - t - 1e-9
            assert 0.0 <= res.s_opt <= 1.0
            assert res.bound <= 1 + 1e-12


class TestFidelity:
    def test_zero_vs_plus(self):
        assert abs(uhlmann_fidelity(KET0, KETP) - 0.5) < 1e-12

    def test_commuting(self):
        p = np.array([0.6, 0.3, 0.1])
        q = np.array([0.2, 0.5, 0.3])
        f = uhlmann_fidelity(np.diag(p), np.diag(q))
        assert abs(f - np.sqrt(p * q).sum() ** 2) < 1e-12

    def test_thermal_vs_vacuum(self):
        f = uhlmann_fidelity(thermal_state(0.7, 40), fock_vacuum(1, 40))
        assert abs(f - 1 / 1.7) < 1e-9

    def test_fuchs_van_de_graaf(self):
        rng = np.random.default_rng(13)
        for _ in range(15):
            a, b = random_mixed(4, rng), random_mixed(4, rng)
            f = uhlmann_fidelity(a, b)
            t = trace_distance(a, b)
            assert 1 - math.sqrt(f) <= t + 1e-9
            assert t <= math.sqrt(1 - f) + 1e-9


class TestFisherInformation:
    def test_mixed_qubit_rotation(self):
        r = 0.6

        def fam(th):
            return 0.5 * (np.eye(2) + r * (math.cos(th) * np.diag([1, -1])
                          + math.sin(th) * np.array([[0, 1], [1, 0]])))

        assert abs(qfi(fam, 0.3) - r ** 2) < 1e-6

    def test_pure_qubit_rotation(self):
        def fam(th):
            v = np.array([math.cos(th / 2), math.sin(th / 2)])
            return np.outer(v, v)

        assert abs(qfi(fam, 0.7) - 1.0) < 1e-6

    def test_coherent_phase_family(self):
        alpha = 0.6

        def fam(phi):
            st = coherent_state(alpha, 16)
            return apply_circuit(st, [BosonicGate("phase_rotation", (0,),
                                                  (phi,))])

        assert abs(qfi(fam, 0.0) - 4 * alpha ** 2) < 1e-4

    def test_constant_family(self):
        rho = 0.5 * np.eye(2)
        assert abs(qfi(lambda _x: rho, 0.1)) < 1e-12

    def test_large_step_warns(self):
        def fam(th):
            v = np.array([math.cos(th / 2), math.sin(th / 2)])
            return np.outer(v, v)

        with pytest.warns(RuntimeWarning):
            qfi(fam, 0.4, step=0.5)


class TestSchmidt:
    def test_two_mode_squeezed_vacuum(self):
        r = math.asinh(math.sqrt(0.1))
        st = apply_circuit(fock_vacuum(2, 16),
                           [BosonicGate("two_mode_squeeze", (0, 1), (r, 0.0))])
        vals = schmidt_values(st, [0], top_k=5)
        n = np.arange(5)
        expect = (1 / 1.1) * (1 / 11.0) ** n
        np.testing.assert_allclose(vals, expect, atol=1e-7)
        from vqht.fock import reduce_modes

        ent = von_neumann_entropy(reduce_modes(st, [0]))
        expect_ent = 1.1 * math.log(1.1) - 0.1 * math.log(0.1)
        assert abs(ent - expect_ent) < 1e-9

    def test_bell_state(self):
        bell = pure_state((2, 2),
                          np.array([1, 0, 0, 1]) / math.sqrt(2))
        np.testing.assert_allclose(schmidt_values(bell, [0]),
                                   [0.5, 0.5], atol=1e-12)

    def test_product_state(self):
        prod = basis_state((2, 3), (1, 2))
        vals = schmidt_values(prod, [1])
        assert abs(vals[0] - 1.0) < 1e-12
        assert vals[1:].max() < 1e-12

    def test_mixed_input_rejected(self):
        mixed = DensityMatrix((2, 2), np.eye(4) / 4)
        with pytest.raises(UsageError):
            schmidt_values(mixed, [0])


class TestEntropy:
    def test_known_values(self):
        assert abs(von_neumann_entropy(np.eye(2) / 2) - math.log(2)) < 1e-12
        assert von_neumann_entropy(KET0) < 1e-10

    def test_thermal(self):
        nb = 0.8
        ent = von_neumann_entropy(thermal_state(nb, 60))
        expect = (nb + 1) * math.log(nb + 1) - nb * math.log(nb)
        assert abs(ent - expect) < 1e-8


def trine_states():
    states = []
    for k in range(3):
        a = 2 * math.pi * k / 3
        states.append(np.outer([math.cos(a / 2), math.sin(a / 2)],
                               [math.cos(a / 2), math.sin(a / 2)]))
    return states


class TestOptimalPovm:
    def test_trine(self):
        states = trine_states()
        explicit = [2.0 / 3.0 * s for s in states]
        np.testing.assert_allclose(sum(explicit), np.eye(2), atol=1e-12)
        p_explicit = sum(np.trace(explicit[i] @ states[i]).real / 3
                         for i in range(3))
        assert abs(p_explicit - 2 / 3) < 1e-12
        res = optimal_povm(states)
        assert abs(res.success_prob - 2 / 3) < 1e-6
        assert res.converged

    def test_two_states_match_helstrom(self):
        rng = np.random.default_rng(21)
        for _ in range(8):
            a, b = random_mixed(3, rng), random_mixed(3, rng)
            res = optimal_povm([a, b])
            ref = helstrom(a, b)
            assert abs(res.success_prob - ref.success_prob) < 1e-7

    def test_priors(self):
        rng = np.random.default_rng(22)
        a, b = random_mixed(2, rng), random_mixed(2, rng)
        res = optimal_povm([a, b], priors=[0.8, 0.2])
        ref = helstrom(a, b, priors=(0.8, 0.2))
        assert abs(res.success_prob - ref.success_prob) < 1e-7

    def test_orthogonal_basis(self):
        states = [np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0]),
                  np.diag([0, 0, 1.0])]
        res = optimal_povm(states)
        assert abs(res.success_prob - 1.0) < 1e-9

    def test_input_validation(self):
        with pytest.raises(UsageError):
            optimal_povm([np.eye(2) / 2])
        with pytest.raises(UsageError):
            optimal_povm([np.eye(2) / 2, np.eye(3) / 3])
        with pytest.raises(UsageError):
            optimal_povm([np.eye(2) / 2, np.eye(2) / 2], priors=[0.9, 0.9])


class TestMultiHypothesis:
    def test_perfectly_distinguishable(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        res = multi_hypothesis_opt([ident, zchan], restarts=3, seed=1)
        assert res.success_prob > 1 - 1e-6
        assert res.probe.dims == (2, 2)

    def test_three_phases(self):
        w = np.exp(2j * math.pi / 3)
        chans = [KrausChannel([np.diag([1.0, w ** k])], (2,), (2,))
                 for k in range(3)]
        res = multi_hypothesis_opt(chans, restarts=4, seed=2)
        assert abs(res.success_prob - 2 / 3) < 1e-5
        assert res.povm.elements[0].shape == (4, 4)

    def test_deterministic_for_seed(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        a = multi_hypothesis_opt([ident, zchan], restarts=2, seed=5)
        b = multi_hypothesis_opt([ident, zchan], restarts=2, seed=5)
        assert a.success_prob == b.success_prob

    def test_probe_dims_validation(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        with pytest.raises(UsageError):
            multi_hypothesis_opt([ident, zchan], probe_dims=(3, 2))
        with pytest.raises(UsageError):
            multi_hypothesis_opt([ident,
                                  KrausChannel([np.eye(3)], (3,), (3,))])


class TestNeighborhoodCheck:
    def test_optimal_probe_passes(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        rep = epsilon_neighborhood_check([ident, zchan], KETP, 0.01,
                                         n_trials=25, seed=3)
        assert rep.passed
        assert abs(rep.reference - 1.0) < 1e-9
        assert rep.min_distance >= 0.98 - 1e-9
        assert rep.violations == ()

    def test_suboptimal_probe_fails(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        rep = epsilon_neighborhood_check([ident, zchan], KET0, 0.3,
                                         n_trials=10, seed=4)
        assert not rep.passed
        assert rep.reference < 1e-12
        assert len(rep.violations) > 0

    def test_entangled_probe_with_reference(self):
        ident = KrausChannel([np.eye(2)], (2,), (2,))
        zchan = KrausChannel([np.diag([1.0, -1.0])], (2,), (2,))
        bell = pure_state((2, 2), np.array([1, 0, 0, 1]) / math.sqrt(2))
        rep = epsilon_neighborhood_check([ident, zchan], bell, 0.05,
                                         n_trials=20, seed=5)
        assert abs(rep.reference - 1.0) < 1e-9
        assert rep.passed
