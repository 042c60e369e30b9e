import numpy as np
import pytest
import scipy.linalg

from autoqec.hilbert import PureState, embed, make_space, pauli
from autoqec.models import CONSTANT, Channel, LindbladModel, Params, build_effective_3q, build_tierB_3q
from autoqec import oracle
from autoqec.analysis import classify_basins

from conftest import random_density


class TestDensePropagate:
    def test_identity_at_zero_time(self, rng):
        model = build_effective_3q(Params(gamma=1.0, kappa=500.0, omega_p=100.0))
        rho0 = random_density(model.space, rng)
        out = oracle.dense_propagate(model, rho0, 0.0)
        assert np.allclose(out.matrix, rho0.matrix, atol=1e-14)

    def test_unitary_model_matches_schroedinger(self):
        space = make_space([("q", 2, "qubit")])
        h = embed(pauli("x"), "q", space)
        model = LindbladModel(space, ((h, CONSTANT),), ())
        psi0 = np.array([1.0, 0.0], dtype=complex)
        rho0 = PureState(space, psi0).density_matrix()
        t = 0.7
        rho_t = oracle.dense_propagate(model, rho0, t).matrix
        u = scipy.linalg.expm(-1j * h.to_dense() * t)
        psi_t = u @ psi0
        assert np.allclose(rho_t, np.outer(psi_t, psi_t.conj()), atol=1e-12)

    def test_dimension_guard(self):
        space = make_space([(f"q{i}", 2, "qubit") for i in range(7)])
        model = LindbladModel(space, (), (Channel(1.0, embed(pauli("x"), "q0", space)),))
        rho0 = PureState.basis(space, [0] * 7).density_matrix()
        with pytest.raises(ValueError, match="guard"):
            oracle.dense_propagate(model, rho0, 0.1)

    def test_rejects_time_dependent_models(self):
        from autoqec.models import build_star_multiplexed

        model = build_star_multiplexed(Params(gamma=0.0, gamma_c_outer=20.0))
        with pytest.raises(ValueError, match="time-independent"):
            oracle.dense_liouvillian(model)


class TestClosedFormBitflip:
    def test_initial_state(self):
        rho = oracle.closed_form_bitflip(1.0, 0.0)
        assert np.allclose(rho.matrix, np.diag([1.0, 0.0]))

    def test_long_time_limit(self):
        rho = oracle.closed_form_bitflip(1.0, 100.0)
        assert np.allclose(rho.matrix, 0.5 * np.eye(2), atol=1e-12)

    def test_unit_time_populations(self):
        rho = oracle.closed_form_bitflip(1.0, 1.0)
        p = 0.5 * (1 + np.exp(-2.0))
        assert np.allclose(np.diag(rho.matrix).real, [p, 1 - p])

    def test_agrees_with_dense_propagation(self):
        from autoqec.models import build_unprotected_qubit

        model = build_unprotected_qubit(Params(gamma=1.0))
        rho0 = PureState.basis(model.space, [0]).density_matrix()
        for t in (0.1, 0.5, 1.0, 2.0):
            direct = oracle.dense_propagate(model, rho0, t).matrix
            closed = oracle.closed_form_bitflip(1.0, t).matrix
            assert np.allclose(direct, closed, atol=1e-12)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            oracle.closed_form_bitflip(-1.0, 0.1)


class TestDenseChain:
    def test_effective_3q_structure(self):
        chain = oracle.dense_chain(build_effective_3q(Params(gamma=0.0, kappa=500.0, omega_p=100.0)))
        assert chain.rates.shape == (8, 8)
        assert chain.closed_classes == ((0,), (7,))

    def test_star_codewords_absorbing(self):
        from autoqec.models import build_star_effective

        chain = oracle.dense_chain(build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0)))
        assert (0,) in chain.closed_classes
        assert (511,) in chain.closed_classes

    def test_exact_agreement_with_production_solver(self):
        model = build_effective_3q(Params(gamma=0.0, kappa=500.0, omega_p=100.0))
        chain = oracle.dense_chain(model)
        report = classify_basins(model)
        assert np.max(np.abs(chain.absorption - report.probabilities)) <= 1e-12

    def test_rejects_hamiltonian_models(self):
        with pytest.raises(ValueError, match="Hamiltonian"):
            oracle.dense_chain(build_tierB_3q(Params(gamma=0.0, kappa=500.0, omega_p=50.0)))
