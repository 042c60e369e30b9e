import numpy as np
import pytest
import scipy.linalg

from autoqec.hilbert import PureState, embed, pauli, projector
from autoqec.integrator import PropagationConfig, propagate_master
from autoqec.models import (
    CONSTANT,
    AlternatingProfile,
    Channel,
    LindbladModel,
    Params,
    build_effective_3q,
    build_single_cavity_3q,
    build_star_effective,
    build_star_multiplexed,
    build_tierB_3q,
    build_tierC_3q,
    build_unprotected_qubit,
    chi_couplings,
    gamma_c,
    validate_timescales,
)

REF_PARAMS = Params(gamma=1.0, kappa=500.0, omega_p=100.0, chi=10000.0)


def correction_channels(model):
    return [ch for ch in model.channels if ch.kind == "correction"]


class TestRates:
    def test_gamma_c_values(self):
        assert gamma_c(Params(kappa=500.0, omega_p=100.0)) == pytest.approx(20.0)
        assert gamma_c(Params(kappa=500.0, omega_p=0.0)) == 0.0
        assert gamma_c(Params(kappa=500.0, omega_p=200.0)) == pytest.approx(80.0)

    def test_gamma_c_requires_decay(self):
        with pytest.raises(ValueError, match="kappa"):
            gamma_c(Params(kappa=0.0, omega_p=10.0))

    def test_negative_rates_rejected(self):
        with pytest.raises(ValueError):
            Params(gamma=-1.0)
        with pytest.raises(ValueError):
            Params(j_circ=-0.5)

    def test_chi_couplings_sum_to_zero(self):
        chi = chi_couplings(Params(chi=12.0))
        assert chi == (12.0, -6.0, -6.0)
        assert sum(chi) == 0.0


class TestTimescaleValidation:
    def test_reference_point_is_clean(self):
        assert validate_timescales(REF_PARAMS) == []

    def test_slow_cavity_flagged(self):
        warnings = validate_timescales(Params(gamma=1.0, kappa=2.0))
        assert len(warnings) == 1
        assert "γ ≪ κ violated" in warnings[0]

    def test_strong_pump_marginal(self):
        warnings = validate_timescales(Params(omega_p=400.0, kappa=500.0))
        assert len(warnings) == 1
        assert "Ω_p < κ marginal" in warnings[0]


class TestEffective3q:
    def test_channel_inventory(self):
        model = build_effective_3q(REF_PARAMS)
        assert model.space.total_dim == 8
        assert not model.hamiltonian_terms
        kinds = sorted(ch.kind for ch in model.channels)
        assert kinds == ["bitflip"] * 3 + ["correction"] * 3

    def test_c1_repairs_first_qubit(self):
        model = build_effective_3q(REF_PARAMS)
        space = model.space
        c1 = correction_channels(model)[0].op
        out = c1.matrix @ space.basis_vector([1, 0, 0])
        assert np.allclose(out, space.basis_vector([0, 0, 0]))
        assert np.allclose(c1.matrix @ space.basis_vector([0, 1, 0]), 0)

    def test_c2_matches_projector_construction(self):
        # the conditional-flip form must agree with the explicit dyadic form
        model = build_effective_3q(REF_PARAMS)
        space = model.space
        c2 = correction_channels(model)[1].op
        explicit = (
            embed(pauli("minus"), "q2", space) @ projector(space, [("q1", 0), ("q3", 0)])
            + embed(pauli("plus"), "q2", space) @ projector(space, [("q1", 1), ("q3", 1)])
        )
        assert np.allclose(c2.to_dense(), explicit.to_dense())
        dyadic = np.zeros((8, 8), dtype=complex)
        dyadic[space.basis_index([0, 0, 0]), space.basis_index([0, 1, 0])] = 1.0
        dyadic[space.basis_index([1, 1, 1]), space.basis_index([1, 0, 1])] = 1.0
        assert np.allclose(c2.to_dense(), dyadic)

    def test_correction_ops_annihilate_codespace(self):
        model = build_effective_3q(REF_PARAMS)
        space = model.space
        for ch in correction_channels(model):
            assert np.allclose(ch.op.matrix @ space.basis_vector([0, 0, 0]), 0)
            assert np.allclose(ch.op.matrix @ space.basis_vector([1, 1, 1]), 0)

    def test_cdc_is_sum_of_two_basis_projectors(self):
        model = build_effective_3q(REF_PARAMS)
        for ch in correction_channels(model):
            cdc = (ch.op.dag() @ ch.op).to_dense()
            diag = np.diag(cdc)
            assert np.allclose(cdc, np.diag(diag))
            assert sorted(np.round(diag.real, 12)) == [0, 0, 0, 0, 0, 0, 1, 1]

    def test_total_cdc_spectrum(self):
        model = build_effective_3q(REF_PARAMS)
        total = sum((ch.op.dag() @ ch.op).to_dense() for ch in correction_channels(model))
        eigs = np.sort(np.linalg.eigvalsh(total))
        # zero exactly on the codespace, one on every single-error state
        assert np.allclose(eigs[:2], 0)
        assert np.allclose(eigs[2:], 1)

    def test_jumps_map_basis_to_basis(self):
        model = build_effective_3q(REF_PARAMS)
        for ch in correction_channels(model):
            cols = ch.op.matrix.tocsc()
            assert np.all(np.diff(cols.indptr) <= 1)


class TestTierB:
    def test_space_and_channels(self):
        model = build_tierB_3q(REF_PARAMS)
        assert model.space.total_dim == 64
        kinds = sorted(ch.kind for ch in model.channels)
        assert kinds == ["bitflip"] * 3 + ["cavity-decay"] * 3
        assert len(model.hamiltonian_terms) == 1
        assert model.hamiltonian_terms[0][0].is_hermitian()

    def test_codespace_with_vacuum_is_stationary(self):
        params = Params(gamma=0.0, kappa=500.0, omega_p=50.0)
        model = build_tierB_3q(params)
        space = model.space
        psi = (space.basis_vector([0, 0, 0, 0, 0, 0])
               - space.basis_vector([1, 1, 1, 0, 0, 0])) / np.sqrt(2)
        h = model.hamiltonian_terms[0][0]
        assert np.allclose(h.matrix @ psi, 0)
        for ch in model.channels:
            if ch.rate > 0:
                assert np.allclose(ch.op.matrix @ psi, 0)

    def test_error_state_transfers_to_cavity_photon(self):
        model = build_tierB_3q(REF_PARAMS)
        space = model.space
        h = model.hamiltonian_terms[0][0]
        out = h.matrix @ space.basis_vector([1, 0, 0, 0, 0, 0])
        expected = (REF_PARAMS.omega_p / 2) * space.basis_vector([0, 0, 0, 1, 0, 0])
        assert np.allclose(out, expected)

    def test_steady_cavity_population_scales_with_noise(self):
        # photon number settles at O(gamma/kappa) once correction is running
        params = Params(gamma=1.0, kappa=500.0, omega_p=50.0)
        model = build_tierB_3q(params)
        psi0 = PureState.basis(model.space, [0, 0, 0, 0, 0, 0])
        from autoqec.config import ExperimentConfig  # reuse observable builder
        from autoqec.integrator import Observable
        from autoqec.hilbert import annihilator, embed as embed_op

        num_ops = []
        for label in ("a1", "a2", "a3"):
            a = annihilator(2)
            num_ops.append(embed_op(a.conj().T @ a, label, model.space))
        total_n = num_ops[0] + num_ops[1] + num_ops[2]
        config = PropagationConfig(0.5, (0.25, 0.5))
        series = propagate_master(model, psi0.density_matrix(), config, [("n_cav", total_n)])
        n_final = series.column("n_cav")[-1]
        assert 0 < n_final < 10 * params.gamma / params.kappa


class TestTierBAdiabaticBoundary:
    def test_rate_ratio_at_validity_edge(self):
        # reduced and conversion-level models must agree within 10% up to
        # pump/decay ratio 0.2
        params = Params(gamma=0.0, kappa=500.0, omega_p=100.0)
        model = build_tierB_3q(params)
        rho0 = PureState.basis(model.space, [1, 0, 0, 0, 0, 0]).density_matrix()
        target = PureState.basis(model.space, [0, 0, 0, 0, 0, 0]).density_matrix()
        config = PropagationConfig.linspace(3.0 / 20.0, 31)
        series = propagate_master(model, rho0, config, [("p_repaired", target)])
        series.observables["p_error"] = 1.0 - series.column("p_repaired")
        from autoqec.analysis import fit_decay_rate

        fit = fit_decay_rate(series, "p_error")
        assert 0.9 <= fit.rate / gamma_c(params) <= 1.1


class TestTierC:
    def test_wanted_conversion_is_resonant(self):
        # creating the photon that heralds a majority-restoring flip costs
        # zero dispersive energy because the couplings sum to zero
        model = build_tierC_3q(REF_PARAMS)
        space = model.space
        h = model.hamiltonian_terms[0][0].to_dense()
        init = space.basis_index([1, 0, 0, 0, 0, 0])
        final = space.basis_index([0, 0, 0, 1, 0, 0])
        shift = h[final, final].real - h[init, init].real
        assert shift == pytest.approx(0.0, abs=1e-12)

    def test_unwanted_conversion_is_detuned(self):
        model = build_tierC_3q(REF_PARAMS)
        space = model.space
        h = model.hamiltonian_terms[0][0].to_dense()
        init = space.basis_index([1, 1, 1, 0, 0, 0])
        final = space.basis_index([0, 1, 1, 1, 0, 0])
        shift = h[final, final].real - h[init, init].real
        assert shift == pytest.approx(REF_PARAMS.chi)
        assert abs(shift) >= REF_PARAMS.chi / 2

    def test_all_unwanted_shifts_bounded_away_from_zero(self):
        model = build_tierC_3q(REF_PARAMS)
        space = model.space
        h = model.hamiltonian_terms[0][0].to_dense()
        chi = REF_PARAMS.chi
        for k in range(3):  # cavity index
            for q1 in (0, 1):
                for q2 in (0, 1):
                    for q3 in (0, 1):
                        qubits = [q1, q2, q3]
                        flipped = list(qubits)
                        flipped[k] ^= 1
                        partners = [qubits[j] for j in range(3) if j != k]
                        cav = [0, 0, 0]
                        cav[k] = 1
                        init = space.basis_index(qubits + [0, 0, 0])
                        final = space.basis_index(flipped + cav)
                        shift = h[final, final].real - h[init, init].real
                        if partners[0] == partners[1] == flipped[k]:
                            assert abs(shift) < 1e-12  # majority-restoring
                        else:
                            assert abs(shift) >= chi / 2 - 1e-12

    @pytest.mark.slow
    def test_extracted_rate_matches_reduced_model(self):
        # resonance selection must reproduce the engineered correction rate
        params = Params(gamma=0.0, kappa=500.0, omega_p=50.0, chi=100.0 * 50.0)
        model = build_tierC_3q(params)
        rate = gamma_c(params)
        psi0 = PureState.basis(model.space, [1, 0, 0, 0, 0, 0])
        proj = None
        import scipy.sparse as sp
        from autoqec.hilbert import Operator

        d_cav = 8
        entries = ([], [])
        for qubit_idx in (0, 7):
            for c in range(d_cav):
                entries[0].append(qubit_idx * d_cav + c)
                entries[1].append(qubit_idx * d_cav + c)
        proj = Operator(model.space, sp.csr_array(
            (np.ones(len(entries[0])), entries), shape=(64, 64)
        ))
        t_final = 2.0 / rate
        config = PropagationConfig.linspace(t_final, 41, rel_tol=1e-8, abs_tol=1e-10)
        series = propagate_master(model, psi0.density_matrix(), config, [("inside", proj)])
        series.observables["outside"] = 1.0 - series.column("inside")
        from autoqec.analysis import fit_decay_rate

        fit = fit_decay_rate(series, "outside")
        assert fit.rate == pytest.approx(rate, rel=0.25)


class TestSingleCavity:
    def test_frozen_error_without_circulation(self):
        params = Params(gamma=0.0, kappa=500.0, omega_p=100.0, j_circ=0.0)
        model = build_single_cavity_3q(params)
        space = model.space
        v = space.basis_vector([0, 1, 0])
        assert len(correction_channels(model)) == 1
        c1 = correction_channels(model)[0].op
        assert np.allclose(c1.matrix @ v, 0)
        h = model.hamiltonian_terms[0][0]
        assert h.nnz == 0 or np.allclose(h.to_dense() @ v, 0)

    def test_circulation_defaults_to_pump_rate(self):
        params = Params(gamma=0.0, kappa=500.0, omega_p=100.0)
        model = build_single_cavity_3q(params)
        h = model.hamiltonian_terms[0][0].to_dense()
        space = model.space
        out = h @ space.basis_vector([0, 1, 0])
        # hop |010> -> |100> at j/2
        assert out[space.basis_index([1, 0, 0])] == pytest.approx(params.omega_p / 2)

    def test_circulated_error_gets_corrected(self):
        params = Params(gamma=0.0, kappa=500.0, omega_p=100.0)
        model = build_single_cavity_3q(params)
        rate = gamma_c(params)
        psi0 = PureState.basis(model.space, [0, 1, 0])
        t_final = 50.0 / rate
        config = PropagationConfig(t_final, (t_final,))
        from autoqec.analysis import distance_to_codespace

        series = propagate_master(model, psi0.density_matrix(), config, [])
        rho = series.metadata["final_state"]
        assert distance_to_codespace(rho) <= 0.01


class TestStar:
    def test_channel_inventory(self):
        model = build_star_effective(Params(gamma=1.0, gamma_c_outer=20.0))
        assert model.space.total_dim == 512
        corr = correction_channels(model)
        flips = [ch for ch in model.channels if ch.kind == "bitflip"]
        assert len(corr) == 12 and len(flips) == 9

    def test_outer_channel_repairs_block_error(self):
        model = build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0))
        space = model.space
        c11 = correction_channels(model)[0].op
        state = [1, 0, 0, 0, 0, 0, 0, 0, 0]
        out = c11.matrix @ space.basis_vector(state)
        assert np.allclose(out, space.basis_vector([0] * 9))

    def test_central_channel_repairs_shared_error(self):
        model = build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0))
        space = model.space
        c41 = correction_channels(model)[9].op  # first central channel
        state = [1, 0, 0, 0, 0, 0, 0, 0, 0]  # shared qubits (1, 0, 0)
        out = c41.matrix @ space.basis_vector(state)
        assert np.allclose(out, space.basis_vector([0] * 9))

    def test_all_channels_annihilate_codewords(self):
        model = build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0))
        space = model.space
        zero = space.basis_vector([0] * 9)
        one = space.basis_vector([1] * 9)
        for ch in correction_channels(model):
            assert np.allclose(ch.op.matrix @ zero, 0)
            assert np.allclose(ch.op.matrix @ one, 0)

    def test_block_permutation_symmetry(self):
        # relabelling the three outer blocks permutes the channel set onto itself
        model = build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0))
        space = model.space
        perm = {0: 3, 1: 4, 2: 5, 3: 6, 4: 7, 5: 8, 6: 0, 7: 1, 8: 2}  # blocks 1->2->3->1
        pmat = np.zeros((512, 512))
        for s in range(512):
            levels = space.basis_levels(s)
            moved = [0] * 9
            for src, dst in perm.items():
                moved[dst] = levels[src]
            pmat[space.basis_index(moved), s] = 1.0

        def canon(op):
            dense = np.round(op.to_dense().real, 12)
            return tuple(map(tuple, dense))

        originals = {canon(ch.op) for ch in correction_channels(model)}
        permuted = set()
        for ch in correction_channels(model):
            moved = pmat @ ch.op.to_dense().real @ pmat.T
            permuted.add(tuple(map(tuple, np.round(moved, 12))))
        assert originals == permuted

    def test_star_jumps_map_basis_to_basis(self):
        model = build_star_effective(Params(gamma=0.0, gamma_c_outer=20.0))
        for ch in correction_channels(model):
            cols = ch.op.matrix.tocsc()
            assert np.all(np.diff(cols.indptr) <= 1)


class TestStarMultiplexed:
    def test_profiles_alternate(self):
        model = build_star_multiplexed(Params(gamma=1.0, gamma_c_outer=20.0, switch_period=0.5))
        corr = correction_channels(model)
        outer, central = corr[:9], corr[9:]
        for ch in outer:
            assert ch.profile.value(0.25) == 1.0 and ch.profile.value(0.75) == 0.0
        for ch in central:
            assert ch.profile.value(0.25) == 0.0 and ch.profile.value(0.75) == 1.0
        flips = [ch for ch in model.channels if ch.kind == "bitflip"]
        assert all(ch.profile is CONSTANT or ch.profile == CONSTANT for ch in flips)

    def test_duty_cycle_is_half(self):
        profile = AlternatingProfile(0.5, active_first=True)
        grid = np.linspace(0.0, 2.0, 4001)[:-1]
        activity = np.mean([profile.value(t) for t in grid])
        assert activity == pytest.approx(0.5, abs=1e-3)

    def test_switch_times_enumerated(self):
        model = build_star_multiplexed(Params(gamma=0.0, gamma_c_outer=20.0, switch_period=0.5))
        assert model.switch_times(0.0, 2.1) == [0.5, 1.0, 1.5, 2.0]
        assert not model.is_time_independent

    def test_default_period_scales_with_rate(self):
        model = build_star_multiplexed(Params(gamma=0.0, gamma_c_outer=20.0))
        first = model.switch_times(0.0, 1.0)[0]
        assert first == pytest.approx(10.0 / 20.0)

    def test_single_flips_repaired_within_six_windows(self):
        # classical chain through alternating phases, exact per-phase exponentials
        period = 10.0 / 20.0
        model = build_star_multiplexed(
            Params(gamma=0.0, gamma_c_outer=20.0, switch_period=period)
        )
        corr = correction_channels(model)
        n = 512

        def phase_generator(channels):
            q = np.zeros((n, n))
            for ch in channels:
                x = np.abs(ch.op.to_dense()) ** 2
                q += ch.rate * x.T
            np.fill_diagonal(q, 0.0)
            np.fill_diagonal(q, -q.sum(axis=1))
            return q.T  # column generator acting on probability vectors

        outer_q = phase_generator(corr[:9])
        central_q = phase_generator(corr[9:])
        outer_step = scipy.linalg.expm(outer_q * period)
        central_step = scipy.linalg.expm(central_q * period)

        space = model.space
        for qubit in range(9):
            levels = [0] * 9
            levels[qubit] = 1
            p = np.zeros(n)
            p[space.basis_index(levels)] = 1.0
            for _ in range(6):
                p = outer_step @ p
                p = central_step @ p
            assert p[0] >= 0.99

    def test_rejects_nonpositive_period(self):
        with pytest.raises(ValueError):
            build_star_multiplexed(Params(gamma=0.0, gamma_c_outer=20.0, switch_period=-1.0))


class TestModelValidation:
    def test_non_hermitian_hamiltonian_rejected(self):
        from autoqec.hilbert import make_space

        space = make_space([("q", 2, "qubit")])
        bad = embed(pauli("plus"), "q", space)
        with pytest.raises(ValueError, match="Hermitian"):
            LindbladModel(space, ((bad, CONSTANT),), ())

    def test_unprotected_qubit(self):
        model = build_unprotected_qubit(Params(gamma=2.0))
        assert model.space.total_dim == 2
        assert len(model.channels) == 1
        assert model.channels[0].rate == 2.0
