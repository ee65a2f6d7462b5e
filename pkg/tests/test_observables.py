import itertools

import numpy as np
import pytest

from nvmech.dynamics import PulseSchedule, cpmg_schedule
from nvmech.model import SystemParams, coupling_constants
from nvmech.numerics import StateVector, partial_trace
from nvmech.observables import (
    GraphSpec,
    bell_target,
    fidelity_curve,
    ghz_state,
    graph_state,
    local_unitary_overlap,
    masked_coupling,
    nuclear_fidelity_fn,
    pulsed_graph_target,
    single_spin_entropy,
)


class TestGraphSpec:
    def test_normalization(self):
        s = GraphSpec(3, ((1, 0), (2, 1)))
        assert s.edges == ((0, 1), (1, 2))

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            GraphSpec(3, ((1, 0), (0, 1)))

    def test_complete_graph(self):
        s = GraphSpec.complete(4)
        assert len(s.edges) == 6

    def test_invalid_edges(self):
        with pytest.raises(ValueError):
            GraphSpec(2, ((0, 0),))
        with pytest.raises(ValueError):
            GraphSpec(2, ((0, 2),))

    def test_coupling_mask(self):
        s = GraphSpec(3, ((0, 1),))
        mask = s.coupling_mask()
        assert mask[0, 1] == mask[1, 0] == 1.0
        assert mask[0, 2] == mask[1, 2] == 0.0
        assert np.all(np.diag(mask) == 0.0)


class TestBellTarget:
    def test_amplitudes(self):
        t = bell_target()
        plus2 = np.full(4, 0.5)
        minus2 = np.kron([1, -1], [1, -1]) / 2.0
        oracle = (plus2 + 1j * minus2) / np.sqrt(2.0)
        assert np.allclose(t.state.amplitudes, oracle, atol=1e-15)

    def test_reduced_state_maximally_mixed(self):
        t = bell_target()
        rho = np.outer(t.state.amplitudes, t.state.amplitudes.conj())
        red = partial_trace(rho, [2, 2], [0])
        assert np.allclose(red, np.eye(2) / 2, atol=1e-14)

    def test_only_two_spins(self):
        with pytest.raises(ValueError):
            bell_target(3)


class TestGraphState:
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_edge_parity_amplitudes_complete_graph(self, n):
        """Brute force: amplitude of each basis state is (-1)^(number of edges
        with both endpoints down) / 2^(n/2)."""
        t = graph_state(GraphSpec.complete(n))
        amps = t.state.amplitudes
        for idx in range(2**n):
            bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
            parity = sum(
                bits[i] & bits[j] for i, j in itertools.combinations(range(n), 2)
            )
            assert amps[idx] == pytest.approx((-1) ** parity / 2 ** (n / 2), abs=1e-14)

    def test_sparse_graph_parity(self):
        t = graph_state(GraphSpec(3, ((0, 1),)))
        amps = t.state.amplitudes * 2 ** 1.5
        # only indices with both spin 0 and spin 1 down (bits 110, 111) flip
        assert np.allclose(amps, [1, 1, 1, 1, 1, 1, -1, -1], atol=1e-14)

    def test_normalized(self):
        t = graph_state(GraphSpec.complete(4))
        assert np.linalg.norm(t.state.amplitudes) == pytest.approx(1.0, abs=1e-14)


class TestGHZEquivalence:
    def test_three_spin_graph_state_explicit_form(self):
        """The complete-graph 3-spin state equals Z x Z x Z applied to
        [|+++> + ... with edge parities]; equivalently it is LU-equivalent to
        the GHZ state."""
        t = graph_state(GraphSpec.complete(3))
        z3 = np.array([1, -1, -1, 1, -1, 1, 1, -1])  # diag of Z x Z x Z
        flipped = StateVector(z3 * t.state.amplitudes)
        found, overlap, _ = local_unitary_overlap(flipped, t.state, 3)
        assert found  # local z flips never leave the LU class

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_lu_equivalent_to_complete_graph(self, n):
        g = graph_state(GraphSpec.complete(n))
        found, overlap, _ = local_unitary_overlap(g.state, ghz_state(n).state, n)
        assert found, f"overlap {overlap}"

    def test_lu_search_rejects_inequivalent_states(self):
        # |00> + |11> vs |00>: not related by local unitaries
        found, overlap, _ = local_unitary_overlap(
            ghz_state(2).state, StateVector([1.0, 0.0, 0.0, 0.0]), 2
        )
        assert not found
        assert overlap == pytest.approx(1 / np.sqrt(2), abs=1e-6)


class TestPulsedGraphTarget:
    def _target(self, n, pulses):
        j = coupling_constants(SystemParams.reference(n))
        spec = GraphSpec.complete(n)
        tg = np.pi / (4 * j.uniform_j_nuclear())
        return pulsed_graph_target(spec, j, pulses, tg)

    def test_no_pulses_local_z_of_graph_state(self):
        t = self._target(3, None)
        g = graph_state(GraphSpec.complete(3))
        found, overlap, _ = local_unitary_overlap(t.state, g.state, 3)
        assert found, f"overlap {overlap}"

    def test_pulsed_target_still_lu_equivalent(self):
        j = coupling_constants(SystemParams.reference(3))
        tg = np.pi / (4 * j.uniform_j_nuclear())
        sched = cpmg_schedule(5, tg)
        t = self._target(3, sched)
        g = graph_state(GraphSpec.complete(3))
        found, overlap, _ = local_unitary_overlap(t.state, g.state, 3)
        assert found, f"overlap {overlap}"

    def test_single_spin_entropy_one_bit(self):
        t = self._target(3, None)
        for spin in range(3):
            assert single_spin_entropy(t.state, spin, 3) == pytest.approx(1.0, abs=1e-9)

    def test_masked_coupling_restricts_edges(self):
        j = coupling_constants(SystemParams.reference(3))
        masked = masked_coupling(j, GraphSpec(3, ((0, 1),)))
        assert masked.j_nuclear[0, 2] == 0.0
        assert masked.j_nuclear[0, 1] == j.j_nuclear[0, 1]


class TestFidelity:
    def test_exact_target_gives_one(self, reference_layout):
        t = bell_target()
        fn = nuclear_fidelity_fn(t, reference_layout)
        full = np.kron(
            np.kron(np.array([1, 0, 0, 0], dtype=complex), t.state.amplitudes),
            np.eye(reference_layout.fock_dim)[0].astype(complex),
        )
        assert fn(full) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_target_gives_zero(self, reference_layout):
        t = bell_target()
        orth = t.state.amplitudes.copy()
        orth[0] *= -1  # no longer proportional anywhere
        orth = orth - (t.state.amplitudes.conj() @ orth) * t.state.amplitudes
        orth /= np.linalg.norm(orth)
        fn = nuclear_fidelity_fn(t, reference_layout)
        full = np.kron(
            np.kron(np.array([1, 0, 0, 0], dtype=complex), orth),
            np.eye(reference_layout.fock_dim)[0].astype(complex),
        )
        assert fn(full) == pytest.approx(0.0, abs=1e-12)

    def test_batch_matches_loop(self, reference_layout):
        rng = np.random.default_rng(3)
        dim = reference_layout.dim
        batch = rng.standard_normal((dim, 5)) + 1j * rng.standard_normal((dim, 5))
        batch /= np.linalg.norm(batch, axis=0)
        fn = nuclear_fidelity_fn(bell_target(), reference_layout)
        vectorized = fn(batch)
        looped = np.array([fn(batch[:, k]) for k in range(5)])
        assert np.allclose(vectorized, looped, atol=1e-14)

    def test_bounds(self, reference_layout):
        rng = np.random.default_rng(4)
        dim = reference_layout.dim
        fn = nuclear_fidelity_fn(bell_target(), reference_layout)
        for _ in range(20):
            psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            psi /= np.linalg.norm(psi)
            f = fn(psi)
            assert -1e-12 <= f <= 1 + 1e-12

    def test_maximally_mixed_density_matrix(self, reference_layout):
        from nvmech.dynamics import EvolutionResult

        dim = reference_layout.dim
        rhos = np.broadcast_to(np.eye(dim) / dim, (2, dim, dim)).copy()
        res = EvolutionResult(times=np.array([0.0, 1.0]), rhos=rhos)
        f = fidelity_curve(res, bell_target(), reference_layout)
        assert np.allclose(f, 0.25, atol=1e-12)

    def test_dimension_mismatch_rejected(self, reference_layout):
        with pytest.raises(ValueError):
            nuclear_fidelity_fn(ghz_state(3), reference_layout)


class TestEntropy:
    def test_product_state_zero(self):
        psi = StateVector(np.kron([1, 0], [1, 0]).astype(complex))
        assert single_spin_entropy(psi, 0, 2) == pytest.approx(0.0, abs=1e-12)

    def test_ghz_one_bit(self):
        assert single_spin_entropy(ghz_state(3).state, 1, 3) == pytest.approx(1.0, abs=1e-12)
