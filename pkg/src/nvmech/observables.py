"""Target states on the nuclear register and fidelity functionals.

Targets live on the 2^N-dimensional nuclear subspace; fidelities of full-space
evolutions are evaluated on the reduced nuclear state (trace over electrons
and the oscillator).  All state comparisons quotient out the global phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import EvolutionResult, PulseSchedule, evolve_unitary
from .model import CouplingMatrix, HilbertLayout, _tau_z_eigenvalues, build_graph_hamiltonian
from .numerics import StateVector, partial_trace


@dataclass(frozen=True)
class GraphSpec:
    """An undirected simple graph on the nuclear spins."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one vertex")
        seen = set()
        norm = []
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) outside 0..{self.n - 1}")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @staticmethod
    def complete(n: int) -> "GraphSpec":
        return GraphSpec(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    def coupling_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n))
        for i, j in self.edges:
            mask[i, j] = mask[j, i] = 1.0
        return mask


@dataclass(frozen=True)
class TargetState:
    """A labeled pure state on the nuclear register."""

    label: str
    state: StateVector

    @property
    def n(self) -> int:
        return int(round(np.log2(self.state.dim)))


def bell_target(n: int = 2) -> TargetState:
    """The two-spin maximally entangled state [|++> + i|-->]/sqrt(2)."""
    if n != 2:
        raise ValueError("the Bell target is defined for exactly two spins")
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    vec = (np.kron(plus, plus) + 1j * np.kron(minus, minus)) / np.sqrt(2.0)
    return TargetState("bell", StateVector(vec))


def graph_state(spec: GraphSpec) -> TargetState:
    """Controlled-phase graph state: amplitudes (-1)^(#edges with both ends
    down) / 2^(N/2) in the z basis."""
    tz = _tau_z_eigenvalues(spec.n)  # +1 = up
    down = tz < 0
    parity = np.zeros(2**spec.n, dtype=np.int64)
    for i, j in spec.edges:
        parity += down[:, i] & down[:, j]
    amps = ((-1.0) ** parity) / np.sqrt(2.0**spec.n)
    return TargetState(f"graph-{spec.n}", StateVector(amps.astype(np.complex128)))


def ghz_state(n: int) -> TargetState:
    """[|up...up> + |down...down>]/sqrt(2)."""
    if n < 2:
        raise ValueError("need at least two spins")
    vec = np.zeros(2**n, dtype=np.complex128)
    vec[0] = vec[-1] = 1.0 / np.sqrt(2.0)
    return TargetState(f"ghz-{n}", StateVector(vec))


def masked_coupling(coupling: CouplingMatrix, spec: GraphSpec) -> CouplingMatrix:
    """Restrict the nuclear coupling matrix to the edges of the graph."""
    mask = spec.coupling_mask()
    return CouplingMatrix(
        j_electron=coupling.j_electron * mask, j_nuclear=coupling.j_nuclear * mask
    )


def pulsed_graph_target(
    spec: GraphSpec,
    coupling: CouplingMatrix,
    pulses: PulseSchedule | None,
    t_gate: float,
) -> TargetState:
    """Noiseless phase-gate evolution of |+>^N with the pulse train interleaved.

    With no pulses this collapses to :func:`graph_state`; with pulses it is
    the same state up to local unitaries (the pulse train commutes with the
    two-spin part of the generator and only reshuffles local z phases).
    """
    masked = masked_coupling(coupling, spec)
    h = build_graph_hamiltonian(masked, spec.n)
    plus = np.full(2**spec.n, 1.0 / np.sqrt(2.0**spec.n), dtype=np.complex128)
    pulse_op = pulses.nuclear_unitary(spec.n) if pulses and pulses.times else None
    res = evolve_unitary(h, StateVector(plus), t_gate, 2, pulses=pulses, pulse_operator=pulse_op)
    return TargetState(f"pulsed-graph-{spec.n}", res.final_state())


def nuclear_fidelity_fn(target: TargetState, layout: HilbertLayout):
    """Batchable map from full-space state columns to nuclear-target fidelity.

    The returned callable accepts a (dim,) vector or (dim, batch) matrix and
    contracts the target onto the nuclear tensor factor:
    F = sum over electron/oscillator indices of |<target|psi_slice>|^2.
    """
    n = layout.n_centers
    if target.state.dim != 2**n:
        raise ValueError("target dimension does not match the nuclear register")
    de, dn, do = 2**n, 2**n, layout.fock_dim
    t_conj = target.state.amplitudes.conj()

    def fidelity(psi: np.ndarray) -> np.ndarray:
        single = psi.ndim == 1
        cols = psi.reshape(de, dn, do, -1)
        amp = np.einsum("n,enfb->efb", t_conj, cols)
        out = np.einsum("efb,efb->b", amp, amp.conj()).real
        return float(out[0]) if single else out

    return fidelity


def fidelity_curve(
    result: EvolutionResult, target: TargetState, layout: HilbertLayout
) -> np.ndarray:
    """Per-sample fidelity <target| Tr_(electrons, oscillator) rho |target>."""
    if result.states is not None:
        fn = nuclear_fidelity_fn(target, layout)
        return np.array([fn(psi) for psi in result.states])
    if result.rhos is not None:
        t = target.state.amplitudes
        keep = layout.nuclear_indices
        vals = []
        for rho in result.rhos:
            rho_n = partial_trace(rho, layout.dims, keep)
            vals.append(float(np.vdot(t, rho_n @ t).real))
        return np.array(vals)
    raise ValueError("result carries neither states nor density matrices")


def single_spin_entropy(state: StateVector, spin: int, n: int) -> float:
    """Von Neumann entropy (bits) of one spin of an n-qubit pure state."""
    if state.dim != 2**n:
        raise ValueError("state dimension does not match qubit count")
    rho = np.outer(state.amplitudes, state.amplitudes.conj())
    reduced = partial_trace(rho, [2] * n, [spin])
    evals = np.linalg.eigvalsh(reduced)
    evals = evals[evals > 1e-15]
    return float(-(evals * np.log2(evals)).sum())


def local_unitary_overlap(
    source: StateVector,
    target: StateVector,
    n: int,
    n_starts: int = 24,
    seed: int = 0,
) -> tuple[bool, float, np.ndarray]:
    """Search for per-qubit unitaries mapping source onto target.

    Maximizes |<target| (U_1 x ... x U_n) |source>| over Euler angles of each
    single-qubit unitary (global phase is quotiented by the modulus).  Returns
    (found, best_overlap, best_angles); ``found`` is True only when the
    overlap reaches 1 within 1e-6 — a near-miss is reported as failure.
    """
    from scipy.optimize import minimize

    if source.dim != 2**n or target.dim != 2**n:
        raise ValueError("states must live on n qubits")
    src = source.amplitudes
    tgt_conj = target.amplitudes.conj()

    def apply_local(angles: np.ndarray) -> np.ndarray:
        psi = src.reshape([2] * n)
        for q in range(n):
            u = _euler_unitary(angles[3 * q : 3 * q + 3])
            psi = np.tensordot(u, psi, axes=([1], [q]))
            psi = np.moveaxis(psi, 0, q)
        return psi.reshape(-1)

    def cost(angles: np.ndarray) -> float:
        ov = tgt_conj @ apply_local(angles)
        return 1.0 - (ov.real**2 + ov.imag**2)

    rng = np.random.default_rng(seed)
    best = (np.inf, None)
    for _ in range(n_starts):
        x0 = rng.uniform(-np.pi, np.pi, size=3 * n)
        res = minimize(cost, x0, method="L-BFGS-B", options={"maxiter": 500})
        if res.fun < best[0]:
            best = (res.fun, res.x)
        if best[0] < 1e-13:
            break
    overlap = float(np.sqrt(max(0.0, 1.0 - best[0])))
    return overlap >= 1.0 - 1e-6, overlap, best[1]


def _euler_unitary(angles: np.ndarray) -> np.ndarray:
    """Rz(a) Ry(b) Rz(c) on one qubit."""
    a, b, c = angles
    rz1 = np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    ry = np.array(
        [[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]],
        dtype=np.complex128,
    )
    rz2 = np.diag([np.exp(-0.5j * c), np.exp(0.5j * c)])
    return rz1 @ ry @ rz2
