"""Physical parameters, Hilbert-space layout, Hamiltonians, and transforms.

The platform is an array of N electron-spin qubits, each hyperfine-coupled to
one nuclear-spin qubit, with a single mechanical mode coupled to all electron
spins.  All frequencies are angular (rad/s); all Hamiltonians are reported in
the rotating frame of the electronic drive and the nuclear transition, so no
local nuclear-precession terms appear anywhere.

Tensor-factor order is fixed once and for all by :class:`HilbertLayout`:
electron spins e1..eN, nuclear spins n1..nN, oscillator, tensored left to
right.  Basis index 0 of every spin is the +1 eigenstate of sigma_z/tau_z.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_laguerre

from .numerics import (
    IDENTITY_2,
    PAULI,
    Operator,
    StateVector,
    expm,
    kron_all,
    operator_basis_coefficient,
)

TWO_PI = 2.0 * np.pi

# Perturbative expansion parameters alpha = g/nu and beta = A/(4 Omega) beyond
# this value put the transforms outside their validity range.
PERTURBATIVE_LIMIT = 0.15


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the array.

    rabi, coupling and nuclear_rabi accept a scalar (uniform array) or a
    per-center sequence of length n_centers.
    """

    n_centers: int
    rabi: float | np.ndarray          # electronic Rabi frequency Omega_i, rad/s
    osc_freq: float                   # mechanical frequency nu, rad/s
    hyperfine: float                  # longitudinal hyperfine constant A, rad/s
    coupling: float | np.ndarray      # electron-oscillator coupling g_i, rad/s
    fock_dim: int = 8                 # oscillator truncation n_max
    nuclear_rabi: float | np.ndarray = 0.0  # optional nuclear drive, rad/s

    def __post_init__(self):
        if self.n_centers < 1:
            raise ValueError("n_centers must be positive")
        if self.osc_freq <= 0:
            raise ValueError("oscillator frequency must be positive")
        if self.fock_dim < 2:
            raise ValueError("fock_dim must be at least 2")
        if np.any(self.rabi_array <= 0):
            raise ValueError("Rabi frequencies must be positive")
        if np.any(self.alpha > PERTURBATIVE_LIMIT) or np.any(self.beta > PERTURBATIVE_LIMIT):
            warnings.warn(
                "alpha or beta exceeds the perturbative regime "
                f"(limit {PERTURBATIVE_LIMIT}); effective models are unreliable",
                stacklevel=2,
            )

    def _per_center(self, value) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size == 1:
            arr = np.full(self.n_centers, arr[0])
        if arr.size != self.n_centers:
            raise ValueError(f"expected scalar or {self.n_centers} values, got {arr.size}")
        return arr

    @property
    def rabi_array(self) -> np.ndarray:
        return self._per_center(self.rabi)

    @property
    def coupling_array(self) -> np.ndarray:
        return self._per_center(self.coupling)

    @property
    def nuclear_rabi_array(self) -> np.ndarray:
        return self._per_center(self.nuclear_rabi)

    @property
    def alpha(self) -> np.ndarray:
        """Relative electron-oscillator coupling g_i/nu (derived, never stored)."""
        return self.coupling_array / self.osc_freq

    @property
    def beta(self) -> np.ndarray:
        """Hyperfine-to-drive ratio A/(4 Omega_i) (derived, never stored)."""
        return self.hyperfine / (4.0 * self.rabi_array)

    @property
    def perturbative(self) -> bool:
        return bool(np.all(self.alpha <= PERTURBATIVE_LIMIT) and np.all(self.beta <= PERTURBATIVE_LIMIT))

    def layout(self) -> "HilbertLayout":
        return HilbertLayout(self.n_centers, self.fock_dim)

    def with_fock_dim(self, fock_dim: int) -> "SystemParams":
        return SystemParams(
            n_centers=self.n_centers,
            rabi=self.rabi,
            osc_freq=self.osc_freq,
            hyperfine=self.hyperfine,
            coupling=self.coupling,
            fock_dim=fock_dim,
            nuclear_rabi=self.nuclear_rabi,
        )

    @staticmethod
    def reference(n_centers: int = 2, fock_dim: int = 8, **overrides) -> "SystemParams":
        """Reference NV-array parameter set (uniform couplings).

        Omega = 2pi 15.25 MHz, nu = 2pi 2 MHz, A = 2pi 3.05 MHz,
        g = 2pi 0.1 MHz, giving alpha = beta = 1/20.
        """
        kwargs = dict(
            n_centers=n_centers,
            rabi=TWO_PI * 15.25e6,
            osc_freq=TWO_PI * 2e6,
            hyperfine=TWO_PI * 3.05e6,
            coupling=TWO_PI * 0.1e6,
            fock_dim=fock_dim,
        )
        kwargs.update(overrides)
        return SystemParams(**kwargs)


@dataclass(frozen=True)
class HilbertLayout:
    """Canonical subsystem ordering: e1..eN, n1..nN, oscillator."""

    n_centers: int
    fock_dim: int

    @property
    def dims(self) -> list[int]:
        return [2] * (2 * self.n_centers) + [self.fock_dim]

    @property
    def dim(self) -> int:
        return 4 ** self.n_centers * self.fock_dim

    @property
    def n_subsystems(self) -> int:
        return 2 * self.n_centers + 1

    def electron_index(self, i: int) -> int:
        self._check_center(i)
        return i

    def nuclear_index(self, i: int) -> int:
        self._check_center(i)
        return self.n_centers + i

    @property
    def oscillator_index(self) -> int:
        return 2 * self.n_centers

    @property
    def electron_indices(self) -> list[int]:
        return list(range(self.n_centers))

    @property
    def nuclear_indices(self) -> list[int]:
        return list(range(self.n_centers, 2 * self.n_centers))

    def _check_center(self, i: int):
        if not 0 <= i < self.n_centers:
            raise ValueError(f"center index {i} outside 0..{self.n_centers - 1}")

    def matches(self, params: SystemParams) -> bool:
        return params.n_centers == self.n_centers and params.fock_dim == self.fock_dim

    def embed(self, local: np.ndarray, subsystem: int) -> Operator:
        """Lift a single-subsystem operator to the full space."""
        dims = self.dims
        if local.shape != (dims[subsystem], dims[subsystem]):
            raise ValueError(
                f"operator shape {local.shape} does not match subsystem dim {dims[subsystem]}"
            )
        factors = [
            Operator(local) if k == subsystem else Operator.identity(d)
            for k, d in enumerate(dims)
        ]
        return kron_all(*factors)

    def embed_many(self, locals_by_subsystem: dict[int, np.ndarray]) -> Operator:
        """Tensor product with given local operators and identity elsewhere."""
        dims = self.dims
        factors = []
        for k, d in enumerate(dims):
            if k in locals_by_subsystem:
                factors.append(Operator(locals_by_subsystem[k]))
            else:
                factors.append(Operator.identity(d))
        return kron_all(*factors)

    def sigma(self, axis: str, i: int) -> Operator:
        """Electron-spin Pauli operator on center i."""
        return self.embed(PAULI[axis], self.electron_index(i))

    def tau(self, axis: str, i: int) -> Operator:
        """Nuclear-spin Pauli operator on center i."""
        return self.embed(PAULI[axis], self.nuclear_index(i))

    def annihilation(self) -> Operator:
        return self.embed(annihilation_matrix(self.fock_dim), self.oscillator_index)

    def number(self) -> Operator:
        a = annihilation_matrix(self.fock_dim)
        return self.embed(a.conj().T @ a, self.oscillator_index)

    def position_quadrature(self) -> Operator:
        a = annihilation_matrix(self.fock_dim)
        return self.embed(a + a.conj().T, self.oscillator_index)

    def product_state(
        self,
        electron: str = "+",
        nuclear: str = "+",
        fock: int = 0,
    ) -> StateVector:
        """Product state with every electron/nuclear spin in the named
        single-qubit state ('up', 'down', '+', '-') and the oscillator in
        Fock level ``fock``."""
        e = _qubit_state(electron)
        n = _qubit_state(nuclear)
        osc = np.zeros(self.fock_dim, dtype=np.complex128)
        osc[fock] = 1.0
        vec = np.ones(1, dtype=np.complex128)
        for _ in range(self.n_centers):
            vec = np.kron(vec, e)
        for _ in range(self.n_centers):
            vec = np.kron(vec, n)
        vec = np.kron(vec, osc)
        return StateVector(vec)

    def nuclear_product_state(self, nuclear: str = "+") -> StateVector:
        """Product state on the nuclear-only space (dim 2^N)."""
        n = _qubit_state(nuclear)
        vec = np.ones(1, dtype=np.complex128)
        for _ in range(self.n_centers):
            vec = np.kron(vec, n)
        return StateVector(vec)


_QUBIT_STATES = {
    "up": np.array([1.0, 0.0], dtype=np.complex128),
    "down": np.array([0.0, 1.0], dtype=np.complex128),
    "+": np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0], dtype=np.complex128) / np.sqrt(2.0),
}


def _qubit_state(label: str) -> np.ndarray:
    try:
        return _QUBIT_STATES[label]
    except KeyError:
        raise ValueError(f"unknown qubit state {label!r}") from None


def annihilation_matrix(fock_dim: int) -> np.ndarray:
    a = np.zeros((fock_dim, fock_dim), dtype=np.complex128)
    n = np.arange(1, fock_dim)
    a[n - 1, n] = np.sqrt(n)
    return a


@dataclass(frozen=True)
class CouplingMatrix:
    """Mediated spin-spin coupling constants (rad/s), symmetric, zero diagonal."""

    j_electron: np.ndarray
    j_nuclear: np.ndarray

    def __post_init__(self):
        for name, j in (("j_electron", self.j_electron), ("j_nuclear", self.j_nuclear)):
            j = np.asarray(j, dtype=float)
            if j.ndim != 2 or j.shape[0] != j.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            if not np.allclose(j, j.T):
                raise ValueError(f"{name} must be symmetric")
            if np.any(np.abs(np.diag(j)) > 0):
                raise ValueError(f"{name} must have zero diagonal")
            object.__setattr__(self, name, j)

    @property
    def n(self) -> int:
        return self.j_nuclear.shape[0]

    def uniform_j_nuclear(self) -> float:
        """The common off-diagonal nuclear coupling; raises if nonuniform."""
        n = self.n
        if n < 2:
            raise ValueError("need at least two centers")
        off = self.j_nuclear[~np.eye(n, dtype=bool)]
        if not np.allclose(off, off[0], rtol=1e-12, atol=0.0):
            raise ValueError("nuclear couplings are not uniform")
        return float(off[0])


def coupling_constants(params: SystemParams) -> CouplingMatrix:
    """Oscillator- and drive-mediated spin-spin couplings.

    J_e(ij) = 2 a_i a_j (1 - 2 b_i^2 - 2 b_j^2) nu,
    J_n(ij) = 8 a_i a_j b_i b_j nu,
    which for uniform parameters reduces to J_n = A^2 g^2 / (2 Omega^2 nu).
    """
    a = params.alpha
    b = params.beta
    nu = params.osc_freq
    je = 2.0 * np.outer(a, a) * (1.0 - 2.0 * b[:, None] ** 2 - 2.0 * b[None, :] ** 2) * nu
    jn = 8.0 * np.outer(a, a) * np.outer(b, b) * nu
    np.fill_diagonal(je, 0.0)
    np.fill_diagonal(jn, 0.0)
    return CouplingMatrix(j_electron=je, j_nuclear=jn)


def build_exact_hamiltonian(params: SystemParams, layout: HilbertLayout) -> Operator:
    """Full Hamiltonian of the hybrid platform (rotating frame).

    H = nu a^dag a + sum_i Omega_i/2 sigma_x^i
        + sum_i [ A/4 sigma_z^i tau_z^i + g_i (a + a^dag) sigma_z^i ]
    """
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    h = params.osc_freq * layout.number().matrix
    pos = layout.position_quadrature().matrix
    omega = params.rabi_array
    g = params.coupling_array
    for i in range(params.n_centers):
        sz = layout.sigma("z", i).matrix
        h = h + 0.5 * omega[i] * layout.sigma("x", i).matrix
        h = h + 0.25 * params.hyperfine * (sz @ layout.tau("z", i).matrix)
        h = h + g[i] * (pos @ sz)
    return Operator(h)


def polaron_unitary(params: SystemParams, layout: HilbertLayout) -> Operator:
    """Spin-conditioned oscillator displacement removing the linear coupling.

    Product over centers of displacement operators with amplitude
    alpha_i sigma_z^i; the per-center generators commute, so a single matrix
    exponential of their sum is exact.
    """
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    a = annihilation_matrix(layout.fock_dim)
    adag_minus_a = a.conj().T - a
    gen = np.zeros((layout.dim, layout.dim), dtype=np.complex128)
    for i, alpha in enumerate(params.alpha):
        gen = gen + alpha * layout.embed_many(
            {layout.electron_index(i): PAULI["z"], layout.oscillator_index: adag_minus_a}
        ).matrix
    # gen is anti-Hermitian: exp(gen) = exp(i * (-i gen)) with -i gen Hermitian.
    return expm(Operator(-1j * gen), 1j)


def build_polaron_hamiltonian(params: SystemParams, layout: HilbertLayout) -> Operator:
    """Hamiltonian after the displacement transform (driving term approximated
    for a ground-state-cooled oscillator).

    H_P = nu a^dag a + sum_i Omega_i e^(-2 alpha_i^2)/2 sigma_x^i
          + A/4 sum_i sigma_z^i tau_z^i
          - nu sum_{i,j} alpha_i alpha_j sigma_z^i sigma_z^j

    The double sum keeps the i = j constants (nu alpha_i^2 per center) so that
    operator-level comparisons against the exact conjugation are well defined.
    """
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    alpha = params.alpha
    omega_t = params.rabi_array * np.exp(-2.0 * alpha**2)
    h = params.osc_freq * layout.number().matrix
    sz = [layout.sigma("z", i).matrix for i in range(params.n_centers)]
    for i in range(params.n_centers):
        h = h + 0.5 * omega_t[i] * layout.sigma("x", i).matrix
        h = h + 0.25 * params.hyperfine * (sz[i] @ layout.tau("z", i).matrix)
        for j in range(params.n_centers):
            h = h - params.osc_freq * alpha[i] * alpha[j] * (sz[i] @ sz[j])
    return Operator(h)


def schrieffer_wolff_unitary(params: SystemParams, layout: HilbertLayout) -> Operator:
    """Exact unitary exp(-i sum_i beta_i sigma_y^i tau_z^i)."""
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    gen = np.zeros((layout.dim, layout.dim), dtype=np.complex128)
    for i, beta in enumerate(params.beta):
        gen = gen + beta * layout.embed_many(
            {layout.electron_index(i): PAULI["y"], layout.nuclear_index(i): PAULI["z"]}
        ).matrix
    return expm(Operator(gen), -1j)


def build_sw_hamiltonian(params: SystemParams, layout: HilbertLayout) -> Operator:
    """Second-order effective Hamiltonian after displacement + spin rotation.

    H_S = nu a^dag a + sum_i Omega-bar_i/2 sigma_x^i
          - sum_{i<j} J_e(ij) sigma_z^i sigma_z^j
          - sum_{i<j} J_n(ij) sigma_x^i sigma_x^j tau_z^i tau_z^j
    with Omega-bar_i = (1 + 2 beta_i^2) Omega_i e^(-2 alpha_i^2).
    """
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    alpha = params.alpha
    beta = params.beta
    omega_bar = (1.0 + 2.0 * beta**2) * params.rabi_array * np.exp(-2.0 * alpha**2)
    j = coupling_constants(params)
    h = params.osc_freq * layout.number().matrix
    for i in range(params.n_centers):
        h = h + 0.5 * omega_bar[i] * layout.sigma("x", i).matrix
    for i in range(params.n_centers):
        for k in range(i + 1, params.n_centers):
            h = h - j.j_electron[i, k] * (
                layout.sigma("z", i).matrix @ layout.sigma("z", k).matrix
            )
            h = h - j.j_nuclear[i, k] * (
                layout.sigma("x", i).matrix
                @ layout.sigma("x", k).matrix
                @ layout.tau("z", i).matrix
                @ layout.tau("z", k).matrix
            )
    return Operator(h)


def _nuclear_pauli(axis: str, i: int, n: int) -> np.ndarray:
    """Pauli on spin i of an N-qubit (nuclear-only) register."""
    out = np.ones((1, 1), dtype=np.complex128)
    for k in range(n):
        out = np.kron(out, PAULI[axis] if k == i else IDENTITY_2)
    return out


def build_effective_hamiltonian(coupling: CouplingMatrix, n: int) -> Operator:
    """Ising Hamiltonian on the nuclear subspace: -sum_{i<j} J_n(ij) tz_i tz_j."""
    jn = coupling.j_nuclear
    if jn.shape != (n, n):
        raise ValueError("coupling matrix size does not match n")
    diag = np.zeros(2**n)
    tz = _tau_z_eigenvalues(n)
    for i in range(n):
        for k in range(i + 1, n):
            diag -= jn[i, k] * tz[:, i] * tz[:, k]
    return Operator(np.diag(diag.astype(np.complex128)))


def build_graph_hamiltonian(coupling: CouplingMatrix, n: int) -> Operator:
    """Phase-gate generator on the nuclear subspace.

    H_graph = sum_{i<j} 4 J_n(ij) [(1 + tz_i)/2] [(1 - tz_j)/2]; diagonal in
    the computational basis and equal to the Ising form up to single-spin
    tau_z terms and a constant.
    """
    jn = coupling.j_nuclear
    if jn.shape != (n, n):
        raise ValueError("coupling matrix size does not match n")
    diag = np.zeros(2**n)
    tz = _tau_z_eigenvalues(n)
    for i in range(n):
        for k in range(i + 1, n):
            diag += 4.0 * jn[i, k] * 0.25 * (1.0 + tz[:, i]) * (1.0 - tz[:, k])
    return Operator(np.diag(diag.astype(np.complex128)))


def _tau_z_eigenvalues(n: int) -> np.ndarray:
    """(2^n, n) array of tau_z eigenvalues per basis state (index 0 = up = +1)."""
    states = np.arange(2**n)
    bits = (states[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1.0 - 2.0 * bits


def displacement_diagonal(alpha: float, n: int) -> float:
    """Fock-diagonal matrix element <n|D(2 alpha)|n> = e^(-2 a^2) L_n(4 a^2)."""
    if n < 0:
        raise ValueError("Fock index must be non-negative")
    return float(np.exp(-2.0 * alpha**2) * eval_laguerre(n, 4.0 * alpha**2))


def sw_transform_nuclear_drive(
    params: SystemParams, layout: HilbertLayout
) -> tuple[Operator, list[dict[str, float]]]:
    """Exact rotation-frame conjugation of a nuclear driving field.

    Returns the conjugated operator S [sum_i Omega_n_i tau_x^i / 2] S^dag and,
    per center, the extracted coefficients of tau_x^i and sigma_y^i tau_y^i.
    """
    if not layout.matches(params):
        raise ValueError("layout does not match parameters")
    omega_n = params.nuclear_rabi_array
    drive = np.zeros((layout.dim, layout.dim), dtype=np.complex128)
    for i in range(params.n_centers):
        drive = drive + 0.5 * omega_n[i] * layout.tau("x", i).matrix
    s = schrieffer_wolff_unitary(params, layout)
    conj = s.matrix @ drive @ s.matrix.conj().T
    coeffs = []
    for i in range(params.n_centers):
        tau_x = layout.tau("x", i).matrix
        sy_ty = layout.embed_many(
            {layout.electron_index(i): PAULI["y"], layout.nuclear_index(i): PAULI["y"]}
        ).matrix
        coeffs.append(
            {
                "tau_x": operator_basis_coefficient(conj, tau_x).real,
                "sigma_y_tau_y": operator_basis_coefficient(conj, sy_ty).real,
            }
        )
    return Operator(conj), coeffs


def linear_coupling_residual(
    params: SystemParams, layout: HilbertLayout, ceiling_guard: int = 3
) -> float:
    """Largest coefficient of (a + a^dag) sigma_z^i left in P H P^dag.

    The displacement transform removes the linear electron-oscillator coupling
    exactly; what remains is a truncation artifact confined to the Fock
    ceiling, where the truncated ladder algebra ([a, a^dag] != 1) breaks down.
    The projection therefore excludes the top ``ceiling_guard`` Fock levels
    from the operator-basis element.  Returned as an absolute angular
    frequency (rad/s).
    """
    h = build_exact_hamiltonian(params, layout)
    p = polaron_unitary(params, layout)
    conj = p.matrix @ h.matrix @ p.matrix.conj().T
    a = annihilation_matrix(layout.fock_dim)
    pos = a + a.conj().T
    if ceiling_guard > 0:
        cut = layout.fock_dim - ceiling_guard
        if cut < 2:
            raise ValueError("fock_dim too small for the requested ceiling guard")
        pos = pos.copy()
        pos[cut:, :] = 0.0
        pos[:, cut:] = 0.0
    worst = 0.0
    for i in range(params.n_centers):
        element = layout.embed_many(
            {layout.electron_index(i): PAULI["z"], layout.oscillator_index: pos}
        ).matrix
        worst = max(worst, abs(operator_basis_coefficient(conj, element)))
    return worst
