"""Dense complex linear-algebra primitives shared by all simulation layers.

Everything operates on plain ``numpy`` arrays wrapped in thin value types
(:class:`Operator`, :class:`StateVector`, :class:`DensityMatrix`) that enforce
finiteness and basic structural invariants at construction time.  Tolerances
live in a single :class:`NumericalPolicy` record so that CI runs and
high-accuracy runs share one knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class NumericalPolicy:
    """Global numerical tolerances (all absolute unless noted)."""

    herm_tol: float = 1e-10          # Hermiticity of operators / density matrices
    unitary_tol: float = 1e-9        # unitarity of transforms and propagators
    norm_tol: float = 1e-9           # state-vector norm drift per propagation
    trace_tol: float = 1e-8          # density-matrix trace
    psd_tol: float = 1e-8            # density-matrix eigenvalue floor (>= -psd_tol)
    trace_drift_tol: float = 1e-7    # trace drift over a full Lindblad run
    spectral_tol: float = 1e-9       # relative reconstruction error of eigh
    max_dim: int = 1 << 14           # capacity ceiling for tensor products


POLICY = NumericalPolicy()


class CapacityError(ValueError):
    """A tensor product would exceed the configured dimension ceiling."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to reach its target accuracy.

    Carries a ``residual`` attribute with the measured error estimate.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _as_complex(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("non-finite entries (NaN/Inf) are not admitted")
    return arr


class Operator:
    """A dense square complex matrix."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = _as_complex(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def __add__(self, other):
        return Operator(self.matrix + _op_mat(other))

    def __sub__(self, other):
        return Operator(self.matrix - _op_mat(other))

    def __mul__(self, scalar):
        return Operator(self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(-self.matrix)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return StateVector(self.matrix @ other.amplitudes, normalized=False)
        return Operator(self.matrix @ _op_mat(other))

    def __repr__(self):
        return f"Operator(dim={self.dim})"

    @staticmethod
    def identity(dim: int) -> "Operator":
        return Operator(np.eye(dim, dtype=np.complex128))


def _op_mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, Operator) else _as_complex(x)


class StateVector:
    """A pure state; unit norm is enforced within ``POLICY.norm_tol``."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, normalized: bool = True):
        a = _as_complex(amplitudes)
        if a.ndim != 1:
            raise ValueError("state vector must be one-dimensional")
        if normalized:
            n = np.linalg.norm(a)
            if abs(n - 1.0) > POLICY.norm_tol:
                raise ValueError(f"state norm {n} deviates from 1 beyond tolerance")
        self.amplitudes = a

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / np.linalg.norm(self.amplitudes))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"StateVector(dim={self.dim})"


class DensityMatrix:
    """A density operator: Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("entries",)

    def __init__(self, entries, validate: bool = True):
        m = _as_complex(entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if validate:
            scale = max(1.0, float(np.abs(m).max()))
            asym = np.abs(m - m.conj().T).max() / scale
            if asym > POLICY.herm_tol:
                raise ValueError(f"density matrix not Hermitian (asymmetry {asym:.2e})")
            tr = np.trace(m)
            if abs(tr - 1.0) > POLICY.trace_tol:
                raise ValueError(f"density matrix trace {tr} deviates from 1")
            evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
            if evals.min() < -POLICY.psd_tol:
                raise ValueError(f"negative eigenvalue {evals.min():.2e}")
        self.entries = m

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product of two operators, with a capacity guard."""
    out_dim = a.dim * b.dim
    if out_dim > POLICY.max_dim:
        raise CapacityError(
            f"tensor product dimension {out_dim} exceeds ceiling {POLICY.max_dim}"
        )
    return Operator(np.kron(a.matrix, b.matrix))


def kron_all(*ops: Operator) -> Operator:
    out = ops[0]
    for op in ops[1:]:
        out = kron(out, op)
    return out


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    tol = POLICY.herm_tol if tol is None else tol
    scale = max(1.0, float(np.abs(m).max()))
    return bool(np.abs(m - m.conj().T).max() <= tol * scale)


def spectral_decompose(h: Operator) -> tuple[np.ndarray, Operator]:
    """Eigendecomposition of a Hermitian operator.

    Returns ascending eigenvalues and the unitary of eigenvectors (columns).
    Raises ``ValueError`` carrying the measured asymmetry for non-Hermitian
    input, and :class:`ConvergenceError` if the reconstruction residual
    exceeds the policy tolerance.
    """
    m = h.matrix
    scale = max(1.0, float(np.abs(m).max()))
    asym = float(np.abs(m - m.conj().T).max()) / scale
    if asym > POLICY.norm_tol:
        raise ValueError(f"input is not Hermitian (relative asymmetry {asym:.3e})")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    norm = float(np.linalg.norm(m, 2)) or 1.0
    residual = float(np.linalg.norm((v * w) @ v.conj().T - m, 2)) / norm
    if residual > POLICY.spectral_tol:
        raise ConvergenceError(
            f"spectral reconstruction residual {residual:.3e}", residual=residual
        )
    return w, Operator(v)


def expm(h: Operator, scale: complex = 1.0) -> Operator:
    """Matrix exponential ``exp(scale * h)``.

    Hermitian inputs go through the spectral decomposition (exact in
    structure, reused for cached propagators); general inputs fall back to
    scaling-and-squaring Pade via scipy.
    """
    m = h.matrix
    if is_hermitian(m, tol=1e-12):
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        out = (v * np.exp(scale * w)) @ v.conj().T
    else:
        out = scipy.linalg.expm(scale * m)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise ConvergenceError("matrix exponential produced non-finite entries")
    return Operator(out)


def hermitian_propagator(h: Operator) -> "CachedPropagator":
    """Cache the spectral decomposition of ``h`` for repeated ``exp(-i h t)``."""
    w, v = spectral_decompose(h)
    return CachedPropagator(w, v.matrix)


class CachedPropagator:
    """Spectral-decomposition cache for unitary propagation under one Hamiltonian."""

    __slots__ = ("eigenvalues", "eigenvectors")

    def __init__(self, eigenvalues: np.ndarray, eigenvectors: np.ndarray):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def unitary(self, t: float) -> np.ndarray:
        """Dense ``exp(-i h t)``."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        """``exp(-i h t) @ psi`` without forming the dense unitary."""
        v = self.eigenvectors
        return v @ (np.exp(-1j * self.eigenvalues * t) * (v.conj().T @ psi))


def partial_trace(rho: np.ndarray, dims, keep) -> np.ndarray:
    """Reduce a density matrix over all subsystems not in ``keep``.

    ``dims`` is the ordered list of subsystem dimensions, ``keep`` the indices
    (into ``dims``) of the subsystems to retain, in layout order.
    """
    dims = list(dims)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must not be empty")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} outside layout of {len(dims)} subsystems")
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"density matrix shape {rho.shape} does not match layout {dims}")
    n = len(dims)
    tensor = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for offset, i in enumerate(sorted(traced)):
        axis = i - offset
        tensor = np.trace(tensor, axis1=axis, axis2=axis + (n - offset))
    d_keep = int(np.prod([dims[k] for k in keep]))
    return tensor.reshape(d_keep, d_keep)


def operator_basis_coefficient(m: np.ndarray, element: np.ndarray) -> complex:
    """Coefficient of ``element`` in ``m`` under the Hilbert-Schmidt inner product."""
    return complex(np.vdot(element, m) / np.vdot(element, element))


# Single-qubit building blocks (index 0 = spin up, +1 eigenvalue of sigma_z).
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z, "i": IDENTITY_2}
