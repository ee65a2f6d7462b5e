"""Time evolution: unitary, Lindblad, and stochastic noisy propagation.

Closed-system propagation uses a cached spectral decomposition of the
Hamiltonian.  Noisy trajectories use second-order Strang splitting
exp(-i H_n dt/2) exp(-i H_base dt) exp(-i H_n dt/2) where the base propagator
is a cached dense unitary and the noise factor is a diagonal phase; the
Lindblad integrator splits analogously between the exact unitary conjugation
and a Taylor-expanded dissipator half-step.

All trajectory generation is pure given (seed, realization index); ensembles
are chunked into fixed-size batches whose boundaries do not depend on the
worker count, so results are bit-identical under re-parallelization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import noise as noise_mod
from .model import HilbertLayout
from .numerics import (
    POLICY,
    CachedPropagator,
    ConvergenceError,
    DensityMatrix,
    Operator,
    PAULI,
    StateVector,
    hermitian_propagator,
)

#: Realizations propagated together; fixed so batch boundaries (and therefore
#: bit-exact results) never depend on the worker count.
ENSEMBLE_BATCH = 64


@dataclass(frozen=True)
class PulseSchedule:
    """Instantaneous simultaneous pi pulses on a set of nuclear spins."""

    times: tuple[float, ...]
    axis: str = "x"
    targets: tuple[int, ...] | None = None  # nuclear-spin indices; None = all

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError("pulse axis must be 'x' or 'y'")
        times = tuple(float(t) for t in self.times)
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("pulse times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def validate_window(self, total_time: float):
        if self.times and (self.times[0] <= 0 or self.times[-1] >= total_time):
            raise ValueError("pulse times must lie strictly inside (0, T)")

    def unitary(self, layout: HilbertLayout) -> Operator:
        """exp(-i pi tau_axis / 2) on every target, on the full layout."""
        targets = self._target_list(layout.n_centers)
        locals_ = {layout.nuclear_index(i): PAULI[self.axis] for i in targets}
        return (-1j) ** len(targets) * layout.embed_many(locals_)

    def nuclear_unitary(self, n: int) -> Operator:
        """Same pulse on the nuclear-only register of n qubits."""
        targets = self._target_list(n)
        mat = np.ones((1, 1), dtype=np.complex128)
        for k in range(n):
            mat = np.kron(mat, PAULI[self.axis] if k in targets else np.eye(2))
        return Operator((-1j) ** len(targets) * mat)

    def _target_list(self, n: int) -> list[int]:
        if self.targets is None:
            return list(range(n))
        bad = [t for t in self.targets if not 0 <= t < n]
        if bad:
            raise ValueError(f"pulse targets {bad} outside 0..{n - 1}")
        return sorted(set(self.targets))


def cpmg_schedule(n_pulses: int, total_time: float, axis: str = "x",
                  targets: tuple[int, ...] | None = None) -> PulseSchedule:
    """Equidistant pulse train at t_k = (2k - 1) T / (2 n), k = 1..n.

    For n = 1 this is a single echo pulse at T/2.
    """
    if n_pulses < 1:
        raise ValueError("need at least one pulse")
    times = tuple((2 * k - 1) * total_time / (2 * n_pulses) for k in range(1, n_pulses + 1))
    return PulseSchedule(times=times, axis=axis, targets=targets)


def periodic_schedule(n_pulses: int, total_time: float, axis: str = "x",
                      targets: tuple[int, ...] | None = None) -> PulseSchedule:
    """Alternative equidistant timing t_k = k T / (n + 1) (periodic boundary)."""
    if n_pulses < 1:
        raise ValueError("need at least one pulse")
    times = tuple(k * total_time / (n_pulses + 1) for k in range(1, n_pulses + 1))
    return PulseSchedule(times=times, axis=axis, targets=targets)


@dataclass(frozen=True)
class LindbladSpec:
    """Thermal damping of the oscillator: rate gamma (rad/s), occupation n_bar."""

    gamma: float
    n_bar: float = 0.0

    def __post_init__(self):
        if self.gamma < 0 or self.n_bar < 0:
            raise ValueError("gamma and n_bar must be non-negative")

    @staticmethod
    def from_quality_factor(q: float, osc_freq: float, n_bar: float = 0.0) -> "LindbladSpec":
        return LindbladSpec(gamma=osc_freq / q, n_bar=n_bar)


@dataclass
class EvolutionResult:
    """Sampled output of one propagation or one ensemble."""

    times: np.ndarray
    states: np.ndarray | None = None       # (n_samples, dim) pure states
    rhos: np.ndarray | None = None         # (n_samples, dim, dim) density matrices
    mean: np.ndarray | None = None         # ensemble mean of the tracked observable
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def final_state(self) -> StateVector:
        return StateVector(self.states[-1])

    def final_rho(self) -> DensityMatrix:
        return DensityMatrix(self.rhos[-1], validate=False)


def _sample_times(total_time: float, samples: int) -> np.ndarray:
    if samples < 2:
        raise ValueError("need at least two samples")
    if total_time <= 0:
        raise ValueError("total time must be positive")
    return np.linspace(0.0, total_time, samples)


def evolve_unitary(
    h: Operator,
    psi0: StateVector,
    total_time: float,
    samples: int,
    pulses: PulseSchedule | None = None,
    pulse_operator: Operator | None = None,
) -> EvolutionResult:
    """Closed-system evolution via a cached spectral decomposition.

    Pulses, if given, are applied as exact unitaries at their instants
    (``pulse_operator`` on the same space as ``h``).
    """
    times = _sample_times(total_time, samples)
    prop = hermitian_propagator(h)
    if pulses is not None and pulses.times:
        pulses.validate_window(total_time)
        if pulse_operator is None:
            raise ValueError("pulse_operator required when a schedule is given")
    events = _merge_events(times, pulses.times if pulses else ())
    psi = psi0.amplitudes.copy()
    out = np.empty((samples, psi.size), dtype=np.complex128)
    t_now = 0.0
    for kind, t_event, idx in events:
        if t_event > t_now:
            psi = prop.apply(psi, t_event - t_now)
            t_now = t_event
        if kind == "pulse":
            psi = pulse_operator.matrix @ psi
        else:
            out[idx] = psi
    _check_norms(out)
    return EvolutionResult(times=times, states=out)


def _merge_events(sample_times: np.ndarray, pulse_times) -> list[tuple[str, float, int]]:
    """Chronological (kind, time, sample_index) events; at equal times the
    pulse acts first, so samples report the post-pulse state."""
    events = [("pulse", float(t), -1) for t in pulse_times]
    events += [("sample", float(t), i) for i, t in enumerate(sample_times)]
    events.sort(key=lambda e: (e[1], 0 if e[0] == "pulse" else 1))
    return events


def _check_norms(states: np.ndarray):
    norms = np.linalg.norm(states, axis=1)
    worst = float(np.abs(norms - 1.0).max())
    if worst > POLICY.norm_tol:
        raise ConvergenceError(f"norm drift {worst:.3e} beyond tolerance", residual=worst)


# ---------------------------------------------------------------------------
# Lindblad propagation (split-step)
# ---------------------------------------------------------------------------

def evolve_lindblad(
    h: Operator,
    spec: LindbladSpec,
    a_op: Operator,
    rho0: DensityMatrix,
    total_time: float,
    samples: int,
    dt: float | None = None,
) -> EvolutionResult:
    """Thermal-bath master equation for the oscillator mode.

    d rho/dt = -i[h, rho] + (gamma/2)(n_bar + 1) D[a] rho + (gamma/2) n_bar D[a^dag] rho,
    with D[O] rho = 2 O rho O^dag - O^dag O rho - rho O^dag O.

    Integrated by Strang splitting: the unitary conjugation is exact (cached
    dense propagator); the dissipator half-steps use a Taylor expansion whose
    truncation error is far below the splitting error at gamma dt << 1.
    """
    if rho0.dim != h.dim:
        raise ValueError("state dimension does not match Hamiltonian")
    times = _sample_times(total_time, samples)
    if dt is None:
        dt = total_time / 4000.0
    interval = times[1] - times[0]
    n_sub = max(1, int(np.ceil(interval / dt - 1e-12)))
    dt_actual = interval / n_sub

    prop = hermitian_propagator(h)
    u = prop.unitary(dt_actual)
    u_dag = u.conj().T

    a = scipy.sparse.csr_matrix(a_op.matrix)
    a_dag = scipy.sparse.csr_matrix(a_op.matrix.conj().T)
    ada = (a_dag @ a).toarray()
    aad = (a @ a_dag).toarray()
    g_down = 0.5 * spec.gamma * (spec.n_bar + 1.0)
    g_up = 0.5 * spec.gamma * spec.n_bar

    def dissipate(rho: np.ndarray, tau: float) -> np.ndarray:
        # exp(tau L_D) rho via Taylor series; ||tau L_D|| << 1 throughout.
        if spec.gamma == 0.0:
            return rho
        out = rho
        term = rho
        for order in range(1, 4):
            lterm = g_down * (2.0 * (a @ term @ a_dag) - ada @ term - term @ ada)
            lterm += g_up * (2.0 * (a_dag @ term @ a) - aad @ term - term @ aad)
            term = (tau / order) * lterm
            out = out + term
        return out

    rho = rho0.entries.copy()
    trace0 = float(np.trace(rho).real)
    out = np.empty((samples, h.dim, h.dim), dtype=np.complex128)
    out[0] = rho
    half = 0.5 * dt_actual
    for k in range(1, samples):
        for _ in range(n_sub):
            rho = dissipate(rho, half)
            rho = u @ rho @ u_dag
            rho = dissipate(rho, half)
        rho = 0.5 * (rho + rho.conj().T)
        out[k] = rho
        drift = abs(float(np.trace(rho).real) - trace0)
        if drift > POLICY.trace_drift_tol:
            raise ConvergenceError(f"trace drift {drift:.3e}", residual=drift)
    min_eig = float(np.linalg.eigvalsh(out[-1]).min())
    if min_eig < -1e-6:
        raise ConvergenceError(f"positivity violation {min_eig:.3e}", residual=min_eig)
    return EvolutionResult(
        times=times,
        rhos=out,
        metadata={"dt": dt_actual, "steps_per_sample": n_sub, "final_min_eigenvalue": min_eig},
    )


# ---------------------------------------------------------------------------
# Noisy trajectories (Strang splitting with diagonal noise)
# ---------------------------------------------------------------------------

def default_noise_dt(correlation_time: float, total_time: float) -> float:
    """Default splitting step: min(tau/200, T/4000)."""
    return min(correlation_time / 200.0, total_time / 4000.0)


@dataclass(frozen=True)
class NoiseChannel:
    """One noisy spin: a diagonal coupling operator and its OU parameters.

    ``diagonal`` is the full-space diagonal of the coupling operator that
    multiplies the instantaneous noise amplitude (e.g. tau_z/2 embedded in
    the layout).  ``spin_key`` tags the independent RNG stream.
    """

    diagonal: np.ndarray
    params: noise_mod.NoiseParams
    spin_key: int


def noise_channel(op: Operator, params: noise_mod.NoiseParams, spin_key: int) -> NoiseChannel:
    """Build a channel from a diagonal Operator; rejects non-diagonal input."""
    mat = op.matrix
    off = mat - np.diag(np.diag(mat))
    if np.any(off != 0):
        raise ValueError("noise operators must be diagonal in the computational basis")
    diag = np.diag(mat)
    if np.abs(diag.imag).max() > 0:
        raise ValueError("noise operators must be real diagonal (Hermitian)")
    return NoiseChannel(diagonal=diag.real.copy(), params=params, spin_key=spin_key)


@dataclass(frozen=True)
class _Grid:
    """Precomputed event/step sequence shared by a whole ensemble."""

    ops: list  # ("step", dt) | ("pulse", None) | ("sample", index)
    step_dts: np.ndarray


def _build_grid(total_time, sample_times, pulse_times, dt_noise) -> _Grid:
    events = _merge_events(sample_times, pulse_times)
    ops = []
    dts = []
    t_now = 0.0
    for kind, t_event, idx in events:
        span = t_event - t_now
        if span > 1e-15 * max(total_time, 1.0):
            n = max(1, int(round(span / dt_noise)))
            dt_seg = span / n
            for _ in range(n):
                ops.append(("step", dt_seg))
                dts.append(dt_seg)
            t_now = t_event
        if kind == "pulse":
            ops.append(("pulse", None))
        else:
            ops.append(("sample", idx))
    return _Grid(ops=ops, step_dts=np.asarray(dts))


class _UnitaryCache:
    def __init__(self, prop: CachedPropagator):
        self.prop = prop
        self._cache: dict[float, np.ndarray] = {}

    def get(self, dt: float) -> np.ndarray:
        u = self._cache.get(dt)
        if u is None:
            u = self.prop.unitary(dt)
            self._cache[dt] = u
        return u


def _propagate_noisy_batch(
    grid: _Grid,
    u_cache: _UnitaryCache,
    pulse_matrix: np.ndarray | None,
    channels: list[NoiseChannel],
    noise_values: np.ndarray,  # (n_steps, n_channels, batch)
    psi0: np.ndarray,          # (dim,)
    batch: int,
    on_sample,
) -> None:
    """Strang-split propagation of a batch of trajectories.

    Noise amplitudes are held constant within each step (value before the
    OU update); the base propagator enters as a cached dense unitary and the
    noise Hamiltonian as diagonal phase factors.
    """
    psi = np.repeat(psi0[:, None], batch, axis=1)
    diag = np.stack([c.diagonal for c in channels], axis=1) if channels else None
    step_idx = 0
    for kind, payload in grid.ops:
        if kind == "step":
            dt = payload
            if diag is not None:
                # (dim, n_channels) @ (n_channels, batch) -> per-trajectory diagonal
                d = diag @ noise_values[step_idx]
                phase = np.exp(-0.5j * dt * d)
                psi *= phase
                psi = u_cache.get(dt) @ psi
                psi *= phase
            else:
                psi = u_cache.get(dt) @ psi
            step_idx += 1
        elif kind == "pulse":
            psi = pulse_matrix @ psi
        else:
            on_sample(payload, psi)
    norms = np.linalg.norm(psi, axis=0)
    worst = float(np.abs(norms - 1.0).max())
    if worst > POLICY.norm_tol:
        raise ConvergenceError(f"trajectory norm drift {worst:.3e}", residual=worst)


def _channel_noise_values(
    channels: list[NoiseChannel],
    step_dts: np.ndarray,
    seed: int,
    realizations: np.ndarray,
) -> np.ndarray:
    """OU values per (step, channel, realization), drawn from counter-based
    streams keyed by (seed, realization, spin)."""
    n_steps = step_dts.shape[0]
    out = np.empty((n_steps, len(channels), realizations.shape[0]))
    for c, channel in enumerate(channels):
        traj = noise_mod.ou_trajectories(
            channel.params, step_dts, seed, realizations, channel.spin_key
        )
        out[:, c, :] = traj[:-1]  # value held during step k is the pre-update value
    return out


def evolve_noisy(
    h_base: Operator,
    noise_ops: list[tuple[Operator, noise_mod.NoiseProcess]],
    pulses: PulseSchedule | None,
    psi0: StateVector,
    total_time: float,
    samples: int,
    dt_noise: float | None = None,
    pulse_operator: Operator | None = None,
) -> EvolutionResult:
    """Single stochastic trajectory under piecewise-constant OU noise.

    ``noise_ops`` pairs each diagonal coupling operator with the stateful
    process that drives it.  The trajectory consumes the processes' RNG
    streams, so repeated calls continue the streams.
    """
    times = _sample_times(total_time, samples)
    if pulses is not None and pulses.times:
        pulses.validate_window(total_time)
        if pulse_operator is None:
            raise ValueError("pulse_operator required when a schedule is given")
    channels = []
    processes = []
    for k, (op, proc) in enumerate(noise_ops):
        channels.append(noise_channel(op, proc.params, spin_key=k))
        processes.append(proc)
    if dt_noise is None:
        tau_min = min((p.params.correlation_time for p in processes), default=np.inf)
        dt_noise = default_noise_dt(tau_min, total_time)
    grid = _build_grid(times[-1], times, pulses.times if pulses else (), dt_noise)

    n_steps = grid.step_dts.shape[0]
    values = np.empty((n_steps, len(channels), 1))
    for c, proc in enumerate(processes):
        for k in range(n_steps):
            values[k, c, 0] = proc.value
            proc.step(grid.step_dts[k])

    prop = hermitian_propagator(h_base)
    u_cache = _UnitaryCache(prop)
    out = np.empty((samples, h_base.dim), dtype=np.complex128)

    def on_sample(idx, psi):
        out[idx] = psi[:, 0]

    _propagate_noisy_batch(
        grid,
        u_cache,
        pulse_operator.matrix if pulse_operator is not None else None,
        channels,
        values,
        psi0.amplitudes,
        batch=1,
        on_sample=on_sample,
    )
    return EvolutionResult(
        times=times,
        states=out,
        metadata={"dt_noise": dt_noise, "n_steps": n_steps},
    )


class NoisyFidelityRunner:
    """Batch trajectory generator tracking fidelity against a fixed target.

    ``fidelity_fn(psi_batch) -> (batch,)`` maps full-space state columns to
    the tracked observable.  Instances are reusable across ensemble runs and
    pure given (seed, realization indices).
    """

    def __init__(
        self,
        h_base: Operator,
        channels: list[NoiseChannel],
        pulses: PulseSchedule | None,
        psi0: StateVector,
        total_time: float,
        samples: int,
        fidelity_fn,
        dt_noise: float | None = None,
        pulse_operator: Operator | None = None,
    ):
        self.times = _sample_times(total_time, samples)
        if pulses is not None and pulses.times:
            pulses.validate_window(total_time)
            if pulse_operator is None:
                raise ValueError("pulse_operator required when a schedule is given")
        if dt_noise is None:
            tau_min = min((c.params.correlation_time for c in channels), default=np.inf)
            dt_noise = default_noise_dt(tau_min, total_time)
        self.dt_noise = dt_noise
        self.grid = _build_grid(
            self.times[-1], self.times, pulses.times if pulses else (), dt_noise
        )
        self.u_cache = _UnitaryCache(hermitian_propagator(h_base))
        self.pulse_matrix = pulse_operator.matrix if pulse_operator is not None else None
        self.channels = channels
        self.psi0 = psi0.amplitudes
        self.samples = samples
        self.fidelity_fn = fidelity_fn

    def __call__(self, seed: int, realizations: np.ndarray) -> np.ndarray:
        values = _channel_noise_values(self.channels, self.grid.step_dts, seed, realizations)
        out = np.empty((self.samples, realizations.shape[0]))

        def on_sample(idx, psi):
            out[idx] = self.fidelity_fn(psi)

        _propagate_noisy_batch(
            self.grid,
            self.u_cache,
            self.pulse_matrix,
            self.channels,
            values,
            self.psi0,
            batch=realizations.shape[0],
            on_sample=on_sample,
        )
        return out


def ensemble_average(
    runner,
    n_realizations: int,
    seed: int,
    times: np.ndarray | None = None,
    workers: int = 1,
) -> EvolutionResult:
    """Mean and standard error of a per-sample observable over realizations.

    ``runner(seed, indices)`` must return an (n_samples, len(indices)) array.
    Realizations are split into fixed batches of :data:`ENSEMBLE_BATCH`, so
    the result is bit-identical for any worker count.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    chunks = [
        np.arange(start, min(start + ENSEMBLE_BATCH, n_realizations))
        for start in range(0, n_realizations, ENSEMBLE_BATCH)
    ]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: runner(seed, c), chunks))
    else:
        parts = [runner(seed, c) for c in chunks]
    values = np.concatenate(parts, axis=1)
    mean = values.mean(axis=1)
    if n_realizations > 1:
        stderr = values.std(axis=1, ddof=1) / np.sqrt(n_realizations)
    else:
        stderr = np.zeros_like(mean)
    if times is None and hasattr(runner, "times"):
        times = runner.times
    return EvolutionResult(
        times=times if times is not None else np.arange(values.shape[0], dtype=float),
        mean=mean,
        stderr=stderr,
        metadata={"n_realizations": n_realizations, "seed": seed},
    )
