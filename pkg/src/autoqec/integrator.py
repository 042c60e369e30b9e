"""Time evolution of Lindblad models.

Three entry points:

* :func:`propagate_master` -- deterministic density-matrix integration of
  ``drho/dt = -i[H(t), rho] + sum_c rate_c D_{X_c}(rho)``.
* :func:`propagate_trajectories` -- Monte-Carlo wavefunction unravelling with
  norm-triggered jumps; the ensemble average reproduces the master equation.
* :func:`liouvillian_gap` -- iterative (Krylov) estimation of the generator's
  eigenvalues nearest zero, applied matrix-free.

The Liouvillian is never materialised here: Hamiltonians and jump operators
are applied directly to states.  Piecewise-constant channel gating is handled
exactly by never stepping across a switching boundary.

Reproducibility contract for trajectories: trajectory ``i`` of a run with seed
``s`` draws from ``numpy.random.Philox(key=[s, i])``.  Per trajectory, one
uniform variate is drawn up front as the first jump threshold; each jump then
draws one uniform for the channel choice followed by one uniform for the next
threshold.  Results are therefore bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hilbert import DensityMatrix, Operator, PureState
from .models import LindbladModel

__all__ = [
    "PropagationConfig",
    "TrajectoryConfig",
    "TimeSeries",
    "Observable",
    "GapResult",
    "IntegrationError",
    "NonConvergenceError",
    "propagate_master",
    "propagate_trajectories",
    "liouvillian_gap",
]

MASTER_DIM_LIMIT = 4096
GAP_DIM_LIMIT = 512
# operators act as dense matrices below this dimension (pure speed tradeoff)
_DENSE_THRESHOLD = 128


class IntegrationError(RuntimeError):
    """Step underflow or an invalid state during propagation."""


class NonConvergenceError(RuntimeError):
    """Iterative eigenvalue estimation did not converge."""


@dataclass(frozen=True)
class PropagationConfig:
    """Integration horizon, sampling grid and stepping options.

    ``method`` is ``"adaptive"`` (embedded Dormand-Prince pair, default) or
    ``"rk4"`` (fixed step, requires finite ``max_step``).
    """

    t_final: float
    sample_times: tuple[float, ...]
    method: str = "adaptive"
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_step: float = math.inf

    def __post_init__(self) -> None:
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        ts = tuple(float(t) for t in self.sample_times)
        if list(ts) != sorted(ts):
            raise ValueError("sample_times must be sorted")
        if ts and (ts[0] < 0 or ts[-1] > self.t_final + 1e-15):
            raise ValueError("sample_times must lie within [0, t_final]")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.method not in ("adaptive", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and not math.isfinite(self.max_step):
            raise ValueError("rk4 needs a finite max_step")
        object.__setattr__(self, "sample_times", ts)

    @classmethod
    def linspace(cls, t_final: float, n_samples: int = 101, **kwargs) -> "PropagationConfig":
        return cls(t_final, tuple(np.linspace(0.0, t_final, n_samples)), **kwargs)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Ensemble size, RNG seed and jump-location tolerance."""

    n_traj: int
    seed: int
    jump_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.jump_tol <= 0:
            raise ValueError("jump_tol must be > 0")


@dataclass
class TimeSeries:
    """Sampled observables over time, with optional Monte-Carlo errors."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    mc_stderr: dict[str, np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.times)
        for name, col in self.observables.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} length {len(col)} != {n}")
        if self.mc_stderr:
            for name, col in self.mc_stderr.items():
                if len(col) != n:
                    raise ValueError(f"stderr column {name!r} has wrong length")

    def column(self, name: str) -> np.ndarray:
        return self.observables[name]

    def header(self) -> list[str]:
        cols = ["time"]
        for name in self.observables:
            cols.append(name)
            if self.mc_stderr and name in self.mc_stderr:
                cols.append(f"{name}_stderr")
        return cols

    def rows(self):
        for i, t in enumerate(self.times):
            row = [float(t)]
            for name in self.observables:
                row.append(float(self.observables[name][i]))
                if self.mc_stderr and name in self.mc_stderr:
                    row.append(float(self.mc_stderr[name][i]))
            yield row

    def to_csv(self, path) -> None:
        """Write ``time,<obs>[,<obs>_stderr],...`` at full double precision."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.header()) + "\n")
            for row in self.rows():
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


@dataclass(frozen=True)
class Observable:
    """Named quantity sampled during propagation.

    ``target`` selects the rule: an :class:`Operator` is an expectation value,
    a :class:`DensityMatrix` or :class:`PureState` a fidelity against that
    reference.  ``reduce`` is ``"real"`` for Hermitian expectations or
    ``"abs"`` for transition-amplitude magnitudes (e.g. logical coherence).
    """

    name: str
    target: object
    reduce: str = "real"
    scale: float = 1.0
    offset: float = 0.0


def _normalize_observables(observables) -> list[Observable]:
    out = []
    for item in observables:
        if isinstance(item, Observable):
            out.append(item)
        else:
            name, target = item
            out.append(Observable(name, target))
    if len({o.name for o in out}) != len(out):
        raise ValueError("observable names must be unique")
    return out


def _eval_on_rho(obs: Observable, rho: np.ndarray) -> complex:
    t = obs.target
    if isinstance(t, Operator):
        return t.expectation(rho)
    if isinstance(t, DensityMatrix):
        return complex(np.sum(t.matrix.T * rho))  # trace(ref @ rho)
    if isinstance(t, PureState):
        return complex(t.amplitudes.conj() @ rho @ t.amplitudes)
    raise TypeError(f"unsupported observable target {type(t).__name__}")


def _eval_on_psi(obs: Observable, psi: np.ndarray, norm2: float) -> complex:
    t = obs.target
    if isinstance(t, Operator):
        return complex(psi.conj() @ (t.matrix @ psi)) / norm2
    if isinstance(t, DensityMatrix):
        return complex(psi.conj() @ (t.matrix @ psi)) / norm2
    if isinstance(t, PureState):
        amp = complex(t.amplitudes.conj() @ psi)
        return complex(abs(amp) ** 2 / norm2)
    raise TypeError(f"unsupported observable target {type(t).__name__}")


def _reduce(obs: Observable, value: complex) -> float:
    if obs.reduce == "abs":
        return abs(value)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value)):
        raise IntegrationError(
            f"observable {obs.name!r} has non-negligible imaginary part {value.imag:.3e}"
        )
    return value.real


# ---------------------------------------------------------------------------
# right-hand sides

def _maybe_dense(op: Operator, dim: int):
    return op.to_dense() if dim <= _DENSE_THRESHOLD else op.matrix.tocsr()


class _ModelTerms:
    """Pre-extracted operators of one model, keyed by gating signature.

    For every distinct on/off pattern of the profiles the non-Hermitian
    drift ``H_nh = H_active - (i/2) sum rate X^dag X`` and the list of active
    sandwich operators are assembled once and reused.
    """

    def __init__(self, model: LindbladModel) -> None:
        d = model.space.total_dim
        self.dim = d
        self.h_terms = [
            (_maybe_dense(op, d), profile) for op, profile in model.hamiltonian_terms
        ]
        self.channels = []
        for ch in model.channels:
            if ch.rate == 0.0:
                continue
            x = _maybe_dense(ch.op, d)
            xdag = _maybe_dense(ch.op.dag(), d)
            xdx = (ch.op.dag() @ ch.op).to_dense()
            self.channels.append((ch.rate, x, xdag, xdx, ch.profile))
        self._cache: dict[tuple, tuple] = {}

    def signature(self, t: float) -> tuple:
        return (
            tuple(p.value(t) for _, p in self.h_terms),
            tuple(p.value(t) for *_, p in self.channels),
        )

    def assembled(self, t: float):
        """(H_nh, active sandwich channels) for the window containing t."""
        sig = self.signature(t)
        hit = self._cache.get(sig)
        if hit is not None:
            return hit
        h_sig, c_sig = sig
        h_nh = np.zeros((self.dim, self.dim), dtype=complex)
        for (h, _), v in zip(self.h_terms, h_sig):
            if v:
                h_nh = h_nh + v * (h.toarray() if sp.issparse(h) else h)
        active = []
        for (rate, x, xdag, xdx, _), v in zip(self.channels, c_sig):
            if v:
                h_nh -= 0.5j * (v * rate) * xdx
                active.append((v * rate, x, xdag))
        if self.dim > _DENSE_THRESHOLD:
            h_nh_mat = sp.csr_array(h_nh)
        else:
            h_nh_mat = h_nh
        result = (h_nh_mat, h_nh_mat.conjugate().T, tuple(active))
        self._cache[sig] = result
        return result

    def master_rhs(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        h_nh, h_nh_dag, active = self.assembled(t)
        dim = self.dim

        def rhs(y: np.ndarray) -> np.ndarray:
            rho = y.reshape(dim, dim)
            out = -1j * (h_nh @ rho - rho @ h_nh_dag)
            for rate, x, xdag in active:
                out += rate * ((x @ rho) @ xdag)
            return out.reshape(-1)

        return rhs

    def schrodinger_rhs(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        h_nh, _, _ = self.assembled(t)

        def rhs(psi: np.ndarray) -> np.ndarray:
            return -1j * (h_nh @ psi)

        return rhs

    def jump_weights(self, t: float, psi: np.ndarray) -> np.ndarray:
        """Unnormalised channel probabilities rate * |X psi|^2 at time t."""
        weights = np.empty(len(self.channels))
        for k, (rate, x, _, _, profile) in enumerate(self.channels):
            v = profile.value(t)
            weights[k] = v * rate * float(np.vdot(x @ psi, x @ psi).real) if v else 0.0
        return weights

    def apply_jump(self, k: int, psi: np.ndarray) -> np.ndarray:
        _, x, _, _, _ = self.channels[k]
        return x @ psi


# ---------------------------------------------------------------------------
# embedded Dormand-Prince stepping

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
# difference between the 5th-order weights and the embedded 4th-order weights
_DP_E = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)

_MIN_STEP_FACTOR = 1e-14
# segment loops stop this close to the endpoint; must exceed the underflow floor
_EDGE_EPS = 1e-13


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, atol: float, rtol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


class _AdaptiveStepper:
    """Dormand-Prince 5(4) with PI-free step control, FSAL reuse."""

    def __init__(self, rhs, t: float, y: np.ndarray, atol: float, rtol: float, max_step: float) -> None:
        self.rhs = rhs
        self.t = t
        self.y = y
        self.atol = atol
        self.rtol = rtol
        self.max_step = max_step
        self.f0 = rhs(y)
        self.h = self._initial_step()

    def _initial_step(self) -> float:
        scale = np.linalg.norm(self.f0)
        ref = max(float(np.linalg.norm(self.y)), self.atol)
        if scale == 0.0:
            return self.max_step if math.isfinite(self.max_step) else 1.0
        return min(self.max_step, 0.01 * ref / scale)

    def step_to(self, t_end: float) -> tuple[float, np.ndarray]:
        """Advance by one accepted step, never beyond ``t_end``."""
        while True:
            h = min(self.h, self.max_step, t_end - self.t)
            if h <= _MIN_STEP_FACTOR * max(1.0, abs(self.t)):
                raise IntegrationError(
                    f"step size underflow at t={self.t!r} (h={h!r})"
                )
            k = [self.f0]
            for i in range(1, 7):
                yi = self.y + h * sum(a * ki for a, ki in zip(_DP_A[i], k) if a)
                k.append(self.rhs(yi))
            y1 = yi  # stage 7 uses the 5th-order weights: c7 = 1, a7* = b5
            err = h * sum(e * ki for e, ki in zip(_DP_E, k) if e)
            err_norm = _error_norm(err, self.y, y1, self.atol, self.rtol)
            if err_norm <= 1.0:
                self.t = self.t + h
                self.y = y1
                self.f0 = k[6]  # FSAL
                grow = 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0
                self.h = h * min(5.0, max(0.2, grow))
                return self.t, self.y
            self.h = h * min(1.0, max(0.2, 0.9 * err_norm ** -0.2))


def _integrate_adaptive(rhs, t0: float, y0: np.ndarray, t1: float, atol, rtol, max_step) -> np.ndarray:
    if t1 <= t0:
        return y0
    stepper = _AdaptiveStepper(rhs, t0, y0.copy(), atol, rtol, max_step)
    while stepper.t < t1 - _EDGE_EPS * max(1.0, abs(t1)):
        stepper.step_to(t1)
    return stepper.y


def _integrate_rk4(rhs, t0: float, y0: np.ndarray, t1: float, step: float) -> np.ndarray:
    if t1 <= t0:
        return y0
    n = max(1, int(math.ceil((t1 - t0) / step - 1e-12)))
    h = (t1 - t0) / n
    y = y0.copy()
    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


# ---------------------------------------------------------------------------
# master equation propagation

def _segment_edges(model: LindbladModel, config: PropagationConfig) -> list[float]:
    edges = {0.0, float(config.t_final)}
    edges.update(float(t) for t in config.sample_times)
    edges.update(model.switch_times(0.0, float(config.t_final)))
    return sorted(edges)


def propagate_master(
    model: LindbladModel,
    rho0: DensityMatrix,
    config: PropagationConfig,
    observables: Sequence,
) -> TimeSeries:
    """Integrate the master equation and sample observables.

    Conservation diagnostics (peak trace drift over the sample grid, final
    Hermiticity residual, final minimum eigenvalue) are stored in
    ``TimeSeries.metadata`` together with the final state under
    ``"final_state"``.

    Raises:
        ValueError: state/model space mismatch or dimension above 4096.
        IntegrationError: step-size underflow.
    """
    if rho0.space != model.space:
        raise ValueError("initial state lives on a different space")
    d = model.space.total_dim
    if d > MASTER_DIM_LIMIT:
        raise ValueError(f"total_dim {d} exceeds master-equation guard {MASTER_DIM_LIMIT}")

    obs = _normalize_observables(observables)
    terms = _ModelTerms(model)
    edges = _segment_edges(model, config)
    sample_set = {round(float(t), 15) for t in config.sample_times}

    y = rho0.matrix.astype(complex).reshape(-1).copy()
    times: list[float] = []
    columns: dict[str, list[float]] = {o.name: [] for o in obs}
    trace0 = float(np.trace(rho0.matrix).real)
    max_drift = 0.0

    def record(t: float) -> None:
        rho = y.reshape(d, d)
        nonlocal max_drift
        max_drift = max(max_drift, abs(float(np.trace(rho).real) - trace0))
        times.append(t)
        for o in obs:
            raw = _reduce(o, _eval_on_rho(o, rho))
            columns[o.name].append(o.offset + o.scale * raw)

    if round(0.0, 15) in sample_set:
        record(0.0)
    for a, b in zip(edges[:-1], edges[1:]):
        t_mid = 0.5 * (a + b)
        rhs = terms.master_rhs(t_mid)
        if config.method == "rk4":
            y = _integrate_rk4(rhs, a, y, b, config.max_step)
        else:
            y = _integrate_adaptive(rhs, a, y, b, config.abs_tol, config.rel_tol, config.max_step)
        if round(b, 15) in sample_set:
            record(b)

    rho_final = y.reshape(d, d)
    herm_err = float(np.linalg.norm(rho_final - rho_final.conj().T))
    eigvals = np.linalg.eigvalsh(0.5 * (rho_final + rho_final.conj().T))
    series = TimeSeries(
        times=np.array(times),
        observables={k: np.array(v) for k, v in columns.items()},
        metadata={
            "scheme": model.scheme,
            "method": config.method,
            "trace_drift": max_drift,
            "hermiticity_error": herm_err,
            "min_eigenvalue": float(eigvals.min()),
            "final_state": DensityMatrix.unchecked(model.space, rho_final),
        },
    )
    return series


# ---------------------------------------------------------------------------
# Monte-Carlo wavefunction trajectories

def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """The documented per-trajectory stream: Philox keyed by (seed, index)."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _run_single_trajectory(
    terms: _ModelTerms,
    model: LindbladModel,
    psi0: np.ndarray,
    config: PropagationConfig,
    traj_config: TrajectoryConfig,
    obs: list[Observable],
    index: int,
) -> np.ndarray:
    """One unravelled trajectory; returns complex array (n_obs, n_samples)."""
    rng = _trajectory_rng(traj_config.seed, index)
    threshold = rng.uniform()
    psi = psi0.astype(complex).copy()

    edges = _segment_edges(model, config)
    sample_set = {round(float(t), 15) for t in config.sample_times}
    n_samples = len(config.sample_times)
    values = np.empty((len(obs), n_samples), dtype=complex)
    cursor = 0

    def record(t: float) -> None:
        nonlocal cursor
        norm2 = float(np.vdot(psi, psi).real)
        if norm2 <= 0.0:
            raise IntegrationError("zero-norm state in trajectory")
        for i, o in enumerate(obs):
            values[i, cursor] = _eval_on_psi(o, psi, norm2)
        cursor += 1

    def locate_jump(rhs, t_lo: float, psi_lo: np.ndarray, t_hi: float) -> tuple[float, np.ndarray]:
        """Bisect the crossing of |psi|^2 through the threshold in (t_lo, t_hi]."""
        lo, hi = t_lo, t_hi
        psi_hi = None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            psi_mid = _integrate_adaptive(
                rhs, t_lo, psi_lo, mid, config.abs_tol, config.rel_tol, config.max_step
            )
            n2 = float(np.vdot(psi_mid, psi_mid).real)
            if abs(n2 - threshold) <= traj_config.jump_tol:
                return mid, psi_mid
            if n2 > threshold:
                lo = mid
            else:
                hi, psi_hi = mid, psi_mid
        if psi_hi is None:
            psi_hi = _integrate_adaptive(
                rhs, t_lo, psi_lo, hi, config.abs_tol, config.rel_tol, config.max_step
            )
        return hi, psi_hi

    def do_jump(t: float) -> None:
        nonlocal psi, threshold
        weights = terms.jump_weights(t, psi)
        total = float(weights.sum())
        if total <= 0.0:
            raise IntegrationError("jump triggered but all channels inactive")
        choice = rng.uniform()
        k = int(np.searchsorted(np.cumsum(weights) / total, choice, side="right"))
        k = min(k, len(weights) - 1)
        psi = terms.apply_jump(k, psi)
        norm = float(np.linalg.norm(psi))
        if norm == 0.0:
            raise IntegrationError("zero-norm state after jump")
        psi /= norm
        threshold = rng.uniform()

    if round(0.0, 15) in sample_set:
        record(0.0)
    for a, b in zip(edges[:-1], edges[1:]):
        rhs = terms.schrodinger_rhs(0.5 * (a + b))
        t = a
        while t < b - _EDGE_EPS * max(1.0, b):
            stepper = _AdaptiveStepper(rhs, t, psi, config.abs_tol, config.rel_tol, config.max_step)
            jumped = False
            while stepper.t < b - _EDGE_EPS * max(1.0, b):
                t_prev, psi_prev = stepper.t, stepper.y.copy()
                t_new, psi_new = stepper.step_to(b)
                if float(np.vdot(psi_new, psi_new).real) < threshold:
                    t_star, psi_star = locate_jump(rhs, t_prev, psi_prev, t_new)
                    psi = psi_star
                    do_jump(t_star)
                    t = t_star
                    jumped = True
                    break
            if not jumped:
                psi = stepper.y
                t = b
        if round(b, 15) in sample_set:
            record(b)
    return values


def _trajectory_batch(args) -> tuple[int, np.ndarray]:
    (model, psi0, config, traj_config, obs, start, count) = args
    terms = _ModelTerms(model)
    out = np.empty((count, len(obs), len(config.sample_times)), dtype=complex)
    for k in range(count):
        out[k] = _run_single_trajectory(
            terms, model, psi0, config, traj_config, obs, start + k
        )
    return start, out


def propagate_trajectories(
    model: LindbladModel,
    psi0: PureState,
    config: PropagationConfig,
    traj_config: TrajectoryConfig,
    observables: Sequence,
    n_workers: int = 1,
) -> TimeSeries:
    """Average ``n_traj`` Monte-Carlo wavefunction trajectories.

    Columns carry the ensemble mean of each observable; ``mc_stderr`` holds
    the standard error of that mean.  Identical (seed, n_traj) runs produce
    bit-identical output for any ``n_workers``.
    """
    if psi0.space != model.space:
        raise ValueError("initial state lives on a different space")
    obs = _normalize_observables(observables)
    n_traj = traj_config.n_traj

    if n_workers <= 1 or n_traj == 1:
        batches = [_trajectory_batch((model, psi0.amplitudes, config, traj_config, obs, 0, n_traj))]
    else:
        n_workers = min(n_workers, n_traj)
        chunk = (n_traj + n_workers - 1) // n_workers
        jobs = []
        start = 0
        while start < n_traj:
            count = min(chunk, n_traj - start)
            jobs.append((model, psi0.amplitudes, config, traj_config, obs, start, count))
            start += count
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            batches = list(pool.map(_trajectory_batch, jobs))

    all_values = np.empty((n_traj, len(obs), len(config.sample_times)), dtype=complex)
    for start, block in sorted(batches, key=lambda item: item[0]):
        all_values[start:start + block.shape[0]] = block

    columns: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    for i, o in enumerate(obs):
        vals = all_values[:, i, :]
        mean = vals.mean(axis=0)
        if n_traj > 1:
            var = vals.var(axis=0, ddof=1)
            se = np.sqrt(np.abs(var) / n_traj)
        else:
            se = np.zeros(mean.shape)
        reduced = np.abs(mean) if o.reduce == "abs" else mean.real
        columns[o.name] = o.offset + o.scale * reduced
        stderr[o.name] = abs(o.scale) * np.real(se)
    return TimeSeries(
        times=np.array([float(t) for t in config.sample_times]),
        observables=columns,
        mc_stderr=stderr,
        metadata={"scheme": model.scheme, "n_traj": n_traj, "seed": traj_config.seed},
    )


# ---------------------------------------------------------------------------
# Liouvillian spectral gap

@dataclass(frozen=True)
class GapResult:
    """Eigenvalues of the generator nearest zero.

    ``gap`` is the smallest nonzero ``|Re(lambda)|``; eigenvalues within
    ``zero_tol`` of zero are counted as the stationary subspace.  Krylov
    iteration resolves degenerate clusters only up to the requested window,
    so ``steady_multiplicity`` is a lower bound when the stationary space
    is larger than ``n_eigs`` allows.
    """

    gap: float
    eigenvalues: np.ndarray
    steady_multiplicity: int
    zero_tol: float


def _liouvillian_operator(terms: _ModelTerms, shift: float = 0.0) -> spla.LinearOperator:
    d = terms.dim
    h_nh, h_nh_dag, active = terms.assembled(0.0)

    def matvec(vec: np.ndarray) -> np.ndarray:
        rho = vec.reshape(d, d)
        out = -1j * (h_nh @ rho - rho @ h_nh_dag)
        for rate, x, xdag in active:
            out += rate * ((x @ rho) @ xdag)
        if shift:
            out += shift * rho
        return out.reshape(-1)

    return spla.LinearOperator((d * d, d * d), matvec=matvec, dtype=complex)


def liouvillian_gap(
    model: LindbladModel,
    n_eigs: int = 24,
    tol: float = 1e-10,
    max_iter: int | None = None,
    zero_tol: float | None = None,
    ncv: int | None = None,
) -> GapResult:
    """Estimate the spectral gap of a time-independent model, matrix-free.

    Uses implicitly restarted Arnoldi iteration on the vectorised generator
    to find the ``n_eigs`` eigenvalues of largest real part (the generator's
    spectrum lies in the closed left half-plane, so these are the ones
    nearest zero).

    Raises:
        ValueError: time-dependent model or dimension above 512.
        NonConvergenceError: Arnoldi iteration did not converge.
    """
    if not model.is_time_independent:
        raise ValueError("liouvillian_gap needs a time-independent model")
    d = model.space.total_dim
    if d > GAP_DIM_LIMIT:
        raise ValueError(f"total_dim {d} exceeds spectral-gap guard {GAP_DIM_LIMIT}")

    terms = _ModelTerms(model)
    n = d * d
    k = min(n_eigs, n - 2)
    if ncv is None:
        ncv = min(n, max(4 * k + 1, 40))
    rng = np.random.default_rng(20210905)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    # With a zero Hamiltonian the spectrum is real and bounded below by
    # -2 sum_c rate_c ||X_c||^2, so the eigenvalues nearest zero dominate the
    # shifted operator c*I + L and plain power iteration ranks them correctly.
    # Hamiltonian models can carry large imaginary parts that break that
    # ranking; they use largest-real-part mode directly.
    zero_hamiltonian = all(op.nnz == 0 for op, _ in model.hamiltonian_terms) or not model.hamiltonian_terms
    try:
        if zero_hamiltonian:
            # |lambda| <= 2 sum rate ||X||_2^2 and ||X||_2^2 <= ||X^dag X||_inf
            bound = 2.0 * sum(
                ch.rate * float(np.max(abs((ch.op.dag() @ ch.op).matrix).sum(axis=1)))
                for ch in model.channels
                if ch.rate > 0
            )
            shift = 1.25 * bound + 1.0
            lop = _liouvillian_operator(terms, shift=shift)
            vals = spla.eigs(
                lop, k=k, which="LM", v0=v0, ncv=ncv, maxiter=max_iter, tol=tol,
                return_eigenvectors=False,
            )
            vals = vals - shift
        else:
            lop = _liouvillian_operator(terms)
            vals = spla.eigs(
                lop, k=k, which="LR", v0=v0, ncv=ncv, maxiter=max_iter, tol=tol,
                return_eigenvectors=False,
            )
    except spla.ArpackNoConvergence as exc:
        raise NonConvergenceError(
            f"Arnoldi iteration did not converge ({exc})"
        ) from exc

    vals = np.array(sorted(vals, key=lambda z: -z.real))
    if zero_tol is None:
        scale = max(model.max_rate(), float(np.abs(vals).max()), 1.0)
        zero_tol = 1e-8 * scale
    re = np.abs(vals.real)
    nonzero = re[re > zero_tol]
    steady = int(np.sum(np.abs(vals) <= zero_tol))
    if nonzero.size == 0:
        raise NonConvergenceError(
            "no nonzero eigenvalue found; increase n_eigs"
        )
    return GapResult(
        gap=float(nonzero.min()),
        eigenvalues=vals,
        steady_multiplicity=steady,
        zero_tol=float(zero_tol),
    )
