"""Observables and verification tools.

Fidelity and codespace diagnostics, exponential decay-rate fitting, and the
classical basin analysis of the engineered jump dynamics: at zero noise every
correction operator maps computational basis states to basis states, so the
diagonal dynamics is a continuous-time Markov chain whose absorbing structure
decides which error patterns are repaired into which codeword.

Error patterns are sets of flipped qubit positions (0-based, in factor order)
applied to the all-zeros codeword; the repair is counted as correct only if
the chain returns to that codeword with probability one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .hilbert import DensityMatrix, Operator, TensorSpace
from .integrator import TimeSeries
from .models import LindbladModel

__all__ = [
    "fidelity",
    "codespace_projector",
    "distance_to_codespace",
    "logical_coherence",
    "DecayFit",
    "fit_decay_rate",
    "AbsorbingClass",
    "BasinReport",
    "classify_basins",
    "correction_order_sweep",
    "WeightSummary",
]

PROBABILITY_TOL = 1e-10


def fidelity(rho_ref: DensityMatrix, rho: DensityMatrix) -> float:
    """Overlap ``trace(rho_ref rho)``; equals 1 iff both are the same pure state."""
    if rho_ref.space != rho.space:
        raise ValueError("states live on different spaces")
    value = complex(np.sum(rho_ref.matrix.T * rho.matrix))
    if abs(value.imag) > 1e-12 * max(1.0, abs(value)):
        raise ValueError(f"fidelity has imaginary residue {value.imag:.3e}")
    return value.real


def _require_all_qubits(space: TensorSpace) -> None:
    if not space.is_all_qubits():
        raise ValueError(
            "space contains cavity factors; partial-trace them out first"
        )


def codespace_projector(space: TensorSpace) -> Operator:
    """Projector onto span(|0..0>, |1..1>) of an all-qubit space."""
    _require_all_qubits(space)
    d = space.total_dim
    mat = sp.csr_array(
        ([1.0 + 0j, 1.0 + 0j], ([0, d - 1], [0, d - 1])), shape=(d, d)
    )
    return Operator(space, mat)


def distance_to_codespace(rho: DensityMatrix) -> float:
    """Population outside the codespace: ``1 - trace(P rho)`` in [0, 1]."""
    _require_all_qubits(rho.space)
    d = rho.space.total_dim
    inside = float(rho.matrix[0, 0].real + rho.matrix[d - 1, d - 1].real)
    return 1.0 - inside


def logical_coherence(rho: DensityMatrix) -> float:
    """Magnitude of the codeword coherence |<0..0| rho |1..1>|."""
    _require_all_qubits(rho.space)
    return float(abs(rho.matrix[0, rho.space.total_dim - 1]))


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float


def fit_decay_rate(
    series: TimeSeries, column: str, window: tuple[float, float] | None = None
) -> DecayFit:
    """Fit ``column ~ A exp(-rate t)`` by least squares on the logarithm.

    ``window`` restricts the fit to ``window[0] <= t <= window[1]``; by
    default the second half of the sampled interval is used, which skips the
    initial transient of reduced-model comparisons.

    Raises:
        ValueError: if any value inside the window is not positive.
    """
    times = np.asarray(series.times, dtype=float)
    values = np.asarray(series.column(column), dtype=float)
    if window is None:
        window = (times[0] + 0.5 * (times[-1] - times[0]), times[-1])
    mask = (times >= window[0] - 1e-15) & (times <= window[1] + 1e-15)
    t = times[mask]
    y = values[mask]
    if t.size < 2:
        raise ValueError("window selects fewer than two samples")
    if np.any(y <= 0):
        raise ValueError("column has non-positive values inside the fit window")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return DecayFit(rate=-float(slope), r_squared=r2)


# ---------------------------------------------------------------------------
# classical basin analysis

@dataclass(frozen=True)
class AbsorbingClass:
    """A closed communicating class of the jump chain."""

    members: tuple[int, ...]
    kind: str  # "target-codeword" | "trapped"


@dataclass
class BasinReport:
    """Absorbing structure of the correction chain on basis states.

    ``probabilities[s, c]`` is the probability that basis state ``s`` is
    absorbed into ``absorbing_classes[c]``; every row sums to one.  A pattern counts as
    a failure when it is not absorbed into the all-zeros codeword with
    probability one.
    """

    space: TensorSpace
    n_states: int
    absorbing_classes: tuple[AbsorbingClass, ...]
    probabilities: np.ndarray
    failure_patterns: tuple[tuple[int, ...], ...]

    @property
    def codeword0_class(self) -> int:
        for i, cls in enumerate(self.absorbing_classes):
            if cls.members == (0,):
                return i
        raise RuntimeError("all-zeros codeword is not absorbing")

    def pattern_to_state(self, pattern: Sequence[int]) -> int:
        n = self.space.n_factors
        levels = [0] * n
        for pos in pattern:
            levels[pos] = 1
        return self.space.basis_index(levels)

    def state_to_pattern(self, state: int) -> tuple[int, ...]:
        levels = self.space.basis_levels(state)
        return tuple(i for i, v in enumerate(levels) if v)

    def outcome(self, state: int) -> tuple[int | None, np.ndarray]:
        """(dominant class or None if split, probability vector) for a state."""
        probs = self.probabilities[state]
        top = int(np.argmax(probs))
        dominant = top if probs[top] >= 1.0 - PROBABILITY_TOL else None
        return dominant, probs

    def prob_correct(self, pattern: Sequence[int]) -> float:
        state = self.pattern_to_state(pattern)
        return float(self.probabilities[state, self.codeword0_class])


def _as_clean_csc(op: Operator) -> sp.csc_array:
    csc = op.matrix.tocsc(copy=True)
    csc.eliminate_zeros()
    return csc


def _check_basis_permutation(csc: sp.csc_array) -> None:
    counts = np.diff(csc.indptr)
    if np.any(counts > 1):
        raise ValueError(
            "jump operator maps some basis state to a superposition; "
            "basin analysis needs basis-permutation jumps"
        )


def classify_basins(model: LindbladModel) -> BasinReport:
    """Absorbing classes and absorption probabilities of the jump chain.

    Only correction channels enter (the analysis is a zero-noise statement,
    so bit-flip channels are excluded).  The chain's transition rate from
    ``s`` to ``s'`` is ``sum_channels rate * |<s'|X|s>|^2``.

    Raises:
        ValueError: nonzero Hamiltonian, or a non-basis-permutation jump.
    """
    for op, _ in model.hamiltonian_terms:
        if op.nnz:
            raise ValueError("basin analysis needs a model with zero Hamiltonian")
    channels = [ch for ch in model.channels if ch.kind == "correction" and ch.rate > 0]
    if not channels:
        raise ValueError("model has no active correction channels")

    n = model.space.total_dim
    rows: list[int] = []
    cols: list[int] = []
    rates: list[float] = []
    for ch in channels:
        csc = _as_clean_csc(ch.op)
        _check_basis_permutation(csc)
        for s in range(n):
            lo, hi = csc.indptr[s], csc.indptr[s + 1]
            if lo == hi:
                continue
            target = int(csc.indices[lo])
            amp = csc.data[lo]
            if target == s:
                continue
            rows.append(s)
            cols.append(target)
            rates.append(ch.rate * float(abs(amp) ** 2))
    rate_graph = sp.csr_array((rates, (rows, cols)), shape=(n, n))

    n_comp, labels = connected_components(rate_graph, directed=True, connection="strong")
    # a component is closed iff no member has an edge leaving the component
    coo = rate_graph.tocoo()
    open_comp = set()
    for s, t in zip(coo.row, coo.col):
        if labels[s] != labels[t]:
            open_comp.add(labels[s])
    closed = sorted(
        (c for c in range(n_comp) if c not in open_comp),
        key=lambda c: int(np.min(np.where(labels == c)[0])),
    )
    classes = []
    for c in closed:
        members = tuple(int(s) for s in np.where(labels == c)[0])
        kind = "target-codeword" if members in ((0,), (n - 1,)) else "trapped"
        classes.append(AbsorbingClass(members, kind))

    closed_index = {c: i for i, c in enumerate(closed)}
    in_closed = np.array([labels[s] in closed_index for s in range(n)])
    transient = np.where(~in_closed)[0]
    k = len(classes)
    probabilities = np.zeros((n, k))
    for s in range(n):
        if in_closed[s]:
            probabilities[s, closed_index[labels[s]]] = 1.0

    if transient.size:
        # embedded jump chain restricted to transient states
        out_rate = np.asarray(rate_graph.sum(axis=1)).reshape(-1)
        t_index = {int(s): i for i, s in enumerate(transient)}
        coo = rate_graph.tocoo()
        p_tt_rows, p_tt_cols, p_tt_vals = [], [], []
        feed = np.zeros((transient.size, k))
        for s, t, r in zip(coo.row, coo.col, coo.data):
            if in_closed[s]:
                continue
            p = r / out_rate[s]
            if in_closed[t]:
                feed[t_index[s], closed_index[labels[t]]] += p
            else:
                p_tt_rows.append(t_index[s])
                p_tt_cols.append(t_index[t])
                p_tt_vals.append(p)
        p_tt = sp.csr_array(
            (p_tt_vals, (p_tt_rows, p_tt_cols)), shape=(transient.size, transient.size)
        )
        system = (sp.eye_array(transient.size, format="csc") - p_tt).tocsc()
        lu = splu(system)
        probabilities[transient] = lu.solve(feed)

    row_sums = probabilities.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > PROBABILITY_TOL):
        worst = float(np.max(np.abs(row_sums - 1.0)))
        raise RuntimeError(f"absorption probabilities do not sum to 1 (off by {worst:.3e})")

    report = BasinReport(
        space=model.space,
        n_states=n,
        absorbing_classes=tuple(classes),
        probabilities=probabilities,
        failure_patterns=(),
    )
    failures = []
    c0 = report.codeword0_class
    for s in range(n):
        if probabilities[s, c0] < 1.0 - PROBABILITY_TOL:
            failures.append(report.state_to_pattern(s))
    failures.sort(key=lambda p: (len(p), p))
    report.failure_patterns = tuple(failures)
    return report


@dataclass(frozen=True)
class WeightSummary:
    """Per-weight verdict of the exhaustive pattern classification."""

    weight: int
    n_patterns: int
    n_corrected: int
    n_failed: int
    failures: tuple[tuple[int, ...], ...]


def correction_order_sweep(model: LindbladModel, k_max: int) -> list[WeightSummary]:
    """Classify every error pattern of weight <= k_max.

    A pattern is corrected when the chain started from it is absorbed into
    the all-zeros codeword with probability one.
    """
    report = classify_basins(model)
    n_qubits = model.space.n_factors
    rows = []
    for w in range(k_max + 1):
        failures = []
        n_patterns = 0
        for pattern in combinations(range(n_qubits), w):
            n_patterns += 1
            if report.prob_correct(pattern) < 1.0 - PROBABILITY_TOL:
                failures.append(pattern)
        rows.append(
            WeightSummary(
                weight=w,
                n_patterns=n_patterns,
                n_corrected=n_patterns - len(failures),
                n_failed=len(failures),
                failures=tuple(failures),
            )
        )
    return rows
