"""Independent brute-force references for verification.

Everything here trades speed for transparency and deliberately avoids the
production code paths: the generator is materialised as a dense superoperator
and exponentiated, chains are built from dense matrix elements, and closed
classes are found by boolean reachability.  Test suites compare these against
the matrix-free propagators and the sparse chain solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .hilbert import DensityMatrix, make_space
from .models import LindbladModel

__all__ = [
    "dense_liouvillian",
    "dense_propagate",
    "closed_form_bitflip",
    "DenseChain",
    "dense_chain",
]

DENSE_DIM_LIMIT = 64
CHAIN_DIM_LIMIT = 512


def dense_liouvillian(model: LindbladModel) -> np.ndarray:
    """Dense d^2 x d^2 generator acting on row-major vectorised states."""
    if not model.is_time_independent:
        raise ValueError("dense oracle needs a time-independent model")
    d = model.space.total_dim
    if d > DENSE_DIM_LIMIT:
        raise ValueError(f"total_dim {d} exceeds dense-oracle guard {DENSE_DIM_LIMIT}")
    eye = np.eye(d, dtype=complex)
    lv = np.zeros((d * d, d * d), dtype=complex)
    for op, _ in model.hamiltonian_terms:
        h = op.to_dense()
        lv += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in model.channels:
        if ch.rate == 0.0:
            continue
        x = ch.op.to_dense()
        xdx = x.conj().T @ x
        lv += ch.rate * (
            np.kron(x, x.conj())
            - 0.5 * np.kron(xdx, eye)
            - 0.5 * np.kron(eye, xdx.T)
        )
    return lv


def dense_propagate(model: LindbladModel, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Propagate by scaling-and-squaring exponential of the dense generator."""
    if rho0.space != model.space:
        raise ValueError("initial state lives on a different space")
    d = model.space.total_dim
    lv = dense_liouvillian(model)
    vec = rho0.matrix.reshape(-1)
    out = expm(lv * t) @ vec
    return DensityMatrix.unchecked(model.space, out.reshape(d, d))


def closed_form_bitflip(gamma: float, t: float) -> DensityMatrix:
    """Exact solution of a single bit-flipped qubit started in |0><0|."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    space = make_space([("q1", 2, "qubit")])
    p = 0.5 * (1.0 + np.exp(-2.0 * gamma * t))
    return DensityMatrix(space, np.diag([p, 1.0 - p]).astype(complex))


@dataclass
class DenseChain:
    """Explicit transition-rate matrix of the correction jump chain.

    ``rates[s, t]`` is the total rate from basis state ``s`` to ``t``;
    ``closed_classes`` are the closed communicating classes and
    ``absorption[s, c]`` the probability of ending in class ``c`` from ``s``.
    """

    rates: np.ndarray
    closed_classes: tuple[tuple[int, ...], ...]
    absorption: np.ndarray


def dense_chain(model: LindbladModel) -> DenseChain:
    """Build the chain from dense matrix elements and solve it directly."""
    for op, _ in model.hamiltonian_terms:
        if op.nnz:
            raise ValueError("chain oracle needs a model with zero Hamiltonian")
    d = model.space.total_dim
    if d > CHAIN_DIM_LIMIT:
        raise ValueError(f"total_dim {d} exceeds chain-oracle guard {CHAIN_DIM_LIMIT}")

    rates = np.zeros((d, d))
    for ch in model.channels:
        if ch.kind != "correction" or ch.rate == 0.0:
            continue
        x = ch.op.to_dense()
        if np.any(np.count_nonzero(x, axis=0) > 1):
            raise ValueError("jump operator is not a basis permutation")
        # x[t, s] is the s -> t amplitude, so transpose into rates[s, t]
        rates += ch.rate * (np.abs(x) ** 2).T
    np.fill_diagonal(rates, 0.0)

    # boolean reachability closure by repeated squaring
    reach = (rates > 0) | np.eye(d, dtype=bool)
    while True:
        nxt = (reach.astype(np.int32) @ reach.astype(np.int32)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt

    # s is in a closed class iff everything reachable from s reaches s back
    closed_membership = np.array(
        [bool(np.all(~reach[s] | reach[:, s])) for s in range(d)]
    )
    classes: list[tuple[int, ...]] = []
    assigned = np.full(d, -1)
    for s in range(d):
        if not closed_membership[s] or assigned[s] >= 0:
            continue
        members = tuple(
            int(t) for t in range(d)
            if closed_membership[t] and reach[s, t] and reach[t, s]
        )
        for t in members:
            assigned[t] = len(classes)
        classes.append(members)

    k = len(classes)
    absorption = np.zeros((d, k))
    transient = [s for s in range(d) if assigned[s] < 0]
    for s in range(d):
        if assigned[s] >= 0:
            absorption[s, assigned[s]] = 1.0
    if transient:
        out_rate = rates.sum(axis=1)
        idx = {s: i for i, s in enumerate(transient)}
        m = len(transient)
        a = np.eye(m)
        b = np.zeros((m, k))
        for s in transient:
            for t in range(d):
                if rates[s, t] == 0.0:
                    continue
                p = rates[s, t] / out_rate[s]
                if assigned[t] >= 0:
                    b[idx[s], assigned[t]] += p
                else:
                    a[idx[s], idx[t]] -= p
        sol = np.linalg.solve(a, b)
        for s in transient:
            absorption[s] = sol[idx[s]]
    return DenseChain(rates=rates, closed_classes=tuple(classes), absorption=absorption)
