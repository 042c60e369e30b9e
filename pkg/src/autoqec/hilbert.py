"""Tensor-product operator algebra over qubit and truncated-cavity factors.

Index convention (fixed): basis states are labelled row-major with the first
factor most significant, i.e. for factors (A, B, C) with dims (dA, dB, dC) the
basis index of |a, b, c> is ``(a * dB + b) * dC + c``.  Single-factor basis
convention: level 0 comes first, so ``sigma_z |0> = +|0>`` and
``sigma_z |1> = -|1>``.

Operators are stored sparse (CSR); states are dense.  Spaces and operators are
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Factor",
    "TensorSpace",
    "Operator",
    "DensityMatrix",
    "PureState",
    "make_space",
    "identity",
    "embed",
    "pauli",
    "annihilator",
    "projector",
    "apply_dissipator",
    "partial_trace",
]

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
NORM_TOL = 1e-12


@dataclass(frozen=True)
class Factor:
    """One tensor factor: a labelled qubit or truncated cavity mode."""

    label: str
    dim: int
    kind: str  # "qubit" | "cavity"


@dataclass(frozen=True)
class TensorSpace:
    """Ordered composite of two-level (or d-level) factors.

    The factor order fixes the basis index convention documented at module
    level; two spaces compare equal only if labels, dims, kinds and order all
    match.
    """

    factors: tuple[Factor, ...]

    @property
    def total_dim(self) -> int:
        return prod(f.dim for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def index_of(self, label: str) -> int:
        for i, f in enumerate(self.factors):
            if f.label == label:
                return i
        raise KeyError(f"no factor labelled {label!r} in space {self.labels}")

    def qubit_labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors if f.kind == "qubit")

    def is_all_qubits(self) -> bool:
        return all(f.kind == "qubit" for f in self.factors)

    def basis_index(self, levels: Sequence[int]) -> int:
        """Index of the basis state with the given per-factor levels."""
        if len(levels) != self.n_factors:
            raise ValueError(
                f"expected {self.n_factors} levels, got {len(levels)}"
            )
        idx = 0
        for level, f in zip(levels, self.factors):
            if not 0 <= level < f.dim:
                raise ValueError(f"level {level} out of range for {f.label!r}")
            idx = idx * f.dim + level
        return idx

    def basis_levels(self, index: int) -> tuple[int, ...]:
        """Inverse of :meth:`basis_index`."""
        if not 0 <= index < self.total_dim:
            raise ValueError(f"basis index {index} out of range")
        levels = []
        for f in reversed(self.factors):
            levels.append(index % f.dim)
            index //= f.dim
        return tuple(reversed(levels))

    def basis_vector(self, levels: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.total_dim, dtype=complex)
        vec[self.basis_index(levels)] = 1.0
        return vec


def make_space(factors: Iterable[tuple[str, int, str]]) -> TensorSpace:
    """Build a :class:`TensorSpace` from (label, dim, kind) triples.

    Raises:
        ValueError: on duplicate labels, dims < 2 or unknown kinds.
    """
    built = []
    seen: set[str] = set()
    for label, dim, kind in factors:
        if label in seen:
            raise ValueError(f"duplicate factor label {label!r}")
        if dim < 2:
            raise ValueError(f"factor {label!r} has dim {dim} < 2")
        if kind not in ("qubit", "cavity"):
            raise ValueError(f"factor {label!r} has unknown kind {kind!r}")
        seen.add(label)
        built.append(Factor(label, int(dim), kind))
    if not built:
        raise ValueError("a TensorSpace needs at least one factor")
    return TensorSpace(tuple(built))


class Operator:
    """Sparse complex matrix tagged with its :class:`TensorSpace`.

    Supports ``+``, ``-``, scalar ``*``, ``@`` and ``dag()``; all products
    stay sparse.  Instances are treated as immutable.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: TensorSpace, matrix) -> None:
        matrix = sp.csr_array(matrix, dtype=complex)
        d = space.total_dim
        if matrix.shape != (d, d):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match space dim {d}"
            )
        self.space = space
        self.matrix = matrix

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conjugate().transpose())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        diff = (self.matrix - self.matrix.conjugate().transpose()).tocoo()
        if diff.nnz == 0:
            return True
        scale = max(1.0, sp.linalg.norm(self.matrix))
        return sp.linalg.norm(diff) <= tol * scale

    def expectation(self, rho: np.ndarray) -> complex:
        """trace(O rho) for a dense matrix ``rho``."""
        # trace(O rho) = sum_ij O_ij rho_ji
        m = self.matrix.tocoo()
        return complex(np.sum(m.data * rho[m.col, m.row]))

    def _check_same_space(self, other: "Operator") -> None:
        if self.space != other.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __repr__(self) -> str:
        return (
            f"Operator(dim={self.space.total_dim}, nnz={self.nnz}, "
            f"labels={self.space.labels})"
        )


class PureState:
    """Normalised state vector over a :class:`TensorSpace`."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: TensorSpace, amplitudes) -> None:
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amp.shape != (space.total_dim,):
            raise ValueError(
                f"amplitude length {amp.shape[0]} does not match space dim "
                f"{space.total_dim}"
            )
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} is not 1 within {NORM_TOL}")
        self.space = space
        self.amplitudes = amp

    @classmethod
    def basis(cls, space: TensorSpace, levels: Sequence[int]) -> "PureState":
        return cls(space, space.basis_vector(levels))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self) -> str:
        return f"PureState(dim={self.space.total_dim})"


class DensityMatrix:
    """Dense density matrix with Hermiticity and unit-trace checks.

    Construction validates Hermiticity (relative Frobenius, 1e-12) and
    trace 1 (1e-12).  Propagator outputs that carry controlled numerical
    drift are wrapped via :meth:`unchecked`.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: TensorSpace, matrix) -> None:
        mat = np.asarray(matrix, dtype=complex)
        d = space.total_dim
        if mat.shape != (d, d):
            raise ValueError(
                f"matrix shape {mat.shape} does not match space dim {d}"
            )
        herm_err = np.linalg.norm(mat - mat.conj().T)
        scale = max(1.0, np.linalg.norm(mat))
        if herm_err > HERMITICITY_TOL * scale:
            raise ValueError(
                f"matrix is not Hermitian (relative residual {herm_err / scale:.3e})"
            )
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} is not 1 within {TRACE_TOL}")
        self.space = space
        self.matrix = mat

    @classmethod
    def unchecked(cls, space: TensorSpace, matrix: np.ndarray) -> "DensityMatrix":
        """Wrap a matrix without validation (internal propagator use)."""
        obj = object.__new__(cls)
        obj.space = space
        obj.matrix = np.asarray(matrix, dtype=complex)
        return obj

    @classmethod
    def from_pure(cls, psi: PureState) -> "DensityMatrix":
        return psi.density_matrix()

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.space.total_dim})"


def identity(space: TensorSpace) -> Operator:
    return Operator(space, sp.eye_array(space.total_dim, dtype=complex, format="csr"))


def embed(factor_op, target_label: str, space: TensorSpace) -> Operator:
    """Lift a single-factor operator to the full space (identity elsewhere).

    The embedding is linear and multiplicative: ``embed(A B) ==
    embed(A) @ embed(B)``.  The result stays sparse: its nonzero count is
    ``nnz(factor_op) * total_dim / factor_dim``.

    Raises:
        KeyError: unknown label.
        ValueError: operator shape does not match the factor dimension.
    """
    pos = space.index_of(target_label)
    d_factor = space.factors[pos].dim
    op = sp.csr_array(
        factor_op if sp.issparse(factor_op) else np.asarray(factor_op, dtype=complex),
        dtype=complex,
    )
    if op.shape != (d_factor, d_factor):
        raise ValueError(
            f"operator shape {op.shape} does not match factor {target_label!r} "
            f"dim {d_factor}"
        )
    d_before = prod(f.dim for f in space.factors[:pos])
    d_after = prod(f.dim for f in space.factors[pos + 1:])
    full = sp.kron(
        sp.eye_array(d_before, dtype=complex, format="csr"),
        sp.kron(op, sp.eye_array(d_after, dtype=complex, format="csr"), format="csr"),
        format="csr",
    )
    return Operator(space, full)


def pauli(kind: str) -> np.ndarray:
    """2x2 Pauli/ladder matrix: 'x', 'z', 'plus' (|1><0|) or 'minus' (|0><1|)."""
    if kind == "x":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if kind == "plus":
        return np.array([[0, 0], [1, 0]], dtype=complex)
    if kind == "minus":
        return np.array([[0, 1], [0, 0]], dtype=complex)
    raise ValueError(f"unknown Pauli kind {kind!r}")


def annihilator(dim: int) -> np.ndarray:
    """Truncated lowering operator a with a|n> = sqrt(n)|n-1>."""
    if dim < 2:
        raise ValueError("annihilator needs dim >= 2")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def projector(space: TensorSpace, assignments: Iterable[tuple[str, int]]) -> Operator:
    """Projector onto fixed levels of a subset of factors, identity elsewhere.

    ``projector(space, [("q2", 0), ("q3", 0)])`` projects qubits q2, q3 onto
    |00> while leaving every other factor untouched.  Idempotent and Hermitian
    by construction.
    """
    result = identity(space)
    seen: set[str] = set()
    for label, value in assignments:
        if label in seen:
            raise ValueError(f"factor {label!r} assigned twice")
        seen.add(label)
        dim = space.factors[space.index_of(label)].dim
        if not 0 <= value < dim:
            raise ValueError(f"value {value} out of range for factor {label!r}")
        ket = np.zeros((dim, dim), dtype=complex)
        ket[value, value] = 1.0
        result = result @ embed(ket, label, space)
    return result


def apply_dissipator(x: Operator, rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """Lindblad dissipator X rho X^dag - {X^dag X, rho}/2, as a dense matrix.

    The output is traceless for any X and Hermitian whenever rho is.
    """
    if isinstance(rho, DensityMatrix):
        if rho.space != x.space:
            raise ValueError("operator and state live on different spaces")
        mat = rho.matrix
    else:
        mat = np.asarray(rho, dtype=complex)
        if mat.shape != x.matrix.shape:
            raise ValueError("operator and state dimensions do not match")
    xmat = x.matrix
    xdag = xmat.conjugate().transpose().tocsr()
    xdx = (xdag @ xmat).toarray()
    sandwich = (xmat @ mat) @ xdag.toarray()
    return sandwich - 0.5 * (xdx @ mat + mat @ xdx)


def partial_trace(rho: DensityMatrix, keep_labels: Sequence[str]) -> DensityMatrix:
    """Reduced state on the kept factors (in their original order).

    Raises:
        ValueError: empty keep list or unknown label.
    """
    if not keep_labels:
        raise ValueError("keep_labels must be nonempty")
    space = rho.space
    keep_set = set(keep_labels)
    for label in keep_labels:
        space.index_of(label)  # raises KeyError on unknown labels
    keep_pos = [i for i, f in enumerate(space.factors) if f.label in keep_set]
    trace_pos = [i for i, f in enumerate(space.factors) if f.label not in keep_set]

    dims = space.dims
    tensor = rho.matrix.reshape(dims + dims)
    # trace out factors pairwise, highest axis first so positions stay valid
    for pos in sorted(trace_pos, reverse=True):
        tensor = np.trace(tensor, axis1=pos, axis2=pos + tensor.ndim // 2)
    kept_factors = tuple(space.factors[i] for i in keep_pos)
    sub_space = TensorSpace(kept_factors)
    d_sub = sub_space.total_dim
    return DensityMatrix(sub_space, tensor.reshape(d_sub, d_sub))
