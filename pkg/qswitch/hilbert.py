"""Dense state vectors over the labelled factors path ⊗ agentA ⊗ agentB ⊗ target ⊗ detA ⊗ detB."""

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from enum import StrEnum
from functools import cached_property
from typing import NamedTuple, Self

import numpy as np
import polars as pl
import scipy.sparse as sp

from qswitch.error import DomainError

NORM_TOL = 1e-12
TABLE_THRESHOLD = 1e-14


class Factor(StrEnum):
    PATH = "path"
    AGENT_A = "agentA"
    AGENT_B = "agentB"
    TARGET = "target"
    DET_A = "detA"
    DET_B = "detB"

    @property
    def dim(self: Self) -> int:
        return len(LABELS[self])

    @property
    def labels(self: Self) -> tuple[str, ...]:
        return LABELS[self]


LABELS: dict[Factor, tuple[str, ...]] = {
    Factor.PATH: ("A<B", "B<A"),
    Factor.AGENT_A: tuple(f"A{i}" for i in range(6)),
    Factor.AGENT_B: tuple(f"B{i}" for i in range(1, 6)),
    Factor.TARGET: tuple(f"e{i}" for i in range(1, 6)),
    Factor.DET_A: ("0", "1"),
    Factor.DET_B: ("0", "1"),
}

FACTORS: tuple[Factor, ...] = tuple(Factor)

type Predicate = Mapping[Factor, int | Iterable[int]] | Callable[[dict[Factor, int]], bool]


def _canonical(factors: Iterable[Factor | str]) -> tuple[Factor, ...]:
    fs = tuple(Factor(f) for f in factors)
    if len(set(fs)) != len(fs):
        err = f"duplicate factors in {[str(f) for f in fs]}"
        raise DomainError(err)
    if list(fs) != sorted(fs, key=FACTORS.index):
        err = f"factors must follow the order {[str(f) for f in FACTORS]}, got {[str(f) for f in fs]}"
        raise DomainError(err)
    return fs


def _index(factor: Factor, value: int) -> int:
    if not 0 <= value < factor.dim:
        err = f"index {value} out of range for {factor} (dimension {factor.dim})"
        raise DomainError(err)
    return value


class StateVector:
    _amplitudes: np.ndarray
    _factors: tuple[Factor, ...]

    def __init__(self: Self, amplitudes: np.ndarray | Sequence[complex], *, factors: Iterable[Factor | str] = FACTORS) -> None:
        self._factors = _canonical(factors)
        size = math.prod(f.dim for f in self._factors)
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != size:
            err = f"expected {size} amplitudes for factors {[str(f) for f in self._factors]}, got {amps.size}"
            raise DomainError(err)
        amps.setflags(write=False)
        self._amplitudes = amps

    @classmethod
    def zeros(cls: type[Self], factors: Iterable[Factor | str] = FACTORS) -> Self:
        fs = _canonical(factors)
        return cls(np.zeros(math.prod(f.dim for f in fs), dtype=np.complex128), factors=fs)

    @property
    def factors(self: Self) -> tuple[Factor, ...]:
        return self._factors

    @property
    def dims(self: Self) -> tuple[int, ...]:
        return tuple(f.dim for f in self._factors)

    @property
    def amplitudes(self: Self) -> np.ndarray:
        return self._amplitudes

    def tensor(self: Self) -> np.ndarray:
        return self._amplitudes.reshape(self.dims)

    @cached_property
    def norm(self: Self) -> float:
        return float(np.linalg.norm(self._amplitudes))

    def normalized(self: Self) -> Self:
        n = self.norm
        if n == 0.0:
            return self
        return type(self)(self._amplitudes / n, factors=self._factors)

    def amplitude(self: Self, **indices: int) -> complex:
        return complex(self.tensor()[tuple(_index(f, indices[str(f)]) for f in self._factors)])

    def inner(self: Self, other: "StateVector") -> complex:
        self._check_same(other)
        return complex(np.vdot(self._amplitudes, other._amplitudes))

    def allclose(self: Self, other: "StateVector", *, atol: float = NORM_TOL) -> bool:
        self._check_same(other)
        return bool(np.allclose(self._amplitudes, other._amplitudes, rtol=0.0, atol=atol))

    def _check_same(self: Self, other: "StateVector") -> None:
        if self._factors != other._factors:
            err = f"factor mismatch: {[str(f) for f in self._factors]} vs {[str(f) for f in other._factors]}"
            raise DomainError(err)

    def __add__(self: Self, other: "StateVector") -> Self:
        self._check_same(other)
        return type(self)(self._amplitudes + other._amplitudes, factors=self._factors)

    def __sub__(self: Self, other: "StateVector") -> Self:
        self._check_same(other)
        return type(self)(self._amplitudes - other._amplitudes, factors=self._factors)

    def __mul__(self: Self, scalar: complex) -> Self:
        return type(self)(self._amplitudes * scalar, factors=self._factors)

    __rmul__ = __mul__

    def __neg__(self: Self) -> Self:
        return self * -1.0

    def __repr__(self: Self) -> str:
        return f"StateVector(factors={[str(f) for f in self._factors]}, norm={self.norm:.15g})"

    def table(self: Self, *, threshold: float = TABLE_THRESHOLD) -> pl.DataFrame:
        t = self.tensor()
        idx = np.argwhere(np.abs(t) > threshold)
        values = t[tuple(idx.T)] if idx.size else np.zeros(0, dtype=np.complex128)
        columns: dict[str, pl.Series] = {}
        for k, f in enumerate(self._factors):
            if f in (Factor.DET_A, Factor.DET_B):
                columns[str(f)] = pl.Series(str(f), idx[:, k], dtype=pl.UInt8)
            else:
                columns[str(f)] = pl.Series(str(f), [f.labels[i] for i in idx[:, k]], dtype=pl.String)
        columns["re"] = pl.Series("re", values.real, dtype=pl.Float64)
        columns["im"] = pl.Series("im", values.imag, dtype=pl.Float64)
        return pl.DataFrame(columns)


def basis_state(indices: Mapping[Factor | str, int], *, factors: Iterable[Factor | str] = FACTORS) -> StateVector:
    fs = _canonical(factors)
    given = {Factor(k): v for k, v in indices.items()}
    missing = [str(f) for f in fs if f not in given]
    extra = [str(f) for f in given if f not in fs]
    if missing or extra:
        err = f"basis_state needs exactly the factors {[str(f) for f in fs]} (missing {missing}, unexpected {extra})"
        raise DomainError(err)
    t = np.zeros([f.dim for f in fs], dtype=np.complex128)
    t[tuple(_index(f, given[f]) for f in fs)] = 1.0
    return StateVector(t, factors=fs)


def superpose(terms: Iterable[tuple[complex, StateVector]], *, normalize: bool = False) -> StateVector:
    terms = list(terms)
    if not terms:
        err = "cannot superpose an empty list of states"
        raise DomainError(err)
    out = terms[0][1] * terms[0][0]
    for c, s in terms[1:]:
        out = out + s * c
    return out.normalized() if normalize else out


def product_state(*parts: StateVector) -> StateVector:
    factors = [f for p in parts for f in p.factors]
    t = np.ones((), dtype=np.complex128)
    for p in parts:
        t = np.multiply.outer(t, p.tensor())
    order = sorted(range(len(factors)), key=lambda k: FACTORS.index(factors[k]))
    return StateVector(np.transpose(t, order), factors=[factors[k] for k in order])


class SparseOperator:
    """Linear map given by (input, output, amplitude) triples on a subset of factors.

    With ``passthrough`` set, inputs that no triple mentions are mapped to themselves.
    """

    _factors: tuple[Factor, ...]
    _matrix: sp.csr_array
    _declared: np.ndarray
    _passthrough: bool

    def __init__(
        self: Self,
        entries: Iterable[tuple[Sequence[int], Sequence[int], complex]],
        *,
        factors: Iterable[Factor | str],
        passthrough: bool = False,
    ) -> None:
        self._factors = _canonical(factors)
        self._passthrough = passthrough
        dims = tuple(f.dim for f in self._factors)
        rows: list[int] = []
        cols: list[int] = []
        data: list[complex] = []
        for src, dst, amp in entries:
            if len(src) != len(dims) or len(dst) != len(dims):
                err = f"triple ({src}, {dst}) does not match factors {[str(f) for f in self._factors]}"
                raise DomainError(err)
            for f, i, o in zip(self._factors, src, dst, strict=True):
                _index(f, i)
                _index(f, o)
            cols.append(int(np.ravel_multi_index(tuple(src), dims)))
            rows.append(int(np.ravel_multi_index(tuple(dst), dims)))
            data.append(complex(amp))
        size = math.prod(dims)
        self._declared = np.unique(np.array(cols, dtype=np.int64))
        if passthrough:
            rest = np.setdiff1d(np.arange(size), self._declared)
            cols.extend(rest.tolist())
            rows.extend(rest.tolist())
            data.extend([1.0] * rest.size)
        self._matrix = sp.csr_array(
            (np.array(data, dtype=np.complex128), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
            shape=(size, size),
        )

    @classmethod
    def controlled(cls: type[Self], control: Factor, value: int, op: "SparseOperator") -> Self:
        """Acts as ``op`` when ``control`` equals ``value`` and as the identity otherwise."""
        if control in op.factors:
            err = f"control factor {control} is already acted on by the operator"
            raise DomainError(err)
        _index(control, value)
        factors = sorted([control, *op.factors], key=FACTORS.index)
        pos = factors.index(control)
        dims = tuple(f.dim for f in op.factors)
        coo = op._matrix.tocoo()
        declared = set(op._declared.tolist())
        entries: list[tuple[Sequence[int], Sequence[int], complex]] = []
        for r, c, v in zip(coo.row, coo.col, coo.data, strict=True):
            if int(c) not in declared:
                continue
            src = list(np.unravel_index(int(c), dims))
            dst = list(np.unravel_index(int(r), dims))
            entries.append(([*src[:pos], value, *src[pos:]], [*dst[:pos], value, *dst[pos:]], complex(v)))
        for other in range(control.dim):
            if other == value or op._passthrough:
                continue
            for k in np.ndindex(*dims):
                idx = [*k[:pos], other, *k[pos:]]
                entries.append((idx, idx, 1.0))
        return cls(entries, factors=factors, passthrough=op._passthrough)

    @property
    def factors(self: Self) -> tuple[Factor, ...]:
        return self._factors

    @property
    def matrix(self: Self) -> sp.csr_array:
        return self._matrix

    def _apply_array(self: Self, tensor: np.ndarray, factors: tuple[Factor, ...]) -> np.ndarray:
        missing = [str(f) for f in self._factors if f not in factors]
        if missing:
            err = f"factor mismatch: operator acts on {missing} which the state does not have"
            raise DomainError(err)
        axes = [factors.index(f) for f in self._factors]
        front = list(range(len(axes)))
        moved = np.moveaxis(tensor, axes, front)
        out = self._matrix @ moved.reshape(self._matrix.shape[1], -1)
        return np.moveaxis(np.asarray(out).reshape(moved.shape), front, axes)

    def __matmul__(self: Self, state: StateVector) -> StateVector:
        return apply(self, state)

    def to_dense(self: Self, factors: Iterable[Factor | str] = FACTORS) -> np.ndarray:
        fs = _canonical(factors)
        dims = tuple(f.dim for f in fs)
        n = math.prod(dims)
        eye = np.eye(n, dtype=np.complex128).reshape((*dims, n))
        return self._apply_array(eye, fs).reshape(n, n)

    def is_isometry(self: Self, *, support_only: bool = True, tol: float = NORM_TOL) -> bool:
        """Columns orthonormal within ``tol``; by default only the declared inputs are checked."""
        cols = self._matrix[:, self._declared] if support_only else self._matrix
        gram = (cols.conj().T @ cols).toarray()
        return bool(np.allclose(gram, np.eye(gram.shape[0]), rtol=0.0, atol=tol))


def apply(op: SparseOperator, state: StateVector) -> StateVector:
    return StateVector(op._apply_array(state.tensor(), state.factors), factors=state.factors)  # noqa: SLF001


def _mask(state: StateVector, predicate: Predicate) -> np.ndarray:
    if callable(predicate):
        flat = np.fromiter(
            (bool(predicate(dict(zip(state.factors, k, strict=True)))) for k in np.ndindex(*state.dims)),
            dtype=bool,
            count=math.prod(state.dims),
        )
        return flat.reshape(state.dims)
    mask = np.ones(state.dims, dtype=bool)
    for key, allowed in predicate.items():
        f = Factor(key)
        if f not in state.factors:
            err = f"predicate refers to {f} which the state does not have"
            raise DomainError(err)
        values = [allowed] if isinstance(allowed, int) else list(allowed)
        keep = np.zeros(f.dim, dtype=bool)
        keep[[_index(f, v) for v in values]] = True
        shape = [1] * len(state.factors)
        shape[state.factors.index(f)] = f.dim
        mask &= keep.reshape(shape)
    return mask


def project(state: StateVector, predicate: Predicate, *, complement: bool = False, normalize: bool = False) -> tuple[StateVector, float]:
    mask = _mask(state, predicate)
    if complement:
        mask = ~mask
    t = np.where(mask, state.tensor(), 0.0)
    projected = StateVector(t, factors=state.factors)
    probability = projected.norm**2
    return (projected.normalized() if normalize else projected), probability


def contract(bra: StateVector, state: StateVector) -> StateVector:
    """Partial inner product (⟨bra| ⊗ 1)|state⟩ over the factors of ``bra``."""
    missing = [str(f) for f in bra.factors if f not in state.factors]
    if missing:
        err = f"factor mismatch: {missing} not in state"
        raise DomainError(err)
    axes = [state.factors.index(f) for f in bra.factors]
    rest = [f for f in state.factors if f not in bra.factors]
    t = np.tensordot(bra.tensor().conj(), state.tensor(), axes=(list(range(len(axes))), axes))
    return StateVector(t, factors=rest)


class MeasurementOutcome(NamedTuple):
    probability: float
    state: StateVector


def check_orthonormal(basis: Sequence[StateVector], *, tol: float = NORM_TOL) -> None:
    if not basis:
        err = "empty measurement basis"
        raise DomainError(err)
    for b in basis[1:]:
        basis[0]._check_same(b)  # noqa: SLF001
    m = np.stack([b.amplitudes for b in basis])
    gram = m.conj() @ m.T
    if not np.allclose(gram, np.eye(len(basis)), rtol=0.0, atol=tol):
        err = f"measurement basis is not orthonormal (max deviation {np.max(np.abs(gram - np.eye(len(basis)))):.3g})"
        raise DomainError(err)


def measure_in_basis(state: StateVector, basis: Sequence[StateVector]) -> list[MeasurementOutcome]:
    """Born-rule outcomes of measuring ``state`` in ``basis`` on the basis' factors.

    Each outcome carries the normalized post-measurement state |b⟩ ⊗ (⟨b|state⟩).
    Probabilities fall short of 1 by the weight outside the span of ``basis``.
    """
    check_orthonormal(basis)
    outcomes = []
    for b in basis:
        residual = contract(b, state)
        p = residual.norm**2
        collapsed = product_state(b, residual.normalized()) if residual.factors else b * (1.0 if p > 0.0 else 0.0)
        outcomes.append(MeasurementOutcome(p, collapsed))
    return outcomes


def entanglement_entropy(state: StateVector, subsystem: Iterable[Factor | str]) -> float:
    """Von Neumann entropy in bits of the reduced state on ``subsystem``."""
    fs = _canonical(subsystem)
    missing = [str(f) for f in fs if f not in state.factors]
    if missing:
        err = f"factor mismatch: {missing} not in state"
        raise DomainError(err)
    if state.norm == 0.0:
        err = "entropy of the zero vector is undefined"
        raise DomainError(err)
    axes = [state.factors.index(f) for f in fs]
    t = np.moveaxis(state.normalized().tensor(), axes, list(range(len(axes))))
    sv = np.linalg.svd(t.reshape(math.prod(f.dim for f in fs), -1), compute_uv=False)
    p = sv**2
    p = p[p > 1e-300]
    return float(max(-np.sum(p * np.log2(p)), 0.0))
