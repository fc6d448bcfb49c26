"""Exact-coefficient scalars, local terms and chain assembly.

Basis convention: site 1 is the most significant digit of a basis index,
``index = sum_j x_j * d**(N - j)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

DEFAULT_BUDGET_DIM = 2**20

SQRT2 = math.sqrt(2.0)


class ResourceError(RuntimeError):
    """Raised when an operator would exceed the configured dimension budget."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a Fraction or a string")
    return Fraction(x)


@dataclass(frozen=True)
class ExactScalar:
    """``(rational + sqrt2 * sqrt(2)) * exp(i*pi*phase)``.

    The phase is stored in ``[0, 1)``; a phase of ``r + 1`` is folded into a
    sign flip of the coefficients, so the scalar is real iff ``phase == 0``.
    """

    rational: Fraction = Fraction(0)
    sqrt2: Fraction = Fraction(0)
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        a, b, r = _frac(self.rational), _frac(self.sqrt2), _frac(self.phase) % 2
        if r >= 1:
            a, b, r = -a, -b, r - 1
        if a == 0 and b == 0:
            r = Fraction(0)
        object.__setattr__(self, "rational", a)
        object.__setattr__(self, "sqrt2", b)
        object.__setattr__(self, "phase", r)

    @classmethod
    def of(cls, value) -> "ExactScalar":
        if isinstance(value, ExactScalar):
            return value
        return cls(_frac(value))

    @property
    def is_zero(self) -> bool:
        return self.rational == 0 and self.sqrt2 == 0

    @property
    def is_real(self) -> bool:
        return self.phase == 0

    @property
    def in_q_sqrt2(self) -> bool:
        return self.phase == 0

    def conjugate(self) -> "ExactScalar":
        return ExactScalar(self.rational, self.sqrt2, -self.phase)

    def __neg__(self):
        return ExactScalar(-self.rational, -self.sqrt2, self.phase)

    def __add__(self, other):
        other = ExactScalar.of(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.phase != other.phase:
            raise ValueError(f"sum of phases {self.phase} and {other.phase} leaves the coefficient ring")
        return ExactScalar(self.rational + other.rational, self.sqrt2 + other.sqrt2, self.phase)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExactScalar.of(other))

    def __rsub__(self, other):
        return ExactScalar.of(other) - self

    def __mul__(self, other):
        other = ExactScalar.of(other)
        a, b, c, d = self.rational, self.sqrt2, other.rational, other.sqrt2
        return ExactScalar(a * c + 2 * b * d, a * d + b * c, self.phase + other.phase)

    __rmul__ = __mul__

    def __complex__(self):
        mag = float(self.rational) + float(self.sqrt2) * SQRT2
        if self.phase == 0:
            return complex(mag)
        angle = math.pi * float(self.phase)
        return complex(mag * math.cos(angle), mag * math.sin(angle))

    def to_complex(self) -> complex:
        return complex(self)

    def to_json(self) -> dict:
        return {"rat": str(self.rational), "sqrt2": str(self.sqrt2), "phase": str(self.phase)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ExactScalar":
        return cls(Fraction(obj["rat"]), Fraction(obj["sqrt2"]), Fraction(obj["phase"]))


ZERO = ExactScalar()
ONE = ExactScalar(1)


@dataclass(frozen=True)
class LocalTerm:
    """A Hermitian ``d**arity`` square matrix stored as its nonzero exact entries."""

    arity: int
    side: int
    entries: Mapping[tuple[int, int], ExactScalar]
    label: str = ""

    def __post_init__(self):
        if self.arity not in (1, 2, 3):
            raise ValueError("arity must be 1, 2 or 3")
        clean = {}
        for (i, j), v in self.entries.items():
            v = ExactScalar.of(v)
            if not (0 <= i < self.side and 0 <= j < self.side):
                raise IndexError(f"entry ({i}, {j}) outside a side-{self.side} matrix")
            if not v.is_zero:
                clean[(int(i), int(j))] = v
        object.__setattr__(self, "entries", clean)

    @classmethod
    def from_array(cls, array, arity: int, label: str = "") -> "LocalTerm":
        array = np.asarray(array, dtype=object)
        n = array.shape[0]
        entries = {(i, j): ExactScalar.of(array[i, j]) for i in range(n) for j in range(n) if array[i, j] != 0}
        return cls(arity, n, entries, label)

    @property
    def local_dim(self) -> int:
        d = round(self.side ** (1.0 / self.arity))
        for cand in (d - 1, d, d + 1):
            if cand > 0 and cand**self.arity == self.side:
                return cand
        raise ValueError(f"side {self.side} is not a perfect power of arity {self.arity}")

    def is_hermitian(self) -> bool:
        for (i, j), v in self.entries.items():
            if self.entries.get((j, i), ZERO) != v.conjugate():
                return False
        return True

    def scaled(self, c, label: str | None = None) -> "LocalTerm":
        c = ExactScalar.of(c)
        return LocalTerm(self.arity, self.side, {k: v * c for k, v in self.entries.items()},
                         self.label if label is None else label)

    def __add__(self, other: "LocalTerm") -> "LocalTerm":
        if (self.arity, self.side) != (other.arity, other.side):
            raise ValueError("cannot add terms of different shape")
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, ZERO) + v
        return LocalTerm(self.arity, self.side, out, f"{self.label}+{other.label}")

    @cached_property
    def dense(self) -> np.ndarray:
        m = np.zeros((self.side, self.side), dtype=complex)
        for (i, j), v in self.entries.items():
            m[i, j] = complex(v)
        return m

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        if not self.entries:
            return sp.csr_matrix((self.side, self.side), dtype=complex)
        keys = list(self.entries)
        rows = [k[0] for k in keys]
        cols = [k[1] for k in keys]
        vals = [complex(self.entries[k]) for k in keys]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.side, self.side), dtype=complex)

    def to_json(self) -> dict:
        grid = [[ZERO.to_json() for _ in range(self.side)] for _ in range(self.side)]
        for (i, j), v in self.entries.items():
            grid[i][j] = v.to_json()
        return {"arity": self.arity, "label": self.label, "matrix": grid}

    @classmethod
    def from_json(cls, obj: Mapping) -> "LocalTerm":
        grid = obj["matrix"]
        entries = {}
        for i, row in enumerate(grid):
            for j, cell in enumerate(row):
                v = ExactScalar.from_json(cell)
                if not v.is_zero:
                    entries[(i, j)] = v
        return cls(int(obj["arity"]), len(grid), entries, obj.get("label", ""))


def projector(d: int, *states: Iterable[int], weight=1, label: str = "") -> LocalTerm:
    """``weight * sum_s |s><s|`` for product basis strings ``s`` of equal length."""
    states = [tuple(s) for s in states]
    k = len(states[0])
    entries = {}
    for s in states:
        idx = digits_to_index(s, d)
        entries[(idx, idx)] = entries.get((idx, idx), ZERO) + ExactScalar.of(weight)
    return LocalTerm(k, d**k, entries, label)


def edge_laplacian(d: int, a: Iterable[int], b: Iterable[int], weight=1, label: str = "") -> LocalTerm:
    """``weight * (|a> - |b>)(<a| - <b|)`` for two product strings."""
    a, b = tuple(a), tuple(b)
    ia, ib = digits_to_index(a, d), digits_to_index(b, d)
    w = ExactScalar.of(weight)
    entries = {(ia, ia): w, (ib, ib): w, (ia, ib): -w, (ib, ia): -w}
    return LocalTerm(len(a), d ** len(a), entries, label)


def identity_term(d: int, arity: int, weight=1, label: str = "") -> LocalTerm:
    w = ExactScalar.of(weight)
    return LocalTerm(arity, d**arity, {(i, i): w for i in range(d**arity)}, label)


def digits_to_index(digits: Iterable[int], d: int) -> int:
    idx = 0
    for x in digits:
        idx = idx * d + int(x)
    return idx


def index_to_digits(index: int, N: int, d: int) -> tuple[int, ...]:
    out = []
    for _ in range(N):
        index, r = divmod(index, d)
        out.append(r)
    return tuple(reversed(out))


def basis_digits(N: int, d: int) -> np.ndarray:
    """``(d**N, N)`` array of the site digits of every basis index."""
    idx = np.arange(d**N, dtype=np.int64)
    out = np.empty((d**N, N), dtype=np.int16)
    for j in range(N - 1, -1, -1):
        idx, out[:, j] = np.divmod(idx, d)
    return out


@dataclass(frozen=True)
class ChainSpec:
    """Translationally invariant chain of ``N`` sites with local dimension ``local_dim``."""

    local_dim: int
    terms: tuple[LocalTerm, ...]
    boundary: str = "open"
    N: int = 2

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        if self.N < 1 or self.local_dim < 1:
            raise ValueError("N and local_dim must be positive")
        for t in self.terms:
            if t.side != self.local_dim**t.arity:
                raise ValueError(f"term {t.label!r} has side {t.side}, expected {self.local_dim ** t.arity}")

    @property
    def dimension(self) -> int:
        return self.local_dim**self.N

    def with_length(self, N: int) -> "ChainSpec":
        return ChainSpec(self.local_dim, self.terms, self.boundary, N)

    def with_terms(self, extra: Iterable[LocalTerm]) -> "ChainSpec":
        return ChainSpec(self.local_dim, self.terms + tuple(extra), self.boundary, self.N)

    def placements(self, arity: int) -> list[int]:
        if self.boundary == "periodic":
            return list(range(1, self.N + 1)) if self.N >= arity else []
        return list(range(1, self.N - arity + 2))

    def to_json(self) -> dict:
        return {"local_dim": self.local_dim, "boundary": self.boundary, "N": self.N,
                "terms": [t.to_json() for t in self.terms]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: Mapping) -> "ChainSpec":
        return cls(int(obj["local_dim"]), tuple(LocalTerm.from_json(t) for t in obj["terms"]),
                   obj.get("boundary", "open"), int(obj["N"]))

    @classmethod
    def loads(cls, text: str) -> "ChainSpec":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class SparseOperator:
    matrix: sp.csr_matrix
    hermitian: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        m.sum_duplicates()
        m.eliminate_zeros()
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def entries(self) -> list[tuple[int, int, complex]]:
        c = self.matrix.tocoo()
        return list(zip(c.row.tolist(), c.col.tolist(), c.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self, atol: float = 0.0) -> bool:
        diff = (self.matrix - self.matrix.conj().T).tocsr()
        diff.eliminate_zeros()
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator(self.matrix + other.matrix, self.hermitian and other.hermitian)


def _check_budget(dim: int, budget_dim: int):
    if dim > budget_dim:
        raise ResourceError(f"dimension {dim} exceeds the budget of {budget_dim}")


def _site_permutation(N: int, d: int, shift: int) -> np.ndarray:
    """Index map sending the state with digits x to the state with digits rolled right by ``shift``."""
    digits = basis_digits(N, d)
    rolled = np.roll(digits, shift, axis=1).astype(np.int64)
    weights = d ** np.arange(N - 1, -1, -1, dtype=np.int64)
    return rolled @ weights


def _place_matrix(m: sp.spmatrix, arity: int, site: int, N: int, d: int, boundary: str) -> sp.csr_matrix:
    if site < 1 or site > N:
        raise IndexError(f"site {site} out of range for N={N}")
    if site + arity - 1 <= N:
        left = sp.identity(d ** (site - 1), dtype=complex, format="csr")
        right = sp.identity(d ** (N - site - arity + 1), dtype=complex, format="csr")
        return sp.kron(sp.kron(left, m, format="csr"), right, format="csr")
    if boundary != "periodic":
        raise IndexError(f"arity-{arity} term at site {site} does not fit an open chain of {N} sites")
    base = sp.kron(m, sp.identity(d ** (N - arity), dtype=complex, format="csr"), format="coo")
    perm = _site_permutation(N, d, site - 1)
    return sp.csr_matrix((base.data, (perm[base.row], perm[base.col])), shape=base.shape)


def tensor_place(term: LocalTerm, site: int, spec: ChainSpec) -> SparseOperator:
    """Act with ``term`` on sites ``site .. site+arity-1`` (1-based), identity elsewhere."""
    mat = _place_matrix(term.sparse, term.arity, site, spec.N, spec.local_dim, spec.boundary)
    return SparseOperator(mat, term.is_hermitian())


def assemble(spec: ChainSpec, budget_dim: int = DEFAULT_BUDGET_DIM) -> SparseOperator:
    """Sum of every term over every placement, as a sparse complex matrix."""
    dim = spec.dimension
    _check_budget(dim, budget_dim)
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for term in spec.terms:
        if not term.entries:
            continue
        for site in spec.placements(term.arity):
            total = total + _place_matrix(term.sparse, term.arity, site, spec.N, spec.local_dim, spec.boundary)
    return SparseOperator(total, all(t.is_hermitian() for t in spec.terms))


def assemble_exact(spec: ChainSpec, budget_dim: int = 4096) -> dict[tuple[int, int], ExactScalar]:
    """Exact-arithmetic assembly for small chains (nonzero entries only)."""
    N, d = spec.N, spec.local_dim
    _check_budget(spec.dimension, budget_dim)
    out: dict[tuple[int, int], ExactScalar] = {}
    for term in spec.terms:
        k = term.arity
        for site in spec.placements(k):
            sites = [(site - 1 + j) % N for j in range(k)]
            rest = [s for s in range(N) if s not in sites]
            for (a, b), v in term.entries.items():
                da, db = index_to_digits(a, k, d), index_to_digits(b, k, d)
                for env in range(d ** len(rest)):
                    de = index_to_digits(env, len(rest), d)
                    xa, xb = [0] * N, [0] * N
                    for s, x in zip(rest, de):
                        xa[s] = xb[s] = x
                    for s, x, y in zip(sites, da, db):
                        xa[s], xb[s] = x, y
                    key = (digits_to_index(xa, d), digits_to_index(xb, d))
                    out[key] = out.get(key, ZERO) + v
    return {k: v for k, v in out.items() if not v.is_zero}


def operator_norm_bound(term: LocalTerm) -> float:
    """Largest singular value for sides up to 64, otherwise the max absolute row sum."""
    if not term.entries:
        return 0.0
    if term.side <= 64:
        return float(np.linalg.norm(term.dense, 2))
    return float(np.max(np.asarray(abs(term.sparse).sum(axis=1)).ravel()))


def cyclic_shift_operator(N: int, d: int) -> sp.csr_matrix:
    """Permutation matrix moving the content of site j to site j+1 (mod N)."""
    perm = _site_permutation(N, d, 1)
    dim = d**N
    return sp.csr_matrix((np.ones(dim), (perm, np.arange(dim))), shape=(dim, dim))
