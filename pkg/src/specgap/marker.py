"""Marker Hamiltonian on a chain with a conserved boundary symbol.

Local basis: ``BD = 0`` (boundary), ``BL = 1`` (blank), head phases from 2.
The unary marker has a single head symbol (``d = 3``); the linear-falloff
variant has ``zeta`` head phases and a walk of length ``zeta * w`` on a
segment of ``w`` cells.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .core import (ChainSpec, LocalTerm, SparseOperator, assemble, basis_digits, edge_laplacian,
                   identity_term, projector)
from .path_laplacian import EigenInterval, bonus_energy
from .spectra import diagonalize_dense, lowest_k

BD, BL, HD = 0, 1, 2
SHIFT = Fraction(7, 2)


class ConsistencyError(RuntimeError):
    """An operator couples a signature block to the rest of the space."""


class UnsupportedFalloffError(ValueError):
    pass


@dataclass(frozen=True)
class FalloffSpec:
    """Walk length ``f(w)`` awarded to a segment of ``w`` cells.

    ``unary``: f(w) = w. ``linear``: f(w) = zeta * w. ``adaptive``: the least
    f with ``2**f > T_max(w)**3`` for the configured machine. ``table``:
    explicit values. ``d1``/``d2`` record the minimum length and modulus
    constraints for the segment-constraint lift.
    """

    kind: str = "unary"
    zeta: int = 1
    table: Mapping[int, int] | None = None
    machine: object = None
    d1: int = 1
    d2: int = 1

    def __post_init__(self):
        if self.kind not in ("unary", "linear", "adaptive", "table"):
            raise UnsupportedFalloffError(f"unknown falloff kind {self.kind!r}")
        if self.kind == "adaptive" and self.machine is None:
            raise ValueError("adaptive falloff needs a machine")
        if self.kind == "table" and not self.table:
            raise ValueError("table falloff needs a table")

    def __hash__(self):
        table = None if self.table is None else tuple(sorted(self.table.items()))
        return hash((self.kind, self.zeta, table, self.machine, self.d1, self.d2))

    def f(self, w: int) -> int:
        if w < 1:
            raise ValueError("segments have at least one cell")
        if self.kind == "unary":
            return w
        if self.kind == "linear":
            return self.zeta * w
        if self.kind == "table":
            return int(self.table[w])
        from .tm_model import runtime_bound
        t_max = runtime_bound(self.machine, w)
        return max(1, (t_max**3).bit_length())

    def __call__(self, w: int) -> int:
        return self.f(w)

    @property
    def head_phases(self) -> int:
        if self.kind == "unary":
            return 1
        if self.kind == "linear":
            return self.zeta
        raise UnsupportedFalloffError(f"{self.kind} falloff has no microscopic marker")

    @property
    def local_dim(self) -> int:
        return 2 + self.head_phases


UNARY = FalloffSpec()


# --- construction -----------------------------------------------------------

def _walk_terms(zeta: int) -> list[LocalTerm]:
    d = 2 + zeta
    heads = list(range(HD, HD + zeta))
    last = heads[-1]
    terms = []
    for x in (last, BD):
        for j in heads[:-1]:
            for y in (BL, BD):
                terms.append(edge_laplacian(d, (x, j, y), (x, j + 1, y), label="walk_phase"))
    for z in (BL, BD):
        terms.append(edge_laplacian(d, (last, BL, z), (last, HD, z), label="walk_advance"))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return [LocalTerm(3, total.side, total.entries, "h_walk")]


def _penalty_states(zeta: int) -> list[tuple[int, int]]:
    heads = list(range(HD, HD + zeta))
    states = [(BD, BD), (BD, BL)] + [(BL, h) for h in heads]
    states += [(j, k) for j in heads[:-1] for k in heads]
    return states


def build_marker(N: int, falloff: FalloffSpec = UNARY, include_shift: bool = True,
                 periodic: bool = False) -> ChainSpec:
    """Walk terms, invalid-substring penalties, end-of-chain bonus, boundary penalty and head bonus.

    The periodic ring has no chain ends, so the end-of-chain bonus and the
    constant shift are left out.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    zeta = falloff.head_phases
    d = 2 + zeta
    last = HD + zeta - 1
    terms = _walk_terms(zeta)
    terms.append(projector(d, *_penalty_states(zeta), weight=2, label="penalty"))
    if not periodic:
        terms.append(projector(d, (BD,), weight=-4, label="end_bonus"))
        bd_any = [(BD, x) for x in range(d)] + [(x, BD) for x in range(d)]
        terms.append(projector(d, *bd_any, weight=2, label="end_bonus_pair"))
    terms.append(projector(d, (BD,), weight=Fraction(1, 2), label="boundary_penalty"))
    terms.append(projector(d, (last, BD), weight=-1, label="head_bonus"))
    if include_shift and not periodic:
        terms.append(identity_term(d, 1, SHIFT, label="shift_1"))
        terms.append(identity_term(d, 2, -SHIFT, label="shift_2"))
    return ChainSpec(d, tuple(terms), "periodic" if periodic else "open", N)


def positive_part(N: int, falloff: FalloffSpec = UNARY) -> ChainSpec:
    """Walk plus penalties only: positive semi-definite."""
    spec = build_marker(N, falloff, include_shift=False)
    return ChainSpec(spec.local_dim, tuple(t for t in spec.terms if t.label in ("h_walk", "penalty")),
                     "open", N)


# --- signatures ---------------------------------------------------------------

@dataclass(frozen=True)
class SegmentDecomposition:
    proper: bool
    has_double_boundary: bool
    segments: tuple[int, ...]
    n_boundaries: int

    @property
    def good(self) -> bool:
        return self.proper and not self.has_double_boundary and len(self.segments) > 0


def signature_of(index: int, N: int, d: int = 3, bd_width: int = 1) -> tuple[int, ...]:
    """1 at sites holding the boundary symbol. With a lifted local space the
    boundary occupies local indices ``0 .. bd_width-1``."""
    out = []
    for _ in range(N):
        index, r = divmod(index, d)
        out.append(int(r < bd_width))
    return tuple(reversed(out))


def decompose(sig: Sequence[int]) -> SegmentDecomposition:
    sig = tuple(int(b) for b in sig)
    ones = [i for i, b in enumerate(sig) if b]
    proper = len(sig) > 0 and sig[0] == 1 and sig[-1] == 1
    double = any(sig[i] and sig[i + 1] for i in range(len(sig) - 1))
    segs = tuple(b - a - 1 for a, b in zip(ones, ones[1:]) if b - a > 1)
    return SegmentDecomposition(proper, double, segs, len(ones))


def classify(sig) -> str:
    dec = decompose(sig)
    tags = []
    if not dec.proper:
        tags.append("improper")
    if dec.has_double_boundary:
        tags.append("double")
    if not tags:
        return "good" if dec.segments else "empty"
    return "+".join(tags)


def all_signatures(N: int):
    return itertools.product((0, 1), repeat=N)


def block_indices(sig, d: int = 3, bd_width: int = 1) -> np.ndarray:
    """Basis indices whose boundary pattern equals ``sig`` (site 1 most significant)."""
    N = len(sig)
    per_site = [np.arange(bd_width) if b else np.arange(bd_width, d) for b in sig]
    idx = np.zeros(1, dtype=np.int64)
    for choices in per_site:
        idx = (idx[:, None] * d + choices[None, :]).ravel()
    return idx


def boundary_projector(N: int, site: int, d: int = 3, bd_width: int = 1) -> sp.csr_matrix:
    digits = basis_digits(N, d)[:, site - 1]
    return sp.diags((digits < bd_width).astype(float)).tocsr()


def block_restrict(op: SparseOperator, sig, spec: ChainSpec, bd_width: int = 1,
                   check: bool = True) -> SparseOperator:
    idx = block_indices(sig, spec.local_dim, bd_width)
    m = op.matrix
    rows = m[idx]
    if check:
        mask = np.ones(m.shape[0], dtype=bool)
        mask[idx] = False
        leak = rows[:, mask]
        if leak.nnz and np.max(np.abs(leak.data)) > 0:
            raise ConsistencyError(f"signature {''.join(map(str, sig))} couples to other blocks")
    return SparseOperator(rows[:, idx], op.hermitian, {"signature": tuple(sig)})


def block_operator(spec: ChainSpec, sig, bd_width: int = 1) -> SparseOperator:
    """Restriction built locally from the terms, never forming the full operator."""
    d, N = spec.local_dim, spec.N
    idx = block_indices(sig, d, bd_width)
    pos = {int(i): k for k, i in enumerate(idx)}
    digits = basis_digits(N, d)[idx] if d**N <= 2**22 else _digits_of(idx, N, d)
    weights = d ** np.arange(N - 1, -1, -1, dtype=np.int64)
    rows, cols, vals = [], [], []
    for term in spec.terms:
        k = term.arity
        local = {}
        for (a, b), v in term.entries.items():
            local.setdefault(b, []).append((a, complex(v)))
        for site in spec.placements(k):
            sites = [(site - 1 + j) % N for j in range(k)]
            code = np.zeros(len(idx), dtype=np.int64)
            for s in sites:
                code = code * d + digits[:, s]
            base = idx - (digits[:, sites].astype(np.int64) @ weights[sites])
            for b, outs in local.items():
                sel = np.nonzero(code == b)[0]
                if not len(sel):
                    continue
                for a, v in outs:
                    da = _local_digits(a, k, d)
                    tgt = base[sel] + sum(int(x) * int(weights[s]) for x, s in zip(da, sites))
                    for src, t in zip(sel, tgt):
                        j = pos.get(int(t))
                        if j is None:
                            raise ConsistencyError(f"term {term.label} leaves the block")
                        rows.append(j)
                        cols.append(src)
                        vals.append(v)
    n = len(idx)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    return SparseOperator(m, True, {"signature": tuple(sig)})


def _digits_of(idx, N, d):
    out = np.empty((len(idx), N), dtype=np.int16)
    rem = idx.copy()
    for j in range(N - 1, -1, -1):
        rem, out[:, j] = np.divmod(rem, d)
    return out


def _local_digits(a: int, k: int, d: int):
    out = []
    for _ in range(k):
        a, r = divmod(a, d)
        out.append(r)
    return out[::-1]


def block_spectrum(spec: ChainSpec, sig, bd_width: int = 1, k: int | None = None):
    op = block_operator(spec, sig, bd_width)
    if k is None or op.dimension <= 4096:
        r = diagonalize_dense(op, label="".join(map(str, sig)))
        return r.eigenvalues if k is None else r.eigenvalues[:k]
    return lowest_k(op, k).eigenvalues


# --- predictions --------------------------------------------------------------

def predicted_block_energy(sig, falloff: FalloffSpec = UNARY) -> EigenInterval | None:
    """Shifted block minimum bracket ``[-sum 2^-f(w_i), -sum 4^-f(w_i)]``; None off the good class.

    Endpoints are exact rationals, so no underflow for large ``f``. Single-cell
    segments sit on the closed lower endpoint and are reported uncertified.
    """
    dec = decompose(sig)
    if not dec.good:
        return None
    lo = -sum(Fraction(1, 2 ** falloff.f(w)) for w in dec.segments)
    hi = -sum(Fraction(1, 4 ** falloff.f(w)) for w in dec.segments)
    return EigenInterval(lo, hi, certified=all(falloff.f(w) >= 2 for w in dec.segments))


def idealized_block_energy(sig, falloff: FalloffSpec = UNARY) -> float | None:
    """Block minimum of the shifted marker from per-segment walk energies."""
    dec = decompose(sig)
    if not dec.proper:
        return None
    e = sum(bonus_energy(falloff.f(w)) for w in dec.segments)
    n_double = sum(1 for a, b in zip(sig, sig[1:]) if a and b)
    return e + n_double * 2.5


def modified_signatures(sig) -> list[tuple[int, ...]]:
    """Repairs of an improper or double-bounded signature.

    Missing end: place a boundary at the end, or slide the boundary next to
    the end onto it. Double boundary: delete either member of the pair.
    """
    sig = tuple(int(b) for b in sig)
    N = len(sig)
    out = []
    if sig[0] == 0:
        out.append((1,) + sig[1:])
        if N > 1 and sig[1] == 1:
            out.append((1, 0) + sig[2:])
    if sig[-1] == 0:
        out.append(sig[:-1] + (1,))
        if N > 1 and sig[-2] == 1:
            out.append(sig[:-2] + (0, 1))
    for i in range(N - 1):
        if sig[i] and sig[i + 1]:
            out.append(sig[:i] + (0,) + sig[i + 1:])
            out.append(sig[:i + 1] + (0,) + sig[i + 2:])
    seen, uniq = set(), []
    for s in out:
        if s != sig and s not in seen:
            seen.add(s)
            uniq.append(s)
    return uniq


# --- segment constraints ------------------------------------------------------

def counter_states(d1: int, d2: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(1, d1 + 1) for b in range(d2)]


def apply_segment_constraints(spec: ChainSpec, d1: int, d2: int) -> ChainSpec:
    """Attach a counter (min(position, d1), position mod d2) to every site.

    Marker terms act as ``h (x) 1`` on the counter. Diagonal weight-2
    penalties force the counter to start at 1 after a boundary, increase
    along the segment and sit on an accepted value (d1, 0) before the
    closing boundary; boundary sites must carry the counter (1, 0). Local
    index of (marker m, counter c) is ``m * K + c``.
    """
    if d1 < 1 or d2 < 1:
        raise ValueError("d1, d2 >= 1")
    states = counter_states(d1, d2)
    K = len(states)
    if K == 1:
        return spec
    pos = {c: i for i, c in enumerate(states)}
    start = pos[(1, 1 % d2)]
    canonical = pos[(1, 0)]
    accept = pos[(d1, 0)]

    def nxt(c):
        a, b = states[c]
        return pos[(min(a + 1, d1), (b + 1) % d2)]

    d = spec.local_dim
    D = d * K
    terms = []
    for t in spec.terms:
        entries = {}
        for (i, j), v in t.entries.items():
            di, dj = _local_digits(i, t.arity, d), _local_digits(j, t.arity, d)
            for cs in itertools.product(range(K), repeat=t.arity):
                ii = jj = 0
                for x, y, c in zip(di, dj, cs):
                    ii = ii * D + x * K + c
                    jj = jj * D + y * K + c
                entries[(ii, jj)] = v
        terms.append(LocalTerm(t.arity, D**t.arity, entries, t.label))
    bad1 = [(BD * K + c,) for c in range(K) if c != canonical]
    terms.append(projector(D, *bad1, weight=2, label="counter_boundary"))
    nonbd = [m for m in range(d) if m != BD]
    bad2 = []
    for c1, c2 in itertools.product(range(K), repeat=2):
        for m2 in nonbd:
            if c2 != start:
                bad2.append((BD * K + c1, m2 * K + c2))
        for m1 in nonbd:
            for m2 in nonbd:
                if c2 != nxt(c1):
                    bad2.append((m1 * K + c1, m2 * K + c2))
            if c1 != accept:
                bad2.append((m1 * K + c1, BD * K + c2))
    terms.append(projector(D, *bad2, weight=2, label="counter_chain"))
    return ChainSpec(D, tuple(terms), spec.boundary, spec.N)


def constrained_block_minimum(spec: ChainSpec, sig, d1: int, d2: int) -> float:
    """Minimum over all counter fillings of a marker signature block in the lifted chain."""
    K = d1 * d2
    lifted = apply_segment_constraints(spec, d1, d2)
    if K == 1:
        return float(block_spectrum(lifted, sig)[0])
    base = block_spectrum(spec, sig)[0]
    # counters are static: block = marker block + diagonal counter penalty
    best = np.inf
    for cs in itertools.product(range(K), repeat=len(sig)):
        pen = _counter_penalty(lifted, sig, cs, K)
        best = min(best, pen)
    return float(base + best)


def _counter_penalty(lifted: ChainSpec, sig, cs, K) -> float:
    total = 0.0
    rep = [BD if b else BL for b in sig]
    digits = [m * K + c for m, c in zip(rep, cs)]
    for t in lifted.terms:
        if not t.label.startswith("counter"):
            continue
        for site in lifted.placements(t.arity):
            code = 0
            for j in range(t.arity):
                code = code * lifted.local_dim + digits[site - 1 + j]
            v = t.entries.get((code, code))
            if v is not None:
                total += float(complex(v).real)
    return total


def constrained_block_minimum_micro(spec: ChainSpec, sig, d1: int, d2: int, cs) -> float:
    """Microscopic block minimum at one counter filling ``cs`` (for cross-checks)."""
    lifted = apply_segment_constraints(spec, d1, d2)
    K = d1 * d2
    idx = block_indices(sig, spec.local_dim, 1)
    N = len(sig)
    mdig = _digits_of(idx, N, spec.local_dim)
    lidx = np.zeros(len(idx), dtype=np.int64)
    for j in range(N):
        lidx = lidx * lifted.local_dim + mdig[:, j] * K + cs[j]
    op = assemble(lifted)
    sub = op.matrix[lidx][:, lidx]
    return float(np.linalg.eigvalsh(sub.toarray())[0])


# --- verification -------------------------------------------------------------

@dataclass
class BlockRow:
    signature: str
    cls: str
    lam_min: float
    predicted_lower: float | None
    predicted_upper: float | None
    gap: float
    dim: int
    extra: dict = field(default_factory=dict)


def marker_block_table(N: int, falloff: FalloffSpec = UNARY, max_blocks: int | None = None,
                       spec: ChainSpec | None = None) -> list[BlockRow]:
    """Per-signature minima and gaps of the shifted marker, signatures in lexicographic order."""
    spec = spec or build_marker(N, falloff, include_shift=True)
    rows = []
    for n, sig in enumerate(all_signatures(N)):
        if max_blocks is not None and n >= max_blocks:
            break
        dim = len(block_indices(sig, spec.local_dim))
        ev = block_spectrum(spec, sig, k=2 if dim > 4096 else None)
        pred = predicted_block_energy(sig, falloff)
        rows.append(BlockRow("".join(map(str, sig)), classify(sig), float(ev[0]),
                             None if pred is None else float(pred.lower),
                             None if pred is None else float(pred.upper),
                             float(ev[1] - ev[0]) if len(ev) > 1 else float("inf"), len(ev)))
    return rows


def check_block_theorem(N: int, falloff: FalloffSpec = UNARY, tol: float = 1e-9,
                        gap_tol: float = 1e-6) -> dict:
    """Good blocks inside their bracket with gap >= 1/2; every other block >= 1 above a repair."""
    rows = marker_block_table(N, falloff)
    lam = {r.signature: r.lam_min for r in rows}
    failures = []
    for r in rows:
        sig = tuple(int(c) for c in r.signature)
        dec = decompose(sig)
        if r.cls == "good" and all(w >= 2 for w in dec.segments):
            if not (r.predicted_lower - tol <= r.lam_min <= r.predicted_upper + tol):
                failures.append((r.signature, "interval", r.lam_min))
            if r.gap < 0.5 - gap_tol:
                failures.append((r.signature, "gap", r.gap))
        elif r.cls != "good" and r.cls != "empty":
            cands = modified_signatures(sig)
            best = min(lam["".join(map(str, c))] for c in cands)
            r.extra["margin"] = r.lam_min - best
            if r.lam_min < best + 1 - tol:
                failures.append((r.signature, "repair", r.lam_min - best))
    return {"N": N, "rows": rows, "failures": failures, "ok": not failures}


def verify_marker(N: int, falloff: FalloffSpec = UNARY, max_blocks: int | None = None) -> list[dict]:
    return [{"signature": r.signature, "class": r.cls, "lambda_min": r.lam_min,
             "predicted_lower": r.predicted_lower, "predicted_upper": r.predicted_upper, "gap": r.gap}
            for r in marker_block_table(N, falloff, max_blocks)]


def commutes_with_boundaries(op: SparseOperator, N: int, d: int = 3, bd_width: int = 1) -> bool:
    for i in range(1, N + 1):
        P = boundary_projector(N, i, d, bd_width)
        c = (P @ op.matrix - op.matrix @ P).tocsr()
        c.eliminate_zeros()
        if c.nnz:
            return False
    return True
