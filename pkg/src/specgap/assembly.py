"""Trivial, dense and guard Hamiltonians, the sector layout and the total Hamiltonian.

Local space per site: ``(C (x) D) + T`` with the computational part C, the
dense part D (a qubit) and the trivial part T (a qubit). Local index
``c * dD + d`` for the product part, ``dC * dD + t`` for the trivial part.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .core import (ChainSpec, ExactScalar, LocalTerm, assemble, identity_term, index_to_digits,
                   digits_to_index, operator_norm_bound, projector)
from .marker import BD, HD, UNARY, FalloffSpec, all_signatures, block_operator, build_marker
from .spectra import diagonalize_dense


class PreconditionError(ValueError):
    pass


# --- components ---------------------------------------------------------------

def build_trivial(N: int) -> ChainSpec:
    """Sum of |1><1| over sites: unique zero-energy state |0...0>."""
    return ChainSpec(2, (projector(2, (1,), label="trivial"),), "open", N)


def build_dense(N: int, model: str = "hopping", boundary: str = "open") -> ChainSpec:
    """Ferromagnetic exchange chain ``sum (1 - SWAP)/2``.

    Zero ground energy without any shift; the one-flip band of the open chain
    is ``1 - cos(k pi / N)``, k = 0..N-1, so the gap closes like 1/N^2.
    """
    if model != "hopping":
        raise ValueError(f"unknown dense model {model!r}")
    entries = {(1, 1): ExactScalar(Fraction(1, 2)), (2, 2): ExactScalar(Fraction(1, 2)),
               (1, 2): ExactScalar(Fraction(-1, 2)), (2, 1): ExactScalar(Fraction(-1, 2))}
    return ChainSpec(2, (LocalTerm(2, 4, entries, "dense_hop"),), boundary, N)


def dense_single_flip_levels(N: int) -> np.ndarray:
    return 1 - np.cos(np.arange(N) * np.pi / N)


def shift_spectrum(spec: ChainSpec, a) -> ChainSpec:
    """Add ``a`` per site and ``-a`` per bond: every eigenvalue moves up by exactly ``a``."""
    if spec.boundary != "open":
        raise PreconditionError("the shift needs open boundaries (a ring has as many bonds as sites)")
    a = Fraction(a)
    if a == 0:
        return spec
    d = spec.local_dim
    return spec.with_terms([identity_term(d, 1, a, "shift_site"), identity_term(d, 2, -a, "shift_bond")])


# --- toy computational Hamiltonians ------------------------------------------------

def toy_computation(N: int, halting: bool, mu=Fraction(1), falloff: FalloffSpec = UNARY) -> ChainSpec:
    """Local stand-in for marker plus machine.

    Halting: the scaled marker, whose segments keep their bonus. Non-halting:
    an unscaled penalty on the head reaching a boundary cancels every bonus.
    """
    m = build_marker(N, falloff, include_shift=True)
    mu = ExactScalar.of(Fraction(mu))
    terms = [t.scaled(mu) for t in m.terms]
    if not halting:
        last = HD + falloff.head_phases - 1
        terms.append(projector(m.local_dim, (last, BD), weight=1, label="no_halt_penalty"))
    return ChainSpec(m.local_dim, tuple(terms), "open", N)


# --- sector layout -------------------------------------------------------------

@dataclass(frozen=True)
class SectorLayout:
    dim_c: int
    dim_d: int = 2
    dim_t: int = 2

    @property
    def local_dim(self) -> int:
        return self.dim_c * self.dim_d + self.dim_t

    @property
    def product_indices(self) -> range:
        return range(self.dim_c * self.dim_d)

    @property
    def trivial_indices(self) -> range:
        return range(self.dim_c * self.dim_d, self.local_dim)

    def sector_of(self, local: int) -> int:
        """1/2 for the product part, 3 for the trivial part."""
        return 3 if local >= self.dim_c * self.dim_d else 1


def _lift(term: LocalTerm, layout: SectorLayout, part: str) -> LocalTerm:
    k, dl = term.arity, layout.local_dim
    dc, dd, dt = layout.dim_c, layout.dim_d, layout.dim_t
    entries = {}
    for (i, j), v in term.entries.items():
        if part == "C":
            di, dj = index_to_digits(i, k, dc), index_to_digits(j, k, dc)
            for env in itertools.product(range(dd), repeat=k):
                a = [x * dd + e for x, e in zip(di, env)]
                b = [x * dd + e for x, e in zip(dj, env)]
                entries[(digits_to_index(a, dl), digits_to_index(b, dl))] = v
        elif part == "D":
            di, dj = index_to_digits(i, k, dd), index_to_digits(j, k, dd)
            for env in itertools.product(range(dc), repeat=k):
                a = [e * dd + x for x, e in zip(di, env)]
                b = [e * dd + x for x, e in zip(dj, env)]
                entries[(digits_to_index(a, dl), digits_to_index(b, dl))] = v
        else:
            off = dc * dd
            di, dj = index_to_digits(i, k, dt), index_to_digits(j, k, dt)
            entries[(digits_to_index([off + x for x in di], dl),
                     digits_to_index([off + x for x in dj], dl))] = v
    return LocalTerm(k, dl**k, entries, f"{part}:{term.label}")


def build_guard(N: int, layout: SectorLayout, strength=1) -> ChainSpec:
    """One unit per bond whose two sites lie in different parts (product vs trivial)."""
    pairs = [(a, b) for a in layout.product_indices for b in layout.trivial_indices]
    pairs += [(b, a) for a, b in pairs]
    return ChainSpec(layout.local_dim, (projector(layout.local_dim, *pairs, weight=strength, label="guard"),),
                     "open", N)


@dataclass(frozen=True)
class AssemblyConfig:
    beta: Fraction = Fraction(1)
    eta: str = "1"
    halting: bool = False
    mu: Fraction | None = None
    dense_model: str = "hopping"
    guard_strength: Fraction = Fraction(1)
    shift: Fraction = Fraction(1)
    normalize: bool = False
    falloff: FalloffSpec = UNARY

    def __post_init__(self):
        if not 0 < Fraction(self.beta) <= 1:
            raise ValueError("beta lies in (0, 1]")
        if self.guard_strength < 1:
            raise ValueError("guard strength >= 1")

    @property
    def mu_value(self) -> Fraction:
        if self.mu is not None:
            return Fraction(self.mu)
        return Fraction(1, 4 ** len(self.eta))

    @classmethod
    def from_json(cls, obj: dict) -> "AssemblyConfig":
        kw = dict(obj)
        for k in ("beta", "mu", "guard_strength", "shift"):
            if kw.get(k) is not None:
                kw[k] = Fraction(str(kw[k]))
        kw.pop("falloff", None)
        return cls(**kw)


def computational_spec(cfg: AssemblyConfig, N: int) -> ChainSpec:
    return shift_spectrum(toy_computation(N, cfg.halting, cfg.mu_value, cfg.falloff), cfg.shift)


def _scale(spec: ChainSpec, c) -> list[LocalTerm]:
    c = ExactScalar.of(Fraction(c))
    return [t.scaled(c) for t in spec.terms]


def build_total(cfg: AssemblyConfig, N: int, comp: ChainSpec | None = None) -> ChainSpec:
    """``beta (H (x) 1 + 1 (x) H_dense) + H_trivial + H_guard`` on the sector layout."""
    comp = comp or computational_spec(cfg, N)
    dense = build_dense(N, cfg.dense_model)
    layout = SectorLayout(comp.local_dim, dense.local_dim, 2)
    beta = Fraction(cfg.beta)
    terms = [_lift(t, layout, "C") for t in _scale(comp, beta)]
    terms += [_lift(t, layout, "D") for t in _scale(dense, beta)]
    terms += [_lift(t, layout, "T") for t in build_trivial(N).terms]
    terms += list(build_guard(N, layout, cfg.guard_strength).terms)
    spec = ChainSpec(layout.local_dim, tuple(terms), "open", N)
    if cfg.normalize:
        spec = normalize_spec(spec)
    return spec


def grouped_terms(spec: ChainSpec) -> dict[int, LocalTerm]:
    out = {}
    for t in spec.terms:
        out[t.arity] = t if t.arity not in out else out[t.arity] + t
    return out


def normalization_factor(spec: ChainSpec, bounds={1: 2, 2: 1}) -> Fraction:
    """Power of two by which all terms are divided so the grouped norms meet ``bounds``."""
    g = grouped_terms(spec)
    worst = max([operator_norm_bound(g[k]) / b for k, b in bounds.items() if k in g] + [1.0])
    return Fraction(2 ** max(0, math.ceil(math.log2(worst) - 1e-12)))


def normalize_spec(spec: ChainSpec) -> ChainSpec:
    s = normalization_factor(spec)
    if s == 1:
        return spec
    return ChainSpec(spec.local_dim, tuple(t.scaled(1 / s) for t in spec.terms), spec.boundary, spec.N)


# --- spectra ----------------------------------------------------------------------

def sector_projector_diag(spec: ChainSpec, layout: SectorLayout, which: str) -> np.ndarray:
    """Diagonal of the projector onto all-trivial (``"T"``), all-product (``"P"``) or mixed states."""
    from .core import basis_digits
    dig = basis_digits(spec.N, spec.local_dim)
    triv = dig >= layout.dim_c * layout.dim_d
    if which == "T":
        return triv.all(axis=1)
    if which == "P":
        return (~triv).all(axis=1)
    return ~(triv.all(axis=1) | (~triv).all(axis=1))


def spectrum_of(spec: ChainSpec) -> np.ndarray:
    return diagonalize_dense(assemble(spec)).eigenvalues


def chain_spectrum_blocks(spec: ChainSpec, below: float | None = None) -> np.ndarray:
    """Full spectrum of a marker-type chain, one signature block at a time."""
    out = []
    for sig in all_signatures(spec.N):
        op = block_operator(spec, sig)
        a = op.matrix.toarray()
        ev = np.linalg.eigvalsh(a.real if not np.any(a.imag) else a)
        out.append(ev if below is None else ev[ev < below])
    return np.sort(np.concatenate(out))


def multiset_remove(big: np.ndarray, small: np.ndarray, tol: float = 1e-9):
    """Remove ``small`` from ``big`` as multisets (sorted greedy matching); returns (rest, unmatched)."""
    big = np.sort(big)
    used = np.zeros(len(big), dtype=bool)
    unmatched = []
    for x in np.sort(small):
        i = np.searchsorted(big, x - tol)
        while i < len(big) and used[i]:
            i += 1
        if i < len(big) and abs(big[i] - x) <= tol:
            used[i] = True
        else:
            unmatched.append(x)
    return big[~used], np.array(unmatched)


def check_total_spectrum(cfg: AssemblyConfig, N: int, tol: float = 1e-9) -> dict:
    """Dense check of spec(H_tot) = {0} + (spec(H) + spec(D)) + G with G >= 1."""
    comp = computational_spec(cfg, N)
    total = build_total(cfg, N, comp)
    ev_tot = spectrum_of(total)
    h = spectrum_of(comp)
    dn = spectrum_of(build_dense(N, cfg.dense_model))
    scale = normalization_factor(build_total(replace(cfg, normalize=False), N, comp)) if cfg.normalize else 1
    combined = float(cfg.beta) * np.add.outer(h, dn).ravel() / float(scale)
    rest, unmatched = multiset_remove(ev_tot, combined, tol)
    has_zero = np.any(np.abs(rest) <= tol)
    if has_zero:
        rest = np.delete(rest, np.argmin(np.abs(rest)))
    g_min = float(rest.min()) if len(rest) else float("inf")
    ok = len(unmatched) == 0 and has_zero and g_min >= 1 / float(scale) - tol
    return {"N": N, "dim": len(ev_tot), "unmatched": len(unmatched), "zero": bool(has_zero),
            "G_min": g_min, "G_size": len(rest), "ok": bool(ok)}


def _low_sums(lists, window: float) -> np.ndarray:
    """Sorted sums ``x_1 + ... + x_k`` (one entry per list) that lie below ``window``."""
    mins = [float(l[0]) for l in lists]
    cur = np.zeros(1)
    for i, l in enumerate(lists):
        rest = sum(mins[i + 1:])
        cur = np.add.outer(cur, l).ravel()
        cur = np.sort(cur[cur < window - rest])
    return cur


def run_spectra(cfg: AssemblyConfig, N: int, window: float) -> dict:
    """Low spectra of open runs of product sites (``("P", L)``) and trivial sites (``("T", L)``)."""
    beta = float(cfg.beta)
    out = {}
    one_site = computational_spec(cfg, 2)
    site_h = sum(t.dense for t in one_site.terms if t.arity == 1)
    for L in range(1, N + 1):
        out[("T", L)] = np.sort(np.array([bin(i).count("1") for i in range(2**L)], dtype=float))
        if L == 1:
            h = np.linalg.eigvalsh(np.asarray(site_h).real)
            dn = np.zeros(2)
        else:
            h = chain_spectrum_blocks(computational_spec(cfg, L))
            dn = diagonalize_dense(assemble(build_dense(L, cfg.dense_model))).eigenvalues
        out[("P", L)] = np.sort(beta * np.add.outer(h, dn).ravel())
    return out


def total_spectrum_model(cfg: AssemblyConfig, N: int, window: float = 2.0) -> dict:
    """Spectrum of H_tot below ``window``, assembled from sector spectra.

    Every basis configuration splits the chain into maximal runs of product
    sites and trivial sites. H_tot keeps that split; a run contributes the
    spectrum of its own open chain and each interface costs the guard
    strength. The all-product pattern is ``beta * (spec(H) + spec(D))``, the
    all-trivial one the Hamming weights, and the rest is the mixed part G.
    """
    runs = run_spectra(cfg, N, window)
    g = float(cfg.guard_strength)
    parts = {"P": [], "T": [], "G": []}
    for pat in itertools.product("PT", repeat=N):
        groups = [(k, len(list(v))) for k, v in itertools.groupby(pat)]
        shift = g * (len(groups) - 1)
        vals = _low_sums([runs[k] for k in groups], window - shift) + shift
        key = groups[0][0] if len(groups) == 1 else "G"
        parts[key].append(vals)
    parts = {k: np.sort(np.concatenate(v)) if v else np.zeros(0) for k, v in parts.items()}
    low = np.sort(np.concatenate(list(parts.values())))
    return {"N": N, "eigenvalues": low, "lambda0": float(low[0]), "lambda1": float(low[1]),
            "gap": float(low[1] - low[0]), "count_below_half": int(np.sum((low >= -1e-12) & (low < 0.5))),
            "G_min": _first(parts["G"]), "product_min": _first(parts["P"]), "parts": parts}


def _first(a) -> float:
    return float(a[0]) if len(a) else float("inf")


# --- audit -------------------------------------------------------------------------

@dataclass
class AuditReport:
    hermitian: bool
    norms: dict
    ring_ok: bool
    phases_ok: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.hermitian and self.ring_ok and self.phases_ok and not self.violations


def audit_interaction_form(spec: ChainSpec, bounds={1: 2, 2: 1}, allowed_phases=(Fraction(0),)) -> AuditReport:
    """Hermiticity, grouped norm bounds, coefficient ring and the phase whitelist.

    Phases are in units of pi, as stored on ``ExactScalar``.
    """
    violations = []
    herm = True
    for t in spec.terms:
        for (i, j), v in t.entries.items():
            if t.entries.get((j, i), ExactScalar()) != v.conjugate():
                herm = False
                violations.append(f"term {t.label!r}: entry ({i},{j})={complex(v)} breaks Hermiticity")
                break
    g = grouped_terms(spec)
    norms = {k: operator_norm_bound(t) for k, t in g.items()}
    for k, b in bounds.items():
        if k in norms and norms[k] > b + 1e-12:
            violations.append(f"arity-{k} norm {norms[k]:.6g} exceeds {b}")
    allowed = {Fraction(p) % 1 for p in allowed_phases}
    ring_ok = phases_ok = True
    for t in spec.terms:
        for (i, j), v in t.entries.items():
            if not all(isinstance(x, Fraction) for x in (v.rational, v.sqrt2, v.phase)):
                ring_ok = False
                violations.append(f"term {t.label!r}: entry ({i},{j}) is not an exact Q(sqrt 2) scalar")
            if v.phase not in allowed:
                phases_ok = False
                violations.append(f"term {t.label!r}: entry ({i},{j}) has phase {v.phase}")
    return AuditReport(herm, norms, ring_ok, phases_ok, violations)


# --- periodic variant -----------------------------------------------------------------

def tiling_penalty_minimum(N: int, P: int) -> int:
    """Least number of ring bonds with ``a_{i+1} != a_i + 1 (mod P)`` over all ancilla fillings."""
    best = None
    for a in itertools.product(range(P), repeat=N):
        breaks = sum((a[(i + 1) % N] - a[i] - 1) % P != 0 for i in range(N))
        best = breaks if best is None else min(best, breaks)
        if best == 0:
            break
    return best


def tiling_term(dim_c: int, P: int) -> LocalTerm:
    d = dim_c * P
    bad = [(c1 * P + a1, c2 * P + a2) for c1 in range(dim_c) for c2 in range(dim_c)
           for a1 in range(P) for a2 in range(P) if (a2 - a1 - 1) % P]
    return projector(d, *bad, weight=1, label="tiling") if bad else LocalTerm(2, d * d, {}, "tiling")


def lift_ancilla(term: LocalTerm, dim_c: int, P: int) -> LocalTerm:
    k, d = term.arity, dim_c * P
    entries = {}
    for (i, j), v in term.entries.items():
        di, dj = index_to_digits(i, k, dim_c), index_to_digits(j, k, dim_c)
        for anc in itertools.product(range(P), repeat=k):
            entries[(digits_to_index([x * P + a for x, a in zip(di, anc)], d),
                     digits_to_index([x * P + a for x, a in zip(dj, anc)], d))] = v
    return LocalTerm(k, d**k, entries, term.label)


def build_periodic_variant(cfg: AssemblyConfig, N: int, P: int, with_sectors: bool = True) -> ChainSpec:
    """Ring version: marker without the end terms, plus a period-P ancilla tiling on the computational part."""
    if math.gcd(N, P) != 1:
        raise PreconditionError(f"ring length {N} must be coprime to the period {P}")
    m = build_marker(N, cfg.falloff, include_shift=False, periodic=True)
    mu = ExactScalar.of(cfg.mu_value)
    comp_terms = [lift_ancilla(t.scaled(mu), m.local_dim, P) for t in m.terms]
    comp_terms.append(tiling_term(m.local_dim, P))
    comp = ChainSpec(m.local_dim * P, tuple(comp_terms), "periodic", N)
    if not with_sectors:
        return comp
    dense = build_dense(N, cfg.dense_model, boundary="periodic")
    layout = SectorLayout(comp.local_dim, dense.local_dim, 2)
    beta = Fraction(cfg.beta)
    terms = [_lift(t, layout, "C") for t in _scale(comp, beta)]
    terms += [_lift(t, layout, "D") for t in _scale(dense, beta)]
    terms += [_lift(t, layout, "T") for t in build_trivial(N).terms]
    terms += list(build_guard(N, layout, cfg.guard_strength).terms)
    return ChainSpec(layout.local_dim, tuple(terms), "periodic", N)
