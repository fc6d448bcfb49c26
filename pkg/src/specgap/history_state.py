"""History-state Hamiltonians of bounded-tape runs and segment energies.

A segment of length ``w`` counts both of its boundary sites, so the machine
gets ``w - 2`` tape cells and the marker walk runs over the same ``w - 2``
cells. Adjacent segments share a boundary: a partition of an ``N``-site chain
into segments satisfies ``sum(w_i - 1) = N - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .marker import UNARY, FalloffSpec, block_operator, build_marker, decompose
from .path_laplacian import bonus_energy
from .qpe_sim import PhaseEncoding, truncation_overlap
from .spectra import diagonalize_dense, lowest_k
from .tm_model import TMDefinition, check_well_formed, run_bounded, runtime_bound

DOUBLE_BOUNDARY_ENERGY = 2.5  # shifted marker energy of an adjacent boundary pair
QPE_OVERHEAD = 4              # segment sites not available to the phase register


class CompileError(RuntimeError):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    """Which configurations are penalized.

    A configuration is penalized (weight ``boundary_weight``) when its head
    sits on the last cell in one of ``penalized_states`` and its next move
    would leave the tape. ``None`` means every non-final state. The flag
    state carries ``flag_penalty_weight``.
    """

    penalized_states: frozenset | None = None
    flag_penalty_weight: float = 0.0
    boundary_weight: float = 1.0

    def __post_init__(self):
        for x in (self.flag_penalty_weight, self.boundary_weight):
            if not 0.0 <= x <= 1.0:
                raise ValueError("penalty weights lie in [0, 1]")


@dataclass
class CompiledHistory:
    hamiltonian: np.ndarray
    outcome: str
    steps: int
    penalized: dict[int, float]
    flag_vertices: list[int] = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return self.hamiltonian.shape[0]

    def lambda_min(self) -> float:
        if not self.penalized:
            return 0.0
        if self.n_vertices == 1:
            return float(self.hamiltonian[0, 0])
        return float(np.linalg.eigvalsh(self.hamiltonian)[0])


def path_hamiltonian(n: int, penalties: dict[int, float] | None = None) -> np.ndarray:
    """Laplacian of an ``n``-vertex path plus diagonal penalties."""
    h = np.zeros((n, n))
    for i in range(n - 1):
        h[i, i] += 1
        h[i + 1, i + 1] += 1
        h[i, i + 1] = h[i + 1, i] = -1
    for v, p in (penalties or {}).items():
        h[v, v] += p
    return h


def compile_history(tm: TMDefinition, cells: int, tape="", penalties: PenaltySpec = PenaltySpec(),
                    t_max: int | None = None) -> CompiledHistory:
    """Path Laplacian over the run's configurations with out-of-tape, out-of-time and flag penalties."""
    if not check_well_formed(tm).reversible:
        raise CompileError(f"machine {tm.name!r} is not reversible; its configuration graph branches")
    if cells < 1:
        raise ValueError("need at least one tape cell")
    trace = run_bounded(tm, tape, cells, t_max=t_max)
    configs = trace.configurations
    allowed = penalties.penalized_states
    pen: dict[int, float] = {}
    for v, c in enumerate(configs):
        if c.state == tm.final or c.head != cells:
            continue
        if allowed is not None and c.state not in allowed:
            continue
        rule = tm.rules.get((c.state, c.tape[c.head - 1]))
        if rule is not None and rule.move == "R":
            pen[v] = pen.get(v, 0.0) + penalties.boundary_weight
    if trace.outcome == "out_of_time":
        last = len(configs) - 1
        pen[last] = pen.get(last, 0.0) + penalties.boundary_weight
    flags = [v for v, c in enumerate(configs) if tm.flag is not None and c.state == tm.flag]
    if penalties.flag_penalty_weight > 0:
        for v in flags or [0]:
            pen[v] = pen.get(v, 0.0) + penalties.flag_penalty_weight
    return CompiledHistory(path_hamiltonian(len(configs), pen), trace.outcome, trace.steps, pen, flags)


@dataclass(frozen=True)
class SegmentModel:
    """Everything that fixes the energy of one segment as a function of its length."""

    tm: TMDefinition
    tape: str = ""
    enc: PhaseEncoding | None = None
    falloff: FalloffSpec = UNARY
    mu: Fraction | None = None
    penalized_states: frozenset | None = None
    qpe_overhead: int = QPE_OVERHEAD

    @property
    def scale(self) -> Fraction:
        if self.mu is not None:
            return Fraction(self.mu)
        return self.enc.mu if self.enc is not None else Fraction(1)

    def qpe_qubits(self, w: int) -> int:
        return w - self.qpe_overhead

    def truncated(self, w: int) -> bool:
        if self.enc is None:
            return False
        return self.qpe_qubits(w) < self.enc.phi_len + 1


@dataclass(frozen=True)
class SegmentEnergy:
    w: int
    lambda_min: float
    classification: str
    marker_energy: float
    history_energy: float
    falloff: int | None
    flag_weight: float = 0.0

    @property
    def bonus_log2(self) -> float | None:
        """log2 of the upper bound on the marker bonus magnitude."""
        return None if self.falloff is None else -float(self.falloff)


def flag_weight(model: SegmentModel, w: int) -> float:
    """Penalty weight on the flag state for a truncated phase register; at least mu."""
    if not model.truncated(w):
        return 0.0
    mu = float(model.enc.mu)
    n = model.qpe_qubits(w)
    if n < 1:
        return mu
    return max(truncation_overlap(model.enc, n), mu)


def _tape_for(model: SegmentModel, cells: int) -> str:
    return model.tape[:cells]


def segment_energy(model: SegmentModel, w: int) -> SegmentEnergy:
    if w < 2:
        raise ValueError("segments have two boundary sites")
    return _segment_energy_cached(model, w)


@lru_cache(maxsize=None)
def _segment_energy_cached(model: SegmentModel, w: int) -> SegmentEnergy:
    mu = float(model.scale)
    cells = w - 2
    if cells == 0:
        # adjacent boundaries: no tape, the head is born next to the boundary
        hist = PenaltySpec().boundary_weight
        return SegmentEnergy(w, mu * DOUBLE_BOUNDARY_ENERGY + hist, "no_halt",
                             mu * DOUBLE_BOUNDARY_ENERGY, hist, None)
    fw = model.falloff.f(cells)
    marker = mu * bonus_energy(fw)
    omega = flag_weight(model, w)
    hist = compile_history(model.tm, cells, _tape_for(model, cells),
                           PenaltySpec(model.penalized_states, omega))
    lam_h = hist.lambda_min()
    if model.truncated(w):
        cls = "truncated"
    elif hist.outcome == "halted" and not hist.penalized:
        cls = "halted"
    else:
        cls = "no_halt"
    return SegmentEnergy(w, marker + lam_h, cls, marker, lam_h, fw, omega)


def segment_profile(model: SegmentModel, ws) -> list[SegmentEnergy]:
    return [segment_energy(model, w) for w in ws]


def w_halt(model: SegmentModel, w_max: int = 40) -> int | None:
    """Smallest segment length whose run halts untruncated and unpenalized."""
    for w in range(2, w_max + 1):
        if segment_energy(model, w).classification == "halted":
            return w
    return None


def t_halt(model: SegmentModel, w_max: int = 40) -> int | None:
    w = w_halt(model, w_max)
    if w is None:
        return None
    return run_bounded(model.tm, _tape_for(model, w - 2), w - 2, record=False).steps


def segments_of(sig) -> list[int]:
    """Segment lengths of a proper signature, boundaries included (adjacent boundaries give 2)."""
    ones = [i for i, b in enumerate(sig) if b]
    return [b - a + 1 for a, b in zip(ones, ones[1:])]


def multi_segment_energy(model: SegmentModel, sig) -> float:
    dec = decompose(sig)
    if not dec.proper:
        raise ValueError("multi-segment energies are defined for proper signatures")
    return float(sum(segment_energy(model, w).lambda_min for w in segments_of(sig)))


@dataclass(frozen=True)
class ChainGround:
    lambda_min: float
    segments: tuple[int, ...]

    @property
    def signature(self) -> tuple[int, ...]:
        sig = [1]
        for w in self.segments:
            sig += [0] * (w - 2) + [1]
        return tuple(sig)


def chain_ground_energy(model: SegmentModel, N: int) -> ChainGround:
    """Minimum over proper signatures by dynamic programming over segment partitions."""
    if N < 2:
        raise ValueError("need N >= 2")
    best = [(0.0, ())] + [None] * (N - 1)
    for m in range(1, N):
        cand = None
        for w in range(2, m + 2):
            prev = best[m - (w - 1)]
            e = prev[0] + segment_energy(model, w).lambda_min
            if cand is None or e < cand[0] - 1e-15:
                cand = (e, prev[1] + (w,))
        best[m] = cand
    e, segs = best[N - 1]
    return ChainGround(e, segs)


def chain_ground_energy_bruteforce(model: SegmentModel, N: int) -> ChainGround:
    import itertools
    best = None
    for inner in itertools.product((0, 1), repeat=N - 2):
        sig = (1,) + inner + (1,)
        e = multi_segment_energy(model, sig)
        if best is None or e < best.lambda_min:
            best = ChainGround(e, tuple(segments_of(sig)))
    return best


# --- microscopic cross-check ------------------------------------------------------

def _segment_history(model: SegmentModel, w: int) -> np.ndarray:
    cells = w - 2
    if cells == 0:
        return np.array([[PenaltySpec().boundary_weight]])
    omega = flag_weight(model, w)
    return compile_history(model.tm, cells, _tape_for(model, cells),
                           PenaltySpec(model.penalized_states, omega)).hamiltonian


def kron_sum(mats) -> sp.csr_matrix:
    total = sp.csr_matrix(np.zeros((1, 1)))
    for m in mats:
        m = sp.csr_matrix(m)
        total = (sp.kron(total, sp.identity(m.shape[0]), format="csr")
                 + sp.kron(sp.identity(total.shape[0]), m, format="csr"))
    return total


def full_block_operator(model: SegmentModel, sig, marker_spec=None) -> sp.csr_matrix:
    """``mu * marker_block (x) 1 + 1 (x) (sum of segment histories)`` for one signature.

    Uses the microscopic unary marker; histories live on the 1-bounded segments only.
    """
    if model.falloff.kind != "unary":
        raise ValueError("the microscopic block needs the unary marker")
    N = len(sig)
    marker_spec = marker_spec or build_marker(N, UNARY, include_shift=True)
    mblock = block_operator(marker_spec, sig).matrix.real * float(model.scale)
    ones = [i for i, b in enumerate(sig) if b]
    hists = [_segment_history(model, b - a + 1) for a, b in zip(ones, ones[1:])]
    return kron_sum([mblock] + hists)


def full_block_energy(model: SegmentModel, sig, marker_spec=None) -> float:
    op = full_block_operator(model, sig, marker_spec)
    if op.shape[0] <= 1024:
        return diagonalize_dense(op).ground
    return lowest_k(op, 1).ground


def runtime_cap(model: SegmentModel, w: int) -> int:
    return runtime_bound(model.tm, max(1, w - 2))
