"""Statevector simulation of phase estimation on the interleaved phase encoding.

Qubit layout: index 0 is the ancilla holding the eigenvector |1> of
``U = diag(1, exp(2 pi i phi))``; indices 1..N are the output register.
After the controlled stage output qubit j carries the phase ``2^(N-j) phi``.
All phases are kept as exact fractions of a full turn until a gate is applied.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_QUBITS = 20
INV_SQRT2 = 1.0 / np.sqrt(2.0)


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseEncoding:
    eta: str
    phi_bits: str

    @property
    def phi_len(self) -> int:
        return len(self.phi_bits)

    @property
    def mu(self) -> Fraction:
        return Fraction(1, 2**self.phi_len)

    @property
    def phi_value(self) -> Fraction:
        return sum((Fraction(int(b), 2 ** (k + 1)) for k, b in enumerate(self.phi_bits)), Fraction(0))

    @property
    def alpha(self) -> Fraction:
        """Smallest rotation angle, in turns."""
        return self.mu


def encode_phase(eta: str) -> PhaseEncoding:
    """Interleave ``eta`` with 1s and close with a 0: ``eta_1 1 eta_2 1 ... eta_n 0``."""
    if not eta or set(eta) - {"0", "1"}:
        raise ValueError("eta must be a nonempty bit string")
    bits = "".join(c + "1" for c in eta[:-1]) + eta[-1] + "0"
    return PhaseEncoding(eta, bits)


@dataclass
class QpeState:
    vector: np.ndarray
    n_out: int
    stage: str

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def tensor(self) -> np.ndarray:
        return self.vector.reshape((2,) * (self.n_out + 1))


def _check_budget(N: int):
    if N < 1:
        raise ValueError("need at least one output qubit")
    if N + 1 > MAX_QUBITS + 1:
        raise BudgetError(f"{N} output qubits exceed the simulator budget of {MAX_QUBITS}")


def _apply_h(psi: np.ndarray, q: int) -> np.ndarray:
    a = np.moveaxis(psi, q, 0)
    out = np.empty_like(a)
    out[0] = (a[0] + a[1]) * INV_SQRT2
    out[1] = (a[0] - a[1]) * INV_SQRT2
    return np.moveaxis(out, 0, q)


def _apply_cphase(psi: np.ndarray, control: int, target: int, turns: Fraction) -> np.ndarray:
    """Multiply the |1>_control |1>_target amplitudes by exp(2 pi i turns)."""
    turns = Fraction(turns) % 1
    if turns == 0:
        return psi
    psi = psi.copy()
    idx = [slice(None)] * psi.ndim
    idx[control] = 1
    idx[target] = 1
    psi[tuple(idx)] *= np.exp(2j * np.pi * float(turns))
    return psi


def run_controlled_phase_stage(enc: PhaseEncoding, N: int) -> QpeState:
    """Hadamards on the output register, then controlled ``U^(2^(N-j))`` from qubit j."""
    _check_budget(N)
    psi = np.zeros((2,) * (N + 1), dtype=complex)
    psi[(1,) + (0,) * N] = 1.0
    for j in range(1, N + 1):
        psi = _apply_h(psi, j)
    phi = enc.phi_value
    for j in range(1, N + 1):
        psi = _apply_cphase(psi, j, 0, phi * 2 ** (N - j))
    return QpeState(psi.ravel(), N, "controlled_phase")


def closed_form_state(enc: PhaseEncoding, N: int) -> np.ndarray:
    phi = enc.phi_value
    vec = np.array([0.0, 1.0], dtype=complex)
    for j in range(1, N + 1):
        turns = (phi * 2 ** (N - j)) % 1
        q = np.array([1.0, np.exp(2j * np.pi * float(turns))]) * INV_SQRT2
        vec = np.kron(vec, q)
    return vec


def truncation_overlap(enc: PhaseEncoding, N: int, state: QpeState | None = None) -> float:
    """Weight of output qubit 1 on |->, measured from the statevector."""
    if state is None:
        state = run_controlled_phase_stage(enc, N)
    t = np.moveaxis(state.tensor(), 1, 0)
    minus = (t[0] - t[1]) * INV_SQRT2
    return float(np.vdot(minus, minus).real)


def truncation_overlap_exact(enc: PhaseEncoding, N: int) -> float:
    turns = (enc.phi_value * 2 ** (N - 1)) % 1
    if turns == 0:
        return 0.0
    return float((1 - np.cos(2 * np.pi * float(turns))) / 2)


def inverse_rotation_turns(enc: PhaseEncoding, m: int) -> Fraction | None:
    """Turns of the inverse of ``U_alpha^(2^(|phi| - m))``; None when the gate is dropped.

    ``U_alpha^(2^|phi|)`` is the identity, so the inverse is itself a power
    of ``U_alpha`` and only alpha-powers appear in the circuit.
    """
    if m > enc.phi_len:
        return None
    power = 2 ** (enc.phi_len - m)
    return (enc.alpha * (2**enc.phi_len - power)) % 1


def run_inverse_qft(state: QpeState, enc: PhaseEncoding) -> QpeState:
    """Inverse QFT on the output register, starting from the qubit with the least significant phase."""
    N = state.n_out
    psi = state.tensor().copy()
    for j in range(1, N + 1):
        for m in range(2, j + 1):
            turns = inverse_rotation_turns(enc, m)
            if turns is not None:
                psi = _apply_cphase(psi, j - m + 1, j, turns)
        psi = _apply_h(psi, j)
    return QpeState(psi.ravel(), N, "inverse_qft")


def readout_distribution(state: QpeState, tol: float = 0.0) -> dict[str, float]:
    """Output-register probabilities, bits listed most significant first (qubit N down to 1)."""
    N = state.n_out
    probs = (np.abs(state.tensor()) ** 2).sum(axis=0).ravel()
    out = {}
    for idx, p in enumerate(probs):
        if p > tol:
            bits = format(idx, f"0{N}b")  # qubit 1 first
            out[bits[::-1]] = float(p)
    return out


def expected_readout(enc: PhaseEncoding, N: int) -> str:
    return (enc.phi_bits + "0" * N)[:N]


def phase_signal_report(enc: PhaseEncoding, N: int) -> dict:
    """Check the truncation dichotomy at one (eta, N): zero overlap iff the register holds phi."""
    ov = truncation_overlap(enc, N)
    bound = float(enc.mu)
    full = N >= enc.phi_len + 1
    satisfied = ov <= 1e-12 if full else ov >= bound
    return {"eta": enc.eta, "phi_bits": enc.phi_bits, "N": N, "N_even": N % 2 == 0,
            "overlap": ov, "bound": bound, "full_expansion": full, "satisfied": bool(satisfied)}
