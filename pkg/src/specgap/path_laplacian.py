"""Path-graph Laplacians and the rank-one perturbation with a bonus on the last vertex.

Characteristic polynomials are evaluated with the continuant recurrence

    f_0 = 1, f_1 = x - 1, f_i = (x - 2) f_{i-1} - f_{i-2},
    p_w(x) = x f_{w-1} - f_{w-2}          (f_{-1} := -1)

which is ``det(x*1 - Dp_w)`` for the perturbed Laplacian ``Dp_w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np


class CertificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PathSpec:
    w: int

    def __post_init__(self):
        if self.w < 1:
            raise ValueError("path length must be >= 1")


@dataclass(frozen=True)
class EigenInterval:
    lower: Fraction
    upper: Fraction
    certified: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("empty interval")

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return float((self.lower + self.upper) / 2)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return float(self.lower) - tol <= x <= float(self.upper) + tol

    def __add__(self, other: "EigenInterval") -> "EigenInterval":
        return EigenInterval(self.lower + other.lower, self.upper + other.upper,
                             self.certified and other.certified)

    def shift(self, c) -> "EigenInterval":
        c = Fraction(c)
        return EigenInterval(self.lower + c, self.upper + c, self.certified)


def build_delta(w: int) -> np.ndarray:
    if w < 1:
        raise ValueError("w must be >= 1")
    m = np.zeros((w, w), dtype=np.int64)
    for i in range(w - 1):
        m[i, i] += 1
        m[i + 1, i + 1] += 1
        m[i, i + 1] = m[i + 1, i] = -1
    return m


def build_delta_prime(w: int) -> np.ndarray:
    m = build_delta(w)
    m[w - 1, w - 1] -= 1
    return m


def continuants(w: int, x) -> list:
    """``[f_{-1}, f_0, ..., f_{w-1}]`` at ``x`` (any ring element supporting +, -, *)."""
    out = [x - x - 1, x - x + 1]
    if w >= 2:
        out.append(x - 1)
    for _ in range(3, w + 1):
        out.append((x - 2) * out[-1] - out[-2])
    return out


def charpoly_eval(w: int, x) -> Fraction:
    """Exact ``p_w(x)`` via the continuant recurrence."""
    if w < 1:
        raise ValueError("w must be >= 1")
    x = Fraction(x)
    f = continuants(w, x)
    return x * f[-1] - f[-2]


def _charpoly_dyadic(w: int, num: int, k: int) -> int:
    """``2**(k*w) * p_w(num / 2**k)`` in integers; same sign as ``p_w``."""
    s = 1 << k
    if w == 1:
        return num + s
    # F_i = s**i f_i stays integral
    f_prev, f_cur = 1, num - s
    for _ in range(2, w):
        f_prev, f_cur = f_cur, (num - 2 * s) * f_cur - s * s * f_prev
    return num * f_cur - s * s * f_prev


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def interval_bounds(w: int) -> tuple[Fraction, Fraction]:
    """The open interval ``(-1/2 - 2^-w, -1/2 - 4^-w)`` known to contain the minimum."""
    return Fraction(-1, 2) - Fraction(1, 2**w), Fraction(-1, 2) - Fraction(1, 4**w)


def bracket_min_eigenvalue(w: int, bits: int = 20) -> EigenInterval:
    """Certified bracket of the minimum eigenvalue of the perturbed Laplacian.

    Exact dyadic bisection on ``p_w`` starting from the a-priori interval;
    final width is at most ``2**-(w + bits)``.
    """
    if w < 2:
        raise ValueError("the interval claim needs w >= 2")
    lo, hi = interval_bounds(w)
    k = 2 * w + 1
    while True:
        s = 1 << k
        a, b = lo * s, hi * s
        if a.denominator == 1 and b.denominator == 1:
            break
        k += 1
    a, b = int(lo * s), int(hi * s)
    sa, sb = _sign(_charpoly_dyadic(w, a, k)), _sign(_charpoly_dyadic(w, b, k))
    if sa == 0 or sb == 0 or sa == sb:
        raise CertificationError(f"no sign change of p_{w} on the a-priori interval")
    target = w + bits
    while Fraction(b - a, 1 << k) > Fraction(1, 1 << target):
        a, b, k = 2 * a, 2 * b, k + 1
        m = (a + b) // 2
        sm = _sign(_charpoly_dyadic(w, m, k))
        if sm == 0:
            a = b = m
            break
        if sm == sa:
            a = m
        else:
            b = m
    return EigenInterval(Fraction(a, 1 << k), Fraction(b, 1 << k), True)


def sturm_count_below(w: int, x) -> int:
    """Number of eigenvalues of the perturbed Laplacian strictly below ``x``.

    Counts sign changes in the minors ``q_i = det(T_i - x) = (-1)^i f_i``,
    equivalently negative pivots of the LDL factorization of ``T - x``.
    An exact zero pivot means ``x`` is an eigenvalue of a leading block; the
    count is then taken at a slightly smaller point.
    """
    x = Fraction(x)
    diag = [1] + [2] * (w - 2) + [0] if w >= 2 else [-1]
    eps = Fraction(1, 2 ** (4 * w + 8))
    while True:
        count, d, ok = 0, None, True
        for i, a in enumerate(diag):
            d = a - x if i == 0 else a - x - 1 / d
            if d == 0:
                ok = False
                break
            count += d < 0
        if ok:
            return count
        x -= eps
        eps /= 2


def count_negative_eigenvalues(w: int, check: bool = True) -> int:
    n = sturm_count_below(w, 0)
    if check:
        evals = np.linalg.eigvalsh(build_delta_prime(w).astype(float))
        n_float = int(np.sum(evals < -1e-12))
        if n_float != n:
            raise CertificationError(f"Sturm count {n} disagrees with diagonalization {n_float}")
    return n


def combine_cartesian(per_segment_spectra) -> np.ndarray:
    lists = [np.asarray(s, dtype=float).ravel() for s in per_segment_spectra]
    if not lists or any(len(s) == 0 for s in lists):
        raise ValueError("each spectrum must be nonempty")
    total = lists[0]
    for s in lists[1:]:
        total = np.add.outer(total, s).ravel()
    return np.sort(total)


@lru_cache(maxsize=None)
def min_eigenvalue_float(w: int) -> float:
    if w >= 2:
        return bracket_min_eigenvalue(w, bits=40).midpoint
    return -1.0


@lru_cache(maxsize=None)
def bonus_energy(f: int) -> float:
    """``lambda_min(Dp_f) + 1/2``: the shifted marker energy of a length-``f`` walk.

    Negative and inside ``(-2^-f, -4^-f)`` for ``f >= 2``. Computed as the
    offset from -1/2 directly so it keeps relative precision for large f.
    """
    if f < 1:
        raise ValueError("falloff must be >= 1")
    if f == 1:
        return -0.5
    iv = bracket_min_eigenvalue(f, bits=f + 40)
    return float((iv.lower + iv.upper) / 2 + Fraction(1, 2))
