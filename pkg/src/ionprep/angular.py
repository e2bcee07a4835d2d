"""Angular momentum algebra: ladder operators, Wigner 3-j and Clebsch-Gordan coefficients.

Angular momenta are passed as floats holding integer or half-integer values
(e.g. 3.5 for I = 7/2). All coefficients are returned in the Condon-Shortley
phase convention.
"""

from __future__ import annotations

import math

import numpy as np


def is_half_integer(x: float, tol: float = 1e-9) -> bool:
    return abs(2 * x - round(2 * x)) < tol


def projections(j: float) -> np.ndarray:
    """All m values of an angular momentum j, descending from +j to -j."""
    n = int(round(2 * j)) + 1
    return j - np.arange(n)


def ladder_factor(j: float, m: float, direction: int) -> float:
    """Matrix element <j, m+dir| J_+- |j, m> in units of hbar."""
    mp = m + direction
    val = j * (j + 1) - m * mp
    return math.sqrt(val) if val > 0 else 0.0


def angular_momentum_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (J_z, J_+, J_-) in the descending-m basis of dimension 2j+1."""
    ms = projections(j)
    n = len(ms)
    jz = np.diag(ms)
    jp = np.zeros((n, n))
    jm = np.zeros((n, n))
    for k, m in enumerate(ms):
        if k > 0:  # raising: m -> m+1 sits one index earlier
            jp[k - 1, k] = ladder_factor(j, m, +1)
        if k < n - 1:
            jm[k + 1, k] = ladder_factor(j, m, -1)
    return jz, jp, jm


def _fac(n: float) -> float:
    k = round(n)
    if abs(n - k) > 1e-9 or k < 0:
        raise ValueError(f"factorial of non-natural number {n}")
    return math.factorial(k)


def _triangle(a: float, b: float, c: float) -> float:
    return math.sqrt(
        _fac(a + b - c) * _fac(a - b + c) * _fac(-a + b + c) / _fac(a + b + c + 1)
    )


def wigner_3j(j1: float, j2: float, j3: float, m1: float, m2: float, m3: float) -> float:
    """Wigner 3-j symbol by the Racah sum; exact enough in float for j <= ~20."""
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if not (is_half_integer(j) and is_half_integer(m)) or abs(m) > j + 1e-9:
            return 0.0
        if not is_half_integer(j - m) or abs((j - m) - round(j - m)) > 1e-9:
            return 0.0
    if abs(m1 + m2 + m3) > 1e-9:
        return 0.0
    if j3 < abs(j1 - j2) - 1e-9 or j3 > j1 + j2 + 1e-9:
        return 0.0
    if not is_half_integer(j1 + j2 + j3) or abs((j1 + j2 + j3) - round(j1 + j2 + j3)) > 1e-9:
        return 0.0

    pre = _triangle(j1, j2, j3) * math.sqrt(
        _fac(j1 + m1) * _fac(j1 - m1) * _fac(j2 + m2) * _fac(j2 - m2)
        * _fac(j3 + m3) * _fac(j3 - m3)
    )
    kmin = round(max(0.0, j2 - j3 - m1, j1 - j3 + m2))
    kmax = round(min(j1 + j2 - j3, j1 - m1, j2 + m2))
    total = 0.0
    for k in range(kmin, kmax + 1):
        denom = (
            _fac(k) * _fac(j1 + j2 - j3 - k) * _fac(j1 - m1 - k) * _fac(j2 + m2 - k)
            * _fac(j3 - j2 + m1 + k) * _fac(j3 - j1 - m2 + k)
        )
        total += (-1) ** k / denom
    phase = (-1) ** round(j1 - j2 - m3)
    return phase * pre * total


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float, j: float, m: float) -> float:
    """<j1 m1; j2 m2 | j m>."""
    if abs(m1 + m2 - m) > 1e-9:
        return 0.0
    phase = (-1) ** round(j1 - j2 + m)
    return phase * math.sqrt(2 * j + 1) * wigner_3j(j1, j2, j, m1, m2, -m)
