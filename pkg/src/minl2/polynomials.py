"""Sparse polynomials in n complex variables as {multi-index: coefficient}."""

from __future__ import annotations

from itertools import product

import numpy as np


def normalize(coeffs: dict, n: int) -> dict:
    """Validate keys as length-n multi-indices, drop zero coefficients."""
    out = {}
    for key, val in coeffs.items():
        key = tuple(int(k) for k in (key if isinstance(key, tuple) else (key,)))
        if len(key) != n or any(k < 0 for k in key):
            raise ValueError(f"bad multi-index {key} for n={n}")
        val = complex(val)
        if val != 0:
            out[key] = out.get(key, 0.0) + val
    return out


def constant(value, n: int) -> dict:
    return {(0,) * n: complex(value)} if value != 0 else {}


def multi_indices(n: int, max_degree: int) -> list:
    """All multi-indices with total degree <= max_degree, graded order."""
    idx = [alpha for alpha in product(range(max_degree + 1), repeat=n)
           if sum(alpha) <= max_degree]
    idx.sort(key=lambda a: (sum(a), a))
    return idx


def evaluate(coeffs: dict, z: np.ndarray) -> np.ndarray:
    """Evaluate at points z of shape (npts, n)."""
    z = np.asarray(z)
    if z.ndim == 1:
        z = z[:, None]
    out = np.zeros(z.shape[0], dtype=complex)
    for alpha, val in coeffs.items():
        term = np.full(z.shape[0], val, dtype=complex)
        for i, k in enumerate(alpha):
            if k:
                term = term * z[:, i] ** k
        out += term
    return out


def degree(coeffs: dict) -> int:
    return max((sum(a) for a in coeffs), default=0)


def subtract(p: dict, q: dict) -> dict:
    out = dict(p)
    for key, val in q.items():
        out[key] = out.get(key, 0.0) - val
        if out[key] == 0:
            del out[key]
    return out
