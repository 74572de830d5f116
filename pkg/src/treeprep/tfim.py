"""Transverse-field Ising chain on 2**p spins with open boundaries.

H = h * sum_i Z_i + J * sum_i X_i X_{i+1}, one qubit per spin, one spin per
leaf.  The standard experiments run at h = J = 1.
"""
from __future__ import annotations

from .pauli import OperatorSum, PauliTerm
from .tree import HamiltonianTree, decompose


def build_tfim(p: int, h: float = 1.0, J: float = 1.0):
    """Return (operator, leaf_spans) for a chain of 2**p spins.

    p = 0 is a single spin: just the field term, no bonds.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    n = 1 << p
    terms = [PauliTerm(complex(h), ((i, "Z"),)) for i in range(n)]
    terms += [PauliTerm(complex(J), ((i, "X"), (i + 1, "X"))) for i in range(n - 1)]
    spans = tuple((i, i + 1) for i in range(n))
    return OperatorSum(n, tuple(terms)), spans


def tfim_tree(p: int, h: float = 1.0, J: float = 1.0) -> HamiltonianTree:
    """Chain Hamiltonian decomposed over the balanced one-spin-per-leaf tree."""
    op, spans = build_tfim(p, h, J)
    return decompose(op, spans, p)
