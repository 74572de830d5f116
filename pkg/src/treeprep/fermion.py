"""Ladder-operator products mapped to Pauli strings, and locality checks.

Occupation convention: the qubit state |0> encodes an OCCUPIED mode, so the
raising operator carries (1/2)(X + iY) = |0><1| and the number operator maps
to (1/2)(1 + Z).  This is the reverse of a common convention; every dense
cross-check in the test suite is built against the same choice.

Mode p lives on qubit p, with parity strings on the lower-index modes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .pauli import DENSE_DIM_LIMIT, OperatorSum, PauliTerm

MAX_MOLECULAR_MODES = 14

# single-qubit products: (left, right) -> (phase, axis); None axis = identity
_PAULI_MUL = {
    ("X", "X"): (1.0, None),
    ("Y", "Y"): (1.0, None),
    ("Z", "Z"): (1.0, None),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


@dataclass(frozen=True)
class FermionProduct:
    """An ordered product of ladder operators times a scalar.

    factors is a sequence of (mode index, dagger flag), applied left to
    right as written; anticommutation is handled by the mapping, never by
    reordering here.
    """

    factors: tuple[tuple[int, bool], ...]
    coefficient: complex = 1.0

    def __post_init__(self):
        object.__setattr__(
            self,
            "factors",
            tuple((int(m), bool(d)) for m, d in self.factors),
        )
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        if any(m < 0 for m, _ in self.factors):
            raise ValueError("mode indices must be nonnegative")

    def adjoint(self) -> "FermionProduct":
        return FermionProduct(
            tuple((m, not d) for m, d in reversed(self.factors)),
            self.coefficient.conjugate(),
        )


def _string_mul(left: tuple, right: tuple) -> tuple[complex, tuple]:
    a = dict(left)
    b = dict(right)
    phase = 1.0 + 0.0j
    out = {}
    for q in sorted(set(a) | set(b)):
        if q in a and q in b:
            ph, axis = _PAULI_MUL.get((a[q], b[q]), (1.0, None)) if a[q] != b[q] else (1.0, None)
            phase *= ph
            if axis is not None:
                out[q] = axis
        else:
            out[q] = a.get(q, b.get(q))
    return phase, tuple(sorted(out.items()))


def _ladder_strings(mode: int, dagger: bool) -> list[tuple[complex, tuple]]:
    # (prod of Z below) x (1/2)(X +/- iY); + for raising under |0> = occupied
    z_part = tuple((j, "Z") for j in range(mode))
    sign = 1j if dagger else -1j
    return [
        (0.5, z_part + ((mode, "X"),)),
        (0.5 * sign, z_part + ((mode, "Y"),)),
    ]


def jw_map(prod: FermionProduct, n_modes: int) -> OperatorSum:
    """Expand a ladder-operator product into a canonical Pauli sum.

    Complex coefficients are expected for a lone non-Hermitian product; a
    Hermitian combination (a product plus its adjoint) canonicalizes to real
    coefficients.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if prod.factors and max(m for m, _ in prod.factors) >= n_modes:
        raise ValueError("mode index out of range for n_modes")
    terms = {(): prod.coefficient}
    for mode, dagger in prod.factors:
        nxt: dict[tuple, complex] = {}
        for string, coeff in terms.items():
            for factor_coeff, factor_string in _ladder_strings(mode, dagger):
                phase, merged = _string_mul(string, factor_string)
                nxt[merged] = nxt.get(merged, 0.0) + coeff * factor_coeff * phase
        terms = nxt
    pauli_terms = tuple(PauliTerm(c, s) for s, c in terms.items())
    return OperatorSum(n_modes, pauli_terms).canonical()


def hermitian_pair(mode_a: int, mode_b: int, coeff: complex, n_modes: int) -> OperatorSum:
    """coeff * a+_a a_b plus its adjoint, as one canonical Pauli sum."""
    prod = FermionProduct(((mode_a, True), (mode_b, False)), coeff)
    combined = jw_map(prod, n_modes) + jw_map(prod.adjoint(), n_modes)
    return combined.canonical()


@dataclass(frozen=True)
class BodyTensors:
    """One-body T[p,q] and two-body V[p,q,r,s] coefficient tensors."""

    n_modes: int
    T: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        n = self.n_modes
        if n < 1:
            raise ValueError("n_modes must be at least 1")
        t = np.asarray(self.T, dtype=complex)
        v = np.asarray(self.V, dtype=complex)
        if t.shape != (n, n):
            raise ValueError(f"T must have shape ({n}, {n})")
        if v.shape != (n, n, n, n):
            raise ValueError(f"V must have shape ({n}, {n}, {n}, {n})")
        t = t.copy()
        v = v.copy()
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "T", t)
        object.__setattr__(self, "V", v)

    @classmethod
    def zeros(cls, n_modes: int) -> "BodyTensors":
        return cls(
            n_modes,
            np.zeros((n_modes, n_modes), dtype=complex),
            np.zeros((n_modes,) * 4, dtype=complex),
        )


def build_molecular(tensors: BodyTensors) -> OperatorSum:
    """Sum T[p,q] a+_p a_q + V[p,q,r,s] a+_p a+_q a_r a_s as Pauli strings.

    Hermiticity is validated on the mapped result: any canonical coefficient
    with imaginary part beyond 1e-10 fails the build, reporting the offending
    Pauli terms.  Coefficients of the returned operator are exactly real.
    """
    n = tensors.n_modes
    if n > MAX_MOLECULAR_MODES:
        raise ValueError(f"n_modes limited to {MAX_MOLECULAR_MODES}")
    total = OperatorSum(n, ())
    t_rows, t_cols = np.nonzero(tensors.T)
    for p, q in zip(t_rows, t_cols):
        prod = FermionProduct(((int(p), True), (int(q), False)), tensors.T[p, q])
        total = total + jw_map(prod, n)
    v_idx = np.argwhere(tensors.V)
    for p, q, r, s in v_idx:
        prod = FermionProduct(
            ((int(p), True), (int(q), True), (int(r), False), (int(s), False)),
            tensors.V[p, q, r, s],
        )
        total = total + jw_map(prod, n)
    total = total.canonical()
    offenders = [t for t in total.terms if abs(t.coeff.imag) > 1e-10]
    if offenders:
        shown = ", ".join(
            f"{t.factors or 'identity'}: imag {t.coeff.imag:.3e}" for t in offenders[:5]
        )
        raise ValueError(
            f"mapped operator is not Hermitian; {len(offenders)} offending terms ({shown})"
        )
    real_terms = tuple(PauliTerm(t.coeff.real, t.factors) for t in total.terms)
    return OperatorSum(n, real_terms).canonical()


def support_interval(op: OperatorSum) -> tuple[int, int]:
    """Smallest qubit interval containing every non-identity factor.

    For operators small enough to densify, the claim is also verified
    semantically: the dense matrix must commute with X, Y, and Z on every
    qubit outside the interval (tolerance 1e-12 relative to the largest
    matrix entry).
    """
    qubits = sorted({q for term in op.terms for q, _ in term.factors})
    if not qubits:
        raise ValueError("operator has no non-identity support")
    lo, hi = qubits[0], qubits[-1]
    if 2**op.n_qubits <= DENSE_DIM_LIMIT:
        dense = op.to_dense()
        scale = max(1.0, float(np.abs(dense).max()))
        outside = [q for q in range(op.n_qubits) if q < lo or q > hi]
        for q in outside:
            for axis in "XYZ":
                single = OperatorSum(op.n_qubits, (PauliTerm(1.0, ((q, axis),)),)).to_dense()
                comm = dense @ single - single @ dense
                if np.abs(comm).max() > 1e-12 * scale:
                    raise ValueError(
                        f"support interval ({lo}, {hi}) fails the commutation check at qubit {q}"
                    )
    return (lo, hi)


# -- tensor file interface ----------------------------------------------------


def _c2pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def tensors_to_dict(tensors: BodyTensors) -> dict:
    v_sparse = [
        [int(p), int(q), int(r), int(s), _c2pair(tensors.V[p, q, r, s])]
        for p, q, r, s in np.argwhere(tensors.V)
    ]
    return {
        "n_modes": tensors.n_modes,
        "T": [[_c2pair(z) for z in row] for row in tensors.T],
        "V": v_sparse,
    }


def tensors_from_dict(data: dict) -> BodyTensors:
    n = int(data["n_modes"])
    t = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(data["T"]):
        for j, entry in enumerate(row):
            if isinstance(entry, (list, tuple)):
                t[i, j] = complex(entry[0], entry[1])
            else:
                t[i, j] = complex(entry)
    v = np.zeros((n, n, n, n), dtype=complex)
    for p, q, r, s, val in data.get("V", []):
        if isinstance(val, (list, tuple)):
            v[p, q, r, s] = complex(val[0], val[1])
        else:
            v[p, q, r, s] = complex(val)
    return BodyTensors(n, t, v)


def save_tensors(tensors: BodyTensors, path) -> None:
    with open(path, "w") as fh:
        json.dump(tensors_to_dict(tensors), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_tensors(path) -> BodyTensors:
    with open(path) as fh:
        return tensors_from_dict(json.load(fh))
