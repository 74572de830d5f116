"""Pauli-string operators on a register of qubits.

Conventions used throughout the package:

* Qubit 0 is the most significant bit of a computational-basis index, so a
  basis state |b_0 b_1 ... b_{n-1}> has index sum_q b_q * 2**(n-1-q).  Dense
  matrices built here therefore agree with ``kron(P_0, P_1, ..., P_{n-1})``.
* Operators are weighted sums of Pauli strings.  Coefficients may be complex
  in intermediate products (ladder-operator expansions); Hermitian checks are
  explicit, never implicit.
* ``canonical`` merges duplicate strings, drops coefficients below 1e-14 in
  magnitude, and orders factors by qubit index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

PAULI_AXES = ("X", "Y", "Z")
COEFF_CUTOFF = 1e-14
HERMITIAN_TOL = 1e-12
DENSE_DIM_LIMIT = 4096

PAULI_MATRICES = {
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}
_ID2 = np.eye(2, dtype=complex)


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance."""


@dataclass(frozen=True)
class PauliTerm:
    """A single weighted Pauli string.

    ``factors`` maps qubit index to axis, stored as a tuple of (qubit, axis)
    pairs sorted by qubit.  An empty tuple is the identity string.
    """

    coeff: complex
    factors: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))
        facs = tuple((int(q), str(a)) for q, a in self.factors)
        qubits = [q for q, _ in facs]
        if any(q < 0 for q in qubits):
            raise ValueError("negative qubit index in Pauli term")
        if len(set(qubits)) != len(qubits):
            raise ValueError("duplicate qubit in Pauli term")
        if qubits != sorted(qubits):
            facs = tuple(sorted(facs))
        for _, axis in facs:
            if axis not in PAULI_AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def from_map(cls, coeff: complex, factors: Mapping[int, str]) -> "PauliTerm":
        return cls(coeff, tuple(sorted(factors.items())))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    def factor_map(self) -> dict[int, str]:
        return dict(self.factors)

    def shifted(self, offset: int) -> "PauliTerm":
        """Same string with every qubit index shifted by ``offset``."""
        return PauliTerm(self.coeff, tuple((q + offset, a) for q, a in self.factors))


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalized pure state on ``n_qubits`` qubits.

    Amplitudes are stored read-only; the norm must be 1 within 1e-10.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({1 << self.n_qubits},)"
            )
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"state norm {nrm!r} is not 1 within 1e-10")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.n_qubits == other.n_qubits and np.array_equal(
            self.amplitudes, other.amplitudes
        )


def as_amplitudes(state, n_qubits: int | None = None) -> np.ndarray:
    """Accept a StateVector or a plain vector; return a complex ndarray."""
    if isinstance(state, StateVector):
        vec = state.amplitudes
    else:
        vec = np.asarray(state, dtype=complex)
    if n_qubits is not None and vec.shape != (1 << n_qubits,):
        raise ValueError(
            f"vector has shape {vec.shape}, expected ({1 << n_qubits},) for {n_qubits} qubits"
        )
    return vec


@dataclass(frozen=True)
class NormBounds:
    """Norm information for an operator: a certified upper bound and an estimate.

    ``one_norm_upper`` is sum_i |c_i|, always >= the spectral norm.
    ``power_estimate`` approximates the spectral norm by power iteration on H^2.
    """

    one_norm_upper: float
    power_estimate: float


@dataclass(frozen=True)
class OperatorSum:
    """Weighted sum of Pauli strings acting on ``n_qubits`` qubits."""

    n_qubits: int
    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        terms = tuple(self.terms)
        for t in terms:
            if t.support and t.support[-1] >= self.n_qubits:
                raise ValueError(
                    f"term acts on qubit {t.support[-1]} but register has {self.n_qubits} qubits"
                )
        object.__setattr__(self, "terms", terms)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[PauliTerm]) -> "OperatorSum":
        return cls(n_qubits, tuple(terms))

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if not isinstance(other, OperatorSum):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot add operators on different register sizes")
        return OperatorSum(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor: complex) -> "OperatorSum":
        return OperatorSum(
            self.n_qubits, tuple(PauliTerm(factor * t.coeff, t.factors) for t in self.terms)
        )

    # -- canonical form -------------------------------------------------------

    def canonical(self) -> "OperatorSum":
        """Merge duplicate strings, drop |coeff| < 1e-14, sort by factors."""
        merged: dict[tuple[tuple[int, str], ...], complex] = {}
        for t in self.terms:
            merged[t.factors] = merged.get(t.factors, 0.0 + 0.0j) + t.coeff
        kept = [
            PauliTerm(c, f) for f, c in merged.items() if abs(c) >= COEFF_CUTOFF
        ]
        kept.sort(key=lambda t: t.factors)
        return OperatorSum(self.n_qubits, tuple(kept))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        """True when every canonical coefficient is real within ``tol``."""
        return all(abs(t.coeff.imag) <= tol for t in self.canonical().terms)

    # -- action on states -----------------------------------------------------

    def _term_kernel(self, term: PauliTerm):
        """Bit masks for applying one string: (flip, phase_mask, phase_const)."""
        n = self.n_qubits
        flip = 0
        phase_mask = 0
        n_y = 0
        for q, axis in term.factors:
            bit = 1 << (n - 1 - q)
            if axis == "X":
                flip |= bit
            elif axis == "Y":
                flip |= bit
                phase_mask |= bit
                n_y += 1
            else:
                phase_mask |= bit
        return flip, phase_mask, term.coeff * (1j) ** n_y

    def apply(self, state) -> np.ndarray:
        """Apply the operator to a state; returns an unnormalized vector.

        Matrix-free: each string is an index permutation (bit flips) with a
        +-1 / +-i phase per basis state.
        """
        vec = as_amplitudes(state, self.n_qubits)
        dim = 1 << self.n_qubits
        idx = np.arange(dim, dtype=np.uint64)
        out = np.zeros(dim, dtype=complex)
        for term in self.terms:
            flip, phase_mask, const = self._term_kernel(term)
            par = np.bitwise_count(idx & np.uint64(phase_mask)).astype(np.int64) & 1
            vals = const * (1.0 - 2.0 * par) * vec
            out[idx ^ np.uint64(flip)] += vals
        return out

    # -- dense form -----------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Dense matrix via Kronecker products.  Guarded at dimension 4096."""
        dim = 1 << self.n_qubits
        if dim > DENSE_DIM_LIMIT:
            raise ValueError(
                f"dense form of dimension {dim} exceeds the limit {DENSE_DIM_LIMIT}"
            )
        acc = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            fmap = term.factor_map()
            mats = [PAULI_MATRICES[fmap[q]] if q in fmap else _ID2 for q in range(self.n_qubits)]
            acc += term.coeff * reduce(np.kron, mats)
        return acc

    # -- norms ----------------------------------------------------------------

    def norm_bounds(self, tol: float = 1e-8, max_iter: int = 20000) -> NormBounds:
        """Certified 1-norm upper bound plus a power-iteration spectral estimate.

        The estimate iterates v -> H^2 v from a fixed-seed random start (so
        results are deterministic) and reads off ||H v|| for normalized v,
        which increases monotonically toward the spectral norm.  Raises
        ConvergenceError at the iteration cap.
        """
        canon = self.canonical()
        one_norm = float(sum(abs(t.coeff) for t in canon.terms))
        if not canon.terms:
            return NormBounds(0.0, 0.0)
        dim = 1 << self.n_qubits
        rng = np.random.default_rng(0x5EED ^ self.n_qubits)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        prev = 0.0
        for _ in range(max_iter):
            u = canon.apply(v)
            est = float(np.linalg.norm(u))
            if est < 1e-300:
                return NormBounds(one_norm, 0.0)
            w = canon.apply(u)
            nw = np.linalg.norm(w)
            if nw < 1e-300:
                return NormBounds(one_norm, est)
            v = w / nw
            if abs(est - prev) <= tol * max(est, 1e-300):
                return NormBounds(one_norm, min(est, one_norm))
            prev = est
        raise ConvergenceError(
            f"power iteration did not reach relative tolerance {tol} in {max_iter} iterations"
        )


def identity_term(coeff: complex = 1.0) -> PauliTerm:
    return PauliTerm(coeff, ())


def single_term(coeff: complex, factors: Mapping[int, str]) -> PauliTerm:
    return PauliTerm.from_map(coeff, factors)


# -- serialization ------------------------------------------------------------
#
# File schema: {"n_qubits": int,
#               "terms": [{"coeff": [re, im], "paulis": [[qubit, axis], ...]}, ...]}
# Floats are written with Python repr (shortest exact decimal), so a round trip
# reproduces the operator bit for bit.


def operator_to_dict(op: OperatorSum) -> dict:
    return {
        "n_qubits": op.n_qubits,
        "terms": [
            {
                "coeff": [t.coeff.real, t.coeff.imag],
                "paulis": [[q, a] for q, a in t.factors],
            }
            for t in op.terms
        ],
    }


def operator_from_dict(data: dict) -> OperatorSum:
    terms = []
    for entry in data["terms"]:
        re, im = entry["coeff"]
        terms.append(
            PauliTerm(complex(re, im), tuple((int(q), str(a)) for q, a in entry["paulis"]))
        )
    return OperatorSum(int(data["n_qubits"]), tuple(terms))


def save_operator(op: OperatorSum, path) -> None:
    with open(path, "w") as fh:
        json.dump(operator_to_dict(op), fh, indent=1)
        fh.write("\n")


def load_operator(path) -> OperatorSum:
    with open(path) as fh:
        return operator_from_dict(json.load(fh))
