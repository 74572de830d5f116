"""Partial trace, von Neumann entropy, and the entanglement cap on merging.

The success probability of projecting a product ansatz onto an entangled
target is capped by <psi_A| rho_A |psi_A>; for a fixed entropy budget the
largest achievable overlap is recovered by inverting the entropy of the
peaked mixture rho(r^2) = r^2 P + (1-r^2)(1-P)/(d-1).

Entropy is measured in nats everywhere; use entropy_bits for the base-2 view.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pauli import StateVector, as_amplitudes

EIGENVALUE_FLOOR = 1e-14
DENSITY_TOL = 1e-10
BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class DensityMatrix:
    """A dim x dim density operator; validation happens where it is consumed."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def validate(self) -> None:
        mat = self.entries
        if np.abs(mat - mat.conj().T).max() > DENSITY_TOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(mat).real - 1.0) > DENSITY_TOL or abs(np.trace(mat).imag) > DENSITY_TOL:
            raise ValueError("density matrix trace is not 1 within tolerance")
        w = np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)
        if w.min() < -DENSITY_TOL:
            raise ValueError("density matrix has a negative eigenvalue beyond tolerance")


def _partition(state: StateVector, keep) -> tuple[np.ndarray, list[int], list[int]]:
    keep_list = sorted(set(int(q) for q in keep))
    n = state.n_qubits
    if not keep_list:
        raise ValueError("keep-set must be nonempty")
    if any(q < 0 or q >= n for q in keep_list):
        raise ValueError("keep-set indices out of range")
    if len(keep_list) == n:
        raise ValueError("keep-set must be a proper subset of the qubits")
    rest = [q for q in range(n) if q not in set(keep_list)]
    # qubit 0 is the most significant bit of the basis index
    tensor = state.amplitudes.reshape([2] * n)
    mat = tensor.transpose(keep_list + rest).reshape(1 << len(keep_list), 1 << len(rest))
    return mat, keep_list, rest


def reduced_density(state: StateVector, keep) -> DensityMatrix:
    """Trace out every qubit not in ``keep``; rows follow ascending kept index."""
    mat, _, _ = _partition(state, keep)
    return DensityMatrix(mat @ mat.conj().T)


def entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in nats; eigenvalues below 1e-14 contribute zero."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(np.asarray(rho))
    rho.validate()
    w = np.linalg.eigvalsh((rho.entries + rho.entries.conj().T) / 2.0)
    w = w[w > EIGENVALUE_FLOOR]
    return float(-(w * np.log(w)).sum()) if w.size else 0.0


def entropy_bits(rho: DensityMatrix) -> float:
    return entropy(rho) / math.log(2.0)


def success_cap(full_state: StateVector, psi_a: StateVector, partition) -> float:
    """Upper bound <psi_A| rho_A |psi_A> on any product-ansatz overlap squared.

    No choice of partner state on the complement can beat this value, and the
    normalized partial inner product attains it exactly.
    """
    rho = reduced_density(full_state, partition)
    amps = as_amplitudes(psi_a)
    if amps.shape[0] != rho.dim:
        raise ValueError("psi_A dimension does not match the kept partition")
    return float(np.real(np.vdot(amps, rho.entries @ amps)))


def best_product_partner(full_state: StateVector, psi_a: StateVector, partition):
    """The complement-side state maximizing |<full | psi_A x psi_B>|.

    Returns None when the partial inner product vanishes (every partner is
    orthogonal); otherwise the returned partner attains success_cap exactly.
    """
    mat, _, rest = _partition(full_state, partition)
    amps = as_amplitudes(psi_a)
    if amps.shape[0] != mat.shape[0]:
        raise ValueError("psi_A dimension does not match the kept partition")
    # |<full|psi_A x psi_B>| = |sum_b w_b psi_B[b]| with w = M^dagger psi_A,
    # maximized at psi_B = conj(w)/||w||; the value is then ||w|| = sqrt(cap)
    w = mat.conj().T @ amps
    norm = float(np.linalg.norm(w))
    if norm < 1e-15:
        return None
    return StateVector(len(rest), np.conj(w) / norm)


def entropy_of_peak_mixture(r_squared: float, dim_a: int) -> float:
    """Closed-form S of r^2 P + (1-r^2)(1-P)/(d-1), in nats."""
    if dim_a < 2:
        raise ValueError("dim_a must be at least 2")
    if not 0.0 <= r_squared <= 1.0:
        raise ValueError("r_squared must lie in [0, 1]")
    r2 = float(r_squared)
    u = 1.0 - r2
    total = 0.0
    if r2 > 0.0:
        total -= r2 * math.log(r2)
    if u > 0.0:
        total -= u * math.log(u / (dim_a - 1))
    return total


def max_overlap_for_entropy(entropy_nats: float, dim_a: int) -> float:
    """Largest r^2 in [1/d, 1] whose peaked mixture has the given entropy.

    The entropy is strictly decreasing in r^2 on that interval, so bisection
    to 1e-12 pins the unique solution.
    """
    if dim_a < 2:
        raise ValueError("dim_a must be at least 2")
    e = float(entropy_nats)
    cap = math.log(dim_a)
    if e < 0.0 or e > cap + 1e-12:
        raise ValueError(f"entropy must lie in [0, ln {dim_a}]")
    if e == 0.0:
        return 1.0
    if e >= cap:
        return 1.0 / dim_a
    lo, hi = 1.0 / dim_a, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if entropy_of_peak_mixture(mid, dim_a) > e:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def loose_overlap_for_entropy(entropy_nats: float, dim_a: int) -> float:
    """Secondary solve dropping the -r^2 ln r^2 term: E = -(1-r^2) ln((1-r^2)/(d-1)).

    Solved on the branch where the right side increases in 1-r^2, which only
    reaches entropies up to the branch peak; larger budgets are rejected.
    Always at most the full solve for the same budget.
    """
    if dim_a < 2:
        raise ValueError("dim_a must be at least 2")
    e = float(entropy_nats)
    if e < 0.0:
        raise ValueError("entropy must be nonnegative")
    if e == 0.0:
        return 1.0

    def g(u: float) -> float:
        return -u * math.log(u / (dim_a - 1)) if u > 0.0 else 0.0

    u_peak = min(1.0 - 1.0 / dim_a, (dim_a - 1) / math.e)
    if e > g(u_peak) + 1e-12:
        raise ValueError("entropy exceeds the loose bound's monotone branch")
    lo, hi = 0.0, u_peak
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if g(mid) < e:
            lo = mid
        else:
            hi = mid
    return 1.0 - 0.5 * (lo + hi)
