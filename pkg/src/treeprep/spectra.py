"""Lowest eigenpairs of Hermitian Pauli-sum operators.

Two routes share one interface: dense diagonalization (numpy.linalg.eigh) up
to dimension 4096, and a hand-written restarted Lanczos with full
reorthogonalization above that.  Both certify residuals with true matvecs and
fix eigenvector phases so the largest-magnitude amplitude is real positive.

The Lanczos path finds eigenpairs one at a time, deflating against converged
vectors.  That costs a second sweep for the gap but keeps near-degenerate
multiplets resolvable (a single Krylov run cannot split an exact multiplet).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .pauli import ConvergenceError, OperatorSum, StateVector, as_amplitudes

DENSE_DIM_LIMIT = 4096
DEGENERACY_REL_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """The k lowest eigenpairs of a Hermitian operator, ascending."""

    eigenvalues: np.ndarray
    eigenvectors: tuple[StateVector, ...]
    residual_norms: np.ndarray

    def __post_init__(self):
        vals = np.array(self.eigenvalues, dtype=float)
        res = np.array(self.residual_norms, dtype=float)
        if vals.ndim != 1 or res.shape != vals.shape:
            raise ValueError("eigenvalues and residual_norms must be matching 1-d arrays")
        if len(self.eigenvectors) != len(vals):
            raise ValueError("one eigenvector required per eigenvalue")
        if np.any(np.diff(vals) < 0):
            raise ValueError("eigenvalues must be ascending")
        vals.flags.writeable = False
        res.flags.writeable = False
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "residual_norms", res)


@dataclass(frozen=True)
class SpectralGap:
    """E_1 - E_0 with a degeneracy flag (gap below 1e-8 * max(1, |E_0|))."""

    value: float
    degenerate: bool


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive."""
    idx = int(np.argmax(np.abs(vec)))
    a = vec[idx]
    if abs(a) == 0.0:
        return vec
    return vec * (a.conjugate() / abs(a))


def _as_hermitian_op(op: OperatorSum) -> OperatorSum:
    canon = op.canonical()
    if not canon.is_hermitian():
        raise ValueError("operator is not Hermitian; eigensolver refuses it")
    return canon


def _dense_lowest(canon: OperatorSum, k: int):
    dense = canon.to_dense()
    vals, vecs = np.linalg.eigh(dense)
    return vals[:k], [vecs[:, i] for i in range(k)]


def _lanczos_one(
    canon: OperatorSum,
    dim: int,
    deflate: list[np.ndarray],
    tol_abs: float,
    rng: np.random.Generator,
    block: int,
    max_restarts: int,
):
    """Lowest eigenpair of the operator restricted orthogonal to ``deflate``."""

    def project_out(w):
        for d in deflate:
            w -= np.vdot(d, w) * d
        return w

    def matvec(v):
        return project_out(canon.apply(project_out(v.copy())))

    q = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    q = project_out(q)
    nq = np.linalg.norm(q)
    if nq < 1e-12:
        raise ConvergenceError("could not find a start vector outside the deflation space")
    q /= nq

    theta = None
    for _ in range(max_restarts):
        basis = [q]
        alphas: list[float] = []
        betas: list[float] = []
        for _ in range(block):
            w = matvec(basis[-1])
            alpha = float(np.real(np.vdot(basis[-1], w)))
            alphas.append(alpha)
            w -= alpha * basis[-1]
            if len(basis) > 1:
                w -= betas[-1] * basis[-2]
            # full reorthogonalization, twice, against the Krylov basis and deflated vectors
            for _ in range(2):
                for b in basis:
                    w -= np.vdot(b, w) * b
                w = project_out(w)
            beta = float(np.linalg.norm(w))
            if beta < 1e-13 * max(1.0, abs(alphas[0])):
                break
            betas.append(beta)
            basis.append(w / beta)
        m = len(alphas)
        tvals, tvecs = eigh_tridiagonal(np.array(alphas), np.array(betas[: m - 1]))
        y = tvecs[:, 0]
        ritz = sum(y[i] * basis[i] for i in range(m))
        ritz /= np.linalg.norm(ritz)
        theta = float(tvals[0])
        resid = np.linalg.norm(matvec(ritz) - theta * ritz)
        if resid <= tol_abs:
            return theta, ritz
        q = ritz
    raise ConvergenceError(
        f"Lanczos failed to converge below {tol_abs:.3e} after {max_restarts} restarts"
        f" (last residual around theta={theta})"
    )


def _lanczos_lowest(canon: OperatorSum, k: int, tol_abs: float, seed: int = 0x17EE):
    dim = 1 << canon.n_qubits
    rng = np.random.default_rng(seed)
    block = min(dim, 80)
    found_vals: list[float] = []
    found_vecs: list[np.ndarray] = []
    for _ in range(k):
        val, vec = _lanczos_one(
            canon, dim, found_vecs, tol_abs, rng, block, max_restarts=400
        )
        found_vals.append(val)
        found_vecs.append(vec)
    order = np.argsort(found_vals)
    return [found_vals[i] for i in order], [found_vecs[i] for i in order]


def lowest_eigenpairs(
    op: OperatorSum,
    k: int = 2,
    tol: float = 1e-10,
    method: str = "auto",
) -> Spectrum:
    """Compute the k lowest eigenpairs of a Hermitian operator.

    Parameters
    ----------
    op : OperatorSum
        Hermitian operator (validated; non-Hermitian input is rejected).
    k : int
        Number of eigenpairs, 1 <= k <= dimension.
    tol : float
        Residual certification target, scaled by max(1, one-norm upper bound).
    method : str
        "auto" picks dense below dimension 4096 and Lanczos above;
        "dense" / "lanczos" force a route (dense still refuses dim > 4096).

    Every returned pair is certified: residual ||H v - E v|| is recomputed with
    a true matvec and stored; failure to converge raises ConvergenceError
    rather than returning an uncertified result.
    """
    canon = _as_hermitian_op(op)
    dim = 1 << canon.n_qubits
    if not 1 <= k <= dim:
        raise ValueError(f"k={k} out of range for dimension {dim}")
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError(f"unknown method {method!r}")
    scale = max(1.0, float(sum(abs(t.coeff) for t in canon.terms)))
    tol_abs = tol * scale

    use_dense = method == "dense" or (method == "auto" and dim <= DENSE_DIM_LIMIT)
    if use_dense:
        vals, vecs = _dense_lowest(canon, k)
    else:
        vals, vecs = _lanczos_lowest(canon, k, tol_abs)

    fixed = [_fix_phase(np.asarray(v, dtype=complex)) for v in vecs]
    residuals = []
    for val, vec in zip(vals, fixed):
        residuals.append(float(np.linalg.norm(canon.apply(vec) - val * vec)))
    residuals_arr = np.array(residuals)
    if np.any(residuals_arr > tol_abs):
        raise ConvergenceError(
            f"residual certification failed: {residuals_arr} vs allowance {tol_abs:.3e}"
        )
    states = tuple(
        StateVector(canon.n_qubits, v / np.linalg.norm(v)) for v in fixed
    )
    return Spectrum(np.array([float(v) for v in vals]), states, residuals_arr)


def spectral_gap(spectrum: Spectrum) -> SpectralGap:
    """E_1 - E_0 of a Spectrum holding at least two eigenvalues."""
    if len(spectrum.eigenvalues) < 2:
        raise ValueError("spectral_gap needs at least two eigenvalues")
    e0, e1 = float(spectrum.eigenvalues[0]), float(spectrum.eigenvalues[1])
    gap = e1 - e0
    return SpectralGap(gap, gap < DEGENERACY_REL_TOL * max(1.0, abs(e0)))


def overlap_abs(a, b) -> float:
    """|<a|b>| for two states of equal register size."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.n_qubits != b.n_qubits:
            raise ValueError("states live on different register sizes")
    va = as_amplitudes(a)
    vb = as_amplitudes(b)
    if va.shape != vb.shape:
        raise ValueError("states have different dimensions")
    return float(abs(np.vdot(va, vb)))
