"""Perturbation-theory bounds with dense numerical verification.

Every bound here is a proven inequality; the sweep drivers at the bottom
generate randomized instances and check measured quantities against the
computed bounds, so a single violation is a build-stopping defect rather
than statistical noise.  All paths are dense (dim <= 4096): these are
verification tools, not production solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import polar

from .pauli import DENSE_DIM_LIMIT, ConvergenceError, OperatorSum

LOG_SERIES_CUTOFF = 1e-14
LOG_SERIES_MAX_TERMS = 500
# convergence radius for the unitary-log power series
LOG_RADIUS = 2.0 / 3.0
SATISFY_SLACK = 1e-10
DEGENERATE_GAP_TOL = 1e-8


def _as_dense(obj) -> np.ndarray:
    if isinstance(obj, OperatorSum):
        return obj.to_dense()
    mat = np.asarray(obj, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    if mat.shape[0] > DENSE_DIM_LIMIT:
        raise ValueError(f"dimension {mat.shape[0]} exceeds dense limit {DENSE_DIM_LIMIT}")
    return mat


def _check_hermitian(mat: np.ndarray, name: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(mat).max()) if mat.size else 1.0)
    if np.abs(mat - mat.conj().T).max() > 1e-10 * scale:
        raise ValueError(f"{name} must be Hermitian")
    return mat


def _norm2(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def _hermitian_norm2(mat: np.ndarray) -> float:
    w = np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)
    return float(np.abs(w).max()) if w.size else 0.0


@dataclass(frozen=True)
class BoundReport:
    """One inequality check: the bound, the measured side, and the verdict.

    The comparison direction is fixed by the producing operation and spelled
    out in context["direction"].
    """

    bound_value: float
    measured_value: float
    satisfied: bool
    context: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EffectiveHamiltonianReport:
    """Outcome of recovering a Hamiltonian from a perturbed evolution unitary.

    Fields left as None were not derivable in the producing call (a bare
    series inversion knows nothing about the unperturbed evolution).
    """

    t: float
    delta_norm: float | None
    epsilon: float | None
    error_norm: float | None
    series_terms_used: int
    hypothesis_ok: bool | None = None
    satisfied: bool | None = None


def davis_kahan(a, a_prime, j: int) -> BoundReport:
    """Eigenvector rotation bound: sin(angle_j) <= (pi/2) ||A - A'|| / delta_j.

    delta_j separates the j-th eigenvalue of A from the neighboring
    eigenvalues of A', with missing neighbors at the spectrum edge treated
    as infinitely far (that side is skipped).
    """
    mat_a = _check_hermitian(_as_dense(a), "A")
    mat_b = _check_hermitian(_as_dense(a_prime), "A_prime")
    if mat_a.shape != mat_b.shape:
        raise ValueError("matrices must share a dimension")
    dim = mat_a.shape[0]
    if not 0 <= j < dim:
        raise ValueError(f"index {j} out of range for dimension {dim}")
    w_a, v_a = np.linalg.eigh(mat_a)
    w_b, v_b = np.linalg.eigh(mat_b)
    candidates = []
    if j - 1 >= 0:
        candidates.append(abs(w_a[j] - w_b[j - 1]))
    if j + 1 <= dim - 1:
        candidates.append(abs(w_a[j] - w_b[j + 1]))
    delta_j = min(candidates) if candidates else math.inf
    if delta_j == 0.0:
        raise ValueError("neighbor separation is zero; the bound is vacuous")
    diff_norm = _hermitian_norm2(mat_a - mat_b)
    bound = 0.0 if math.isinf(delta_j) else (math.pi / 2.0) * diff_norm / delta_j
    overlap = abs(np.vdot(v_a[:, j], v_b[:, j]))
    measured = math.sqrt(max(0.0, 1.0 - overlap * overlap))
    return BoundReport(
        bound_value=bound,
        measured_value=measured,
        satisfied=measured <= bound + SATISFY_SLACK,
        context={"direction": "measured<=bound", "delta_j": delta_j, "diff_norm": diff_norm, "j": j},
    )


def weyl_max_shift(a, a_prime) -> BoundReport:
    """Eigenvalue stability: max_j |lambda_j - lambda'_j| <= ||A - A'||."""
    mat_a = _check_hermitian(_as_dense(a), "A")
    mat_b = _check_hermitian(_as_dense(a_prime), "A_prime")
    if mat_a.shape != mat_b.shape:
        raise ValueError("matrices must share a dimension")
    w_a = np.linalg.eigvalsh(mat_a)
    w_b = np.linalg.eigvalsh(mat_b)
    measured = float(np.abs(w_a - w_b).max()) if w_a.size else 0.0
    bound = _hermitian_norm2(mat_a - mat_b)
    return BoundReport(
        bound_value=bound,
        measured_value=measured,
        satisfied=measured <= bound + SATISFY_SLACK,
        context={"direction": "measured<=bound"},
    )


def matrix_log(u_tilde, t: float) -> tuple[np.ndarray, EffectiveHamiltonianReport]:
    """Invert a near-identity unitary to a Hermitian generator via the log series.

    log U = sum_{k>=1} ((-1)^(k+1)/k) (U - 1)^k, summed until the next term's
    norm falls below 1e-14 or 500 terms; the generator is (i/t) log U,
    symmetrized to kill series round-off.  Requires ||U - 1|| <= 2/3, the
    radius inside which the series provably converges.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    u = _as_dense(u_tilde)
    dim = u.shape[0]
    eye = np.eye(dim)
    m = u - eye
    dist = _norm2(m)
    if dist > LOG_RADIUS:
        raise ValueError(
            f"||U - 1|| = {dist:.6g} exceeds the series convergence radius {LOG_RADIUS:.6g}"
        )
    log_u = np.zeros_like(u)
    power = m.copy()
    terms = 0
    for k in range(1, LOG_SERIES_MAX_TERMS + 1):
        term = ((-1.0) ** (k + 1) / k) * power
        log_u += term
        terms = k
        power = power @ m
        if _norm2(power) / (k + 1) < LOG_SERIES_CUTOFF:
            break
    h_tilde = (1j / t) * log_u
    h_tilde = (h_tilde + h_tilde.conj().T) / 2.0
    report = EffectiveHamiltonianReport(
        t=t, delta_norm=None, epsilon=None, error_norm=None, series_terms_used=terms
    )
    return h_tilde, report


def effective_error(h, u_tilde, t: float, epsilon: float) -> EffectiveHamiltonianReport:
    """Recover a generator from a perturbed evolution and compare it with h.

    The hypothesis under which the error bound ||H_recovered - H|| <= epsilon
    is guaranteed: 0 < t <= 1/(4||H||) and ||U_tilde - exp(-iHt)|| <= t*epsilon/9
    <= 1/3.  A violated hypothesis is flagged, not fatal; the series is still
    summed whenever it converges.
    """
    mat_h = _check_hermitian(_as_dense(h), "H")
    u = _as_dense(u_tilde)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    w, v = np.linalg.eigh(mat_h)
    u_exact = (v * np.exp(-1j * t * w)) @ v.conj().T
    delta_norm = _norm2(u - u_exact)
    h_norm = float(np.abs(w).max()) if w.size else 0.0
    # boundary slack so t = 1/(4||H||) exactly is not flagged by rounding
    t_ok = 0.0 < t and 4.0 * t * h_norm <= 1.0 + 1e-9
    budget = t * epsilon / 9.0
    delta_ok = delta_norm <= budget + 1e-12 and budget <= 1.0 / 3.0 + 1e-12
    hypothesis_ok = bool(t_ok and delta_ok)
    h_tilde, partial = matrix_log(u, t)
    error_norm = _hermitian_norm2(h_tilde - mat_h)
    return EffectiveHamiltonianReport(
        t=t,
        delta_norm=delta_norm,
        epsilon=epsilon,
        error_norm=error_norm,
        series_terms_used=partial.series_terms_used,
        hypothesis_ok=hypothesis_ok,
        satisfied=error_norm <= epsilon + SATISFY_SLACK,
    )


def qpe_fidelity_bound(gamma_j: float, epsilon: float) -> float:
    """Phase-estimation fidelity floor max(0, 1 - pi^2 eps^2 / gamma^2).

    Valid for estimation error at most half the local gap; larger errors are
    rejected rather than clamped because the inequality no longer applies.
    """
    if gamma_j <= 0.0:
        raise ValueError("gamma_j must be positive")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon > gamma_j / 2.0:
        raise ValueError("epsilon must not exceed half the gap")
    return max(0.0, 1.0 - (math.pi * epsilon) ** 2 / gamma_j**2)


def perturbed_overlap_lb(gamma0: float, hint_norm: float) -> float:
    """Ground-overlap floor max(0, 1 - pi h / (gamma0 - 2h)) for ||H_int|| = h.

    Requires the unperturbed gap to exceed twice the interaction norm; at or
    below that threshold the hypothesis fails and the call is rejected.
    """
    if hint_norm < 0.0:
        raise ValueError("hint_norm must be nonnegative")
    if gamma0 <= 2.0 * hint_norm:
        raise ValueError("gap must exceed twice the interaction norm")
    return max(0.0, 1.0 - math.pi * hint_norm / (gamma0 - 2.0 * hint_norm))


def gap_overlap_chain(gamma0: float, hint_norms: Sequence[float]) -> tuple[float, float]:
    """Chained lower bounds after adding interactions one at a time.

    gap_lb = max(gamma0 - 2*sum(norms), 0); the overlap bound divides the
    largest single norm by that chained gap and is 0 whenever the gap bound
    closes (guarded division).  Appending a norm never increases either output.
    """
    if gamma0 < 0.0:
        raise ValueError("gamma0 must be nonnegative")
    norms = [float(x) for x in hint_norms]
    if any(x < 0.0 for x in norms):
        raise ValueError("interaction norms must be nonnegative")
    if not norms:
        return (gamma0, 1.0)
    gap_lb = max(gamma0 - 2.0 * sum(norms), 0.0)
    if gap_lb == 0.0:
        return (0.0, 0.0)
    r_squared_lb = max(1.0 - math.pi * max(norms) / gap_lb, 0.0)
    return (gap_lb, r_squared_lb)


C_THRESHOLD = 1.0 + math.pi / 2.0


@dataclass(frozen=True)
class SufficiencyReport:
    """Per-layer verdicts for the two constant-overlap sufficient conditions.

    Layer k holds the largest coupling-term norm at depth k; gamma_min is the
    smallest leaf-layer gap.  Condition (ii) everywhere implies condition (i)
    everywhere; implication_holds records that check for this profile.
    """

    p: int
    c: float
    gamma_min: float
    a_max: tuple[float, ...]
    condition_i: tuple[bool, ...]
    condition_ii: tuple[bool, ...]
    all_i: bool
    all_ii: bool
    implication_holds: bool


def sufficient_conditions(
    a_max: Sequence[float], gamma_min: float, c: float
) -> SufficiencyReport:
    """Check both layer-wise sufficient conditions for bounded merge loss.

    (i)  a_max[k] <= (1/2c) (gamma_min - 2 * sum_{j>k} a_max[j])
    (ii) a_max[k] <= gamma_min / (4 c (p-k)^2)
    with layers k = 0..p-1 and the constant c above 1 + pi/2.
    """
    if c <= C_THRESHOLD:
        raise ValueError(f"c must exceed {C_THRESHOLD:.6f}")
    if gamma_min <= 0.0:
        raise ValueError("gamma_min must be positive")
    profile = [float(x) for x in a_max]
    if not profile:
        raise ValueError("need at least one layer")
    if any(x < 0.0 for x in profile):
        raise ValueError("layer norms must be nonnegative")
    p = len(profile)
    cond_i = []
    cond_ii = []
    for k in range(p):
        tail = 2.0 * sum(profile[k + 1 :])
        cond_i.append(profile[k] <= (gamma_min - tail) / (2.0 * c))
        cond_ii.append(profile[k] <= gamma_min / (4.0 * c * (p - k) ** 2))
    all_i = all(cond_i)
    all_ii = all(cond_ii)
    return SufficiencyReport(
        p=p,
        c=c,
        gamma_min=gamma_min,
        a_max=tuple(profile),
        condition_i=tuple(cond_i),
        condition_ii=tuple(cond_ii),
        all_i=all_i,
        all_ii=all_ii,
        implication_holds=(not all_ii) or all_i,
    )


class PathDiagnostic(float):
    """The path maximum of ||H_int phi_j(tau)|| / min-gap, with flags attached.

    Behaves as a plain float (the maximum over the grid); degenerate_taus
    lists grid points where the spectrum was numerically degenerate (their
    quotients still enter the maximum, typically as inf).
    """

    def __new__(cls, value: float, degenerate_taus=(), samples=()):
        obj = super().__new__(cls, value)
        obj.degenerate_taus = tuple(degenerate_taus)
        obj.samples = tuple(samples)
        return obj


def path_overlap_diagnostic(h0, h_int, j: int, grid: int) -> PathDiagnostic:
    """Scan H(tau) = H0 + tau*H_int on a uniform grid over [0, 1].

    At each tau the quotient ||H_int phi_j(tau)|| / min_{k != j} |E_k - E_j|
    is evaluated by dense diagonalization; the return value is the grid
    maximum.  Degenerate points are flagged and kept, never dropped.
    """
    mat_h0 = _check_hermitian(_as_dense(h0), "H0")
    mat_int = _check_hermitian(_as_dense(h_int), "H_int")
    if mat_h0.shape != mat_int.shape:
        raise ValueError("matrices must share a dimension")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    dim = mat_h0.shape[0]
    if not 0 <= j < dim:
        raise ValueError(f"index {j} out of range for dimension {dim}")
    if dim < 2:
        raise ValueError("need dimension at least 2 to have a gap")
    taus = np.linspace(0.0, 1.0, grid)
    samples = []
    degenerate = []
    best = 0.0
    for tau in taus:
        w, v = np.linalg.eigh(mat_h0 + tau * mat_int)
        others = np.abs(np.delete(w, j) - w[j])
        gap = float(others.min())
        scale = max(1.0, float(np.abs(w).max()))
        numerator = float(np.linalg.norm(mat_int @ v[:, j]))
        if gap < DEGENERATE_GAP_TOL * scale:
            degenerate.append(float(tau))
        quotient = math.inf if gap == 0.0 else numerator / gap
        samples.append((float(tau), quotient))
        best = max(best, quotient)
    return PathDiagnostic(best, degenerate, samples)


# -- randomized sweep drivers -------------------------------------------------


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2.0


def sweep_davis_kahan(n_instances: int = 200, seed: int = 0, max_dim: int = 64) -> list[BoundReport]:
    reports = []
    for i in range(n_instances):
        rng = np.random.default_rng([seed, i])
        dim = int(rng.integers(2, max_dim + 1))
        a = random_hermitian(rng, dim)
        a_prime = a + rng.uniform(0.01, 1.0) * random_hermitian(rng, dim)
        j = int(rng.integers(0, dim))
        reports.append(davis_kahan(a, a_prime, j))
    return reports


def sweep_weyl(n_instances: int = 200, seed: int = 1, max_dim: int = 64) -> list[BoundReport]:
    reports = []
    for i in range(n_instances):
        rng = np.random.default_rng([seed, i])
        dim = int(rng.integers(2, max_dim + 1))
        a = random_hermitian(rng, dim)
        a_prime = a + rng.uniform(0.01, 1.0) * random_hermitian(rng, dim)
        reports.append(weyl_max_shift(a, a_prime))
    return reports


def perturbed_evolution(
    rng: np.random.Generator, dim: int = 4, t: float = 0.25, epsilon: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Build (H, U_tilde) satisfying the recovery hypothesis with ||H|| = 1.

    U_tilde is the nearest unitary (polar factor) to exp(-iHt) + Delta, with
    Delta shrunk until the unitary actually sits within t*epsilon/9 of the
    exact evolution; the polar projection can move it slightly farther out,
    hence the loop.
    """
    h = random_hermitian(rng, dim)
    h /= _hermitian_norm2(h)
    w, v = np.linalg.eigh(h)
    u_exact = (v * np.exp(-1j * t * w)) @ v.conj().T
    target = t * epsilon / 9.0
    delta = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    delta *= target / _norm2(delta)
    for _ in range(50):
        u_tilde, _ = polar(u_exact + delta)
        dist = _norm2(u_tilde - u_exact)
        if dist <= target:
            return h, u_tilde
        delta *= 0.98 * target / dist
    raise ConvergenceError("could not place the perturbed unitary inside the hypothesis ball")


def sweep_effective_error(
    n_instances: int = 100, seed: int = 2, dim: int = 4
) -> list[EffectiveHamiltonianReport]:
    reports = []
    for i in range(n_instances):
        rng = np.random.default_rng([seed, i])
        h, u_tilde = perturbed_evolution(rng, dim)
        reports.append(effective_error(h, u_tilde, 0.25, 0.5))
    return reports


def sweep_matrix_log_roundtrip(
    n_instances: int = 100, seed: int = 5, dim: int = 4
) -> list[BoundReport]:
    """Round-trip exp(-i t H_recovered) against the input unitary."""
    reports = []
    for i in range(n_instances):
        rng = np.random.default_rng([seed, i])
        h = random_hermitian(rng, dim)
        norm = _hermitian_norm2(h)
        t = 1.0 / (4.0 * norm)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * t * w)) @ v.conj().T
        h_tilde, info = matrix_log(u, t)
        wt, vt = np.linalg.eigh(h_tilde)
        u_back = (vt * np.exp(-1j * t * wt)) @ vt.conj().T
        err = _norm2(u_back - u)
        reports.append(
            BoundReport(
                bound_value=1e-10,
                measured_value=err,
                satisfied=err <= 1e-10,
                context={"direction": "measured<=bound", "terms": info.series_terms_used},
            )
        )
    return reports


def gapped_perturbation(
    rng: np.random.Generator, dim: int
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Random (H0, H_int) with gamma0 > 2 ||H_int|| + 0.1 by construction."""
    gamma0 = float(rng.uniform(0.3, 1.5))
    rest = gamma0 + np.sort(rng.uniform(0.0, 3.0, size=dim - 2)) if dim > 2 else np.empty(0)
    eigs = np.concatenate([[0.0, gamma0], rest])
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(g)
    h0 = (q * eigs) @ q.conj().T
    h0 = (h0 + h0.conj().T) / 2.0
    alpha = float(rng.uniform(0.1, 0.95))
    h_int = random_hermitian(rng, dim)
    hint_norm = alpha * (gamma0 - 0.1) / 2.0
    h_int *= hint_norm / _hermitian_norm2(h_int)
    return h0, h_int, gamma0, hint_norm


def sweep_perturbed_overlap(
    n_instances: int = 100, seed: int = 3, max_dim: int = 64
) -> list[BoundReport]:
    reports = []
    for i in range(n_instances):
        rng = np.random.default_rng([seed, i])
        dim = int(rng.integers(2, max_dim + 1))
        h0, h_int, gamma0, hint_norm = gapped_perturbation(rng, dim)
        lb = perturbed_overlap_lb(gamma0, hint_norm)
        _, v0 = np.linalg.eigh(h0)
        _, v1 = np.linalg.eigh(h0 + h_int)
        measured = abs(np.vdot(v1[:, 0], v0[:, 0])) ** 2
        reports.append(
            BoundReport(
                bound_value=lb,
                measured_value=measured,
                satisfied=measured >= lb - SATISFY_SLACK,
                context={
                    "direction": "measured>=bound",
                    "gamma0": gamma0,
                    "hint_norm": hint_norm,
                    "dim": dim,
                },
            )
        )
    return reports


def boundary_profile(rng: np.random.Generator, p_max: int = 6) -> SufficiencyReport:
    """Profile sitting exactly on the faster-decay condition's boundary."""
    p = int(rng.integers(1, p_max + 1))
    c = C_THRESHOLD + float(rng.uniform(0.01, 3.0))
    gamma = float(rng.uniform(0.1, 2.0))
    profile = [gamma / (4.0 * c * (p - k) ** 2) for k in range(p)]
    return sufficient_conditions(profile, gamma, c)


def sweep_sufficiency(n_instances: int = 100, seed: int = 4, p_max: int = 6) -> list[SufficiencyReport]:
    return [
        boundary_profile(np.random.default_rng([seed, i]), p_max) for i in range(n_instances)
    ]


SWEEP_SUITES = {
    "davis-kahan": sweep_davis_kahan,
    "weyl": sweep_weyl,
    "effective-error": sweep_effective_error,
    "log-roundtrip": sweep_matrix_log_roundtrip,
    "perturbed-overlap": sweep_perturbed_overlap,
    "sufficiency": sweep_sufficiency,
}


def run_sweeps(suites: Sequence[str] | None = None, n_instances: int | None = None) -> dict:
    """Run the named sweep suites (all by default) with their frozen seeds."""
    names = list(suites) if suites else list(SWEEP_SUITES)
    results = {}
    for name in names:
        if name not in SWEEP_SUITES:
            raise ValueError(f"unknown sweep suite {name!r}")
        fn = SWEEP_SUITES[name]
        results[name] = fn(n_instances) if n_instances else fn()
    return results


def sweep_rows(results: dict) -> list[tuple]:
    """Flatten sweep results to (suite, index, bound, measured, ok) rows."""
    rows = []
    for name in sorted(results):
        for i, rep in enumerate(results[name]):
            if isinstance(rep, SufficiencyReport):
                ok = rep.implication_holds and rep.all_ii
                rows.append((name, i, float(rep.p), float(rep.c), ok))
            else:
                bound = rep.bound_value if isinstance(rep, BoundReport) else rep.epsilon
                measured = rep.measured_value if isinstance(rep, BoundReport) else rep.error_norm
                rows.append((name, i, bound, measured, bool(rep.satisfied)))
    return rows


def write_sweep_csv(results: dict, path) -> None:
    from .experiments import fmt17

    lines = ["suite,instance,bound,measured,satisfied"]
    for name, i, bound, measured, ok in sweep_rows(results):
        lines.append(f"{name},{i},{fmt17(bound)},{fmt17(measured)},{int(ok)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
