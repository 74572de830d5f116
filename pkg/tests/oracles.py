"""Independent reference constructions used to pin golden values.

Everything here is built from dense linear algebra and explicit occupation
bookkeeping, bypassing the package's bit kernels and recursion entirely, so
agreement between the two routes is meaningful evidence.
"""
import math

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
AXES = {"X": SX, "Y": SY, "Z": SZ}


def kron_chain(mats):
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def string_dense(n_qubits, factors):
    """Dense matrix of a Pauli string given as {qubit: axis}; qubit 0 is MSB."""
    fac = dict(factors)
    return kron_chain([AXES.get(fac.get(q), I2) for q in range(n_qubits)])


def operator_dense(n_qubits, terms):
    """terms: iterable of (coeff, {qubit: axis})."""
    dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, fac in terms:
        out += coeff * string_dense(n_qubits, fac)
    return out


def tfim_dense(n_sites, h=1.0, J=1.0):
    """Transverse-field chain: h * sum Z_i + J * sum X_i X_{i+1}, open ends."""
    terms = [(h, {i: "Z"}) for i in range(n_sites)]
    terms += [(J, {i: "X", i + 1: "X"}) for i in range(n_sites - 1)]
    return operator_dense(n_sites, terms)


def ground_pair(dense):
    """(lowest two eigenvalues, their eigenvectors) by full diagonalization."""
    w, v = np.linalg.eigh(dense)
    return w[:2], v[:, :2]


def naive_overlap(p, h=1.0, J=1.0):
    """|<chain ground | single-site ground tensored 2^p times>|, dense route."""
    n = 1 << p
    _, v = ground_pair(tfim_dense(n, h, J))
    _, v1 = ground_pair(operator_dense(1, [(h, {0: "Z"})]))
    single = v1[:, 0]
    prod = np.array([1.0 + 0.0j])
    for _ in range(n):
        prod = np.kron(prod, single)
    return abs(np.vdot(v[:, 0], prod))


def merge_overlap(p, h=1.0, J=1.0):
    """|<2^p-site ground | (2^(p-1)-site ground) x (same)>| by dense kron."""
    n = 1 << p
    _, v_full = ground_pair(tfim_dense(n, h, J))
    _, v_half = ground_pair(tfim_dense(n // 2, h, J))
    half = v_half[:, 0]
    return abs(np.vdot(v_full[:, 0], np.kron(half, half)))


def linear_fit_r2(xs, ys):
    """Least-squares slope plus coefficient of determination."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    return slope, 1.0 - ss_res / ss_tot


def repetitions_raw(r_lb, delta_prime):
    """The pre-ceiling repetition count."""
    return -math.log(delta_prime) * math.pi**2 / (4.0 * r_lb**2)


def dense_ladder(n_modes, p, dagger):
    """Occupation-basis ladder matrix with |0> = occupied on the qubit.

    The parity string counts EMPTY lower modes: annihilating mode p flips
    qubit p from |0> to |1> with sign (-1)^(number of 1-bits below p).
    """
    dim = 1 << n_modes
    mat = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        bits = [(idx >> (n_modes - 1 - j)) & 1 for j in range(n_modes)]
        occupied = bits[p] == 0
        sign = (-1) ** (sum(bits[:p]) % 2)
        if dagger and not occupied:
            mat[idx & ~(1 << (n_modes - 1 - p)), idx] += sign
        if not dagger and occupied:
            mat[idx | (1 << (n_modes - 1 - p)), idx] += sign
    return mat


def dense_fermion_product(n_modes, factors):
    """Matrix product of ladder matrices, applied right to left like matrices."""
    dim = 1 << n_modes
    out = np.eye(dim, dtype=complex)
    for mode, dagger in factors:
        out = out @ dense_ladder(n_modes, mode, dagger)
    return out


def closed_form_counts(ground, delta, model):
    """Exact mean query counts for the repeat-until-success recursion.

    Per internal node with per-attempt success q and child success rates
    s0, s1, a round aborts with probability 1 - s0 s1, retries with
    x = s0 s1 (1 - q), and the expected number of started rounds out of k
    is (1 - x^k)/(1 - x).  Wald's identity then stacks the child costs.
    Returns {label: (success_prob, mean_V, mean_U)} including the root.
    """
    from treeprep.engine import repetitions

    tree = ground.tree
    r_lb = ground.min_merge_overlap()
    out = {}

    def rec(label, budget):
        if tree.is_leaf(label):
            out[label] = (1.0, 1.0, 0.0)
            return out[label]
        child_budget = budget / 3.0
        s0, v0, u0 = rec(label + "0", child_budget)
        s1, v1, u1 = rec(label + "1", child_budget)
        overlap = ground.merge_overlap(label)
        q = model.success_probability(overlap**2)
        k = repetitions(r_lb, child_budget)
        node = ground.node(label)
        u_cost = math.ceil(model.c_qpe * node.norms.power_estimate / node.gap.value)
        x = s0 * s1 * (1.0 - q)
        rounds = k if x == 1.0 else (1.0 - x**k) / (1.0 - x)
        succ = s0 * s1 * q * rounds
        mean_v = rounds * (v0 + v1)
        mean_u = rounds * (u0 + u1 + s0 * s1 * u_cost)
        out[label] = (succ, mean_v, mean_u)
        return out[label]

    rec("", delta)
    return out


def entropy_closed_form(r2, dim):
    u = 1.0 - r2
    total = 0.0
    if r2 > 0:
        total -= r2 * math.log(r2)
    if u > 0:
        total -= u * math.log(u / (dim - 1))
    return total


def grid_scan_overlap(entropy_nats, dim, points=1_000_000):
    """Best r^2 on a uniform grid; pins the bisection to grid resolution."""
    grid = np.linspace(1.0 / dim, 1.0, points)
    u = 1.0 - grid
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -np.where(grid > 0, grid * np.log(grid), 0.0) - np.where(
            u > 0, u * np.log(u / (dim - 1)), 0.0
        )
    return float(grid[np.argmin(np.abs(s - entropy_nats))])
