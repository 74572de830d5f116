"""Repeat-until-success simulation of recursive ground-state merging.

The protocol walks the Hamiltonian tree bottom-up.  Leaves are prepared by an
oracle call (counted in N_V, never failing).  An internal node s is prepared
by repeatedly (up to k rounds) preparing both children and attempting a merge,
which succeeds with the probability an idealized phase-estimation event would
accept: q = |<psi_s | psi_s0 x psi_s1>|^2, or q * 4/pi^2 under the pessimistic
model.  Each merge attempt costs ceil(c_qpe * ||H_s|| / gamma_s) controlled
evolutions, counted in N_U.  Failure budgets divide by 3 at every level: a
node called with budget delta runs k = repetitions(r_lb, delta/3) rounds and
hands delta/3 to each child.

All randomness flows through a caller-provided numpy Generator, so a fixed
master seed reproduces traces byte for byte.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .pauli import NormBounds, OperatorSum, StateVector
from .spectra import Spectrum, SpectralGap, lowest_eigenpairs, overlap_abs, spectral_gap
from .tree import ROOT, HamiltonianTree, subsystem_hamiltonian

IDEAL_PROJECTIVE = "ideal-projective"
PESSIMISTIC_CLEVE = "pessimistic-cleve"


class DegenerateNodeError(RuntimeError):
    """A node's ground state is (near-)degenerate; the protocol refuses to run."""


@dataclass(frozen=True)
class QpeModel:
    """Success model for one merge attempt.

    ``ideal-projective`` accepts with the squared child-product overlap q;
    ``pessimistic-cleve`` derates q by 4/pi^2.  ``c_qpe`` scales the per-merge
    controlled-evolution cost ceil(c_qpe * ||H_s|| / gamma_s).
    """

    kind: str = IDEAL_PROJECTIVE
    c_qpe: float = 1.0

    def __post_init__(self):
        if self.kind not in (IDEAL_PROJECTIVE, PESSIMISTIC_CLEVE):
            raise ValueError(f"unknown QPE model {self.kind!r}")
        if not self.c_qpe > 0:
            raise ValueError("c_qpe must be positive")

    def success_probability(self, overlap_sq: float) -> float:
        if self.kind == IDEAL_PROJECTIVE:
            return overlap_sq
        return overlap_sq * 4.0 / math.pi**2


def repetitions(r_lb: float, delta_prime: float) -> int:
    """Rounds needed so the chance of never succeeding is at most delta_prime.

    k = ceil(ln(1/delta_prime) * pi^2 / (4 r_lb^2)), never below 1.  Natural
    log keeps k minimal while -ln(1-q) >= q still guarantees
    (1-q)^k <= delta_prime for any true per-round success q >= 4 r_lb^2 / pi^2.
    """
    if not 0.0 < r_lb <= 1.0:
        raise ValueError("r_lb must lie in (0, 1]")
    if not 0.0 < delta_prime < 1.0:
        raise ValueError("delta_prime must lie in (0, 1)")
    raw = -math.log(delta_prime) * math.pi**2 / (4.0 * r_lb * r_lb)
    return max(1, math.ceil(raw))


def compound_success_lower_bound(delta: float, n: int) -> float:
    """(1 - delta/n)^n, the success floor after splitting a failure budget n ways.

    Never drops below 1 - delta for delta in [0, 1], n >= 1.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (1.0 - delta / n) ** n


# -- cached per-node classical solutions --------------------------------------


@dataclass(frozen=True)
class NodeSolution:
    """Classical data for one tree node: local operator, spectrum, norms."""

    label: str
    hamiltonian: OperatorSum
    spectrum: Spectrum
    gap: SpectralGap
    norms: NormBounds

    @property
    def ground(self) -> StateVector:
        return self.spectrum.eigenvectors[0]


class TreeGround:
    """Lazy cache of ground-state data for every node of a tree.

    Solving each subtree Hamiltonian once keeps Monte Carlo runs cheap: the
    repeat-until-success chain only draws Bernoulli outcomes against cached
    overlaps.
    """

    def __init__(self, tree: HamiltonianTree, tol: float = 1e-10, method: str = "auto"):
        self.tree = tree
        self.tol = tol
        self.method = method
        self._nodes: dict[str, NodeSolution] = {}
        self._merge_overlaps: dict[str, float] = {}

    def node(self, label: str) -> NodeSolution:
        if label not in self._nodes:
            h_s = subsystem_hamiltonian(self.tree, label)
            spec = lowest_eigenpairs(h_s, k=2, tol=self.tol, method=self.method)
            gap = spectral_gap(spec)
            self._nodes[label] = NodeSolution(label, h_s, spec, gap, h_s.norm_bounds())
        return self._nodes[label]

    def merge_overlap(self, label: str) -> float:
        """|<psi_s | psi_s0 x psi_s1>| for an internal node."""
        if label not in self._merge_overlaps:
            if self.tree.is_leaf(label):
                raise ValueError(f"node {label or '*'} is a leaf; it has no merge")
            c0, c1 = self.tree.children(label)
            prod = np.kron(
                self.node(c0).ground.amplitudes, self.node(c1).ground.amplitudes
            )
            self._merge_overlaps[label] = overlap_abs(self.node(label).ground.amplitudes, prod)
        return self._merge_overlaps[label]

    def internal_labels(self) -> list[str]:
        return [s for s in self.tree.labels() if not self.tree.is_leaf(s)]

    def min_merge_overlap(self) -> float:
        """The protocol's binding constraint: min over all internal nodes."""
        labels = self.internal_labels()
        if not labels:
            return 1.0
        return min(self.merge_overlap(s) for s in labels)

    def max_node_norm(self) -> float:
        return max(self.node(s).norms.power_estimate for s in self.tree.labels())

    def min_node_gap(self) -> float:
        return min(self.node(s).gap.value for s in self.tree.labels())


def _as_ground(tree_or_ground) -> TreeGround:
    if isinstance(tree_or_ground, TreeGround):
        return tree_or_ground
    if isinstance(tree_or_ground, HamiltonianTree):
        return TreeGround(tree_or_ground)
    raise TypeError("expected a HamiltonianTree or TreeGround")


# -- traces and outcomes ------------------------------------------------------


@dataclass
class PrepTrace:
    """Query accounting for one prepare() call.

    ``node_attempts``: merge attempts per internal node, oracle calls per leaf.
    ``node_successes``: successful merges / leaf preparations per node.
    ``n_v``: total leaf-oracle queries; ``n_u``: total controlled evolutions.
    """

    node_attempts: dict[str, int] = field(default_factory=dict)
    node_successes: dict[str, int] = field(default_factory=dict)
    n_v: int = 0
    n_u: int = 0
    unbounded: bool = False
    master_seed: int | None = None

    def bump(self, label: str, success: bool) -> None:
        self.node_attempts[label] = self.node_attempts.get(label, 0) + 1
        if success:
            self.node_successes[label] = self.node_successes.get(label, 0) + 1

    def to_json(self) -> str:
        payload = {
            "node_attempts": {k or "*": v for k, v in sorted(self.node_attempts.items())},
            "node_successes": {k or "*": v for k, v in sorted(self.node_successes.items())},
            "n_v": self.n_v,
            "n_u": self.n_u,
            "unbounded": self.unbounded,
            "master_seed": self.master_seed,
        }
        return json.dumps(payload, sort_keys=True)


@dataclass(frozen=True)
class MergeOutcome:
    success: bool
    u_applications: int
    state: StateVector | None


@dataclass(frozen=True)
class PrepResult:
    succeeded: bool
    state: StateVector | None
    trace: PrepTrace
    delta: float


def _u_applications(sol: NodeSolution, model: QpeModel) -> int:
    if sol.gap.degenerate:
        raise DegenerateNodeError(
            f"node {sol.label or '*'} has a degenerate ground state (gap {sol.gap.value:.3e})"
        )
    return math.ceil(model.c_qpe * sol.norms.power_estimate / sol.gap.value)


def merge(
    tree_or_ground,
    label: str,
    child0: StateVector,
    child1: StateVector,
    model: QpeModel,
    rng: np.random.Generator,
    trace: PrepTrace | None = None,
) -> MergeOutcome:
    """One merge attempt at an internal node, given both child ground states.

    The children must be the classically certified ground states of the two
    child nodes (checked up to global phase).  Success is a Bernoulli draw at
    the model's acceptance probability; the controlled-evolution cost is paid
    whether or not the attempt succeeds.
    """
    ground = _as_ground(tree_or_ground)
    tree = ground.tree
    if tree.is_leaf(label):
        raise ValueError(f"cannot merge at leaf {label!r}")
    c0, c1 = tree.children(label)
    sol = ground.node(label)
    u_apps = _u_applications(sol, model)
    if child0 is ground.node(c0).ground and child1 is ground.node(c1).ground:
        # the common case in simulation loops: reuse the cached overlap
        q_ideal = ground.merge_overlap(label) ** 2
    else:
        for child_label, passed in ((c0, child0), (c1, child1)):
            want = ground.node(child_label).ground
            if overlap_abs(want, passed) < 1.0 - 1e-9:
                raise ValueError(
                    f"child state for node {child_label} is not the certified ground state"
                )
        prod = np.kron(child0.amplitudes, child1.amplitudes)
        q_ideal = overlap_abs(sol.ground.amplitudes, prod) ** 2
    q = model.success_probability(q_ideal)
    success = bool(rng.random() < q)
    if trace is not None:
        trace.bump(label, success)
        trace.n_u += u_apps
    return MergeOutcome(success, u_apps, sol.ground if success else None)


def prepare(
    tree_or_ground,
    label: str = ROOT,
    delta: float = 0.1,
    r_lb: float | None = None,
    model: QpeModel = QpeModel(),
    rng: np.random.Generator | None = None,
    unbounded: bool = False,
) -> PrepResult:
    """Prepare the ground state of the subtree at ``label`` with failure budget delta.

    Leaves always succeed at unit oracle cost.  An internal node runs up to
    k = repetitions(r_lb, delta/3) rounds; each round prepares both children
    with budget delta/3 and, if both succeeded, attempts one merge.  A child
    failure propagates as overall failure (the child already spent its own
    budget).  With ``unbounded=True`` the round cap is lifted everywhere and
    the trace is flagged; the result then always succeeds.

    ``r_lb`` defaults to the measured minimum merge overlap of the tree.
    """
    ground = _as_ground(tree_or_ground)
    if rng is None:
        rng = np.random.default_rng()
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if r_lb is None:
        r_lb = ground.min_merge_overlap()
    trace = PrepTrace(unbounded=unbounded)
    # refuse degenerate nodes up front so failures are loud, not statistical
    for s in ground.tree.subtree_labels(label):
        sol = ground.node(s)
        if sol.gap.degenerate:
            raise DegenerateNodeError(
                f"node {s or '*'} has a degenerate ground state (gap {sol.gap.value:.3e})"
            )
    state = _prepare_rec(ground, label, delta, r_lb, model, rng, trace, unbounded)
    return PrepResult(state is not None, state, trace, delta)


def _prepare_rec(ground, label, delta, r_lb, model, rng, trace, unbounded):
    tree = ground.tree
    if tree.is_leaf(label):
        trace.n_v += 1
        trace.bump(label, True)
        return ground.node(label).ground
    k = repetitions(r_lb, delta / 3.0)
    rounds = 0
    while unbounded or rounds < k:
        rounds += 1
        c0, c1 = tree.children(label)
        s0 = _prepare_rec(ground, c0, delta / 3.0, r_lb, model, rng, trace, unbounded)
        s1 = _prepare_rec(ground, c1, delta / 3.0, r_lb, model, rng, trace, unbounded)
        if s0 is None or s1 is None:
            return None
        outcome = merge(ground, label, s0, s1, model, rng, trace)
        if outcome.success:
            return outcome.state
    return None


# -- analytic query bounds ----------------------------------------------------


@dataclass(frozen=True)
class QueryBounds:
    n_v_bound: float
    n_u_bound: float


def analytic_bounds(
    p: int,
    r_lb: float,
    delta: float,
    h_max: float = 1.0,
    gamma_min: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
) -> QueryBounds:
    """Worst-case query bounds for a depth-p run (base-2 logs throughout).

    N_V <= c1 * 2**(p * (1 + log2(pi^2 / (4 r^2)) + log2(log2(1/delta)) + log2(2p)))
    N_U carries the same exponent with prefactor c2 * h_max / gamma_min.
    Depth zero needs no merges: (c1, 0).
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    if not 0.0 < r_lb <= 1.0:
        raise ValueError("r_lb must lie in (0, 1]")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if p == 0:
        return QueryBounds(float(c1), 0.0)
    if not h_max >= 0:
        raise ValueError("h_max must be >= 0")
    if not gamma_min > 0:
        raise ValueError("gamma_min must be positive")
    exponent = p * (
        1.0
        + math.log2(math.pi**2 / (4.0 * r_lb * r_lb))
        + math.log2(math.log2(1.0 / delta))
        + math.log2(2.0 * p)
    )
    scale = 2.0**exponent
    return QueryBounds(c1 * scale, c2 * (h_max / gamma_min) * scale)
