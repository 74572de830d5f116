"""Perfect-binary-tree decomposition of a Pauli-sum Hamiltonian.

The register is split into 2**p contiguous leaf spans (half-open qubit
intervals, possibly of different widths).  Node labels are binary strings:
the root is "" (written "*" in files), children of s are s+"0" and s+"1",
leaves have label length p.  Every canonical term of the full operator is
assigned to the deepest node whose covered span contains the term's support;
identity terms (empty support) go to the root by convention, since a constant
shift belongs to no particular subsystem.

The decomposition is exact bookkeeping: the disjoint union of all node term
lists reproduces the full operator term for term.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from .pauli import OperatorSum, PauliTerm

ROOT = ""


def _check_label(label: str, p: int) -> str:
    if not isinstance(label, str) or any(ch not in "01" for ch in label):
        raise ValueError(f"node label must be a string of 0/1, got {label!r}")
    if len(label) > p:
        raise ValueError(f"label {label!r} deeper than tree depth {p}")
    return label


@dataclass(frozen=True)
class HamiltonianTree:
    """A depth-p decomposition of ``source`` over contiguous leaf spans."""

    p: int
    n_qubits: int
    leaf_spans: tuple[tuple[int, int], ...]
    node_terms: Mapping[str, tuple[PauliTerm, ...]]
    source: OperatorSum

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("tree depth p must be >= 0")
        spans = tuple((int(a), int(b)) for a, b in self.leaf_spans)
        if len(spans) != 1 << self.p:
            raise ValueError(f"expected {1 << self.p} leaf spans, got {len(spans)}")
        _check_partition(spans, self.n_qubits)
        node_terms = {
            _check_label(lbl, self.p): tuple(ts) for lbl, ts in dict(self.node_terms).items()
        }
        object.__setattr__(self, "leaf_spans", spans)
        object.__setattr__(self, "node_terms", node_terms)

    # -- structure ------------------------------------------------------------

    def is_leaf(self, label: str) -> bool:
        return len(label) == self.p

    def children(self, label: str) -> tuple[str, str]:
        if self.is_leaf(label):
            raise ValueError(f"leaf {label!r} has no children")
        return label + "0", label + "1"

    def node_span(self, label: str) -> tuple[int, int]:
        """Half-open qubit interval covered by the subtree at ``label``."""
        _check_label(label, self.p)
        width = 1 << (self.p - len(label))
        first = int(label, 2) * width if label else 0
        return self.leaf_spans[first][0], self.leaf_spans[first + width - 1][1]

    def labels(self) -> list[str]:
        """All node labels, root first, level by level."""
        out = [ROOT]
        frontier = [ROOT]
        while frontier and not self.is_leaf(frontier[0]):
            frontier = [c for s in frontier for c in self.children(s)]
            out.extend(frontier)
        return out

    def subtree_labels(self, label: str) -> list[str]:
        out = [label]
        frontier = [label]
        while frontier and not self.is_leaf(frontier[0]):
            frontier = [c for s in frontier for c in self.children(s)]
            out.extend(frontier)
        return out

    def terms_at(self, label: str) -> tuple[PauliTerm, ...]:
        return self.node_terms.get(label, ())


def _check_partition(spans: tuple[tuple[int, int], ...], n_qubits: int) -> None:
    cursor = 0
    for lo, hi in spans:
        if lo != cursor:
            raise ValueError(f"leaf spans are not contiguous in order at qubit {cursor}")
        if hi <= lo:
            raise ValueError(f"empty leaf span ({lo},{hi})")
        cursor = hi
    if cursor != n_qubits:
        raise ValueError(f"leaf spans cover [0,{cursor}) but the register has {n_qubits} qubits")


def _deepest_node(tree_spans, p: int, support: tuple[int, ...]) -> str:
    """Deepest label whose span contains ``support``; root for identity terms."""
    if not support:
        return ROOT
    lo_q, hi_q = support[0], support[-1]
    label = ROOT
    while len(label) < p:
        width = 1 << (p - len(label) - 1)
        left = label + "0"
        first = int(left, 2) * width
        l_lo = tree_spans[first][0]
        l_hi = tree_spans[first + width - 1][1]
        if l_lo <= lo_q and hi_q < l_hi:
            label = left
            continue
        right = label + "1"
        first = int(right, 2) * width
        r_lo = tree_spans[first][0]
        r_hi = tree_spans[first + width - 1][1]
        if r_lo <= lo_q and hi_q < r_hi:
            label = right
            continue
        break
    return label


def decompose(full: OperatorSum, leaf_spans: Iterable[tuple[int, int]], p: int) -> HamiltonianTree:
    """Assign every canonical term of ``full`` to its deepest covering node."""
    spans = tuple((int(a), int(b)) for a, b in leaf_spans)
    if len(spans) != 1 << p:
        raise ValueError(f"expected {1 << p} leaf spans for depth {p}, got {len(spans)}")
    _check_partition(spans, full.n_qubits)
    canon = full.canonical()
    buckets: dict[str, list[PauliTerm]] = {}
    for term in canon.terms:
        label = _deepest_node(spans, p, term.support)
        buckets.setdefault(label, []).append(term)
    node_terms = {lbl: tuple(ts) for lbl, ts in buckets.items()}
    return HamiltonianTree(p, full.n_qubits, spans, node_terms, canon)


def subsystem_hamiltonian(tree: HamiltonianTree, label: str) -> OperatorSum:
    """H_s: all terms of the subtree at ``label``, re-indexed to local qubits."""
    lo, hi = tree.node_span(label)
    terms = []
    for sub in tree.subtree_labels(label):
        for t in tree.terms_at(sub):
            terms.append(t.shifted(-lo))
    return OperatorSum(hi - lo, tuple(terms)).canonical()


def node_term_operator(tree: HamiltonianTree, label: str) -> OperatorSum:
    """A_s alone (the terms assigned to ``label``), re-indexed to local qubits."""
    lo, hi = tree.node_span(label)
    return OperatorSum(
        hi - lo, tuple(t.shifted(-lo) for t in tree.terms_at(label))
    ).canonical()


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _term_id(t: PauliTerm) -> str:
    body = " ".join(f"{a}{q}" for q, a in t.factors) or "I"
    return f"({t.coeff!r})*{body}"


def validate(tree: HamiltonianTree) -> ValidationReport:
    """Structural invariants of a decomposition, each reported by name.

    Checks: leaf spans partition the register; every term's support lies in
    its node's span; internal-node terms are not containable in either child
    (identity terms at the root are exempt); the disjoint union of node terms
    reproduces the source operator after canonicalization.
    """
    checks = []

    try:
        _check_partition(tree.leaf_spans, tree.n_qubits)
        checks.append(CheckResult("leaf-span-partition", True))
    except ValueError as exc:
        checks.append(CheckResult("leaf-span-partition", False, (str(exc),)))

    bad_support = []
    for lbl in tree.node_terms:
        lo, hi = tree.node_span(lbl)
        for t in tree.terms_at(lbl):
            if t.support and not (lo <= t.support[0] and t.support[-1] < hi):
                bad_support.append(f"node {lbl or '*'}: {_term_id(t)}")
    checks.append(
        CheckResult("term-support-within-node", not bad_support, tuple(bad_support))
    )

    misplaced = []
    for lbl in tree.node_terms:
        if tree.is_leaf(lbl):
            continue
        for t in tree.terms_at(lbl):
            if not t.support:
                if lbl != ROOT:
                    misplaced.append(f"identity term below root at {lbl}: {_term_id(t)}")
                continue
            lo_q, hi_q = t.support[0], t.support[-1]
            for child in tree.children(lbl):
                c_lo, c_hi = tree.node_span(child)
                if c_lo <= lo_q and hi_q < c_hi:
                    misplaced.append(f"node {lbl or '*'} term fits child {child}: {_term_id(t)}")
    checks.append(CheckResult("deepest-assignment", not misplaced, tuple(misplaced)))

    assigned = [t for lbl in tree.node_terms for t in tree.terms_at(lbl)]
    union = OperatorSum(tree.n_qubits, tuple(assigned)).canonical()
    source = tree.source.canonical()
    if union.terms == source.terms:
        checks.append(CheckResult("reconstruction", True))
    else:
        union_set = set(union.terms)
        source_set = set(source.terms)
        missing = [_term_id(t) for t in source.terms if t not in union_set]
        extra = [_term_id(t) for t in union.terms if t not in source_set]
        detail = tuple(
            [f"missing from union: {t}" for t in missing]
            + [f"not in source: {t}" for t in extra]
        )
        checks.append(CheckResult("reconstruction", False, detail or ("term mismatch",)))

    return ValidationReport(tuple(checks))


# -- serialization ------------------------------------------------------------
#
# File schema: {"p": int, "n_qubits": int, "leaf_spans": [[lo, hi], ...],
#               "nodes": {"<label or *>": [term indices]}}
# Term indices point into the canonical term list of the companion operator
# file; the root label is written "*".


def tree_to_dict(tree: HamiltonianTree) -> dict:
    canon = tree.source.canonical()
    index_of = {t: i for i, t in enumerate(canon.terms)}
    nodes = {}
    for lbl in sorted(tree.node_terms):
        try:
            indices = [index_of[t] for t in tree.terms_at(lbl)]
        except KeyError as exc:
            raise ValueError(f"node {lbl or '*'} holds a term not present in the source") from exc
        nodes[lbl if lbl else "*"] = indices
    return {
        "p": tree.p,
        "n_qubits": tree.n_qubits,
        "leaf_spans": [[lo, hi] for lo, hi in tree.leaf_spans],
        "nodes": nodes,
    }


def tree_from_dict(data: dict, source: OperatorSum) -> HamiltonianTree:
    canon = source.canonical()
    p = int(data["p"])
    n_qubits = int(data["n_qubits"])
    if n_qubits != canon.n_qubits:
        raise ValueError("tree file and operator disagree on register size")
    seen: set[int] = set()
    node_terms = {}
    for lbl, indices in data["nodes"].items():
        label = ROOT if lbl == "*" else lbl
        terms = []
        for i in indices:
            i = int(i)
            if i < 0 or i >= len(canon.terms):
                raise ValueError(f"term index {i} out of range for the operator file")
            if i in seen:
                raise ValueError(f"term index {i} assigned to more than one node")
            seen.add(i)
            terms.append(canon.terms[i])
        node_terms[label] = tuple(terms)
    if len(seen) != len(canon.terms):
        raise ValueError("tree file does not assign every operator term")
    spans = tuple((int(a), int(b)) for a, b in data["leaf_spans"])
    return HamiltonianTree(p, n_qubits, spans, node_terms, canon)


def save_tree(tree: HamiltonianTree, path) -> None:
    with open(path, "w") as fh:
        json.dump(tree_to_dict(tree), fh, indent=1)
        fh.write("\n")


def load_tree(path, source: OperatorSum) -> HamiltonianTree:
    with open(path) as fh:
        return tree_from_dict(json.load(fh), source)
