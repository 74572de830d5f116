"""Tree decomposition: term placement, validation checks, file round trips."""
import numpy as np
import pytest

from treeprep.pauli import OperatorSum, PauliTerm
from treeprep.tfim import build_tfim, tfim_tree
from treeprep.tree import (
    HamiltonianTree,
    decompose,
    load_tree,
    node_term_operator,
    save_tree,
    subsystem_hamiltonian,
    tree_from_dict,
    tree_to_dict,
    validate,
)


def test_two_level_chain_term_placement():
    tree = tfim_tree(2)
    # root gets the middle bond, internal nodes their own bonds, leaves the fields
    root_terms = tree.terms_at("")
    assert len(root_terms) == 1
    assert root_terms[0].factors == ((1, "X"), (2, "X"))
    assert [t.factors for t in tree.terms_at("0")] == [((0, "X"), (1, "X"))]
    assert [t.factors for t in tree.terms_at("1")] == [((2, "X"), (3, "X"))]
    for i, leaf in enumerate(["00", "01", "10", "11"]):
        assert [t.factors for t in tree.terms_at(leaf)] == [((i, "Z"),)]


def test_validation_passes_on_built_trees():
    for p in range(3):
        report = validate(tfim_tree(p))
        assert report.ok, [c.name for c in report.checks if not c.passed]


def test_deepest_assignment_check_catches_lifted_term():
    tree = tfim_tree(1)
    # move a leaf field term up to the root: reconstruction still fine,
    # deepest-assignment must fail
    nodes = dict(tree.node_terms)
    moved = nodes[""] + nodes["0"]
    nodes[""] = moved
    nodes["0"] = ()
    tampered = HamiltonianTree(tree.p, tree.n_qubits, tree.leaf_spans, nodes, tree.source)
    report = validate(tampered)
    assert not report.check("deepest-assignment").passed
    assert report.check("reconstruction").passed


def test_reconstruction_check_catches_missing_term():
    tree = tfim_tree(1)
    nodes = dict(tree.node_terms)
    nodes["0"] = ()
    tampered = HamiltonianTree(tree.p, tree.n_qubits, tree.leaf_spans, nodes, tree.source)
    report = validate(tampered)
    check = report.check("reconstruction")
    assert not check.passed
    assert any("missing" in d for d in check.details)


def test_identity_terms_live_at_root():
    op, spans = build_tfim(1)
    with_const = (op + OperatorSum(2, (PauliTerm(3.0, ()),))).canonical()
    tree = decompose(with_const, spans, 1)
    assert any(t.factors == () for t in tree.terms_at(""))
    assert validate(tree).ok


def test_subsystem_hamiltonian_reindexes_to_local_qubits():
    tree = tfim_tree(2)
    sub = subsystem_hamiltonian(tree, "1")
    # right half of the 4-spin chain is itself the 2-spin chain
    expect, _ = build_tfim(1)
    assert sub.n_qubits == 2
    assert sub.canonical().terms == expect.canonical().terms


def test_node_term_operator_is_local():
    tree = tfim_tree(1)
    bond = node_term_operator(tree, "")
    assert bond.n_qubits == 2
    assert bond.terms[0].factors == ((0, "X"), (1, "X"))


def test_span_partition_validation():
    op, _ = build_tfim(1)
    with pytest.raises(ValueError):
        decompose(op, ((0, 1), (0, 2)), 1)  # overlapping
    with pytest.raises(ValueError):
        decompose(op, ((0, 1),), 0)  # does not cover both qubits
    with pytest.raises(ValueError):
        decompose(op, ((0, 1), (1, 2), (2, 3)), 1)  # leaf count not 2^p


def test_term_crossing_leaf_boundary_goes_up():
    # three-qubit operator on a depth-1 split (2 + 1 padding is not allowed,
    # so use a 4-qubit operator with a term crossing the root cut)
    terms = (
        PauliTerm(1.0, ((0, "Z"),)),
        PauliTerm(1.0, ((1, "X"), (2, "X"))),
        PauliTerm(1.0, ((3, "Z"),)),
    )
    op = OperatorSum(4, terms)
    tree = decompose(op, ((0, 2), (2, 4)), 1)
    assert [t.factors for t in tree.terms_at("")] == [((1, "X"), (2, "X"))]
    assert validate(tree).ok


def test_file_round_trip(tmp_path):
    tree = tfim_tree(2)
    path = tmp_path / "tree.json"
    save_tree(tree, path)
    loaded = load_tree(path, tree.source)
    assert loaded.p == tree.p
    assert loaded.leaf_spans == tree.leaf_spans
    assert loaded.node_terms == tree.node_terms
    assert validate(loaded).ok
    # byte-stable re-save
    path2 = tmp_path / "tree2.json"
    save_tree(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_dict_round_trip():
    tree = tfim_tree(1)
    back = tree_from_dict(tree_to_dict(tree), tree.source)
    assert back.node_terms == tree.node_terms


def test_corrupt_tree_file_rejected():
    tree = tfim_tree(1)
    data = tree_to_dict(tree)
    data["leaf_spans"] = [[0, 1], [0, 2]]
    with pytest.raises(ValueError):
        tree_from_dict(data, tree.source)
    data = tree_to_dict(tree)
    data["nodes"]["*"] = [0, 0]
    with pytest.raises(ValueError):
        tree_from_dict(data, tree.source)


def test_labels_enumeration():
    tree = tfim_tree(2)
    labels = tree.labels()
    assert "" in labels
    assert set(l for l in labels if len(l) == 2) == {"00", "01", "10", "11"}
    assert len(labels) == 7
