import math

import pytest

import ceegcn


def test_entmax_is_a_distribution():
    p = ceegcn.entmax([1.0, 0.5, -3.0], 1.55)
    assert math.isclose(sum(p), 1.0, abs_tol=1e-12)
    assert p[2] == 0.0
    assert ceegcn.entmax([0.6, 0.2], 2.0) == pytest.approx([0.7, 0.3], abs=1e-9)


def test_two_dyads_modularity():
    edges = [(0, 1, 1.0), (2, 3, 1.0)]
    assert ceegcn.modularity(4, edges, [0, 0, 1, 1]) == 0.5


def test_accuracy_is_permutation_invariant():
    acc, mapping = ceegcn.clustering_accuracy([2, 2, 0, 0], [0, 0, 1, 1])
    assert acc == 1.0
    assert mapping == {2: 0, 0: 1}


def test_contract_keeps_the_cores():
    edges, _ = ceegcn.synth_sbm(n=40, K=2, seed=1)
    kept, cores = ceegcn.contract(40, edges, 2)
    assert set(cores) <= set(kept)
    assert len(cores) >= 2


def test_cluster_end_to_end():
    edges, labels = ceegcn.synth_sbm(n=40, K=2, p_in=0.5, p_out=0.0, seed=2)
    config = {"epochs": "30", "heads": "4", "embedding_dim": "16", "attention_dim": "8", "hidden_dim": "8", "seed": "1"}
    out = ceegcn.cluster(40, edges, 2, config)
    assert len(out["labels"]) == 40
    assert out["memberships"].shape == (40, 2)
    assert len(out["history"]) == 30
    acc, _ = ceegcn.clustering_accuracy(out["labels"], labels)
    assert acc == 1.0
    again = ceegcn.cluster(40, edges, 2, config)
    assert again["labels"] == out["labels"]


def test_bad_setting_raises():
    edges, _ = ceegcn.synth_sbm(n=20, K=2, seed=0)
    with pytest.raises(ValueError):
        ceegcn.cluster(20, edges, 2, {"no_such_key": "1"})
