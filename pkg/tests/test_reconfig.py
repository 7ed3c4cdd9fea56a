import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import greedy_reference, intra_weight, is_partition, partitions
from rodca.exceptions import ConfigError
from rodca.rack import OccupancySnapshot
from rodca.reconfig import (Controller, GreedyMutualClustering, ReconfigParams, greedy_cluster,
                            intra_cluster_weight, should_reconfigure)


def snap(l_intra, l_inter, n=4):
    return OccupancySnapshot(l_intra, l_inter, np.zeros((n, n)))


# -- trigger -------------------------------------------------------------------------

@pytest.mark.parametrize("beta,l_intra,l_inter,expected", [
    (15, 10, 150, True), (15, 10, 149, False), (0, 0, 1, True), (0, 500, 3, True),
    (15, 0, 1, True),
])
def test_trigger_examples(beta, l_intra, l_inter, expected):
    assert should_reconfigure(snap(l_intra, l_inter), beta) is expected


@pytest.mark.parametrize("beta", [0, 1, 15])
def test_empty_inter_backlog_never_triggers(beta):
    assert not should_reconfigure(snap(0, 0), beta)
    assert not should_reconfigure(snap(7, 0), beta)


@given(st.floats(0, 100), st.integers(0, 10**5), st.integers(0, 10**5), st.integers(1, 1000))
def test_trigger_scale_invariant(beta, l_intra, l_inter, k):
    assert (should_reconfigure(snap(l_intra, l_inter), beta)
            == should_reconfigure(snap(k * l_intra, k * l_inter), beta))


@given(st.floats(0, 100), st.floats(0, 100), st.integers(0, 10**5), st.integers(0, 10**5))
def test_trigger_monotone_in_beta(b1, b2, l_intra, l_inter):
    lo, hi = sorted((b1, b2))
    if not should_reconfigure(snap(l_intra, l_inter), lo):
        assert not should_reconfigure(snap(l_intra, l_inter), hi)


@pytest.mark.parametrize("kwargs,field", [
    (dict(beta=-1), "beta"), (dict(sampling_interval=0), "sampling_interval"),
    (dict(reconfig_time=-1), "reconfig_time"), (dict(sampling_interval=1.5), "sampling_interval"),
])
def test_reconfig_params_validation(kwargs, field):
    with pytest.raises(ConfigError) as err:
        ReconfigParams(**kwargs)
    assert err.value.field == field


# -- greedy clustering ----------------------------------------------------------------

def sym(n, entries, default=0):
    W = np.full((n, n), default, dtype=np.int64)
    np.fill_diagonal(W, 0)
    for (a, b), v in entries.items():
        W[a, b] = W[b, a] = v
    return W


def test_all_zero_matrix_uses_tie_break_order():
    assert greedy_cluster(np.zeros((4, 4)), 2, 2) == [[0, 1], [2, 3]]


def test_separable_four_rack_fixture_is_optimal():
    W = sym(4, {(0, 2): 10, (1, 3): 8}, default=1)
    got = greedy_cluster(W, 2, 2)
    assert got == [[0, 2], [1, 3]]
    best = max(intra_weight(W, p) for p in partitions(range(4), 2))
    assert intra_weight(W, got) == best == 18


# Six racks, two clusters of three. Weights not listed are zero.
SIX = {(0, 1): 10, (0, 2): 9, (0, 3): 9, (2, 3): 9, (1, 4): 8, (1, 5): 9, (4, 5): 9}


def test_six_rack_fixture_matches_hand_trace():
    # Hand trace:
    #   cluster 1 seed: heaviest pair (0, 1) = 10
    #   grow: sums to {0, 1} are r2 9+0, r3 9+0, r4 0+8, r5 0+9; tie at 9 -> lowest id, r2
    #   cluster 2 seed among {3, 4, 5}: (4, 5) = 9 beats (3, 4) = (3, 5) = 0
    #   grow: only r3 left
    #   result [[0, 1, 2], [4, 5, 3]], intra weight 10+9+0 + 9+0+0 = 28
    W = sym(6, SIX)
    got = greedy_cluster(W, 2, 3)
    assert got == [[0, 1, 2], [4, 5, 3]]
    assert intra_cluster_weight(W, got) == 28


def test_six_rack_fixture_greedy_is_below_optimum():
    W = sym(6, SIX)
    options = list(partitions(range(6), 3))
    assert len(options) == 10
    best = max(options, key=lambda p: intra_weight(W, p))
    assert sorted(map(sorted, best)) == [[0, 2, 3], [1, 4, 5]]
    assert intra_weight(W, best) == 53 > 28


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([(1, 4), (4, 1), (2, 2), (2, 3), (3, 2), (4, 4), (2, 5)]),
       st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_greedy_matches_reference_and_partitions(shape, seed, top):
    P, M = shape
    S = P * M
    rng = np.random.default_rng(seed)
    U = np.triu(rng.integers(0, top, size=(S, S)), 1)
    W = U + U.T
    got = greedy_cluster(W, P, M)
    assert got == greedy_reference(W.tolist(), P, M)
    assert is_partition(got, P, M)


def test_greedy_deterministic():
    W = sym(6, SIX)
    assert greedy_cluster(W, 2, 3) == greedy_cluster(W.copy(), 2, 3)


@pytest.mark.parametrize("W", [
    np.zeros((5, 5)),                                # wrong size
    np.array([[0, 1], [2, 0]]),                       # asymmetric
    np.array([[0, -1], [-1, 0]]),                     # negative
    np.array([[1, 0], [0, 0]]),                       # nonzero diagonal
])
def test_greedy_rejects_bad_matrices(W):
    with pytest.raises(ValueError):
        greedy_cluster(W, 2, 1 if len(W) == 2 else 2)


def test_estimator_interface():
    W = sym(6, SIX)
    est = GreedyMutualClustering(n_clusters=2, cluster_size=3)
    labels = est.fit_predict(W)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1]
    assert est.positions_.tolist() == [1, 2, 3, 3, 1, 2]
    assert est.clusters_ == [[0, 1, 2], [4, 5, 3]] and est.intra_weight_ == 28
    assert est.assignment_.rack_at(2, 1) == 4
    assert est.get_params() == {"n_clusters": 2, "cluster_size": 3}
    twin = clone(est)
    assert not hasattr(twin, "labels_") and twin.get_params() == est.get_params()


# -- controller ---------------------------------------------------------------------------

def controller(beta=15.0, si=1, rt=10, enabled=True):
    return Controller(ReconfigParams(beta, si, rt), 2, 2, enabled=enabled)


def test_failed_samples_recur_every_interval():
    c = controller(si=30)
    sampled, counters = [], []
    for t in range(90):
        def sample(t=t):
            sampled.append(t)
            return snap(10, 0)
        assert c.tick(t, sample) is None
        counters.append(c.counter)
    assert sampled == [29, 59, 89]
    assert max(counters) == 29 and counters[:3] == [1, 2, 3] and counters[29] == 0


def test_suspension_lasts_reconfig_time():
    c = controller(beta=0.0, si=1, rt=10)
    ev = c.tick(0, lambda: snap(0, 3))
    assert ev is not None and ev.slot == 0 and ev.duration == 10
    assert c.suspended
    flags = []
    for t in range(1, 12):
        flags.append(c.tick(t, lambda: snap(5, 0)) is None and c.suspended)
    assert flags == [True] * 9 + [False, False]


def test_beta_zero_attempts_every_available_slot():
    c = controller(beta=0.0, si=1, rt=0)
    events = [c.tick(t, lambda: snap(1, 1)) for t in range(20)]
    assert all(e is not None for e in events)
    assert not c.suspended


def test_event_carries_greedy_assignment():
    c = controller(beta=1.0)
    W = sym(4, {(0, 3): 5, (1, 2): 4})
    ev = c.tick(0, lambda: OccupancySnapshot(0, 9, W))
    assert ev.assignment.clusters() == [[0, 3], [1, 2]]
    assert (ev.l_intra, ev.l_inter) == (0, 9)


def test_disabled_controller_never_samples():
    c = controller(beta=0.0, enabled=False)
    for t in range(50):
        assert c.tick(t, lambda: pytest.fail("sampled")) is None
    assert not c.suspended and not c.enabled
