"""When and how the cluster memberships are rebuilt.

The controller samples the virtual-queue occupancy every ``sampling_interval``
slots and reconfigures when ``beta * L_intra <= L_inter``. The new clusters
come from a greedy heuristic over the mutual-packet matrix: seed each cluster
with the heaviest remaining pair, then keep adding the rack with the largest
total mutual traffic to the racks already chosen.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from . import _kernel as K
from ._validation import check_mutual_matrix, check_positive_int
from .exceptions import ConfigError
from .topology import ClusterAssignment


@dataclass(frozen=True)
class ReconfigParams:
    beta: float = 15.0
    sampling_interval: int = 1     # slots between occupancy samples
    reconfig_time: int = 10        # slots of suspended transmission per reconfiguration

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("beta must be >= 0", field="beta")
        if int(self.sampling_interval) != self.sampling_interval or self.sampling_interval < 1:
            raise ConfigError("sampling_interval must be an integer >= 1",
                              field="sampling_interval")
        if int(self.reconfig_time) != self.reconfig_time or self.reconfig_time < 0:
            raise ConfigError("reconfig_time must be an integer >= 0", field="reconfig_time")


def should_reconfigure(snapshot, beta: float) -> bool:
    """True when inter-cluster backlog has grown to ``beta`` times the intra backlog."""
    return bool(K.trigger(float(beta), snapshot.l_intra, snapshot.l_inter))


def greedy_cluster(mutual, n_clusters: int, cluster_size: int) -> list[list[int]]:
    """Partition racks into ``n_clusters`` ordered groups of ``cluster_size``.

    Each cluster is seeded with the heaviest pair of still-free racks, then
    grows by the free rack with the largest summed mutual traffic to the
    racks already chosen. Ties go to the lowest rack id (for pairs: lowest
    first id, then lowest second id). The order inside each group is the
    selection order.
    """
    n_clusters = check_positive_int(n_clusters, "n_clusters")
    cluster_size = check_positive_int(cluster_size, "cluster_size")
    W = check_mutual_matrix(mutual, n_clusters * cluster_size)
    out = np.empty((n_clusters, cluster_size), dtype=np.int64)
    K.greedy_core(np.ascontiguousarray(W, dtype=np.float64), n_clusters, cluster_size, out)
    return out.tolist()


def intra_cluster_weight(mutual, clusters) -> float:
    """Mutual traffic kept inside clusters (each unordered pair counted once)."""
    W = np.asarray(mutual)
    total = 0
    for members in clusters:
        sub = W[np.ix_(members, members)]
        total += np.triu(sub, k=1).sum()
    return total.item() if hasattr(total, "item") else total


class GreedyMutualClustering(ClusterMixin, BaseEstimator):
    """Cluster racks by mutual traffic into equal-size groups.

    Parameters
    ----------
    n_clusters : int
        Number of clusters to form.
    cluster_size : int
        Racks per cluster; ``n_clusters * cluster_size`` must equal the
        matrix dimension.

    Attributes
    ----------
    clusters_ : list of list of int
        Rack ids per cluster, in selection (position) order.
    labels_ : ndarray of shape (n_racks,)
        0-based cluster index of each rack.
    positions_ : ndarray of shape (n_racks,)
        1-based position of each rack inside its cluster.
    assignment_ : ClusterAssignment
    intra_weight_ : float
        Mutual traffic captured inside clusters.
    """

    def __init__(self, n_clusters=30, cluster_size=30):
        self.n_clusters = n_clusters
        self.cluster_size = cluster_size

    def fit(self, X, y=None):
        X = check_mutual_matrix(X, self.n_clusters * self.cluster_size)
        self.clusters_ = greedy_cluster(X, self.n_clusters, self.cluster_size)
        self.assignment_ = ClusterAssignment.from_clusters(self.clusters_)
        self.labels_ = np.asarray(self.assignment_.cluster_of) - 1
        self.positions_ = np.asarray(self.assignment_.position_of)
        self.intra_weight_ = intra_cluster_weight(X, self.clusters_)
        return self


@dataclass
class ReconfigEvent:
    slot: int
    l_intra: int
    l_inter: int
    duration: int
    assignment: ClusterAssignment


class Controller:
    """Sampling counter and suspension clock of the central controller.

    Call :meth:`tick` once per slot before scheduling. The counter advances
    first and a sample is taken once it reaches ``sampling_interval``, so an
    interval of 1 samples every slot. The slot that triggers a
    reconfiguration is the first of ``reconfig_time`` suspended slots;
    sampling resumes after the suspension ends.
    """

    def __init__(self, params: ReconfigParams, n_clusters: int, cluster_size: int,
                 enabled: bool = True, state=None):
        self.params = params
        self.n_clusters = n_clusters
        self.cluster_size = cluster_size
        if state is None:
            state = np.zeros(K.C_LEN, dtype=np.int64)
        self.state = state
        state[K.C_ENABLED] = int(enabled)
        state[K.C_SI] = params.sampling_interval
        state[K.C_RT] = params.reconfig_time

    @property
    def enabled(self) -> bool:
        return bool(self.state[K.C_ENABLED])

    @property
    def counter(self) -> int:
        return int(self.state[K.C_COUNTER])

    @property
    def suspended(self) -> bool:
        return bool(self.state[K.C_SUSPENDED])

    @property
    def suspended_left(self) -> int:
        return int(self.state[K.C_SUSP_LEFT])

    def tick(self, slot: int, sample) -> ReconfigEvent | None:
        """Advance one slot; ``sample()`` must return an OccupancySnapshot."""
        if K.tick(self.state) != K.TICK_SAMPLE:
            return None
        snap = sample()
        if not should_reconfigure(snap, self.params.beta):
            return None
        clusters = greedy_cluster(snap.mutual, self.n_clusters, self.cluster_size)
        K.start_suspension(self.state)
        return ReconfigEvent(slot, snap.l_intra, snap.l_inter, self.params.reconfig_time,
                             ClusterAssignment.from_clusters(clusters))
