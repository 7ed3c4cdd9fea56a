"""Per-rack virtual output queues and the occupancy view the controller samples.

The queues of all racks live together in one :class:`RackBuffers`, backed by
the array state the compiled slot loop works on. :class:`RackState` is a
thin per-rack view for inspection and tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel as K
from .topology import ClusterAssignment, TopologyParams
from .traffic import Packet

DEFAULT_BUFFER_BITS = 5_000_000


class RackBuffers:
    """Virtual queues of every ToR plus the cluster assignment they are judged against.

    Each rack keeps one FIFO per destination rack. All of a rack's queues
    draw from one budget of ``buffer_capacity`` bits; a packet that would
    overflow it is tail-dropped.
    """

    def __init__(self, params: TopologyParams, buffer_capacity: int = DEFAULT_BUFFER_BITS,
                 packet_size: int = 12000, assignment: ClusterAssignment | None = None):
        self.params = params
        self.buffer_capacity = int(buffer_capacity)
        self.packet_size = int(packet_size)
        self.fabric = K.make_fabric(params.n_clusters, params.racks_per_cluster,
                                    params.n_wavelengths, params.tx_intra, params.rx_intra,
                                    params.tx_inter, params.rx_inter, self.packet_size,
                                    self.buffer_capacity)
        if assignment is not None:
            self.assignment = assignment

    # -- assignment -------------------------------------------------------

    @property
    def assignment(self) -> ClusterAssignment:
        fab = self.fabric
        return ClusterAssignment(fab.cluster_of, fab.position_of, self.params.n_clusters,
                                 self.params.racks_per_cluster)

    @assignment.setter
    def assignment(self, value: ClusterAssignment):
        if (value.n_clusters, value.racks_per_cluster) != (self.params.n_clusters,
                                                           self.params.racks_per_cluster):
            raise ValueError("assignment does not match the topology")
        K.apply_clusters(self.fabric, np.asarray(value.clusters(), dtype=np.int64))

    # -- queues -----------------------------------------------------------

    def __len__(self):
        return self.params.n_racks

    def __getitem__(self, rack: int) -> "RackState":
        if not 0 <= rack < self.params.n_racks:
            raise IndexError(rack)
        return RackState(self, rack)

    def __iter__(self):
        return (RackState(self, r) for r in range(self.params.n_racks))

    def enqueue(self, packet: Packet) -> bool:
        """Queue ``packet`` at its holder under its final destination, or drop it."""
        return K.enqueue(self.fabric, packet.holder, packet.id, packet.src, packet.dst,
                         packet.arrival_slot, packet.hops_taken) != -1

    def dequeue(self, holder: int, dst: int) -> Packet:
        if self.fabric.qlen[holder, dst] == 0:
            raise IndexError(f"queue {holder}->{dst} is empty")
        return self._packet(K.dequeue(self.fabric, holder, dst), holder)

    def _packet(self, p, holder) -> Packet:
        fab = self.fabric
        return Packet(int(fab.p_id[p]), int(fab.p_src[p]), int(fab.p_dst[p]),
                      int(fab.p_arr[p]), holder, int(fab.p_hops[p]), self.packet_size)

    def queue(self, holder: int, dst: int) -> list[Packet]:
        """Packets waiting at ``holder`` for ``dst``, head first."""
        fab = self.fabric
        out = []
        p = fab.head[holder, dst]
        while p != -1:
            out.append(self._packet(p, holder))
            p = fab.nxt[p]
        return out

    def queue_length(self, holder: int, dst: int) -> int:
        return int(self.fabric.qlen[holder, dst])

    def active_destinations(self, holder: int) -> list[int]:
        """Destinations with a non-empty queue at ``holder``, oldest first."""
        fab = self.fabric
        return [int(d) for d in fab.act[holder, :fab.act_n[holder]]]

    @property
    def resident(self) -> int:
        return int(K.resident_count(self.fabric))

    def queue_split(self) -> tuple[int, int]:
        """(L_intra, L_inter) under the current assignment."""
        a, b = K.queue_split(self.fabric)
        return int(a), int(b)

    def counts(self) -> np.ndarray:
        """``counts[h, d]``: packets waiting at ``h`` for ``d``."""
        return self.fabric.qlen.copy()


class RackState:
    """Read-mostly view of one rack inside a :class:`RackBuffers`."""

    __slots__ = ("buffers", "rack_id")

    def __init__(self, buffers: RackBuffers, rack_id: int):
        self.buffers = buffers
        self.rack_id = rack_id

    @property
    def buffer_capacity(self) -> int:
        return self.buffers.buffer_capacity

    @property
    def buffered_bits(self) -> int:
        return int(self.buffers.fabric.buffered[self.rack_id])

    @property
    def accepted(self) -> int:
        return int(self.buffers.fabric.accepted[self.rack_id])

    @property
    def dropped(self) -> int:
        return int(self.buffers.fabric.dropped[self.rack_id])

    @property
    def dequeued(self) -> int:
        return int(self.buffers.fabric.dequeued[self.rack_id])

    @property
    def queues(self) -> dict[int, list[Packet]]:
        b = self.buffers
        return {d: b.queue(self.rack_id, d) for d in b.active_destinations(self.rack_id)}

    def enqueue(self, packet: Packet) -> bool:
        if packet.holder != self.rack_id:
            raise ValueError(f"packet held by rack {packet.holder}, not {self.rack_id}")
        return self.buffers.enqueue(packet)

    def dequeue(self, dst: int) -> Packet:
        return self.buffers.dequeue(self.rack_id, dst)

    def head(self, dst: int) -> Packet:
        q = self.buffers.queue(self.rack_id, dst)
        if not q:
            raise IndexError(f"queue {self.rack_id}->{dst} is empty")
        return q[0]

    def queue_length(self, dst: int) -> int:
        return self.buffers.queue_length(self.rack_id, dst)

    @property
    def resident(self) -> int:
        return int(self.buffers.fabric.qlen[self.rack_id].sum())

    def __repr__(self):
        return (f"RackState({self.rack_id}, resident={self.resident}, "
                f"bits={self.buffered_bits}/{self.buffer_capacity})")


@dataclass
class OccupancySnapshot:
    l_intra: int
    l_inter: int
    mutual: np.ndarray

    @property
    def total(self) -> int:
        return self.l_intra + self.l_inter


def snapshot(buffers: RackBuffers) -> OccupancySnapshot:
    """Classify every queued packet against the current cluster assignment.

    A packet held at rack ``h`` for destination ``d`` counts as intra when
    ``h`` and ``d`` share a cluster. ``mutual[a, b]`` sums packets queued
    a->b and b->a, keyed by holder rather than original source.
    """
    l_intra, l_inter = buffers.queue_split()
    mutual = K.mutual_matrix(buffers.fabric).astype(np.int64)
    return OccupancySnapshot(l_intra, l_inter, mutual)
