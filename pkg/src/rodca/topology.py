"""Wavelength routing through the inter- and intra-cluster AWGRs.

Ports, positions and wavelengths are 1-indexed so the cyclic routing rule
``[(i + c - 2) mod N] + 1`` reads literally. Rack ids are 0-indexed because
they index arrays (queues, traffic matrices).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True)
class TopologyParams:
    """Static fabric dimensions and per-rack transceiver counts."""

    n_clusters: int = 30
    racks_per_cluster: int = 30
    n_wavelengths: int = 120
    tx_intra: int = 3
    rx_intra: int = 3
    tx_inter: int = 1
    rx_inter: int = 1

    def __post_init__(self):
        for name in ("n_clusters", "racks_per_cluster", "n_wavelengths",
                     "tx_intra", "rx_intra", "tx_inter", "rx_inter"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}", field=name)
        if self.n_wavelengths % self.n_clusters:
            raise ConfigError(
                f"n_wavelengths (W={self.n_wavelengths}) must be a multiple of "
                f"n_clusters (P={self.n_clusters})",
                field="n_wavelengths",
            )
        if self.n_wavelengths % self.racks_per_cluster:
            raise ConfigError(
                f"n_wavelengths (W={self.n_wavelengths}) must be a multiple of "
                f"racks_per_cluster (M={self.racks_per_cluster})",
                field="n_wavelengths",
            )

    @property
    def n_racks(self) -> int:
        return self.n_clusters * self.racks_per_cluster

    @property
    def wavelengths_per_inter_pair(self) -> int:
        return self.n_wavelengths // self.n_clusters

    @property
    def wavelengths_per_intra_pair(self) -> int:
        return self.n_wavelengths // self.racks_per_cluster


def _check_port(name, value, n_ports):
    if not 1 <= value <= n_ports:
        raise ValueError(f"{name}={value} outside [1, {n_ports}]")


def awgr_output(i: int, c: int, n_ports: int, n_wavelengths: int | None = None) -> int:
    """Output port reached from input port ``i`` on wavelength ``c``."""
    _check_port("input port", i, n_ports)
    if c < 1 or (n_wavelengths is not None and c > n_wavelengths):
        raise ValueError(f"wavelength {c} outside [1, {n_wavelengths}]")
    return (i + c - 2) % n_ports + 1


def inter_awgr_output(i: int, c: int, params: TopologyParams) -> int:
    return awgr_output(i, c, params.n_clusters, params.n_wavelengths)


def intra_awgr_output(i: int, c: int, params: TopologyParams) -> int:
    return awgr_output(i, c, params.racks_per_cluster, params.n_wavelengths)


@lru_cache(maxsize=None)
def route_wavelengths(i: int, j: int, n_ports: int, n_wavelengths: int) -> tuple[int, ...]:
    """Wavelengths that carry input port ``i`` to output port ``j``, ascending.

    There are exactly ``n_wavelengths / n_ports`` of them, spaced ``n_ports`` apart.
    """
    if n_wavelengths % n_ports:
        raise ConfigError(f"{n_ports} ports do not divide {n_wavelengths} wavelengths")
    _check_port("input port", i, n_ports)
    _check_port("output port", j, n_ports)
    first = (j - i) % n_ports + 1
    return tuple(range(first, n_wavelengths + 1, n_ports))


@lru_cache(maxsize=None)
def receiver_band(position: int, racks_per_cluster: int, n_wavelengths: int) -> tuple[int, ...]:
    """Contiguous block of wavelengths the demultiplexer hands to ``position``."""
    if n_wavelengths % racks_per_cluster:
        raise ConfigError(
            f"{racks_per_cluster} positions do not divide {n_wavelengths} wavelengths"
        )
    _check_port("position", position, racks_per_cluster)
    width = n_wavelengths // racks_per_cluster
    return tuple(range((position - 1) * width + 1, position * width + 1))


def band_position(c: int, racks_per_cluster: int, n_wavelengths: int) -> int:
    """Position whose receiver band contains wavelength ``c``."""
    return (c - 1) // (n_wavelengths // racks_per_cluster) + 1


class ClusterAssignment:
    """Bijection between rack ids and (cluster, position) slots.

    This is the state the cluster and wavelength switches realize: changing
    it re-homes racks onto different coupler/demultiplexer ports.
    """

    def __init__(self, cluster_of, position_of, n_clusters, racks_per_cluster):
        self.n_clusters = int(n_clusters)
        self.racks_per_cluster = int(racks_per_cluster)
        self.cluster_of = tuple(int(c) for c in cluster_of)
        self.position_of = tuple(int(p) for p in position_of)
        n_racks = self.n_clusters * self.racks_per_cluster
        if len(self.cluster_of) != n_racks or len(self.position_of) != n_racks:
            raise ValueError(f"assignment must cover exactly {n_racks} racks")
        slots = {}
        for rack, (c, p) in enumerate(zip(self.cluster_of, self.position_of)):
            if not (1 <= c <= self.n_clusters and 1 <= p <= self.racks_per_cluster):
                raise ValueError(f"rack {rack} mapped to invalid slot ({c}, {p})")
            if (c, p) in slots:
                raise ValueError(f"racks {slots[(c, p)]} and {rack} share slot ({c}, {p})")
            slots[(c, p)] = rack
        self._rack_at = slots

    @classmethod
    def identity(cls, params: TopologyParams) -> "ClusterAssignment":
        """Rack r sits at cluster r // M + 1, position r % M + 1."""
        m = params.racks_per_cluster
        racks = range(params.n_racks)
        return cls([r // m + 1 for r in racks], [r % m + 1 for r in racks],
                   params.n_clusters, m)

    @classmethod
    def from_clusters(cls, clusters) -> "ClusterAssignment":
        """Build from a list of clusters, each an ordered list of rack ids.

        The order within a cluster gives positions 1..M.
        """
        clusters = [list(c) for c in clusters]
        m = len(clusters[0])
        n_racks = len(clusters) * m
        cluster_of = [0] * n_racks
        position_of = [0] * n_racks
        seen = set()
        for ci, members in enumerate(clusters, start=1):
            if len(members) != m:
                raise ValueError("all clusters must have the same size")
            for pi, rack in enumerate(members, start=1):
                if not 0 <= rack < n_racks or rack in seen:
                    raise ValueError(f"rack {rack} is out of range or repeated")
                seen.add(rack)
                cluster_of[rack] = ci
                position_of[rack] = pi
        return cls(cluster_of, position_of, len(clusters), m)

    @classmethod
    def random(cls, params: TopologyParams, rng) -> "ClusterAssignment":
        order = rng.permutation(params.n_racks)
        m = params.racks_per_cluster
        return cls.from_clusters(order.reshape(params.n_clusters, m).tolist())

    @property
    def n_racks(self) -> int:
        return len(self.cluster_of)

    def rack_at(self, cluster: int, position: int) -> int:
        return self._rack_at[(cluster, position)]

    def members(self, cluster: int) -> list[int]:
        """Racks of ``cluster`` in position order."""
        return [self._rack_at[(cluster, p)] for p in range(1, self.racks_per_cluster + 1)]

    def clusters(self) -> list[list[int]]:
        return [self.members(c) for c in range(1, self.n_clusters + 1)]

    def same_cluster(self, a: int, b: int) -> bool:
        return self.cluster_of[a] == self.cluster_of[b]

    def __eq__(self, other):
        if not isinstance(other, ClusterAssignment):
            return NotImplemented
        return self.cluster_of == other.cluster_of and self.position_of == other.position_of

    def __hash__(self):
        return hash((self.cluster_of, self.position_of))

    def __repr__(self):
        return f"ClusterAssignment({self.clusters()})"


def direct_inter_wavelengths(src: int, dst: int, assignment: ClusterAssignment,
                             params: TopologyParams) -> tuple[int, ...]:
    """Inter-AWGR wavelengths that land on ``dst`` in one hop (possibly none)."""
    route = route_wavelengths(assignment.cluster_of[src], assignment.cluster_of[dst],
                              params.n_clusters, params.n_wavelengths)
    band = receiver_band(assignment.position_of[dst], params.racks_per_cluster,
                         params.n_wavelengths)
    return tuple(c for c in route if band[0] <= c <= band[-1])


def two_hop_options(src: int, dst: int, assignment: ClusterAssignment,
                    params: TopologyParams) -> list[tuple[int, int]]:
    """(wavelength, intermediate rack) pairs for relaying towards ``dst``.

    Each route wavelength lands on exactly one position of the destination
    cluster; wavelengths landing on ``dst`` itself are direct options and
    are left out.
    """
    dst_cluster = assignment.cluster_of[dst]
    route = route_wavelengths(assignment.cluster_of[src], dst_cluster,
                              params.n_clusters, params.n_wavelengths)
    options = []
    for c in route:
        pos = band_position(c, params.racks_per_cluster, params.n_wavelengths)
        rack = assignment.rack_at(dst_cluster, pos)
        if rack != dst:
            options.append((c, rack))
    return options
