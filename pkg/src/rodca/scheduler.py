"""Per-slot central scheduler.

Every slot the controller walks the head-of-line packets of all virtual
queues and grants transmissions that respect three constraints:

C1  a transmitter (receiver) sends (receives) at most one packet per slot;
C2  at most W/P packets per inter-AWGR port pair and W/M per intra-AWGR
    port pair;
C3  transmitters sharing an AWGR input port use distinct wavelengths.

A cross-cluster packet goes direct when the destination's receiver band
meets a free route wavelength, otherwise it is relayed through a rack of
the destination cluster whose buffer can take it. A same-cluster packet
prefers the intra AWGR unless its rack already has ``lb_threshold`` or more
intra packets waiting, and falls back to the other AWGR when its preferred
one is busy. A packet that already took a hop finishes on the intra AWGR.
Ungranted packets stay queued.

The planner itself is compiled (see ``_kernel.plan_slot``); this module
exposes it as :class:`Grant` objects together with pure-Python reference
pieces of the same rules.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import _kernel as K
from .rack import RackBuffers
from .topology import ClusterAssignment, TopologyParams, direct_inter_wavelengths

INTRA = "intra"
INTER = "inter"
TWO_HOP = "two_hop"


@dataclass(slots=True)
class Grant:
    holder: int                # transmitting rack
    dst: int                   # final destination, i.e. the virtual queue served
    path: str                  # INTRA or INTER
    wavelength: int
    tx_index: int              # which of the holder's transmitters on this path
    receiver: int              # rack receiving this hop
    src_port: int              # AWGR input port: cluster (inter) or position (intra)
    dst_port: int
    cluster: int               # holder's cluster, names the intra AWGR
    intermediate: int | None = None
    packet: object = None

    @property
    def two_hop(self) -> bool:
        return self.intermediate is not None


@dataclass
class SlotPlan:
    slot: int
    grants: list = field(default_factory=list)

    def __len__(self):
        return len(self.grants)


def assign_wavelength(candidates, cursor):
    """Round-robin pick: first candidate at or after ``cursor``, cyclically.

    Returns ``(wavelength, new_cursor)`` where the new cursor is the
    candidate following the pick; ``(None, cursor)`` when nothing is free.
    """
    if not candidates:
        return None, cursor
    cands = sorted(candidates)
    for i, c in enumerate(cands):
        if c >= cursor:
            break
    else:
        i, c = 0, cands[0]
    return c, cands[(i + 1) % len(cands)]


def path_select(packet, assignment: ClusterAssignment, intra_waiting: int,
                lb_threshold: int, params: TopologyParams) -> str:
    """Preferred path for a head-of-line packet, before resource checks.

    Same cluster: relayed packets finish on the intra AWGR; fresh ones go
    intra while their rack has fewer than ``lb_threshold`` intra packets
    waiting, otherwise inter. Cross-cluster: inter when a direct wavelength
    exists, else two-hop.
    """
    h, d = packet.holder, packet.dst
    if assignment.same_cluster(h, d):
        if packet.hops_taken >= 1 or intra_waiting < lb_threshold:
            return INTRA
        return INTER
    if direct_inter_wavelengths(h, d, assignment, params):
        return INTER
    return TWO_HOP


def read_grants(buffers: RackBuffers, n_grants: int, slot: int = 0) -> SlotPlan:
    """Turn the first ``n_grants`` rows of the planner output into a SlotPlan."""
    fab = buffers.fabric
    plan = SlotPlan(slot)
    for row in fab.grants[:n_grants].tolist():
        inter = row[K.G_INTER]
        plan.grants.append(Grant(
            holder=row[K.G_HOLDER], dst=row[K.G_DST],
            path=INTRA if row[K.G_PATH] == K.PATH_INTRA else INTER,
            wavelength=row[K.G_WL], tx_index=row[K.G_TX], receiver=row[K.G_RECV],
            src_port=row[K.G_SPORT], dst_port=row[K.G_DPORT], cluster=row[K.G_CLUSTER],
            intermediate=None if inter < 0 else inter,
            packet=buffers._packet(row[K.G_PKT], row[K.G_HOLDER]),
        ))
    return plan


def schedule_slot(buffers: RackBuffers, lb_threshold: int = 32, slot: int = 0) -> SlotPlan:
    """Plan one slot of transmissions without touching the queues.

    Racks are visited in an order rotated every call, and each rack's
    queues in an order rotated per rack. The scan repeats in rounds so a
    rack with several free transmitters can serve the same queue more than
    once; a queue whose head cannot be granted is closed for the slot.
    Wavelength cursors and scan offsets persist in ``buffers`` between calls.
    """
    n = K.plan_slot(buffers.fabric, lb_threshold)
    return read_grants(buffers, n, slot)
