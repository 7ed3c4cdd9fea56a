"""Slot-by-slot simulation loop.

Each slot runs, in order: traffic arrivals and admission, the controller
tick (which may install a new cluster assignment and suspend the fabric),
scheduling and execution of grants, and metrics sampling. A packet granted
in slot ``t`` reaches its receiver at the end of the slot, so a direct
delivery of a packet that arrived in ``t`` has a latency of one slot.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import _kernel as K
from .exceptions import ConfigError
from .metrics import MetricsRecord, SummaryReport
from .rack import DEFAULT_BUFFER_BITS, RackBuffers, snapshot
from .reconfig import Controller, ReconfigEvent, ReconfigParams
from .topology import ClusterAssignment, TopologyParams
from .traffic import TrafficGenerator, TrafficParams


@dataclass(frozen=True)
class SimConfig:
    topology: TopologyParams = field(default_factory=TopologyParams)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    reconfig: ReconfigParams = field(default_factory=ReconfigParams)
    lb_threshold: int = 32
    link_rate: float = 10e9                # bit/s per transmitter
    packet_size: int = 12000               # bits
    buffer_capacity: int = DEFAULT_BUFFER_BITS
    duration_slots: int | None = None
    duration_seconds: float | None = None
    seed: int = 0
    reconfiguration_enabled: bool = True
    metrics_cadence: int = 1000            # slots between time-series records
    warmup_fraction: float = 0.1           # share of the run excluded from latency statistics
    initial_assignment: str = "identity"   # or "random"
    audit: bool = False                    # verify packet conservation every slot

    def __post_init__(self):
        if self.link_rate <= 0:
            raise ConfigError("link_rate must be > 0", field="link_rate")
        if int(self.packet_size) != self.packet_size or self.packet_size <= 0:
            raise ConfigError("packet_size must be a positive integer", field="packet_size")
        if self.buffer_capacity < 0:
            raise ConfigError("buffer_capacity must be >= 0", field="buffer_capacity")
        if int(self.lb_threshold) != self.lb_threshold or self.lb_threshold < 0:
            raise ConfigError("lb_threshold must be an integer >= 0", field="lb_threshold")
        if int(self.metrics_cadence) != self.metrics_cadence or self.metrics_cadence < 1:
            raise ConfigError("metrics_cadence must be an integer >= 1", field="metrics_cadence")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)", field="warmup_fraction")
        if self.initial_assignment not in ("identity", "random"):
            raise ConfigError("initial_assignment must be 'identity' or 'random'",
                              field="initial_assignment")
        if self.duration_slots is not None and (int(self.duration_slots) != self.duration_slots
                                                or self.duration_slots < 0):
            raise ConfigError("duration_slots must be an integer >= 0", field="duration_slots")
        if self.duration_seconds is not None and self.duration_seconds < 0:
            raise ConfigError("duration_seconds must be >= 0", field="duration_seconds")
        if self.traffic.kappa_max >= self.topology.n_racks:
            raise ConfigError(
                f"kappa_max={self.traffic.kappa_max} must be below the rack count "
                f"{self.topology.n_racks}",
                field="kappa_max",
            )

    @property
    def slot_duration(self) -> float:
        """Seconds to transmit one packet."""
        return self.packet_size / self.link_rate

    @property
    def n_slots(self) -> int:
        if self.duration_slots is not None:
            return int(self.duration_slots)
        if self.duration_seconds is not None:
            return int(round(self.duration_seconds / self.slot_duration))
        return 0

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        """Build from the nested form produced by :meth:`to_dict`.

        Unknown keys raise :class:`ConfigError` naming the key.
        """
        doc = dict(doc)
        sections = {"topology": TopologyParams, "traffic": TrafficParams,
                    "reconfig": ReconfigParams}
        kwargs = {}
        for name, klass in sections.items():
            sub = doc.pop(name, None) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"{name} must be a mapping", field=name)
            known = {f.name for f in fields(klass)}
            for key in sub:
                if key not in known:
                    raise ConfigError(f"unknown field {name}.{key}", field=f"{name}.{key}")
            try:
                kwargs[name] = klass(**sub)
            except TypeError as exc:
                raise ConfigError(f"{name}: {exc}", field=name) from exc
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown field {key}", field=key)
        kwargs.update(doc)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class SimulationResult:
    summary: SummaryReport
    records: list
    events: list


class Simulator:
    """One independent simulation instance; owns its RNG streams and all state.

    The slot loop runs compiled, a chunk of slots at a time; :meth:`step`
    and :meth:`advance` expose it at any granularity with identical results.
    """

    chunk_slots = 1 << 16
    event_batch = 256

    def __init__(self, config: SimConfig):
        self.config = config
        topo = config.topology
        self.params = topo
        traffic_seed, layout_seed = np.random.SeedSequence(config.seed).spawn(2)
        self.buffers = RackBuffers(topo, config.buffer_capacity, config.packet_size)
        if config.initial_assignment == "random":
            self.buffers.assignment = ClusterAssignment.random(
                topo, np.random.default_rng(layout_seed))
        self.controller = Controller(config.reconfig, topo.n_clusters, topo.racks_per_cluster,
                                     enabled=config.reconfiguration_enabled)
        self.traffic = TrafficGenerator(config.traffic, topo.n_racks, config.slot_duration,
                                        config.packet_size, np.random.default_rng(traffic_seed))
        self.n_slots = config.n_slots
        self.warmup_slots = int(math.floor(config.warmup_fraction * self.n_slots))
        self.slot = 0
        self.stats = np.zeros(K.ST_LEN, dtype=np.int64)
        self._hist = np.zeros(self.n_slots + 2, dtype=np.int64)   # latency (slots) -> count
        self.events: list[ReconfigEvent] = []
        self.records: list[MetricsRecord] = []
        self._injected = 0

    # -- state inspection -------------------------------------------------

    @property
    def racks(self) -> RackBuffers:
        return self.buffers

    @property
    def assignment(self) -> ClusterAssignment:
        return self.buffers.assignment

    generated = property(lambda self: int(self.stats[K.ST_GEN]))
    delivered = property(lambda self: int(self.stats[K.ST_DEL]))
    dropped = property(lambda self: int(self.stats[K.ST_DROP]))
    relayed = property(lambda self: int(self.stats[K.ST_RELAY]))
    suspended_slots = property(lambda self: int(self.stats[K.ST_SUSP]))

    @property
    def resident(self) -> int:
        return self.buffers.resident

    @property
    def latency_hist(self) -> dict[int, int]:
        """Latency in slots -> deliveries, counting only slots after warm-up."""
        nz = np.flatnonzero(self._hist)
        return {int(k): int(self._hist[k]) for k in nz}

    def queue_split(self) -> tuple[int, int]:
        """(L_intra, L_inter) under the current assignment."""
        return self.buffers.queue_split()

    def snapshot(self):
        return snapshot(self.buffers)

    def check_conservation(self):
        resident = self.resident
        if self.generated != self.delivered + self.dropped + resident:
            raise AssertionError(
                f"slot {self.slot}: generated={self.generated} != delivered={self.delivered}"
                f" + dropped={self.dropped} + resident={resident}"
            )

    def inject(self, src: int, dst: int) -> bool:
        """Add one packet arriving at ``src`` for ``dst`` in the current slot.

        It is counted like a traffic arrival; returns False if it was dropped.
        """
        S = self.params.n_racks
        if not (0 <= src < S and 0 <= dst < S) or src == dst:
            raise ValueError(f"invalid packet {src} -> {dst} for {S} racks")
        self._injected += 1
        self.stats[K.ST_GEN] += 1
        ok = K.enqueue(self.buffers.fabric, src, -self._injected, src, dst, self.slot, 0) != -1
        if not ok:
            self.stats[K.ST_DROP] += 1
        return ok

    # -- main loop --------------------------------------------------------

    def step(self):
        """Simulate one slot."""
        self.advance(1)

    def advance(self, n_slots: int):
        """Simulate the next ``n_slots`` slots."""
        cfg = self.config
        t = self.slot
        end = t + int(n_slots)
        if end + 2 > len(self._hist):
            grown = np.zeros(max(end + 2, 2 * len(self._hist)), dtype=np.int64)
            grown[:len(self._hist)] = self._hist
            self._hist = grown
        a_slot, a_src, a_dst, a_id = self.traffic.arrivals(t, end)
        fab = self.buffers.fabric
        P, M = self.params.n_clusters, self.params.racks_per_cluster
        cadence = cfg.metrics_cadence
        while t < end:
            batch = min(self.event_batch, end - t)
            events = np.zeros((batch, K.E_COLS), dtype=np.int64)
            ev_clusters = np.zeros((batch, P, M), dtype=np.int64)
            records = np.zeros(((end - t) // cadence + 1, K.R_COLS), dtype=np.int64)
            t_next, used, ne, nr, fail = K.run_slots(
                fab, self.controller.state, float(cfg.reconfig.beta), cfg.lb_threshold,
                self.stats, self._hist, self.warmup_slots, cadence,
                a_slot, a_src, a_dst, a_id, t, end, events, ev_clusters, records, cfg.audit)
            for k in range(ne):
                row = events[k]
                self.events.append(ReconfigEvent(
                    int(row[K.E_SLOT]), int(row[K.E_LINTRA]), int(row[K.E_LINTER]),
                    int(row[K.E_RT]), ClusterAssignment.from_clusters(ev_clusters[k].tolist())))
            for k in range(nr):
                self.records.append(self._record(records[k]))
            if fail >= 0:
                self.slot = t_next
                raise AssertionError(f"packet conservation violated at slot {fail}")
            a_slot, a_src, a_dst, a_id = a_slot[used:], a_src[used:], a_dst[used:], a_id[used:]
            t = t_next
        self.slot = end

    def _record(self, row) -> MetricsRecord:
        slot_us = self.config.slot_duration * 1e6
        slot = int(row[K.R_SLOT])
        n_del = int(row[K.R_DEL])
        n_win = int(row[K.R_WINCNT])
        return MetricsRecord(
            slot=slot,
            wall_time_us=(slot + 1) * slot_us,
            mean_latency_us=row[K.R_LATSUM] / n_del * slot_us if n_del else float("nan"),
            window_latency_us=row[K.R_WINSUM] / n_win * slot_us if n_win else float("nan"),
            window_deliveries=n_win,
            l_intra=int(row[K.R_LINTRA]),
            l_inter=int(row[K.R_LINTER]),
            delivered=n_del,
            dropped=int(row[K.R_DROP]),
            generated=int(row[K.R_GEN]),
            suspended=bool(row[K.R_SUSP]),
            reconfigurations=int(row[K.R_NEV]),
        )

    def run(self) -> SimulationResult:
        """Simulate the remaining slots of the configured duration."""
        t0 = time.perf_counter()
        while self.slot < self.n_slots:
            self.advance(min(self.chunk_slots, self.n_slots - self.slot))
        runtime = time.perf_counter() - t0
        return SimulationResult(self.summary(runtime), self.records, self.events)

    def summary(self, runtime: float = 0.0) -> SummaryReport:
        return SummaryReport.from_histogram(
            config=self.config.to_dict(),
            slots=self.slot,
            slot_duration=self.config.slot_duration,
            generated=self.generated,
            delivered=self.delivered,
            dropped=self.dropped,
            resident=self.resident,
            relayed=self.relayed,
            reconfigurations=len(self.events),
            suspended_slots=self.suspended_slots,
            latency_hist=self.latency_hist,
            runtime_s=runtime,
        )


def run(config: SimConfig) -> SimulationResult:
    return Simulator(config).run()
