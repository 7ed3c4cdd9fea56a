"""Task, flow and packet arrivals.

Tasks arrive as a Poisson process; each lands on a uniformly chosen source
rack and opens ``kappa`` flows to distinct other racks. A flow is a mice or
an elephant flow with a truncated-Gaussian rate, lives for an exponential
time, and emits fixed-size packets as a Poisson process at its rate.

Arrivals are produced in fixed blocks of slots: each block opens the tasks
arriving in it, then every live flow emits its packets for the block. A
Poisson process on an interval is sampled as a Poisson count with
uniformly scattered times, which is the same law as slot-by-slot Poisson
draws but vectorizes. The block layout is internal, so the packet stream
for a given seed does not depend on how callers slice time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

MICE = "mice"
ELEPHANT = "elephant"


@dataclass(frozen=True)
class TrafficParams:
    task_rate: float = 3.0                 # tasks / s
    kappa_max: int = 899                   # flows per task drawn from [1, kappa_max]
    mice_mean: float = 0.48e6              # bit/s per flow at ToR scale
    elephant_mean: float = 1.92e9
    mice_sigma: float | None = None        # None -> mean / 4
    elephant_sigma: float | None = None
    elephant_mice_ratio: float = 9.0       # target total elephant : mice offered rate
    flow_mean_duration: float = 0.1        # s
    load_scale: float = 1.0                # multiplies every rate mean and sigma

    def __post_init__(self):
        for name in ("task_rate", "mice_mean", "elephant_mean", "flow_mean_duration",
                     "load_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", field=name)
        for name in ("mice_sigma", "elephant_sigma"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0", field=name)
        if self.elephant_mice_ratio <= 0:
            raise ConfigError("elephant_mice_ratio must be > 0", field="elephant_mice_ratio")
        if int(self.kappa_max) != self.kappa_max or self.kappa_max < 1:
            raise ConfigError("kappa_max must be an integer >= 1", field="kappa_max")

    @property
    def elephant_probability(self) -> float:
        """Per-flow elephant probability giving the target rate ratio in expectation.

        Solves ``elephant_mean * p : mice_mean * (1 - p) = ratio : 1``.
        """
        num = self.elephant_mice_ratio * self.mice_mean
        den = self.elephant_mean + num
        return num / den if den > 0 else 0.0

    def class_moments(self, elephant: bool) -> tuple[float, float]:
        if elephant:
            mean, sigma = self.elephant_mean, self.elephant_sigma
        else:
            mean, sigma = self.mice_mean, self.mice_sigma
        if sigma is None:
            sigma = mean / 4
        return mean * self.load_scale, sigma * self.load_scale


@dataclass
class Flow:
    src: int
    dst: int
    kind: str
    rate: float        # bit/s, never negative
    start_slot: int
    end_slot: int      # last slot in which the flow may emit


@dataclass
class Packet:
    id: int
    src: int
    dst: int
    arrival_slot: int
    holder: int
    hops_taken: int = 0
    size: int = 12000


def sample_task_arrivals(rate_per_slot: float, rng) -> int:
    """Number of tasks arriving in one slot."""
    if rate_per_slot <= 0:
        return 0
    return int(rng.poisson(rate_per_slot))


def draw_flow_rates(n: int, params: TrafficParams, rng) -> tuple[np.ndarray, np.ndarray]:
    """Classify ``n`` flows and draw their rates (bit/s).

    Returns ``(is_elephant, rates)``. Negative Gaussian draws are set to 0.
    """
    is_elephant = rng.random(n) < params.elephant_probability
    e_mean, e_sigma = params.class_moments(True)
    m_mean, m_sigma = params.class_moments(False)
    mean = np.where(is_elephant, e_mean, m_mean)
    sigma = np.where(is_elephant, e_sigma, m_sigma)
    rates = np.maximum(rng.normal(mean, sigma), 0.0)
    return is_elephant, rates


@dataclass
class FlowBatch:
    """Flows opened together, as parallel arrays."""
    src: np.ndarray
    dst: np.ndarray
    elephant: np.ndarray
    rate: np.ndarray          # bit/s
    start: np.ndarray         # continuous start time, slots
    end_slot: np.ndarray

    def __len__(self):
        return len(self.src)

    def flows(self) -> list[Flow]:
        return [Flow(int(s), int(d), ELEPHANT if e else MICE, float(r), int(t), int(x))
                for s, d, e, r, t, x in zip(self.src, self.dst, self.elephant, self.rate,
                                            self.start, self.end_slot)]

    @classmethod
    def concat(cls, batches):
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in batches])
                     for f in ("src", "dst", "elephant", "rate", "start", "end_slot")))

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, bool),
                   np.zeros(0), np.zeros(0), np.zeros(0, np.int64))

    def select(self, mask):
        return FlowBatch(self.src[mask], self.dst[mask], self.elephant[mask], self.rate[mask],
                         self.start[mask], self.end_slot[mask])


class TrafficGenerator:
    """Source of packet arrivals for ``n_racks`` racks, slot by slot.

    Time is measured in slots; slot ``t`` covers ``[t, t + 1)``.
    """

    def __init__(self, params: TrafficParams, n_racks: int, slot_duration: float,
                 packet_size: int, rng, block_slots: int = 4096):
        if params.kappa_max >= n_racks:
            raise ConfigError(
                f"kappa_max={params.kappa_max} needs at least {params.kappa_max + 1} racks, "
                f"network has {n_racks}",
                field="kappa_max",
            )
        self.params = params
        self.n_racks = n_racks
        self.slot_duration = slot_duration
        self.packet_size = packet_size
        self.rng = rng
        self.block_slots = block_slots
        self.tasks_per_slot = params.task_rate * slot_duration
        self._generated_to = 0          # blocks cover [0, _generated_to)
        self._emitted_to = 0            # arrivals handed out for [0, _emitted_to)
        self._pend_time = np.zeros(0)
        self._pend_src = np.zeros(0, np.int64)
        self._pend_dst = np.zeros(0, np.int64)
        self._next_id = 0
        self._live = FlowBatch.empty()        # flows that may still be queried
        self._emitting = FlowBatch.empty()    # flows with packets left to schedule
        self.tasks_spawned = 0
        self.flows_spawned = 0

    # -- flows ----------------------------------------------------------------

    def spawn_tasks(self, times) -> FlowBatch:
        """Open the flows of tasks arriving at ``times`` (slots, continuous)."""
        p = self.params
        rng = self.rng
        times = np.asarray(times, dtype=float)
        n = len(times)
        if n == 0:
            return FlowBatch.empty()
        S = self.n_racks
        src = rng.integers(S, size=n)
        kappa = rng.integers(1, p.kappa_max + 1, size=n)
        # kappa distinct non-source destinations: first columns of a random ordering
        order = np.argsort(rng.random((n, S - 1)), axis=1)[:, :p.kappa_max]
        keep = np.arange(p.kappa_max)[None, :] < kappa[:, None]
        picks = order[keep]
        task_of = np.repeat(np.arange(n), kappa)
        f_src = src[task_of]
        f_dst = np.where(picks >= f_src, picks + 1, picks)
        total = len(f_src)
        elephant, rate = draw_flow_rates(total, p, rng)
        mean_slots = p.flow_mean_duration / self.slot_duration
        life = rng.exponential(mean_slots, size=total) if mean_slots > 0 else np.zeros(total)
        start = times[task_of]
        end_slot = np.floor(start).astype(np.int64) + life.astype(np.int64)
        self.tasks_spawned += n
        self.flows_spawned += total
        return FlowBatch(f_src.astype(np.int64), f_dst.astype(np.int64), elephant, rate,
                         start, end_slot)

    def spawn_task(self, time: float) -> list[Flow]:
        batch = self.spawn_tasks([time])
        self._open(batch)
        return batch.flows()

    def _open(self, batch: FlowBatch):
        """Register new flows; any part of their life in already generated slots emits now."""
        if not len(batch):
            return
        self._live = FlowBatch.concat([self._live, batch])
        self._emitting = FlowBatch.concat([self._emitting, batch])
        self._emit(batch, self._emitted_to, self._generated_to)

    def _emit(self, batch: FlowBatch, t0, t1):
        """Schedule the packets ``batch`` sends inside ``[t0, t1)``."""
        if not len(batch):
            return
        lo = np.maximum(batch.start, t0)
        window = np.clip(np.minimum(batch.end_slot + 1, t1) - lo, 0, None)
        per_slot = batch.rate * self.slot_duration / self.packet_size
        counts = self.rng.poisson(per_slot * window)
        idx = np.repeat(np.arange(len(batch)), counts)
        times = lo[idx] + self.rng.random(len(idx)) * window[idx]
        self._pend_time = np.concatenate([self._pend_time, times])
        self._pend_src = np.concatenate([self._pend_src, batch.src[idx]])
        self._pend_dst = np.concatenate([self._pend_dst, batch.dst[idx]])

    def _generate_block(self):
        t0 = self._generated_to
        t1 = t0 + self.block_slots
        lam = self.tasks_per_slot * self.block_slots
        n = int(self.rng.poisson(lam)) if lam > 0 else 0
        times = np.sort(t0 + self.rng.random(n) * self.block_slots)
        self._open(self.spawn_tasks(times))
        self._emit(self._emitting, t0, t1)
        self._emitting = self._emitting.select(self._emitting.end_slot + 1 > t1)
        self._generated_to = t1

    # -- packets --------------------------------------------------------------

    def arrivals(self, t0: int, t1: int):
        """Packets arriving in slots ``[t0, t1)`` as arrays ``(slot, src, dst, id)``.

        Windows must be requested in order without gaps.
        """
        if t0 != self._emitted_to:
            raise ValueError(f"arrivals requested from slot {t0}, expected {self._emitted_to}")
        while self._generated_to < t1:
            self._generate_block()
        mask = self._pend_time < t1
        times = self._pend_time[mask]
        order = np.argsort(times, kind="stable")
        times = times[order]
        src = self._pend_src[mask][order]
        dst = self._pend_dst[mask][order]
        keep = ~mask
        self._pend_time = self._pend_time[keep]
        self._pend_src = self._pend_src[keep]
        self._pend_dst = self._pend_dst[keep]
        ids = np.arange(self._next_id, self._next_id + len(times), dtype=np.int64)
        self._next_id += len(times)
        self._emitted_to = t1
        if t1 - t0 > self.block_slots:
            self._prune(t0)
        return np.floor(times).astype(np.int64), src, dst, ids

    def generate_packets(self, slot: int) -> list[Packet]:
        """Packets arriving in ``slot``."""
        slots, src, dst, ids = self.arrivals(slot, slot + 1)
        return [Packet(int(i), int(s), int(d), int(t), int(s), 0, self.packet_size)
                for t, s, d, i in zip(slots, src, dst, ids)]

    def _prune(self, slot):
        self._live = self._live.select(self._live.end_slot >= slot)

    def active_flows(self, slot: int) -> list[Flow]:
        """Flows opened so far that may still emit at ``slot``."""
        live = self._live
        mask = (live.end_slot >= slot) & (np.floor(live.start) <= slot)
        return live.select(mask).flows()

    def offered_rate(self, slot: int) -> float:
        """Sum of the rates of flows active at ``slot``, bit/s."""
        live = self._live
        mask = (live.end_slot >= slot) & (np.floor(live.start) <= slot)
        return float(live.rate[mask].sum())
