"""Observables and their on-disk formats.

Time series and reconfiguration events go to CSV, run summaries to JSON.
Both are written with a fixed field order and fixed float precision, so
identical runs produce byte-identical files. Latencies are reported in
microseconds with three decimals; raw slot counts are kept alongside.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, fields

import numpy as np
from scipy import stats

SCHEMA_VERSION = 1

TIMESERIES_FIELDS = (
    "slot", "wall_time_us", "mean_latency_us", "window_latency_us", "window_deliveries",
    "l_intra", "l_inter", "delivered", "dropped", "generated", "suspended",
    "reconfigurations",
)
EVENT_FIELDS = ("slot", "wall_time_us", "l_intra", "l_inter", "duration_slots")
_US_FIELDS = {"wall_time_us", "mean_latency_us", "window_latency_us"}


@dataclass
class MetricsRecord:
    slot: int
    wall_time_us: float
    mean_latency_us: float        # all deliveries so far
    window_latency_us: float      # deliveries since the previous record; nan if none
    window_deliveries: int
    l_intra: int
    l_inter: int
    delivered: int
    dropped: int
    generated: int
    suspended: bool
    reconfigurations: int


def _fmt_us(x):
    return "" if x is None or math.isnan(x) else f"{x:.3f}"


def _parse_us(s):
    return float("nan") if s == "" else float(s)


def _open_for_write(path):
    try:
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_timeseries(records, path):
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMESERIES_FIELDS)
        for r in records:
            row = []
            for name in TIMESERIES_FIELDS:
                value = getattr(r, name)
                if name in _US_FIELDS:
                    row.append(_fmt_us(value))
                elif name == "suspended":
                    row.append("true" if value else "false")
                else:
                    row.append(str(int(value)))
            writer.writerow(row)
    return path


def read_timeseries(path) -> list[MetricsRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TIMESERIES_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            kwargs = {}
            for name in TIMESERIES_FIELDS:
                s = row[name]
                if name in _US_FIELDS:
                    kwargs[name] = _parse_us(s)
                elif name == "suspended":
                    kwargs[name] = s == "true"
                else:
                    kwargs[name] = int(s)
            out.append(MetricsRecord(**kwargs))
    return out


def export_events(events, path, slot_duration):
    """One row per reconfiguration: start slot, trigger occupancy, suspension length."""
    slot_us = slot_duration * 1e6
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_FIELDS)
        for e in events:
            writer.writerow([e.slot, _fmt_us(e.slot * slot_us), e.l_intra, e.l_inter, e.duration])
    return path


def read_events(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [{"slot": int(r["slot"]), "wall_time_us": _parse_us(r["wall_time_us"]),
             "l_intra": int(r["l_intra"]), "l_inter": int(r["l_inter"]),
             "duration_slots": int(r["duration_slots"])} for r in rows]


def _percentile(hist_keys, hist_cum, total, q):
    # nearest-rank percentile over an integer histogram
    if total == 0:
        return 0
    rank = max(1, math.ceil(q / 100 * total))
    idx = int(np.searchsorted(hist_cum, rank))
    return hist_keys[idx]


@dataclass
class SummaryReport:
    config: dict
    seed: int
    slots: int
    slot_duration_us: float
    generated: int
    delivered: int
    dropped: int
    resident: int
    relayed: int
    throughput: float
    drop_rate: float
    latency_samples: int
    mean_latency_slots: float
    mean_latency_us: float
    p50_latency_us: float
    p95_latency_us: float
    p99_latency_us: float
    reconfigurations: int
    suspended_slots: int
    runtime_s: float = 0.0

    @classmethod
    def from_histogram(cls, *, config, slots, slot_duration, generated, delivered, dropped,
                       resident, relayed, reconfigurations, suspended_slots, latency_hist,
                       runtime_s=0.0):
        keys = sorted(latency_hist)
        counts = [latency_hist[k] for k in keys]
        cum = np.cumsum(counts) if counts else np.zeros(0)
        n = int(cum[-1]) if counts else 0
        slot_us = slot_duration * 1e6
        mean_slots = sum(k * c for k, c in zip(keys, counts)) / n if n else 0.0
        resolved = delivered + dropped
        return cls(
            config=config,
            seed=config.get("seed", 0),
            slots=slots,
            slot_duration_us=slot_us,
            generated=generated,
            delivered=delivered,
            dropped=dropped,
            resident=resident,
            relayed=relayed,
            throughput=delivered / resolved if resolved else 0.0,
            drop_rate=dropped / generated if generated else 0.0,
            latency_samples=n,
            mean_latency_slots=mean_slots,
            mean_latency_us=mean_slots * slot_us,
            p50_latency_us=_percentile(keys, cum, n, 50) * slot_us,
            p95_latency_us=_percentile(keys, cum, n, 95) * slot_us,
            p99_latency_us=_percentile(keys, cum, n, 99) * slot_us,
            reconfigurations=reconfigurations,
            suspended_slots=suspended_slots,
            runtime_s=runtime_s,
        )

    def to_dict(self) -> dict:
        """JSON-ready document. Run time is left out so outputs stay reproducible."""
        d = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            if f.name == "runtime_s":
                continue
            value = getattr(self, f.name)
            if f.name.endswith("_us"):
                value = round(value, 3)
            elif isinstance(value, float):
                value = round(value, 9)
            d[f.name] = value
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_json(doc, path):
    with _open_for_write(path) as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def export_summary(report: SummaryReport, path):
    return write_json(report.to_dict(), path)


def mean_confidence_interval(values, confidence=0.95) -> tuple[float, float]:
    """Sample mean and Student-t half-width; half-width is nan for fewer than two values."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        return float("nan"), float("nan")
    mean = float(x.mean())
    if n < 2:
        return mean, float("nan")
    sem = float(x.std(ddof=1)) / math.sqrt(n)
    return mean, float(stats.t.ppf(0.5 + confidence / 2, n - 1) * sem)


AGGREGATE_METRICS = ("mean_latency_us", "p99_latency_us", "throughput", "drop_rate",
                     "reconfigurations")


def aggregate_summaries(summaries, metrics=AGGREGATE_METRICS) -> dict:
    """Mean and 95% half-width of each metric over trial summaries (dicts)."""
    out = {"trials": len(summaries)}
    for m in metrics:
        mean, half = mean_confidence_interval([s[m] for s in summaries])
        out[f"{m}_mean"] = mean
        out[f"{m}_ci95"] = half
    return out
