import numpy as np
import pytest

from rodca.exceptions import ConfigError
from rodca.traffic import (ELEPHANT, MICE, TrafficGenerator, TrafficParams, draw_flow_rates,
                           sample_task_arrivals)

SLOT = 1.2e-6
PKT = 12000


def generator(seed=0, n_racks=16, **kwargs):
    kwargs.setdefault("kappa_max", 3)
    return TrafficGenerator(TrafficParams(**kwargs), n_racks, SLOT, PKT,
                            np.random.default_rng(seed))


def test_task_rate_per_slot():
    assert generator(task_rate=3.0).tasks_per_slot == pytest.approx(3.6e-6, rel=1e-12)


def test_zero_task_rate_never_fires():
    rng = np.random.default_rng(0)
    assert all(sample_task_arrivals(0.0, rng) == 0 for _ in range(1000))
    gen = generator(task_rate=0.0)
    gen.arrivals(0, 100_000)
    assert gen.tasks_spawned == 0


def test_task_count_over_ten_million_slots():
    # Poisson mean 3.6e-6 * 1e7 = 36; 36 +- 12 is a two-sigma band
    gen = generator(seed=3, task_rate=3.0, mice_mean=0.0, elephant_mean=0.0)
    gen.block_slots = 1 << 20
    gen.arrivals(0, 10_000_000)
    assert 24 <= gen.tasks_spawned <= 48


def test_kappa_max_one_gives_one_flow_per_task():
    gen = generator(kappa_max=1, task_rate=0.0)
    for t in range(200):
        assert len(gen.spawn_task(float(t))) == 1


def test_task_destinations_distinct_and_exclude_source():
    gen = generator(n_racks=8, kappa_max=7, task_rate=0.0)
    for t in range(200):
        flows = gen.spawn_task(float(t))
        dsts = [f.dst for f in flows]
        assert len(set(dsts)) == len(dsts)
        assert len({f.src for f in flows}) == 1
        assert flows[0].src not in dsts
        assert 1 <= len(flows) <= 7


def test_kappa_distribution_covers_range():
    gen = generator(n_racks=8, kappa_max=7, task_rate=0.0)
    sizes = {len(gen.spawn_task(float(t))) for t in range(500)}
    assert sizes == set(range(1, 8))


def test_kappa_max_must_leave_a_destination():
    with pytest.raises(ConfigError) as err:
        generator(n_racks=8, kappa_max=8)
    assert err.value.field == "kappa_max"


@pytest.mark.parametrize("kwargs,field", [
    (dict(task_rate=-1.0), "task_rate"),
    (dict(kappa_max=0), "kappa_max"),
    (dict(elephant_mice_ratio=0.0), "elephant_mice_ratio"),
    (dict(mice_sigma=-1.0), "mice_sigma"),
])
def test_traffic_params_validation(kwargs, field):
    with pytest.raises(ConfigError) as err:
        TrafficParams(**kwargs)
    assert err.value.field == field


def test_elephant_probability_solves_rate_ratio():
    p = TrafficParams().elephant_probability
    # elephant_mean * p : mice_mean * (1 - p) = 9 : 1
    assert 1.92e9 * p / (0.48e6 * (1 - p)) == pytest.approx(9.0, rel=1e-12)


def test_offered_rate_ratio_over_many_flows():
    params = TrafficParams()
    elephant, rates = draw_flow_rates(400_000, params, np.random.default_rng(5))
    ratio = rates[elephant].sum() / rates[~elephant].sum()
    assert ratio == pytest.approx(9.0, rel=0.10)


def test_negative_rate_draws_are_clamped_to_zero():
    params = TrafficParams(mice_sigma=5e6, elephant_sigma=5e10)
    _, rates = draw_flow_rates(10_000, params, np.random.default_rng(1))
    assert rates.min() == 0.0
    assert (rates == 0.0).sum() > 1000


def test_default_sigma_is_quarter_mean_and_load_scale_applies():
    params = TrafficParams(load_scale=2.0)
    assert params.class_moments(True) == (3.84e9, 0.96e9)
    assert params.class_moments(False) == (0.96e6, 0.24e6)


def test_flow_kinds_and_bounds():
    gen = generator(n_racks=16, kappa_max=15, task_rate=0.0)
    flows = [f for t in range(300) for f in gen.spawn_task(float(t))]
    assert {f.kind for f in flows} <= {MICE, ELEPHANT}
    assert all(f.rate >= 0 and f.end_slot >= f.start_slot and f.src != f.dst for f in flows)


def test_ten_gbps_flow_emits_one_packet_per_slot():
    gen = generator(task_rate=0.0, kappa_max=1, mice_mean=1e10, elephant_mean=1e10,
                    mice_sigma=0.0, elephant_sigma=0.0, flow_mean_duration=1e3)
    (flow,) = gen.spawn_task(0.0)
    assert flow.rate == 1e10
    slots, *_ = gen.arrivals(0, 100_000)
    # Poisson(1e5): three sigma is under 1%
    assert len(slots) == pytest.approx(100_000, rel=0.01)


def test_zero_rate_flow_emits_nothing():
    gen = generator(task_rate=0.0, mice_mean=0.0, elephant_mean=0.0, flow_mean_duration=1.0)
    gen.spawn_task(0.0)
    slots, *_ = gen.arrivals(0, 10_000)
    assert len(slots) == 0


def test_generated_bits_match_offered_rates():
    T = 1_000_000
    gen = generator(seed=11, n_racks=16, kappa_max=6, task_rate=0.0,
                    flow_mean_duration=0.0006, load_scale=50.0)
    rng = np.random.default_rng(12)
    flows = [f for t in np.sort(rng.random(10_000) * T) for f in gen.spawn_task(float(t))]
    gen.block_slots = T
    slots, *_ = gen.arrivals(0, T)
    # expected packets: rate x time each flow is live inside [0, T)
    live = gen._live
    assert len(live) == len(flows)
    live_slots = np.clip(np.minimum(live.end_slot + 1, T) - live.start, 0, None)
    expected = np.sum(live.rate * live_slots) * SLOT / PKT
    assert expected > 1e5    # Poisson noise well under the 2% band
    assert len(slots) == pytest.approx(expected, rel=0.02)


def test_packets_are_well_formed_and_sorted():
    gen = generator(seed=2, n_racks=16, kappa_max=8, task_rate=2e5,
                    flow_mean_duration=0.0006, load_scale=5.0)
    slots, src, dst, ids = gen.arrivals(0, 50_000)
    assert len(slots) > 1000
    assert np.all(src != dst)
    assert src.min() >= 0 and dst.max() < 16
    assert np.all(np.diff(slots) >= 0) and slots.min() >= 0 and slots.max() < 50_000
    assert np.array_equal(ids, np.arange(len(ids)))


def test_same_seed_same_packets_regardless_of_window_slicing():
    kw = dict(seed=4, n_racks=16, kappa_max=8, task_rate=2e5, flow_mean_duration=0.0006,
              load_scale=5.0)
    whole = generator(**kw).arrivals(0, 20_000)
    gen = generator(**kw)
    parts = [gen.arrivals(a, b) for a, b in [(0, 1), (1, 777), (777, 9000), (9000, 20_000)]]
    for k in range(4):
        assert np.array_equal(whole[k], np.concatenate([p[k] for p in parts]))


def test_different_seeds_differ():
    kw = dict(n_racks=16, kappa_max=8, task_rate=2e5, flow_mean_duration=0.0006, load_scale=5.0)
    a = generator(seed=1, **kw).arrivals(0, 5000)
    b = generator(seed=2, **kw).arrivals(0, 5000)
    assert len(a[0]) != len(b[0]) or not np.array_equal(a[1], b[1])


def test_windows_must_be_contiguous():
    gen = generator()
    gen.arrivals(0, 10)
    with pytest.raises(ValueError):
        gen.arrivals(11, 20)


def test_generate_packets_and_active_flows():
    gen = generator(task_rate=0.0, kappa_max=1, mice_mean=1e10, elephant_mean=1e10,
                    mice_sigma=0.0, elephant_sigma=0.0, flow_mean_duration=1e3)
    gen.spawn_task(0.0)
    packets = [p for t in range(200) for p in gen.generate_packets(t)]
    assert all(p.holder == p.src and p.hops_taken == 0 and p.size == PKT for p in packets)
    assert [p.id for p in packets] == list(range(len(packets)))
    assert len(gen.active_flows(100)) == 1
    assert gen.offered_rate(100) == 1e10
