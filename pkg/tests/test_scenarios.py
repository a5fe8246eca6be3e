import math

import numpy as np
import pytest

from bpsplan.problems import bundled_traces
from bpsplan.scenarios import (ScenarioSet, build_scenarios, kmeans,
                               scenario_set_from_records,
                               standardized_features, timestep_weights)
from bpsplan.synthetic import desk_outage_dataset


@pytest.fixture(scope="module")
def desk_ds():
    return desk_outage_dataset()


@pytest.fixture(scope="module")
def traces():
    return bundled_traces()


def test_kmeans_identical_points():
    pts = np.ones((10, 3))
    model = kmeans(pts, k=1, seed=0)
    assert model.inertia == 0.0
    assert np.allclose(model.centroids[0], 1.0)


def test_kmeans_two_clear_clusters():
    pts = np.array([[0, 0], [0, 1], [10, 0], [10, 1]], dtype=float)
    model = kmeans(pts, k=2, seed=0)
    cents = sorted(model.centroids.tolist())
    assert np.allclose(cents, [[0, 0.5], [10, 0.5]])
    assert model.inertia == pytest.approx(1.0)


def test_kmeans_k_equals_n():
    pts = np.arange(12, dtype=float).reshape(6, 2)
    model = kmeans(pts, k=6, seed=0)
    assert model.inertia == pytest.approx(0.0, abs=1e-18)


def test_kmeans_inertia_monotone(rng):
    pts = rng.normal(size=(300, 4))
    model = kmeans(pts, k=7, seed=1)
    hist = model.inertia_history
    assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))
    # fixed point: every point sits with its nearest centroid
    d2 = ((pts[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(np.argmin(d2, axis=1), model.assignments)


def test_kmeans_deterministic(rng):
    pts = rng.normal(size=(100, 3))
    a = kmeans(pts, k=5, seed=42)
    b = kmeans(pts, k=5, seed=42)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.inertia == b.inertia


def test_kmeans_rejects_bad_k():
    pts = np.zeros((5, 2))
    with pytest.raises(ValueError):
        kmeans(pts, k=2, seed=0)  # only one distinct point
    with pytest.raises(ValueError):
        kmeans(np.empty((0, 2)), k=1, seed=0)


def test_standardized_features_shape(desk_ds):
    feats = standardized_features(desk_ds)
    assert feats.shape == (200, 4)  # duration, month, hour sin/cos
    assert np.allclose(feats.mean(axis=0), 0.0, atol=1e-9)


@pytest.mark.parametrize("p_total,n_s,n_total,n_steps,expected", [
    (1.0, 5, 5, 1, 1.0),
    (6.3e-4, 1, 2, 480, 6.3e-4 * 0.5 / 480),
])
def test_timestep_weights(p_total, n_s, n_total, n_steps, expected):
    assert timestep_weights(p_total, n_s, n_total, n_steps) == \
        pytest.approx(expected, rel=1e-15)
    assert timestep_weights(6.3e-4, 1, 2, 480) == pytest.approx(6.5625e-7)


def test_timestep_weights_rejects():
    with pytest.raises(ValueError):
        timestep_weights(0.5, 1, 0, 480)
    with pytest.raises(ValueError):
        timestep_weights(0.5, 3, 2, 480)


def test_weight_partition_of_unity(desk_ds, traces):
    demand, pv = traces
    for k in (1, 4, 9):
        scen = build_scenarios(desk_ds, demand, pv, k=k,
                               include_extremes=True, seed=0, n_steps=144)
        total = math.fsum(p.n_steps * p.weight_per_step for p in scen.periods)
        assert abs(total - scen.p_total) <= 1e-12
        assert sum(p.count_represented for p in scen.periods) == 200


def test_single_cluster_takes_all_mass(desk_ds, traces):
    demand, _ = traces
    scen = build_scenarios(desk_ds, demand, None, k=1,
                           include_extremes=False, seed=0, n_steps=144)
    assert len(scen.periods) == 1
    assert scen.periods[0].count_represented == 200


def test_two_records_two_clusters(traces):
    demand, _ = traces
    ds = desk_outage_dataset(n_records=2, seed=9)
    scen = build_scenarios(ds, demand, None, k=2, include_extremes=False,
                           seed=0, n_steps=144)
    assert len(scen.periods) == 2
    assert all(p.count_represented == 1 for p in scen.periods)


def test_extremes_cover_peak_and_energy(desk_ds, traces):
    demand, _ = traces
    scen = build_scenarios(desk_ds, demand, None, k=8, include_extremes=True,
                           seed=0, n_steps=144)
    gt = scenario_set_from_records(desk_ds, demand, None, n_steps=144)
    peak_all = max(float(p.demand_kw.max()) for p in gt.periods)
    energy_all = max(float(p.demand_kw.sum()) for p in gt.periods)
    assert max(float(p.demand_kw.max()) for p in scen.periods) == \
        pytest.approx(peak_all)
    assert max(float(p.demand_kw.sum()) for p in scen.periods) == \
        pytest.approx(energy_all)
    # the 30-hour worst event survives clustering via the energy extreme
    assert max(p.outage_duration_steps for p in scen.periods) == 120


def test_demand_zero_after_restoration(desk_ds, traces):
    demand, _ = traces
    scen = build_scenarios(desk_ds, demand, None, k=4, include_extremes=False,
                           seed=0, n_steps=144)
    for p in scen.periods:
        assert np.all(p.demand_kw[p.outage_duration_steps:] == 0.0)
        assert np.all(p.demand_kw[:p.outage_duration_steps] > 0.0)


def test_build_scenarios_deterministic(desk_ds, traces):
    demand, pv = traces
    a = build_scenarios(desk_ds, demand, pv, k=6, include_extremes=True,
                        seed=3, n_steps=144)
    b = build_scenarios(desk_ds, demand, pv, k=6, include_extremes=True,
                        seed=3, n_steps=144)
    assert a.content_hash() == b.content_hash()


def test_scenario_json_round_trip(desk_ds, traces):
    demand, pv = traces
    scen = build_scenarios(desk_ds, demand, pv, k=3, include_extremes=True,
                           seed=0, n_steps=144)
    doc = scen.to_json()
    back = ScenarioSet.from_json(doc)
    assert back.content_hash() == scen.content_hash()
    back.validate()


def test_full_scale_has_five_day_period(traces):
    from bpsplan.synthetic import synthetic_outage_dataset
    demand, pv = traces
    ds = synthetic_outage_dataset()
    scen = build_scenarios(ds, demand, pv, k=18, include_extremes=True, seed=7)
    assert len(scen.periods) == 20
    assert any(p.outage_duration_steps == 480 for p in scen.periods)
    assert scen.peak_demand_kw == pytest.approx(demand.peak_kw)
