import numpy as np

from bpsplan.outages import total_outage_probability, duration_distribution
from bpsplan.scenarios import DemandProfile
from bpsplan.synthetic import (PROFILE_YEAR, desk_outage_dataset,
                               reshape_demand_ratio, synthetic_demand_kw,
                               synthetic_outage_dataset,
                               synthetic_pv_capacity_factor, write_demand_csv,
                               write_outage_csvs, write_pv_csv)


def test_big_dataset_calibration():
    ds = synthetic_outage_dataset()
    assert len(ds.records) == 55_000
    p = total_outage_probability(ds)
    assert abs(p - 6.3e-4) < 5e-5  # 0.063% +- 0.005 pp
    assert max(r.duration_min for r in ds.records) == 7200  # five days
    dist = duration_distribution(ds)
    mass = dist.pmf[(dist.lower_edges >= 15)
                    & (dist.lower_edges + 15 <= 900)].sum()
    assert mass >= 0.95


def test_dataset_determinism():
    a = synthetic_outage_dataset(n_records=500, seed=5)
    b = synthetic_outage_dataset(n_records=500, seed=5)
    assert [r.start for r in a.records] == [r.start for r in b.records]
    assert [r.customers_affected for r in a.records] == \
        [r.customers_affected for r in b.records]


def test_desk_dataset():
    ds = desk_outage_dataset()
    assert len(ds.records) == 200
    assert max(r.duration_min for r in ds.records) == 1800
    assert all(r.duration_min % 15 == 0 for r in ds.records)


def test_demand_profile_shape():
    d = synthetic_demand_kw()
    assert len(d) == 365 * 96
    assert d.max() == 2200.0
    ratio = (d.max() - d.min()) / d.mean()
    assert abs(ratio - 1.5) < 1e-9
    # annual peak is held only briefly (the scheduled duty pulse)
    near_peak = np.sum(d > 0.97 * d.max())
    assert near_peak < 96  # less than one day's worth of steps in the year


def test_demand_peak_is_winter_evening():
    d = synthetic_demand_kw()
    t = int(np.argmax(d))
    doy, step = divmod(t, 96)
    hour = step * 15 / 60
    assert doy < 60 or doy > 300
    assert 17 <= hour <= 20


def test_reshape_preserves_energy():
    base = synthetic_demand_kw()
    for ratio in (0.0, 0.5, 2.0, 3.5):
        out = reshape_demand_ratio(base, ratio)
        assert abs(out.sum() - base.sum()) < 1e-6 * base.sum()
        assert out.min() >= 0
        if ratio > 0:
            assert abs((out.max() - out.min()) / out.mean() - ratio) < 1e-6
        else:
            assert np.ptp(out) < 1e-9


def test_pv_trace_bounds_and_storm():
    cf = synthetic_pv_capacity_factor()
    assert cf.min() >= 0 and cf.max() <= 1
    night = cf.reshape(365, 96)[:, :16]  # midnight..4am
    assert night.max() == 0.0
    storm = cf.reshape(365, 96)[344:354].mean()
    summer = cf.reshape(365, 96)[150:200].mean()
    assert storm < 0.15 * summer


def test_csv_round_trip(tmp_path):
    from bpsplan.outages import load_outage_csv
    from bpsplan.scenarios import load_demand_csv, load_pv_csv

    ds = synthetic_outage_dataset(n_records=300, seed=2)
    write_outage_csvs(ds, tmp_path / "o.csv", tmp_path / "c.csv")
    back = load_outage_csv(tmp_path / "o.csv", tmp_path / "c.csv")
    assert len(back.records) == 300
    assert total_outage_probability(back) == total_outage_probability(ds)

    demand = synthetic_demand_kw()
    write_demand_csv(demand, tmp_path / "d.csv")
    dp = load_demand_csv(tmp_path / "d.csv")
    assert isinstance(dp, DemandProfile)
    assert dp.year == PROFILE_YEAR
    assert np.allclose(dp.values_kw, np.round(demand, 3))

    cf = synthetic_pv_capacity_factor()
    write_pv_csv(cf, tmp_path / "p.csv")
    pv = load_pv_csv(tmp_path / "p.csv")
    assert np.allclose(pv.capacity_factor, np.round(cf, 5))
