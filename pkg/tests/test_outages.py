from datetime import datetime

import numpy as np
import pytest

from bpsplan.outages import (OutageDataError, OutageDataset, OutageRecord,
                             duration_distribution, load_outage_csv,
                             outage_features, total_outage_probability)


def write_csvs(tmp_path, rows, customers):
    outages = tmp_path / "outages.csv"
    base = tmp_path / "customers.csv"
    outages.write_text(
        "county_id,start_iso8601,duration_min,customers_affected\n"
        + "".join(f"{r}\n" for r in rows))
    base.write_text("county_id,total_customers\n"
                    + "".join(f"{c}\n" for c in customers))
    return outages, base


def test_load_valid_three_rows(tmp_path):
    outages, base = write_csvs(tmp_path, [
        "A,2021-01-01T00:00,30,100",
        "A,2021-06-15T12:30,45,50",
        "B,2021-03-02T08:15,15,10",
    ], ["A,1000", "B,500"])
    ds = load_outage_csv(outages, base)
    assert len(ds.records) == 3
    assert ds.records_per_county() == {"A": 2, "B": 1}


def test_reject_short_duration_lists_row(tmp_path):
    outages, base = write_csvs(tmp_path, [
        "A,2021-01-01T00:00,30,100",
        "A,2021-01-02T00:00,10,100",
    ], ["A,1000"])
    with pytest.raises(OutageDataError) as err:
        load_outage_csv(outages, base)
    assert any(n == 3 for n, _ in err.value.bad_rows)  # header is row 1


def test_reject_unknown_county_and_oversubscription(tmp_path):
    outages, base = write_csvs(tmp_path, [
        "Z,2021-01-01T00:00,30,100",
        "A,2021-01-02T00:00,30,5000",
    ], ["A,1000"])
    with pytest.raises(OutageDataError) as err:
        load_outage_csv(outages, base)
    assert len(err.value.bad_rows) == 2


def test_horizon_truncation_warns(tmp_path):
    outages, base = write_csvs(tmp_path, [
        "A,2021-12-31T23:00,300,100",
        "A,2021-06-01T00:00,60,100",
    ], ["A,1000"])
    with pytest.warns(UserWarning, match="truncated"):
        ds = load_outage_csv(outages, base,
                             horizon_start=datetime(2021, 1, 1),
                             horizon_end=datetime(2022, 1, 1))
    assert max(r.duration_min for r in ds.records) == 60


def make_dataset(records, customers, start=2021, end=2022):
    return OutageDataset(records, customers,
                         datetime(start, 1, 1), datetime(end, 1, 1))


def test_probability_saturated():
    # one county, one outage covering every customer for the whole horizon
    ds = make_dataset(
        [OutageRecord("A", datetime(2021, 1, 1), 1000, 10)], {"A": 10})
    ds.horizon_end = datetime(2021, 1, 1, 16, 40)  # exactly 1000 minutes
    assert total_outage_probability(ds) == pytest.approx(1.0)


def test_probability_hand_computed():
    # (50*60 + 30*120) / (10080 * 400)
    ds = make_dataset(
        [OutageRecord("A", datetime(2021, 1, 1), 60, 50),
         OutageRecord("B", datetime(2021, 1, 2), 120, 30)],
        {"A": 100, "B": 300})
    ds.horizon_end = datetime(2021, 1, 8)  # 10080 minutes
    assert total_outage_probability(ds) == pytest.approx(6600 / (10080 * 400),
                                                         rel=1e-15)
    assert total_outage_probability(ds) == pytest.approx(1.6369e-3, rel=1e-3)


def test_probability_invariances(rng):
    records = [
        OutageRecord(f"C{i % 4}", datetime(2021, 3, 1 + i % 25),
                     int(rng.integers(15, 600)), int(rng.integers(1, 400)))
        for i in range(40)
    ]
    customers = {f"C{i}": 500 for i in range(4)}
    ds = make_dataset(records, customers)
    p = total_outage_probability(ds)

    shuffled = list(records)
    rng.shuffle(shuffled)
    assert total_outage_probability(make_dataset(shuffled, customers)) == \
        pytest.approx(p, rel=1e-15)

    relabeled = make_dataset(
        [OutageRecord("X" + r.county_id, r.start, r.duration_min,
                      r.customers_affected) for r in records],
        {"X" + k: v for k, v in customers.items()})
    assert total_outage_probability(relabeled) == pytest.approx(p, rel=1e-15)

    scaled = make_dataset(
        [OutageRecord(r.county_id, r.start, r.duration_min,
                      r.customers_affected * 3) for r in records],
        {k: v * 3 for k, v in customers.items()})
    assert total_outage_probability(scaled) == pytest.approx(p, rel=1e-12)


def test_probability_rejects_degenerate():
    ds = make_dataset([OutageRecord("A", datetime(2021, 1, 1), 30, 5)],
                      {"A": 10})
    ds.customer_base = {}
    with pytest.raises(OutageDataError):
        total_outage_probability(ds)


def test_duration_distribution_single_bin():
    ds = make_dataset(
        [OutageRecord("A", datetime(2021, 1, 1 + i), 30, 5) for i in range(5)],
        {"A": 10})
    dist = duration_distribution(ds)
    assert dist.pmf[dist.lower_edges == 30] == pytest.approx(1.0)


def test_duration_distribution_uniform_two_bins():
    recs = [OutageRecord("A", datetime(2021, 1, 1 + i), 15 if i % 2 else 30, 5)
            for i in range(10)]
    dist = duration_distribution(make_dataset(recs, {"A": 10}))
    assert dist.pmf[dist.lower_edges == 15] == pytest.approx(0.5)
    assert dist.pmf[dist.lower_edges == 30] == pytest.approx(0.5)


def test_duration_distribution_properties(rng):
    recs = [OutageRecord("A", datetime(2021, 1, 1), int(d), 5)
            for d in rng.integers(1, 40, size=200) * 15]
    dist = duration_distribution(make_dataset(recs, {"A": 10}))
    assert abs(dist.pmf.sum() - 1.0) < 1e-12
    assert np.all(np.diff(dist.cdf) >= -1e-15)
    assert dist.cdf[-1] == pytest.approx(1.0, abs=1e-12)


def test_duration_distribution_rejects_bad_bin():
    ds = make_dataset([OutageRecord("A", datetime(2021, 1, 1), 30, 5)],
                      {"A": 10})
    with pytest.raises(ValueError):
        duration_distribution(ds, bin_minutes=7)


@pytest.mark.parametrize("start,dur,expected", [
    (datetime(2021, 7, 4, 13, 30), 45, (45, 7, 13)),
    (datetime(2020, 1, 1, 0, 0), 15, (15, 1, 0)),
    (datetime(2023, 12, 31, 23, 45), 7200, (7200, 12, 23)),
])
def test_outage_features(start, dur, expected):
    rec = OutageRecord("A", start, dur, 1)
    assert tuple(outage_features(rec)) == expected
