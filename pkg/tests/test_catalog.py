import dataclasses

import pytest
import yaml

from bpsplan.catalog import (CatalogError, annualize,
                             diesel_baseline_emission_intensity,
                             emission_intensity, load_catalog,
                             load_reference_catalog)


def test_annualize_straight_line_limit():
    assert annualize(100, 0.0, 10) == pytest.approx(10.0)


def test_annualize_crf_closed_form():
    # 1000 * 0.1*1.1^20 / (1.1^20 - 1)
    assert annualize(1000, 0.10, 20) == pytest.approx(117.46, abs=0.005)


def test_annualize_zero_capex():
    assert annualize(0.0, 0.07, 15) == 0.0


def test_annualize_monotonicity():
    rates = [0.0, 0.02, 0.05, 0.1, 0.2]
    vals = [annualize(1000, r, 15) for r in rates]
    assert all(vals[i] < vals[i + 1] for i in range(len(vals) - 1))
    lifetimes = [1, 2, 5, 10, 30]
    vals = [annualize(1000, 0.08, lt) for lt in lifetimes]
    assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))


def test_annualize_rejects_zero_lifetime():
    with pytest.raises(CatalogError):
        annualize(100, 0.1, 0)


def test_reference_catalog_loads(catalog):
    assert len(catalog.fuel_techs) == 7
    assert len(catalog.batteries) == 2
    assert catalog.pv is not None
    assert catalog.baseline_tech == "diesel"
    assert len(catalog.fuel_techs) + len(catalog.batteries) + 1 == 10


def test_diesel_baseline_intensity(catalog):
    assert diesel_baseline_emission_intensity(catalog) == pytest.approx(
        1.244, abs=1e-12)
    assert diesel_baseline_emission_intensity() == pytest.approx(1.244)


def test_emission_intensity_ratio(catalog):
    diesel = catalog.fuel_techs["diesel"]
    zero = dataclasses.replace(diesel, fuel_emission_factor=0.0)
    assert emission_intensity(zero) == 0.0
    half = dataclasses.replace(diesel, fuel_emission_factor=1.0,
                               efficiency=0.5)
    assert emission_intensity(half) == pytest.approx(2.0)


def test_replacement_rate_is_inverse_shelf_life(catalog):
    for tech in catalog.fuel_techs.values():
        assert tech.replace_rate == pytest.approx(1.0 / tech.shelf_life_years)


def test_catalog_rejects_bad_efficiency(tmp_path, catalog):
    doc = dict(catalog.raw)
    doc["fuel_techs"] = [dict(doc["fuel_techs"][0], efficiency=1.2)]
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(CatalogError, match="efficiency"):
        load_catalog(path)


def test_catalog_rejects_empty(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text(yaml.safe_dump({"schema_version": 1, "fuel_techs": [],
                                    "batteries": [], "baseline_tech": "x"}))
    with pytest.raises(CatalogError, match="no technologies"):
        load_catalog(path)


def test_catalog_rejects_duplicate_names(tmp_path, catalog):
    doc = dict(catalog.raw)
    doc["fuel_techs"] = list(doc["fuel_techs"]) + [dict(doc["fuel_techs"][0])]
    path = tmp_path / "dup.yaml"
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(CatalogError, match="duplicate"):
        load_catalog(path)


def test_catalog_rejects_missing_baseline(tmp_path, catalog):
    doc = dict(catalog.raw)
    doc["baseline_tech"] = "unobtainium"
    path = tmp_path / "nobase.yaml"
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(CatalogError, match="baseline"):
        load_catalog(path)


def test_catalog_rejects_wrong_schema_version(tmp_path, catalog):
    doc = dict(catalog.raw)
    doc["schema_version"] = 99
    path = tmp_path / "v99.yaml"
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(CatalogError, match="schema_version"):
        load_catalog(path)


def test_subset_and_hash(catalog):
    sub = catalog.subset(fuel_names=["diesel", "ammonia"],
                         battery_names=["ironair"], include_pv=False)
    assert set(sub.fuel_techs) == {"diesel", "ammonia"}
    assert sub.pv is None
    assert sub.baseline_tech == "diesel"
    assert catalog.content_hash() == load_reference_catalog().content_hash()


def test_secondary_battery_not_purchasable_by_construction(catalog):
    # purchasable is a FuelTech concept; batteries have no such field
    assert not hasattr(catalog.batteries["ironair"], "purchasable")


def test_replacement_cost_coefficient(catalog):
    # the storage column's recurring cost includes replace_rate * fuel_price
    for tech in catalog.fuel_techs.values():
        coeff = tech.replace_rate * tech.fuel_price
        assert coeff > 0
        assert coeff == pytest.approx(tech.fuel_price / tech.shelf_life_years)
