import csv
import io

import pytest

from fairflip import numerics
from fairflip.estimates import CHECKS, FITTED, HARD, EstimateGrid, validate_estimates


@pytest.fixture(scope="module")
def report():
    return validate_estimates()


def test_default_grid_passes(report):
    assert report.hard_ok and report.ok, [r.as_dict() for r in report.failures()]
    assert {r.proposition for r in report.rows} == set(CHECKS)


def test_constants_are_reported(report):
    assert set(report.constants) == set(FITTED)
    assert all(0 < c < 10 for c in report.constants.values())
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    consts = [r for r in rows if r["proposition"].endswith(":constant")]
    assert len(consts) == len(FITTED)
    assert list(rows[0]) == ["proposition", "params", "lhs", "rhs", "margin", "pass"]


def test_hard_rows_have_nonnegative_margin(report):
    for r in report.rows:
        if r.proposition in HARD:
            assert r.margin >= -1e-12


def test_subset_of_checks_and_reexport():
    rep = numerics.validate_estimates(EstimateGrid(checks=("hoeffding_pm1",), hard_n=(10, 20)))
    assert {r.proposition for r in rep.rows} == {"hoeffding_pm1"}
    assert rep.constants == {}


def test_grid_validation():
    with pytest.raises(ValueError):
        EstimateGrid(checks=("nope",))
    with pytest.raises(ValueError):
        EstimateGrid(hard_n=(1,))


def test_fitted_constant_holds_on_held_out_sizes():
    rep = validate_estimates(EstimateGrid(checks=("tail_normal",), train_n=(50, 80), test_n=(500, 900)))
    held = [r for r in rep.rows if r.proposition == "tail_normal"]
    assert held and all(r.passed for r in held)
