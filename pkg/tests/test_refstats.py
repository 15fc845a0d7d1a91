import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seatcheck.errors import DomainError, SchemaError
from seatcheck.refstats import (
    DEFAULT_SCHEMAS,
    CellStats,
    DatasetKind,
    DatasetSchema,
    Gender,
    RawRecord,
    ReferenceTable,
    RowError,
    build_reference_table,
    derive_weight_from_bmi,
    filter_and_merge,
    gender_gap_percent,
    ingest_dataset,
    table_from_csv,
    table_to_csv,
    table_to_json,
)

from dataset_fixtures import CELL_TARGETS, build_dataset_files

GYM = DEFAULT_SCHEMAS[DatasetKind.GYM_MEMBERS]
MEDICAL = DEFAULT_SCHEMAS[DatasetKind.MEDICAL_COST]


# -- ingest -----------------------------------------------------------------


def test_ingest_gym_row_maps_directly():
    text = "Age,Gender,Weight (kg),Height (m)\n20,Male,94.0,1.80\n"
    records = ingest_dataset(text, GYM)
    assert records == [RawRecord(20, Gender.MALE, weight_kg=94.0)]


def test_ingest_medical_row_carries_bmi():
    text = "age,sex,bmi,children,smoker,region\n19,female,27.9,0,yes,southwest\n"
    records = ingest_dataset(text, MEDICAL)
    assert records == [RawRecord(19, Gender.FEMALE, bmi=27.9)]


def test_ingest_header_only_gives_empty_list():
    assert ingest_dataset("Age,Gender,Weight (kg)\n", GYM) == []


def test_ingest_missing_column_is_schema_error():
    with pytest.raises(SchemaError):
        ingest_dataset("Age,Sex,Weight (kg)\n20,Male,80\n", GYM)


def test_ingest_custom_gender_tokens():
    schema = DatasetSchema(
        DatasetKind.GYM_MEMBERS,
        "Age",
        "Gender",
        "Weight (kg)",
        carries_bmi=False,
        gender_tokens={"e": Gender.MALE, "k": Gender.FEMALE},
    )
    records = ingest_dataset("Age,Gender,Weight (kg)\n20,E,80\n21,k,60\n", schema)
    assert [r.gender for r in records] == [Gender.MALE, Gender.FEMALE]
    # The override replaces the default vocabulary entirely.
    errors: list[RowError] = []
    ingest_dataset("Age,Gender,Weight (kg)\n20,Male,80\n", schema, errors)
    assert len(errors) == 1


def test_ingest_bad_cells_are_skipped_and_counted():
    text = (
        "Age,Gender,Weight (kg)\n"
        "20,Male,80.0\n"
        "twenty,Male,81.0\n"
        "21,Martian,82.0\n"
        "22,Female,\n"
    )
    errors: list[RowError] = []
    records = ingest_dataset(text, GYM, errors)
    assert len(records) == 1
    assert [e.row_index for e in errors] == [1, 2, 3]


# -- bmi derivation ------------------------------------------------------------


def test_bmi_derivation_hand_values():
    assert derive_weight_from_bmi(25.0, Gender.MALE) == pytest.approx(72.25)
    assert derive_weight_from_bmi(25.0, Gender.FEMALE) == pytest.approx(64.00)


def test_bmi_rejects_non_positive():
    with pytest.raises(DomainError):
        derive_weight_from_bmi(0.0, Gender.MALE)
    with pytest.raises(DomainError):
        derive_weight_from_bmi(-3.0, Gender.FEMALE)


@given(st.floats(min_value=0.01, max_value=200.0))
def test_bmi_is_linear(bmi):
    for gender in Gender:
        assert derive_weight_from_bmi(2 * bmi, gender) == pytest.approx(
            2 * derive_weight_from_bmi(bmi, gender)
        )


@given(
    st.floats(min_value=0.01, max_value=200.0),
    st.floats(min_value=1e-6, max_value=10.0),
)
def test_bmi_strictly_monotone(bmi, delta):
    for gender in Gender:
        assert derive_weight_from_bmi(bmi + delta, gender) > derive_weight_from_bmi(
            bmi, gender
        )


# -- filtering ------------------------------------------------------------------


def test_filter_age_bounds():
    batch = [
        RawRecord(17, Gender.MALE, weight_kg=70.0),
        RawRecord(18, Gender.MALE, weight_kg=70.0),
        RawRecord(22, Gender.MALE, weight_kg=70.0),
        RawRecord(23, Gender.MALE, weight_kg=70.0),
    ]
    kept = filter_and_merge([batch])
    assert [r.age for r in kept] == [18, 22]


def test_filter_weight_boundary_retains_exactly_40():
    batch = [
        RawRecord(20, Gender.FEMALE, weight_kg=39.9),
        RawRecord(20, Gender.FEMALE, weight_kg=40.0),
    ]
    kept = filter_and_merge([batch])
    assert [r.weight_kg for r in kept] == [40.0]


def test_filter_resolves_bmi_to_weight():
    batch = [RawRecord(22, Gender.MALE, bmi=20.0)]
    kept = filter_and_merge([batch])
    assert len(kept) == 1
    assert kept[0].weight_kg == pytest.approx(57.8)
    assert kept[0].bmi is None


records_strategy = st.lists(
    st.builds(
        RawRecord,
        age=st.integers(min_value=0, max_value=60),
        gender=st.sampled_from(list(Gender)),
        weight_kg=st.one_of(st.none(), st.floats(min_value=1.0, max_value=200.0)),
        bmi=st.floats(min_value=5.0, max_value=60.0),
    ),
    max_size=60,
)


@given(records_strategy)
def test_filter_is_idempotent(batch):
    once = filter_and_merge([batch])
    twice = filter_and_merge([once])
    assert once == twice


@given(records_strategy)
def test_filter_output_satisfies_constraints(batch):
    for record in filter_and_merge([batch]):
        assert 18 <= record.age <= 22
        assert record.weight_kg is not None and record.weight_kg >= 40.0


# -- aggregation -----------------------------------------------------------------


def test_two_point_cell():
    sample = [
        RawRecord(18, Gender.MALE, weight_kg=80.0),
        RawRecord(18, Gender.MALE, weight_kg=90.0),
    ]
    table = build_reference_table(sample)
    cell = table.cell(18, Gender.MALE)
    assert cell is not None
    assert cell.mean_kg == pytest.approx(85.0)
    assert cell.std_kg == pytest.approx(5.0)
    assert cell.count == 2


def test_empty_cells_are_absent():
    table = build_reference_table([RawRecord(18, Gender.MALE, weight_kg=80.0)])
    assert table.cell(18, Gender.FEMALE) is None
    assert table.cell(19, Gender.MALE) is None


def oracle_table(sample):
    """Independent re-aggregation using the statistics module."""
    cells = {}
    for record in sample:
        cells.setdefault((record.age, record.gender), []).append(record.weight_kg)
    out = {}
    for key, weights in cells.items():
        out[key] = (
            statistics.fmean(weights),
            statistics.pstdev(weights),
            len(weights),
        )
    return out


@settings(max_examples=60)
@given(
    st.lists(
        st.builds(
            RawRecord,
            age=st.integers(min_value=18, max_value=22),
            gender=st.sampled_from(list(Gender)),
            weight_kg=st.floats(min_value=40.0, max_value=160.0),
        ),
        min_size=1,
        max_size=1000,
    )
)
def test_aggregation_matches_bruteforce_oracle(sample):
    table = build_reference_table(sample)
    expected = oracle_table(sample)
    assert set(table.entries) == set(expected)
    for key, (mean, std, count) in expected.items():
        cell = table.entries[key]
        assert cell.count == count
        assert math.isclose(cell.mean_kg, mean, abs_tol=1e-9)
        assert math.isclose(cell.std_kg, std, abs_tol=1e-9)
    assert table.total_count == len(sample)
    assert table.total_count == table.male_count + table.female_count


# -- gender gap -------------------------------------------------------------------


def test_gender_gap_on_published_means():
    table = ReferenceTable()
    table.entries[(18, Gender.MALE)] = CellStats(85.41, 0.0, 10)
    table.entries[(18, Gender.FEMALE)] = CellStats(76.96, 0.0, 10)
    table.entries[(20, Gender.MALE)] = CellStats(94.59, 0.0, 10)
    table.entries[(20, Gender.FEMALE)] = CellStats(70.20, 0.0, 10)
    assert gender_gap_percent(table, 18) == pytest.approx(11.0, abs=1.0)
    assert gender_gap_percent(table, 20) == pytest.approx(35.0, abs=1.0)


def test_gender_gap_equal_means_is_zero():
    table = ReferenceTable()
    table.entries[(19, Gender.MALE)] = CellStats(70.0, 1.0, 5)
    table.entries[(19, Gender.FEMALE)] = CellStats(70.0, 1.0, 5)
    assert gender_gap_percent(table, 19) == 0.0


def test_gender_gap_missing_cell_is_domain_error():
    table = build_reference_table([RawRecord(18, Gender.MALE, weight_kg=80.0)])
    with pytest.raises(DomainError):
        gender_gap_percent(table, 18)


# -- full pipeline over synthetic sources ----------------------------------------


def test_pipeline_over_synthetic_three_source_fixture():
    files = build_dataset_files()
    schemas = {
        "gym_members.csv": DEFAULT_SCHEMAS[DatasetKind.GYM_MEMBERS],
        "obesity.csv": DEFAULT_SCHEMAS[DatasetKind.OBESITY_CLASSIFICATION],
        "medical_cost.csv": DEFAULT_SCHEMAS[DatasetKind.MEDICAL_COST],
    }
    batches = []
    for name, text in files.items():
        errors: list[RowError] = []
        batches.append(ingest_dataset(text, schemas[name], errors))
    sample = filter_and_merge(batches)
    table = build_reference_table(sample)

    assert table.total_count == 350
    assert table.male_count == 180
    assert table.female_count == 170
    for (age, gender), (mean, count) in CELL_TARGETS.items():
        cell = table.cell(age, gender)
        assert cell is not None
        assert cell.count == count
        assert cell.mean_kg == pytest.approx(mean, abs=1e-9)


def test_table_csv_round_trip():
    files = build_dataset_files()
    batches = [
        ingest_dataset(files["gym_members.csv"], DEFAULT_SCHEMAS[DatasetKind.GYM_MEMBERS])
    ]
    table = build_reference_table(filter_and_merge(batches))
    text = table_to_csv(table)
    assert text.startswith("age,gender,mean_kg,std_kg,count\n")
    loaded = table_from_csv(text)
    assert set(loaded.entries) == set(table.entries)
    for key, cell in table.entries.items():
        assert loaded.entries[key].count == cell.count
        # CSV stores kg to 2 decimals.
        assert loaded.entries[key].mean_kg == pytest.approx(cell.mean_kg, abs=0.005)
    assert loaded.total_count == table.total_count


def test_table_json_shape():
    table = build_reference_table([RawRecord(18, Gender.MALE, weight_kg=80.0)])
    payload = table_to_json(table)
    assert payload["total_count"] == 1
    assert payload["cells"][0]["age"] == 18
    assert payload["cells"][0]["gender"] == "Male"
