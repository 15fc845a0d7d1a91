"""Demographic reference statistics.

Ingests open demographic CSV datasets, cleans them (age 18-22, weight >= 40 kg,
BMI-only sources converted under a fixed-height assumption), and aggregates a
per-(age, gender) weight reference table: mean, population sigma, and count.
The table parameterizes every physical-presence check downstream.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Sequence

from .errors import DomainError, SchemaError

MIN_AGE = 18
MAX_AGE = 22
MIN_WEIGHT_KG = 40.0

# Fixed-height assumption (meters) used when a source provides BMI instead of
# weight: weight = bmi * height^2.
HEIGHT_M = {"Male": 1.70, "Female": 1.60}


class Gender(str, Enum):
    MALE = "Male"
    FEMALE = "Female"


# Accepted gender spellings, matched case-insensitively.
DEFAULT_GENDER_TOKENS = {
    "male": Gender.MALE,
    "m": Gender.MALE,
    "erkek": Gender.MALE,
    "female": Gender.FEMALE,
    "f": Gender.FEMALE,
    "kadin": Gender.FEMALE,
}


def parse_gender(token: str, mapping: dict[str, Gender] | None = None) -> Gender:
    tokens = mapping if mapping is not None else DEFAULT_GENDER_TOKENS
    try:
        return tokens[token.strip().lower()]
    except KeyError:
        raise DomainError(f"unrecognized gender token: {token!r}") from None


@dataclass(frozen=True)
class RawRecord:
    """One cleaned input row: age, gender, and weight or BMI (at least one)."""

    age: int
    gender: Gender
    weight_kg: float | None = None
    bmi: float | None = None

    def __post_init__(self) -> None:
        if self.weight_kg is None and self.bmi is None:
            raise DomainError("record needs a weight or a bmi")
        if self.age < 0:
            raise DomainError(f"negative age: {self.age}")
        if self.weight_kg is not None and self.weight_kg <= 0:
            raise DomainError(f"non-positive weight: {self.weight_kg}")
        if self.bmi is not None and self.bmi <= 0:
            raise DomainError(f"non-positive bmi: {self.bmi}")


class DatasetKind(str, Enum):
    GYM_MEMBERS = "GymMembers"
    OBESITY_CLASSIFICATION = "ObesityClassification"
    MEDICAL_COST = "MedicalCost"


@dataclass(frozen=True)
class DatasetSchema:
    """Column mapping for one dataset source.

    ``value_column`` holds weight when ``carries_bmi`` is false, BMI otherwise.
    ``gender_tokens`` overrides the default spelling map when a source uses
    its own vocabulary.
    """

    kind: DatasetKind
    age_column: str
    gender_column: str
    value_column: str
    carries_bmi: bool
    gender_tokens: dict[str, Gender] | None = None


DEFAULT_SCHEMAS = {
    DatasetKind.GYM_MEMBERS: DatasetSchema(
        DatasetKind.GYM_MEMBERS, "Age", "Gender", "Weight (kg)", carries_bmi=False
    ),
    DatasetKind.OBESITY_CLASSIFICATION: DatasetSchema(
        DatasetKind.OBESITY_CLASSIFICATION, "Age", "Gender", "Weight", carries_bmi=False
    ),
    DatasetKind.MEDICAL_COST: DatasetSchema(
        DatasetKind.MEDICAL_COST, "age", "sex", "bmi", carries_bmi=True
    ),
}


@dataclass(frozen=True)
class RowError:
    row_index: int
    reason: str


def ingest_dataset(
    source: IO[str] | IO[bytes] | str | bytes,
    schema: DatasetSchema,
    row_errors: list[RowError] | None = None,
) -> list[RawRecord]:
    """Read one CSV source into RawRecords via the schema's column mapping.

    Unmapped columns are dropped. Rows with an unparseable mapped cell are
    skipped; when ``row_errors`` is given, each skip is recorded with its
    0-based data-row index. A missing mapped column raises SchemaError.
    """
    text = _as_text(source)
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in (schema.age_column, schema.gender_column, schema.value_column):
        if column not in header:
            raise SchemaError(
                f"{schema.kind.value}: column {column!r} missing from header {header}"
            )

    records: list[RawRecord] = []
    for index, row in enumerate(reader):
        try:
            age = int(float(row[schema.age_column]))
            gender = parse_gender(row[schema.gender_column], schema.gender_tokens)
            value = float(row[schema.value_column])
            if schema.carries_bmi:
                record = RawRecord(age=age, gender=gender, bmi=value)
            else:
                record = RawRecord(age=age, gender=gender, weight_kg=value)
        except (ValueError, TypeError, DomainError) as exc:
            if row_errors is not None:
                row_errors.append(RowError(index, str(exc)))
            continue
        records.append(record)
    return records


def _as_text(source: IO[str] | IO[bytes] | str | bytes) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def derive_weight_from_bmi(bmi: float, gender: Gender) -> float:
    """Convert BMI to kilograms under the fixed-height assumption."""
    if bmi <= 0:
        raise DomainError(f"non-positive bmi: {bmi}")
    height = HEIGHT_M[gender.value]
    return bmi * height * height


def resolve_weight(record: RawRecord) -> float:
    """The record's weight in kg, deriving from BMI when needed."""
    if record.weight_kg is not None:
        return record.weight_kg
    assert record.bmi is not None
    return derive_weight_from_bmi(record.bmi, record.gender)


def filter_and_merge(batches: Iterable[Sequence[RawRecord]]) -> list[RawRecord]:
    """Merge batches in order, resolve BMI to weight, keep 18-22 and >= 40 kg."""
    kept: list[RawRecord] = []
    for batch in batches:
        for record in batch:
            weight = resolve_weight(record)
            if MIN_AGE <= record.age <= MAX_AGE and weight >= MIN_WEIGHT_KG:
                kept.append(RawRecord(record.age, record.gender, weight_kg=weight))
    return kept


@dataclass(frozen=True)
class CellStats:
    mean_kg: float
    std_kg: float
    count: int


@dataclass
class ReferenceTable:
    """Per-(age, gender) weight statistics over the filtered sample."""

    entries: dict[tuple[int, Gender], CellStats] = field(default_factory=dict)
    total_count: int = 0
    male_count: int = 0
    female_count: int = 0

    def cell(self, age: int, gender: Gender) -> CellStats | None:
        return self.entries.get((age, gender))


def build_reference_table(sample: Sequence[RawRecord]) -> ReferenceTable:
    """Aggregate mean / population sigma / count per (age, gender) cell.

    Expects already-filtered records (weight resolved). Cells with no records
    are absent from the map rather than zero-filled.
    """
    groups: dict[tuple[int, Gender], list[float]] = {}
    for record in sample:
        if record.weight_kg is None:
            raise DomainError("unresolved record: run filter_and_merge first")
        groups.setdefault((record.age, record.gender), []).append(record.weight_kg)

    table = ReferenceTable()
    for key in sorted(groups, key=lambda k: (k[0], k[1].value)):
        weights = groups[key]
        n = len(weights)
        mean = sum(weights) / n
        variance = sum((w - mean) ** 2 for w in weights) / n
        table.entries[key] = CellStats(mean_kg=mean, std_kg=math.sqrt(variance), count=n)
        table.total_count += n
        if key[1] is Gender.MALE:
            table.male_count += n
        else:
            table.female_count += n
    return table


def gender_gap_percent(table: ReferenceTable, age: int) -> float:
    """How much heavier the male mean is than the female mean, in percent."""
    male = table.cell(age, Gender.MALE)
    female = table.cell(age, Gender.FEMALE)
    if male is None or female is None:
        raise DomainError(f"no reference cell for both genders at age {age}")
    return 100.0 * (male.mean_kg - female.mean_kg) / female.mean_kg


TABLE_CSV_HEADER = "age,gender,mean_kg,std_kg,count"


def table_to_csv(table: ReferenceTable) -> str:
    """Serialize as ``age,gender,mean_kg,std_kg,count`` with kg to 2 decimals."""
    lines = [TABLE_CSV_HEADER]
    for (age, gender), stats in sorted(
        table.entries.items(), key=lambda item: (item[0][0], item[0][1].value)
    ):
        lines.append(
            f"{age},{gender.value},{stats.mean_kg:.2f},{stats.std_kg:.2f},{stats.count}"
        )
    return "\n".join(lines) + "\n"


def table_from_csv(text: str) -> ReferenceTable:
    reader = csv.DictReader(io.StringIO(text))
    expected = TABLE_CSV_HEADER.split(",")
    if reader.fieldnames != expected:
        raise SchemaError(f"reference table header must be {expected}")
    table = ReferenceTable()
    for row in reader:
        age = int(row["age"])
        gender = parse_gender(row["gender"])
        stats = CellStats(float(row["mean_kg"]), float(row["std_kg"]), int(row["count"]))
        if (age, gender) in table.entries:
            raise SchemaError(f"duplicate reference cell ({age}, {gender.value})")
        table.entries[(age, gender)] = stats
        table.total_count += stats.count
        if gender is Gender.MALE:
            table.male_count += stats.count
        else:
            table.female_count += stats.count
    return table


def table_to_json(table: ReferenceTable) -> dict:
    return {
        "total_count": table.total_count,
        "male_count": table.male_count,
        "female_count": table.female_count,
        "cells": [
            {
                "age": age,
                "gender": gender.value,
                "mean_kg": stats.mean_kg,
                "std_kg": stats.std_kg,
                "count": stats.count,
            }
            for (age, gender), stats in sorted(
                table.entries.items(), key=lambda item: (item[0][0], item[0][1].value)
            )
        ],
    }
