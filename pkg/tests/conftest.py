from datetime import datetime

import pytest

from seatcheck.refstats import CellStats, Gender, ReferenceTable
from seatcheck.roster import Course, RosterStore, Student, parse_hhmm

# Published cohort means (kg) per (age, gender) for the 18-22 group; fixture
# data shared by band/pool tests.
COHORT_MEANS_KG = {
    (18, Gender.MALE): 85.41,
    (19, Gender.MALE): 82.76,
    (20, Gender.MALE): 94.59,
    (21, Gender.MALE): 85.44,
    (22, Gender.MALE): 92.52,
    (18, Gender.FEMALE): 76.96,
    (19, Gender.FEMALE): 69.37,
    (20, Gender.FEMALE): 70.20,
    (21, Gender.FEMALE): 66.86,
    (22, Gender.FEMALE): 65.11,
}

# Monday 09:05, inside the CS101 slot below.
IN_SLOT = datetime(2026, 3, 2, 9, 5, 0)
OUT_OF_SLOT = datetime(2026, 3, 2, 10, 30, 0)

ADA = "04A1B2C3"
BORA = "04D4E5F6"
CEM = "04AABBCC"
DEFNE = "0499AA11"
UNKNOWN = "99999999"


def make_roster() -> RosterStore:
    store = RosterStore()
    store.add_student(Student(ADA, "Ada", "Kaya", "MIS-2", 20, Gender.FEMALE))
    store.add_student(Student(BORA, "Bora", "Demir", "MIS-2", 20, Gender.MALE))
    store.add_student(Student(CEM, "Cem", "Aksoy", "MIS-3", 30, Gender.MALE))
    store.add_student(Student(DEFNE, "Defne", "Arslan", "MIS-1", 19, Gender.FEMALE))
    store.add_course(
        Course("CS101", "Software Engineering", "MON", parse_hhmm("09:00"), parse_hhmm("10:00"))
    )
    store.add_course(
        Course("CS102", "Data Structures", "TUE", parse_hhmm("13:00"), parse_hhmm("15:00"))
    )
    store.enroll("CS101", ADA)
    store.enroll("CS101", BORA)
    store.enroll("CS101", CEM)
    store.enroll("CS102", ADA)
    return store


def make_table() -> ReferenceTable:
    table = ReferenceTable()
    specs = {
        (20, Gender.MALE): (94.59, 12.0, 25),
        (20, Gender.FEMALE): (70.20, 8.0, 30),
        (19, Gender.FEMALE): (69.37, 6.0, 20),
        (19, Gender.MALE): (82.76, 10.0, 22),
    }
    for (age, gender), (mean, std, count) in specs.items():
        table.entries[(age, gender)] = CellStats(mean, std, count)
        table.total_count += count
        if gender is Gender.MALE:
            table.male_count += count
        else:
            table.female_count += count
    return table


def full_mean_table(std: float = 10.0, count: int = 35) -> ReferenceTable:
    """All ten cohort cells with a uniform sigma, for pool arithmetic."""
    table = ReferenceTable()
    for (age, gender), mean in COHORT_MEANS_KG.items():
        table.entries[(age, gender)] = CellStats(mean, std, count)
        table.total_count += count
        if gender is Gender.MALE:
            table.male_count += count
        else:
            table.female_count += count
    return table


@pytest.fixture
def roster() -> RosterStore:
    return make_roster()


@pytest.fixture
def table() -> ReferenceTable:
    return make_table()
