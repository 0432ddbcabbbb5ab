from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from nspforge import io as nio
from nspforge.model import NspInstance, ShiftPattern, WcspInstance

DATA = Path(__file__).parent / "data"


def read(name):
    return (DATA / name).read_text(encoding="utf-8")


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def day_db():
    return nio.parse_transactions(read("day_transactions.csv"))


@pytest.fixture
def quantity_tables():
    return nio.parse_quantity_table(read("shift1_quantities.csv"))


def two_nurse_instance(min_shifts=2):
    """Two nurses, one day of four shifts; domain 1001, 0100, 0110 with weights 2, 1, 4."""
    domain = tuple(ShiftPattern.from_string(t, 4) for t in ("1001", "0100", "0110"))
    inst = NspInstance(n=2, days=1, shifts_per_day=4, cost=[[2, 1, 4], [2, 1, 4]],
                       q=1, p=2, h=4, b=1, y=0, min_shifts=min_shifts)
    return WcspInstance(inst, domain)


@pytest.fixture
def two_nurse():
    return two_nurse_instance()


def random_schedule_matrix(rng, n, days, shifts):
    return rng.integers(0, 2, size=(n, days * shifts)).astype(np.int8)


def frac(x):
    return Fraction(x)
