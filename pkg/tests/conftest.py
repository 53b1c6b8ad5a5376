import random
from fractions import Fraction

import pytest

from bmvtrace.exactnum import GaussianRational
from bmvtrace.linalg import HermitianMatrix


def random_exact_vector_rows(rng, n, d, lo=-6, hi=6, complex_entries=False):
    rows = []
    for _ in range(n):
        row = []
        for _ in range(d):
            re = Fraction(rng.randint(lo, hi))
            im = Fraction(rng.randint(lo, hi)) if complex_entries else Fraction(0)
            row.append(GaussianRational(re, im))
        rows.append(row)
    return rows


def random_exact_psd(rng, n, complex_entries=False):
    """h = a a* for a random exact matrix a: psd by construction."""
    a = random_exact_vector_rows(rng, n, n, complex_entries=complex_entries)
    rows = [
        [
            sum((a[i][k] * a[j][k].conjugate() for k in range(n)), GaussianRational.of(0))
            for j in range(n)
        ]
        for i in range(n)
    ]
    return HermitianMatrix.exact(rows)


def random_positive_rationals(rng, n, max_num=12, max_den=6):
    return [
        Fraction(rng.randint(1, max_num), rng.randint(1, max_den)) for _ in range(n)
    ]


def random_float_hermitian(rng, n, scale=1.0):
    rows = [[0.0] * n for _ in range(n)]
    for i in range(n):
        rows[i][i] = rng.uniform(-scale, scale)
        for j in range(i + 1, n):
            re = rng.uniform(-scale, scale)
            im = rng.uniform(-scale, scale)
            rows[i][j] = complex(re, im)
            rows[j][i] = complex(re, -im)
    return HermitianMatrix.from_float(rows)


@pytest.fixture
def rng():
    return random.Random(20240811)
