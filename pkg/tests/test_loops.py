import random
from fractions import Fraction

import mpmath as mp
import pytest

from bmvtrace.errors import DomainError
from bmvtrace.exactnum import GaussianRational, Log2Multiple
from bmvtrace.linalg import eigen_decompose
from bmvtrace.loops import (
    GOLDEN_MODIFIED_VALUE,
    GOLDEN_NEGATIVE_VALUE,
    IntegrandPoint,
    LoopSpec,
    VectorFamily,
    canonical_loop_value,
    fan_family,
    loop_bound,
    loop_min_search,
    loop_value,
    reference_example,
    reference_example_value,
    third_derivative_value,
    triple_integrand,
)

from conftest import random_float_hermitian


def test_loop_value_trivial_cases():
    fam = VectorFamily.exact([(1, 0), (0, 1)])
    assert loop_value(fam, [0, 0, 0]) == GaussianRational.of(1)
    assert loop_value(fam, [0, 1]) == GaussianRational.of(0)


def test_loop_value_fan_angles():
    fam = fan_family(3, 192)
    val = loop_value(fam, LoopSpec((0, 1, 2)), 192)
    with mp.workprec(220):
        assert abs(val.real + mp.mpf(1) / 8) < mp.mpf(2) ** -150


def test_loop_bound_values():
    assert float(loop_bound(2, 128)) == pytest.approx(0.0, abs=1e-30)
    with mp.workprec(160):
        assert abs(loop_bound(3, 128) + mp.mpf(1) / 8) < mp.mpf(2) ** -100
        assert abs(loop_bound(4, 128) + mp.mpf(1) / 4) < mp.mpf(2) ** -100
    # slow approach to -1
    vals = [float(loop_bound(p, 64)) for p in (6, 12, 24, 48)]
    assert all(vals[i + 1] < vals[i] for i in range(3))
    assert vals[-1] > -1


def test_fan_family_unit_norm_and_attainment():
    for p in (3, 4, 7):
        fam = fan_family(p, 192)
        with mp.workprec(220):
            for v in fam.vectors:
                norm = mp.fsum(abs(x) ** 2 for x in v)
                assert abs(norm - 1) < mp.mpf(2) ** -150
            gap = canonical_loop_value(fam, 192).real - loop_bound(p, 192)
            assert abs(gap) < mp.mpf(2) ** -140


def test_loop_homogeneity_degree_two():
    fam = VectorFamily.exact([(2, 1), (1, 3), (0, 5)])
    scaled_rows = [(4, 2), (1, 3), (0, 5)]  # first vector doubled
    fam2 = VectorFamily.exact(scaled_rows)
    assert canonical_loop_value(fam2) == 4 * canonical_loop_value(fam)


def test_loop_unitary_invariance(rng):
    fam = VectorFamily.from_float([[1.0, 0.5, 0.0], [0.0, 1.0, -0.25], [0.5, 0.5, 1.0]], 192)
    M = random_float_hermitian(random.Random(5), 3)
    _, U = eigen_decompose(M, 192)
    with mp.workprec(220):
        rotated = VectorFamily.from_float(
            [
                [sum(U[k][j] * fam.vectors[i][k] for k in range(3)) for j in range(3)]
                for i in range(3)
            ],
            192,
        )
    with mp.workprec(220):
        a = canonical_loop_value(fam, 192)
        b = canonical_loop_value(rotated, 192)
        assert abs(a - b) < mp.mpf(2) ** -150


def test_loop_min_search_small():
    for p, d in ((3, 3), (4, 2)):
        fam, val = loop_min_search(p, d, 30, 11, 192)
        bound = loop_bound(p, 192)
        with mp.workprec(220):
            assert val >= bound - mp.mpf(10) ** -12
            assert val - bound < mp.mpf(10) ** -9


def test_loop_min_search_p2_nonnegative():
    _, val = loop_min_search(2, 3, 10, 3, 128)
    assert val >= -mp.mpf(10) ** -12


def test_integrand_point_validation():
    IntegrandPoint(1, 1, Fraction(1, 3))
    with pytest.raises(DomainError):
        IntegrandPoint(Fraction(1, 2), 1, 0)
    with pytest.raises(DomainError):
        IntegrandPoint(1, 1, 2)


def test_triple_integrand_single_unit_vector():
    fam = VectorFamily.exact([(1,)])
    for point in (IntegrandPoint(1, 1, Fraction(1, 3)), IntegrandPoint(Fraction(1, 2), Fraction(1, 4), 0)):
        out = triple_integrand(fam, [Log2Multiple(Fraction(0))], point)
        assert out.exact and out.value == 1


def test_triple_integrand_golden_values():
    assert reference_example_value("original") == GOLDEN_NEGATIVE_VALUE
    assert reference_example_value("modified") == GOLDEN_MODIFIED_VALUE


def test_triple_integrand_zero_multipliers_is_trace_of_cube(rng):
    rows = [(1, 2, 0), (0, 1, 1), (2, 0, 1)]
    fam = VectorFamily.exact(rows)
    point = IntegrandPoint(Fraction(3, 4), Fraction(1, 2), Fraction(1, 4))
    out = triple_integrand(fam, [0, 0, 0], point)
    # equals tr((a a*)^3) >= 0
    G = [[fam.inner(i, j).re for j in range(3)] for i in range(3)]
    want = sum(
        G[a][b] * G[b][c] * G[c][a] for a in range(3) for b in range(3) for c in range(3)
    )
    assert out.exact and out.value == want and out.value >= 0


def test_triple_integrand_mode_degrades_to_float():
    fam = VectorFamily.exact([(1, 0), (0, 1)])
    point = IntegrandPoint(1, Fraction(1, 2), 0)  # weights (1/2, 1/2, ...) not integral
    out = triple_integrand(fam, [Log2Multiple(Fraction(1)), Log2Multiple(Fraction(0))], point, 128)
    assert not out.exact
    assert isinstance(out.value, mp.mpf)


def test_triple_integrand_exact_with_negative_exponents():
    fam = VectorFamily.exact([(1,)])
    point = IntegrandPoint(1, 1, 0)
    out = triple_integrand(fam, [Log2Multiple(Fraction(-3))], point)
    assert out.exact and out.value == Fraction(1, 8)


def test_triple_integrand_rejects_complex_family():
    fam = VectorFamily.exact([(GaussianRational(Fraction(0), Fraction(1)),)])
    with pytest.raises(DomainError):
        triple_integrand(fam, [0], IntegrandPoint(1, 1, 1))


def test_third_derivative_scalar_consistency():
    # n=1: -(1/6) d^3/dt^3 exp(lam - t*h11) = h11^3 e^lam / 6
    fam = VectorFamily.exact([(2,)])  # h11 = 4
    lam = [Log2Multiple(Fraction(3))]
    out = third_derivative_value(fam, lam, 192, quad_points=16)
    with mp.workprec(220):
        want = mp.mpf(64) * mp.exp(3 * mp.ln(2)) / 6
        assert abs(out.closed_form - want) < mp.mpf(2) ** -140
        assert out.gap < mp.mpf(10) ** -30


def test_third_derivative_zero_family():
    fam = VectorFamily.exact([(0, 0), (0, 0)])
    out = third_derivative_value(fam, [1, 2], 128, quad_points=8)
    assert abs(out.closed_form) < mp.mpf(2) ** -100
    assert abs(out.quadrature) < mp.mpf(2) ** -100


def test_third_derivative_two_route_agreement():
    fam = VectorFamily.exact([(1, 0), (1, 1)])
    out = third_derivative_value(fam, [1, 0], 192, quad_points=16)
    assert out.gap < mp.mpf(10) ** -35


def test_third_derivative_reference_family_two_routes():
    family, lam, _ = reference_example("original")
    # scale down: the reference eigenvalues are huge, use modest multipliers
    small = [Log2Multiple(Fraction(q, 23)) for q in (69, 0, 0)]
    out = third_derivative_value(family, small, 192, quad_points=20)
    rel = out.gap / (1 + abs(out.closed_form))
    assert rel < mp.mpf(10) ** -25


def test_loop_spec_validation():
    with pytest.raises(DomainError):
        LoopSpec(())
    fam = VectorFamily.exact([(1,)])
    with pytest.raises(DomainError):
        loop_value(fam, [0, 1])
