import random
from fractions import Fraction

import mpmath as mp
import pytest

from bmvtrace.errors import DomainError
from bmvtrace.divdiff import Exp, MonotoneRep, Resolvent
from bmvtrace.exactnum import GaussianRational
from bmvtrace.linalg import EigenFrame, HermitianMatrix, eigen_decompose, to_eigenframe
from bmvtrace.traceder import (
    complete_monotonicity_report,
    shift_frame,
    trace_derivative,
    trace_derivative_exp,
    trace_derivative_fd,
)

from conftest import random_exact_psd, random_float_hermitian, random_positive_rationals


def _frame(lams, h_rows):
    return EigenFrame.build([Fraction(x) for x in lams], HermitianMatrix.exact(h_rows))


def test_first_order_is_trace_of_h_fprime():
    frame = _frame([1, 2], [[1, 0], [0, 1]])
    val = trace_derivative(frame, Resolvent(0), 1)
    assert val == Fraction(-5, 4)


def test_zero_perturbation_gives_zero():
    frame = _frame([1, 2, 3], [[0] * 3] * 3)
    for p in range(1, 5):
        assert trace_derivative(frame, Resolvent(1), p) == 0
        assert trace_derivative_exp(frame, -1, p, 128) == 0


def test_resolvent_sign_alternation_random_exact(rng):
    for _ in range(10):
        n = rng.choice([2, 3])
        lams = random_positive_rationals(rng, n)
        h = random_exact_psd(rng, n, complex_entries=rng.random() < 0.5)
        frame = EigenFrame.build(lams, h)
        c = Fraction(rng.randint(0, 3))
        for p in range(1, 5):
            val = trace_derivative(frame, Resolvent(c), p)
            assert (-1) ** p * val >= 0


def test_exp_scalar_case():
    lam = Fraction(2)
    h11 = Fraction(3, 2)
    frame = _frame([lam], [[h11]])
    with mp.workprec(280):
        for p in (1, 2, 3):
            got = trace_derivative_exp(frame, 1, p, 256)
            want = mp.mpf(3) / 2
            want = want**p * mp.exp(2)
            assert abs(got - want) < mp.mpf(2) ** -200


def test_exp_commuting_diagonal_case():
    lams = [Fraction(1), Fraction(2)]
    h = [[Fraction(1, 2), 0], [0, Fraction(3)]]
    frame = _frame(lams, h)
    sigma = -1
    with mp.workprec(280):
        for p in (1, 2, 3, 4):
            got = trace_derivative_exp(frame, sigma, p, 256)
            want = mp.fsum(
                (sigma * mp.mpf(float(h[i][i]))) ** p * mp.exp(sigma * float(lams[i]))
                for i in range(2)
            )
            assert abs(got - want) < mp.mpf(2) ** -200


def test_fd_oracle_matches_exact_first_order():
    A = HermitianMatrix.diagonal([1, 2]).to_float(256)
    B = HermitianMatrix.identity(2).to_float(256)
    got = trace_derivative_fd(A, B, Resolvent(0), 1, 0, 256)
    with mp.workprec(280):
        assert abs(got + mp.mpf(5) / 4) < mp.mpf(10) ** -30


def test_fd_vs_closed_form_random(rng):
    for _ in range(3):
        n = 3
        lams = random_positive_rationals(rng, n)
        h = random_exact_psd(rng, n)
        frame = EigenFrame.build(lams, h)
        A = HermitianMatrix.diagonal(lams)
        f = Resolvent(1)
        for p in (1, 2, 3):
            closed = trace_derivative(frame, f, p)
            fd = trace_derivative_fd(A.to_float(256), h.to_float(256), f, p, 0, 256)
            with mp.workprec(280):
                closed_f = mp.mpf(closed.numerator) / closed.denominator
                rel = abs(fd - closed_f) / max(1, abs(closed_f))
                assert rel < mp.mpf(10) ** -20


def test_fd_zero_b():
    A = HermitianMatrix.diagonal([1, 2]).to_float(128)
    B = HermitianMatrix.zero(2).to_float(128)
    got = trace_derivative_fd(A, B, Resolvent(0), 2, 0, 128)
    assert abs(got) < mp.mpf(2) ** -40


def test_linearity_monotone_rep_exact(rng):
    lams = random_positive_rationals(rng, 3)
    h = random_exact_psd(rng, 3)
    frame = EigenFrame.build(lams, h)
    atoms = [(Fraction(1), Fraction(2)), (Fraction(1, 2), Fraction(1, 3))]
    f = MonotoneRep(Fraction(5), atoms)
    for p in (1, 2, 3):
        whole = trace_derivative(frame, f, p)
        parts = sum(w * trace_derivative(frame, Resolvent(c), p) for c, w in atoms)
        assert whole == parts


def test_index_convention_agreement_exact(rng):
    lams = random_positive_rationals(rng, 3)
    h = random_exact_psd(rng, 3, complex_entries=True)
    frame = EigenFrame.build(lams, h)
    for p in (1, 2, 3, 4):
        a = trace_derivative(frame, Resolvent(0), p, ordering="corollary")
        b = trace_derivative(frame, Resolvent(0), p, ordering="theorem")
        assert a == b


def test_index_convention_agreement_exp(rng):
    lams = random_positive_rationals(rng, 3)
    h = random_exact_psd(rng, 3, complex_entries=True)
    frame = EigenFrame.build(lams, h)
    with mp.workprec(280):
        for p in (1, 2, 3):
            a = trace_derivative_exp(frame, -1, p, 256, ordering="corollary")
            b = trace_derivative_exp(frame, -1, p, 256, ordering="theorem")
            assert abs(a - b) < mp.mpf(2) ** -200


def test_basis_invariance_under_conjugation(rng):
    # same pair expressed in a rotated basis gives the same derivatives
    lams = [Fraction(1), Fraction(2), Fraction(7, 2)]
    B = random_exact_psd(rng, 3).to_float(256)
    A = HermitianMatrix.diagonal(lams).to_float(256)
    frame1 = to_eigenframe(A, B, 256)
    R = random_float_hermitian(random.Random(99), 3)
    _, U = eigen_decompose(R, 256)
    from bmvtrace.linalg import conjugate_by_unitary

    A2 = conjugate_by_unitary(U, A, 256)
    B2 = conjugate_by_unitary(U, B, 256)
    frame2 = to_eigenframe(A2, B2, 256)
    f = Resolvent(1)
    with mp.workprec(280):
        for p in (1, 2, 3):
            v1 = trace_derivative(frame1, f, p, 256)
            v2 = trace_derivative(frame2, f, p, 256)
            assert abs(v1 - v2) < mp.mpf(2) ** -180


def test_shift_frame_trivial_cases():
    frame = _frame([1, 2], [[1, 0], [0, 2]])
    assert shift_frame(frame, 0) is frame
    zero = _frame([1, 2], [[0, 0], [0, 0]])
    assert shift_frame(zero, Fraction(3, 2), 128) is zero


def test_shift_frame_eigenvalue_oracle(rng):
    lams = random_positive_rationals(rng, 3)
    h = random_exact_psd(rng, 3)
    frame = EigenFrame.build(lams, h)
    t0 = Fraction(1, 2)
    shifted = shift_frame(frame, t0, 256)
    # direct decomposition of x + t0 h
    n = 3
    rows = [
        [
            (GaussianRational.of(frame.eigenvalues[i]) if i == j else GaussianRational.of(0))
            + GaussianRational.of(t0) * frame.h_in_basis.entries[i][j]
            for j in range(n)
        ]
        for i in range(n)
    ]
    X = HermitianMatrix.exact(rows)
    direct, _ = eigen_decompose(X, 256)
    with mp.workprec(280):
        for a, b in zip(shifted.eigenvalues, direct):
            assert abs(a - b) < mp.mpf(2) ** -180
    # h spectrum is preserved by the basis change
    lh1, _ = eigen_decompose(frame.h_in_basis.to_float(256), 256)
    lh2, _ = eigen_decompose(shifted.h_in_basis, 256)
    with mp.workprec(280):
        for a, b in zip(lh1, lh2):
            assert abs(a - b) < mp.mpf(2) ** -150


def test_shift_frame_rejects_negative_t0():
    frame = _frame([1], [[1]])
    with pytest.raises(DomainError):
        shift_frame(frame, Fraction(-1))


def test_cm_report_exact_monotone_rep(rng):
    A = HermitianMatrix.diagonal(random_positive_rationals(rng, 3))
    B = random_exact_psd(rng, 3)
    f = MonotoneRep(0, [(Fraction(1), Fraction(1))])
    report = complete_monotonicity_report(A, B, f, 4, [0], 192)
    assert report.alternation_holds()
    assert all(e.certified and e.mode == "exact" for e in report.entries)
    assert len(report.entries) == 4


def test_cm_report_mixed_grid_modes(rng):
    A = HermitianMatrix.diagonal([1, 2])
    B = random_exact_psd(rng, 2)
    f = MonotoneRep(0, [(Fraction(1), Fraction(2))])
    report = complete_monotonicity_report(A, B, f, 3, [0, Fraction(1, 2)], 192)
    by_t0 = {}
    for e in report.entries:
        by_t0.setdefault(e.t0, []).append(e)
    assert all(e.certified for e in by_t0[Fraction(0)])
    assert all(not e.certified for e in by_t0[Fraction(1, 2)])
    assert report.alternation_holds()


def test_cm_report_exp_rank_one(rng):
    xi = [rng.randint(-3, 3) or 1 for _ in range(3)]
    B = HermitianMatrix.exact([[a * b for b in xi] for a in xi])
    A = HermitianMatrix.diagonal(random_positive_rationals(rng, 3))
    report = complete_monotonicity_report(A, B, Exp(-1), 4, [0, 1], 256)
    assert report.alternation_holds()


def test_cm_report_exp_2x2(rng):
    A = HermitianMatrix.diagonal(random_positive_rationals(rng, 2))
    B = random_exact_psd(rng, 2)
    report = complete_monotonicity_report(A, B, Exp(-1), 5, [0, Fraction(1, 2), 2], 256)
    assert report.alternation_holds()


def test_cm_report_json_shape(rng):
    A = HermitianMatrix.diagonal([1, 2])
    B = HermitianMatrix.identity(2)
    report = complete_monotonicity_report(A, B, Resolvent(0), 2, [0], 128)
    doc = report.to_json()
    assert {"entries", "alternation_holds", "max_order", "precision", "function"} <= set(doc)
    assert all({"t0", "p", "value", "sign", "certified", "mode"} <= set(e) for e in doc["entries"])


def test_order_caps_enforced():
    frame = _frame([1], [[1]])
    with pytest.raises(DomainError):
        trace_derivative(frame, Resolvent(0), 9)
    with pytest.raises(DomainError):
        trace_derivative(frame, Resolvent(0), 0)
    # explicit override allows going past the default cap
    assert trace_derivative(frame, Resolvent(0), 9, order_cap=10) != 0
