import json
import random
from fractions import Fraction

import mpmath as mp
import pytest

from bmvtrace.errors import DomainError
from bmvtrace.exactnum import GaussianRational
from bmvtrace.divdiff import Exp, Resolvent
from bmvtrace.linalg import (
    HermitianMatrix,
    NotPositiveSemidefinite,
    complex_matrix_exp,
    conjugate_by_unitary,
    decomposition_residual,
    eigen_decompose,
    gram_rows,
    hermitian_function,
    is_pd_exact,
    is_psd_exact,
    ldl_decompose,
    to_eigenframe,
    unitary_residual,
)

from conftest import random_exact_psd, random_float_hermitian


def test_constructor_rejects_non_hermitian():
    with pytest.raises(DomainError):
        HermitianMatrix.exact([[1, 2], [3, 4]])
    with pytest.raises(DomainError):
        HermitianMatrix.exact([[GaussianRational(Fraction(0), Fraction(1)), 0], [0, 1]])


def test_eigen_diagonal_permutation():
    M = HermitianMatrix.diagonal([3, 1])
    lams, U = eigen_decompose(M, 128)
    assert [float(x) for x in lams] == [1.0, 3.0]
    # permutation unitary
    mags = sorted(abs(U[i][j]) for i in range(2) for j in range(2))
    assert float(mags[0]) == pytest.approx(0.0, abs=1e-30)
    assert float(mags[-1]) == pytest.approx(1.0, abs=1e-30)


def test_eigen_pauli_x():
    M = HermitianMatrix.exact([[0, 1], [1, 0]])
    lams, _ = eigen_decompose(M, 128)
    assert float(lams[0]) == pytest.approx(-1.0, abs=1e-35)
    assert float(lams[1]) == pytest.approx(1.0, abs=1e-35)


def test_eigen_random_hermitian_residuals():
    rng = random.Random(7)
    for n in (2, 3, 4):
        M = random_float_hermitian(rng, n)
        lams, U = eigen_decompose(M, 256)
        assert float(unitary_residual(U, 256)) < 2.0 ** -128
        assert float(decomposition_residual(M, lams, U, 256)) < 2.0 ** -128
        assert all(lams[i] <= lams[i + 1] for i in range(n - 1))


def test_eigen_vs_mpmath_oracle():
    rng = random.Random(11)
    M = random_float_hermitian(rng, 4)
    lams, _ = eigen_decompose(M, 192)
    with mp.workprec(220):
        A = mp.matrix([[M.entries[i][j] for j in range(4)] for i in range(4)])
        E = mp.mp.eighe if hasattr(mp.mp, "eighe") else None
        ref, _ = mp.eighe(A)
        for mine, theirs in zip(lams, sorted(ref)):
            assert abs(mine - theirs) < mp.mpf(2) ** -150


def test_to_eigenframe_diagonal_exact_passthrough():
    A = HermitianMatrix.diagonal([1, 2, 3])
    B = random_exact_psd(random.Random(3), 3)
    frame = to_eigenframe(A, B)
    assert frame.mode == "exact"
    assert frame.eigenvalues == (Fraction(1), Fraction(2), Fraction(3))
    assert frame.h_in_basis.entries == B.entries


def test_to_eigenframe_identity_isospectral():
    rng = random.Random(5)
    B = random_exact_psd(rng, 3)
    A = HermitianMatrix.identity(3).to_float(192)
    frame = to_eigenframe(A, B.to_float(192), 192)
    assert all(abs(v - 1) < mp.mpf(2) ** -90 for v in frame.eigenvalues)
    lb, _ = eigen_decompose(B, 192)
    lh, _ = eigen_decompose(frame.h_in_basis, 192)
    for x, y in zip(lb, lh):
        assert abs(x - y) < mp.mpf(2) ** -90


def test_to_eigenframe_trace_invariance():
    rng = random.Random(9)
    A = random_exact_psd(rng, 3).to_float(192)
    A = A.add(HermitianMatrix.identity(3).to_float(192))  # ensure pd
    B = random_exact_psd(rng, 3).to_float(192)
    frame = to_eigenframe(A, B, 192)
    with mp.workprec(210):
        assert abs(frame.h_in_basis.trace() - B.trace()) < mp.mpf(2) ** -90


def test_to_eigenframe_rejects_indefinite():
    A = HermitianMatrix.diagonal([1, -1])
    B = HermitianMatrix.identity(2)
    with pytest.raises(DomainError):
        to_eigenframe(A, B)
    Bbad = HermitianMatrix.exact([[1, 2], [2, 1]])  # eigenvalues 3, -1
    with pytest.raises(DomainError):
        to_eigenframe(HermitianMatrix.diagonal([1, 2]), Bbad)


def test_ldl_reconstruction_and_psd_flags():
    rng = random.Random(13)
    for n in (2, 3, 4):
        for want_complex in (False, True):
            H = random_exact_psd(rng, n, complex_entries=want_complex)
            perm, L, D = ldl_decompose(H)
            assert all(d >= 0 for d in D)
            for i in range(n):
                for j in range(n):
                    acc = GaussianRational.of(0)
                    for k in range(n):
                        acc = acc + L[i][k] * D[k] * L[j][k].conjugate()
                    assert acc == H.entries[perm[i]][perm[j]]
    assert not is_psd_exact(HermitianMatrix.exact([[1, 2], [2, 1]]))
    assert is_psd_exact(HermitianMatrix.exact([[1, 1], [1, 1]]))
    assert not is_pd_exact(HermitianMatrix.exact([[1, 1], [1, 1]]))
    assert is_pd_exact(HermitianMatrix.diagonal([2, 3]))


def test_gram_rows_identity():
    G = gram_rows(HermitianMatrix.identity(3))
    assert G.gram() == [[GaussianRational.of(1 if i == j else 0) for j in range(3)] for i in range(3)]


def test_gram_rows_rank_one():
    xi = [Fraction(2), Fraction(-1), Fraction(3)]
    H = HermitianMatrix.exact([[a * b for b in xi] for a in xi])
    G = gram_rows(H)
    assert sum(1 for d in G.weights if d != 0) == 1
    assert G.gram() == [list(r) for r in H.entries]


def test_gram_rows_random_reconstruction_exact_and_float():
    rng = random.Random(17)
    H = random_exact_psd(rng, 3, complex_entries=True)
    G = gram_rows(H)
    assert G.gram() == [list(r) for r in H.entries]
    Hf = H.to_float(192)
    Gf = gram_rows(Hf, 192)
    rec = Gf.gram(192)
    with mp.workprec(210):
        for i in range(3):
            for j in range(3):
                assert abs(rec[i][j] - Hf.entries[i][j]) < mp.mpf(2) ** -90


def test_gram_rows_rejects_indefinite():
    with pytest.raises(NotPositiveSemidefinite):
        gram_rows(HermitianMatrix.exact([[1, 2], [2, 1]]))


def test_hermitian_function_resolvent_diagonal():
    M = HermitianMatrix.diagonal([1, 2]).to_float(128)
    out = hermitian_function(M, Resolvent(0), 128)
    assert abs(out.entries[0][0] - 1) < mp.mpf(2) ** -60
    assert abs(out.entries[1][1] - mp.mpf(1) / 2) < mp.mpf(2) ** -60


def test_hermitian_function_exp_zero_matrix():
    out = hermitian_function(HermitianMatrix.zero(3).to_float(128), Exp(1), 128)
    for i in range(3):
        for j in range(3):
            want = 1 if i == j else 0
            assert abs(out.entries[i][j] - want) < mp.mpf(2) ** -60


def test_hermitian_function_exp_swap_matrix():
    M = HermitianMatrix.exact([[0, 1], [1, 0]])
    out = hermitian_function(M, Exp(1), 192)
    with mp.workprec(220):
        ch, sh = mp.cosh(1), mp.sinh(1)
        assert abs(out.entries[0][0] - ch) < mp.mpf(2) ** -150
        assert abs(out.entries[0][1] - sh) < mp.mpf(2) ** -150
        assert abs(out.entries[1][1] - ch) < mp.mpf(2) ** -150


def test_hermitian_function_domain_error():
    M = HermitianMatrix.diagonal([-2, 1]).to_float(128)
    with pytest.raises(DomainError):
        hermitian_function(M, Resolvent(0), 128)


def test_complex_matrix_exp_basics():
    Z = complex_matrix_exp([[0, 0], [0, 0]], 128)
    assert Z[0][0] == 1 and Z[0][1] == 0
    D = complex_matrix_exp([[1, 0], [0, 2]], 128)
    with mp.workprec(160):
        assert abs(D[0][0] - mp.e) < mp.mpf(2) ** -100
        assert abs(D[1][1] - mp.e**2) < mp.mpf(2) ** -100
    N = complex_matrix_exp([[0, 1], [0, 0]], 128)
    assert abs(N[0][1] - 1) < mp.mpf(2) ** -100


def test_complex_matrix_exp_inverse_identity():
    rng = random.Random(23)
    M = [[complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(3)] for _ in range(3)]
    Mneg = [[-x for x in row] for row in M]
    with mp.workprec(280):
        E = complex_matrix_exp(M, 256)
        F = complex_matrix_exp(Mneg, 256)
        for i in range(3):
            for j in range(3):
                acc = mp.mpc(0)
                for k in range(3):
                    acc += E[i][k] * F[k][j]
                want = 1 if i == j else 0
                assert abs(acc - want) < mp.mpf(2) ** -120


def test_complex_matrix_exp_vs_mpmath():
    rng = random.Random(29)
    M = [[complex(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(3)] for _ in range(3)]
    with mp.workprec(200):
        mine = complex_matrix_exp(M, 192)
        ref = mp.expm(mp.matrix(M))
        for i in range(3):
            for j in range(3):
                assert abs(mine[i][j] - ref[i, j]) < mp.mpf(2) ** -90


def test_conjugation_preserves_trace():
    rng = random.Random(31)
    B = random_float_hermitian(rng, 3)
    M = random_float_hermitian(rng, 3)
    _, U = eigen_decompose(M, 192)
    out = conjugate_by_unitary(U, B, 192)
    with mp.workprec(210):
        assert abs(out.trace() - B.trace()) < mp.mpf(2) ** -100


def test_matrix_json_round_trip_exact():
    H = HermitianMatrix.exact(
        [[2, GaussianRational(Fraction(1, 2), Fraction(1, 3))],
         [GaussianRational(Fraction(1, 2), Fraction(-1, 3)), 5]]
    )
    doc = json.loads(json.dumps(H.to_json()))
    H2 = HermitianMatrix.from_json(doc)
    assert H2.entries == H.entries and H2.mode == "exact"


def test_matrix_json_round_trip_float():
    rng = random.Random(37)
    H = random_float_hermitian(rng, 2)
    doc = json.loads(json.dumps(H.to_json()))
    H2 = HermitianMatrix.from_json(doc, 128)
    for i in range(2):
        for j in range(2):
            assert abs(H2.entries[i][j] - H.entries[i][j]) < 1e-12
