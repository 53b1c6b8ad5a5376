"""Hermitian matrices over exact or high-precision scalars.

Exact mode stores GaussianRational entries and supports rational LDL*
factorization (positive-semidefiniteness certificates without square roots).
Float mode stores mpmath ``mpc`` entries; eigendecomposition is a cyclic
Jacobi iteration with complex rotations, which at desk-scale dimensions
delivers high relative accuracy at any working precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .errors import DomainError, NumericalError
from .exactnum import (
    GaussianRational,
    as_fraction,
    format_rational,
    resolve_precision,
    to_mpf,
)

EXACT = "exact"
FLOAT = "float"


def _to_mpc(x, precision=None):
    if isinstance(x, GaussianRational):
        return x.to_mpc(precision)
    if isinstance(x, Fraction):
        return mp.mpc(to_mpf(x, precision))
    return mp.mpc(x)


def _max_abs(rows):
    return max((abs(x) for row in rows for x in row), default=mp.mpf(0))


@dataclass(frozen=True)
class HermitianMatrix:
    """Square self-adjoint matrix; entries GaussianRational (exact) or mpc (float)."""

    n: int
    mode: str
    entries: tuple

    @staticmethod
    def exact(rows) -> "HermitianMatrix":
        n = len(rows)
        ent = tuple(tuple(GaussianRational.of(x) for x in row) for row in rows)
        if any(len(row) != n for row in ent):
            raise DomainError("matrix must be square")
        for i in range(n):
            if ent[i][i].im != 0:
                raise DomainError(f"diagonal entry {i} is not real: {ent[i][i]}")
            for j in range(i + 1, n):
                if ent[i][j] != ent[j][i].conjugate():
                    raise DomainError(f"entries ({i},{j}) and ({j},{i}) are not conjugate")
        return HermitianMatrix(n, EXACT, ent)

    @staticmethod
    def from_float(rows, precision=None) -> "HermitianMatrix":
        prec = resolve_precision(precision)
        n = len(rows)
        with mp.workprec(prec + 8):
            ent = [[_to_mpc(x, prec + 8) for x in row] for row in rows]
            if any(len(row) != n for row in ent):
                raise DomainError("matrix must be square")
            scale = _max_abs(ent) + mp.mpf(1)
            tol = scale * mp.mpf(2) ** (-prec // 4)
            sym = [[mp.mpc(0)] * n for _ in range(n)]
            for i in range(n):
                if abs(ent[i][i].imag) > tol:
                    raise DomainError(f"diagonal entry {i} has imaginary part {ent[i][i].imag}")
                sym[i][i] = mp.mpc(ent[i][i].real)
                for j in range(i + 1, n):
                    if abs(ent[i][j] - mp.conj(ent[j][i])) > tol:
                        raise DomainError(f"entries ({i},{j}) and ({j},{i}) are not conjugate")
                    v = (ent[i][j] + mp.conj(ent[j][i])) / 2
                    sym[i][j] = v
                    sym[j][i] = mp.conj(v)
            return HermitianMatrix(n, FLOAT, tuple(tuple(row) for row in sym))

    @staticmethod
    def diagonal(values, mode=EXACT, precision=None) -> "HermitianMatrix":
        n = len(values)
        if mode == EXACT:
            rows = [[GaussianRational.of(0)] * n for _ in range(n)]
            for i, v in enumerate(values):
                rows[i][i] = GaussianRational.of(v)
            return HermitianMatrix.exact(rows)
        rows = [[0] * n for _ in range(n)]
        for i, v in enumerate(values):
            rows[i][i] = v
        return HermitianMatrix.from_float(rows, precision)

    @staticmethod
    def zero(n, mode=EXACT) -> "HermitianMatrix":
        return HermitianMatrix.diagonal([0] * n, mode)

    @staticmethod
    def identity(n, mode=EXACT) -> "HermitianMatrix":
        return HermitianMatrix.diagonal([1] * n, mode)

    def is_diagonal(self) -> bool:
        zero = GaussianRational.of(0) if self.mode == EXACT else mp.mpc(0)
        return all(
            self.entries[i][j] == zero
            for i in range(self.n)
            for j in range(self.n)
            if i != j
        )

    def is_zero(self) -> bool:
        zero = GaussianRational.of(0) if self.mode == EXACT else mp.mpc(0)
        return all(x == zero for row in self.entries for x in row)

    def diagonal_values(self):
        if self.mode == EXACT:
            return tuple(self.entries[i][i].re for i in range(self.n))
        return tuple(self.entries[i][i].real for i in range(self.n))

    def trace(self):
        vals = self.diagonal_values()
        return sum(vals[1:], vals[0]) if vals else 0

    def to_float(self, precision=None) -> "HermitianMatrix":
        if self.mode == FLOAT:
            return self
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            rows = tuple(
                tuple(x.to_mpc(prec + 8) for x in row) for row in self.entries
            )
        return HermitianMatrix(self.n, FLOAT, rows)

    def to_rows(self):
        return [list(row) for row in self.entries]

    def scaled(self, s) -> "HermitianMatrix":
        """Multiply by a real scalar (exact rational in exact mode)."""
        if self.mode == EXACT:
            s = GaussianRational.of(s)
            if s.im != 0:
                raise DomainError("scaling a Hermitian matrix requires a real scalar")
            rows = tuple(tuple(x * s for x in row) for row in self.entries)
            return HermitianMatrix(self.n, EXACT, rows)
        s = mp.mpf(s)
        rows = tuple(tuple(x * s for x in row) for row in self.entries)
        return HermitianMatrix(self.n, FLOAT, rows)

    def add(self, other: "HermitianMatrix") -> "HermitianMatrix":
        if self.n != other.n or self.mode != other.mode:
            raise DomainError("matrix mode/shape mismatch")
        rows = tuple(
            tuple(a + b for a, b in zip(ra, rb))
            for ra, rb in zip(self.entries, other.entries)
        )
        return HermitianMatrix(self.n, self.mode, rows)

    def to_json(self):
        if self.mode == EXACT:
            ent = [[x.to_json() for x in row] for row in self.entries]
        else:
            dps = mp.mp.dps + 10
            ent = [
                [{"re": mp.nstr(x.real, dps), "im": mp.nstr(x.imag, dps)} for x in row]
                for row in self.entries
            ]
        return {"n": self.n, "mode": self.mode, "entries": ent}

    @staticmethod
    def from_json(obj, precision=None) -> "HermitianMatrix":
        mode = obj["mode"]
        ent = obj["entries"]
        if mode == EXACT:
            return HermitianMatrix.exact(
                [[GaussianRational.from_json(x) for x in row] for row in ent]
            )
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            rows = [
                [mp.mpc(mp.mpf(x["re"]), mp.mpf(x.get("im", "0"))) for x in row]
                for row in ent
            ]
        return HermitianMatrix.from_float(rows, precision)


@dataclass(frozen=True)
class EigenFrame:
    """Eigenvalues of the unperturbed matrix plus the perturbation in that basis.

    Eigenvalues are ascending (stable tie-break by original index); in exact
    mode both the eigenvalues and the entries of ``h_in_basis`` are exact.
    """

    n: int
    eigenvalues: tuple
    h_in_basis: HermitianMatrix
    mode: str

    @staticmethod
    def build(eigenvalues, h: HermitianMatrix) -> "EigenFrame":
        n = len(eigenvalues)
        if h.n != n:
            raise DomainError("eigenvalue count does not match perturbation dimension")
        if h.mode == EXACT:
            eigs = [as_fraction(v) for v in eigenvalues]
        else:
            eigs = [v if isinstance(v, mp.mpf) else to_mpf(v) for v in eigenvalues]
        order = sorted(range(n), key=lambda k: (eigs[k], k))
        eigs = tuple(eigs[k] for k in order)
        rows = tuple(tuple(h.entries[a][b] for b in order) for a in order)
        return EigenFrame(n, eigs, HermitianMatrix(n, h.mode, rows), h.mode)

    def eigenvalues_mpf(self, precision=None):
        return tuple(to_mpf(v, precision) for v in self.eigenvalues)


# ---------------------------------------------------------------------------
# exact LDL* with diagonal pivoting


class NotPositiveSemidefinite(DomainError):
    pass


def ldl_decompose(M: HermitianMatrix):
    """Rational LDL* of an exact Hermitian psd matrix with symmetric pivoting.

    Returns (perm, L, D) with ``P M P^T = L diag(D) L*`` where ``perm[k]`` is the
    original index placed at position k, L is unit lower triangular with
    GaussianRational entries and D is a list of nonnegative Fractions.
    Raises NotPositiveSemidefinite when a pivot is negative or a zero diagonal
    has nonzero residual mass in its row.
    """
    if M.mode != EXACT:
        raise DomainError("ldl_decompose requires an exact matrix")
    n = M.n
    zero = GaussianRational.of(0)
    S = [[M.entries[i][j] for j in range(n)] for i in range(n)]
    perm = list(range(n))
    L = [[GaussianRational.of(1 if i == j else 0) for j in range(n)] for i in range(n)]
    D = [Fraction(0)] * n

    for k in range(n):
        pivot_at = max(range(k, n), key=lambda r: S[r][r].re)
        d = S[pivot_at][pivot_at].re
        if d < 0:
            raise NotPositiveSemidefinite(f"negative pivot {format_rational(d)}")
        if d == 0:
            for r in range(k, n):
                for c in range(k, n):
                    if S[r][c] != zero:
                        raise NotPositiveSemidefinite(
                            "zero pivot with nonzero residual: not psd"
                        )
            break
        if pivot_at != k:
            S[k], S[pivot_at] = S[pivot_at], S[k]
            for row in S:
                row[k], row[pivot_at] = row[pivot_at], row[k]
            perm[k], perm[pivot_at] = perm[pivot_at], perm[k]
            for c in range(k):  # already-computed part of L
                L[k][c], L[pivot_at][c] = L[pivot_at][c], L[k][c]
        D[k] = d
        for r in range(k + 1, n):
            L[r][k] = S[r][k] / d
        for r in range(k + 1, n):
            for c in range(k + 1, r + 1):
                S[r][c] = S[r][c] - L[r][k] * d * L[c][k].conjugate()
                if c != r:
                    S[c][r] = S[r][c].conjugate()
    return perm, L, D


def is_psd_exact(M: HermitianMatrix) -> bool:
    try:
        ldl_decompose(M)
        return True
    except NotPositiveSemidefinite:
        return False


def is_pd_exact(M: HermitianMatrix) -> bool:
    try:
        _, _, D = ldl_decompose(M)
    except NotPositiveSemidefinite:
        return False
    return all(d > 0 for d in D)


# ---------------------------------------------------------------------------
# cyclic Jacobi eigendecomposition (float mode)


def eigen_decompose(M: HermitianMatrix, precision=None):
    """Diagonalize a Hermitian matrix: M = U diag(lams) U*.

    Returns (eigenvalues ascending as mpf tuple, U as tuple-of-rows of mpc).
    Exact-mode input is converted to float first.  Raises NumericalError if
    the rotation sweeps fail to reach the off-diagonal target.
    """
    prec = resolve_precision(precision)
    Mf = M.to_float(prec)
    n = M.n
    guard = 24 + 4 * max(n, 2).bit_length()
    with mp.workprec(prec + guard):
        A = [[mp.mpc(x) for x in row] for row in Mf.entries]
        V = [[mp.mpc(1 if i == j else 0) for j in range(n)] for i in range(n)]
        scale = _max_abs(A) + mp.mpf(1)
        target = scale * mp.mpf(2) ** (-(prec + 8))
        max_sweeps = 30 + prec // 16
        for _ in range(max_sweeps):
            off = mp.mpf(0)
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off = max(off, abs(A[p][q]))
            if off <= target:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p][q]
                    if abs(apq) <= target / (4 * n):
                        continue
                    _rotate(A, V, p, q, n)
        else:
            raise NumericalError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps"
            )
        lams = [A[i][i].real for i in range(n)]
        order = sorted(range(n), key=lambda k: (lams[k], k))
        lams = tuple(lams[k] for k in order)
        U = tuple(tuple(V[i][k] for k in order) for i in range(n))
    return lams, U


def _rotate(A, V, p, q, n):
    apq = A[p][q]
    norm = abs(apq)
    phase = apq / norm
    tau = (A[q][q].real - A[p][p].real) / (2 * norm)
    if tau >= 0:
        t = 1 / (tau + mp.sqrt(1 + tau * tau))
    else:
        t = -1 / (-tau + mp.sqrt(1 + tau * tau))
    c = 1 / mp.sqrt(1 + t * t)
    s = t * c
    sp = s * phase
    spc = s / phase  # s * conj(phase)
    for k in range(n):
        akp, akq = A[k][p], A[k][q]
        A[k][p] = c * akp - spc * akq
        A[k][q] = sp * akp + c * akq
    for k in range(n):
        apk, aqk = A[p][k], A[q][k]
        A[p][k] = c * apk - sp * aqk
        A[q][k] = spc * apk + c * aqk
    A[p][q] = mp.mpc(0)
    A[q][p] = mp.mpc(0)
    A[p][p] = mp.mpc(A[p][p].real)
    A[q][q] = mp.mpc(A[q][q].real)
    for k in range(n):
        vkp, vkq = V[k][p], V[k][q]
        V[k][p] = c * vkp - spc * vkq
        V[k][q] = sp * vkp + c * vkq


def unitary_residual(U, precision=None):
    """max-norm of U*U - I."""
    n = len(U)
    prec = resolve_precision(precision)
    with mp.workprec(prec + 16):
        worst = mp.mpf(0)
        for i in range(n):
            for j in range(n):
                acc = mp.mpc(0)
                for k in range(n):
                    acc += mp.conj(U[k][i]) * U[k][j]
                if i == j:
                    acc -= 1
                worst = max(worst, abs(acc))
        return worst


def decomposition_residual(M: HermitianMatrix, lams, U, precision=None):
    """max-norm of M U - U diag(lams)."""
    prec = resolve_precision(precision)
    Mf = M.to_float(prec)
    n = M.n
    with mp.workprec(prec + 16):
        worst = mp.mpf(0)
        for i in range(n):
            for j in range(n):
                acc = mp.mpc(0)
                for k in range(n):
                    acc += Mf.entries[i][k] * U[k][j]
                acc -= U[i][j] * lams[j]
                worst = max(worst, abs(acc))
        return worst


def conjugate_by_unitary(U, B: HermitianMatrix, precision=None) -> HermitianMatrix:
    """U* B U as a float HermitianMatrix."""
    prec = resolve_precision(precision)
    Bf = B.to_float(prec)
    n = B.n
    with mp.workprec(prec + 16):
        BU = [[mp.mpc(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = mp.mpc(0)
                for k in range(n):
                    acc += Bf.entries[i][k] * U[k][j]
                BU[i][j] = acc
        out = [[mp.mpc(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = mp.mpc(0)
                for k in range(n):
                    acc += mp.conj(U[k][i]) * BU[k][j]
                out[i][j] = acc
        return HermitianMatrix.from_float(out, prec)


def float_eigenvalues_check(M: HermitianMatrix, precision=None):
    """Eigenvalues with tiny negatives clamped to zero; raises if genuinely indefinite."""
    prec = resolve_precision(precision)
    lams, _ = eigen_decompose(M, prec)
    with mp.workprec(prec + 16):
        scale = _max_abs(M.to_float(prec).entries) + mp.mpf(1)
        tol = scale * mp.mpf(2) ** (-(prec // 4))
        cleaned = []
        for lam in lams:
            if lam < -tol:
                raise NotPositiveSemidefinite(f"eigenvalue {mp.nstr(lam, 12)} < 0")
            cleaned.append(lam if lam > 0 else mp.mpf(0))
    return tuple(cleaned)


def to_eigenframe(A: HermitianMatrix, B: HermitianMatrix, precision=None) -> EigenFrame:
    """Diagonalize A and express B in its eigenbasis.

    A must be positive definite and B positive semi-definite.  When both are
    exact and A is diagonal the frame stays exact; otherwise the computation
    moves to float mode at the given precision.
    """
    if A.n != B.n:
        raise DomainError("A and B must have equal dimension")
    prec = resolve_precision(precision)
    if A.mode == EXACT and B.mode == EXACT and A.is_diagonal():
        lams = A.diagonal_values()
        bad = [v for v in lams if v <= 0]
        if bad:
            raise DomainError(f"A is not positive definite: eigenvalue {format_rational(bad[0])}")
        if not is_psd_exact(B):
            raise NotPositiveSemidefinite("B is not positive semi-definite")
        return EigenFrame.build(lams, B)
    lams, U = eigen_decompose(A, prec)
    with mp.workprec(prec + 16):
        scale = _max_abs(A.to_float(prec).entries) + mp.mpf(1)
        tol = scale * mp.mpf(2) ** (-(prec // 4))
        if lams[0] <= tol:
            raise DomainError(f"A is not positive definite: eigenvalue {mp.nstr(lams[0], 12)}")
    float_eigenvalues_check(B, prec)  # psd gate
    h = conjugate_by_unitary(U, B, prec)
    return EigenFrame.build(lams, h)


# ---------------------------------------------------------------------------
# Gram rows


@dataclass(frozen=True)
class GramRows:
    """Row vectors a_i (optionally with diagonal weights) with (a_i|a_j) = h_ij.

    In float mode ``weights`` is None and the inner product is the plain
    Hermitian one.  In exact mode the rows are the pivoted LDL* columns and
    ``weights`` holds the rational pivots, so inner products stay rational.
    """

    mode: str
    rows: tuple
    weights: tuple | None = None

    def inner(self, i, j, precision=None):
        if self.weights is None:
            with mp.workprec(resolve_precision(precision) + 16):
                acc = mp.mpc(0)
                for a, b in zip(self.rows[i], self.rows[j]):
                    acc += a * mp.conj(b)
                return acc
        acc = GaussianRational.of(0)
        for a, w, b in zip(self.rows[i], self.weights, self.rows[j]):
            acc = acc + a * w * b.conjugate()
        return acc

    def gram(self, precision=None):
        n = len(self.rows)
        return [[self.inner(i, j, precision) for j in range(n)] for i in range(n)]


def gram_rows(h: HermitianMatrix, precision=None) -> GramRows:
    """Vectors whose Gram matrix reproduces a psd matrix h.

    Exact mode returns the LDL* pair (rows in original index order, rational
    weights); float mode returns eigen-scaled rows U sqrt(lam).
    """
    if h.mode == EXACT:
        perm, L, D = ldl_decompose(h)
        n = h.n
        inv = [0] * n
        for pos, orig in enumerate(perm):
            inv[orig] = pos
        rows = tuple(tuple(L[inv[i]][k] for k in range(n)) for i in range(n))
        return GramRows(EXACT, rows, tuple(D))
    prec = resolve_precision(precision)
    lams, U = eigen_decompose(h, prec)
    with mp.workprec(prec + 16):
        scale = _max_abs(h.entries) + mp.mpf(1)
        tol = scale * mp.mpf(2) ** (-(prec // 4))
        roots = []
        for lam in lams:
            if lam < -tol:
                raise NotPositiveSemidefinite(f"eigenvalue {mp.nstr(lam, 12)} < 0")
            roots.append(mp.sqrt(lam) if lam > 0 else mp.mpf(0))
        rows = tuple(
            tuple(U[i][k] * roots[k] for k in range(h.n)) for i in range(h.n)
        )
    return GramRows(FLOAT, rows, None)


# ---------------------------------------------------------------------------
# matrix functions


def hermitian_function(M: HermitianMatrix, f, precision=None) -> HermitianMatrix:
    """U f(diag lam) U* for a FunctionSpec f applied spectrally."""
    prec = resolve_precision(precision)
    lams, U = eigen_decompose(M, prec)
    for lam in lams:
        if not f.domain_contains(lam):
            raise DomainError(f"eigenvalue {mp.nstr(lam, 12)} outside the domain of {f}")
    n = M.n
    with mp.workprec(prec + 16):
        fvals = [f.value_mpf(lam, prec + 16) for lam in lams]
        out = [[mp.mpc(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = mp.mpc(0)
                for k in range(n):
                    acc += U[i][k] * fvals[k] * mp.conj(U[j][k])
                out[i][j] = acc
        return HermitianMatrix.from_float(out, prec)


def trace_function(M: HermitianMatrix, f, precision=None):
    """tr f(M) = sum f(lam_i), as mpf."""
    prec = resolve_precision(precision)
    lams, _ = eigen_decompose(M, prec)
    for lam in lams:
        if not f.domain_contains(lam):
            raise DomainError(f"eigenvalue {mp.nstr(lam, 12)} outside the domain of {f}")
    with mp.workprec(prec + 16):
        return mp.fsum(f.value_mpf(lam, prec + 16) for lam in lams)


def complex_matrix_exp(rows, precision=None):
    """exp of a general complex square matrix by scaling-and-squaring.

    ``rows`` is a sequence of row sequences (entries coerced to mpc); returns a
    list of row lists of mpc.  Series truncation and squaring are carried out
    with enough guard bits for a 2^(-precision/2) accuracy target.
    """
    prec = resolve_precision(precision)
    n = len(rows)
    with mp.workprec(prec + 16):
        A = [[_to_mpc(x, prec + 16) for x in row] for row in rows]
        if any(len(row) != n for row in A):
            raise DomainError("matrix must be square")
        norm = max(
            (mp.fsum(abs(x) for x in row) for row in A), default=mp.mpf(0)
        )
    if norm == 0:
        return [[mp.mpc(1 if i == j else 0) for j in range(n)] for i in range(n)]
    s = max(0, int(mp.ceil(mp.log(norm, 2))) + 1)
    guard = 24 + 2 * s + 2 * max(n, 2).bit_length()
    with mp.workprec(prec + guard):
        X = [[A[i][j] / mp.mpf(2) ** s for j in range(n)] for i in range(n)]
        term = [[mp.mpc(1 if i == j else 0) for j in range(n)] for i in range(n)]
        total = [row[:] for row in term]
        tiny = mp.mpf(2) ** (-(prec + guard - 4))
        k = 0
        while True:
            k += 1
            term = _matmul_mpc(term, X)
            term = [[x / k for x in row] for row in term]
            tnorm = _max_abs(term)
            for i in range(n):
                for j in range(n):
                    total[i][j] += term[i][j]
            if tnorm <= tiny:
                break
            if k > 4 * (prec + guard):
                raise NumericalError("matrix exponential series failed to terminate")
        for _ in range(s):
            total = _matmul_mpc(total, total)
        return total


def _matmul_mpc(X, Y):
    n = len(X)
    m = len(Y[0])
    kk = len(Y)
    out = [[mp.mpc(0)] * m for _ in range(n)]
    for i in range(n):
        Xi = X[i]
        for j in range(m):
            acc = mp.mpc(0)
            for k in range(kk):
                acc += Xi[k] * Y[k][j]
            out[i][j] = acc
    return out


def matrix_trace(rows):
    acc = rows[0][0]
    for i in range(1, len(rows)):
        acc = acc + rows[i][i]
    return acc


def matmul_exact(X, Y):
    """Product of two matrices with GaussianRational entries (lists of rows)."""
    n = len(X)
    m = len(Y[0])
    kk = len(Y)
    out = [[GaussianRational.of(0)] * m for _ in range(n)]
    for i in range(n):
        Xi = X[i]
        for j in range(m):
            acc = GaussianRational.of(0)
            for k in range(kk):
                acc = acc + Xi[k] * Y[k][j]
            out[i][j] = acc
    return out
