"""Executable forms of the equivalent trace-positivity formulations.

Three checkable surrogates for the same conjecture: exact coefficients of
tr(A+tB)^p as a polynomial in t, positive-type sampling of tr exp(A+itB),
and entrywise positivity of tr exp(A+tB) applied spectrally to nonnegative
probe matrices.  Coefficient nonnegativity is asserted only for the provably
safe families (commuting pairs); for general instances these are reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np

from .errors import DomainError, NumericalError
from .exactnum import GaussianRational, resolve_precision, to_mpf
from .linalg import (
    EXACT,
    HermitianMatrix,
    complex_matrix_exp,
    eigen_decompose,
    matmul_exact,
    matrix_trace,
)

WORD_CAP = 12


@dataclass(frozen=True)
class PolyCoefficients:
    """Coefficients of tr(A+tB)^p by powers of t, exact."""

    power: int
    coeffs: tuple  # p+1 Fractions

    def __iter__(self):
        return iter(self.coeffs)

    def all_nonnegative(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    def to_json(self):
        from .exactnum import format_rational

        return {
            "p": self.power,
            "coeffs": [format_rational(c) for c in self.coeffs],
            "all_nonnegative": self.all_nonnegative(),
        }


def _real_trace(M_rows) -> Fraction:
    tr = matrix_trace(M_rows)
    if tr.im != 0:
        raise NumericalError("trace of a Hermitian word sum must be real")
    return tr.re


def poly_coefficients(A: HermitianMatrix, B: HermitianMatrix, p: int) -> PolyCoefficients:
    """Exact coefficients of tr(A+tB)^p via degree-truncated polynomial products.

    Maintains (A+tB)^j as a list of matrix coefficients by degree; O(p^2)
    exact matrix multiplications instead of 2^p words.
    """
    if p < 1:
        raise DomainError("power must be >= 1")
    if A.mode != EXACT or B.mode != EXACT:
        raise DomainError("polynomial coefficients are exact-mode only")
    if A.n != B.n:
        raise DomainError("dimension mismatch")
    Ar = A.to_rows()
    Br = B.to_rows()
    degrees = [Ar, Br]  # (A+tB)^1
    for _ in range(p - 1):
        nxt = []
        for k in range(len(degrees) + 1):
            parts = []
            if k < len(degrees):
                parts.append(matmul_exact(degrees[k], Ar))
            if k > 0:
                parts.append(matmul_exact(degrees[k - 1], Br))
            acc = parts[0]
            for other in parts[1:]:
                acc = [
                    [a + b for a, b in zip(ra, rb)] for ra, rb in zip(acc, other)
                ]
            nxt.append(acc)
        degrees = nxt
    return PolyCoefficients(p, tuple(_real_trace(Mk) for Mk in degrees))


def poly_coefficients_oracle(A: HermitianMatrix, B: HermitianMatrix, p: int) -> PolyCoefficients:
    """The same coefficients by brute enumeration of all 2^p words in {A, B}.

    Shares word prefixes along a depth-first walk, so it costs about 2^(p+1)
    exact matrix products; capped at p <= 12.
    """
    if p < 1:
        raise DomainError("power must be >= 1")
    if p > WORD_CAP:
        raise DomainError(f"word enumeration capped at p <= {WORD_CAP}")
    if A.mode != EXACT or B.mode != EXACT:
        raise DomainError("polynomial coefficients are exact-mode only")
    n = A.n
    Ar = A.to_rows()
    Br = B.to_rows()
    ident = [
        [GaussianRational.of(1 if i == j else 0) for j in range(n)] for i in range(n)
    ]
    sums = [
        [[GaussianRational.of(0)] * n for _ in range(n)] for _ in range(p + 1)
    ]

    def walk(depth, prod, bcount):
        if depth == p:
            acc = sums[bcount]
            for i in range(n):
                for j in range(n):
                    acc[i][j] = acc[i][j] + prod[i][j]
            return
        walk(depth + 1, matmul_exact(prod, Ar), bcount)
        walk(depth + 1, matmul_exact(prod, Br), bcount + 1)

    walk(0, ident, 0)
    return PolyCoefficients(p, tuple(_real_trace(Mk) for Mk in sums))


# ---------------------------------------------------------------------------
# positive type


@dataclass(frozen=True)
class PositiveTypeReport:
    samples: tuple
    min_eigenvalue: object
    hermiticity_residual: object
    tolerance: object
    passed: bool

    def to_json(self):
        return {
            "samples": [str(t) for t in self.samples],
            "min_eigenvalue": mp.nstr(self.min_eigenvalue, 25),
            "hermiticity_residual": mp.nstr(self.hermiticity_residual, 10),
            "tolerance": mp.nstr(self.tolerance, 10),
            "passed": self.passed,
        }


def positive_type_check(A, B, t_samples, precision=None, tolerance=None):
    """Minimum eigenvalue of the kernel matrix [g(t_j - t_k)] for
    g(t) = tr exp(A + i t B); passes when it clears -tolerance.

    A positive-type g has all such kernels positive semi-definite; with a
    finite sample list this is a falsification probe, not a proof.
    """
    prec = resolve_precision(precision)
    ts = [to_mpf(t, prec) for t in t_samples]
    if not ts:
        raise DomainError("need at least one sample point")
    with mp.workprec(prec + 16):
        tol = mp.mpf(2) ** (-(prec // 3)) if tolerance is None else mp.mpf(tolerance)
        Af = A.to_float(prec)
        Bf = B.to_float(prec)
        n = A.n

        gcache = {}

        def g(t):
            key = mp.nstr(t, int(prec * 0.302) + 4)
            hit = gcache.get(key)
            if hit is not None:
                return hit
            rows = [
                [Af.entries[i][j] + 1j * t * Bf.entries[i][j] for j in range(n)]
                for i in range(n)
            ]
            E = complex_matrix_exp(rows, prec)
            val = matrix_trace(E)
            gcache[key] = val
            return val

        m = len(ts)
        G = [[g(ts[j] - ts[k]) for k in range(m)] for j in range(m)]
        herm = mp.mpf(0)
        for j in range(m):
            for k in range(m):
                herm = max(herm, abs(G[j][k] - mp.conj(G[k][j])))
        GH = HermitianMatrix.from_float(
            [[(G[j][k] + mp.conj(G[k][j])) / 2 for k in range(m)] for j in range(m)],
            prec,
        )
        lams, _ = eigen_decompose(GH, prec)
        min_eig = lams[0]
        return PositiveTypeReport(
            tuple(ts), min_eig, herm, tol, bool(min_eig >= -tol)
        )


# ---------------------------------------------------------------------------
# m-positivity probes


@dataclass(frozen=True)
class MPositiveProbe:
    """Sampling plan for entrywise-positivity probes of phi(X).

    ``alpha`` bounds the probe spectra to (-alpha, alpha); the default
    1/(2 max|B| k) keeps the probes small relative to the perturbation.
    """

    k: int
    sample_count: int
    seed: int
    alpha: object = None


@dataclass(frozen=True)
class MPositiveReport:
    alpha: object
    k: int
    sample_count: int
    min_entry: object
    argmin_sample: int
    tolerance: object
    passed: bool

    def to_json(self):
        return {
            "alpha": mp.nstr(self.alpha, 15),
            "k": self.k,
            "samples": self.sample_count,
            "min_entry": mp.nstr(self.min_entry, 25),
            "argmin_sample": self.argmin_sample,
            "tolerance": mp.nstr(self.tolerance, 10),
            "passed": self.passed,
        }


def m_positive_check(A, B, probe: MPositiveProbe, precision=None, tolerance=None):
    """Apply phi(t) = tr exp(A + tB) spectrally to random symmetric
    entrywise-nonnegative probe matrices and report the minimum entry seen.

    The probes are seeded per sample and rescaled so their spectra lie in
    (-alpha, alpha).  phi is m-positive iff every such image is entrywise
    nonnegative; sampling can only falsify.
    """
    prec = resolve_precision(precision)
    if probe.k < 1 or probe.sample_count < 1:
        raise DomainError("probe dimension and sample count must be >= 1")
    with mp.workprec(prec + 16):
        tol = mp.mpf(2) ** (-(prec // 3)) if tolerance is None else mp.mpf(tolerance)
        Af = A.to_float(prec)
        Bf = B.to_float(prec)
        n = A.n
        maxb = max(abs(x) for row in Bf.entries for x in row)
        if probe.alpha is not None:
            alpha = to_mpf(probe.alpha, prec)
        elif maxb == 0:
            alpha = mp.mpf(1)
        else:
            alpha = 1 / (2 * maxb * probe.k)

        phi_cache = {}

        def phi(x):
            key = mp.nstr(x, int(prec * 0.302) + 4)
            hit = phi_cache.get(key)
            if hit is None:
                M = Af.add(Bf.scaled(x))
                lams, _ = eigen_decompose(M, prec)
                hit = mp.fsum(mp.exp(l) for l in lams)
                phi_cache[key] = hit
            return hit

        min_entry = None
        argmin = -1
        for s in range(probe.sample_count):
            rng = np.random.default_rng([probe.seed, s])
            Y = rng.random((probe.k, probe.k))
            X64 = (Y + Y.T) / 2
            rho = float(np.max(np.abs(np.linalg.eigvalsh(X64))))
            theta = rng.uniform(0.2, 0.95)
            scale = float(alpha) * theta / rho if rho > 0 else 0.0
            X = HermitianMatrix.from_float(
                [[mp.mpf(X64[i, j]) * mp.mpf(scale) for j in range(probe.k)] for i in range(probe.k)],
                prec,
            )
            xls, V = eigen_decompose(X, prec)
            fvals = [phi(x) for x in xls]
            for i in range(probe.k):
                for j in range(probe.k):
                    acc = mp.mpf(0)
                    for m_ in range(probe.k):
                        acc += (V[i][m_] * fvals[m_] * mp.conj(V[j][m_])).real
                    if min_entry is None or acc < min_entry:
                        min_entry = acc
                        argmin = s
        return MPositiveReport(
            alpha, probe.k, probe.sample_count, min_entry, argmin, tol,
            bool(min_entry >= -tol),
        )
