"""Derivatives of t -> tr f(x + t h) via closed-form divided-difference sums.

The p-th derivative at t=0 is p! times a sum over all n^p index loops of the
product of h-entries around the loop times a divided difference of f over the
touched eigenvalues (one of them doubled).  Divided differences depend only on
the multiset of eigenvalues, so they are memoized per index multiset; the loop
products are accumulated tuple by tuple with shared prefixes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import mpmath as mp

from .errors import DomainError, NumericalError
from .exactnum import (
    GaussianRational,
    as_fraction,
    format_rational,
    resolve_precision,
    to_mpf,
)
from .linalg import (
    EXACT,
    FLOAT,
    EigenFrame,
    HermitianMatrix,
    conjugate_by_unitary,
    eigen_decompose,
    to_eigenframe,
    trace_function,
)
from .divdiff import Exp, FunctionSpec, divided_difference

DEFAULT_ORDER_CAP = 8
DEFAULT_DIM_CAP = 8

COROLLARY = "corollary"  # h_{i1 i2} ... h_{ip i1},   dd repeats the first index
THEOREM = "theorem"      # h_{ip ip-1} ... h_{i1 ip}, dd repeats the last index


def _check_caps(n, p, order_cap, dim_cap):
    if p < 1:
        raise DomainError("derivative order must be >= 1")
    if p > order_cap:
        raise DomainError(f"order {p} above cap {order_cap}; raise order_cap explicitly")
    if n > dim_cap:
        raise DomainError(f"dimension {n} above cap {dim_cap}; raise dim_cap explicitly")


def _loop_sum(h, n, p, zero, one, dd_from_counts, ordering):
    """sum over tuples (i_1..i_p) of loop product times dd(multiset)."""
    cache = {}
    counts = [0] * n
    total = [zero]

    def dd_for(extra):
        counts[extra] += 1
        key = tuple(counts)
        counts[extra] -= 1
        v = cache.get(key)
        if v is None:
            v = dd_from_counts(key)
            cache[key] = v
        return v

    def rec(first, cur, depth, prod):
        if depth == p:
            if ordering == COROLLARY:
                total[0] = total[0] + prod * h[cur][first] * dd_for(first)
            else:
                total[0] = total[0] + prod * h[first][cur] * dd_for(cur)
            return
        for nxt in range(n):
            counts[nxt] += 1
            edge = h[cur][nxt] if ordering == COROLLARY else h[nxt][cur]
            rec(first, nxt, depth + 1, prod * edge)
            counts[nxt] -= 1

    for first in range(n):
        counts[first] += 1
        rec(first, first, 1, one)
        counts[first] -= 1
    return total[0]


def trace_derivative(
    frame: EigenFrame,
    f: FunctionSpec,
    p: int,
    precision=None,
    ordering=COROLLARY,
    order_cap=DEFAULT_ORDER_CAP,
    dim_cap=DEFAULT_DIM_CAP,
):
    """d^p/dt^p tr f(x + t h) at t = 0 for x = diag(frame.eigenvalues).

    Exact (Fraction) when the frame is exact and f has exact derivatives
    (resolvent-type functions); mpf otherwise.  ``ordering`` selects between
    the two equivalent loop-index conventions (they agree; both are kept so
    the agreement can be asserted).
    """
    n = frame.n
    _check_caps(n, p, order_cap, dim_cap)
    if ordering not in (COROLLARY, THEOREM):
        raise DomainError(f"unknown ordering {ordering!r}")
    sigma = f.as_exp()
    if sigma is not None:
        return trace_derivative_exp(
            frame, sigma, p, precision, ordering=ordering,
            order_cap=order_cap, dim_cap=dim_cap,
        )
    for lam in frame.eigenvalues:
        if not f.domain_contains(lam):
            raise DomainError(f"eigenvalue {lam} outside the domain of {f!r}")

    if frame.mode == EXACT and f.is_exact:
        lams = frame.eigenvalues

        def dd_exact(counts):
            nodes = []
            for i, c in enumerate(counts):
                nodes.extend([lams[i]] * c)
            return GaussianRational.of(divided_difference(f, nodes))

        total = _loop_sum(
            frame.h_in_basis.entries, n, p,
            GaussianRational.of(0), GaussianRational.of(1), dd_exact, ordering,
        )
        if total.im != 0:
            raise NumericalError("exact loop sum has nonzero imaginary part")
        return _factorial(p) * total.re

    prec = resolve_precision(precision)
    with mp.workprec(prec + 32):
        lams = frame.eigenvalues_mpf(prec + 32)
        hf = frame.h_in_basis.to_float(prec + 32)

        def dd_float(counts):
            nodes = []
            for i, c in enumerate(counts):
                nodes.extend([lams[i]] * c)
            return mp.mpc(divided_difference(f, nodes, prec))

        total = _loop_sum(hf.entries, n, p, mp.mpc(0), mp.mpc(1), dd_float, ordering)
        return _factorial(p) * _real_part(total, prec)


def _factorial(p):
    out = 1
    for k in range(2, p + 1):
        out *= k
    return out


def _real_part(total, prec):
    scale = abs(total) + mp.mpf(1)
    if abs(total.imag) > scale * mp.mpf(2) ** (-(prec // 2)):
        raise NumericalError("loop sum has an unexpectedly large imaginary part")
    return total.real


def trace_derivative_exp(
    frame: EigenFrame,
    sigma,
    p: int,
    precision=None,
    ordering=COROLLARY,
    order_cap=DEFAULT_ORDER_CAP,
    dim_cap=DEFAULT_DIM_CAP,
):
    """d^p/dt^p tr e^(sigma (x + t h)) at t = 0, as mpf.

    Kept separate from the generic path: exponential divided differences are
    never exact, and the sigma = -1 case is the one the trace-positivity
    questions are about.
    """
    n = frame.n
    _check_caps(n, p, order_cap, dim_cap)
    prec = resolve_precision(precision)
    f = Exp(sigma)
    with mp.workprec(prec + 32):
        lams = frame.eigenvalues_mpf(prec + 32)
        hf = frame.h_in_basis.to_float(prec + 32)

        def dd_float(counts):
            nodes = []
            for i, c in enumerate(counts):
                nodes.extend([lams[i]] * c)
            return mp.mpc(divided_difference(f, nodes, prec))

        total = _loop_sum(hf.entries, n, p, mp.mpc(0), mp.mpc(1), dd_float, ordering)
        return _factorial(p) * _real_part(total, prec)


def trace_derivative_fd(A: HermitianMatrix, B: HermitianMatrix, f, p, t0=0, precision=None):
    """Central finite-difference oracle for d^p/dt^p tr f(A + t B) at t0.

    Step 2^(-precision/(p+2)) balances truncation against the cancellation of
    the p-th difference quotient; the stencil must stay inside the domain of f.
    """
    if p < 1:
        raise DomainError("derivative order must be >= 1")
    prec = resolve_precision(precision)
    sigma = f.as_exp() if hasattr(f, "as_exp") else None
    with mp.workprec(prec + 16):
        step = mp.mpf(2) ** (mp.mpf(-prec) / (p + 2))
        t0f = to_mpf(t0, prec + 16)
        Af = A.to_float(prec)
        Bf = B.to_float(prec)
        acc = mp.mpf(0)
        for k in range(p + 1):
            t = t0f + (mp.mpf(p) / 2 - k) * step
            M = Af.add(Bf.scaled(t))
            acc += (-1) ** k * comb(p, k) * trace_function(M, f, prec)
        return acc / step**p


def shift_frame(frame: EigenFrame, t0, precision=None) -> EigenFrame:
    """EigenFrame of (x + t0 h) with h re-expressed in the new eigenbasis.

    t0 = 0 (or h = 0) returns the frame unchanged, preserving exactness;
    otherwise the result is a float frame at the working precision.
    """
    t0 = as_fraction(t0)
    if t0 < 0:
        raise DomainError("shift t0 must be >= 0")
    if t0 == 0 or frame.h_in_basis.is_zero():
        return frame
    prec = resolve_precision(precision)
    with mp.workprec(prec + 16):
        lams = frame.eigenvalues_mpf(prec + 16)
        h = frame.h_in_basis.to_float(prec)
        n = frame.n
        t0f = to_mpf(t0, prec + 16)
        rows = [
            [
                (mp.mpc(lams[i]) if i == j else mp.mpc(0)) + t0f * h.entries[i][j]
                for j in range(n)
            ]
            for i in range(n)
        ]
        X = HermitianMatrix.from_float(rows, prec)
    new_lams, U = eigen_decompose(X, prec)
    new_h = conjugate_by_unitary(U, h, prec)
    return EigenFrame.build(new_lams, new_h)


# ---------------------------------------------------------------------------
# complete monotonicity report


@dataclass(frozen=True)
class DerivativeEntry:
    t0: Fraction
    order: int
    value: object          # Fraction (exact) or mpf
    signed_value: object   # (-1)^p * value
    sign: str              # '+', '-', '0' classification of signed_value
    certified: bool        # exact arithmetic, no tolerance involved
    mode: str

    def to_json(self):
        val = (
            format_rational(self.value)
            if isinstance(self.value, Fraction)
            else mp.nstr(self.value, 30)
        )
        return {
            "t0": format_rational(self.t0),
            "p": self.order,
            "value": val,
            "sign": self.sign,
            "certified": self.certified,
            "mode": self.mode,
        }


@dataclass(frozen=True)
class DerivativeReport:
    entries: tuple
    max_order: int
    precision: int
    function: str

    def alternation_holds(self) -> bool:
        """True when every signed value is classified nonnegative."""
        return all(e.sign in ("+", "0") for e in self.entries)

    def to_json(self):
        return {
            "function": self.function,
            "max_order": self.max_order,
            "precision": self.precision,
            "alternation_holds": self.alternation_holds(),
            "entries": [e.to_json() for e in self.entries],
        }


def complete_monotonicity_report(
    A: HermitianMatrix,
    B: HermitianMatrix,
    f,
    max_order: int,
    t_grid,
    precision=None,
    order_cap=DEFAULT_ORDER_CAP,
    dim_cap=DEFAULT_DIM_CAP,
) -> DerivativeReport:
    """Signs of (-1)^p d^p/dt^p tr f(A + tB) over a grid of shifts t0 >= 0.

    Exact-mode inputs with a resolvent-type f get certified signs at t0 = 0;
    everything else is classified with the float tolerance 2^(-precision/3).
    """
    prec = resolve_precision(precision)
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    grid = sorted({as_fraction(t) for t in t_grid})
    if any(t < 0 for t in grid):
        raise DomainError("t_grid values must be >= 0")
    frame0 = to_eigenframe(A, B, prec)
    tol = mp.mpf(2) ** (-(prec // 3))
    entries = []
    for t0 in grid:
        frame = shift_frame(frame0, t0, prec)
        for p in range(1, max_order + 1):
            exact_here = frame.mode == EXACT and f.is_exact and f.as_exp() is None
            value = trace_derivative(
                frame, f, p, prec, order_cap=order_cap, dim_cap=dim_cap
            )
            if exact_here:
                signed = (-1) ** p * value
                sign = "+" if signed > 0 else ("-" if signed < 0 else "0")
                entries.append(
                    DerivativeEntry(t0, p, value, signed, sign, True, EXACT)
                )
            else:
                signed = (-1) ** p * value
                if abs(signed) <= tol:
                    sign = "0"
                else:
                    sign = "+" if signed > 0 else "-"
                entries.append(
                    DerivativeEntry(t0, p, value, signed, sign, False, FLOAT)
                )
    return DerivativeReport(tuple(entries), max_order, prec, repr(f))
