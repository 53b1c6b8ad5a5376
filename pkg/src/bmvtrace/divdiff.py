"""Divided differences with repeated nodes, by several independent routes.

The Newton-table recursion (with confluent entries supplied by derivatives),
the bidiagonal-matrix-exponential construction, the resolvent product formula
and nested simplex quadrature of the integral representation all compute the
same quantity; keeping them separate is what lets the package cross-check
itself.  Scalar functions are described by FunctionSpec objects exposing their
scaled derivatives f^(m)/m!, exactly for rational-valued families.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np

from .errors import DomainError
from .exactnum import as_fraction, resolve_precision, to_mpf
from .linalg import complex_matrix_exp


# ---------------------------------------------------------------------------
# function specifications


class FunctionSpec:
    """A scalar function with enough structure for confluent divided differences."""

    is_exact = False

    def domain_contains(self, x) -> bool:
        return True

    def value_exact(self, x: Fraction) -> Fraction:
        raise DomainError(f"{self!r} has no exact evaluation")

    def value_mpf(self, x, precision=None):
        raise NotImplementedError

    def dd_coeff_exact(self, m: int, x: Fraction) -> Fraction:
        """f^(m)(x) / m!, exact."""
        raise DomainError(f"{self!r} has no exact derivatives")

    def dd_coeff_mpf(self, m: int, x, precision=None):
        """f^(m)(x) / m! at working precision."""
        raise NotImplementedError

    def as_exp(self):
        """Effective scale s when this function is t -> e^(s t), else None."""
        return None

    def stable_dd(self, nodes, precision=None):
        """A cancellation-free divided difference route, or None."""
        return None


class Exp(FunctionSpec):
    """f(t) = e^(scale * t)."""

    def __init__(self, scale=1):
        try:
            self.scale = as_fraction(scale)
        except DomainError:
            self.scale = mp.mpf(scale)

    def __repr__(self):
        return f"Exp({self.scale})"

    def value_mpf(self, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            return mp.exp(to_mpf(self.scale, prec + 8) * to_mpf(x, prec + 8))

    def dd_coeff_mpf(self, m, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            s = to_mpf(self.scale, prec + 8)
            return s**m * mp.exp(s * to_mpf(x, prec + 8)) / mp.factorial(m)

    def as_exp(self):
        return self.scale

    def stable_dd(self, nodes, precision=None):
        return divdiff_exp_opitz(nodes, self.scale, precision)


class Resolvent(FunctionSpec):
    """f(t) = 1/(c + t) for a constant c >= 0, defined where c + t > 0."""

    is_exact = True

    def __init__(self, c=0):
        self.c = as_fraction(c)
        if self.c < 0:
            raise DomainError("resolvent constant must be >= 0")

    def __repr__(self):
        return f"Resolvent({self.c})"

    def domain_contains(self, x) -> bool:
        if isinstance(x, (int, Fraction)):
            return self.c + x > 0
        return to_mpf(self.c) + x > 0

    def value_exact(self, x):
        x = as_fraction(x)
        if self.c + x <= 0:
            raise DomainError(f"{x} outside the domain of {self!r}")
        return 1 / (self.c + x)

    def value_mpf(self, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            d = to_mpf(self.c, prec + 8) + to_mpf(x, prec + 8)
            if d <= 0:
                raise DomainError(f"{x} outside the domain of {self!r}")
            return 1 / d

    def dd_coeff_exact(self, m, x):
        base = self.value_exact(x)
        return (-1) ** m * base ** (m + 1)

    def dd_coeff_mpf(self, m, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            return (-1) ** m * self.value_mpf(x, prec + 8) ** (m + 1)

    def stable_dd(self, nodes, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            out = mp.mpf(-1) ** (len(nodes) - 1)
            for x in nodes:
                out /= to_mpf(self.c, prec + 8) + to_mpf(x, prec + 8)
            return out


class MonotoneRep(FunctionSpec):
    """f(t) = beta + sum_k w_k / (c_k + t): a discretized operator monotone
    decreasing representation with nonnegative beta and positive weights."""

    is_exact = True

    def __init__(self, beta=0, atoms=()):
        self.beta = as_fraction(beta)
        if self.beta < 0:
            raise DomainError("constant term must be >= 0")
        self.atoms = tuple((as_fraction(c), as_fraction(w)) for c, w in atoms)
        for c, w in self.atoms:
            if c < 0:
                raise DomainError("atom location must be >= 0")
            if w <= 0:
                raise DomainError("atom weight must be > 0")
        self._parts = tuple(Resolvent(c) for c, _ in self.atoms)

    def __repr__(self):
        return f"MonotoneRep({self.beta}, {list(self.atoms)})"

    def domain_contains(self, x) -> bool:
        return all(r.domain_contains(x) for r in self._parts)

    def value_exact(self, x):
        out = self.beta
        for (c, w), r in zip(self.atoms, self._parts):
            out += w * r.value_exact(x)
        return out

    def value_mpf(self, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            out = to_mpf(self.beta, prec + 8)
            for (c, w), r in zip(self.atoms, self._parts):
                out += to_mpf(w, prec + 8) * r.value_mpf(x, prec + 8)
            return out

    def dd_coeff_exact(self, m, x):
        out = self.beta if m == 0 else Fraction(0)
        for (c, w), r in zip(self.atoms, self._parts):
            out += w * r.dd_coeff_exact(m, x)
        return out

    def dd_coeff_mpf(self, m, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            out = to_mpf(self.beta, prec + 8) if m == 0 else mp.mpf(0)
            for (c, w), r in zip(self.atoms, self._parts):
                out += to_mpf(w, prec + 8) * r.dd_coeff_mpf(m, x, prec + 8)
            return out

    def stable_dd(self, nodes, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            out = to_mpf(self.beta, prec + 8) if len(nodes) == 1 else mp.mpf(0)
            for (c, w), r in zip(self.atoms, self._parts):
                out += to_mpf(w, prec + 8) * r.stable_dd(nodes, prec + 8)
            return out


class Scaled(FunctionSpec):
    """f_t(s) = f(t*s) for a base function f and fixed scale t."""

    def __init__(self, base: FunctionSpec, t):
        self.base = base
        try:
            self.t = as_fraction(t)
            self._t_exact = True
        except DomainError:
            self.t = mp.mpf(t)
            self._t_exact = False

    @property
    def is_exact(self):
        return self.base.is_exact and self._t_exact

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.t})"

    def domain_contains(self, x) -> bool:
        if self._t_exact and isinstance(x, (int, Fraction)):
            return self.base.domain_contains(self.t * as_fraction(x))
        return self.base.domain_contains(to_mpf(self.t) * to_mpf(x))

    def value_exact(self, x):
        if not self.is_exact:
            raise DomainError(f"{self!r} has no exact evaluation")
        return self.base.value_exact(self.t * as_fraction(x))

    def value_mpf(self, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            return self.base.value_mpf(to_mpf(self.t, prec + 8) * to_mpf(x, prec + 8), prec + 8)

    def dd_coeff_exact(self, m, x):
        if not self.is_exact:
            raise DomainError(f"{self!r} has no exact derivatives")
        return self.t**m * self.base.dd_coeff_exact(m, self.t * as_fraction(x))

    def dd_coeff_mpf(self, m, x, precision=None):
        prec = resolve_precision(precision)
        with mp.workprec(prec + 8):
            t = to_mpf(self.t, prec + 8)
            return t**m * self.base.dd_coeff_mpf(m, t * to_mpf(x, prec + 8), prec + 8)

    def as_exp(self):
        s = self.base.as_exp()
        if s is None:
            return None
        if isinstance(s, Fraction) and self._t_exact:
            return s * self.t
        return to_mpf(s) * to_mpf(self.t)

    def stable_dd(self, nodes, precision=None):
        prec = resolve_precision(precision)
        inner = self.base.stable_dd([_node_mpf(x, prec) * to_mpf(self.t, prec) for x in nodes], prec)
        if inner is None:
            return None
        with mp.workprec(prec + 8):
            return to_mpf(self.t, prec) ** (len(nodes) - 1) * inner


def parse_function_spec(text: str) -> FunctionSpec:
    """Parse "exp", "exp:S", "resolvent:C" or "monotone:B;C1,W1;C2,W2"."""
    head, _, rest = text.strip().partition(":")
    head = head.lower()
    if head == "exp":
        return Exp(as_fraction(rest) if rest else 1)
    if head == "resolvent":
        return Resolvent(as_fraction(rest) if rest else 0)
    if head == "monotone":
        parts = [p for p in rest.split(";") if p]
        if not parts:
            raise DomainError("monotone spec needs 'beta;c1,w1;...'")
        beta = as_fraction(parts[0])
        atoms = []
        for p in parts[1:]:
            c, _, w = p.partition(",")
            atoms.append((as_fraction(c), as_fraction(w)))
        return MonotoneRep(beta, atoms)
    raise DomainError(f"unknown function spec {text!r}")


# ---------------------------------------------------------------------------
# node lists


@dataclass(frozen=True)
class NodeList:
    """Evaluation nodes for a divided difference; repetitions allowed."""

    values: tuple
    mode: str  # 'exact' | 'float'

    @staticmethod
    def of(nodes) -> "NodeList":
        if isinstance(nodes, NodeList):
            return nodes
        vals = tuple(nodes)
        if not vals:
            raise DomainError("node list must be nonempty")
        try:
            return NodeList(tuple(as_fraction(x) for x in vals), "exact")
        except DomainError:
            return NodeList(tuple(mp.mpf(x) for x in vals), "float")

    @property
    def order(self) -> int:
        return len(self.values) - 1


def _node_mpf(x, precision=None):
    return to_mpf(x, precision)


# ---------------------------------------------------------------------------
# the Newton table with confluent entries


def _newton_table(xs, coeff):
    """All columns of the divided difference table over sorted nodes."""
    k = len(xs) - 1
    cols = [[coeff(0, x) for x in xs]]
    for j in range(1, k + 1):
        prev = cols[-1]
        col = []
        for i in range(0, k - j + 1):
            if xs[i] == xs[i + j]:
                col.append(coeff(j, xs[i]))
            else:
                col.append((prev[i + 1] - prev[i]) / (xs[i + j] - xs[i]))
        cols.append(col)
    return cols


@dataclass(frozen=True)
class DivDiffTable:
    """Triangular table of divided differences [x_i..x_j]_f."""

    nodes: tuple
    columns: tuple  # columns[j][i] = [x_i .. x_{i+j}]

    def top(self):
        return self.columns[-1][0]


def divdiff_table(f: FunctionSpec, nodes, precision=None) -> DivDiffTable:
    """Full confluent Newton table (nodes are sorted so equal nodes group)."""
    nl = NodeList.of(nodes)
    for x in nl.values:
        if not f.domain_contains(x):
            raise DomainError(f"node {x} outside the domain of {f!r}")
    if nl.mode == "exact" and f.is_exact:
        xs = sorted(nl.values)
        cols = _newton_table(xs, f.dd_coeff_exact)
        return DivDiffTable(tuple(xs), tuple(tuple(c) for c in cols))
    prec = resolve_precision(precision)
    with mp.workprec(prec + 32):
        xs = sorted(_node_mpf(x, prec + 32) for x in nl.values)
        cols = _newton_table(xs, lambda m, x: f.dd_coeff_mpf(m, x, prec + 32))
        return DivDiffTable(tuple(xs), tuple(tuple(c) for c in cols))


def divided_difference(f: FunctionSpec, nodes, precision=None):
    """The divided difference of f over the given nodes.

    Exact (Fraction) for exact-capable f on rational nodes; otherwise mpf at
    the working precision.  Float node sets whose total spread is below
    2^(-precision/2) are rerouted through a cancellation-free method when the
    function provides one (matrix-exponential route for Exp, product formula
    for resolvent-type functions).
    """
    nl = NodeList.of(nodes)
    for x in nl.values:
        if not f.domain_contains(x):
            raise DomainError(f"node {x} outside the domain of {f!r}")
    if nl.mode == "exact" and f.is_exact:
        xs = sorted(nl.values)
        return _newton_table(xs, f.dd_coeff_exact)[-1][0]
    prec = resolve_precision(precision)
    with mp.workprec(prec + 32):
        xs = sorted(_node_mpf(x, prec + 32) for x in nl.values)
        spread = xs[-1] - xs[0]
        if len(xs) > 1 and spread != 0 and spread < mp.mpf(2) ** (-(prec // 2)):
            stable = f.stable_dd(xs, prec)
            if stable is not None:
                return stable
        return _newton_table(xs, lambda m, x: f.dd_coeff_mpf(m, x, prec + 32))[-1][0]


# ---------------------------------------------------------------------------
# independent routes


def divdiff_resolvent_product(c, nodes) -> Fraction:
    """(-1)^(p-1) * prod 1/(c + x_i): the closed product form for 1/(c+t).

    Exact; valid with repeated nodes (the recursion limit).  A node at -c is a
    pole and raises DomainError.
    """
    c = as_fraction(c)
    nl = NodeList.of(nodes)
    if nl.mode != "exact":
        raise DomainError("the exact product formula needs rational nodes")
    out = Fraction((-1) ** (len(nl.values) - 1))
    for x in nl.values:
        if c + x == 0:
            raise DomainError(f"node {x} is a pole of the resolvent at c={c}")
        out /= c + x
    return out


def divdiff_exp_opitz(nodes, scale=1, precision=None):
    """Divided difference of t -> e^(scale*t) as a corner of a matrix exponential.

    Builds the upper bidiagonal matrix J with the nodes on the diagonal and
    ones above it and reads off the top-right entry of exp(scale*J).  (With
    scale*nodes on the diagonal and ones above, the top-right entry is the
    plain-exp divided difference at the scaled nodes; multiplying by scale^k
    is the same thing by the scaling identity.)  Immune to node collisions.
    """
    nl = NodeList.of(nodes)
    prec = resolve_precision(precision)
    k = nl.order
    with mp.workprec(prec + 32):
        s = to_mpf(scale, prec + 32)
        xs = [_node_mpf(x, prec + 32) for x in nl.values]
        Z = [[mp.mpf(0)] * (k + 1) for _ in range(k + 1)]
        for i, x in enumerate(xs):
            Z[i][i] = s * x
            if i < k:
                Z[i][i + 1] = s
        E = complex_matrix_exp(Z, prec + 16)
        return E[0][k].real


def _gl_cache():
    return {}


_GL_NODES = _gl_cache()


def gauss_legendre_01(q: int, precision=None):
    """Gauss-Legendre nodes and weights on [0, 1] at working precision (cached)."""
    prec = resolve_precision(precision)
    key = (q, (prec + 63) // 64)
    hit = _GL_NODES.get(key)
    if hit is not None:
        return hit
    xs64, _ = np.polynomial.legendre.leggauss(q)
    with mp.workprec(key[1] * 64 + 48):
        nodes = []
        weights = []
        for x0 in xs64:
            x = mp.mpf(float(x0))
            for _ in range(60):
                p, dp = _legendre_pair(q, x)
                dx = p / dp
                x -= dx
                if abs(dx) <= mp.mpf(2) ** (-(key[1] * 64 + 24)):
                    break
            p, dp = _legendre_pair(q, x)
            w = 2 / ((1 - x * x) * dp * dp)
            nodes.append((x + 1) / 2)
            weights.append(w / 2)
        out = (tuple(nodes), tuple(weights))
    _GL_NODES[key] = out
    return out


def _legendre_pair(q, x):
    """(P_q(x), P_q'(x)) by the three-term recurrence."""
    p0, p1 = mp.mpf(1), x
    for k in range(2, q + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = q * (x * p1 - p0) / (x * x - 1)
    return p1, dp


def divdiff_hermite_quadrature(f: FunctionSpec, nodes, quad_points=64, precision=None):
    """Simplex quadrature of the iterated-integral form of a divided difference.

    Nested Gauss-Legendre with ``quad_points`` per axis.  For exponential
    functions the nested integrals factor per axis, so each level is a single
    1-D quadrature against a Chebyshev interpolant of the level below (cost
    O(order * quad_points^2)); for other functions the tensor recursion costs
    quad_points^order evaluations and is only meant for low orders.
    """
    nl = NodeList.of(nodes)
    prec = resolve_precision(precision)
    n = nl.order
    if n == 0:
        return f.value_mpf(nl.values[0], prec)
    s = f.as_exp()
    if s is not None:
        return _hermite_exp_factored(s, nl.values, n, quad_points, prec)
    us, ws = gauss_legendre_01(quad_points, prec)
    with mp.workprec(prec + 32):
        xs = [_node_mpf(x, prec + 32) for x in nl.values]
        d = [xs[k] - xs[k - 1] for k in range(1, n + 1)]
        nfact = mp.factorial(n)

        def deriv_n(arg):
            return nfact * f.dd_coeff_mpf(n, arg, prec + 32)

        def level(k, arg, upper):
            if k == n:
                return upper * mp.fsum(
                    w * deriv_n(arg + upper * u * d[n - 1]) for u, w in zip(us, ws)
                )
            return upper * mp.fsum(
                w * level(k + 1, arg + upper * u * d[k - 1], upper * u)
                for u, w in zip(us, ws)
            )

        return level(1, xs[0], mp.mpf(1))


def _cheb_points_01(m):
    return [(1 - mp.cos(mp.pi * j / m)) / 2 for j in range(m + 1)]


def _bary_eval(ts, vals, t):
    num = mp.mpf(0)
    den = mp.mpf(0)
    for j, (tj, vj) in enumerate(zip(ts, vals)):
        diff = t - tj
        if diff == 0:
            return vj
        w = mp.mpf(-1) ** j
        if j == 0 or j == len(ts) - 1:
            w /= 2
        r = w / diff
        num += r * vj
        den += r
    return num / den


def _hermite_exp_factored(scale, nodes, n, q, prec):
    with mp.workprec(prec + 48):
        s = to_mpf(scale, prec + 48)
        xs = [_node_mpf(x, prec + 48) for x in nodes]
        if s == 0:
            return mp.mpf(0)  # f^(n) vanishes identically for constant f
        b = [s * (xs[k] - xs[k - 1]) for k in range(1, n + 1)]
        us, ws = gauss_legendre_01(q, prec + 48)
        ts = _cheb_points_01(q)

        # innermost level: F_n(tau) = int_0^tau e^(b_n t) dt by quadrature
        vals = [
            tau * mp.fsum(w * mp.exp(b[n - 1] * tau * u) for u, w in zip(us, ws))
            for tau in ts
        ]
        for k in range(n - 1, 0, -1):
            vals = [
                tau
                * mp.fsum(
                    w * mp.exp(b[k - 1] * tau * u) * _bary_eval(ts, vals, tau * u)
                    for u, w in zip(us, ws)
                )
                for tau in ts
            ]
        # vals now samples F_1 on [0,1]; the outer integral is F_1(1)
        return s**n * mp.exp(s * xs[0]) * vals[-1]


# ---------------------------------------------------------------------------
# identities


def scaling_identity_gap(f: FunctionSpec, t, nodes, precision=None):
    """t^(p-1) [t x_0 .. t x_{p-1}]_f minus [x_0 .. x_{p-1}]_{f(t .)}.

    Zero exactly for exact-capable functions on rational data; otherwise a
    float residual bounded by roundoff.
    """
    nl = NodeList.of(nodes)
    p = len(nl.values)
    prec = resolve_precision(precision)
    if nl.mode == "exact" and f.is_exact:
        tq = as_fraction(t)
        lhs = tq ** (p - 1) * divided_difference(f, [tq * x for x in nl.values])
        rhs = divided_difference(Scaled(f, tq), nl.values)
        return lhs - rhs
    with mp.workprec(prec + 32):
        tf = to_mpf(t, prec + 32)
        scaled_nodes = [tf * _node_mpf(x, prec + 32) for x in nl.values]
        lhs = tf ** (p - 1) * divided_difference(f, scaled_nodes, prec)
        rhs = divided_difference(Scaled(f, t), nl.values, prec)
        return lhs - rhs


def laplace_lemma_gap(lambdas, mu, t, quad_points=64, precision=None):
    """Residual of the Laplace-type identity tying weighted integrals of
    exp divided differences to one higher-order divided difference:

        int_0^t e^(-mu s) [s l_1 .. s l_k]_exp s^(k-1) ds
            = t^k e^(-mu t) [t l_1 .. t l_k, t mu]_exp

    The left side is computed by Gauss-Legendre quadrature with
    ``quad_points`` points, the right side in closed form; returns |LHS-RHS|.
    """
    lam = [as_fraction(x) if isinstance(x, (int, Fraction, str)) else mp.mpf(x) for x in lambdas]
    k = len(lam)
    if k < 1:
        raise DomainError("need at least one node")
    prec = resolve_precision(precision)
    with mp.workprec(prec + 32):
        tf = to_mpf(t, prec + 32)
        if tf < 0:
            raise DomainError("t must be >= 0")
        muf = to_mpf(mu, prec + 32)
        lamf = [to_mpf(x, prec + 32) for x in lam]
        if tf == 0:
            return mp.mpf(0)
        rhs_nodes = [tf * x for x in lamf] + [tf * muf]
        rhs = tf**k * mp.exp(-muf * tf) * divided_difference(Exp(1), rhs_nodes, prec)
        us, ws = gauss_legendre_01(quad_points, prec)
        acc = mp.mpf(0)
        for u, w in zip(us, ws):
            sv = tf * u
            dd = divided_difference(Exp(1), [sv * x for x in lamf], prec)
            acc += w * mp.exp(-muf * sv) * dd * sv ** (k - 1)
        lhs = tf * acc
        return abs(lhs - rhs)
