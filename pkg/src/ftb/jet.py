"""Truncated multivariate Taylor jets and exact mixed partials.

A :class:`Jet` holds the Taylor coefficients of one or more smooth functions
of ``nvars`` real variables around a fixed anchor, truncated at total degree
``order``.  Arithmetic on jets is exact up to the truncation order, so every
partial derivative up to that order is recovered to machine precision.

Coefficients are stored densely in graded order (all monomials of degree 0,
then degree 1, ...), so truncating a jet to a lower order is a prefix slice.
Jets carry an arbitrary leading batch shape; a ``(n, n)`` matrix of scalar
fields is a single jet whose ``coef`` has shape ``(n, n, N)``.

The public point-wise API (:func:`partial`) is limited to total order 3.
Deeper expansions are used internally by the geometry pipeline, which needs
the Taylor data of F² several derivatives deep.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_PARTIAL_ORDER = 3
SLIT_TOLERANCE = 1e-8


class JetError(Exception):
    """Base class for errors raised by the derivative engine."""


class UnsupportedOrderError(JetError):
    pass


class DomainError(JetError):
    pass


class OracleUnstableError(JetError):
    pass


@dataclass(frozen=True)
class JetPoint:
    """A chart point ``(x, y)`` on the slit tangent bundle."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if len(x) != len(y):
            raise DomainError(f"x has {len(x)} entries but y has {len(y)}")
        if len(x) < 2:
            raise DomainError("dimension n must be at least 2")
        if not all(math.isfinite(v) for v in x + y):
            raise DomainError("non-finite coordinate")
        if math.sqrt(sum(v * v for v in y)) < SLIT_TOLERANCE:
            raise DomainError("slit bundle violated: y = 0")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def z(self) -> np.ndarray:
        return np.array(self.x + self.y)

    @classmethod
    def from_array(cls, z) -> JetPoint:
        z = [float(v) for v in z]
        n = len(z) // 2
        return cls(tuple(z[:n]), tuple(z[n:]))


class JetAlgebra:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        exps = []
        for deg in range(order + 1):
            # reverse-lexicographic inside each degree so x-slots come first
            block = [e for e in itertools.product(range(deg + 1), repeat=nvars) if sum(e) == deg]
            exps.extend(sorted(block, reverse=True))
        self.exponents = np.array(exps, dtype=int).reshape(-1, nvars)
        self.index = {e: i for i, e in enumerate(exps)}
        degrees = self.exponents.sum(axis=1)
        self.sizes = [int(np.sum(degrees <= k)) for k in range(order + 1)]
        self.factorials = np.array(
            [math.prod(math.factorial(a) for a in e) for e in exps], dtype=float
        )
        self._mul = {}
        self._deriv = {}

    def size(self, order: int) -> int:
        return self.sizes[order]

    def monomial(self, exponent) -> int:
        return self.index[tuple(int(a) for a in exponent)]

    def mul_table(self, order: int):
        """Pairs ``(i, j)`` with ``deg i + deg j <= order``, grouped by product."""
        if order not in self._mul:
            n = self.size(order)
            exps = self.exponents[:n]
            radix = (self.order + 1) ** np.arange(self.nvars)
            keys = exps @ radix
            order_of = np.argsort(keys)
            summed = (exps[:, None, :] + exps[None, :, :]).reshape(-1, self.nvars)
            ok = summed.sum(axis=1) <= order
            i, j = np.divmod(np.flatnonzero(ok), n)
            pos = np.searchsorted(keys[order_of], summed[ok] @ radix)
            t = order_of[pos]
            perm = np.lexsort((j, i, t))
            t, i, j = t[perm], i[perm], j[perm]
            starts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
            self._mul[order] = (i, j, starts)
        return self._mul[order]

    def deriv_table(self, order: int, var: int):
        """Source indices and factors mapping an order-``order`` jet to its
        ``var``-derivative (an order ``order - 1`` jet)."""
        key = (order, var)
        if key not in self._deriv:
            n = self.size(order - 1)
            src = np.empty(n, dtype=int)
            fac = np.empty(n)
            for k in range(n):
                e = self.exponents[k].copy()
                e[var] += 1
                src[k] = self.index[tuple(e)]
                fac[k] = e[var]
            self._deriv[key] = (src, fac)
        return self._deriv[key]

    def variables(self, center) -> Jet:
        """The coordinate functions as a jet of batch shape ``(nvars,)``."""
        center = np.asarray(center, dtype=float)
        coef = np.zeros((self.nvars, self.size(self.order)))
        coef[:, 0] = center
        if self.order >= 1:
            for v in range(self.nvars):
                e = [0] * self.nvars
                e[v] = 1
                coef[v, self.monomial(e)] = 1.0
        return Jet(self, coef, self.order)

    def constant(self, value, order: int | None = None) -> Jet:
        order = self.order if order is None else order
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (self.size(order),))
        coef[..., 0] = value
        return Jet(self, coef, order)


@lru_cache(maxsize=None)
def algebra(nvars: int, order: int) -> JetAlgebra:
    return JetAlgebra(nvars, order)


def _index_tuple(idx):
    if not isinstance(idx, tuple):
        idx = (idx,)
    if any(i is Ellipsis for i in idx):
        raise IndexError("Ellipsis indexing is not supported on jets")
    return idx + (slice(None),)


class Jet:
    """Truncated Taylor expansion with an arbitrary leading batch shape."""

    __slots__ = ("alg", "coef", "order")
    __array_priority__ = 1000

    def __init__(self, alg: JetAlgebra, coef: np.ndarray, order: int):
        self.alg = alg
        self.coef = coef
        self.order = order

    # -- shape handling -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coef.ndim - 1

    def __len__(self):
        return self.coef.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, idx) -> Jet:
        return Jet(self.alg, self.coef[_index_tuple(idx)], self.order)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order}, value={self.value!r})"

    @property
    def value(self) -> np.ndarray | float:
        v = self.coef[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    @property
    def T(self) -> Jet:
        return self.transpose()

    def transpose(self, *axes) -> Jet:
        axes = axes or tuple(reversed(range(self.ndim)))
        return Jet(self.alg, np.transpose(self.coef, tuple(axes) + (self.ndim,)), self.order)

    def reshape(self, *shape) -> Jet:
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.alg, self.coef.reshape(shape + (self.coef.shape[-1],)), self.order)

    def sum(self, axis=None) -> Jet:
        if axis is None:
            axis = tuple(range(self.ndim))
        axis = (axis,) if isinstance(axis, int) else axis
        axis = tuple(a % self.ndim if self.ndim else a for a in axis)
        return Jet(self.alg, self.coef.sum(axis=axis), self.order)

    def truncate(self, order: int) -> Jet:
        if order >= self.order:
            return self
        return Jet(self.alg, self.coef[..., : self.alg.size(order)], order)

    # -- calculus -------------------------------------------------------
    def deriv(self, var: int) -> Jet:
        if self.order < 1:
            raise UnsupportedOrderError("cannot differentiate an order-0 jet")
        src, fac = self.alg.deriv_table(self.order, var)
        return Jet(self.alg, self.coef[..., src] * fac, self.order - 1)

    def grad(self) -> Jet:
        """All first partials, appended as a trailing batch axis."""
        parts = [self.deriv(v).coef for v in range(self.alg.nvars)]
        return Jet(self.alg, np.stack(parts, axis=-2), self.order - 1)

    def derivative(self, multi_index: Sequence[int]) -> np.ndarray | float:
        """Partial derivative at the anchor; ``multi_index`` lists variable slots."""
        e = [0] * self.alg.nvars
        for v in multi_index:
            e[v] += 1
        if sum(e) > self.order:
            raise UnsupportedOrderError(f"order {sum(e)} exceeds jet order {self.order}")
        k = self.alg.monomial(e)
        v = self.coef[..., k] * self.alg.factorials[k]
        return float(v) if np.ndim(v) == 0 else v

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.alg is not self.alg:
                raise ValueError("jets from different algebras")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            c = np.asarray(other, dtype=float)
            coef = np.broadcast_to(self.coef, np.broadcast_shapes(self.shape, c.shape) + self.coef.shape[-1:]).copy()
            coef[..., 0] += c
            return Jet(self.alg, coef, self.order)
        k = min(self.order, o.order)
        a, b = self.truncate(k), o.truncate(k)
        return Jet(self.alg, a.coef + b.coef, k)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.alg, -self.coef, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            c = np.asarray(other, dtype=float)
            return Jet(self.alg, self.coef * c[..., None], self.order)
        k = min(self.order, o.order)
        a, b = self.truncate(k), o.truncate(k)
        i, j, starts = self.alg.mul_table(k)
        prod = a.coef[..., i] * b.coef[..., j]
        return Jet(self.alg, np.add.reduceat(prod, starts, axis=-1), k)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            c = np.asarray(other, dtype=float)
            return Jet(self.alg, self.coef / c[..., None], self.order)
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = self.alg.constant(np.ones(self.shape), self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return power(self, float(p))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


# -- series composition --------------------------------------------------

def _compose(x: Jet, taylor: Callable[[np.ndarray, int], list[np.ndarray]]) -> Jet:
    """``f(x)`` from the univariate Taylor coefficients of ``f`` at ``x.value``."""
    a = x.coef[..., 0]
    h = Jet(x.alg, x.coef.copy(), x.order)
    h.coef[..., 0] = 0.0
    cs = taylor(a, x.order)
    out = x.alg.constant(cs[-1], x.order)
    for c in reversed(cs[:-1]):
        out = out * h + c
    return out


def _power_series(p: float):
    def taylor(a, k):
        out, binom = [], 1.0
        for m in range(k + 1):
            out.append(binom * a ** (p - m))
            binom *= (p - m) / (m + 1)
        return out
    return taylor


def reciprocal(x: Jet) -> Jet:
    if np.any(x.coef[..., 0] == 0):
        raise ZeroDivisionError("jet reciprocal at a zero value")
    return _compose(x, lambda a, k: [(-1.0) ** m / a ** (m + 1) for m in range(k + 1)])


def power(x, p: float):
    if not isinstance(x, Jet):
        return np.power(x, p)
    return _compose(x, _power_series(p))


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    if np.any(x.coef[..., 0] <= 0):
        raise DomainError("sqrt of a non-positive jet")
    return _compose(x, _power_series(0.5))


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    return _compose(x, lambda a, k: [np.exp(a) / math.factorial(m) for m in range(k + 1)])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)

    def taylor(a, k):
        return [np.log(a)] + [(-1.0) ** (m + 1) / (m * a**m) for m in range(1, k + 1)]

    return _compose(x, taylor)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)

    def taylor(a, k):
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return [cyc[m % 4] / math.factorial(m) for m in range(k + 1)]

    return _compose(x, taylor)


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)

    def taylor(a, k):
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return [cyc[m % 4] / math.factorial(m) for m in range(k + 1)]

    return _compose(x, taylor)


# -- tensor helpers ------------------------------------------------------

def einsum(subscripts: str, a, b):
    """Two-operand ``einsum`` where either operand may be a jet.

    Subscripts must be explicit (``'ij,jk->ik'``); ellipses are not supported.
    """
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    t = next(c for c in "ZYXWVUTS" if c not in subscripts)
    ja, jb = isinstance(a, Jet), isinstance(b, Jet)
    if ja and jb:
        k = min(a.order, b.order)
        a, b = a.truncate(k), b.truncate(k)
        i, j, starts = a.alg.mul_table(k)
        prod = np.einsum(f"{sa}{t},{sb}{t}->{out}{t}", a.coef[..., i], b.coef[..., j])
        return Jet(a.alg, np.add.reduceat(prod, starts, axis=-1), k)
    if ja:
        return Jet(a.alg, np.einsum(f"{sa}{t},{sb}->{out}{t}", a.coef, np.asarray(b, float)), a.order)
    if jb:
        return Jet(b.alg, np.einsum(f"{sa},{sb}{t}->{out}{t}", np.asarray(a, float), b.coef), b.order)
    return np.einsum(subscripts, a, b)


def matmul(a, b):
    if isinstance(a, Jet):
        na = a.ndim
    else:
        na = np.ndim(a)
    nb = b.ndim if isinstance(b, Jet) else np.ndim(b)
    if na == 2 and nb == 2:
        return einsum("ij,jk->ik", a, b)
    if na == 2 and nb == 1:
        return einsum("ij,j->i", a, b)
    if na == 1 and nb == 2:
        return einsum("i,ij->j", a, b)
    if na == 1 and nb == 1:
        return einsum("i,i->", a, b)
    raise ValueError("matmul supports 1-d and 2-d operands only")


def stack(items: Sequence, axis: int = 0) -> Jet:
    jets = [it for it in items if isinstance(it, Jet)]
    if not jets:
        raise ValueError("stack needs at least one jet")
    alg = jets[0].alg
    k = min(j.order for j in jets)
    coefs = []
    for it in items:
        if not isinstance(it, Jet):
            it = alg.constant(it, k)
        coefs.append(it.truncate(k).coef)
    shape = np.broadcast_shapes(*(c.shape for c in coefs))
    coefs = [np.broadcast_to(c, shape) for c in coefs]
    ndim = len(shape) - 1
    axis = axis % (ndim + 1)
    return Jet(alg, np.stack(coefs, axis=axis), k)


def inv(m: Jet) -> Jet:
    """Inverse of a square jet matrix via the Neumann series on its nilpotent part."""
    a0 = np.linalg.inv(m.coef[..., 0])
    h = Jet(m.alg, m.coef.copy(), m.order)
    h.coef[..., 0] = 0.0
    step = -einsum("ij,jk->ik", a0, h)
    out = m.alg.constant(a0, m.order)
    term = out
    for _ in range(m.order):
        term = einsum("ij,jk->ik", step, term)
        out = out + term
    return out


def solve(m: Jet, rhs: Jet) -> Jet:
    """``inv(m) @ rhs`` with ``rhs`` of shape ``(..., N)`` along its last batch axis."""
    mi = inv(m)
    letters = "abcdefgh"[: rhs.ndim - 1]
    return einsum(f"zy,{letters}y->{letters}z", mi, rhs)


def value(x):
    return x.value if isinstance(x, Jet) else x


# -- point-wise API ------------------------------------------------------

ScalarField = Callable[[Sequence, Sequence], object]


def _validate_index(idx: Sequence[int], nslots: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in idx)
    if len(idx) > MAX_PARTIAL_ORDER:
        raise UnsupportedOrderError(f"order {len(idx)} > {MAX_PARTIAL_ORDER} is not supported")
    for i in idx:
        if not 0 <= i < nslots:
            raise ValueError(f"slot {i} out of range for {nslots} variables")
    return idx


def evaluate_jet(f: ScalarField, p: JetPoint, order: int) -> Jet:
    """Expand ``f`` around ``p`` to the given order (no order cap)."""
    alg = algebra(2 * p.n, order)
    z = alg.variables(p.z)
    return f(z[: p.n], z[p.n :])


def partial(f: ScalarField, p: JetPoint, idx: Sequence[int]) -> float:
    """Exact mixed partial of ``f`` at ``p``.

    ``idx`` lists variable slots: ``0..n-1`` are ``x^1..x^n`` and ``n..2n-1``
    are ``y^1..y^n``.  An empty index returns ``f(p)``.
    """
    idx = _validate_index(idx, 2 * p.n)
    out = evaluate_jet(f, p, len(idx))
    if not isinstance(out, Jet):
        return float(out) if not idx else 0.0
    return out.derivative(idx)


def _default_step(order: int) -> float:
    return 1e-2


def fd_oracle(
    f: ScalarField,
    p: JetPoint,
    idx: Sequence[int],
    step: float | None = None,
    levels: int = 3,
) -> float:
    """Central finite differences with Richardson extrapolation.

    Independent of the jet engine: ``f`` is called on plain float arrays only.
    """
    idx = _validate_index(idx, 2 * p.n)
    z0 = p.z
    n = p.n

    def call(z):
        return float(f(z[:n], z[n:]))

    if not idx:
        return call(z0)
    h0 = _default_step(len(idx)) if step is None else float(step)
    if not (h0 > 0) or h0 / 2 ** (levels - 1) < 1e-12 * max(1.0, float(np.max(np.abs(z0)))):
        raise OracleUnstableError(f"finite-difference step {h0} underflows at this point")

    def central(h):
        total = 0.0
        for signs in itertools.product((1, -1), repeat=len(idx)):
            z = z0.copy()
            for s, slot in zip(signs, idx):
                z[slot] += s * h
            if np.linalg.norm(z[n:]) < SLIT_TOLERANCE:
                raise OracleUnstableError("stencil reaches the zero section")
            total += math.prod(signs) * call(z)
        return total / (2 * h) ** len(idx)

    table = [central(h0 / 2**k) for k in range(levels)]
    for m in range(1, levels):
        fac = 4.0**m
        table = [(fac * table[k + 1] - table[k]) / (fac - 1) for k in range(len(table) - 1)]
    out = table[0]
    if not math.isfinite(out):
        raise OracleUnstableError("non-finite finite-difference estimate")
    return out
