"""Truncated power series in one and two variables.

Coefficients live in dense arrays: ``c[i, j]`` multiplies ``x**i * y**j``.
Everything above the total degree ``order`` is zero, and every operation
truncates back to ``order``. Instances are immutable.
"""

from __future__ import annotations

import math
from enum import Enum
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.signal import convolve2d

from .errors import ImplicitSolveFailed, NonzeroConstantTerm, SingularJacobian

DEFAULT_ORDER = 12
ZERO_THRESHOLD = 1e-11
JACOBIAN_TOL = 1e-12


class Axis(str, Enum):
    X = "x"
    Y = "y"


@lru_cache(maxsize=64)
def _mask(order: int) -> np.ndarray:
    i, j = np.indices((order + 1, order + 1))
    m = (i + j) <= order
    m.setflags(write=False)
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class BivariateSeries:
    """Truncated series sum c_ij x^i y^j with i + j <= order."""

    __slots__ = ("_c", "_order")

    def __init__(self, terms: Mapping[tuple[int, int], float] | None = None, order: int = DEFAULT_ORDER):
        order = int(order)
        if order < 0:
            raise ValueError("order must be >= 0")
        c = np.zeros((order + 1, order + 1))
        for (i, j), v in (terms or {}).items():
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise ValueError(f"bad exponent pair {(i, j)!r}")
            if not math.isfinite(v):
                raise ValueError(f"non-finite coefficient at {(i, j)!r}")
            if i + j <= order:
                c[int(i), int(j)] += float(v)
        self._order = order
        self._c = _frozen(c)

    @classmethod
    def from_array(cls, arr, order: int | None = None) -> "BivariateSeries":
        """Build from a dense coefficient array, truncating to ``order``."""
        a = np.asarray(arr, dtype=float)
        if a.ndim != 2:
            raise ValueError("expected a 2-D coefficient array")
        if order is None:
            order = max(a.shape) - 1
        c = np.zeros((order + 1, order + 1))
        n0 = min(a.shape[0], order + 1)
        n1 = min(a.shape[1], order + 1)
        c[:n0, :n1] = a[:n0, :n1]
        c[~_mask(order)] = 0.0
        out = cls.__new__(cls)
        out._order = order
        out._c = _frozen(c)
        return out

    @classmethod
    def constant(cls, value: float, order: int = DEFAULT_ORDER) -> "BivariateSeries":
        return cls({(0, 0): value}, order)

    @classmethod
    def x(cls, order: int = DEFAULT_ORDER) -> "BivariateSeries":
        return cls({(1, 0): 1.0}, order)

    @classmethod
    def y(cls, order: int = DEFAULT_ORDER) -> "BivariateSeries":
        return cls({(0, 1): 1.0}, order)

    @classmethod
    def linear(cls, c0: float, cx: float, cy: float, order: int = DEFAULT_ORDER) -> "BivariateSeries":
        return cls({(0, 0): c0, (1, 0): cx, (0, 1): cy}, order)

    # -- access -----------------------------------------------------------

    @property
    def order(self) -> int:
        return self._order

    @property
    def array(self) -> np.ndarray:
        """Read-only dense coefficient array of shape (order+1, order+1)."""
        return self._c

    @property
    def terms(self) -> dict[tuple[int, int], float]:
        ii, jj = np.nonzero(self._c)
        return {(int(i), int(j)): float(self._c[i, j]) for i, j in zip(ii, jj)}

    def coefficient(self, i: int, j: int) -> float:
        if i < 0 or j < 0 or i + j > self._order:
            return 0.0
        return float(self._c[i, j])

    def sorted_terms(self) -> list[tuple[int, int, float]]:
        """Nonzero terms by ascending total degree, then ascending i."""
        out = []
        for d in range(self._order + 1):
            for i in range(d + 1):
                v = self._c[i, d - i]
                if v != 0.0:
                    out.append((i, d - i, float(v)))
        return out

    def with_order(self, order: int) -> "BivariateSeries":
        return BivariateSeries.from_array(self._c, order)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self._c) <= tol))

    def homogeneous(self, d: int) -> np.ndarray:
        """Coefficients a_0..a_d of x^(d-i) y^i in the degree-d part."""
        if d > self._order:
            return np.zeros(d + 1)
        return np.array([self._c[d - i, i] for i in range(d + 1)])

    def restrict_x(self) -> "UnivariateSeries":
        """The series of x -> s(x, 0)."""
        return UnivariateSeries(self._c[:, 0], self._order)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x^{i}*y^{j}" for i, j, c in self.sorted_terms()) or "0"
        return f"BivariateSeries({body}; order={self._order})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BivariateSeries):
            return NotImplemented
        return self._order == other._order and np.array_equal(self._c, other._c)

    __hash__ = None

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "BivariateSeries":
        if isinstance(other, BivariateSeries):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return BivariateSeries.constant(float(other), self._order)
        raise TypeError(f"cannot combine BivariateSeries with {type(other).__name__}")

    def __add__(self, other):
        o = self._coerce(other)
        n = min(self._order, o._order)
        return BivariateSeries.from_array(self._c[: n + 1, : n + 1] + o._c[: n + 1, : n + 1], n)

    __radd__ = __add__

    def __neg__(self):
        return BivariateSeries.from_array(-self._c, self._order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return BivariateSeries.from_array(self._c * float(other), self._order)
        o = self._coerce(other)
        n = min(self._order, o._order)
        full = convolve2d(self._c[: n + 1, : n + 1], o._c[: n + 1, : n + 1])
        return BivariateSeries.from_array(full[: n + 1, : n + 1], n)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = BivariateSeries.constant(1.0, self._order)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def reciprocal(self) -> "BivariateSeries":
        """1/s for a series with nonzero constant term."""
        c0 = self._c[0, 0]
        if abs(c0) <= JACOBIAN_TOL:
            raise SingularJacobian("reciprocal of a series with vanishing constant term")
        r = (self - c0) * (-1.0 / c0)
        acc = BivariateSeries.constant(1.0, self._order)
        term = acc
        for _ in range(self._order):
            term = term * r
            if term.is_zero():
                break
            acc = acc + term
        return acc * (1.0 / c0)

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return self * self._coerce(other).reciprocal()

    # -- calculus and evaluation ------------------------------------------

    def eval(self, x: float, y: float) -> float:
        total = 0.0
        for i, j, c in self.sorted_terms():
            total += c * x**i * y**j
        return total

    __call__ = eval

    def partial(self, axis: Axis | str) -> "BivariateSeries":
        axis = Axis(axis)
        n = max(self._order - 1, 0)
        out = np.zeros((n + 1, n + 1))
        if self._order == 0:
            return BivariateSeries.from_array(out, 0)
        k = np.arange(1, self._order + 1, dtype=float)
        if axis is Axis.X:
            out[:, :] = (self._c[1:, :] * k[:, None])[: n + 1, : n + 1]
        else:
            out[:, :] = (self._c[:, 1:] * k[None, :])[: n + 1, : n + 1]
        return BivariateSeries.from_array(out, n)

    def compose_y(self, u: "UnivariateSeries") -> "UnivariateSeries":
        if u.coefficients[0] != 0.0:
            raise NonzeroConstantTerm("compose_y requires u(0) = 0")
        return self._compose_y(u)

    def _compose_y(self, u: "UnivariateSeries") -> "UnivariateSeries":
        # Horner in y: sum_j (sum_i c_ij x^i) u^j
        n = min(self._order, u.order)
        uc = u.coefficients[: n + 1]
        acc = np.zeros(n + 1)
        for j in range(n, -1, -1):
            acc = np.convolve(acc, uc)[: n + 1]
            acc[: n + 1] += self._c[: n + 1, j]
        return UnivariateSeries(acc, n)

    def substitute(self, X: "BivariateSeries", Y: "BivariateSeries") -> "BivariateSeries":
        """The series of s(X, Y) for bivariate series X, Y (constants allowed).

        Exact for polynomial ``self`` up to the common order; Horner in both
        variables.
        """
        n = min(X.order, Y.order)
        out = BivariateSeries({}, n)
        for i in range(self._order, -1, -1):
            inner = BivariateSeries({}, n)
            for j in range(self._order - i, -1, -1):
                inner = inner * Y + float(self._c[i, j])
            out = out * X + inner
        return out


class UnivariateSeries:
    """Dense truncated series c_0 + c_1 x + ... + c_order x^order."""

    __slots__ = ("_c", "_order")

    def __init__(self, coefficients: Iterable[float], order: int | None = None):
        c = np.asarray(list(coefficients) if not isinstance(coefficients, np.ndarray) else coefficients, dtype=float)
        if order is None:
            order = max(len(c) - 1, 0)
        out = np.zeros(order + 1)
        n = min(len(c), order + 1)
        out[:n] = c[:n]
        if not np.all(np.isfinite(out)):
            raise ValueError("non-finite coefficient")
        self._order = int(order)
        self._c = _frozen(out)

    @property
    def order(self) -> int:
        return self._order

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    def __getitem__(self, k: int) -> float:
        return float(self._c[k]) if 0 <= k <= self._order else 0.0

    def leading_exponent(self, threshold: float = ZERO_THRESHOLD) -> int | None:
        idx = np.nonzero(np.abs(self._c) > threshold)[0]
        return int(idx[0]) if len(idx) else None

    def leading_coefficient(self, threshold: float = ZERO_THRESHOLD) -> float | None:
        k = self.leading_exponent(threshold)
        return None if k is None else float(self._c[k])

    def eval(self, x: float) -> float:
        total = 0.0
        for c in self._c[::-1]:
            total = total * x + c
        return float(total)

    __call__ = eval

    def derivative(self) -> "UnivariateSeries":
        n = max(self._order - 1, 0)
        if self._order == 0:
            return UnivariateSeries([0.0], 0)
        return UnivariateSeries(self._c[1:] * np.arange(1, self._order + 1), n)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            c = self._c.copy()
            c[0] += other
            return UnivariateSeries(c, self._order)
        n = min(self._order, other._order)
        return UnivariateSeries(self._c[: n + 1] + other._c[: n + 1], n)

    def __neg__(self):
        return UnivariateSeries(-self._c, self._order)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return UnivariateSeries(self._c * float(other), self._order)
        n = min(self._order, other._order)
        return UnivariateSeries(np.convolve(self._c[: n + 1], other._c[: n + 1])[: n + 1], n)

    __rmul__ = __mul__

    def reciprocal(self) -> "UnivariateSeries":
        c0 = self._c[0]
        if abs(c0) <= JACOBIAN_TOL:
            raise SingularJacobian("reciprocal of a series with vanishing constant term")
        out = np.zeros(self._order + 1)
        out[0] = 1.0 / c0
        for k in range(1, self._order + 1):
            out[k] = -np.dot(self._c[1 : k + 1], out[k - 1 :: -1][:k]) / c0
        return UnivariateSeries(out, self._order)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self._c) <= tol))

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnivariateSeries):
            return NotImplemented
        return self._order == other._order and np.array_equal(self._c, other._c)

    __hash__ = None

    def __repr__(self) -> str:
        return f"UnivariateSeries({self._c.tolist()})"


# -- module-level operations ---------------------------------------------


def evaluate(s: BivariateSeries, x: float, y: float) -> float:
    return s.eval(x, y)


def partial(s: BivariateSeries, axis: Axis | str) -> BivariateSeries:
    return s.partial(axis)


def compose_y(s: BivariateSeries, u: UnivariateSeries) -> UnivariateSeries:
    return s.compose_y(u)


def solve_implicit(F: BivariateSeries, order: int = DEFAULT_ORDER, max_iter: int = 12) -> UnivariateSeries:
    """Series phi with F(x, phi(x)) = 0 through degree ``order`` and phi(0) = 0.

    Newton's method on whole series: each sweep doubles the number of
    correct coefficients.
    """
    if abs(F.coefficient(0, 0)) > 1e-12:
        raise ImplicitSolveFailed(f"F(0,0) = {F.coefficient(0, 0):g} is not zero")
    fy0 = F.coefficient(0, 1)
    if abs(fy0) <= JACOBIAN_TOL:
        raise SingularJacobian(f"|F_y(0,0)| = {abs(fy0):g} is below tolerance")
    Fw = F.with_order(max(order, F.order))
    Fy = Fw.partial(Axis.Y).with_order(order)
    phi = UnivariateSeries(np.zeros(order + 1), order)
    for _ in range(max_iter):
        r = Fw._compose_y(phi)
        if r.is_zero():
            break
        d = Fy._compose_y(phi)
        step = r / d
        phi = phi - step
        phi = UnivariateSeries(np.concatenate([[0.0], phi.coefficients[1:]]), order)
        if np.max(np.abs(step.coefficients)) <= 1e-300:
            break
    return phi


def _rotation_ok(rot: np.ndarray) -> None:
    if rot.shape != (2, 2):
        raise ValueError("rotation must be 2x2")
    if not np.allclose(rot.T @ rot, np.eye(2), atol=1e-10) or np.linalg.det(rot) < 0:
        raise ValueError("rotation must be orthogonal with determinant +1")


def rotation2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def transform(
    s: BivariateSeries,
    rot=None,
    shift=(0.0, 0.0),
    add: tuple[float, float, float] | None = None,
) -> BivariateSeries:
    """Series of (u, v) -> s(rot @ (u, v) + shift) + add[0] + add[1] u + add[2] v."""
    rot = np.eye(2) if rot is None else np.asarray(rot, dtype=float)
    _rotation_ok(rot)
    n = s.order
    X = BivariateSeries.linear(shift[0], rot[0, 0], rot[0, 1], n)
    Y = BivariateSeries.linear(shift[1], rot[1, 0], rot[1, 1], n)
    out = s.substitute(X, Y)
    if add is not None:
        out = out + BivariateSeries.linear(*add, order=n)
    return out


def from_json(doc: Mapping) -> BivariateSeries:
    """Parse the ``{"order": n, "terms": [{"i":..,"j":..,"c":..}]}`` format."""
    if not isinstance(doc, Mapping) or "terms" not in doc:
        raise ValueError("series document needs a 'terms' list")
    order = doc.get("order", DEFAULT_ORDER)
    if not isinstance(order, int) or isinstance(order, bool) or order < 0:
        raise ValueError("series 'order' must be a non-negative integer")
    terms: dict[tuple[int, int], float] = {}
    for t in doc["terms"]:
        try:
            i, j, c = t["i"], t["j"], t["c"]
        except (KeyError, TypeError):
            raise ValueError(f"malformed term {t!r}") from None
        for e in (i, j):
            if not isinstance(e, int) or isinstance(e, bool) or e < 0:
                raise ValueError(f"exponents must be non-negative integers, got {t!r}")
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ValueError(f"coefficient must be a finite number, got {t!r}")
        if (i, j) in terms:
            raise ValueError(f"duplicate term ({i}, {j})")
        terms[(i, j)] = float(c)
    return BivariateSeries(terms, order)


def to_json(s: BivariateSeries) -> dict:
    return {"order": s.order, "terms": [{"i": i, "j": j, "c": c} for i, j, c in s.sorted_terms()]}
