"""Residue-ring arithmetic in Z/p^n.

Valuations, Teichmuller lifts, and p-adic binomial coefficients at a
controlled working precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


class DomainError(ValueError):
    pass


class PrecisionError(ArithmeticError):
    pass


class ContextError(ValueError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, math.isqrt(p) + 1))


def vp(x: int, p: int) -> float:
    """p-adic valuation of an integer; ``math.inf`` for zero."""
    if x == 0:
        return math.inf
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def vp_mod(x: int, p: int, n: int) -> float:
    """Valuation of a residue mod p^n, in [0, n) or ``math.inf``."""
    x %= p**n
    return vp(x, p)


def unit_part(x: int, p: int) -> int:
    while x and x % p == 0:
        x //= p
    return x


def smallest_primitive_root(p: int) -> int:
    factors = [q for q in range(2, p) if (p - 1) % q == 0 and is_prime(q)]
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in factors):
            return g
    return 1


@dataclass(frozen=True)
class PrecCtx:
    p: int
    n: int
    delta: tuple[str, ...] = ("a",)
    slack: int = 0

    def __post_init__(self):
        if not is_prime(self.p):
            raise DomainError(f"p={self.p} is not prime")
        if self.p == 2:
            raise DomainError("p = 2 is not supported")
        if self.n < 1:
            raise DomainError("precision n must be >= 1")
        object.__setattr__(self, "delta", tuple(self.delta))
        if not self.delta:
            raise DomainError("delta must be non-empty")
        if len(set(self.delta)) != len(self.delta):
            raise DomainError("delta has duplicate names")
        if self.slack < 0:
            raise DomainError("slack must be >= 0")

    @property
    def q(self) -> int:
        return self.p**self.n

    @property
    def dim(self) -> int:
        return len(self.delta)

    def index(self, alpha: str | int) -> int:
        if isinstance(alpha, int):
            if not 0 <= alpha < self.dim:
                raise ContextError(f"variable index {alpha} out of range")
            return alpha
        try:
            return self.delta.index(alpha)
        except ValueError:
            raise ContextError(f"unknown variable {alpha!r}") from None

    def with_n(self, n: int) -> "PrecCtx":
        return PrecCtx(self.p, n, self.delta, self.slack)


class Scalar:
    """An element of Z/p^n tied to a context."""

    __slots__ = ("residue", "ctx")

    def __init__(self, value: int, ctx: PrecCtx):
        self.ctx = ctx
        self.residue = int(value) % ctx.q

    def _coerce(self, other) -> int:
        if isinstance(other, Scalar):
            if other.ctx.p != self.ctx.p or other.ctx.n != self.ctx.n:
                raise ContextError("scalar contexts differ")
            return other.residue
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Scalar(self.residue + o, self.ctx)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Scalar(self.residue - o, self.ctx)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Scalar(o - self.residue, self.ctx)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Scalar(self.residue * o, self.ctx)

    __rmul__ = __mul__

    def __neg__(self):
        return Scalar(-self.residue, self.ctx)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        return Scalar(pow(self.residue, k, self.ctx.q), self.ctx)

    def inverse(self) -> "Scalar":
        if self.residue % self.ctx.p == 0:
            raise DomainError(f"{self.residue} is not a unit mod {self.ctx.p}")
        return Scalar(pow(self.residue, -1, self.ctx.q), self.ctx)

    def valuation(self) -> float:
        return vp(self.residue, self.ctx.p)

    def symmetric(self) -> int:
        """Representative in (-q/2, q/2]."""
        q = self.ctx.q
        r = self.residue
        return r - q if r > q // 2 else r

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return (self.residue - o) % self.ctx.q == 0

    def __hash__(self):
        return hash((self.residue, self.ctx.p, self.ctx.n))

    def __int__(self):
        return self.residue

    def __repr__(self):
        return f"Scalar({self.residue} mod {self.ctx.p}^{self.ctx.n})"


@dataclass(frozen=True)
class PadicExponent:
    """A p-adic integer known modulo p^prec, or an exact integer."""

    approx: int
    prec: int | None = None  # None: ``approx`` is the exact integer

    @property
    def exact(self) -> bool:
        return self.prec is None

    @classmethod
    def integer(cls, c: int) -> "PadicExponent":
        return cls(int(c), None)

    def residue(self, modulus: int) -> int:
        return self.approx % modulus

    def is_unit(self, p: int) -> bool:
        return self.approx % p != 0


def as_exponent(c) -> PadicExponent:
    if isinstance(c, PadicExponent):
        return c
    if isinstance(c, int):
        return PadicExponent.integer(c)
    raise TypeError(f"cannot use {c!r} as an exponent")


def teichmuller_int(a: int, p: int, n: int) -> int:
    """Teichmuller lift of ``a`` mod p^n as a plain integer."""
    if a % p == 0:
        raise DomainError("teichmuller lift of 0 mod p is undefined")
    m = p**n
    x = a % m
    # x -> x^p converges to the lift after n steps
    for _ in range(n):
        x = pow(x, p, m)
    return x


def teichmuller(a: int, ctx: PrecCtx) -> Scalar:
    if not 1 <= a <= ctx.p - 1:
        if a % ctx.p == 0:
            raise DomainError("teichmuller lift of 0 mod p is undefined")
        raise DomainError(f"expected 1 <= a <= p-1, got {a}")
    return Scalar(teichmuller_int(a, ctx.p, ctx.n), ctx)


def vp_factorial(k: int, p: int) -> int:
    v, pk = 0, p
    while pk <= k:
        v += k // pk
        pk *= p
    return v


def binom_int(c, k: int, p: int, n: int) -> int:
    """C(c, k) mod p^n as an integer; ``c`` int or PadicExponent."""
    if k < 0:
        return 0
    c = as_exponent(c)
    q = p**n
    if c.exact:
        return _binom_exact(c.approx, k) % q
    v = vp_factorial(k, p)
    avail = c.prec - n
    if v > avail:
        raise PrecisionError(f"binomial C(c,{k}) needs {v} slack digits, have {avail}")
    return _binom_padic_cached(c.approx % p ** c.prec, c.prec, k, p, n)


@lru_cache(maxsize=None)
def _binom_exact(c: int, k: int) -> int:
    if c >= 0:
        return math.comb(c, k)
    return (-1) ** k * math.comb(k - c - 1, k)


@lru_cache(maxsize=None)
def _binom_padic_cached(c: int, prec: int, k: int, p: int, n: int) -> int:
    v = vp_factorial(k, p)
    m = p ** (n + v)
    num = 1
    for j in range(k):
        num = num * ((c - j) % m) % m
    # num is c(c-1)...(c-k+1) mod p^(n+v); it is divisible by p^v
    den = math.factorial(k)
    den_unit = den // p**v
    return (num // p**v) * pow(den_unit, -1, p**n) % p**n


def binom_padic(c, k: int, ctx: PrecCtx) -> Scalar:
    return Scalar(binom_int(c, k, ctx.p, ctx.n), ctx)


def inv_mod(a: int, m: int) -> int:
    return pow(a, -1, m)
