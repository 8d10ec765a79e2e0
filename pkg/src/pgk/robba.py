"""Generalized power series in u with exponents in Z[1/p], and the embedding of X.

Exponent vectors have one rational entry per variable, with denominators
dividing p^l.  Coefficients lie in Z/p^n and are fixed by the Frobenius,
which scales exponents by p and is therefore bijective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .scalars import DomainError, PrecCtx, vp_mod

Exp = tuple[Fraction, ...]


class CapExceeded(ArithmeticError):
    """An intermediate series grew beyond the configured number of terms."""


def _denominator_level(e: Fraction, p: int) -> int:
    d, level = e.denominator, 0
    while d % p == 0:
        d //= p
        level += 1
    if d != 1:
        raise DomainError(f"exponent {e} is not in Z[1/{p}]")
    return level


@dataclass(frozen=True)
class GenSeries:
    """Finite representative sum c_e u^e; terms with an exponent entry above ``cap`` are dropped."""

    ctx: PrecCtx
    terms: Mapping[Exp, int]
    level: int = 0
    cap: Fraction | None = None

    def __init__(self, ctx: PrecCtx, terms: Mapping, level: int | None = None, cap=None,
                 max_terms: int | None = None):
        q, p, k = ctx.q, ctx.p, ctx.dim
        cap = None if cap is None else Fraction(cap)
        clean: dict[Exp, int] = {}
        lvl = 0
        for e, c in terms.items():
            e = tuple(Fraction(x) for x in (e if isinstance(e, tuple) else (e,)))
            if len(e) != k:
                raise DomainError(f"exponent {e} has the wrong number of entries")
            if cap is not None and any(x > cap for x in e):
                continue
            c %= q
            if c:
                clean[e] = (clean.get(e, 0) + c) % q
                lvl = max([lvl] + [_denominator_level(x, p) for x in e])
        clean = {e: c for e, c in clean.items() if c}
        if max_terms is not None and len(clean) > max_terms:
            raise CapExceeded(f"{len(clean)} terms exceed the limit {max_terms}")
        if level is not None and lvl > level:
            raise DomainError(f"exponent denominators need level {lvl} > {level}")
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "level", lvl if level is None else level)
        object.__setattr__(self, "cap", cap)

    # constructors ------------------------------------------------------------
    @classmethod
    def zero(cls, ctx: PrecCtx, cap=None) -> "GenSeries":
        return cls(ctx, {}, 0, cap)

    @classmethod
    def one(cls, ctx: PrecCtx, cap=None) -> "GenSeries":
        return cls(ctx, {(0,) * ctx.dim: 1}, 0, cap)

    @classmethod
    def u(cls, ctx: PrecCtx, alpha: str | None = None, power=1, cap=None) -> "GenSeries":
        i = 0 if alpha is None else ctx.index(alpha)
        e = [Fraction(0)] * ctx.dim
        e[i] = Fraction(power)
        return cls(ctx, {tuple(e): 1}, None, cap)

    # arithmetic ----------------------------------------------------------------
    def _cap_with(self, other: "GenSeries"):
        caps = [c for c in (self.cap, other.cap) if c is not None]
        return min(caps) if caps else None

    def _check(self, other: "GenSeries"):
        if self.ctx != other.ctx:
            raise DomainError("series over different contexts")

    def __add__(self, other: "GenSeries") -> "GenSeries":
        self._check(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0) + c
        return GenSeries(self.ctx, t, max(self.level, other.level), self._cap_with(other))

    def __neg__(self) -> "GenSeries":
        return GenSeries(self.ctx, {e: -c for e, c in self.terms.items()}, self.level, self.cap)

    def __sub__(self, other: "GenSeries") -> "GenSeries":
        return self + (-other)

    def scale(self, c: int) -> "GenSeries":
        return GenSeries(self.ctx, {e: c * v for e, v in self.terms.items()}, self.level, self.cap)

    def mul(self, other: "GenSeries", max_terms: int | None = None) -> "GenSeries":
        self._check(other)
        cap = self._cap_with(other)
        q = self.ctx.q
        t: dict[Exp, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                if cap is not None and any(x > cap for x in e):
                    continue
                t[e] = (t.get(e, 0) + c1 * c2) % q
            if max_terms is not None and len(t) > max_terms:
                raise CapExceeded(f"product exceeds {max_terms} terms")
        return GenSeries(self.ctx, t, max(self.level, other.level), cap)

    __mul__ = mul

    def power(self, k: int, max_terms: int | None = None) -> "GenSeries":
        if k < 0:
            raise DomainError("negative powers are not defined here")
        out = GenSeries.one(self.ctx, self.cap)
        for _ in range(k):
            out = out.mul(self, max_terms)
        return out

    def shift(self, exps: Iterable) -> "GenSeries":
        """Multiply by the monomial u^exps (exponents may be negative)."""
        d = tuple(Fraction(x) for x in exps)
        return GenSeries(self.ctx, {tuple(a + b for a, b in zip(e, d)): c for e, c in self.terms.items()},
                         None, self.cap)

    def with_cap(self, cap) -> "GenSeries":
        return GenSeries(self.ctx, self.terms, self.level, cap)

    # queries -------------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def valuation(self) -> float:
        """Minimal p-adic valuation of a coefficient (inf for zero)."""
        p, n = self.ctx.p, self.ctx.n
        return min((vp_mod(c, p, n) for c in self.terms.values()), default=math.inf)

    def support_lo(self) -> Exp | None:
        if not self.terms:
            return None
        return tuple(min(e[i] for e in self.terms) for i in range(self.ctx.dim))

    def coeff(self, e) -> int:
        e = tuple(Fraction(x) for x in (e if isinstance(e, tuple) else (e,)))
        return self.terms.get(e, 0)

    def __eq__(self, other):
        if not isinstance(other, GenSeries):
            return NotImplemented
        return self.ctx == other.ctx and dict(self.terms) == dict(other.terms)

    def __hash__(self):
        return hash((self.ctx, frozenset(self.terms.items())))

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        q = self.ctx.q
        parts = []
        for e in sorted(self.terms):
            c = self.terms[e]
            c = c - q if c > q // 2 else c
            mono = "*".join(f"u{a}^{x}" if x != 1 else f"u{a}"
                            for a, x in zip(self.ctx.delta, e) if x != 0)
            parts.append(str(c) if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"GenSeries({self.to_text()})"


def gphi(f: GenSeries) -> GenSeries:
    """Frobenius: u^e -> u^{pe}."""
    p = f.ctx.p
    return GenSeries(f.ctx, {tuple(p * x for x in e): c for e, c in f.terms.items()}, None, f.cap)


def gphi_inv(f: GenSeries) -> GenSeries:
    """Inverse Frobenius: u^e -> u^{e/p}; the denominator bound grows by one."""
    p = f.ctx.p
    return GenSeries(f.ctx, {tuple(x / p for x in e): c for e, c in f.terms.items()}, f.level + 1, f.cap)


def gphi_power(f: GenSeries, j: int) -> GenSeries:
    """phi^j for any integer j."""
    p = f.ctx.p
    s = Fraction(p) ** j
    lvl = max(0, f.level - j) if j >= 0 else f.level - j
    return GenSeries(f.ctx, {tuple(s * x for x in e): c for e, c in f.terms.items()}, max(lvl, 0), f.cap)


def defect(iota: GenSeries, max_terms: int | None = None) -> GenSeries:
    """(iota + 1)^p - 1 - phi(iota): zero exactly when iota is compatible with Frobenius."""
    ctx = iota.ctx
    one = GenSeries.one(ctx, iota.cap)
    return (iota + one).power(ctx.p, max_terms) - one - gphi(iota)


@dataclass(frozen=True)
class IotaStep:
    level: int
    iota: GenSeries
    defect: GenSeries

    @property
    def defect_valuation(self) -> float:
        return self.defect.valuation()


def iota_iterate(ctx: PrecCtx, steps: int, cap, alpha: str | None = None,
                 max_terms: int = 200_000) -> list[IotaStep]:
    """The approximations iota_1, ..., iota_steps of the image of X, truncated at ``cap``.

    iota_1 = u and iota_{l+1} = iota_l + u * sum_j p^j phi^{-j-1}(defect(iota_l) / u^p),
    the sum stopping at j = n - 1 since p^n vanishes.
    """
    if steps < 1:
        raise DomainError("need at least one step")
    p, n, k = ctx.p, ctx.n, ctx.dim
    i = 0 if alpha is None else ctx.index(alpha)
    unit = [Fraction(0)] * k
    unit[i] = Fraction(1)
    u_vec = tuple(unit)
    cur = GenSeries.u(ctx, alpha, 1, cap)
    out = []
    for level in range(1, steps + 1):
        D = defect(cur, max_terms)
        out.append(IotaStep(level, cur, D))
        if level == steps:
            break
        base = D.shift(tuple(-p * x for x in u_vec)).with_cap(None)
        corr = GenSeries.zero(ctx)
        for j in range(n):
            term = gphi_power(base, -(j + 1)).scale(p**j)
            corr = corr + term
            if len(corr.terms) > max_terms:
                raise CapExceeded(f"correction exceeds {max_terms} terms")
        corr = corr.shift(u_vec).with_cap(cap)
        cur = (cur + corr).with_cap(cap)
    return out


def iota_monomial(ctx: PrecCtx, exps: Mapping[str, int], steps: int, cap, max_terms: int = 200_000) -> GenSeries:
    """Image of prod X_alpha^{k_alpha} (k >= 0): product of the per-variable images."""
    out = GenSeries.one(ctx, cap)
    for a, kk in exps.items():
        if kk < 0:
            raise DomainError("only non-negative exponents are supported")
        img = iota_iterate(ctx, steps, cap, a, max_terms)[-1].iota
        out = out.mul(img.power(kk, max_terms), max_terms)
    return out
