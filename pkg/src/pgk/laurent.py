"""Sparse multivariable Laurent series over Z/p^n with per-variable windows.

A series is either exact (a Laurent polynomial, ``window is None``) or
windowed: coefficients are guaranteed at every exponent vector whose
coordinates are all <= ``window.hi``, and the true support lies above
``window.lo``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .scalars import ContextError, DomainError, PrecCtx, PrecisionError, Scalar

ExpVec = tuple[int, ...]


class NotAUnit(DomainError):
    pass


@dataclass(frozen=True)
class Window:
    """Per-axis bounds; ``hi`` entries may be ``math.inf`` (axis not truncated)."""

    lo: ExpVec
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("window bounds have different lengths")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty window {self.lo}..{self.hi}")

    def contains(self, e: ExpVec) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, e, self.hi))


def _ints(hi) -> tuple:
    # math.inf marks an axis with no truncation
    return tuple(h if h == math.inf else int(h) for h in hi)


def _inf_tuple(d: int) -> tuple:
    return (math.inf,) * d


class LaurentSeries:
    __slots__ = ("ctx", "terms", "window")

    def __init__(self, ctx: PrecCtx, terms: Mapping[ExpVec, int] | None = None,
                 window: Window | None = None, _clean: bool = False):
        self.ctx = ctx
        self.window = window
        if _clean:
            self.terms = dict(terms)
            return
        q = ctx.q
        d = ctx.dim
        out: dict[ExpVec, int] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != d:
                raise ContextError(f"exponent {e} has wrong length for {ctx.delta}")
            c = int(c) % q
            if c:
                out[e] = (out.get(e, 0) + c) % q
                if not out[e]:
                    del out[e]
        if window is not None:
            out = {e: c for e, c in out.items() if all(x <= h for x, h in zip(e, window.hi))}
        self.terms = out

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, ctx: PrecCtx) -> "LaurentSeries":
        return cls(ctx, {}, _clean=True)

    @classmethod
    def constant(cls, ctx: PrecCtx, c: int) -> "LaurentSeries":
        return cls(ctx, {(0,) * ctx.dim: c})

    @classmethod
    def one(cls, ctx: PrecCtx) -> "LaurentSeries":
        return cls.constant(ctx, 1)

    @classmethod
    def monomial(cls, ctx: PrecCtx, exps: Iterable[int], c: int = 1) -> "LaurentSeries":
        return cls(ctx, {tuple(exps): c})

    @classmethod
    def var(cls, ctx: PrecCtx, alpha, power: int = 1) -> "LaurentSeries":
        i = ctx.index(alpha)
        e = [0] * ctx.dim
        e[i] = power
        return cls.monomial(ctx, e)

    # basic properties ----------------------------------------------------
    @property
    def exact(self) -> bool:
        return self.window is None

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, e: ExpVec) -> int:
        return self.terms.get(tuple(e), 0)

    def support_lo(self) -> ExpVec:
        """Per-variable lower bound of the (true) support."""
        if self.window is not None:
            return self.window.lo
        if not self.terms:
            return (0,) * self.ctx.dim
        return tuple(min(e[i] for e in self.terms) for i in range(self.ctx.dim))

    def support_hi(self) -> ExpVec:
        if not self.terms:
            return (0,) * self.ctx.dim
        return tuple(max(e[i] for e in self.terms) for i in range(self.ctx.dim))

    def guaranteed_hi(self) -> tuple:
        return _inf_tuple(self.ctx.dim) if self.window is None else self.window.hi

    def _check(self, other: "LaurentSeries"):
        if not isinstance(other, LaurentSeries):
            raise TypeError(f"expected LaurentSeries, got {type(other).__name__}")
        if other.ctx.p != self.ctx.p or other.ctx.n != self.ctx.n or other.ctx.delta != self.ctx.delta:
            raise ContextError("series live in different rings")

    def _coerce(self, other) -> "LaurentSeries":
        if isinstance(other, (int, Scalar)):
            return LaurentSeries.constant(self.ctx, int(other))
        self._check(other)
        return other

    # windows ---------------------------------------------------------------
    @staticmethod
    def _merge_add(f: "LaurentSeries", g: "LaurentSeries") -> Window | None:
        if f.window is None and g.window is None:
            return None
        d = f.ctx.dim
        hf, hg = f.guaranteed_hi(), g.guaranteed_hi()
        hi = tuple(min(a, b) for a, b in zip(hf, hg))
        lo = tuple(min(a, b) for a, b in zip(f.support_lo(), g.support_lo()))
        lo = tuple(min(a, b) for a, b in zip(lo, hi))
        return Window(lo, _ints(hi)) if d else None

    @staticmethod
    def _merge_mul(f: "LaurentSeries", g: "LaurentSeries") -> Window | None:
        if f.window is None and g.window is None:
            return None
        lf, lg = f.support_lo(), g.support_lo()
        hf, hg = f.guaranteed_hi(), g.guaranteed_hi()
        hi = tuple(min(a + lb, b + la) for a, b, la, lb in zip(hf, hg, lf, lg))
        lo = tuple(min(a + b, h) for a, b, h in zip(lf, lg, hi))
        return Window(lo, _ints(hi))

    def truncate(self, hi: Iterable[int]) -> "LaurentSeries":
        """Forget everything above ``hi`` (per variable)."""
        cur = self.guaranteed_hi()
        hi = _ints(min(a, b) for a, b in zip(hi, cur))
        lo = tuple(min(a, b) for a, b in zip(self.support_lo(), hi))
        terms = {e: c for e, c in self.terms.items() if all(x <= h for x, h in zip(e, hi))}
        return LaurentSeries(self.ctx, terms, Window(lo, hi), _clean=True)

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        q = self.ctx.q
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = (out.get(e, 0) + c) % q
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        w = self._merge_add(self, other)
        return LaurentSeries(self.ctx, out, w, _clean=w is None)

    __radd__ = __add__

    def __neg__(self):
        q = self.ctx.q
        return LaurentSeries(self.ctx, {e: (-c) % q for e, c in self.terms.items()}, self.window, _clean=True)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scalar_mul(self, c: int) -> "LaurentSeries":
        q = self.ctx.q
        c = int(c) % q
        out = {e: v * c % q for e, v in self.terms.items()}
        return LaurentSeries(self.ctx, {e: v for e, v in out.items() if v}, self.window, _clean=True)

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)):
            return self.scalar_mul(int(other))
        self._check(other)
        q = self.ctx.q
        w = self._merge_mul(self, other)
        out: dict[ExpVec, int] = {}
        hi = None if w is None else w.hi
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                if hi is not None and any(x > h for x, h in zip(e, hi)):
                    continue
                out[e] = (out.get(e, 0) + c1 * c2) % q
        return LaurentSeries(self.ctx, {e: v for e, v in out.items() if v}, w, _clean=True)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "LaurentSeries":
        if k < 0:
            raise ValueError("use invert() for negative powers")
        result = LaurentSeries.one(self.ctx)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def shift(self, exps: Iterable[int]) -> "LaurentSeries":
        """Multiply by the monomial X^exps."""
        s = tuple(exps)
        terms = {tuple(a + b for a, b in zip(e, s)): c for e, c in self.terms.items()}
        w = None
        if self.window is not None:
            w = Window(tuple(a + b for a, b in zip(self.window.lo, s)),
                       tuple(a + b for a, b in zip(self.window.hi, s)))
        return LaurentSeries(self.ctx, terms, w, _clean=True)

    def reduce(self, n: int) -> "LaurentSeries":
        """Same series read modulo p^n (n <= ctx.n), in the smaller ring."""
        ctx = self.ctx.with_n(n)
        return LaurentSeries(ctx, self.terms, self.window)

    def lift(self, ctx: PrecCtx) -> "LaurentSeries":
        """Reinterpret coefficients (as representatives) in another context."""
        return LaurentSeries(ctx, self.terms, self.window)

    def valuation(self) -> float:
        """Minimum p-adic valuation of the coefficients."""
        from .scalars import vp

        return min((vp(c, self.ctx.p) for c in self.terms.values()), default=math.inf)

    # comparisons -----------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Scalar)):
            other = LaurentSeries.constant(self.ctx, int(other))
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return (self.ctx.p, self.ctx.n, self.ctx.delta) == (other.ctx.p, other.ctx.n, other.ctx.delta) \
            and self.terms == other.terms and self.window == other.window

    def __hash__(self):
        return hash((tuple(sorted(self.terms.items())), self.window))

    def equal_on_common_window(self, other: "LaurentSeries") -> bool:
        hi = tuple(min(a, b) for a, b in zip(self.guaranteed_hi(), other.guaranteed_hi()))
        diff = self - other
        return all(any(x > h for x, h in zip(e, hi)) for e in diff.terms)

    def __repr__(self):
        w = "" if self.window is None else f" [window hi={self.window.hi}]"
        return f"LaurentSeries({to_text(self)}{w})"

    def __str__(self):
        return to_text(self)


def compare_at(f: LaurentSeries, g: LaurentSeries, window: Window) -> bool:
    f._check(g)
    for s in (f, g):
        if any(h > gh for h, gh in zip(window.hi, s.guaranteed_hi())):
            raise PrecisionError("comparison window exceeds a guaranteed window")
    diff = f - g
    return not any(window.contains(e) for e in diff.terms)


def _unit_split(f: LaurentSeries):
    """Return (m, u, w) with f = X^m (u + w), u a unit constant, or raise."""
    p = f.ctx.p
    units = [e for e, c in f.terms.items() if c % p]
    if not units:
        raise NotAUnit("series vanishes mod p")
    d = f.ctx.dim
    m = tuple(min(e[i] for e in units) for i in range(d))
    if m not in f.terms or f.terms[m] % p == 0:
        raise NotAUnit("leading form mod p is not a monomial times a unit")
    u = f.terms[m]
    w = {}
    for e, c in f.terms.items():
        if e == m:
            continue
        rel = tuple(a - b for a, b in zip(e, m))
        w[rel] = c
    return m, u, w


def is_unit(f: LaurentSeries) -> bool:
    try:
        _unit_split(f)
    except NotAUnit:
        return False
    return True


def invert(f: LaurentSeries, hi: Iterable[int] | None = None) -> LaurentSeries:
    """Inverse of a unit.

    Exact when the inverse is a Laurent polynomial mod p^n; otherwise the
    result is windowed at ``hi`` (required in that case).
    """
    ctx = f.ctx
    if f.window is not None:
        return _invert_windowed(f, hi)
    m, u, w = _unit_split(f)
    q = ctx.q
    uinv = pow(u, -1, q)
    neg_m = tuple(-x for x in m)
    wser = LaurentSeries(ctx, {e: (-c * uinv) % q for e, c in w.items()})
    # 1/(1 + w') = sum_j (-w')^j ; wser already holds -w'
    positive = any(c % ctx.p and any(x > 0 for x in e) for e, c in wser.terms.items())
    if positive:
        if hi is None:
            raise PrecisionError("inverse is an infinite series; a window is required")
        rel_hi = tuple(h + x for h, x in zip(hi, m))
        grows = {i for e, c in wser.terms.items() if c % ctx.p for i, x in enumerate(e) if x > 0}
        if any(rel_hi[i] == math.inf for i in grows):
            raise PrecisionError("inverse is infinite along an axis without a window bound")
        # p-divisible negative terms may pull up to n-1 factors back down
        depth = [max([-e[i] for e in wser.terms if e[i] < 0] or [0]) for i in range(ctx.dim)]
        work_hi = tuple(h + (ctx.n - 1) * d for h, d in zip(rel_hi, depth))
        acc = {(0,) * ctx.dim: 1}
        term = dict(acc)
        q = ctx.q
        while term:
            nxt: dict[ExpVec, int] = {}
            for e1, c1 in term.items():
                for e2, c2 in wser.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    if all(x <= h for x, h in zip(e, work_hi)):
                        nxt[e] = (nxt.get(e, 0) + c1 * c2) % q
            term = {e: c for e, c in nxt.items() if c}
            for e, c in term.items():
                acc[e] = (acc.get(e, 0) + c) % q
        res = LaurentSeries(ctx, acc).truncate(rel_hi)
        return res.scalar_mul(uinv).shift(neg_m)
    acc = LaurentSeries.one(ctx)
    term = LaurentSeries.one(ctx)
    for _ in range(ctx.n * (1 + sum(1 for _ in wser.terms))):
        term = term * wser
        if term.is_zero():
            break
        acc = acc + term
    else:  # pragma: no cover - nilpotence guarantees termination
        raise PrecisionError("geometric series failed to terminate")
    return acc.scalar_mul(uinv).shift(neg_m)


def _invert_windowed(f: LaurentSeries, hi) -> LaurentSeries:
    m, u, w = _unit_split(f)
    if any(x < 0 for e in w for x in e):
        raise PrecisionError("windowed inversion needs a perturbation with non-negative exponents")
    ctx = f.ctx
    gh = f.window.hi
    # relative window of (u + w) is gh - m; inverse is X^{-m} times it
    lim = tuple(h - x for h, x in zip(gh, m))
    target = lim if hi is None else tuple(min(a, b + x) for a, b, x in zip(lim, hi, m))
    g = LaurentSeries(ctx, {e: c for e, c in w.items()})
    if any(t < 0 for t in target):
        raise PrecisionError("window too small to invert")
    inv = invert(LaurentSeries.constant(ctx, u) + g, target)
    return inv.shift(tuple(-x for x in m))


# text form -----------------------------------------------------------------

def _mono_text(ctx: PrecCtx, e: ExpVec) -> str:
    parts = []
    for name, k in zip(ctx.delta, e):
        if k == 0:
            continue
        parts.append(f"X{name}" if k == 1 else f"X{name}^{k}")
    return "*".join(parts)


def to_text(f: LaurentSeries) -> str:
    """Canonical text: lexicographically sorted terms, symmetric residues."""
    q = f.ctx.q
    out = []
    for e in sorted(f.terms):
        c = f.terms[e]
        c = c - q if c > q // 2 else c
        mono = _mono_text(f.ctx, e)
        mag = abs(c)
        if mono:
            body = mono if mag == 1 else f"{mag}*{mono}"
        else:
            body = str(mag)
        if not out:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append(("- " if c < 0 else "+ ") + body)
    return " ".join(out) if out else "0"
