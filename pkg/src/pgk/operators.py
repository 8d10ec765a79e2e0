"""Partial Frobenius, its left inverse psi, the Gamma action, # and the residue.

Univariate kernels act on dicts ``{exponent: coefficient}`` modulo p^n and
are lifted to several variables fibre by fibre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

from .laurent import LaurentSeries, Window
from .scalars import (
    DomainError,
    PadicExponent,
    PrecCtx,
    PrecisionError,
    Scalar,
    as_exponent,
    binom_int,
    teichmuller_int,
    vp_factorial,
)

Poly = dict[int, int]


# univariate kernels ----------------------------------------------------------

def _pmul(a: Mapping[int, int], b: Mapping[int, int], q: int, hi: float = math.inf) -> Poly:
    out: Poly = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = e1 + e2
            if e <= hi:
                out[e] = (out.get(e, 0) + c1 * c2) % q
    return {e: c for e, c in out.items() if c}


@lru_cache(maxsize=None)
def _phi_x(p: int, n: int) -> tuple[tuple[int, int], ...]:
    q = p**n
    return tuple((j, math.comb(p, j) % q) for j in range(1, p + 1) if math.comb(p, j) % q)


@lru_cache(maxsize=None)
def _phi_xinv(p: int, n: int) -> tuple[tuple[int, int], ...]:
    # 1/phi(X) = X^{-p} (1+w)^{-1},  w = sum_{j<p} C(p,j) X^{j-p}, p | w
    q = p**n
    w = {j - p: math.comb(p, j) % q for j in range(1, p)}
    inv: Poly = {0: 1}
    cur: Poly = {0: 1}
    for _ in range(1, n):
        cur = {e: (-c) % q for e, c in _pmul(cur, w, q).items()}
        for e, c in cur.items():
            inv[e] = (inv.get(e, 0) + c) % q
    return tuple(sorted((e - p, c) for e, c in inv.items() if c))


@lru_cache(maxsize=4096)
def phi_monomial(k: int, p: int, n: int) -> tuple[tuple[int, int], ...]:
    """phi(X^k) as sorted (exponent, coefficient) pairs; exact mod p^n."""
    q = p**n
    if k == 0:
        return ((0, 1),)
    base = dict(_phi_x(p, n) if k > 0 else _phi_xinv(p, n))
    half = phi_monomial(abs(k) // 2 * (1 if k > 0 else -1), p, n) if abs(k) > 1 else ((0, 1),)
    acc = _pmul(dict(half), dict(half), q)
    if abs(k) % 2:
        acc = _pmul(acc, base, q)
    return tuple(sorted(acc.items()))


def phi_poly(f: Mapping[int, int], p: int, n: int) -> Poly:
    q = p**n
    out: Poly = {}
    for k, c in f.items():
        for e, v in phi_monomial(k, p, n):
            out[e] = (out.get(e, 0) + c * v) % q
    return {e: c for e, c in out.items() if c}


@lru_cache(maxsize=None)
def _binom_small(p: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(math.comb(i, s) % p for s in range(p)) for i in range(p))


@lru_cache(maxsize=None)
def _one_plus_x_pow(i: int, q: int) -> tuple[tuple[int, int], ...]:
    return tuple((j, math.comb(i, j) % q) for j in range(i + 1) if math.comb(i, j) % q)


def psi_digits_mod_p(r: Mapping[int, int], p: int) -> list[Poly]:
    """Solve r = sum_i (1+X)^i g_i(X^p) mod p for the digits g_0..g_{p-1}."""
    C = _binom_small(p)
    blocks: dict[int, list[int]] = {}
    for e, c in r.items():
        c %= p
        if c:
            k, s = divmod(e, p)
            blocks.setdefault(k, [0] * p)[s] = c
    digits: list[Poly] = [{} for _ in range(p)]
    for k, rs in blocks.items():
        g = [0] * p
        for s in range(p - 1, -1, -1):
            v = rs[s] - sum(C[i][s] * g[i] for i in range(s + 1, p))
            g[s] = v % p
        for i in range(p):
            if g[i]:
                digits[i][k] = g[i]
    return digits


def psi_decompose(f: Mapping[int, int], p: int, n: int) -> list[Poly]:
    """All p digits x_i with f = sum_i (1+X)^i phi(x_i), by p-adic digit lifting."""
    q = p**n
    resid: Poly = {e: c % q for e, c in f.items() if c % q}
    out: list[Poly] = [{} for _ in range(p)]
    pm = 1
    for _ in range(n):
        if not resid:
            break
        rbar = {e: (c // pm) % p for e, c in resid.items()}
        digits = psi_digits_mod_p(rbar, p)
        for i, g in enumerate(digits):
            if not g:
                continue
            img = phi_poly(g, p, n)
            if i:
                img = _pmul(img, dict(_one_plus_x_pow(i, q)), q)
            for e, v in img.items():
                nv = (resid.get(e, 0) - pm * v) % q
                if nv:
                    resid[e] = nv
                else:
                    resid.pop(e, None)
            acc = out[i]
            for e, v in g.items():
                nv = (acc.get(e, 0) + pm * v) % q
                if nv:
                    acc[e] = nv
                else:
                    acc.pop(e, None)
        pm *= p
    if resid:  # pragma: no cover - n layers always exhaust Z/p^n
        raise ArithmeticError("digit lifting did not terminate")
    return out


def psi_poly(f: Mapping[int, int], p: int, n: int) -> Poly:
    return psi_decompose(f, p, n)[0]


def psi_window_bounds(lo: int, hi: int, p: int, n: int) -> tuple[int, int]:
    """Guaranteed (lo', hi') of psi applied to a series known on degrees <= hi.

    An unknown coefficient at degree u poisons digit class floor(u/p); lifting
    that digit feeds phi of it back into the residual, whose p-adically
    relevant part reaches p*K - (remaining digits)(p-1).
    """
    u, low = hi + 1, lo
    for m in range(n):
        rem = n - m - 1
        if u != math.inf:
            u = min(u, p * (u // p) - rem * (p - 1))
        low = min(low, p * (low // p) - rem * (p - 1))
    hi2 = math.inf if u == math.inf else u // p - 1
    lo2 = min(low // p, hi2)
    return lo2, hi2


@lru_cache(maxsize=256)
def _subst_unit(c: int, cprec: int | None, p: int, n: int, L: int) -> tuple[int, ...]:
    """Coefficients of u with (1+X)^c - 1 = X*u(X), through X^L."""
    ce = PadicExponent(c, cprec)
    return tuple(binom_int(ce, k + 1, p, n) for k in range(L + 1))


def _series_inv(u: tuple[int, ...], q: int) -> list[int]:
    L = len(u) - 1
    inv0 = pow(u[0], -1, q)
    b = [0] * (L + 1)
    b[0] = inv0
    for k in range(1, L + 1):
        s = sum(u[j] * b[k - j] for j in range(1, k + 1))
        b[k] = (-s * inv0) % q
    return b


def _trunc_mul(a: list[int], b: list[int], q: int, L: int) -> list[int]:
    out = [0] * (L + 1)
    for i, x in enumerate(a[: L + 1]):
        if x:
            for j in range(0, L + 1 - i):
                if b[j]:
                    out[i + j] += x * b[j]
    return [v % q for v in out]


@lru_cache(maxsize=256)
def _subst_powers(c: int, cprec: int | None, p: int, n: int, kmin: int, kmax: int, L: int):
    """u^k truncated to X^L for kmin <= k <= kmax (u from _subst_unit)."""
    q = p**n
    u = list(_subst_unit(c, cprec, p, n, L))
    ui = _series_inv(tuple(u), q)
    pw = {0: [1] + [0] * L}
    cur = pw[0]
    for k in range(1, max(kmax, 0) + 1):
        cur = _trunc_mul(cur, u, q, L)
        pw[k] = cur
    cur = pw[0]
    for k in range(1, max(-kmin, 0) + 1):
        cur = _trunc_mul(cur, ui, q, L)
        pw[-k] = cur
    return pw


def subst_poly(f: Mapping[int, int], c: PadicExponent, p: int, n: int, hi: float) -> Poly:
    """f(X -> (1+X)^c - 1), kept through degree hi (math.inf only if exact)."""
    q = p**n
    if not f:
        return {}
    if hi == math.inf:
        if not c.exact or c.approx < 0 or min(f) < 0:
            raise PrecisionError("substitution is an infinite series; a window is required")
        base = {j: math.comb(c.approx, j) % q for j in range(1, c.approx + 1)}
        base = {e: v for e, v in base.items() if v}
        out: Poly = {}
        cur, at = {0: 1}, 0
        for k in sorted(f):
            for _ in range(k - at):
                cur = _pmul(cur, base, q)
            at = k
            for e, v in cur.items():
                out[e] = (out.get(e, 0) + f[k] * v) % q
        return {e: v for e, v in out.items() if v}
    hi = int(hi)
    kmin, kmax = min(f), max(f)
    L = hi - kmin
    if L < 0:
        return {}
    if not c.exact:
        need = vp_factorial(L + 1, p)
        if c.prec - n < need:
            raise PrecisionError(f"exponent carries {c.prec - n} slack digits, need {need}")
    pw = _subst_powers(c.approx, c.prec, p, n, min(kmin, 0), max(kmax, 0), L)
    out = {}
    for k, v in f.items():
        if k > hi:
            continue
        row = pw[k]
        for j in range(0, hi - k + 1):
            if row[j]:
                out[k + j] = (out.get(k + j, 0) + v * row[j]) % q
    return {e: x for e, x in out.items() if x}


# multivariable lifting ----------------------------------------------------------

def _fibres(f: LaurentSeries, i: int) -> dict[tuple, Poly]:
    out: dict[tuple, Poly] = {}
    for e, c in f.terms.items():
        rest = e[:i] + e[i + 1:]
        out.setdefault(rest, {})[e[i]] = c
    return out


def _unfibre(ctx: PrecCtx, i: int, parts: Iterable[tuple[tuple, Poly]]) -> dict:
    q = ctx.q
    out: dict = {}
    for rest, poly in parts:
        for k, c in poly.items():
            e = rest[:i] + (k,) + rest[i:]
            out[e] = (out.get(e, 0) + c) % q
    return {e: c for e, c in out.items() if c}


def _set(t: tuple, i: int, v) -> tuple:
    return t[:i] + (v,) + t[i + 1:]


def phi(f: LaurentSeries, alpha) -> LaurentSeries:
    """Partial Frobenius X_alpha -> (1+X_alpha)^p - 1."""
    ctx = f.ctx
    i = ctx.index(alpha)
    p, n = ctx.p, ctx.n
    terms = _unfibre(ctx, i, ((r, phi_poly(g, p, n)) for r, g in _fibres(f, i).items()))
    if f.window is None:
        return LaurentSeries(ctx, terms, _clean=True)
    lo, hi = f.window.lo[i], f.window.hi[i]
    spread = (n - 1) * (p - 1)
    hi2 = hi if hi >= -1 else p * (hi + 1) - spread - 1
    lo2 = lo if lo >= 0 else p * lo - spread
    lo2 = min(lo2, hi2)
    w = Window(_set(f.window.lo, i, lo2), _set(f.window.hi, i, hi2))
    return LaurentSeries(ctx, terms, w)


def psi(f: LaurentSeries, alpha) -> LaurentSeries:
    """Left inverse of phi: the 0th digit of the (1+X_alpha)-adic decomposition."""
    return psi_digit(f, alpha, 0)


def psi_digit(f: LaurentSeries, alpha, j: int) -> LaurentSeries:
    """The j-th digit x_j of f = sum_i (1+X)^i phi(x_i)."""
    ctx = f.ctx
    i = ctx.index(alpha)
    p, n = ctx.p, ctx.n
    if not 0 <= j < p:
        raise DomainError(f"digit index {j} outside 0..{p - 1}")
    terms = _unfibre(ctx, i, ((r, psi_decompose(g, p, n)[j]) for r, g in _fibres(f, i).items()))
    if f.window is None:
        return LaurentSeries(ctx, terms, _clean=True)
    lo2, hi2 = psi_window_bounds(f.window.lo[i], f.window.hi[i], p, n)
    w = Window(_set(f.window.lo, i, lo2), _set(f.window.hi, i, hi2))
    return LaurentSeries(ctx, terms, w)


@dataclass(frozen=True)
class GammaElement:
    """Element of Gamma acting by X_alpha -> (1+X_alpha)^{c_alpha} - 1."""

    exps: Mapping[str, PadicExponent] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "exps", {k: as_exponent(v) for k, v in dict(self.exps).items()})

    def exponent(self, alpha: str) -> PadicExponent:
        return self.exps.get(alpha, PadicExponent.integer(1))

    def validate(self, ctx: PrecCtx):
        for a, c in self.exps.items():
            ctx.index(a)
            if c.approx % ctx.p == 0:
                raise DomainError(f"gamma exponent for {a} is not a p-adic unit")

    def compose(self, other: "GammaElement", p: int) -> "GammaElement":
        out = {}
        for a in set(self.exps) | set(other.exps):
            x, y = self.exponent(a), other.exponent(a)
            if x.exact and y.exact:
                out[a] = PadicExponent.integer(x.approx * y.approx)
            else:
                prec = min(v.prec for v in (x, y) if v.prec is not None)
                out[a] = PadicExponent(x.approx * y.approx % p**prec, prec)
        return GammaElement(out)

    @staticmethod
    def teichmuller(alpha: str, a: int, p: int, prec: int) -> "GammaElement":
        return GammaElement({alpha: PadicExponent(teichmuller_int(a, p, prec), prec)})


def _needs_window(f: LaurentSeries, c: PadicExponent, i: int) -> bool:
    return not c.exact or c.approx < 0 or any(e[i] < 0 for e in f.terms)


def gamma_apply(f: LaurentSeries, g: GammaElement, window: Window | Iterable[int] | None = None) -> LaurentSeries:
    """Apply g; exact on polynomials with non-negative support and integer exponents."""
    ctx = f.ctx
    g.validate(ctx)
    p, n = ctx.p, ctx.n
    hi = _window_hi(ctx, window)
    out = f
    for a, c in g.exps.items():
        i = ctx.index(a)
        if c.exact and c.approx == 1:
            continue
        h = hi[i]
        if out.window is not None:
            h = min(h, out.window.hi[i])
        if h == math.inf and _needs_window(out, c, i):
            raise PrecisionError("gamma of this input is an infinite series; pass a window")
        terms = _unfibre(ctx, i, ((r, subst_poly(poly, c, p, n, h)) for r, poly in _fibres(out, i).items()))
        if h == math.inf:
            out = LaurentSeries(ctx, terms, out.window, _clean=out.window is None)
            continue
        lo_cur = out.support_lo()
        new_hi = _set(out.guaranteed_hi(), i, int(h))
        new_lo = tuple(min(l, x) for l, x in zip(lo_cur, new_hi))
        out = LaurentSeries(ctx, terms, Window(new_lo, new_hi))
    return out


def _window_hi(ctx: PrecCtx, window) -> tuple:
    if window is None:
        return (math.inf,) * ctx.dim
    if isinstance(window, Window):
        return window.hi
    hi = tuple(window)
    if len(hi) != ctx.dim:
        raise ValueError("window has wrong length")
    return hi


def sharp(f: LaurentSeries, window: Window | Iterable[int] | None = None) -> LaurentSeries:
    """The involution (1+X_alpha) -> (1+X_alpha)^{-1} for every alpha at once."""
    ctx = f.ctx
    if all(k == 0 for e in f.terms for k in e) and f.window is None:
        return f
    g = GammaElement({a: PadicExponent.integer(-1) for a in ctx.delta})
    return gamma_apply(f, g, window)


def residue(F: LaurentSeries) -> Scalar:
    """Coefficient of prod X_alpha^{-1} in F / prod (1+X_alpha)."""
    ctx = F.ctx
    if F.window is not None and any(h < -1 for h in F.window.hi):
        raise PrecisionError("residue needs coefficients through exponent -1")
    total = 0
    for e, c in F.terms.items():
        if all(x <= -1 for x in e):
            sign = (-1) ** sum(-1 - x for x in e)
            total += sign * c
    return Scalar(total, ctx)


def delta_element(ctx: PrecCtx) -> LaurentSeries:
    """prod_alpha (1+X_alpha)/X_alpha."""
    out = LaurentSeries.one(ctx)
    for a in ctx.delta:
        out = out * (LaurentSeries.one(ctx) + LaurentSeries.var(ctx, a)) * LaurentSeries.var(ctx, a, -1)
    return out
