"""Torsion (phi, Gamma)-modules in elementary-divisor normal form.

A module is ``sum_i O/(p^{n_i}) e_i`` with, for every variable alpha, a
Frobenius matrix B (columns are images of basis vectors), a generator of
the pro-p part of Gamma (exponent c, matrix G) and a torsion generator
(Teichmuller exponent, matrix T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .laurent import LaurentSeries, NotAUnit, Window, invert, is_unit
from .operators import GammaElement, gamma_apply, phi, psi, sharp
from .scalars import (
    ContextError,
    DomainError,
    PadicExponent,
    PrecCtx,
    PrecisionError,
    Scalar,
    smallest_primitive_root,
    teichmuller_int,
    vp_factorial,
)

Matrix = list[list[LaurentSeries]]


class NotEtale(DomainError):
    pass


# small matrix helpers ---------------------------------------------------------

def identity(ctx: PrecCtx, d: int) -> Matrix:
    return [[LaurentSeries.constant(ctx, int(i == j)) for j in range(d)] for i in range(d)]


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    ctx = A[0][0].ctx
    out = []
    for i in range(len(A)):
        row = []
        for j in range(len(B[0])):
            acc = LaurentSeries.zero(ctx)
            for k in range(len(B)):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


def mat_vec(A: Matrix, v: Sequence[LaurentSeries]) -> list[LaurentSeries]:
    return [c[0] for c in mat_mul(A, [[x] for x in v])]


def mat_map(A: Matrix, fn) -> Matrix:
    return [[fn(x) for x in row] for row in A]


def transpose(A: Matrix) -> Matrix:
    return [list(r) for r in zip(*A)]


def det(A: Matrix) -> LaurentSeries:
    d = len(A)
    if d == 1:
        return A[0][0]
    total = LaurentSeries.zero(A[0][0].ctx)
    for j in range(d):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def mat_inverse(A: Matrix, hi: Iterable[int] | None = None) -> Matrix:
    """Inverse via adjugate; exact when det(A)^{-1} is a Laurent polynomial."""
    d = len(A)
    D = det(A)
    Dinv = invert(D, hi)
    if d == 1:
        return [[Dinv]]
    adj = []
    for i in range(d):
        row = []
        for j in range(d):
            minor = [r[:i] + r[i + 1:] for k, r in enumerate(A) if k != j]
            c = det(minor)
            row.append(c if (i + j) % 2 == 0 else -c)
        adj.append(row)
    return [[x * Dinv for x in row] for row in adj]


def _reduce(f: LaurentSeries, k: int) -> LaurentSeries:
    if k >= f.ctx.n:
        return f
    m = f.ctx.p**k
    return LaurentSeries(f.ctx, {e: c % m for e, c in f.terms.items() if c % m}, f.window, _clean=True)


# module data -------------------------------------------------------------------

@dataclass(frozen=True)
class GammaData:
    exponent: PadicExponent
    matrix: tuple


@dataclass(frozen=True)
class TorsionData:
    generator: int  # omega = teichmuller(generator)
    matrix: tuple


def _freeze(M) -> tuple:
    return tuple(tuple(r) for r in M)


class PhiGammaModule:
    """Finitely generated torsion (phi_Delta, Gamma_Delta)-module."""

    def __init__(self, ctx: PrecCtx, divisors: Sequence[int], phi_mats: dict | None = None,
                 gamma: dict | None = None, torsion: dict | None = None):
        self.ctx = ctx
        self.divisors = tuple(int(k) for k in divisors)
        if any(not 1 <= k <= ctx.n for k in self.divisors):
            raise DomainError(f"divisors {self.divisors} must lie in 1..{ctx.n}")
        d = self.rank
        p = ctx.p
        phi_mats = phi_mats or {}
        gamma = gamma or {}
        torsion = torsion or {}
        for table in (phi_mats, gamma, torsion):
            for a in table:
                ctx.index(a)
        self.phi_mats = {a: _freeze(self._check_matrix(phi_mats.get(a) or identity(ctx, d))) for a in ctx.delta}
        self.gamma = {}
        for a in ctx.delta:
            c, G = gamma.get(a, (1 + p, None))
            c = PadicExponent.integer(c) if isinstance(c, int) else c
            if c.approx % p == 0:
                raise DomainError("gamma exponent must be a p-adic unit")
            self.gamma[a] = GammaData(c, _freeze(self._check_matrix(G or identity(ctx, d))))
        g0 = smallest_primitive_root(p)
        self.torsion = {}
        for a in ctx.delta:
            gen, T = torsion.get(a, (g0, None))
            if gen % p == 0:
                raise DomainError("torsion generator must be prime to p")
            self.torsion[a] = TorsionData(gen, _freeze(self._check_matrix(T or identity(ctx, d))))

    @property
    def rank(self) -> int:
        return len(self.divisors)

    @property
    def h(self) -> int:
        return max(self.divisors, default=0)

    def _check_matrix(self, M) -> Matrix:
        d = self.rank
        if len(M) != d or any(len(r) != d for r in M):
            raise ContextError(f"matrix must be {d}x{d}")
        out = []
        for i, row in enumerate(M):
            r = []
            for j, x in enumerate(row):
                x = self._as_series(x)
                need = max(0, self.divisors[i] - self.divisors[j])
                if need and x.valuation() < need:
                    raise DomainError(f"entry ({i},{j}) must be divisible by p^{need} for the maps to be well defined")
                r.append(_reduce(x, self.divisors[i]))
            out.append(r)
        return out

    def _as_series(self, x) -> LaurentSeries:
        if isinstance(x, LaurentSeries):
            x._check(LaurentSeries.zero(self.ctx))
            return x
        return LaurentSeries.constant(self.ctx, int(x))

    def B(self, alpha) -> Matrix:
        return [list(r) for r in self.phi_mats[self._name(alpha)]]

    def G(self, alpha) -> Matrix:
        return [list(r) for r in self.gamma[self._name(alpha)].matrix]

    def T(self, alpha) -> Matrix:
        return [list(r) for r in self.torsion[self._name(alpha)].matrix]

    def _name(self, alpha) -> str:
        return self.ctx.delta[self.ctx.index(alpha)]

    def omega_exponent(self, alpha, extra: int = 0) -> PadicExponent:
        """Teichmuller exponent of the torsion generator with ``extra`` slack digits."""
        gen = self.torsion[self._name(alpha)].generator
        prec = self.ctx.n + extra
        return PadicExponent(teichmuller_int(gen, self.ctx.p, prec), prec)

    def element(self, coords: Sequence) -> "ModuleElement":
        return ModuleElement(self, [self._as_series(c) for c in coords])

    def zero(self) -> "ModuleElement":
        return self.element([0] * self.rank)

    def basis(self, i: int) -> "ModuleElement":
        return self.element([int(i == j) for j in range(self.rank)])

    @classmethod
    def trivial(cls, ctx: PrecCtx, rank: int = 1, divisors: Sequence[int] | None = None) -> "PhiGammaModule":
        return cls(ctx, divisors or [ctx.n] * rank)

    @classmethod
    def cyclotomic(cls, ctx: PrecCtx, h: int | None = None) -> "PhiGammaModule":
        """Rank one with Gamma acting on e through the cyclotomic character."""
        p = ctx.p
        h = h or ctx.n
        g0 = smallest_primitive_root(p)
        w = teichmuller_int(g0, p, ctx.n)
        gamma = {a: (1 + p, [[1 + p]]) for a in ctx.delta}
        torsion = {a: (g0, [[w]]) for a in ctx.delta}
        return cls(ctx, [h], gamma=gamma, torsion=torsion)


@dataclass
class ModuleElement:
    module: PhiGammaModule
    coords: list = field(default_factory=list)

    def __post_init__(self):
        M = self.module
        if len(self.coords) != M.rank:
            raise ContextError("wrong number of coordinates")
        self.coords = [_reduce(c, k) for c, k in zip(self.coords, M.divisors)]

    def __add__(self, other: "ModuleElement") -> "ModuleElement":
        self._same(other)
        return ModuleElement(self.module, [a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other: "ModuleElement") -> "ModuleElement":
        self._same(other)
        return ModuleElement(self.module, [a - b for a, b in zip(self.coords, other.coords)])

    def __neg__(self):
        return ModuleElement(self.module, [-a for a in self.coords])

    def scale(self, lam) -> "ModuleElement":
        if isinstance(lam, LaurentSeries):
            return ModuleElement(self.module, [lam * a for a in self.coords])
        return ModuleElement(self.module, [a.scalar_mul(int(lam)) for a in self.coords])

    def _same(self, other):
        if other.module is not self.module:
            raise ContextError("elements of different modules")

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coords)

    def truncate(self, hi) -> "ModuleElement":
        return ModuleElement(self.module, [c.truncate(hi) for c in self.coords])

    def __eq__(self, other):
        if not isinstance(other, ModuleElement):
            return NotImplemented
        return other.module is self.module and all(a == b for a, b in zip(self.coords, other.coords))

    def equal_on_window(self, other: "ModuleElement") -> bool:
        return all(a.equal_on_common_window(b) for a, b in zip(self.coords, other.coords))

    def __repr__(self):
        return "ModuleElement(" + ", ".join(str(c) for c in self.coords) + ")"


# checks -------------------------------------------------------------------------

def etale_check(M: PhiGammaModule) -> dict[str, bool]:
    return {a: M.rank == 0 or is_unit(det(M.B(a))) for a in M.ctx.delta}


def require_etale(M: PhiGammaModule):
    bad = [a for a, ok in etale_check(M).items() if not ok]
    if bad:
        raise NotEtale(f"Frobenius matrix not invertible for {bad}")


# actions ------------------------------------------------------------------------

def mod_phi(x: ModuleElement, alpha) -> ModuleElement:
    M = x.module
    return ModuleElement(M, mat_vec(M.B(alpha), [phi(c, alpha) for c in x.coords]))


def frobenius_inverse(M: PhiGammaModule, alpha, hi=None) -> Matrix:
    key = (M._name(alpha), None if hi is None else tuple(hi))
    cache = M.__dict__.setdefault("_binv", {})
    if key not in cache:
        require_etale(M)
        try:
            cache[key] = mat_inverse(M.B(alpha))
        except PrecisionError:
            if hi is None:
                raise
            cache[key] = mat_inverse(M.B(alpha), hi)
    return cache[key]


def mod_psi(x: ModuleElement, alpha, window: Iterable[int] | None = None) -> ModuleElement:
    """psi on the module: e.c -> e.psi(B^{-1} c); ``window`` bounds any infinite inverse."""
    M = x.module
    hi = None if window is None else tuple(window)
    Binv = frobenius_inverse(M, alpha, hi)
    y = mat_vec(Binv, x.coords)
    return ModuleElement(M, [psi(c, alpha) for c in y])


def _gamma_generic(x: ModuleElement, alpha, c: PadicExponent, mat: Matrix, window) -> ModuleElement:
    M = x.module
    g = GammaElement({M._name(alpha): c})
    moved = [gamma_apply(v, g, window) for v in x.coords]
    return ModuleElement(M, mat_vec(mat, moved))


def mod_gamma(x: ModuleElement, alpha, window: Iterable[int] | None = None) -> ModuleElement:
    """Generator of the pro-p part of Gamma_alpha: e.c -> e.G gamma(c)."""
    M = x.module
    gd = M.gamma[M._name(alpha)]
    return _gamma_generic(x, alpha, gd.exponent, M.G(alpha), _win(M, window))


def mod_torsion(x: ModuleElement, alpha, window: Iterable[int]) -> ModuleElement:
    """Torsion generator of Gamma_alpha: e.c -> e.T omega(c)."""
    M = x.module
    win = _win(M, window)
    span = max(int(h) - min(0, *_lo(x)) for h in win) + 2
    c = M.omega_exponent(alpha, vp_factorial(span, M.ctx.p) + 1)
    return _gamma_generic(x, alpha, c, M.T(alpha), win)


def _lo(x: ModuleElement) -> list[int]:
    return [min(c.support_lo()) for c in x.coords if c.terms] or [0]


def _win(M: PhiGammaModule, window):
    if window is None:
        return None
    w = tuple(window)
    if len(w) == 1 and M.ctx.dim > 1:
        w = w * M.ctx.dim
    return w


def c_delta_projector(x: ModuleElement, window: Iterable[int]) -> ModuleElement:
    """Average over the torsion subgroup of Gamma_Delta."""
    M = x.module
    p = M.ctx.p
    cur = x
    for a in M.ctx.delta:
        acc = cur
        y = cur
        for _ in range(p - 2):
            y = mod_torsion(y, a, window)
            acc = acc + y
        inv = pow(p - 1, -1, M.ctx.q)
        cur = acc.scale(inv)
    return cur


def check_relations(M: PhiGammaModule, window: Iterable[int] = (6,)) -> list[str]:
    """Commutation of the semilinear actions, tested on basis vectors."""
    win = _win(M, window)
    bad = []
    delta = M.ctx.delta

    def ops(a):
        yield "phi", lambda v: mod_phi(v, a)
        yield "gamma", lambda v: mod_gamma(v, a, win)
        yield "torsion", lambda v: mod_torsion(v, a, win)

    names = [(a, k, f) for a in delta for k, f in ops(a)]
    for i in range(M.rank):
        e = M.basis(i)
        for x, (a, k1, f1) in enumerate(names):
            for (b, k2, f2) in names[x + 1:]:
                if a == b and k1 == k2:
                    continue
                lhs = f1(f2(e))
                rhs = f2(f1(e))
                if not lhs.equal_on_window(rhs):
                    tag = f"{k1}_{a}/{k2}_{b}"
                    if tag not in bad:
                        bad.append(tag)
    return bad


# duality ------------------------------------------------------------------------

def _phi_delta_ratio(ctx: PrecCtx, alpha) -> LaurentSeries:
    """phi_alpha(delta)/delta = (1+X)^{p-1} X / phi(X), exact."""
    X = LaurentSeries.var(ctx, alpha)
    return (1 + X) ** (ctx.p - 1) * X * invert(phi(X, alpha))


def _gamma_delta_ratio(ctx: PrecCtx, alpha, c: PadicExponent, hi) -> LaurentSeries:
    """gamma(delta)/delta = (1+X)^{c-1} X / ((1+X)^c - 1), windowed."""
    X = LaurentSeries.var(ctx, alpha)
    g = GammaElement({ctx.delta[ctx.index(alpha)]: c})
    gx = gamma_apply(X, g, hi)
    one_plus = gamma_apply(1 + X, g, hi)
    return one_plus * X * invert(gx.truncate(hi), hi) * invert(1 + X, hi)


def _conj_weights(M: PhiGammaModule, A: Matrix) -> Matrix:
    """W^{-1} A W with W = diag(p^{h - n_i})."""
    h, ns, p = M.h, M.divisors, M.ctx.p
    out = []
    for i, row in enumerate(A):
        r = []
        for j, x in enumerate(row):
            sh = ns[i] - ns[j]  # p^{(h-n_j)-(h-n_i)}
            if sh >= 0:
                r.append(x.scalar_mul(p**sh))
            else:
                coeffs = {}
                m = p ** (-sh)
                for e, v in x.terms.items():
                    if v % m:
                        raise DomainError("dual matrix is not integral")
                    coeffs[e] = v // m
                r.append(LaurentSeries(x.ctx, coeffs, x.window))
        out.append(r)
    return out


def dual_module(M: PhiGammaModule, window: Iterable[int] | None = None) -> PhiGammaModule:
    """Dual with respect to the pairing sum_i p^{h-n_i} res(c_i c'_i delta).

    The Frobenius matrix is exact; Gamma and torsion matrices carry the
    infinite factor chi(gamma) gamma(delta)/delta and are windowed at ``window``.
    """
    require_etale(M)
    ctx = M.ctx
    hi = _win(M, window) or (8,) * ctx.dim
    phis, gams, tors = {}, {}, {}
    for a in ctx.delta:
        Binv = mat_inverse(M.B(a))
        rho = _phi_delta_ratio(ctx, a)
        phis[a] = [[x * rho for x in row] for row in _conj_weights(M, transpose(Binv))]
        gd = M.gamma[a]
        Ginv = mat_inverse(M.G(a), hi)
        # the target twist by mu_{p^infty} contributes the character value
        rg = _gamma_delta_ratio(ctx, a, gd.exponent, hi).scalar_mul(gd.exponent.approx)
        gams[a] = (gd.exponent, [[x * rg for x in row] for row in _conj_weights(M, transpose(Ginv))])
        td = M.torsion[a]
        span = max(hi) + 2
        w = M.omega_exponent(a, vp_factorial(span + 4, ctx.p) + 1)
        Tinv = mat_inverse(M.T(a), hi)
        rt = _gamma_delta_ratio(ctx, a, w, hi).scalar_mul(w.approx)
        tors[a] = (td.generator, [[x * rt for x in row] for row in _conj_weights(M, transpose(Tinv))])
    D = PhiGammaModule(ctx, M.divisors, phis, gams, tors)
    D.__dict__["dual_of"] = M
    return D


def pairing(x: ModuleElement, y: ModuleElement) -> Scalar:
    """{x, y} = sum_i p^{h-n_i} res(c_i c'_i delta); value in Z/p^h."""
    M = x.module
    if len(y.coords) != M.rank or y.module.divisors != M.divisors:
        raise ContextError("y does not live in the dual of x's module")
    h = M.h
    total = 0
    for c, cp, k in zip(x.coords, y.coords, M.divisors):
        prod = c * cp
        if prod.window is not None and any(hh < 0 for hh in prod.window.hi):
            raise PrecisionError("pairing needs the constant term of every product")
        total += M.ctx.p ** (h - k) * prod.coeff((0,) * M.ctx.dim)
    return Scalar(total, M.ctx.with_n(h))


def ring_act_dual(lam: LaurentSeries, y: ModuleElement, window) -> ModuleElement:
    """Scalar action on the dual: lam . y has coordinates #(lam) c'."""
    s = sharp(lam, _win(y.module, window))
    return ModuleElement(y.module, [s * c for c in y.coords])

