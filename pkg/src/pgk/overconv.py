"""Norms on polyannuli, with radii r_alpha = p^{-s_alpha} for rational s_alpha.

A norm is reported through its exponent E with |f|_r = p^{-E}, so every
comparison is exact rational arithmetic.  Coefficients are known modulo p^n;
their valuations are read in [0, n) which bounds the norm of any lift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Mapping, Sequence

from .laurent import LaurentSeries
from .operators import phi
from .scalars import DomainError, PrecCtx, vp_mod


class PreconditionError(ValueError):
    """A radius lies outside the range where an estimate is asserted."""


@total_ordering
@dataclass(frozen=True)
class LogNorm:
    """|f|_r = p^{-E}; E is +inf exactly for f = 0.  Larger E means smaller norm."""

    E: Fraction | float

    @classmethod
    def infinite(cls) -> "LogNorm":
        return cls(math.inf)

    @property
    def is_zero_norm(self) -> bool:
        return self.E == math.inf

    def __add__(self, other: "LogNorm") -> "LogNorm":
        return LogNorm(self.E + other.E)

    def __lt__(self, other: "LogNorm") -> bool:
        return self.E < other.E

    def __str__(self):
        return "inf" if self.is_zero_norm else str(self.E)


@dataclass(frozen=True)
class RadiusParam:
    """s_alpha > 0 per variable (r_alpha = p^{-s_alpha}), and the directions in use."""

    s: tuple[tuple[str, Fraction], ...]
    subset: tuple[str, ...] | None = None

    def __init__(self, s: Mapping[str, object], subset: Iterable[str] | None = None):
        vals = tuple((a, Fraction(v)) for a, v in s.items())
        for a, v in vals:
            if v <= 0:
                raise DomainError(f"s_{a} must be positive")
        object.__setattr__(self, "s", vals)
        if subset is not None:
            subset = tuple(subset)
            missing = [a for a in subset if a not in dict(vals)]
            if missing:
                raise DomainError(f"no radius for {missing}")
        object.__setattr__(self, "subset", subset)

    @classmethod
    def uniform(cls, delta: Sequence[str], s, subset=None) -> "RadiusParam":
        return cls({a: s for a in delta}, subset)

    def __getitem__(self, alpha: str) -> Fraction:
        return dict(self.s)[alpha]

    def directions(self, ctx: PrecCtx) -> tuple[str, ...]:
        return tuple(ctx.delta) if self.subset is None else self.subset

    def replace(self, alpha: str, value) -> "RadiusParam":
        d = dict(self.s)
        d[alpha] = Fraction(value)
        return RadiusParam(d, self.subset)

    def with_subset(self, subset) -> "RadiusParam":
        return RadiusParam(dict(self.s), subset)


def rnorm(f: LaurentSeries, r: RadiusParam) -> LogNorm:
    """Exponent of |f|_r: min over terms of v_p(c) + sum over directions of s_alpha * k_alpha."""
    if f.window is not None:
        raise DomainError("norms are defined here only for exact Laurent polynomials")
    ctx = f.ctx
    dirs = r.directions(ctx)
    idx = [(ctx.index(a), r[a]) for a in dirs]
    best: Fraction | float = math.inf
    for e, c in f.terms.items():
        v = vp_mod(c, ctx.p, ctx.n)
        if v == math.inf:
            continue
        E = Fraction(int(v)) + sum((s * e[i] for i, s in idx), Fraction(0))
        if E < best:
            best = E
    return LogNorm(best)


def _require_phi_range(r: RadiusParam, alpha: str, p: int):
    if r[alpha] >= Fraction(1, p - 1):
        raise PreconditionError(f"need s_{alpha} < 1/(p-1) = 1/{p - 1}")


def check_phi_transport(f: LaurentSeries, alpha: str, r: RadiusParam) -> bool:
    """|phi_alpha(f)|_r equals |f|_{r'} where r' raises r_alpha to the p-th power."""
    p = f.ctx.p
    _require_phi_range(r, alpha, p)
    return rnorm(phi(f, alpha), r) == rnorm(f, r.replace(alpha, p * r[alpha]))


def check_psi_estimate(parts: Sequence[LaurentSeries], alpha: str, r: RadiusParam) -> tuple[bool, bool]:
    """Bounds for f = sum_j (1+X)^j phi(f_j) against max_j |f_j|_{r'}.

    Returns (lower_ok, upper_ok) for r^{p-1} max|f_j|_{r'} <= |f|_r <= max|f_j|_{r'}.
    """
    if not parts:
        raise DomainError("need the p components f_0..f_{p-1}")
    ctx = parts[0].ctx
    p = ctx.p
    if len(parts) != p:
        raise DomainError(f"need exactly {p} components")
    _require_phi_range(r, alpha, p)
    one_plus = LaurentSeries.one(ctx) + LaurentSeries.var(ctx, alpha)
    total = LaurentSeries.zero(ctx)
    for j, fj in enumerate(parts):
        total = total + (one_plus**j) * phi(fj, alpha)
    Es = rnorm(total, r).E
    rp = r.replace(alpha, p * r[alpha])
    Emin = min(rnorm(fj, rp).E for fj in parts)
    lower_ok = Es <= (p - 1) * r[alpha] + Emin
    upper_ok = Es >= Emin
    return lower_ok, upper_ok


def subset_norm_bound(f: LaurentSeries, r: RadiusParam, small: Sequence[str], big: Sequence[str]) -> tuple[LogNorm, LogNorm, Fraction]:
    """Norms for directions small within big, and the slack sum s_beta * m over big minus small.

    m bounds the pole order of f along the extra directions; E_small <= E_big + slack.
    """
    small, big = tuple(small), tuple(big)
    if not set(small) <= set(big):
        raise DomainError("first subset must be contained in the second")
    ctx = f.ctx
    extra = [a for a in big if a not in small]
    m = 0
    for e in f.terms:
        for a in extra:
            m = max(m, -e[ctx.index(a)])
    slack = sum((r[a] * m for a in extra), Fraction(0))
    return rnorm(f, r.with_subset(small)), rnorm(f, r.with_subset(big)), slack


def default_grid(p: int, steps: int = 12) -> list[Fraction]:
    return [Fraction(1, (p - 1) * 2**j) for j in range(1, steps + 1)]


def limit_sup_le_one(f: LaurentSeries, grid: Sequence | None = None) -> bool:
    """Heuristic membership test: does E(s) tend to a value >= 0 as s -> 0?

    E is evaluated with the same s on every variable along a decreasing grid
    and extrapolated linearly from the last two points.  One-sided: a True
    answer is evidence, not a certificate.
    """
    ctx = f.ctx
    grid = [Fraction(g) for g in (grid or default_grid(ctx.p))]
    if len(grid) < 2 or any(b >= a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be strictly decreasing with at least two points")
    vals = [rnorm(f, RadiusParam.uniform(ctx.delta, s)).E for s in grid[-2:]]
    if any(v == math.inf for v in vals):
        return True
    (s1, s2), (e1, e2) = grid[-2:], vals
    slope = (e1 - e2) / (s1 - s2)
    return e2 - slope * s2 >= 0
