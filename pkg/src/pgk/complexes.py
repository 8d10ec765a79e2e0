"""Signed Koszul complexes of a (phi, Gamma)-module and their truncated cohomology."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _engine
from .pgmodule import (
    ModuleElement,
    PhiGammaModule,
    mod_gamma,
    mod_phi,
    mod_psi,
    pairing,
    require_etale,
)
from .scalars import ContextError, DomainError, Scalar


class Unstable(ArithmeticError):
    """Truncated cohomology did not stabilize across the requested boxes."""


class Flavor(str, Enum):
    PHI = "Phi"
    PSI = "Psi"
    PSI0 = "Psi0"
    GAMMA = "Gamma"
    PHI_GAMMA = "PhiGammaTotal"
    PSI_GAMMA = "PsiGammaTotal"

    @classmethod
    def parse(cls, name) -> "Flavor":
        if isinstance(name, Flavor):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        aliases = {
            "phi": cls.PHI, "psi": cls.PSI, "psi0": cls.PSI0, "gamma": cls.GAMMA,
            "phigamma": cls.PHI_GAMMA, "phigammatotal": cls.PHI_GAMMA,
            "psigamma": cls.PSI_GAMMA, "psigammatotal": cls.PSI_GAMMA,
        }
        if key not in aliases:
            raise ValueError(f"unknown complex flavor {name!r}")
        return aliases[key]

    @property
    def is_total(self) -> bool:
        return self in (Flavor.PHI_GAMMA, Flavor.PSI_GAMMA)


_FIRST_KIND = {
    Flavor.PHI: "phi", Flavor.PSI: "psi", Flavor.PSI0: "psi0", Flavor.GAMMA: "gamma",
    Flavor.PHI_GAMMA: "phi", Flavor.PSI_GAMMA: "psi",
}


@dataclass(frozen=True)
class Descriptor:
    """One signed component of a differential: source term -> target term."""

    source: tuple
    target: tuple
    sign: int
    op: str  # "id-phi_a", "id-psi_a", "psi_a" or "id-gamma_a"
    kind: str
    alpha: str


@dataclass
class KoszulComplex:
    """Koszul complex of one flavor on a module.

    Terms of degree r are indexed by r-subsets of the operator list.  For the
    plain flavors the operators are one per variable; for totals they are the
    phi (or psi) operators followed by the gamma operators, and a term is
    labelled by the pair (S, T) of variables used from each half.
    """

    flavor: Flavor
    module: PhiGammaModule
    ops: tuple[tuple[str, str], ...]

    @property
    def delta(self) -> tuple[str, ...]:
        return self.module.ctx.delta

    @property
    def length(self) -> int:
        return len(self.ops)

    def _subsets(self, r: int) -> list[tuple[int, ...]]:
        if r < 0 or r > self.length:
            return []
        return list(itertools.combinations(range(self.length), r))

    def _label(self, idx: tuple[int, ...]) -> tuple:
        names = [self.ops[i][1] for i in idx]
        if not self.flavor.is_total:
            return tuple(names)
        k = len(self.delta)
        return (tuple(self.ops[i][1] for i in idx if i < k), tuple(self.ops[i][1] for i in idx if i >= k))

    def terms(self, r: int) -> list[tuple]:
        return [self._label(s) for s in self._subsets(r)]

    def rank(self, r: int) -> int:
        return len(self._subsets(r))

    def _sign(self, S: tuple[int, ...], b: int) -> int:
        k = len(self.delta)
        if self.flavor in (Flavor.PHI, Flavor.GAMMA):
            e = sum(1 for s in S if s < b)
        elif self.flavor in (Flavor.PSI, Flavor.PSI0):
            e = sum(1 for j in range(b) if j not in S)
        else:
            first = [s for s in S if s < k]
            if b < k:
                if self.flavor is Flavor.PHI_GAMMA:
                    e = sum(1 for s in first if s < b)
                else:
                    e = sum(1 for j in range(b) if j not in S)
            else:
                e = len(first) + sum(1 for s in S if k <= s < b)
        return -1 if e % 2 else 1

    def descriptors(self, r: int) -> list[Descriptor]:
        out = []
        for S in self._subsets(r):
            for b in range(self.length):
                if b in S:
                    continue
                kind, alpha = self.ops[b]
                T = tuple(sorted(S + (b,)))
                op = f"psi_{alpha}" if kind == "psi0" else f"id-{kind}_{alpha}"
                out.append(Descriptor(self._label(S), self._label(T), self._sign(S, b), op, kind, alpha))
        return out


def build(flavor, M: PhiGammaModule) -> KoszulComplex:
    fl = Flavor.parse(flavor)
    delta = M.ctx.delta
    if fl in (Flavor.PSI, Flavor.PSI0, Flavor.PSI_GAMMA):
        require_etale(M)
    if fl.is_total and M.ctx.p == 2:
        raise DomainError("invariant totals need odd p")
    first = _FIRST_KIND[fl]
    ops = tuple((first, a) for a in delta)
    if fl.is_total:
        ops = ops + tuple(("gamma", a) for a in delta)
    return KoszulComplex(fl, M, ops)


def _apply_op(kind: str, alpha: str, x: ModuleElement, window) -> ModuleElement:
    if kind == "phi":
        y = mod_phi(x, alpha)
    elif kind in ("psi", "psi0"):
        y = mod_psi(x, alpha, window)
    elif kind == "gamma":
        y = mod_gamma(x, alpha, window)
    else:
        raise ValueError(kind)
    return y if kind == "psi0" else x - y


def apply_differential(K: KoszulComplex, r: int, x: Sequence[ModuleElement], window=None) -> tuple[ModuleElement, ...]:
    """d^r applied to an element given as a tuple over ``K.terms(r)``."""
    src = K.terms(r)
    if len(x) != len(src):
        raise ContextError(f"degree {r} has {len(src)} terms, got {len(x)}")
    for xi in x:
        if xi.module is not K.module:
            raise ContextError("element belongs to another module")
    tgt = K.terms(r + 1)
    pos = {t: i for i, t in enumerate(tgt)}
    out = [K.module.zero() for _ in tgt]
    where = {s: i for i, s in enumerate(src)}
    for d in K.descriptors(r):
        y = _apply_op(d.kind, d.alpha, x[where[d.source]], window)
        i = pos[d.target]
        out[i] = out[i] + y if d.sign == 1 else out[i] - y
    return tuple(out)


def complex_pairing(y: Sequence[ModuleElement], x: Sequence[ModuleElement], r: int) -> Scalar:
    """Sum over S of {x_{complement S}, y_S}: y in Phi^r of the dual, x in Psi^{|Delta|-r}."""
    if not y and not x:
        raise ContextError("empty elements")
    D = y[0].module
    M = x[0].module
    if D.__dict__.get("dual_of") is not M:
        raise ContextError("first argument must live on the dual of the second's module")
    delta = M.ctx.delta
    Ssets = [tuple(s) for s in itertools.combinations(delta, r)]
    Usets = [tuple(s) for s in itertools.combinations(delta, len(delta) - r)]
    if len(y) != len(Ssets) or len(x) != len(Usets):
        raise ContextError("element tuples do not match the degrees")
    upos = {u: i for i, u in enumerate(Usets)}
    total = None
    for S, yS in zip(Ssets, y):
        U = tuple(a for a in delta if a not in S)
        v = pairing(x[upos[U]], yS)
        total = v if total is None else total + v
    return total


# truncation ------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationBox:
    c: int
    N: int

    def __post_init__(self):
        if self.c < 0 or self.N < 0:
            raise ValueError("box parameters must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "TruncationBox":
        a, b = text.lower().split("x")
        return cls(int(a), int(b))

    def __str__(self):
        return f"{self.c}x{self.N}"


DEFAULT_BOXES = (TruncationBox(4, 8), TruncationBox(6, 12), TruncationBox(8, 16))


@dataclass
class AssembledMatrix:
    """Differential of one degree on a box: columns are source basis vectors."""

    degree: int
    matrix: np.ndarray
    loss: np.ndarray  # per source column: did the exact image leave the box?


def assemble(K: KoszulComplex, box: TruncationBox) -> list[AssembledMatrix]:
    """Matrices of every differential on the monomial box [-c, N]^Delta.

    Coordinates are those of the ambient (O/p^h)^d, so a generator of order
    p^{n_i} is represented by p^{h-n_i} times a unit vector.  Totals are
    restricted to the C_Delta invariants: the source basis is the projector
    applied to the pivot monomials and targets are read in pivot coordinates.
    """
    M = K.module
    if M.rank == 0:
        return [AssembledMatrix(r, np.zeros((0, 0), dtype=np.int64), np.zeros(0, dtype=bool))
                for r in range(K.length)]
    amb = _engine.AmbientModule(M)
    k, p, e = amb.k, amb.p, amb.e
    reg = _engine.Region(-box.c, box.N, k)
    wide = _engine.Region(min(-box.c, -p * box.c - (e - 1) * (p - 1)), p * box.N + p + 1, k)
    inv = _engine.Invariants(amb, reg, K.flavor.is_total)
    inv_w = _engine.Invariants(amb, wide, K.flavor.is_total)
    out = []
    for r in range(K.length):
        full = _engine.restricted_differential(amb, list(K.ops), r, reg, wide, inv, inv_w, "source")
        nt = K.rank(r + 1)
        inside = _engine._region_map(reg, wide, inv, inv_w)
        rows = np.concatenate([inside + t * inv_w.n for t in range(nt)]) if nt else np.zeros(0, dtype=np.int64)
        outside = np.setdiff1d(np.arange(full.shape[0]), rows)
        loss = np.any(full[outside] != 0, axis=0)
        out.append(AssembledMatrix(r, full[rows], loss))
    return out


# cohomology ------------------------------------------------------------------------

@dataclass
class CohomologyReport:
    """Stabilized truncated cohomology: per degree, elementary divisors p^k as k's."""

    flavor: str
    p: int
    n: int
    divisors: list[list[int]]
    boxes: list[str]
    per_box: list[list[list[int]]]
    stable: bool
    d2_defect: int
    notes: list[str] = field(default_factory=list)

    @property
    def dims(self) -> list[int]:
        """Dimension over F_p of each h^i tensored with F_p."""
        return [len(d) for d in self.divisors]

    def to_dict(self) -> dict:
        return {
            "flavor": self.flavor,
            "p": self.p,
            "n": self.n,
            "divisors": self.divisors,
            "dims": self.dims,
            "boxes": self.boxes,
            "per_box": self.per_box,
            "stable": self.stable,
            "d2_defect": self.d2_defect,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _box_cohomology(K: KoszulComplex, amb, box: TruncationBox) -> list[list[int]]:
    ops = list(K.ops)
    kinds = {o[0] for o in ops}
    inv = K.flavor.is_total
    if kinds & {"psi", "psi0"}:
        return _engine.limit_cohomology(amb, ops, box.c, box.N, inv, True, 2)
    if "phi" in kinds:
        return _engine.colimit_cohomology(amb, ops, box.c, box.N, inv, True)
    # gamma alone preserves degrees: the lattice model applies without contraction
    return _engine.limit_cohomology(amb, ops, box.c, box.N, inv, False, 1)


def cohomology(K: KoszulComplex, boxes: Sequence[TruncationBox] = DEFAULT_BOXES) -> CohomologyReport:
    """Cohomology of the truncated complex at each box, with a stability verdict."""
    boxes = [b if isinstance(b, TruncationBox) else TruncationBox.parse(str(b)) for b in boxes]
    if len(boxes) < 3:
        raise ValueError("at least three boxes are needed to judge stability")
    if any((a.c, a.N) >= (b.c, b.N) for a, b in zip(boxes, boxes[1:])):
        raise ValueError("boxes must increase")
    M = K.module
    ctx = M.ctx
    if M.rank == 0:
        empty = [[] for _ in range(K.length + 1)]
        return CohomologyReport(K.flavor.value, ctx.p, ctx.n, empty, [str(b) for b in boxes],
                                [empty for _ in boxes], True, 0)
    amb = _engine.AmbientModule(M)
    per_box = [_box_cohomology(K, amb, b) for b in boxes]
    scheme = "limit" if any(o[0] in ("psi", "psi0") for o in K.ops) or "phi" not in {o[0] for o in K.ops} else "colimit"
    defect = _engine.d_squared_defect(amb, list(K.ops), scheme)
    last = per_box[-3:]
    stable = all(x == last[0] for x in last) and defect == 0
    notes = [] if stable else ["truncated cohomology changed across the last boxes" if defect == 0 else "d.d is nonzero"]
    return CohomologyReport(K.flavor.value, ctx.p, amb.h, per_box[-1], [str(b) for b in boxes],
                            per_box, stable, defect, notes)


def euler_characteristic(report: CohomologyReport) -> int:
    if not report.stable:
        raise Unstable("Euler characteristic needs a stable report")
    return sum((-1) ** i * d for i, d in enumerate(report.dims))
