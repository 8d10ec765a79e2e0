"""Matrix assembly and truncated cohomology for Koszul complexes.

Vectors live in the ambient module (O/p^h)^d, coordinates scaled by
p^{h-n_i}, restricted to a region: monomials X^w with every w_alpha in
[lo, hi].  Operators are Kronecker products of one-variable matrices
composed with multiplication by the module matrices.

Two finite models are used.

Colimit model (phi, gamma operators): exponents above the cap N are
dropped (that part is stable and acyclic), and the complex is the union
of its pole-bounded pieces F_P.  Classes are cycles in F_{P_T} modulo
boundaries coming from the larger piece F_{P_S}.

Limit model (psi, gamma operators): the lattice X^{-P} O^+ is stable and
is the limit of its quotients by exponents above a level M.  Classes are
images of fine-level cycles at the coarse level modulo coarse boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import _linalg
from .laurent import LaurentSeries
from .operators import _subst_powers, phi_monomial, psi_decompose, psi_window_bounds
from .scalars import DomainError, PadicExponent, teichmuller_int, vp_factorial


@dataclass(frozen=True)
class Region:
    lo: int
    hi: int
    dim: int

    @property
    def side(self) -> int:
        return self.hi - self.lo + 1

    @property
    def size(self) -> int:
        return self.side**self.dim

    def exponents(self) -> np.ndarray:
        """(size, dim) array of exponent vectors in index order."""
        r = np.arange(self.lo, self.hi + 1)
        grids = np.meshgrid(*([r] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


# one-variable matrices -----------------------------------------------------------

def _dense1(cols: dict[int, dict[int, int]], src: Region, tgt: Region, q: int, what: str) -> np.ndarray:
    M = np.zeros((tgt.side, src.side), dtype=np.int64)
    for k, poly in cols.items():
        for e, v in poly.items():
            if e > tgt.hi:
                continue
            if e < tgt.lo:
                if v % q:
                    raise DomainError(f"{what} leaves the target region at exponent {e}")
                continue
            M[e - tgt.lo, k - src.lo] = (M[e - tgt.lo, k - src.lo] + v) % q
    return M


@lru_cache(maxsize=None)
def _psi_mono(k: int, p: int, n: int) -> tuple:
    return tuple(psi_decompose({k: 1}, p, n)[0].items())


@lru_cache(maxsize=256)
def _one_var(kind: str, src: Region, tgt: Region, p: int, n: int, cexp=None) -> np.ndarray:
    q = p**n
    ks = range(src.lo, src.hi + 1)
    if kind == "id":
        return _dense1({k: {k: 1} for k in ks}, src, tgt, q, "inclusion")
    if kind == "phi":
        return _dense1({k: dict(phi_monomial(k, p, n)) for k in ks}, src, tgt, q, "phi")
    if kind == "psi":
        return _dense1({k: dict(_psi_mono(k, p, n)) for k in ks}, src, tgt, q, "psi")
    if kind == "shift":
        s = cexp
        return _dense1({k: {k + s: 1} for k in ks}, src, tgt, q, "shift")
    if kind == "subst":
        c, cprec = cexp
        L = tgt.hi - src.lo
        if L < 0:
            return np.zeros((tgt.side, src.side), dtype=np.int64)
        pw = _subst_powers(c, cprec, p, n, min(src.lo, 0), max(src.hi, 0), L)
        cols = {}
        for k in ks:
            row = pw[k]
            cols[k] = {k + j: row[j] for j in range(0, tgt.hi - k + 1) if row[j]}
        return _dense1(cols, src, tgt, q, "substitution")
    raise ValueError(kind)


def _axis_op(kind: str, axis: int, src: Region, tgt: Region, p: int, n: int, cexp=None) -> sp.csr_matrix:
    """Ring operator acting on one axis (others included unchanged)."""
    out = None
    for a in range(src.dim):
        m = _one_var(kind if a == axis else "id", src, tgt, p, n, cexp if a == axis else None)
        m = sp.csr_matrix(m)
        out = m if out is None else sp.kron(out, m, format="csr")
    return out


def _shift_op(exps: tuple, src: Region, tgt: Region, p: int, n: int) -> sp.csr_matrix:
    out = None
    for s in exps:
        m = sp.csr_matrix(_one_var("shift", src, tgt, p, n, s))
        out = m if out is None else sp.kron(out, m, format="csr")
    return out


# module data in ambient coordinates ---------------------------------------------

class AmbientModule:
    """Module data over O/p^h with coordinates scaled to a common exponent."""

    def __init__(self, module, exponent_slack: int = 0):
        self.M = module
        ctx = module.ctx
        self.p = ctx.p
        self.h = module.h
        self.e = self.h
        self.q = self.p**self.e
        self.d = module.rank
        self.k = ctx.dim
        self.delta = ctx.delta
        self.divs = module.divisors

    def scaled(self, A, span: int | None = None) -> list[list[dict]]:
        """W A W^{-1} as nested dicts {exponent: coefficient}; entries must lie in O^+.

        Series known only through a window are accepted when the window covers ``span``.
        """
        p, ns, q = self.p, self.divs, self.q
        out = []
        for i, row in enumerate(A):
            r = []
            for j, x in enumerate(row):
                if x.window is not None and (span is None or min(x.window.hi) < span):
                    raise DomainError("cohomology needs module matrices known through the box")
                sh = ns[j] - ns[i]
                terms = {}
                for ev, v in x.terms.items():
                    if any(t < 0 for t in ev):
                        raise DomainError("cohomology needs module matrices with entries in O^+")
                    if span is not None and any(t > span for t in ev):
                        continue
                    if sh >= 0:
                        c = v * p**sh
                    else:
                        if v % p ** (-sh):
                            raise DomainError("module matrix incompatible with the divisors")
                        c = v // p ** (-sh)
                    if c % q:
                        terms[ev] = c % q
                r.append(terms)
            out.append(r)
        return out

    @lru_cache(maxsize=None)
    def matrix(self, which: str, alpha: str, span: int | None = None):
        from .pgmodule import frobenius_inverse

        if which == "B":
            A = self.M.B(alpha)
        elif which == "Binv":
            A = frobenius_inverse(self.M, alpha, None if span is None else (span,) * self.k)
        elif which == "G":
            A = self.M.G(alpha)
        elif which == "T":
            A = self.M.T(alpha)
        else:
            raise ValueError(which)
        if all(x.window is None for row in A for x in row):
            span = None
        return self.scaled(A, span)

    def mult(self, which: str, alpha: str, reg: Region) -> sp.csr_matrix:
        mat = self.matrix(which, alpha, reg.hi - reg.lo)
        blocks = [[None] * self.d for _ in range(self.d)]
        for i in range(self.d):
            for j in range(self.d):
                acc = sp.csr_matrix((reg.size, reg.size), dtype=np.int64)
                for ev, c in mat[i][j].items():
                    acc = acc + c * _shift_op(ev, reg, reg, self.p, self.e)
                blocks[i][j] = acc
        return (sp.bmat(blocks, format="csr") if self.d > 1 else blocks[0][0]).tocsr()

    def is_identity(self, which: str, alpha: str) -> bool:
        raw = {"B": self.M.B, "Binv": self.M.B, "G": self.M.G, "T": self.M.T}[which](alpha)
        one = LaurentSeries.one(self.M.ctx)
        return all(x.window is None and x == (one if i == j else LaurentSeries.zero(self.M.ctx))
                   for i, row in enumerate(raw) for j, x in enumerate(row))

    def gamma_exp(self, alpha: str):
        c = self.M.gamma[alpha].exponent
        return (c.approx, c.prec)

    def torsion_exp(self, alpha: str, span: int):
        gen = self.M.torsion[alpha].generator
        prec = self.e + vp_factorial(span + 1, self.p) + 1
        return (teichmuller_int(gen, self.p, prec), prec)

    def torsion_char(self) -> list[list[int]]:
        """a[i][alpha] with T_alpha = diag(omega^a) mod X; required for invariant bases."""
        p = self.p
        g = self.M.torsion
        out = [[0] * self.k for _ in range(self.d)]
        for ai, alpha in enumerate(self.delta):
            T = self.matrix("T", alpha, 0)
            w = teichmuller_int(g[alpha].generator, p, 1)
            zero = (0,) * self.k
            for i in range(self.d):
                for j in range(self.d):
                    c = T[i][j].get(zero, 0) % p
                    if i != j and c:
                        raise DomainError("torsion matrix must be diagonal modulo X")
                    if i == j:
                        if c == 0:
                            raise DomainError("torsion matrix is not invertible")
                        a = next(t for t in range(p - 1) if pow(w, t, p) == c)
                        out[i][ai] = a
        return out

    # module operators on regions ---------------------------------------------
    def op(self, kind: str, alpha: str, src: Region, tgt: Region) -> sp.csr_matrix:
        ax = self.delta.index(alpha)
        p, e = self.p, self.e
        eye = sp.identity(self.d, dtype=np.int64, format="csr")
        if kind == "id":
            return sp.kron(eye, _axis_op("id", 0, src, tgt, p, e), format="csr")
        if kind == "phi":
            R = sp.kron(eye, _axis_op("phi", ax, src, tgt, p, e), format="csr")
            return self._left(R, "B", alpha, tgt)
        if kind in ("psi", "psi0"):
            R = sp.kron(eye, _axis_op("psi", ax, src, tgt, p, e), format="csr")
            if self.is_identity("Binv", alpha):
                return R
            return (R @ self.mult("Binv", alpha, src)).tocsr()
        if kind == "gamma":
            R = sp.kron(eye, _axis_op("subst", ax, src, tgt, p, e, self.gamma_exp(alpha)), format="csr")
            return self._left(R, "G", alpha, tgt)
        if kind == "torsion":
            span = max(tgt.hi - src.lo, 1)
            R = sp.kron(eye, _axis_op("subst", ax, src, tgt, p, e, self.torsion_exp(alpha, span)), format="csr")
            return self._left(R, "T", alpha, tgt)
        raise ValueError(kind)

    def _left(self, R, which, alpha, tgt):
        if self.is_identity(which, alpha):
            return R
        return (self.mult(which, alpha, tgt) @ R).tocsr()


# Koszul assembly -------------------------------------------------------------------

def subsets(m: int, r: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(m), r))


def koszul_blocks(amb: AmbientModule, ops: list[tuple[str, str]], r: int, src: Region, tgt: Region):
    """Blocks {(target index, source index): sparse} of the degree-r differential.

    Standard Koszul signs: entering op beta into S carries (-1)^{#{s in S, s < beta}}.
    """
    m = len(ops)
    S_list = subsets(m, r)
    T_list = subsets(m, r + 1)
    T_index = {T: i for i, T in enumerate(T_list)}
    q = amb.q
    cache = {}
    blocks = {}
    for si, S in enumerate(S_list):
        for b in range(m):
            if b in S:
                continue
            T = tuple(sorted(S + (b,)))
            sign = -1 if sum(1 for s in S if s < b) % 2 else 1
            kind, alpha = ops[b]
            if (kind, alpha) not in cache:
                opm = amb.op(kind, alpha, src, tgt)
                if kind != "psi0":
                    opm = (amb.op("id", alpha, src, tgt) - opm)
                cache[(kind, alpha)] = opm.tocsr()
            blk = cache[(kind, alpha)] if sign == 1 else -cache[(kind, alpha)]
            blocks[(T_index[T], si)] = blk
    return blocks, len(T_list), len(S_list)


def assemble_matrix(amb, ops, r, src, tgt) -> sp.csr_matrix:
    blocks, nt, ns = koszul_blocks(amb, ops, r, src, tgt)
    dt, ds = amb.d * tgt.size, amb.d * src.size
    grid = [[blocks.get((t, s), sp.csr_matrix((dt, ds), dtype=np.int64)) for s in range(ns)] for t in range(nt)]
    if nt == 0 or ns == 0:
        return sp.csr_matrix((nt * dt, ns * ds), dtype=np.int64)
    M = sp.bmat(grid, format="csr")
    M.data %= amb.q
    M.eliminate_zeros()
    return M


# invariant bases -------------------------------------------------------------------

class Invariants:
    """Pivot data for the C_Delta-invariant part of one copy of the module on a region."""

    def __init__(self, amb: AmbientModule, reg: Region, use: bool):
        self.amb, self.reg, self.use = amb, reg, use
        ex = reg.exponents()
        if use:
            a = amb.torsion_char()
            keep = []
            for i in range(amb.d):
                ok = np.all((ex + np.array(a[i])) % (amb.p - 1) == 0, axis=1)
                keep.append(np.nonzero(ok)[0] + i * reg.size)
            self.pivots = np.concatenate(keep)
        else:
            self.pivots = np.arange(amb.d * reg.size)
        self.exps = np.vstack([ex] * amb.d)[self.pivots]
        comp = self.pivots // reg.size
        self.weights = np.array([amb.p ** (amb.h - amb.divs[i]) for i in comp], dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.pivots)

    def _sel(self) -> sp.csr_matrix:
        N = self.amb.d * self.reg.size
        return sp.csr_matrix((np.ones(self.n, dtype=np.int64), (self.pivots, np.arange(self.n))), shape=(N, self.n))

    def _tau(self) -> list:
        if not hasattr(self, "_taus"):
            self._taus = [self.amb.op("torsion", a, self.reg, self.reg) for a in self.amb.delta]
        return self._taus

    def _average(self, Y, transpose: bool) -> np.ndarray:
        q, p = self.amb.q, self.amb.p
        inv = pow(p - 1, -1, q)
        for tau in self._tau():
            t = tau.T.tocsr() if transpose else tau
            acc = Y.copy()
            Z = Y
            for _ in range(p - 2):
                Z = _spmm(t, Z, q)
                acc = (acc + Z) % q
            Y = acc * inv % q
        return Y

    @property
    def basis(self) -> np.ndarray:
        """Columns P(X^w e_i) for every pivot, dense (region vector x pivots)."""
        if not hasattr(self, "_basis"):
            Y = self._sel().toarray()
            self._basis = self._average(Y, False) if self.use else Y
        return self._basis

    @property
    def readout(self) -> np.ndarray:
        """Rows of the projector at pivot positions (pivots x region vector)."""
        if not hasattr(self, "_readout"):
            Y = self._sel().toarray()
            self._readout = (self._average(Y, True) if self.use else Y).T.copy()
        return self._readout

    @property
    def U(self) -> np.ndarray:
        """Pivot coordinates of the weighted basis elements (pivots x pivots)."""
        return self.basis[self.pivots] * self.weights[None, :] % self.amb.q


def _spmm(A: sp.csr_matrix, Y: np.ndarray, q: int) -> np.ndarray:
    """Sparse @ dense mod q, exact."""
    A = A.tocsr()
    if A.nnz == 0:
        return np.zeros((A.shape[0], Y.shape[1]), dtype=np.int64)
    k = int(np.diff(A.indptr).max(initial=0))
    if k * (q - 1) ** 2 < 2**52:
        out = A.astype(np.float64) @ Y.astype(np.float64)
        return np.remainder(out, q).astype(np.int64)
    return (A.astype(object) @ Y.astype(object) % q).astype(np.int64)


def _region_map(small: Region, big: Region, inv_small: Invariants, inv_big: Invariants) -> np.ndarray:
    """Positions of small-region pivots among big-region pivots."""
    d = inv_small.amb.d
    comp_s = inv_small.pivots // small.size
    comp_b = inv_big.pivots // big.size
    lookup = {(int(c),) + tuple(int(x) for x in e): i for i, (c, e) in enumerate(zip(comp_b, inv_big.exps))}
    out = np.array([lookup[(int(c),) + tuple(int(x) for x in e)] for c, e in zip(comp_s, inv_small.exps)], dtype=np.int64)
    assert d >= 1
    return out


def restricted_differential(amb, ops, r, src, tgt, inv_src, inv_tgt, mode: str) -> np.ndarray:
    """Degree-r differential on invariants: basis columns in, pivot coordinates out.

    ``mode`` "source" applies the projector on the source region (small sources),
    "target" applies it on the target region (small targets).
    """
    blocks, nt, ns = koszul_blocks(amb, ops, r, src, tgt)
    q = amb.q
    npt, nps = inv_tgt.n, inv_src.n
    out = np.zeros((nt * npt, ns * nps), dtype=np.int64)
    if mode == "source":
        Y = inv_src.basis
        for (t, s), blk in blocks.items():
            sub = blk[inv_tgt.pivots]
            out[t * npt:(t + 1) * npt, s * nps:(s + 1) * nps] = _spmm(sub, Y, q)
    else:
        Rt = inv_tgt.readout
        for (t, s), blk in blocks.items():
            sub = blk[:, inv_src.pivots].tocsc()
            out[t * npt:(t + 1) * npt, s * nps:(s + 1) * nps] = _spmm(sub.T.tocsr(), Rt.T, q).T
    out = out * np.tile(inv_src.weights, ns)[None, :]
    return out % q


def blockdiag(U: np.ndarray, copies: int) -> np.ndarray:
    if copies == 0:
        return np.zeros((0, 0), dtype=np.int64)
    return np.kron(np.eye(copies, dtype=np.int64), U)


# cohomology schemes --------------------------------------------------------------

def _divisors_to_list(div: dict[int, int]) -> list[int]:
    return sorted(k for k, m in div.items() for _ in range(m))


def colimit_cohomology(amb, ops, c: int, N: int, invariants: bool, has_phi: bool, gap: int | None = None) -> list[list[int]]:
    p, e, k = amb.p, amb.e, amb.k
    m = len(ops)
    PT = (p - 1) * c
    PS = PT + (2 * p * e + p if gap is None else gap)

    def tgt_pole(P):
        return p * P + (e - 1) * (p - 1) if has_phi else P

    RT = Region(-PT, N, k)
    RS = Region(-PS, N, k)
    RTt = Region(-tgt_pole(PT), N, k)
    RSt = Region(-tgt_pole(PS), N, k)
    iT, iS, iTt, iSt = (Invariants(amb, R, invariants) for R in (RT, RS, RTt, RSt))
    out = []
    for i in range(m + 1):
        ncop = len(subsets(m, i))
        # cycles in F_T, as pivot coordinates
        if i < m:
            D = restricted_differential(amb, ops, i, RT, RTt, iT, iTt, "source")
            Z = _linalg.kernel(D, p, e)
        else:
            Z = np.eye(ncop * iT.n, dtype=np.int64)
        Zp = blockdiag(iT.U, ncop) @ Z % amb.q if Z.size else Z
        if i == 0:
            out.append(_divisors_to_list(_linalg.quotient_divisors(Zp, np.zeros((Zp.shape[0], 0), dtype=np.int64), p, e)))
            continue
        B = restricted_differential(amb, ops, i - 1, RS, RSt, iS, iSt, "source")
        pos = _region_map(RT, RSt, iT, iSt)
        nb = iSt.n
        rows = np.concatenate([pos + t * nb for t in range(ncop)])
        Zbig = np.zeros((ncop * nb, Zp.shape[1]), dtype=np.int64)
        Zbig[rows] = Zp
        nonT = np.setdiff1d(np.arange(ncop * nb), rows)
        out.append(_divisors_to_list(_quotient_in_T(Zbig, B, nonT, p, e)))
    return out


def _quotient_in_T(Z: np.ndarray, B: np.ndarray, nonT: np.ndarray, p: int, e: int) -> dict[int, int]:
    """Divisors of Z / (B meet T) where Z lies in T = coordinates outside ``nonT``."""
    q = p**e
    base = _linalg.span_length(B[nonT].T, p, e) if B.size else 0
    L = []
    for kk in range(e + 1):
        G = np.hstack([(Z * p**kk) % q, B]) if B.size else (Z * p**kk) % q
        L.append((_linalg.span_length(G.T, p, e) if G.size else 0) - base)
    out = {}
    ge = [L[t] - L[t + 1] for t in range(e)]
    for t in range(e):
        cnt = ge[t] - (ge[t + 1] if t + 1 < e else 0)
        if cnt:
            out[t + 1] = cnt
    return out


def limit_cohomology(amb, ops, c: int, N: int, invariants: bool, has_psi: bool, fine_factor: int) -> list[list[int]]:
    p, e, k = amb.p, amb.e, amb.k
    m = len(ops)
    P = (p - 1) * c
    MT = N
    MS = fine_factor * p * N if has_psi else N

    def contract(M):
        return psi_window_bounds(-P, M, p, e)[1] if has_psi else M

    Ms = MT
    while contract(Ms) < MT:
        Ms += 1
    RS, RSt = Region(-P, MS, k), Region(-P, contract(MS), k)
    RT = Region(-P, MT, k)
    RB = Region(-P, Ms, k)
    iS, iSt, iT, iB = (Invariants(amb, R, invariants) for R in (RS, RSt, RT, RB))
    tmask = np.all(iS.exps <= MT, axis=1)
    out = []
    for i in range(m + 1):
        ncop = len(subsets(m, i))
        Tcols = np.concatenate([np.nonzero(tmask)[0] + t * iS.n for t in range(ncop)])
        if i < m:
            D = restricted_differential(amb, ops, i, RS, RSt, iS, iSt, "target")
            nonT = np.setdiff1d(np.arange(ncop * iS.n), Tcols)
            Zt = _linalg.preimage_of_image(D[:, Tcols], D[:, nonT], p, e)
        else:
            Zt = np.eye(len(Tcols), dtype=np.int64)
        # T columns of the fine basis are the coarse basis, in the same order
        Zp = blockdiag(iT.U, ncop) @ Zt % amb.q if Zt.size else np.zeros((ncop * iT.n, 0), dtype=np.int64)
        if i == 0:
            Bt = np.zeros((Zp.shape[0], 0), dtype=np.int64)
        else:
            Bt = restricted_differential(amb, ops, i - 1, RB, RT, iB, iT, "target")
        out.append(_divisors_to_list(_linalg.quotient_divisors(Zp, Bt, p, e)))
    return out


def d_squared_defect(amb, ops, scheme: str, invariants: bool = False) -> int:
    """Number of nonzero entries of d.d on a small inner box (module vectors only)."""
    p, e, k = amb.p, amb.e, amb.k
    m = len(ops)
    total = 0
    if scheme == "colimit":
        has_phi = any(o[0] == "phi" for o in ops)
        tp = (lambda P: p * P + (e - 1) * (p - 1)) if has_phi else (lambda P: P)
        P0, N0 = p - 1, 2
        R0, R1, R2 = Region(-P0, N0, k), Region(-tp(P0), N0, k), Region(-tp(tp(P0)), N0, k)
    else:
        has_psi = any(o[0] in ("psi", "psi0") for o in ops)
        P0 = p - 1

        def contract(M):
            return psi_window_bounds(-P0, M, p, e)[1] if has_psi else M

        M2 = 1
        M1 = M2
        while contract(M1) < M2:
            M1 += 1
        M0 = M1
        while contract(M0) < M1:
            M0 += 1
        R0, R1, R2 = Region(-P0, M0, k), Region(-P0, M1, k), Region(-P0, M2, k)
    # only vectors of the module itself: coordinate i scaled by p^{h-n_i}
    w = np.repeat([p ** (amb.h - n) for n in amb.divs], R0.size)
    for r in range(m - 1):
        A = assemble_matrix(amb, ops, r, R0, R1)
        B = assemble_matrix(amb, ops, r + 1, R1, R2)
        Wr = sp.diags(np.tile(w, len(subsets(m, r))).astype(np.int64), format="csr")
        C = (B @ (A @ Wr)).tocsr()
        C.data %= amb.q
        C.eliminate_zeros()
        total += C.nnz
    return total
