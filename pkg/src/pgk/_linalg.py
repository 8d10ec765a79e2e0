"""Linear algebra over the chain ring Z/p^e.

Submodules of (Z/p^e)^N are handled through generator matrices whose rows
span them.  The workhorse is a layered, blocked row elimination: layer v
takes pivots of exact valuation v, and each panel of pivots updates the
rest of the matrix with one matrix product (float64 when exact, else int64
or Python ints).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EXACT_FLOAT = 2**52
_BLOCK = 64


def _matmul_mod(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    k = A.shape[1]
    if k == 0:
        return np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    if k * (q - 1) ** 2 < _EXACT_FLOAT:
        return np.remainder(A.astype(np.float64) @ B.astype(np.float64), q).astype(np.int64)
    if k * (q - 1) ** 2 < 2**62:
        return (A.astype(np.int64) @ B.astype(np.int64)) % q
    return ((A.astype(object) @ B.astype(object)) % q).astype(np.int64)


@dataclass
class Echelon:
    """Result of eliminating the rows of a matrix.

    ``rows`` holds the transformed rows, pivot rows first (in pivot order);
    ``pivots`` lists (column, valuation) per pivot row.
    """

    rows: np.ndarray
    pivots: list[tuple[int, int]]
    p: int
    e: int

    @property
    def npiv(self) -> int:
        return len(self.pivots)

    def length(self) -> int:
        return sum(self.e - v for _, v in self.pivots)


def eliminate(A: np.ndarray, p: int, e: int, lead: int | None = None) -> Echelon:
    """Row-eliminate A over Z/p^e; pivots are taken only among the first ``lead`` columns."""
    q = p**e
    A = np.array(A, dtype=np.int64) % q
    nrows, ncols = A.shape
    lead = ncols if lead is None else lead
    piv_rows: list[np.ndarray] = []
    pivots: list[tuple[int, int]] = []
    rem = A
    for v in range(e):
        if rem.shape[0] == 0:
            break
        prs, pcs, rem = _layer(rem, p, q, v, lead)
        piv_rows.extend(prs)
        pivots.extend((c, v) for c in pcs)
    rows = np.vstack(piv_rows + [rem]) if piv_rows else rem
    return Echelon(rows, pivots, p, e)


def _layer(A: np.ndarray, p: int, q: int, v: int, lead: int):
    """One valuation layer: pivots are entries with x // p^v a unit."""
    pv = p**v
    nrows = A.shape[0]
    active = np.ones(nrows, dtype=bool)
    piv_rows: list[np.ndarray] = []
    piv_cols: list[int] = []
    # columns whose valuation-v part vanishes everywhere can be skipped
    for j0 in range(0, lead, _BLOCK):
        if not active.any():
            break
        j1 = min(lead, j0 + _BLOCK)
        idx = np.nonzero(active)[0]
        panel = A[idx, j0:j1].copy()
        F = np.zeros((len(idx), j1 - j0), dtype=np.int64)
        local_active = np.ones(len(idx), dtype=bool)
        chosen: list[int] = []  # local row indices of pivots, in order
        chosen_k: list[int] = []  # panel pivot slot
        for c in range(j1 - j0):
            col = (panel[:, c] // pv) % p
            cand = np.nonzero((col != 0) & local_active)[0]
            if len(cand) == 0:
                continue
            r = cand[0]
            inv = pow(int(panel[r, c] // pv) % q, -1, q)
            f = ((panel[:, c] // pv) % q * inv) % q
            f[~local_active] = 0
            f[r] = 0
            k = len(chosen)
            F[:, k] = f
            if f.any():
                nz = np.nonzero(f)[0]
                panel[nz] = (panel[nz] - np.outer(f[nz], panel[r]) % q) % q
            local_active[r] = False
            chosen.append(r)
            chosen_k.append(k)
            piv_cols.append(j0 + c)
        if not chosen:
            continue
        k = len(chosen)
        F = F[:, :k]
        # bring the pivot rows' out-of-panel parts up to date, in order
        outside = np.concatenate([np.arange(0, j0), np.arange(j1, A.shape[1])])
        prow_out = A[idx[chosen]][:, outside].copy()
        for t in range(1, k):
            coeffs = F[chosen[t], :t]
            if coeffs.any():
                prow_out[t] = (prow_out[t] - _matmul_mod(coeffs[None, :], prow_out[:t], q)[0]) % q
        for t, r in enumerate(chosen):
            full = np.empty(A.shape[1], dtype=np.int64)
            full[j0:j1] = panel[r]
            full[outside] = prow_out[t]
            piv_rows.append(full)
        rest = np.nonzero(local_active)[0]
        if len(rest):
            Fr = F[rest]
            upd = _matmul_mod(Fr, prow_out, q)
            gidx = idx[rest]
            A[np.ix_(gidx, outside)] = (A[np.ix_(gidx, outside)] - upd) % q
            A[gidx, j0:j1] = panel[rest]
        active[idx[chosen]] = False
    remaining = A[active]
    return piv_rows, piv_cols, remaining


def _prune_cols(G: np.ndarray) -> np.ndarray:
    if G.size == 0:
        return G
    keep = np.any(G != 0, axis=0)
    return G[:, keep]


def span_length(G: np.ndarray, p: int, e: int) -> int:
    """Length (log_p of the order) of the row span of G in (Z/p^e)^N."""
    G = np.asarray(G, dtype=np.int64) % p**e
    if G.size == 0:
        return 0
    G = G[np.any(G != 0, axis=1)]
    G = _prune_cols(G)
    if G.size == 0:
        return 0
    if G.shape[0] > G.shape[1]:
        # fewer columns: the span of the columns has the same length
        G = G.T
    return eliminate(G, p, e).length()


def kernel(A: np.ndarray, p: int, e: int) -> np.ndarray:
    """Generators (as columns) of {u : A u = 0} over Z/p^e."""
    q = p**e
    A = np.asarray(A, dtype=np.int64) % q
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    At = A.T[:, np.any(A != 0, axis=1)] if m else np.zeros((n, 0), dtype=np.int64)
    aug = np.hstack([At, np.eye(n, dtype=np.int64)])
    ech = eliminate(aug, p, e, lead=At.shape[1])
    P = ech.rows[:, At.shape[1]:]
    gens = []
    for r, (_, v) in enumerate(ech.pivots):
        if v > 0:
            gens.append(P[r] * p ** (e - v) % q)
    gens.extend(P[ech.npiv:])
    if not gens:
        return np.zeros((n, 0), dtype=np.int64)
    K = np.array(gens, dtype=np.int64).T % q
    return K[:, np.any(K != 0, axis=0)]


def preimage_of_image(DT: np.ndarray, DN: np.ndarray, p: int, e: int) -> np.ndarray:
    """Generators (columns) of {u : DT u lies in the column span of DN}."""
    q = p**e
    DT = np.asarray(DT, dtype=np.int64) % q
    DN = np.asarray(DN, dtype=np.int64) % q
    m = DT.shape[0]
    if DN.shape[1] == 0 or not DN.any():
        return kernel(DT, p, e)
    keep = np.any(DT != 0, axis=1) | np.any(DN != 0, axis=1)
    DT, DN = DT[keep], DN[keep]
    DN = DN[:, np.any(DN != 0, axis=0)]
    m = DT.shape[0]
    aug = np.hstack([DN, np.eye(m, dtype=np.int64)])
    ech = eliminate(aug, p, e, lead=DN.shape[1])
    P = ech.rows[:, DN.shape[1]:]
    scale = np.ones(m, dtype=object)
    for r, (_, v) in enumerate(ech.pivots):
        scale[r] = p ** (e - v)
    S = _matmul_mod(P, DT, q)
    S = (S.astype(object) * scale[:, None] % q).astype(np.int64)
    return kernel(S, p, e)


def quotient_divisors(A: np.ndarray, B: np.ndarray, p: int, e: int) -> dict[int, int]:
    """Elementary divisors of span(A)+span(B) over span(B), generators as columns.

    Returns {k: multiplicity} for cyclic factors Z/p^k.
    """
    L = []
    for k in range(e + 1):
        parts = [M for M in ((A * p**k) % p**e, B) if M.size and M.shape[1]]
        G = np.hstack(parts) if parts else np.zeros((0, 0), dtype=np.int64)
        L.append(span_length(G.T, p, e) if G.size else 0)
    out = {}
    ge = [L[k] - L[k + 1] for k in range(e)]  # factors of order >= p^{k+1}
    for k in range(e):
        cnt = ge[k] - (ge[k + 1] if k + 1 < e else 0)
        if cnt:
            out[k + 1] = cnt
    return out
