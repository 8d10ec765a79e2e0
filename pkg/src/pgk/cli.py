"""Command line front-end: module spec files, expressions, JSON reports."""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from importlib import metadata
from typing import Sequence

from .complexes import TruncationBox, build, cohomology
from .laurent import LaurentSeries, to_text
from .operators import GammaElement, gamma_apply, phi, psi, residue, sharp
from .overconv import RadiusParam, rnorm
from .pgmodule import PhiGammaModule, check_relations, dual_module, etale_check, pairing
from .robba import iota_iterate
from .scalars import PadicExponent, PrecCtx, smallest_primitive_root

SCHEMA_VERSION = 1


class ExprSyntaxError(SyntaxError):
    """Malformed expression; ``pos`` is the 0-based character offset."""

    def __init__(self, msg: str, text: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.text = text
        self.pos = pos


class UnknownVariable(ValueError):
    pass


# expressions -------------------------------------------------------------------

def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            toks.append(("int", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("name", text[i:j], i))
            i = j
        elif ch in "+-*^()":
            toks.append((ch, ch, i))
            i += 1
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", text, i)
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, ctx: PrecCtx):
        self.text, self.ctx = text, ctx
        self.toks = _tokenize(text)
        self.i = 0
        self.vars = {f"X{a}": a for a in ctx.delta}

    def peek(self):
        return self.toks[self.i]

    def take(self, kind: str):
        t = self.toks[self.i]
        if t[0] != kind:
            what = "end of input" if t[0] == "end" else repr(t[1])
            raise ExprSyntaxError(f"expected {kind}, found {what}", self.text, t[2])
        self.i += 1
        return t

    def expr(self) -> LaurentSeries:
        neg = False
        if self.peek()[0] == "-":
            self.take("-")
            neg = True
        out = self.term()
        out = -out if neg else out
        while self.peek()[0] in ("+", "-"):
            op = self.take(self.peek()[0])[0]
            t = self.term()
            out = out + t if op == "+" else out - t
        return out

    def term(self) -> LaurentSeries:
        if self.peek()[0] == "int":
            out = LaurentSeries.constant(self.ctx, int(self.take("int")[1]))
        else:
            out = self.factor()
        while self.peek()[0] == "*":
            self.take("*")
            out = out * self.factor()
        return out

    def factor(self) -> LaurentSeries:
        t = self.peek()
        if t[0] == "(":
            self.take("(")
            out = self.expr()
            self.take(")")
            return out
        if t[0] == "name":
            self.take("name")
            if t[1] not in self.vars:
                raise UnknownVariable(f"unknown variable {t[1]!r} at position {t[2]}; expected one of {sorted(self.vars)}")
            k = 1
            if self.peek()[0] == "^":
                self.take("^")
                sign = 1
                if self.peek()[0] == "-":
                    self.take("-")
                    sign = -1
                k = sign * int(self.take("int")[1])
            return LaurentSeries.var(self.ctx, self.vars[t[1]], k)
        what = "end of input" if t[0] == "end" else repr(t[1])
        raise ExprSyntaxError(f"expected a variable or '(', found {what}", self.text, t[2])


def parse_expr(text: str, ctx: PrecCtx) -> LaurentSeries:
    """Parse a Laurent polynomial over ctx; variables are X followed by a name in delta."""
    p = _Parser(text, ctx)
    out = p.expr()
    p.take("end")
    return out


def parse_expr_list(text: str, ctx: PrecCtx) -> list[LaurentSeries]:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ExprSyntaxError("expected a bracketed list", text, 0)
    inner = body[1:-1]
    parts, depth, cur = [], 0, []
    for ch in inner:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    if inner.strip():
        parts.append("".join(cur))
    return [parse_expr(s, ctx) for s in parts]


# module specs ------------------------------------------------------------------

def _matrix(rows, ctx: PrecCtx, rank: int):
    if len(rows) != rank or any(len(r) != rank for r in rows):
        raise ValueError(f"matrices must be {rank}x{rank}")
    return [[parse_expr(str(x), ctx) for x in r] for r in rows]


def _chi(value, p: int) -> int:
    if isinstance(value, int):
        return value
    s = str(value).replace(" ", "")
    if s == "1+p":
        return 1 + p
    return int(s)


def load_module(data: dict) -> PhiGammaModule:
    """Build a module from the JSON spec layout (p, n, delta, rank, divisors, phi, gamma, torsion)."""
    p, n = int(data["p"]), int(data["n"])
    delta = tuple(data.get("delta", ["a"]))
    ctx = PrecCtx(p, n, delta=delta)
    rank = int(data.get("rank", len(data.get("divisors", [n]))))
    divisors = data.get("divisors", [n] * rank)
    if len(divisors) != rank:
        raise ValueError("divisors must have one entry per generator")
    phis = {a: _matrix(m, ctx, rank) for a, m in data.get("phi", {}).items()}
    gam = {}
    for a, g in data.get("gamma", {}).items():
        gam[a] = (_chi(g.get("chi", 1 + p), p), _matrix(g["matrix"], ctx, rank) if "matrix" in g else None)
    tors = {}
    for a, t in data.get("torsion", {}).items():
        gen = int(t.get("chi_teichmuller_of", 0)) or smallest_primitive_root(p)
        mat = _matrix(t["matrix"], ctx, rank) if "matrix" in t else None
        tors[a] = (gen, mat)
    return PhiGammaModule(ctx, divisors, phis, gam, tors)


# reports -----------------------------------------------------------------------

def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0"


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def envelope(command: str, ctx: PrecCtx | None, args: dict, result) -> str:
    body = {
        "schema_version": SCHEMA_VERSION,
        "tool": "pgk",
        "version": _version(),
        "command": command,
        "args": _jsonable(args),
        "ctx": None if ctx is None else {"p": ctx.p, "n": ctx.n, "delta": list(ctx.delta)},
        "result": _jsonable(result),
    }
    return json.dumps(body, sort_keys=True, indent=2)


def _ctx(args) -> PrecCtx:
    return PrecCtx(args.p, args.n, delta=tuple(x.strip() for x in args.delta.split(",")))


def _window(text: str | None, ctx: PrecCtx):
    if text is None:
        return None
    c, N = (int(x) for x in text.split(","))
    TruncationBox(c, N)
    return (N,) * ctx.dim


def _load_spec(path: str) -> PhiGammaModule:
    with open(path) as fh:
        return load_module(json.load(fh))


# commands ----------------------------------------------------------------------

def cmd_check(args) -> tuple[str, int]:
    M = _load_spec(args.spec)
    win = _window(args.window, M.ctx) or (6,) * M.ctx.dim
    et = etale_check(M)
    bad = check_relations(M, win)
    ok = all(et.values()) and not bad
    res = {"etale": et, "relation_failures": bad, "valid": ok}
    return envelope("check", M.ctx, {"spec": args.spec, "window": list(win)}, res), 0 if ok else 2


def cmd_apply(args) -> tuple[str, int]:
    ctx = _ctx(args)
    f = parse_expr(args.expr, ctx)
    win = _window(args.window, ctx)
    parts = args.op.split(":")
    name = parts[0]
    if name == "phi" and len(parts) == 2:
        g = phi(f, parts[1])
    elif name == "psi" and len(parts) == 2:
        g = psi(f, parts[1])
    elif name == "gamma" and len(parts) == 3:
        c = PadicExponent.integer(_chi(parts[2], ctx.p))
        g = gamma_apply(f, GammaElement({parts[1]: c}), win)
    elif name == "sharp" and len(parts) == 1:
        g = sharp(f, win)
    else:
        raise ValueError(f"unknown operator {args.op!r}")
    res = {"series": to_text(g), "exact": g.exact}
    if not g.exact:
        res["window_hi"] = [x if x != math.inf else "inf" for x in g.window.hi]
    return envelope("apply", ctx, {"op": args.op, "expr": args.expr, "window": args.window}, res), 0


def cmd_residue(args) -> tuple[str, int]:
    ctx = _ctx(args)
    r = residue(parse_expr(args.expr, ctx))
    return envelope("residue", ctx, {"expr": args.expr}, {"value": int(r), "modulus": ctx.q}), 0


def cmd_pairing(args) -> tuple[str, int]:
    M = _load_spec(args.spec)
    ctx = M.ctx
    win = _window(args.window, ctx)
    D = dual_module(M, win)
    x = M.element(parse_expr_list(args.x, ctx))
    y = D.element(parse_expr_list(args.y, ctx))
    v = pairing(x, y)
    return envelope("pairing", ctx, {"spec": args.spec, "x": args.x, "y": args.y},
                    {"value": int(v), "modulus": ctx.p**M.h}), 0


def cmd_cohomology(args) -> tuple[str, int]:
    M = _load_spec(args.spec)
    boxes = [TruncationBox.parse(b) for b in args.boxes.split(",")]
    rep = cohomology(build(args.complex, M), boxes)
    return envelope("cohomology", M.ctx, {"spec": args.spec, "complex": args.complex, "boxes": args.boxes},
                    rep.to_dict()), 0


def cmd_norm(args) -> tuple[str, int]:
    ctx = _ctx(args)
    f = parse_expr(args.expr, ctx)
    s = {}
    for item in args.s.split(","):
        a, v = item.split("=")
        s[a.strip()] = Fraction(v.strip())
    subset = None if args.subset is None else [x.strip() for x in args.subset.split(",")]
    E = rnorm(f, RadiusParam(s, subset)).E
    return envelope("norm", ctx, {"expr": args.expr, "s": args.s, "subset": args.subset}, {"E": E}), 0


def cmd_robba(args) -> tuple[str, int]:
    ctx = PrecCtx(args.p, args.n, delta=("u",))
    steps = iota_iterate(ctx, args.iters, args.cap)
    res = {
        "cap": args.cap,
        "steps": [{"level": s.level, "defect_valuation": s.defect_valuation, "terms": len(s.iota.terms)}
                  for s in steps],
    }
    return envelope("robba", ctx, {"iters": args.iters, "cap": args.cap}, res), 0


def _ctx_flags(sp):
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", default="a", help="comma separated variable names, e.g. a,b")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgk", description="Computations with torsion (phi, Gamma)-modules.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="validate a module spec")
    sp.add_argument("spec")
    sp.add_argument("--window", help="C,N; relations are compared through degree N")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("apply", help="apply phi, psi, gamma or sharp to an expression")
    _ctx_flags(sp)
    sp.add_argument("--op", required=True, help="phi:a | psi:a | gamma:a:c | sharp")
    sp.add_argument("--expr", required=True)
    sp.add_argument("--window", help="C,N; infinite results are kept through degree N")
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("residue", help="residue of an expression")
    _ctx_flags(sp)
    sp.add_argument("--expr", required=True)
    sp.set_defaults(func=cmd_residue)

    sp = sub.add_parser("pairing", help="pair x in the module with y in its dual")
    sp.add_argument("spec")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--window", help="C,N used for the dual's gamma matrices")
    sp.set_defaults(func=cmd_pairing)

    sp = sub.add_parser("cohomology", help="truncated cohomology of a Koszul complex")
    sp.add_argument("spec")
    sp.add_argument("--complex", default="phi-gamma", choices=["phi-gamma", "psi-gamma", "phi", "psi"])
    sp.add_argument("--boxes", default="4x8,6x12,8x16")
    sp.set_defaults(func=cmd_cohomology)

    sp = sub.add_parser("norm", help="r-norm exponent of an expression")
    _ctx_flags(sp)
    sp.add_argument("--expr", required=True)
    sp.add_argument("--s", required=True, help="a=1/10,b=1/12")
    sp.add_argument("--subset")
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("robba", help="defect valuations of the embedding iteration")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--iters", type=int, required=True)
    sp.add_argument("--cap", type=int, required=True)
    sp.set_defaults(func=cmd_robba)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        out, code = args.func(args)
    except (ValueError, ArithmeticError, KeyError, OSError, SyntaxError) as exc:
        print(f"pgk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
