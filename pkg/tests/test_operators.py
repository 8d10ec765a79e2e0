import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import contexts, polys
from oracles import phi_oracle, psi_oracle, residue_oracle
from pgk.cli import parse_expr
from pgk.laurent import LaurentSeries, Window, compare_at
from pgk.operators import (
    GammaElement,
    delta_element,
    gamma_apply,
    phi,
    psi,
    psi_digit,
    residue,
    sharp,
)
from pgk.scalars import PadicExponent, PrecCtx, PrecisionError


def X(ctx, a="a", k=1):
    return LaurentSeries.var(ctx, a, k)


def uni(f):
    return {e[0]: c for e, c in f.terms.items()}


def test_phi_examples():
    c3 = PrecCtx(3, 2)
    assert phi(X(c3), "a") == parse_expr("3*Xa + 3*Xa^2 + Xa^3", c3)
    assert phi(X(c3, k=-1), "a") == parse_expr("Xa^-3 - 3*Xa^-4 - 3*Xa^-5", c3)
    c31 = PrecCtx(3, 1)
    assert phi(X(c31), "a") == X(c31, k=3)


@pytest.mark.parametrize("p,n,poly", [(5, 2, {2: 1}), (3, 3, {0: 4, 1: 2, 4: 7}), (7, 2, {3: 48, 5: 1})])
def test_phi_matches_substitution_oracle(p, n, poly):
    ctx = PrecCtx(p, n)
    f = LaurentSeries(ctx, {(k,): v for k, v in poly.items()})
    assert uni(phi(f, "a")) == phi_oracle(poly, p, n)


# frozen from the linear-solve oracle in oracles.psi_oracle
PSI_FROZEN = [
    (3, 2, {1: 1}, {0: 8}),
    (3, 2, {2: 1}, {0: 1}),
    (3, 2, {4: 1, 5: 2}, {0: 6, 1: 7}),
    (5, 1, {7: 1}, {1: 1}),
    (3, 3, {6: 1, 1: 4}, {0: 5, 1: 9, 2: 1}),
    (5, 2, {3: 1, 9: 7}, {0: 24, 1: 7}),
]


@pytest.mark.parametrize("p,n,f,expected", PSI_FROZEN)
def test_psi_frozen_values(p, n, f, expected):
    ctx = PrecCtx(p, n)
    assert uni(psi(LaurentSeries(ctx, {(k,): v for k, v in f.items()}), "a")) == expected


def test_psi_oracle_agrees_with_frozen_table():
    for p, n, f, expected in PSI_FROZEN[:3]:
        assert psi_oracle(f, p, n) == expected


def test_psi_examples():
    for p, n in [(3, 2), (5, 1), (7, 3)]:
        ctx = PrecCtx(p, n)
        assert psi(X(ctx), "a") == LaurentSeries.constant(ctx, -1)
    c = PrecCtx(3, 2)
    assert psi((1 + X(c)) ** 2, "a").is_zero()


def test_gamma_examples():
    c = PrecCtx(3, 2)
    g = GammaElement({"a": 4})
    assert gamma_apply(X(c), g) == parse_expr("4*Xa + 6*Xa^2 + 4*Xa^3 + Xa^4", c)
    assert gamma_apply(LaurentSeries.one(c), g) == 1
    c1 = PrecCtx(3, 1)
    out = gamma_apply(X(c1, k=-1), g, (1,))
    assert compare_at(out, X(c1, k=-1) - X(c1), Window((-1,), (1,)))
    with pytest.raises(PrecisionError):
        gamma_apply(X(c1, k=-1), g)


def test_gamma_with_teichmuller_exponent():
    ctx = PrecCtx(5, 2)
    g = GammaElement.teichmuller("a", 2, 5, 6)
    out = gamma_apply(X(ctx), g, (4,))
    # linear coefficient is the exponent itself
    assert out.coeff((1,)) == 7


def test_sharp_examples():
    c = PrecCtx(5, 2, delta=("a", "b"))
    out = sharp(1 + X(c), (6, 6))
    geo = LaurentSeries(c, {(j, 0): (-1) ** j for j in range(7)})
    assert compare_at(out, geo, Window((0, 0), (6, 6)))
    twice = sharp(sharp(X(c, "b"), (8, 8)), (8, 8))
    assert compare_at(twice, X(c, "b"), Window((0, 0), (8, 8)))
    assert sharp(LaurentSeries.constant(c, 3)) == 3


def test_residue_examples():
    c2 = PrecCtx(5, 2, delta=("a", "b"))
    assert residue(delta_element(c2)) == 1
    assert residue(LaurentSeries.one(c2)) == 0
    assert residue(phi(delta_element(c2), "a")) == 1
    c3 = PrecCtx(3, 1, delta=("a", "b", "c"))
    assert residue(delta_element(c3)) == 1


@given(st.data())
def test_residue_matches_series_oracle(data):
    ctx = data.draw(contexts())
    f = data.draw(polys(ctx, lo=-4, hi=2))
    assert residue(f) == residue_oracle(dict(f.terms), ctx.dim, ctx.q)


# identities ---------------------------------------------------------------


@given(st.data())
def test_psi_left_inverse_and_digit_vanishing(data):
    ctx = data.draw(contexts())
    f = data.draw(polys(ctx))
    a = data.draw(st.sampled_from(ctx.delta))
    pf = phi(f, a)
    assert psi(pf, a) == f
    one_plus = 1 + X(ctx, a)
    for j in range(1, ctx.p):
        assert psi((one_plus**j) * pf, a).is_zero()


@given(st.data())
def test_decomposition_completeness(data):
    ctx = data.draw(contexts(max_dim=2))
    f = data.draw(polys(ctx))
    a = data.draw(st.sampled_from(ctx.delta))
    one_plus = 1 + X(ctx, a)
    total = LaurentSeries.zero(ctx)
    for j in range(ctx.p):
        xj = psi_digit(f, a, j)
        total = total + (one_plus**j) * phi(xj, a)
    assert total == f


@given(st.data())
def test_phi_commute_and_mod_p_law(data):
    ctx = data.draw(contexts())
    f = data.draw(polys(ctx))
    a = data.draw(st.sampled_from(ctx.delta))
    b = data.draw(st.sampled_from(ctx.delta))
    assert phi(phi(f, a), b) == phi(phi(f, b), a)
    i = ctx.index(a)
    frob = LaurentSeries(ctx, {e[:i] + (ctx.p * e[i],) + e[i + 1:]: c for e, c in f.terms.items()})
    assert (phi(f, a) - frob).reduce(1).is_zero()


@given(st.data())
def test_gamma_commutes_with_phi_and_composes(data):
    ctx = data.draw(contexts(max_dim=2))
    f = data.draw(polys(ctx, lo=0, hi=3))
    a = data.draw(st.sampled_from(ctx.delta))
    p = ctx.p
    g = GammaElement({a: 1 + p})
    h = GammaElement({b: p - 1 for b in ctx.delta})
    assert gamma_apply(phi(f, a), g) == phi(gamma_apply(f, g), a)
    assert gamma_apply(gamma_apply(f, g), h) == gamma_apply(gamma_apply(f, h), g)
    assert gamma_apply(gamma_apply(f, g), h) == gamma_apply(f, g.compose(h, p))


@given(st.data())
def test_residue_invariance(data):
    ctx = data.draw(contexts())
    f = data.draw(polys(ctx, lo=-4, hi=3))
    a = data.draw(st.sampled_from(ctx.delta))
    r = residue(f)
    assert residue(phi(f, a)) == r
    assert residue(psi(f, a)) == r
    # gamma acts on the twist by mu_{p^infty} through c * gamma(F)
    c = 1 + ctx.p
    g = GammaElement({a: c})
    assert residue(gamma_apply(f, g, (0,) * ctx.dim).scalar_mul(c)) == r
    assert residue(gamma_apply(f, GammaElement({b: c for b in ctx.delta}), (0,) * ctx.dim)
                   .scalar_mul(c**ctx.dim)) == r


def test_exact_exponent_object_accepted():
    ctx = PrecCtx(3, 2)
    g = GammaElement({"a": PadicExponent.integer(4)})
    assert gamma_apply(X(ctx), g) == gamma_apply(X(ctx), GammaElement({"a": 4}))
