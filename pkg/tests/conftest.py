import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from pgk.laurent import LaurentSeries  # noqa: E402
from pgk.scalars import PrecCtx  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONTEXTS = [(3, 1), (3, 2), (5, 1), (5, 3), (7, 2)]
NAMES = ("a", "b", "c")


@st.composite
def contexts(draw, max_dim=3, pn=CONTEXTS):
    p, n = draw(st.sampled_from(pn))
    k = draw(st.integers(1, max_dim))
    return PrecCtx(p, n, delta=NAMES[:k])


@st.composite
def polys(draw, ctx, lo=-3, hi=4, max_terms=5):
    m = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(m):
        e = tuple(draw(st.integers(lo, hi)) for _ in ctx.delta)
        terms[e] = draw(st.integers(0, ctx.q - 1))
    return LaurentSeries(ctx, terms)


def random_poly(rng: random.Random, ctx, lo=-3, hi=4, k=5) -> LaurentSeries:
    terms = {}
    for _ in range(k):
        e = tuple(rng.randint(lo, hi) for _ in ctx.delta)
        terms[e] = rng.randrange(ctx.q)
    return LaurentSeries(ctx, terms)


@pytest.fixture
def rng():
    return random.Random(20261015)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, secs, limit, note = RESULTS[k]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d}: {verdict}  {secs:7.2f}s (limit {limit}s)  {note}")
