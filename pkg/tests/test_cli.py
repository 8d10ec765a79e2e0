import json
import os
import random
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import random_poly
from pgk.cli import ExprSyntaxError, UnknownVariable, main, parse_expr, parse_expr_list
from pgk.laurent import LaurentSeries, to_text
from pgk.operators import phi
from pgk.scalars import PrecCtx

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"

RUNS = {
    "check": ["check", "data/trivial_p5_d1.json"],
    "check_invalid": ["check", "data/corrupt_p3_d1.json"],
    "apply_psi": ["apply", "--p", "3", "--n", "2", "--op", "psi:a", "--expr", "Xa^4 + 2*Xa^5"],
    "apply_gamma": ["apply", "--p", "3", "--n", "1", "--op", "gamma:a:4", "--expr", "Xa^-1", "--window", "0,1"],
    "apply_sharp": ["apply", "--p", "5", "--n", "2", "--delta", "a,b", "--op", "sharp", "--expr", "1 + Xa*Xb",
                    "--window", "0,3"],
    "residue": ["residue", "--p", "5", "--n", "2", "--delta", "a,b", "--expr", "(1+Xa)*(1+Xb)*Xa^-1*Xb^-1"],
    "pairing": ["pairing", "data/mixed_p3_d2.json", "--x", "[Xa, 1]", "--y", "[Xa^-1, Xb]"],
    "cohomology": ["cohomology", "data/twist_p5_d1.json", "--complex", "psi-gamma"],
    "norm": ["norm", "--p", "3", "--n", "2", "--delta", "a,b", "--expr", "3*Xa^-2*Xb + Xb^4", "--s", "a=1/10,b=1/12"],
    "norm_subset": ["norm", "--p", "3", "--n", "2", "--delta", "a,b", "--expr", "Xa^-2*Xb^-3", "--s", "a=1/10,b=1/12",
                    "--subset", "a"],
    "robba": ["robba", "--p", "3", "--n", "4", "--iters", "4", "--cap", "40"],
}
EXIT = {"check_invalid": 2}


@pytest.mark.parametrize("name", sorted(RUNS))
def test_golden_reports(name, capsys, monkeypatch):
    monkeypatch.chdir(HERE)
    rc = main(RUNS[name])
    out = capsys.readouterr().out
    assert rc == EXIT.get(name, 0)
    path = GOLDEN / f"{name}.json"
    if os.environ.get("PGK_REGEN_GOLDEN"):
        path.write_text(out)
    assert out == path.read_text()


def test_reports_carry_expected_values(monkeypatch, capsys):
    monkeypatch.chdir(HERE)
    results = {}
    for name in ("apply_psi", "residue", "cohomology", "robba", "norm_subset"):
        main(RUNS[name])
        results[name] = json.loads(capsys.readouterr().out)["result"]
    assert results["residue"]["value"] == 1
    assert results["cohomology"]["dims"] == [0, 2, 1]
    assert [s["defect_valuation"] for s in results["robba"]["steps"]] == [1, 2, 3, "inf"]
    assert results["norm_subset"]["E"] == "-1/5"


def test_apply_psi_of_x(capsys):
    main(["apply", "--p", "7", "--n", "3", "--op", "psi:a", "--expr", "Xa"])
    assert json.loads(capsys.readouterr().out)["result"]["series"] == "-1"


def test_errors_exit_two(capsys, monkeypatch):
    monkeypatch.chdir(HERE)
    assert main(["residue", "--p", "5", "--n", "1", "--expr", "Xq"]) == 2
    assert main(["residue", "--p", "5", "--n", "1", "--expr", "1 + * Xa"]) == 2
    assert main(["apply", "--p", "3", "--n", "1", "--op", "gamma:a:4", "--expr", "Xa^-1"]) == 2
    err = capsys.readouterr().err
    assert "error" in err.lower()


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "pgk", "residue", "--p", "3", "--n", "1", "--expr", "Xa^-1"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["result"]["value"] == 1


def test_parser_examples():
    c = PrecCtx(5, 1, delta=("a", "b"))
    f = parse_expr("1 + 2*Xa^-1", c)
    assert f.terms == {(0, 0): 1, (-1, 0): 2}
    assert parse_expr("Xa*Xb - Xb*Xa", c).is_zero()
    c3 = PrecCtx(3, 2)
    assert parse_expr("3*Xa + 3*Xa^2 + Xa^3", c3) == phi(LaurentSeries.var(c3, "a"), "a")
    assert parse_expr(" ( 1+Xa ) ^ 2 ".replace("^ 2", ""), c3) == 1 + LaurentSeries.var(c3, "a")
    assert parse_expr("-Xa", c3) == -LaurentSeries.var(c3, "a")
    assert len(parse_expr_list("[Xa, 1, 0]", c3)) == 3


def test_parser_errors():
    c = PrecCtx(5, 1)
    with pytest.raises(UnknownVariable):
        parse_expr("Xb", c)
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("1 + (Xa", c)
    assert info.value.pos is not None
    with pytest.raises(SyntaxError):
        parse_expr("Xa^", c)


def test_parser_round_trip_thousand(rng):
    for i in range(1000):
        p, n = rng.choice([(3, 1), (3, 2), (5, 1), (5, 3), (7, 2)])
        k = rng.randint(1, 3)
        ctx = PrecCtx(p, n, delta=("a", "b", "c")[:k])
        f = random_poly(rng, ctx, lo=-5, hi=6, k=rng.randint(0, 6))
        assert parse_expr(to_text(f), ctx) == f
