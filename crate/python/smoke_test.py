"""Smoke test for the bfactory_py extension. Build first:

    maturin develop --release -m crates/python/Cargo.toml
"""
import json
from fractions import Fraction

import bfactory_py as bf


def frac(s):
    return Fraction(s)


def main():
    plan = bf.compile("p/(p+1/5)", ("1/10", "2/5"), "approx:2000")
    print(plan, plan.hash[:12])
    lo, hi = plan.value("1/5")
    assert frac(lo) <= Fraction(1, 2) <= frac(hi)
    again = bf.Plan.from_json(plan.to_json())
    assert again.hash == plan.hash

    try:
        bf.compile("p + p", ("1/10", "1/2"))
    except ValueError as e:
        assert "1/5, 1]" in str(e)
    else:
        raise AssertionError("p + p should be rejected")

    rep = json.loads(bf.simulate("fair", "3/10", 20000, seed=7))
    assert abs(frac(rep["estimate"]) - Fraction(1, 2)) < Fraction(3, 100)
    assert rep == json.loads(bf.simulate("fair", "3/10", 20000, seed=7, threads=2))
    fit = json.loads(bf.tail_profile(json.dumps(rep)))
    assert fit["geometric"]

    acc, und = bf.oracle("monomial:2", 2, "1/3")
    assert (frac(acc), frac(und)) == (Fraction(1, 9), 0)
    acc, und = bf.oracle("walk:14", 14, "1/4")
    assert acc == bf.walk_bias(14, "1/4") and frac(und) == 0

    g, h = bf.envelope("monomial:2", "1/3", 4)
    assert frac(g) == frac(h) == Fraction(1, 9)
    assert bf.validate("monomial:2", 64) == []
    assert bf.reflection_count(4, 1) == 2
    assert [frac(bf.hypergeom_pmf(2, 2, i)) for i in range(3)] == [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)]
    assert all(v == 0 for _, _, v in bf.lemma_suite(8, 16))
    assert plan.run_tape([True, False] * 4)[1] > 0
    print("smoke test passed")


if __name__ == "__main__":
    main()
