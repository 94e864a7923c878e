"""Smoke test for the overlapstat_py extension module."""

from fractions import Fraction

import overlapstat_py as ov


def main():
    spec = ov.OverlapSpec(1, 2, 2, 1, 1)
    table = ov.probability_table(spec)
    assert sum(table.values()) == 1
    assert ov.p_overlap(spec, 1, 1) == Fraction(1, 3)

    uniform = ov.ParentModel("uniform")
    density = ov.joint_density(spec, uniform)
    assert abs(density.total_mass() - 1.0) < 1e-8
    assert density.atom_weight() == Fraction(1, 3)

    for y in (0.2, 0.5, 0.8):
        expected = 0.5 + y * y / 3.0
        assert abs(ov.closed_form_r1("i", uniform, y) - expected) < 1e-10
        assert abs(ov.regress(ov.OverlapSpec(1, 2, 2, 2, 2), uniform, y) - expected) < 1e-8

    x, g = ov.regression_curve(ov.OverlapSpec(0, 2, 3, 1, 1), uniform, 199, "ec")
    result = ov.reconstruct_cdf("min", x, g, n=3, m=2)
    worst = max(abs(f - xi) for f, xi in zip(result["cdf"], result["x"]))
    assert worst < 1e-3, worst

    pairs = ov.simulate_pairs(spec, uniform, 1000, 7)
    assert len(pairs) == 1000
    report = ov.verify(spec, ov.ParentModel("exponential"), reps=50_000, seed=7)
    assert report["verdict"] == "pass", report["max_abs_z"]

    midsample = ov.ParentModel.from_midsample(3, 5)
    assert midsample.quantile(0.25) < midsample.quantile(0.5) < midsample.quantile(0.75)
    print("overlapstat_py smoke test: ok")


if __name__ == "__main__":
    main()
