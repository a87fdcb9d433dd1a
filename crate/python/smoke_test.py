"""Smoke test for the compiled module: build the wheel with `maturin build`
in crates/python, install it, then run this file."""

import loopshift


def main():
    lo, hi, est = loopshift.entropy([2, 0, 0, 0])
    assert lo == hi == est == 2.0

    rep = loopshift.analyze([1] * 40)
    assert rep["spr"] == "Yes" and rep["period"] == 1
    assert abs(rep["lambda"][2] - 2.0) < 1e-9

    assert loopshift.fix_counts([1, 1, 0, 0, 0, 0]) == [1, 3, 4, 7, 11, 18]
    assert loopshift.orbit_counts([2, 0, 0, 0]) == [2, 1, 2, 3]
    assert loopshift.product_formula_holds([3, 1, 4, 1, 5, 9, 2, 6])

    f_inf = loopshift.loops_lemma([2] + [0] * 19, [1] + [0] * 19)
    assert f_inf == [1] * 20

    res = loopshift.almost_iso([2] + [0] * 29, [1] * 30, degree=30)
    assert len(res["common"]) == 30 and res["condition_star"]

    assert loopshift.first_return([[1, 1], [1, 0]], 0, 5) == [1, 1, 0, 0, 0]
    assert abs(loopshift.return_time_ratio([1] * 160) - 0.5) < 1e-6

    big = loopshift.expand_spec('{"version": 1, "name": "g", "generator": {"kind": "geometric", "params": [1, 10]}, "degree": 25}')
    assert big[-1] == 10 ** 24

    try:
        loopshift.almost_iso([2] + [0] * 29, [1, 1] + [0] * 28)
    except loopshift.LoopShiftError as e:
        assert "entropies differ" in str(e)
    else:
        raise AssertionError("expected an entropy mismatch")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
