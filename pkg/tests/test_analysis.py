import json
import math

import numpy as np
import pytest

from geosubgrad import InvalidInputError, get_problem
from geosubgrad.analysis import (
    check_lipschitz,
    check_quasar_convexity,
    check_sharpness,
    check_weak_convexity,
    estimate_condition_number,
    find_midpoint_violation,
    find_sharpness_violation,
    reports_to_json,
    sample_ball,
    second_difference,
    verify_lemma_bounds,
)
from geosubgrad.oracle import make_example1


@pytest.mark.parametrize(
    "name, x0",
    [("example4", [3.0, 4.0]), ("example1", [5.0]), ("abs_norm_d3", [1.0, 1.0, 1.0])],
)
def test_condition_number_is_one(name, x0):
    spec = estimate_condition_number(get_problem(name), x0, 10_000, seed=0)
    assert abs(spec.mu_hat - 1.0) <= 1e-9
    assert spec.mu_hat <= 1 + 1e-12
    assert spec.radius == pytest.approx(np.linalg.norm(x0))


def test_estimator_sound_for_certified(builtin):
    spec = estimate_condition_number(builtin, builtin.default_x0, 5_000, seed=3)
    assert spec.mu_hat >= builtin.certified.mu_bar - 1e-9


def test_estimator_errors():
    p = get_problem("example4")
    with pytest.raises(InvalidInputError):
        estimate_condition_number(p, [0.0, 0.0], 100)
    with pytest.raises(InvalidInputError):
        estimate_condition_number(p, [3.0, 4.0], 100, exclusion_radius=6.0)
    with pytest.raises(InvalidInputError):
        estimate_condition_number(p, [3.0, 4.0], 0)


def test_estimator_finds_bad_angle_on_finite_set():
    # two minimizers: the ratio against the far one is negative somewhere
    from geosubgrad.oracle import MinimizerSet, ProblemInstance, SubgradientSample, as_point

    def subgrad(x):
        x = as_point(x, 1)
        return SubgradientSample(x, 0.0, np.array([math.copysign(1.0, x[0] - 1.0) if abs(x[0]) != 1 else 0.0]))

    p = ProblemInstance(
        name="two", dim=1, eval=lambda x: min(abs(x[0] - 1), abs(x[0] + 1)),
        subgrad_select=subgrad, minimizers=MinimizerSet.finite([[-1.0], [1.0]]),
        certified=None, default_x0=[2.0],
    )
    spec = estimate_condition_number(p, [2.0], 1000)
    assert spec.mu_hat == pytest.approx(-1.0)


def test_sampler_prefix_and_ball():
    pts, _ = sample_ball([[0.0, 0.0]], 2.0, 5000, seed=9)
    more, _ = sample_ball([[0.0, 0.0]], 2.0, 9000, seed=9)
    np.testing.assert_array_equal(pts, more[:5000])
    assert np.all(np.linalg.norm(pts, axis=1) <= 2.0)
    # uniform in the disc: about a quarter of the mass inside radius 1
    assert abs(np.mean(np.linalg.norm(pts, axis=1) <= 1.0) - 0.25) < 0.03


def test_monotone_in_samples():
    p = get_problem("example1")
    small = estimate_condition_number(p, [5.0], 1000, seed=2)
    large = estimate_condition_number(p, [5.0], 8000, seed=2)
    assert large.mu_hat <= small.mu_hat
    q = get_problem("example3")
    assert check_quasar_convexity(q, [50.0], 8000, 2).value <= check_quasar_convexity(q, [50.0], 1000, 2).value
    s = get_problem("example2")
    assert check_sharpness(s, [10.0], 8000, 2).value <= check_sharpness(s, [10.0], 1000, 2).value


def test_determinism():
    p = get_problem("example2")
    a = estimate_condition_number(p, [4.0], 2000, seed=5)
    b = estimate_condition_number(p, [4.0], 2000, seed=5)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    ra = reports_to_json([check_weak_convexity(p, [4.0], 1e3, 2000, 5, "pairwise")])
    rb = reports_to_json([check_weak_convexity(p, [4.0], 1e3, 2000, 5, "pairwise")])
    assert ra == rb


def test_sharpness_examples():
    rep = check_sharpness(get_problem("abs_norm_d2"), [1.0, 1.0])
    assert rep.holds and abs(rep.value - 1.0) <= 1e-9
    rep = check_sharpness(get_problem("example4"), [0.1, 0.0])
    assert not rep.holds
    w = rep.witness
    assert get_problem("example4").eval(w) < 1e-8 * np.linalg.norm(w)


def test_sharpness_example1_against_brute_force():
    p = make_example1()
    grid = np.linspace(0, 1, 10**5 + 1)[1:]
    brute = np.min((3 * grid + np.sin(grid)) / grid)
    rep = check_sharpness(p, [1.0])
    assert rep.holds and rep.value >= 2.0
    assert rep.value >= brute - 1e-9


def test_sharpness_violation_search():
    p = get_problem("example4")
    for m in (0.1, 1.0):
        w = find_sharpness_violation(p, [3.0, 4.0], m)
        d = np.linalg.norm(w)
        assert 0 < d < m and p.eval(w) < m * d
    assert find_sharpness_violation(get_problem("abs_norm_d2"), [1.0, 1.0], 0.5) is None


def test_weak_convexity_convex_cases():
    rep = check_weak_convexity(get_problem("abs_norm_d1"), [1.0])
    assert rep.holds and rep.value == 0.0
    rep = check_weak_convexity(get_problem("example4"), [1.0, 1.0])
    assert rep.holds and rep.value == 0.0
    rep = check_weak_convexity(get_problem("example4"), [1.0, 1.0], mode="pairwise")
    assert rep.holds and rep.value == 0.0


def test_weak_convexity_example2_at_radius_10_is_bounded():
    # |f''| = |3x^2 sin(x^3)| <= 300 on |x| <= 10, so rho = 1e3 suffices there
    p = get_problem("example2")
    rep = check_weak_convexity(p, [10.0], 1e3, 10_000, 0, mode="pairwise")
    assert rep.holds and 100.0 < rep.value <= 1e3


def test_weak_convexity_example2_fails_on_larger_ball():
    p = get_problem("example2")
    rep = check_weak_convexity(p, [25.0], 1e3, 10_000, 0, mode="pairwise")
    assert not rep.holds
    x, y = rep.witness, rep.partner
    g = p.subgrad_select(x).subgrad
    # the violating pair reproduces the failed inequality at rho_max
    assert p.eval(y) < p.eval(x) + float(g @ (y - x)) - 0.5e3 * float((y - x) @ (y - x))
    assert second_difference(p, x, h=1e-3) < -1e3


def test_weak_convexity_anchored_example2_holds():
    # against the minimizer alone the deficit stays O(|x|), so a small rho works
    rep = check_weak_convexity(get_problem("example2"), [25.0], 1e3, 5_000, 0)
    assert rep.holds and rep.value < 10.0


def test_weak_convexity_bad_args():
    with pytest.raises(InvalidInputError):
        check_weak_convexity(get_problem("example4"), [1.0, 1.0], rho_max=0.0)
    with pytest.raises(InvalidInputError):
        check_weak_convexity(get_problem("example4"), [1.0, 1.0], mode="global")


def test_quasar_examples():
    rep = check_quasar_convexity(get_problem("abs_norm_d1"), [1.0])
    assert rep.holds and abs(rep.value - 1.0) <= 1e-9
    rep = check_quasar_convexity(get_problem("example4"), [3.0, 4.0])
    assert rep.holds and rep.value == 1.0


@pytest.mark.parametrize("x0", [50.0, 100.0, 200.0, 500.0])
def test_quasar_example3_decays_like_inverse_fourth_power(x0):
    rep = check_quasar_convexity(get_problem("example3"), [x0])
    assert rep.value <= 4 / x0**4 + 1e-9
    assert rep.value * x0**4 == pytest.approx(4.0, rel=1e-6)
    assert rep.holds == (4 / x0**4 > 1e-8)


def test_quasar_all_flat_raises():
    with pytest.raises(InvalidInputError):
        check_quasar_convexity(get_problem("example3"), [0.15], 200)


def test_lipschitz():
    assert check_lipschitz(get_problem("example2"), [10.0]).value == pytest.approx(4.0, abs=1e-6)
    assert check_lipschitz(get_problem("abs_norm_d2"), [1.0, 1.0]).value == pytest.approx(1.0)


def _reports(p, x0, mode="anchored"):
    return [
        check_sharpness(p, x0, 5000),
        check_lipschitz(p, x0, 5000),
        check_weak_convexity(p, x0, 1e3, 5000, mode=mode),
        check_quasar_convexity(p, x0, 5000),
    ]


def test_lemma_bounds_abs_norm():
    p = get_problem("abs_norm_d2")
    spec = estimate_condition_number(p, [1.0, 1.0], 5000)
    verdict = verify_lemma_bounds(p, spec, _reports(p, [1.0, 1.0]))
    assert verdict.lemma2_ok is True and verdict.lemma3_ok is True


def test_lemma2_absent_when_weak_convexity_fails():
    p = get_problem("example2")
    spec = estimate_condition_number(p, [25.0], 5000)
    verdict = verify_lemma_bounds(p, spec, _reports(p, [25.0], "pairwise"))
    assert verdict.lemma2_ok is None


def test_lemma3_absent_for_example3():
    p = get_problem("example3")
    spec = estimate_condition_number(p, [500.0], 5000)
    reps = _reports(p, [500.0])
    assert not reps[3].holds
    verdict = verify_lemma_bounds(p, spec, reps)
    assert verdict.lemma3_ok is None and verdict.lemma2_ok is None


def test_lemma2_needs_radius_within_m_over_rho():
    from geosubgrad.analysis import ConditionSpec, PropertyReport

    p = get_problem("abs_norm_d1")
    reps = [
        PropertyReport("sharpness", 1.0, True, None, 1),
        PropertyReport("lipschitz", 1.0, True, None, 1),
        PropertyReport("weak_convexity", 2.0, True, None, 1),
    ]
    near = ConditionSpec(0.9, 1, 1e-6, 0.4)
    far = ConditionSpec(0.9, 1, 1e-6, 0.6)
    assert verify_lemma_bounds(p, near, reps).lemma2_ok is True
    assert verify_lemma_bounds(p, far, reps).lemma2_ok is None


def test_midpoint_violation_example1():
    p = make_example1()
    left, right, gap = find_midpoint_violation(p, [0.0], [5.0])
    assert gap > 0
    assert p.eval((left + right) / 2) > (p.eval(left) + p.eval(right)) / 2
    assert find_midpoint_violation(get_problem("example4"), [-1.0, 0.0], [3.0, 4.0]) is None


def test_reports_json_fields():
    p = get_problem("abs_norm_d1")
    doc = json.loads(reports_to_json(_reports(p, [1.0])))
    names = [r["property"] for r in doc["reports"]]
    assert names == ["sharpness", "lipschitz", "weak_convexity", "quasar_convexity"]
    assert doc["reports"][0]["m_hat"] == pytest.approx(1.0)
    assert "M_hat" in doc["reports"][1] and "rho_hat" in doc["reports"][2]
