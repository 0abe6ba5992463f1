import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geosubgrad import (
    ConfigurationError,
    Constant,
    ContractViolation,
    DescentConfig,
    GeometricBanded,
    GeometricExact,
    NumericFailureError,
    Polyak,
    get_problem,
    make_sharp_abs,
    resolve_schedule,
    run,
    run_suite,
    step_size,
)
from geosubgrad.oracle import MinimizerSet, ProblemInstance, SubgradientSample, as_point, norm

INV_SQRT2 = 1 / math.sqrt(2)


def test_step_size_examples():
    assert step_size(GeometricExact(INV_SQRT2, 1.0), 0, 1.0) == pytest.approx(0.70710678, abs=1e-8)
    assert step_size(GeometricExact(INV_SQRT2, 1.0), 2, 2.0) == pytest.approx(0.17677669529663687, rel=1e-15)
    assert step_size(GeometricBanded(1.0, 0.5, 1.0), 1, 1.0) == pytest.approx(0.5, rel=1e-15)


def test_step_size_baselines():
    assert step_size(Polyak(1.0), 3, 2.0, value=5.0) == 1.0
    assert step_size(Constant(0.25), 9, 123.0) == 0.25


def test_step_size_contract():
    with pytest.raises(ContractViolation):
        step_size(GeometricExact(0.5, 1.0), 0, 0.0)
    with pytest.raises(ContractViolation):
        step_size(Polyak(0.0), 0, 1.0)
    with pytest.raises(ConfigurationError):
        step_size(GeometricExact(0.5), 0, 1.0)


@settings(max_examples=200)
@given(
    r=st.floats(min_value=1e-3, max_value=INV_SQRT2),
    beta=st.floats(min_value=1e-3, max_value=0.5),
    t=st.integers(min_value=0, max_value=2000),
    gn=st.floats(min_value=1e-6, max_value=1e6),
)
def test_schedule_purity_and_formula(r, beta, t, gn):
    exact = GeometricExact(r, 2.0)
    banded = GeometricBanded(r, beta, 1.5)
    assert step_size(exact, t, gn) == step_size(exact, t, gn)
    assert step_size(banded, t, gn) == step_size(banded, t, gn)
    assert step_size(exact, t, gn) == pytest.approx(r * (1 - r * r) ** (t / 2) * 2.0 / gn, rel=1e-12)
    assert step_size(banded, t, gn) == pytest.approx(
        r * (1 + (beta * beta - 2 * beta) * r * r) ** (t / 2) * 1.5 / gn, rel=1e-12
    )


@pytest.mark.parametrize(
    "factory",
    [
        lambda: GeometricExact(0.75, 1.0),
        lambda: GeometricExact(0.0, 1.0),
        lambda: GeometricExact(0.5, -1.0),
        lambda: GeometricBanded(1.2, 0.5, 1.0),
        lambda: GeometricBanded(0.5, 0.6, 1.0),
        lambda: GeometricBanded(0.5, 0.0, 1.0),
        lambda: GeometricBanded(0.5, 0.5, 0.0),
        lambda: Constant(0.0),
        lambda: Polyak(math.inf),
        lambda: DescentConfig(Constant(1.0), max_iters=0),
        lambda: DescentConfig(Constant(1.0), grad_tol=-1.0),
    ],
)
def test_config_invariants(factory):
    with pytest.raises(ConfigurationError):
        factory()


def test_run_at_minimizer():
    trace = run(get_problem("example4"), [0.0, 0.0], DescentConfig(GeometricExact(0.5, 1.0)))
    assert len(trace) == 1
    assert trace.stop_reason == "zero_subgradient"
    assert len(trace.step_sizes) == 0


def test_theorem1_on_abs_norm():
    trace = run(make_sharp_abs(1), [1.0], DescentConfig(GeometricExact(INV_SQRT2, 1.0)))
    t = np.arange(len(trace))
    assert np.all(trace.distances <= 0.5 ** (t / 2) * (1 + 1e-9))


def test_theorem2_on_example4():
    p = get_problem("example4")
    trace = run(p, [3.0, 4.0], DescentConfig(GeometricBanded(1.0, 0.5, 2.5)))
    t = np.arange(len(trace))
    assert np.all(trace.distances <= 5.0 * 2.0**-t * (1 + 1e-9))


def test_trace_invariants(builtin):
    trace = run_suite([builtin], DescentConfig(GeometricExact(), max_iters=300))[0]
    assert len(trace.iterates) == len(trace.step_sizes) + 1
    assert len(trace.grad_norms) == len(trace.iterates)
    for x, d in zip(trace.iterates, trace.distances):
        assert d == builtin.minimizers.distance(x)
    assert trace.stop_reason in ("zero_subgradient", "grad_tol_reached", "max_iters")
    if trace.stop_reason == "zero_subgradient":
        assert trace.distances[-1] == 0.0
    # iterate containment in S
    assert np.all(trace.distances <= trace.distances[0] * (1 + 1e-9))


def test_run_rejects_r_above_certified():
    p = get_problem("example1")
    p_low = ProblemInstance(
        name="low", dim=1, eval=p.eval, subgrad_select=p.subgrad_select,
        minimizers=p.minimizers, certified=type(p.certified)(mu_bar=0.2), default_x0=[1.0],
    )
    with pytest.raises(ConfigurationError):
        run(p_low, [1.0], DescentConfig(GeometricExact(0.5, 1.0)))


def test_run_rejects_unresolved_schedule():
    with pytest.raises(ConfigurationError):
        run(get_problem("example1"), [1.0], DescentConfig(GeometricExact()))


def _repelling(dim=1):
    # uncertified oracle whose steps point away from the minimizer
    def subgrad(x):
        x = as_point(x, dim)
        n = norm(x)
        return SubgradientSample(x, n, -x / n if n else np.zeros(dim), n == 0)

    return ProblemInstance(
        name="repel", dim=dim, eval=norm, subgrad_select=subgrad,
        minimizers=MinimizerSet.single(np.zeros(dim)), certified=None, default_x0=np.ones(dim),
    )


def test_divergence_guard_carries_partial_trace():
    with pytest.raises(NumericFailureError) as err:
        run(_repelling(), [1.0], DescentConfig(Constant(1e7)))
    assert err.value.trace is not None
    assert len(err.value.trace) == 2


def test_non_finite_iterate():
    with pytest.raises(NumericFailureError) as err:
        run(_repelling(), [1.0], DescentConfig(Constant(1e308), max_iters=5))
    assert len(err.value.trace) == 2


def test_run_suite_geometric_defaults_reach_tiny_distance():
    problems = [get_problem(n) for n in ("example1", "example2", "example3", "example4")]
    traces = run_suite(problems, DescentConfig(GeometricExact(), max_iters=400))
    assert len(traces) == 4
    for p, trace in zip(problems, traces):
        if p.name == "example3":
            # exp(-1/x^4) makes the gradient numerically zero long before x = 0
            assert trace.stop_reason == "grad_tol_reached"
        else:
            assert trace.distances[min(200, len(trace) - 1)] <= 1e-12


def test_run_suite_resolves_parameters():
    p = get_problem("example4")
    trace = run_suite([p], DescentConfig(GeometricExact(0.9 * INV_SQRT2)))[0]
    assert trace.distances[0] == 5.0
    banded = resolve_schedule(GeometricBanded(), p)
    assert banded.r == 1.0 and banded.R == 2.5


def test_run_suite_empty():
    assert run_suite([], DescentConfig(GeometricExact())) == []


def test_run_suite_needs_certificate():
    with pytest.raises(ConfigurationError):
        run_suite([_repelling()], DescentConfig(GeometricExact()))


def test_run_suite_rejects_out_of_band_R():
    p = get_problem("example4")
    with pytest.raises(ConfigurationError):
        run_suite([p], DescentConfig(GeometricBanded(1.0, 0.3, 4.0)))
    # band edges are admissible
    run_suite([p], DescentConfig(GeometricBanded(1.0, 0.3, 1.5)))
    run_suite([p], DescentConfig(GeometricBanded(1.0, 0.3, 3.5)))


def test_polyak_on_example2_is_monotone():
    p = get_problem("example2")
    trace = run_suite([p], DescentConfig(Polyak(0.0), max_iters=100))[0]
    assert np.all(np.diff(trace.distances) <= 0)


def test_runs_are_bit_identical():
    p = get_problem("example1")
    cfg = DescentConfig(GeometricExact(0.3, 5.0), max_iters=200)
    a, b = run(p, [5.0], cfg), run(p, [5.0], cfg)
    assert a.distances.tobytes() == b.distances.tobytes()
    assert a.step_sizes.tobytes() == b.step_sizes.tobytes()


@settings(max_examples=60, deadline=None)
@given(
    dim=st.integers(min_value=1, max_value=4),
    r=st.floats(min_value=0.05, max_value=INV_SQRT2),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_theorem1_property(dim, r, seed):
    p = make_sharp_abs(dim)
    x0 = np.random.default_rng(seed).uniform(-3, 3, size=dim)
    d0 = norm(x0)
    if d0 < 1e-3:
        return
    trace = run(p, x0, DescentConfig(GeometricExact(r, d0), max_iters=200))
    t = np.arange(len(trace))
    assert np.all(trace.distances <= (1 - r * r) ** (t / 2) * d0 * (1 + 1e-9))


@settings(max_examples=60, deadline=None)
@given(
    beta=st.floats(min_value=0.01, max_value=0.5),
    q=st.floats(min_value=0.0, max_value=1.0),
    r=st.floats(min_value=0.05, max_value=1.0),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_theorem2_property(beta, q, r, seed):
    p = get_problem("example4")
    x0 = np.random.default_rng(seed).uniform(-3, 3, size=2)
    d0 = norm(x0)
    if d0 < 1e-3:
        return
    R = (beta + q * (1 - 2 * beta)) * d0
    trace = run(p, x0, DescentConfig(GeometricBanded(r, beta, R), max_iters=200))
    t = np.arange(len(trace))
    base = 1 + (beta * beta - 2 * beta) * r * r
    assert np.all(trace.distances <= base ** (t / 2) * d0 * (1 + 1e-9))
