from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltareg.delta_kernel import KernelSpec, build_kernel, evaluate_delta
from deltareg.errors import InvalidScalingError, UnsupportedRuleError, ValidationError
from deltareg.experiments import advection_source, particle_grid
from deltareg.regularizer import (
    ParticleField,
    RegularizedSource,
    assemble_nodes,
    convolve_oracle,
    newton_cotes_weights,
    optimal_epsilon,
    regularize,
    validate_exactness_constraint,
)

SIMPSON = newton_cotes_weights(2)


@pytest.mark.parametrize(
    "q, expected",
    [
        (1, [Fraction(1, 2)] * 2),
        (2, [Fraction(1, 6), Fraction(4, 6), Fraction(1, 6)]),
        (3, [Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)]),
        (4, [Fraction(7, 90), Fraction(32, 90), Fraction(12, 90), Fraction(32, 90), Fraction(7, 90)]),
    ],
)
def test_newton_cotes_tables(q, expected):
    rule = newton_cotes_weights(q)
    assert list(rule.exact_weights) == expected


@pytest.mark.parametrize("q", range(1, 9))
def test_newton_cotes_exactness(q):
    rule = newton_cotes_weights(q)
    assert sum(rule.exact_weights) == 1
    t = [Fraction(j, q) for j in range(q + 1)]
    for p in range(q + 1):
        assert sum(w * tj**p for w, tj in zip(rule.exact_weights, t)) == Fraction(1, p + 1)


def test_simpson_on_square():
    rule = newton_cotes_weights(2)
    assert float(np.dot(rule.weights, rule.nodes**2)) == pytest.approx(1 / 3, abs=1e-16)


@pytest.mark.parametrize("q", [0, 9, 12])
def test_newton_cotes_rejects_out_of_range(q):
    with pytest.raises(UnsupportedRuleError):
        newton_cotes_weights(q)


def test_optimal_epsilon_uniform():
    eps = optimal_epsilon(5, 2, np.full(100, 0.01), C=1.0)
    assert eps == pytest.approx(1e-6 ** 0.1, rel=1e-12)
    assert eps == pytest.approx(0.2512, abs=1e-4)


def test_optimal_epsilon_advection_grid():
    field_ = particle_grid("advection")
    h = np.diff(field_.positions) / 2
    assert optimal_epsilon(7, 2, h, C=0.5) == pytest.approx(6.6e-2, rel=0.3)
    eps17 = optimal_epsilon(17, 2, h, C=1.0)
    assert 2.1e-1 / 3 < eps17 < 2.1e-1 * 3


def test_optimal_epsilon_rejects_empty():
    with pytest.raises(ValidationError):
        optimal_epsilon(5, 2, [])
    with pytest.raises(ValidationError):
        optimal_epsilon(5, 2, [0.1, -0.1])


@pytest.mark.parametrize(
    "m, k, q, expected",
    [(7, 4, 2, True), (5, 4, 4, False), (2, 2, 1, True), (1, 4, 2, False), (4, 4, 3, True)],
)
def test_exactness_constraint(m, k, q, expected):
    assert validate_exactness_constraint(m, k, q) is expected


def test_particle_field_validation():
    with pytest.raises(ValidationError):
        ParticleField([0.0, 0.0, 1.0], [1, 1, 1])
    with pytest.raises(ValidationError):
        ParticleField([0.0, 1.0], [1.0])
    with pytest.raises(ValidationError):
        ParticleField([0.0, 1.0], [1.0, 1.0], densities=[1.0, 0.0])


def test_single_particle_is_scaled_kernel():
    field_ = ParticleField([0.0, 5.0], [1.0, 0.0], densities=[1.0, 1.0])
    src = RegularizedSource(KernelSpec(3, 2), 0.25, field_, "samples")
    kernel = build_kernel(KernelSpec(3, 2))
    x = np.linspace(-0.4, 0.4, 41)
    np.testing.assert_allclose(regularize(src, SIMPSON, x), evaluate_delta(kernel, 0.25, x), atol=1e-14)


def test_advection_source_vanishes_outside_support():
    src = RegularizedSource(KernelSpec(7, 4), 0.29, particle_grid("advection"), "analytic")
    assert regularize(src, SIMPSON, 0.9) == 0.0
    assert regularize(src, SIMPSON, -0.9) == 0.0


def test_cosine_at_origin_matches_reported_accuracy():
    xi = particle_grid("advection").positions
    field_ = ParticleField.from_function(xi, lambda s: np.cos(5 * np.pi * s))
    src = RegularizedSource(KernelSpec(5, 4), 4.0e-2, field_, "analytic")
    err = abs(regularize(src, SIMPSON, 0.0) - 1.0)
    assert 1e-9 < err < 1e-5


def test_analytic_nodes_aggregate_simpson_weights():
    xs = np.array([0.0, 1.0, 3.0])
    field_ = ParticleField.from_function(xs, np.ones_like)
    nodes, ws = assemble_nodes(field_, SIMPSON, "analytic")
    np.testing.assert_allclose(nodes, [0.0, 0.5, 1.0, 2.0, 3.0])
    np.testing.assert_allclose(ws, [1 / 6, 4 / 6, 1 / 6 + 2 / 6, 8 / 6, 2 / 6])


def test_samples_mode_uniform_reduces_to_simpson():
    xs = np.linspace(0.0, 1.0, 9)
    field_ = ParticleField(xs, np.ones_like(xs))
    nodes, ws = assemble_nodes(field_, SIMPSON, "samples")
    h = 1 / 8
    expected = np.array([1, 4, 2, 4, 2, 4, 2, 4, 1]) * h / 3
    np.testing.assert_allclose(ws, expected, atol=1e-15)


def test_samples_mode_needs_tiling_panels():
    xs = np.linspace(0.0, 1.0, 4)
    with pytest.raises(ValidationError):
        assemble_nodes(ParticleField(xs, xs), SIMPSON, "samples")


def test_analytic_mode_needs_callable():
    src = RegularizedSource(KernelSpec(3, 2), 0.1, ParticleField([0.0, 1.0], [1.0, 1.0]), "analytic")
    with pytest.raises(ValidationError):
        src(0.5)


def test_density_weights_reproduce_samples_mode():
    base = np.linspace(-1, 1, 41)
    xs = base + 0.01 * np.sin(7 * base)
    vals = np.cos(xs)
    computed = ParticleField(xs, vals)
    _, ws = assemble_nodes(computed, SIMPSON, "samples")
    weights = ws / vals
    dense = ParticleField(xs, vals, densities=1.0 / weights)
    a = RegularizedSource(KernelSpec(3, 2), 0.3, computed, "samples")
    b = RegularizedSource(KernelSpec(3, 2), 0.3, dense, "samples")
    x = np.linspace(-0.5, 0.5, 11)
    np.testing.assert_allclose(a(x), b(x), rtol=1e-12, atol=1e-14)


def test_samples_mode_accuracy_on_nonuniform_grid():
    xi = particle_grid("advection", 2000).positions
    field_ = ParticleField(xi, np.cos(5 * np.pi * xi))
    src = RegularizedSource(KernelSpec(5, 4), 4.0e-2, field_, "samples")
    assert abs(src(0.0) - 1.0) < 1e-5


def test_rejects_nonpositive_epsilon():
    with pytest.raises(InvalidScalingError):
        RegularizedSource(KernelSpec(3, 2), 0.0, ParticleField([0.0, 1.0], [1.0, 1.0]))


# --- oracle


def test_oracle_constant_and_linear():
    kernel = build_kernel(KernelSpec(3, 2))
    for eps in (0.05, 0.4):
        for x in (-0.3, 0.0, 0.7):
            assert convolve_oracle(kernel, np.ones_like, eps, x) == pytest.approx(1.0, abs=1e-13)
            assert convolve_oracle(kernel, lambda s: s, eps, x) == pytest.approx(x, abs=1e-13)


def test_oracle_cosine_closed_form():
    # (3/4)(1 - eta^2) against cos(eps eta) integrates to 3 (sin a - a cos a) / a^3
    kernel = build_kernel(KernelSpec(1, 0))
    a = 0.1
    with mpmath.workdps(30):
        am = mpmath.mpf(a)
        closed = float(3 * (mpmath.sin(am) - am * mpmath.cos(am)) / am**3)
    val = convolve_oracle(kernel, np.cos, a, 0.0)
    assert val == pytest.approx(closed, abs=1e-14)
    assert abs((1 - val) - a**2 / 10) < 1e-6


def test_oracle_handles_breakpoints():
    kernel = build_kernel(KernelSpec(5, 4))
    val = convolve_oracle(kernel, advection_source, 0.1, 0.25, breakpoints=(-0.3, 0.3))
    hp = convolve_oracle(kernel, lambda s: 3 * mpmath.cos(5 * mpmath.pi * s) if abs(s) <= 0.3 else 0,
                         0.1, 0.25, dps=30, breakpoints=(-0.3, 0.3))
    assert val == pytest.approx(float(hp), abs=1e-13)


@pytest.mark.parametrize("m", [1, 3, 5])
def test_moment_order_of_convolution(m):
    kernel = build_kernel(KernelSpec(m, 4))
    eps = 2.0 ** -np.arange(3, 10)
    errs = [abs(float(convolve_oracle(kernel, mpmath.cos, e, 0.0, dps=50) - 1)) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert abs(slope - (m + 1)) <= 0.5


def test_even_m_gains_an_order():
    kernel = build_kernel(KernelSpec(2, 4))
    eps = 2.0 ** -np.arange(3, 10)
    errs = [abs(float(convolve_oracle(kernel, lambda s: mpmath.cos(s + 0.3), e, 0.0, dps=50)
                      - mpmath.cos(0.3))) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert slope >= 3 - 0.5


# --- properties of the quadrature regularization


def test_quadrature_converges_to_convolution():
    kernel = build_kernel(KernelSpec(5, 4))
    exact = convolve_oracle(kernel, np.cos, 0.3, 0.1)
    errs, hs = [], []
    for n_p in (40, 80, 160):
        xs = np.linspace(-1, 1, n_p + 1)
        src = RegularizedSource(KernelSpec(5, 4), 0.3, ParticleField.from_function(xs, np.cos))
        errs.append(abs(src(0.1) - exact))
        hs.append(2 / n_p)
    rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert rate >= SIMPSON.q + 1


@pytest.mark.parametrize("m", [3, 5])
def test_combined_order_with_optimal_scaling(m):
    eps_list, errs = [], []
    for n_p in (160, 320, 640, 1280, 2560):
        xs = np.linspace(-1, 1, n_p + 1)
        eps = optimal_epsilon(m, 2, np.diff(xs) / 2)
        src = RegularizedSource(KernelSpec(m, 4), eps, ParticleField.from_function(xs, np.cos))
        eps_list.append(eps)
        errs.append(abs(src(0.0) - 1.0))
    slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
    assert slope >= m + 1


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-0.2, 0.2), seed=st.integers(0, 2**16))
def test_support_locality(x, seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(-1, 1, 199))
    xs = np.concatenate([[-1.0], xs, [1.0]])
    vals = np.sin(3 * xs) + 0.5
    eps = 0.15
    full = RegularizedSource(KernelSpec(3, 2), eps, ParticleField(xs, vals, densities=np.full(xs.size, 50.0)), "samples")
    keep = np.abs(xs - x) <= eps + np.max(np.diff(xs))
    part = RegularizedSource(
        KernelSpec(3, 2), eps, ParticleField(xs[keep], vals[keep], densities=np.full(keep.sum(), 50.0)), "samples"
    )
    assert full(x) == pytest.approx(part(x), abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), x=st.floats(-1, 1))
def test_linearity_in_samples(a, b, x):
    xs = np.linspace(-1, 1, 41)
    f, g = np.cos(2 * xs), xs**3

    def reg(vals):
        return RegularizedSource(KernelSpec(5, 4), 0.2, ParticleField(xs, vals), "samples")(x)

    assert reg(a * f + b * g) == pytest.approx(a * reg(f) + b * reg(g), abs=1e-11)


def test_vectorized_and_scalar_evaluation_agree():
    src = RegularizedSource(KernelSpec(7, 4), 6.6e-2, particle_grid("advection"))
    x = np.linspace(-0.5, 0.5, 21)
    vec = src(x)
    assert vec.shape == x.shape
    np.testing.assert_array_equal(vec, [src(float(v)) for v in x])


def test_particle_field_rejects_nan():
    with pytest.raises(ValidationError):
        ParticleField([0.0, float("nan"), 1.0], [1.0, 2.0, 3.0])
