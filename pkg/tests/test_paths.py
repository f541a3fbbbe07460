import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abe.expfam import GaussianDiag, SimplyUnnormalizedModel, log_partition, substream
from abe.paths import (
    GaussianMixture,
    PathSpec,
    Schedule,
    UnsupportedPathError,
    alpha_h,
    discretize,
    geometric_gaussian_point,
    geometric_log_f,
    optimal_coefficients,
    optimal_point,
    qmean_log_f,
)

import oracles as O

P0 = GaussianDiag([0.0], [1.0])
F1 = SimplyUnnormalizedModel.from_gaussian(GaussianDiag([0.0], [2.0]))
X = np.random.default_rng(0).normal(size=20) * 3


def all_specs(p0=P0, f1=F1):
    z1 = f1.log_z()
    return [
        PathSpec.geometric(p0, f1),
        PathSpec.arithmetic(p0, f1),
        PathSpec.arithmetic(p0, f1, Schedule.oracle(log_z1=z1)),
        PathSpec.arithmetic(p0, f1, Schedule.oracle_trig(log_z1=z1)),
        PathSpec.q_mean(p0, f1, 0.5),
        PathSpec.optimal(p0, f1),
    ]


@pytest.mark.parametrize("kind", ["vanilla", "oracle", "oracle_trig"])
@pytest.mark.parametrize("log_z1", [-3.0, 0.0, 2.5])
def test_schedule_endpoints_and_monotone(kind, log_z1):
    s = Schedule(kind, log_z1)
    assert s.weight(0.0) == 0.0 and s.weight(1.0) == 1.0
    w = np.array([s.weight(t) for t in np.linspace(0, 1, 1001)])
    assert np.all((w >= 0) & (w <= 1))
    assert np.all(np.diff(w) >= 0)
    wn = np.array([s.normalized_weight(t, 1.7) for t in np.linspace(0, 1, 1001)])
    assert np.all(np.diff(wn) >= 0)


def test_schedule_examples():
    ts = np.linspace(0, 1, 101)
    assert max(abs(Schedule.vanilla().normalized_weight(t, 0.0) - t) for t in ts) < 1e-15
    assert Schedule.oracle_trig(log_z1=F1.log_z()).normalized_weight(0.5, F1.log_z()) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        Schedule.oracle()
    with pytest.raises(ValueError):
        Schedule("linear")


@settings(max_examples=50, deadline=None)
@given(st.floats(-20.0, 20.0))
def test_oracle_schedule_exact_is_uniform_mixture(log_z1):
    s = Schedule.oracle(log_z1=log_z1)
    for t in np.linspace(0, 1, 201):
        assert abs(s.normalized_weight(t, log_z1) - t) < 1e-12
    trig = Schedule.oracle_trig(log_z1=log_z1)
    for t in np.linspace(0, 1, 21):
        assert trig.normalized_weight(t, log_z1) == pytest.approx(math.sin(math.pi * t / 2) ** 2, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-8.0, 8.0), st.floats(0.01, 0.99))
def test_vanilla_normalized_weight_identity(log_z1, t):
    w = Schedule.vanilla().normalized_weight(t, log_z1)
    assert w * (1 - t) / (t * (1 - w)) == pytest.approx(math.exp(log_z1), rel=1e-10)


def test_normalized_weight_derivative_matches_difference():
    for sched in (Schedule.vanilla(), Schedule.oracle(log_z1=1.0), Schedule.oracle_trig(log_z1=-2.0)):
        for t in (0.1, 0.4, 0.85):
            h = 1e-6
            fd = (sched.normalized_weight(t + h, 0.7) - sched.normalized_weight(t - h, 0.7)) / (2 * h)
            assert sched.normalized_weight_derivative(t, 0.7) == pytest.approx(fd, rel=1e-6)


def test_geometric_values():
    spec = PathSpec.geometric(P0, F1)
    np.testing.assert_array_equal(spec.log_f(0.0, X), P0.log_density(X))
    np.testing.assert_array_equal(spec.log_f(1.0, X), F1.log_f(X))
    assert geometric_log_f(spec, 0.5, 1.0) == pytest.approx(O.GEOMETRIC_LOG_F_HALF_AT_1, abs=1e-12)
    assert geometric_log_f(spec, 0.5, 1.0) == pytest.approx(0.5 * P0.log_density(1.0) + 0.5 * F1.log_f(1.0), abs=1e-15)
    g0, z0 = geometric_gaussian_point(spec, 0.0)
    assert g0 == P0 and z0 == 0.0
    g1, z1 = geometric_gaussian_point(spec, 1.0)
    np.testing.assert_allclose(g1.var, [2.0])
    assert z1 == pytest.approx(log_partition(F1.theta), abs=1e-14)
    gh, _ = geometric_gaussian_point(spec, 0.5)
    np.testing.assert_allclose(gh.var, [4.0 / 3.0], rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0))
def test_geometric_point_normalizes_log_f(t):
    spec = PathSpec.geometric(P0, F1.scaled(0.8))
    g, log_z = spec.point(t).dist, spec.point(t).log_z
    np.testing.assert_allclose(spec.log_f(t, X) - log_z, g.log_density(X), atol=1e-10)


def test_qmean_values():
    arith = PathSpec.arithmetic(P0, F1)
    q1 = PathSpec.q_mean(P0, F1, 1.0)
    for t in (0.2, 0.5, 0.9):
        np.testing.assert_allclose(q1.log_f(t, X), arith.log_f(t, X), rtol=1e-12, atol=1e-12)
    q = PathSpec.q_mean(P0, F1, 0.5)
    np.testing.assert_array_equal(qmean_log_f(q, 0.0, X), P0.log_density(X))
    same = PathSpec.q_mean(P0, SimplyUnnormalizedModel.from_gaussian(P0, -log_partition(P0.natural())), 0.5)
    np.testing.assert_allclose(same.log_f(0.5, X), P0.log_density(X), atol=1e-12)
    with pytest.raises(UnsupportedPathError):
        q.point(0.5).sample(3, substream(0))


def test_optimal_values():
    spec = PathSpec.optimal(P0, F1)
    w0 = optimal_point(spec, 0.0).weights
    w1 = optimal_point(spec, 1.0).weights
    np.testing.assert_allclose(w0, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(w1, [0, 1, 0], atol=1e-15)
    bc = 1 - O.HELLINGER2_P0_P1
    for t in np.linspace(0, 1, 101):
        a, b, _, _ = optimal_coefficients(alpha_h(P0, spec.p1), t)
        assert a * a + b * b + 2 * a * b * bc == pytest.approx(1.0, abs=1e-12)


def test_alpha_h_values():
    assert alpha_h(P0, P0) == 0.0
    assert alpha_h(P0, GaussianDiag([0.0], [2.0])) == pytest.approx(O.ALPHA_H, rel=1e-12)
    far = alpha_h(GaussianDiag.isotropic(4), GaussianDiag.isotropic(4, 1.0, 40.0))
    assert far == pytest.approx(math.pi / 4, abs=1e-12)


@st.composite
def pairs(draw):
    d = draw(st.integers(1, 3))
    mu = draw(st.lists(st.floats(-2, 2), min_size=d, max_size=d))
    var = draw(st.lists(st.floats(0.2, 4), min_size=d, max_size=d))
    scale = draw(st.floats(-3, 3))
    return GaussianDiag.isotropic(d), SimplyUnnormalizedModel.from_gaussian(GaussianDiag(mu, var), scale)


@settings(max_examples=25, deadline=None)
@given(pairs(), st.integers(0, 1000))
def test_endpoint_exactness(pair, seed):
    p0, f1 = pair
    x = np.random.default_rng(seed).normal(size=(20, p0.dim)) * 2
    for spec in all_specs(p0, f1):
        np.testing.assert_allclose(spec.log_f(0.0, x), p0.log_density(x), atol=1e-10)
        np.testing.assert_allclose(spec.log_f(1.0, x), f1.log_f(x), atol=1e-10)
        if spec.kind != "q_mean":
            first, last = spec.point(0.0), spec.point(1.0)
            np.testing.assert_allclose(first.dist.log_density(x), p0.log_density(x), atol=1e-10)
            np.testing.assert_allclose(last.dist.log_density(x) + last.log_z, f1.log_f(x), atol=1e-10)
        # interior unnormalized densities agree with normalized ones up to log Z_t
        if spec.kind != "q_mean":
            mid = spec.point(0.37)
            np.testing.assert_allclose(mid.log_f(x) - mid.log_z, mid.dist.log_density(x), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(pairs(), st.floats(0.0, 1.0))
def test_optimal_weights_valid(pair, t):
    p0, f1 = pair
    w = optimal_point(PathSpec.optimal(p0, f1), t).weights
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-10)


def test_discretize():
    spec = PathSpec.geometric(P0, F1)
    g1 = discretize(spec, 1)
    assert g1.K == 1 and len(g1) == 2
    assert g1[0].dist == P0 and g1[1].log_z == pytest.approx(F1.log_z())
    g9 = discretize(spec, 9)
    assert len(g9) == 10
    np.testing.assert_array_equal(g9.ts, np.arange(10) / 9)
    for k, t in enumerate(g9.ts):
        g, log_z = geometric_gaussian_point(spec, t)
        np.testing.assert_array_equal(g9[k].dist.var, g.var)
        assert g9[k].log_z == log_z
    with pytest.raises(ValueError):
        discretize(spec, 0)


@pytest.mark.parametrize("spec", all_specs()[:4] + all_specs()[5:], ids=lambda s: f"{s.kind}-{s.schedule.kind}")
def test_exact_sampler_moments(spec):
    n = 100_000
    for k, point in enumerate(discretize(spec, 4).points):
        x = point.sample(n, substream(5, k))
        m, v = point.dist.moments()
        sd = np.sqrt(v)
        assert np.all(np.abs(x.mean(axis=0) - m) < 5 * sd / math.sqrt(n))
        # variance of the sample variance needs the fourth moment; Gaussian mixtures stay within 3x
        assert np.all(np.abs(x.var(axis=0) - v) < 5 * v * math.sqrt(2 * 3 / n))


def test_mixture_validation():
    with pytest.raises(ValueError):
        GaussianMixture(np.array([0.5, 0.6]), (P0, P0))
