import numpy as np
import pytest

from mixspec2d import (
    CoverageError,
    Field2D,
    InnovationSpec,
    MaCoefficients,
    ParamVector,
    SinusoidParams,
    SupportKind,
    compose,
    generate_innovations,
    ma_filter,
    sinusoid_field,
    synthesize_noise,
    synthesize_observation,
)
from mixspec2d.synth import required_innovation_extent

QP = SupportKind.QUARTER_PLANE
NSHP = SupportKind.NSHP


def brute_force_ma(u: Field2D, ma: MaCoefficients, out_rows: int, out_cols: int) -> np.ndarray:
    """Literal quadruple loop over the output window and the support."""
    r0, c0 = u.origin
    w = np.zeros((out_rows, out_cols))
    for n in range(out_rows):
        for m in range(out_cols):
            acc = 0.0
            for (r, s), a in ma.coeffs.items():
                acc += a * u.values[n - r - r0, m - s - c0]
            w[n, m] = acc
    return w


# ---------------------------------------------------------------------------
# innovations


def test_innovations_deterministic():
    spec = InnovationSpec("gaussian", 1.0, 123456789)
    a = generate_innovations(spec, 32, 48)
    b = generate_innovations(spec, 32, 48)
    assert np.array_equal(a.values, b.values)


def test_innovations_site_addressed():
    # Enlarging the grid must preserve values on the overlap.
    spec = InnovationSpec("laplace", 0.5, 42)
    small = generate_innovations(spec, 16, 16)
    big = generate_innovations(spec, 40, 40, origin=(-10, -12))
    assert np.array_equal(big.values[10:26, 12:28], small.values)


def test_innovations_differ_across_seeds_and_laws():
    a = generate_innovations(InnovationSpec("gaussian", 1.0, 1), 8, 8)
    b = generate_innovations(InnovationSpec("gaussian", 1.0, 2), 8, 8)
    c = generate_innovations(InnovationSpec("uniform", 1.0, 1), 8, 8)
    assert not np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("law", ["gaussian", "uniform", "laplace"])
def test_innovations_moments(law):
    spec = InnovationSpec(law, 1.0, 2024)
    u = generate_innovations(spec, 256, 256).values
    n = u.size
    assert abs(u.mean()) < 4.0 / np.sqrt(n)
    assert u.var() == pytest.approx(1.0, rel=0.10)


def test_innovations_rejects_bad_dims():
    spec = InnovationSpec("gaussian", 1.0, 1)
    with pytest.raises(ValueError):
        generate_innovations(spec, 0, 4)
    with pytest.raises(ValueError):
        generate_innovations(spec, 4, -1)


def test_uniform_law_is_bounded():
    u = generate_innovations(InnovationSpec("uniform", 2.0, 3), 64, 64).values
    assert np.max(np.abs(u)) <= np.sqrt(3.0 * 2.0) + 1e-12


# ---------------------------------------------------------------------------
# MA filtering


def test_ma_filter_identity():
    ma = MaCoefficients(NSHP, 0, 0, {(0, 0): 1.0}, 1.0)
    u = generate_innovations(InnovationSpec("gaussian", 1.0, 5), 12, 12)
    w = ma_filter(u, ma, 12, 12)
    assert np.array_equal(w.values, u.values)


def test_ma_filter_impulse_response():
    ma = MaCoefficients(NSHP, 1, 0, {(0, 0): 1.0, (1, 0): 1.0}, 1.0)
    vals = np.zeros((6, 5))
    vals[1, 0] = 1.0  # absolute site (0, 0) with origin (-1, 0)
    u = Field2D(vals, origin=(-1, 0))
    w = ma_filter(u, ma, 5, 5)
    expected = np.zeros((5, 5))
    expected[0, 0] = 1.0
    expected[1, 0] = 1.0
    assert np.array_equal(w.values, expected)


def test_ma_filter_matches_brute_force():
    ma = MaCoefficients(
        NSHP, 2, 2,
        {(0, 0): 1.0, (0, 2): -0.4, (1, -2): 0.3, (1, 1): 0.6, (2, 0): -0.2, (2, -1): 0.05},
        1.0,
    )
    rows, cols, origin = required_innovation_extent(ma, 16, 16)
    u = generate_innovations(InnovationSpec("gaussian", 1.0, 99), rows, cols, origin)
    w = ma_filter(u, ma, 16, 16)
    assert np.allclose(w.values, brute_force_ma(u, ma, 16, 16), atol=1e-12)


def test_ma_filter_coverage_error_names_ranges():
    ma = MaCoefficients(NSHP, 2, 3, {(0, 0): 1.0, (2, -3): 0.5}, 1.0)
    u = generate_innovations(InnovationSpec("gaussian", 1.0, 7), 16, 16)  # origin (0, 0)
    with pytest.raises(CoverageError) as err:
        ma_filter(u, ma, 16, 16)
    msg = str(err.value)
    assert "[-2, 15]" in msg  # required rows
    assert "[-3, 18]" in msg  # required cols (NSHP widens both sides)


def test_quarter_plane_needs_no_right_margin():
    ma = MaCoefficients(QP, 1, 2, {(0, 0): 1.0, (1, 2): 0.5}, 1.0)
    rows, cols, origin = required_innovation_extent(ma, 8, 8)
    assert (rows, cols, origin) == (9, 10, (-1, -2))


# ---------------------------------------------------------------------------
# composition


def test_compose_empty_params_is_noise():
    noise = generate_innovations(InnovationSpec("gaussian", 1.0, 11), 10, 10)
    y = compose(ParamVector(()), noise)
    assert np.array_equal(y.values, noise.values)


def test_compose_single_cosine_values():
    params = ParamVector((SinusoidParams(1.0, np.pi / 2, np.pi, 0.0),))
    y = compose(params, Field2D(np.zeros((4, 4))))
    assert y.values[0, 0] == pytest.approx(1.0)
    assert y.values[1, 0] == pytest.approx(0.0, abs=1e-15)
    assert y.values[0, 1] == pytest.approx(-1.0)


def test_compose_additive_over_param_splits():
    a = SinusoidParams(2.0, 1.0, 2.0, 0.3)
    b = SinusoidParams(1.0, 2.5, 0.7, 1.0)
    zero = Field2D(np.zeros((16, 16)))
    both = compose(ParamVector((a, b)), zero)
    split = compose(ParamVector((a,)), zero).values + compose(ParamVector((b,)), zero).values
    assert np.allclose(both.values, split, atol=1e-12)


def test_compose_linear_in_noise():
    params = ParamVector((SinusoidParams(1.0, 1.2, 2.4, 0.5),))
    w1 = generate_innovations(InnovationSpec("gaussian", 1.0, 61), 12, 12)
    w2 = generate_innovations(InnovationSpec("gaussian", 1.0, 62), 12, 12)
    mix = Field2D(2.0 * w1.values + 3.0 * w2.values)
    lhs = compose(params, mix).values
    sines = sinusoid_field(params, 12, 12)
    rhs = sines + 2.0 * (compose(params, w1).values - sines) + 3.0 * (compose(params, w2).values - sines)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_compose_requires_zero_origin():
    noise = Field2D(np.zeros((4, 4)), origin=(-1, 0))
    with pytest.raises(ValueError):
        compose(ParamVector(()), noise)


# ---------------------------------------------------------------------------
# statistical properties of the synthesized noise


@pytest.fixture(scope="module")
def colored_noise():
    ma = MaCoefficients(QP, 1, 1, {(0, 0): 1.0, (0, 1): 0.5, (1, 0): 0.4, (1, 1): 0.2}, 1.0)
    w = synthesize_noise(ma, InnovationSpec("gaussian", 1.0, 314159), 256, 256)
    return ma, w


def test_noise_variance_converges(colored_noise):
    ma, w = colored_noise
    assert w.values.var() == pytest.approx(ma.noise_variance(), rel=0.10)


def test_noise_covariance_matches_model(colored_noise):
    ma, w = colored_noise
    vals = w.values - w.values.mean()
    n, m = vals.shape
    floor = 0.1 * ma.noise_variance()
    for p in range(0, 2):
        for q in range(-1, 2):
            true_cov = ma.covariance(p, q)
            if abs(true_cov) < floor:
                continue
            if q >= 0:
                sample = np.mean(vals[p:, q:] * vals[: n - p, : m - q])
            else:
                sample = np.mean(vals[p:, :q] * vals[: n - p, -q:])
            assert sample == pytest.approx(true_cov, rel=0.15), (p, q)


def test_full_synthesis_deterministic():
    truth = ParamVector((SinusoidParams(2.0, 1.5, 2.5, 0.1),))
    ma = MaCoefficients(QP, 1, 1, {(0, 0): 1.0, (1, 1): -0.3}, 0.5)
    spec = InnovationSpec("uniform", 0.5, 777)
    y1 = synthesize_observation(truth, ma, spec, 48, 40)
    y2 = synthesize_observation(truth, ma, spec, 48, 40)
    assert np.array_equal(y1.values, y2.values)


def test_synthesize_noise_rejects_sigma2_mismatch():
    ma = MaCoefficients(QP, 0, 0, {(0, 0): 1.0}, 1.0)
    with pytest.raises(ValueError):
        synthesize_noise(ma, InnovationSpec("gaussian", 2.0, 1), 16, 16)


def test_sinusoid_field_window_values():
    params = ParamVector((SinusoidParams(1.5, 0.9, 1.7, 0.4),))
    vals = sinusoid_field(params, 8, 8)
    n, m = 3, 5
    assert vals[n, m] == pytest.approx(1.5 * np.cos(0.9 * n + 1.7 * m + 0.4))
