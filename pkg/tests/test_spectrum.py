import numpy as np
import pytest

from mixspec2d import (
    Field2D,
    InnovationSpec,
    ParamVector,
    SinusoidParams,
    direct_dft_periodogram,
    generate_innovations,
    periodogram,
    sinusoid_field,
    sup_statistic,
    top_peaks,
)
from mixspec2d.model import TWO_PI

ORACLE_RTOL = 1e-9


def random_field(rows, cols, seed):
    return generate_innovations(InnovationSpec("gaussian", 1.0, seed), rows, cols)


def on_grid_cosine(rho, a0, b0, n, m, phi=0.0):
    params = ParamVector((SinusoidParams(rho, TWO_PI * a0 / n, TWO_PI * b0 / m, phi),))
    return Field2D(sinusoid_field(params, n, m))


# ---------------------------------------------------------------------------
# periodogram values


def test_constant_field_is_dc_only():
    n, m, c = 8, 12, 1.7
    pg = periodogram(Field2D(np.full((n, m), c)), pad_factor=1)
    assert pg.grid[0, 0] == pytest.approx(2 * n * m * c**2, rel=1e-12)
    rest = pg.grid.copy()
    rest[0, 0] = 0.0
    assert np.max(np.abs(rest)) < 1e-9


def test_on_grid_cosine_peak_height():
    n, m, rho = 16, 16, 1.3
    a0, b0 = 3, 5  # nonzero, not self-conjugate
    field = on_grid_cosine(rho, a0, b0, n, m, phi=0.9)
    pg = periodogram(field, pad_factor=1)
    expected = rho**2 * n * m / 2
    assert pg.grid[a0, b0] == pytest.approx(expected, rel=1e-9)
    # direct-DFT oracle agrees at the same frequency
    (oracle,) = direct_dft_periodogram(field, [(TWO_PI * a0 / n, TWO_PI * b0 / m)])
    assert oracle == pytest.approx(expected, rel=1e-9)


def test_parseval_mean():
    for seed in range(50):
        field = random_field(12, 10, seed)
        pg = periodogram(field, pad_factor=1)
        assert pg.grid.mean() == pytest.approx(2.0 * field.mean_square(), rel=ORACLE_RTOL)


@pytest.mark.parametrize("shape", [(8, 8), (16, 16)])
def test_fast_periodogram_matches_direct_dft(shape):
    n, m = shape
    for seed in range(20):
        field = random_field(n, m, 1000 + seed)
        pg = periodogram(field, pad_factor=1)
        freqs = [(TWO_PI * a / n, TWO_PI * b / m) for a in range(n) for b in range(m)]
        oracle = np.array(direct_dft_periodogram(field, freqs)).reshape(n, m)
        scale = max(oracle.max(), 1e-12)
        assert np.max(np.abs(pg.grid - oracle)) / scale < ORACLE_RTOL


def test_direct_dft_zero_field():
    field = Field2D(np.zeros((6, 6)))
    vals = direct_dft_periodogram(field, [(0.3, 0.4), (1.0, 2.0)])
    assert vals == [0.0, 0.0]


def test_conjugate_symmetry():
    field = random_field(10, 14, 3)
    pg = periodogram(field, pad_factor=2)
    rows, cols = pg.grid.shape
    mirrored = pg.grid[(-np.arange(rows)) % rows][:, (-np.arange(cols)) % cols]
    scale = pg.grid.max()
    assert np.max(np.abs(pg.grid - mirrored)) / scale < 1e-9


def test_padding_refines_never_perturbs():
    field = random_field(12, 12, 4)
    p1 = periodogram(field, pad_factor=1)
    p2 = periodogram(field, pad_factor=2)
    assert np.allclose(p2.grid[::2, ::2], p1.grid, rtol=1e-9, atol=1e-9)


# ---------------------------------------------------------------------------
# peaks


def test_single_cosine_top_peak():
    n = m = 32
    rho, a0, b0 = 2.0, 5, 9
    field = on_grid_cosine(rho, a0, b0, n, m, phi=1.1)
    peaks = top_peaks(periodogram(field, pad_factor=1), count=1)
    assert len(peaks) == 1
    p = peaks[0]
    true = (TWO_PI * a0 / n, TWO_PI * b0 / m)
    mirror = (TWO_PI - true[0], TWO_PI - true[1])
    assert p.frequency in (pytest.approx(true), pytest.approx(mirror))
    assert p.value == pytest.approx(rho**2 * n * m / 2, rel=1e-9)


def test_two_cosines_ordered_by_amplitude():
    n = m = 32
    f1 = on_grid_cosine(2.0, 4, 6, n, m)
    f2 = on_grid_cosine(1.0, 10, 3, n, m)
    field = Field2D(f1.values + f2.values)
    peaks = top_peaks(periodogram(field, pad_factor=1), count=2)
    assert len(peaks) == 2
    assert peaks[0].value > peaks[1].value
    assert peaks[0].value == pytest.approx(4.0 * n * m / 2, rel=1e-6)
    assert peaks[1].value == pytest.approx(1.0 * n * m / 2, rel=1e-6)


def test_exclusion_suppresses_peak():
    n = m = 32
    field = on_grid_cosine(2.0, 4, 6, n, m)
    pg = periodogram(field, pad_factor=1)
    freq = (TWO_PI * 4 / n, TWO_PI * 6 / m)
    peaks = top_peaks(pg, count=1, exclusions=[freq], excl_radius=0.3)
    assert all(p.frequency != pytest.approx(freq) for p in peaks) or peaks == []
    # the mirror must be swallowed by the same exclusion
    mirror = (TWO_PI - freq[0], TWO_PI - freq[1])
    assert all(p.frequency != pytest.approx(mirror) for p in peaks)


def test_dc_neighborhood_never_returned():
    # At pad 1 a constant field has energy only at DC, which is excluded.
    field = Field2D(np.full((16, 16), 3.0))
    assert top_peaks(periodogram(field, pad_factor=1), count=3) == []
    # At higher padding the window's own sidelobes are legitimate peaks, but
    # everything within one unpadded bin of DC stays excluded.
    from mixspec2d import freq_distance

    for p in top_peaks(periodogram(field, pad_factor=4), count=5):
        assert freq_distance(p.frequency, (0.0, 0.0)) >= TWO_PI / 16 - 1e-12


def test_peak_count_capped_by_available():
    n = m = 32
    field = on_grid_cosine(1.0, 4, 6, n, m)
    peaks = top_peaks(periodogram(field, pad_factor=1), count=5, excl_radius=1.0)
    assert 1 <= len(peaks) < 5


def test_representative_has_omega_below_pi():
    n = m = 32
    for (a0, b0) in [(5, 9), (27, 9), (27, 23), (5, 23)]:
        field = on_grid_cosine(1.0, a0, b0, n, m)
        (peak,) = top_peaks(periodogram(field, pad_factor=1), count=1)
        assert peak.omega < np.pi or (peak.omega == np.pi and peak.upsilon <= np.pi)


# ---------------------------------------------------------------------------
# sup statistic


def test_sup_statistic_zero_field():
    assert sup_statistic(Field2D(np.zeros((8, 8)))) == 0.0


def test_sup_statistic_constant_field():
    assert sup_statistic(Field2D(np.full((8, 8), -2.5)), pad_factor=2) == pytest.approx(2.5, rel=1e-12)


def test_sup_statistic_monotone_in_padding():
    field = random_field(16, 16, 8)
    values = [sup_statistic(field, p) for p in (1, 2, 4, 8)]
    assert all(values[i] <= values[i + 1] + 1e-15 for i in range(len(values) - 1))


def test_sup_statistic_decays_with_size():
    sizes = [32, 64, 128]
    medians = []
    for size in sizes:
        vals = [
            sup_statistic(random_field(size, size, 100 * size + s), pad_factor=2)
            for s in range(10)
        ]
        medians.append(np.median(vals))
    assert medians[0] > medians[1] > medians[2]
