"""The scaled 2-D periodogram, peak extraction, and the normalized-DFT
supremum statistic.

The periodogram used throughout is scaled by a factor of 2:

    I(omega, upsilon) = (2/NM) * |sum_{n,m} y(n,m) exp(-j(n*omega + m*upsilon))|^2

evaluated on the Fourier grid of a zero-padded transform.  A slow direct-DFT
evaluation at arbitrary frequencies is provided as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import TWO_PI, Field2D, min_freq_sep_for_grid

__all__ = [
    "DEFAULT_PAD_FACTOR",
    "Periodogram",
    "Peak",
    "periodogram",
    "direct_dft_periodogram",
    "top_peaks",
    "sup_statistic",
]

DEFAULT_PAD_FACTOR = 4


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Periodogram samples on a (pad*N)-by-(pad*M) Fourier grid.

    Bin (a, b) corresponds to frequencies
    omega_a = 2*pi*a / (pad*N), upsilon_b = 2*pi*b / (pad*M).
    """

    grid: np.ndarray
    pad_factor: int
    src_rows: int
    src_cols: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def bin_frequency(self, a: int, b: int) -> tuple[float, float]:
        rows, cols = self.grid.shape
        return (TWO_PI * (a % rows) / rows, TWO_PI * (b % cols) / cols)

    def omega_axis(self) -> np.ndarray:
        rows = self.grid.shape[0]
        return TWO_PI * np.arange(rows) / rows

    def upsilon_axis(self) -> np.ndarray:
        cols = self.grid.shape[1]
        return TWO_PI * np.arange(cols) / cols

    def mirror_bin(self, a: int, b: int) -> tuple[int, int]:
        rows, cols = self.grid.shape
        return ((rows - a) % rows, (cols - b) % cols)


@dataclass(frozen=True)
class Peak:
    """One periodogram peak: its frequency pair, height, and grid bin."""

    omega: float
    upsilon: float
    value: float
    bin: tuple[int, int]

    @property
    def frequency(self) -> tuple[float, float]:
        return (self.omega, self.upsilon)


def periodogram(field: Field2D, pad_factor: int = 1) -> Periodogram:
    """Scaled periodogram of a field via a zero-padded FFT.

    The (2/NM) normalization uses the source dimensions, not the padded
    ones, so padding refines the frequency grid without changing values at
    coincident bins.
    """
    pad = int(pad_factor)
    if pad < 1:
        raise ValueError("pad_factor must be at least 1")
    n, m = field.shape
    spec = np.fft.fft2(field.values, s=(pad * n, pad * m))
    grid = (2.0 / (n * m)) * (spec.real**2 + spec.imag**2)
    return Periodogram(grid=grid, pad_factor=pad, src_rows=n, src_cols=m)


def direct_dft_periodogram(field: Field2D, freqs) -> list[float]:
    """The same scaled periodogram evaluated by the literal double sum at
    arbitrary (omega, upsilon) pairs.  Slow; used as a test oracle."""
    n, m = field.shape
    rows = np.arange(n, dtype=float)
    cols = np.arange(m, dtype=float)
    out = []
    for omega, upsilon in freqs:
        en = np.exp(-1j * float(omega) * rows)
        em = np.exp(-1j * float(upsilon) * cols)
        z = en @ field.values @ em
        out.append(float((2.0 / (n * m)) * (z.real**2 + z.imag**2)))
    return out


def _circular_bin_distance(idx: np.ndarray, size: int) -> np.ndarray:
    d = np.abs(idx)
    return np.minimum(d % size, (-d) % size)


def _local_maxima(grid: np.ndarray) -> np.ndarray:
    """Mask of bins that are >= all eight circular neighbors and positive."""
    mask = grid > 0.0
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= grid >= np.roll(grid, (di, dj), axis=(0, 1))
    return mask


def _freq_dist(f1, f2) -> float:
    d0 = abs(f1[0] - f2[0]) % TWO_PI
    d1 = abs(f1[1] - f2[1]) % TWO_PI
    return max(min(d0, TWO_PI - d0), min(d1, TWO_PI - d1))


def top_peaks(
    pg: Periodogram,
    count: int,
    exclusions=(),
    excl_radius: float | None = None,
) -> list[Peak]:
    """Extract up to ``count`` dominant periodogram peaks.

    The DC bin and its one-unpadded-bin neighborhood are never returned
    (component frequencies live in the open interval (0, 2*pi)).  Each real
    sinusoid occupies two conjugate-mirror bins; one canonical representative
    is returned (omega < pi, ties broken by upsilon < pi, then by lower bin
    index) and the mirror is suppressed.  Bins within ``excl_radius`` (circular
    max-metric) of an exclusion frequency or of an already-returned peak are
    suppressed as well.

    Returns fewer than ``count`` peaks when the grid runs out of candidates.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if excl_radius is None:
        excl_radius = min_freq_sep_for_grid(pg.src_rows, pg.src_cols)
    rows, cols = pg.grid.shape
    pad = pg.pad_factor

    candidates = _local_maxima(pg.grid)
    # Drop bins at the FFT rounding floor relative to the dominant bin; an
    # exact-arithmetic zero grid otherwise yields spurious 1e-29-level peaks.
    candidates &= pg.grid > pg.grid.max() * 1e-15
    # DC neighborhood: strictly within one unpadded bin width on both axes.
    a_idx = _circular_bin_distance(np.arange(rows), rows)
    b_idx = _circular_bin_distance(np.arange(cols), cols)
    dc_mask = (a_idx[:, None] < pad) & (b_idx[None, :] < pad)
    candidates &= ~dc_mask

    flat = np.flatnonzero(candidates)
    if flat.size == 0:
        return []
    order = np.argsort(pg.grid.ravel()[flat])[::-1]
    flat = flat[order]

    taken: list[Peak] = []
    blocked: list[tuple[float, float]] = [tuple(map(float, f)) for f in exclusions]
    for idx in flat:
        a, b = divmod(int(idx), cols)
        freq = pg.bin_frequency(a, b)
        ma_, mb_ = pg.mirror_bin(a, b)
        mirror_freq = pg.bin_frequency(ma_, mb_)
        # A real sinusoid occupies both mirrored bins, so suppression must
        # consider the candidate under either representation.
        if any(
            _freq_dist(freq, f) < excl_radius or _freq_dist(mirror_freq, f) < excl_radius
            for f in blocked
        ):
            continue
        rep_bin, rep_freq = _representative((a, b), freq, (ma_, mb_), mirror_freq)
        taken.append(Peak(rep_freq[0], rep_freq[1], float(pg.grid[a, b]), rep_bin))
        blocked.append(freq)
        blocked.append(mirror_freq)
        if len(taken) >= count:
            break
    return taken


def _representative(bin1, freq1, bin2, freq2):
    """Canonical member of a conjugate-mirror pair."""
    def key(bin_, freq):
        return (0 if freq[0] < math.pi else 1, 0 if freq[1] < math.pi else 1, bin_)

    if key(bin1, freq1) <= key(bin2, freq2):
        return bin1, freq1
    return bin2, freq2


def sup_statistic(field: Field2D, pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """Supremum over the padded Fourier grid of the normalized transform
    magnitude |(1/NM) * sum y(n,m) exp(j(omega*n + upsilon*m))|.

    Equals sqrt(max periodogram / (2*N*M)).  For pure noise fields this
    statistic decays to zero as the lattice grows.
    """
    pg = periodogram(field, pad_factor)
    n, m = field.shape
    return float(np.sqrt(pg.grid.max() / (2.0 * n * m)))
