"""Seed-reproducible synthesis of innovations, MA noise, and observations.

Innovation values are site-addressed: the value at absolute lattice site
(n, m) is a pure function of (master_seed, distribution, n, m).  Enlarging a
grid therefore preserves the values on the overlap, and generation can be
parallelized by rows without changing the output.  Each site consumes one
Philox counter block, keyed per row through a SeedSequence.
"""

from __future__ import annotations

import numpy as np

from .exceptions import CoverageError
from .model import (
    Field2D,
    InnovationLaw,
    InnovationSpec,
    MaCoefficients,
    ParamVector,
    SupportKind,
)

__all__ = [
    "generate_innovations",
    "ma_filter",
    "required_innovation_extent",
    "synthesize_noise",
    "sinusoid_field",
    "compose",
    "synthesize_observation",
]

_MASK64 = (1 << 64) - 1
# Columns are offset so that negative absolute indices map to valid counter
# positions; grids never reach 2**31 in either direction.
_COL_BASE = 1 << 31
_LAW_CODE = {InnovationLaw.GAUSSIAN: 1, InnovationLaw.UNIFORM: 2, InnovationLaw.LAPLACE: 3}
_INV_2_53 = 2.0**-53


def _row_uniforms(master_seed: int, law_code: int, abs_row: int, col_start: int, n_cols: int) -> np.ndarray:
    """Two uniforms in [0, 1) per site for one row of absolute columns
    [col_start, col_start + n_cols)."""
    ss = np.random.SeedSequence([master_seed & _MASK64, law_code, abs_row & _MASK64])
    bits = np.random.Philox(ss)
    bits.advance(col_start + _COL_BASE)
    raw = bits.random_raw(4 * n_cols).reshape(n_cols, 4)
    return (raw[:, :2] >> np.uint64(11)) * _INV_2_53


def _transform_uniforms(u: np.ndarray, law: InnovationLaw, sigma2: float) -> np.ndarray:
    sigma = np.sqrt(sigma2)
    if law is InnovationLaw.GAUSSIAN:
        # Box-Muller; 1-u lies in (0, 1] so the log is finite.
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return sigma * radius * np.cos(2.0 * np.pi * u[:, 1])
    if law is InnovationLaw.UNIFORM:
        # Width sqrt(12)*sigma gives variance exactly sigma2.
        return (u[:, 0] - 0.5) * np.sqrt(12.0 * sigma2)
    if law is InnovationLaw.LAPLACE:
        v = u[:, 0] - 0.5
        core = np.maximum(1.0 - 2.0 * np.abs(v), 2.0**-60)
        return -(sigma / np.sqrt(2.0)) * np.sign(v) * np.log(core)
    raise ValueError(f"unsupported innovation law: {law!r}")


def generate_innovations(
    spec: InnovationSpec, n_rows: int, n_cols: int, origin: tuple[int, int] = (0, 0)
) -> Field2D:
    """Draw an i.i.d. innovation field with the requested law.

    Identical (spec, dims, origin) inputs yield bit-identical outputs, and
    the value at any absolute site does not depend on the grid extent.
    """
    n_rows, n_cols = int(n_rows), int(n_cols)
    if n_rows < 1 or n_cols < 1:
        raise ValueError(f"field dimensions must be positive, got {n_rows}x{n_cols}")
    r0, c0 = int(origin[0]), int(origin[1])
    code = _LAW_CODE[spec.distribution]
    out = np.empty((n_rows, n_cols))
    for i in range(n_rows):
        u = _row_uniforms(spec.master_seed, code, r0 + i, c0, n_cols)
        out[i] = _transform_uniforms(u, spec.distribution, spec.sigma2)
    return Field2D(out, origin=(r0, c0))


def required_innovation_extent(ma: MaCoefficients, out_rows: int, out_cols: int):
    """Innovation grid (n_rows, n_cols, origin) required so the MA filter is
    fully defined on an out_rows-by-out_cols output window at origin (0, 0)."""
    k, l = ma.extent_k, ma.extent_l
    row_lo, row_hi = -k, out_rows - 1
    if ma.support_kind is SupportKind.NSHP:
        col_lo, col_hi = -l, out_cols - 1 + l
    else:
        col_lo, col_hi = -l, out_cols - 1
    return (row_hi - row_lo + 1, col_hi - col_lo + 1, (row_lo, col_lo))


def ma_filter(u: Field2D, ma: MaCoefficients, out_rows: int, out_cols: int) -> Field2D:
    """Exact finite MA convolution w(n,m) = sum a(r,s) * u(n-r, m-s) on the
    output window [0, out_rows) x [0, out_cols).

    The input field must cover every index the sum touches; there is no
    zero-padding and no startup transient inside the output.
    """
    out_rows, out_cols = int(out_rows), int(out_cols)
    if out_rows < 1 or out_cols < 1:
        raise ValueError("output dimensions must be positive")
    need_rows, need_cols, (row_lo, col_lo) = required_innovation_extent(ma, out_rows, out_cols)
    have_r = u.row_range()
    have_c = u.col_range()
    need_r = (row_lo, row_lo + need_rows - 1)
    need_c = (col_lo, col_lo + need_cols - 1)
    if have_r[0] > need_r[0] or have_r[1] < need_r[1] or have_c[0] > need_c[0] or have_c[1] < need_c[1]:
        raise CoverageError(
            f"innovation field covers rows [{have_r[0]}, {have_r[1]}], "
            f"cols [{have_c[0]}, {have_c[1]}]; filtering a {out_rows}x{out_cols} window "
            f"with {ma.support_kind.value} extents ({ma.extent_k}, {ma.extent_l}) requires "
            f"rows [{need_r[0]}, {need_r[1]}], cols [{need_c[0]}, {need_c[1]}]"
        )
    r0, c0 = u.origin
    w = np.zeros((out_rows, out_cols))
    for (r, s), a in ma.coeffs.items():
        if a == 0.0:
            continue
        i0 = -r - r0
        j0 = -s - c0
        w += a * u.values[i0 : i0 + out_rows, j0 : j0 + out_cols]
    return Field2D(w)


def synthesize_noise(ma: MaCoefficients, innovation: InnovationSpec, n_rows: int, n_cols: int) -> Field2D:
    """Generate the colored noise field on an n_rows-by-n_cols window by
    drawing innovations on the exact extended grid the filter needs."""
    if abs(innovation.sigma2 - ma.sigma2) > 1e-12 * max(abs(ma.sigma2), 1.0):
        raise ValueError(
            f"innovation sigma2 ({innovation.sigma2!r}) disagrees with the "
            f"MA model sigma2 ({ma.sigma2!r})"
        )
    u_rows, u_cols, u_origin = required_innovation_extent(ma, n_rows, n_cols)
    u = generate_innovations(innovation, u_rows, u_cols, origin=u_origin)
    return ma_filter(u, ma, n_rows, n_cols)


def sinusoid_field(params: ParamVector, n_rows: int, n_cols: int) -> np.ndarray:
    """Evaluate sum_i rho_i * cos(omega_i*n + upsilon_i*m + phi_i) on the
    window [0, n_rows) x [0, n_cols)."""
    n = np.arange(int(n_rows), dtype=float)[:, None]
    m = np.arange(int(n_cols), dtype=float)[None, :]
    out = np.zeros((int(n_rows), int(n_cols)))
    for comp in params:
        out += comp.rho * np.cos(comp.omega * n + comp.upsilon * m + comp.phi)
    return out


def compose(params: ParamVector, noise: Field2D) -> Field2D:
    """Observation field: the sinusoidal sum plus the noise, on the noise
    field's window (which must start at origin (0, 0))."""
    if noise.origin != (0, 0):
        raise ValueError(f"noise field must have origin (0, 0), got {noise.origin}")
    return Field2D(sinusoid_field(params, noise.n_rows, noise.n_cols) + noise.values)


def synthesize_observation(
    truth: ParamVector, ma: MaCoefficients, innovation: InnovationSpec, n_rows: int, n_cols: int
) -> Field2D:
    return compose(truth, synthesize_noise(ma, innovation, n_rows, n_cols))
