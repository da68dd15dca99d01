"""Least-squares estimation of 2-D sinusoid parameters at an assumed order.

The loss minimized is the mean squared residual

    L_k(theta) = (1/NM) * sum_{n,m} (y(n,m) - sum_i rho_i cos(omega_i n + upsilon_i m + phi_i))^2.

For fixed frequencies the model is linear in the per-component cos/sin
amplitudes, so those are always eliminated in closed form (variable
projection).  Frequencies are initialized greedily from periodogram peaks of
successive residuals and then refined jointly by a damped Gauss-Newton
iteration with step-halving line search.  Orders are estimated incrementally:
the order-k fit warm-starts from the refined order-(k-1) frequencies plus the
next residual peak, which makes the attained loss nonincreasing in k by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConditioningError, RankDeficiencyError
from .model import (
    TWO_PI,
    Field2D,
    ParamVector,
    SinusoidParams,
    freq_distance,
    min_freq_sep_for_grid,
)
from .spectrum import DEFAULT_PAD_FACTOR, periodogram, top_peaks
from .synth import sinusoid_field
from .validation import as_field

__all__ = [
    "DEFAULT_K_MAX",
    "FitOptions",
    "FitResult",
    "loss",
    "linear_amplitudes",
    "loss_gradient",
    "lse_estimate",
    "estimate_path",
    "SinusoidLSE",
]

DEFAULT_K_MAX = 16
_COND_LIMIT = 1e12
_TINY = 1e-300


@dataclass(frozen=True)
class FitOptions:
    """Tuning knobs of the estimator.

    min_freq_sep of None derives the separation from the grid
    (four unpadded Fourier bins).
    """

    pad_factor: int = DEFAULT_PAD_FACTOR
    rel_tol: float = 1e-10
    max_iter: int = 100
    max_halvings: int = 30
    k_max: int = DEFAULT_K_MAX
    min_freq_sep: float | None = None

    def resolved_min_sep(self, n_rows: int, n_cols: int) -> float:
        if self.min_freq_sep is not None:
            return float(self.min_freq_sep)
        return min_freq_sep_for_grid(n_rows, n_cols)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit at one assumed order."""

    params: ParamVector
    loss: float
    iterations: int
    converged: bool
    init_loss: float

    def __post_init__(self):
        if self.loss < 0.0:
            raise ValueError("loss must be nonnegative")
        if self.loss > self.init_loss + 1e-12 * (1.0 + abs(self.init_loss)):
            raise ValueError("refinement must not exceed the initialization loss")

    @property
    def order(self) -> int:
        return len(self.params)

    def to_jsonable(self) -> dict:
        return {
            "order": self.order,
            "loss": self.loss,
            "converged": self.converged,
            "iterations": self.iterations,
            "components": [
                {"rho": c.rho, "omega": c.omega, "upsilon": c.upsilon, "phi": c.phi}
                for c in self.params
            ],
        }


def loss(y, params: ParamVector) -> float:
    """Mean squared residual of the sinusoidal regression model."""
    field = as_field(y)
    if len(params) == 0:
        return field.mean_square()
    resid = field.values - sinusoid_field(params, field.n_rows, field.n_cols)
    return float(np.mean(resid**2))


def _design(freqs: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Cos/sin regressor columns for each frequency pair, flattened row-major."""
    n = np.arange(n_rows, dtype=float)
    m = np.arange(n_cols, dtype=float)
    k = len(freqs)
    X = np.empty((n_rows * n_cols, 2 * k))
    for i, (w, v) in enumerate(freqs):
        phase = np.exp(1j * w * n)[:, None] * np.exp(1j * v * m)[None, :]
        X[:, 2 * i] = phase.real.ravel()
        X[:, 2 * i + 1] = phase.imag.ravel()
    return X


def _solve_linear(yflat: np.ndarray, X: np.ndarray):
    """Exact least-squares amplitudes; raises ConditioningError when the
    normal system is numerically singular."""
    gram = X.T @ X
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise ConditioningError(
            f"normal system condition number {cond:.3g} exceeds {_COND_LIMIT:.0e}; "
            "regressor frequencies are too close or degenerate"
        )
    beta = np.linalg.solve(gram, X.T @ yflat)
    resid = yflat - X @ beta
    return beta, resid


class _VpState:
    """Variable-projection state at a fixed frequency vector."""

    __slots__ = ("freqs", "X", "beta", "resid", "loss")

    def __init__(self, yflat, freqs, n_rows, n_cols):
        self.freqs = np.array(freqs, dtype=float).reshape(-1, 2)
        self.X = _design(self.freqs, n_rows, n_cols)
        self.beta, self.resid = _solve_linear(yflat, self.X)
        self.loss = float(self.resid @ self.resid) / (n_rows * n_cols)


def linear_amplitudes(y, freqs):
    """Exact linear least-squares fit of cos/sin amplitudes at fixed
    frequencies.

    Returns
    -------
    pairs : (k, 2) ndarray
        Rows (a_i, b_i) of the model a_i*cos + b_i*sin per frequency.
        Convert with rho = hypot(a, b), phi = atan2(-b, a) mod 2*pi.
    residual_loss : float
        Mean squared residual of the fit.
    """
    field = as_field(y)
    freqs = np.array(list(freqs), dtype=float).reshape(-1, 2)
    if len(freqs) == 0:
        return np.empty((0, 2)), field.mean_square()
    state = _VpState(field.values.ravel(), freqs, field.n_rows, field.n_cols)
    return state.beta.reshape(-1, 2).copy(), state.loss


def _pointwise_phase_derivative(state: _VpState, i: int) -> np.ndarray:
    # d/dtheta of a*cos(theta) + b*sin(theta) evaluated on the grid.
    a = state.beta[2 * i]
    b = state.beta[2 * i + 1]
    return b * state.X[:, 2 * i] - a * state.X[:, 2 * i + 1]


def loss_gradient(y, freqs) -> np.ndarray:
    """Gradient of the projected loss with respect to the frequencies.

    Amplitudes are at their closed-form optimum, so this is the exact
    gradient of the variable-projection objective; returned as a (k, 2)
    array of (d/d omega_i, d/d upsilon_i) rows.
    """
    field = as_field(y)
    n_rows, n_cols = field.shape
    state = _VpState(field.values.ravel(), freqs, n_rows, n_cols)
    nm = n_rows * n_cols
    n = np.repeat(np.arange(n_rows, dtype=float), n_cols)
    m = np.tile(np.arange(n_cols, dtype=float), n_rows)
    grad = np.empty_like(state.freqs)
    for i in range(len(state.freqs)):
        d = _pointwise_phase_derivative(state, i)
        grad[i, 0] = -(2.0 / nm) * (state.resid @ (n * d))
        grad[i, 1] = -(2.0 / nm) * (state.resid @ (m * d))
    return grad


def _gauss_newton_direction(state: _VpState, n_rows: int, n_cols: int) -> np.ndarray:
    n = np.repeat(np.arange(n_rows, dtype=float), n_cols)
    m = np.tile(np.arange(n_cols, dtype=float), n_rows)
    k = len(state.freqs)
    J = np.empty((n_rows * n_cols, 2 * k))
    for i in range(k):
        d = _pointwise_phase_derivative(state, i)
        J[:, 2 * i] = n * d
        J[:, 2 * i + 1] = m * d
    delta, *_ = np.linalg.lstsq(J.T @ J, J.T @ state.resid, rcond=None)
    return delta.reshape(k, 2)


def _clip_freqs(freqs: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    lo = np.array([TWO_PI / n_rows, TWO_PI / n_cols])
    return np.clip(freqs, lo, TWO_PI - lo)


def _seed_frequency(freq, n_rows: int, n_cols: int) -> tuple[float, float]:
    """Pull a peak frequency into the open box the components live in;
    peaks can land exactly on the omega=0 or upsilon=0 axis."""
    clipped = _clip_freqs(np.array(freq, dtype=float).reshape(1, 2), n_rows, n_cols)
    return (float(clipped[0, 0]), float(clipped[0, 1]))


def _next_peak_frequency(field: Field2D, freqs, opts: FitOptions, min_sep: float):
    """Top residual-periodogram peak outside the neighborhoods of the
    already-chosen frequencies."""
    yflat = field.values.ravel()
    if len(freqs) > 0:
        state = _VpState(yflat, freqs, field.n_rows, field.n_cols)
        resid = Field2D(state.resid.reshape(field.shape))
    else:
        resid = field
    pg = periodogram(resid, opts.pad_factor)
    peaks = top_peaks(pg, 1, exclusions=list(freqs), excl_radius=min_sep)
    if not peaks:
        raise RankDeficiencyError(
            "no usable spectral peak remains to initialize a new component "
            "(is the field identically zero?)"
        )
    return _seed_frequency(peaks[0].frequency, field.n_rows, field.n_cols)


def _separate_collisions(field, freqs, opts, min_sep):
    """Re-initialize later components whose frequencies drifted within
    min_sep of an earlier one."""
    freqs = [tuple(f) for f in freqs]
    for attempt in range(len(freqs)):
        clash = None
        for i in range(len(freqs)):
            for j in range(i + 1, len(freqs)):
                if freq_distance(freqs[i], freqs[j]) < min_sep:
                    clash = j
                    break
            if clash is not None:
                break
        if clash is None:
            return np.array(freqs), attempt > 0
        others = [f for idx, f in enumerate(freqs) if idx != clash]
        yflat = field.values.ravel()
        if others:
            state = _VpState(yflat, others, field.n_rows, field.n_cols)
            resid = Field2D(state.resid.reshape(field.shape))
        else:
            resid = field
        pg = periodogram(resid, opts.pad_factor)
        peaks = top_peaks(pg, 1, exclusions=others, excl_radius=min_sep)
        if not peaks:
            raise RankDeficiencyError("could not re-seed a collided component from the residual")
        freqs[clash] = _seed_frequency(peaks[0].frequency, field.n_rows, field.n_cols)
    raise RankDeficiencyError("component frequencies could not be separated")


def _refine(field: Field2D, freqs: np.ndarray, opts: FitOptions, min_sep: float):
    """Damped Gauss-Newton refinement of the frequency vector on the
    variable-projection objective.  Returns the best state visited, so the
    result never exceeds the initialization loss."""
    n_rows, n_cols = field.shape
    yflat = field.values.ravel()
    state = _VpState(yflat, freqs, n_rows, n_cols)
    best = state
    iterations = 0
    converged = False
    for _ in range(opts.max_iter):
        direction = _gauss_newton_direction(state, n_rows, n_cols)
        if not np.all(np.isfinite(direction)):
            converged = True
            break
        step = 1.0
        accepted = None
        for _ in range(opts.max_halvings + 1):
            candidate = _clip_freqs(state.freqs + step * direction, n_rows, n_cols)
            try:
                cand_state = _VpState(yflat, candidate, n_rows, n_cols)
            except ConditioningError:
                cand_state = None
            if cand_state is not None and cand_state.loss < state.loss:
                accepted = cand_state
                break
            step *= 0.5
        if accepted is None:
            converged = True
            break
        iterations += 1
        previous_loss = state.loss
        state = accepted
        separated, changed = _separate_collisions(field, state.freqs, opts, min_sep)
        if changed:
            state = _VpState(yflat, separated, n_rows, n_cols)
        if state.loss < best.loss:
            best = state
        if previous_loss - state.loss <= opts.rel_tol * max(previous_loss, _TINY):
            converged = True
            break
    return best, iterations, converged


def _params_from_state(state: _VpState, min_sep: float) -> ParamVector:
    comps = []
    for i, (w, v) in enumerate(state.freqs):
        a = state.beta[2 * i]
        b = state.beta[2 * i + 1]
        if math.hypot(a, b) == 0.0:
            raise RankDeficiencyError(
                f"component {i} received zero amplitude from the linear solve"
            )
        comps.append(SinusoidParams.from_cartesian(a, b, w, v))
    return ParamVector(tuple(comps), min_freq_sep=min_sep).canonicalized()


def estimate_path(y, k: int, options: FitOptions | None = None) -> list[FitResult]:
    """Least-squares fits for every order 0..k.

    Each order is initialized from the previous order's refined frequencies
    plus the dominant peak of the corresponding residual periodogram, then
    refined jointly.
    """
    opts = options or FitOptions()
    field = as_field(y)
    k = int(k)
    if k < 0 or k > opts.k_max:
        raise ValueError(f"assumed order must lie in [0, {opts.k_max}], got {k}")
    n_rows, n_cols = field.shape
    min_sep = opts.resolved_min_sep(n_rows, n_cols)
    base_loss = field.mean_square()
    results = [
        FitResult(
            params=ParamVector((), min_freq_sep=min_sep),
            loss=base_loss,
            iterations=0,
            converged=True,
            init_loss=base_loss,
        )
    ]
    freqs = np.empty((0, 2))
    yflat = field.values.ravel()
    for _order in range(1, k + 1):
        new_freq = _next_peak_frequency(field, freqs, opts, min_sep)
        freqs = np.vstack([freqs, new_freq])
        init_state = _VpState(yflat, freqs, n_rows, n_cols)
        best, iterations, converged = _refine(field, freqs, opts, min_sep)
        results.append(
            FitResult(
                params=_params_from_state(best, min_sep),
                loss=best.loss,
                iterations=iterations,
                converged=converged,
                init_loss=init_state.loss,
            )
        )
        freqs = best.freqs
    return results


def lse_estimate(y, k: int, options: FitOptions | None = None) -> FitResult:
    """Least-squares estimate of k sinusoid components.

    For k = 0 returns the empty model with loss equal to the field's mean
    square.  Raises RankDeficiencyError when the field cannot support the
    requested number of components (e.g. an identically zero field) and
    ConditioningError when the regression degenerates.
    """
    return estimate_path(y, k, options)[-1]


class SinusoidLSE(BaseEstimator):
    """Least-squares estimator of a fixed number of 2-D sinusoids in noise.

    Parameters mirror FitOptions.  After ``fit(X)`` on a real 2-D array (or
    Field2D), the fitted components are available as ``components_`` (rows of
    (rho, omega, upsilon, phi), sorted by descending amplitude), and the
    attained mean squared residual as ``loss_``.
    """

    def __init__(
        self,
        n_sinusoids: int = 1,
        pad_factor: int = DEFAULT_PAD_FACTOR,
        rel_tol: float = 1e-10,
        max_iter: int = 100,
        max_halvings: int = 30,
        k_max: int = DEFAULT_K_MAX,
        min_freq_sep: float | None = None,
    ):
        self.n_sinusoids = n_sinusoids
        self.pad_factor = pad_factor
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.k_max = k_max
        self.min_freq_sep = min_freq_sep

    def _options(self) -> FitOptions:
        return FitOptions(
            pad_factor=self.pad_factor,
            rel_tol=self.rel_tol,
            max_iter=self.max_iter,
            max_halvings=self.max_halvings,
            k_max=self.k_max,
            min_freq_sep=self.min_freq_sep,
        )

    def fit(self, X, y=None):
        field = as_field(X)
        result = lse_estimate(field, self.n_sinusoids, self._options())
        self.result_ = result
        self.params_ = result.params
        self.components_ = np.array([c.as_tuple() for c in result.params]).reshape(-1, 4)
        self.loss_ = result.loss
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        return self

    def predict(self, X):
        """Fitted deterministic (sinusoidal) component on X's grid."""
        check_is_fitted(self, "params_")
        field = as_field(X)
        return sinusoid_field(self.params_, field.n_rows, field.n_cols)

    def score(self, X, y=None) -> float:
        """Negative mean squared residual (higher is better)."""
        check_is_fitted(self, "params_")
        return -loss(as_field(X), self.params_)
