"""Penalized selection of the number of sinusoid components.

The selection statistic for an assumed order k is

    chi(k) = NM * ln(L_k) + xi * k * ln(NM)

with L_k the attained least-squares loss at order k and xi the penalty
weight.  The estimated order is the smallest k minimizing chi over the
candidate set {0, ..., q_max - 1}.  Consistency requires xi to exceed a
threshold proportional to the noise penalty constant: 14x for an NSHP
moving-average noise support and 8x for a quarter-plane support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimator import (
    DEFAULT_K_MAX,
    FitOptions,
    FitResult,
    _next_peak_frequency,
    _params_from_state,
    _refine,
    _seed_frequency,
    _VpState,
    estimate_path,
)
from .exceptions import ConditioningError, RankDeficiencyError
from .model import TWO_PI, MaCoefficients, ParamVector, SupportKind, noise_penalty_constant
from .spectrum import DEFAULT_PAD_FACTOR
from .validation import as_field

__all__ = [
    "DEFAULT_Q_MAX",
    "DEFAULT_XI_MARGIN",
    "XI_FACTOR_NSHP",
    "XI_FACTOR_QUARTER_PLANE",
    "SelectionResult",
    "xi_threshold",
    "selection_statistic",
    "select_order",
    "SinusoidCountSelector",
]

DEFAULT_Q_MAX = 8
DEFAULT_XI_MARGIN = 0.01
XI_FACTOR_NSHP = 14.0
XI_FACTOR_QUARTER_PLANE = 8.0

# Monotonicity slack when comparing losses across consecutive orders.
_LOSS_SLACK = 1e-12


def xi_threshold(ma: MaCoefficients, margin: float = DEFAULT_XI_MARGIN) -> float:
    """Penalty weight sitting ``margin`` above the consistency threshold of
    the declared noise support (14 * constant for NSHP, 8 * constant for a
    quarter plane).  The underlying bounds are strict, so pass margin > 0
    for a weight that provably satisfies them."""
    if margin < 0.0:
        raise ValueError("margin must be nonnegative")
    factor = (
        XI_FACTOR_NSHP
        if ma.support_kind is SupportKind.NSHP
        else XI_FACTOR_QUARTER_PLANE
    )
    return factor * noise_penalty_constant(ma) * (1.0 + margin)


def selection_statistic(nm: int, loss_value: float, order: int, xi: float) -> float:
    """chi(k) = NM*ln(loss) + xi*k*ln(NM), natural logarithms.

    A zero loss (exact fit) returns -inf: a perfect fit at order k beats
    every larger order, and the smallest such k wins ties.
    """
    nm = int(nm)
    if nm < 1:
        raise ValueError("sample count must be positive")
    if loss_value < 0.0:
        raise ValueError("loss must be nonnegative")
    if loss_value == 0.0:
        return float("-inf")
    return nm * math.log(loss_value) + xi * int(order) * math.log(nm)


@dataclass(frozen=True)
class SelectionResult:
    """Per-order losses and statistics plus the selected order.

    ``fits[k]`` is None when estimation failed at that order; failed orders
    are excluded from the argmin and flagged in ``failed``.
    """

    q_max: int
    xi: float
    nm: int
    losses: tuple
    chi: tuple
    failed: tuple
    selected: int
    fits: tuple = ()

    def selected_fit(self) -> FitResult | None:
        if not self.fits:
            return None
        return self.fits[self.selected]

    def to_jsonable(self) -> dict:
        doc = {
            "q_max": self.q_max,
            "xi": self.xi,
            "nm": self.nm,
            "losses": [None if math.isnan(x) else x for x in self.losses],
            "chi": [None if math.isnan(x) else x for x in self.chi],
            "failed": list(self.failed),
            "selected": self.selected,
        }
        fit = self.selected_fit()
        if fit is not None:
            doc["components"] = fit.to_jsonable()["components"]
        return doc

    def csv_rows(self) -> list[str]:
        rows = ["k,loss,chi,failed"]
        for k in range(self.q_max):
            loss_txt = "" if math.isnan(self.losses[k]) else repr(self.losses[k])
            chi_txt = "" if math.isnan(self.chi[k]) else repr(self.chi[k])
            rows.append(f"{k},{loss_txt},{chi_txt},{int(self.failed[k])}")
        return rows


def _perturbed_retry(field, prev_freqs, opts, min_sep):
    """One retry of a violating order: nudge the freshly added frequency by
    a quarter of an unpadded bin and refine again (deterministic)."""
    new_freq = _next_peak_frequency(field, prev_freqs, opts, min_sep)
    jitter = 0.25 * TWO_PI / max(field.n_rows, field.n_cols)
    nudged = _seed_frequency(
        (new_freq[0] + jitter, new_freq[1] + jitter), field.n_rows, field.n_cols
    )
    freqs = np.vstack([prev_freqs, nudged]) if len(prev_freqs) else np.array([nudged])
    yflat = field.values.ravel()
    init_state = _VpState(yflat, freqs, field.n_rows, field.n_cols)
    best, iterations, converged = _refine(field, freqs, opts, min_sep)
    return FitResult(
        params=_params_from_state(best, min_sep),
        loss=best.loss,
        iterations=iterations,
        converged=converged,
        init_loss=init_state.loss,
    )


def select_order(y, q_max: int = DEFAULT_Q_MAX, xi: float = None, options: FitOptions | None = None) -> SelectionResult:
    """Estimate the number of sinusoids by minimizing the penalized
    statistic over assumed orders 0..q_max-1.

    Estimation failures at some order are recorded (loss and chi become NaN,
    ``failed[k]`` is set) and excluded from the argmin; ties in the argmin go
    to the smallest order.  If an order's loss exceeds the previous order's,
    that order is re-estimated once from a perturbed initialization and the
    better of the two fits is kept.
    """
    q_max = int(q_max)
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    if xi is None or not np.isfinite(xi) or xi <= 0.0:
        raise ValueError("xi must be a positive finite penalty weight")
    opts = options or FitOptions()
    if q_max - 1 > opts.k_max:
        raise ValueError(f"q_max - 1 = {q_max - 1} exceeds the configured maximum order {opts.k_max}")
    field = as_field(y)
    min_sep = opts.resolved_min_sep(field.n_rows, field.n_cols)
    nm = field.sample_count

    fits: list[FitResult | None] = [None] * q_max
    failed = [False] * q_max
    try:
        path = estimate_path(field, q_max - 1, opts)
    except (ConditioningError, RankDeficiencyError):
        # Isolate the smallest failing order; because each order extends the
        # previous one, every order past the first failure fails with it.
        path = estimate_path(field, 0, opts)
        for k in range(1, q_max):
            try:
                path = estimate_path(field, k, opts)
            except (ConditioningError, RankDeficiencyError):
                break
    for k, fit in enumerate(path):
        fits[k] = fit
    for k in range(len(path), q_max):
        failed[k] = True

    # Enforce the nonincreasing-loss property with a single perturbed retry.
    for k in range(1, q_max):
        if fits[k] is None or fits[k - 1] is None:
            continue
        if fits[k].loss > fits[k - 1].loss + _LOSS_SLACK:
            try:
                retry = _perturbed_retry(field, fits[k - 1].params.frequencies(), opts, min_sep)
            except (ConditioningError, RankDeficiencyError):
                continue
            if retry.loss < fits[k].loss:
                fits[k] = retry

    losses = tuple(float("nan") if f is None else f.loss for f in fits)
    chi = tuple(
        float("nan") if f is None else selection_statistic(nm, f.loss, k, xi)
        for k, f in enumerate(fits)
    )
    valid = [k for k in range(q_max) if fits[k] is not None]
    if not valid:
        raise RankDeficiencyError("estimation failed at every candidate order")
    selected = min(valid, key=lambda k: (chi[k], k))
    return SelectionResult(
        q_max=q_max,
        xi=float(xi),
        nm=nm,
        losses=losses,
        chi=chi,
        failed=tuple(failed),
        selected=selected,
        fits=tuple(fits),
    )


class SinusoidCountSelector(BaseEstimator):
    """Selects the number of 2-D sinusoids in a noisy field.

    Either pass a fixed penalty weight ``xi`` or provide the noise model
    ``ma`` so the weight can be derived from its support kind and
    coefficients.  After ``fit(X)``: ``order_`` is the selected count,
    ``losses_``/``chi_`` hold the per-order diagnostics, and ``components_``
    the components fitted at the selected order.
    """

    def __init__(
        self,
        q_max: int = DEFAULT_Q_MAX,
        xi: float | None = None,
        ma: MaCoefficients | None = None,
        margin: float = DEFAULT_XI_MARGIN,
        pad_factor: int = DEFAULT_PAD_FACTOR,
        rel_tol: float = 1e-10,
        max_iter: int = 100,
        max_halvings: int = 30,
        k_max: int = DEFAULT_K_MAX,
        min_freq_sep: float | None = None,
    ):
        self.q_max = q_max
        self.xi = xi
        self.ma = ma
        self.margin = margin
        self.pad_factor = pad_factor
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.k_max = k_max
        self.min_freq_sep = min_freq_sep

    def _resolve_xi(self) -> float:
        if self.xi is not None:
            return float(self.xi)
        if self.ma is not None:
            return xi_threshold(self.ma, self.margin)
        raise ValueError("either a fixed xi or a noise model (ma) must be provided")

    def fit(self, X, y=None):
        opts = FitOptions(
            pad_factor=self.pad_factor,
            rel_tol=self.rel_tol,
            max_iter=self.max_iter,
            max_halvings=self.max_halvings,
            k_max=self.k_max,
            min_freq_sep=self.min_freq_sep,
        )
        result = select_order(as_field(X), self.q_max, self._resolve_xi(), opts)
        self.selection_ = result
        self.order_ = result.selected
        self.losses_ = np.array(result.losses)
        self.chi_ = np.array(result.chi)
        self.failed_ = np.array(result.failed)
        fit = result.selected_fit()
        self.params_ = fit.params if fit is not None else ParamVector(())
        self.components_ = np.array([c.as_tuple() for c in self.params_]).reshape(-1, 4)
        return self

    def predict(self, X=None) -> int:
        check_is_fitted(self, "order_")
        return self.order_
