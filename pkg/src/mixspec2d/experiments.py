"""Monte Carlo harness: reproducible trials over a grid of lattice sizes.

A trial synthesizes one observation field, runs the enabled checks, and
returns a TrialResult that is a pure function of (config, size_index,
trial_index).  run_experiment executes all cells (optionally in threads),
then writes a per-trial CSV, a per-size aggregate CSV, and a JSON manifest;
the outputs are independent of execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__ as _version
from .estimator import FitOptions, estimate_path, lse_estimate
from .exceptions import ConfigError, MixSpec2DError
from .model import (
    Field2D,
    InnovationSpec,
    MaCoefficients,
    ParamVector,
    freq_distance,
)
from .selector import DEFAULT_XI_MARGIN, select_order, xi_threshold
from .spectrum import DEFAULT_PAD_FACTOR, periodogram, sup_statistic, top_peaks
from .synth import sinusoid_field, synthesize_noise

__all__ = [
    "KNOWN_CHECKS",
    "ExperimentConfig",
    "TrialResult",
    "sigma2_for_snr",
    "component_snr_db",
    "default_experiment_config",
    "run_trial",
    "run_experiment",
    "match_components",
]

_MASK64 = (1 << 64) - 1

KNOWN_CHECKS = ("selection", "under_est", "over_est", "lemma3_decay", "loss_limits")


def sigma2_for_snr(rho: float, ma_sum_sq: float, snr_db: float) -> float:
    """Innovation variance that puts a component of amplitude rho at the
    requested SNR, where SNR = 10*log10((rho^2/2) / (sigma2 * sum a^2))."""
    return (rho**2 / 2.0) / (10.0 ** (snr_db / 10.0) * ma_sum_sq)


def component_snr_db(rho: float, ma: MaCoefficients) -> float:
    return 10.0 * math.log10((rho**2 / 2.0) / ma.noise_variance())


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a Monte Carlo run needs; JSON-serializable and hashable."""

    truth: ParamVector
    ma: MaCoefficients
    innovation: InnovationSpec
    sizes: tuple[tuple[int, int], ...]
    trials: int
    q_max: int
    xi_mode: Mapping
    checks: Mapping[str, Mapping]
    output_dir: str = "out"
    pad_factor: int = DEFAULT_PAD_FACTOR

    def __post_init__(self):
        sizes = tuple((int(n), int(m)) for n, m in self.sizes)
        if not sizes:
            raise ConfigError("sizes must be nonempty")
        if any(n < 16 or m < 16 for n, m in sizes):
            raise ConfigError("every lattice size must be at least 16x16")
        object.__setattr__(self, "sizes", sizes)
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        object.__setattr__(self, "trials", int(self.trials))
        if int(self.q_max) < 1:
            raise ConfigError("q_max must be at least 1")
        object.__setattr__(self, "q_max", int(self.q_max))
        mode = dict(self.xi_mode)
        kind = mode.get("mode")
        if kind == "auto":
            mode.setdefault("margin", DEFAULT_XI_MARGIN)
            if mode["margin"] < 0:
                raise ConfigError("xi margin must be nonnegative")
        elif kind == "fixed":
            if "value" not in mode or not mode["value"] > 0:
                raise ConfigError("fixed xi_mode requires a positive 'value'")
        else:
            raise ConfigError(f"xi_mode.mode must be 'auto' or 'fixed', got {kind!r}")
        object.__setattr__(self, "xi_mode", mode)
        checks = {}
        for name, params in dict(self.checks).items():
            if name not in KNOWN_CHECKS:
                raise ConfigError(f"unknown check {name!r}; known: {', '.join(KNOWN_CHECKS)}")
            checks[name] = dict(params or {})
        if "under_est" in checks:
            k = int(checks["under_est"].get("k", 1))
            if not 0 < k:
                raise ConfigError("under_est check requires a positive k")
            checks["under_est"]["k"] = k
        object.__setattr__(self, "checks", checks)

    def xi(self) -> float:
        if self.xi_mode["mode"] == "fixed":
            return float(self.xi_mode["value"])
        return xi_threshold(self.ma, float(self.xi_mode["margin"]))

    def fit_options(self) -> FitOptions:
        return FitOptions(pad_factor=self.pad_factor)

    def trial_seed(self, size_index: int, trial_index: int) -> int:
        ss = np.random.SeedSequence(
            [self.innovation.master_seed & _MASK64, int(size_index), int(trial_index)]
        )
        return int(ss.generate_state(1, np.uint64)[0])

    def to_jsonable(self) -> dict:
        return {
            "truth": self.truth.to_jsonable(),
            "ma": self.ma.to_jsonable(),
            "innovation": self.innovation.to_jsonable(),
            "sizes": [list(s) for s in self.sizes],
            "trials": self.trials,
            "q_max": self.q_max,
            "xi_mode": dict(self.xi_mode),
            "checks": {k: dict(v) for k, v in self.checks.items()},
            "output_dir": self.output_dir,
            "pad_factor": self.pad_factor,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_jsonable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def from_jsonable(cls, doc: Mapping) -> "ExperimentConfig":
        try:
            ma = MaCoefficients.from_jsonable(doc["ma"])
            checks = doc.get("checks", {"selection": {}})
            if isinstance(checks, (list, tuple)):
                checks = {name: {} for name in checks}
            return cls(
                truth=ParamVector.from_jsonable(doc.get("truth", [])),
                ma=ma,
                innovation=InnovationSpec.from_jsonable(doc["innovation"], default_sigma2=ma.sigma2),
                sizes=tuple(tuple(s) for s in doc["sizes"]),
                trials=doc["trials"],
                q_max=doc.get("q_max", 8),
                xi_mode=doc.get("xi_mode", {"mode": "auto", "margin": DEFAULT_XI_MARGIN}),
                checks=checks,
                output_dir=doc.get("output_dir", "out"),
                pad_factor=doc.get("pad_factor", DEFAULT_PAD_FACTOR),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc!r}") from exc


def default_experiment_config(
    sizes=((128, 128),),
    trials: int = 100,
    q_max: int = 5,
    snr_db: float = 10.0,
    master_seed: int = 20260810,
    checks: Mapping | None = None,
    support_kind: str = "quarter_plane",
    xi_mode: Mapping | None = None,
    output_dir: str = "out",
) -> ExperimentConfig:
    """The repository's default two-component experiment.

    Two well-separated sinusoids with amplitudes (2, 1), a small quarter-plane
    MA noise model, and the innovation variance set so the dominant component
    sits at ``snr_db``.
    """
    from .model import SinusoidParams, SupportKind

    coeffs = {(0, 0): 1.0, (0, 1): 0.5, (1, 0): 0.4, (1, 1): 0.2}
    sum_sq = sum(a * a for a in coeffs.values())
    sigma2 = sigma2_for_snr(2.0, sum_sq, snr_db)
    ma = MaCoefficients(SupportKind.parse(support_kind), 1, 1, coeffs, sigma2)
    truth = ParamVector(
        (
            SinusoidParams(2.0, 0.9 * math.pi, 0.4 * math.pi, 0.7),
            SinusoidParams(1.0, 0.45 * math.pi, 1.3 * math.pi, 2.1),
        )
    )
    innovation = InnovationSpec("gaussian", sigma2, master_seed)
    return ExperimentConfig(
        truth=truth,
        ma=ma,
        innovation=innovation,
        sizes=tuple(sizes),
        trials=trials,
        q_max=q_max,
        xi_mode=dict(xi_mode) if xi_mode is not None else {"mode": "auto", "margin": DEFAULT_XI_MARGIN},
        checks=dict(checks) if checks is not None else {"selection": {}, "loss_limits": {}},
        output_dir=output_dir,
    )


def match_components(estimate: ParamVector, truth: ParamVector):
    """Greedy nearest-frequency matching of estimated components to true
    ones; returns (truth_index, estimate_index, distance) triples."""
    remaining = list(range(len(estimate)))
    matches = []
    for t_idx, t_comp in enumerate(truth):
        if not remaining:
            break
        best = min(remaining, key=lambda e: freq_distance(estimate[e].frequency, t_comp.frequency))
        matches.append((t_idx, best, freq_distance(estimate[best].frequency, t_comp.frequency)))
        remaining.remove(best)
    return matches


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one (size, trial) cell; reproducible from the config and
    the two indices alone."""

    size_index: int
    n_rows: int
    n_cols: int
    trial_index: int
    seed: int
    wall_time: float = field(compare=False, default=0.0)
    selected: int | None = None
    losses: tuple = ()
    chi: tuple = ()
    failed_orders: tuple = ()
    freq_err_at_p: float | None = None
    amp_err_at_p: float | None = None
    under_k: int | None = None
    under_dom_dist: float | None = None
    under_freq_err: float | None = None
    over_extra_dist: float | None = None
    over_rho_ratio: float | None = None
    sup_stat: float | None = None
    error: str = ""


def _fit_errors_vs_truth(params: ParamVector, truth: ParamVector):
    """RMS frequency error and RMS amplitude error of a fit against the
    truth, after nearest-frequency matching."""
    matches = match_components(params, truth)
    if not matches:
        return None, None
    fsq = []
    asq = []
    for t_idx, e_idx, _ in matches:
        t, e = truth[t_idx], params[e_idx]
        dw = min(abs(t.omega - e.omega), 2 * math.pi - abs(t.omega - e.omega))
        dv = min(abs(t.upsilon - e.upsilon), 2 * math.pi - abs(t.upsilon - e.upsilon))
        fsq.append((dw**2 + dv**2) / 2.0)
        asq.append((t.rho - e.rho) ** 2)
    return math.sqrt(sum(fsq) / len(fsq)), math.sqrt(sum(asq) / len(asq))


def run_trial(config: ExperimentConfig, size_index: int, trial_index: int) -> TrialResult:
    sizes = config.sizes
    if not (0 <= size_index < len(sizes)) or not (0 <= trial_index < config.trials):
        raise ValueError("size or trial index out of range")
    n_rows, n_cols = sizes[size_index]
    seed = config.trial_seed(size_index, trial_index)
    innovation = InnovationSpec(config.innovation.distribution, config.innovation.sigma2, seed)
    opts = config.fit_options()
    start = time.perf_counter()

    noise = synthesize_noise(config.ma, innovation, n_rows, n_cols)
    y = Field2D(sinusoid_field(config.truth, n_rows, n_cols) + noise.values)
    truth_order = len(config.truth)

    out: dict = {}
    errors = []

    if "selection" in config.checks or "loss_limits" in config.checks:
        try:
            sel = select_order(y, config.q_max, config.xi(), opts)
            out["selected"] = sel.selected
            out["losses"] = sel.losses
            out["chi"] = sel.chi
            out["failed_orders"] = sel.failed
            if truth_order and truth_order < config.q_max and sel.fits[truth_order] is not None:
                ferr, aerr = _fit_errors_vs_truth(sel.fits[truth_order].params, config.truth)
                out["freq_err_at_p"] = ferr
                out["amp_err_at_p"] = aerr
        except MixSpec2DError as exc:
            errors.append(f"selection: {exc}")

    if "under_est" in config.checks:
        k = config.checks["under_est"]["k"]
        try:
            fit = lse_estimate(y, k, opts)
            dom = ParamVector(config.truth.canonicalized().components[:k])
            ferr, _ = _fit_errors_vs_truth(fit.params, dom)
            out["under_k"] = k
            out["under_freq_err"] = ferr
            out["under_dom_dist"] = freq_distance(
                fit.params.canonicalized()[0].frequency, dom[0].frequency
            )
        except MixSpec2DError as exc:
            errors.append(f"under_est: {exc}")

    if "over_est" in config.checks:
        try:
            fit = lse_estimate(y, truth_order + 1, opts)
            pg = periodogram(noise, opts.pad_factor)
            peaks = top_peaks(pg, 1)
            if peaks:
                matched = {e for _, e, _ in match_components(fit.params, config.truth)}
                extras = [i for i in range(len(fit.params)) if i not in matched]
                extra = fit.params[extras[0]]
                out["over_extra_dist"] = freq_distance(extra.frequency, peaks[0].frequency)
                out["over_rho_ratio"] = extra.rho**2 / (
                    (2.0 / (n_rows * n_cols)) * peaks[0].value
                )
        except MixSpec2DError as exc:
            errors.append(f"over_est: {exc}")

    if "lemma3_decay" in config.checks:
        out["sup_stat"] = sup_statistic(noise, opts.pad_factor)

    return TrialResult(
        size_index=size_index,
        n_rows=n_rows,
        n_cols=n_cols,
        trial_index=trial_index,
        seed=seed,
        wall_time=time.perf_counter() - start,
        error="; ".join(errors),
        **out,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _trial_csv_header(q_max: int) -> str:
    cols = ["size_index", "n_rows", "n_cols", "trial", "seed", "selected"]
    cols += [f"loss_{k}" for k in range(q_max)]
    cols += [f"chi_{k}" for k in range(q_max)]
    cols += [
        "freq_err_at_p",
        "amp_err_at_p",
        "under_k",
        "under_dom_dist",
        "under_freq_err",
        "over_extra_dist",
        "over_rho_ratio",
        "sup_stat",
        "error",
    ]
    return ",".join(cols)


def _trial_csv_row(t: TrialResult, q_max: int) -> str:
    losses = list(t.losses) + [None] * (q_max - len(t.losses))
    chi = list(t.chi) + [None] * (q_max - len(t.chi))
    cells = [t.size_index, t.n_rows, t.n_cols, t.trial_index, t.seed, t.selected]
    cells += [None if (x is None or (isinstance(x, float) and math.isnan(x))) else x for x in losses]
    cells += [None if (x is None or (isinstance(x, float) and math.isnan(x))) else x for x in chi]
    # wall_time is deliberately not a CSV column: reruns of the same config
    # must produce byte-identical files.
    cells += [
        t.freq_err_at_p,
        t.amp_err_at_p,
        t.under_k,
        t.under_dom_dist,
        t.under_freq_err,
        t.over_extra_dist,
        t.over_rho_ratio,
        t.sup_stat,
        t.error.replace(",", ";"),
    ]
    return ",".join(_fmt(c) for c in cells)


def _median(values) -> float | None:
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if not vals:
        return None
    return float(np.median(vals))


def _rms(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return float(np.sqrt(np.mean(np.square(vals))))


def _aggregate_csv(config: ExperimentConfig, trials: list[TrialResult]) -> list[str]:
    q = config.q_max
    header = ["size_index", "n_rows", "n_cols", "trials"]
    header += [f"sel_count_{k}" for k in range(q)]
    header += ["sel_failed", "freq_rmse", "amp_rmse", "under_freq_rmse", "median_sup"]
    header += [f"median_loss_{k}" for k in range(q)]
    rows = [",".join(header)]
    for s_idx, (n_rows, n_cols) in enumerate(config.sizes):
        cell = [t for t in trials if t.size_index == s_idx]
        counts = [0] * q
        failed = 0
        for t in cell:
            if t.selected is None:
                if "selection" in config.checks or "loss_limits" in config.checks:
                    failed += 1
            else:
                counts[t.selected] += 1
        med_losses = []
        for k in range(q):
            med_losses.append(_median([t.losses[k] for t in cell if len(t.losses) > k]))
        cells = [s_idx, n_rows, n_cols, len(cell)]
        cells += counts
        cells += [
            failed,
            _rms([t.freq_err_at_p for t in cell]),
            _rms([t.amp_err_at_p for t in cell]),
            _rms([t.under_freq_err for t in cell]),
            _median([t.sup_stat for t in cell]),
        ]
        cells += med_losses
        rows.append(",".join(_fmt(c) for c in cells))
    return rows


def run_experiment(
    config: ExperimentConfig, out_dir=None, threads: int = 1
) -> dict[str, Path]:
    """Execute every (size, trial) cell and write the result files.

    Returns the paths of the per-trial CSV, the aggregate CSV, and the JSON
    manifest.  Outputs are byte-identical across runs of the same config and
    independent of the number of threads.
    """
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()

    cells = [(s, t) for s in range(len(config.sizes)) for t in range(config.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(lambda c: run_trial(config, *c), cells))
    else:
        results = [run_trial(config, s, t) for s, t in cells]
    results.sort(key=lambda t: (t.size_index, t.trial_index))

    trials_path = out / "trials.csv"
    with trials_path.open("w") as fh:
        fh.write(_trial_csv_header(config.q_max) + "\n")
        for t in results:
            fh.write(_trial_csv_row(t, config.q_max) + "\n")

    aggregate_path = out / "aggregate.csv"
    with aggregate_path.open("w") as fh:
        for row in _aggregate_csv(config, results):
            fh.write(row + "\n")

    manifest_path = out / "manifest.json"
    manifest = {
        "config": config.to_jsonable(),
        "config_sha256": config.config_hash(),
        "xi": config.xi(),
        "package_version": _version,
        "files": [trials_path.name, aggregate_path.name],
    }
    with manifest_path.open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"trials": trials_path, "aggregate": aggregate_path, "manifest": manifest_path}
