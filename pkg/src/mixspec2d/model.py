"""Domain types for 2-D sinusoids observed in colored moving-average noise.

The observation model is

    y(n, m) = sum_i rho_i * cos(omega_i * n + upsilon_i * m + phi_i) + w(n, m)

on an N-by-M lattice, where ``w`` is a moving-average field driven by i.i.d.
innovations on a finite non-symmetrical half-plane (NSHP) or quarter-plane
support.  This module holds the value types of that model together with the
closed-form quantities derived from the noise coefficients: the spectral
density and the constant that scales the order-selection penalty.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .exceptions import InvalidModelError

__all__ = [
    "RHO_MAX",
    "TWO_PI",
    "DEFAULT_MIN_FREQ_SEP",
    "SupportKind",
    "InnovationLaw",
    "SinusoidParams",
    "ParamVector",
    "MaCoefficients",
    "InnovationSpec",
    "Field2D",
    "min_freq_sep_for_grid",
    "freq_distance",
    "spectral_density",
    "noise_penalty_constant",
]

TWO_PI = 2.0 * math.pi

# Amplitudes are assumed bounded; this is a generous engineering default.
RHO_MAX = 1e6

# Minimum spacing between component frequencies (max-metric, radians) when no
# lattice is attached.  Grids use min_freq_sep_for_grid instead.
DEFAULT_MIN_FREQ_SEP = 1e-3


def min_freq_sep_for_grid(n_rows: int, n_cols: int) -> float:
    """Smallest allowed frequency spacing for components fit on an
    ``n_rows``-by-``n_cols`` lattice: four unpadded Fourier bins."""
    return TWO_PI * 4.0 / max(n_rows, n_cols)


def freq_distance(f1, f2) -> float:
    """Max-metric distance between two frequency pairs, each coordinate taken
    circularly modulo 2*pi."""
    d0 = abs(f1[0] - f2[0]) % TWO_PI
    d1 = abs(f1[1] - f2[1]) % TWO_PI
    return max(min(d0, TWO_PI - d0), min(d1, TWO_PI - d1))


class SupportKind(enum.Enum):
    """Shape of the finite moving-average coefficient support."""

    NSHP = "nshp"
    QUARTER_PLANE = "quarter_plane"

    @classmethod
    def parse(cls, text: str) -> "SupportKind":
        key = str(text).strip().lower().replace("-", "_")
        aliases = {
            "nshp": cls.NSHP,
            "half_plane": cls.NSHP,
            "quarter_plane": cls.QUARTER_PLANE,
            "quarterplane": cls.QUARTER_PLANE,
            "qp": cls.QUARTER_PLANE,
        }
        if key not in aliases:
            raise InvalidModelError(f"unknown support kind: {text!r}")
        return aliases[key]


class InnovationLaw(enum.Enum):
    """Supported innovation distributions.  All are zero mean with variance
    exactly sigma2, and all have finite moments of every order."""

    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    LAPLACE = "laplace"

    @classmethod
    def parse(cls, text: str) -> "InnovationLaw":
        key = str(text).strip().lower()
        for law in cls:
            if law.value == key:
                return law
        raise InvalidModelError(f"unknown innovation law: {text!r}")


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidModelError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SinusoidParams:
    """One real cosine component rho * cos(omega*n + upsilon*m + phi).

    Parameters
    ----------
    rho : float
        Amplitude, in (0, RHO_MAX].
    omega, upsilon : float
        Spatial frequencies in radians per sample, each in the open
        interval (0, 2*pi).
    phi : float
        Phase in [0, 2*pi).
    """

    rho: float
    omega: float
    upsilon: float
    phi: float

    def __post_init__(self):
        rho = _require_finite("rho", self.rho)
        if not 0.0 < rho <= RHO_MAX:
            raise InvalidModelError(f"rho must be in (0, {RHO_MAX:g}], got {rho!r}")
        for name in ("omega", "upsilon"):
            val = _require_finite(name, getattr(self, name))
            if not 0.0 < val < TWO_PI:
                raise InvalidModelError(f"{name} must lie in the open interval (0, 2*pi), got {val!r}")
        phi = _require_finite("phi", self.phi)
        if not 0.0 <= phi < TWO_PI:
            raise InvalidModelError(f"phi must lie in [0, 2*pi), got {phi!r}")

    @classmethod
    def normalized(cls, rho: float, omega: float, upsilon: float, phi: float) -> "SinusoidParams":
        """Build a component in canonical form: a negative amplitude is
        absorbed into the phase (rho*cos(x+phi) == -rho*cos(x+phi+pi)), and
        the phase is wrapped into [0, 2*pi)."""
        rho = float(rho)
        phi = float(phi)
        if rho < 0.0:
            rho = -rho
            phi = phi + math.pi
        return cls(rho, float(omega), float(upsilon), phi % TWO_PI)

    @classmethod
    def from_cartesian(cls, a: float, b: float, omega: float, upsilon: float) -> "SinusoidParams":
        """Convert a*cos + b*sin regression coefficients at a fixed frequency
        into amplitude/phase form."""
        rho = math.hypot(a, b)
        phi = math.atan2(-b, a) % TWO_PI
        return cls(rho, float(omega), float(upsilon), phi)

    @property
    def frequency(self) -> tuple[float, float]:
        return (self.omega, self.upsilon)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.rho, self.omega, self.upsilon, self.phi)


@dataclass(frozen=True)
class ParamVector:
    """Ordered collection of sinusoid components (the length-k parameter
    vector of the regression model).

    Frequency pairs must be pairwise separated by at least ``min_freq_sep``
    in the circular max-metric.  When ``is_canonical`` is set the components
    must additionally be sorted by nonincreasing amplitude.
    """

    components: tuple[SinusoidParams, ...] = ()
    min_freq_sep: float = field(default=DEFAULT_MIN_FREQ_SEP, compare=False)
    is_canonical: bool = field(default=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            if not isinstance(c, SinusoidParams):
                raise InvalidModelError("components must be SinusoidParams instances")
        sep = float(self.min_freq_sep)
        if sep <= 0.0:
            raise InvalidModelError("min_freq_sep must be positive")
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                d = freq_distance(comps[i].frequency, comps[j].frequency)
                if d < sep:
                    raise InvalidModelError(
                        f"components {i} and {j} have frequency distance {d:.3g} "
                        f"< minimum separation {sep:.3g}"
                    )
        if self.is_canonical:
            rhos = [c.rho for c in comps]
            if any(rhos[i] < rhos[i + 1] for i in range(len(rhos) - 1)):
                raise InvalidModelError("canonical ParamVector must be sorted by descending amplitude")

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[SinusoidParams]:
        return iter(self.components)

    def __getitem__(self, i: int) -> SinusoidParams:
        return self.components[i]

    def canonicalized(self) -> "ParamVector":
        """Return a copy sorted by descending amplitude (ties broken by
        frequency) and flagged canonical."""
        comps = sorted(self.components, key=lambda c: (-c.rho, c.omega, c.upsilon))
        return ParamVector(tuple(comps), min_freq_sep=self.min_freq_sep, is_canonical=True)

    def frequencies(self) -> np.ndarray:
        """Component frequencies as a (k, 2) array of (omega, upsilon) rows."""
        return np.array([[c.omega, c.upsilon] for c in self.components], dtype=float).reshape(-1, 2)

    def amplitudes(self) -> np.ndarray:
        return np.array([c.rho for c in self.components], dtype=float)

    def to_jsonable(self) -> dict:
        return {"components": [list(c.as_tuple()) for c in self.components]}

    @classmethod
    def from_jsonable(cls, doc, min_freq_sep: float = DEFAULT_MIN_FREQ_SEP) -> "ParamVector":
        if isinstance(doc, Mapping):
            rows = doc.get("components", [])
        else:
            rows = doc
        comps = tuple(SinusoidParams(*map(float, row)) for row in rows)
        return cls(comps, min_freq_sep=min_freq_sep)


def _nshp_contains(r: int, s: int, extent_k: int, extent_l: int) -> bool:
    if r == 0:
        return 0 <= s <= extent_l
    return 0 < r <= extent_k and -extent_l <= s <= extent_l


def _qp_contains(r: int, s: int, extent_k: int, extent_l: int) -> bool:
    return 0 <= r <= extent_k and 0 <= s <= extent_l


@dataclass(frozen=True, eq=False)
class MaCoefficients:
    """Finite-support moving-average coefficients a(r, s) with innovation
    variance sigma2.

    The support is either the finite NSHP set
    ``{r=0, 0<=s<=extent_l} U {0<r<=extent_k, -extent_l<=s<=extent_l}``
    or the quarter plane ``{0<=r<=extent_k, 0<=s<=extent_l}``.  Every listed
    coefficient must lie inside the declared support, all values must be
    finite, and at least one must be nonzero.
    """

    support_kind: SupportKind
    extent_k: int
    extent_l: int
    coeffs: Mapping[tuple[int, int], float]
    sigma2: float

    def __post_init__(self):
        if not isinstance(self.support_kind, SupportKind):
            object.__setattr__(self, "support_kind", SupportKind.parse(self.support_kind))
        ek, el = int(self.extent_k), int(self.extent_l)
        if ek < 0 or el < 0:
            raise InvalidModelError("extents must be nonnegative")
        object.__setattr__(self, "extent_k", ek)
        object.__setattr__(self, "extent_l", el)
        contains = _nshp_contains if self.support_kind is SupportKind.NSHP else _qp_contains
        clean: dict[tuple[int, int], float] = {}
        for (r, s), a in dict(self.coeffs).items():
            r, s = int(r), int(s)
            if not contains(r, s, ek, el):
                raise InvalidModelError(
                    f"coefficient index ({r}, {s}) lies outside the declared "
                    f"{self.support_kind.value} support with extents ({ek}, {el})"
                )
            clean[(r, s)] = _require_finite(f"a({r},{s})", a)
        if not any(a != 0.0 for a in clean.values()):
            raise InvalidModelError("at least one MA coefficient must be nonzero")
        object.__setattr__(self, "coeffs", clean)
        s2 = _require_finite("sigma2", self.sigma2)
        if s2 <= 0.0:
            raise InvalidModelError("sigma2 must be positive")
        object.__setattr__(self, "sigma2", s2)

    @classmethod
    def white(cls, sigma2: float = 1.0, support_kind: SupportKind = SupportKind.NSHP) -> "MaCoefficients":
        return cls(support_kind, 0, 0, {(0, 0): 1.0}, sigma2)

    def items(self) -> Iterable[tuple[tuple[int, int], float]]:
        return self.coeffs.items()

    def values_array(self) -> np.ndarray:
        return np.array(list(self.coeffs.values()), dtype=float)

    def sum_abs(self) -> float:
        return float(np.abs(self.values_array()).sum())

    def sum_sq(self) -> float:
        return float((self.values_array() ** 2).sum())

    def noise_variance(self) -> float:
        """Variance of the filtered noise field: sigma2 * sum a(r,s)^2."""
        return self.sigma2 * self.sum_sq()

    def covariance(self, p: int, q: int) -> float:
        """Autocovariance of the noise field at lag (p, q):
        sigma2 * sum_{r,s} a(r, s) * a(r+p, s+q)."""
        acc = 0.0
        for (r, s), a in self.coeffs.items():
            acc += a * self.coeffs.get((r + p, s + q), 0.0)
        return self.sigma2 * acc

    def to_jsonable(self) -> dict:
        rows = [[r, s, a] for (r, s), a in sorted(self.coeffs.items())]
        return {
            "support_kind": self.support_kind.value,
            "extent_k": self.extent_k,
            "extent_l": self.extent_l,
            "coeffs": rows,
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_jsonable(cls, doc: Mapping) -> "MaCoefficients":
        coeffs = {(int(r), int(s)): float(a) for r, s, a in doc["coeffs"]}
        return cls(
            SupportKind.parse(doc["support_kind"]),
            int(doc["extent_k"]),
            int(doc["extent_l"]),
            coeffs,
            float(doc["sigma2"]),
        )


@dataclass(frozen=True)
class InnovationSpec:
    """Law, variance and master seed of the i.i.d. innovation field."""

    distribution: InnovationLaw
    sigma2: float
    master_seed: int

    def __post_init__(self):
        if not isinstance(self.distribution, InnovationLaw):
            object.__setattr__(self, "distribution", InnovationLaw.parse(self.distribution))
        s2 = _require_finite("sigma2", self.sigma2)
        if s2 <= 0.0:
            raise InvalidModelError("sigma2 must be positive")
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def to_jsonable(self) -> dict:
        return {
            "distribution": self.distribution.value,
            "sigma2": self.sigma2,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_jsonable(cls, doc: Mapping, default_sigma2: float | None = None) -> "InnovationSpec":
        sigma2 = doc.get("sigma2", default_sigma2)
        if sigma2 is None:
            raise InvalidModelError("innovation sigma2 missing and no default available")
        return cls(InnovationLaw.parse(doc["distribution"]), float(sigma2), int(doc["master_seed"]))


@dataclass(frozen=True, eq=False)
class Field2D:
    """A real N-by-M lattice of samples.

    ``origin`` gives the absolute lattice coordinates of ``values[0, 0]`` so
    that extended grids with negative indices (as needed by the MA filter)
    can be represented.  The array is copied and frozen at construction.
    """

    values: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 2:
            raise InvalidModelError(f"field values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidModelError("field must have at least one row and one column")
        if not np.all(np.isfinite(arr)):
            raise InvalidModelError("field values must all be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def sample_count(self) -> int:
        return self.values.size

    def row_range(self) -> tuple[int, int]:
        """Inclusive absolute row range covered by this field."""
        return (self.origin[0], self.origin[0] + self.n_rows - 1)

    def col_range(self) -> tuple[int, int]:
        return (self.origin[1], self.origin[1] + self.n_cols - 1)

    def mean_square(self) -> float:
        return float(np.mean(self.values**2))


def spectral_density(ma: MaCoefficients, omega, upsilon):
    """Spectral density of the MA noise field.

    Evaluates ``sigma2 * |sum_{(r,s)} a(r,s) * exp(j*(omega*r + upsilon*s))|**2``
    at the given frequencies (scalars or broadcastable arrays).  The result is
    nonnegative and 2*pi-periodic in each argument.
    """
    w = np.asarray(omega, dtype=float)
    v = np.asarray(upsilon, dtype=float)
    acc = np.zeros(np.broadcast(w, v).shape, dtype=complex)
    for (r, s), a in ma.coeffs.items():
        if a != 0.0:
            acc = acc + a * np.exp(1j * (w * r + v * s))
    out = ma.sigma2 * np.abs(acc) ** 2
    if np.isscalar(omega) and np.isscalar(upsilon):
        return float(out)
    return out


def noise_penalty_constant(ma: MaCoefficients) -> float:
    """Constant scaling the order-selection penalty thresholds.

    For a finite support this is ``(sum |a(r,s)|)**2 / sum a(r,s)**2``, i.e.
    the double sum ``sum_{r,s} sum_{q,t} |a(r,s)*a(q,t)|`` over the squared
    coefficient mass.  It is at least 1, with equality exactly when a single
    coefficient is nonzero, and is invariant under global scaling and sign
    flips of the coefficients.
    """
    vals = ma.values_array()
    s_sq = float((vals**2).sum())
    if s_sq == 0.0:
        raise InvalidModelError("all MA coefficients are zero")
    s_abs = float(np.abs(vals).sum())
    return s_abs**2 / s_sq
