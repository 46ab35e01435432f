"""Candidate-location grids and the atom-channel dictionary.

Columns ``0 .. S-1`` are near-field atoms sampled over ``(R, theta, phi)``;
the remaining ``n_theta * n_phi`` columns are far-field atoms evaluated at a
single reference range ``R_0``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import (
    PHASE_ERROR_THRESHOLD,
    Region,
    SignalModelParams,
    ff_channels,
    nf_channels,
    phase_errors,
)
from .geometry import PHI_MIN, RisGeometry

VARIANTS = ("unified", "nf-only", "ff-only")

DICTIONARY_FORMAT_VERSION = 1


class ConfigurationError(ValueError):
    """Grid settings that cannot produce a usable dictionary."""


@dataclass(frozen=True)
class GridSpec:
    """Sampling settings. Lengths are in metres.

    ``range_min``/``range_step`` default to ``10 lambda`` and ``5 lambda`` when
    left as ``None``. ``range_max`` defaults to the first sampled range where
    every sampled direction is far-field; ``ref_range`` to twice the worst-case
    near/far boundary. ``coverage_range`` bounds the near-field-only variant and
    defaults to ``3 * ref_range``.
    """

    n_theta: int = 10
    n_phi: int = 10
    range_step: float | None = None
    range_min: float | None = None
    range_max: float | None = None
    ref_range: float | None = None
    coverage_range: float | None = None
    ref_range_floor: float = 1.0

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ConfigurationError("angle grid sizes must be positive")
        if self.range_step is not None and not self.range_step > 0:
            raise ConfigurationError("range step must be positive")
        if (self.range_min is not None and self.range_max is not None
                and not self.range_min < self.range_max):
            raise ConfigurationError("range_min must be below range_max")

    def resolved_step(self, geom: RisGeometry) -> float:
        return self.range_step if self.range_step is not None else 5 * geom.wavelength

    def resolved_min(self, geom: RisGeometry) -> float:
        return self.range_min if self.range_min is not None else 10 * geom.wavelength


def build_angle_grid(spec: GridSpec) -> np.ndarray:
    """Cell-centre ``(theta, phi)`` pairs, shape ``(n_theta * n_phi, 2)``.

    Ordering is phi-major: phi is the outer (slow) index.
    """
    theta = (np.arange(spec.n_theta) + 0.5) * np.pi / spec.n_theta
    phi = PHI_MIN + (np.arange(spec.n_phi) + 0.5) * np.pi / spec.n_phi
    pp, tt = np.meshgrid(phi, theta, indexing="ij")
    return np.column_stack([tt.ravel(), pp.ravel()])


def boundary_range(geom: RisGeometry, theta: float, phi: float) -> float:
    """Range where the maximum phase error crosses the near/far threshold.

    Returns 0 when no near-field region exists along this direction.
    """

    def excess(R):
        return phase_errors(geom, R, theta, phi)[0] - PHASE_ERROR_THRESHOLD

    lo = max(geom.max_radius, 1e-3 * geom.wavelength)
    if excess(lo) <= 0:
        return 0.0
    hi = 2 * lo
    while excess(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise ArithmeticError("near/far boundary bisection did not bracket a root")
    return brentq(excess, lo, hi, xtol=1e-12 * hi, rtol=1e-14, maxiter=200)


def choose_ff_reference_range(geom: RisGeometry, spec: GridSpec) -> float:
    """Twice the worst boundary range over the sampled directions."""
    if spec.ref_range is not None:
        return float(spec.ref_range)
    angles = build_angle_grid(spec)
    worst = max(boundary_range(geom, t, p) for t, p in angles)
    if worst == 0.0:
        return float(spec.ref_range_floor)
    return 2.0 * worst


def _range_samples(geom: RisGeometry, spec: GridSpec, upper: float | None) -> np.ndarray:
    r0 = spec.resolved_min(geom)
    step = spec.resolved_step(geom)
    if upper is not None:
        count = int(np.floor((upper - r0) / step + 1e-9)) + 1
        return r0 + step * np.arange(max(count, 0))
    # grow until every sampled direction is far-field
    angles = build_angle_grid(spec)
    ranges = []
    R = r0
    while True:
        err = phase_errors(geom, np.full(len(angles), R), angles[:, 0], angles[:, 1])
        if np.all(err <= PHASE_ERROR_THRESHOLD):
            ranges.append(R)
            return np.array(ranges)
        ranges.append(R)
        R = r0 + step * len(ranges)


def build_nf_grid(geom: RisGeometry, spec: GridSpec, *, filter_region: bool = True,
                  upper: float | None = None) -> np.ndarray:
    """Near-field candidate locations, shape ``(S, 3)`` columns ``(R, theta, phi)``.

    Ordering is range-major, then the angle-grid order. With ``filter_region``
    only points classified near-field are kept.
    """
    angles = build_angle_grid(spec)
    ranges = _range_samples(geom, spec, spec.range_max if upper is None else upper)
    R = np.repeat(ranges, len(angles))
    th = np.tile(angles[:, 0], len(ranges))
    ph = np.tile(angles[:, 1], len(ranges))
    pts = np.column_stack([R, th, ph])
    if filter_region and len(pts):
        keep = phase_errors(geom, R, th, ph) > PHASE_ERROR_THRESHOLD
        pts = pts[keep]
    if len(pts) == 0:
        raise ConfigurationError("near-field grid is empty for this geometry")
    return pts


@dataclass(frozen=True, eq=False)
class Dictionary:
    atoms: np.ndarray
    nf_locations: np.ndarray
    ff_angles: np.ndarray
    ref_range: float
    variant: str = "unified"
    meta: dict = field(default_factory=dict)

    @property
    def n_near(self) -> int:
        return len(self.nf_locations)

    @property
    def n_columns(self) -> int:
        return self.atoms.shape[1]

    def region_of(self, i: int) -> Region:
        if not 0 <= i < self.n_columns:
            raise IndexError(i)
        return Region.NEAR_FIELD if i < self.n_near else Region.FAR_FIELD

    def location(self, i: int) -> tuple[float, ...]:
        """``(R, theta, phi)`` for near-field columns, ``(theta, phi)`` otherwise."""
        if self.region_of(i) is Region.NEAR_FIELD:
            return tuple(float(v) for v in self.nf_locations[i])
        return tuple(float(v) for v in self.ff_angles[i - self.n_near])

    def save(self, path) -> None:
        """Write an ``.npz`` archive; ``header`` holds the JSON metadata."""
        header = dict(self.meta, format_version=DICTIONARY_FORMAT_VERSION,
                      ref_range=self.ref_range, variant=self.variant)
        with open(path, "wb") as fh:
            np.savez(fh, atoms=self.atoms, nf_locations=self.nf_locations,
                     ff_angles=self.ff_angles,
                     header=np.array(json.dumps(header, sort_keys=True)))

    @classmethod
    def load(cls, path) -> "Dictionary":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.pop("format_version") != DICTIONARY_FORMAT_VERSION:
                raise ValueError("unsupported dictionary format version")
            ref_range = header.pop("ref_range")
            variant = header.pop("variant")
            return cls(data["atoms"], data["nf_locations"], data["ff_angles"],
                       ref_range, variant, header)


def build_dictionary(geom: RisGeometry, spec: GridSpec, params: SignalModelParams,
                     variant: str = "unified") -> Dictionary:
    """Assemble ``F = [F_near, F_far]`` for one estimator variant.

    ``nf-only`` samples near-field atoms out to the coverage range without the
    region filter; ``ff-only`` keeps only far-field atoms.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    ref_range = choose_ff_reference_range(geom, spec)
    angles = build_angle_grid(spec)
    if variant == "unified":
        nf = build_nf_grid(geom, spec)
        ff = angles
    elif variant == "nf-only":
        cover = spec.coverage_range if spec.coverage_range is not None else 3 * ref_range
        nf = build_nf_grid(geom, spec, filter_region=False, upper=cover)
        ff = np.empty((0, 2))
    else:
        nf = np.empty((0, 3))
        ff = angles
    cols = []
    if len(nf):
        cols.append(nf_channels(geom, nf[:, 0], nf[:, 1], nf[:, 2], params))
    if len(ff):
        cols.append(ff_channels(geom, ff[:, 0], ff[:, 1], ref_range, params))
    atoms = np.ascontiguousarray(np.concatenate(cols, axis=0).T)
    meta = {"geometry": asdict(geom), "grid": asdict(spec),
            "gain_t": params.gain_t, "frequency": params.frequency}
    return Dictionary(atoms, nf, ff, float(ref_range), variant, meta)
