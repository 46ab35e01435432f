"""User-RIS and RIS-BS channels, region classification and the signal model."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .geometry import (
    SPEED_OF_LIGHT,
    CartesianPoint,
    GeometryError,
    RisGeometry,
    SphericalLocation,
    cartesian_to_spherical,
    distances,
)

#: Maximum phase error separating the near and far field.
PHASE_ERROR_THRESHOLD = np.pi / 8


class Region(enum.Enum):
    NEAR_FIELD = "near"
    FAR_FIELD = "far"


@dataclass(frozen=True)
class SignalModelParams:
    """Link-budget and waveform parameters.

    ``noise_power`` is the linear noise variance; the protocol usually
    overrides it from a target SNR via :func:`dataclasses.replace`.
    """

    gain_t: float = 1.0
    symbol: complex = 1.0 + 0.0j
    noise_power: float = 0.0
    frequency: float = 28e9

    def __post_init__(self):
        if not self.gain_t > 0:
            raise ValueError(f"transmit gain must be positive, got {self.gain_t}")
        if not self.noise_power >= 0:
            raise ValueError(f"noise power must be non-negative, got {self.noise_power}")
        if not self.frequency > 0:
            raise ValueError(f"carrier frequency must be positive, got {self.frequency}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    def with_noise(self, noise_power: float) -> "SignalModelParams":
        return replace(self, noise_power=float(noise_power))


def spherical_wave(d, gain: float, wavelength: float) -> np.ndarray:
    """Free-space spherical-wave coefficient for distance(s) ``d``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise GeometryError("zero distance between user and an RIS element")
    return (np.sqrt(gain) * wavelength / (4 * np.pi * d)) * np.exp(
        -2j * np.pi * d / wavelength
    )


def nf_channels(geom: RisGeometry, R, theta, phi, params: SignalModelParams) -> np.ndarray:
    """Near-field channels for broadcast arrays of locations; element axis last."""
    return spherical_wave(distances(geom, R, theta, phi), params.gain_t, geom.wavelength)


def ff_channels(geom: RisGeometry, theta, phi, R, params: SignalModelParams) -> np.ndarray:
    """Plane-wave channels for broadcast arrays of angles at range(s) ``R``."""
    R = np.asarray(R, dtype=float)[..., None]
    if np.any(R <= 0):
        raise GeometryError("far-field range must be positive")
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    lam = geom.wavelength
    lin = R - geom.y * (np.sin(theta) * np.sin(phi)) - geom.z * np.cos(theta)
    return (np.sqrt(params.gain_t) * lam / (4 * np.pi * R)) * np.exp(-2j * np.pi * lin / lam)


def nf_channel(geom: RisGeometry, p: SphericalLocation, params: SignalModelParams) -> np.ndarray:
    return nf_channels(geom, p.R, p.theta, p.phi, params)


def ff_channel(geom: RisGeometry, theta: float, phi: float, R: float,
               params: SignalModelParams) -> np.ndarray:
    return ff_channels(geom, theta, phi, R, params)


def phase_errors(geom: RisGeometry, R, theta, phi) -> np.ndarray:
    """Maximum plane-wave phase error for 1-D arrays of locations."""
    R, theta, phi = np.broadcast_arrays(
        np.atleast_1d(np.asarray(R, dtype=float)),
        np.atleast_1d(np.asarray(theta, dtype=float)),
        np.atleast_1d(np.asarray(phi, dtype=float)),
    )
    y = np.ascontiguousarray(geom.y)
    z = np.ascontiguousarray(geom.z)
    return kernels.max_phase_errors(y, z, geom.wavelength, R.ravel(), theta.ravel(), phi.ravel())


def max_phase_error(geom: RisGeometry, p: SphericalLocation) -> float:
    return float(phase_errors(geom, p.R, p.theta, p.phi)[0])


def classify_region(geom: RisGeometry, p: SphericalLocation) -> Region:
    # ties at exactly pi/8 go to the cheaper far-field model
    if max_phase_error(geom, p) > PHASE_ERROR_THRESHOLD:
        return Region.NEAR_FIELD
    return Region.FAR_FIELD


def bs_ris_channel(geom: RisGeometry, bs_position: CartesianPoint, gain_r: float = 1.0,
                   frequency: float | None = None) -> np.ndarray:
    """Exact spherical-wave LOS channel from the RIS elements to the BS.

    The BS must sit in front of the RIS (``x > 0``).
    """
    if bs_position[0] <= 0:
        raise GeometryError("BS must lie in front of the RIS plane (x > 0)")
    loc = cartesian_to_spherical(CartesianPoint(*bs_position))
    freq = SPEED_OF_LIGHT / geom.wavelength if frequency is None else frequency
    return nf_channel(geom, loc, SignalModelParams(gain_t=gain_r, frequency=freq))


def cascaded_channel(h_A: np.ndarray, h_t: np.ndarray) -> np.ndarray:
    h_A = np.asarray(h_A)
    h_t = np.asarray(h_t)
    if h_A.shape[-1] != h_t.shape[-1]:
        raise ValueError(f"length mismatch: {h_A.shape[-1]} vs {h_t.shape[-1]}")
    return h_A * h_t


def received_signal(beta: np.ndarray, h: np.ndarray, s: complex = 1.0,
                    noise_sample: complex = 0.0) -> complex:
    beta = np.asarray(beta)
    h = np.asarray(h)
    if beta.shape != h.shape:
        raise ValueError(f"length mismatch: {beta.shape} vs {h.shape}")
    return complex(beta @ h * s + noise_sample)


def complex_noise(rng: np.random.Generator, noise_power: float, size=None):
    """Circularly-symmetric complex Gaussian samples with variance ``noise_power``."""
    scale = np.sqrt(noise_power / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
