"""Channel derivatives, Fisher information and Cramér-Rao bounds.

Near-field parameters are ordered ``(R, theta, phi)``; far-field parameters
``(theta, phi)``.

By default the near-field derivatives differentiate only the phase of each
element's spherical-wave term and keep the ``1/d`` amplitude fixed. Pass
``full=True`` to include the amplitude derivative as well.
"""
from __future__ import annotations

import numpy as np

from .channel import SignalModelParams, ff_channels, nf_channels
from .geometry import GeometryError, RisGeometry, SphericalLocation, distances

DEFAULT_CONDITION_CAP = 1e12


class SingularFisherError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        super().__init__(f"Fisher information is singular (condition number {condition:.3e})")
        self.condition = condition


def distance_gradients(geom: RisGeometry, p: SphericalLocation) -> tuple[np.ndarray, np.ndarray]:
    """Element distances and their ``(R, theta, phi)`` partials, shapes ``(N,)`` and ``(3, N)``."""
    R, th, ph = p.R, p.theta, p.phi
    d = distances(geom, R, th, ph)
    if np.any(d <= 0):
        raise GeometryError("user coincides with an RIS element")
    y, z = geom.y, geom.z
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    dR = (R - y * st * sp - z * ct) / d
    dth = (-R * y * ct * sp + R * z * st) / d
    dph = (-R * y * st * cp) / d
    return d, np.stack([dR, dth, dph])


def nf_channel_derivatives(geom: RisGeometry, p: SphericalLocation, params: SignalModelParams,
                           h_A: np.ndarray, full: bool = False) -> np.ndarray:
    """Partials of the cascaded near-field channel, shape ``(3, N)``."""
    d, grad_d = distance_gradients(geom, p)
    h = h_A * nf_channels(geom, p.R, p.theta, p.phi, params)
    factor = -2j * np.pi / geom.wavelength
    if full:
        factor = factor - 1.0 / d
    return h * factor * grad_d


def ff_channel_derivatives(geom: RisGeometry, theta: float, phi: float, R: float,
                           params: SignalModelParams, h_A: np.ndarray) -> np.ndarray:
    """Partials of the cascaded far-field channel w.r.t. ``(theta, phi)``, shape ``(2, N)``."""
    h = h_A * ff_channels(geom, theta, phi, R, params)
    y, z = geom.y, geom.z
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    factor = -2j * np.pi / geom.wavelength
    d_theta = -y * ct * sp + z * st
    # d/dphi of the plane-wave phase carries sin(theta), not cos(theta)
    d_phi = -y * st * cp
    return h * factor * np.stack([d_theta, d_phi])


def mean_derivatives(derivs: np.ndarray, betas: np.ndarray, s: complex = 1.0) -> np.ndarray:
    """``dmu_q / dp_i = beta_q^T dh/dp_i s`` as a ``(k, P)`` matrix."""
    return np.atleast_2d(betas) @ derivs.T * s


def fisher_matrix(derivs: np.ndarray, betas: np.ndarray, s: complex, noise_power: float) -> np.ndarray:
    """Fisher information accumulated over all phase vectors in ``betas``."""
    if not noise_power > 0:
        raise ValueError("noise power must be positive for Fisher information")
    M = mean_derivatives(derivs, betas, s)
    J = (2.0 / noise_power) * (M.conj().T @ M).real
    return 0.5 * (J + J.T)


def _checked_inverse(J: np.ndarray, cond_cap: float) -> np.ndarray:
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularFisherError(float(cond))
    return np.linalg.inv(J)


def crb_values(J: np.ndarray, cond_cap: float = DEFAULT_CONDITION_CAP) -> np.ndarray:
    return np.diag(_checked_inverse(J, cond_cap)).copy()


def check_weights(weights, n_params: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_params,):
        raise ValueError(f"expected {n_params} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be non-negative with at least one positive")
    return w


def weighted_crb_objective(J: np.ndarray, weights, ridge: float = 0.0,
                           cond_cap: float = DEFAULT_CONDITION_CAP) -> float:
    """``sum_i w_i (J + ridge I)^{-1}_{ii}``."""
    w = np.asarray(weights, dtype=float)
    Jr = J + ridge * np.eye(len(J)) if ridge else J
    return float(w @ np.diag(_checked_inverse(Jr, cond_cap)))
