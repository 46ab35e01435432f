"""Exhaustive dictionary search for the user location."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import Region
from .dictionary import Dictionary


# losses this close to zero (relative to the data norm) are exact fits up to
# rounding and compare as ties
EXACT_FIT_TOL = 1e-13


class DegenerateColumnError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    """Received signals ``g`` (shape ``(k,)``) and the phases that produced them."""

    g: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.g, dtype=complex))
        betas = np.atleast_2d(np.asarray(self.betas, dtype=complex))
        if g.shape[0] != betas.shape[0]:
            raise ValueError(f"{g.shape[0]} signals but {betas.shape[0]} phase vectors")
        if g.shape[0] == 0:
            raise ValueError("empty observation")
        if not np.allclose(np.abs(betas), 1.0, atol=1e-9):
            raise ValueError("phase vectors must be unit-modulus")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "betas", betas)

    @property
    def k(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class Estimate:
    region: Region
    location: tuple
    loss: float
    index: int


def predicted_signals(dictionary: Dictionary, obs: Observation, h_A: np.ndarray,
                      s: complex = 1.0) -> np.ndarray:
    """Matrix ``A`` with ``A[q, i] = beta_q^T diag(h_A) F_i s``, shape ``(k, C)``."""
    if obs.betas.shape[1] != dictionary.atoms.shape[0] or len(h_A) != dictionary.atoms.shape[0]:
        raise ValueError("phase / RIS-BS channel length does not match the dictionary")
    return ((obs.betas * h_A) @ dictionary.atoms) * s


class SignalPredictor:
    """Row-incremental version of :func:`predicted_signals`.

    ``diag(h_A) F s`` is formed once and one row is appended per cycle, so
    ``k`` cycles cost ``O(k N C)`` in total instead of ``O(k^2 N C)``.
    """

    def __init__(self, dictionary: Dictionary, h_A: np.ndarray, s: complex = 1.0):
        self._weighted = np.ascontiguousarray((h_A[:, None] * dictionary.atoms) * s)
        self._rows: list[np.ndarray] = []

    def extend(self, betas: np.ndarray) -> np.ndarray:
        betas = np.atleast_2d(betas)
        for beta in betas[len(self._rows):]:
            self._rows.append(beta @ self._weighted)
        return np.array(self._rows[: len(betas)])


def nf_loss(A: np.ndarray, g: np.ndarray, i: int, n_near: int) -> float:
    if not 0 <= i < n_near:
        raise IndexError(f"column {i} is not a near-field column")
    return float(np.linalg.norm(g - A[:, i]))


def ff_amplitude(A: np.ndarray, g: np.ndarray, i: int) -> complex:
    col = A[:, i]
    nrm = np.vdot(col, col).real
    if nrm == 0:
        raise DegenerateColumnError(f"column {i} of the predicted signals is zero")
    return complex(np.vdot(col, g) / nrm)


def ff_loss(A: np.ndarray, g: np.ndarray, i: int) -> float:
    return float(np.linalg.norm(g - ff_amplitude(A, g, i) * A[:, i]))


def estimate_location(dictionary: Dictionary, obs: Observation, h_A: np.ndarray,
                      s: complex = 1.0, predictor: SignalPredictor | None = None) -> Estimate:
    """Return the column with the smallest localization loss.

    Ties resolve to the lowest column index. Losses below
    ``EXACT_FIT_TOL * ||g||`` count as exact fits and tie at zero; with a
    single observation every far-field column fits exactly, so this keeps
    the first-cycle choice independent of summation order.
    """
    if predictor is None:
        A = predicted_signals(dictionary, obs, h_A, s)
    else:
        A = predictor.extend(obs.betas)
    losses = kernels.column_losses(A.T, obs.g, dictionary.n_near)
    losses[losses <= EXACT_FIT_TOL * np.linalg.norm(obs.g)] = 0.0
    i = int(np.argmin(losses))
    return Estimate(dictionary.region_of(i), dictionary.location(i), float(losses[i]), i)
