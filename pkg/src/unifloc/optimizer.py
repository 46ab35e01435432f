"""Phase-shift optimization on the complex circle manifold.

Minimises the weighted CRB of the next cycle over unit-modulus phase vectors
by Riemannian gradient descent: Euclidean (Wirtinger) gradient, tangent
projection, Armijo backtracking along the retraction curve, and elementwise
normalisation back onto the manifold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import Region, SignalModelParams
from .crb import (
    DEFAULT_CONDITION_CAP,
    SingularFisherError,
    ff_channel_derivatives,
    fisher_matrix,
    nf_channel_derivatives,
    weighted_crb_objective,
)
from .estimator import Estimate
from .geometry import RisGeometry, SphericalLocation

MANIFOLD_TOL = 1e-9
RIDGE_FRACTION = 1e-12
# the ridge keeps the condition number near 1/RIDGE_FRACTION, so the cap is relaxed
_RIDGED_CONDITION_CAP = 1e3 / RIDGE_FRACTION


class ManifoldError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    tolerance: float = 1e-8  # relative to the initial objective
    max_iterations: int = 500
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial step must be positive")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValueError("backtracking factor and Armijo constant must lie in (0, 1)")


class CrbProblem:
    """Weighted CRB after appending one candidate phase vector to a history.

    Parameters
    ----------
    derivs : ndarray, shape (P, N)
        Cascaded-channel partials at the estimated location.
    history : ndarray, shape (k, N)
        Phase vectors already used; may be empty.
    s : complex
        Transmitted symbol.
    noise_power : float
        Noise variance.
    weights : array_like, shape (P,)
        CRB weights.
    ridge : float
        Diagonal loading applied to every Fisher matrix this problem builds.
    """

    def __init__(self, derivs, history, s, noise_power, weights, ridge=0.0):
        self.derivs = np.asarray(derivs, dtype=complex)
        self.n_params, self.n_elements = self.derivs.shape
        self.ds = np.ascontiguousarray(self.derivs * s)
        self.noise_power = float(noise_power)
        self.weights = np.asarray(weights, dtype=float)
        history = np.asarray(history, dtype=complex).reshape(-1, self.n_elements)
        self.history = history
        if len(history):
            self.J_history = np.ascontiguousarray(fisher_matrix(self.derivs, history, s, noise_power))
        else:
            self.J_history = np.zeros((self.n_params, self.n_params))
        self.ridge = float(ridge)

    def fisher(self, beta: np.ndarray) -> np.ndarray:
        m = self.ds @ beta
        J = self.J_history + (2.0 / self.noise_power) * np.outer(m.conj(), m).real
        return 0.5 * (J + J.T)

    def freeze_ridge(self, beta: np.ndarray) -> float:
        self.ridge = RIDGE_FRACTION * float(np.trace(self.fisher(beta)))
        return self.ridge

    @property
    def condition_cap(self) -> float:
        return _RIDGED_CONDITION_CAP if self.ridge else DEFAULT_CONDITION_CAP

    def objective(self, beta: np.ndarray) -> float:
        val, cond = kernels.crb_objective(self.ds, self.J_history, beta, self.weights,
                                          self.ridge, 2.0 / self.noise_power)
        if not cond <= self.condition_cap:
            raise SingularFisherError(float(cond))
        return val

    def reported_objective(self, beta: np.ndarray) -> float:
        """Objective recomputed through :func:`weighted_crb_objective`."""
        return weighted_crb_objective(self.fisher(beta), self.weights, self.ridge,
                                      cond_cap=self.condition_cap)

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        """Euclidean gradient ``2 df/d(beta*)`` of :meth:`objective`."""
        return euclidean_gradient(self, beta)


def euclidean_gradient(problem: CrbProblem, beta: np.ndarray) -> np.ndarray:
    """Steepest-ascent direction ``2 df/d(beta*)`` of the weighted CRB.

    With ``M = J^-1 W J^-1`` and ``a = D s beta`` the Wirtinger derivative is
    ``df/d(beta*) = -(2/sigma^2) conj(D s)^T M a``; first-order changes obey
    ``df = Re(grad^H dbeta)``.
    """
    if not np.any(problem.weights):
        return np.zeros(problem.n_elements, dtype=complex)
    grad, cond = kernels.crb_gradient(problem.ds, problem.J_history, beta, problem.weights,
                                      problem.ridge, 2.0 / problem.noise_power)
    if not cond <= problem.condition_cap:
        raise SingularFisherError(float(cond))
    return grad


def riemannian_project(beta: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the tangent space at ``beta``."""
    if np.max(np.abs(np.abs(beta) - 1.0)) > MANIFOLD_TOL:
        raise ManifoldError("phase vector is off the complex circle manifold")
    return v - (v.conj() * beta).real * beta


def tangent_update(beta: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    return beta + step * direction


def retract(beta_bar: np.ndarray) -> np.ndarray:
    mag = np.abs(beta_bar)
    if np.any(mag == 0):
        raise ManifoldError("cannot retract a vector with zero entries")
    return beta_bar / mag


def random_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


@dataclass
class OptimizationResult:
    beta: np.ndarray
    objective: float
    initial_objective: float
    objectives: list = field(default_factory=list)  # accepted sequence, initial first
    iterations: int = 0
    converged: bool = False
    aborted: str | None = None


_ABORTS = {4: "Fisher information is singular during descent",
           5: "non-finite gradient"}


def optimize_phases(problem: CrbProblem, beta0: np.ndarray,
                    config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Descend the weighted CRB from ``beta0``; returns the best iterate.

    The first trial step in each iteration is scaled so that no element moves
    by more than ``config.initial_step`` along the tangent direction, which
    makes the step independent of the objective's overall scale. The loop
    itself runs in :func:`kernels.riemannian_descent`.
    """
    beta = np.ascontiguousarray(retract(np.asarray(beta0, dtype=complex)))
    if not problem.ridge:
        problem.freeze_ridge(beta)
    try:
        f = problem.objective(beta)
    except SingularFisherError as exc:
        return OptimizationResult(beta, np.nan, np.nan, aborted=str(exc))
    if not np.isfinite(f):
        return OptimizationResult(beta, f, f, aborted="non-finite initial objective")

    beta, f, objectives, iterations, status, cond = kernels.riemannian_descent(
        problem.ds, problem.J_history, beta, problem.weights, problem.ridge,
        2.0 / problem.noise_power, problem.condition_cap, f, config.tolerance * abs(f),
        config.max_iterations, config.initial_step, config.backtrack, config.armijo,
        config.max_backtracks)
    result = OptimizationResult(beta, f, float(objectives[0]), list(map(float, objectives)),
                                iterations, converged=status in (0, 2, 3))
    if status in _ABORTS:
        result.aborted = f"{_ABORTS[status]} (condition number {cond:.3e})"
    try:
        result.objective = problem.reported_objective(beta)
    except SingularFisherError:
        pass
    return result


def problem_for_estimate(geom: RisGeometry, estimate: Estimate, params: SignalModelParams,
                         h_A: np.ndarray, history: np.ndarray, noise_power: float,
                         weights_nf, weights_ff, ref_range: float,
                         full_derivatives: bool = False) -> CrbProblem:
    """Build the next-cycle CRB problem around a dictionary estimate.

    Far-field estimates carry no range; the dictionary reference range is
    used, which only rescales the objective.
    """
    if estimate.region is Region.NEAR_FIELD:
        p = SphericalLocation(*estimate.location)
        derivs = nf_channel_derivatives(geom, p, params, h_A, full=full_derivatives)
        weights = weights_nf
    else:
        theta, phi = estimate.location
        derivs = ff_channel_derivatives(geom, theta, phi, ref_range, params, h_A)
        weights = weights_ff
    return CrbProblem(derivs, history, params.symbol, noise_power, weights)
