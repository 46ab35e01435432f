"""K-cycle transmit / localize / optimize protocol simulation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    Region,
    SignalModelParams,
    classify_region,
    complex_noise,
    ff_channel,
    nf_channel,
    received_signal,
)
from .crb import (
    SingularFisherError,
    ff_channel_derivatives,
    fisher_matrix,
    nf_channel_derivatives,
    weighted_crb_objective,
)
from .dictionary import Dictionary
from .estimator import Estimate, Observation, SignalPredictor, estimate_location
from .geometry import RisGeometry, SphericalLocation
from .optimizer import OptimizerConfig, optimize_phases, problem_for_estimate, random_phases

TRACE_SCHEMA = "unifloc.trace"
TRACE_VERSION = 1

POLICIES = ("optimized", "random")
CHANNEL_MODELS = ("region-matched", "always-exact")


@dataclass(frozen=True)
class ProtocolConfig:
    """Settings for one protocol run.

    The timing fields are carried as metadata only; cycles advance logically.
    """

    K: int = 15
    snr_db: float = 10.0
    weights_nf: tuple = (1.0, 1.0, 1.0)
    weights_ff: tuple = (1.0, 1.0)
    policy: str = "optimized"
    channel_model: str = "region-matched"
    optimizer: OptimizerConfig = OptimizerConfig()
    full_derivatives: bool = False
    cache_predictions: bool = False
    cycle_duration: float = 1e-3
    transmit_duration: float = 1e-4
    estimate_duration: float = 1e-4

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not np.isfinite(self.snr_db):
            raise ValueError("SNR must be finite")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown phase policy {self.policy!r}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.channel_model!r}")


@dataclass
class CycleRecord:
    cycle: int
    beta: np.ndarray
    g: complex
    estimate: Estimate
    objective_before: float | None = None
    objective_after: float | None = None
    optimizer_iterations: int = 0
    fallback: str | None = None


@dataclass
class ProtocolTrace:
    true_location: SphericalLocation
    true_region: Region
    noise_power: float
    records: list = field(default_factory=list)
    final_crb: float = float("nan")

    @property
    def final_estimate(self) -> Estimate:
        return self.records[-1].estimate

    def to_jsonl(self) -> str:
        """Header line followed by one JSON object per cycle.

        Complex numbers are written as ``[re, im]`` pairs.
        """
        lines = [json.dumps({
            "type": "header", "schema": TRACE_SCHEMA, "version": TRACE_VERSION,
            "true_location": list(self.true_location.as_tuple()),
            "true_region": self.true_region.value,
            "noise_power": self.noise_power, "final_crb": self.final_crb,
        })]
        for r in self.records:
            lines.append(json.dumps({
                "type": "cycle", "cycle": r.cycle,
                "beta": [[b.real, b.imag] for b in r.beta],
                "g": [r.g.real, r.g.imag],
                "estimate": {"region": r.estimate.region.value,
                             "location": list(r.estimate.location),
                             "loss": r.estimate.loss, "index": r.estimate.index},
                "objective_before": r.objective_before,
                "objective_after": r.objective_after,
                "optimizer_iterations": r.optimizer_iterations,
                "fallback": r.fallback,
            }))
        return "\n".join(lines) + "\n"


def true_user_channel(geom: RisGeometry, p: SphericalLocation, params: SignalModelParams,
                      model: str = "region-matched") -> tuple[np.ndarray, Region]:
    region = classify_region(geom, p)
    if region is Region.NEAR_FIELD or model == "always-exact":
        return nf_channel(geom, p, params), region
    return ff_channel(geom, p.theta, p.phi, p.R, params), region


def noise_power_from_snr(h_A: np.ndarray, h_t: np.ndarray, snr_db: float,
                         s: complex = 1.0) -> float:
    """Noise variance giving ``snr_db`` relative to the all-ones-phase power."""
    p_signal = abs(np.sum(h_A * h_t) * s) ** 2
    if p_signal == 0:
        raise ValueError("reference signal power is zero")
    return p_signal / 10.0 ** (snr_db / 10.0)


def crb_at_truth(geom: RisGeometry, p: SphericalLocation, region: Region,
                 params: SignalModelParams, h_A: np.ndarray, betas: np.ndarray,
                 noise_power: float, config: ProtocolConfig) -> float:
    """Weighted CRB of the true location given every phase vector used."""
    if region is Region.NEAR_FIELD:
        derivs = nf_channel_derivatives(geom, p, params, h_A, full=config.full_derivatives)
        weights = config.weights_nf
    else:
        derivs = ff_channel_derivatives(geom, p.theta, p.phi, p.R, params, h_A)
        weights = config.weights_ff
    try:
        J = fisher_matrix(derivs, betas, params.symbol, noise_power or 1.0)
        return weighted_crb_objective(J, weights)
    except SingularFisherError:
        return float("inf")


def run_protocol(geom: RisGeometry, dictionary: Dictionary, h_A: np.ndarray,
                 params: SignalModelParams, true_location: SphericalLocation,
                 config: ProtocolConfig, seed) -> ProtocolTrace:
    """Simulate one user through ``config.K`` cycles.

    ``seed`` seeds two independent streams: one for measurement noise, one for
    random phase vectors. Runs with equal seeds but different phase policies
    therefore share their noise draws.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    noise_rng, phase_rng = (np.random.default_rng(s) for s in seed.spawn(2))
    h_t, region = true_user_channel(geom, true_location, params, config.channel_model)
    h = h_A * h_t
    sigma2 = noise_power_from_snr(h_A, h_t, config.snr_db, params.symbol)
    # noiseless runs still need a positive scale for the Fisher matrix
    opt_sigma2 = sigma2 if sigma2 > 0 else 1.0
    trace = ProtocolTrace(true_location, region, sigma2)
    predictor = SignalPredictor(dictionary, h_A, params.symbol) if config.cache_predictions else None

    N = geom.n_elements
    betas = np.empty((config.K, N), dtype=complex)
    g = np.empty(config.K, dtype=complex)
    betas[0] = random_phases(phase_rng, N)
    for k in range(config.K):
        noise = complex_noise(noise_rng, sigma2)
        g[k] = received_signal(betas[k], h, params.symbol, noise)
        obs = Observation(g[: k + 1], betas[: k + 1])
        est = estimate_location(dictionary, obs, h_A, params.symbol, predictor)
        rec = CycleRecord(k + 1, betas[k].copy(), complex(g[k]), est)
        trace.records.append(rec)
        if k == config.K - 1:
            break
        if config.policy == "random":
            betas[k + 1] = random_phases(phase_rng, N)
            continue
        problem = problem_for_estimate(geom, est, params, h_A, betas[: k + 1], opt_sigma2,
                                       config.weights_nf, config.weights_ff,
                                       dictionary.ref_range, config.full_derivatives)
        res = optimize_phases(problem, betas[k], config.optimizer)
        rec.objective_before = res.initial_objective
        rec.objective_after = res.objective
        rec.optimizer_iterations = res.iterations
        if res.aborted is not None and len(res.objectives) <= 1:
            rec.fallback = res.aborted
            betas[k + 1] = random_phases(phase_rng, N)
        else:
            betas[k + 1] = res.beta
    trace.final_crb = crb_at_truth(geom, true_location, region, params, h_A,
                                   betas, opt_sigma2, config)
    return trace
