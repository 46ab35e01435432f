"""Seeded Monte Carlo experiments and CSV output.

Per-trial seeds come from ``SeedSequence(seed, spawn_key=(sweep_index,
trial_index))``. Each trial's sequence spawns one child for drawing the true
location and one for the protocol run, so results do not depend on the
order in which trials execute.
"""
from __future__ import annotations

import ast
import configparser
import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import (
    PHASE_ERROR_THRESHOLD,
    Region,
    SignalModelParams,
    bs_ris_channel,
    phase_errors,
)
from .dictionary import VARIANTS, GridSpec, build_dictionary
from .geometry import PHI_MIN, CartesianPoint, RisGeometry, SphericalLocation
from .optimizer import OptimizerConfig
from .protocol import POLICIES, ProtocolConfig, run_protocol

SCENARIOS = ("nf", "ff")

CSV_COLUMNS = (
    "experiment", "n_elements", "snr_db", "variant", "policy", "scenario", "trials",
    "rmse_angle", "rmse_angle_se", "rmse_theta", "rmse_phi", "rmse_range",
    "quantization_floor", "nf_ff_classification_accuracy", "mean_crb_objective",
    "mean_cpu_seconds", "std_cpu_seconds", "median_cpu_seconds",
)
TIMING_COLUMNS = ("mean_cpu_seconds", "std_cpu_seconds", "median_cpu_seconds")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs. Lengths in wavelengths unless noted."""

    rows: int = 10
    cols: int = 10
    frequency: float = 28e9
    spacing_wavelengths: float = 0.5
    gain_t: float = 1.0
    gain_r: float = 1.0
    bs_position: tuple | None = None  # metres; default broadside at 4 R_0
    n_theta: int = 10
    n_phi: int = 10
    range_step_wavelengths: float = 5.0
    range_min_wavelengths: float = 10.0
    range_max_wavelengths: float | None = None
    snr_db: tuple = (-10.0, 0.0, 10.0, 20.0, 30.0)
    trials: int = 500
    K: int = 15
    variant: str = "unified"
    policy: str = "optimized"
    scenario: str = "nf"
    ff_range_factor: float = 3.0
    weights_nf: tuple = (1.0, 1.0, 1.0)
    weights_ff: tuple = (1.0, 1.0)
    channel_model: str = "region-matched"
    max_iterations: int = 500
    tolerance: float = 1e-8
    sides: tuple = (5, 10, 15)
    cputime_runs: int = 20
    seed: int = 0
    threads: int = 1
    out: str | None = None
    trials_out: str | None = None  # optional per-trial CSV for the rmse experiment
    user_location: tuple | None = None  # (R metres, theta, phi) for single-run

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if len(self.snr_db) == 0:
            raise ValueError("SNR sweep is empty")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown phase policy {self.policy!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.frequency

    def geometry(self, rows: int | None = None, cols: int | None = None) -> RisGeometry:
        lam = self.wavelength
        return RisGeometry(rows or self.rows, cols or self.cols,
                           self.spacing_wavelengths * lam, lam)

    def grid(self) -> GridSpec:
        lam = self.wavelength
        rmax = None if self.range_max_wavelengths is None else self.range_max_wavelengths * lam
        return GridSpec(self.n_theta, self.n_phi, self.range_step_wavelengths * lam,
                        self.range_min_wavelengths * lam, rmax)

    def params(self) -> SignalModelParams:
        return SignalModelParams(gain_t=self.gain_t, frequency=self.frequency)

    def protocol(self, snr_db: float, policy: str | None = None) -> ProtocolConfig:
        return ProtocolConfig(
            K=self.K, snr_db=float(snr_db), weights_nf=tuple(self.weights_nf),
            weights_ff=tuple(self.weights_ff), policy=policy or self.policy,
            channel_model=self.channel_model,
            optimizer=OptimizerConfig(tolerance=self.tolerance,
                                      max_iterations=self.max_iterations),
        )


def load_config(path) -> ExperimentConfig:
    """Read an INI-style key/value file with a single ``[experiment]`` section.

    Values are Python literals (numbers, tuples, lists, quoted strings);
    anything that does not parse as a literal is taken as a bare string.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive (e.g. K)
    with open(path) as fh:
        parser.read_file(fh)
    if not parser.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, raw in parser.items("experiment"):
        if key not in known:
            raise ValueError(f"{path}: unknown key {key!r}")
        try:
            val = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            val = raw.strip()
        if isinstance(val, list):
            val = tuple(val)
        values[key] = val
    return ExperimentConfig(**values)


@dataclass
class Setup:
    """Geometry, dictionary and RIS-BS channel shared by all trials."""

    geom: RisGeometry
    params: SignalModelParams
    dictionary: object
    h_A: np.ndarray
    nf_range_max: float

    @classmethod
    def build(cls, cfg: ExperimentConfig, variant: str | None = None,
              side: int | None = None) -> "Setup":
        geom = cfg.geometry(side, side)
        params = cfg.params()
        spec = cfg.grid()
        dictionary = build_dictionary(geom, spec, params, variant or cfg.variant)
        r0 = dictionary.ref_range
        bs = cfg.bs_position if cfg.bs_position is not None else (4.0 * r0, 0.0, 0.0)
        h_A = bs_ris_channel(geom, CartesianPoint(*bs), cfg.gain_r, cfg.frequency)
        # outer edge of the near-field annulus used by the unified grid
        unified_nf = build_dictionary(geom, spec, params, "unified").nf_locations \
            if dictionary.variant != "unified" else dictionary.nf_locations
        return cls(geom, params, dictionary, h_A, float(unified_nf[:, 0].max()))


def trial_seed(seed: int, sweep_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(sweep_index, trial_index))


def sample_location(setup: Setup, cfg: ExperimentConfig, rng: np.random.Generator,
                    scenario: str | None = None) -> SphericalLocation:
    """Draw a true user location.

    ``nf``: range, polar and azimuth angles uniform over the near-field
    annulus of the grid, rejecting draws that classify as far-field.
    ``ff``: uniform angles at ``ff_range_factor * R_0``.
    A configured ``user_location`` overrides both.
    """
    if cfg.user_location is not None:
        return SphericalLocation(*cfg.user_location)
    scenario = scenario or cfg.scenario
    geom = setup.geom
    if scenario == "ff":
        return SphericalLocation(cfg.ff_range_factor * setup.dictionary.ref_range,
                                 rng.uniform(0, np.pi), rng.uniform(PHI_MIN, -PHI_MIN))
    r_lo = cfg.range_min_wavelengths * geom.wavelength
    for _ in range(10_000):
        R = rng.uniform(r_lo, setup.nf_range_max)
        th = rng.uniform(0, np.pi)
        ph = rng.uniform(PHI_MIN, -PHI_MIN)
        if phase_errors(geom, R, th, ph)[0] > PHASE_ERROR_THRESHOLD:
            return SphericalLocation(R, th, ph)
    raise RuntimeError("could not sample a near-field location")


def quantization_error(theta: float, phi: float, n_theta: int, n_phi: int) -> tuple[float, float]:
    """Angle errors of the nearest angle-grid cell centre."""
    dt, dp = np.pi / n_theta, np.pi / n_phi
    it = min(max(int(theta // dt), 0), n_theta - 1)
    ip = min(max(int((phi - PHI_MIN) // dp), 0), n_phi - 1)
    return theta - (it + 0.5) * dt, phi - (PHI_MIN + (ip + 0.5) * dp)


@dataclass
class TrialResult:
    theta_err: float
    phi_err: float
    range_err: float  # nan unless truth and estimate are both near-field
    correct_region: bool
    floor_theta: float
    floor_phi: float
    crb: float
    cpu_seconds: float
    true_location: tuple = field(default=())


def run_trial(setup: Setup, cfg: ExperimentConfig, snr_db: float, seq: np.random.SeedSequence,
              policy: str | None = None, scenario: str | None = None) -> TrialResult:
    loc_seq, proto_seq = seq.spawn(2)
    p = sample_location(setup, cfg, np.random.default_rng(loc_seq), scenario)
    pcfg = cfg.protocol(snr_db, policy)
    t0 = time.process_time()
    trace = run_protocol(setup.geom, setup.dictionary, setup.h_A, setup.params, p, pcfg, proto_seq)
    cpu = time.process_time() - t0
    est = trace.final_estimate
    if est.region is Region.NEAR_FIELD:
        R_hat, th_hat, ph_hat = est.location
    else:
        (th_hat, ph_hat), R_hat = est.location, math.nan
    rerr = R_hat - p.R if trace.true_region is Region.NEAR_FIELD else math.nan
    ft, fp = quantization_error(p.theta, p.phi, cfg.n_theta, cfg.n_phi)
    return TrialResult(th_hat - p.theta, ph_hat - p.phi, rerr,
                       est.region is trace.true_region, ft, fp, trace.final_crb, cpu,
                       p.as_tuple())


_worker_setup: Setup | None = None


def _init_worker(cfg, variant, side):
    global _worker_setup
    _worker_setup = Setup.build(cfg, variant, side)


def _worker_trial(args):
    cfg, snr_db, seq, policy, scenario = args
    return run_trial(_worker_setup, cfg, snr_db, seq, policy, scenario)


def run_trials(setup: Setup, cfg: ExperimentConfig, jobs: list, variant=None, side=None) -> list:
    """Run ``(snr_db, seed_seq, policy, scenario)`` jobs, results in job order."""
    if cfg.threads <= 1:
        return [run_trial(setup, cfg, *job) for job in jobs]
    with ProcessPoolExecutor(cfg.threads, initializer=_init_worker,
                             initargs=(cfg, variant, side)) as pool:
        return list(pool.map(_worker_trial, [(cfg, *job) for job in jobs]))


def _rmse(values) -> float:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return float(np.sqrt(np.mean(v**2))) if len(v) else math.nan


def summarize(results: list, **labels) -> dict:
    th = np.array([r.theta_err for r in results])
    ph = np.array([r.phi_err for r in results])
    sq = th**2 + ph**2
    rmse = float(np.sqrt(sq.mean()))
    # delta-method standard error of the RMSE
    se = float(sq.std(ddof=1) / np.sqrt(len(sq)) / (2 * rmse)) if len(sq) > 1 and rmse > 0 else 0.0
    floor = np.array([r.floor_theta**2 + r.floor_phi**2 for r in results])
    cpu = np.array([r.cpu_seconds for r in results])
    row = dict(labels)
    row.update(
        trials=len(results),
        rmse_angle=rmse,
        rmse_angle_se=se,
        rmse_theta=_rmse(th),
        rmse_phi=_rmse(ph),
        rmse_range=_rmse([r.range_err for r in results]),
        quantization_floor=float(np.sqrt(floor.mean())),
        nf_ff_classification_accuracy=float(np.mean([r.correct_region for r in results])),
        mean_crb_objective=float(np.mean([r.crb for r in results])),
        mean_cpu_seconds=float(cpu.mean()),
        std_cpu_seconds=float(cpu.std(ddof=1)) if len(cpu) > 1 else 0.0,
        median_cpu_seconds=float(np.median(cpu)),
    )
    return row


def run_rmse_experiment(cfg: ExperimentConfig, setup: Setup | None = None,
                        return_trials: bool = False):
    """RMSE versus SNR: one row per SNR value."""
    setup = setup or Setup.build(cfg)
    rows, per_snr = [], []
    for si, snr in enumerate(cfg.snr_db):
        jobs = [(snr, trial_seed(cfg.seed, si, t), cfg.policy, cfg.scenario)
                for t in range(cfg.trials)]
        results = run_trials(setup, cfg, jobs)
        per_snr.append(results)
        rows.append(summarize(results, experiment="rmse", n_elements=setup.geom.n_elements,
                              snr_db=float(snr), variant=cfg.variant, policy=cfg.policy,
                              scenario=cfg.scenario))
    if cfg.trials_out:
        emit_trials_csv(per_snr, cfg.snr_db, cfg.trials_out)
    return (rows, per_snr) if return_trials else rows


def coverage_location(setup: Setup, cfg: ExperimentConfig, rng) -> SphericalLocation:
    """User drawn over the full coverage volume ``[R_min, 3 R_0]``."""
    r_lo = cfg.range_min_wavelengths * setup.geom.wavelength
    r_hi = cfg.ff_range_factor * setup.dictionary.ref_range
    return SphericalLocation(rng.uniform(r_lo, r_hi), rng.uniform(0, np.pi),
                             rng.uniform(PHI_MIN, -PHI_MIN))


def run_cputime_experiment(cfg: ExperimentConfig, variants=("unified", "nf-only"),
                           return_trials: bool = False):
    """Per-trial CPU time versus RIS size for each dictionary variant.

    Both variants see the same users, drawn over the shared coverage volume,
    and the same noise. Dictionary construction is not timed.
    """
    rows, raw = [], {}
    snr = float(cfg.snr_db[0])
    for si, side in enumerate(cfg.sides):
        setups = {v: Setup.build(cfg, v, side) for v in variants}
        base = setups[variants[0]]
        for v in variants:
            setup = setups[v]
            results = []
            for t in range(cfg.cputime_runs):
                loc_seq, proto_seq = trial_seed(cfg.seed, si, t).spawn(2)
                p = coverage_location(base, cfg, np.random.default_rng(loc_seq))
                t0 = time.process_time()
                trace = run_protocol(setup.geom, setup.dictionary, setup.h_A, setup.params,
                                     p, cfg.protocol(snr), proto_seq)
                cpu = time.process_time() - t0
                est = trace.final_estimate
                loc = est.location
                th_hat, ph_hat = (loc[1], loc[2]) if len(loc) == 3 else loc
                ft, fp = quantization_error(p.theta, p.phi, cfg.n_theta, cfg.n_phi)
                rerr = (loc[0] - p.R if len(loc) == 3 and trace.true_region is Region.NEAR_FIELD
                        else math.nan)
                results.append(TrialResult(th_hat - p.theta, ph_hat - p.phi, rerr,
                                           est.region is trace.true_region, ft, fp,
                                           trace.final_crb, cpu, p.as_tuple()))
            raw[(side, v)] = results
            rows.append(summarize(results, experiment="cputime",
                                  n_elements=setup.geom.n_elements, snr_db=snr, variant=v,
                                  policy=cfg.policy, scenario="coverage"))
    return (rows, raw) if return_trials else rows


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows, path) -> None:
    """Write rows with a header in :data:`CSV_COLUMNS` order, ``\\n`` line endings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format(row.get(c, "")) for c in CSV_COLUMNS])


TRIAL_COLUMNS = ("snr_db", "trial", "true_R", "true_theta", "true_phi", "theta_err",
                 "phi_err", "range_err", "correct_region", "crb")


def emit_trials_csv(per_snr, snr_values, path) -> None:
    """Per-trial true locations and errors, one row per (SNR, trial)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)
        for snr, results in zip(snr_values, per_snr):
            for t, r in enumerate(results):
                writer.writerow([_format(float(snr)), t, *map(_format, map(float, r.true_location)),
                                 _format(r.theta_err), _format(r.phi_err), _format(r.range_err),
                                 int(r.correct_region), _format(r.crb)])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
