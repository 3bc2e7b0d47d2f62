"""Synthetic career panels with performance-driven missingness.

True curve: ``g(t) = omega + a d^2 + (b d^2 + c d^3) 1{t > t_peak}`` with
``d = t - t_peak``. Players add a random intercept and a random extra
curvature after the peak. A player is observed at age ``t`` with weight
``exp(cumulative performance up to t)``, drawing ``round(N pi_t)`` players
without replacement at each age.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from .estimate import estimate
from .evaluation import EvaluationReport
from .exceptions import AgingCurveError, GridError, InvalidParameterError, ScheduleError
from .numerics import AgeGrid
from .panel import AgeCurve, PerformancePanel
from .validation import check_rng, check_spec

PI_ANCHORS = ((18, 0.09), (23, 0.63), (24, 0.63), (36, 0.09))
PI_FLOOR = 0.01


@dataclass(frozen=True)
class SimulationConfig:
    n_players: int = 600
    omega: float = 0.0
    a: float = -1.0 / 9.0
    b: float = -6.0 / 1000.0
    c: float = 45.0 / 10000.0
    t_peak: int = 25
    sigma_gamma: float = 0.8
    sigma_b: float = 0.02
    sigma_eps: float = 1.0
    grid: AgeGrid = field(default_factory=AgeGrid)
    pi_schedule: Optional[tuple] = None
    seed: int = 0
    replications: int = 200

    def __post_init__(self):
        if self.n_players < 1:
            raise InvalidParameterError("n_players must be positive")
        if not self.grid.t_min < self.t_peak < self.grid.t_max:
            raise GridError("t_peak must lie strictly inside the grid")
        if min(self.sigma_gamma, self.sigma_b, self.sigma_eps) < 0:
            raise InvalidParameterError("standard deviations must be nonnegative")
        if self.replications < 1:
            raise InvalidParameterError("replications must be positive")
        if self.pi_schedule is not None:
            pi = tuple(float(p) for p in self.pi_schedule)
            if len(pi) != self.grid.K or not all(0.0 <= p <= 1.0 for p in pi):
                raise ScheduleError(f"pi_schedule needs {self.grid.K} values in [0, 1]")
            object.__setattr__(self, "pi_schedule", pi)

    def schedule(self) -> np.ndarray:
        if self.pi_schedule is None:
            return default_pi_schedule(self.grid)
        return np.array(self.pi_schedule)


@dataclass(frozen=True)
class TruthBundle:
    true_curve: AgeCurve
    player_intercepts: np.ndarray
    player_quads: np.ndarray
    noiseless_values: np.ndarray


@dataclass(frozen=True)
class MaskDiagnostics:
    target_counts: np.ndarray
    log_weights: np.ndarray
    selection_probs: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """``rho_it`` rescaled per age by its maximum (the raw values overflow)."""
        return np.exp(self.log_weights - self.log_weights.max(axis=0, keepdims=True))


def _after_peak(config: SimulationConfig):
    d = config.grid.ages - config.t_peak
    return d, (d > 0).astype(float)


def mean_function(config: SimulationConfig, t):
    """``g`` at arbitrary (real) ages."""
    d = np.asarray(t, dtype=float) - config.t_peak
    late = (d > 0).astype(float)
    return config.omega + config.a * d**2 + late * (config.b * d**2 + config.c * d**3)


def true_mean_curve(config: SimulationConfig) -> AgeCurve:
    return AgeCurve(config.grid, mean_function(config, config.grid.ages))


def simulate_panel(config: SimulationConfig, rng=None):
    """Fully observed panel plus the generating truth.

    Returns
    -------
    (PerformancePanel, TruthBundle)
    """
    rng = check_rng(rng)
    N, K = config.n_players, config.grid.K
    curve = true_mean_curve(config)
    gamma = rng.normal(0.0, config.sigma_gamma, N) if config.sigma_gamma > 0 else np.zeros(N)
    b_i = rng.normal(0.0, config.sigma_b, N) if config.sigma_b > 0 else np.zeros(N)
    eps = rng.normal(0.0, config.sigma_eps, (N, K)) if config.sigma_eps > 0 else np.zeros((N, K))
    d, late = _after_peak(config)
    noiseless = curve.g[None, :] + gamma[:, None] + b_i[:, None] * (late * d**2)[None, :]
    panel = PerformancePanel(config.grid, noiseless + eps, np.ones((N, K), bool))
    return panel, TruthBundle(curve, gamma, b_i, noiseless)


def default_pi_schedule(grid: AgeGrid) -> np.ndarray:
    """Observation rates by age: a natural cubic spline through the anchor
    rates, continued linearly past the anchors and kept unimodal."""
    lo, hi = PI_ANCHORS[0][0], PI_ANCHORS[-1][0]
    if grid.t_min > lo or grid.t_max < hi:
        raise ScheduleError(f"default schedule needs a grid covering ages {lo}..{hi}")
    xs, ys = zip(*PI_ANCHORS)
    cs = CubicSpline(xs, ys, bc_type="natural")
    t = grid.ages.astype(float)
    pi = cs(np.clip(t, lo, hi))
    pi = np.where(t < lo, ys[0] + cs(lo, 1) * (t - lo), pi)
    pi = np.where(t > hi, ys[-1] + cs(hi, 1) * (t - hi), pi)
    pi = np.clip(pi, PI_FLOOR, 1.0)
    rise = grid.ages <= 23
    pi[rise] = np.minimum(np.maximum.accumulate(pi[rise]), 0.63)
    fall = grid.ages >= 24
    pi[fall] = np.minimum.accumulate(np.minimum(pi[fall], 0.63))
    return pi


def target_counts(n_players: int, pi) -> np.ndarray:
    """``round(N pi_t)``, halves rounded up."""
    pi = np.asarray(pi, dtype=float)
    if np.any((pi < 0) | (pi > 1)):
        raise ScheduleError("observation rates must lie in [0, 1]")
    counts = np.floor(n_players * pi + 0.5).astype(int)
    if np.any(counts > n_players):
        raise ScheduleError("target count exceeds the number of players")
    return counts


def generate_mask(panel: PerformancePanel, pi_schedule, rng=None):
    """Performance-driven observability mask for a fully observed panel.

    At each age, ``round(N pi_t)`` players are drawn without replacement with
    probabilities proportional to ``exp(sum of Y up to t)``. Successive
    draws (remove the chosen player, renormalise) are realised by ranking
    ``log weight + Gumbel noise`` and keeping the top ``n``, which has the
    same distribution.

    Returns
    -------
    (mask, MaskDiagnostics)
    """
    rng = check_rng(rng)
    if not panel.mask.all():
        raise InvalidParameterError("missingness is generated from a fully observed panel")
    N, K = panel.shape
    pi = np.asarray(pi_schedule, dtype=float)
    if pi.shape != (K,):
        raise ScheduleError(f"pi_schedule needs {K} entries")
    n_plus = target_counts(N, pi)
    log_w = np.cumsum(panel.values, axis=1)
    probs = np.exp(log_w - logsumexp(log_w, axis=0, keepdims=True))
    keys = log_w + rng.gumbel(size=(N, K))
    order = np.argsort(-keys, axis=0, kind="stable")
    mask = np.zeros((N, K), dtype=bool)
    for k in range(K):
        mask[order[: n_plus[k], k], k] = True
    return mask, MaskDiagnostics(n_plus, log_w, probs)


def simulate_masked_panel(config: SimulationConfig, rng=None):
    """Simulate, then apply the missingness mechanism.

    Returns
    -------
    (masked PerformancePanel, full PerformancePanel, TruthBundle, MaskDiagnostics)
    """
    rng = check_rng(rng)
    full, truth = simulate_panel(config, rng)
    mask, diag = generate_mask(full, config.schedule(), rng)
    return full.with_mask(mask), full, truth, diag


@dataclass(frozen=True)
class Cell:
    n_players: int
    omega: float
    sigma_gamma: float

    @property
    def label(self) -> str:
        return f"N={self.n_players}|omega={self.omega:g}|sigma_gamma={self.sigma_gamma:g}"


def _spec_key(name: str) -> int:
    return zlib.crc32(name.encode())


def replication_seed(root: int, cell_index: int, rep: int, *extra) -> np.random.SeedSequence:
    return np.random.SeedSequence(root, spawn_key=(cell_index, rep) + tuple(extra))


def run_replication(config: SimulationConfig, specs, root: int, cell_index: int, rep: int):
    """One simulate-mask-estimate round.

    Returns ``(truth curve, {spec name: AgeCurve or the exception raised})``.
    """
    sim_rng = np.random.default_rng(replication_seed(root, cell_index, rep, 0))
    masked, _, truth, _ = simulate_masked_panel(config, sim_rng)
    out = {}
    for spec in specs:
        rng = np.random.default_rng(
            replication_seed(root, cell_index, rep, 1, _spec_key(spec.name))
        )
        try:
            out[spec.name] = estimate(masked, spec, rng=rng).curve
        except (AgingCurveError, np.linalg.LinAlgError) as exc:
            out[spec.name] = exc
    return truth.true_curve, out


def run_factorial(base: SimulationConfig, sweep: dict, specs: Sequence,
                  replications: int = None, seed: int = None,
                  progress=None, n_jobs: int = 1) -> EvaluationReport:
    """Full factorial over player count, peak height and intercept spread.

    Parameters
    ----------
    base : SimulationConfig
        Everything not swept.
    sweep : dict
        Keys ``n_players``, ``omega``, ``sigma_gamma`` mapping to value lists;
        missing keys default to the base value.
    specs : sequence of EstimatorSpec or str
    replications, seed : int, optional
        Default to the base config values. Replication ``r`` of cell ``c``
        is seeded from ``(seed, c, r)`` only, so results do not depend on
        execution order.
    progress : callable, optional
        Called as ``progress(cell, rep)`` after each replication is recorded.
    n_jobs : int
        Worker processes. Results are always reduced in (cell, replication)
        order, so the report is identical for any ``n_jobs``.
    """
    specs = [check_spec(s) for s in specs]
    if not specs:
        raise InvalidParameterError("at least one spec is required")
    if n_jobs < 1:
        raise InvalidParameterError("n_jobs must be positive")
    reps = base.replications if replications is None else int(replications)
    if reps < 1:
        raise InvalidParameterError("replications must be positive")
    root = base.seed if seed is None else int(seed)
    levels = [list(sweep.get(k, [getattr(base, k)])) for k in ("n_players", "omega", "sigma_gamma")]
    if any(len(v) == 0 for v in levels):
        raise InvalidParameterError("sweep sets must be nonempty")
    cells = [Cell(int(n), float(w), float(s)) for n, w, s in product(*levels)]
    report = EvaluationReport(base.grid, cells, [s.name for s in specs])
    tasks = []
    for ci, cell in enumerate(cells):
        config = replace(base, n_players=cell.n_players, omega=cell.omega,
                         sigma_gamma=cell.sigma_gamma)
        tasks.extend((cell, config, ci, r) for r in range(reps))

    def record(cell, rep, result):
        truth, curves = result
        for name, est in curves.items():
            if isinstance(est, Exception):
                report.record_failure(cell, name)
            else:
                report.record(cell, name, est, truth)
        if progress is not None:
            progress(cell, rep)

    if n_jobs == 1:
        for cell, config, ci, r in tasks:
            record(cell, r, run_replication(config, specs, root, ci, r))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(run_replication, config, specs, root, ci, r)
                       for _, config, ci, r in tasks]
            for (cell, _, _, r), fut in zip(tasks, futures):
                record(cell, r, fut.result())
    return report


__all__ = [
    "Cell",
    "MaskDiagnostics",
    "SimulationConfig",
    "TruthBundle",
    "default_pi_schedule",
    "generate_mask",
    "mean_function",
    "run_factorial",
    "simulate_masked_panel",
    "simulate_panel",
    "target_counts",
    "true_mean_curve",
]
