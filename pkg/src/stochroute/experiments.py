"""
Configuration-driven experiments: arrival fraction and travel time versus
budget, threshold sweeps, distance analysis and computational scaling.

Randomness is derived per trial from the master seed with
``SeedSequence(master_seed, spawn_key=(stream, ...))``, so a trial's outcome
does not depend on which other trials run, in what order, or in how many
worker processes. Every cell (algorithm, criterion, theta, budget) of trial
``i`` replays the same routing stream.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import multiprocessing
import os
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .centralized import ConvergenceParams, RoutingTable, network_operator, route_with_table, solve
from .criteria import Criterion
from .distributions import TimeGrid
from .decentralized import DecentralizedRouter
from .errors import ConfigError, ParameterError
from .estimation import DistanceModel, Mode, distance_pairs, fit_distance_model, fit_points
from .records import TrialRecord
from .spatial_graph import (SpatialNetwork, WeightRule, generate_kleinberg_variant, load_tntp,
                            pairwise_metric)

log = logging.getLogger(__name__)

SCHEMA = "stochroute-v1"
ALGORITHMS = ("centralized", "decentralized-GE", "decentralized-LE")
EXPERIMENTS = ("arrival", "threshold", "travel_time", "distance", "scaling")

# spawn-key streams
NETWORK_STREAM = 0
TRIAL_STREAM = 1
SCALING_STREAM = 2
BOOTSTRAP_STREAM = 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class NetworkSource:
    kind: str = "kleinberg"
    side: int = 10
    mu_range: Tuple[float, float] = (0.5, 1.5)
    sigma_range: Tuple[float, float] = (0.5, 1.5)
    nodes: Optional[str] = None
    edges: Optional[str] = None
    coord_scale: float = 1.0
    length_scale: float = 1.0
    use_file_lengths: bool = True
    shortcut_metric: str = "lattice"


@dataclass
class Endpoints:
    origin: Optional[Tuple[float, float]] = (2, 2)
    target: Optional[Tuple[float, float]] = (9, 9)
    band: Optional[Tuple[float, float]] = None
    metric: str = "euclidean"


@dataclass
class ExperimentConfig:
    experiment: str = "arrival"
    network: NetworkSource = field(default_factory=NetworkSource)
    endpoints: Endpoints = field(default_factory=Endpoints)
    budgets: List[float] = field(default_factory=lambda: [10.0, 20.0, 40.0, 60.0, 90.0, 120.0, 150.0])
    thetas: List[float] = field(default_factory=lambda: [0.8])
    epsilon: float = 1e-3
    max_iterations: int = 1000
    tie_tolerance: float = 0.0
    trials: int = 1000
    algorithms: List[str] = field(default_factory=lambda: ["centralized", "decentralized-LE"])
    criteria: List[str] = field(default_factory=lambda: ["joint"])
    bins: int = 1000
    horizon: Optional[float] = None
    distance_model: Optional[dict] = None
    master_seed: int = 0
    regimes: Tuple[float, float] = (40.0, 90.0)
    sides: List[int] = field(default_factory=lambda: [5, 10, 15, 20, 25])
    runs: int = 100
    hist_bins: int = 200
    bootstrap: int = 200
    metrics: List[str] = field(default_factory=lambda: ["euclidean"])
    name: str = ""

    @property
    def convergence(self) -> ConvergenceParams:
        return ConvergenceParams(self.epsilon, self.max_iterations, self.tie_tolerance)

    def grid(self) -> TimeGrid:
        horizon = self.horizon if self.horizon is not None else max(self.budgets)
        return TimeGrid.for_horizon(horizon, self.bins)

    def model(self) -> DistanceModel:
        if not self.distance_model:
            return DistanceModel()
        dm = self.distance_model
        return DistanceModel(float(dm.get("intercept", 0.0)), float(dm.get("slope", 1.0)),
                             dm.get("metric", "euclidean"))

    def validate(self) -> "ExperimentConfig":
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.experiment not in EXPERIMENTS:
            bad("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        if self.network.kind not in ("kleinberg", "tntp"):
            bad("network.kind", f"must be 'kleinberg' or 'tntp', got {self.network.kind!r}")
        if self.network.shortcut_metric not in ("lattice", "euclidean"):
            bad("network.shortcut_metric", "must be 'lattice' or 'euclidean'")
        if self.network.kind == "tntp" and not (self.network.nodes and self.network.edges):
            bad("network", "tntp networks need 'nodes' and 'edges' paths")
        if not isinstance(self.trials, int) or self.trials < 1:
            bad("trials", f"must be a positive integer, got {self.trials!r}")
        if not self.budgets:
            bad("budgets", "must not be empty")
        if any(not (b >= 0 and math.isfinite(b)) for b in self.budgets):
            bad("budgets", "must be finite and non-negative")
        if not self.epsilon > 0:
            bad("epsilon", f"must be positive, got {self.epsilon!r}")
        if self.max_iterations < 1:
            bad("max_iterations", "must be positive")
        if not self.tie_tolerance >= 0:
            bad("tie_tolerance", "must be non-negative")
        if not self.thetas or any(not 0 < t <= 1 for t in self.thetas):
            bad("thetas", "every threshold must lie in (0, 1]")
        if self.experiment == "threshold" and len(self.thetas) < 2:
            bad("thetas", "a threshold sweep needs at least two thresholds")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                bad("algorithms", f"unknown algorithm {a!r}; expected one of {', '.join(ALGORITHMS)}")
        for c in self.criteria:
            if c not in ("fan", "frank", "joint"):
                bad("criteria", f"unknown criterion {c!r}")
        if self.bins < 1:
            bad("bins", "must be positive")
        if self.horizon is not None and self.horizon < max(self.budgets):
            bad("horizon", "must cover the largest budget")
        ep = self.endpoints
        if ep.band is None and (ep.origin is None or ep.target is None):
            bad("endpoints", "give either origin and target or a distance band")
        if ep.band is not None and not (0 <= ep.band[0] <= ep.band[1]):
            bad("endpoints.band", "must be [low, high] with 0 <= low <= high")
        if self.experiment == "scaling":
            if len(set(self.sides)) < 3:
                bad("sides", "fitting a scaling exponent needs at least three network sizes")
            if self.runs < 1:
                bad("runs", "must be positive")
        if self.experiment == "distance" and self.hist_bins < 1:
            bad("hist_bins", "must be positive")
        try:
            self.model()
        except ParameterError as exc:
            raise ConfigError(f"distance_model: {exc}") from None
        return self


def config_from_dict(data: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    net = data.pop("network", {}) or {}
    ends = data.pop("endpoints", {}) or {}
    try:
        net_src = NetworkSource(**net)
    except TypeError as exc:
        raise ConfigError(f"network: {exc}") from None
    try:
        endpoints = Endpoints(**ends)
    except TypeError as exc:
        raise ConfigError(f"endpoints: {exc}") from None
    if base_dir is not None:
        for attr in ("nodes", "edges"):
            p = getattr(net_src, attr)
            if p and not Path(p).is_absolute():
                setattr(net_src, attr, str(Path(base_dir) / p))
    if ends.get("band") is not None and "origin" not in ends:
        endpoints.origin = endpoints.target = None
    cfg = ExperimentConfig(network=net_src, endpoints=endpoints, **data)
    cfg.budgets = [float(b) for b in cfg.budgets]
    cfg.thetas = [float(t) for t in cfg.thetas]
    cfg.epsilon = float(cfg.epsilon)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        data = yaml.safe_load(fh)
    cfg = config_from_dict(data, base_dir=path.parent)
    if not cfg.name:
        cfg.name = path.stem
    return cfg


# ---------------------------------------------------------------------------
# trial plumbing
# ---------------------------------------------------------------------------

def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def build_network(cfg: ExperimentConfig) -> SpatialNetwork:
    src = cfg.network
    if src.kind == "kleinberg":
        rng = np.random.default_rng(seed_sequence(cfg.master_seed, NETWORK_STREAM))
        return generate_kleinberg_variant(src.side, rng, tuple(src.mu_range), tuple(src.sigma_range),
                                          src.shortcut_metric)
    rule = WeightRule(tuple(src.mu_range), tuple(src.sigma_range),
                      seed=int(seed_sequence(cfg.master_seed, NETWORK_STREAM).generate_state(1)[0]),
                      coord_scale=src.coord_scale, length_scale=src.length_scale,
                      use_file_lengths=src.use_file_lengths)
    return load_tntp(src.nodes, src.edges, rule)


def _resolve_node(net: SpatialNetwork, spec) -> int:
    if isinstance(spec, (list, tuple)):
        return net.node_at(*spec)
    return net.check_node(int(spec))


class PairSampler:
    """Origin/target pairs: fixed, or uniform over pairs whose distance lies in a band."""

    def __init__(self, net: SpatialNetwork, endpoints: Endpoints):
        self.fixed = None
        if endpoints.band is None:
            self.fixed = (_resolve_node(net, endpoints.origin), _resolve_node(net, endpoints.target))
            return
        lo, hi = endpoints.band
        pairs = []
        for i in range(net.n):
            d = pairwise_metric(net, i, endpoints.metric)
            js = np.flatnonzero((d >= lo) & (d <= hi))
            pairs.extend((i, int(j)) for j in js if j != i)
        if not pairs:
            raise ConfigError(f"endpoints.band: no node pair has distance in [{lo}, {hi}]")
        self.pairs = np.array(pairs, dtype=np.int64)

    def draw(self, rng: np.random.Generator) -> Tuple[int, int]:
        if self.fixed is not None:
            return self.fixed
        o, t = self.pairs[rng.integers(len(self.pairs))]
        return int(o), int(t)


@dataclass(frozen=True)
class Cell:
    algorithm: str
    criterion: str
    theta: float
    budget: float


def cells_for(cfg: ExperimentConfig) -> List[Cell]:
    return [Cell(a, c, th, b) for a in cfg.algorithms for c in cfg.criteria
            for th in cfg.thetas for b in cfg.budgets]


class Engine:
    """Routing machinery shared by all trials of one experiment in one process."""

    def __init__(self, cfg: ExperimentConfig, net: SpatialNetwork, table_cache: int = 64):
        self.cfg = cfg
        self.net = net
        self.grid = cfg.grid()
        self.params = cfg.convergence
        self.model = cfg.model()
        self.sampler = PairSampler(net, cfg.endpoints)
        self._operator = None
        self._tables: "OrderedDict[int, RoutingTable]" = OrderedDict()
        self._routers: Dict[Tuple[str, int], DecentralizedRouter] = {}
        self._table_cache = table_cache

    def table(self, target: int) -> RoutingTable:
        tab = self._tables.get(target)
        if tab is None:
            if self._operator is None:
                self._operator = network_operator(self.net, self.grid)
            tab = solve(self.net, target, self.grid, self.params, operator=self._operator)
            self._tables[target] = tab
            if len(self._tables) > self._table_cache:
                self._tables.popitem(last=False)
        return tab

    def router(self, mode: str, target: int) -> DecentralizedRouter:
        key = (mode, target)
        r = self._routers.get(key)
        if r is None:
            r = DecentralizedRouter(self.net, target, self.grid, self.params, mode, self.model)
            self._routers[key] = r
        return r

    def run_trial(self, trial: int, cells: Sequence[Cell]) -> List[TrialRecord]:
        pair_ss, route_ss = seed_sequence(self.cfg.master_seed, TRIAL_STREAM, trial).spawn(2)
        origin, target = self.sampler.draw(np.random.default_rng(pair_ss))
        seed = int(route_ss.generate_state(1)[0])
        out = []
        for cell in cells:
            rng = np.random.default_rng(route_ss)
            started = time.perf_counter()
            if cell.algorithm == "centralized":
                rec = route_with_table(self.net, self.table(target), origin, cell.budget,
                                       cell.criterion, cell.theta, rng)
            else:
                mode = cell.algorithm.split("-", 1)[1]
                rec = self.router(mode, target).route(origin, cell.budget, cell.theta, cell.criterion, rng)
            rec.wall_seconds = time.perf_counter() - started
            rec.trial, rec.seed = trial, seed
            out.append(rec)
        return out


_WORKER: Dict[str, object] = {}


def _worker_init(cfg, net, cells):
    _WORKER["engine"] = Engine(cfg, net)
    _WORKER["cells"] = cells


def _worker_run(trials):
    engine, cells = _WORKER["engine"], _WORKER["cells"]
    return [(t, engine.run_trial(t, cells)) for t in trials]


def run_trials(cfg: ExperimentConfig, net: SpatialNetwork, cells: Sequence[Cell],
               threads: int = 1) -> Dict[Cell, List[TrialRecord]]:
    """Run every trial for every cell; records per cell are ordered by trial index."""
    trials = list(range(cfg.trials))
    if threads <= 1:
        engine = Engine(cfg, net)
        results = [(t, engine.run_trial(t, cells)) for t in trials]
    else:
        chunks = [trials[k::threads] for k in range(threads)]
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(threads, mp_context=ctx, initializer=_worker_init,
                                 initargs=(cfg, net, list(cells))) as pool:
            results = [r for part in pool.map(_worker_run, chunks) for r in part]
    results.sort(key=lambda r: r[0])
    per_cell: Dict[Cell, List[TrialRecord]] = {c: [] for c in cells}
    for _, recs in results:
        for cell, rec in zip(cells, recs):
            per_cell[cell].append(rec)
    return per_cell


# ---------------------------------------------------------------------------
# statistics and CSV output
# ---------------------------------------------------------------------------

@dataclass
class CellStats:
    algorithm: str
    criterion: str
    budget: float
    theta: float
    trials: int
    n_success: int
    arrival_fraction: float
    arrival_se: float
    mean_time: float
    std: float
    time_se: float
    flag: str = ""

    def arrival_band(self, k: float = 3.0):
        return self.arrival_fraction - k * self.arrival_se, self.arrival_fraction + k * self.arrival_se

    def time_band(self, k: float = 3.0):
        return self.mean_time - k * self.time_se, self.mean_time + k * self.time_se


def cell_stats(cell: Cell, records: Sequence[TrialRecord]) -> CellStats:
    n = len(records)
    times = np.array([r.travel_time for r in records if r.success])
    k = len(times)
    p = k / n
    se = math.sqrt(p * (1 - p) / n)
    if k == 0:
        mean = std = tse = math.nan
        flag = "no-success"
    else:
        mean = float(times.mean())
        std = float(times.std(ddof=1)) if k > 1 else 0.0
        tse = std / math.sqrt(k)
        flag = ""
    return CellStats(cell.algorithm, cell.criterion, cell.budget, cell.theta, n, k, p, se, mean, std, tse, flag)


SUMMARY_FIELDS = [f.name for f in dataclasses.fields(CellStats)]
BAND_FIELDS = ["arrival_lo3", "arrival_hi3", "time_lo3", "time_hi3"]
TRIAL_FIELDS = ["algorithm", "criterion", "theta", "budget", "trial", "seed", "origin", "target",
                "success", "travel_time", "steps", "reason", "path"]
# wall-clock times live in their own file so the other outputs stay byte-reproducible
TIMING_FIELDS = ["algorithm", "criterion", "theta", "budget", "trial", "wall_seconds"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_csv(path: Path, fields: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> List[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_summary(out_dir: Path, stats: Sequence[CellStats], name: str = "summary.csv") -> Path:
    path = Path(out_dir) / name
    write_csv(path, SUMMARY_FIELDS + BAND_FIELDS,
              [[getattr(s, f) for f in SUMMARY_FIELDS] + [*s.arrival_band(), *s.time_band()] for s in stats])
    return path


def write_trials(out_dir: Path, per_cell: Dict[Cell, List[TrialRecord]]) -> List[Path]:
    """Per-trial records (``trials.csv``) and their wall-clock times (``trial_timings.csv``)."""
    rows, timings = [], []
    for cell, recs in per_cell.items():
        key = [cell.algorithm, cell.criterion, cell.theta, cell.budget]
        for r in recs:
            rows.append(key + [r.trial, r.seed, r.origin, r.target, r.success, r.travel_time, r.step_count,
                               r.reason, " ".join(map(str, r.path))])
            timings.append(key + [r.trial, round(r.wall_seconds, 6)])
    paths = [Path(out_dir) / "trials.csv", Path(out_dir) / "trial_timings.csv"]
    write_csv(paths[0], TRIAL_FIELDS, rows)
    write_csv(paths[1], TIMING_FIELDS, timings)
    return paths


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    stats: List[CellStats]
    records: Dict[Cell, List[TrialRecord]] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)

    def cell(self, algorithm: str, budget: float, criterion: str = "joint", theta: Optional[float] = None) -> CellStats:
        for s in self.stats:
            if (s.algorithm == algorithm and s.criterion == criterion and s.budget == budget
                    and (theta is None or s.theta == theta)):
                return s
        raise KeyError((algorithm, criterion, theta, budget))

    def series(self, algorithm: str, criterion: str = "joint", theta: Optional[float] = None) -> List[CellStats]:
        rows = [s for s in self.stats if s.algorithm == algorithm and s.criterion == criterion
                and (theta is None or s.theta == theta)]
        return sorted(rows, key=lambda s: s.budget)


def _run_cells(cfg: ExperimentConfig, out_dir: Optional[Path], threads: int,
               net: Optional[SpatialNetwork]) -> ExperimentResult:
    net = net if net is not None else build_network(cfg)
    cells = cells_for(cfg)
    per_cell = run_trials(cfg, net, cells, threads)
    stats = [cell_stats(c, per_cell[c]) for c in cells]
    result = ExperimentResult(cfg, stats, per_cell)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.files.append(write_summary(out_dir, stats))
        result.files.extend(write_trials(out_dir, per_cell))
    return result


def run_arrival_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1,
                           net: Optional[SpatialNetwork] = None) -> ExperimentResult:
    """Arrival fraction (and travel time) per algorithm, criterion, threshold and budget."""
    return _run_cells(cfg.validate(), out_dir, threads, net)


def run_threshold_sweep(cfg: ExperimentConfig, out_dir=None, threads: int = 1,
                        net: Optional[SpatialNetwork] = None) -> ExperimentResult:
    if len(cfg.thetas) < 2:
        raise ConfigError("thetas: a threshold sweep needs at least two thresholds")
    return _run_cells(cfg.validate(), out_dir, threads, net)


# travel-time regimes ------------------------------------------------------

@dataclass
class RegimeSlope:
    algorithm: str
    criterion: str
    theta: float
    regime: str
    n_budgets: int
    slope: float
    slope_se: float


def regime_of(budget: float, bounds: Tuple[float, float]) -> str:
    lo, hi = bounds
    if budget <= lo:
        return "small"
    if budget <= hi:
        return "intermediate"
    return "large"


def weighted_slope(x: Sequence[float], y: Sequence[float], se: Sequence[float]) -> Tuple[float, float]:
    """Ordinary least-squares slope of y on x with its standard error propagated from per-point ``se``."""
    x, y, se = (np.asarray(a, dtype=float) for a in (x, y, se))
    if len(x) < 2:
        return math.nan, math.nan
    c = (x - x.mean()) / ((x - x.mean()) ** 2).sum()
    return float(c @ y), float(math.sqrt((c**2) @ se**2))


def regime_slopes(stats: Sequence[CellStats], bounds: Tuple[float, float]) -> List[RegimeSlope]:
    out = []
    groups: Dict[tuple, List[CellStats]] = {}
    for s in stats:
        groups.setdefault((s.algorithm, s.criterion, s.theta), []).append(s)
    for (alg, crit, theta), rows in groups.items():
        for regime in ("small", "intermediate", "large"):
            pts = sorted((r for r in rows if regime_of(r.budget, bounds) == regime and r.n_success > 1),
                         key=lambda r: r.budget)
            slope, se = weighted_slope([r.budget for r in pts], [r.mean_time for r in pts],
                                       [r.time_se for r in pts])
            out.append(RegimeSlope(alg, crit, theta, regime, len(pts), slope, se))
    return out


def run_travel_time_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1,
                               net: Optional[SpatialNetwork] = None) -> ExperimentResult:
    """Mean travel time of successful trials per budget, plus per-regime slopes."""
    result = _run_cells(cfg.validate(), out_dir, threads, net)
    slopes = regime_slopes(result.stats, tuple(cfg.regimes))
    result.extra["regimes"] = slopes
    if out_dir is not None:
        fields = [f.name for f in dataclasses.fields(RegimeSlope)]
        path = Path(out_dir) / "regimes.csv"
        write_csv(path, fields, [[getattr(s, f) for f in fields] for s in slopes])
        result.files.append(path)
    return result


# distance analysis --------------------------------------------------------

def run_distance_analysis(cfg: ExperimentConfig, out_dir=None,
                          net: Optional[SpatialNetwork] = None) -> ExperimentResult:
    """Metric vs network distance over all node pairs: 2-D histogram, correlation and line fit."""
    cfg.validate()
    net = net if net is not None else build_network(cfg)
    fits = {}
    files = []
    for k, metric in enumerate(cfg.metrics):
        d, g, excluded = distance_pairs(net, metric)
        rng = np.random.default_rng(seed_sequence(cfg.master_seed, BOOTSTRAP_STREAM, k))
        fit = fit_points(d, g, metric, cfg.bootstrap, rng, n_excluded=excluded)
        fits[metric] = fit
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            hist, d_edges, g_edges = np.histogram2d(d, g, bins=cfg.hist_bins)
            rows = []
            for a in range(cfg.hist_bins):
                for b in range(cfg.hist_bins):
                    if hist[a, b]:
                        rows.append([d_edges[a], d_edges[a + 1], g_edges[b], g_edges[b + 1], int(hist[a, b])])
            path = out_dir / f"distance_hist_{metric}.csv"
            write_csv(path, ["d_lo", "d_hi", "g_lo", "g_hi", "count"], rows)
            files.append(path)
    if out_dir is not None:
        path = Path(out_dir) / "distance_fit.csv"
        write_csv(path, ["metric", "n_pairs", "n_excluded", "pearson_rho", "intercept", "intercept_lo",
                         "intercept_hi", "slope", "slope_lo", "slope_hi"],
                  [[m, f.n_pairs, f.n_excluded, f.pearson_rho, f.model.intercept, *f.intercept_ci,
                    f.model.slope, *f.slope_ci] for m, f in fits.items()])
        files.append(path)
    lam = float(net.lengths.mean()) if net.m else math.nan
    return ExperimentResult(cfg, [], extra={"fits": fits, "n": net.n, "m": net.m, "mean_edge_length": lam},
                            files=files)


# scaling ------------------------------------------------------------------

def fit_power_law(n: Sequence[float], t: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares fit of log t = log a + k log n; returns (k, stderr of k, a)."""
    x, y = np.log(np.asarray(n, dtype=float)), np.log(np.asarray(t, dtype=float))
    if len(set(x.tolist())) < 3:
        raise ConfigError("sides: fitting a scaling exponent needs at least three network sizes")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(math.sqrt(cov[0, 0])), float(math.exp(coef[1]))


def run_scaling_benchmark(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Wall-clock cost per routing attempt versus network size.

    Every run draws a fresh network and a random origin/target pair. The
    centralized cost is the routing-table solve plus the walk; the
    decentralized cost is the walk with all per-step solves (no memoization).
    """
    cfg.validate()
    grid = cfg.grid()
    params = cfg.convergence
    budget = max(cfg.budgets)
    theta = cfg.thetas[0]
    crit = cfg.criteria[0]
    rows = []
    for side in sorted(set(cfg.sides)):
        for run in range(cfg.runs):
            ss_net, ss_pair, ss_route = seed_sequence(cfg.master_seed, SCALING_STREAM, side, run).spawn(3)
            net = generate_kleinberg_variant(side, np.random.default_rng(ss_net),
                                             tuple(cfg.network.mu_range), tuple(cfg.network.sigma_range))
            prng = np.random.default_rng(ss_pair)
            origin, target = (int(v) for v in prng.choice(net.n, size=2, replace=False))
            for alg in cfg.algorithms:
                rng = np.random.default_rng(ss_route)
                started = time.perf_counter()
                if alg == "centralized":
                    table = solve(net, target, grid, params)
                    rec = route_with_table(net, table, origin, budget, crit, theta, rng)
                else:
                    router = DecentralizedRouter(net, target, grid, params, alg.split("-", 1)[1],
                                                 cfg.model(), cache_size=0)
                    rec = router.route(origin, budget, theta, crit, rng)
                elapsed = time.perf_counter() - started
                rows.append((alg, side, net.n, run, elapsed, rec.success, rec.step_count))
        log.info("scaling: side %d done", side)
    summary = []
    exponents = {}
    for alg in cfg.algorithms:
        ns, means = [], []
        for side in sorted(set(cfg.sides)):
            ts = np.array([r[4] for r in rows if r[0] == alg and r[1] == side])
            n = side * side
            summary.append((alg, side, n, len(ts), float(ts.mean()), float(ts.std(ddof=1) / math.sqrt(len(ts)))
                            if len(ts) > 1 else 0.0))
            ns.append(n)
            means.append(float(ts.mean()))
        exponents[alg] = fit_power_law(ns, means)
    result = ExperimentResult(cfg, [], extra={"runs": rows, "summary": summary, "exponents": exponents})
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        p1 = out_dir / "scaling_runs.csv"
        write_csv(p1, ["algorithm", "side", "n", "run", "seconds", "success", "steps"], rows)
        p2 = out_dir / "scaling_summary.csv"
        write_csv(p2, ["algorithm", "side", "n", "runs", "mean_seconds", "se_seconds"], summary)
        p3 = out_dir / "scaling_fit.csv"
        write_csv(p3, ["algorithm", "exponent", "exponent_se", "prefactor"],
                  [[a, *v] for a, v in exponents.items()])
        result.files += [p1, p2, p3]
    return result


RUNNERS = {
    "arrival": run_arrival_experiment,
    "threshold": run_threshold_sweep,
    "travel_time": run_travel_time_experiment,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> ExperimentResult:
    if cfg.experiment == "distance":
        return run_distance_analysis(cfg, out_dir)
    if cfg.experiment == "scaling":
        return run_scaling_benchmark(cfg, out_dir)
    return RUNNERS[cfg.experiment](cfg, out_dir, threads)
