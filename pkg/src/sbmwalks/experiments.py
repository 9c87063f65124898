"""Replicate sweeps: laws of large numbers, central limit checks, norm bounds.

Every replicate draws an independent graph seeded through the documented
splitting rule (:func:`sbmwalks.graph.replicate_seed`), so runs are
reproducible bit-for-bit from the plan and the base seed, replicates never
share state, and they may execute in parallel.  Modes that require
connectivity resample a disconnected replicate with an incremented attempt
index (capped, counted, and reported); the edge-count mode uses every
sample as drawn.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .graph import Graph, GraphConnectivityError, is_connected, replicate_seed, sample
from .hitting import exact_hitting, exact_target_average
from .model import BlockModelConfig, DerivedParams, clt_standardize, derive
from .spectral import BoundReport, norm_bounds

__all__ = [
    "ExperimentPlan",
    "CltSummary",
    "LlnRecord",
    "LlnResult",
    "CltResult",
    "BoundsResult",
    "run_lln",
    "run_clt_target",
    "run_clt_edges",
    "run_bounds",
    "summarize_clt",
    "ks_distance",
    "normal_cdf",
    "write_lln_csv",
    "write_clt_csv",
    "write_bounds_csv",
    "write_histogram_csv",
]

MODES = ("lln_start", "lln_target", "clt_target", "clt_edges", "bounds")


@dataclass(frozen=True)
class ExperimentPlan:
    """A replicate sweep.

    ``targets`` applies to mode "lln_target": "blocks" averages the exact
    target hitting time over all vertices of each block before forming the
    ratio (one record per block and replicate), "first_of_block" uses the
    first vertex of each block, and an explicit tuple of vertex ids uses
    exactly those.  ``target_block`` (0-based) designates the block whose
    first vertex is the target in mode "clt_target"; the same vertex is used
    in every replicate to avoid selection effects.  ``base_seed`` defaults
    to the config seed.  ``output`` (optional) is where the run writes its
    CSV; CLT modes write a ``*_hist.csv`` histogram next to it.
    """

    config: BlockModelConfig
    replicates: int
    mode: str
    targets: str | tuple[int, ...] = "blocks"
    target_block: int = 0
    base_seed: int | None = None
    output: str | None = None
    clt_scaling: str = "auto"
    bound_c: float = 1.0
    bound_slack: float = 1.5
    bound_mode: str = "general"
    threads: int = 1
    resample_cap: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if isinstance(self.targets, str):
            if self.targets not in ("blocks", "first_of_block"):
                raise ValueError("targets must be 'blocks', 'first_of_block', or explicit vertex ids")
        else:
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
            if any(not 0 <= t < self.config.n for t in self.targets):
                raise ValueError("explicit targets out of range")
        if not 0 <= self.target_block < self.config.m:
            raise ValueError(f"target_block {self.target_block} out of range 0..{self.config.m - 1}")

    @property
    def seed(self) -> int:
        return self.config.seed if self.base_seed is None else self.base_seed


def _sample_connected(config: BlockModelConfig, base_seed: int, rep: int, cap: int) -> tuple[Graph, int]:
    """Sample replicate ``rep``, resampling (attempt index bump) until connected."""
    for attempt in range(cap):
        g = sample(replace(config, seed=replicate_seed(base_seed, rep, attempt)))
        if is_connected(g):
            return g, attempt
    raise GraphConnectivityError(
        f"replicate {rep}: no connected sample within {cap} attempts; "
        "the configuration is too sparse for connectivity-dependent experiments"
    )


def _map_replicates(func, argses, threads: int):
    if threads <= 1:
        return [func(a) for a in argses]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, argses))


@dataclass(frozen=True)
class LlnRecord:
    replicate: int
    block: int | None
    target: int | None
    ratio: float
    resamples: int


@dataclass(frozen=True)
class LlnResult:
    mode: str
    records: tuple[LlnRecord, ...]
    max_abs_deviation: float


def _lln_replicate(args) -> list[LlnRecord]:
    config, params, base_seed, rep, mode, targets, cap = args
    g, attempts = _sample_connected(config, base_seed, rep, cap)
    n, gamma_bar = params.n, params.gamma_bar
    gamma = np.asarray(params.gamma)
    if mode == "lln_start":
        res = exact_hitting(g, compute_matrix=False)
        ratios = res.start_averaged / n
        worst = int(np.argmax(np.abs(ratios - 1.0)))
        return [LlnRecord(rep, None, None, float(ratios[worst]), attempts)]
    res = exact_hitting(g, compute_matrix=False)
    h_target = res.target_averaged
    records = []
    if targets == "blocks":
        for b in range(config.m):
            mean_h = float(h_target[g.block_of == b].mean())
            records.append(LlnRecord(rep, b, None, mean_h * gamma[b] / (n * gamma_bar), attempts))
    else:
        ids = (
            tuple(b * config.block_size for b in range(config.m))
            if targets == "first_of_block"
            else targets
        )
        for w in ids:
            b = int(g.block_of[w])
            records.append(LlnRecord(rep, b, int(w), float(h_target[w]) * gamma[b] / (n * gamma_bar), attempts))
    return records


def run_lln(plan: ExperimentPlan) -> LlnResult:
    """Ratios of averaged hitting times to their first-order predictions.

    Mode "lln_start": one record per replicate, the per-start average over
    targets divided by ``n`` (the record keeps the worst start vertex).
    Mode "lln_target": ``ratio = H * gamma_block / (n * gamma_bar)`` per
    target selection, see :class:`ExperimentPlan`.
    """
    if plan.mode not in ("lln_start", "lln_target"):
        raise ValueError(f"run_lln needs mode lln_start/lln_target, got {plan.mode!r}")
    params = derive(plan.config)
    argses = [
        (plan.config, params, plan.seed, rep, plan.mode, plan.targets, plan.resample_cap)
        for rep in range(plan.replicates)
    ]
    nested = _map_replicates(_lln_replicate, argses, plan.threads)
    records = tuple(r for chunk in nested for r in chunk)
    max_dev = max(abs(r.ratio - 1.0) for r in records)
    result = LlnResult(mode=plan.mode, records=records, max_abs_deviation=max_dev)
    if plan.output:
        write_lln_csv(result, plan.output)
    return result


@dataclass(frozen=True)
class CltSummary:
    """Moments and Kolmogorov-Smirnov distance of standardized samples.

    ``ks_distance`` is the sup-gap between the empirical CDF and the CDF of
    a centered normal with variance ``target_variance``.  ``variance`` uses
    the unbiased estimator; ``skewness`` is the moment ratio
    ``m3 / m2^(3/2)``.  ``degenerate`` flags (numerically) constant samples,
    for which the distance reflects a point mass.
    """

    n: int
    mean: float
    variance: float
    skewness: float
    ks_distance: float
    target_variance: float
    degenerate: bool


def normal_cdf(x: float, variance: float = 1.0) -> float:
    """Exact normal CDF through ``math.erf`` (error far below 1e-7)."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0 * variance)))


def ks_distance(samples, cdf) -> float:
    """Sup-gap between the empirical CDF of ``samples`` and a reference CDF."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    n = xs.size
    ref = np.array([cdf(x) for x in xs])
    steps_hi = np.arange(1, n + 1) / n
    steps_lo = np.arange(0, n) / n
    return float(max(np.max(steps_hi - ref), np.max(ref - steps_lo)))


def summarize_clt(samples, target_variance: float) -> CltSummary:
    xs = np.asarray(samples, dtype=np.float64)
    n = xs.size
    mean = float(xs.mean())
    centered = xs - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    degenerate = m2 <= 1e-15 * (1.0 + mean * mean)
    skewness = 0.0 if degenerate else m3 / m2**1.5
    variance = float(xs.var(ddof=1)) if n > 1 else 0.0
    ks = ks_distance(xs, lambda x: normal_cdf(x, target_variance))
    return CltSummary(
        n=n,
        mean=mean,
        variance=variance,
        skewness=skewness,
        ks_distance=ks,
        target_variance=target_variance,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class CltRecord:
    replicate: int
    raw: float
    statistic: float
    resamples: int


@dataclass(frozen=True)
class CltResult:
    mode: str
    target: int | None
    records: tuple[CltRecord, ...]
    summary: CltSummary


def _clt_target_replicate(args) -> CltRecord:
    config, params, base_seed, rep, target, block, scaling, cap = args
    g, attempts = _sample_connected(config, base_seed, rep, cap)
    h_w = exact_target_average(g, target)
    stat = clt_standardize(params, block, h_w, mode=scaling)
    return CltRecord(rep, h_w, stat.value, attempts)


def run_clt_target(plan: ExperimentPlan) -> CltResult:
    """Standardized target-averaged hitting times over replicates.

    The target is the first vertex of ``plan.target_block`` in every
    replicate.  The standardization (and the variance of the reference
    normal law) follows ``plan.clt_scaling``; requesting "identical" with
    heterogeneous intra-block probabilities is an error.
    """
    if plan.mode != "clt_target":
        raise ValueError(f"run_clt_target needs mode clt_target, got {plan.mode!r}")
    params = derive(plan.config)
    block = plan.target_block
    target = block * plan.config.block_size
    # fail fast on an invalid scaling request instead of inside the workers
    probe = clt_standardize(params, block, float(params.n), mode=plan.clt_scaling)
    argses = [
        (plan.config, params, plan.seed, rep, target, block, plan.clt_scaling, plan.resample_cap)
        for rep in range(plan.replicates)
    ]
    records = tuple(_map_replicates(_clt_target_replicate, argses, plan.threads))
    summary = summarize_clt([r.statistic for r in records], probe.target_variance)
    result = CltResult(mode=plan.mode, target=target, records=records, summary=summary)
    if plan.output:
        write_clt_csv(result, plan.output)
        write_histogram_csv([r.statistic for r in records], _hist_path(plan.output))
    return result


def _clt_edges_replicate(args) -> CltRecord:
    config, base_seed, rep, mu, tau = args
    g = sample(replace(config, seed=replicate_seed(base_seed, rep, 0)))
    return CltRecord(rep, float(g.edge_count), (g.edge_count - mu) / tau, 0)


def run_clt_edges(plan: ExperimentPlan) -> CltResult:
    """Standardized total edge counts ``(|E| - mean) / sqrt(variance)``.

    Connectivity is irrelevant for the edge count, so samples are used as
    drawn (no resampling).  The reference law is the standard normal.
    """
    if plan.mode != "clt_edges":
        raise ValueError(f"run_clt_edges needs mode clt_edges, got {plan.mode!r}")
    params = derive(plan.config)
    if params.tau2 <= 0.0:
        raise ValueError("degenerate: no edge randomness (all probabilities are 0 or 1)")
    mu = params.mu_in + params.mu_out
    tau = math.sqrt(params.tau2)
    argses = [(plan.config, plan.seed, rep, mu, tau) for rep in range(plan.replicates)]
    records = tuple(_map_replicates(_clt_edges_replicate, argses, plan.threads))
    summary = summarize_clt([r.statistic for r in records], 1.0)
    result = CltResult(mode=plan.mode, target=None, records=records, summary=summary)
    if plan.output:
        write_clt_csv(result, plan.output)
        write_histogram_csv([r.statistic for r in records], _hist_path(plan.output))
    return result


@dataclass(frozen=True)
class BoundsRecord:
    replicate: int
    report: BoundReport
    resamples: int


@dataclass(frozen=True)
class BoundsResult:
    records: tuple[BoundsRecord, ...]
    pass_fraction: dict[str, float]
    calibrated_c: dict[str, float]


def _bounds_replicate(args) -> list[BoundsRecord]:
    config, params, base_seed, rep, c, slack, mode, cap = args
    g, attempts = _sample_connected(config, base_seed, rep, cap)
    return [BoundsRecord(rep, rpt, attempts) for rpt in norm_bounds(g, params, c=c, slack=slack, mode=mode)]


def run_bounds(plan: ExperimentPlan) -> BoundsResult:
    """Concentration-envelope checks per replicate.

    Summarizes the pass fraction per bound and, for the bounds where the
    envelope constant ``c`` enters, the smallest ``c`` that would cover
    every replicate ("calibrated c").
    """
    if plan.mode != "bounds":
        raise ValueError(f"run_bounds needs mode bounds, got {plan.mode!r}")
    params = derive(plan.config)
    argses = [
        (plan.config, params, plan.seed, rep, plan.bound_c, plan.bound_slack, plan.bound_mode, plan.resample_cap)
        for rep in range(plan.replicates)
    ]
    nested = _map_replicates(_bounds_replicate, argses, plan.threads)
    records = tuple(r for chunk in nested for r in chunk)
    names = sorted({r.report.name for r in records})
    pass_fraction = {}
    calibrated = {}
    for name in names:
        of_name = [r.report for r in records if r.report.name == name]
        pass_fraction[name] = sum(r.satisfied for r in of_name) / len(of_name)
        cs = [r.details["calibrated_c"] for r in of_name if "calibrated_c" in r.details]
        if cs:
            calibrated[name] = max(cs)
    result = BoundsResult(records=records, pass_fraction=pass_fraction, calibrated_c=calibrated)
    if plan.output:
        write_bounds_csv(result, plan.output)
    return result


def _hist_path(path: str) -> str:
    stem, dot, ext = str(path).rpartition(".")
    return f"{stem}_hist.{ext}" if dot else f"{path}_hist"


def write_lln_csv(result: LlnResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("replicate,block,target,ratio,resamples\n")
        for r in result.records:
            b = "" if r.block is None else r.block
            t = "" if r.target is None else r.target
            fh.write(f"{r.replicate},{b},{t},{r.ratio!r},{r.resamples}\n")
        fh.write(f"# mode,{result.mode}\n")
        fh.write(f"# max_abs_deviation,{result.max_abs_deviation!r}\n")


def write_clt_csv(result: CltResult, path) -> None:
    s = result.summary
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("replicate,raw,statistic,resamples\n")
        for r in result.records:
            fh.write(f"{r.replicate},{r.raw!r},{r.statistic!r},{r.resamples}\n")
        fh.write(f"# mode,{result.mode}\n")
        if result.target is not None:
            fh.write(f"# target,{result.target}\n")
        fh.write(f"# n,{s.n}\n")
        fh.write(f"# mean,{s.mean!r}\n")
        fh.write(f"# variance,{s.variance!r}\n")
        fh.write(f"# skewness,{s.skewness!r}\n")
        fh.write(f"# ks_distance,{s.ks_distance!r}\n")
        fh.write(f"# target_variance,{s.target_variance!r}\n")
        fh.write(f"# degenerate,{s.degenerate}\n")


def write_histogram_csv(samples, path, bins="auto") -> None:
    counts, edges = np.histogram(np.asarray(samples, dtype=np.float64), bins=bins)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_left,bin_right,count\n")
        for i, c in enumerate(counts):
            fh.write(f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)}\n")


def write_bounds_csv(result: BoundsResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("replicate,bound,empirical,envelope,satisfied,resamples\n")
        for r in result.records:
            b = r.report
            fh.write(f"{r.replicate},{b.name},{b.empirical!r},{b.envelope!r},{b.satisfied},{r.resamples}\n")
        for name, frac in result.pass_fraction.items():
            fh.write(f"# pass_fraction,{name},{frac!r}\n")
        for name, c in result.calibrated_c.items():
            fh.write(f"# calibrated_c,{name},{c!r}\n")
