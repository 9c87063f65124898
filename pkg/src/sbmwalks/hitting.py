"""Hitting times of the simple random walk: exact, spectral, and Monte Carlo.

The walk moves from ``v`` to a uniformly random neighbor (a loop at ``v``
counts as one neighbor, giving a self-transition with probability
``a_vv / d_v``).  Its stationary law is ``pi_v = d_v / (2|E| - |L|)``.  The
expected time to first reach ``w`` from ``v`` is written ``H_vw``; the two
averaged quantities of interest are the stationary average over starts
(``target_averaged[w]``) and over targets (``start_averaged[v]``, identical
for every ``v``).

The exact route factorizes ``I - P + 1 pi`` once (the fundamental matrix of
the chain) and reads every hitting time off that single inverse, so a full
n x n table costs one O(n^3) solve.  The spectral route evaluates the
eigenvalue sums of the normalized adjacency and must agree with the exact
route to 1e-6 relative on any connected graph; that agreement is a test
contract, not an asymptotic statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import walks
from .graph import Graph, GraphConnectivityError, is_connected
from .model import DerivedParams
from .spectral import NumericalError, SpectralDecomposition

__all__ = [
    "HittingResult",
    "WalkEstimate",
    "EigensumDecomposition",
    "exact_hitting",
    "exact_hitting_column",
    "exact_target_average",
    "stationary_distribution",
    "spectral_start_hitting",
    "spectral_target_hitting",
    "eigensum_decomposition",
    "mc_hitting",
    "write_hitting_csv",
]


@dataclass(frozen=True, eq=False)
class HittingResult:
    """Exact hitting times of one realization.

    ``hitting_matrix[v, w]`` is the expected number of steps from ``v`` to
    ``w`` (None when not materialized).  ``target_averaged[w]`` averages over
    the start under the stationary law; ``start_averaged[v]`` averages over
    the target and is constant across ``v`` up to solver rounding.
    """

    hitting_matrix: np.ndarray | None
    stationary: np.ndarray
    target_averaged: np.ndarray
    start_averaged: np.ndarray
    method: str


def stationary_distribution(graph: Graph) -> np.ndarray:
    total = 2 * graph.edge_count - graph.loop_count
    return graph.degrees.astype(np.float64) / total


def _fundamental_matrix(graph: Graph) -> np.ndarray:
    pi = stationary_distribution(graph)
    p = graph.adjacency.astype(np.float64) / graph.degrees.astype(np.float64)[:, None]
    system = np.eye(graph.n) - p + pi[None, :]
    try:
        return np.linalg.inv(system)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"fundamental-matrix system is singular: {exc}") from exc


def exact_hitting(graph: Graph, compute_matrix: bool = True) -> HittingResult:
    """Exact hitting times via one factorization of the fundamental matrix.

    With ``compute_matrix=False`` only the averaged vectors are returned
    (recommended beyond a few thousand vertices).  Requires connectivity.
    """
    if not is_connected(graph):
        raise GraphConnectivityError("hitting times require a connected graph")
    pi = stationary_distribution(graph)
    z = _fundamental_matrix(graph)
    diag = np.diagonal(z)
    if compute_matrix:
        h = (diag[None, :] - z) / pi[None, :]
        np.fill_diagonal(h, 0.0)
        target_averaged = pi @ h
        start_averaged = h @ pi
        h.setflags(write=False)
    else:
        h = None
        target_averaged = diag / pi - 1.0
        start_averaged = diag.sum() - z.sum(axis=1)
    for arr in (pi, target_averaged, start_averaged):
        arr.setflags(write=False)
    return HittingResult(
        hitting_matrix=h,
        stationary=pi,
        target_averaged=target_averaged,
        start_averaged=start_averaged,
        method="fundamental_matrix",
    )


def exact_hitting_column(graph: Graph, target: int) -> np.ndarray:
    """Hitting times into a single target, by one absorbing-system solve.

    Returns the vector ``H_{v, target}`` over all ``v`` (zero at the target).
    Cheaper than :func:`exact_hitting` when only one target is needed.
    """
    if not 0 <= target < graph.n:
        raise ValueError(f"target {target} out of range")
    if not is_connected(graph):
        raise GraphConnectivityError("hitting times require a connected graph")
    others = np.arange(graph.n) != target
    p = graph.adjacency.astype(np.float64) / graph.degrees.astype(np.float64)[:, None]
    system = np.eye(graph.n - 1) - p[np.ix_(others, others)]
    try:
        h_others = np.linalg.solve(system, np.ones(graph.n - 1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"absorbing system for target {target} is singular: {exc}") from exc
    out = np.zeros(graph.n)
    out[others] = h_others
    return out


def exact_target_average(graph: Graph, target: int) -> float:
    """Stationary-averaged hitting time of one target (single solve)."""
    col = exact_hitting_column(graph, target)
    return float(stationary_distribution(graph) @ col)


def _check_gap(decomposition: SpectralDecomposition) -> np.ndarray:
    vals = decomposition.eigenvalues
    if abs(vals[0] - 1.0) > 1e-8:
        raise NumericalError(f"leading eigenvalue {vals[0]!r} is not 1; not a connected normalized adjacency")
    if vals.size > 1 and 1.0 - vals[1] < 1e-12:
        raise NumericalError("graph effectively disconnected or bipartite-degenerate: unit gap collapsed")
    return vals


def spectral_start_hitting(decomposition: SpectralDecomposition) -> float:
    """Average-over-targets hitting time as the eigenvalue sum of the normalized adjacency.

    Equals ``sum_{k>=2} 1 / (1 - lambda_k)``; identical for every start
    vertex and equal to the exact value on connected graphs.
    """
    vals = _check_gap(decomposition)
    return float(np.sum(1.0 / (1.0 - vals[1:])))


def spectral_target_hitting(decomposition: SpectralDecomposition, graph: Graph, target: int) -> float:
    """Stationary-averaged hitting time of ``target`` from the spectral identity.

    Evaluates ``(2|E| - |L|) / d_w * sum_{k>=2} u_{k,w}^2 / (1 - lambda_k)``
    with unit-length eigenvectors ``u_k`` of the normalized adjacency.
    """
    vals = _check_gap(decomposition)
    if decomposition.eigenvectors is None:
        raise ValueError("target-averaged spectral hitting time needs eigenvectors")
    total = 2 * graph.edge_count - graph.loop_count
    uw2 = decomposition.eigenvectors[target, 1:] ** 2
    return float(total / graph.degrees[target] * np.sum(uw2 / (1.0 - vals[1:])))


@dataclass(frozen=True)
class EigensumDecomposition:
    """Geometric-series split of the target eigenvalue sum.

    The sum ``eigensum = sum_{k>=2} u_{k,w}^2 / (1 - lambda_k)`` equals
    ``1 + diag_term - stationary_term + tail`` exactly, where ``diag_term``
    is the normalized adjacency's diagonal entry at the target,
    ``stationary_term`` is twice the stationary mass of the target, and
    ``tail = sum_{k>=2} lambda_k^2 u_{k,w}^2 / (1 - lambda_k)``.  ``total``
    is the right-hand side; ``total - eigensum`` is pure rounding.
    ``tail_envelope`` (when parameters are supplied) is the concentration
    envelope ``constant * p_min^2 / (gamma_min ((m-1) q)^2)`` in the
    strongly assortative regime (surrogate kappa < 1) and
    ``constant / gamma_min`` otherwise.
    """

    diag_term: float
    stationary_term: float
    tail: float
    total: float
    eigensum: float
    tail_envelope: float | None
    regime: str | None
    constant: float


def eigensum_decomposition(
    decomposition: SpectralDecomposition,
    graph: Graph,
    target: int,
    params: DerivedParams | None = None,
    constant: float = 2.0,
) -> EigensumDecomposition:
    vals = _check_gap(decomposition)
    if decomposition.eigenvectors is None:
        raise ValueError("eigensum decomposition needs eigenvectors")
    uw2 = decomposition.eigenvectors[target, 1:] ** 2
    lam = vals[1:]
    tail = float(np.sum(lam**2 * uw2 / (1.0 - lam)))
    eigensum = float(np.sum(uw2 / (1.0 - lam)))
    d = graph.degrees.astype(np.float64)
    diag_term = float(graph.adjacency[target, target] / d[target])
    stationary_term = float(2.0 * stationary_distribution(graph)[target])
    envelope = None
    regime = None
    if params is not None and params.m > 1 and params.q > 0:
        kappa = params.kappa
        if kappa is not None and kappa < 1.0:
            regime = "assortative"
            envelope = constant * min(params.p) ** 2 / (params.gamma_min * ((params.m - 1) * params.q) ** 2)
        else:
            regime = "mixed"
            envelope = constant / params.gamma_min
    return EigensumDecomposition(
        diag_term=diag_term,
        stationary_term=stationary_term,
        tail=tail,
        total=1.0 + diag_term - stationary_term + tail,
        eigensum=eigensum,
        tail_envelope=envelope,
        regime=regime,
        constant=constant,
    )


@dataclass(frozen=True)
class WalkEstimate:
    """Monte Carlo estimate of one hitting time.

    ``estimate`` averages the completed walks only; ``truncated`` counts
    walks that hit ``max_steps`` first, and any truncation marks the
    estimate ``biased`` (such estimates are excluded from acceptance
    comparisons).  ``std_error`` is the sample standard deviation of the
    completed walks divided by ``sqrt(n_completed)``.
    """

    estimate: float
    std_error: float
    n_walks: int
    n_completed: int
    truncated: int
    max_steps: int
    biased: bool


def mc_hitting(
    graph: Graph,
    start: int,
    target: int,
    n_walks: int = 10_000,
    max_steps: int | None = None,
    seed: int = 0,
) -> WalkEstimate:
    """Estimate one hitting time from independent simulated walks.

    ``max_steps`` defaults to ``ceil(100 n log n)``, generous enough that
    truncation is essentially impossible on connected graphs at desk scale.
    The kernel (compiled or pure, see :mod:`sbmwalks.walks`) consumes one
    PCG64 double per step, so results are reproducible across platforms and
    kernels for a fixed seed.
    """
    if not 0 <= start < graph.n or not 0 <= target < graph.n:
        raise ValueError("start/target out of range")
    if n_walks < 1:
        raise ValueError("n_walks must be positive")
    if max_steps is None:
        max_steps = int(math.ceil(100 * graph.n * math.log(max(graph.n, 2))))
    if start == target:
        return WalkEstimate(
            estimate=0.0,
            std_error=0.0,
            n_walks=n_walks,
            n_completed=n_walks,
            truncated=0,
            max_steps=max_steps,
            biased=False,
        )
    indptr, indices = walks.graph_csr(graph)
    steps = walks.first_passage_steps(indptr, indices, start, target, n_walks, max_steps, seed)
    done = steps[steps >= 0].astype(np.float64)
    truncated = int(n_walks - done.size)
    if done.size == 0:
        return WalkEstimate(
            estimate=math.nan,
            std_error=math.nan,
            n_walks=n_walks,
            n_completed=0,
            truncated=truncated,
            max_steps=max_steps,
            biased=True,
        )
    std_error = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else math.nan
    return WalkEstimate(
        estimate=float(done.mean()),
        std_error=std_error,
        n_walks=n_walks,
        n_completed=int(done.size),
        truncated=truncated,
        max_steps=max_steps,
        biased=truncated > 0,
    )


def write_hitting_csv(
    graph: Graph,
    targets,
    exact: HittingResult,
    spectral_values: dict[int, float],
    mc_estimates: dict[int, WalkEstimate] | None,
    path,
) -> None:
    """Per-target CSV: ``w,block,d_w,exact,spectral,mc,mc_stderr`` plus a start-average footer."""
    mc_estimates = mc_estimates or {}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("w,block,d_w,H_w_exact,H_w_spectral,H_w_mc,mc_stderr\n")
        for w in targets:
            exact_v = float(exact.target_averaged[w])
            spec_v = spectral_values.get(w)
            est = mc_estimates.get(w)
            spec_s = "" if spec_v is None else repr(spec_v)
            mc_s = "" if est is None else repr(est.estimate)
            se_s = "" if est is None else repr(est.std_error)
            fh.write(f"{w},{graph.block_of[w]},{graph.degrees[w]},{exact_v!r},{spec_s},{mc_s},{se_s}\n")
        fh.write(f"# H_start,{float(exact.start_averaged[0])!r}\n")
