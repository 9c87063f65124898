"""Block model configuration, derived scalar parameters, and asymptotic-condition checks.

The model places ``n`` vertices into ``m`` equal blocks.  An edge between two
vertices of block ``i`` appears independently with probability ``p[i]``, an
edge across blocks with probability ``q``, and a loop at a vertex of block
``i`` with probability ``p[i]`` (when loops are enabled).  Everything in this
module is a deterministic function of the configuration; no randomness is
involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

__all__ = [
    "BlockModelConfig",
    "DerivedParams",
    "ConditionCheck",
    "ConditionReport",
    "LlnPrediction",
    "StandardizedStatistic",
    "derive",
    "check_conditions",
    "lln_prediction",
    "clt_standardize",
    "variance_correction",
    "load_config",
    "save_config",
]


@dataclass(frozen=True)
class BlockModelConfig:
    """Parameters of the block model.

    Attributes
    ----------
    n : int
        Vertex count; must be a positive multiple of ``m``.
    m : int
        Block count, ``1 <= m < n``.  All blocks have ``n // m`` vertices.
    p : tuple of float
        Intra-block edge probabilities, one per block, sorted descending
        (reorder the blocks if necessary).
    q : float
        Inter-block edge probability.
    allow_loops : bool
        Whether loops are sampled (with probability ``p[block]``).
    seed : int
        Seed for the sampling RNG; fully determines the realization.
    """

    n: int
    m: int
    p: tuple[float, ...]
    q: float
    allow_loops: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if self.m < 1 or self.m >= self.n:
            raise ValueError(f"block count must satisfy 1 <= m < n, got m={self.m}, n={self.n}")
        if self.n % self.m != 0:
            raise ValueError(f"n={self.n} is not a multiple of m={self.m}; blocks must have equal size")
        if len(self.p) != self.m:
            raise ValueError(f"p has {len(self.p)} entries but m={self.m}")
        if any(not 0.0 <= x <= 1.0 for x in self.p) or not 0.0 <= self.q <= 1.0:
            raise ValueError("all edge probabilities must lie in [0, 1]")
        if any(self.p[i] < self.p[i + 1] for i in range(self.m - 1)):
            raise ValueError("p must be sorted in descending order (reorder the blocks)")

    @property
    def block_size(self) -> int:
        return self.n // self.m

    @property
    def has_identical_p(self) -> bool:
        return self.m == 1 or min(self.p) == max(self.p)


@dataclass(frozen=True)
class DerivedParams:
    """Deterministic scalar quantities derived from a :class:`BlockModelConfig`.

    ``gamma[i]`` is the expected degree of a vertex in block ``i`` and
    ``upsilon2[i]`` its variance.  ``mu_in``/``mu_out`` and the ``tau``
    quantities are the mean and variance of the intra-/inter-block edge
    counts (loops counted inside blocks).  ``sigma2`` is the entrywise
    variance proxy used by the spectral-norm envelope.

    ``kappa_tilde``, ``zeta``, ``rho_n`` and ``alpha`` are populated only
    when all intra-block probabilities are identical; they drive the
    identical-p standardization of the target-averaged hitting time.  All
    ratio-type quantities are finite-size surrogates for limits.
    """

    n: int
    m: int
    p: tuple[float, ...]
    q: float
    gamma: tuple[float, ...]
    gamma_min: float
    gamma_max: float
    gamma_bar: float
    p_bar: float
    sigma2: float
    upsilon2: tuple[float, ...]
    upsilon_bar2: float
    mu_in: float
    mu_out: float
    tau_in2: float
    tau_out2: float
    tau2: float
    kappa_tilde: float | None
    zeta: float | None
    rho_n: float | None
    alpha: float | None
    kappa_value: float | None = field(repr=False)
    kappa_blocked: str | None = field(repr=False)

    @property
    def kappa(self) -> float | None:
        """Assortativity surrogate ``(m-1) q / min(p)``.

        Returns None for ``m == 1`` (undefined: there are no inter-block
        edges).  Raises ValueError when ``q == 0`` with ``m > 1``: the graph
        is disconnected in expectation and the surrogate is meaningless.
        """
        if self.kappa_blocked is not None:
            raise ValueError(self.kappa_blocked)
        return self.kappa_value

    @property
    def has_identical_p(self) -> bool:
        return self.m == 1 or min(self.p) == max(self.p)


def derive(config: BlockModelConfig) -> DerivedParams:
    """Compute all derived parameters for a configuration.

    Deterministic: identical configs yield identical results, field by field.
    """
    n, m, q = config.n, config.m, config.q
    p = config.p
    nb = config.block_size

    gamma = tuple(nb * pm + (m - 1) * nb * q for pm in p)
    gamma_min = min(gamma)
    gamma_max = max(gamma)
    gamma_bar = sum(gamma) / m
    p_bar = sum(p) / m
    sigma2 = (max(pm * (1.0 - pm) for pm in p) + (m - 1) * q * (1.0 - q)) / m
    upsilon2 = tuple(nb * pm * (1.0 - pm) + (m - 1) * nb * q * (1.0 - q) for pm in p)
    upsilon_bar2 = sum(upsilon2) / m

    within_pairs = nb * (nb + 1) / 2.0  # unordered intra-block pairs, loops included
    cross_pairs = m * (m - 1) / 2.0 * nb * nb
    mu_in = sum(within_pairs * pm for pm in p)
    mu_out = cross_pairs * q
    tau_in2 = sum(within_pairs * pm * (1.0 - pm) for pm in p)
    tau_out2 = cross_pairs * q * (1.0 - q)
    tau2 = tau_in2 + tau_out2

    if m == 1:
        kappa_value, kappa_blocked = None, None
    elif q == 0.0:
        kappa_value = None
        kappa_blocked = (
            "disconnected-in-expectation: q=0 with m>1 leaves the blocks mutually "
            "unreachable, so the assortativity surrogate is meaningless"
        )
    else:
        p_min = min(p)
        kappa_value = math.inf if p_min == 0.0 else (m - 1) * q / p_min
        kappa_blocked = None

    kappa_tilde = zeta = rho_n = alpha = None
    if config.has_identical_p:
        pv = p[0]
        num = (m - 1) * q * (1.0 - q)
        den = pv * (1.0 - pv)
        if den > 0.0:
            kappa_tilde = num / den
        elif num > 0.0:
            kappa_tilde = math.inf
        if q < 1.0:
            zeta = (1.0 - pv) / (1.0 - q)
        elif pv < 1.0:
            zeta = math.inf
        if kappa_tilde is not None:
            if math.isinf(kappa_tilde):
                rho_n = math.sqrt((m - 1) * q / (n * m * (1.0 - q)))
                alpha = 0.0
            else:
                rho_n = math.sqrt(pv / (n * m * (1.0 - pv)))
                if kappa_tilde == 0.0:
                    alpha = 0.0
                elif zeta is not None and math.isfinite(zeta):
                    alpha = variance_correction(kappa_tilde, zeta)

    return DerivedParams(
        n=n,
        m=m,
        p=p,
        q=q,
        gamma=gamma,
        gamma_min=gamma_min,
        gamma_max=gamma_max,
        gamma_bar=gamma_bar,
        p_bar=p_bar,
        sigma2=sigma2,
        upsilon2=upsilon2,
        upsilon_bar2=upsilon_bar2,
        mu_in=mu_in,
        mu_out=mu_out,
        tau_in2=tau_in2,
        tau_out2=tau_out2,
        tau2=tau2,
        kappa_tilde=kappa_tilde,
        zeta=zeta,
        rho_n=rho_n,
        alpha=alpha,
        kappa_value=kappa_value,
        kappa_blocked=kappa_blocked,
    )


@dataclass(frozen=True)
class ConditionCheck:
    """One evaluated asymptotic condition.

    ``direction`` is "vanish" when ``lhs/rhs`` must be small for the
    condition to hold asymptotically, and "dominate" when it must be large.
    ``satisfied`` compares the ratio against the report threshold
    (``ratio <= threshold`` resp. ``ratio >= 1/threshold``).
    """

    name: str
    lhs: float
    rhs: float
    ratio: float
    satisfied: bool
    direction: str


@dataclass(frozen=True)
class ConditionReport:
    """All conditions applicable to a mode, each with its numeric ratio."""

    mode: str
    threshold: float
    checks: tuple[ConditionCheck, ...]
    kappa: float | None
    kappa_tilde: float | None

    def to_csv(self) -> str:
        lines = ["condition,lhs,rhs,ratio,pass"]
        for c in self.checks:
            lines.append(f"{c.name},{c.lhs!r},{c.rhs!r},{c.ratio!r},{c.satisfied}")
        return "\n".join(lines) + "\n"

    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return math.inf if lhs > 0.0 else 0.0
    return lhs / rhs


def _check(name: str, lhs: float, rhs: float, threshold: float, direction: str) -> ConditionCheck:
    ratio = _ratio(lhs, rhs)
    if direction == "vanish":
        ok = ratio <= threshold
    else:
        ok = ratio >= 1.0 / threshold
    return ConditionCheck(name=name, lhs=lhs, rhs=rhs, ratio=ratio, satisfied=ok, direction=direction)


def check_conditions(config: BlockModelConfig, mode: str, threshold: float = 0.1) -> ConditionReport:
    """Evaluate the asymptotic admissibility conditions at the given finite n.

    The underlying statements are limits; here each is reported as a ratio at
    the concrete ``n`` together with a pass flag against ``threshold``
    (default 0.1).  Modes: "lln" (laws of large numbers), "clt" (general-p
    central limit theorem), "identical_p" (identical intra-block
    probabilities).  Conditions that only concern inter-block edges are
    omitted for ``m == 1``.
    """
    if mode not in ("lln", "clt", "identical_p"):
        raise ValueError(f"unknown mode {mode!r}; expected 'lln', 'clt' or 'identical_p'")
    params = derive(config)
    n, m, q = config.n, config.m, config.q
    p = config.p
    p_min, p_max = min(p), max(p)
    logn = math.log(n)
    checks: list[ConditionCheck] = []

    if mode == "lln":
        balance = (params.gamma_max / params.gamma_min) ** 2 if params.gamma_min > 0 else math.inf
        den = n * p_min + n * (m - 1) * q
        lhs = math.inf if den == 0.0 else m * logn**4 / den * balance
        checks.append(_check("connectivity", lhs, 1.0, threshold, "vanish"))
        if m > 1:
            rhs = (m * logn / n) ** 0.25 * p_min**1.25 * p_max**0.5
            checks.append(_check("inter_block_strength", ((m - 1) * q) ** 2, rhs, threshold, "dominate"))
    elif mode == "clt":
        centered = min(pm * (1.0 - pm) for pm in p)
        den = n * centered + n * (m - 1) * q * (1.0 - q)
        balance = (p_max / p_min) ** 2 if p_min > 0 else math.inf
        lhs = math.inf if den == 0.0 else m * logn**4 / den * balance
        checks.append(_check("connectivity_variance", lhs, 1.0, threshold, "vanish"))
        ups = [math.sqrt(u2) for u2 in params.upsilon2]
        worst_balance = max(
            _ratio(params.gamma[i] * params.p_bar, params.gamma_bar * ups[i]) for i in range(m)
        )
        checks.append(_check("degree_balance", worst_balance, 1.0, threshold, "vanish"))
        ubar = math.sqrt(params.upsilon_bar2)
        worst_var = max(_ratio(ubar * params.gamma[i], ups[i] * params.gamma_bar) for i in range(m))
        checks.append(_check("variance_balance", worst_var, math.sqrt(n), threshold, "vanish"))
        if m > 1:
            den = params.gamma_min * ((m - 1) * q) ** 2
            worst = max(_ratio(params.gamma[i], ups[i]) for i in range(m))
            checks.append(_check("spectral_tail", _ratio(worst * p_min**2, den), 1.0, threshold, "vanish"))
    else:
        if not config.has_identical_p:
            raise ValueError("identical_p mode requires all intra-block probabilities to be equal")
        pv = p[0]
        den = n * pv + n * (m - 1) * q
        lhs = math.inf if den == 0.0 else m * logn**4 / den
        checks.append(_check("connectivity_identical", lhs, 1.0, threshold, "vanish"))
        if m > 1:
            checks.append(
                _check("inter_block_strength_identical", q, math.sqrt(pv * logn / (n * m)), threshold, "dominate")
            )

    kappa = None if params.kappa_blocked is not None else params.kappa_value
    return ConditionReport(
        mode=mode,
        threshold=threshold,
        checks=tuple(checks),
        kappa=kappa,
        kappa_tilde=params.kappa_tilde,
    )


@dataclass(frozen=True)
class LlnPrediction:
    """First-order predictions for the averaged hitting times.

    ``start_hitting`` predicts the hitting time averaged over the target
    (identical for every start vertex); ``target_hitting`` predicts the
    stationary-averaged hitting time of a target in the given block.
    """

    start_hitting: float
    target_hitting: float


def lln_prediction(params: DerivedParams, block: int) -> LlnPrediction:
    """Predictions ``n`` and ``n * gamma_bar / gamma[block]`` (0-based block)."""
    if not 0 <= block < params.m:
        raise ValueError(f"block index {block} out of range 0..{params.m - 1}")
    return LlnPrediction(
        start_hitting=float(params.n),
        target_hitting=params.n * params.gamma_bar / params.gamma[block],
    )


@dataclass(frozen=True)
class StandardizedStatistic:
    """A standardized target-averaged hitting time with its target law."""

    value: float
    target_variance: float
    mode: str


def clt_standardize(
    params: DerivedParams, block: int, h_w: float, mode: str = "auto"
) -> StandardizedStatistic:
    """Standardize a target-averaged hitting time.

    In "general" mode the statistic is
    ``gamma^2 / (n * upsilon * gamma_bar) * (h_w - n * gamma_bar / gamma)``
    with target variance 1 (gamma, upsilon those of the target's block).  In
    "identical" mode (all ``p`` equal, otherwise rejected) it is
    ``rho_n * (h_w - n)`` with target variance ``1 - alpha``.  "auto" picks
    "identical" when available.
    """
    if not 0 <= block < params.m:
        raise ValueError(f"block index {block} out of range 0..{params.m - 1}")
    if mode == "auto":
        mode = "identical" if params.has_identical_p else "general"
    if mode == "general":
        g = params.gamma[block]
        u = math.sqrt(params.upsilon2[block])
        if u == 0.0:
            raise ValueError("degenerate configuration: zero degree variance")
        scale = g * g / (params.n * u * params.gamma_bar)
        value = scale * (h_w - params.n * params.gamma_bar / g)
        return StandardizedStatistic(value=float(value), target_variance=1.0, mode="general")
    if mode == "identical":
        if not params.has_identical_p:
            raise ValueError("identical-p standardization requested but intra-block probabilities differ")
        if params.rho_n is None or params.alpha is None:
            raise ValueError("identical-p scaling undefined for this configuration (degenerate p or q)")
        return StandardizedStatistic(
            value=float(params.rho_n * (h_w - params.n)),
            target_variance=1.0 - params.alpha,
            mode="identical",
        )
    raise ValueError(f"unknown mode {mode!r}; expected 'general', 'identical' or 'auto'")


def variance_correction(kappa_tilde: float, zeta: float) -> float:
    """Variance correction ``alpha`` for the identical-p standardization.

    Zero at ``kappa_tilde`` 0 or infinity; otherwise
    ``kt (2 z - 1 + kt z^2) / (1 + z kt)^2``.  Equivalently
    ``1 - alpha = (1 + kt) / (1 + z kt)^2``, the variance of the limiting
    normal law of the identical-p statistic.
    """
    if kappa_tilde < 0:
        raise ValueError("kappa_tilde must be non-negative")
    if kappa_tilde == 0.0 or math.isinf(kappa_tilde):
        return 0.0
    kt, z = kappa_tilde, zeta
    # same value as kt (2z - 1 + kt z^2) / (1 + z kt)^2, without overflow
    t = 1.0 + z * kt
    return 1.0 - (1.0 + kt) / t / t


_CONFIG_KEYS = {"n", "m", "p", "q", "allow_loops", "seed"}


def load_config(path) -> BlockModelConfig:
    """Read a configuration from a JSON file with keys n, m, p, q, allow_loops, seed."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path}: expected a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"config file {path}: unknown keys {sorted(unknown)}; allowed: {sorted(_CONFIG_KEYS)}")
    missing = {"n", "m", "p", "q"} - set(raw)
    if missing:
        raise ValueError(f"config file {path}: missing required keys {sorted(missing)}")
    if not isinstance(raw["p"], (list, tuple)):
        raise ValueError(f"config file {path}: 'p' must be an array of probabilities")
    return BlockModelConfig(
        n=int(raw["n"]),
        m=int(raw["m"]),
        p=tuple(float(x) for x in raw["p"]),
        q=float(raw["q"]),
        allow_loops=bool(raw.get("allow_loops", True)),
        seed=int(raw.get("seed", 0)),
    )


def save_config(config: BlockModelConfig, path) -> None:
    payload = {
        "n": config.n,
        "m": config.m,
        "p": list(config.p),
        "q": config.q,
        "allow_loops": config.allow_loops,
        "seed": config.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
