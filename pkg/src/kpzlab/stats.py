"""Statistical verification tools: KS tests, Wasserstein distance, the
Tracy-Widom reference table, and the axiom audit orchestrator.

The audits mix exact checks (replayed event logs, bit-equality of coupled
runs) with calibrated statistical ones (KS against the vendored TW-GUE
table, correlation bounds).  Every audit is a pure function of (config,
seed) and reports its raw statistics, so reruns are byte-identical.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass

import numpy as np

from .tolerances import (
    INDEP_CORR_TOL,
    KS_COEFF_1PCT,
    MARGINAL_KS_TOL,
    MARGINAL_MEAN_TOL,
)


@dataclass(frozen=True)
class SampleSet:
    """Labelled batch of real-valued observations with its provenance."""

    label: str
    values: tuple[float, ...]
    provenance: tuple = ()

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValueError("sample set must be nonempty")
        arr = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample values must be finite")

    @classmethod
    def from_array(cls, label: str, values, provenance=()) -> "SampleSet":
        return cls(label, tuple(float(v) for v in values), tuple(provenance))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class QuantileTable:
    """Reference distribution given by its quantiles plus mean and variance."""

    levels: tuple[float, ...]
    quantiles: tuple[float, ...]
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.quantiles):
            raise ValueError("levels and quantiles must align")
        lv = np.asarray(self.levels)
        qv = np.asarray(self.quantiles)
        if len(lv) and (np.any(np.diff(lv) <= 0) or np.any(np.diff(qv) <= 0)):
            raise ValueError("levels and quantiles must be strictly increasing")
        if len(lv) and (lv[0] <= 0 or lv[-1] >= 1):
            raise ValueError("levels must lie in (0, 1)")

    @classmethod
    def from_csv(cls, fp) -> "QuantileTable":
        levels, quantiles = [], []
        mean = variance = None
        header_seen = False
        for line in fp:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "kind,level,value":
                    raise ValueError("bad table header")
                header_seen = True
                continue
            kind, level, value = line.split(",")
            if kind == "quantile":
                levels.append(float(level))
                quantiles.append(float(value))
            elif kind == "mean":
                mean = float(value)
            elif kind == "variance":
                variance = float(value)
            else:
                raise ValueError(f"unknown row kind {kind!r}")
        if mean is None or variance is None:
            raise ValueError("table missing mean or variance row")
        return cls(tuple(levels), tuple(quantiles), mean, variance)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-transform draws, clamped to the tabulated range."""
        u = np.clip(rng.random(n), self.levels[0], self.levels[-1])
        return np.interp(u, self.levels, self.quantiles)


def load_tw_table() -> QuantileTable:
    """The vendored Tracy-Widom GUE table."""
    ref = importlib.resources.files("kpzlab.data").joinpath("tw_gue_quantiles.csv")
    with ref.open("r") as fp:
        return QuantileTable.from_csv(fp)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    threshold: float | None
    passed: bool | None


def ks_two_sample(a: SampleSet, b: SampleSet, alpha: float = 0.01) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test.

    The pass/fail verdict uses the asymptotic threshold
    c(alpha) * sqrt((n+m)/(n*m)) and is only offered when both samples have
    at least 20 points; the statistic itself is always computed.
    """
    xa = np.sort(a.as_array())
    xb = np.sort(b.as_array())
    n, m = len(xa), len(xb)
    allv = np.concatenate([xa, xb])
    ca = np.searchsorted(xa, allv, side="right") / n
    cb = np.searchsorted(xb, allv, side="right") / m
    stat = float(np.max(np.abs(ca - cb)))
    if n >= 20 and m >= 20:
        c_alpha = KS_COEFF_1PCT if alpha == 0.01 else math.sqrt(-math.log(alpha / 2) / 2)
        threshold = c_alpha * math.sqrt((n + m) / (n * m))
        return KSResult(stat, threshold, stat <= threshold)
    return KSResult(stat, None, None)


def ks_against_table(a: SampleSet, table: QuantileTable) -> float:
    """Sup over tabulated levels of |empirical CDF(quantile) - level|."""
    if not table.levels:
        raise ValueError("empty quantile table")
    xs = np.sort(a.as_array())
    ecdf = np.searchsorted(xs, np.asarray(table.quantiles), side="right") / len(xs)
    return float(np.max(np.abs(ecdf - np.asarray(table.levels))))


def wasserstein1(a: SampleSet, b: SampleSet) -> float:
    """Empirical L1-Wasserstein distance between equal-size samples."""
    xa = np.sort(a.as_array())
    xb = np.sort(b.as_array())
    if len(xa) != len(xb):
        raise ValueError("sample sizes must match")
    return float(np.mean(np.abs(xa - xb)))


def null_calibration(
    seed: int, runs: int = 200, n: int = 100, alpha: float = 0.01
) -> float:
    """Rejection rate of ks_two_sample on same-law (standard normal) pairs."""
    rng = np.random.default_rng(seed)
    rejects = 0
    for _ in range(runs):
        a = SampleSet.from_array("a", rng.standard_normal(n))
        b = SampleSet.from_array("b", rng.standard_normal(n))
        if not ks_two_sample(a, b, alpha).passed:
            rejects += 1
    return rejects / runs


def map_replicas(worker, args_list, jobs: int = 1) -> list:
    """Run worker over args, optionally on a process pool.

    Results come back in argument order (replica order), so the reduction is
    schedule-independent; each worker must derive all randomness from its own
    arguments.
    """
    if jobs <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    import concurrent.futures

    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, args_list))


AXIOM_KEYS = (
    "triangle",
    "independent-increments",
    "kpz-marginals",
    "monotonicity",
    "shift-commutativity",
)


def _audit_triangle(config) -> dict:
    from .clocks import ClockField
    from .exclusion import certified_region
    from .metric import dpi_by_evolution, triangle_audit

    lo, hi = config.window
    horizon = config.horizon
    chains = violations = 0
    seeds = list(range(config.seed, config.seed + config.audit_seeds))
    for s in seeds:
        clock = ClockField(s, horizon=horizon)
        region = certified_region((lo, hi), 1, horizon)
        if region.empty:
            raise ValueError("window too small for the audit horizon")
        mids = [(z, horizon / 2) for z in region.sites()[:: config.chain_stride]]
        ends = [(y, horizon) for y in region.sites()[:: config.chain_stride]]
        grid = dpi_by_evolution(
            clock,
            [(0, 0.0)] + mids,
            mids + ends,
            (lo, hi),
            check_certified=False,
        )
        report = triangle_audit(grid)
        chains += report["chains"]
        violations += report["violations"]
    return {
        "passed": violations == 0,
        "seeds": seeds,
        "stats": {"chains": chains, "violations": violations},
    }


def _audit_independent_increments(config) -> dict:
    from .fast import stationary_increment_pairs

    d1, d2 = stationary_increment_pairs(config.seed, config.replicas, config.horizon)
    rho = float(np.corrcoef(d1, d2)[0, 1])
    return {
        "passed": abs(rho) <= INDEP_CORR_TOL,
        "seeds": [config.seed],
        "stats": {"correlation": rho, "replicas": config.replicas},
    }


def _audit_kpz_marginals(config) -> dict:
    from .fast import wedge_endpoint_samples

    table = load_tw_table()
    samples = wedge_endpoint_samples(config.seed, config.epsilon, config.replicas)
    sample_set = SampleSet.from_array("one-point", samples, (config.seed,))
    stat = ks_against_table(sample_set, table)
    mean = float(np.mean(samples))
    passed = stat <= MARGINAL_KS_TOL and abs(mean - table.mean) <= MARGINAL_MEAN_TOL
    return {
        "passed": passed,
        "seeds": [config.seed],
        "stats": {
            "ks": stat,
            "mean": mean,
            "table_mean": table.mean,
            "epsilon": config.epsilon,
            "replicas": config.replicas,
        },
    }


def _audit_monotonicity(config) -> dict:
    from .clocks import ClockField
    from .exclusion import CoupledEnsemble, check_monotone, evolve_asep_exotic
    from .lattice import narrow_wedge

    lo, hi = config.window
    seeds = list(range(config.seed, config.seed + config.audit_seeds))
    failures = 0
    for s in seeds:
        clock = ClockField(s, horizon=config.horizon)
        wedge = narrow_wedge(0, lo, hi)
        ens = CoupledEnsemble((wedge, _raise_profile(wedge, 2)), clock)
        ens = evolve_asep_exotic(
            ens, config.coupling, config.p1, config.pm1, config.horizon
        )
        ok, _ = check_monotone(ens)
        if not ok:
            failures += 1
    return {
        "passed": failures == 0,
        "seeds": seeds,
        "stats": {"failures": failures},
    }


def _raise_profile(h, c: int):
    from dataclasses import replace

    return replace(h, values=tuple(v + c for v in h.values))


def _audit_shift_commutativity(config) -> dict:
    from .exclusion import shift_equivariance_check

    a, b = config.coupling
    seeds = list(range(config.seed, config.seed + config.audit_seeds))
    failures = 0
    checked = 0
    for s in seeds:
        for m in (-1, 1):
            if (m * (a + b)) % 2 != 0:
                m *= 2
            checked += 1
            if not shift_equivariance_check(
                config.coupling, m, s, config.horizon, config.p1, config.pm1,
                window=config.window,
            ):
                failures += 1
    return {
        "passed": failures == 0,
        "seeds": seeds,
        "stats": {"failures": failures, "checked": checked},
    }


_AUDITS = {
    "triangle": _audit_triangle,
    "independent-increments": _audit_independent_increments,
    "kpz-marginals": _audit_kpz_marginals,
    "monotonicity": _audit_monotonicity,
    "shift-commutativity": _audit_shift_commutativity,
}


def axiom_audit(config) -> dict:
    """Run the selected axiom audits and collect a JSON-ready report."""
    from . import __version__

    report_axioms = {}
    for key in config.axioms:
        if key not in _AUDITS:
            raise ValueError(f"unknown axiom key {key!r}")
    for key in config.axioms:
        report_axioms[key] = _AUDITS[key](config)
    return {
        "tool_version": __version__,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "axioms": report_axioms,
        "passed": all(v["passed"] for v in report_axioms.values()),
    }
