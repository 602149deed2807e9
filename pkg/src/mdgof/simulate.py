"""Data-generating processes and replicated acceptance-rate studies.

Three missingness families, each in a null flavor (the tested restrictions
hold) and an alternative flavor (extra terms violate them):

  mar-*   missingness depends on past indicators and past observed values;
          the alternative adds future counterfactual values
  mnar-*  missingness depends on past indicators and future counterfactual
          values; the alternative adds past observed values
  bp-*    missingness of each variable depends on all other counterfactual
          values; the alternative couples the indicators

Coefficients are drawn fresh each replication from the configured uniform
range, which is how the complete-case proportion is controlled.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import ObservedDataset
from .estimation import EstimationError, estimate_odds_ratio
from .gof import (ACCEPTED, INCONCLUSIVE, REJECTED,
                  test_sequential_mar, test_sequential_mnar)
from .numerics import child_rng, expit, sample_mvn

SCENARIOS = ("mar-null", "mar-alt", "mnar-null", "mnar-alt", "bp-null", "bp-alt")
COEF_RANGES = ((-1.0, 1.0), (-0.5, 1.5), (0.0, 2.0))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    dist: str = "binary"            # "gaussian" or "binary"
    K: int = 4
    n: int = 10_000
    reps: int = 100
    param_range: tuple = (0.0, 2.0)
    alpha: float = 0.05
    seed: int = 0
    n_bootstrap: int = 200          # bp scenarios only
    bp_pair: tuple = (0, 1)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.dist not in ("gaussian", "binary"):
            raise ValueError(f"unknown dist {self.dist!r}")
        lo, hi = self.param_range
        if not lo < hi:
            raise ValueError("param_range must be (lo, hi) with lo < hi")
        if self.n < 1 or self.reps < 1 or self.K < 1:
            raise ValueError("n, reps, and K must be positive")


@dataclass(frozen=True)
class StudyResult:
    config: ScenarioConfig
    verdicts: tuple               # per conclusive-or-not replication
    acceptance_rate: float        # accepted / conclusive
    complete_case_proportion: float
    inconclusive: int
    per_step_rejections: dict
    thetas: tuple = ()            # bp scenarios: one estimate per replication
    theta_cis: tuple = ()


def generate_full_data(config: ScenarioConfig, rng):
    """Substantive data matrix before any masking."""
    K = config.K
    if config.dist == "gaussian":
        idx = np.arange(K)
        cov = 1.0 - np.abs(idx[:, None] - idx[None, :]) * 0.25
        return sample_mvn(config.n, np.zeros(K), cov, rng)
    # Binary chain: each variable logistic in its predecessors, coefficients
    # uniform on (-1, 1).
    x = np.zeros((config.n, K))
    for k in range(K):
        a0 = rng.uniform(-1.0, 1.0)
        logits = np.full(config.n, a0)
        for j in range(k):
            logits += rng.uniform(-1.0, 1.0) * x[:, j]
        x[:, k] = (rng.random(config.n) < expit(logits)).astype(float)
    return x


def generate_missingness(x, config: ScenarioConfig, rng):
    """Indicator matrix and masked proxy matrix for the configured scenario."""
    n, K = x.shape
    lo, hi = config.param_range
    u = lambda: rng.uniform(lo, hi)
    r = np.zeros((n, K), dtype=np.int8)
    scenario = config.scenario

    if scenario.startswith("mar"):
        # Forward generation: R_k sees past indicators and past observed
        # values; the alternative adds future counterfactuals.
        for k in range(K):
            logits = np.full(n, u())
            for j in range(k):
                rx = r[:, j] * np.where(r[:, j] == 1, x[:, j], 0.0)
                logits += u() * r[:, j] + u() * rx
            if scenario == "mar-alt":
                for i in range(k + 1, K):
                    logits += u() * x[:, i]
            r[:, k] = rng.random(n) < expit(logits)
    elif scenario.startswith("mnar"):
        for k in range(K):
            logits = np.full(n, u())
            for i in range(k + 1, K):
                logits += u() * x[:, i]
            for j in range(k):
                logits += u() * r[:, j]
                if scenario == "mnar-alt":
                    logits += u() * r[:, j] * np.where(r[:, j] == 1, x[:, j], 0.0)
            r[:, k] = rng.random(n) < expit(logits)
    elif scenario == "bp-null":
        for k in range(K):
            logits = np.full(n, u())
            for j in range(K):
                if j != k:
                    logits += u() * x[:, j]
            r[:, k] = rng.random(n) < expit(logits)
    else:  # bp-alt: product of p(R_k | R_succ, X_prec), generated backward
        for k in range(K - 1, -1, -1):
            logits = np.full(n, u())
            for j in range(k + 1, K):
                logits += u() * r[:, j]
            for i in range(k):
                logits += u() * x[:, i]
            r[:, k] = rng.random(n) < expit(logits)

    xstar = np.where(r == 1, x, np.nan)
    return r, xstar


def _replicate(config: ScenarioConfig, rep):
    rng = child_rng(config.seed, rep)
    x = generate_full_data(config, rng)
    r, xstar = generate_missingness(x, config, rng)
    names = tuple(f"X{k + 1}" for k in range(config.K))
    data = ObservedDataset(names, r, xstar)
    cc = data.complete_case_proportion()

    if config.scenario.startswith("bp"):
        try:
            est = estimate_odds_ratio(data, config.bp_pair, alpha=config.alpha,
                                      n_bootstrap=config.n_bootstrap, rng=rng)
        except EstimationError:
            return INCONCLUSIVE, cc, {}, None, None
        verdict = REJECTED if est.ci_excludes_one else ACCEPTED
        return verdict, cc, {}, est.theta_hat, est.bootstrap_ci

    if config.scenario.startswith("mar"):
        report = test_sequential_mar(data, names, config.alpha)
    else:
        report = test_sequential_mnar(data, names, config.alpha)
    rejections = {s.label: 1 for s in report.steps if s.decision == "reject"}
    return report.verdict, cc, rejections, None, None


def run_study(config: ScenarioConfig, n_jobs=1) -> StudyResult:
    """Replicated acceptance-rate study; replication r always uses the child
    stream (seed, r), so results are independent of execution order."""
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_replicate, [config] * config.reps,
                                    range(config.reps), chunksize=1))
    else:
        results = [_replicate(config, rep) for rep in range(config.reps)]

    verdicts = tuple(res[0] for res in results)
    cc = float(np.mean([res[1] for res in results]))
    per_step = {}
    for res in results:
        for label, cnt in res[2].items():
            per_step[label] = per_step.get(label, 0) + cnt
    conclusive = [v for v in verdicts if v != INCONCLUSIVE]
    accepted = sum(1 for v in conclusive if v == ACCEPTED)
    rate = accepted / len(conclusive) if conclusive else float("nan")
    thetas = tuple(res[3] for res in results if res[3] is not None)
    cis = tuple(res[4] for res in results if res[4] is not None)
    return StudyResult(config, verdicts, rate, cc,
                       sum(1 for v in verdicts if v == INCONCLUSIVE),
                       per_step, thetas, cis)


def sweep_curve(config: ScenarioConfig, n_grid, n_jobs=1):
    """One study per sample size; rows (n, acceptance_rate,
    complete_case_pct, inconclusive).  Each grid point gets its own seed
    stream so adding grid points never perturbs existing rows."""
    if not n_grid:
        raise ValueError("empty sample-size grid")
    rows = []
    for i, n in enumerate(n_grid):
        sub = replace(config, n=int(n),
                      seed=int(np.random.SeedSequence(
                          config.seed, spawn_key=(1_000_000 + i,)).entropy
                          % (2 ** 63)))
        res = run_study(sub, n_jobs=n_jobs)
        rows.append((int(n), res.acceptance_rate,
                     res.complete_case_proportion, res.inconclusive))
    return rows
