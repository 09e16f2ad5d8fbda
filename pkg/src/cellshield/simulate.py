"""Synthetic scenarios, cellwise contamination and the replication harness.

All randomness flows through counter-based Philox substreams keyed by
(replicate, purpose, group) on top of one base seed, so adding methods or
rerunning a subset never perturbs the generated data. Normal draws use the
inverse-CDF transform of open-interval uniforms, fixed so runs replicate
byte for byte.
"""

import concurrent.futures
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .classifier import DiscriminantModel, classify, fit_method, kl_distance, method_components
from .datasets import LabeledDataset
from .exceptions import NotComputableError
from .robust import group_summaries
from .solvers import PrecisionSet, SolverOptions, invert_pd

__all__ = [
    "ScenarioSpec",
    "BenchResult",
    "scenario_params",
    "generate",
    "contaminate",
    "run_bench",
    "bench_replicates_csv",
    "bench_summary_json",
]

GENERATOR_NAME = "philox4x64"
NORMAL_SAMPLER = "inverse_cdf"

_TRAIN, _TEST_LABELS, _TEST_DRAWS, _CELL_POSITIONS, _CELL_VALUES = range(5)


@dataclass(frozen=True)
class ScenarioSpec:
    """Configuration of one simulation study."""

    scenario: int
    p: int
    epsilon: float = 0.0
    n_per_group: int = 30
    n_test: int = 1000
    replicates: int = 100
    seed: int = 1

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        if self.scenario == 1 and self.p < 2:
            raise ValueError("scenario 1 needs p >= 2")
        if self.scenario == 2 and self.p < 4:
            raise ValueError("scenario 2 needs p >= 4")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.n_per_group < 2 or self.n_test < 1 or self.replicates < 1:
            raise ValueError("sizes must be positive (n_per_group >= 2)")

    @property
    def k(self):
        return 10 if self.scenario == 1 else 6


@dataclass(frozen=True)
class ScenarioParams:
    means: np.ndarray            # (K, p)
    covariances: np.ndarray      # (K, p, p)
    precisions: np.ndarray       # (K, p, p)
    contamination: np.ndarray    # (K, 2) mean and sd of replacement draws


def scenario_params(scenario, p) -> ScenarioParams:
    """True group parameters and contamination law of a scenario."""
    if scenario == 1:
        if p < 2:
            raise ValueError("scenario 1 needs p >= 2")
        k = 10
        means = np.zeros((k, p))
        precisions = np.zeros((k, p, p))
        for g in range(5):
            means[g, g % p] = 3.0
            means[g + 5] = -means[g]
            theta_front = np.eye(p)
            theta_front[0, 1] = theta_front[1, 0] = 0.9
            theta_back = np.eye(p)
            theta_back[p - 2, p - 1] = theta_back[p - 1, p - 2] = 0.9
            precisions[g] = theta_front
            precisions[g + 5] = theta_back
        covariances = np.stack([invert_pd(t)[0] for t in precisions])
        contamination = np.array([[-10.0, math.sqrt(0.2)]] * 5
                                 + [[10.0, math.sqrt(0.2)]] * 5)
        return ScenarioParams(means, covariances, precisions, contamination)
    if scenario == 2:
        if p < 4:
            raise ValueError("scenario 2 needs p >= 4")
        k = 6
        idx = np.arange(1, p + 1)
        sd_up = 9.0 * (idx - 1) / (p - 1) + 1.0
        sd_down = 9.0 * (p - idx) / (p - 1) + 1.0
        means = np.zeros((k, p))
        covariances = np.zeros((k, p, p))
        for g in range(3):
            means[g, g] = math.log(p)
            means[g + 3, p - (g + 1) - 1] = math.log(p)
            covariances[g] = np.diag(sd_up ** 2)
            covariances[g + 3] = np.diag(sd_down ** 2)
        precisions = np.stack([np.diag(1.0 / np.diag(c)) for c in covariances])
        contamination = np.array([[0.0, math.sqrt(50.0)]] * k)
        return ScenarioParams(means, covariances, precisions, contamination)
    raise ValueError("scenario must be 1 or 2")


def _substream(seed, replicate, purpose, group=0):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate, purpose, group))
    return np.random.Generator(np.random.Philox(ss))


def _standard_normal(gen, size):
    # uniforms on the centered 2^-53 grid stay strictly inside (0, 1)
    u = (gen.integers(0, 1 << 53, size=size) + 0.5) * 2.0 ** -53
    return ndtri(u)


def generate(spec: ScenarioSpec, replicate):
    """One replicate's training and test sets, deterministic in
    (seed, replicate)."""
    params = scenario_params(spec.scenario, spec.p)
    k, p = spec.k, spec.p
    chols = np.stack([np.linalg.cholesky(c) for c in params.covariances])
    n_k = spec.n_per_group
    train_values = np.empty((k * n_k, p))
    train_labels = np.repeat(np.arange(1, k + 1), n_k)
    for g in range(k):
        z = _standard_normal(_substream(spec.seed, replicate, _TRAIN, g + 1), (n_k, p))
        train_values[g * n_k:(g + 1) * n_k] = params.means[g] + z @ chols[g].T
    gen_labels = _substream(spec.seed, replicate, _TEST_LABELS)
    test_labels = gen_labels.integers(1, k + 1, size=spec.n_test)
    test_values = np.empty((spec.n_test, p))
    for g in range(k):
        rows = np.flatnonzero(test_labels == g + 1)
        if rows.shape[0] == 0:
            continue
        z = _standard_normal(
            _substream(spec.seed, replicate, _TEST_DRAWS, g + 1), (rows.shape[0], p))
        test_values[rows] = params.means[g] + z @ chols[g].T
    train = LabeledDataset(train_values, train_labels)
    # random test labels may leave a group unsampled, so K is pinned
    test = LabeledDataset(test_values, test_labels, n_groups=k)
    return train, test


def contaminate(train: LabeledDataset, spec: ScenarioSpec, replicate):
    """Replace floor(eps*n_k*p + 1/2) distinct cells per group by draws from
    the scenario's contamination law. eps = 0 returns the data unchanged."""
    if spec.epsilon == 0.0:
        return train
    params = scenario_params(spec.scenario, spec.p)
    values = train.values.copy()
    p = train.p
    for g in range(1, train.k + 1):
        rows = train.group_rows(g)
        n_g = rows.shape[0]
        count = int(math.floor(spec.epsilon * n_g * p + 0.5))
        if count == 0:
            continue
        if count > n_g * p:
            raise ValueError("contamination count exceeds available cells")
        gen_pos = _substream(spec.seed, replicate, _CELL_POSITIONS, g)
        flat = gen_pos.choice(n_g * p, size=count, replace=False)
        mean_c, sd_c = params.contamination[g - 1]
        draws = mean_c + sd_c * _standard_normal(
            _substream(spec.seed, replicate, _CELL_VALUES, g), count)
        values[rows[flat // p], flat % p] = draws
    return train.replace_values(values)


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------

BENCH_FORMAT = "cellshield-bench/1"


@dataclass(frozen=True)
class BenchResult:
    spec: ScenarioSpec
    methods: tuple
    cc: np.ndarray       # (R, M) percentage, NaN where not computable
    kl: np.ndarray       # (R, M)
    na: np.ndarray       # (R, M) bool

    def mean_cc(self, method):
        return self._mean(self.cc, method)

    def mean_kl(self, method):
        return self._mean(self.kl, method)

    def na_count(self, method):
        return int(self.na[:, self.methods.index(method)].sum())

    def _mean(self, array, method):
        col = array[:, self.methods.index(method)]
        keep = ~self.na[:, self.methods.index(method)]
        if not np.any(keep):
            return float("nan")
        return float(np.mean(col[keep]))


def _oracle_model(spec: ScenarioSpec, params: ScenarioParams) -> DiscriminantModel:
    k = spec.k
    return DiscriminantModel(
        method="oracle",
        kind="truth",
        centers=params.means.copy(),
        precisions=PrecisionSet(params.precisions.copy(), "truth", {}, True, 0),
        priors=np.full(k, 1.0 / k),
        label_names=tuple(str(g) for g in range(1, k + 1)),
        variable_names=tuple(f"x{j + 1}" for j in range(spec.p)),
    )


def _bench_replicate(spec, methods, opts, grid_points, rep):
    params = scenario_params(spec.scenario, spec.p)
    truth = params.precisions
    cc = np.full(len(methods), np.nan)
    kl = np.full(len(methods), np.nan)
    na = np.zeros(len(methods), dtype=bool)
    train, test = generate(spec, rep)
    train = contaminate(train, spec, rep)
    kinds_needed = sorted({method_components(m)[0] for m in methods if m != "oracle"})
    summaries = {kind: group_summaries(train, kind) for kind in kinds_needed}
    for j, method in enumerate(methods):
        try:
            if method == "oracle":
                model = _oracle_model(spec, params)
            else:
                kind = method_components(method)[0]
                model = fit_method(method, train, opts, grid_points,
                                   summaries=summaries[kind])
            report = classify(test.values, model, test.labels)
            cc[j] = report.cc
            kl[j] = kl_distance(model.precisions, truth)
        except NotComputableError:
            na[j] = True
    return rep, cc, kl, na


def default_workers():
    """Worker count: CELLSHIELD_THREADS caps the available CPU count."""
    cpus = os.cpu_count() or 1
    cap = os.environ.get("CELLSHIELD_THREADS")
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ValueError("CELLSHIELD_THREADS must be an integer") from None
        if cap < 1:
            raise ValueError("CELLSHIELD_THREADS must be at least 1")
        return min(cpus, cap)
    return cpus


def run_bench(spec: ScenarioSpec, methods, opts=None, grid_points=5,
              n_jobs=None, progress=None) -> BenchResult:
    """Replicate generate -> contaminate -> fit -> evaluate for each method.

    A method failing with NotComputableError is recorded as NA for that
    replicate and never aborts the run. "oracle" plugs in the true
    parameters and is allowed alongside the twelve fitted methods.
    Replicates run across processes when n_jobs (or the resolved worker
    count) allows; results do not depend on the degree of parallelism.
    """
    methods = tuple(methods)
    for m in methods:
        if m != "oracle":
            method_components(m)
    opts = opts or SolverOptions()
    r = spec.replicates
    cc = np.full((r, len(methods)), np.nan)
    kl = np.full((r, len(methods)), np.nan)
    na = np.zeros((r, len(methods)), dtype=bool)
    workers = min(default_workers() if n_jobs is None else max(int(n_jobs), 1), r)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_bench_replicate, spec, methods, opts, grid_points, rep)
                       for rep in range(r)]
            done = 0
            for fut in concurrent.futures.as_completed(futures):
                rep, cc_row, kl_row, na_row = fut.result()
                cc[rep], kl[rep], na[rep] = cc_row, kl_row, na_row
                done += 1
                if progress is not None:
                    progress(done, r)
    else:
        for rep in range(r):
            _, cc[rep], kl[rep], na[rep] = _bench_replicate(spec, methods, opts,
                                                            grid_points, rep)
            if progress is not None:
                progress(rep + 1, r)
    return BenchResult(spec, methods, cc, kl, na)


def bench_replicates_csv(result: BenchResult) -> str:
    lines = ["replicate,method,cc,kl,na"]
    for rep in range(result.spec.replicates):
        for j, method in enumerate(result.methods):
            if result.na[rep, j]:
                lines.append(f"{rep},{method},NA,NA,1")
            else:
                lines.append(
                    f"{rep},{method},{float(result.cc[rep, j])!r},"
                    f"{float(result.kl[rep, j])!r},0"
                )
    return "\n".join(lines) + "\n"


def bench_summary_json(result: BenchResult) -> str:
    import json

    spec = result.spec
    doc = {
        "version": BENCH_FORMAT,
        "scenario": spec.scenario,
        "p": spec.p,
        "k": spec.k,
        "epsilon": spec.epsilon,
        "n_per_group": spec.n_per_group,
        "n_test": spec.n_test,
        "replicates": spec.replicates,
        "seed": spec.seed,
        "generator": GENERATOR_NAME,
        "normal_sampler": NORMAL_SAMPLER,
        "methods": {
            method: {
                "mean_cc": _none_if_nan(result.mean_cc(method)),
                "mean_kl": _none_if_nan(result.mean_kl(method)),
                "na_count": result.na_count(method),
            }
            for method in result.methods
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _none_if_nan(value):
    return None if not np.isfinite(value) else value
