"""p-multilevel Monte Carlo: allocation, pilot estimation, coupled runs.

Levels are polynomial degrees of the boundary solver.  Level p > 0 samples
the coupled difference between degrees p and p-1 on the same realization;
means and (conjugated) second moments telescope across levels.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .interface import CauchyData, InterfaceMoments

CHUNK = 16  # leaf width of the pairwise reduction tree


@dataclass(frozen=True)
class LevelStats:
    """Cost and variance of one telescoping level."""

    degree: int
    cost: float
    variance: float
    wall_seconds: float = 0.0

    def __post_init__(self):
        if self.cost <= 0:
            raise ValueError("cost must be positive")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")


@dataclass(frozen=True)
class MLMCPlan:
    """Sample counts per level, with the decay factors that produced them."""

    max_degree: int
    counts: np.ndarray = field(repr=False)
    gammas: np.ndarray = field(repr=False)
    anchor: str = "epsilon"

    def __post_init__(self):
        if len(self.counts) != self.max_degree + 1:
            raise ValueError("need one sample count per level")
        if np.any(self.counts < 1):
            raise ValueError("sample counts must be at least 1")


def optimal_allocation(costs, variances, eps: float) -> MLMCPlan:
    """Cost-minimal counts subject to sum(v_p / N_p) <= eps^2.

    Lagrange solution: N_p = ceil(sqrt(lambda v_p / c_p)) with
    lambda = (sum_p sqrt(c_p v_p) / eps^2)^2; ceiling keeps the constraint.
    """
    c = np.asarray(costs, dtype=float)
    v = np.asarray(variances, dtype=float)
    if np.any(c <= 0) or np.any(v < 0) or eps <= 0:
        raise ValueError("need positive costs, nonnegative variances, eps > 0")
    if np.all(v == 0):
        counts = np.ones(len(c), dtype=int)
    else:
        lam = (np.sqrt(c * v).sum() / eps**2) ** 2
        counts = np.maximum(np.ceil(np.sqrt(lam * v / c) - 1e-12).astype(int), 1)
    return MLMCPlan(len(c) - 1, counts, gamma_factors(c, np.maximum(v, 1e-300)), "epsilon")


def top_anchored_plan(costs, variances, n_top: int) -> MLMCPlan:
    """Fix the finest level at ``n_top`` samples and grow counts toward the
    coarse levels by the decay factors (gammas[p] maps level p+1 to p)."""
    if n_top < 1:
        raise ValueError("anchor count must be at least 1")
    c = np.asarray(costs, dtype=float)
    v = np.asarray(variances, dtype=float)
    gammas = gamma_factors(c, v)
    counts = np.empty(len(c), dtype=int)
    counts[-1] = n_top
    for p in range(len(c) - 2, -1, -1):
        counts[p] = max(int(math.ceil(counts[p + 1] * min(gammas[p], 1e6))), counts[p + 1])
    return MLMCPlan(len(c) - 1, counts, gammas, "top")


def gamma_factors(costs, variances) -> np.ndarray:
    """Per-level sample decrease factors sqrt(v_{p-1}/v_p) * sqrt(c_p/c_{p-1}).

    A vanishing level variance yields +inf, flagging a level that can be
    dropped.
    """
    c = np.asarray(costs, dtype=float)
    v = np.asarray(variances, dtype=float)
    if np.any(c <= 0) or np.any(v < 0):
        raise ValueError("need positive costs and nonnegative variances")
    out = np.empty(len(c) - 1)
    for p in range(1, len(c)):
        if v[p] == 0:
            out[p - 1] = np.inf
        else:
            out[p - 1] = math.sqrt(v[p - 1] / v[p]) * math.sqrt(c[p] / c[p - 1])
    return out


def plan_cost(plan: MLMCPlan, costs) -> float:
    return float(np.dot(plan.counts, np.asarray(costs, dtype=float)))


def plan_variance(plan: MLMCPlan, variances) -> float:
    return float((np.asarray(variances, dtype=float) / plan.counts).sum())


# --------------------------------------------------------------------------
# samples and accumulation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleFields:
    """Observables of one solve: Cauchy data on T and the field at the
    evaluation points."""

    cauchy: CauchyData
    point_values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CoupledSample:
    """Level quantity: fine-degree fields and, for p > 0, the coarse ones."""

    fine: SampleFields
    coarse: SampleFields | None = None


class _Partial:
    """Sums of first and second moments over a contiguous index range."""

    __slots__ = ("n", "mean_parts", "second_parts")

    def __init__(self, n, mean_parts, second_parts):
        self.n = n
        self.mean_parts = mean_parts
        self.second_parts = second_parts

    @staticmethod
    def from_chunk(samples: list[CoupledSample]) -> "_Partial":
        fine_u = np.stack([s.fine.cauchy.values for s in samples])
        fine_d = np.stack([s.fine.cauchy.normal_derivatives for s in samples])
        fine_p = np.stack([s.fine.point_values for s in samples])
        means = [fine_u.sum(axis=0), fine_d.sum(axis=0), fine_p.sum(axis=0)]
        seconds = [
            fine_u.T @ fine_u.conj(),
            fine_u.T @ fine_d.conj(),
            fine_d.T @ fine_d.conj(),
            fine_p.T @ fine_p.conj(),
        ]
        if samples[0].coarse is not None:
            cu = np.stack([s.coarse.cauchy.values for s in samples])
            cd = np.stack([s.coarse.cauchy.normal_derivatives for s in samples])
            cp = np.stack([s.coarse.point_values for s in samples])
            means[0] -= cu.sum(axis=0)
            means[1] -= cd.sum(axis=0)
            means[2] -= cp.sum(axis=0)
            seconds[0] -= cu.T @ cu.conj()
            seconds[1] -= cu.T @ cd.conj()
            seconds[2] -= cd.T @ cd.conj()
            seconds[3] -= cp.T @ cp.conj()
        return _Partial(len(samples), means, seconds)

    def combined(self, other: "_Partial") -> "_Partial":
        return _Partial(
            self.n + other.n,
            [a + b for a, b in zip(self.mean_parts, other.mean_parts)],
            [a + b for a, b in zip(self.second_parts, other.second_parts)],
        )


class MomentAccumulator:
    """Order-fixed pairwise reduction of per-sample moment contributions.

    Leaves are fixed CHUNK-aligned index ranges; partial sums are combined
    whenever two buddies of equal width exist (binary counter).  The final
    state depends only on the set of inserted samples, so accumulating in
    any worker order, or merging accumulators in any association, is
    bitwise identical.
    """

    def __init__(self):
        self._pending: dict[int, list] = {}
        self._tree: dict[tuple[int, int], _Partial] = {}

    def insert(self, index: int, sample: CoupledSample) -> None:
        base = index - index % CHUNK
        bucket = self._pending.setdefault(base, [None] * CHUNK)
        if bucket[index - base] is not None:
            raise ValueError(f"duplicate sample index {index}")
        bucket[index - base] = sample
        if all(s is not None for s in bucket):
            del self._pending[base]
            self._flush_chunk(base, bucket)

    def _flush_chunk(self, base: int, bucket) -> None:
        samples = [s for s in bucket if s is not None]
        self._add_node(base // CHUNK, 0, _Partial.from_chunk(samples))

    def _add_node(self, pos: int, level: int, part: _Partial) -> None:
        while True:
            buddy = (pos ^ 1, level)
            if buddy in self._tree:
                other = self._tree.pop(buddy)
                left, right = (other, part) if pos & 1 else (part, other)
                part = left.combined(right)
                pos //= 2
                level += 1
            else:
                self._tree[(pos, level)] = part
                return

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Union of two accumulators over disjoint, chunk-aligned index sets."""
        out = MomentAccumulator()
        for acc in (self, other):
            for base, bucket in acc._pending.items():
                for off, s in enumerate(bucket):
                    if s is not None:
                        out.insert(base + off, s)
        for acc in (self, other):
            for (pos, level), part in sorted(acc._tree.items(), key=lambda kv: (-kv[0][1], kv[0][0])):
                if (pos, level) in out._tree:
                    raise ValueError("accumulators overlap on a chunk range")
                out._add_node(pos, level, part)
        return out

    def totals(self) -> _Partial:
        """Collapse all outstanding partials in a fixed canonical order."""
        snapshot = MomentAccumulator()
        for base, bucket in sorted(self._pending.items()):
            snapshot._flush_chunk(base, bucket)
        for (pos, level), part in sorted(self._tree.items(), key=lambda kv: (-kv[0][1], kv[0][0])):
            snapshot._add_node(pos, level, part)
        parts = [snapshot._tree[k] for k in sorted(snapshot._tree, key=lambda k: (-k[1], k[0]))]
        total = parts[0]
        for part in parts[1:]:
            total = total.combined(part)
        return total


@dataclass(frozen=True)
class LevelMoments:
    """Per-level MLMC contribution (sums divided by the sample count)."""

    degree: int
    n_samples: int
    mean_u: np.ndarray = field(repr=False)
    mean_dn: np.ndarray = field(repr=False)
    mean_points: np.ndarray = field(repr=False)
    cor_uu: np.ndarray = field(repr=False)
    cor_ud: np.ndarray = field(repr=False)
    cor_dd: np.ndarray = field(repr=False)
    cor_points: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CampaignResult:
    """Telescoped moments plus per-level contributions and diagnostics."""

    plan: MLMCPlan
    levels: list
    interface_moments: InterfaceMoments
    point_mean: np.ndarray = field(repr=False)
    point_correlation: np.ndarray = field(repr=False)

    def partial(self, max_degree: int) -> "CampaignResult":
        """Moments of the telescope truncated at ``max_degree``."""
        levels = [l for l in self.levels if l.degree <= max_degree]
        return _combine_levels(self.plan, levels)


def _combine_levels(plan: MLMCPlan, levels) -> CampaignResult:
    mean_u = sum(l.mean_u for l in levels)
    mean_dn = sum(l.mean_dn for l in levels)
    mean_p = sum(l.mean_points for l in levels)
    cor_uu = sum(l.cor_uu for l in levels)
    cor_ud = sum(l.cor_ud for l in levels)
    cor_dd = sum(l.cor_dd for l in levels)
    cor_p = sum(l.cor_points for l in levels)
    moments = InterfaceMoments(mean_u, mean_dn, cor_uu, cor_ud, cor_dd)
    return CampaignResult(plan, list(levels), moments, mean_p, cor_p)


def _run_level(sampler, degree: int, count: int, base_seed: int, workers: int,
               executor=None) -> LevelMoments:
    acc = MomentAccumulator()
    if executor is None:
        for n in range(count):
            acc.insert(n, sampler.coupled_sample(degree, base_seed, n))
    else:
        from concurrent.futures import as_completed

        futures = {
            executor.submit(_worker_sample, degree, base_seed, n): n
            for n in range(count)
        }
        for fut in as_completed(futures):
            acc.insert(futures[fut], fut.result())
    tot = acc.totals()
    inv = 1.0 / count
    return LevelMoments(
        degree,
        count,
        tot.mean_parts[0] * inv,
        tot.mean_parts[1] * inv,
        tot.mean_parts[2] * inv,
        tot.second_parts[0] * inv,
        tot.second_parts[1] * inv,
        tot.second_parts[2] * inv,
        tot.second_parts[3] * inv,
    )


_WORKER_SAMPLER = None


def _worker_init(sampler):
    global _WORKER_SAMPLER
    _WORKER_SAMPLER = sampler


def _worker_sample(degree, base_seed, index):
    return _WORKER_SAMPLER.coupled_sample(degree, base_seed, index)


def mlmc_run(sampler, plan: MLMCPlan, base_seed: int, workers: int = 1) -> CampaignResult:
    """Run the telescoping estimator.

    Level-p corrections draw stream (base_seed, p, n) and use the same
    realization for both degrees of the pair.  Results are bitwise
    reproducible for fixed (base_seed, plan) at any worker count.
    """
    executor = None
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        executor = ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(sampler,)
        )
    try:
        levels = [
            _run_level(sampler, p, int(plan.counts[p]), base_seed, workers, executor)
            for p in range(plan.max_degree + 1)
        ]
    finally:
        if executor is not None:
            executor.shutdown()
    return _combine_levels(plan, levels)


def pilot_estimate(sampler, max_degree: int, n_pilot: int, base_seed: int,
                   workers: int = 1) -> list[LevelStats]:
    """Coupled pilot samples per level; the variance of the level quantity is
    the max over interface points of the componentwise complex variance.

    Pilot streams use levels above ``max_degree`` so the estimator's own
    streams stay untouched; deterministic operation counts provide the cost
    so that reports are reproducible (wall seconds are recorded alongside).
    """
    if n_pilot < 2:
        raise ValueError("need at least two pilot samples")
    stats = []
    for p in range(max_degree + 1):
        t0 = time.perf_counter()
        fine = []
        coarse = []
        for n in range(n_pilot):
            s = sampler.coupled_sample(p, base_seed, n, pilot_tag=max_degree + 1)
            fine.append(np.concatenate([s.fine.cauchy.values, s.fine.cauchy.normal_derivatives]))
            if s.coarse is not None:
                coarse.append(
                    np.concatenate([s.coarse.cauchy.values, s.coarse.cauchy.normal_derivatives])
                )
        wall = (time.perf_counter() - t0) / n_pilot
        quantity = np.stack(fine)
        if coarse:
            quantity = quantity - np.stack(coarse)
        var = (quantity.real.var(axis=0, ddof=1) + quantity.imag.var(axis=0, ddof=1)).max()
        stats.append(LevelStats(p, sampler.level_cost(p), float(var), wall))
    return stats


def error_vs_reference(run: CampaignResult, ref: CampaignResult, iface, kappa: float,
                       eval_points: np.ndarray) -> tuple[float, float]:
    """Max propagated mean and correlation differences at the evaluation
    points, both computed through the interface representation."""
    from .interface import propagate_correlation_matrix, propagate_mean

    if run.interface_moments.mean_u.shape != ref.interface_moments.mean_u.shape:
        raise ValueError("interface grids do not match")
    mean_a = propagate_mean(iface, run.interface_moments, eval_points, kappa)
    mean_b = propagate_mean(iface, ref.interface_moments, eval_points, kappa)
    cor_a = propagate_correlation_matrix(iface, run.interface_moments, eval_points, eval_points, kappa)
    cor_b = propagate_correlation_matrix(iface, ref.interface_moments, eval_points, eval_points, kappa)
    return float(np.abs(mean_a - mean_b).max()), float(np.abs(cor_a - cor_b).max())
