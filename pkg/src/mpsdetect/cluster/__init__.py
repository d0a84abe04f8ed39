"""Constrained clustering of pulse-delay series.

A buffer's multi-pulse delay measurements are grouped into disjoint
clusters whose member arrival times behave like a click train: every
consecutive gap lies inside the admissible inter-click range, and the
gap sequence is consistent (bounded |log| ratio). Among all such
groupings the solver minimizes a utility that rewards many large,
delay-stable, intensity-balanced clusters; low utility means the buffer
looks whale-like.

The combinatorial search kernels live in a compiled extension with a
pure-Python twin (see :mod:`mpsdetect.cluster.backend`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mpsdetect.cluster import backend
from mpsdetect.mps import MpsSeries

__all__ = [
    "ClusteringConfig",
    "ClusterAssignment",
    "ClusterSolution",
    "ConsistencyModel",
    "REFERENCE_CONSISTENCY",
    "consistency",
    "k_max",
    "cluster_term",
    "cluster_utility",
    "feasible_subsets",
    "is_time_feasible",
    "solve_clustering",
]


@dataclass(frozen=True)
class ConsistencyModel:
    """Reference spread of the |log| gap-ratio statistic for real click trains.

    Two-component model (main lobe / outliers from rate changes) kept as
    documentation for the default consistency bound; never used in any
    computation here.
    """

    sigma_main: float = 0.0526
    sigma_outlier: float = 0.1534


REFERENCE_CONSISTENCY = ConsistencyModel()


@dataclass(frozen=True)
class ClusteringConfig:
    """Constraints and utility weights for the cluster search."""

    ici_min_s: float = 0.4
    ici_max_s: float = 2.0
    consistency_max: float = 0.15
    max_cluster_size: int = 25  # cap on members per cluster (25 per 10 s buffer)
    min_cluster_size: int = 3
    size_weight: float = 1.0  # weight of the exp(-size) term
    balance_weight: float = 1.0  # weight of the intensity-imbalance term
    exact_limit: int = 18  # exact search while M <= this ...
    exact_max_cluster_size: int = 10  # ... and max_cluster_size <= this
    improve_iters: int = 1000  # cap on greedy local-improvement passes

    def __post_init__(self):
        if not 0 < self.ici_min_s < self.ici_max_s:
            raise ValueError("need 0 < ici_min_s < ici_max_s")
        if self.consistency_max <= 0:
            raise ValueError("consistency_max must be positive")
        if not self.max_cluster_size >= self.min_cluster_size >= 3:
            raise ValueError("need max_cluster_size >= min_cluster_size >= 3")


@dataclass(frozen=True)
class ClusterAssignment:
    """One cluster: sorted member indices into the series and their times."""

    members: tuple
    times: tuple

    @property
    def size(self) -> int:
        return len(self.members)

    def __post_init__(self):
        if len(self.members) != len(self.times):
            raise ValueError("members and times must align")
        if any(self.times[i] >= self.times[i + 1] for i in range(len(self.times) - 1)):
            raise ValueError("cluster times must be strictly increasing")


@dataclass(frozen=True)
class ClusterSolution:
    """Disjoint clusters over a series, the utility, and the leftovers."""

    clusters: tuple
    utility: float | None  # None when there are no clusters
    unassigned: tuple

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def consistency(t_i: float, t_j: float, t_k: float) -> float:
    """|ln| ratio of the two gaps of a consecutive time triple (natural log)."""
    if not t_i < t_j < t_k:
        raise ValueError(f"times must be strictly increasing, got ({t_i}, {t_j}, {t_k})")
    return abs(math.log((t_k - t_j) / (t_j - t_i)))


def k_max(m: int) -> int:
    """Number of candidate clusters over m events: all subsets of size >= 3."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return sum(math.comb(m, q) for q in range(3, m + 1))


def is_time_feasible(times, cfg: ClusteringConfig) -> bool:
    """Check the gap and gap-ratio constraints on a sorted time vector."""
    for i in range(len(times) - 1):
        gap = times[i + 1] - times[i]
        if not cfg.ici_min_s < gap < cfg.ici_max_s:
            return False
    for i in range(len(times) - 2):
        if consistency(times[i], times[i + 1], times[i + 2]) >= cfg.consistency_max:
            return False
    return True


def cluster_term(members, mps_values, intensities, cfg: ClusteringConfig) -> float:
    """Per-cluster utility contribution (everything except the 1/K term).

    Population standard deviation of the member delays (seconds), plus
    the size reward exp(-L) and the intensity-balance penalty
    1 - (sum I)^2 / (L * sum I^2).
    """
    idx = list(members)
    values = np.asarray(mps_values, dtype=np.float64)[idx]
    inten = np.asarray(intensities, dtype=np.float64)[idx]
    size = len(idx)
    sigma = float(values.std())
    s1 = float(inten.sum())
    s2 = float((inten * inten).sum())
    balance = 1.0 - (s1 * s1) / (size * s2) if s2 > 0 else 0.0
    return sigma + cfg.size_weight * math.exp(-size) + cfg.balance_weight * balance


def _series_arrays(series):
    """Accept an MpsSeries or a (times, mps_values) pair of arrays."""
    if isinstance(series, MpsSeries):
        return series.event_times(), series.values()
    times, values = series
    return np.asarray(times, dtype=np.float64), np.asarray(values, dtype=np.float64)


def cluster_utility(clusters, series, intensities, cfg: ClusteringConfig) -> float:
    """Utility of a grouping: 1/K plus the per-cluster terms (lower = more whale-like)."""
    if len(clusters) == 0:
        raise ValueError("utility is undefined for zero clusters")
    if isinstance(series, MpsSeries) or (isinstance(series, tuple) and len(series) == 2):
        _, mps_values = _series_arrays(series)
    else:
        mps_values = np.asarray(series, dtype=np.float64)
    total = 1.0 / len(clusters)
    for c in clusters:
        members = c.members if isinstance(c, ClusterAssignment) else tuple(c)
        if len(members) == 0:
            raise ValueError("clusters must be non-empty")
        total += cluster_term(members, mps_values, intensities, cfg)
    return total


def _as_assignment(members, times) -> ClusterAssignment:
    return ClusterAssignment(tuple(int(i) for i in members), tuple(float(times[i]) for i in members))


def feasible_subsets(series, cfg: ClusteringConfig) -> list[ClusterAssignment]:
    """All clusters admissible under the gap/ratio/size constraints."""
    if isinstance(series, MpsSeries) or (isinstance(series, tuple) and len(series) == 2):
        times, _ = _series_arrays(series)
    else:
        times = np.asarray(series, dtype=np.float64)
    subsets = backend.enumerate_feasible(
        np.ascontiguousarray(times, dtype=np.float64),
        cfg.ici_min_s,
        cfg.ici_max_s,
        cfg.consistency_max,
        cfg.min_cluster_size,
        cfg.max_cluster_size,
    )
    return [_as_assignment(s, times) for s in subsets]


def _canonical_order(candidates, costs, mps_values):
    """Deterministic candidate ranking: cheap, then large, then delay-stable,
    then earliest; used by both the exact and the greedy search."""

    def key(i):
        members = candidates[i]
        sigma = float(np.asarray(mps_values)[list(members)].std())
        return (costs[i], -len(members), sigma, members[0], members)

    return sorted(range(len(candidates)), key=key)


def _empty_solution(m: int) -> ClusterSolution:
    return ClusterSolution((), None, tuple(range(m)))


def _greedy_select(candidates, costs):
    """Pick disjoint candidates cheapest-first while the utility still drops.

    Candidates must be in canonical (cost-ascending) order, so the next
    disjoint one is always the cheapest remaining; once it would raise
    the utility, every later one would too.
    """
    chosen: list[int] = []
    used = 0
    for rank, members in enumerate(candidates):
        mask = _mask_of(members)
        if mask & used:
            continue
        k = len(chosen)
        if k >= 1 and costs[rank] >= 1.0 / k - 1.0 / (k + 1):
            break
        chosen.append(rank)
        used |= mask
    return chosen


def _mask_of(members) -> int:
    mask = 0
    for i in members:
        mask |= 1 << int(i)
    return mask


def _improve(cluster_sets, times, mps_values, intensities, cfg: ClusteringConfig):
    """Greedy polish: single-element moves between clusters and the unassigned pool.

    Each pass applies the best strictly-improving move (delta < -1e-15
    to stay off float noise); bounded by cfg.improve_iters passes.
    """
    m = len(times)

    def term(members):
        return cluster_term(members, mps_values, intensities, cfg)

    terms = [term(c) for c in cluster_sets]
    for _ in range(cfg.improve_iters):
        assigned = set().union(*cluster_sets) if cluster_sets else set()
        pool = [i for i in range(m) if i not in assigned]
        best_delta = -1e-15
        best_move = None

        for ci, members in enumerate(cluster_sets):
            # drop a member to the pool
            if len(members) > cfg.min_cluster_size:
                for e in members:
                    rest = tuple(x for x in members if x != e)
                    if is_time_feasible([times[i] for i in rest], cfg):
                        delta = term(rest) - terms[ci]
                        if delta < best_delta:
                            best_delta, best_move = delta, ("drop", ci, e, rest)
            # absorb a pool element
            if len(members) < cfg.max_cluster_size:
                for e in pool:
                    grown = tuple(sorted(members + (e,)))
                    if is_time_feasible([times[i] for i in grown], cfg):
                        delta = term(grown) - terms[ci]
                        if delta < best_delta:
                            best_delta, best_move = delta, ("grow", ci, e, grown)
        # transfer between clusters
        for ci, src in enumerate(cluster_sets):
            if len(src) <= cfg.min_cluster_size:
                continue
            for cj, dst in enumerate(cluster_sets):
                if ci == cj or len(dst) >= cfg.max_cluster_size:
                    continue
                for e in src:
                    s_rest = tuple(x for x in src if x != e)
                    d_grown = tuple(sorted(dst + (e,)))
                    if not is_time_feasible([times[i] for i in s_rest], cfg):
                        continue
                    if not is_time_feasible([times[i] for i in d_grown], cfg):
                        continue
                    delta = (term(s_rest) - terms[ci]) + (term(d_grown) - terms[cj])
                    if delta < best_delta:
                        best_delta, best_move = delta, ("move", ci, e, s_rest, cj, d_grown)

        if best_move is None:
            break
        kind = best_move[0]
        if kind == "drop" or kind == "grow":
            _, ci, _, new_members = best_move
            cluster_sets[ci] = new_members
            terms[ci] = term(new_members)
        else:
            _, ci, _, s_rest, cj, d_grown = best_move
            cluster_sets[ci] = s_rest
            cluster_sets[cj] = d_grown
            terms[ci] = term(s_rest)
            terms[cj] = term(d_grown)
    return cluster_sets


def solve_clustering(series, intensities, cfg: ClusteringConfig) -> ClusterSolution:
    """Find the disjoint feasible clusters minimizing the utility.

    Small instances (M <= exact_limit with a moderate cluster-size cap)
    are solved exactly by branch and bound over disjoint combinations of
    the feasible subsets; larger instances fall back to cheapest-first
    greedy selection polished by bounded single-element moves. Both
    regimes are deterministic: ties break toward larger, delay-stabler,
    earlier clusters.
    """
    times, mps_values = _series_arrays(series)
    intensities = np.asarray(intensities, dtype=np.float64)
    m = len(times)
    if m < cfg.min_cluster_size:
        return _empty_solution(m)

    raw = backend.enumerate_feasible(
        np.ascontiguousarray(times, dtype=np.float64),
        cfg.ici_min_s,
        cfg.ici_max_s,
        cfg.consistency_max,
        cfg.min_cluster_size,
        cfg.max_cluster_size,
    )
    if not raw:
        return _empty_solution(m)

    costs = [cluster_term(members, mps_values, intensities, cfg) for members in raw]
    order = _canonical_order(raw, costs, mps_values)
    candidates = [raw[i] for i in order]
    cand_costs = [costs[i] for i in order]

    exact = m <= cfg.exact_limit and cfg.max_cluster_size <= cfg.exact_max_cluster_size
    if exact:
        masks = np.array([_mask_of(members) for members in candidates], dtype=np.uint64)
        selected, _ = backend.solve_disjoint(masks, np.asarray(cand_costs, dtype=np.float64))
        cluster_sets = [candidates[i] for i in selected]
    else:
        chosen = _greedy_select(candidates, cand_costs)
        cluster_sets = [candidates[i] for i in chosen]
        cluster_sets = _improve(cluster_sets, times, mps_values, intensities, cfg)

    if not cluster_sets:
        return _empty_solution(m)
    cluster_sets.sort(key=lambda members: members[0])
    clusters = tuple(_as_assignment(members, times) for members in cluster_sets)
    utility = cluster_utility(clusters, mps_values, intensities, cfg)
    assigned = set().union(*(c.members for c in clusters))
    unassigned = tuple(i for i in range(m) if i not in assigned)
    return ClusterSolution(clusters, utility, unassigned)
