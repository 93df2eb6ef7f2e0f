"""Non-adaptive discount optimization.

Coordinate descent rearranges the budget between random user pairs: the
estimated influence is bilinear in the pair's acceptance probabilities, so
each step maximizes a one-dimensional section over a closed interval.  A
step is committed only if the exactly-rounded objective increases, which
makes every recorded objective trace nondecreasing by construction.

The two-stage framework first optimizes the stage-1 allocation against a
sampled estimate of the downstream value (each agent-set sample is priced
by running stage-2 coordinate descent on its neighborhood), commits one
acceptance draw, then optimizes the realized stage-2 allocation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import RRIndex, UserSetCoverage
from .graph import Graph, neighborhood
from .rng import spawn
from .seeding import (
    BUDGET_TOL,
    DiscountAllocation,
    ProfileMap,
    sample_seed_set,
)


@dataclass
class CDConfig:
    """Coordinate-descent controls.

    ``init_strategy``: "degree-uniform" ranks users by degree and spreads the
    budget uniformly over the first ceil(1.5 B) of them; "uniform" spreads it
    over everyone; "custom" uses ``initial``.
    """

    max_iters: int = 50
    init_strategy: str = "degree-uniform"
    grid_points: int = 201
    convergence_tol: float = 1e-9
    refine_tol: float = 1e-6
    patience: int | None = None
    initial: dict[int, float] | None = None
    degrees: dict[int, float] | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grid_points < 11:
            raise ValueError("grid_points must be >= 11")


def _golden_max(q, a: float, b: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = q(c), q(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = q(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = q(d)
    return (a + b) / 2.0


def _eval_grid(q, xs: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(q(xs), dtype=np.float64)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(q(float(x))) for x in xs])


def cd_pair_step(q, cu: float, cv: float, grid_points: int = 201,
                 refine_tol: float = 1e-6) -> tuple[float, float, float]:
    """Maximize ``q(c)`` with ``c + partner = cu + cv`` held fixed.

    Searches a uniform grid over the feasible interval, refines around the
    best cell by golden section, and compares against the interval endpoints
    and the current point, so the result never scores below the input.
    """
    total = cu + cv
    if total <= BUDGET_TOL:
        return 0.0, 0.0, float(q(0.0))
    lo, hi = max(0.0, total - 1.0), min(total, 1.0)
    if hi - lo <= BUDGET_TOL:
        c = lo
        return c, total - c, float(q(c))
    xs = np.linspace(lo, hi, grid_points)
    vals = _eval_grid(q, xs)
    k = int(np.argmax(vals))
    refined = _golden_max(lambda c: float(q(float(c))), xs[max(k - 1, 0)],
                          xs[min(k + 1, len(xs) - 1)], refine_tol)
    best_c, best_v = None, -math.inf
    for c in (min(max(cu, lo), hi), lo, hi, refined):
        v = float(q(float(c)))
        if v > best_v:
            best_c, best_v = c, v
    return best_c, total - best_c, best_v


# -- initial allocations ----------------------------------------------------


def _initial_allocation(users: list[int], budget: float, cfg: CDConfig) -> dict[int, float]:
    n = len(users)
    eff = min(budget, float(n))
    alloc = {u: 0.0 for u in users}
    if eff <= BUDGET_TOL:
        return alloc
    if cfg.init_strategy == "custom":
        if cfg.initial is None:
            raise ValueError("custom init_strategy needs cfg.initial")
        for u, c in cfg.initial.items():
            alloc[int(u)] = float(c)
        return alloc
    if cfg.init_strategy == "degree-uniform" and cfg.degrees is not None:
        ranked = sorted(users, key=lambda u: (-float(cfg.degrees.get(u, 0.0)), u))
        k = min(n, max(1, math.ceil(1.5 * eff)))
        share = eff / k
        for u in ranked[:k]:
            alloc[u] = share
        return alloc
    share = eff / n
    for u in users:
        alloc[u] = share
    return alloc


# -- objectives -------------------------------------------------------------


class RRAllocObjective:
    """Estimated-influence objective over a fixed user set, CD-ready."""

    def __init__(self, idx: RRIndex, profiles: ProfileMap, users):
        self.cov = UserSetCoverage(idx, users)
        self.users = self.cov.users
        self.profiles = profiles
        self.alloc: dict[int, float] = {u: 0.0 for u in self.users}

    def reset(self, alloc: dict[int, float]) -> None:
        self.alloc = {u: float(alloc.get(u, 0.0)) for u in self.users}
        self.cov.reset({u: self.profiles[u](c) for u, c in self.alloc.items()})

    def current_entries(self) -> dict[int, float]:
        return dict(self.alloc)

    def value(self) -> float:
        return self.cov.exact_value()

    def pair_step(self, u: int, v: int, cfg: CDConfig) -> float:
        cu, cv = self.alloc[u], self.alloc[v]
        total = cu + cv
        rids, r, uin, vin = self.cov.pair_segments(u, v)
        if len(rids) == 0:
            return 0.0
        pu_fn, pv_fn = self.profiles[u], self.profiles[v]
        sum_ru = float(r[uin].sum())
        sum_rv = float(r[vin].sum())
        sum_ruv = float(r[uin & vin].sum())
        const = float(np.sum(1.0 - r))
        lo, hi = max(0.0, total - 1.0), min(total, 1.0)

        def q(c):
            c_arr = np.clip(np.asarray(c, dtype=np.float64), lo, hi)
            pu = pu_fn(c_arr)
            pv = pv_fn(np.clip(total - c_arr, 0.0, 1.0))
            return const + pu * sum_ru + pv * sum_rv - pu * pv * sum_ruv

        cu_new, _, _ = cd_pair_step(q, cu, cv, cfg.grid_points, cfg.refine_tol)
        old_cov = math.fsum(1.0 - self.cov.prods[rids])
        best = None
        for c in (min(max(cu, lo), hi), lo, hi, cu_new):
            pu = pu_fn(c)
            pv = pv_fn(min(max(total - c, 0.0), 1.0))
            factors = np.ones(len(rids))
            factors[uin] *= 1.0 - pu
            factors[vin] *= 1.0 - pv
            new_prods = r * factors
            cov_c = math.fsum(1.0 - new_prods)
            if best is None or cov_c > best[0]:
                best = (cov_c, c, pu, pv, new_prods)
        cov_best, c_best, pu, pv, prods_best = best
        if cov_best > old_cov:
            self.alloc[u] = c_best
            self.alloc[v] = min(max(total - c_best, 0.0), 1.0)
            self.cov.apply_pair(u, pu, v, pv, rids, prods_best)
            return self.cov.scale * (cov_best - old_cov)
        return 0.0


class CallableAllocObjective:
    """CD objective backed by an arbitrary allocation evaluator.

    Used with the exact oracle in tests; evaluation cost limits it to tiny
    instances.
    """

    def __init__(self, fn, users):
        self.fn = fn
        self.users = sorted(int(u) for u in users)
        self.alloc: dict[int, float] = {u: 0.0 for u in self.users}
        self._value = None

    def reset(self, alloc: dict[int, float]) -> None:
        self.alloc = {u: float(alloc.get(u, 0.0)) for u in self.users}
        self._value = float(self.fn(self.alloc))

    def current_entries(self) -> dict[int, float]:
        return dict(self.alloc)

    def value(self) -> float:
        return self._value

    def pair_step(self, u: int, v: int, cfg: CDConfig) -> float:
        cu, cv = self.alloc[u], self.alloc[v]
        total = cu + cv
        lo, hi = max(0.0, total - 1.0), min(total, 1.0)

        def q(c):
            c = float(min(max(c, lo), hi))
            trial = dict(self.alloc)
            trial[u] = c
            trial[v] = min(max(total - c, 0.0), 1.0)
            return float(self.fn(trial))

        c_new, _, v_new = cd_pair_step(q, cu, cv, cfg.grid_points, cfg.refine_tol)
        if v_new > self._value:
            self.alloc[u] = c_new
            self.alloc[v] = min(max(total - c_new, 0.0), 1.0)
            gain = v_new - self._value
            self._value = v_new
            return gain
        return 0.0


def stage2_users(g: Graph, agents, x) -> set[int]:
    """Stage-2 seeding candidates: the agents' neighborhood outside X."""
    return neighborhood(g, agents) - set(int(u) for u in x)


def max_q_hat(g: Graph, idx: RRIndex, profiles: ProfileMap, users, budget: float,
              cfg: CDConfig, rng: np.random.Generator) -> float:
    """Stage-2 proxy value: coordinate descent on the estimated influence."""
    users = sorted(int(u) for u in users)
    if not users or budget <= BUDGET_TOL:
        return 0.0
    obj = RRAllocObjective(idx, profiles, users)
    _, trace = coordinate_descent(obj, budget, users, cfg, rng, record_trace=False)
    return obj.value()


class SampledStage1Objective:
    """Sampled two-stage value of a stage-1 allocation.

    One matrix of uniforms fixes the agent-set randomness for the entire CD
    run (common random numbers), so the objective is a deterministic function
    of the allocation.  Inner stage-2 coordinate-descent values are memoized
    per realized agent set.
    """

    def __init__(self, g: Graph, idx: RRIndex, profiles: ProfileMap, x, b2: float,
                 samples: int, inner_cfg: CDConfig, rng: np.random.Generator):
        self.g = g
        self.idx = idx
        self.profiles = profiles
        self.users = sorted(int(u) for u in x)
        self.pos = {u: i for i, u in enumerate(self.users)}
        self.b2 = float(b2)
        self.inner_cfg = inner_cfg
        self.samples = int(samples)
        self.u_mat = rng.random((self.samples, len(self.users)))
        self._inner_seed = int(rng.integers(2**63))
        self._memo: dict[frozenset, float] = {}
        self.alloc: dict[int, float] = {u: 0.0 for u in self.users}

    def reset(self, alloc: dict[int, float]) -> None:
        self.alloc = {u: float(alloc.get(u, 0.0)) for u in self.users}

    def current_entries(self) -> dict[int, float]:
        return dict(self.alloc)

    def max_q(self, agents: frozenset) -> float:
        val = self._memo.get(agents)
        if val is None:
            users2 = sorted(stage2_users(self.g, agents, self.users))
            rng = spawn(self._inner_seed, *sorted(agents)) if agents else spawn(self._inner_seed, 2**62)
            val = max_q_hat(self.g, self.idx, self.profiles, users2, self.b2,
                            self.inner_cfg, rng)
            self._memo[agents] = val
        return val

    def _accept_probs(self) -> np.ndarray:
        return np.array([self.profiles[u](self.alloc[u]) for u in self.users])

    def value(self) -> float:
        hits = self.u_mat < self._accept_probs()[None, :]
        vals = [self.max_q(frozenset(self.users[j] for j in np.flatnonzero(hits[s])))
                for s in range(self.samples)]
        return math.fsum(vals) / self.samples

    def pair_step(self, i: int, j: int, cfg: CDConfig) -> float:
        ci, cj = self.alloc[i], self.alloc[j]
        total = ci + cj
        lo, hi = max(0.0, total - 1.0), min(total, 1.0)
        pi_fn, pj_fn = self.profiles[i], self.profiles[j]
        ii, jj = self.pos[i], self.pos[j]
        others = [k for k in range(len(self.users)) if k not in (ii, jj)]
        probs = self._accept_probs()
        base_hits = self.u_mat[:, others] < probs[others][None, :]
        q00 = np.empty(self.samples)
        q01 = np.empty(self.samples)
        q10 = np.empty(self.samples)
        q11 = np.empty(self.samples)
        for s in range(self.samples):
            base = frozenset(self.users[others[t]] for t in np.flatnonzero(base_hits[s]))
            q00[s] = self.max_q(base)
            q01[s] = self.max_q(base | {j})
            q10[s] = self.max_q(base | {i})
            q11[s] = self.max_q(base | {i, j})
        # realized objective over a grid of candidate discounts
        cs = np.unique(np.concatenate([np.linspace(lo, hi, cfg.grid_points),
                                       [min(max(ci, lo), hi)]]))
        pi = np.asarray(pi_fn(cs))
        pj = np.asarray(pj_fn(np.clip(total - cs, 0.0, 1.0)))
        i_in = self.u_mat[:, ii][:, None] < pi[None, :]
        j_in = self.u_mat[:, jj][:, None] < pj[None, :]
        picked = (q00[:, None]
                  + i_in * (q10 - q00)[:, None]
                  + j_in * (q01 - q00)[:, None]
                  + (i_in & j_in) * (q11 - q10 - q01 + q00)[:, None])
        g_vals = picked.sum(axis=0)
        smooth = (q00.mean()
                  + (q10 - q00).mean() * pi
                  + (q01 - q00).mean() * pj
                  + (q11 - q10 - q01 + q00).mean() * pi * pj)
        order = np.lexsort((cs, -smooth, -g_vals))
        c_best = float(cs[order[0]])

        def realized(c: float) -> float:
            p_i, p_j = float(pi_fn(c)), float(pj_fn(min(max(total - c, 0.0), 1.0)))
            vals = np.where(self.u_mat[:, ii] < p_i,
                            np.where(self.u_mat[:, jj] < p_j, q11, q10),
                            np.where(self.u_mat[:, jj] < p_j, q01, q00))
            return math.fsum(vals) / self.samples

        g_old = realized(min(max(ci, lo), hi))
        g_new = realized(c_best)
        if g_new > g_old:
            self.alloc[i] = c_best
            self.alloc[j] = min(max(total - c_best, 0.0), 1.0)
            return g_new - g_old
        return 0.0


# -- the CD driver -----------------------------------------------------------


def coordinate_descent(objective, budget: float, users, cfg: CDConfig,
                       rng: np.random.Generator,
                       record_trace: bool = True) -> tuple[DiscountAllocation, list[float]]:
    """Alternating pair rearrangement of a budget over users.

    The emitted allocation sums to min(budget, |users|); the recorded trace
    is nondecreasing because updates are gated on an exact objective
    comparison.
    """
    users = sorted(int(u) for u in users)
    budget = float(budget)
    if not users:
        if budget > BUDGET_TOL:
            raise ValueError("no users to allocate a positive budget to")
        return DiscountAllocation({}, 0.0), [0.0]
    n = len(users)
    eff = min(budget, float(n))
    if eff >= n - BUDGET_TOL:
        alloc = {u: 1.0 for u in users}
        objective.reset(alloc)
        return DiscountAllocation(alloc, budget), [objective.value()]
    init = _initial_allocation(users, eff, cfg)
    objective.reset(init)
    trace = [objective.value()] if record_trace else []
    if eff <= BUDGET_TOL or n == 1:
        if n == 1 and eff > BUDGET_TOL:
            alloc = {users[0]: min(eff, 1.0)}
            objective.reset(alloc)
            trace = [objective.value()] if record_trace else []
        return DiscountAllocation(objective.current_entries(), budget), trace
    patience = cfg.patience or min(200, max(20, n * (n - 1) // 2))
    stall = 0
    for _ in range(cfg.max_iters):
        iu, iv = rng.choice(n, size=2, replace=False)
        gain = objective.pair_step(users[int(iu)], users[int(iv)], cfg)
        if record_trace:
            trace.append(objective.value())
        stall = 0 if gain > cfg.convergence_tol else stall + 1
        if stall >= patience:
            break
    return DiscountAllocation(objective.current_entries(), budget), trace


# -- the two-stage framework -------------------------------------------------


@dataclass
class TwoStageOutcome:
    """Committed result of the two-stage coordinate-descent framework."""

    c1: DiscountAllocation
    agents: set[int]
    c2: DiscountAllocation
    spread_estimate: float | None
    trace1: list[float] = field(default_factory=list)
    trace2: list[float] = field(default_factory=list)


def _degree_map(g: Graph, users) -> dict[int, float]:
    deg = g.total_degree
    return {int(u): float(deg[int(u)]) for u in users}


def estimate_f(g: Graph, idx: RRIndex, profiles: ProfileMap, c1: DiscountAllocation,
               x, b2: float, samples: int, rng: np.random.Generator,
               inner_cfg: CDConfig | None = None) -> float:
    """Monte Carlo estimate of the two-stage value of a stage-1 allocation.

    Each sample draws an agent set from ``c1`` and prices it by stage-2
    coordinate descent on its neighborhood.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = sorted(int(u) for u in x)
    inner_cfg = inner_cfg or CDConfig(max_iters=10, init_strategy="degree-uniform",
                                      degrees=_degree_map(g, range(g.node_count)))
    inner_seed = int(rng.integers(2**63))
    memo: dict[frozenset, float] = {}
    total = 0.0
    for _ in range(samples):
        agents = frozenset(sample_seed_set(c1, profiles, rng))
        val = memo.get(agents)
        if val is None:
            users2 = sorted(stage2_users(g, agents, x))
            sub_rng = spawn(inner_seed, *sorted(agents)) if agents else spawn(inner_seed, 2**62)
            val = max_q_hat(g, idx, profiles, users2, b2, inner_cfg, sub_rng)
            memo[agents] = val
        total += val
    return total / samples


def two_stage_cd(g: Graph, x, b1: float, b2: float, idx: RRIndex, profiles: ProfileMap,
                 rng: np.random.Generator, samples: int = 200,
                 cfg1: CDConfig | None = None, cfg2: CDConfig | None = None) -> TwoStageOutcome:
    """Stage-1 CD on the sampled two-stage value, one committed acceptance
    draw, then stage-2 CD on the realized neighborhood."""
    x = sorted(int(u) for u in x)
    degrees = _degree_map(g, range(g.node_count))
    cfg1 = cfg1 or CDConfig(max_iters=10, init_strategy="degree-uniform", degrees=degrees)
    cfg2 = cfg2 or CDConfig(max_iters=10, init_strategy="degree-uniform", degrees=degrees)
    inner_cfg = CDConfig(max_iters=10, init_strategy="degree-uniform", degrees=degrees)
    obj1 = SampledStage1Objective(g, idx, profiles, x, b2, samples, inner_cfg,
                                  spawn(int(rng.integers(2**63)), "stage1"))
    c1, trace1 = coordinate_descent(obj1, b1, x, cfg1, rng)
    agents = sample_seed_set(c1, profiles, rng)
    users2 = sorted(stage2_users(g, agents, x))
    if users2 and b2 > BUDGET_TOL:
        obj2 = RRAllocObjective(idx, profiles, users2)
        c2, trace2 = coordinate_descent(obj2, b2, users2, cfg2, rng)
        spread = obj2.value()
    else:
        c2, trace2, spread = DiscountAllocation({}, b2), [], 0.0
    return TwoStageOutcome(c1, set(agents), c2, spread, trace1, trace2)


# -- baselines ----------------------------------------------------------------


def baseline_rf(g: Graph, x, b1: float, b2: float, rng: np.random.Generator) -> TwoStageOutcome:
    """Random-friend baseline: uniform agents, then uniform neighbor seeds,
    all at full discount."""
    x = sorted(int(u) for u in x)
    n1 = min(int(b1), len(x))
    agents = sorted(int(u) for u in rng.choice(x, size=n1, replace=False)) if n1 else []
    users2 = sorted(stage2_users(g, agents, x))
    n2 = min(int(b2), len(users2))
    seeds2 = sorted(int(u) for u in rng.choice(users2, size=n2, replace=False)) if n2 else []
    c1 = DiscountAllocation({u: 1.0 for u in agents}, b1)
    c2 = DiscountAllocation({u: 1.0 for u in seeds2}, b2)
    return TwoStageOutcome(c1, set(agents), c2, None)


def baseline_im_greedy(idx: RRIndex, x, b: int) -> set[int]:
    """Classic greedy seed selection inside X by marginal RR coverage (CELF)."""
    x = sorted(int(u) for u in x)
    k = int(b)
    if k <= 0 or not x:
        return set()
    covered = np.zeros(idx.theta, dtype=bool)
    heap = [(-len(idx.sets_for(u)), u, 0) for u in x]
    heapq.heapify(heap)
    chosen: set[int] = set()
    round_no = 0
    while heap and len(chosen) < min(k, len(x)):
        neg_gain, u, stamp = heapq.heappop(heap)
        if stamp == round_no:
            chosen.add(u)
            sets_u = idx.sets_for(u)
            covered[sets_u] = True
            round_no += 1
        else:
            gain = int(np.count_nonzero(~covered[idx.sets_for(u)]))
            heapq.heappush(heap, (-gain, u, round_no))
    return chosen


def baseline_cd_one_stage(g: Graph, x, b: float, idx: RRIndex, profiles: ProfileMap,
                          rng: np.random.Generator,
                          cfg: CDConfig | None = None) -> tuple[DiscountAllocation, list[float]]:
    """One-stage coordinate descent over the accessible users only."""
    x = sorted(int(u) for u in x)
    cfg = cfg or CDConfig(max_iters=50, init_strategy="degree-uniform",
                          degrees=_degree_map(g, x))
    obj = RRAllocObjective(idx, profiles, x)
    return coordinate_descent(obj, b, x, cfg, rng)
