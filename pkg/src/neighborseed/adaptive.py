"""Sequential two-stage seeding policies.

Each round probes one (user, discount) action chosen by benefit-to-cost
ratio.  A refusal costs nothing and just retires the action; an acceptance
spends the discount, opens the user's owned neighbors, allocates a slice of
the stage-2 budget there (continuous coordinate descent or discrete greedy
selection), samples acceptances, and advances the diffusion on the residual
graph.  Benefits are the estimated influence of the hypothetical stage-2
allocation on the current residual index.

Benefit values are cached across rounds and recomputed lazily on pop
(CELF style); the diminishing-returns property of the marginal benefit
makes stale values valid upper bounds.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .estimator import (
    RRIndex,
    UserSetCoverage,
    build_rr_index,
    estimate_influence,
    filter_for_residual,
    rebuild_for_residual,
)
from .graph import Graph, owned_neighbors, residual_subgraph
from .nonadaptive import CDConfig, RRAllocObjective, coordinate_descent
from .rng import spawn
from .seeding import (
    BUDGET_TOL,
    Action,
    DEFAULT_RATES,
    DiscountAllocation,
    DiscountRateSet,
    ProfileMap,
    STAGE2_RATES,
    action_space,
    sample_seed_set,
)
from .diffusion import propagate, sample_realization


@dataclass
class PolicyConfig:
    """Budgets, action spaces, and stage-2 allocator choice for a policy run."""

    b1: float
    b2: float
    rates: DiscountRateSet = DEFAULT_RATES
    stage2_mode: str = "cd"
    stage2_rates: DiscountRateSet = STAGE2_RATES
    delta_samples: int = 1
    theta: int | None = None
    cd_iters: int = 50
    grid_points: int = 201
    residual_mode: str = "rebuild"
    mgs_candidate_cap: int | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("budgets must be nonnegative")
        if self.stage2_mode not in ("cd", "gs", "mgs"):
            raise ValueError(f"unknown stage2_mode {self.stage2_mode!r}")
        if self.residual_mode not in ("rebuild", "filter"):
            raise ValueError(f"unknown residual_mode {self.residual_mode!r}")

    @property
    def stage2_share(self) -> float:
        """Stage-2 budget per unit of accepted stage-1 discount (B2 / B1)."""
        return self.b2 / self.b1 if self.b1 > 0 else 0.0


@dataclass
class RoundRecord:
    round: int
    action: Action
    accepted: bool
    stage2_alloc: dict[int, float] | None
    new_seeds: list[int]
    newly_influenced_count: int
    spent_b1: float
    spent_b2: float

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "action": {"user": self.action.user, "discount": self.action.discount},
            "accepted": self.accepted,
            "stage2_alloc": self.stage2_alloc,
            "new_seeds": self.new_seeds,
            "newly_influenced_count": self.newly_influenced_count,
            "spent_b1": self.spent_b1,
            "spent_b2": self.spent_b2,
        }


@dataclass
class SeedingHistory:
    """Ordered record of probes, stage-2 allocations, and observed spread."""

    x: tuple[int, ...]
    steps: list[tuple[Action, bool]] = field(default_factory=list)
    stage2_allocs: list[tuple[Action, dict[int, float], set[int]]] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)
    influenced: set[int] = field(default_factory=set)
    reached: set[int] = field(default_factory=set)
    spent_b1: float = 0.0
    spent_b2: float = 0.0

    @property
    def accepted_actions(self) -> list[Action]:
        return [a for a, ok in self.steps if ok]

    def all_stage2_seeds(self) -> set[int]:
        out: set[int] = set()
        for _, _, seeds in self.stage2_allocs:
            out |= seeds
        return out

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(r.as_dict()) for r in self.rounds)


# -- action-set evaluators ---------------------------------------------------


class CoverageActionEvaluator:
    """Estimated influence of discrete action sets, with O(1)-ish extension scans."""

    def __init__(self, idx: RRIndex, users, profiles: ProfileMap):
        self.cov = UserSetCoverage(idx, users)
        self.profiles = profiles
        self.assigned: dict[int, Action] = {}

    def reset(self, actions=()) -> None:
        self.assigned = {}
        self.cov.reset()
        for a in actions:
            self.add(a)

    def add(self, action: Action) -> None:
        if action.user in self.assigned:
            raise ValueError(f"user {action.user} already holds an action")
        self.assigned[action.user] = action
        self.cov.multiply_in(action.user, self.profiles[action.user](action.discount))

    def value(self) -> float:
        return self.cov.value()

    def ext_values(self, candidates) -> np.ndarray:
        base = self.cov.coverage_sum()
        out = np.empty(len(candidates))
        for i, a in enumerate(candidates):
            p = self.profiles[a.user](a.discount)
            out[i] = self.cov.scale * (base + p * self.cov.weight(a.user))
        return out

    def eval_set(self, actions) -> float:
        self.reset(actions)
        return self.value()

    def user_weight(self, u: int) -> float:
        return self.cov.weight(u)


class CallableActionEvaluator:
    """Oracle-backed evaluator for tests: any callable on action tuples."""

    def __init__(self, q_fn):
        self.q_fn = q_fn
        self.actions: list[Action] = []

    def reset(self, actions=()) -> None:
        self.actions = list(actions)

    def add(self, action: Action) -> None:
        self.actions.append(action)

    def value(self) -> float:
        return float(self.q_fn(tuple(self.actions)))

    def ext_values(self, candidates) -> np.ndarray:
        return np.array([float(self.q_fn(tuple(self.actions) + (a,))) for a in candidates])

    def eval_set(self, actions) -> float:
        return float(self.q_fn(tuple(actions)))

    def user_weight(self, u: int) -> float:
        return float(self.q_fn((Action(u, 1.0),)))


def _pick(candidates, values, margs, ratios):
    """Deterministic argmax: ratio, then gain, then cheaper, then lower id."""
    best, best_key = None, None
    for i, a in enumerate(candidates):
        key = (-ratios[i], -margs[i], a.discount, a.user)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def greedy_selection_gs(users, budget: float, rates: DiscountRateSet, evaluator) -> list[Action]:
    """Budget-greedy action selection, compared against the best single action.

    Adds the action with the best marginal-gain-to-cost ratio while it fits;
    an action that does not fit is discarded.  At most one action per user.
    Returns the better of the greedy set and the best feasible singleton.
    """
    users = sorted(int(u) for u in users)
    space = action_space(users, rates)
    if not space or budget <= BUDGET_TOL:
        return []
    singles = [z for z in space if z.discount <= budget + BUDGET_TOL]
    best_single, best_single_val = [], 0.0
    if singles:
        evaluator.reset()
        vals = evaluator.ext_values(singles)
        i = _pick(singles, vals, vals, vals / np.array([z.discount for z in singles]))
        best_single, best_single_val = [singles[i]], float(vals[i])
    evaluator.reset()
    chosen: list[Action] = []
    cost, cur = 0.0, 0.0
    pool = list(space)
    while pool:
        vals = evaluator.ext_values(pool)
        margs = vals - cur
        ratios = margs / np.array([z.discount for z in pool])
        i = _pick(pool, vals, margs, ratios)
        z = pool[i]
        if cost + z.discount <= budget + BUDGET_TOL:
            evaluator.add(z)
            chosen.append(z)
            cur = float(vals[i])
            cost += z.discount
            pool = [y for y in pool if y.user != z.user]
        else:
            pool.pop(i)
    if best_single_val > cur:
        return best_single
    return sorted(chosen)


def modified_greedy_mgs(users, budget: float, rates: DiscountRateSet, evaluator,
                        candidate_cap: int | None = None) -> list[Action]:
    """Enumeration-boosted greedy: exhaustive up to two actions, plus greedy
    extensions of every feasible action triple."""
    users = sorted(int(u) for u in users)
    if candidate_cap is not None and len(users) > candidate_cap:
        evaluator.reset()
        ranked = sorted(users, key=lambda u: (-evaluator.user_weight(u), u))
        users = sorted(ranked[:candidate_cap])
    space = action_space(users, rates)
    if not space or budget <= BUDGET_TOL:
        return []

    best_small: list[Action] = []
    best_small_val = 0.0
    singles = [z for z in space if z.discount <= budget + BUDGET_TOL]
    if singles:
        evaluator.reset()
        vals = evaluator.ext_values(singles)
        i = int(np.lexsort((
            [z.user for z in singles], [z.discount for z in singles], -vals))[0])
        if vals[i] > best_small_val:
            best_small, best_small_val = [singles[i]], float(vals[i])
    for a_idx, z1 in enumerate(space):
        if z1.discount > budget + BUDGET_TOL:
            continue
        partners = [z2 for z2 in space[a_idx + 1:]
                    if z2.user != z1.user and z1.discount + z2.discount <= budget + BUDGET_TOL]
        if not partners:
            continue
        evaluator.reset([z1])
        vals = evaluator.ext_values(partners)
        i = int(np.lexsort((
            [z.user for z in partners], [z.discount for z in partners], -vals))[0])
        if vals[i] > best_small_val:
            best_small, best_small_val = sorted([z1, partners[i]]), float(vals[i])

    best_big: list[Action] = []
    best_big_val = 0.0
    min_rate = rates.smallest
    if 3 * min_rate <= budget + BUDGET_TOL and len(users) >= 3:
        for trio in itertools.combinations(users, 3):
            for ds in itertools.product(rates, repeat=3):
                base_cost = sum(ds)
                if base_cost > budget + BUDGET_TOL:
                    continue
                current = [Action(u, d) for u, d in zip(trio, ds)]
                evaluator.reset(current)
                val = evaluator.value()
                cost = base_cost
                pool = [z for z in space if z.user not in trio]
                while pool:
                    vals = evaluator.ext_values(pool)
                    margs = vals - val
                    ratios = margs / np.array([z.discount for z in pool])
                    i = _pick(pool, vals, margs, ratios)
                    z = pool[i]
                    if cost + z.discount <= budget + BUDGET_TOL:
                        evaluator.add(z)
                        current.append(z)
                        val = float(vals[i])
                        cost += z.discount
                        pool = [y for y in pool if y.user != z.user]
                    else:
                        pool.pop(i)
                if val > best_big_val:
                    best_big, best_big_val = sorted(current), val

    if best_big_val >= best_small_val and best_big:
        return best_big
    return best_small


def select_action(space, remaining_b1: float, benefits) -> Action | None:
    """Feasible action with the best benefit-to-cost ratio, or None."""
    get = benefits.get if hasattr(benefits, "get") else None
    best, best_key = None, None
    for y in space:
        if y.discount > remaining_b1 + BUDGET_TOL:
            continue
        delta = float(get(y) if get else benefits(y))
        key = (-delta / y.discount, -delta, y.discount, y.user)
        if best_key is None or key < best_key:
            best, best_key = y, key
    return best


# -- benefit evaluation -------------------------------------------------------


def _stage2_allocate(idx_r: RRIndex, profiles: ProfileMap, cfg: PolicyConfig,
                     r_users, beta: float, degrees, rng) -> tuple[float, dict[int, float], list[Action]]:
    """Run the configured stage-2 allocator; returns (value, alloc, actions)."""
    r_users = sorted(r_users)
    if not r_users or beta <= BUDGET_TOL:
        return 0.0, {}, []
    if cfg.stage2_mode == "cd":
        obj = RRAllocObjective(idx_r, profiles, r_users)
        cd_cfg = CDConfig(max_iters=cfg.cd_iters, init_strategy="degree-uniform",
                          grid_points=cfg.grid_points, degrees=degrees)
        alloc, _ = coordinate_descent(obj, beta, r_users, cd_cfg, rng, record_trace=False)
        return obj.value(), dict(alloc.entries), []
    evaluator = CoverageActionEvaluator(idx_r, r_users, profiles)
    if cfg.stage2_mode == "gs":
        actions = greedy_selection_gs(r_users, beta, cfg.stage2_rates, evaluator)
    else:
        actions = modified_greedy_mgs(r_users, beta, cfg.stage2_rates, evaluator,
                                      cfg.mgs_candidate_cap)
    value = evaluator.eval_set(actions) if actions else 0.0
    return value, {a.user: a.discount for a in actions}, actions


def marginal_benefit(g: Graph, idx_r: RRIndex, profiles: ProfileMap, cfg: PolicyConfig,
                     owned: dict[int, list[int]], reached, influenced,
                     y: Action, rng: np.random.Generator,
                     remaining_b1: float | None = None) -> tuple[float, dict[int, float]]:
    """Expected new influence if ``y`` were accepted.

    The stage-2 allocator runs hypothetically on the user's still-unreached
    owned neighbors with budget (B2/B1) * d(y); the allocation's influence is
    estimated on the residual index.  Returns the benefit and the hypothetical
    stage-2 allocation.
    """
    if remaining_b1 is not None and y.discount > remaining_b1 + BUDGET_TOL:
        raise ValueError("action discount exceeds the remaining stage-1 budget")
    blocked = set(reached) | set(influenced)
    r_users = [w for w in owned.get(y.user, []) if w not in blocked]
    beta = cfg.stage2_share * y.discount
    degrees = {int(w): float(g.total_degree[w]) for w in r_users}
    if cfg.delta_samples <= 1 or cfg.stage2_mode != "cd":
        val, alloc, _ = _stage2_allocate(idx_r, profiles, cfg, r_users, beta, degrees, rng)
        return val, alloc
    vals = []
    alloc0: dict[int, float] = {}
    for s in range(cfg.delta_samples):
        seed = int(rng.integers(2**63))
        val, alloc, _ = _stage2_allocate(idx_r, profiles, cfg, r_users, beta, degrees,
                                         spawn(seed, s))
        if s == 0:
            alloc0 = alloc
        vals.append(val)
    return float(np.mean(vals)), alloc0


def benefit_for_history(g: Graph, hist: SeedingHistory, y: Action, idx_r: RRIndex,
                        profiles: ProfileMap, cfg: PolicyConfig,
                        rng: np.random.Generator) -> float:
    """Public wrapper computing the marginal benefit against a history."""
    owned = owned_neighbors(g, hist.x)
    delta, _ = marginal_benefit(g, idx_r, profiles, cfg, owned, hist.reached,
                                hist.influenced, y, rng,
                                remaining_b1=cfg.b1 - hist.spent_b1)
    return delta


# -- the policy loop ----------------------------------------------------------


class _ResidualCtx:
    def __init__(self, g: Graph, influenced, theta: int, mode: str,
                 base_idx: RRIndex | None, rng):
        self.sub, self.parent_ids = residual_subgraph(g, influenced)
        self.to_sub = np.full(g.node_count, -1, dtype=np.int64)
        self.to_sub[self.parent_ids] = np.arange(len(self.parent_ids))
        if mode == "filter" and base_idx is not None:
            self.idx = filter_for_residual(base_idx, influenced)
        else:
            self.idx = rebuild_for_residual(g, influenced, theta, rng)


def run_policy(g: Graph, x, profiles: ProfileMap, cfg: PolicyConfig,
               rng: np.random.Generator) -> SeedingHistory:
    """Adaptive greedy seeding over the action space X x D."""
    x = sorted(set(int(u) for u in x))
    hist = SeedingHistory(x=tuple(x))
    if not x or cfg.b1 <= BUDGET_TOL:
        return hist
    master = int(rng.integers(2**63))
    probe_rng = spawn(master, "probe")
    accept2_rng = spawn(master, "accept2")
    diffuse_rng = spawn(master, "diffuse")
    owned = owned_neighbors(g, x)
    theta = cfg.theta or _default_theta_for(g)
    live: dict[int, set[float]] = {u: set(cfg.rates) for u in x}
    base_idx = build_rr_index(g, theta, spawn(master, "rridx", 0), cfg.workers) \
        if cfg.residual_mode == "filter" else None
    version = 0
    ctx = _ResidualCtx(g, hist.influenced, theta, cfg.residual_mode, base_idx,
                       spawn(master, "rridx", 1))
    heap: list = []

    def push(y: Action, delta: float, alloc, ver: int):
        ratio = delta / y.discount
        heapq.heappush(heap, (-ratio, -delta, y.discount, y.user, ver, alloc))

    def compute(y: Action, ver: int):
        delta, alloc = marginal_benefit(
            g, ctx.idx, profiles, cfg, owned, hist.reached, hist.influenced, y,
            spawn(master, "delta", ver, y.user, int(round(y.discount * 10000))))
        return delta, alloc

    for u in x:
        for d in sorted(live[u]):
            y = Action(u, d)
            delta, alloc = compute(y, version)
            push(y, delta, alloc, version)

    round_no = 0
    while True:
        remaining = cfg.b1 - hist.spent_b1
        feasible = [d for u in live for d in live[u] if d <= remaining + BUDGET_TOL]
        if not feasible or not heap:
            break
        neg_ratio, neg_delta, d, u, ver, alloc = heapq.heappop(heap)
        if u not in live or d not in live[u]:
            continue
        if d > remaining + BUDGET_TOL:
            continue
        if ver != version:
            y = Action(u, d)
            delta, alloc = compute(y, version)
            push(y, delta, alloc, version)
            continue
        y = Action(u, d)
        delta = -neg_delta
        round_no += 1
        accepted = probe_rng.random() < profiles[u](d)
        hist.steps.append((y, accepted))
        if not accepted:
            live[u].discard(d)
            if not live[u]:
                del live[u]
            hist.rounds.append(RoundRecord(round_no, y, False, None, [], 0,
                                           hist.spent_b1, hist.spent_b2))
            continue
        # acceptance: spend, open neighbors, allocate, observe
        del live[u]
        hist.spent_b1 += d
        blocked = hist.reached | hist.influenced
        r_users = [w for w in owned.get(u, []) if w not in blocked]
        hist.reached.update(r_users)
        beta = cfg.stage2_share * d
        stage2_alloc = alloc if alloc is not None else {}
        if cfg.stage2_mode == "cd":
            c2p = DiscountAllocation(stage2_alloc, beta + BUDGET_TOL)
            seeds = sample_seed_set(c2p, profiles, accept2_rng)
            hist.spent_b2 += c2p.total()
        else:
            seeds = set()
            for w in sorted(stage2_alloc):
                if accept2_rng.random() < profiles[w](stage2_alloc[w]):
                    seeds.add(w)
            hist.spent_b2 += sum(stage2_alloc.values())
        newly: set[int] = set()
        if seeds:
            sub_seeds = [int(ctx.to_sub[s]) for s in sorted(seeds)]
            real = sample_realization(ctx.sub, diffuse_rng)
            res = propagate(ctx.sub, sub_seeds, real)
            newly = {int(ctx.parent_ids[v]) for v in res.influenced}
            hist.influenced |= newly
        hist.stage2_allocs.append((y, stage2_alloc, set(seeds)))
        hist.rounds.append(RoundRecord(round_no, y, True, dict(stage2_alloc),
                                       sorted(seeds), len(newly),
                                       hist.spent_b1, hist.spent_b2))
        version += 1
        ctx = _ResidualCtx(g, hist.influenced, theta, cfg.residual_mode, base_idx,
                           spawn(master, "rridx", version + 1))
    return hist


def _default_theta_for(g: Graph) -> int:
    from .estimator import default_theta
    return default_theta(g.node_count)


def baseline_ada(g: Graph, x, profiles: ProfileMap, b: float,
                 rates: DiscountRateSet, rng: np.random.Generator,
                 theta: int | None = None, workers: int | None = None) -> SeedingHistory:
    """One-stage adaptive baseline: probe X by residual-influence-to-cost
    ratio; accepted users seed the diffusion directly."""
    x = sorted(set(int(u) for u in x))
    hist = SeedingHistory(x=tuple(x))
    if not x or b <= BUDGET_TOL:
        return hist
    master = int(rng.integers(2**63))
    probe_rng = spawn(master, "probe")
    diffuse_rng = spawn(master, "diffuse")
    theta = theta or _default_theta_for(g)
    live: dict[int, set[float]] = {u: set(rates) for u in x}
    version = 0
    sub, parent_ids = residual_subgraph(g, hist.influenced)
    to_sub = np.full(g.node_count, -1, dtype=np.int64)
    to_sub[parent_ids] = np.arange(len(parent_ids))
    idx_r = rebuild_for_residual(g, hist.influenced, theta, spawn(master, "rridx", 0), workers)
    deltas = {u: estimate_influence(idx_r, [u]) for u in live if u not in hist.influenced}
    round_no = 0
    while True:
        remaining = b - hist.spent_b1
        space = [Action(u, d) for u in sorted(live) for d in sorted(live[u])]
        y = select_action(space, remaining, lambda a: deltas.get(a.user, 0.0))
        if y is None:
            break
        round_no += 1
        accepted = probe_rng.random() < profiles[y.user](y.discount)
        hist.steps.append((y, accepted))
        if not accepted:
            live[y.user].discard(y.discount)
            if not live[y.user]:
                del live[y.user]
            hist.rounds.append(RoundRecord(round_no, y, False, None, [], 0,
                                           hist.spent_b1, hist.spent_b2))
            continue
        del live[y.user]
        hist.spent_b1 += y.discount
        newly: set[int] = set()
        if y.user not in hist.influenced:
            real = sample_realization(sub, diffuse_rng)
            res = propagate(sub, [int(to_sub[y.user])], real)
            newly = {int(parent_ids[v]) for v in res.influenced}
            hist.influenced |= newly
        hist.stage2_allocs.append((y, {y.user: y.discount}, {y.user}))
        hist.rounds.append(RoundRecord(round_no, y, True, {y.user: y.discount},
                                       [y.user], len(newly),
                                       hist.spent_b1, hist.spent_b2))
        version += 1
        sub, parent_ids = residual_subgraph(g, hist.influenced)
        to_sub = np.full(g.node_count, -1, dtype=np.int64)
        to_sub[parent_ids] = np.arange(len(parent_ids))
        idx_r = rebuild_for_residual(g, hist.influenced, theta, spawn(master, "rridx", version), workers)
        deltas = {u: estimate_influence(idx_r, [u]) for u in live if u not in hist.influenced}
    return hist
