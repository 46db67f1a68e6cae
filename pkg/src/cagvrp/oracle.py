"""Independent brute-force exact solver, used to certify the engine.

Enumerates every stop set containing the depot (size >= 3), costs the ground
tour by a Held-Karp dynamic program, and optimally partitions the remaining
targets among the stops with a subset DP whose group costs come from exact
directed travelling-salesman programs per stop.  Shares no code path with
the branch-and-cut engine on purpose.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from cagvrp.instance import Instance
from cagvrp.model import Solution, objective_of

BRUTE_FORCE_MAX_N = 10
ENUMERATE_MAX_N = 6


@dataclass
class OracleResult:
    objective: float
    solution: Solution | None
    structures_examined: int

    @property
    def feasible(self) -> bool:
        return self.solution is not None


def _held_karp_tour(cost, members, start) -> tuple:
    """Exact undirected tour cost through ``members`` (start included);
    returns (cost, tour starting at start)."""
    others = [v for v in members if v != start]
    k = len(others)
    full = (1 << k) - 1
    dp = [[math.inf] * k for _ in range(1 << k)]
    parent = [[-1] * k for _ in range(1 << k)]
    for a in range(k):
        dp[1 << a][a] = cost[start][others[a]]
    for mask in range(1, full + 1):
        row = dp[mask]
        for last in range(k):
            cur = row[last]
            if cur == math.inf or not (mask >> last) & 1:
                continue
            base = cost[others[last]]
            for nxt in range(k):
                if (mask >> nxt) & 1:
                    continue
                cand = cur + base[others[nxt]]
                nmask = mask | (1 << nxt)
                if cand < dp[nmask][nxt]:
                    dp[nmask][nxt] = cand
                    parent[nmask][nxt] = last
    best = math.inf
    best_last = -1
    for last in range(k):
        cand = dp[full][last] + cost[others[last]][start]
        if cand < best:
            best = cand
            best_last = last
    seq = []
    mask, last = full, best_last
    while last >= 0:
        seq.append(others[last])
        prev = parent[mask][last]
        mask ^= 1 << last
        last = prev
    return best, [start] + seq[::-1]


class _StopPrograms:
    """Directed path DPs per stop, reused across all stop sets.

    For stop ``s`` over its comm-feasible targets F_s, dp[mask][last] is the
    cheapest directed path s -> ... -> last covering exactly ``mask``;
    cycle(mask) closes the path back to s.  All subsets of F_s share one
    table, so each stop's DP is computed once.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        n = instance.n
        d = instance.uav_cost
        self.feas = []
        self.pos = []          # global target -> bit position in F_s
        self.dp = []
        for s in range(n):
            fs = [t for t in range(n) if t != s and instance.comm_ok[t, s]]
            self.feas.append(fs)
            self.pos.append({t: b for b, t in enumerate(fs)})
            k = len(fs)
            dp = [[math.inf] * k for _ in range(1 << k)]
            for b, t in enumerate(fs):
                dp[1 << b][b] = float(d[s, t])
            for mask in range(1, 1 << k):
                row = dp[mask]
                for last in range(k):
                    cur = row[last]
                    if cur == math.inf or not (mask >> last) & 1:
                        continue
                    for nxt in range(k):
                        if (mask >> nxt) & 1:
                            continue
                        cand = cur + float(d[fs[last], fs[nxt]])
                        nmask = mask | (1 << nxt)
                        if cand < dp[nmask][nxt]:
                            dp[nmask][nxt] = cand
            self.dp.append(dp)

    def cycle_cost(self, s: int, group) -> float:
        """Cheapest directed cycle s -> group -> s; inf when infeasible."""
        if not group:
            return 0.0
        pos = self.pos[s]
        mask = 0
        for t in group:
            b = pos.get(t)
            if b is None:
                return math.inf
            mask |= 1 << b
        d = self.instance.uav_cost
        fs = self.feas[s]
        row = self.dp[s][mask]
        best = math.inf
        for last in range(len(fs)):
            if (mask >> last) & 1 and row[last] < math.inf:
                cand = row[last] + float(d[fs[last], s])
                if cand < best:
                    best = cand
        return best

    def cycle_order(self, s: int, group) -> list:
        """One optimal visiting order for the cycle (deterministic)."""
        if not group:
            return [s]
        best = math.inf
        best_perm = None
        for perm in itertools.permutations(sorted(group)):
            c = self.instance.uav_cost[s, perm[0]]
            for a, b in zip(perm, perm[1:]):
                c += self.instance.uav_cost[a, b]
            c += self.instance.uav_cost[perm[-1], s]
            if c < best - 1e-15:
                best = c
                best_perm = perm
        return [s] + list(best_perm)


def brute_force(instance: Instance) -> OracleResult:
    """Exact optimum by exhaustive enumeration; guarded to n <= 10."""
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(
            f"brute_force is limited to n <= {BRUTE_FORCE_MAX_N} (got n = {n}); "
            "use the branch-and-cut engine for larger instances")
    t0 = instance.depot
    cost = [[float(instance.gv_cost[i, j]) for j in range(n)] for i in range(n)]
    programs = _StopPrograms(instance)

    others = [v for v in range(n) if v != t0]
    best_total = math.inf
    best_pick = None
    structures = 0

    for stop_bits in range(1 << len(others)):
        stops = [t0] + [others[b] for b in range(len(others)) if (stop_bits >> b) & 1]
        if len(stops) < 3:
            continue
        stops = sorted(stops)
        free = [v for v in range(n) if v not in stops]
        tour_cost, _ = _held_karp_tour(cost, stops, t0)

        u = len(free)
        full = (1 << u) - 1
        # group-cost tables per stop over subsets of the free targets
        gtab = []
        for s in stops:
            g = [math.inf] * (full + 1)
            g[0] = 0.0
            for mask in range(1, full + 1):
                group = [free[b] for b in range(u) if (mask >> b) & 1]
                g[mask] = programs.cycle_cost(s, group)
            gtab.append(g)
        f = [math.inf] * (full + 1)
        cnt = [0] * (full + 1)
        f[0] = 0.0
        cnt[0] = 1
        for g in gtab:
            nf = [math.inf] * (full + 1)
            ncnt = [0] * (full + 1)
            for mask in range(full + 1):
                if f[mask] == math.inf and cnt[mask] == 0:
                    continue
                sub = mask ^ full          # iterate over additions to mask
                # standard submask walk over the complement
                add = sub
                while True:
                    nmask = mask | add
                    if g[add] < math.inf and cnt[mask]:
                        if f[mask] + g[add] < nf[nmask]:
                            nf[nmask] = f[mask] + g[add]
                        ncnt[nmask] += cnt[mask]
                    if add == 0:
                        break
                    add = (add - 1) & sub
            f, cnt = nf, ncnt
        if cnt[full]:
            structures += cnt[full]
            total = tour_cost + f[full]
            if total < best_total - 1e-15:
                best_total = total
                best_pick = (tuple(stops), tuple(free))

    if best_pick is None:
        return OracleResult(objective=math.inf, solution=None, structures_examined=structures)

    stops, free = best_pick
    solution = _reconstruct(instance, programs, cost, list(stops), list(free))
    return OracleResult(objective=float(best_total), solution=solution,
                        structures_examined=structures)


def _reconstruct(instance, programs, cost, stops, free) -> Solution:
    """Rebuild one optimal solution for the winning stop set."""
    t0 = instance.depot
    tour_cost, tour = _held_karp_tour(cost, stops, t0)
    u = len(free)
    full = (1 << u) - 1
    gtab = {}
    for s in stops:
        g = [math.inf] * (full + 1)
        g[0] = 0.0
        for mask in range(1, full + 1):
            group = [free[b] for b in range(u) if (mask >> b) & 1]
            g[mask] = programs.cycle_cost(s, group)
        gtab[s] = g
    f = [math.inf] * (full + 1)
    f[0] = 0.0
    choice = [dict() for _ in range(full + 1)]
    for si, s in enumerate(stops):
        nf = [math.inf] * (full + 1)
        nchoice = [None] * (full + 1)
        g = gtab[s]
        for mask in range(full + 1):
            if f[mask] == math.inf:
                continue
            sub = mask ^ full
            add = sub
            while True:
                nmask = mask | add
                if g[add] < math.inf and f[mask] + g[add] < nf[nmask] - 1e-15:
                    nf[nmask] = f[mask] + g[add]
                    nchoice[nmask] = (mask, add)
                if add == 0:
                    break
                add = (add - 1) & sub
        f = nf
        for mask in range(full + 1):
            if nchoice[mask] is not None:
                choice[mask][si] = nchoice[mask]

    # walk back through the stop layers
    groups = {}
    mask = full
    for si in range(len(stops) - 1, -1, -1):
        step = choice[mask].get(si)
        if step is None:
            raise RuntimeError("assignment DP reconstruction lost its trail")
        prev, add = step
        groups[stops[si]] = [free[b] for b in range(u) if (add >> b) & 1]
        mask = prev

    assignment = list(range(instance.n))
    subtours = {}
    for s, group in groups.items():
        if not group:
            continue
        subtours[s] = programs.cycle_order(s, group)
        for t in group:
            assignment[t] = s
    sol = Solution(gv_tour=tour, subtours=subtours, assignment=assignment,
                   gv_cost_total=0.0, uav_cost_total=0.0, objective=0.0)
    sol.gv_cost_total = float(sum(instance.gv_cost[tour[k], tour[(k + 1) % len(tour)]]
                                  for k in range(len(tour))))
    sol.uav_cost_total = float(sum(instance.uav_cost[cyc[k], cyc[(k + 1) % len(cyc)]]
                                   for cyc in subtours.values() for k in range(len(cyc))))
    sol.objective = sol.gv_cost_total + sol.uav_cost_total
    return sol


def enumerate_feasible(instance: Instance, limit: int | None = None):
    """Yield every feasible solution (all stop sets, assignments, and cyclic
    orders), up to ``limit``; exhaustive when the limit is not hit.  n <= 6."""
    n = instance.n
    if n > ENUMERATE_MAX_N:
        raise ValueError(
            f"enumerate_feasible is limited to n <= {ENUMERATE_MAX_N} (got n = {n})")
    t0 = instance.depot
    others = [v for v in range(n) if v != t0]
    count = 0
    for stop_bits in range(1 << len(others)):
        stops = sorted([t0] + [others[b] for b in range(len(others)) if (stop_bits >> b) & 1])
        if len(stops) < 3:
            continue
        free = [v for v in range(n) if v not in stops]
        feas_stops = []
        possible = True
        for t in free:
            fs = [s for s in stops if instance.comm_ok[t, s]]
            if not fs:
                possible = False
                break
            feas_stops.append(fs)
        if not possible:
            continue
        rest = [v for v in stops if v != t0]
        tours = []
        for perm in itertools.permutations(rest):
            if len(perm) >= 2 and perm[0] > perm[-1]:
                continue              # one orientation per undirected tour
            tours.append([t0] + list(perm))
        for pick in itertools.product(*feas_stops) if free else [()]:
            groups = {}
            for t, s in zip(free, pick):
                groups.setdefault(s, []).append(t)
            order_choices = []
            group_stops = sorted(groups)
            for s in group_stops:
                order_choices.append([list(p) for p in itertools.permutations(groups[s])])
            for tour in tours:
                for orders in itertools.product(*order_choices) if group_stops else [()]:
                    subtours = {s: [s] + order for s, order in zip(group_stops, orders)}
                    assignment = list(range(n))
                    for t, s in zip(free, pick):
                        assignment[t] = s
                    sol = Solution(gv_tour=list(tour), subtours=subtours,
                                   assignment=assignment, gv_cost_total=0.0,
                                   uav_cost_total=0.0, objective=0.0)
                    sol.gv_cost_total = float(sum(instance.gv_cost[tour[k], tour[(k + 1) % len(tour)]]
                                                  for k in range(len(tour))))
                    sol.uav_cost_total = float(sum(
                        instance.uav_cost[cyc[k], cyc[(k + 1) % len(cyc)]]
                        for cyc in subtours.values() for k in range(len(cyc))))
                    sol.objective = objective_of(instance, sol)
                    yield sol
                    count += 1
                    if limit is not None and count >= limit:
                        return
