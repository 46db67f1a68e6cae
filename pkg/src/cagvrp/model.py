"""Linearized MILP model, solution structure, and feasibility checking.

Variables, in one contiguous index space:

* ``x_e``     one binary per unordered target pair (ground-vehicle edge),
* ``w_ij``    one per ordered pair including self-arcs (UAV sub-tour arc;
              ``w_ii = 1`` is the trivial sub-tour of a stop),
* ``y_ij``    assignment of target i to the sub-tour launched at j
              (``y_ii = 1`` marks i as a stop),
* ``z_ijk``   linearization product standing in for ``y_ik * y_jk``.

Static constraints: ground degree rows (x-degree of i equals ``2 y_ii``),
UAV in/out degree rows (exactly one incoming and one outgoing arc per
target), and the linking rows tying w to z and z to y.  Sub-tour
elimination and 2-matching inequalities are exponential families and are
added lazily by the engine, never enumerated here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cagvrp.instance import Instance

INT_TOL = 1e-6          # integrality tolerance for decoding
COST_TOL = 1e-6         # cost cross-check tolerance

SENSE_LE = "<="
SENSE_EQ = "="
SENSE_GE = ">="


class DecodeError(RuntimeError):
    """Integral point cannot be decoded into a CAGVRP solution.

    Signals a missing cut upstream (disconnected ground edges, a UAV cycle
    without a unique stop, or an inconsistent assignment)."""


@dataclass(frozen=True)
class VariableSpace:
    """Bijective index maps for the x / w / y / z variable blocks."""

    n: int

    @property
    def num_edges(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def num_vars(self) -> int:
        n = self.n
        return self.num_edges + 2 * n * n + n * n * n

    @property
    def w_offset(self) -> int:
        return self.num_edges

    @property
    def y_offset(self) -> int:
        return self.num_edges + self.n * self.n

    @property
    def z_offset(self) -> int:
        return self.num_edges + 2 * self.n * self.n

    def x_index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        if i == j:
            raise ValueError("x variables exist only for distinct pairs")
        return i * self.n - i * (i + 1) // 2 + (j - i - 1)

    def w_index(self, i: int, j: int) -> int:
        return self.w_offset + i * self.n + j

    def y_index(self, i: int, j: int) -> int:
        return self.y_offset + i * self.n + j

    def z_index(self, i: int, j: int, k: int) -> int:
        return self.z_offset + (i * self.n + j) * self.n + k

    def describe(self, idx: int):
        """Inverse map: variable index -> (kind, subscripts...)."""
        n = self.n
        if idx < 0 or idx >= self.num_vars:
            raise IndexError(f"variable index {idx} out of range")
        if idx < self.num_edges:
            i = 0
            rem = idx
            while rem >= n - 1 - i:
                rem -= n - 1 - i
                i += 1
            return ("x", i, i + 1 + rem)
        if idx < self.y_offset:
            off = idx - self.w_offset
            return ("w", off // n, off % n)
        if idx < self.z_offset:
            off = idx - self.y_offset
            return ("y", off // n, off % n)
        off = idx - self.z_offset
        return ("z", off // (n * n), (off // n) % n, off % n)

    def edges(self):
        """All unordered pairs (i, j), i < j, in x-index order."""
        n = self.n
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j


@dataclass(frozen=True)
class LinearRow:
    """Sparse inequality/equation over the variable space.

    ``indices`` strictly increasing, parallel to ``coeffs`` (no stored
    zeros); ``tag`` records which constraint family produced the row.
    """

    indices: tuple
    coeffs: tuple
    sense: str
    rhs: float
    tag: str

    def __post_init__(self):
        if any(self.indices[k] >= self.indices[k + 1] for k in range(len(self.indices) - 1)):
            raise ValueError("row indices must be strictly increasing")
        if any(c == 0.0 for c in self.coeffs):
            raise ValueError("zero coefficients must not be stored")
        if self.sense not in (SENSE_LE, SENSE_EQ, SENSE_GE):
            raise ValueError(f"bad sense {self.sense!r}")

    @classmethod
    def from_terms(cls, terms, sense: str, rhs: float, tag: str) -> "LinearRow":
        """Build a row from an iterable of (index, coefficient) terms."""
        acc = {}
        for idx, coef in terms:
            acc[idx] = acc.get(idx, 0.0) + coef
        items = sorted((i, c) for i, c in acc.items() if c != 0.0)
        return cls(
            indices=tuple(i for i, _ in items),
            coeffs=tuple(float(c) for _, c in items),
            sense=sense,
            rhs=float(rhs),
            tag=tag,
        )

    def activity(self, point: np.ndarray) -> float:
        return float(sum(c * point[i] for i, c in zip(self.indices, self.coeffs)))

    def violation(self, point: np.ndarray) -> float:
        """Positive amount by which ``point`` violates the row (0 if satisfied)."""
        a = self.activity(point)
        if self.sense == SENSE_LE:
            return a - self.rhs
        if self.sense == SENSE_GE:
            return self.rhs - a
        return abs(a - self.rhs)

    def satisfied_by(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        return self.violation(point) <= tol

    def canonical_key(self):
        """Hashable identity for cut deduplication."""
        return (self.sense, round(self.rhs, 9), self.indices, tuple(round(c, 9) for c in self.coeffs))


@dataclass
class MilpModel:
    """The linearized formulation for one instance: objective, static rows, bounds."""

    space: VariableSpace
    objective: np.ndarray
    rows: list
    lb: np.ndarray
    ub: np.ndarray
    fixed: list                 # (variable index, value) pairs, for audit
    penalty_mode: bool = False

    @property
    def num_vars(self) -> int:
        return self.space.num_vars


def big_m(instance: Instance) -> float:
    """Penalty coefficient for comm-infeasible assignments in penalty mode."""
    return 10.0 * float(instance.gv_cost.sum())


def build_model(instance: Instance, penalty_mode: bool = False) -> MilpModel:
    """Assemble objective, static constraint rows, bounds, and fixings.

    In the default (hard-fixing) mode, ``y_ij`` is fixed to 0 for every
    comm-infeasible pair; penalty mode instead charges a large objective
    coefficient.  The depot's self-assignment is fixed to 1 in both modes:
    the ground tour always starts and ends at the depot.
    """
    n = instance.n
    space = VariableSpace(n)
    obj = np.zeros(space.num_vars)
    for i, j in space.edges():
        obj[space.x_index(i, j)] = instance.gv_cost[i, j]
    for i in range(n):
        for j in range(n):
            obj[space.w_index(i, j)] = instance.uav_cost[i, j]
    if penalty_mode:
        m_val = big_m(instance)
        for i in range(n):
            for j in range(n):
                if not instance.comm_ok[i, j]:
                    obj[space.y_index(i, j)] = m_val

    rows = []
    for i in range(n):
        terms = [(space.x_index(i, j), 1.0) for j in range(n) if j != i]
        terms.append((space.y_index(i, i), -2.0))
        rows.append(LinearRow.from_terms(terms, SENSE_EQ, 0.0, "degree-x"))
    for i in range(n):
        rows.append(LinearRow.from_terms(
            [(space.w_index(i, j), 1.0) for j in range(n)], SENSE_EQ, 1.0, "out-degree-w"))
    for j in range(n):
        rows.append(LinearRow.from_terms(
            [(space.w_index(i, j), 1.0) for i in range(n)], SENSE_EQ, 1.0, "in-degree-w"))
    for i in range(n):
        for j in range(n):
            terms = [(space.w_index(i, j), 1.0)]
            terms += [(space.z_index(i, j, k), -1.0) for k in range(n)]
            rows.append(LinearRow.from_terms(terms, SENSE_LE, 0.0, "link-wz"))
    # all ordered triples, degenerate ones included
    for i in range(n):
        for j in range(n):
            for k in range(n):
                rows.append(LinearRow.from_terms(
                    [(space.z_index(i, j, k), 1.0), (space.y_index(i, k), -1.0)],
                    SENSE_LE, 0.0, "z-le-yik"))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                rows.append(LinearRow.from_terms(
                    [(space.z_index(i, j, k), 1.0), (space.y_index(j, k), -1.0)],
                    SENSE_LE, 0.0, "z-le-yjk"))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                # z >= y_ik + y_jk - 1; duplicate terms of degenerate triples merge
                rows.append(LinearRow.from_terms(
                    [(space.y_index(i, k), 1.0), (space.y_index(j, k), 1.0),
                     (space.z_index(i, j, k), -1.0)],
                    SENSE_LE, 1.0, "z-ge"))

    lb = np.zeros(space.num_vars)
    ub = np.ones(space.num_vars)
    fixed = []
    if not penalty_mode:
        for i in range(n):
            for j in range(n):
                if not instance.comm_ok[i, j]:
                    ub[space.y_index(i, j)] = 0.0
                    fixed.append((space.y_index(i, j), 0.0))
    d = space.y_index(instance.depot, instance.depot)
    lb[d] = 1.0
    fixed.append((d, 1.0))
    return MilpModel(space=space, objective=obj, rows=rows, lb=lb, ub=ub,
                     fixed=fixed, penalty_mode=penalty_mode)


@dataclass
class Solution:
    """Decoded routing: ground tour, per-stop UAV sub-tours, assignment, costs.

    ``gv_tour`` is the cyclic stop sequence starting at the depot;
    ``subtours[s]`` is the cyclic UAV visit sequence starting at stop ``s``
    (only stops with at least one assigned target appear); ``assignment[i]``
    is the stop covering target ``i`` (itself for stops).
    """

    gv_tour: list
    subtours: dict
    assignment: list
    gv_cost_total: float
    uav_cost_total: float
    objective: float
    penalty_total: float = 0.0
    stats: dict = field(default_factory=dict)

    def stops(self) -> set:
        return set(self.gv_tour)

    def to_json_dict(self) -> dict:
        return {
            "objective": self.objective,
            "gv_tour": [int(i) for i in self.gv_tour],
            "subtours": {str(s): [int(i) for i in cyc] for s, cyc in sorted(self.subtours.items())},
            "assignment": [int(s) for s in self.assignment],
            "gv_cost_total": self.gv_cost_total,
            "uav_cost_total": self.uav_cost_total,
            "penalty_total": self.penalty_total,
            "stats": self.stats,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Solution":
        return cls(
            gv_tour=[int(i) for i in doc["gv_tour"]],
            subtours={int(s): [int(i) for i in cyc] for s, cyc in doc.get("subtours", {}).items()},
            assignment=[int(s) for s in doc["assignment"]],
            gv_cost_total=float(doc.get("gv_cost_total", 0.0)),
            uav_cost_total=float(doc.get("uav_cost_total", 0.0)),
            objective=float(doc["objective"]),
            penalty_total=float(doc.get("penalty_total", 0.0)),
            stats=dict(doc.get("stats", {})),
        )


def save_solution(solution: Solution, path, wall_time_s: float | None = None) -> None:
    """Write a solution file; wall time is kept outside the stats block so the
    stats stay byte-identical across reruns."""
    doc = solution.to_json_dict()
    if wall_time_s is not None:
        doc["wall_time_s"] = wall_time_s
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_solution(path) -> Solution:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return Solution.from_json_dict(doc)


def _tour_edges(tour):
    return [(tour[k], tour[(k + 1) % len(tour)]) for k in range(len(tour))]


def _cycle_arcs(cycle):
    return [(cycle[k], cycle[(k + 1) % len(cycle)]) for k in range(len(cycle))]


def objective_of(instance: Instance, solution: Solution, penalty_mode: bool = False) -> float:
    """Total travel cost recomputed from the instance matrices."""
    gv = sum(instance.gv_cost[i, j] for i, j in _tour_edges(solution.gv_tour))
    uav = 0.0
    for cyc in solution.subtours.values():
        uav += sum(instance.uav_cost[i, j] for i, j in _cycle_arcs(cyc))
    total = float(gv + uav)
    if penalty_mode:
        m_val = big_m(instance)
        for i, s in enumerate(solution.assignment):
            if not instance.comm_ok[i, s]:
                total += m_val
    return total


def encode(instance: Instance, solution: Solution) -> np.ndarray:
    """Solution -> full variable vector (x, w, y, z blocks); inverse of decode."""
    space = VariableSpace(instance.n)
    v = np.zeros(space.num_vars)
    for i, j in _tour_edges(solution.gv_tour):
        v[space.x_index(i, j)] = 1.0
    in_subtour = set()
    for s, cyc in solution.subtours.items():
        for i, j in _cycle_arcs(cyc):
            v[space.w_index(i, j)] = 1.0
        in_subtour.update(cyc)
    for s in solution.gv_tour:
        if s not in in_subtour:
            v[space.w_index(s, s)] = 1.0
    for i, s in enumerate(solution.assignment):
        v[space.y_index(i, s)] = 1.0
    for i in range(instance.n):
        for j in range(instance.n):
            for k in range(instance.n):
                yik = v[space.y_index(i, k)]
                yjk = v[space.y_index(j, k)]
                if yik == 1.0 and yjk == 1.0:
                    v[space.z_index(i, j, k)] = 1.0
    return v


def _round_binary(vec: np.ndarray, what: str) -> np.ndarray:
    frac = np.abs(vec - np.round(vec))
    if frac.size and frac.max() > INT_TOL:
        k = int(np.argmax(frac))
        raise ValueError(f"{what} vector is not integral: entry {k} = {vec[k]!r}")
    return np.round(vec).astype(int)


def decode(instance: Instance, x: np.ndarray, w: np.ndarray, y: np.ndarray) -> Solution:
    """Integral (x, w, y) point -> structured Solution.

    The point must be CAGVRP-feasible; structural defects (disconnected
    ground edges, a UAV cycle without exactly one stop, missing assignment
    licence) raise :class:`DecodeError`.  Costs are recomputed from the
    instance, never read from an LP objective.
    """
    n = instance.n
    space = VariableSpace(n)
    xv = _round_binary(np.asarray(x, dtype=float), "x")
    wv = _round_binary(np.asarray(w, dtype=float), "w")
    yv = _round_binary(np.asarray(y, dtype=float), "y")

    ymat = yv.reshape(n, n) if yv.size == n * n else None
    if ymat is None:
        raise ValueError("y vector has wrong length")
    wmat = wv.reshape(n, n)
    stops = [i for i in range(n) if ymat[i, i] == 1]
    if instance.depot not in stops:
        raise DecodeError("depot is not a stop")

    adj = {i: [] for i in range(n)}
    for (i, j), e in zip(space.edges(), range(space.num_edges)):
        if xv[e]:
            adj[i].append(j)
            adj[j].append(i)
    for i in range(n):
        deg = len(adj[i])
        want = 2 if ymat[i, i] == 1 else 0
        if deg != want:
            raise DecodeError(f"ground degree of target {i} is {deg}, expected {want}")

    # walk the ground tour from the depot, canonical direction
    tour = [instance.depot]
    prev = None
    cur = instance.depot
    while True:
        nxt = [v for v in sorted(adj[cur]) if v != prev]
        if not nxt:
            raise DecodeError("ground tour walk stuck")
        step = nxt[0]
        if step == instance.depot:
            break
        tour.append(step)
        prev, cur = cur, step
        if len(tour) > n:
            raise DecodeError("ground tour walk does not close")
    if len(tour) != len(stops):
        raise DecodeError("ground edges are disconnected: tour misses some stops")

    # successor map -> UAV cycles
    succ = {}
    for i in range(n):
        outs = [j for j in range(n) if wmat[i, j] == 1]
        if len(outs) != 1:
            raise DecodeError(f"UAV out-degree of target {i} is {len(outs)}")
        succ[i] = outs[0]
    seen = set()
    subtours = {}
    assignment = [-1] * n
    stop_set = set(stops)
    for start in range(n):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        cur = succ[start]
        while cur != start:
            if cur in seen:
                raise DecodeError("UAV arcs do not form disjoint cycles")
            cyc.append(cur)
            seen.add(cur)
            cur = succ[cur]
        if len(cyc) == 1:
            continue
        cyc_stops = [v for v in cyc if v in stop_set]
        if len(cyc_stops) == 0:
            raise DecodeError(f"UAV cycle {cyc} passes through no stop")
        if len(cyc_stops) > 1:
            raise DecodeError(f"UAV cycle {cyc} passes through several stops {cyc_stops}")
        s = cyc_stops[0]
        k = cyc.index(s)
        cyc = cyc[k:] + cyc[:k]
        subtours[s] = cyc
        for v in cyc:
            if v != s:
                if ymat[v, s] != 1:
                    raise DecodeError(f"target {v} rides the sub-tour of stop {s} but y[{v},{s}] = 0")
                assignment[v] = s
    for s in stops:
        assignment[s] = s
    if any(a < 0 for a in assignment):
        missing = [i for i, a in enumerate(assignment) if a < 0]
        raise DecodeError(f"targets {missing} are neither stops nor on any sub-tour")

    sol = Solution(
        gv_tour=tour,
        subtours=subtours,
        assignment=assignment,
        gv_cost_total=0.0,
        uav_cost_total=0.0,
        objective=0.0,
    )
    sol.gv_cost_total = float(sum(instance.gv_cost[i, j] for i, j in _tour_edges(tour)))
    sol.uav_cost_total = float(sum(instance.uav_cost[i, j]
                                   for cyc in subtours.values() for i, j in _cycle_arcs(cyc)))
    sol.objective = sol.gv_cost_total + sol.uav_cost_total
    return sol


@dataclass(frozen=True)
class Violation:
    """One validator finding: machine-matchable kind plus human detail."""

    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


def validate(instance: Instance, solution: Solution) -> list:
    """Check a solution against the problem definition; empty report == feasible."""
    n = instance.n
    report = []
    tour = solution.gv_tour
    stop_set = set(tour)

    if len(tour) < 3:
        report.append(Violation("tour-size", f"ground tour has {len(tour)} stops, need >= 3"))
    if len(stop_set) != len(tour):
        report.append(Violation("tour-simple", "ground tour repeats a stop"))
    if any(not (0 <= v < n) for v in tour):
        report.append(Violation("tour-range", "ground tour contains an invalid target index"))
    if instance.depot not in stop_set:
        report.append(Violation("tour-depot", "ground tour does not pass through the depot"))

    covered = dict.fromkeys(range(n), 0)
    for s in tour:
        if 0 <= s < n:
            covered[s] += 1
    for s, cyc in solution.subtours.items():
        if s not in stop_set:
            report.append(Violation("detached-sub-tour", f"sub-tour key {s} is not a stop"))
        if s not in cyc:
            report.append(Violation("detached-sub-tour", f"sub-tour {cyc} does not pass through its stop {s}"))
        if len(cyc) < 2:
            report.append(Violation("sub-tour-size", f"sub-tour at stop {s} has no assigned target"))
        if len(set(cyc)) != len(cyc):
            report.append(Violation("sub-tour-simple", f"sub-tour at stop {s} repeats a target"))
        if cyc and cyc[0] != s and s in cyc:
            report.append(Violation("sub-tour-start", f"sub-tour at stop {s} does not start at the stop"))
        for v in cyc:
            if not (0 <= v < n):
                report.append(Violation("sub-tour-range", f"sub-tour at stop {s} contains invalid index {v}"))
            elif v != s:
                covered[v] += 1
                if solution.assignment[v] != s:
                    report.append(Violation(
                        "assignment-mismatch",
                        f"target {v} visited by sub-tour of stop {s} but assigned to {solution.assignment[v]}"))
    for i in range(n):
        if covered[i] != 1:
            report.append(Violation("coverage", f"target {i} covered {covered[i]} times, expected exactly once"))
    if len(solution.assignment) != n:
        report.append(Violation("assignment-length", f"assignment has {len(solution.assignment)} entries"))
    else:
        for i, s in enumerate(solution.assignment):
            if not (0 <= s < n):
                report.append(Violation("assignment-range", f"assignment of target {i} is invalid: {s}"))
                continue
            if i in stop_set and s != i:
                report.append(Violation("assignment-stop", f"stop {i} assigned to {s}, expected itself"))
            if i not in stop_set and s not in stop_set:
                report.append(Violation("assignment-stop", f"target {i} assigned to non-stop {s}"))
            if not instance.comm_ok[i, s]:
                report.append(Violation(
                    "comm-radius",
                    f"target {i} assigned to stop {s} at distance beyond the communication radius"))

    gv = sum(instance.gv_cost[i, j] for i, j in _tour_edges(tour)) if len(set(tour)) == len(tour) else None
    if gv is not None and not math.isclose(gv, solution.gv_cost_total, abs_tol=COST_TOL, rel_tol=0.0):
        report.append(Violation("cost-gv", f"gv_cost_total {solution.gv_cost_total} != recomputed {gv}"))
    uav = sum(instance.uav_cost[i, j] for cyc in solution.subtours.values() for i, j in _cycle_arcs(cyc))
    if not math.isclose(uav, solution.uav_cost_total, abs_tol=COST_TOL, rel_tol=0.0):
        report.append(Violation("cost-uav", f"uav_cost_total {solution.uav_cost_total} != recomputed {uav}"))
    total = solution.gv_cost_total + solution.uav_cost_total + solution.penalty_total
    if not math.isclose(total, solution.objective, abs_tol=COST_TOL, rel_tol=0.0):
        report.append(Violation("cost-objective", f"objective {solution.objective} != component sum {total}"))
    return report
