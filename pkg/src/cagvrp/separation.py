"""Cut separation: sub-tour elimination, UAV connectivity, 2-matching.

Given an LP point (fractional or integral), these routines hunt violated
inequalities from three exponential families:

* ground sub-tour elimination over an edge cut:
  ``x(delta(S)) >= 2 * sum_{j in S} y_ij`` for ``i in S``, depot not in S;
* UAV connectivity over directed cuts, both directions:
  ``w(delta+(S)) >= 1 - sum_{j in S} y_ij`` (and the delta- twin) for i in S;
* 2-matching inequalities with handle H and odd, endpoint-disjoint teeth I:
  ``x(gamma(H)) + x(I) <= sum_{H} y_ii + (|I| - 1) / 2``.

Candidate sets come from connected components of the support graph and from
a Gusfield cut tree (n-1 max-flow calls with a breadth-first augmenting-path
solver).  At integral points, ``check_integral`` additionally tests the
vertex sets of the UAV cycles (and those sets minus their stops) against the
ground sub-tour family; with that extension an empty result certifies that
the point decodes to a feasible solution.

Every emitted cut records the defining sets and its violation at the
separating point; all routines are pure and deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from cagvrp.model import LinearRow, SENSE_GE, SENSE_LE, VariableSpace

SUPPORT_EPS = 1e-6
SEP_TOL = 1e-4
MAX_ROWS_PER_SET = 4      # most violated target plus up to 3 runners-up


@dataclass(frozen=True)
class Cut:
    """A generated inequality with its defining sets, for audit and logging."""

    kind: str                      # sec-x | sec-w-out | sec-w-in | two-matching
    row: LinearRow
    violation: float
    members: tuple = ()            # S for SEC cuts, handle H for 2-matching
    target: int | None = None      # the i of a SEC cut
    teeth: tuple = ()              # 2-matching teeth as (i, j) pairs

    def size_label(self) -> str:
        if self.kind == "two-matching":
            return f"|H|={len(self.members)}/|I|={len(self.teeth)}"
        return f"|S|={len(self.members)}"


@dataclass
class SupportGraph:
    """Weighted graph induced by the positive entries of an LP point."""

    vertices: list
    edges: list          # (i, j, weight); i < j for the undirected form
    directed: bool = False

    def adjacency(self) -> dict:
        adj = {v: [] for v in self.vertices}
        for i, j, wt in self.edges:
            adj[i].append((j, wt))
            if not self.directed:
                adj[j].append((i, wt))
        return adj


def build_support_undirected(space: VariableSpace, depot: int, x: np.ndarray, y: np.ndarray) -> SupportGraph:
    """Support graph of the ground-edge point: targets with positive
    self-assignment plus the depot, edges with weight above threshold."""
    verts = {depot}
    for i in range(space.n):
        if y[i, i] > SUPPORT_EPS:
            verts.add(i)
    edges = []
    for i, j in space.edges():
        v = float(x[space.x_index(i, j)])
        if v > SUPPORT_EPS:
            edges.append((i, j, min(v, 1.0)))
            verts.add(i)
            verts.add(j)
    return SupportGraph(vertices=sorted(verts), edges=edges)


def _components(vertices, adj) -> list:
    seen = set()
    comps = []
    for v in vertices:
        if v in seen:
            continue
        comp = []
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            comp.append(u)
            for nb, _ in adj[u]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
    return comps


def max_flow(vertices, capacity: dict, source, sink):
    """Edmonds-Karp max flow; returns (value, source-side vertex set).

    ``capacity`` maps ordered pairs to capacities; undirected edges are
    entered in both directions.  Deterministic: neighbours scanned sorted.
    """
    residual = dict(capacity)
    adj = {v: [] for v in vertices}
    for (a, b) in capacity:
        adj[a].append(b)
        residual.setdefault((b, a), 0.0)
        adj[b].append(a)
    for v in adj:
        adj[v] = sorted(set(adj[v]))
    value = 0.0
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for nb in adj[u]:
                if nb not in parent and residual.get((u, nb), 0.0) > 1e-12:
                    parent[nb] = u
                    queue.append(nb)
        if sink not in parent:
            side = set(parent)
            return value, side
        push = np.inf
        v = sink
        while parent[v] is not None:
            u = parent[v]
            push = min(push, residual[(u, v)])
            v = u
        v = sink
        while parent[v] is not None:
            u = parent[v]
            residual[(u, v)] -= push
            residual[(v, u)] = residual.get((v, u), 0.0) + push
            v = u
        value += push


def gusfield_cut_sets(vertices, edges) -> list:
    """Cut tree by n-1 max-flow calls from a fixed root; returns the
    (value, side) pairs of all tree cuts.  ``edges`` are undirected triples."""
    verts = sorted(vertices)
    if len(verts) < 2:
        return []
    capacity = {}
    for i, j, wt in edges:
        capacity[(i, j)] = capacity.get((i, j), 0.0) + wt
        capacity[(j, i)] = capacity.get((j, i), 0.0) + wt
    root = verts[0]
    parent = {v: root for v in verts}
    parent[root] = None
    cuts = []
    for v in verts[1:]:
        value, side = max_flow(verts, capacity, v, parent[v])
        cuts.append((value, frozenset(side)))
        for w in verts:
            if w != v and w in side and parent[w] == parent[v]:
                parent[w] = v
        pv = parent[v]
        if parent[pv] is not None and parent[pv] in side:
            parent[v] = parent[pv]
            parent[pv] = v
    return cuts


# ------------------------------------------------------------------ rows

def sec_x_row(space: VariableSpace, members, target: int) -> LinearRow:
    s_set = set(members)
    terms = []
    for a in s_set:
        for b in range(space.n):
            if b not in s_set and b != a:
                terms.append((space.x_index(a, b), 1.0))
    for j in sorted(s_set):
        terms.append((space.y_index(target, j), -2.0))
    return LinearRow.from_terms(terms, SENSE_GE, 0.0, "sec-x")


def sec_w_row(space: VariableSpace, members, target: int, outgoing: bool) -> LinearRow:
    s_set = set(members)
    terms = []
    for a in s_set:
        for b in range(space.n):
            if b not in s_set:
                terms.append((space.w_index(a, b) if outgoing else space.w_index(b, a), 1.0))
    for j in sorted(s_set):
        terms.append((space.y_index(target, j), 1.0))
    return LinearRow.from_terms(terms, SENSE_GE, 1.0, "sec-w-out" if outgoing else "sec-w-in")


def two_matching_row(space: VariableSpace, handle, teeth) -> LinearRow:
    h_set = set(handle)
    terms = []
    for a in sorted(h_set):
        for b in sorted(h_set):
            if a < b:
                terms.append((space.x_index(a, b), 1.0))
    for i, j in teeth:
        terms.append((space.x_index(i, j), 1.0))
    for i in sorted(h_set):
        terms.append((space.y_index(i, i), -1.0))
    return LinearRow.from_terms(terms, SENSE_LE, (len(teeth) - 1) / 2.0, "two-matching")


# ------------------------------------------------------------------ SEC (ground)

def _x_cut_value(space, x, s_set) -> float:
    total = 0.0
    for a in s_set:
        for b in range(space.n):
            if b not in s_set and a < b:
                total += x[space.x_index(a, b)]
            elif b not in s_set and b < a:
                total += x[space.x_index(b, a)]
    return total / 1.0


def _sec_x_cuts_for_set(space, depot, x, y, members, tol) -> list:
    s_set = set(members)
    if depot in s_set or not s_set:
        return []
    lhs = _x_cut_value(space, x, s_set)
    cands = []
    for i in sorted(s_set):
        rhs = 2.0 * sum(y[i, j] for j in s_set)
        viol = rhs - lhs
        if viol > tol:
            cands.append((viol, i))
    cands.sort(key=lambda t: (-t[0], t[1]))
    out = []
    for viol, i in cands[:MAX_ROWS_PER_SET]:
        out.append(Cut(kind="sec-x", row=sec_x_row(space, s_set, i), violation=viol,
                       members=tuple(sorted(s_set)), target=i))
    return out


def separate_sec_x(space: VariableSpace, depot: int, x: np.ndarray, y: np.ndarray,
                   tol: float = SEP_TOL, extra_sets=()) -> list:
    """Violated ground sub-tour elimination rows at the point (x, y).

    Disconnected support: each component avoiding the depot is a candidate
    set.  Connected support: candidate sets are the Gusfield cut-tree sides.
    ``extra_sets`` lets the integral check test additional candidate sets.
    """
    graph = build_support_undirected(space, depot, x, y)
    cuts = []
    comps = _components(graph.vertices, graph.adjacency())
    candidate_sets = []
    if len(comps) > 1:
        for comp in comps:
            if depot not in comp:
                candidate_sets.append(frozenset(comp))
    else:
        for _, side in gusfield_cut_sets(graph.vertices, graph.edges):
            if depot in side:
                side = frozenset(graph.vertices) - side
            if side:
                candidate_sets.append(frozenset(side))
    for extra in extra_sets:
        candidate_sets.append(frozenset(extra))
    seen = set()
    for s_set in candidate_sets:
        if s_set in seen:
            continue
        seen.add(s_set)
        cuts.extend(_sec_x_cuts_for_set(space, depot, x, y, s_set, tol))
    return cuts


# ------------------------------------------------------------------ SEC (UAV)

def _w_cut_value(space, w, s_set, outgoing: bool) -> float:
    total = 0.0
    for a in s_set:
        for b in range(space.n):
            if b not in s_set:
                total += w[a, b] if outgoing else w[b, a]
    return total


def _sec_w_cuts_for_set(space, w, y, members, tol) -> list:
    s_set = set(members)
    if not s_set:
        return []
    lhs_out = _w_cut_value(space, w, s_set, outgoing=True)
    lhs_in = _w_cut_value(space, w, s_set, outgoing=False)
    out_c, in_c = [], []
    for i in sorted(s_set):
        rhs = 1.0 - sum(y[i, j] for j in s_set)
        v_out = rhs - lhs_out
        v_in = rhs - lhs_in
        if v_out > tol:
            out_c.append((v_out, i))
        if v_in > tol:
            in_c.append((v_in, i))
    cuts = []
    for cands, outgoing in ((out_c, True), (in_c, False)):
        cands.sort(key=lambda t: (-t[0], t[1]))
        for viol, i in cands[:MAX_ROWS_PER_SET]:
            cuts.append(Cut(kind="sec-w-out" if outgoing else "sec-w-in",
                            row=sec_w_row(space, s_set, i, outgoing), violation=viol,
                            members=tuple(sorted(s_set)), target=i))
    return cuts


def separate_sec_w(space: VariableSpace, w: np.ndarray, y: np.ndarray,
                   tol: float = SEP_TOL) -> list:
    """Violated UAV connectivity rows (both cut directions) at (w, y).

    The directed support holds every arc above threshold; candidate sets are
    the weak components plus Gusfield sides of the undirected projection.
    """
    n = space.n
    arcs = [(i, j, float(w[i, j])) for i in range(n) for j in range(n)
            if i != j and w[i, j] > SUPPORT_EPS]
    verts = sorted({i for i, _, _ in arcs} | {j for _, j, _ in arcs})
    if not verts:
        return []
    proj = {}
    for i, j, wt in arcs:
        key = (min(i, j), max(i, j))
        proj[key] = proj.get(key, 0.0) + wt
    und_edges = [(a, b, wt) for (a, b), wt in sorted(proj.items())]
    adj = {v: [] for v in verts}
    for a, b, wt in und_edges:
        adj[a].append((b, wt))
        adj[b].append((a, wt))
    comps = _components(verts, adj)
    candidate_sets = [frozenset(c) for c in comps]
    for comp in comps:
        if len(comp) >= 2:
            comp_edges = [(a, b, wt) for a, b, wt in und_edges if a in set(comp)]
            for _, side in gusfield_cut_sets(comp, comp_edges):
                candidate_sets.append(frozenset(side))
                candidate_sets.append(frozenset(comp) - side)
    cuts = []
    seen = set()
    for s_set in candidate_sets:
        if not s_set or s_set in seen:
            continue
        seen.add(s_set)
        cuts.extend(_sec_w_cuts_for_set(space, w, y, s_set, tol))
    return cuts


# ------------------------------------------------------------------ 2-matching

def separate_two_matching(space: VariableSpace, x: np.ndarray, y: np.ndarray,
                          tol: float = SEP_TOL) -> list:
    """Heuristic 2-matching separation: handles are the components of the
    strictly-fractional edge graph, teeth the unit edges leaving a handle."""
    n = space.n
    frac_edges = []
    for i, j in space.edges():
        v = float(x[space.x_index(i, j)])
        if SUPPORT_EPS < v < 1.0 - SUPPORT_EPS:
            frac_edges.append((i, j, v))
    if not frac_edges:
        return []
    verts = sorted({i for i, _, _ in frac_edges} | {j for _, j, _ in frac_edges})
    adj = {v: [] for v in verts}
    for a, b, wt in frac_edges:
        adj[a].append((b, wt))
        adj[b].append((a, wt))
    cuts = []
    for handle in _components(verts, adj):
        h_set = set(handle)
        teeth_cand = []
        for a in sorted(h_set):
            for b in range(n):
                if b not in h_set and b != a:
                    if x[space.x_index(a, b)] >= 1.0 - SUPPORT_EPS:
                        e = (min(a, b), max(a, b))
                        teeth_cand.append((space.x_index(*e), e))
        teeth_cand.sort()
        used = set()
        teeth = []
        for _, (a, b) in teeth_cand:
            if a in used or b in used:
                continue
            used.add(a)
            used.add(b)
            teeth.append((a, b))
        if len(teeth) < 3 or len(teeth) % 2 == 0:
            continue
        row = two_matching_row(space, handle, teeth)
        lhs = sum(x[space.x_index(a, b)] for a in h_set for b in h_set if a < b)
        lhs += sum(x[space.x_index(a, b)] for a, b in teeth)
        rhs = sum(y[i, i] for i in h_set) + (len(teeth) - 1) / 2.0
        viol = lhs - rhs
        if viol > tol:
            cuts.append(Cut(kind="two-matching", row=row, violation=viol,
                            members=tuple(handle), teeth=tuple(teeth)))
    return cuts


# ------------------------------------------------------------------ integral

def _uav_cycles(space: VariableSpace, w: np.ndarray) -> list:
    """Nontrivial cycles of the integral w permutation."""
    n = space.n
    succ = {}
    for i in range(n):
        js = [j for j in range(n) if w[i, j] > 0.5]
        if len(js) != 1:
            return []          # not a permutation: static rows violated upstream
        succ[i] = js[0]
    seen = set()
    cycles = []
    for s in range(n):
        if s in seen:
            continue
        cyc = [s]
        seen.add(s)
        cur = succ[s]
        while cur != s and cur not in seen:
            cyc.append(cur)
            seen.add(cur)
            cur = succ[cur]
        if len(cyc) > 1:
            cycles.append(cyc)
    return cycles


def check_integral(space: VariableSpace, depot: int, x: np.ndarray,
                   w: np.ndarray, y: np.ndarray, tol: float = SEP_TOL) -> list:
    """Lazy cuts at an integral point; empty result certifies feasibility.

    Runs both SEC separators, and additionally tests each UAV cycle's vertex
    set (and that set minus its stops) against the ground sub-tour family;
    those extra candidates are what make the integral check exact.
    """
    cuts = list(separate_sec_x(space, depot, x, y, tol=tol))
    cuts.extend(separate_sec_w(space, w, y, tol=tol))
    stops = {i for i in range(space.n) if y[i, i] > 0.5}
    extra_sets = []
    for cyc in _uav_cycles(space, w):
        cyc_set = frozenset(cyc)
        extra_sets.append(cyc_set)
        hollow = cyc_set - stops
        if hollow and hollow != cyc_set:
            extra_sets.append(hollow)
    for s_set in extra_sets:
        cuts.extend(_sec_x_cuts_for_set(space, depot, x, y, s_set, tol))
    unique = {}
    for cut in cuts:
        unique.setdefault(cut.row.canonical_key(), cut)
    return list(unique.values())
