import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cagvrp.instance import euclidean_instance, generate_random
from cagvrp.model import (
    DecodeError,
    LinearRow,
    Solution,
    VariableSpace,
    build_model,
    decode,
    encode,
    load_solution,
    objective_of,
    save_solution,
    validate,
)

TRIANGLE = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]


def triangle_instance(alpha=0.3, radius=200.0):
    return euclidean_instance(TRIANGLE, alpha=alpha, radius=radius)


def all_stops_solution(instance, tour):
    gv = sum(instance.gv_cost[tour[k], tour[(k + 1) % len(tour)]] for k in range(len(tour)))
    return Solution(gv_tour=list(tour), subtours={}, assignment=list(range(instance.n)),
                    gv_cost_total=float(gv), uav_cost_total=0.0, objective=float(gv))


# ---------------------------------------------------------------- variables

@given(st.integers(min_value=3, max_value=9))
def test_variable_space_counts(n):
    space = VariableSpace(n)
    assert space.num_vars == n * (n - 1) // 2 + 2 * n * n + n ** 3


@given(st.integers(min_value=3, max_value=8), st.data())
def test_variable_index_bijection(n, data):
    space = VariableSpace(n)
    idx = data.draw(st.integers(min_value=0, max_value=space.num_vars - 1))
    desc = space.describe(idx)
    kind = desc[0]
    if kind == "x":
        assert space.x_index(desc[1], desc[2]) == idx
    elif kind == "w":
        assert space.w_index(desc[1], desc[2]) == idx
    elif kind == "y":
        assert space.y_index(desc[1], desc[2]) == idx
    else:
        assert space.z_index(desc[1], desc[2], desc[3]) == idx


def test_variable_blocks_are_disjoint_and_contiguous():
    space = VariableSpace(4)
    seen = set()
    for i in range(4):
        for j in range(4):
            if i < j:
                seen.add(space.x_index(i, j))
            seen.add(space.w_index(i, j))
            seen.add(space.y_index(i, j))
            for k in range(4):
                seen.add(space.z_index(i, j, k))
    assert seen == set(range(space.num_vars))


# ---------------------------------------------------------------- rows

def test_linear_row_merges_and_sorts_terms():
    row = LinearRow.from_terms([(5, 1.0), (2, 2.0), (5, -1.0), (7, 3.0)], "<=", 1.0, "t")
    assert row.indices == (2, 7)
    assert row.coeffs == (2.0, 3.0)


def test_linear_row_rejects_stored_zero():
    with pytest.raises(ValueError):
        LinearRow(indices=(1, 2), coeffs=(1.0, 0.0), sense="<=", rhs=0.0, tag="t")


def test_build_model_counts_for_n3():
    inst = triangle_instance()
    model = build_model(inst)
    assert model.num_vars == 48            # 3 x + 9 w + 9 y + 27 z
    by_tag = {}
    for row in model.rows:
        by_tag[row.tag] = by_tag.get(row.tag, 0) + 1
    assert by_tag["degree-x"] == 3
    assert by_tag["out-degree-w"] + by_tag["in-degree-w"] == 6
    assert by_tag["link-wz"] == 9
    assert by_tag["z-le-yik"] + by_tag["z-le-yjk"] + by_tag["z-ge"] == 81
    assert len(model.rows) == 99


def test_build_model_fixes_comm_infeasible_assignment():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10)], alpha=0.1, radius=10.0)
    model = build_model(inst)
    assert not inst.comm_ok[1, 2]
    assert model.ub[model.space.y_index(1, 2)] == 0.0
    assert model.ub[model.space.y_index(0, 1)] == 1.0


def test_build_model_depot_self_assignment_fixed():
    inst = triangle_instance()
    model = build_model(inst)
    d = model.space.y_index(inst.depot, inst.depot)
    assert model.lb[d] == 1.0 and model.ub[d] == 1.0


def test_trivial_self_loops_are_free():
    inst = generate_random(5, seed=3, alpha=0.2)
    model = build_model(inst)
    for i in range(5):
        assert model.objective[model.space.w_index(i, i)] == 0.0


def test_penalty_mode_charges_infeasible_assignments():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10)], alpha=0.1, radius=10.0)
    model = build_model(inst, penalty_mode=True)
    yi = model.space.y_index(1, 2)
    assert model.objective[yi] == 10.0 * inst.gv_cost.sum()
    assert model.ub[yi] == 1.0        # no hard fixing in penalty mode


# ---------------------------------------------------------------- encode/decode

def test_decode_all_stops_triangle():
    inst = triangle_instance()
    space = VariableSpace(3)
    x = np.ones(3)
    w = np.zeros(9)
    y = np.zeros(9)
    for i in range(3):
        w[space.w_index(i, i) - space.w_offset] = 1.0
        y[space.y_index(i, i) - space.y_offset] = 1.0
    sol = decode(inst, x, w, y)
    assert sol.gv_tour == [0, 1, 2]
    assert sol.subtours == {}
    assert sol.uav_cost_total == 0.0
    assert sol.objective == pytest.approx(20 + math.sqrt(200), abs=1e-9)


def test_decode_subtour_at_stop():
    # stops {0,1,2}, target 3 assigned to stop 1 via cycle 1 -> 3 -> 1
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2)], alpha=0.5, radius=50.0)
    space = VariableSpace(4)
    x = np.zeros(space.num_edges)
    for i, j in [(0, 1), (1, 2), (0, 2)]:
        x[space.x_index(i, j)] = 1.0
    w = np.zeros(16)
    y = np.zeros(16)
    for i in range(3):
        y[space.y_index(i, i) - space.y_offset] = 1.0
    y[space.y_index(3, 1) - space.y_offset] = 1.0
    w[space.w_index(0, 0) - space.w_offset] = 1.0
    w[space.w_index(2, 2) - space.w_offset] = 1.0
    w[space.w_index(1, 3) - space.w_offset] = 1.0
    w[space.w_index(3, 1) - space.w_offset] = 1.0
    sol = decode(inst, x, w, y)
    assert sol.subtours == {1: [1, 3]}
    assert sol.assignment[3] == 1
    assert sol.uav_cost_total == pytest.approx(inst.uav_cost[1, 3] + inst.uav_cost[3, 1], abs=1e-12)


def test_decode_rejects_disjoint_ground_cycles():
    # two disjoint 3-cycles: classic infeasible shape
    pts = [(0, 0), (10, 0), (0, 10), (50, 50), (60, 50), (50, 60)]
    inst = euclidean_instance(pts, alpha=0.1, radius=200.0)
    space = VariableSpace(6)
    x = np.zeros(space.num_edges)
    for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        x[space.x_index(i, j)] = 1.0
    w = np.zeros(36)
    y = np.zeros(36)
    for i in range(6):
        w[space.w_index(i, i) - space.w_offset] = 1.0
        y[space.y_index(i, i) - space.y_offset] = 1.0
    with pytest.raises(DecodeError, match="disconnected"):
        decode(inst, x, w, y)


def test_decode_rejects_stopless_uav_cycle():
    pts = [(0, 0), (10, 0), (0, 10), (20, 10), (20, 0)]
    inst = euclidean_instance(pts, alpha=0.1, radius=200.0)
    space = VariableSpace(5)
    x = np.zeros(space.num_edges)
    for i, j in [(0, 1), (1, 2), (0, 2)]:
        x[space.x_index(i, j)] = 1.0
    w = np.zeros(25)
    y = np.zeros(25)
    for i in range(3):
        w[space.w_index(i, i) - space.w_offset] = 1.0
        y[space.y_index(i, i) - space.y_offset] = 1.0
    # cycle 3 -> 4 -> 3 passes through no stop
    w[space.w_index(3, 4) - space.w_offset] = 1.0
    w[space.w_index(4, 3) - space.w_offset] = 1.0
    y[space.y_index(3, 1) - space.y_offset] = 1.0
    y[space.y_index(4, 1) - space.y_offset] = 1.0
    with pytest.raises(DecodeError, match="no stop"):
        decode(inst, x, w, y)


def test_decode_rejects_fractional_input():
    inst = triangle_instance()
    x = np.array([1.0, 0.5, 1.0])
    with pytest.raises(ValueError, match="not integral"):
        decode(inst, x, np.eye(3).ravel(), np.eye(3).ravel())


def test_encode_decode_round_trip():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2), (2, 12)], alpha=0.2, radius=50.0)
    sol = Solution(
        gv_tour=[0, 1, 2],
        subtours={1: [1, 3], 2: [2, 4]},
        assignment=[0, 1, 2, 1, 2],
        gv_cost_total=0.0, uav_cost_total=0.0, objective=0.0)
    sol.gv_cost_total = objective_of(inst, Solution(gv_tour=[0, 1, 2], subtours={}, assignment=[0, 1, 2, 1, 2],
                                                    gv_cost_total=0, uav_cost_total=0, objective=0))
    vec = encode(inst, sol)
    space = VariableSpace(5)
    out = decode(inst,
                 vec[:space.num_edges],
                 vec[space.w_offset:space.y_offset],
                 vec[space.y_offset:space.z_offset])
    assert out.gv_tour == sol.gv_tour
    assert out.subtours == sol.subtours
    assert out.assignment == sol.assignment


def test_encoding_satisfies_static_rows():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2)], alpha=0.5, radius=50.0)
    model = build_model(inst)
    sol = decode_roundtrip_solution(inst)
    vec = encode(inst, sol)
    for row in model.rows:
        assert row.satisfied_by(vec, tol=1e-9), row.tag
    assert (vec >= model.lb - 1e-9).all() and (vec <= model.ub + 1e-9).all()


def decode_roundtrip_solution(inst):
    sol = Solution(gv_tour=[0, 1, 2], subtours={1: [1, 3]}, assignment=[0, 1, 2, 1],
                   gv_cost_total=0.0, uav_cost_total=0.0, objective=0.0)
    sol.gv_cost_total = sum(inst.gv_cost[i, j] for i, j in [(0, 1), (1, 2), (2, 0)])
    sol.uav_cost_total = inst.uav_cost[1, 3] + inst.uav_cost[3, 1]
    sol.objective = sol.gv_cost_total + sol.uav_cost_total
    return sol


# ---------------------------------------------------------------- validate

def test_validate_accepts_nested_tour():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2)], alpha=0.5, radius=50.0)
    sol = decode_roundtrip_solution(inst)
    assert validate(inst, sol) == []


def test_validate_flags_comm_radius():
    pts = [(0, 0), (10, 0), (0, 10), (10 + 31, 0)]   # target 3 at distance 31 from stop 1
    inst = euclidean_instance(pts, alpha=0.1, radius=30.0)
    sol = Solution(gv_tour=[0, 1, 2], subtours={1: [1, 3]}, assignment=[0, 1, 2, 1],
                   gv_cost_total=0.0, uav_cost_total=0.0, objective=0.0)
    sol.gv_cost_total = sum(inst.gv_cost[i, j] for i, j in [(0, 1), (1, 2), (2, 0)])
    sol.uav_cost_total = inst.uav_cost[1, 3] + inst.uav_cost[3, 1]
    sol.objective = sol.gv_cost_total + sol.uav_cost_total
    kinds = {v.kind for v in validate(inst, sol)}
    assert "comm-radius" in kinds
    assert any("3" in v.detail and "1" in v.detail for v in validate(inst, sol) if v.kind == "comm-radius")


def test_validate_flags_detached_subtour():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2), (14, 2)], alpha=0.1, radius=100.0)
    sol = Solution(gv_tour=[0, 1, 2], subtours={1: [3, 4]}, assignment=[0, 1, 2, 1, 1],
                   gv_cost_total=0.0, uav_cost_total=0.0, objective=0.0)
    kinds = {v.kind for v in validate(inst, sol)}
    assert "detached-sub-tour" in kinds


def test_validate_flags_coverage():
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2)], alpha=0.1, radius=100.0)
    sol = all_stops_solution(inst, [0, 1, 2])   # target 3 never covered
    sol.assignment = [0, 1, 2, 1]
    kinds = {v.kind for v in validate(inst, sol)}
    assert "coverage" in kinds


# ---------------------------------------------------------------- objective

def test_objective_triangle_perimeter():
    inst = triangle_instance()
    sol = all_stops_solution(inst, [0, 1, 2])
    assert objective_of(inst, sol) == pytest.approx(10 + 10 + math.sqrt(200), abs=1e-9)


def test_objective_adds_out_and_back_arc_pair():
    pts = TRIANGLE + [(5.0, 5.0)]
    inst = euclidean_instance(pts, alpha=0.1, radius=200.0)
    base = all_stops_solution(inst, [0, 1, 2])
    with_flight = Solution(
        gv_tour=[0, 1, 2], subtours={0: [0, 3]}, assignment=[0, 1, 2, 0],
        gv_cost_total=base.gv_cost_total,
        uav_cost_total=float(inst.uav_cost[0, 3] + inst.uav_cost[3, 0]),
        objective=0.0)
    with_flight.objective = with_flight.gv_cost_total + with_flight.uav_cost_total
    delta = objective_of(inst, with_flight) - objective_of(inst, base)
    assert delta == pytest.approx(0.1 * 2 * math.sqrt(50), abs=1e-9)


def test_objective_equals_pure_tsp_without_subtours():
    inst = generate_random(5, seed=9, alpha=0.2, radius=200.0)
    tour = [0, 2, 4, 1, 3]
    sol = all_stops_solution(inst, tour)
    expect = sum(inst.gv_cost[tour[k], tour[(k + 1) % 5]] for k in range(5))
    assert objective_of(inst, sol) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------- files

def test_solution_file_round_trip(tmp_path):
    inst = euclidean_instance([(0, 0), (10, 0), (0, 10), (12, 2)], alpha=0.5, radius=50.0)
    sol = decode_roundtrip_solution(inst)
    sol.stats = {"nodes": 1, "sec_cuts": 0}
    p = tmp_path / "sol.json"
    save_solution(sol, p, wall_time_s=0.25)
    again = load_solution(p)
    assert again.gv_tour == sol.gv_tour
    assert again.subtours == sol.subtours
    assert again.assignment == sol.assignment
    assert again.objective == sol.objective
    assert again.stats == sol.stats
