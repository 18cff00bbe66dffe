"""Activity graph validation and lifecycle state machine tests."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itemledger import workflow as wf
from itemledger.errors import IllegalTransition, InvalidGraph, NotEnabled, SchemaViolation, UnknownActivity

from conftest import activity, diamond_workflow, linear_workflow, workflow_payload


def defn(payload: dict) -> wf.WorkflowDef:
    return wf.WorkflowDef.from_payload(payload)


def fresh(payload: dict) -> tuple[wf.WorkflowDef, wf.WorkflowInstance]:
    d = defn(payload)
    return d, wf.instantiate_workflow(d, ("def", 1))


# -- validate_graph -----------------------------------------------------------


def test_single_activity_is_valid():
    assert wf.validate_graph(defn(linear_workflow("A"))) == []


def test_isolated_node_is_unreachable():
    payload = workflow_payload([activity("A"), activity("B"), activity("C")], [["A", "B"]], "A")
    violations = wf.validate_graph(defn(payload))
    assert any(v.code == "unreachable" and v.subject == "C" for v in violations)


def brute_force_valid(n: int, edges: list[tuple[int, int]], start: int = 0) -> bool:
    """Closure-matrix oracle: start has no incoming edge, the graph is acyclic,
    and every node is reachable from start and reaches some terminal."""
    reach = [[i == j for j in range(n)] for i in range(n)]
    for a, b in edges:
        reach[a][b] = True
    for k in range(n):
        for i in range(n):
            for j in range(n):
                reach[i][j] = reach[i][j] or (reach[i][k] and reach[k][j])
    for i, j in edges:
        if reach[j][i]:  # path back: cycle
            return False
    if any(b == start for _, b in edges):
        return False
    if not all(reach[start][j] for j in range(n)):
        return False
    terminals = [i for i in range(n) if not any(a == i for a, _ in edges)]
    if not terminals:
        return False
    return all(any(reach[i][t] for t in terminals) for i in range(n))


def test_diamond_is_valid_against_oracle():
    payload = diamond_workflow()
    idx = {name: i for i, name in enumerate("ABCD")}
    edges = [(idx[a], idx[b]) for a, b in defn(payload).edges]
    assert brute_force_valid(4, edges)
    assert wf.validate_graph(defn(payload)) == []


def test_cycle_detected():
    payload = workflow_payload([activity("A"), activity("B")], [["A", "B"], ["B", "A"]], "A")
    violations = wf.validate_graph(defn(payload))
    assert any(v.code in ("cycle", "start-incoming") for v in violations)


def test_duplicate_and_empty_names():
    payload = workflow_payload([activity("A"), activity("A")], [], "A")
    assert any(v.code == "duplicate-name" for v in wf.validate_graph(defn(payload)))
    payload = workflow_payload([activity("")], [], "")
    assert any(v.code == "empty-name" for v in wf.validate_graph(defn(payload)))


def test_unknown_start_and_edge():
    payload = workflow_payload([activity("A")], [["A", "Z"]], "Q")
    codes = {v.code for v in wf.validate_graph(defn(payload))}
    assert "unknown-start" in codes and "unknown-edge" in codes


def test_composite_subworkflow_validated():
    sub = workflow_payload([activity("X"), activity("Y")], [], "X")  # Y unreachable
    payload = workflow_payload([activity("C", kind="composite", sub_workflow=sub)], [], "C")
    violations = wf.validate_graph(defn(payload))
    assert any(v.code == "unreachable" and v.subject == "C/Y" for v in violations)


def test_random_graphs_agree_with_oracle():
    rng = random.Random(5)
    for _ in range(300):
        n = rng.randint(1, 5)
        edges = []
        for i in range(n):
            for j in range(n):
                if i != j and rng.random() < 0.3:
                    edges.append((i, j))
        names = [f"n{i}" for i in range(n)]
        payload = workflow_payload([activity(x) for x in names], [[names[a], names[b]] for a, b in edges], names[0])
        got_valid = wf.validate_graph(defn(payload)) == []
        assert got_valid == brute_force_valid(n, edges), (n, edges)


# -- instantiate / enabled ----------------------------------------------------


def test_instantiate_chain_all_waiting():
    d, inst = fresh(linear_workflow("A", "B", "C"))
    assert set(inst.states.values()) == {wf.WAITING}
    assert not inst.complete
    assert wf.enabled_activities(d, inst) == ["A"]


def test_instantiate_diamond_only_start_enabled():
    d, inst = fresh(diamond_workflow())
    assert wf.enabled_activities(d, inst) == ["A"]


def test_instantiate_invalid_graph_raises():
    payload = workflow_payload([activity("A"), activity("B")], [], "A")
    with pytest.raises(InvalidGraph):
        wf.instantiate_workflow(defn(payload), ("def", 1))


def test_diamond_enabled_after_a_completed():
    d, inst = fresh(diamond_workflow())
    wf.apply_transition(d, inst, "A", "Start")
    wf.apply_transition(d, inst, "A", "Complete")
    assert wf.enabled_activities(d, inst) == ["B", "C"]


def test_diamond_join_waits_for_all_branches():
    d, inst = fresh(diamond_workflow())
    for path in ("A", "B"):
        wf.apply_transition(d, inst, path, "Start")
        wf.apply_transition(d, inst, path, "Complete")
    wf.apply_transition(d, inst, "C", "Start")
    assert wf.enabled_activities(d, inst) == []  # D waits for C


def test_all_completed_nothing_enabled():
    d, inst = fresh(linear_workflow("A", "B"))
    for path in ("A", "B"):
        wf.apply_transition(d, inst, path, "Start")
        wf.apply_transition(d, inst, path, "Complete")
    assert inst.complete
    assert wf.enabled_activities(d, inst) == []


# -- transitions --------------------------------------------------------------


def test_start_enabled_activity():
    d, inst = fresh(linear_workflow("A", "B"))
    result = wf.apply_transition(d, inst, "A", "Start")
    assert inst.states["A"] == wf.ACTIVE
    assert result.what == "A/Start"


def test_complete_on_waiting_is_illegal():
    d, inst = fresh(linear_workflow("A", "B"))
    with pytest.raises(IllegalTransition):
        wf.apply_transition(d, inst, "A", "Complete")


def test_start_not_enabled():
    d, inst = fresh(linear_workflow("A", "B"))
    with pytest.raises(NotEnabled):
        wf.apply_transition(d, inst, "B", "Start")


def test_unknown_activity():
    d, inst = fresh(linear_workflow("A"))
    with pytest.raises(UnknownActivity):
        wf.apply_transition(d, inst, "Z", "Start")


def test_chain_completes_after_six_transitions():
    d, inst = fresh(linear_workflow("A", "B", "C"))
    whats = []
    count = 0
    while not inst.complete:
        path = wf.enabled_activities(d, inst)[0]
        whats.append(wf.apply_transition(d, inst, path, "Start").what)
        whats.append(wf.apply_transition(d, inst, path, "Complete").what)
        count += 2
    assert count == 6
    assert whats == ["A/Start", "A/Complete", "B/Start", "B/Complete", "C/Start", "C/Complete"]


def test_fail_retry_cycle():
    d, inst = fresh(linear_workflow("A"))
    wf.apply_transition(d, inst, "A", "Start")
    wf.apply_transition(d, inst, "A", "Fail")
    assert inst.states["A"] == wf.FAILED
    wf.apply_transition(d, inst, "A", "Retry")
    assert inst.states["A"] == wf.WAITING
    wf.apply_transition(d, inst, "A", "Start")
    wf.apply_transition(d, inst, "A", "Complete")
    assert inst.complete


def test_outcome_required_on_complete():
    payload = workflow_payload([activity("A", has_outcome=True)], [], "A")
    d = defn(payload)
    inst = wf.instantiate_workflow(d, ("def", 1))
    schemas = {"A": [{"name": "score", "kind": "decimal", "required": True}]}
    wf.apply_transition(d, inst, "A", "Start")
    with pytest.raises(SchemaViolation):
        wf.apply_transition(d, inst, "A", "Complete", outcome_fields={}, outcome_schemas=schemas)
    result = wf.apply_transition(d, inst, "A", "Complete", outcome_fields={"score": 0.9}, outcome_schemas=schemas)
    assert result.outcome_fields == {"score": 0.9}


def composite_payload() -> dict:
    sub = linear_workflow("Inner1", "Inner2")
    return workflow_payload(
        [activity("Prep"), activity("Body", kind="composite", sub_workflow=sub), activity("Wrap")],
        [["Prep", "Body"], ["Body", "Wrap"]],
        "Prep",
    )


def test_composite_requires_subworkflow_complete():
    d, inst = fresh(composite_payload())
    wf.apply_transition(d, inst, "Prep", "Start")
    wf.apply_transition(d, inst, "Prep", "Complete")
    wf.apply_transition(d, inst, "Body", "Start")
    with pytest.raises(IllegalTransition):
        wf.apply_transition(d, inst, "Body", "Complete")
    assert "Body/Inner1" in wf.enabled_activities(d, inst)
    for inner in ("Body/Inner1", "Body/Inner2"):
        wf.apply_transition(d, inst, inner, "Start")
        wf.apply_transition(d, inst, inner, "Complete")
    wf.apply_transition(d, inst, "Body", "Complete")
    wf.apply_transition(d, inst, "Wrap", "Start")
    wf.apply_transition(d, inst, "Wrap", "Complete")
    assert inst.complete


def test_subactivities_not_enabled_before_parent_starts():
    d, inst = fresh(composite_payload())
    assert wf.enabled_activities(d, inst) == ["Prep"]


# -- properties ---------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABCD"), st.sampled_from(["Start", "Complete", "Fail", "Retry"])), max_size=25))
def test_state_machine_safety(moves):
    d, inst = fresh(diamond_workflow())
    for path, transition in moves:
        try:
            wf.apply_transition(d, inst, path, transition)
        except (IllegalTransition, NotEnabled):
            pass
        assert set(inst.states.values()) <= set(wf.STATES)
        assert inst.complete == all(s == wf.COMPLETED for s in inst.states.values())


def test_determinism_same_sequence_same_whats():
    moves = [("A", "Start"), ("A", "Complete"), ("B", "Start"), ("C", "Start"), ("B", "Complete")]

    def play():
        d, inst = fresh(diamond_workflow())
        whats = [wf.apply_transition(d, inst, p, t).what for p, t in moves]
        return whats, inst.to_payload()

    assert play() == play()


def test_every_completion_order_reaches_complete_diamond():
    d = defn(diamond_workflow())

    def explore(inst: wf.WorkflowInstance, seen: set):
        key = tuple(sorted(inst.states.items()))
        if key in seen:
            return
        seen.add(key)
        enabled = wf.enabled_activities(d, inst)
        if not enabled:
            assert inst.complete
            return
        for path in enabled:
            clone = wf.WorkflowInstance.from_payload(inst.to_payload())
            wf.apply_transition(d, clone, path, "Start")
            wf.apply_transition(d, clone, path, "Complete")
            explore(clone, seen)

    explore(wf.instantiate_workflow(d, ("def", 1)), set())
