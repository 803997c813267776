"""Scenario documents: strict parsing, precise errors, faithful runs."""
from __future__ import annotations

import json

import pytest

from phoenixsen import scenario as sc

BASE = {
    "id": "two-node",
    "seed": 9,
    "duration_ms": 5_000,
    "nodes": [{"id": "phx1", "control_center": True}, {"id": "phx2"}],
    "links": [{"a": "phx1", "b": "phx2", "latency_ms": 2,
               "bandwidth_kbps": 2000}],
    "events": [{"at": 100, "kind": "NodeLeave", "node": "phx2"},
               {"at": 900, "kind": "NodeJoin", "node": "phx2"}],
}


def doc(**overrides) -> str:
    body = {**BASE, **overrides}
    for key, val in list(body.items()):
        if val is None:
            del body[key]
    return json.dumps(body)


def reject(text: str) -> sc.ParseError:
    with pytest.raises(sc.ParseError) as err:
        sc.parse_scenario(text)
    return err.value


def test_minimal_document_fills_defaults():
    s = sc.parse_scenario('{"id": "tiny", "nodes": [{"id": "solo"}]}')
    assert s.scenario_id == "tiny"
    assert s.seed == 0
    assert s.duration_ms == sc.DEFAULT_DURATION_MS
    assert s.links == () and s.events == ()
    assert s.model is None and s.description == ""
    [node] = s.nodes
    assert node.node_id == "solo"
    assert node.control_center is False and node.boot_at is None


def test_json_syntax_error_reports_line_and_column():
    err = reject('{\n  "id": "x",\n  "nodes": [}\n}')
    assert err.line == 3 and err.column == 13
    assert "line 3 column 13" in str(err)
    assert err.path is None


def test_top_level_must_be_an_object():
    assert reject("[1, 2]").path == "$"


def test_unknown_top_level_field_is_rejected_by_name():
    assert reject(doc(extra=1)).path == "$.extra"


@pytest.mark.parametrize("mutation, path", [
    ({"id": None}, "$.id"),              # removed entirely
    ({"id": ""}, "$.id"),
    ({"id": 7}, "$.id"),
    ({"seed": -1}, "$.seed"),
    ({"seed": True}, "$.seed"),          # booleans are not integers here
    ({"duration_ms": 0}, "$.duration_ms"),
    ({"description": 5}, "$.description"),
    ({"nodes": None}, "$.nodes"),        # required
    ({"nodes": {}}, "$.nodes"),
    ({"nodes": []}, "$.nodes"),
])
def test_top_level_field_errors_carry_their_path(mutation, path):
    assert reject(doc(**mutation)).path == path


@pytest.mark.parametrize("rows, path", [
    ([{"id": "a"}, {"id": "a"}], "$.nodes[1].id"),
    ([{"id": "a"}, "b"], "$.nodes[1]"),
    ([{"id": "a", "boot_at": -5}], "$.nodes[0].boot_at"),
    ([{"id": "a", "control_center": "yes"}], "$.nodes[0].control_center"),
    ([{"id": "a", "colour": "red"}], "$.nodes[0]"),
])
def test_node_row_errors(rows, path):
    body = {**BASE, "nodes": rows, "links": [], "events": []}
    assert reject(json.dumps(body)).path == path


@pytest.mark.parametrize("row, path", [
    ({"a": "phx1"}, "$.links[0].b"),
    ({"a": "phx1", "b": "ghost"}, "$.links[0].b"),
    ({"a": "ghost", "b": "phx2"}, "$.links[0].a"),
    ({"a": "phx1", "b": "phx1"}, "$.links[0]"),
    ({"a": "phx1", "b": "phx2", "kind": "laser"}, "$.links[0].kind"),
    ({"a": "phx1", "b": "phx2", "loss_rate": 1.5}, "$.links[0].loss_rate"),
    ({"a": "phx1", "b": "phx2", "bandwidth_kbps": 0},
     "$.links[0].bandwidth_kbps"),
    ({"a": "phx1", "b": "phx2", "latency_ms": -1}, "$.links[0].latency_ms"),
    ({"a": "phx1", "b": "phx2", "duplex": "full"}, "$.links[0]"),
])
def test_link_row_errors(row, path):
    assert reject(doc(links=[row], events=[])).path == path


@pytest.mark.parametrize("row, path", [
    ({"kind": "NodeLeave", "node": "phx1"}, "$.events[0].at"),
    ({"at": 100, "node": "phx1"}, "$.events[0].kind"),
    ({"at": 100, "kind": "Meteor", "node": "phx1"}, "$.events[0].kind"),
    ({"at": 9_999_999, "kind": "NodeLeave", "node": "phx1"},
     "$.events[0].at"),
    ({"at": -1, "kind": "NodeLeave", "node": "phx1"}, "$.events[0].at"),
    ({"at": 100, "kind": "ConfigApply", "node": "phx1",
      "substation": 1}, "$.events[0].utility"),
    ({"at": 100, "kind": "NodeLeave", "node": "ghost"}, "$.events[0].node"),
    ({"at": 100, "kind": "LinkDown", "a": "phx1", "b": "ghost"},
     "$.events[0].b"),
])
def test_event_row_errors(row, path):
    assert reject(doc(events=[row])).path == path


def test_message_endpoints_are_numbers_not_node_ids():
    # from/to on SendMessage are dial numbers; they must not be checked
    # against the node table.
    s = sc.parse_scenario(doc(events=[
        {"at": 100, "kind": "SendMessage", "node": "phx1",
         "from": "0101", "to": "0202"}]))
    [ev] = s.events
    assert ev.payload == {"node": "phx1", "from": "0101", "to": "0202"}
    # RoamClient from/to ARE node ids and are checked.
    err = reject(doc(events=[
        {"at": 100, "kind": "RoamClient", "from": "phx1", "to": "ghost",
         "number": "0101"}]))
    assert err.path == "$.events[0].to"


def test_embedded_model_is_validated_with_field_paths():
    err = reject(doc(model={"utilities": [
        {"name": "grid", "substations": 0}]}))
    assert err.path == "$.model.utilities[0].substations"
    err = reject(doc(model={"utilities": [
        {"name": "grid", "substations": 1, "vlan_types": ["SCADA", "Parking"]},
    ]}))
    assert err.path == "$.model.utilities[0].vlan_types"


def test_group_entries_must_be_string_arrays():
    assert reject(doc(groups={"ops": "phx1"})).path == "$.groups.ops"
    assert reject(doc(groups={"ops": ["phx1", 2]})).path == "$.groups.ops[1]"
    s = sc.parse_scenario(doc(groups={"ops": ["phx1", "phx2"]}))
    assert s.groups == {"ops": ("phx1", "phx2")}


def test_round_trip_preserves_every_field():
    text = doc(
        description="drill",
        model={"utilities": [{"name": "grid", "substations": 2,
                              "vlan_types": ["SCADA", "VoIP"]}]},
        nodes=[{"id": "phx1", "control_center": True},
               {"id": "phx2", "boot_at": 400}],
        events=[{"at": 100, "kind": "ConfigApply", "node": "phx1",
                 "utility": "grid", "substation": 1}],
        groups={"ops": ["phx1"]},
    )
    first = sc.parse_scenario(text)
    second = sc.parse_scenario(first.to_json())
    assert second == first
    assert json.loads(second.to_json()) == json.loads(first.to_json())


def test_load_scenario_reads_files_and_reports_missing_ones(tmp_path):
    p = tmp_path / "drill.json"
    p.write_text(doc())
    assert sc.load_scenario(p).scenario_id == "two-node"
    with pytest.raises(sc.ParseError, match="cannot read scenario"):
        sc.load_scenario(tmp_path / "absent.json")


def test_build_network_boots_immediately_unless_deferred():
    s = sc.parse_scenario(doc(
        nodes=[{"id": "phx1"}, {"id": "phx2", "boot_at": 2_000}],
        events=[]))
    net = sc.build_network(s)
    assert net.sim.clock.now == 0
    assert net.nodes["phx1"].up and not net.nodes["phx2"].up
    net.run_until(1_999)
    assert not net.nodes["phx2"].up
    net.run_until(2_500)
    assert net.nodes["phx2"].up


def test_run_honours_duration_and_overrides():
    s = sc.parse_scenario(doc(events=[]))
    net = sc.run(s)
    assert net.sim.clock.now == 5_000
    assert net.sim.seed == 9
    net = sc.run(s, seed=77, until=1_200)
    assert net.sim.clock.now == 1_200
    assert net.sim.seed == 77


def test_scripted_events_execute_at_their_times():
    net = sc.run(sc.parse_scenario(doc()))
    states = [(r["t"], r["up"]) for r in net.sim.log.by_kind("node_state")
              if r["node"] == "phx2"]
    assert (100, False) in states and (900, True) in states


def test_identical_documents_replay_to_identical_digests():
    text = doc(events=[{"at": 100, "kind": "LinkDown",
                        "a": "phx1", "b": "phx2"},
                       {"at": 2_000, "kind": "LinkUp",
                        "a": "phx1", "b": "phx2"}])
    runs = {sc.run(sc.parse_scenario(text)).sim.log.digest()
            for _ in range(3)}
    assert len(runs) == 1
