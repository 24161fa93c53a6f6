from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmkit.canon import load_model
from fmkit.model import (
    INTRA_EDGES,
    ResolutionError,
    Stage,
    UnknownLabelError,
    resolve_endpoint,
    shortest_chain,
    subdiagram,
)

ALL_STAGES = list(Stage)


def test_resolve_cash_receive(tvm):
    ep = resolve_endpoint(tvm, "tvm/cash.receive")
    assert ep.path == ("tvm", "cash")
    assert ep.stage is Stage.RECEIVE


def test_resolve_bad_stage_name(tvm):
    with pytest.raises(ResolutionError) as exc:
        resolve_endpoint(tvm, "tvm/cash.banana")
    assert exc.value.code == "stage-not-declared"
    assert exc.value.segment == "banana"


def test_resolve_implicit_transfer_on_tank(plant):
    # tankA only declares process; canonicalization inserted its transfer.
    ep = resolve_endpoint(plant, "plant/tankA.transfer")
    assert ep.path == ("plant", "tankA")
    assert ep.stage is Stage.TRANSFER


def test_resolve_unknown_sphere(tvm):
    with pytest.raises(ResolutionError) as exc:
        resolve_endpoint(tvm, "kiosk/cash.receive")
    assert exc.value.code == "unknown-sphere"
    assert exc.value.segment == "kiosk"


def test_resolve_unknown_machine(tvm):
    with pytest.raises(ResolutionError) as exc:
        resolve_endpoint(tvm, "tvm/coin_hopper.receive")
    assert exc.value.code == "unknown-machine"
    assert exc.value.segment == "coin_hopper"


def test_subdiagram_cash_in_region(tvm):
    # The single authored cash arc expands to three canonical steps.
    region = subdiagram(tvm, ["23"])
    assert region.flow_labels == {"23", "23.1", "23.2"}
    arcs = [tvm.flow(label) for label in sorted(region.flow_labels)]
    steps = [(a.src.stage, a.dst.stage) for a in arcs]
    assert steps == [
        (Stage.RELEASE, Stage.TRANSFER),
        (Stage.TRANSFER, Stage.TRANSFER),
        (Stage.TRANSFER, Stage.RECEIVE),
    ]


def test_subdiagram_empty(tvm):
    region = subdiagram(tvm, [])
    assert region.is_empty
    assert not region.stages


def test_subdiagram_unknown_label(tvm):
    with pytest.raises(UnknownLabelError) as exc:
        subdiagram(tvm, ["nonexistent"])
    assert exc.value.missing == ("nonexistent",)


def test_corpus_flows_all_legal(tvm, plant, turbine):
    for model in (tvm, plant, turbine):
        for arc in model.flows:
            pair = (arc.src.stage, arc.dst.stage)
            if arc.src.path == arc.dst.path:
                assert pair in INTRA_EDGES, arc.label
            else:
                assert pair == (Stage.TRANSFER, Stage.TRANSFER), arc.label


def test_corpus_flows_preserve_kind(tvm, plant, turbine):
    for model in (tvm, plant, turbine):
        for arc in model.flows:
            src_kind = model.find_machine(arc.src.path).kind
            dst_kind = model.find_machine(arc.dst.path).kind
            assert src_kind == dst_kind, arc.label


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_subdiagram_union_property(data):
    model, _ = load_model(open("corpus/tvm.fm").read(), "tvm.fm")
    families = sorted({a.family for a in model.flows} | {t.label for t in model.triggers})
    picked = data.draw(st.sets(st.sampled_from(families), max_size=8))
    half = data.draw(st.integers(0, len(picked)))
    ordered = sorted(picked)
    left, right = ordered[:half], ordered[half:]
    union = subdiagram(model, ordered)
    parts = subdiagram(model, left).arc_labels | subdiagram(model, right).arc_labels
    assert union.arc_labels == parts


def _all_shortest(src: Stage, dst: Stage, same: bool) -> list[tuple]:
    """Independent exhaustive path enumeration over the legality edges."""
    nodes = [(0, s) for s in ALL_STAGES] + ([] if same else [(1, s) for s in ALL_STAGES])

    def successors(node):
        side, stage = node
        out = [(side, b) for (a, b) in INTRA_EDGES if a is stage]
        if not same and side == 0 and stage is Stage.TRANSFER:
            out.append((1, Stage.TRANSFER))
        return out

    goal = (0 if same else 1, dst)
    results = []
    frontier = [[(0, src)]]
    while frontier and not results:
        nxt = []
        for path in frontier:
            for succ in successors(path[-1]):
                if succ == goal:
                    results.append(tuple(path + [succ]))
                elif succ not in path and len(path) < len(nodes):
                    nxt.append(path + [succ])
        frontier = nxt
    return results


def test_shortest_chain_unique_for_every_stage_pair():
    # Expansion must never face a tie, or canonicalization would be ambiguous.
    for src, dst, same in itertools.product(ALL_STAGES, ALL_STAGES, (True, False)):
        expected = _all_shortest(src, dst, same)
        got = shortest_chain(src, dst, same)
        assert len(expected) <= 1
        if expected:
            assert got is not None and len(got) == len(expected[0])
        else:
            assert got is None


def test_shortest_chain_known_lengths():
    five = shortest_chain(Stage.PROCESS, Stage.PROCESS, same_machine=False)
    assert five is not None and len(five) - 1 == 5
    direct = shortest_chain(Stage.RELEASE, Stage.TRANSFER, same_machine=True)
    assert direct is not None and len(direct) - 1 == 1
    assert shortest_chain(Stage.PROCESS, Stage.CREATE, same_machine=True) is None
    assert shortest_chain(Stage.TRANSFER, Stage.CREATE, same_machine=False) is None
