from __future__ import annotations

import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from dqcsched.circuits import (KINDS, SCENARIO_RANGES, CircuitKind, Gate, GeneratorOptions, circuit_gates,
                               dump_gates, gate_pair_counts, generate_circuit, interaction_graph, layers_asap,
                               parse_gates, sample_workload)

NO_SWAPS = GeneratorOptions(include_final_swaps=False)


def test_ghz_is_a_path():
    _, g = generate_circuit("GHZ", 4)
    assert dict(g.edge_weights) == {(0, 1): 1, (1, 2): 1, (2, 3): 1}


def test_qft_without_swaps_is_complete():
    _, g = generate_circuit("QFT", 4, NO_SWAPS)
    assert len(g.edge_weights) == 6
    assert set(g.edge_weights.values()) == {1}
    assert g.total_weight == 6


def test_qft_swaps_add_three_to_mirrored_pairs():
    _, g = generate_circuit("QFT", 4)
    expected = {pair: 1 for pair in [(0, 1), (0, 2), (1, 3), (2, 3)]}
    expected[(0, 3)] = 4
    expected[(1, 2)] = 4
    assert dict(g.edge_weights) == expected


def test_smallest_dj_is_one_edge():
    _, g = generate_circuit("DJ", 2)
    assert dict(g.edge_weights) == {(0, 1): 1}


def test_ghz3_edges():
    _, g = generate_circuit("GHZ", 3)
    assert dict(g.edge_weights) == {(0, 1): 1, (1, 2): 1}


def test_asap_examples():
    circ = layers_asap([Gate("H", (0,)), Gate("H", (1,)), Gate("CX", (0, 1))])
    assert [[str(g) for g in layer] for layer in circ.layers] == [["H 0", "H 1"], ["CX 0 1"]]
    assert layers_asap([]).depth == 0
    circ, _ = generate_circuit("GHZ", 4)
    assert circ.depth == 4


def test_single_qubit_only_circuit_has_no_edges():
    circ = layers_asap([Gate("H", (0,)), Gate("X", (1,))])
    assert interaction_graph(circ).edge_weights == {}


def test_layering_rejects_bad_gates():
    with pytest.raises(ValueError):
        layers_asap([Gate("CX", (0, 0))], 2)
    with pytest.raises(ValueError):
        layers_asap([Gate("CX", (0, 3))], 2)


def test_kind_parsing():
    assert CircuitKind.parse("w-state") is CircuitKind.WSTATE
    assert CircuitKind.parse("W") is CircuitKind.WSTATE
    assert CircuitKind.parse("qft") is CircuitKind.QFT
    with pytest.raises(ValueError):
        CircuitKind.parse("grover")


def test_gate_text_round_trip():
    gates = circuit_gates("QFT", 5)
    assert parse_gates(dump_gates(gates)) == gates
    with pytest.raises(ValueError):
        parse_gates("CCX 0 1 2\n")


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.integers(2, 30), st.booleans())
def test_layering_round_trip_and_validity(kind, width, swaps):
    gates = circuit_gates(kind, width, GeneratorOptions(swaps))
    circ = layers_asap(gates, width)
    assert interaction_graph(circ).edge_weights == gate_pair_counts(gates)
    assert Counter(circ.gates()) == Counter(gates)
    for layer in circ.layers:
        qubits = [q for g in layer for q in g.qubits]
        assert len(qubits) == len(set(qubits))


@given(st.integers(2, 30))
def test_total_edge_weights(width):
    assert generate_circuit("QFT", width, NO_SWAPS)[1].total_weight == math.comb(width, 2)
    assert generate_circuit("GHZ", width)[1].total_weight == width - 1
    assert generate_circuit("WSTATE", width)[1].total_weight == 2 * (width - 1)
    assert generate_circuit("DJ", width)[1].total_weight == width - 1


def test_workload_mix_and_ranges():
    mix = {k: 0.25 for k in KINDS}
    wl = sample_workload(mix, 36, SCENARIO_RANGES["sc1"], seed=4)
    counts = Counter(c.kind for c in wl)
    assert all(counts[k] == 9 for k in KINDS)
    for c in wl:
        lo, hi = SCENARIO_RANGES["sc1"][c.kind]
        assert lo <= c.width <= hi
    assert [c.arrival_index for c in wl] == list(range(36))
    assert wl == sample_workload(mix, 36, SCENARIO_RANGES["sc1"], seed=4)


def test_scenario_ranges():
    sc1 = SCENARIO_RANGES["sc1"]
    assert sc1[CircuitKind.GHZ] == (18, 26) and sc1[CircuitKind.WSTATE] == (18, 26)
    assert sc1[CircuitKind.DJ] == (14, 22) and sc1[CircuitKind.QFT] == (10, 18)
    for k in KINDS:
        assert SCENARIO_RANGES["sc2"][k] == (sc1[k][0] + 4, sc1[k][1] + 4)


def test_workload_rejects_bad_mix():
    with pytest.raises(ValueError):
        sample_workload({"GHZ": 0.5}, 4, SCENARIO_RANGES["sc1"], 0)
