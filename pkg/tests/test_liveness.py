import pytest

import hardgraph
from hardgraph.graph_ir import ArchGraph, Concat, Conv, Input, TensorShape
from hardgraph.harmonic import HDBSpec, build_bare_hdb, build_hdb
from hardgraph.liveness import peak_memory, tensor_lifetimes, timeline_csv, verify_flush


def brute_force_deaths(graph, schedule):
    """Independent last-consumer scan over raw node inputs."""
    pos = {nid: i for i, nid in enumerate(schedule)}
    deaths = {}
    for nid in schedule:
        users = [pos[n.id] for n in graph.nodes if nid in n.inputs]
        deaths[nid] = max(users) if users else len(schedule) - 1
    return deaths


def chain():
    g = ArchGraph()
    i = g.add(Input(), [])
    a = g.add(Conv(16), [i])
    b = g.add(Conv(8), [a])
    g.infer_shapes(TensorShape(3, 32, 32))
    return g, (i, a, b)


class TestLifetimes:
    def test_chain_deaths(self):
        g, (i, a, b) = chain()
        ivs = {iv.tensor_id: iv for iv in tensor_lifetimes(g, g.schedule())}
        assert ivs[i].death == 1
        assert ivs[a].death == 2
        assert ivs[b].death == 2  # output lives to the end

    def test_matches_brute_force_on_models(self):
        for name in ("hardnet39ds", "fc-hardnet68"):
            g = hardgraph.build(name)
            sched = g.schedule()
            expected = brute_force_deaths(g, sched)
            for iv in tensor_lifetimes(g, sched):
                assert iv.death == expected[iv.tensor_id]

    def test_bare_hdb_even_layer_dies_at_next_power(self):
        g, res = build_bare_hdb(HDBSpec(8, 10, 1.6), TensorShape(16, 32, 32))
        sched = g.schedule()
        pos = {nid: i for i, nid in enumerate(sched)}
        ivs = {iv.tensor_id: iv for iv in tensor_lifetimes(g, sched)}
        # layer 3 is consumed only by layer 4 (through its concat)
        assert ivs[res.layer_nodes[3]].death < pos[res.layer_nodes[4]]

    def test_output_concat_extends_odd_lifetimes(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        g.infer_shapes(TensorShape(16, 32, 32))
        res = build_hdb(HDBSpec(8, 10, 1.6), i, g)
        g.infer_shapes(TensorShape(16, 32, 32))
        sched = g.schedule()
        pos = {nid: i for i, nid in enumerate(sched)}
        ivs = {iv.tensor_id: iv for iv in tensor_lifetimes(g, sched)}
        out_pos = pos[res.output]
        for l in (1, 3, 5, 7):
            assert ivs[res.layer_nodes[l]].death >= out_pos
        for l in (2, 4, 6):
            assert ivs[res.layer_nodes[l]].death < out_pos


class TestPeakMemory:
    def test_chain_hand_trace(self):
        g, _ = chain()
        prof = peak_memory(g, dtype_bytes=1)
        assert prof.steps == [3072, 3072 + 16384, 16384 + 8192]
        assert prof.peak_bytes == 24_576
        assert prof.peak_step == 2

    def test_input_only(self):
        g = ArchGraph()
        g.add(Input(), [])
        g.infer_shapes(TensorShape(3, 32, 32))
        prof = peak_memory(g, dtype_bytes=1)
        assert prof.peak_bytes == 3072

    def test_dtype_linearity(self):
        g, _ = chain()
        p1 = peak_memory(g, dtype_bytes=1)
        p4 = peak_memory(g, dtype_bytes=4)
        assert p4.peak_bytes == 4 * p1.peak_bytes
        assert p4.steps == [4 * s for s in p1.steps]

    def test_monotone_in_spatial_size(self):
        small = peak_memory(hardgraph.build("hardnet39ds", TensorShape(3, 224, 224)))
        big = peak_memory(hardgraph.build("hardnet39ds", TensorShape(3, 448, 448)))
        assert big.peak_bytes >= small.peak_bytes

    @pytest.mark.parametrize("name", ["hardnet39ds", "fc-hardnet68", "densenet121"])
    def test_concat_free_never_higher(self, name):
        g = hardgraph.build(name)
        materialized = peak_memory(g)
        free = peak_memory(g, concat_free=True)
        assert free.peak_bytes <= materialized.peak_bytes
        assert all(f <= m for f, m in zip(free.steps, materialized.steps))

    def test_include_weights_adds_constant(self):
        g, _ = chain()
        base = peak_memory(g, dtype_bytes=4)
        with_w = peak_memory(g, dtype_bytes=4, include_weights=True)
        assert with_w.peak_bytes > base.peak_bytes
        assert with_w.weight_bytes == (3 * 16 * 9 + 16 * 8 * 9) * 4

    def test_timeline_csv_rows(self):
        g, _ = chain()
        prof = peak_memory(g)
        text = timeline_csv(g, prof)
        lines = text.strip().splitlines()
        assert lines[0] == "step,node,live_bytes"
        assert len(lines) == 1 + len(g.nodes)


class TestFlushProperty:
    @pytest.mark.parametrize("L", [2, 4, 8, 16, 32])
    def test_flush_exhaustive(self, L):
        g, res = build_bare_hdb(HDBSpec(L, 8, 1.6), TensorShape(16, 64, 64))
        report = verify_flush(g, res.layer_nodes)
        powers = [p for p, _ in report]
        assert powers == [2 ** n for n in range(1, L.bit_length())]
        for p, flushed in report:
            assert flushed == list(range(1, p))

    @pytest.mark.parametrize("L", [2, 4, 8, 16, 32])
    def test_flush_against_brute_force(self, L):
        g, res = build_bare_hdb(HDBSpec(L, 8, 1.6), TensorShape(16, 64, 64))
        sched = g.schedule()
        pos = {nid: i for i, nid in enumerate(sched)}
        deaths = brute_force_deaths(g, sched)
        p = 2
        while p <= L:
            step = pos[res.layer_nodes[p]]
            for l in range(1, p):
                assert deaths[res.layer_nodes[l]] <= step, (L, p, l)
            p *= 2

    def test_violation_detected(self):
        g, res = build_bare_hdb(HDBSpec(4, 8, 1.6), TensorShape(16, 32, 32))
        # an extra consumer of layer 1 after layer 4 breaks the property
        g.add(Conv(8), [res.layer_nodes[1]])
        g.infer_shapes(TensorShape(16, 32, 32))
        with pytest.raises(AssertionError):
            verify_flush(g, res.layer_nodes)
