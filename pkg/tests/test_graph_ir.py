import pytest
from hypothesis import given, strategies as st

from hardgraph.graph_ir import (Add, ArchGraph, Concat, Conv, GlobalPool, GraphError,
                                Input, Linear, Pool, TensorShape, TransposedConv, to_dot)


def chain_graph():
    g = ArchGraph(name="chain")
    i = g.add(Input(), [])
    c = g.add(Conv(64), [i])
    return g, i, c


class TestConstruction:
    def test_first_node_gets_id_zero(self):
        g = ArchGraph()
        assert g.add(Input(), []) == 0

    def test_chain_append(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        assert g.add(Conv(64), [i]) == 1

    def test_concat_arity(self):
        g, i, c = chain_graph()
        with pytest.raises(GraphError, match="Concat requires"):
            g.add(Concat(), [c])

    def test_unknown_input_id(self):
        g = ArchGraph()
        g.add(Input(), [])
        with pytest.raises(GraphError, match="unknown input id"):
            g.add(Conv(8), [5])

    def test_single_input_node(self):
        g = ArchGraph()
        g.add(Input(), [])
        with pytest.raises(GraphError):
            g.add(Input(), [])

    def test_non_input_needs_inputs(self):
        g = ArchGraph()
        g.add(Input(), [])
        with pytest.raises(GraphError):
            g.add(Conv(8), [])

    def test_groups_must_divide_out_channels(self):
        with pytest.raises(GraphError):
            Conv(10, groups=3)


class TestShapeInference:
    def test_same_padding_conv(self):
        g, i, c = chain_graph()
        g.infer_shapes(TensorShape(3, 224, 224))
        assert g.shapes[c] == TensorShape(64, 224, 224)

    def test_pool_halving(self):
        g, i, c = chain_graph()
        p = g.add(Pool("max"), [c])
        g.infer_shapes(TensorShape(3, 224, 224))
        assert g.shapes[p] == TensorShape(64, 112, 112)

    def test_concat_channel_sum(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        a = g.add(Conv(16), [i])
        b = g.add(Conv(24), [i])
        cat = g.add(Concat(), [a, b])
        g.infer_shapes(TensorShape(3, 56, 56))
        assert g.shapes[cat] == TensorShape(40, 56, 56)

    def test_strided_conv(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        c = g.add(Conv(64, kernel_h=7, kernel_w=7, stride=2), [i])
        g.infer_shapes(TensorShape(3, 224, 224))
        assert g.shapes[c] == TensorShape(64, 112, 112)

    def test_transposed_conv_upsamples(self):
        g, i, c = chain_graph()
        t = g.add(TransposedConv(32), [c])
        g.infer_shapes(TensorShape(3, 56, 56))
        assert g.shapes[t] == TensorShape(32, 112, 112)

    def test_global_pool_and_linear(self):
        g, i, c = chain_graph()
        p = g.add(GlobalPool(), [c])
        f = g.add(Linear(1000), [p])
        g.infer_shapes(TensorShape(3, 224, 224))
        assert g.shapes[p] == TensorShape(64, 1, 1)
        assert g.shapes[f] == TensorShape(1000, 1, 1)

    def test_concat_spatial_mismatch(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        a = g.add(Conv(16), [i])
        b = g.add(Conv(16, stride=2), [i])
        g.add(Concat(), [a, b])
        with pytest.raises(GraphError, match="spatial"):
            g.infer_shapes(TensorShape(3, 56, 56))

    def test_add_requires_matching_shapes(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        a = g.add(Conv(16), [i])
        b = g.add(Conv(32), [i])
        g.add(Add(), [a, b])
        with pytest.raises(GraphError):
            g.infer_shapes(TensorShape(3, 56, 56))

    def test_inference_deterministic(self):
        g, i, c = chain_graph()
        g.infer_shapes(TensorShape(3, 64, 64))
        first = dict(g.shapes)
        g.infer_shapes(TensorShape(3, 64, 64))
        assert g.shapes == first


class TestSchedule:
    def test_linear_chain(self):
        g, i, c = chain_graph()
        c2 = g.add(Conv(8), [c])
        assert g.schedule() == [0, 1, 2]

    def test_diamond_tie_break(self):
        g = ArchGraph()
        i = g.add(Input(), [])
        a = g.add(Conv(8), [i])
        b = g.add(Conv(8), [i])
        cat = g.add(Concat(), [a, b])
        assert g.schedule() == [0, 1, 2, 3]

    def test_single_input(self):
        g = ArchGraph()
        g.add(Input(), [])
        assert g.schedule() == [0]

    def test_every_node_after_its_inputs(self):
        import hardgraph
        g = hardgraph.build("hardnet68")
        order = g.schedule()
        pos = {nid: k for k, nid in enumerate(order)}
        for n in g.nodes:
            assert all(pos[i] < pos[n.id] for i in n.inputs)


@given(st.lists(st.integers(min_value=1, max_value=64), min_size=2, max_size=6),
       st.integers(min_value=1, max_value=32), st.integers(min_value=1, max_value=32))
def test_concat_element_count_is_sum(channels, h, w):
    g = ArchGraph()
    i = g.add(Input(), [])
    convs = [g.add(Conv(c, kernel_h=1, kernel_w=1), [i]) for c in channels]
    cat = g.add(Concat(), convs)
    g.infer_shapes(TensorShape(3, h, w))
    assert g.shapes[cat].element_count == sum(g.shapes[c].element_count for c in convs)


class TestSerialization:
    def test_round_trip(self):
        import hardgraph
        g = hardgraph.build("hardnet39ds")
        g2 = ArchGraph.from_json(g.to_json())
        assert g2.to_json() == g.to_json()
        assert g2.shapes == g.shapes

    def test_malformed_json(self):
        with pytest.raises(GraphError, match="malformed"):
            ArchGraph.from_json("{nope")

    def test_dot_has_one_entry_per_node(self):
        g, i, c = chain_graph()
        g.infer_shapes(TensorShape(3, 8, 8))
        dot = to_dot(g)
        assert dot.count("[label=") == len(g.nodes)
        assert dot.startswith("digraph") and dot.rstrip().endswith("}")
