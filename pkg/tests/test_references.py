import math

import pytest

import hardgraph
from hardgraph.graph_ir import Conv
from hardgraph.metrics import model_summary
from hardgraph.references import (REFERENCE_MODELS, SparseRule, build_reference,
                                  sparse_links)


class TestSparseLinks:
    def test_dense_all(self):
        assert sparse_links(SparseRule.DENSE_ALL, 5) == [0, 1, 2, 3, 4]

    def test_log_rule(self):
        assert sparse_links(SparseRule.LOG, 5) == [4, 3, 1]

    def test_log_layer_one(self):
        assert sparse_links(SparseRule.LOG, 1) == [0]

    def test_layer_zero_rejected(self):
        with pytest.raises(ValueError):
            sparse_links(SparseRule.LOG, 0)

    def test_fan_in_growth(self):
        for k in range(1, 300):
            assert len(sparse_links(SparseRule.DENSE_ALL, k)) == k
            assert len(sparse_links(SparseRule.LOG, k)) == math.floor(math.log2(k)) + 1
            assert sparse_links(SparseRule.SPARSE_FIXED_OUTPUT, k) == sparse_links(SparseRule.LOG, k)


class TestBuilders:
    @pytest.mark.parametrize("name", REFERENCE_MODELS)
    def test_builds_validates_and_infers(self, name):
        g = build_reference(name)
        g.validate()
        assert all(n.id in g.shapes for n in g.nodes)
        order = g.schedule()
        assert sorted(order) == [n.id for n in g.nodes]

    def test_unknown_model(self):
        with pytest.raises(KeyError):
            build_reference("alexnet")

    def test_densenet121_params(self):
        s = model_summary(hardgraph.build("densenet121"))
        assert abs(s.params_m - 7.9) / 7.9 < 0.02

    def test_resnet50_params_and_macs(self):
        s = model_summary(hardgraph.build("resnet50"))
        assert abs(s.params_m - 25.0) / 25.0 < 0.03
        assert abs(s.macs_g - 4.1) / 4.1 < 0.05

    def test_vgg16_params(self):
        s = model_summary(hardgraph.build("vgg16"))
        assert abs(s.params_m - 138.4) / 138.4 < 0.01

    def test_fc_densenet103_params(self):
        s = model_summary(hardgraph.build("fc-densenet103"))
        assert abs(s.params_m - 9.4) / 9.4 < 0.05

    def test_fc_sparsenet_uses_log_links(self):
        g = build_reference("fc-sparsenet-ref100")
        # an 8-layer block's layer 8 reads 4 predecessors under the log rule
        l8 = next(n for n in g.nodes if n.label == "enc0/l8")
        cat = g.node(l8.inputs[0])
        assert len(cat.inputs) == 4

    def test_resnet_projection_only_on_downsample(self):
        g = build_reference("resnet50")
        projs = [n for n in g.nodes if n.label and n.label.endswith("/proj")]
        assert len(projs) == 4  # one per stage
