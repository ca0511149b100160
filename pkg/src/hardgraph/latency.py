"""Roofline-style latency estimate from per-layer MACs and CIO bytes.

Each layer costs max(compute time, memory time); a layer is memory-bound
when its MoC falls below the platform's critical MoC
(peak_macs / dram_bytes * dtype_bytes).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .graph_ir import ArchGraph, Concat
from .metrics import LayerMetrics, node_metrics


@dataclass(frozen=True)
class PlatformModel:
    name: str
    peak_macs_per_second: float
    dram_bytes_per_second: float

    def __post_init__(self):
        if not self.peak_macs_per_second > 0 or not self.dram_bytes_per_second > 0:
            raise ValueError("platform rates must be strictly positive")

    def critical_moc(self, dtype_bytes: int = 4) -> float:
        if math.isinf(self.peak_macs_per_second) or math.isinf(self.dram_bytes_per_second):
            return self.peak_macs_per_second / self.dram_bytes_per_second \
                if not math.isinf(self.peak_macs_per_second) else math.inf
        return self.peak_macs_per_second / self.dram_bytes_per_second * dtype_bytes

    @classmethod
    def from_json(cls, text: str) -> "PlatformModel":
        doc = json.loads(text)
        return cls(doc.get("name", "platform"),
                   float(doc["peak_macs_per_second"]),
                   float(doc["dram_bytes_per_second"]))


# illustrative presets, not measured hardware
PRESETS = {
    "gpu-like": PlatformModel("gpu-like", 1e13, 6e11),
    "edge-like": PlatformModel("edge-like", 1e11, 1e10),
}


@dataclass
class LayerTime:
    node_id: int
    seconds: float
    bound: str  # "compute" | "memory" | "none"


@dataclass
class LatencyReport:
    total_seconds: float
    layers: list = field(default_factory=list)
    platform: Optional[PlatformModel] = None


def layer_time(metrics: LayerMetrics, platform: PlatformModel) -> float:
    compute = metrics.macs / platform.peak_macs_per_second
    memory = metrics.cio_bytes / platform.dram_bytes_per_second
    return max(compute, memory)


def model_latency(graph: ArchGraph, platform: PlatformModel,
                  dtype_bytes: int = 4, concat_copy: bool = False) -> LatencyReport:
    report = LatencyReport(total_seconds=0.0, platform=platform)
    crit = platform.critical_moc(dtype_bytes)
    for node in graph.nodes:
        lm = node_metrics(graph, node, dtype_bytes)
        if lm.cio_elements:
            t = layer_time(lm, platform)
            bound = "memory" if lm.moc < crit else "compute"
        elif concat_copy and isinstance(node.kind, Concat):
            # explicit copy: read + write of the concatenated tensor
            moved = 2 * graph.shapes[node.id].element_count * dtype_bytes
            t = moved / platform.dram_bytes_per_second
            bound = "memory"
        else:
            t = 0.0
            bound = "none"
        report.layers.append(LayerTime(node.id, t, bound))
        report.total_seconds += t
    return report
