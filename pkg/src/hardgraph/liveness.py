"""Tensor lifetimes and peak feature-map memory under the topological schedule.

Execution is strictly sequential, one node per step.  A node's output tensor
is live from its own step through the step of its last consumer; tensors
nobody consumes (graph outputs) stay live to the end.  Concat materializes a
new tensor by default; concat_free mode treats it as a zero-copy view, which
extends the lifetimes of its inputs instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .graph_ir import ArchGraph, Concat


@dataclass(frozen=True)
class LifeInterval:
    tensor_id: int   # = producing node id
    birth: int       # schedule step of the producer
    death: int       # schedule step of the last consumer
    size_elements: int


@dataclass
class MemoryProfile:
    steps: list = field(default_factory=list)        # live bytes per step
    live_sets: list = field(default_factory=list)    # live tensor ids per step
    peak_bytes: int = 0
    peak_step: int = 0
    dtype_bytes: int = 4
    weight_bytes: int = 0


def tensor_lifetimes(graph: ArchGraph, schedule: list,
                     concat_free: bool = False) -> list:
    """One LifeInterval per node output, in schedule order."""
    pos = {nid: i for i, nid in enumerate(schedule)}
    last = len(schedule) - 1
    death = {nid: pos[nid] for nid in schedule}
    consumers = {nid: [] for nid in schedule}
    for n in graph.nodes:
        for i in n.inputs:
            consumers[i].append(n.id)
    for nid in schedule:
        if consumers[nid]:
            death[nid] = max(pos[c] for c in consumers[nid])
        else:
            death[nid] = last
    if concat_free:
        # a zero-copy concat keeps its inputs alive as long as its own output
        for nid in reversed(schedule):
            n = graph.node(nid)
            if isinstance(n.kind, Concat):
                for i in n.inputs:
                    death[i] = max(death[i], death[nid])
    out = []
    for nid in schedule:
        size = graph.shapes[nid].element_count
        if concat_free and isinstance(graph.node(nid).kind, Concat):
            size = 0
        out.append(LifeInterval(nid, pos[nid], death[nid], size))
    return out


def peak_memory(graph: ArchGraph, schedule: Optional[list] = None,
                dtype_bytes: int = 4, concat_free: bool = False,
                include_weights: bool = False) -> MemoryProfile:
    if schedule is None:
        schedule = graph.schedule()
    intervals = tensor_lifetimes(graph, schedule, concat_free=concat_free)
    prof = MemoryProfile(dtype_bytes=dtype_bytes)
    if include_weights:
        from .metrics import model_summary
        prof.weight_bytes = model_summary(graph, dtype_bytes).params * dtype_bytes
    for step in range(len(schedule)):
        live = [iv for iv in intervals if iv.birth <= step <= iv.death]
        total = sum(iv.size_elements for iv in live) * dtype_bytes + prof.weight_bytes
        prof.steps.append(total)
        prof.live_sets.append(sorted(iv.tensor_id for iv in live))
        if total > prof.peak_bytes:
            prof.peak_bytes = total
            prof.peak_step = step
    return prof


def verify_flush(graph: ArchGraph, layer_nodes: Mapping[int, int]) -> list:
    """Check the power-of-two flush property on a bare harmonic block.

    After the layer at index 2**n executes, every tensor of layers
    1 .. 2**n - 1 must be dead.  Returns [(2**n, [flushed layer ids])];
    raises AssertionError on violation.
    """
    schedule = graph.schedule()
    pos = {nid: i for i, nid in enumerate(schedule)}
    intervals = {iv.tensor_id: iv for iv in tensor_lifetimes(graph, schedule)}
    depth = max(i for i in layer_nodes if i > 0)
    out = []
    p = 2
    while p <= depth:
        step = pos[layer_nodes[p]]
        flushed = []
        for l in range(1, p):
            iv = intervals[layer_nodes[l]]
            if iv.death > step:
                raise AssertionError(
                    f"layer {l} still live after layer {p} (dies at step {iv.death} > {step})")
            flushed.append(l)
        out.append((p, flushed))
        p *= 2
    return out


def timeline_csv(graph: ArchGraph, profile: MemoryProfile,
                 schedule: Optional[list] = None,
                 header: Optional[dict] = None) -> str:
    """Memory timeline: step,node,live_bytes."""
    if schedule is None:
        schedule = graph.schedule()
    buf = io.StringIO()
    if header:
        for k in sorted(header):
            buf.write(f"# {k}: {header[k]}\n")
    w = csv.writer(buf)
    w.writerow(["step", "node", "live_bytes"])
    for step, nid in enumerate(schedule):
        label = graph.node(nid).label or str(nid)
        w.writerow([step, label, profile.steps[step]])
    return buf.getvalue()
