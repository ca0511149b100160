"""Command-line front end: build, analyze, compare, liveness, latency, DOT.

Exit codes: 0 success, 1 usage error, 2 analysis error.  Identical
invocations produce byte-identical reports (no timestamps in headers).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import __version__, registry
from .catalog import validate_catalog
from .graph_ir import ArchGraph, GraphError, TensorShape, to_dot
from .latency import PRESETS, PlatformModel, model_latency
from .liveness import peak_memory, timeline_csv
from .metrics import check_moc, model_summary, report_csv, report_json


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_hw(text: str) -> tuple:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as e:
        raise UsageError(f"--input must look like 224x224, got {text!r}") from e


def _load_graph(model: str, input_hw: Optional[str]) -> ArchGraph:
    if model.endswith(".json"):
        path = Path(model)
        if not path.exists():
            raise GraphError(f"graph file not found: {model}")
        g = ArchGraph.from_json(path.read_text())
        if input_hw:
            c = g.input_shape.channels if g.input_shape else 3
            h, w = _parse_hw(input_hw)
            g.infer_shapes(TensorShape(c, h, w))
        elif not g.shapes:
            raise GraphError(f"{model} carries no input shape; pass --input")
        return g
    shape = None
    if input_hw:
        h, w = _parse_hw(input_hw)
        shape = TensorShape(3, h, w)
    return registry.build(model, shape)


def _header(args, model: str, graph: ArchGraph) -> dict:
    s = graph.input_shape
    return {
        "tool": f"hardgraph {__version__}",
        "model": model,
        "input": f"{s.channels}x{s.height}x{s.width}",
        "dtype_bytes": getattr(args, "dtype_bytes", 4),
        "flags": " ".join(sys.argv[2:]) if len(sys.argv) > 2 else "",
    }


def _write(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------

def _cmd_list_models(args) -> int:
    for name in registry.MODEL_NAMES:
        print(name)
    return 0


def _cmd_build(args) -> int:
    g = _load_graph(args.model, args.input)
    _write(g.to_json() + "\n", args.output)
    return 0


def _cmd_analyze(args) -> int:
    g = _load_graph(args.model, args.input)
    s = model_summary(g, dtype_bytes=args.dtype_bytes, ds_weight=args.ds_weight)
    header = _header(args, args.model, g)
    text = report_csv(g, s, header) if args.format == "csv" else report_json(g, s, header)
    _write(text if text.endswith("\n") else text + "\n", args.output)
    return 0


def _cmd_compare(args) -> int:
    wanted = args.metrics.split(",") if args.metrics else ["params", "macs", "cio"]
    rows = {}
    for model in (args.model_a, args.model_b):
        g = _load_graph(model, args.input)
        s = model_summary(g, dtype_bytes=args.dtype_bytes)
        rows[model] = {"params": s.params, "macs": s.macs, "cio": s.cio_elements,
                       "cio_mb": s.cio_mb}
    doc = {"models": rows, "reduction_pct": {}}
    a, b = rows[args.model_a], rows[args.model_b]
    for m in wanted:
        if m not in a:
            raise UsageError(f"unknown metric {m!r} (use params, macs, cio, cio_mb)")
        if b[m]:
            doc["reduction_pct"][m] = round(100.0 * (1 - a[m] / b[m]), 3)
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_check_moc(args) -> int:
    g = _load_graph(args.model, args.input)
    violations = check_moc(g, args.threshold)
    for nid, moc in violations:
        label = g.node(nid).label or str(nid)
        print(f"{nid}\t{label}\t{moc:.3f}")
    print(f"# {len(violations)} layer(s) below MoC threshold {args.threshold}")
    return 0


def _cmd_liveness(args) -> int:
    g = _load_graph(args.model, args.input)
    prof = peak_memory(g, dtype_bytes=args.dtype_bytes, concat_free=args.concat_free)
    header = _header(args, args.model, g)
    header["concat_free"] = args.concat_free
    header["peak_bytes"] = prof.peak_bytes
    header["peak_step"] = prof.peak_step
    _write(timeline_csv(g, prof, header=header), args.output)
    return 0


def _cmd_latency(args) -> int:
    if args.platform in PRESETS:
        platform = PRESETS[args.platform]
    else:
        path = Path(args.platform)
        if not path.exists():
            raise UsageError(
                f"platform {args.platform!r} is neither a preset ({', '.join(sorted(PRESETS))}) "
                f"nor a JSON file")
        platform = PlatformModel.from_json(path.read_text())
    g = _load_graph(args.model, args.input)
    rep = model_latency(g, platform, dtype_bytes=args.dtype_bytes, concat_copy=args.concat_copy)
    doc = {
        "header": _header(args, args.model, g),
        "platform": {"name": platform.name,
                     "peak_macs_per_second": platform.peak_macs_per_second,
                     "dram_bytes_per_second": platform.dram_bytes_per_second,
                     "critical_moc": platform.critical_moc(args.dtype_bytes)},
        "total_seconds": rep.total_seconds,
        "layers": [{"id": lt.node_id, "seconds": lt.seconds, "bound": lt.bound}
                   for lt in rep.layers],
    }
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_export_dot(args) -> int:
    g = _load_graph(args.model, args.input)
    _write(to_dot(g), args.output)
    return 0


def _cmd_validate(args) -> int:
    results = validate_catalog()
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"# {len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 2


def build_parser() -> _Parser:
    p = _Parser(prog="hardgraph", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_default=None):
        sp.add_argument("--input", default=input_default, help="input size as HxW")
        sp.add_argument("--dtype-bytes", type=int, default=4)
        sp.add_argument("--output", "-o", default=None)

    sub.add_parser("list-models", help="list built-in model names").set_defaults(func=_cmd_list_models)

    sp = sub.add_parser("build", help="emit a model graph as JSON")
    sp.add_argument("model")
    common(sp)
    sp.set_defaults(func=_cmd_build)

    sp = sub.add_parser("analyze", help="per-layer params/MACs/CIO/MoC report")
    sp.add_argument("model", help="built-in name or graph JSON path")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--ds-weight", type=float, default=None,
                    help="CIO weighting for pointwise/depthwise convs")
    common(sp)
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("compare", help="metric deltas between two models")
    sp.add_argument("model_a")
    sp.add_argument("model_b")
    sp.add_argument("--metrics", default=None, help="comma list: params,macs,cio,cio_mb")
    common(sp)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("check-moc", help="list conv layers below a MoC threshold")
    sp.add_argument("model")
    sp.add_argument("--threshold", type=float, required=True)
    common(sp)
    sp.set_defaults(func=_cmd_check_moc)

    sp = sub.add_parser("liveness", help="memory timeline and peak usage")
    sp.add_argument("model")
    sp.add_argument("--concat-free", action="store_true",
                    help="model concatenation as zero-copy")
    common(sp)
    sp.set_defaults(func=_cmd_liveness)

    sp = sub.add_parser("latency", help="roofline latency estimate")
    sp.add_argument("model")
    sp.add_argument("--platform", required=True,
                    help="preset name or platform JSON path")
    sp.add_argument("--concat-copy", action="store_true",
                    help="charge DRAM time for concat copies")
    common(sp)
    sp.set_defaults(func=_cmd_latency)

    sp = sub.add_parser("export-dot", help="Graphviz DOT export")
    sp.add_argument("model")
    common(sp)
    sp.set_defaults(func=_cmd_export_dot)

    sp = sub.add_parser("validate-tables", help="reproduce the published efficiency tables")
    sp.set_defaults(func=_cmd_validate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (GraphError, KeyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
