"""Single lookup point for every built-in model name."""

from __future__ import annotations

from typing import Optional

from . import harmonic, references
from .graph_ir import ArchGraph, TensorShape

MODEL_NAMES = tuple(sorted(harmonic.HARDNET_VARIANTS + references.REFERENCE_MODELS))


def default_input(name: str) -> TensorShape:
    return harmonic.default_input(name.lower())


def build(name: str, input_shape: Optional[TensorShape] = None) -> ArchGraph:
    key = name.lower()
    if key in harmonic.HARDNET_VARIANTS:
        return harmonic.build_model(key, input_shape)
    if key in references.REFERENCE_MODELS:
        return references.build_reference(key, input_shape)
    raise KeyError(f"unknown model {name!r}; see list-models")
