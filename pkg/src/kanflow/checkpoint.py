"""Versioned model checkpoints as structured text.

A checkpoint stores the architecture, every parameter array as decimal
floats with 17 significant digits, the build seed, scaler state, and an
echo of the run configuration. Loading reproduces forward outputs
bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .kan import KanLayer, SplineGrid
from .model import GcnLayer, ModelBundle, ModelSpec
from .tableio import load_json, write_json

__all__ = ["save_checkpoint", "load_checkpoint", "FORMAT_VERSION"]

FORMAT_VERSION = 1


def save_checkpoint(path, model: ModelBundle, seed: int,
                    config_echo: dict | None = None,
                    scalers: dict | None = None) -> None:
    spec = model.spec
    doc = {
        "format_version": FORMAT_VERSION,
        "model": {
            "kind": spec.kind,
            "n_features": spec.n_features,
            "hidden": list(spec.hidden),
            "grid_size": spec.grid_size,
            "order": spec.order,
            "activation": spec.activation,
        },
        "aggregate_flags": [bool(agg) for agg, _ in model.entries],
        "params": {name: arr.tolist() for name, arr in model.params().items()},
        "seed": int(seed),
        "config_echo": config_echo or {},
        "scalers": scalers,
    }
    write_json(path, doc)


def load_checkpoint(path) -> tuple[ModelBundle, dict]:
    """Rebuild the model; returns (model, full checkpoint document)."""
    doc = load_json(path)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint format_version {doc.get('format_version')!r}"
        )
    m = doc["model"]
    spec = ModelSpec(
        kind=m["kind"], n_features=int(m["n_features"]),
        hidden=tuple(int(h) for h in m["hidden"]),
        grid_size=int(m["grid_size"]), order=int(m["order"]),
        activation=m["activation"],
    )
    params = {name: np.array(v, dtype=np.float64) for name, v in doc["params"].items()}
    flags = [bool(f) for f in doc["aggregate_flags"]]

    dims = [spec.n_features, *spec.hidden]
    entries = []
    for idx in range(len(dims) - 1):
        n_in, n_out = dims[idx], dims[idx + 1]
        if spec.kind == "kan_gcn":
            grid = SplineGrid(spec.grid_size, spec.order)
            layer = KanLayer(
                n_in, n_out, grid,
                coeffs=params[f"layer{idx}.coeffs"],
                base_weight=params[f"layer{idx}.base_weight"],
                spline_weight=params[f"layer{idx}.spline_weight"],
            )
        else:
            layer = GcnLayer(params[f"layer{idx}.weight"], spec.activation)
        entries.append((flags[idx], layer))
    model = ModelBundle(
        spec, entries,
        readout_weight=params["readout.weight"],
        readout_bias=params["readout.bias"],
    )
    return model, doc
