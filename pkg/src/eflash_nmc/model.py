"""Quantized model file format, deployment onto the macro, and evaluation.

The model file is plain JSON with explicit integer arrays; see README for the
schema. Weights are signed 4-bit and symmetric (weight zero point 0);
activations are int8 with per-layer zero points and per-output-channel
requantization scales.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import CapacityError, ModelError, SimError
from .metrics import accuracy, auc_rank
from .nmcu import (
    INT8_MAX,
    INT8_MIN,
    LayerDescriptor,
    Nmcu,
    round_half_away,
)
from .program import preset_pattern, program_pattern, rows_needed

TASKS = ("classify", "reconstruct")


@dataclass
class QuantLayer:
    in_dim: int
    out_dim: int
    weights: np.ndarray  # (out_dim, in_dim), values in [-8, 7]
    bias: np.ndarray
    input_scale: float
    input_zp: int
    requant_scales: np.ndarray
    output_zp: int
    activation: str = "none"

    def descriptor(self, base_row=None):
        return LayerDescriptor(
            in_dim=self.in_dim,
            out_dim=self.out_dim,
            bias=self.bias,
            requant_scale=self.requant_scales,
            input_zero_point=self.input_zp,
            output_zero_point=self.output_zp,
            activation=self.activation,
            weight_base_row=base_row,
        )

    @property
    def n_weights(self):
        return self.in_dim * self.out_dim


@dataclass
class QuantModel:
    name: str
    task: str
    layers: list
    output_scale: float | None = None  # dequantizes final outputs (reconstruct)
    on_chip_layer: int | None = None  # None: every layer runs on the macro

    def __post_init__(self):
        if self.task not in TASKS:
            raise ModelError(f"task must be one of {TASKS}")
        if not self.layers:
            raise ModelError("model has no layers")
        for i in range(len(self.layers) - 1):
            a, b = self.layers[i], self.layers[i + 1]
            if a.out_dim != b.in_dim:
                raise ModelError(
                    f"layers[{i}].out={a.out_dim} does not feed layers[{i + 1}].in={b.in_dim}"
                )
        if self.on_chip_layer is not None and not (
            0 <= self.on_chip_layer < len(self.layers)
        ):
            raise ModelError("on_chip_layer out of range")
        if self.task == "reconstruct":
            if self.layers[-1].out_dim != self.layers[0].in_dim:
                raise ModelError("reconstruct model must map back to its input dim")
            if self.output_scale is None:
                raise ModelError("reconstruct model must declare output_scale")

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def total_weights(self):
        return sum(l.n_weights for l in self.layers)


def _expect(cond, path, msg):
    if not cond:
        raise ModelError(f"{path}: {msg}")


def _layer_from_dict(d, i):
    p = f"layers[{i}]"
    _expect(isinstance(d, dict), p, "layer must be an object")
    for key in ("in", "out", "weights", "bias", "input_scale", "input_zp",
                "requant_scales", "output_zp"):
        _expect(key in d, f"{p}.{key}", "missing field")
    in_dim, out_dim = int(d["in"]), int(d["out"])
    _expect(in_dim >= 1 and out_dim >= 1, p, "dimensions must be >= 1")
    w = np.asarray(d["weights"], dtype=np.int64)
    _expect(
        w.size == in_dim * out_dim,
        f"{p}.weights",
        f"expected {in_dim * out_dim} values, got {w.size}",
    )
    if w.size and (w.min() < -8 or w.max() > 7):
        bad = int(np.argmax((w < -8) | (w > 7)))
        raise ModelError(
            f"{p}.weights[{bad}] = {int(w[bad])} outside the 4-bit range [-8, 7]"
        )
    bias = np.asarray(d["bias"], dtype=np.int64)
    _expect(bias.size == out_dim, f"{p}.bias", f"expected {out_dim} values")
    scales = np.asarray(d["requant_scales"], dtype=np.float64)
    _expect(scales.size == out_dim, f"{p}.requant_scales", f"expected {out_dim} values")
    _expect(bool(np.all(scales > 0)), f"{p}.requant_scales", "scales must be positive")
    _expect(float(d["input_scale"]) > 0, f"{p}.input_scale", "must be positive")
    for zp_key in ("input_zp", "output_zp"):
        _expect(
            INT8_MIN <= int(d[zp_key]) <= INT8_MAX, f"{p}.{zp_key}", "must fit int8"
        )
    activation = d.get("activation", "none")
    _expect(activation in ("none", "relu"), f"{p}.activation", "must be none or relu")
    return QuantLayer(
        in_dim=in_dim,
        out_dim=out_dim,
        weights=w.reshape(out_dim, in_dim),
        bias=bias,
        input_scale=float(d["input_scale"]),
        input_zp=int(d["input_zp"]),
        requant_scales=scales,
        output_zp=int(d["output_zp"]),
        activation=activation,
    )


def model_from_dict(doc):
    _expect(isinstance(doc, dict), "$", "model file must be a JSON object")
    for key in ("name", "task", "layers"):
        _expect(key in doc, f"$.{key}", "missing field")
    _expect(isinstance(doc["layers"], list), "$.layers", "must be an array")
    layers = [_layer_from_dict(d, i) for i, d in enumerate(doc["layers"])]
    out_scale = doc.get("output_scale")
    on_chip = doc.get("on_chip_layer")
    model = QuantModel(
        name=str(doc["name"]),
        task=str(doc["task"]),
        layers=layers,
        output_scale=float(out_scale) if out_scale is not None else None,
        on_chip_layer=int(on_chip) if on_chip is not None else None,
    )
    # descriptor-level validation (accumulator bound etc.) runs eagerly
    for layer in layers:
        layer.descriptor()
    return model


def load_model(path) -> QuantModel:
    path = Path(path)
    if not path.is_file():
        raise ModelError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: invalid JSON ({e})") from None
    return model_from_dict(doc)


def model_to_dict(model: QuantModel):
    doc = {
        "name": model.name,
        "task": model.task,
        "layers": [
            {
                "in": l.in_dim,
                "out": l.out_dim,
                "weights": l.weights.ravel().tolist(),
                "bias": l.bias.tolist(),
                "input_scale": l.input_scale,
                "input_zp": l.input_zp,
                "requant_scales": l.requant_scales.tolist(),
                "output_zp": l.output_zp,
                "activation": l.activation,
            }
            for l in model.layers
        ],
    }
    if model.output_scale is not None:
        doc["output_scale"] = model.output_scale
    if model.on_chip_layer is not None:
        doc["on_chip_layer"] = model.on_chip_layer
    return doc


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


# -- software oracle --------------------------------------------------------


def reference_forward(model: QuantModel, sample):
    """Pure-software int8 forward pass; the normative arithmetic reference."""
    x = np.asarray(sample, dtype=np.int64)
    for layer in model.layers:
        x = reference_layer(layer, x)
    return x.astype(np.int8)


def reference_layer(layer: QuantLayer, x):
    x = np.asarray(x, dtype=np.int64)
    if x.size != layer.in_dim:
        raise ModelError(f"sample dim {x.size} != layer in_dim {layer.in_dim}")
    acc = layer.bias + layer.weights.astype(np.int64) @ (x - layer.input_zp)
    out = layer.output_zp + round_half_away(acc.astype(np.float64) * layer.requant_scales)
    out = np.clip(out, INT8_MIN, INT8_MAX)
    if layer.activation == "relu":
        out = np.maximum(out, layer.output_zp)
    return out


# -- deployment and inference -----------------------------------------------


def assign_placement(model: QuantModel, macro, start_row=0):
    """Deterministic row layout: layers packed sequentially from start_row."""
    base_rows, cursor = [], start_row
    on_chip = (
        range(len(model.layers))
        if model.on_chip_layer is None
        else [model.on_chip_layer]
    )
    for i, layer in enumerate(model.layers):
        if i in on_chip:
            base_rows.append(cursor)
            cursor += rows_needed(layer.n_weights)
        else:
            base_rows.append(None)
    if cursor > macro.total_rows:
        raise CapacityError(
            f"model needs {cursor - start_row} rows, macro has "
            f"{macro.total_rows - start_row} free"
        )
    return base_rows


@dataclass
class Deployment:
    model: QuantModel
    macro: object
    base_rows: list
    summaries: list = field(default_factory=list)

    def placement_dict(self):
        return {
            "base_rows": self.base_rows,
            "rows_used": [
                rows_needed(l.n_weights) if r is not None else 0
                for l, r in zip(self.model.layers, self.base_rows)
            ],
            "summaries": [s.to_dict() for s in self.summaries],
        }


def deploy(model: QuantModel, macro, start_row=0, preset=False) -> Deployment:
    """Program every on-chip layer's weights into the macro.

    ``preset=True`` writes VT levels directly instead of running the pulse
    loop; used when the experiment under study is the compute path.
    """
    base_rows = assign_placement(model, macro, start_row)
    summaries = []
    for layer, base in zip(model.layers, base_rows):
        if base is None:
            continue
        flat = layer.weights.ravel()
        if preset:
            preset_pattern(macro, flat, base)
        else:
            summaries.append(program_pattern(macro, flat, base))
    return Deployment(model, macro, base_rows, summaries)


def run_inference(deployment: Deployment, sample, nmcu=None):
    """One sample through the deployed model; returns the final int8 vector.

    Fully on-chip models stream through the NMCU with one input-buffer load
    and ping-pong swaps between layers. Models with a designated on-chip
    layer run the remaining layers through the software oracle.
    """
    model, macro = deployment.model, deployment.macro
    x = np.asarray(sample, dtype=np.int8).ravel()
    if x.size != model.input_dim:
        raise ModelError(f"sample dim {x.size} != model input dim {model.input_dim}")
    if nmcu is None:
        nmcu = Nmcu(macro)
    if model.on_chip_layer is None:
        nmcu.reset()
        nmcu.set_input(x)
        for i, layer in enumerate(model.layers):
            desc = layer.descriptor(deployment.base_rows[i])
            if i == 0:
                nmcu.mvm(desc, "input_buffer")
            else:
                nmcu.swap_ping_pong()
                nmcu.mvm(desc, "ping_pong")
        return nmcu.last_output(), nmcu.trace
    acts = x.astype(np.int64)
    trace = []
    for i, layer in enumerate(model.layers):
        if i == model.on_chip_layer:
            nmcu.reset()
            nmcu.set_input(np.clip(acts, INT8_MIN, INT8_MAX).astype(np.int8))
            acts = nmcu.mvm(layer.descriptor(deployment.base_rows[i]), "input_buffer")
            trace.extend(nmcu.trace)
            acts = acts.astype(np.int64)
        else:
            acts = reference_layer(layer, acts)
    return np.clip(acts, INT8_MIN, INT8_MAX).astype(np.int8), trace


@dataclass
class EvalResult:
    task: str
    metric: str
    value: float
    n_samples: int
    per_class: dict = field(default_factory=dict)
    predictions: list = field(default_factory=list)
    scores: list = field(default_factory=list)

    def to_dict(self):
        d = {
            "task": self.task,
            "metric": self.metric,
            "value": self.value,
            "n_samples": self.n_samples,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
        }
        if self.predictions:
            d["predictions"] = self.predictions
        if self.scores:
            d["scores"] = self.scores
        return d


def dequantize_output(model: QuantModel, out):
    if model.output_scale is None:
        raise ModelError("model declares no output_scale for dequantization")
    return (np.asarray(out, dtype=np.float64) - model.layers[-1].output_zp) * model.output_scale


def evaluate(deployment: Deployment, dataset: Dataset) -> EvalResult:
    model = deployment.model
    if len(dataset) == 0:
        raise SimError("dataset is empty")
    if dataset.dim != model.input_dim:
        raise ModelError(
            f"dataset dim {dataset.dim} != model input dim {model.input_dim}"
        )
    if model.task == "classify":
        if dataset.kind != "classify":
            raise ModelError("classify model needs a labeled classification set")
        nmcu = Nmcu(deployment.macro)
        preds = np.empty(len(dataset), dtype=np.int64)
        for i in range(len(dataset)):
            out, _ = run_inference(deployment, dataset.samples[i], nmcu)
            preds[i] = int(np.argmax(out))
        per_class = {}
        for c in np.unique(dataset.labels):
            sel = dataset.labels == c
            per_class[int(c)] = {
                "count": int(sel.sum()),
                "correct": int(np.sum(preds[sel] == dataset.labels[sel])),
            }
        return EvalResult(
            "classify",
            "accuracy",
            accuracy(preds, dataset.labels),
            len(dataset),
            per_class,
            predictions=preds.tolist(),
        )
    if dataset.kind != "anomaly":
        raise ModelError("reconstruct model needs an anomaly-flagged dataset")
    in_scale = model.layers[0].input_scale
    in_zp = model.layers[0].input_zp
    nmcu = Nmcu(deployment.macro)
    scores = np.empty(len(dataset))
    for i in range(len(dataset)):
        out, _ = run_inference(deployment, dataset.samples[i], nmcu)
        target = (dataset.samples[i].astype(np.float64) - in_zp) * in_scale
        recon = dequantize_output(model, out)
        scores[i] = float(np.mean((recon - target) ** 2))
    return EvalResult(
        "reconstruct",
        "auc",
        auc_rank(scores, dataset.labels),
        len(dataset),
        scores=scores.tolist(),
    )
