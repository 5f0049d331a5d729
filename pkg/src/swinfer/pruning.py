"""Channel-level structured pruning with an exact FLOPs ledger.

An action is the fraction of a conv layer's output channels PRESERVED
(keep ratio). Channels are ranked by the L2 norm of their output filter;
the kept set keeps its original order, so an all-keep strategy is a
bit-exact no-op. The ledger runs on integer FLOPs over the prunable
(conv) layers only: removing input slices of the next conv is charged
to the acting layer, so

    f_rdc + f_rest + retained_in_visited == total_original_conv_flops

holds exactly after every action.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import modelgraph as mg
from .errors import BudgetInfeasibleError, InvalidArgumentError, InvalidModelError

A_MIN_DEFAULT = 0.1


@dataclass
class FlopsLedger:
    total: int
    original: dict  # prunable index -> original FLOPs
    current: dict  # prunable index -> FLOPs in the working model
    kept_fraction: dict  # prunable index -> realized kept-channel fraction
    visited: list = field(default_factory=list)
    f_rdc: int = 0

    @property
    def f_rest(self) -> int:
        return sum(self.current[i] for i in self.current if i not in self.visited)

    @property
    def retained_visited(self) -> int:
        return sum(self.current[i] for i in self.visited)

    def rest_after(self, layer_index: int) -> int:
        """Current FLOPs of prunable layers strictly after layer_index."""
        return sum(f for i, f in self.current.items() if i > layer_index)

    @property
    def realized_ratio(self) -> float:
        return sum(self.current.values()) / self.total if self.total else 1.0


def make_ledger(graph: mg.ModelGraph) -> FlopsLedger:
    flops = {}
    for i in graph.prunable_indices:
        flops[i] = mg.flops_of_layer(graph.layer(i))
    total = sum(flops.values())
    if total == 0:
        raise InvalidModelError("model has no prunable conv FLOPs")
    return FlopsLedger(total, dict(flops), dict(flops), {i: 1.0 for i in flops})


STATE_FIELDS = ("i", "n", "c", "h", "w", "stride", "k", "flops", "f_rdc", "f_rest", "a_prev")


@dataclass
class LayerState:
    """11-feature embedding of one prunable layer plus episode progress."""

    raw: np.ndarray  # float64, ordered per STATE_FIELDS
    normalized: np.ndarray  # min-max scaled to [0,1]

    def __getattr__(self, name):
        if name in STATE_FIELDS:
            return float(self.raw[STATE_FIELDS.index(name)])
        raise AttributeError(name)


@dataclass
class StateNormalizer:
    lo: np.ndarray
    hi: np.ndarray

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        out = np.where(span > 0, (raw - self.lo) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(out, 0.0, 1.0)


def _static_features(layer: mg.LayerSpec) -> list:
    c, h, w = layer.input_shape
    return [layer.index, layer.n, c, h, w, layer.stride, layer.kh]


def make_normalizer(graph: mg.ModelGraph, ledger: FlopsLedger) -> StateNormalizer:
    """Per-feature min/max over the prunable layer set of this model.

    Static features span the layer set; the running FLOPs accounts span
    [0, total]; the previous action is already in [0,1].
    """
    rows = []
    for i in graph.prunable_indices:
        rows.append(_static_features(graph.layer(i)) + [ledger.original[i]])
    rows = np.asarray(rows, dtype=np.float64)
    lo = np.concatenate([rows.min(axis=0), [0.0, 0.0, 0.0]])
    hi = np.concatenate([rows.max(axis=0), [ledger.total, ledger.total, 1.0]])
    return StateNormalizer(lo, hi)


def build_state(
    graph: mg.ModelGraph,
    layer_index: int,
    ledger: FlopsLedger,
    a_prev: float = 1.0,
    normalizer: StateNormalizer = None,
) -> LayerState:
    if layer_index not in ledger.current:
        raise InvalidArgumentError(f"layer {layer_index} is not prunable")
    layer = graph.layer(layer_index)
    if layer.input_shape is None:
        raise InvalidModelError(f"{layer.name}: shapes not resolved")
    raw = np.array(
        _static_features(layer)
        + [ledger.current[layer_index], ledger.f_rdc, ledger.rest_after(layer_index), a_prev],
        dtype=np.float64,
    )
    normalizer = normalizer or make_normalizer(graph, ledger)
    return LayerState(raw, normalizer.normalize(raw))


def check_budget_feasible(budget: float, a_min: float = A_MIN_DEFAULT):
    if not 0 < budget <= 1:
        raise InvalidArgumentError(f"budget must be in (0,1], got {budget}")
    if budget < a_min:
        raise BudgetInfeasibleError(
            f"target retained-FLOPs ratio {budget} is below the action floor {a_min}"
        )


def clamp_action_for_budget(
    raw_action: float,
    layer_index: int,
    ledger: FlopsLedger,
    budget: float,
    a_min: float = A_MIN_DEFAULT,
) -> float:
    """Largest action <= raw_action that leaves the budget reachable.

    Uses the linear duty model over original per-layer FLOPs: visited
    layers at their realized kept fractions, later layers at a_min.
    """
    if not 0 < raw_action <= 1:
        raise InvalidArgumentError(f"action must be in (0,1], got {raw_action}")
    if budget >= 1.0:
        return max(a_min, raw_action)
    used = sum(ledger.kept_fraction[i] * ledger.original[i] for i in ledger.visited)
    rest = sum(
        ledger.original[i]
        for i in ledger.original
        if i not in ledger.visited and i != layer_index
    )
    bound = (budget * ledger.total - used - a_min * rest) / ledger.original[layer_index]
    return float(max(a_min, min(raw_action, bound)))


def kept_channel_count(keep_ratio: float, n: int) -> int:
    # round-half-up, floored at one channel
    return max(1, int(np.floor(keep_ratio * n + 0.5)))


def select_channels(weights: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k output filters with largest L2 norm, original order."""
    norms = np.sqrt((weights.astype(np.float64) ** 2).reshape(weights.shape[0], -1).sum(axis=1))
    ranked = np.lexsort((np.arange(len(norms)), -norms))
    return np.sort(ranked[:k])


def _next_parametric(graph: mg.ModelGraph, index: int):
    for l in graph.layers[index:]:
        if l.has_weights:
            return l
    return None


def apply_action(
    graph: mg.ModelGraph, layer_index: int, keep_ratio: float, ledger: FlopsLedger
) -> int:
    """Prune one conv layer in place; returns the kept channel count.

    The consumer side (next conv's input slices, or the linear head's
    flattened columns) is sliced to match, and the ledger is charged for
    both this layer's and the next conv's removed FLOPs.
    """
    if layer_index not in ledger.current:
        raise InvalidArgumentError(f"layer {layer_index} is not prunable")
    if not 0 < keep_ratio <= 1:
        raise InvalidArgumentError(f"keep ratio must be in (0,1], got {keep_ratio}")
    layer = graph.layer(layer_index)
    w, b = graph.weights[layer_index]
    k = kept_channel_count(keep_ratio, layer.n)
    keep = select_channels(w, k)

    before_here = ledger.current[layer_index]
    graph.weights[layer_index] = (
        np.ascontiguousarray(w[keep]),
        np.ascontiguousarray(b[keep]),
    )
    kept_frac = k / layer.n
    layer.n = k

    nxt = _next_parametric(graph, layer_index)
    before_next = ledger.current.get(nxt.index) if nxt is not None else None
    if nxt is not None:
        wn, bn = graph.weights[nxt.index]
        if nxt.kind == mg.CONV:
            graph.weights[nxt.index] = (np.ascontiguousarray(wn[:, keep]), bn)
            nxt.c = k
        else:
            # linear after flatten: each channel owns a contiguous h*w block
            flat = next(l for l in graph.layers[layer_index:] if l.kind == mg.FLATTEN)
            fc, fh, fw = flat.input_shape
            cols = (keep[:, None] * (fh * fw) + np.arange(fh * fw)[None, :]).reshape(-1)
            graph.weights[nxt.index] = (np.ascontiguousarray(wn[:, cols]), bn)
            nxt.c = len(cols)

    try:
        mg.resolve_shapes(graph)
    except InvalidModelError as exc:
        raise InvalidModelError(f"pruning layer {layer_index} broke the shape chain: {exc}") from exc

    ledger.current[layer_index] = mg.flops_of_layer(layer)
    ledger.kept_fraction[layer_index] = kept_frac
    removed = before_here - ledger.current[layer_index]
    if nxt is not None and nxt.kind == mg.CONV:
        ledger.current[nxt.index] = mg.flops_of_layer(nxt)
        removed += before_next - ledger.current[nxt.index]
    ledger.f_rdc += removed
    ledger.visited.append(layer_index)
    return k


@dataclass
class PruningStrategy:
    """Keep ratio per prunable layer plus the realized outcome."""

    actions: dict  # layer index -> keep ratio
    kept_channels: dict = field(default_factory=dict)
    realized_flops_ratio: float = 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "actions": {str(i): a for i, a in sorted(self.actions.items())},
                "kept_channels": {str(i): k for i, k in sorted(self.kept_channels.items())},
                "realized_flops_ratio": self.realized_flops_ratio,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "PruningStrategy":
        doc = json.loads(text)
        return cls(
            {int(i): float(a) for i, a in doc["actions"].items()},
            {int(i): int(k) for i, k in doc.get("kept_channels", {}).items()},
            float(doc.get("realized_flops_ratio", 1.0)),
        )


def apply_strategy(graph: mg.ModelGraph, actions: dict):
    """Prune a copy of the graph with the given keep ratios, in layer order."""
    work = graph.copy()
    ledger = make_ledger(work)
    strategy = PruningStrategy(dict(actions))
    for i in sorted(actions):
        strategy.kept_channels[i] = apply_action(work, i, actions[i], ledger)
    strategy.realized_flops_ratio = ledger.realized_ratio
    return work, ledger, strategy


@dataclass
class AccuracyReport:
    top_k: dict  # k -> fraction correct
    sample_count: int

    def as_dict(self):
        return {f"top{k}": v for k, v in sorted(self.top_k.items())} | {
            "sample_count": self.sample_count
        }


def topk_indices(logits: np.ndarray, k: int) -> np.ndarray:
    """Largest-k class indices; ties broken toward the lower class index."""
    order = np.lexsort((np.arange(len(logits)), -logits.astype(np.float64)))
    return order[:k]


def evaluate_accuracy(graph: mg.ModelGraph, valset: mg.ValidationSet, k_list=(1, 3, 5)) -> AccuracyReport:
    if graph.input_shape is None or tuple(valset.inputs.shape[1:]) != tuple(graph.input_shape):
        raise InvalidArgumentError(
            f"validation inputs {valset.inputs.shape[1:]} do not match model input {graph.input_shape}"
        )
    correct = {k: 0 for k in k_list}
    for x, label in zip(valset.inputs, valset.labels):
        logits = mg.forward(graph, x)
        for k in k_list:
            if int(label) in topk_indices(logits, k):
                correct[k] += 1
    n = valset.sample_count
    return AccuracyReport({k: correct[k] / n for k in k_list}, n)
