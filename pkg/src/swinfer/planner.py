"""Split-point selection and the two-stage joint optimization.

The split point c places layers 1..c on the device and c+1..N on the
server. c = 0 (pure server) and c = N (pure device) are admitted as
candidates so the baselines fall out of the same code path. Ties break
toward the smaller c (less device work, deterministic).
"""

import json
import statistics
from dataclasses import asdict, dataclass, field

from . import profiler as prof
from .errors import InvalidArgumentError

PREDICTED = "predicted"
MEASURED = "measured"


@dataclass
class SplitPlan:
    split_point: int
    breakdown: prof.LatencyBreakdown
    mode: str = PREDICTED
    model_hash: str = ""  # hex sha-256 of the SWMF bytes
    strategy_ref: str = ""  # path or digest of the pruning strategy JSON
    link: prof.LinkModel = None
    candidates: list = field(default_factory=list)  # breakdowns per candidate

    def to_json(self) -> str:
        doc = {
            "model_hash": self.model_hash,
            "split_point": self.split_point,
            "strategy_ref": self.strategy_ref,
            "mode": self.mode,
            "predicted": self.breakdown.as_dict(),
            "link": asdict(self.link) if self.link else None,
            "candidates": [b.as_dict() for b in self.candidates],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        doc = json.loads(text)
        pred = doc["predicted"]
        breakdown = prof.LatencyBreakdown(
            pred["split_point"], pred["t_device_ms"], pred["t_tx_ms"], pred["t_server_ms"]
        )
        link = prof.LinkModel(**doc["link"]) if doc.get("link") else None
        cands = [
            prof.LatencyBreakdown(
                d["split_point"], d["t_device_ms"], d["t_tx_ms"], d["t_server_ms"]
            )
            for d in doc.get("candidates", [])
        ]
        return cls(
            doc["split_point"], breakdown, doc.get("mode", PREDICTED),
            doc.get("model_hash", ""), doc.get("strategy_ref", ""), link, cands,
        )

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "SplitPlan":
        with open(path) as f:
            return cls.from_json(f.read())


def _argmin(breakdowns) -> prof.LatencyBreakdown:
    best = None
    for b in breakdowns:
        if best is None or b.total_ms < best.total_ms:  # strict: ties keep smaller c
            best = b
    return best


def greedy_split(
    device: prof.LayerProfile,
    server: prof.LayerProfile,
    link: prof.LinkModel,
    candidate_range=None,
    measure=None,
    runs: int = 10,
) -> SplitPlan:
    """Evaluate every candidate split and return the latency argmin.

    Prediction mode sweeps the additive model. If `measure` is given
    (a callable c -> list of LatencyBreakdown), each candidate is
    measured `runs` times and candidates compete on median totals.
    """
    n = device.num_layers
    candidates = sorted(candidate_range) if candidate_range is not None else list(range(0, n + 1))
    if not candidates:
        raise InvalidArgumentError("candidate range is empty")
    if candidates[0] < 0 or candidates[-1] > n:
        raise InvalidArgumentError(f"candidates {candidates[0]}..{candidates[-1]} outside [0, {n}]")

    evaluated = []
    if measure is None:
        for c in candidates:
            evaluated.append(prof.predict_latency(device, server, link, c))
        mode = PREDICTED
    else:
        for c in candidates:
            samples = measure(c)[:runs]
            evaluated.append(_median_breakdown(c, samples))
        mode = MEASURED
    best = _argmin(evaluated)
    return SplitPlan(best.split_point, best, mode, link=link, candidates=evaluated)


def _median_breakdown(c: int, samples) -> prof.LatencyBreakdown:
    if not samples:
        raise InvalidArgumentError(f"no measurements for candidate {c}")
    return prof.LatencyBreakdown(
        c,
        statistics.median(s.t_device_ms for s in samples),
        statistics.median(s.t_tx_ms for s in samples),
        statistics.median(s.t_server_ms for s in samples),
    )


def greedy_split_from_totals(totals: dict, candidate_range=None) -> SplitPlan:
    """Argmin over recorded measured totals keyed by split point.

    Measurement fixtures store opaque end-to-end totals (no decomposition),
    so the breakdown carries the total in t_device and zeros elsewhere.
    """
    if not totals:
        raise InvalidArgumentError("totals table is empty")
    keys = sorted(int(k) for k in totals)
    if candidate_range is not None:
        keys = [k for k in keys if k in set(candidate_range)]
        if not keys:
            raise InvalidArgumentError("candidate range excludes every recorded split point")
    evaluated = [
        prof.LatencyBreakdown(k, float(totals[k] if k in totals else totals[str(k)]), 0.0, 0.0)
        for k in keys
    ]
    best = _argmin(evaluated)
    return SplitPlan(best.split_point, best, MEASURED, candidates=evaluated)


def load_measured_totals(path) -> dict:
    with open(path) as f:
        doc = json.load(f)
    try:
        return {int(k): float(v) for k, v in doc["totals_ms"].items()}
    except KeyError as exc:
        raise InvalidArgumentError(f"measured-totals fixture missing field {exc}") from exc


def two_stage_optimize(graph, valset, agent_config, budget, profile_fn, link,
                       candidate_range=None):
    """Stage 1: DDPG pruning search; stage 2: re-profile and split the result.

    `profile_fn(graph) -> (device_profile, server_profile)` supplies fresh
    profiles for the pruned model. Returns (strategy, plan, pruned_graph,
    provenance).
    """
    from . import agent as ag
    from . import pruning as pr

    strategy, result = ag.run_search(graph, valset, agent_config, budget)
    pruned, _, _ = pr.apply_strategy(graph, strategy.actions)
    device, server = profile_fn(pruned)
    plan = greedy_split(device, server, link, candidate_range)
    provenance = {
        "seed": agent_config.seed,
        "episodes": agent_config.episodes,
        "budget": budget,
        "best_episode": result.best_episode,
        "best_reward": result.best_reward,
        "realized_flops_ratio": strategy.realized_flops_ratio,
    }
    return strategy, plan, pruned, provenance


def compare_baselines(
    device: prof.LayerProfile, server: prof.LayerProfile, link: prof.LinkModel, plan: SplitPlan
) -> dict:
    """Device-only (c=N), server-only (c=0), and the plan's co-inference."""
    n = device.num_layers
    device_only = prof.predict_latency(device, server, link, n)
    server_only = prof.predict_latency(device, server, link, 0)
    co = prof.predict_latency(device, server, link, plan.split_point)
    return {
        "split_point": plan.split_point,
        "co_ms": co.total_ms,
        "device_only_ms": device_only.total_ms,
        "server_only_ms": server_only.total_ms,
        "speedup_vs_device_only": device_only.total_ms / co.total_ms,
        "speedup_vs_server_only": server_only.total_ms / co.total_ms,
    }
