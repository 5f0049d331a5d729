"""Operator-facing command surface.

Exit codes are bit-stable for scripting: 0 success, 2 usage errors,
3 file/format errors, 4 transport errors, 1 anything else. Failures
print one machine-parsable line: `error: <category>: <message>`.
"""

import argparse
import csv
import json
import statistics
import sys
import time
import urllib.request

import numpy as np

from . import agent as ag
from . import control as ctl
from . import modelgraph as mg
from . import planner as pl
from . import profiler as prof
from . import pruning as pr
from . import runtime as rt
from .errors import (
    FileTruncatedError,
    FormatError,
    InvalidModelError,
    SwinferError,
    TransportError,
    HandshakeError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_TRANSPORT = 4
EXIT_OTHER = 1


def _addr(text: str):
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def _post_json(addr, path, body, timeout=30.0):
    req = urllib.request.Request(
        f"http://{addr[0]}:{addr[1]}{path}",
        data=json.dumps(body).encode(),
        method="POST",
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read())


# --- subcommands ---------------------------------------------------------------


def cmd_profile(args) -> int:
    graph = mg.load_model(args.model)
    x = mg.load_input_bin(args.input, graph.input_shape)
    profile = prof.profile_layers(graph, x, repeats=args.repeats)
    profile.save(args.out)
    total = sum(l.compute_ms for l in profile.layers)
    print(json.dumps({"out": str(args.out), "layers": profile.num_layers,
                      "total_compute_ms": round(total, 3)}))
    return EXIT_OK


def cmd_prune(args) -> int:
    graph = mg.load_model(args.model)
    valset = mg.load_valset(args.valset)
    config = ag.AgentConfig(episodes=args.episodes, seed=args.seed)
    strategy, result = ag.run_search(graph, valset, config, budget=args.target_flops_ratio)
    pruned, _, _ = pr.apply_strategy(graph, strategy.actions)
    mg.save_model(pruned, args.out)
    with open(args.strategy, "w") as f:
        f.write(strategy.to_json())
    if args.trace:
        with open(args.trace, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["episode", "reward", "sigma", "baseline"])
            w.writerows(result.trace_rows())
    report = pr.evaluate_accuracy(pruned, valset)
    print(json.dumps({
        "out": str(args.out),
        "best_episode": result.best_episode,
        "best_reward": result.best_reward,
        "realized_flops_ratio": strategy.realized_flops_ratio,
        "pruned_accuracy": report.as_dict(),
        "reward_trace": [round(t["reward"], 6) for t in result.trace],
    }))
    return EXIT_OK


def _measured_sweep(args, graph, candidates):
    """Re-arm the daemon per candidate over HTTP, measure, keep medians."""
    if args.http is None:
        raise SwinferError("--measured needs --http H:P to re-arm the daemon per candidate")
    x = (
        mg.load_input_bin(args.input, graph.input_shape)
        if args.input
        else np.zeros(graph.input_shape, np.float32)
    )
    mg.forward(graph, x)  # warmup absorbs kernel JIT, as in profiling
    evaluated = []
    for c in candidates:
        _post_json(args.http, "/api/plan", {"split_point": c, "bandwidth_mbps": args.bandwidth_mbps})
        if c == graph.num_layers:
            samples = [rt.run_device_inference(graph, x)[1] for _ in range(args.runs)]
        else:
            with rt.EdgeSession(args.connect, graph, c) as session:
                samples = prof.measure_end_to_end(session, x, c, args.runs)
        evaluated.append(prof.LatencyBreakdown(
            c,
            statistics.median(s.t_device_ms for s in samples),
            statistics.median(s.t_tx_ms for s in samples),
            statistics.median(s.t_server_ms for s in samples),
        ))
    best = min(evaluated, key=lambda b: (b.total_ms, b.split_point))
    return pl.SplitPlan(best.split_point, best, pl.MEASURED, candidates=evaluated)


def cmd_plan(args) -> int:
    if args.measured_totals:
        totals = pl.load_measured_totals(args.measured_totals)
        plan = pl.greedy_split_from_totals(totals)
    else:
        if not args.model:
            raise SwinferError("plan needs --model (or --measured-totals)")
        graph = mg.load_model(args.model)
        n = graph.num_layers
        candidates = list(range(0 if args.include_endpoints else 1, n + 1))
        if args.measured:
            if args.connect is None:
                raise SwinferError("--measured needs --connect H:P")
            plan = _measured_sweep(args, graph, candidates)
        else:
            if not (args.device_profile and args.server_profile):
                raise SwinferError("prediction mode needs --device-profile and --server-profile")
            device = prof.LayerProfile.load(args.device_profile)
            server = prof.LayerProfile.load(args.server_profile)
            link = prof.LinkModel(args.bandwidth_mbps, args.overhead_ms)
            plan = pl.greedy_split(device, server, link, candidates)
        plan.model_hash = mg.model_hash(graph).hex()
    if args.strategy_ref:
        plan.strategy_ref = args.strategy_ref
    plan.save(args.out)
    print(json.dumps({"out": str(args.out), "split_point": plan.split_point,
                      "total_ms": plan.breakdown.total_ms, "mode": plan.mode}))
    return EXIT_OK


def cmd_serve(args) -> int:
    graph = mg.load_model(args.model)
    plan = pl.SplitPlan.load(args.plan)
    server = rt.CloudServer(
        graph, plan.split_point, listen=args.listen,
        profiling_lock=not args.no_profiling_lock,
    ).start()
    state = ctl.ControlState(
        graph=graph,
        server=server,
        device_profile=prof.LayerProfile.load(args.device_profile) if args.device_profile else None,
        server_profile=prof.LayerProfile.load(args.server_profile) if args.server_profile else None,
        measured_totals=pl.load_measured_totals(args.measured_totals) if args.measured_totals else None,
        plan=plan,
        plan_path=args.plan,
    )
    api = ctl.ControlApi(state, listen=args.http).start()
    print(json.dumps({"listen": list(server.address), "http": list(api.address),
                      "split_point": plan.split_point}), flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        api.stop()
        server.stop()
    return EXIT_OK


def _report_breakdown(http_addr, breakdown, mode):
    body = breakdown.as_dict() | {"mode": mode}
    try:
        _post_json(http_addr, "/api/live", body, timeout=5.0)
    except OSError:
        pass  # reporting is best-effort


def cmd_infer(args) -> int:
    graph = mg.load_model(args.model)
    plan = pl.SplitPlan.load(args.plan)
    x = mg.load_input_bin(args.input, graph.input_shape)
    mg.forward(graph, x)  # warmup absorbs kernel JIT, as in profiling
    logits, breakdown = rt.run_edge_inference(args.connect, graph, plan, x, args.mode)
    if args.out:
        mg.save_input_bin(logits, args.out)
    if args.report_http:
        _report_breakdown(args.report_http, breakdown, args.mode)
    order = pr.topk_indices(logits, min(5, len(logits)))
    print(json.dumps({
        "mode": args.mode,
        "argmax": int(order[0]),
        "top5": [int(i) for i in order],
        "breakdown": breakdown.as_dict(),
        "logits_out": str(args.out) if args.out else None,
    }))
    return EXIT_OK


def cmd_bench(args) -> int:
    graph = mg.load_model(args.model)
    plan = pl.SplitPlan.load(args.plan)
    x = mg.load_input_bin(args.input, graph.input_shape)
    mg.forward(graph, x)  # warmup absorbs kernel JIT, as in profiling
    modes = [("co", plan.split_point), ("device", graph.num_layers), ("server", 0)]
    rows = []
    totals = {m: [] for m, _ in modes}
    for run in range(args.runs):
        for mode, c in modes:
            _, b = rt.run_edge_inference(args.connect, graph, plan, x, mode)
            rows.append([run, c, b.t_device_ms, b.t_tx_ms, b.t_server_ms, b.total_ms])
            totals[mode].append(b.total_ms)
            if args.report_http:
                _report_breakdown(args.report_http, b, mode)
    with open(args.csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run", "c", "t_device_ms", "t_tx_ms", "t_server_ms", "total_ms"])
        w.writerows(rows)
    medians = {m: statistics.median(v) for m, v in totals.items()}
    print(json.dumps({
        "csv": str(args.csv),
        "runs": args.runs,
        "median_total_ms": {m: round(v, 3) for m, v in medians.items()},
        "speedup_vs_device": round(medians["device"] / medians["co"], 3),
        "speedup_vs_server": round(medians["server"] / medians["co"], 3),
    }))
    return EXIT_OK


def cmd_report(args) -> int:
    plan = pl.SplitPlan.load(args.plan)
    device = prof.LayerProfile.load(args.device_profile)
    server = prof.LayerProfile.load(args.server_profile)
    with open(args.csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "name", "kind", "output_bytes", "device_ms", "server_ms", "runs_on"])
        for d, s in zip(device.layers, server.layers):
            side = "device" if d.layer <= plan.split_point else "server"
            w.writerow([d.layer, d.name, d.kind, d.output_bytes, d.compute_ms, s.compute_ms, side])
    print(json.dumps({"csv": str(args.csv), "split_point": plan.split_point,
                      "predicted_total_ms": plan.breakdown.total_ms}))
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swinfer",
                                description="Edge-cloud collaborative CNN inference toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="measure per-layer compute latency on this host")
    sp.add_argument("--model", required=True, help="SWMF weight file")
    sp.add_argument("--out", required=True, help="profile JSON to write")
    sp.add_argument("--repeats", type=int, default=10, help="timing repeats (median kept)")
    sp.add_argument("--input", required=True, help="raw float32 input tensor (.bin)")
    sp.set_defaults(fn=cmd_profile)

    sp = sub.add_parser("prune", help="search layer-wise keep ratios with the DDPG agent")
    sp.add_argument("--model", required=True)
    sp.add_argument("--valset", required=True, help="SWDS validation set (reward oracle)")
    sp.add_argument("--target-flops-ratio", type=float, required=True,
                    help="retained conv-FLOPs budget in (0,1]")
    sp.add_argument("--episodes", type=int, default=400)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="pruned SWMF to write")
    sp.add_argument("--strategy", required=True, help="strategy JSON to write")
    sp.add_argument("--trace", default=None, help="per-episode reward CSV")
    sp.set_defaults(fn=cmd_prune)

    sp = sub.add_parser("plan", help="pick the latency-minimal split point")
    sp.add_argument("--model", help="SWMF weight file (hash + layer count)")
    sp.add_argument("--device-profile")
    sp.add_argument("--server-profile")
    sp.add_argument("--bandwidth-mbps", type=float, default=50.0)
    sp.add_argument("--overhead-ms", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--measured", action="store_true",
                    help="sweep candidates against a live daemon instead of predicting")
    sp.add_argument("--connect", type=_addr, help="daemon TCP address (measured mode)")
    sp.add_argument("--http", type=_addr, help="daemon control API (measured mode re-arm)")
    sp.add_argument("--runs", type=int, default=10, help="measurements per candidate")
    sp.add_argument("--include-endpoints", action="store_true",
                    help="admit c=0 and c=N as candidates")
    sp.add_argument("--measured-totals",
                    help="recorded totals JSON; argmin it directly, no profiles needed")
    sp.add_argument("--input", help="input tensor for measured mode")
    sp.add_argument("--strategy-ref", help="strategy JSON reference to stamp into the plan")
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("serve", help="run the cloud daemon + control API")
    sp.add_argument("--listen", type=_addr, required=True, help="TCP address for inference")
    sp.add_argument("--model", required=True)
    sp.add_argument("--plan", required=True, help="active plan JSON")
    sp.add_argument("--http", type=_addr, required=True, help="control API address")
    sp.add_argument("--device-profile", help="stored device profile for /api/whatif")
    sp.add_argument("--server-profile", help="stored server profile for /api/whatif")
    sp.add_argument("--measured-totals", help="recorded totals JSON for /api/whatif")
    sp.add_argument("--no-profiling-lock", action="store_true",
                    help="allow concurrent inference across connections")
    sp.set_defaults(fn=cmd_serve)

    sp = sub.add_parser("infer", help="run one inference in co/device/server placement")
    sp.add_argument("--connect", type=_addr, required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--mode", choices=["co", "device", "server"], default="co")
    sp.add_argument("--out", help="write logits as raw float32 .bin")
    sp.add_argument("--report-http", type=_addr, help="POST the measured breakdown to /api/live")
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("bench", help="compare co/device/server latency over repeated runs")
    sp.add_argument("--connect", type=_addr, required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--csv", required=True)
    sp.add_argument("--report-http", type=_addr)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("report", help="layer table: output bytes + per-host latency")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--device-profile", required=True)
    sp.add_argument("--server-profile", required=True)
    sp.add_argument("--csv", required=True)
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, FileTruncatedError, InvalidModelError) as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (TransportError, HandshakeError, ConnectionError) as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except FileNotFoundError as exc:
        print(f"error: format: missing file: {exc.filename}", file=sys.stderr)
        return EXIT_FORMAT
    except json.JSONDecodeError as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except SwinferError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
