"""CLI: generate datasets, train/export fixture models, emit latency tables."""

import argparse
import json
import sys

from . import latency_table, shapes, train


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="fixture-forge")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-dataset", help="write the synthetic shapes image set")
    sp.add_argument("--out", required=True)
    sp.add_argument("--per-class", type=int, default=50)
    sp.add_argument("--size", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("train", help="train on a folder-per-class set and export fixtures")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("latency-table", help="emit the recorded split-latency fixture")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("fine-tune", help="briefly retrain a pruned SWMF model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)

    args = p.parse_args(argv)
    if args.command == "gen-dataset":
        out = shapes.generate_dataset(args.out, args.per_class, args.size, args.seed)
        print(json.dumps({"dataset": str(out), "classes": list(shapes.CLASSES)}))
    elif args.command == "train":
        manifest = train.train_and_export(args.dataset, args.out, epochs=args.epochs,
                                          seed=args.seed)
        print(json.dumps({k: manifest[k] for k in ("top1", "top3", "top5", "sample_count")}))
    elif args.command == "latency-table":
        doc = latency_table.export_split_latency_fixture(args.out)
        print(json.dumps({"out": args.out, "entries": len(doc["totals_ms"])}))
    elif args.command == "fine-tune":
        report = train.fine_tune(args.model, args.dataset, args.out,
                                 epochs=args.epochs, seed=args.seed)
        print(json.dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
