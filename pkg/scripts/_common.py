"""Shared argument handling for the experiment scripts."""

import argparse
import json
import os


def parser(description, seeds=10):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--seeds", type=int, default=seeds, help="number of seeds, starting at 0")
    ap.add_argument("--out", help="write the per-seed results as JSON here")
    return ap


def finish(args, rows, summary):
    for k, v in summary.items():
        print(f"{k}: {v}")
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump({"summary": summary, "runs": rows}, f, indent=2, sort_keys=True, default=float)
