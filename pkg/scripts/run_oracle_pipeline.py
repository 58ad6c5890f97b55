#!/usr/bin/env python3
"""End-to-end demo: simulate a lecture, parse it with the oracle recognizer,
classify engagement with the baseline, and print both evaluation reports."""

import argparse
import tempfile
from pathlib import Path

from engagekit.cli import main as cli


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="defaults to a temp directory")
    args = parser.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="engagekit-"))
    out.mkdir(parents=True, exist_ok=True)
    session = out / "session.json"

    for step in (
        ["simulate", "--scenario", "lecture", "--seed", str(args.seed), "--out", str(out)],
        ["parse", "--session", str(session), "--recognizer", "oracle", "--out", str(out)],
        ["eval-seg", "--session", str(session),
         "--predictions", str(out / "predictions.json"), "--out", str(out)],
        ["classify", "--session", str(session), "--classifier", "baseline",
         "--variant", "context", "--out", str(out)],
    ):
        print(f"\n$ engagekit {' '.join(step)}")
        code = cli(step)
        if code != 0:
            raise SystemExit(code)
    print(f"\nartifacts under {out}")


if __name__ == "__main__":
    main()
