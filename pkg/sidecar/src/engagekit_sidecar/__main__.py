import argparse
import json
from pathlib import Path

import uvicorn

from .app import DEFAULT_ACTIONS, create_app


def main() -> int:
    parser = argparse.ArgumentParser(
        prog="engagekit-sidecar", description="Segment recognizer HTTP service"
    )
    parser.add_argument("--mode", choices=["stub", "model"], default="stub")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8077)
    parser.add_argument(
        "--dictionary", help="JSON file with an ordered list of label names"
    )
    args = parser.parse_args()

    dictionary = DEFAULT_ACTIONS
    if args.dictionary:
        dictionary = tuple(json.loads(Path(args.dictionary).read_text(encoding="utf-8")))
    app = create_app(mode=args.mode, dictionary=dictionary)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
