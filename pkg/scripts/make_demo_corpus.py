#!/usr/bin/env python3
"""Write a small synthetic corpus (dry sources, RIRs, noises) and its manifest.

    python3 scripts/make_demo_corpus.py demo/in [--n 4] [--seed 0] [--seconds 3]

The manifest feeds ``wpebench simulate --manifest demo/in/manifest.jsonl``.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from wpebench.scenarios import write_demo_corpus


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seconds", type=float, default=3.0)
    ap.add_argument("--bit-depth", choices=("float32", "pcm16"), default="float32")
    args = ap.parse_args(argv)
    manifest = write_demo_corpus(args.out_dir, args.n, args.seed, args.seconds, args.bit_depth)
    print(manifest)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
