#!/usr/bin/env python3
"""Generate comments for one blog across every known user, side by side.

Prepares a synthetic corpus, trains the full model on it, then decodes
the same blog post once per user profile.  Because the condition vector
is built from profile content (features plus description) rather than a
user id embedding, the script also decodes for an ad-hoc "guest" profile
that clones the first user's fields: the guest gets the same comment,
showing that the personalization lives in the profile, not the id.

    python3 scripts/case_study.py --out runs/case_study
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pcgn.cli import main as pcgn


def run(argv: list[str]) -> None:
    code = pcgn(argv)
    if code != 0:
        sys.exit(code)


def parse_args() -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("runs/case_study"))
    ap.add_argument("--records", type=int, default=24)
    ap.add_argument("--users", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--blog", default="new post about coffee today")
    ap.add_argument("--top", type=int, default=2, help="hypotheses shown per user")
    return ap.parse_args()


def main() -> None:
    args = parse_args()
    data = args.out / "data"
    train = args.out / "train"

    run([
        "prepare",
        "--synthetic", str(args.records),
        "--synthetic-users", str(args.users),
        "--seed", str(args.seed),
        "--out-dir", str(data),
    ])
    run([
        "train",
        "--data-dir", str(data),
        "--out-dir", str(train),
        "--variant", "PCGN",
        "--epochs", str(args.epochs),
        "--seed", str(args.seed),
    ])

    users = json.loads((data / "users.json").read_text(encoding="utf-8"))
    user_ids = sorted(users)
    guest = dict(users[user_ids[0]], user_id="guest")

    print(f"\nblog: {args.blog!r}")
    print(f"users: {', '.join(user_ids)} + guest (clone of {user_ids[0]})\n")
    generate = [
        "generate",
        "--checkpoint", str(train / "checkpoint_final.json"),
        "--data-dir", str(data),
        "--blog", args.blog,
        "--top", str(args.top),
        "--json", str(args.out / "case_study.json"),
    ]
    for uid in user_ids:
        generate += ["--user", uid]
    generate += ["--user-json", json.dumps(guest)]
    run(generate)
    print(f"\ntranscript: {args.out / 'case_study.json'}")


if __name__ == "__main__":
    main()
