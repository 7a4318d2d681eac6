"""Sweep seeded random markets, compare check_na with the brute-force oracle.

    python scripts/ftap_sweep.py --count 200 [--kernel] [--options 1]
"""

import argparse
import time
from collections import Counter

from robust_ftap.arbitrage import check_na, check_sna, validate_arbitrage
from robust_ftap.generate import generate, suite_config
from robust_ftap.oracles import oracle_na


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--start", type=int, default=0)
    ap.add_argument("--kernel", action="store_true")
    ap.add_argument("--options", type=int, default=0)
    ap.add_argument("--sna", action="store_true", help="also decide sensitive no-arbitrage")
    args = ap.parse_args()

    tally = Counter()
    solve = 0.0
    for seed in range(args.start, args.start + args.count):
        m = generate(suite_config(seed, kernel=args.kernel, options=args.options))
        t0 = time.perf_counter()
        v = check_na(m)
        solve += time.perf_counter() - t0
        o = oracle_na(m)
        tally["NA" if v.ok else "arbitrage"] += 1
        if v.ok != o.na:
            tally["disagree"] += 1
            print(f"seed {seed}: check_na {v.ok}, oracle {o.na}")
        if not v.ok and not validate_arbitrage(m, v.witness):
            tally["bad witness"] += 1
        if args.sna and v.ok:
            tally["sNA" if check_sna(m).ok else "sNA fails"] += 1
    print(dict(sorted(tally.items())), f"check_na time {solve:.2f}s")


if __name__ == "__main__":
    main()
