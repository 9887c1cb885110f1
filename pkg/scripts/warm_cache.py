#!/usr/bin/env python3
import argparse
import json
import time
from dataclasses import dataclass
from typing import List

from spfh.app.cache import ResolutionCache
from spfh.app.config import settings
from spfh.app.logging_setup import setup_logging
from spfh.engine.errors import SpfhError
from spfh.engine.expr import parse
from spfh.engine.field import field_for_size
from spfh.engine.polyfun import evaluate


@dataclass
class WarmConfig:
    exprs: List[str]
    q: int
    n: int
    length: int
    policy: str
    cache_dir: str


def warm(cfg: WarmConfig) -> List[dict]:
    f = field_for_size(cfg.q)
    cache = ResolutionCache(cache_dir=cfg.cache_dir)
    results = []
    try:
        for text in cfg.exprs:
            t0 = time.perf_counter()
            try:
                e = parse(text)
                n = cfg.n or max(e.max_degree(f.p), 1)
                M = evaluate(e, n, f)
                if len(M.degrees) != 1:
                    results.append({"expr": text, "skipped": "inhomogeneous"})
                    continue
                res = cache.resolve(e, M, cfg.length, policy=cfg.policy)
            except SpfhError as exc:
                results.append({"expr": text, "error": exc.to_dict()})
                continue
            results.append(
                {
                    "expr": e.text(),
                    "n": n,
                    "length": res.length,
                    "dims": [s["dim"] for s in res.summary()],
                    "seconds": round(time.perf_counter() - t0, 3),
                }
            )
    finally:
        cache.close()
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("exprs", nargs="+", help='functor expressions, e.g. "twist(id,1)" "sym(2)"')
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--n", type=int, default=0, help="rank; 0 means the expression's degree")
    ap.add_argument("--length", type=int, default=4)
    ap.add_argument("--policy", choices=["dominance", "reverse"], default="dominance")
    ap.add_argument("--cache-dir", default=settings.cache_dir)
    ap.add_argument("--log-level", default=settings.log_level)
    args = ap.parse_args()

    cfg = WarmConfig(
        exprs=args.exprs,
        q=args.q,
        n=args.n,
        length=args.length,
        policy=args.policy,
        cache_dir=args.cache_dir,
    )
    setup_logging(args.log_level)
    print(json.dumps({"cache_dir": cfg.cache_dir, "entries": warm(cfg)}, indent=2))


if __name__ == "__main__":
    main()
