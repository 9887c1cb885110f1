#!/usr/bin/env python3
import argparse
import json
import time
from dataclasses import dataclass

from spfh.app.logging_setup import setup_logging
from spfh.engine.expr import div, ident, sym, twist
from spfh.engine.field import field_for_size
from spfh.engine.fqcat import TruncCat, cat_ext_expr
from spfh.engine.homalg import ext_expr, orbit_sum_ext
from spfh.engine.oracle import e_infty_ext, ffss_series


@dataclass
class SmokeConfig:
    p: int
    max_degree: int
    log_level: str


def smoke(cfg: SmokeConfig) -> dict:
    f = field_for_size(cfg.p)
    I1 = twist(ident(), 1)
    top = cfg.max_degree
    out = {"field": f.describe(), "max_degree": top}

    t0 = time.perf_counter()
    out["ext_twisted_identity"] = list(ext_expr(I1, I1, 2, f, top).dims)
    out["orbit_sum_twisted_identity"] = list(orbit_sum_ext(I1, I1, 2, f, top))
    out["ext_div2_sym2"] = list(ext_expr(div(2), sym(2), 2, f, top).dims)
    out["ffss_gs_weight1"] = list(ffss_series("GS", 1, 1, cfg.p, max_degree=top, max_weight=1).at_weight(1))
    out["e_infty_sym2"] = list(e_infty_ext(sym(2), 2 * top, p=cfg.p).dims)
    if cfg.p == 2:
        # hom in the truncated category sees the Frobenius; the strict hom space does not
        out["cat_hom_sym1_sym_p"] = list(cat_ext_expr(sym(1), sym(cfg.p), TruncCat(cfg.p, 2), 0).dims)
    out["seconds"] = round(time.perf_counter() - t0, 3)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--max-degree", type=int, default=2)
    ap.add_argument("--log-level", default="WARNING")
    args = ap.parse_args()

    cfg = SmokeConfig(p=args.p, max_degree=args.max_degree, log_level=args.log_level)
    setup_logging(cfg.log_level)
    print(json.dumps(smoke(cfg), indent=2))


if __name__ == "__main__":
    main()
