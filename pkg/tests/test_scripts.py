from scripts.smoke_engine import SmokeConfig, smoke
from scripts.warm_cache import WarmConfig, warm
from spfh.app.cache import ResolutionCache


def test_smoke_headline_values():
    out = smoke(SmokeConfig(p=2, max_degree=2, log_level="WARNING"))
    assert out["ext_twisted_identity"] == [1, 0, 1]
    assert out["orbit_sum_twisted_identity"] == [1, 0, 1]
    assert out["cat_hom_sym1_sym_p"] == [1]


def test_warm_cache_stores_and_skips(tmp_path):
    cache_dir = str(tmp_path / "cache")
    cfg = WarmConfig(exprs=["twist(id,1)", "sym(1) + sym(2)", "sym("], q=2, n=0, length=2, policy="dominance", cache_dir=cache_dir)
    entries = warm(cfg)
    assert entries[0]["expr"] == "twist(id,1)"
    assert entries[0]["length"] == 2
    assert entries[1]["skipped"] == "inhomogeneous"
    assert entries[2]["error"]["code"] == "expression"

    cache = ResolutionCache(cache_dir=cache_dir)
    try:
        assert [e["expr"] for e in cache.entries()] == ["twist(id,1)"]
    finally:
        cache.close()
