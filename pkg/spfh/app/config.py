from typing import List
import json

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="SPFH_",
        extra="ignore",
    )

    app_name: str = "spfh"
    app_env: str = "dev"
    log_level: str = "INFO"

    database_url: str = "sqlite:///./data/spfh.db"
    cache_dir: str = "./data/cache"
    results_dir: str = "./data/results"

    # engine caps
    max_degree: int = 10
    block_cap: int = 200_000
    verify_max_degree: int = 4
    max_field_size: int = 1 << 16
    # largest truncation N of the finite-field category, at q = 2 and at q = 3, 4
    max_truncation_q2: int = 4
    max_truncation_other: int = 3

    workers: int = 1

    # read raw string from env (works with comma-separated values)
    fq_sizes: str = "2,3,4"

    @property
    def fq_sizes_list(self) -> List[int]:
        s = (self.fq_sizes or "").strip()
        if not s:
            return []
        if s.startswith("["):
            # also accept JSON list
            return [int(x) for x in json.loads(s)]
        return [int(part.strip()) for part in s.split(",") if part.strip()]

    def max_truncation(self, q: int) -> int:
        return self.max_truncation_q2 if q == 2 else self.max_truncation_other


settings = Settings()
