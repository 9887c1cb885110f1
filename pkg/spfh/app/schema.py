SCHEMA_SQL = """
PRAGMA foreign_keys = ON;

-- resolution cache index; the envelope files live under cache_dir

CREATE TABLE IF NOT EXISTS cache_entries (
  key        TEXT PRIMARY KEY,               -- sha256 of field | expression | n | policy version
  path       TEXT NOT NULL,                  -- envelope file, relative to cache_dir
  field      TEXT NOT NULL,                  -- 'GF(2)', 'GF(2^2)', ...
  expr       TEXT NOT NULL,                  -- canonical expression text
  n          INTEGER NOT NULL,
  policy     TEXT NOT NULL,                  -- 'dominance' | 'reverse'
  length     INTEGER NOT NULL,               -- resolution length stored
  bytes      INTEGER NOT NULL,
  created_at TEXT NOT NULL DEFAULT (datetime('now'))
);

CREATE INDEX IF NOT EXISTS idx_cache_entries_expr
ON cache_entries(expr, field);

-- one row per CLI run

CREATE TABLE IF NOT EXISTS job_runs (
  run_id         TEXT PRIMARY KEY,            -- UUID string
  command        TEXT NOT NULL,
  job_json       TEXT NOT NULL,
  engine_version TEXT NOT NULL,
  exit_code      INTEGER NOT NULL,
  rows           INTEGER NOT NULL DEFAULT 0,
  created_at     TEXT NOT NULL DEFAULT (datetime('now'))
);

CREATE INDEX IF NOT EXISTS idx_job_runs_command
ON job_runs(command, created_at);
"""
