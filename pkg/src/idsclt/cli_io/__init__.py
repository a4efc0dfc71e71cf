from .config import SCHEMA, RunConfig, apply_overrides, canonical_hash, load_config, parse_config
from .export import CSV_COLUMNS, decay_plot, export_csv, export_json, qq_plot, scaling_plot
from .persist import ChunkBudget, Interrupted, ShardStore, dumps, ensemble_hash, run_sharded
