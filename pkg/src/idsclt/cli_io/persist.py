"""Append-only JSON shards of ensemble results, keyed by (ensemble hash, sample range)."""
from __future__ import annotations

import json
import os
import platform
import re
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..errors import EmptyDataError, ShardMismatchError
from ..experiments.ensemble import EnsembleResult, EnsembleSpec, PreparedBox, merge_results, run_ensemble
from .config import canonical_hash

_SHARD = re.compile(r"^shard_([0-9a-f]{16})_(\d{8})_(\d{8})\.json$")


def ensemble_hash(spec: EnsembleSpec) -> str:
    """Hash of everything that determines T_j; the sample count is excluded so ranges stay valid."""
    desc = dict(spec.describe())
    desc.pop("n_samples")
    return canonical_hash(desc)


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, shortest round-trip floats."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class ShardStore:
    """One directory per ensemble; every shard in it must carry the same ensemble hash."""

    def __init__(self, directory, key: str):
        self.dir = Path(directory)
        self.key = key

    def shards(self) -> list:
        """(start, stop, path) for every shard, refusing foreign ones."""
        if not self.dir.exists():
            return []
        out = []
        for p in sorted(self.dir.iterdir()):
            m = _SHARD.match(p.name)
            if not m:
                continue
            if m.group(1) != self.key:
                raise ShardMismatchError(self.key, m.group(1))
            out.append((int(m.group(2)), int(m.group(3)), p))
        return out

    def covered(self) -> set:
        done = set()
        for a, b, _ in self.shards():
            done.update(range(a, b))
        return done

    def write(self, result: EnsembleResult) -> Path:
        if result.n == 0:
            raise EmptyDataError("refusing to write an empty shard")
        a, b = int(result.indices[0]), int(result.indices[-1]) + 1
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"shard_{self.key}_{a:08d}_{b:08d}.json"
        if path.exists():
            raise FileExistsError(f"shard {path.name} already exists (shards are append-only)")
        payload = {"key": self.key, "start": a, "stop": b, **result.to_dict()}
        write_atomic(path, dumps(payload))
        return path

    def load(self, stop: int | None = None) -> EnsembleResult:
        parts = []
        for a, b, p in self.shards():
            data = json.loads(p.read_text())
            if data["key"] != self.key:
                raise ShardMismatchError(self.key, data["key"])
            parts.append(EnsembleResult.from_dict(data))
        if not parts:
            raise EmptyDataError(f"no shards in {self.dir}")
        res = merge_results(parts)
        if stop is not None:
            keep = res.indices < stop
            res = EnsembleResult(res.traces[keep], res.indices[keep], res.seed, res.volume, res.L, res.bc, res.spec)
        return res

    def clear(self) -> None:
        """Remove every shard in the directory, whatever ensemble it belongs to."""
        if self.dir.exists():
            for p in self.dir.iterdir():
                if _SHARD.match(p.name):
                    p.unlink()


class Interrupted(RuntimeError):
    """Raised when a chunk budget stops an ensemble before completion."""


class ChunkBudget:
    """Shared count of chunks that may still be computed; None means unlimited."""

    def __init__(self, left: int | None = None):
        self.left = left

    def take(self) -> bool:
        if self.left is None:
            return True
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def run_sharded(spec: EnsembleSpec, directory, chunk: int = 250, resume: bool = False,
                budget: ChunkBudget | int | None = None, threads: int = 1) -> EnsembleResult:
    """Compute missing sample ranges chunk by chunk, persisting each chunk before the next."""
    store = ShardStore(directory, ensemble_hash(spec))
    if not resume:
        store.clear()
    done = store.covered()
    prep = None
    if not isinstance(budget, ChunkBudget):
        budget = ChunkBudget(budget)
    for a in range(0, spec.n_samples, chunk):
        b = min(a + chunk, spec.n_samples)
        if all(j in done for j in range(a, b)):
            continue
        missing = [j for j in range(a, b) if j not in done]
        if not budget.take():
            raise Interrupted(f"stopped before samples {missing[0]}..{b - 1} of {spec.n_samples}")
        prep = prep or PreparedBox(spec)
        # contiguous runs of missing samples inside this chunk
        runs, s = [], missing[0]
        for x, y in zip(missing, missing[1:] + [None]):
            if y != x + 1:
                runs.append((s, x + 1))
                s = y
        for s0, s1 in runs:
            store.write(run_ensemble(spec, start=s0, stop=s1, threads=threads, prepared=prep))
    return store.load(stop=spec.n_samples)


def environment_fingerprint() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "machine": platform.machine(), "system": platform.system()}


def code_version() -> str:
    return __version__
