"""Append-only on-disk store of precomputed latent targets.

One split = ``<split>.targets.bin`` (little-endian float64 rows) plus
``<split>.manifest.jsonl`` (one record per write). Later records for the same
key shadow earlier ones.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np


class TargetCacheError(RuntimeError):
    pass


def cache_key(sample_id: str, stage: str, k: int, encoder_seed: int) -> str:
    return f"{sample_id}|{stage}|{k}|{encoder_seed}"


class TargetCache:
    def __init__(self, root, split: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.bin_path = self.root / f"{split}.targets.bin"
        self.manifest_path = self.root / f"{split}.manifest.jsonl"
        self._index: dict[str, dict] = {}
        self._load_manifest()

    def _load_manifest(self):
        if not self.manifest_path.exists():
            return
        size = self.bin_path.stat().st_size if self.bin_path.exists() else 0
        with open(self.manifest_path) as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TargetCacheError(f"{self.manifest_path}:{n}: corrupt manifest line") from e
                if rec["offset"] + rec["k"] * rec["d"] * 8 > size:
                    raise TargetCacheError(f"{self.manifest_path}:{n}: record points past end of data file")
                self._index[cache_key(rec["id"], rec["stage"], rec["k"], rec["seed"])] = rec

    def __contains__(self, key) -> bool:
        return cache_key(*key) in self._index

    def __len__(self):
        return len(self._index)

    def put(self, sample_id: str, stage: str, encoder_seed: int, values: np.ndarray):
        values = np.asarray(values, dtype="<f8")
        if values.ndim != 2 or not np.all(np.isfinite(values)):
            raise TargetCacheError(f"targets for {sample_id} must be a finite [K, d] array")
        with open(self.bin_path, "ab") as fh:
            offset = fh.tell()
            fh.write(values.tobytes())
            fh.flush()
            os.fsync(fh.fileno())
        rec = {"id": sample_id, "stage": stage, "k": int(values.shape[0]), "d": int(values.shape[1]),
               "seed": int(encoder_seed), "offset": offset}
        with open(self.manifest_path, "a") as fh:
            fh.write(json.dumps(rec) + "\n")
        self._index[cache_key(sample_id, stage, rec["k"], encoder_seed)] = rec

    def get(self, sample_id: str, stage: str, k: int, encoder_seed: int) -> np.ndarray:
        rec = self._index.get(cache_key(sample_id, stage, k, encoder_seed))
        if rec is None:
            raise KeyError((sample_id, stage, k, encoder_seed))
        n = rec["k"] * rec["d"]
        with open(self.bin_path, "rb") as fh:
            fh.seek(rec["offset"])
            buf = fh.read(n * 8)
        return np.frombuffer(buf, dtype="<f8").reshape(rec["k"], rec["d"]).astype(np.float64)
