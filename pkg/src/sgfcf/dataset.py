"""Interaction log ingestion, ID assignment, and train/val/test splitting.

Input files are plain text with one interaction per line
(``<user_token> <item_token> [ignored...]``, whitespace- or
comma-delimited). Tokens are mapped to dense zero-based integer ids in
order of first appearance, and splits are reproducible given a seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateSplit, MalformedLine, MissingFile

FORMATS = ("tsv_pairs", "csv_pairs")
STRATEGIES = ("per_user", "global")


@dataclass(frozen=True)
class InteractionLog:
    """Deduplicated (user_token, item_token) pairs in file order."""

    records: list[tuple[str, str]]
    source_path: str
    duplicates_dropped: int = 0

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class IdMaps:
    """Dense zero-based bijections between tokens and integer ids."""

    user_index: dict[str, int]
    item_index: dict[str, int]

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    def user_tokens(self) -> list[str]:
        out = [""] * len(self.user_index)
        for tok, idx in self.user_index.items():
            out[idx] = tok
        return out

    def item_tokens(self) -> list[str]:
        out = [""] * len(self.item_index)
        for tok, idx in self.item_index.items():
            out[idx] = tok
        return out


@dataclass(frozen=True)
class SplitConfig:
    """Ratio-based split parameters. Remaining fraction after train and
    validation goes to test."""

    train_ratio: float
    val_ratio: float = 0.0
    seed: int = 0
    strategy: str = "per_user"

    def __post_init__(self):
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError(f"train_ratio must be in (0,1), got {self.train_ratio}")
        if not 0.0 <= self.val_ratio < 1.0:
            raise ConfigError(f"val_ratio must be in [0,1), got {self.val_ratio}")
        if self.train_ratio + self.val_ratio >= 1.0:
            raise ConfigError(
                f"train_ratio + val_ratio must be < 1, got "
                f"{self.train_ratio} + {self.val_ratio}"
            )
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown split strategy {self.strategy!r}")


@dataclass(frozen=True)
class InteractionDataset:
    """Disjoint train/val/test pair arrays plus the id maps that produced
    them. Arrays have shape (n, 2) with columns (user_id, item_id)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    id_maps: IdMaps
    seed: int = 0
    split_config: SplitConfig | None = field(default=None, compare=False)

    @property
    def n_users(self) -> int:
        return self.id_maps.n_users

    @property
    def n_items(self) -> int:
        return self.id_maps.n_items

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n_users, self.n_items, len(self.train))


def ingest(path: str, format: str = "tsv_pairs") -> InteractionLog:
    """Read an interaction file, dropping duplicate pairs (first kept).

    Raises MissingFile if the path does not exist and MalformedLine for
    any non-empty line with fewer than two fields or an empty token.
    Fields beyond the first two (e.g. timestamps) are ignored.
    """
    if format not in FORMATS:
        raise ConfigError(f"unknown format {format!r}, expected one of {FORMATS}")
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    sep = "," if format == "csv_pairs" else None
    records: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(sep)
            if len(fields) < 2:
                raise MalformedLine(line_no, f"expected at least 2 fields, got {len(fields)}")
            user, item = fields[0].strip(), fields[1].strip()
            if not user or not item:
                raise MalformedLine(line_no, "empty user or item token")
            pair = (user, item)
            if pair in seen:
                dropped += 1
                continue
            seen.add(pair)
            records.append(pair)
    return InteractionLog(records=records, source_path=path, duplicates_dropped=dropped)


def build_id_maps(log: InteractionLog) -> IdMaps:
    """Assign dense ids in order of first appearance."""
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    for user, item in log.records:
        if user not in user_index:
            user_index[user] = len(user_index)
        if item not in item_index:
            item_index[item] = len(item_index)
    return IdMaps(user_index=user_index, item_index=item_index)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(log: InteractionLog, cfg: SplitConfig) -> InteractionDataset:
    """Split a log into disjoint train/val/test pair sets.

    The default strategy is per-user stratified: for each user,
    round(train_ratio * n) interactions go to train (at least one),
    round(val_ratio * n) to validation, and the remainder to test.
    The ``global`` strategy shuffles all pairs once and slices by the
    same rounded ratios. Deterministic given cfg.seed.
    """
    if len(log) == 0:
        raise DegenerateSplit("cannot split an empty interaction log")
    id_maps = build_id_maps(log)
    pairs = np.array(
        [(id_maps.user_index[u], id_maps.item_index[i]) for u, i in log.records],
        dtype=np.int64,
    )
    rng = np.random.default_rng(cfg.seed)

    if cfg.strategy == "global":
        perm = rng.permutation(len(pairs))
        n_train = max(1, _round_half_up(cfg.train_ratio * len(pairs)))
        n_val = min(_round_half_up(cfg.val_ratio * len(pairs)), len(pairs) - n_train)
        train_idx = perm[:n_train]
        val_idx = perm[n_train : n_train + n_val]
        test_idx = perm[n_train + n_val :]
    else:
        order = np.argsort(pairs[:, 0], kind="stable")
        boundaries = np.searchsorted(pairs[order, 0], np.arange(id_maps.n_users + 1))
        train_parts, val_parts, test_parts = [], [], []
        for u in range(id_maps.n_users):
            idx = order[boundaries[u] : boundaries[u + 1]]
            n = len(idx)
            perm = idx[rng.permutation(n)]
            n_train = _round_half_up(cfg.train_ratio * n)
            if n_train == 0:
                n_train = 1
            n_train = min(n_train, n)
            n_val = min(_round_half_up(cfg.val_ratio * n), n - n_train)
            train_parts.append(perm[:n_train])
            val_parts.append(perm[n_train : n_train + n_val])
            test_parts.append(perm[n_train + n_val :])
        train_idx = np.concatenate(train_parts)
        val_idx = np.concatenate(val_parts) if val_parts else np.empty(0, dtype=np.int64)
        test_idx = np.concatenate(test_parts) if test_parts else np.empty(0, dtype=np.int64)

    dataset = InteractionDataset(
        train=pairs[np.sort(train_idx)],
        val=pairs[np.sort(val_idx)],
        test=pairs[np.sort(test_idx)],
        id_maps=id_maps,
        seed=cfg.seed,
        split_config=cfg,
    )
    if cfg.val_ratio > 0 and len(dataset.val) == 0:
        raise DegenerateSplit("validation ratio > 0 but validation split is empty")
    if cfg.train_ratio + cfg.val_ratio < 1.0 and len(dataset.test) == 0:
        raise DegenerateSplit("test fraction > 0 but test split is empty")
    return dataset


def dataset_from_pairs(
    train,
    val=(),
    test=(),
    n_users: int | None = None,
    n_items: int | None = None,
    seed: int = 0,
) -> InteractionDataset:
    """Build a dataset directly from integer pair lists (testing and
    synthetic-data convenience; ids must already be dense)."""

    def as_array(p):
        arr = np.asarray(list(p), dtype=np.int64)
        return arr.reshape(-1, 2) if arr.size else np.empty((0, 2), dtype=np.int64)

    train_a, val_a, test_a = as_array(train), as_array(val), as_array(test)
    stacked = np.vstack([a for a in (train_a, val_a, test_a) if len(a)])
    if n_users is None:
        n_users = int(stacked[:, 0].max()) + 1
    if n_items is None:
        n_items = int(stacked[:, 1].max()) + 1
    id_maps = IdMaps(
        user_index={str(u): u for u in range(n_users)},
        item_index={str(i): i for i in range(n_items)},
    )
    return InteractionDataset(train=train_a, val=val_a, test=test_a, id_maps=id_maps, seed=seed)


def save_manifest(dataset: InteractionDataset, path: str) -> None:
    """Write the split manifest as JSON."""
    manifest = {
        "users": dataset.n_users,
        "items": dataset.n_items,
        "train": dataset.train.tolist(),
        "val": dataset.val.tolist(),
        "test": dataset.test.tolist(),
        "seed": dataset.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)


def load_manifest(path: str) -> InteractionDataset:
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return dataset_from_pairs(
        manifest["train"],
        manifest.get("val", ()),
        manifest.get("test", ()),
        n_users=manifest["users"],
        n_items=manifest["items"],
        seed=manifest.get("seed", 0),
    )
