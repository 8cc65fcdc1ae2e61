"""Initial per-column feature vectors: global statistics plus character-level distributions.

Each column gets a fixed 588-dim vector (12 global stats + 96 characters x 6 aggregates),
z-normalized across the corpus before feeding the graph model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from joinscope.repo import Column, tokenize

# TAB plus printable ASCII 32..126.
PROFILE_CHARS = [chr(9)] + [chr(c) for c in range(32, 127)]
_CHAR_POS = {c: i for i, c in enumerate(PROFILE_CHARS)}

N_GLOBAL_STATS = 12
N_CHAR_FEATURES = len(PROFILE_CHARS) * 6
PROFILE_DIM = N_GLOBAL_STATS + N_CHAR_FEATURES


@dataclass
class ColumnProfile:
    node_id: int
    features: np.ndarray


def _is_numeric_cell(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def _is_alpha_cell(v: str) -> bool:
    stripped = v.replace(" ", "")
    return bool(stripped) and stripped.isalpha()


def global_stats(col: Column) -> np.ndarray:
    """12 high-level aggregates of the column's non-missing values."""
    vals = col.values
    out = np.zeros(N_GLOBAL_STATS)
    if not vals:
        return out
    lengths = np.array([len(v) for v in vals], dtype=float)
    n = len(vals)
    out[0] = n
    out[1] = len(col.distinct_values)
    out[2] = out[1] / n
    out[3] = sum(_is_numeric_cell(v) for v in vals) / n
    out[4] = sum(_is_alpha_cell(v) for v in vals) / n
    out[5] = sum(any(ch.isdigit() for ch in v) for v in vals) / n
    out[6] = lengths.mean()
    out[7] = lengths.std()
    out[8] = lengths.min()
    out[9] = lengths.max()
    out[10] = col.n_missing / col.n_raw if col.n_raw else 0.0
    out[11] = sum(len(tokenize(v)) for v in vals) / n
    return out


def char_distributions(col: Column) -> np.ndarray:
    """Per tracked character: [any, mean, std, min, max, sum] of its per-cell counts."""
    if not col.values:
        return np.zeros(N_CHAR_FEATURES)
    counts = np.zeros((len(col.values), len(PROFILE_CHARS)))
    for row, v in enumerate(col.values):
        for ch in v:
            pos = _CHAR_POS.get(ch)
            if pos is not None:
                counts[row, pos] += 1
    feats = np.empty((len(PROFILE_CHARS), 6))
    feats[:, 0] = (counts.sum(axis=0) > 0).astype(float)
    feats[:, 1] = counts.mean(axis=0)
    feats[:, 2] = counts.std(axis=0)
    feats[:, 3] = counts.min(axis=0)
    feats[:, 4] = counts.max(axis=0)
    feats[:, 5] = counts.sum(axis=0)
    return feats.reshape(-1)


def profile_column(col: Column) -> ColumnProfile:
    features = np.concatenate([global_stats(col), char_distributions(col)])
    return ColumnProfile(node_id=col.node_id, features=features)


def profile_repository(columns: list[Column]) -> list[ColumnProfile]:
    return [profile_column(c) for c in columns]


@dataclass
class ProfileNormalizer:
    """Affine z-score transform fitted on the training node set and reused at inference."""
    mean: np.ndarray
    scale: np.ndarray  # 1/std, or 0 for zero-variance dimensions
    clip: float = 0.0  # 0 disables clipping

    def apply(self, features: np.ndarray) -> np.ndarray:
        z = (features - self.mean) * self.scale
        if self.clip > 0:
            z = np.clip(z, -self.clip, self.clip)
        return z


def fit_normalizer(profiles: list[ColumnProfile], std_floor_fraction: float = 0.0,
                   clip: float = 0.0) -> ProfileNormalizer:
    """Plain per-dimension z-score by default.

    `std_floor_fraction` floors each denominator at that fraction of the mean nonzero
    std, and `clip` bounds the outputs; together they keep near-constant dimensions
    (e.g. rare characters introduced by typos) from dominating distances when the
    transform feeds a distance-based model.
    """
    if not profiles:
        raise ValueError("need at least one profile")
    X = np.stack([p.features for p in profiles])
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    floored = std
    if std_floor_fraction > 0:
        active = std[std > 0]
        if active.size:
            floored = np.maximum(std, std_floor_fraction * active.mean())
    scale = np.where(std > 0, 1.0 / np.where(floored > 0, floored, 1.0), 0.0)
    return ProfileNormalizer(mean=mean, scale=scale, clip=clip)


def normalize_profiles(profiles: list[ColumnProfile],
                       normalizer: ProfileNormalizer | None = None) -> list[ColumnProfile]:
    """Z-score each dimension across the profile set (or apply a pre-fitted transform)."""
    if normalizer is None:
        normalizer = fit_normalizer(profiles)
    return [ColumnProfile(p.node_id, normalizer.apply(p.features)) for p in profiles]


def save_profile_cache(profiles: list[ColumnProfile], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in profiles:
            rec = {"node_id": p.node_id, "features": [float(x) for x in p.features]}
            f.write(json.dumps(rec) + "\n")


def load_profile_cache(path: str | Path) -> list[ColumnProfile]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append(ColumnProfile(rec["node_id"], np.array(rec["features"])))
    return out
