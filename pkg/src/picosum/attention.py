"""Global-attention settings, padding masks and a local+global attention kernel.

The kernel follows the Longformer pattern: every token attends to ``w/2``
neighbours on each side, global tokens attend to and are attended by every
unpadded token, and padded tokens take part in nothing. It works on the band
plus the global rows/columns and never builds the ``n x n`` score matrix.
:func:`dense_attention_oracle` is the brute-force reference it is tested against.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from picosum.packing import PackedInput


class Setting(str, enum.Enum):
    DOC_SEP = "DocSep"
    ENT_MARKERS = "EntMarkers"
    ENT_MARKERS_SPANS = "EntMarkersSpans"
    ENT_SPANS = "EntSpans"
    ENT_ONLY = "EntOnly"


ENTITY_SETTINGS = frozenset(Setting) - {Setting.DOC_SEP}


class MaskError(ValueError):
    pass


class AttentionTensors(NamedTuple):
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray

    @classmethod
    def random(cls, n: int, d: int, rng: np.random.Generator) -> "AttentionTensors":
        return cls(*(rng.standard_normal((n, d)) for _ in range(3)))


@dataclass(frozen=True)
class AttentionConfig:
    setting: Setting = Setting.DOC_SEP
    window: int = 512

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting(self.setting))
        if self.window < 2 or self.window % 2:
            raise ValueError(f"window must be even and >= 2, got {self.window}")


@dataclass
class AttentionMasks:
    global_mask: np.ndarray
    pad_mask: np.ndarray

    def __post_init__(self):
        self.global_mask = np.asarray(self.global_mask, dtype=bool)
        self.pad_mask = np.asarray(self.pad_mask, dtype=bool)
        if self.global_mask.shape != self.pad_mask.shape or self.global_mask.ndim != 1:
            raise MaskError("global_mask and pad_mask must be 1-d and of equal length")
        if np.any(self.global_mask & self.pad_mask):
            raise MaskError("a position cannot be both global and padded")

    def __len__(self) -> int:
        return len(self.global_mask)

    def global_positions(self) -> set[int]:
        return set(np.flatnonzero(self.global_mask).tolist())

    def pad_positions(self) -> set[int]:
        return set(np.flatnonzero(self.pad_mask).tolist())

    def to_record(self, review_id: str) -> dict:
        return {
            "review_id": review_id,
            "global_mask": self.global_mask.astype(int).tolist(),
            "pad_mask": self.pad_mask.astype(int).tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "AttentionMasks":
        return cls(np.array(record["global_mask"], dtype=bool), np.array(record["pad_mask"], dtype=bool))


def write_masks(items: Iterable[tuple[str, AttentionMasks]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for review_id, masks in items:
            fh.write(json.dumps(masks.to_record(review_id), separators=(",", ":")) + "\n")


def _entity_layout(packed: PackedInput) -> tuple[np.ndarray, np.ndarray]:
    """Boolean arrays marking marker tokens and in-span tokens."""
    ids = np.asarray(packed.token_ids)
    sp = packed.special_ids
    markers = (ids == sp["ent_open"]) | (ids == sp["ent_close"])
    entity = np.zeros(len(ids), dtype=bool)
    if packed.entity_token_positions:
        entity[np.asarray(packed.entity_token_positions)] = True
    if np.any(markers & ~entity):
        raise MaskError(f"{packed.review_id}: entity_token_positions omit marker tokens")
    return markers, entity & ~markers


def build_masks(packed: PackedInput, config: AttentionConfig) -> AttentionMasks:
    setting = Setting(config.setting)
    ids = np.asarray(packed.token_ids)
    sep = ids == packed.special_ids["doc_sep"]
    if setting is Setting.DOC_SEP:
        return AttentionMasks(sep, np.zeros(len(ids), dtype=bool))
    if not packed.marking:
        raise MaskError(f"{setting.value} needs entity markers, but {packed.review_id} was packed without marking")

    markers, spans = _entity_layout(packed)
    pad = np.zeros(len(ids), dtype=bool)
    if setting is Setting.ENT_MARKERS:
        glob = sep | markers
    elif setting is Setting.ENT_MARKERS_SPANS:
        glob = sep | markers | spans
    elif setting is Setting.ENT_SPANS:
        glob = sep | spans
        pad = markers.copy()
    else:
        glob = sep | spans
        pad = ~glob
    return AttentionMasks(glob, pad)


def replace_padded_ids(packed: PackedInput, masks: AttentionMasks) -> list[int]:
    """Token ids with every padded position swapped for the pad id."""
    pad_id = packed.special_ids["pad"]
    return [pad_id if p else t for t, p in zip(packed.token_ids, masks.pad_mask.tolist())]


def masks_to_dense(masks: AttentionMasks, window: int, n: int | None = None) -> np.ndarray:
    n = len(masks) if n is None else n
    if len(masks) != n:
        raise MaskError(f"mask length {len(masks)} does not match n={n}")
    idx = np.arange(n)
    band = np.abs(idx[:, None] - idx[None, :]) <= window // 2
    g = masks.global_mask
    live = ~masks.pad_mask
    return (band | g[:, None] | g[None, :]) & live[:, None] & live[None, :]


def _check_tensors(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> None:
    if q.ndim != 2 or k.shape != q.shape or v.ndim != 2 or v.shape[0] != q.shape[0]:
        raise ValueError(f"inconsistent shapes Q{q.shape} K{k.shape} V{v.shape}")
    if q.shape[1] == 0:
        raise ValueError("head dimension must be positive")
    for name, t in (("Q", q), ("K", k), ("V", v)):
        if not np.all(np.isfinite(t)):
            raise ValueError(f"{name} contains non-finite entries")


def _masked_softmax(scores: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Row softmax over allowed entries; rows with none allowed become zeros."""
    scores = np.where(allowed, scores, -np.inf)
    row_max = scores.max(axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.where(allowed, np.exp(scores - row_max), 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    return np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)


def dense_attention_oracle(q, k, v, allowed) -> np.ndarray:
    """Masked scaled dot-product attention over the full score matrix."""
    q, k, v = (np.asarray(t, dtype=np.float64) for t in (q, k, v))
    _check_tensors(q, k, v)
    allowed = np.asarray(allowed, dtype=bool)
    n = q.shape[0]
    if allowed.shape != (n, n):
        raise ValueError(f"allowed must be {n}x{n}, got {allowed.shape}")
    scores = q @ k.T / math.sqrt(q.shape[1])
    out = np.zeros((n, v.shape[1]))
    # row by row on purpose: kept independent of the kernel's vectorised softmax
    for i in range(n):
        cols = np.flatnonzero(allowed[i])
        if len(cols) == 0:
            continue
        row = scores[i, cols]
        w = np.exp(row - row.max())
        out[i] = (w / w.sum()) @ v[cols]
    return out


def local_global_attention(q, k, v, masks: AttentionMasks, window: int, return_weights: bool = False):
    """Sliding-window attention plus global attention, without the n x n scores.

    Non-global rows score their ``window + 1`` band slots and the global
    columns (global columns inside the band are scored once, in the global
    block). Global rows score every column. With ``return_weights`` the
    attention weights are also returned, scattered into a dense matrix for
    inspection.
    """
    q, k, v = (np.asarray(t, dtype=np.float64) for t in (q, k, v))
    _check_tensors(q, k, v)
    n, d = q.shape
    if len(masks) != n:
        raise MaskError(f"mask length {len(masks)} does not match sequence length {n}")
    if window < 2 or window % 2:
        raise ValueError(f"window must be even and >= 2, got {window}")
    scale = 1.0 / math.sqrt(d)
    half = window // 2
    glob = masks.global_mask
    live = ~masks.pad_mask
    gidx = np.flatnonzero(glob)

    # band slots: column i + off for off in [-half, half]
    offsets = np.arange(-half, half + 1)
    cols = np.arange(n)[:, None] + offsets[None, :]
    in_range = (cols >= 0) & (cols < n)
    cols_c = np.clip(cols, 0, n - 1)
    band_ok = in_range & live[cols_c] & ~glob[cols_c] & live[:, None]
    band_scores = np.einsum("nd,nwd->nw", q, k[cols_c]) * scale

    g_scores = q @ k[gidx].T * scale
    g_ok = np.broadcast_to(live[gidx][None, :] & live[:, None], g_scores.shape)

    scores = np.concatenate([g_scores, band_scores], axis=1)
    ok = np.concatenate([g_ok, band_ok], axis=1)
    probs = _masked_softmax(scores, ok)
    out = probs[:, : len(gidx)] @ v[gidx] + np.einsum("nw,nwd->nd", probs[:, len(gidx):], v[cols_c])

    # global rows see every live column
    full_rows = gidx[live[gidx]]
    if len(full_rows):
        row_scores = q[full_rows] @ k.T * scale
        row_ok = np.broadcast_to(live[None, :], row_scores.shape)
        row_probs = _masked_softmax(row_scores, row_ok)
        out[full_rows] = row_probs @ v

    if not return_weights:
        return out
    weights = np.zeros((n, n))
    rows = np.repeat(np.arange(n), len(offsets)).reshape(n, -1)
    weights[rows[in_range], cols[in_range]] += probs[:, len(gidx):][in_range]
    weights[:, gidx] += probs[:, : len(gidx)]
    if len(full_rows):
        weights[full_rows] = row_probs
    return out, weights


def multi_head_attention(q, k, v, masks: AttentionMasks, window: int) -> np.ndarray:
    """Apply :func:`local_global_attention` to each ``(heads, n, d)`` slice."""
    q, k, v = (np.asarray(t, dtype=np.float64) for t in (q, k, v))
    return np.stack([local_global_attention(q[h], k[h], v[h], masks, window) for h in range(q.shape[0])])
