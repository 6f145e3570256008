"""Extended self-attention over joint keyframes, budgeted KV token selection,
slimmed attention, and exact compute/memory accounting.

Extended self-attention lets one frame's queries attend to the concatenated
key/value tokens of all jointly edited frames. Above the frame budget, the KV
sequence is slimmed to the globally highest-scoring tokens, where a token's
score is its heatmap similarity to its best match in the query frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .similarity import HeatmapCache
from .tensor_store import resize_nearest

DEFAULT_BUDGET_FRAMES = 14


@dataclass
class ProjectionWeights:
    """Query/key/value projections, one matrix per role, heads concatenated."""

    wq: np.ndarray  # (d_model, heads * d_head)
    wk: np.ndarray
    wv: np.ndarray
    heads: int = 1

    def __post_init__(self):
        shapes = {self.wq.shape, self.wk.shape, self.wv.shape}
        if len(shapes) != 1 or self.wq.ndim != 2:
            raise DimensionError(f"projection shapes differ: {shapes}")
        if self.heads < 1 or self.wq.shape[1] % self.heads != 0:
            raise ConfigError(f"inner dim {self.wq.shape[1]} not divisible by heads={self.heads}")
        if self.d_head < 1:
            raise ConfigError("d_head must be >= 1")

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]

    @property
    def d_head(self) -> int:
        return self.wq.shape[1] // self.heads

    @classmethod
    def seeded(cls, d_model: int, d_head: int, heads: int, seed: int) -> "ProjectionWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(d_model)
        shape = (d_model, heads * d_head)
        return cls(wq=(rng.standard_normal(shape) * scale).astype(np.float32),
                   wk=(rng.standard_normal(shape) * scale).astype(np.float32),
                   wv=(rng.standard_normal(shape) * scale).astype(np.float32),
                   heads=heads)


@dataclass
class TokenSelection:
    """The retained (frame ordinal, flat position) KV tokens for one query keyframe.

    ``kept`` rows are sorted by (frame, position), so a full selection gathers
    tokens in their natural order. ``budget`` is the token-count cap; all
    tokens of the query frame are always present.
    """

    query_frame: int
    kept: np.ndarray  # (m, 2) int32: frame ordinal, flat position
    budget: int
    num_frames: int
    grid_h: int
    grid_w: int

    def __post_init__(self):
        kept = np.asarray(self.kept, dtype=np.int32).reshape(-1, 2)
        hw = self.grid_h * self.grid_w
        if not 0 <= self.query_frame < self.num_frames:
            raise DataError(f"query frame {self.query_frame} out of range")
        if len(kept) > self.budget:
            raise DataError(f"{len(kept)} kept tokens exceed budget {self.budget}")
        flat = kept[:, 0].astype(np.int64) * hw + kept[:, 1]
        if len(np.unique(flat)) != len(flat):
            raise DataError("kept token entries must be unique")
        if kept.size and (kept[:, 0].min() < 0 or kept[:, 0].max() >= self.num_frames
                          or kept[:, 1].min() < 0 or kept[:, 1].max() >= hw):
            raise DataError("kept token out of range")
        query_count = int(np.count_nonzero(kept[:, 0] == self.query_frame))
        if query_count != hw:
            raise DataError(f"query frame holds {query_count} of {hw} tokens; all must be kept")
        self.kept = kept[np.lexsort((kept[:, 1], kept[:, 0]))]

    @property
    def tokens_per_frame(self) -> int:
        return self.grid_h * self.grid_w

    def kept_flat(self) -> np.ndarray:
        """Kept tokens as flat row indices into the (M * h * w) KV sequence."""
        return self.kept[:, 0].astype(np.int64) * self.tokens_per_frame + self.kept[:, 1]

    def frame_counts(self) -> np.ndarray:
        """Retained token count per frame ordinal."""
        return np.bincount(self.kept[:, 0], minlength=self.num_frames)

    @classmethod
    def full(cls, query_frame: int, num_frames: int, grid_h: int, grid_w: int,
             budget: int | None = None) -> "TokenSelection":
        hw = grid_h * grid_w
        frames = np.repeat(np.arange(num_frames, dtype=np.int32), hw)
        positions = np.tile(np.arange(hw, dtype=np.int32), num_frames)
        return cls(query_frame=query_frame,
                   kept=np.stack([frames, positions], axis=1),
                   budget=budget if budget is not None else num_frames * hw,
                   num_frames=num_frames, grid_h=grid_h, grid_w=grid_w)


@dataclass(frozen=True)
class CostReport:
    """Exact KV-length and multiply-accumulate accounting for one attention pass."""

    kv_tokens_full: int
    kv_tokens_slimmed: int
    attention_macs_full: int
    attention_macs_slimmed: int
    ratio: float

    def to_dict(self) -> dict:
        return {
            "kv_tokens_full": self.kv_tokens_full,
            "kv_tokens_slimmed": self.kv_tokens_slimmed,
            "attention_macs_full": self.attention_macs_full,
            "attention_macs_slimmed": self.attention_macs_slimmed,
            "ratio": self.ratio,
        }


def _attend(zq: np.ndarray, zkv: np.ndarray, weights: ProjectionWeights,
            weights_sink: list | None = None) -> np.ndarray:
    """Multi-head scaled dot-product attention of query tokens over KV tokens.

    Logits, softmax, and the weighted sum accumulate in float64; the output is
    float32. Softmax subtracts the per-row max before exponentiating.
    """
    dh = weights.d_head
    scale = 1.0 / math.sqrt(dh)
    zq64 = zq.astype(np.float64)
    zkv64 = zkv.astype(np.float64)
    outs = []
    for h in range(weights.heads):
        cols = slice(h * dh, (h + 1) * dh)
        q = zq64 @ weights.wq[:, cols].astype(np.float64)
        k = zkv64 @ weights.wk[:, cols].astype(np.float64)
        v = zkv64 @ weights.wv[:, cols].astype(np.float64)
        logits = (q @ k.T) * scale
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        if weights_sink is not None:
            weights_sink.append(probs)
        outs.append(probs @ v)
    return np.concatenate(outs, axis=1).astype(np.float32)


def extended_self_attention(latents: np.ndarray, weights: ProjectionWeights,
                            query_frame: int,
                            weights_sink: list | None = None) -> np.ndarray:
    """One frame's queries attending to the concatenated KV tokens of all frames.

    ``latents`` is (M, h*w, d_model); returns (h*w, heads*d_head) float32.
    """
    latents = np.asarray(latents)
    if latents.ndim != 3:
        raise DimensionError(f"latents must be (frames, tokens, d_model), got {latents.shape}")
    m, hw, dm = latents.shape
    if dm != weights.d_model:
        raise DimensionError(f"latent channels {dm} != projection d_model {weights.d_model}")
    if not 0 <= query_frame < m:
        raise IndexError(f"query frame {query_frame} out of range for {m} frames")
    return _attend(latents[query_frame], latents.reshape(m * hw, dm), weights, weights_sink)


def slimmed_attention(latents: np.ndarray, weights: ProjectionWeights,
                      query_frame: int, selection: TokenSelection,
                      weights_sink: list | None = None) -> np.ndarray:
    """Extended self-attention with K/V gathered from the selection only."""
    latents = np.asarray(latents)
    if latents.ndim != 3:
        raise DimensionError(f"latents must be (frames, tokens, d_model), got {latents.shape}")
    m, hw, dm = latents.shape
    if dm != weights.d_model:
        raise DimensionError(f"latent channels {dm} != projection d_model {weights.d_model}")
    if selection.query_frame != query_frame:
        raise DataError(f"selection is for query frame {selection.query_frame}, not {query_frame}")
    if selection.num_frames != m or selection.tokens_per_frame != hw:
        raise IndexError(
            f"selection indexes a {selection.num_frames}x{selection.tokens_per_frame} "
            f"KV sequence, latents provide {m}x{hw}")
    kv = latents.reshape(m * hw, dm)[selection.kept_flat()]
    return _attend(latents[query_frame], kv, weights, weights_sink)


def select_kv_tokens(query_frame: int, keyframe_indices: list[int], cache: HeatmapCache,
                     budget_frames: int = DEFAULT_BUDGET_FRAMES,
                     tokens_per_frame: int | None = None) -> TokenSelection:
    """Pick the KV tokens one query keyframe may attend to, under the frame budget.

    At or below the budget every token is kept and no heatmap is touched.
    Above it, token (frame j, position p) scores H[k_j, k_query][p] — the
    similarity of that token to its best match in the query frame — and the
    global top budget_frames*h*w survive. Query-frame tokens score exactly 1.0
    and are retained unconditionally; remaining ties break to the lower frame
    ordinal, then the lower position.
    """
    m = len(keyframe_indices)
    if m < 1:
        raise DataError("need at least one keyframe")
    if budget_frames < 1:
        raise ConfigError(f"budget_frames must be >= 1, got {budget_frames}")
    if not 0 <= query_frame < m:
        raise IndexError(f"query ordinal {query_frame} out of range for {m} keyframes")
    h, w = cache.features.h, cache.features.w
    hw = h * w
    if tokens_per_frame is not None and tokens_per_frame != hw:
        raise DimensionError(f"tokens_per_frame {tokens_per_frame} != feature grid {h}x{w}")

    budget = min(m, budget_frames) * hw
    if m <= budget_frames:
        return TokenSelection.full(query_frame, m, h, w, budget=budget)

    query_index = keyframe_indices[query_frame]
    scores = np.empty((m, hw), dtype=np.float64)
    for j, frame_index in enumerate(keyframe_indices):
        if j == query_frame:
            scores[j] = 1.0
        else:
            scores[j] = cache.lookup(frame_index, query_index).values.reshape(-1).astype(np.float64)

    flat_scores = scores.reshape(-1)
    candidates = np.flatnonzero(
        np.repeat(np.arange(m), hw) != query_frame)
    # Stable sort on descending score keeps ties in flat-index order, i.e.
    # (frame ordinal, position).
    order = candidates[np.argsort(-flat_scores[candidates], kind="stable")]
    taken = order[:budget - hw]

    query_flat = query_frame * hw + np.arange(hw)
    all_flat = np.concatenate([query_flat, taken])
    kept = np.stack([all_flat // hw, all_flat % hw], axis=1).astype(np.int32)
    return TokenSelection(query_frame=query_frame, kept=kept, budget=budget_frames * hw,
                          num_frames=m, grid_h=h, grid_w=w)


def selection_mask_for_layer(selection: TokenSelection, layer_h: int, layer_w: int) -> TokenSelection:
    """Re-express a selection at an attention layer's grid resolution.

    Each frame's kept set becomes a boolean mask, is nearest-neighbor resized,
    and re-flattened. The query frame's mask is all-true and stays all-true,
    so query completeness survives. For non-integer scale factors the resized
    count can drift past the proportionally scaled budget; the recorded budget
    widens to the actual count in that case.
    """
    if layer_h < 1 or layer_w < 1:
        raise DataError("layer dims must be >= 1")
    if (layer_h, layer_w) == (selection.grid_h, selection.grid_w):
        return selection
    hw = selection.tokens_per_frame
    masks = np.zeros((selection.num_frames, hw), dtype=bool)
    masks[selection.kept[:, 0], selection.kept[:, 1]] = True
    masks = masks.reshape(selection.num_frames, selection.grid_h, selection.grid_w)

    rows = []
    for frame in range(selection.num_frames):
        resized = resize_nearest(masks[frame], layer_h, layer_w)
        positions = np.flatnonzero(resized.reshape(-1)).astype(np.int32)
        rows.append(np.stack([np.full(len(positions), frame, dtype=np.int32), positions], axis=1))
    kept = np.concatenate(rows, axis=0)
    budget = max((selection.budget // hw) * layer_h * layer_w, len(kept))
    return TokenSelection(query_frame=selection.query_frame, kept=kept, budget=budget,
                          num_frames=selection.num_frames, grid_h=layer_h, grid_w=layer_w)


def attention_cost(keyframes: int, tokens_per_frame: int,
                   budget_frames: int = DEFAULT_BUDGET_FRAMES,
                   d_head: int = 64, heads: int = 1) -> CostReport:
    """Closed-form KV length and MAC counts for one query frame's attention.

    MACs count both the logit matmul and the weighted sum: queries * kv *
    d_head * heads * 2. Attention MACs scale linearly in KV length for fixed
    queries, so the cost ratio equals the KV ratio exactly.
    """
    if min(keyframes, tokens_per_frame, budget_frames, d_head, heads) < 1:
        raise ConfigError("all cost parameters must be >= 1")
    kv_full = keyframes * tokens_per_frame
    kv_slim = min(keyframes, budget_frames) * tokens_per_frame
    per_kv = tokens_per_frame * d_head * heads * 2
    return CostReport(
        kv_tokens_full=kv_full,
        kv_tokens_slimmed=kv_slim,
        attention_macs_full=per_kv * kv_full,
        attention_macs_slimmed=per_kv * kv_slim,
        ratio=kv_slim / kv_full,
    )
