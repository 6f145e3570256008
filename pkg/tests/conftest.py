"""Shared brute-force reference implementations.

These stay deliberately independent of the package code paths: plain loops
and textbook formulas, so they can serve as oracles for the vectorized
implementations.
"""

import math

import numpy as np
import pytest


def ref_cosine(a, b):
    num = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        num += float(x) * float(y)
        na += float(x) * float(x)
        nb += float(y) * float(y)
    na = math.sqrt(na)
    nb = math.sqrt(nb)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return num / (na * nb)


def ref_heatmap(fi, fj):
    """Exhaustive double loop over token pairs; returns (h, w) float64."""
    h, w, _ = fi.shape
    ti = fi.reshape(h * w, -1)
    tj = fj.reshape(h * w, -1)
    out = np.empty(h * w)
    for p in range(h * w):
        best = -2.0
        for q in range(h * w):
            best = max(best, ref_cosine(ti[p], tj[q]))
        out[p] = best
    return out.reshape(h, w)


def ref_correspondence(fi, fj):
    """Exhaustive argmax with lowest-index tie break; returns flat (h*w,) ints."""
    h, w, _ = fi.shape
    ti = fi.reshape(h * w, -1)
    tj = fj.reshape(h * w, -1)
    out = np.empty(h * w, dtype=np.int64)
    for p in range(h * w):
        best = -2.0
        best_q = 0
        for q in range(h * w):
            sim = ref_cosine(ti[p], tj[q])
            if sim > best:
                best = sim
                best_q = q
        out[p] = best_q
    return out


def ref_attention(latents, wq, wk, wv, heads, query_frame, kept_rows=None):
    """Reference multi-head attention: explicit logits, row softmax, weighted sum.

    latents: (m, hw, d_model). kept_rows restricts the KV sequence (flat row
    indices into the (m*hw) concatenation). Returns (hw, heads*d_head) float64.
    """
    m, hw, dm = latents.shape
    z = latents.reshape(m * hw, dm).astype(np.float64)
    if kept_rows is not None:
        z = z[np.asarray(kept_rows)]
    zq = latents[query_frame].astype(np.float64)
    d_head = wq.shape[1] // heads
    blocks = []
    for head in range(heads):
        cols = slice(head * d_head, (head + 1) * d_head)
        q = zq @ np.asarray(wq, dtype=np.float64)[:, cols]
        k = z @ np.asarray(wk, dtype=np.float64)[:, cols]
        v = z @ np.asarray(wv, dtype=np.float64)[:, cols]
        out = np.empty((hw, d_head))
        for row in range(hw):
            logits = np.array([q[row] @ k[col] / math.sqrt(d_head) for col in range(len(k))])
            logits -= logits.max()
            weights = np.exp(logits)
            weights /= weights.sum()
            out[row] = weights @ v
        blocks.append(out)
    return np.concatenate(blocks, axis=1)


def ref_resize(src, out_h, out_w):
    h, w = src.shape[:2]
    out = np.empty((out_h, out_w) + src.shape[2:], dtype=src.dtype)
    for r in range(out_h):
        for c in range(out_w):
            out[r, c] = src[r * h // out_h, c * w // out_w]
    return out


def random_feature_volume(rng, n, h, w, d):
    """Random finite feature volume as float32."""
    return rng.standard_normal((n, h, w, d)).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
