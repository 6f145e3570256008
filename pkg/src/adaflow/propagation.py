"""One-shot correspondence precompute and keyframe-output propagation.

Correspondences are computed from source-video features once, before any
editing, and reused at every timestep: for each frame, a position map into
every keyframe its clip can contribute under the schedule, plus the adjacent
in-clip pairs used by the consistency metric. Propagation is a pure gather:
a non-keyframe token copies its keyframe's output token verbatim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .keyframes import KeyframeSchedule
from .partition import ClipPartition
from .similarity import FeatureVolume, PositionMap, _similarity_matrix
from .tensor_store import tensor_read, tensor_write


@dataclass
class CorrespondenceSet:
    """Precomputed position maps: (frame, keyframe candidate) plus in-clip
    adjacent pairs. Immutable after construction."""

    partition: ClipPartition
    grid_h: int
    grid_w: int
    maps: dict = field(default_factory=dict)  # (i, j) -> PositionMap
    computed_once: bool = True

    def map_for(self, i: int, j: int) -> PositionMap:
        pm = self.maps.get((i, j))
        if pm is None:
            raise DataError(f"no precomputed correspondence for frame pair ({i}, {j})")
        return pm

    @property
    def index_count(self) -> int:
        """Total stored target indices (memory accounting)."""
        return len(self.maps) * self.grid_h * self.grid_w


def precompute_correspondences(features: FeatureVolume, partition: ClipPartition,
                               schedule: KeyframeSchedule) -> CorrespondenceSet:
    """Compute every position map propagation or metrics will ever need.

    For each clip, the candidates are the frames the schedule ever samples
    from it; every frame of the clip gets a map into each candidate.
    Self-correspondence is the identity map by construction. Features are
    static, so one pass serves all timesteps.
    """
    if schedule.num_clips != partition.num_clips:
        raise DataError(f"schedule has {schedule.num_clips} clips, partition {partition.num_clips}")
    if features.n != partition.n:
        raise DataError(f"features n={features.n} != partition n={partition.n}")
    h, w = features.h, features.w
    maps: dict[tuple[int, int], PositionMap] = {}
    for k, (start, end) in enumerate(partition.ranges()):
        pairs = {(i, j) for i in range(start, end)
                 for j in schedule.candidate_keyframes(k)}
        pairs.update((i, i + 1) for i in range(start, end - 1))
        for i, j in sorted(pairs):
            if i == j:
                maps[(i, j)] = PositionMap.identity(h, w)
                continue
            sims = _similarity_matrix(features.unit_tokens(i), features.unit_tokens(j))
            maps[(i, j)] = PositionMap(h, w, sims.argmax(axis=1).reshape(h, w).astype(np.int32))
    return CorrespondenceSet(partition=partition, grid_h=h, grid_w=w, maps=maps)


def resize_position_map(pm: PositionMap, out_h: int, out_w: int) -> np.ndarray:
    """Bridge a position map to another grid resolution; returns flat targets.

    The index grid is resized cell-wise and each target position is rescaled
    by the floor mapping. When upsampling, a query cell keeps its offset
    within its source block, so an identity map stays the identity at the
    finer resolution instead of collapsing onto block corners.
    """
    if (out_h, out_w) == (pm.h, pm.w):
        return pm.flat().astype(np.int64)

    def axis_targets(size: int, out: int, q: np.ndarray, out_index: np.ndarray) -> np.ndarray:
        # q: target cells at source resolution, broadcast against out_index
        # (the output cell index along this axis).
        if out > size:
            src = out_index * size // out
            offset = out_index - (src * out + size - 1) // size
            base = (q * out + size - 1) // size
            block = ((q + 1) * out + size - 1) // size - base
            return base + np.minimum(offset, block - 1)
        return q * out // size

    rows = pm.targets // pm.w
    cols = pm.targets % pm.w
    src_r = (np.arange(out_h) * pm.h // out_h)[:, None]
    src_c = (np.arange(out_w) * pm.w // out_w)[None, :]
    qr = rows[src_r, src_c].astype(np.int64)
    qc = cols[src_r, src_c].astype(np.int64)
    r2 = axis_targets(pm.h, out_h, qr, np.arange(out_h, dtype=np.int64)[:, None])
    c2 = axis_targets(pm.w, out_w, qc, np.arange(out_w, dtype=np.int64)[None, :])
    return (r2 * out_w + c2).reshape(-1)


def propagate(keyframe_outputs: dict[int, np.ndarray], correspondences: CorrespondenceSet,
              timestep: int, partition: ClipPartition,
              schedule: KeyframeSchedule) -> np.ndarray:
    """Gather keyframe attention outputs into every frame of the video.

    Keyframes pass through bit-identically; a non-keyframe token at position p
    copies its clip keyframe's output at the mapped position, with the map
    bridged to the output resolution when it differs from the feature grid.
    Returns (n, out_h, out_w, c).
    """
    row = schedule.row(timestep)
    sample = next(iter(keyframe_outputs.values()), None)
    if sample is None or sample.ndim != 3:
        raise DataError("keyframe outputs must be nonempty (h, w, c) arrays")
    out_h, out_w, channels = sample.shape
    result = np.empty((partition.n, out_h, out_w, channels), dtype=sample.dtype)
    for k, (start, end) in enumerate(partition.ranges()):
        keyframe = row[k]
        output = keyframe_outputs.get(keyframe)
        if output is None:
            raise DataError(f"missing keyframe output at timestep {timestep} for clip {k} "
                            f"(frame {keyframe})")
        if output.shape != (out_h, out_w, channels):
            raise DataError(f"keyframe {keyframe} output shape {output.shape} != "
                            f"{(out_h, out_w, channels)}")
        result[keyframe] = output
        flat = output.reshape(out_h * out_w, channels)
        for i in range(start, end):
            if i == keyframe:
                continue
            targets = resize_position_map(correspondences.map_for(i, keyframe), out_h, out_w)
            result[i] = flat[targets].reshape(out_h, out_w, channels)
    return result


def save_correspondences(correspondences: CorrespondenceSet, schedule: KeyframeSchedule,
                         timestep: int, path: str) -> None:
    """Persist one timestep's frame->keyframe maps as an AFTN (n, h, w) tensor
    of flat target indices plus a JSON sidecar with the keyframe assignment.

    Indices are stored as float32, exact for grids below 2**24 tokens.
    """
    partition = correspondences.partition
    hw = correspondences.grid_h * correspondences.grid_w
    if hw >= 1 << 24:
        raise DataError(f"grid of {hw} tokens exceeds exact float32 index range")
    row = schedule.row(timestep)
    keyframe_of = []
    stack = np.empty((partition.n, correspondences.grid_h, correspondences.grid_w),
                     dtype=np.float32)
    for k, (start, end) in enumerate(partition.ranges()):
        for i in range(start, end):
            keyframe_of.append(row[k])
            stack[i] = correspondences.map_for(i, row[k]).targets.astype(np.float32)
    tensor_write(stack, path)
    with open(str(path) + ".json", "w") as f:
        json.dump({"keyframe_of": keyframe_of}, f)


def load_correspondences(path: str) -> tuple[list[int], list[PositionMap]]:
    """Read back what save_correspondences wrote."""
    stack = tensor_read(path)
    if stack.ndim != 3:
        raise DataError(f"correspondence tensor must be (n, h, w), got {stack.shape}")
    with open(str(path) + ".json") as f:
        keyframe_of = [int(x) for x in json.load(f)["keyframe_of"]]
    if len(keyframe_of) != stack.shape[0]:
        raise DataError("sidecar keyframe_of length does not match tensor")
    _, h, w = stack.shape
    maps = [PositionMap(h, w, np.rint(frame).astype(np.int32)) for frame in stack]
    return keyframe_of, maps
