"""End-to-end orchestration: partition, keyframe schedule, one-shot
correspondences, then per-timestep keyframe translation and propagation.

The denoiser here is an explicitly fake, deterministic layer stack (projected
attention followed by a fixed affine mix); the pipeline's claims concern the
partitioning, slimming, and propagation machinery, not image quality. Real
model integration goes through the same translate() hook.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import attention as attn
from .errors import ConfigError, DataError
from .keyframes import KeyframeSchedule, select_keyframes
from .partition import ClipPartition, PartitionParams, adaptive_partition, yt_diagnostic
from .propagation import (CorrespondenceSet, precompute_correspondences, propagate,
                          resize_position_map, save_correspondences)
from .similarity import FeatureVolume, HeatmapCache
from .synth import SyntheticSpec, synth_latents, synth_video
from .tensor_store import resize_nearest, tensor_read, tensor_write


@dataclass
class LayerSpec:
    """One attention layer of the stub denoiser: grid resolution and head shape."""

    h: int
    w: int
    d_head: int = 64
    heads: int = 1

    def __post_init__(self):
        if min(self.h, self.w, self.d_head, self.heads) < 1:
            raise ConfigError(f"layer dims must all be >= 1: {self}")


@dataclass
class LatentVolume:
    """Per-timestep latent stack, shape (t, n, h*w, c); t may be 1.

    The spatial grid is stored flattened; callers supply the grid dims when
    unflattening (the interchange format does not repeat them per timestep).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 4:
            raise DataError(f"latents must be (t, n, h*w, c), got {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("latents contain non-finite values")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def initial(self, h: int, w: int) -> np.ndarray:
        """Most-noised slice as (n, h, w, c): the edit's starting state."""
        t, n, hw, c = self.values.shape
        if hw != h * w:
            raise DataError(f"latent grid of {hw} tokens does not match {h}x{w}")
        return self.values[-1].reshape(n, h, w, c)


@dataclass
class PipelineConfig:
    layers: list[LayerSpec]
    latent_h: int
    latent_w: int
    channels: int
    features_path: str | None = None
    latents_path: str | None = None
    synthetic: SyntheticSpec | None = None
    partition: PartitionParams = field(default_factory=PartitionParams)
    timesteps: int = 50
    seed: int = 0
    budget_frames: int = attn.DEFAULT_BUDGET_FRAMES
    workers: int = 1
    propagation_stride: int = 1
    fixed_keyframes: bool = False
    oracle: str = "slimmed"  # "slimmed" | "full-esa"
    out_edited: str | None = None
    out_report: str | None = None
    out_yt: str | None = None
    out_correspondences: str | None = None

    def __post_init__(self):
        if min(self.latent_h, self.latent_w, self.channels) < 1:
            raise ConfigError("latent dims and channels must be >= 1")
        if self.timesteps < 1:
            raise ConfigError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.budget_frames < 1:
            raise ConfigError(f"budget_frames must be >= 1, got {self.budget_frames}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.propagation_stride < 1:
            raise ConfigError(f"propagation_stride must be >= 1, got {self.propagation_stride}")
        if self.oracle not in ("slimmed", "full-esa"):
            raise ConfigError(f"oracle must be 'slimmed' or 'full-esa', got {self.oracle!r}")
        if not self.layers:
            raise ConfigError("denoiser needs at least one layer")

    @classmethod
    def from_mapping(cls, raw: dict) -> "PipelineConfig":
        try:
            part = PartitionParams(**raw.get("partition", {}))
            synth_raw = raw.get("synthetic")
            synthetic = SyntheticSpec(**synth_raw) if synth_raw is not None else None
            layers = [LayerSpec(**layer) for layer in raw.get("layers", [])]
            known = {"latent_h", "latent_w", "channels", "features_path", "latents_path",
                     "timesteps", "seed", "budget_frames", "workers", "propagation_stride",
                     "fixed_keyframes", "oracle", "out_edited", "out_report", "out_yt",
                     "out_correspondences"}
            extra = set(raw) - known - {"partition", "synthetic", "layers"}
            if extra:
                raise ConfigError(f"unknown config keys: {sorted(extra)}")
            kwargs = {key: raw[key] for key in known if key in raw}
            return cls(layers=layers, partition=part, synthetic=synthetic, **kwargs)
        except TypeError as e:
            raise ConfigError(f"bad config: {e}") from e
        except KeyError as e:
            raise ConfigError(f"missing config key: {e}") from e


@dataclass
class ConsistencyReport:
    """Feature-space consistency proxy over the edited output."""

    mean_similarity: float
    min_frame_similarity: float
    per_clip: list[float]
    kv_ratio: float

    def to_dict(self) -> dict:
        return {
            "mean_similarity": self.mean_similarity,
            "min_frame_similarity": self.min_frame_similarity,
            "per_clip": self.per_clip,
            "kv_ratio": self.kv_ratio,
        }


class DenoiserStub:
    """Deterministic project-attend-mix layer stack standing in for a denoiser.

    Each layer resizes keyframe latents to its grid, runs (slimmed) extended
    self-attention per keyframe, applies a seeded affine mix back to the
    latent channels, and resizes back. Zero layers is the identity.
    """

    def __init__(self, layers: list[LayerSpec], channels: int, seed: int):
        self.layers = layers
        self.channels = channels
        self.projections = []
        self.mixes = []
        for index, layer in enumerate(layers):
            self.projections.append(
                attn.ProjectionWeights.seeded(channels, layer.d_head, layer.heads,
                                              seed=seed * 7919 + index))
            rng = np.random.default_rng(seed * 104729 + index)
            inner = layer.d_head * layer.heads
            self.mixes.append((
                (rng.standard_normal((inner, channels)) / np.sqrt(inner)).astype(np.float32),
                (rng.standard_normal(channels) * 0.01).astype(np.float32),
            ))

    def translate(self, keyframe_latents: np.ndarray,
                  selections: list[attn.TokenSelection] | None,
                  use_full_esa: bool = False,
                  pool: ThreadPoolExecutor | None = None,
                  kv_gauge: list | None = None) -> np.ndarray:
        """Jointly edit keyframe latents (m, h, w, c) -> same shape."""
        m = keyframe_latents.shape[0]
        state = keyframe_latents
        for layer, weights, (mix_w, mix_b) in zip(self.layers, self.projections, self.mixes):
            grid = resize_nearest(np.moveaxis(state, 0, 2), layer.h, layer.w)
            z = np.moveaxis(grid, 2, 0).reshape(m, layer.h * layer.w, self.channels)
            if use_full_esa:
                layer_selections = None
            else:
                layer_selections = [attn.selection_mask_for_layer(sel, layer.h, layer.w)
                                    for sel in selections]
                if kv_gauge is not None:
                    kv_gauge.extend(len(sel.kept) for sel in layer_selections)

            def run(q: int) -> np.ndarray:
                if layer_selections is None:
                    if kv_gauge is not None:
                        kv_gauge.append(m * layer.h * layer.w)
                    return attn.extended_self_attention(z, weights, q)
                return attn.slimmed_attention(z, weights, q, layer_selections[q])

            if pool is None:
                outs = [run(q) for q in range(m)]
            else:
                outs = list(pool.map(run, range(m)))
            mixed = np.stack(outs) @ mix_w + mix_b
            grid = mixed.reshape(m, layer.h, layer.w, self.channels)
            state = np.moveaxis(resize_nearest(np.moveaxis(grid, 0, 2),
                                               keyframe_latents.shape[1],
                                               keyframe_latents.shape[2]), 2, 0)
        return state.astype(np.float32)


@dataclass
class PipelineResult:
    edited: np.ndarray                 # (n, h, w, c)
    consistency: ConsistencyReport
    costs: list[attn.CostReport]       # one per timestep (summed over layers)
    partition: ClipPartition
    schedule: KeyframeSchedule
    kv_peak: int                       # max KV rows materialized by any attention call
    kv_bound: int                      # closed-form budget bound on that peak


def _load_features(config: PipelineConfig) -> tuple[FeatureVolume, object]:
    if config.synthetic is not None:
        return synth_video(config.synthetic)
    if config.features_path is None:
        raise ConfigError("config needs a features path, a synthetic spec, or injected features")
    values = tensor_read(config.features_path)
    if values.ndim != 4:
        raise DataError(f"features file must hold (n, h, w, d), got {values.shape}")
    return FeatureVolume(values), None


def _load_latents(config: PipelineConfig, n: int) -> np.ndarray:
    if config.latents_path is not None:
        volume = LatentVolume(tensor_read(config.latents_path))
        state = volume.initial(config.latent_h, config.latent_w)
        expected = (n, config.latent_h, config.latent_w, config.channels)
        if state.shape != expected:
            raise DataError(f"latents shape {state.shape} != configured {expected}")
        return state
    return synth_latents(n, config.latent_h, config.latent_w, config.channels, config.seed + 1)


def _timestep_cost(config: PipelineConfig, m: int) -> attn.CostReport:
    """Closed-form per-timestep cost, summed over configured layers."""
    totals = np.zeros(4, dtype=object)
    for layer in config.layers:
        report = attn.attention_cost(m, layer.h * layer.w, config.budget_frames,
                                     layer.d_head, layer.heads)
        totals += np.array([report.kv_tokens_full, report.kv_tokens_slimmed,
                            report.attention_macs_full, report.attention_macs_slimmed],
                           dtype=object)
    return attn.CostReport(kv_tokens_full=int(totals[0]), kv_tokens_slimmed=int(totals[1]),
                           attention_macs_full=int(totals[2]), attention_macs_slimmed=int(totals[3]),
                           ratio=int(totals[1]) / int(totals[0]))


class _stage:
    """Context decorating stage errors with the stage name and coordinates."""

    def __init__(self, name: str, **coords):
        self.name = name
        self.coords = coords

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, DataError):
            where = "".join(f" {k}={v}" for k, v in self.coords.items())
            raise DataError(f"stage {self.name}{where}: {exc}") from exc
        return False


def run_pipeline(config: PipelineConfig,
                 features: FeatureVolume | None = None,
                 initial_latents: np.ndarray | None = None) -> PipelineResult:
    """Execute the full edit and return the edited latents plus reports.

    ``features`` and ``initial_latents`` may be injected directly (tests);
    otherwise they come from the configured paths or the synthetic spec.
    Timesteps run sequentially; keyframe translations within a timestep run
    on a worker pool, merged by index, so results do not depend on the
    worker count.
    """
    if features is None:
        with _stage("load-features"):
            features, _ = _load_features(config)
    if initial_latents is None:
        with _stage("load-latents"):
            state = _load_latents(config, features.n)
    else:
        state = np.asarray(initial_latents, dtype=np.float32)
        if state.shape != (features.n, config.latent_h, config.latent_w, config.channels):
            raise DataError(f"initial latents shape {state.shape} does not match config")

    cache = HeatmapCache(features)
    with _stage("partition"):
        clip_partition = adaptive_partition(features, config.partition, cache)
    with _stage("keyframes"):
        schedule = select_keyframes(clip_partition, config.timesteps, config.seed,
                                    fixed=config.fixed_keyframes)
    with _stage("correspondences"):
        correspondences = precompute_correspondences(features, clip_partition, schedule)

    denoiser = DenoiserStub(config.layers, config.channels, config.seed)
    m_clips = clip_partition.num_clips
    costs = []
    kv_gauge: list[int] = []
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for t in range(config.timesteps):
            keyframe_row = schedule.row(t)
            with _stage("selection", timestep=t):
                if config.oracle == "full-esa":
                    selections = None
                else:
                    selections = [attn.select_kv_tokens(q, keyframe_row, cache,
                                                        config.budget_frames)
                                  for q in range(m_clips)]
            with _stage("translate", timestep=t):
                translated = denoiser.translate(state[keyframe_row], selections,
                                                use_full_esa=config.oracle == "full-esa",
                                                pool=pool, kv_gauge=kv_gauge)
            outputs = {frame: translated[q] for q, frame in enumerate(keyframe_row)}
            if t % config.propagation_stride == 0 or t == config.timesteps - 1:
                with _stage("propagate", timestep=t):
                    state = propagate(outputs, correspondences, t, clip_partition, schedule)
            else:
                state = state.copy()
                state[keyframe_row] = translated
            costs.append(_timestep_cost(config, m_clips))
    finally:
        if pool is not None:
            pool.shutdown()

    with _stage("metrics"):
        consistency = consistency_metrics(state, correspondences, schedule, costs)

    kv_peak = max(kv_gauge) if kv_gauge else 0
    kv_bound = min(m_clips, config.budget_frames) * max(layer.h * layer.w
                                                        for layer in config.layers)
    result = PipelineResult(edited=state, consistency=consistency, costs=costs,
                            partition=clip_partition, schedule=schedule,
                            kv_peak=kv_peak, kv_bound=kv_bound)
    _emit_outputs(config, result, features, correspondences)
    return result


def _emit_outputs(config: PipelineConfig, result: PipelineResult,
                  features: FeatureVolume, correspondences: CorrespondenceSet) -> None:
    if config.out_edited:
        tensor_write(result.edited, config.out_edited)
    if config.out_report:
        payload = {
            "partition": result.partition.to_dict(),
            "schedule": result.schedule.to_dict(),
            "consistency": result.consistency.to_dict(),
            "costs": [c.to_dict() for c in result.costs],
            "kv_peak": result.kv_peak,
            "kv_bound": result.kv_bound,
        }
        with open(config.out_report, "w") as f:
            json.dump(payload, f, indent=2)
    if config.out_yt:
        stitched, boundaries = yt_diagnostic(result.edited, result.partition)
        tensor_write(stitched, config.out_yt)
        with open(str(config.out_yt) + ".json", "w") as f:
            json.dump({"boundaries": boundaries}, f)
    if config.out_correspondences:
        save_correspondences(correspondences, result.schedule, 0, config.out_correspondences)


def consistency_metrics(edited: np.ndarray, correspondences: CorrespondenceSet,
                        schedule: KeyframeSchedule,
                        cost_reports: list[attn.CostReport] | None = None) -> ConsistencyReport:
    """Matched-token cosine statistics over adjacent in-clip frame pairs.

    For each adjacent pair (i, i+1) inside a clip, token p of frame i is
    compared against token map(p) of frame i+1 (maps bridged to the output
    resolution when it differs from the feature grid). Videos with no
    adjacent in-clip pair report the vacuous similarity 1.0.
    """
    edited = np.asarray(edited)
    if edited.ndim != 4:
        raise DataError(f"edited volume must be (n, h, w, c), got {edited.shape}")
    n, out_h, out_w, channels = edited.shape
    partition = correspondences.partition
    if partition.n != n:
        raise DataError(f"edited n={n} != partition n={partition.n}")

    flat = edited.reshape(n, out_h * out_w, channels).astype(np.float64)
    norms = np.linalg.norm(flat, axis=2)
    per_pair: list[float] = []
    per_clip: list[float] = []
    all_values: list[np.ndarray] = []
    for k, (start, end) in enumerate(partition.ranges()):
        clip_values = []
        for i in range(start, end - 1):
            targets = resize_position_map(correspondences.map_for(i, i + 1), out_h, out_w)
            num = np.einsum("pc,pc->p", flat[i], flat[i + 1][targets])
            den = norms[i] * norms[i + 1][targets]
            values = np.where(den < 1e-12, 0.0, num / np.where(den < 1e-12, 1.0, den))
            per_pair.append(float(values.mean()))
            clip_values.append(values)
            all_values.append(values)
        per_clip.append(float(np.mean(np.concatenate(clip_values))) if clip_values else 1.0)

    if cost_reports:
        full = sum(c.kv_tokens_full for c in cost_reports)
        slim = sum(c.kv_tokens_slimmed for c in cost_reports)
        kv_ratio = slim / full
    else:
        kv_ratio = 1.0
    if not all_values:
        return ConsistencyReport(1.0, 1.0, per_clip, kv_ratio)
    pooled = np.concatenate(all_values)
    return ConsistencyReport(mean_similarity=float(pooled.mean()),
                             min_frame_similarity=float(min(per_pair)),
                             per_clip=per_clip, kv_ratio=kv_ratio)
