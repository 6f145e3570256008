"""Adaptive video partitioning, KV-slimmed extended self-attention, and
correspondence-based latent propagation over per-frame feature volumes."""

from .attention import (CostReport, ProjectionWeights, TokenSelection, attention_cost,
                        extended_self_attention, select_kv_tokens, selection_mask_for_layer,
                        slimmed_attention)
from .errors import ConfigError, DataError, DimensionError, FormatError
from .keyframes import KeyframeSchedule, select_keyframes
from .partition import (ClipPartition, PartitionParams, adaptive_partition, window_check,
                        yt_diagnostic)
from .pipeline import (ConsistencyReport, DenoiserStub, LatentVolume, LayerSpec,
                       PipelineConfig, PipelineResult, consistency_metrics, run_pipeline)
from .propagation import (CorrespondenceSet, load_correspondences, precompute_correspondences,
                          propagate, resize_position_map, save_correspondences)
from .similarity import (FeatureVolume, Heatmap, HeatmapCache, PositionMap, correspondence_map,
                         cosine_similarity, heatmap)
from .synth import SyntheticSpec, SyntheticTruth, synth_latents, synth_video
from .tensor_store import resize_nearest, tensor_read, tensor_write

__version__ = "0.1.0"

__all__ = [
    "ClipPartition", "ConfigError", "ConsistencyReport", "CorrespondenceSet", "CostReport",
    "DataError", "DenoiserStub", "DimensionError", "FeatureVolume", "FormatError", "Heatmap",
    "HeatmapCache", "KeyframeSchedule", "LatentVolume", "LayerSpec", "PartitionParams",
    "PipelineConfig",
    "PipelineResult", "PositionMap", "ProjectionWeights", "SyntheticSpec", "SyntheticTruth",
    "TokenSelection", "adaptive_partition", "attention_cost", "consistency_metrics",
    "correspondence_map", "cosine_similarity", "extended_self_attention", "heatmap",
    "load_correspondences", "precompute_correspondences", "propagate", "resize_nearest",
    "resize_position_map", "run_pipeline", "save_correspondences", "select_keyframes",
    "select_kv_tokens", "selection_mask_for_layer", "slimmed_attention", "synth_latents",
    "synth_video", "tensor_read", "tensor_write", "window_check", "yt_diagnostic",
]
