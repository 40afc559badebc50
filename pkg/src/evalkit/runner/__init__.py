"""Benchmark runner: manifests, per-clip evaluation, aggregation and reports."""

from .aggregate import AggregateRow, RadarNormalizer, aggregate, radar_normalize
from .config import EvalConfig, config_from_dict, load_config
from .evaluate import METRICS, ClipUnderTest, MetricReport, evaluate_all, evaluate_clip, rtf
from .manifest import SCENARIO_CHALLENGE, TestCase, load_manifest
from .report import emit_report, render

__all__ = [
    "AggregateRow", "ClipUnderTest", "EvalConfig", "METRICS", "MetricReport", "RadarNormalizer",
    "SCENARIO_CHALLENGE", "TestCase", "aggregate", "config_from_dict", "emit_report", "evaluate_all",
    "evaluate_clip", "load_config", "load_manifest", "radar_normalize", "render", "rtf",
]
