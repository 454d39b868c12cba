"""Behavior-graph indoor navigation: generated office worlds, a semantic
triplet graph, reactive behaviors switched by place and landmark detectors,
and the trial and mission benchmarks built on them."""

from .floorplan import FloorPlan, GenConfig, generate_floorplan, reference_floorplan
from .semgraph import Plan, SemanticGraph, extract_graph, plan_route
from .worldsim import DescriptorLibrary, Pose, World, WorldConfig

__all__ = [
    "DescriptorLibrary", "FloorPlan", "GenConfig", "Plan", "Pose", "SemanticGraph", "World",
    "WorldConfig", "extract_graph", "generate_floorplan", "plan_route", "reference_floorplan",
]
__version__ = "0.1.0"
