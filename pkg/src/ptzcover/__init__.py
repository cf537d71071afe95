"""Distributed gradient-based visual coverage control for aerial camera swarms.

A deterministic simulator and library for teams of aerial agents carrying
pan-tilt-zoom cameras over a convex planar region of interest. Each agent's
camera footprint is an ellipse on the ground plane; bounded positioning
uncertainty shrinks it to a guaranteed sensed region. Agents partition the
region by coverage quality (no Voronoi diagram involved), and gradient
control laws drive position, altitude, pan, tilt, and zoom so the swarm's
coverage-quality objective climbs monotonically.
"""
from .geom2d import (
    GEOM_EPS,
    ConvexPolygon,
    DegenerateShapeError,
    DensityField,
    Ellipse,
    Region,
    area,
    contains,
    ellipse_to_polygon,
    project_to_polygon,
    region_difference,
    region_intersect,
    region_union,
)
from .sensing import (
    AgentLimits,
    AgentState,
    BoundaryJacobians,
    QualityValue,
    TiltDomainError,
    boundary_jacobians,
    boundary_point,
    guaranteed_region,
    quality,
    sensing_pattern,
)
from .partition import Partition, compute_partition
from .objective import ObjectiveReport, objective_from_partition, objective_grid_oracle
from .control import (
    BoundarySample,
    ControlInput,
    Gains,
    classify_boundary,
    control_input,
    project_state,
)
from .sim import RunLog, Scenario, load_scenario, run, emit_outputs

__version__ = "0.1.0"

__all__ = [
    "GEOM_EPS",
    "ConvexPolygon",
    "DegenerateShapeError",
    "DensityField",
    "Ellipse",
    "Region",
    "area",
    "contains",
    "ellipse_to_polygon",
    "project_to_polygon",
    "region_difference",
    "region_intersect",
    "region_union",
    "AgentLimits",
    "AgentState",
    "BoundaryJacobians",
    "QualityValue",
    "TiltDomainError",
    "boundary_jacobians",
    "boundary_point",
    "guaranteed_region",
    "quality",
    "sensing_pattern",
    "Partition",
    "compute_partition",
    "ObjectiveReport",
    "objective_from_partition",
    "objective_grid_oracle",
    "BoundarySample",
    "ControlInput",
    "Gains",
    "classify_boundary",
    "control_input",
    "project_state",
    "RunLog",
    "Scenario",
    "load_scenario",
    "run",
    "emit_outputs",
    "__version__",
]
