"""Scenario configuration, closed-loop stepping, logging, and file outputs.

A scenario file is a YAML document (plain key/value with nested lists).
Angles in the file are degrees and are converted to radians at load; all
internal state and all output files use radians. Runs are deterministic:
the same scenario produces byte-identical CSV and JSON outputs.

Each step is synchronous: one partition and one objective evaluation of the
current snapshot, then every agent's control from that same snapshot, then
all states advance together. In fixed-camera mode the pan, tilt, and zoom
channels are frozen (h = 0, delta = delta_min), leaving position and
altitude active.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .control import ControlInput, Gains, control_input, project_state
from .geom2d import ConvexPolygon, DensityField, Region
from .objective import ObjectiveReport, objective_from_partition
from .partition import DEFAULT_EPS_F, Partition, compute_partition
from .sensing import AgentLimits, AgentState, quality, sensing_pattern

# A run is converged when no channel of any agent can move faster than this
# (realized rate of change after constraint projection, per unit time).
CONVERGENCE_TOL = 1e-4

_FOOTPRINT_CHECK_SAMPLES = 256


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate; message names the field."""


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated run configuration: workspace, density, agents, solver knobs."""

    name: str
    omega: ConvexPolygon
    density: DensityField
    agents: tuple[tuple[AgentState, AgentLimits], ...]
    gains: Gains
    dt: float
    steps: int
    polygonization: int
    boundary_samples: int
    eps_f: float
    mode: str
    seed: int


@dataclass(frozen=True, eq=False)
class StepRecord:
    """One synchronous snapshot: states, their controls, objective, areas."""

    step: int
    states: tuple[AgentState, ...]
    controls: tuple[ControlInput, ...]
    report: ObjectiveReport
    cell_areas: tuple[float, ...]
    common_areas: tuple[float, ...]
    neutral_area: float
    wall_clock: float


@dataclass(frozen=True, eq=False)
class RunLog:
    """Complete run history plus the convergence and monotonicity audit.

    effective_norm is the projected rate of change the final configuration
    can still realize: max over agents and channels of |projected step|/dt.
    Channels pinned at their box constraints contribute zero, so this is the
    projected-gradient reading of "the controls have vanished".
    """

    scenario: Scenario
    records: tuple[StepRecord, ...]
    partitions: dict[int, Partition]
    converged: bool
    effective_norm: float
    monotonicity_violations: int
    runtime: float

    @property
    def H_series(self) -> np.ndarray:
        return np.array([r.report.H for r in self.records])

    @property
    def final(self) -> StepRecord:
        return self.records[-1]


def _deg(x: float) -> float:
    return math.radians(x)


def _field(d: dict, key: str, kind, where: str):
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    v = d[key]
    if kind is float:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ScenarioError(f"{where}: field '{key}' must be a number, got {v!r}")
        return float(v)
    if kind is int:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ScenarioError(f"{where}: field '{key}' must be an integer, got {v!r}")
        return v
    return v


def _load_density(spec, base_dir: str) -> DensityField:
    if spec is None or spec == "uniform":
        return DensityField.uniform(1.0)
    if isinstance(spec, dict):
        if "uniform" in spec:
            return DensityField.uniform(float(spec["uniform"]))
        if "grid_file" in spec:
            return DensityField.from_file(os.path.join(base_dir, spec["grid_file"]))
    raise ScenarioError(
        f"density: expected 'uniform', {{uniform: value}}, or {{grid_file: path}}, got {spec!r}"
    )


def _load_limits(d: dict, where: str) -> AgentLimits:
    h_max_deg = d.get("h_max_deg")
    try:
        return AgentLimits(
            z_min=_field(d, "z_min", float, where),
            z_max=_field(d, "z_max", float, where),
            delta_min=_deg(_field(d, "delta_min_deg", float, where)),
            delta_max=_deg(_field(d, "delta_max_deg", float, where)),
            r=float(d.get("r", 0.0)),
            h_max=None if h_max_deg is None else _deg(float(h_max_deg)),
        )
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(f"{where}: {e}") from e


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; raises ScenarioError naming the
    offending field on any problem."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ScenarioError(f"scenario file {path} is not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario file {path} must be a mapping at top level")
    base_dir = os.path.dirname(os.path.abspath(path))
    name = str(doc.get("name", os.path.splitext(os.path.basename(path))[0]))

    verts = doc.get("omega")
    if not isinstance(verts, list) or len(verts) < 3:
        raise ScenarioError("omega: need a list of at least 3 [x, y] vertices")
    try:
        omega = ConvexPolygon(np.asarray(verts, dtype=float))
    except ValueError as e:
        raise ScenarioError(f"omega: {e}") from e

    density = _load_density(doc.get("density"), base_dir)

    gains_doc = doc.get("gains", {})
    if not isinstance(gains_doc, dict):
        raise ScenarioError("gains: must be a mapping of channel gains")
    try:
        gains = Gains(**{k: float(v) for k, v in gains_doc.items()})
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"gains: {e}") from e

    dt = _field(doc, "dt", float, "scenario")
    if not dt > 0.0:
        raise ScenarioError(f"dt: must be positive, got {dt}")
    steps = _field(doc, "steps", int, "scenario")
    if steps < 1:
        raise ScenarioError(f"steps: must be >= 1, got {steps}")
    polygonization = int(doc.get("polygonization", 64))
    if polygonization < 8:
        raise ScenarioError(f"polygonization: must be >= 8, got {polygonization}")
    boundary_samples = int(doc.get("boundary_samples", 360))
    if boundary_samples < 64:
        raise ScenarioError(f"boundary_samples: must be >= 64, got {boundary_samples}")
    eps_f = float(doc.get("eps_f", DEFAULT_EPS_F))
    if eps_f <= 0.0:
        raise ScenarioError(f"eps_f: must be positive, got {eps_f}")
    mode = str(doc.get("mode", "ptz")).lower()
    if mode not in ("ptz", "fixed"):
        raise ScenarioError(f"mode: must be 'ptz' or 'fixed', got {mode!r}")
    seed = int(doc.get("seed", 0))

    default_limits_doc = doc.get("limits")
    agents_doc = doc.get("agents")
    if not isinstance(agents_doc, list) or not agents_doc:
        raise ScenarioError("agents: need a non-empty list of agent entries")
    agents = []
    for idx, a in enumerate(agents_doc):
        where = f"agents[{idx}]"
        if not isinstance(a, dict):
            raise ScenarioError(f"{where}: must be a mapping")
        lim_doc = a.get("limits", default_limits_doc)
        if not isinstance(lim_doc, dict):
            raise ScenarioError(f"{where}: no limits given and no top-level 'limits' default")
        lims = _load_limits(lim_doc, f"{where}.limits")
        q = a.get("q")
        if not (isinstance(q, list) and len(q) == 2):
            raise ScenarioError(f"{where}.q: need [x, y]")
        try:
            state = AgentState(
                q=np.asarray(q, dtype=float),
                z=_field(a, "z", float, where),
                theta=_deg(float(a.get("theta_deg", 0.0))),
                h=_deg(float(a.get("h_deg", 0.0))),
                delta=_deg(_field(a, "delta_deg", float, where)),
                r=lims.r,
            )
        except ValueError as e:
            raise ScenarioError(f"{where}: {e}") from e
        if not lims.admits(state):
            raise ScenarioError(
                f"{where}: initial state (z={state.z}, h={state.h:.6g}, "
                f"delta={state.delta:.6g}) violates its limits"
            )
        if not omega.contains(state.q):
            raise ScenarioError(f"{where}.q: initial position {q} lies outside omega")
        pattern = sensing_pattern(state)
        t = np.linspace(0.0, 2.0 * math.pi, _FOOTPRINT_CHECK_SAMPLES, endpoint=False)
        depth = omega.signed_depth(pattern.boundary_points(t))
        if float(depth.max()) > 1e-9:
            raise ScenarioError(
                f"{where}: initial footprint leaves omega by {float(depth.max()):.3g}"
            )
        agents.append((state, lims))

    return Scenario(
        name=name,
        omega=omega,
        density=density,
        agents=tuple(agents),
        gains=gains,
        dt=dt,
        steps=steps,
        polygonization=polygonization,
        boundary_samples=boundary_samples,
        eps_f=eps_f,
        mode=mode,
        seed=seed,
    )


def _effective_norm(states, controls, dt, lims, omega) -> float:
    """Fastest realizable rate of change from this snapshot: project one step
    and measure max |state change| / dt over agents and channels."""
    worst = 0.0
    for s, u, l in zip(states, controls, lims):
        nxt = project_state(s, u, dt, l, omega)
        dth = (nxt.theta - s.theta + math.pi) % (2.0 * math.pi) - math.pi
        worst = max(
            worst,
            abs(nxt.q[0] - s.q[0]) / dt,
            abs(nxt.q[1] - s.q[1]) / dt,
            abs(nxt.z - s.z) / dt,
            abs(dth) / dt,
            abs(nxt.h - s.h) / dt,
            abs(nxt.delta - s.delta) / dt,
        )
    return worst


def run(s: Scenario, snapshot_steps=None) -> RunLog:
    """Close the loop for s.steps synchronous steps and log every snapshot.

    Record k holds the states at time k*dt together with the partition
    summary, objective, and the controls computed from that snapshot (the
    ones that advance it to record k+1; the final record's controls are
    reported but never applied). Partition geometry is retained for the
    steps in snapshot_steps (default: first and last).
    """
    states = [st for st, _ in s.agents]
    lims = [l for _, l in s.agents]
    n = len(states)
    if s.mode == "fixed":
        states = [replace(st, h=0.0, delta=l.delta_min) for st, l in zip(states, lims)]
    wanted = {0, s.steps} if snapshot_steps is None else {int(k) for k in snapshot_steps}

    t_start = time.perf_counter()
    records = []
    partitions: dict[int, Partition] = {}
    violations = 0
    prev_H = None
    controls: list[ControlInput] = []
    for k in range(s.steps + 1):
        t_step = time.perf_counter()
        part = compute_partition(states, lims, s.omega, s.eps_f, s.polygonization)
        qvs = [quality(st, l) for st, l in zip(states, lims)]
        report = objective_from_partition(part, qvs, s.density)
        controls = [
            control_input(
                i, states, lims, s.omega, s.density, s.gains,
                M=s.boundary_samples, eps_f=s.eps_f,
                partition=part, n_vertices=s.polygonization,
            )
            for i in range(n)
        ]
        if s.mode == "fixed":
            controls = [
                ControlInput(u_q=c.u_q, u_z=c.u_z, u_theta=0.0, u_h=0.0, u_delta=0.0)
                for c in controls
            ]
        if prev_H is not None and report.H < prev_H - 1e-9 * abs(prev_H):
            violations += 1
        prev_H = report.H
        records.append(
            StepRecord(
                step=k,
                states=tuple(states),
                controls=tuple(controls),
                report=report,
                cell_areas=tuple(c.area for c in part.cells),
                common_areas=tuple(c.region.area for c in part.common),
                neutral_area=part.neutral.area,
                wall_clock=time.perf_counter() - t_step,
            )
        )
        if k in wanted:
            partitions[k] = part
        if k < s.steps:
            states = [
                project_state(states[i], controls[i], s.dt, lims[i], s.omega)
                for i in range(n)
            ]

    eff = _effective_norm(records[-1].states, controls, s.dt, lims, s.omega)
    return RunLog(
        scenario=s,
        records=tuple(records),
        partitions=partitions,
        converged=eff < CONVERGENCE_TOL,
        effective_norm=eff,
        monotonicity_violations=violations,
        runtime=time.perf_counter() - t_start,
    )


def _region_jsonable(r: Region) -> list:
    return [
        {
            "outer": [[float(x), float(y)] for x, y in outer],
            "holes": [[[float(x), float(y)] for x, y in h] for h in holes],
        }
        for outer, holes in r.polygons
    ]


def _state_jsonable(st: AgentState) -> dict:
    return {
        "q": [float(st.q[0]), float(st.q[1])],
        "z": st.z,
        "theta": st.theta,
        "h": st.h,
        "delta": st.delta,
        "r": st.r,
    }


def emit_outputs(log: RunLog, out_dir: str) -> list[str]:
    """Write trajectories.csv, objective.csv, partition_<step>.json for each
    retained snapshot, and summary.json. Returns the written paths.

    Wall-clock timings never reach these files, so repeated runs of one
    scenario emit byte-identical outputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    n = len(log.scenario.agents)
    written = []

    path = os.path.join(out_dir, "trajectories.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "agent", "x", "y", "z", "theta", "h", "delta"])
        for rec in log.records:
            for i, st in enumerate(rec.states):
                w.writerow(
                    [rec.step, i, repr(float(st.q[0])), repr(float(st.q[1])),
                     repr(st.z), repr(st.theta), repr(st.h), repr(st.delta)]
                )
    written.append(path)

    path = os.path.join(out_dir, "objective.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "H"] + [f"per_agent_{i}" for i in range(n)] + ["neutral_area"])
        for rec in log.records:
            w.writerow(
                [rec.step, repr(rec.report.H)]
                + [repr(v) for v in rec.report.per_agent]
                + [repr(rec.report.neutral_area)]
            )
    written.append(path)

    for k in sorted(log.partitions):
        part = log.partitions[k]
        doc = {
            "step": k,
            "cells": [_region_jsonable(c) for c in part.cells],
            "common": [
                {"f": c.f, "members": list(c.members), "polygons": _region_jsonable(c.region)}
                for c in part.common
            ],
            "neutral": _region_jsonable(part.neutral),
        }
        path = os.path.join(out_dir, f"partition_{k}.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
        written.append(path)

    final = log.final
    summary = {
        "scenario": log.scenario.name,
        "mode": log.scenario.mode,
        "n_agents": n,
        "steps": log.scenario.steps,
        "dt": log.scenario.dt,
        "final_H": final.report.H,
        "converged": log.converged,
        "effective_control_norm": log.effective_norm,
        "monotonicity_violations": log.monotonicity_violations,
        "neutral_area": final.neutral_area,
        "final_states": [_state_jsonable(st) for st in final.states],
    }
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
    written.append(path)
    return written
