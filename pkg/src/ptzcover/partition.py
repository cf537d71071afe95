"""Quality-dominance partition of the region of interest.

No Voronoi diagram is involved: the workspace is split by coverage quality.
Agent i's cell W_i is the part of its guaranteed region (inside Omega) where
no other covering agent has equal or higher quality. Where agents of equal
quality overlap, the overlap becomes a shared common region, credited once.
What no guaranteed region covers is the neutral region. Cells may be
non-convex, empty, multi-part, or have holes, so everything is a Region.

Equality of qualities is decided with a tolerance eps_f: exact float ties
essentially never happen, yet identical agents must tie deterministically.
Equal-quality groups are the connected components of the pairwise relation
"|f_i - f_j| <= eps_f and the guaranteed regions overlap". Components keep
the tessellation deterministic when ties chain through intermediaries; cells
subtract their group-mates and any common region of comparable quality so
that cells, commons, and neutral stay pairwise disjoint even then.
"""
from __future__ import annotations

from dataclasses import dataclass

from shapely import union_all

from .geom2d import ConvexPolygon, Region, ellipse_to_polygon, DEFAULT_POLYGONIZATION
from .sensing import AgentLimits, AgentState, guaranteed_region, quality

# Below this overlap area two regions are considered merely touching, not
# sharing a common region (area units; far above polygonization roundoff).
_MIN_OVERLAP_AREA = 1e-12

DEFAULT_EPS_F = 1e-9


@dataclass(frozen=True, eq=False)
class CommonRegion:
    """A maximal equal-quality overlap: shared quality f, member agents, geometry."""

    f: float
    members: tuple[int, ...]
    region: Region


@dataclass(frozen=True, eq=False)
class Partition:
    """Cells W_i, common regions W_c^l, neutral region O, and the neighbor graph.

    cells[i] is empty when agent i's guaranteed region is empty or entirely
    dominated. neighbors[i] holds every j whose guaranteed region intersects
    agent i's, regardless of quality.
    """

    cells: tuple[Region, ...]
    common: tuple[CommonRegion, ...]
    neutral: Region
    neighbors: tuple[frozenset[int], ...]


def compute_partition(
    states: list[AgentState],
    lims: list[AgentLimits],
    omega: ConvexPolygon,
    eps_f: float = DEFAULT_EPS_F,
    n_vertices: int = DEFAULT_POLYGONIZATION,
) -> Partition:
    """Tessellate Omega by coverage-quality dominance.

    For each agent with a nonempty guaranteed region C_i (polygonized at
    n_vertices), W_i = (C_i intersect Omega) minus every C_j with
    f_j >= f_i - eps_f, j != i: strictly better agents steal the overlap,
    equal-quality overlaps are routed to common regions instead. A common
    region takes its group's mean quality and loses any part covered by a
    strictly better outsider. The neutral region is Omega minus all C_i.
    """
    if len(states) != len(lims):
        raise ValueError(f"{len(states)} states but {len(lims)} limit sets")
    if eps_f <= 0.0:
        raise ValueError(f"eps_f must be positive, got {eps_f}")
    n = len(states)
    omega_sh = omega.to_shapely()

    f = [quality(s, l).f for s, l in zip(states, lims)]
    gs = []       # polygonized guaranteed region (shapely) or None
    clipped = []  # gs intersected with Omega
    for s in states:
        e = guaranteed_region(s)
        if e is None:
            gs.append(None)
            clipped.append(None)
        else:
            poly = ellipse_to_polygon(e, n_vertices).to_shapely()
            gs.append(poly)
            clipped.append(poly.intersection(omega_sh))

    neighbors = [set() for _ in range(n)]
    for i in range(n):
        if gs[i] is None:
            continue
        for j in range(i + 1, n):
            if gs[j] is not None and gs[i].intersects(gs[j]):
                neighbors[i].add(j)
                neighbors[j].add(i)

    # Equal-quality groups: connected components over overlapping equal pairs.
    equal_pairs = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if gs[i] is not None
        and gs[j] is not None
        and abs(f[i] - f[j]) <= eps_f
        and gs[i].intersection(gs[j]).area > _MIN_OVERLAP_AREA
    ]
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in equal_pairs:
        parent[find(i)] = find(j)
    components: dict[int, list[int]] = {}
    for i, j in equal_pairs:
        components.setdefault(find(i), [])
    for i in range(n):
        root = find(i)
        if root in components:
            components[root].append(i)

    group_of = {i: None for i in range(n)}
    common = []
    for members in sorted(components.values()):
        f_l = sum(f[k] for k in members) / len(members)
        overlaps = [
            clipped[i].intersection(clipped[j])
            for idx, i in enumerate(members)
            for j in members[idx + 1:]
        ]
        shared = union_all(overlaps)
        dominators = [
            gs[k] for k in range(n)
            if k not in members and gs[k] is not None and f[k] > f_l + eps_f
        ]
        if dominators:
            shared = shared.difference(union_all(dominators))
        region = Region.from_shapely(shared)
        if not region.is_empty:
            for k in members:
                group_of[k] = len(common)
            common.append(CommonRegion(f=f_l, members=tuple(members), region=region))

    cells = []
    for i in range(n):
        if clipped[i] is None:
            cells.append(Region.empty())
            continue
        mates = set(common[group_of[i]].members) - {i} if group_of[i] is not None else set()
        stolen = [
            gs[j] for j in range(n)
            if j != i and gs[j] is not None and (f[j] >= f[i] - eps_f or j in mates)
        ]
        # Comparable-quality commons also claim their ground, so eps-chained
        # groups cannot leave a sliver counted both here and there.
        stolen += [
            c.region.to_shapely() for idx, c in enumerate(common)
            if idx != group_of[i] and c.f >= f[i] - eps_f
        ]
        cell = clipped[i].difference(union_all(stolen)) if stolen else clipped[i]
        cells.append(Region.from_shapely(cell))

    covered = union_all([g for g in gs if g is not None])
    neutral = Region.from_shapely(omega_sh.difference(covered))

    return Partition(
        cells=tuple(cells),
        common=tuple(common),
        neutral=neutral,
        neighbors=tuple(frozenset(s) for s in neighbors),
    )
