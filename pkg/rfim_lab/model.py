"""
model.py - Boundary conditions, spin configurations and the RFIM Hamiltonian

    H(sigma) = - sum_{u,v in region} J_uv s_u s_v
               - sum_{(u,v) in edge boundary} J_uv s_u tau_v
               - sum_{v in region} (h + eps * eta_v) s_v

with the internal pair sum counting each unordered pair once. The boundary
term and the external field combine into one per-site effective field, which
is what every solver consumes.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from rfim_lab.disorder import DisorderParams, FieldSample, scaled_field
from rfim_lab.errors import DomainError
from rfim_lab.lattice import (
    ORIGIN,
    CouplingSpec,
    Region,
    Site,
    annulus_boundary_parts,
    region_graph,
    vertex_boundary,
)

PLUS = 1
MINUS = -1


def _check_spin(value: int) -> int:
    value = int(value)
    if value not in (PLUS, MINUS):
        raise DomainError(f"spin values must be +1 or -1, got {value}")
    return value


# =============================================================================
# Boundary conditions
# =============================================================================


@dataclass(frozen=True)
class BoundaryCondition:
    """
    Spin values tau on the vertex boundary of a region.

    Attributes:
        assignment: Boundary site -> +1 / -1.
        tag: Shorthand (plus, minus, mixed(+,-), clamped, ...).
    """
    assignment: Mapping[Site, int] = field(default_factory=dict)
    tag: str = "custom"

    def __post_init__(self):
        object.__setattr__(
            self, "assignment", {Site(*s): _check_spin(v) for s, v in self.assignment.items()}
        )

    @classmethod
    def uniform(cls, region: Region, coupling: CouplingSpec, spin: int) -> "BoundaryCondition":
        """The same spin on every boundary site of region."""
        spin = _check_spin(spin)
        tag = "plus" if spin == PLUS else "minus"
        return cls({s: spin for s in vertex_boundary(region, coupling)}, tag)

    @classmethod
    def plus(cls, region: Region, coupling: CouplingSpec) -> "BoundaryCondition":
        return cls.uniform(region, coupling, PLUS)

    @classmethod
    def minus(cls, region: Region, coupling: CouplingSpec) -> "BoundaryCondition":
        return cls.uniform(region, coupling, MINUS)

    @classmethod
    def mixed(
        cls,
        ell: int,
        s_outer: int,
        s_inner: int,
        coupling: CouplingSpec,
        center: Site = ORIGIN,
    ) -> "BoundaryCondition":
        """
        Annulus boundary: s_outer beyond ball(3l), s_inner inside ball(l).
        """
        s_outer, s_inner = _check_spin(s_outer), _check_spin(s_inner)
        outer, inner = annulus_boundary_parts(ell, coupling, center)
        assignment: Dict[Site, int] = {s: s_outer for s in outer}
        assignment.update({s: s_inner for s in inner})
        sign = {PLUS: "+", MINUS: "-"}
        return cls(assignment, f"mixed({sign[s_outer]},{sign[s_inner]})")

    def spin(self, site: Site) -> int:
        return self.assignment[site]

    def flipped(self) -> "BoundaryCondition":
        """The global spin flip -tau."""
        return BoundaryCondition({s: -v for s, v in self.assignment.items()}, f"flip({self.tag})")

    def restricted(self, sites) -> "BoundaryCondition":
        """Keep only the given boundary sites."""
        return BoundaryCondition({s: self.assignment[s] for s in sites}, self.tag)

    def dominated_by(self, other: "BoundaryCondition") -> bool:
        """True when tau <= other pointwise on a common support."""
        return all(v <= other.assignment[s] for s, v in self.assignment.items())

    def validate(self, region: Region, coupling: CouplingSpec) -> None:
        """
        Raise DomainError unless the assignment covers exactly the vertex
        boundary of region.
        """
        boundary = vertex_boundary(region, coupling)
        keys = set(self.assignment)
        if keys != boundary:
            missing = len(boundary - keys)
            extra = len(keys - boundary)
            raise DomainError(
                f"boundary condition '{self.tag}' does not match the region boundary "
                f"({missing} missing, {extra} extra sites)"
            )


# =============================================================================
# Spin configurations
# =============================================================================


@dataclass(frozen=True, eq=False)
class SpinConfig:
    """
    One spin per region site.

    Attributes:
        region: The region.
        spins: int8 array of +1 / -1 in region order.
    """
    region: Region
    spins: np.ndarray

    def __post_init__(self):
        spins = np.array(self.spins, dtype=np.int8)
        if spins.shape != (len(self.region),):
            raise DomainError("spin array does not match the region size")
        if spins.size and not np.all(np.abs(spins) == 1):
            raise DomainError("spins must be +1 or -1")
        spins.setflags(write=False)
        object.__setattr__(self, "spins", spins)

    @classmethod
    def uniform(cls, region: Region, spin: int) -> "SpinConfig":
        return cls(region, np.full(len(region), _check_spin(spin), dtype=np.int8))

    def spin(self, site: Site) -> int:
        return int(self.spins[self.region.index[site]])

    def as_assignment(self) -> Dict[Site, int]:
        return {s: int(v) for s, v in zip(self.region.sites, self.spins)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinConfig):
            return NotImplemented
        return self.region.sites == other.region.sites and np.array_equal(self.spins, other.spins)

    def to_grid_text(self, plus: str = "+", minus: str = "-", empty: str = " ") -> str:
        """One text row per y (top row = largest y)."""
        x0, y0, width, height = self.region.bounding_box
        grid = [[empty] * width for _ in range(height)]
        for (x, y), s in zip(self.region.sites, self.spins):
            grid[y - y0][x - x0] = plus if s > 0 else minus
        return "\n".join("".join(row) for row in reversed(grid))

    def to_json(self) -> list:
        return [[x, y, int(s)] for (x, y), s in zip(self.region.sites, self.spins)]


# =============================================================================
# Energies
# =============================================================================


def external_field(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
) -> np.ndarray:
    """
    Per-site effective field b_v = h + eps*eta_v + sum_boundary J_uv tau_v.

    Raises:
        DomainError: The field does not cover region, or bc does not match it.
    """
    bc.validate(region, coupling)
    graph = region_graph(region, coupling)
    return scaled_field(field.on(region), params) + graph.boundary_contribution(bc.assignment)


def hamiltonian_energy(
    config: SpinConfig,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
) -> float:
    """
    H^{region, tau}(sigma).

    Args:
        config: Spins on the region.
        bc: Boundary spins covering the region's vertex boundary.
        coupling: Pair couplings.
        field: Field covering the region.
        params: (h, epsilon, T); T is unused.

    Returns:
        float: The energy.

    Raises:
        DomainError: Region mismatch between config, bc and field.
    """
    region = config.region
    b = external_field(region, bc, coupling, field, params)
    return configuration_energy(config.spins, region, coupling, b)


def configuration_energy(
    spins: np.ndarray,
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
) -> float:
    """Energy of a spin vector given the effective field b."""
    graph = region_graph(region, coupling)
    s = np.asarray(spins, dtype=float)
    pair = float(np.dot(graph.pair_weight, s[graph.pair_i] * s[graph.pair_j]))
    return -pair - float(np.dot(b, s))


def local_fields(
    spins: np.ndarray,
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
) -> np.ndarray:
    """Field felt by each spin: sum_u J_uv s_u + b_v."""
    graph = region_graph(region, coupling)
    return graph.adjacency() @ np.asarray(spins, dtype=float) + b


def flip_deltas(
    spins: np.ndarray,
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
) -> np.ndarray:
    """Energy change of flipping each spin alone: 2 s_v (local field at v)."""
    return 2.0 * np.asarray(spins, dtype=float) * local_fields(spins, region, coupling, b)


def clamp(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    fixed: Mapping[Site, int],
) -> Tuple[Region, BoundaryCondition, float]:
    """
    Fix some region spins and move them into the boundary.

    Returns:
        (reduced region, its boundary condition, energy of the fixed spins)
        where the energy covers fixed-fixed pairs, fixed-boundary links and
        the external field on the fixed sites. The full energy of any
        configuration agreeing with `fixed` equals the reduced-region energy
        plus this constant.
    """
    fixed = {Site(*s): _check_spin(v) for s, v in fixed.items()}
    for s in fixed:
        if s not in region:
            raise DomainError(f"clamped site {s} is not in the region")
    reduced = region.without(fixed)
    combined = dict(bc.assignment)
    combined.update(fixed)
    reduced_bc = BoundaryCondition(
        {s: combined[s] for s in vertex_boundary(reduced, coupling)}, "clamped"
    )
    fixed_region = Region(tuple(fixed))
    fixed_spins = np.array([fixed[s] for s in fixed_region.sites], dtype=np.int8)
    fixed_bc = BoundaryCondition(
        {s: combined[s] for s in vertex_boundary(fixed_region, coupling) if s in combined},
        "clamped",
    )
    # links from fixed sites into the reduced region are counted by the reduced problem
    inside = {s: 0 for s in reduced.sites}
    links = {**fixed_bc.assignment, **inside}
    graph = region_graph(fixed_region, coupling)
    b = scaled_field(field.on(fixed_region), params) + graph.boundary_contribution(links)
    constant = configuration_energy(fixed_spins, fixed_region, coupling, b)
    return reduced, reduced_bc, constant

