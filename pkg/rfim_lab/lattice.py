"""
lattice.py - Geometry of the square lattice Z^2

Sites, translation-invariant ferromagnetic coupling specifications, finite
regions (L1 balls, annuli, boxes, arbitrary site sets) and their edge and
vertex boundaries. Regions iterate in row-major order (y, then x), which
also fixes the dense index map site -> [0, n) used by every solver array.

Usage:
    from rfim_lab.lattice import ball, annulus, CouplingSpec, vertex_boundary

    nn = CouplingSpec.nearest_neighbor(J=1.0)
    region = ball(ORIGIN, 2)
    len(region)                          # 13
    len(vertex_boundary(region, nn))     # 12

    # Range-2 isotropic coupling
    r2 = CouplingSpec.isotropic(J=0.5, R=2)
    r2.range                             # 2
    r2.forcing_bound                     # 6.0
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple

import networkx as nx
import numpy as np
from scipy import sparse

from rfim_lab.errors import DomainError, UnsupportedModelError


class Site(NamedTuple):
    """A vertex of Z^2."""
    x: int
    y: int

    def shifted(self, dx: int, dy: int) -> "Site":
        """Return the site displaced by (dx, dy)."""
        return Site(self.x + dx, self.y + dy)

    def distance(self, other: "Site") -> int:
        """Graph (L1) distance to another site."""
        return abs(self.x - other.x) + abs(self.y - other.y)


ORIGIN = Site(0, 0)

UNIT_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def row_major_key(site: Site) -> Tuple[int, int]:
    """Sort key giving row-major order (y first, then x)."""
    return (site.y, site.x)


# =============================================================================
# Couplings
# =============================================================================


@dataclass(frozen=True)
class CouplingSpec:
    """
    Translation-invariant pair couplings of finite range.

    Attributes:
        offsets: Sorted tuple of (dx, dy, J) with J != 0. Symmetric under
            (dx, dy) -> (-dx, -dy). Negative values are representable so that
            solvers can reject them explicitly.
    """
    offsets: Tuple[Tuple[int, int, float], ...] = ()

    def __post_init__(self):
        table: Dict[Tuple[int, int], float] = {}
        for dx, dy, strength in self.offsets:
            dx, dy, strength = int(dx), int(dy), float(strength)
            if (dx, dy) == (0, 0):
                raise DomainError("coupling offset (0, 0) is not a pair interaction")
            if not math.isfinite(strength):
                raise DomainError(f"coupling at ({dx}, {dy}) is not finite")
            if (dx, dy) in table and table[(dx, dy)] != strength:
                raise DomainError(f"conflicting couplings at ({dx}, {dy})")
            if strength != 0.0:
                table[(dx, dy)] = strength
        for (dx, dy), strength in table.items():
            if table.get((-dx, -dy)) != strength:
                raise DomainError(
                    f"coupling is not symmetric: J({dx},{dy}) != J({-dx},{-dy})"
                )
        normalized = tuple(sorted((dx, dy, s) for (dx, dy), s in table.items()))
        object.__setattr__(self, "offsets", normalized)

    @classmethod
    def from_mapping(cls, mapping: Mapping[Tuple[int, int], float]) -> "CouplingSpec":
        """Build from a {(dx, dy): J} mapping."""
        return cls(tuple((dx, dy, J) for (dx, dy), J in mapping.items()))

    @classmethod
    def nearest_neighbor(cls, J: float = 1.0) -> "CouplingSpec":
        """Single strength J on the four unit displacements."""
        return cls(tuple((dx, dy, J) for dx, dy in UNIT_OFFSETS))

    @classmethod
    def isotropic(cls, J: float, R: int) -> "CouplingSpec":
        """Strength J on every displacement with 1 <= |dx| + |dy| <= R."""
        if R < 1:
            raise DomainError(f"range must be >= 1, got {R}")
        return cls(tuple(
            (dx, dy, J)
            for dx in range(-R, R + 1)
            for dy in range(-R, R + 1)
            if 1 <= abs(dx) + abs(dy) <= R
        ))

    @property
    def range(self) -> int:
        """R(J): largest graph distance carrying a nonzero coupling."""
        return max((abs(dx) + abs(dy) for dx, dy, _ in self.offsets), default=0)

    @property
    def is_ferromagnetic(self) -> bool:
        return all(s >= 0.0 for _, _, s in self.offsets)

    @property
    def is_nearest_neighbor(self) -> bool:
        """True for a single strength on the unit displacements (or no coupling)."""
        if not self.offsets:
            return True
        strengths = {s for _, _, s in self.offsets}
        keys = {(dx, dy) for dx, dy, _ in self.offsets}
        return keys == set(UNIT_OFFSETS) and len(strengths) == 1

    @property
    def nn_strength(self) -> float:
        """The J of a nearest-neighbor coupling (0 for the empty coupling)."""
        if not self.is_nearest_neighbor:
            raise UnsupportedModelError("operation requires a nearest-neighbor coupling")
        return self.offsets[0][2] if self.offsets else 0.0

    @property
    def forcing_bound(self) -> float:
        """Sum of |J_{0,u}|: a local field beyond this forces the spin."""
        return float(sum(abs(s) for _, _, s in self.offsets))

    def strength(self, dx: int, dy: int) -> float:
        for ox, oy, s in self.offsets:
            if (ox, oy) == (dx, dy):
                return s
        return 0.0

    def neighbors(self, site: Site) -> Iterator[Tuple[Site, float]]:
        """Yield (neighbor, J) for every coupled site."""
        for dx, dy, s in self.offsets:
            yield Site(site.x + dx, site.y + dy), s

    def require_ferromagnetic(self) -> None:
        if not self.is_ferromagnetic:
            raise UnsupportedModelError(
                "negative couplings make the energy non-submodular; "
                "only ferromagnetic models are supported"
            )

    def to_dict(self) -> dict:
        return {"offsets": [[dx, dy, s] for dx, dy, s in self.offsets]}


# =============================================================================
# Regions
# =============================================================================


class RegionKind(Enum):
    """Shape tag carried into result metadata."""
    BALL = "ball"
    ANNULUS = "annulus"
    BOX = "box"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Region:
    """
    Finite set of sites in row-major order.

    Attributes:
        sites: Distinct sites, sorted row-major on construction.
        kind: Shape tag.
        center: Center of a ball/annulus, lower-left corner of a box.
        radius: Ball radius, annulus ell, or box side.
    """
    sites: Tuple[Site, ...]
    kind: RegionKind = RegionKind.CUSTOM
    center: Optional[Site] = None
    radius: Optional[int] = None

    def __post_init__(self):
        ordered = tuple(sorted((Site(int(s[0]), int(s[1])) for s in self.sites), key=row_major_key))
        for a, b in zip(ordered, ordered[1:]):
            if a == b:
                raise DomainError(f"duplicate site {a} in region")
        object.__setattr__(self, "sites", ordered)

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return site in self.index

    @cached_property
    def index(self) -> Dict[Site, int]:
        """Dense index map site -> [0, n)."""
        return {s: i for i, s in enumerate(self.sites)}

    @cached_property
    def coords(self) -> np.ndarray:
        """(n, 2) int64 array of (x, y)."""
        if not self.sites:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(self.sites, dtype=np.int64)

    @cached_property
    def site_set(self) -> FrozenSet[Site]:
        return frozenset(self.sites)

    def indices(self, sites: Iterable[Site]) -> np.ndarray:
        """Indices of the given sites; all must belong to the region."""
        try:
            return np.array([self.index[s] for s in sites], dtype=np.int64)
        except KeyError as e:
            raise DomainError(f"site {e.args[0]} is not in the region") from None

    def issubset(self, other: "Region") -> bool:
        return self.site_set <= other.site_set

    def without(self, sites: Iterable[Site]) -> "Region":
        """Region with the given sites removed."""
        drop = set(sites)
        return Region(tuple(s for s in self.sites if s not in drop))

    @cached_property
    def bounding_box(self) -> Tuple[int, int, int, int]:
        """(x0, y0, width, height) of the smallest enclosing rectangle."""
        if not self.sites:
            return (0, 0, 0, 0)
        xs, ys = self.coords[:, 0], self.coords[:, 1]
        return (int(xs.min()), int(ys.min()),
                int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))

    def grid_positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of every site inside the bounding-box grid."""
        x0, y0, _, _ = self.bounding_box
        return self.coords[:, 1] - y0, self.coords[:, 0] - x0

    def grid_mask(self) -> np.ndarray:
        """Boolean (height, width) mask of region membership."""
        _, _, width, height = self.bounding_box
        mask = np.zeros((height, width), dtype=bool)
        rows, cols = self.grid_positions()
        mask[rows, cols] = True
        return mask

    def metadata(self) -> dict:
        """(kind, center, radius) description for result records."""
        return {
            "kind": self.kind.value,
            "center": list(self.center) if self.center is not None else None,
            "radius": self.radius,
            "size": len(self),
        }


def ball(center: Site, L: int) -> Region:
    """
    All sites within graph distance L of center.

    Args:
        center: Ball center.
        L: Radius, L >= 0.

    Returns:
        Region: |ball| = 1 + 2L(L+1).
    """
    if L < 0:
        raise DomainError(f"ball radius must be >= 0, got {L}")
    cx, cy = center
    sites = tuple(
        Site(cx + dx, cy + dy)
        for dy in range(-L, L + 1)
        for dx in range(-(L - abs(dy)), L - abs(dy) + 1)
    )
    return Region(sites, RegionKind.BALL, Site(cx, cy), L)


def sphere(center: Site, r: int) -> FrozenSet[Site]:
    """Sites at graph distance exactly r from center."""
    if r < 0:
        raise DomainError(f"sphere radius must be >= 0, got {r}")
    cx, cy = center
    if r == 0:
        return frozenset({Site(cx, cy)})
    out = set()
    for dx in range(-r, r + 1):
        dy = r - abs(dx)
        out.add(Site(cx + dx, cy + dy))
        out.add(Site(cx + dx, cy - dy))
    return frozenset(out)


def annulus(ell: int, center: Site = ORIGIN) -> Region:
    """
    The annulus ball(center, 3*ell) minus ball(center, ell).

    Args:
        ell: Inner radius, ell >= 1.
        center: Common center.

    Returns:
        Region: size 2*3l(3l+1) - 2l(l+1).
    """
    if ell < 1:
        raise DomainError(f"annulus requires ell >= 1, got {ell}")
    cx, cy = center
    outer = 3 * ell
    sites = tuple(
        Site(cx + dx, cy + dy)
        for dy in range(-outer, outer + 1)
        for dx in range(-(outer - abs(dy)), outer - abs(dy) + 1)
        if abs(dx) + abs(dy) > ell
    )
    return Region(sites, RegionKind.ANNULUS, Site(cx, cy), ell)


def box(x0: int, y0: int, width: int, height: Optional[int] = None) -> Region:
    """Axis-aligned box [x0, x0+width) x [y0, y0+height)."""
    height = width if height is None else height
    if width < 1 or height < 1:
        raise DomainError(f"box sides must be >= 1, got {width}x{height}")
    sites = tuple(Site(x, y) for y in range(y0, y0 + height) for x in range(x0, x0 + width))
    return Region(sites, RegionKind.BOX, Site(x0, y0), width if width == height else None)


def custom_region(sites: Iterable[Site]) -> Region:
    return Region(tuple(sites))


def edge_boundary(region: Region, coupling: CouplingSpec) -> FrozenSet[Tuple[Site, Site]]:
    """
    Ordered pairs (u, v) with u inside, v outside and J_{u,v} != 0.
    """
    inside = region.site_set
    return frozenset(
        (u, v)
        for u in region.sites
        for v, _ in coupling.neighbors(u)
        if v not in inside
    )


def vertex_boundary(region: Region, coupling: CouplingSpec) -> FrozenSet[Site]:
    """Outside sites with a nonzero coupling to some inside site."""
    return frozenset(v for _, v in edge_boundary(region, coupling))


def edge_boundary_weight(region: Region, coupling: CouplingSpec) -> float:
    """Sum of J_{u,v} over the edge boundary."""
    return float(sum(
        coupling.strength(v.x - u.x, v.y - u.y)
        for u, v in edge_boundary(region, coupling)
    ))


def annulus_boundary_parts(
    ell: int,
    coupling: CouplingSpec,
    center: Site = ORIGIN,
) -> Tuple[FrozenSet[Site], FrozenSet[Site]]:
    """
    Split the annulus vertex boundary into (outer, inner) parts.

    A boundary site is inner when it belongs to ball(center, ell) and outer
    otherwise (it then lies beyond ball(center, 3*ell)).
    """
    boundary = vertex_boundary(annulus(ell, center), coupling)
    inner_ball = ball(center, ell).site_set
    inner = frozenset(s for s in boundary if s in inner_ball)
    return boundary - inner, inner


# =============================================================================
# Solver view of a region
# =============================================================================


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """
    Index arrays describing the couplings of a region.

    Attributes:
        region: The region.
        coupling: The coupling specification.
        pair_i, pair_j: Internal pairs with pair_i < pair_j (each unordered pair once).
        pair_weight: J of each internal pair.
        boundary_sites: Vertex boundary, row-major.
        link_site: Region index of each boundary link.
        link_boundary: Index into boundary_sites of each boundary link.
        link_weight: J of each boundary link.
    """
    region: Region
    coupling: CouplingSpec
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_weight: np.ndarray
    boundary_sites: Tuple[Site, ...]
    link_site: np.ndarray
    link_boundary: np.ndarray
    link_weight: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.region)

    @property
    def bandwidth(self) -> int:
        """Largest index gap between coupled sites (row-major frontier width)."""
        if self.pair_i.size == 0:
            return 0
        return int(np.max(self.pair_j - self.pair_i))

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric sparse coupling matrix over region indices."""
        if "adjacency" not in self._cache:
            n = self.size
            rows = np.concatenate([self.pair_i, self.pair_j])
            cols = np.concatenate([self.pair_j, self.pair_i])
            data = np.concatenate([self.pair_weight, self.pair_weight])
            self._cache["adjacency"] = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        return self._cache["adjacency"]

    def nx_graph(self) -> nx.Graph:
        """networkx view with region indices as nodes."""
        if "nx" not in self._cache:
            g = nx.Graph()
            g.add_nodes_from(range(self.size))
            g.add_edges_from(zip(self.pair_i.tolist(), self.pair_j.tolist()))
            self._cache["nx"] = g
        return self._cache["nx"]

    def boundary_contribution(self, assignment: Mapping[Site, int]) -> np.ndarray:
        """Per-site sum of J_{u,v} * tau_v over boundary links."""
        out = np.zeros(self.size)
        if self.link_site.size:
            tau = np.array([assignment[s] for s in self.boundary_sites], dtype=float)
            np.add.at(out, self.link_site, self.link_weight * tau[self.link_boundary])
        return out


@lru_cache(maxsize=512)
def region_graph(region: Region, coupling: CouplingSpec) -> RegionGraph:
    """Build (and cache) the solver index arrays for a region."""
    index = region.index
    pairs_i: List[int] = []
    pairs_j: List[int] = []
    pair_w: List[float] = []
    link_s: List[int] = []
    link_v: List[Site] = []
    link_w: List[float] = []
    for i, u in enumerate(region.sites):
        for v, s in coupling.neighbors(u):
            j = index.get(v)
            if j is None:
                link_s.append(i)
                link_v.append(v)
                link_w.append(s)
            elif i < j:
                pairs_i.append(i)
                pairs_j.append(j)
                pair_w.append(s)
    boundary_sites = tuple(sorted(set(link_v), key=row_major_key))
    bindex = {s: k for k, s in enumerate(boundary_sites)}
    return RegionGraph(
        region=region,
        coupling=coupling,
        pair_i=np.array(pairs_i, dtype=np.int64),
        pair_j=np.array(pairs_j, dtype=np.int64),
        pair_weight=np.array(pair_w, dtype=float),
        boundary_sites=boundary_sites,
        link_site=np.array(link_s, dtype=np.int64),
        link_boundary=np.array([bindex[v] for v in link_v], dtype=np.int64),
        link_weight=np.array(link_w, dtype=float),
    )
