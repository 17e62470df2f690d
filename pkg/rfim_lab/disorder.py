"""
disorder.py - Quenched Gaussian random fields and Gaussian tail functions

Field values are a pure function of (seed, site): a counter-based splitmix64
hash of the key gives a uniform in (0, 1), mapped to a standard normal by the
inverse CDF. Two regions sampled with the same seed therefore agree on every
shared site, and replicas can be generated in any order on any worker.
numpy Generators are stream-based and have no keyed, vectorized draw for an
arbitrary set of sites, so np.random.default_rng is not used for fields.

Usage:
    from rfim_lab.disorder import sample_field, replica_seed, chi
    from rfim_lab.lattice import ball, ORIGIN

    seed = replica_seed(base_seed=2024, replica=7)
    field = sample_field(ball(ORIGIN, 3), seed)
    field.value(ORIGIN)

    chi(1.959964)        # ~0.05
"""

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import special

from rfim_lab.errors import DomainError
from rfim_lab.lattice import Region, Site

# Stream tags keep field, heat-bath and Mandelbrot uniforms independent
STREAM_FIELD = 0x46
STREAM_HEAT_BATH = 0x48
STREAM_MANDELBROT = 0x4D
STREAM_REPLICA = 0x52

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


# =============================================================================
# Counter-based generator
# =============================================================================


def _splitmix64(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX_1
        z = (z ^ (z >> np.uint64(27))) * _MIX_2
        return z ^ (z >> np.uint64(31))


def _as_u64(values) -> np.ndarray:
    """Two's-complement view of integers as uint64."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype == object:
        return np.array([int(v) & _MASK64 for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    return arr.astype(np.int64).astype(np.uint64)


def keyed_bits(*keys) -> np.ndarray:
    """
    Hash a key tuple into uint64 words.

    Each key may be a scalar or an array; arrays broadcast against each other.
    The result is a pure function of the key values.
    """
    h = np.uint64(0)
    for key in keys:
        h = _splitmix64(np.bitwise_xor(h, _as_u64(key)))
    return np.asarray(h, dtype=np.uint64)


def keyed_uniform(*keys) -> np.ndarray:
    """Uniforms in the open interval (0, 1) keyed by the given counters."""
    bits = keyed_bits(*keys)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def keyed_normal(*keys) -> np.ndarray:
    """Standard normals keyed by the given counters (inverse-CDF method)."""
    return special.ndtri(keyed_uniform(*keys))


def replica_seed(base_seed: int, replica: int) -> int:
    """Derive the 64-bit seed of one replica from the experiment seed."""
    return int(keyed_bits(STREAM_REPLICA, int(base_seed) & _MASK64, int(replica)))


# =============================================================================
# Parameters and field samples
# =============================================================================


@dataclass(frozen=True)
class DisorderParams:
    """
    Model parameters (h, epsilon, T) in energy units.

    Attributes:
        h: Uniform external field.
        epsilon: Field intensity (0 allowed for the pure Ising limit).
        temperature: T >= 0; T = 0 selects ground states.
    """
    h: float = 0.0
    epsilon: float = 1.0
    temperature: float = 0.0

    def __post_init__(self):
        for name in ("h", "epsilon", "temperature"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.temperature < 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def is_zero_temperature(self) -> bool:
        return self.temperature == 0.0

    def to_dict(self) -> dict:
        return {"h": self.h, "epsilon": self.epsilon, "temperature": self.temperature}


@dataclass(frozen=True, eq=False)
class FieldSample:
    """
    One quenched realization eta over a region.

    Attributes:
        region: Sites carrying a value.
        values: eta_v in region order.
        seed: Replica seed that regenerates the values.
    """
    region: Region
    values: np.ndarray
    seed: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.region),):
            raise DomainError(
                f"field has {values.shape} values for a region of {len(self.region)} sites"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def value(self, site: Site) -> float:
        try:
            return float(self.values[self.region.index[site]])
        except KeyError:
            raise DomainError(f"site {site} is outside the field region") from None

    def on(self, region: Region) -> np.ndarray:
        """Values restricted to a sub-region, in that region's order."""
        if region is self.region or region == self.region:
            return self.values
        if not region.issubset(self.region):
            raise DomainError("region is not covered by the field")
        return self.values[self.region.indices(region.sites)]

    def covers(self, region: Region) -> bool:
        return region.issubset(self.region)

    def require_covers(self, region: Region, what: str = "region") -> None:
        if not self.covers(region):
            raise DomainError(f"field region too small: it does not cover the {what}")


def sample_field(region: Region, seed: int) -> FieldSample:
    """
    Draw i.i.d. standard normals keyed by (seed, x, y).

    Args:
        region: Nonempty region.
        seed: 64-bit replica seed.

    Returns:
        FieldSample: Values that agree sitewise with any other region sampled
        under the same seed.
    """
    if len(region) == 0:
        raise DomainError("cannot sample a field on an empty region")
    xs, ys = region.coords[:, 0], region.coords[:, 1]
    values = keyed_normal(STREAM_FIELD, int(seed) & _MASK64, xs, ys)
    return FieldSample(region, values, int(seed))


def constant_field(region: Region, value: float = 0.0, seed: int = 0) -> FieldSample:
    """A deterministic field with the same value at every site."""
    return FieldSample(region, np.full(len(region), float(value)), seed)


def shift_field(field: FieldSample, inner: Region, t: float) -> FieldSample:
    """
    Add a uniform shift t to eta on the inner sites.

    Raises:
        DomainError: inner is not contained in the field region.
    """
    if not field.covers(inner):
        raise DomainError("inner region is not contained in the field region")
    values = np.array(field.values)
    if t != 0.0:
        values[field.region.indices(inner.sites)] += t
    return FieldSample(field.region, values, field.seed)


def hat_eta(field: FieldSample, inner: Region) -> float:
    """(1 / sqrt|inner|) * sum of eta over the inner sites."""
    if len(inner) == 0:
        raise DomainError("hat_eta of an empty region")
    return float(np.sum(field.on(inner)) / math.sqrt(len(inner)))


def block_sum(field: FieldSample, sites: Iterable[Site]) -> float:
    """eta(D) = sum of eta over a set of sites."""
    return float(sum(field.value(s) for s in sites))


# =============================================================================
# Gaussian tail functions
# =============================================================================


def phi(s):
    """Standard normal density exp(-s^2/2) / sqrt(2 pi)."""
    s = np.asarray(s, dtype=float)
    out = np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def chi(t):
    """
    Two-sided Gaussian tail 2 * int_t^inf phi(s) ds = erfc(t / sqrt 2).

    Negative arguments follow the integral literally and return values above 1.
    """
    t = np.asarray(t, dtype=float)
    out = special.erfc(t / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def chi_inverse(p: float) -> float:
    """The t >= 0 with chi(t) = p, for p in (0, 1]."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"chi_inverse requires p in (0, 1], got {p}")
    return float(math.sqrt(2.0) * special.erfcinv(p))


def gamma_exponent(J: float, epsilon: float) -> float:
    """2^-10 * chi(50 J / epsilon), the nearest-neighbor decay exponent."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    if J < 0:
        raise DomainError(f"J must be >= 0, got {J}")
    return 2.0 ** -10 * chi(50.0 * J / epsilon)


def scaled_field(values: np.ndarray, params: DisorderParams) -> np.ndarray:
    """Local external field h + epsilon * eta."""
    return params.h + params.epsilon * np.asarray(values, dtype=float)
