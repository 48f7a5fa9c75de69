"""
Diagnostics on complex node sequences.

Carleson products, pseudo-hyperbolic and euclidean separation, the Blaschke
condition, upper uniform density and discrete Carleson-measure constants, all
on finite truncations. Products are accumulated as sums of logarithms.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from pwinterp.config import get_settings
from pwinterp.errors import ConfigValidationError, DegenerateSequenceError, SequenceError
from pwinterp.io_formats import read_sequence_file, sequence_text

logger = logging.getLogger(__name__)

_ROW_CHUNK = 256
SIDES = ("upper", "lower")


@dataclass(frozen=True)
class HalfPlane:
    """{Im z > offset} (upper) or {Im z < offset} (lower)."""

    offset: float = 0.0
    side: str = "upper"

    def __post_init__(self):
        if self.side not in SIDES:
            raise SequenceError(f"Half-plane side must be 'upper' or 'lower', got '{self.side}'")

    @property
    def sign(self) -> float:
        return 1.0 if self.side == "upper" else -1.0

    def depth(self, z) -> np.ndarray:
        """Signed distance to the boundary line, positive inside."""
        return self.sign * (np.imag(z) - self.offset)

    def contains(self, z) -> np.ndarray:
        return self.depth(z) > 0

    def reflect(self, z) -> np.ndarray:
        """Mirror image across the line Im z = offset."""
        return np.conj(z) + 2j * self.offset

    def require_inside(self, z, what: str = "point") -> None:
        depth = np.atleast_1d(self.depth(np.asarray(z, dtype=complex)))
        bad = np.flatnonzero(depth <= 0)
        if bad.size:
            raise SequenceError(
                f"{what} {int(bad[0])} lies on or outside the {self.side} half-plane "
                f"Im z {'>' if self.side == 'upper' else '<'} {self.offset}"
            )


def _first_duplicate(points: np.ndarray, tol: float) -> Optional[tuple]:
    order = np.argsort(points.real, kind="stable")
    srt = points[order]
    shift = 1
    while shift < len(srt):
        near_re = (srt.real[shift:] - srt.real[:-shift]) <= tol
        if not near_re.any():
            break
        close = near_re & (np.abs(srt[shift:] - srt[:-shift]) <= tol)
        if close.any():
            k = int(np.flatnonzero(close)[0])
            return int(order[k]), int(order[k + shift])
        shift += 1
    return None


@dataclass(frozen=True, eq=False)
class ComplexSequence:
    """
    A finite truncation of a node family.

    Attributes:
        points: pairwise distinct complex nodes
        strip_bound: optional M with |Im z| <= M for every node
        generator: tag describing how the truncation was produced
    """

    points: np.ndarray
    strip_bound: Optional[float] = None
    generator: Optional[str] = None

    def __post_init__(self):
        points = np.atleast_1d(np.asarray(self.points, dtype=complex)).copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if points.ndim != 1:
            raise SequenceError("points must be a one-dimensional list")
        duplicate = _first_duplicate(points, get_settings().duplicate_tolerance)
        if duplicate is not None:
            i, j = duplicate
            raise SequenceError(f"points {i} and {j} coincide ({points[i]} ~ {points[j]})")
        if self.strip_bound is not None:
            if self.strip_bound < 0:
                raise SequenceError("strip_bound must be nonnegative")
            outside = np.flatnonzero(np.abs(points.imag) > self.strip_bound)
            if outside.size:
                k = int(outside[0])
                raise SequenceError(f"point {k} ({points[k]}) violates |Im z| <= {self.strip_bound}")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, mask) -> "ComplexSequence":
        return ComplexSequence(self.points[mask], self.strip_bound, self.generator)

    def to_text(self) -> str:
        return sequence_text(self.points, self.strip_bound, self.generator)

    @classmethod
    def from_file(cls, path: Path) -> "ComplexSequence":
        points, meta = read_sequence_file(path)
        strip = meta.get("strip_bound")
        return cls(points, float(strip) if strip is not None else None, meta.get("generator"))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms (location, mass) with nonnegative masses."""

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        locations = np.atleast_1d(np.asarray(self.locations, dtype=complex))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if locations.shape != masses.shape:
            raise SequenceError("one mass per atom is required")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise SequenceError("masses must be finite and nonnegative")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return len(self.locations)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.locations, self.masses * factor)

    def subset(self, mask) -> "DiscreteMeasure":
        return DiscreteMeasure(self.locations[mask], self.masses[mask])


# Generators


def perturbed_integers(p: float, N: int) -> ComplexSequence:
    """lambda_0 = 0 and lambda_n = n + sign(n)/(2 max(p, q)) for 0 < |n| <= N."""
    if not 1 < p < math.inf:
        raise ConfigValidationError(f"p must lie in (1, inf), got {p}")
    q = p / (p - 1.0)
    delta = 1.0 / (2.0 * max(p, q))
    n = np.arange(-N, N + 1, dtype=float)
    return ComplexSequence(n + np.sign(n) * delta, 0.0, f"perturbed-integers:p={p:g}:N={N}")


def shifted_integers(N: int, shift: complex = 0.0) -> ComplexSequence:
    """n + shift for |n| <= N."""
    n = np.arange(-N, N + 1, dtype=float)
    return ComplexSequence(n + shift, abs(complex(shift).imag), f"shifted-integers:N={N}:shift={shift}")


def imaginary_ladder(k_max: int, base: float = 2.0, scale: float = 1.0) -> ComplexSequence:
    """i * scale * base**k for 0 <= k <= k_max."""
    k = np.arange(k_max + 1, dtype=float)
    return ComplexSequence(1j * scale * base**k, None, f"imaginary-ladder:k_max={k_max}:base={base:g}")


# Carleson products


def carleson_factor(lam: complex, mu: complex, hp: HalfPlane) -> float:
    """|(lam - mu) / (lam - conj(mu) - 2ia)| for two distinct interior points."""
    hp.require_inside(np.array([lam, mu]))
    if abs(lam - mu) <= get_settings().duplicate_tolerance:
        raise SequenceError(f"carleson_factor needs distinct points, got {lam} twice")
    return float(abs(lam - mu) / abs(lam - hp.reflect(mu)))


def log_carleson_products(seq: ComplexSequence, hp: HalfPlane,
                          indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Logarithms of the Carleson products theta_n (rows chunked to bound memory)."""
    pts = seq.points
    hp.require_inside(pts)
    rows = np.arange(len(pts)) if indices is None else np.asarray(indices, dtype=int)
    reflected = hp.reflect(pts)
    out = np.empty(len(rows))
    for start in range(0, len(rows), _ROW_CHUNK):
        idx = rows[start:start + _ROW_CHUNK]
        lam = pts[idx][:, None]
        with np.errstate(divide="ignore"):
            terms = np.log(np.abs(lam - pts[None, :])) - np.log(np.abs(lam - reflected[None, :]))
        terms[np.arange(len(idx)), idx] = 0.0
        out[start:start + len(idx)] = terms.sum(axis=1)
    return out


def carleson_products(seq: ComplexSequence, hp: HalfPlane,
                      indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    theta_n = prod_{k != n} carleson_factor(lambda_n, lambda_k) for every node.

    Args:
        seq: nodes, all strictly inside hp
        hp: the half-plane
        indices: restrict the output to these node positions

    Returns:
        Array of products in (0, 1]
    """
    return np.exp(log_carleson_products(seq, hp, indices))


def _pairwise_min(points: np.ndarray, distance: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    best = np.inf
    for start in range(0, len(points), _ROW_CHUNK):
        rows = np.arange(start, min(start + _ROW_CHUNK, len(points)))
        values = distance(points[rows][:, None], points[None, :])
        values[np.arange(len(rows)), rows] = np.inf
        best = min(best, float(values.min()))
    return best


class SeparationReport(NamedTuple):
    psh_gap: Optional[float]
    euclid_gap: float


def separation_report(seq: ComplexSequence, hp: Optional[HalfPlane] = None) -> SeparationReport:
    """
    Minimal pseudo-hyperbolic and euclidean distances over all pairs.

    The pseudo-hyperbolic gap needs a half-plane; without one it is None.

    Raises:
        DegenerateSequenceError: fewer than two points
    """
    if len(seq) < 2:
        raise DegenerateSequenceError(f"separation needs at least 2 points, got {len(seq)}")
    euclid = _pairwise_min(seq.points, lambda a, b: np.abs(a - b))
    psh = None
    if hp is not None:
        hp.require_inside(seq.points)
        psh = _pairwise_min(seq.points, lambda a, b: np.abs(a - b) / np.abs(a - hp.reflect(b)))
    return SeparationReport(psh, euclid)


class BlaschkeSum(NamedTuple):
    total: float
    last_term: float


def blaschke_condition_sum(seq: ComplexSequence, hp: HalfPlane) -> BlaschkeSum:
    """sum |Im lambda - a| / (1 + |lambda|^2), plus the term of the largest-modulus node."""
    hp.require_inside(seq.points)
    terms = hp.depth(seq.points) / (1.0 + np.abs(seq.points) ** 2)
    last = terms[int(np.argmax(np.abs(seq.points)))]
    return BlaschkeSum(float(terms.sum()), float(last))


# Density


def upper_uniform_density(seq: ComplexSequence, r_grid: Sequence[float]) -> List[tuple]:
    """
    (r, n+(r)/r) for each window length r.

    n+(r) is the largest number of real parts in a closed window [x, x + r];
    the maximum over a finite set is attained with x at a real part or at a
    real part minus r.

    Raises:
        SequenceError: the sequence has no strip bound
    """
    if seq.strip_bound is None:
        raise SequenceError("upper uniform density requires a strip-bounded sequence")
    radii = np.asarray(r_grid, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ConfigValidationError("r_grid must be positive and strictly increasing")
    re = np.sort(seq.points.real)
    ratios = []
    for r in radii:
        starts = np.concatenate([re, re - r])
        counts = np.searchsorted(re, starts + r, side="right") - np.searchsorted(re, starts, side="left")
        ratios.append((float(r), float(counts.max()) / float(r)))
    return ratios


class DensityVerdict(NamedTuple):
    euclid_gap: float
    density_low: float
    density_high: float
    critical_density: float
    verdict: str


def density_interpolation_test(seq: ComplexSequence, tau: float, r_grid: Sequence[float]) -> DensityVerdict:
    """
    Compare the density estimate with tau/pi for a separated strip sequence.

    At the largest window r the count n+(r) brackets r*D+ within one point, so
    D+ lies in [(n+ - 1)/r, (n+ + 1)/r]. The verdict is `sufficient` when the
    whole bracket is below tau/pi, `violates_necessary` when it is above, and
    `inconclusive` otherwise.
    """
    gap = separation_report(seq).euclid_gap
    r, ratio = upper_uniform_density(seq, r_grid)[-1]
    count = ratio * r
    low, high = (count - 1.0) / r, (count + 1.0) / r
    critical = tau / math.pi
    if high < critical:
        verdict = "sufficient"
    elif low > critical:
        verdict = "violates_necessary"
    else:
        verdict = "inconclusive"
    logger.info(f"Density bracket [{low:.4g}, {high:.4g}] vs tau/pi = {critical:.4g}: {verdict}")
    return DensityVerdict(gap, low, high, critical, verdict)


# Measures


def sigma_measure(seq: ComplexSequence, hp: HalfPlane) -> DiscreteMeasure:
    """sum |Im lambda_n - a| delta_{lambda_n}."""
    hp.require_inside(seq.points)
    return DiscreteMeasure(seq.points, hp.depth(seq.points))


def carleson_measure_constant(m: DiscreteMeasure, hp: HalfPlane) -> float:
    """
    Lower bound for sup m(Q)/h over closed squares Q standing on the boundary line.

    Q = {x0 <= x <= x0 + h, 0 < depth <= h}. Sides h run over powers of two
    between half the minimal spacing of distinct atoms and the diameter,
    plus the atom depths; left edges run over atom abscissas and abscissas minus h.
    Every square is dominated by a swept square of at most twice its side,
    so the result is within a factor 2 of the supremum.
    """
    if len(m) == 0:
        return 0.0
    hp.require_inside(m.locations, what="atom")
    x = m.locations.real
    depth = hp.depth(m.locations)
    order = np.argsort(x, kind="stable")
    x, depth, mass = x[order], depth[order], m.masses[order]

    h_lo = float(depth.min())
    h_hi = float(depth.max())
    distinct = np.unique(m.locations)
    if len(distinct) > 1:
        # coincident atoms are legal in a measure; space only the distinct locations
        h_lo = min(h_lo, 0.5 * _pairwise_min(distinct, lambda a, b: np.abs(a - b)))
        # bounding-box diagonal, never below the diameter
        h_hi = max(h_hi, float(np.hypot(np.ptp(m.locations.real), np.ptp(m.locations.imag))))
    powers = 2.0 ** np.arange(math.floor(math.log2(h_lo)), math.ceil(math.log2(h_hi)) + 1)
    sides = np.unique(np.concatenate([powers, depth]))

    best, best_square = 0.0, None
    for h in sides:
        inside = depth <= h
        if not inside.any():
            continue
        xs = x[inside]
        cumulative = np.concatenate([[0.0], np.cumsum(mass[inside])])
        starts = np.concatenate([xs, xs - h])
        lo = np.searchsorted(xs, starts, side="left")
        hi = np.searchsorted(xs, starts + h, side="right")
        totals = cumulative[hi] - cumulative[lo]
        k = int(np.argmax(totals))
        if totals[k] / h > best:
            best, best_square = totals[k] / h, (float(starts[k]), float(h))
    logger.debug(f"Carleson sweep over {len(sides)} sides: best {best:.6g} at square {best_square}")
    return float(best)


# Half-plane sweeps and Blaschke products


def blaschke_product(seq: ComplexSequence, hp: HalfPlane, z) -> np.ndarray:
    """
    Finite Blaschke product of the nodes in hp.

    Each factor (z - lambda)/(z - conj(lambda) - 2ia) is rotated to be
    positive at the reference point a + i (upper) or a - i (lower).
    """
    hp.require_inside(seq.points)
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    lam = seq.points
    reflected = hp.reflect(lam)
    reference = hp.offset * 1j + hp.sign * 1j
    rotation = np.angle((reference - lam) / (reference - reflected))
    log_mod = np.zeros(flat.shape)
    phase = np.zeros(flat.shape)
    for start in range(0, len(flat), _ROW_CHUNK):
        block = flat[start:start + _ROW_CHUNK][:, None]
        ratio = (block - lam[None, :]) / (block - reflected[None, :])
        with np.errstate(divide="ignore"):
            log_mod[start:start + len(block)] = np.log(np.abs(ratio)).sum(axis=1)
        phase[start:start + len(block)] = (np.angle(ratio) - rotation[None, :]).sum(axis=1)
    values = np.exp(log_mod) * np.exp(1j * phase)
    return values.reshape(z.shape) if z.ndim else values[0]


class SweepRow(NamedTuple):
    offset: float
    side: str
    inf_theta: float
    count: int


def carleson_sweep(seq: ComplexSequence, offsets: Sequence[float]) -> List[SweepRow]:
    """Infimum of the Carleson products of seq restricted to each half-plane."""
    rows = []
    for a in offsets:
        for side in SIDES:
            hp = HalfPlane(float(a), side)
            inside = hp.contains(seq.points)
            count = int(inside.sum())
            if count == 0:
                rows.append(SweepRow(float(a), side, float("nan"), 0))
                continue
            theta = carleson_products(seq.subset(inside), hp)
            rows.append(SweepRow(float(a), side, float(theta.min()), count))
    return rows
