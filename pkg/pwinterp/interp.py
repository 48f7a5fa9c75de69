"""
Explicit interpolants f = sum (a_n / omega_n) f_n(z) H_eps(z - lambda_n).

f_n(lambda_k) = delta_nk and H_eps(0) = 1 make the node values exact, and the
product has exponential type at most tau + eps.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from tqdm import tqdm

from pwinterp.biortho import BiorthogonalFamily
from pwinterp.config import get_settings
from pwinterp.errors import ConfigValidationError, InterpolationError
from pwinterp.multiplier import BumpMultiplier, multiplier_eval, multiplier_matrix
from pwinterp.pwcore import line_integrals, line_norm, line_rule
from pwinterp.seqlab import ComplexSequence

logger = logging.getLogger(__name__)

EPSILON_TOLERANCE = 1e-12
FIT_HEIGHTS = (0.5, 1.0, 2.0)


def canonical_weights(nodes: ComplexSequence, bandwidth: float, p: float) -> np.ndarray:
    """omega_n = (1 + |Im lambda_n|)^(1/p) exp(-bandwidth |Im lambda_n|)."""
    y = np.abs(nodes.points.imag)
    return (1.0 + y) ** (1.0 / p) * np.exp(-bandwidth * y)


@dataclass(frozen=True, eq=False)
class InterpolationProblem:
    """
    Targets a_n at the nodes, read as omega_n f(lambda_n) = a_n.

    Attributes:
        nodes: the node sequence
        data: dense complex vector, one entry per node (zero off the support)
        p: exponent in (1, inf)
        tau: bandwidth of the family
        epsilon: bandwidth added by the multiplier
        weights: explicit omega_n > 0; None means canonical weights at tau + eps
    """

    nodes: ComplexSequence
    data: np.ndarray
    p: float = 2.0
    tau: float = math.pi
    epsilon: float = 0.5
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.atleast_1d(np.asarray(self.data, dtype=complex))
        if len(data) != len(self.nodes):
            raise InterpolationError(f"{len(data)} data values for {len(self.nodes)} nodes")
        if not 1 < self.p < math.inf:
            raise ConfigValidationError(f"p must lie in (1, inf), got {self.p}")
        if not (self.tau > 0 and self.epsilon > 0):
            raise ConfigValidationError("tau and epsilon must be positive")
        object.__setattr__(self, "data", data)
        if self.weights is not None:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
            if len(weights) != len(self.nodes) or np.any(weights <= 0):
                raise InterpolationError("weights must be positive, one per node")
            object.__setattr__(self, "weights", weights)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @property
    def bandwidth(self) -> float:
        return self.tau + self.epsilon

    def effective_weights(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return canonical_weights(self.nodes, self.bandwidth, self.p)

    def data_norm(self) -> float:
        return float(np.sum(np.abs(self.data) ** self.p) ** (1.0 / self.p))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.data != 0)


class InterpolationReport(NamedTuple):
    node_residual: float
    residuals: np.ndarray
    norm_ratio: float
    interpolant_norm: float
    data_norm: float
    achieved_bandwidth: float
    weighting: str


class Interpolant:
    """sum c_n f_n(z) H(z - lambda_n) over the data support, evaluated pointwise."""

    def __init__(self, coefficients: np.ndarray, family: BiorthogonalFamily, multiplier: BumpMultiplier):
        coefficients = np.asarray(coefficients, dtype=complex)
        self.indices = np.flatnonzero(coefficients != 0)
        self.coefficients = coefficients[self.indices]
        self.family = family
        self.multiplier = multiplier
        self.bandwidth = family.bandwidth + multiplier.epsilon
        nodes = family.nodes.points
        self.support_radius = 2.0 * float(np.max(np.abs(nodes.real), initial=0.0)) + 8.0

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        if not len(self.indices):
            values = np.zeros(flat.shape, dtype=complex)
        else:
            lam = self.family.nodes.points[self.indices]
            terms = self.family.evaluate(flat, self.indices)
            terms *= multiplier_eval(self.multiplier, flat[:, None] - lam[None, :])
            values = terms @ self.coefficients
        return values.reshape(z.shape) if z.ndim else values[0]

    def __add__(self, other: "Interpolant") -> "Interpolant":
        full = np.zeros(len(self.family), dtype=complex)
        full[self.indices] += self.coefficients
        full[other.indices] += other.coefficients
        return Interpolant(full, self.family, self.multiplier)


class InterpolationEngine:
    """
    Tables of f_n(x) H(x - lambda_n) on a real-line rule and at the nodes.

    One engine serves every data vector on the same (family, multiplier)
    pair; the rule's radius grows until each column's tail is negligible.
    """

    def __init__(self, family: BiorthogonalFamily, multiplier: BumpMultiplier, p: float):
        self.family = family
        self.multiplier = multiplier
        self.p = p
        self.bandwidth = family.bandwidth + multiplier.epsilon
        nodes = family.nodes.points
        self.node_matrix = family.evaluate(nodes) * multiplier_matrix(multiplier, nodes, nodes)
        start = 2.0 * float(np.max(np.abs(nodes.real), initial=0.0)) + 8.0
        _, radius, _ = line_integrals(self._columns, self.bandwidth, 0.0, p, min_radius=start)
        self.radius = radius
        x, self.line_weights = line_rule(-radius, radius, self.bandwidth)
        self.grid_matrix = self._columns(x)
        logger.info(
            f"Interpolation engine: {len(nodes)} nodes, radius {radius:g}, {len(x)} line points"
        )

    def _columns(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self.family.evaluate(z) * multiplier_matrix(self.multiplier, z, self.family.nodes.points)

    def node_values(self, coefficients: np.ndarray) -> np.ndarray:
        return self.node_matrix @ coefficients

    def line_norm(self, coefficients: np.ndarray) -> float:
        values = self.grid_matrix @ coefficients
        return float(self.line_weights @ np.abs(values) ** self.p) ** (1.0 / self.p)


def _check_compatible(prob: InterpolationProblem, fam: BiorthogonalFamily, H: BumpMultiplier) -> None:
    if abs(H.epsilon - prob.epsilon) > EPSILON_TOLERANCE:
        raise InterpolationError(f"multiplier built with eps={H.epsilon:g}, problem asks eps={prob.epsilon:g}")
    if len(fam) != len(prob.nodes) or np.max(
        np.abs(fam.nodes.points - prob.nodes.points), initial=0.0
    ) > get_settings().duplicate_tolerance:
        raise InterpolationError("the family was built on different nodes")
    if fam.bandwidth > prob.tau * (1.0 + EPSILON_TOLERANCE):
        raise InterpolationError(f"family type {fam.bandwidth:g} exceeds tau = {prob.tau:g}")


def solve_interpolation(prob: InterpolationProblem, fam: BiorthogonalFamily, H: BumpMultiplier,
                        engine: Optional[InterpolationEngine] = None):
    """
    Build the interpolant and its report.

    Returns:
        (Interpolant, InterpolationReport)

    Raises:
        InterpolationError: eps mismatch, or the family lives on other nodes
    """
    _check_compatible(prob, fam, H)
    engine = engine or InterpolationEngine(fam, H, prob.p)
    weights = prob.effective_weights()
    coefficients = prob.data / weights
    residuals = np.abs(weights * engine.node_values(coefficients) - prob.data)
    norm = engine.line_norm(coefficients)
    data_norm = prob.data_norm()
    report = InterpolationReport(
        node_residual=float(residuals.max(initial=0.0)),
        residuals=residuals,
        norm_ratio=norm / data_norm if data_norm > 0 else 0.0,
        interpolant_norm=norm,
        data_norm=data_norm,
        achieved_bandwidth=prob.bandwidth,
        weighting="explicit" if prob.weighted else "canonical",
    )
    logger.info(
        f"Solved interpolation on {len(prob.nodes)} nodes: residual {report.node_residual:.2e}, "
        f"norm ratio {report.norm_ratio:.6g}"
    )
    return Interpolant(coefficients, fam, H), report


def verify_interpolant(f, prob: InterpolationProblem) -> InterpolationReport:
    """Residuals and norm ratio recomputed by pointwise evaluation of f."""
    weights = prob.effective_weights()
    residuals = np.abs(weights * np.atleast_1d(f(prob.nodes.points)) - prob.data)
    min_radius = getattr(f, "support_radius", 0.0)
    norm = line_norm(f, 0.0, prob.p, min_radius=min_radius).norm
    data_norm = prob.data_norm()
    return InterpolationReport(
        node_residual=float(residuals.max(initial=0.0)),
        residuals=residuals,
        norm_ratio=norm / data_norm if data_norm > 0 else 0.0,
        interpolant_norm=norm,
        data_norm=data_norm,
        achieved_bandwidth=prob.bandwidth,
        weighting="explicit" if prob.weighted else "canonical",
    )


def random_unit_data(rng: np.random.Generator, size: int, p: float,
                     support: Optional[Sequence[int]] = None) -> np.ndarray:
    """Complex Gaussian data on the support, scaled to unit l^p norm."""
    data = np.zeros(size, dtype=complex)
    support = np.arange(size) if support is None else np.asarray(support, dtype=int)
    data[support] = rng.standard_normal(len(support)) + 1j * rng.standard_normal(len(support))
    return data / np.sum(np.abs(data) ** p) ** (1.0 / p)


class NormStudy(NamedTuple):
    minimum: float
    median: float
    maximum: float
    ratios: np.ndarray
    max_residual: float

    @property
    def spread(self) -> float:
        return self.maximum / self.median


def norm_stability_study(nodes: ComplexSequence, fam: BiorthogonalFamily, H: BumpMultiplier,
                         trials: int = 20, p: float = 2.0, tau: Optional[float] = None,
                         seed: int = 0, support: Optional[Sequence[int]] = None,
                         weights: Optional[np.ndarray] = None) -> NormStudy:
    """
    Norm ratios over random unit data, one independent stream per trial.

    Args:
        support: node positions carrying data; all nodes when None
        weights: explicit omega_n for the weighted problem
    """
    tau = fam.bandwidth if tau is None else tau
    engine = InterpolationEngine(fam, H, p)
    streams = np.random.SeedSequence(seed).spawn(trials)
    ratios, residual = [], 0.0
    for stream in tqdm(streams, desc="norm study", unit="trial", disable=None):
        data = random_unit_data(np.random.default_rng(stream), len(nodes), p, support)
        prob = InterpolationProblem(nodes, data, p, tau, H.epsilon, weights)
        _, report = solve_interpolation(prob, fam, H, engine)
        ratios.append(report.norm_ratio)
        residual = max(residual, report.node_residual)
    ratios = np.asarray(ratios)
    study = NormStudy(float(ratios.min()), float(np.median(ratios)), float(ratios.max()), ratios, residual)
    logger.info(
        f"Norm study ({trials} trials): min {study.minimum:.4g}, median {study.median:.4g}, "
        f"max {study.maximum:.4g}, residual {residual:.2e}"
    )
    return study


def bandwidth_fit(f, heights: Sequence[float] = FIT_HEIGHTS, p: float = 2.0) -> float:
    """Slope of log ||f(. + iy)||_p against y, an estimate of the exponential type."""
    min_radius = getattr(f, "support_radius", 0.0)
    logs: List[float] = [
        math.log(line_norm(f, y, p, min_radius=min_radius).norm) for y in heights
    ]
    slope = float(np.polyfit(np.asarray(heights, dtype=float), logs, 1)[0])
    logger.debug(f"Bandwidth fit over heights {list(heights)}: {slope:.6g}")
    return slope


def negative_control_nodes(k_max: int = 25, gap: float = 1e-3) -> ComplexSequence:
    """Symmetric nodes 0, +-gap and +-(k + 1/4) for 2 <= k <= k_max; the pair near 0 is nearly coincident."""
    k = np.arange(2, k_max + 1, dtype=float) + 0.25
    points = np.concatenate([-k[::-1], [-gap, 0.0, gap], k])
    return ComplexSequence(points, 0.0, f"negative-control:gap={gap:g}:k_max={k_max}")
