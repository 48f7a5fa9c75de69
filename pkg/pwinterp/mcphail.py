"""
Weighted interpolation in Hardy spaces of a half-plane.

The pair (nodes, omega) satisfies the condition (M_q) when the atomic measure

    nu = sum |Im lambda_n - a|^q / (omega_n^q theta_n^q) delta_{lambda_n}

is a Carleson measure, theta_n being the Carleson products. This module
computes nu and its constant, adapts Paley-Wiener weights to each half-plane,
and compares the constant with minimal-norm interpolation in H^2.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from pwinterp.config import get_settings
from pwinterp.errors import ConfigValidationError, ProductUnderflowError, SequenceError
from pwinterp.seqlab import (
    ComplexSequence,
    DiscreteMeasure,
    HalfPlane,
    carleson_measure_constant,
    log_carleson_products,
)

logger = logging.getLogger(__name__)

MAX_ORACLE_NODES = 40


@dataclass(frozen=True, eq=False)
class WeightedPair:
    """Nodes strictly inside `halfplane` with one positive weight each."""

    seq: ComplexSequence
    weights: np.ndarray
    q: float = 2.0
    halfplane: HalfPlane = HalfPlane()

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if len(weights) != len(self.seq):
            raise SequenceError(f"{len(weights)} weights for {len(self.seq)} nodes")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise SequenceError("weights must be finite and positive")
        if not 1 < self.q < math.inf:
            raise ConfigValidationError(f"q must lie in (1, inf), got {self.q}")
        self.halfplane.require_inside(self.seq.points, what="node")
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.seq)

    def with_weights(self, weights) -> "WeightedPair":
        return WeightedPair(self.seq, weights, self.q, self.halfplane)

    def subset(self, mask) -> "WeightedPair":
        return WeightedPair(self.seq.subset(mask), self.weights[mask], self.q, self.halfplane)


def mcphail_measure(pair: WeightedPair, hp: Optional[HalfPlane] = None) -> DiscreteMeasure:
    """
    Masses |Im lambda_n - a|^q / (omega_n theta_n)^q, accumulated in log space.

    Raises:
        ProductUnderflowError: theta_n below the configured floor
    """
    hp = hp or pair.halfplane
    log_theta = log_carleson_products(pair.seq, hp) if len(pair) > 1 else np.zeros(len(pair))
    floor = math.log(get_settings().underflow_floor)
    low = np.flatnonzero(log_theta < floor)
    if low.size:
        n = int(low[0])
        raise ProductUnderflowError(
            f"Carleson product of node {n} is below {get_settings().underflow_floor:g}", index=n
        )
    depth = hp.depth(pair.seq.points)
    log_mass = pair.q * (np.log(depth) - np.log(pair.weights) - log_theta)
    return DiscreteMeasure(pair.seq.points, np.exp(log_mass))


class MqVerdict(NamedTuple):
    constant: float
    threshold: float
    satisfied: bool


def mq_check(pair: WeightedPair, hp: Optional[HalfPlane] = None,
             threshold: Optional[float] = None) -> MqVerdict:
    """Carleson constant of the weighted measure against a threshold (default from settings)."""
    hp = hp or pair.halfplane
    threshold = get_settings().mq_threshold if threshold is None else threshold
    constant = carleson_measure_constant(mcphail_measure(pair, hp), hp)
    verdict = MqVerdict(constant, threshold, constant <= threshold)
    logger.info(
        f"(M_q) check on {len(pair)} nodes in {hp.side} half-plane a={hp.offset:g}: "
        f"constant {constant:.6g} ({'within' if verdict.satisfied else 'above'} {threshold:g})"
    )
    return verdict


class AdaptedPairs(NamedTuple):
    upper: Optional[WeightedPair]
    lower: Optional[WeightedPair]
    excluded: List[int]


def pw_weight_adaptation(seq: ComplexSequence, weights, tau: float, a: float = 0.0,
                         q: float = 2.0) -> AdaptedPairs:
    """
    Split the nodes at Im z = a and adapt the weights to each side.

    Upper half-plane nodes get omega_n exp(tau Im lambda_n), lower ones
    omega_n exp(-tau Im lambda_n). Nodes on the line are left out.
    """
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    y = seq.points.imag
    excluded = [int(k) for k in np.flatnonzero(np.abs(y - a) <= get_settings().duplicate_tolerance)]
    if excluded:
        logger.warning(f"Nodes {excluded} lie on the line Im z = {a:g} and are excluded")
    pairs = {}
    for side, sign in (("upper", 1.0), ("lower", -1.0)):
        hp = HalfPlane(a, side)
        mask = hp.depth(seq.points) > get_settings().duplicate_tolerance
        if not mask.any():
            pairs[side] = None
            continue
        adapted = weights[mask] * np.exp(sign * tau * y[mask])
        pairs[side] = WeightedPair(seq.subset(mask), adapted, q, hp)
    return AdaptedPairs(pairs["upper"], pairs["lower"], excluded)


def hardy_kernel(lam: complex, z, hp: HalfPlane) -> np.ndarray:
    """Reproducing kernel of H^2 of the half-plane, centred at lam."""
    z = np.asarray(z, dtype=complex)
    return hp.sign * 1j / (2.0 * np.pi * (z - hp.reflect(lam)))


def hardy_gram(seq: ComplexSequence, hp: HalfPlane) -> np.ndarray:
    """G[k, n] = k_{lambda_n}(lambda_k) = <k_{lambda_n}, k_{lambda_k}>."""
    hp.require_inside(seq.points)
    lam = seq.points
    return hardy_kernel(lam[None, :], lam[:, None], hp)


class OracleResult(NamedTuple):
    norm: float
    condition: float
    regularized: bool


def _weighted_gram(pair: WeightedPair, hp: HalfPlane) -> Tuple[np.ndarray, float, bool]:
    """D G D with D = diag(omega); ridge-regularised when ill conditioned."""
    settings = get_settings()
    gram = hardy_gram(pair.seq, hp)
    matrix = pair.weights[:, None] * gram * pair.weights[None, :]
    matrix = 0.5 * (matrix + matrix.conj().T)
    eigenvalues = linalg.eigh(matrix, eigvals_only=True)
    condition = float(eigenvalues[-1] / eigenvalues[0]) if eigenvalues[0] > 0 else math.inf
    regularized = condition > 1e14
    if regularized:
        ridge = settings.ridge_factor * float(np.trace(matrix).real)
        matrix = matrix + ridge * np.eye(len(matrix))
        logger.warning(f"Weighted Hardy Gram matrix has condition {condition:.3e}; added ridge {ridge:.3e}")
    return matrix, condition, regularized


def solvability_oracle(pair: WeightedPair, hp: Optional[HalfPlane] = None, p: float = 2.0) -> OracleResult:
    """
    Norm of the map data -> minimal H^2 interpolant of omega_n f(lambda_n) = a_n.

    The minimal interpolant of f(lambda_n) = a_n / omega_n lies in the span of
    the kernels; its squared norm is a^* (D G D)^{-1} a, so the operator norm
    is 1 / sqrt(smallest eigenvalue of D G D).
    """
    hp = hp or pair.halfplane
    if p != 2:
        raise ConfigValidationError("the solvability oracle is exact only for p = 2")
    if len(pair) > MAX_ORACLE_NODES:
        raise ConfigValidationError(f"the solvability oracle handles at most {MAX_ORACLE_NODES} nodes")
    matrix, condition, regularized = _weighted_gram(pair, hp)
    smallest = float(linalg.eigh(matrix, eigvals_only=True)[0])
    return OracleResult(1.0 / math.sqrt(smallest), condition, regularized)


def omega_minimality_profile(pair: WeightedPair, hp: Optional[HalfPlane] = None) -> np.ndarray:
    """
    Minimal H^2 norms of f_n with omega_n f_n(lambda_k) = delta_nk.

    The minimal f_n has squared norm [(D G D)^{-1}]_{nn}.
    """
    hp = hp or pair.halfplane
    matrix, _, _ = _weighted_gram(pair, hp)
    inverse_diagonal = np.diag(linalg.inv(matrix)).real
    return np.sqrt(inverse_diagonal)


class CorrelationCase(NamedTuple):
    label: str
    oracle_norm: float
    mq_constant: float


class CorrelationStudy(NamedTuple):
    cases: List[CorrelationCase]
    spearman: float
    pvalue: float


def merging_pairs(levels: int = 10) -> List[Tuple[str, WeightedPair]]:
    """Two nodes i and g + i with g = 2^-k for k < levels, unit weights."""
    cases = []
    for k in range(levels):
        gap = 2.0 ** -k
        seq = ComplexSequence(np.array([1j, gap + 1j]), None, f"pair:gap={gap:g}")
        cases.append((f"gap={gap:g}", WeightedPair(seq, np.ones(2), 2.0, HalfPlane())))
    return cases


def correlation_study(cases: Optional[Sequence[Tuple[str, WeightedPair]]] = None) -> CorrelationStudy:
    """Spearman rank correlation between oracle norms and (M_2) constants."""
    cases = merging_pairs() if cases is None else cases
    rows = []
    for label, pair in cases:
        oracle = solvability_oracle(pair)
        constant = mq_check(pair).constant
        rows.append(CorrelationCase(label, oracle.norm, constant))
        logger.debug(f"Case {label}: oracle {oracle.norm:.6g}, constant {constant:.6g}")
    result = stats.spearmanr([r.oracle_norm for r in rows], [r.mq_constant for r in rows])
    study = CorrelationStudy(rows, float(result.correlation), float(result.pvalue))
    logger.info(f"Correlation over {len(rows)} cases: Spearman {study.spearman:.4f}")
    return study
